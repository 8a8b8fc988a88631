use super::config::*;
use crate::adaptive::LearningRate;

fn diag(d: &[f64]) -> Rows {
    (0..d.len())
        .map(|i| (0..d.len()).map(|j| if i == j { d[i] } else { 0.0 }).collect())
        .collect()
}

fn column(c: &[f64]) -> Rows {
    c.iter().map(|v| vec![*v]).collect()
}

/// Boeing 747 longitudinal case: states `[u, w, q, θ]`, elevator input,
/// pitch rate as the inner-loop output and pitch angle as the pilot's.
pub fn builtin_747() -> ScenarioConfig {
    let a_n = vec![
        vec![-0.003, 0.039, 0.0, -0.322],
        vec![-0.065, -0.319, 7.74, 0.0],
        vec![0.02, -0.101, -0.429, 0.0],
        vec![0.0, 0.0, 1.0, 0.0],
    ];
    let a_p = vec![
        vec![-0.0029, 0.0389, -0.0047, -0.322],
        vec![-0.0661, -0.3171, 7.8254, 0.0008],
        vec![0.0129, -0.0888, 0.121, 0.0051],
        vec![0.0, 0.0, 1.0, 0.0],
    ];
    let b_p = column(&[0.01, -0.18, -1.16, 0.0]);
    ScenarioConfig {
        name: "boeing747-longitudinal".into(),
        plant: PlantSection {
            a_p,
            b_p,
            lambda: vec![1.0],
            c_1: column(&[0.0, 0.0, 1.0, 0.0]),
            c_2: column(&[0.0, 0.0, 0.0, 1.0]),
        },
        design: DesignSection {
            a_n,
            l_x: None,
            feedforward: Feedforward::Reduced {
                states: vec![1, 2],
                c: column(&[0.0, 1.0]),
            },
            lqr_q: diag(&[0.0, 0.0, 0.0, 3.0]),
            lqr_r: vec![vec![3.0]],
        },
        inner: InnerSection {
            gamma_x: LearningRate::Scalar(1.0),
            gamma_lambda: LearningRate::Scalar(1.0),
            q_1: diag(&[0.001; 4]),
            lambda_bounds: BoxBounds::new(0.1, 10.0),
            k_bounds: None,
            init_lambda_hat: vec![1.0],
            init_k_hat_x: None,
        },
        outer: OuterSection {
            tau: 0.3,
            intervals: 5,
            y_o_deg_s: Some(vec![10.0]),
            y_o_crad_s: None,
            gamma_2: LearningRate::Scalar(1.0),
            gamma_3: LearningRate::Scalar(5.0),
            gamma_phi1: LearningRate::Diagonal(vec![0.01, 0.001, 0.01, 0.01]),
            gamma_phi2: LearningRate::Scalar(0.1),
            q_2: diag(&[0.001; 4]),
            lambda2_bounds: BoxBounds::new(0.1, 10.0),
            lambda3_bounds: BoxBounds::new(0.1, 10.0),
            phi1_bounds: BoxBounds::new(-50.0, 50.0),
            phi2_bounds: BoxBounds::new(-50.0, 50.0),
            init_lambda2_hat: vec![1.0],
            init_lambda3_hat: vec![1.0],
            init_phi1_hat: None,
        },
        sim: SimSection {
            step: 1e-3,
            duration: 70.0,
            log_interval: 0.01,
            divergence_cap: 1e8,
            metrics_window: None,
        },
        reference: vec![
            segment(5.0, 20.0, 5.0),
            segment(20.0, 35.0, -5.0),
            segment(35.0, 50.0, 5.0),
        ],
        events: vec![FailureEvent {
            time: 35.0,
            lambda: vec![0.6],
        }],
        sweep: SweepSection {
            tau: vec![0.0, 0.15, 0.3, 0.45, 0.6],
            scale: vec![0.2, 1.0, 5.0],
            e_y_cap: 1e3,
        },
    }
}

fn segment(start: f64, end: f64, level: f64) -> ReferenceSegment {
    ReferenceSegment {
        start,
        end: Some(end),
        level_crad: Some(vec![level]),
        level_deg: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adaptive::compute_lr;
    use crate::numerics::{eigenvalues, matrix_from_rows};
    use crate::Error;

    #[test]
    fn validates() {
        let s = builtin_747().validate().unwrap();
        assert_eq!(s.steps, 70_000);
        assert_eq!(s.log_stride, 10);
        assert_eq!(s.gains.a_r, s.a_n);
    }

    #[test]
    fn nominal_eigenvalues() {
        let c = builtin_747();
        let ev = eigenvalues(&matrix_from_rows(&c.design.a_n).unwrap()).unwrap();
        let expect = [(-0.3750, -0.8818), (-0.3750, 0.8818), (-0.0005, -0.0674), (-0.0005, 0.0674)];
        for (re, im) in expect {
            assert!(
                ev.iter().any(|z| (z.re - re).abs() < 1e-3 && (z.im - im).abs() < 1e-3),
                "{re}{im:+}i missing from {ev:?}"
            );
        }
    }

    #[test]
    fn full_state_feedforward_is_singular() {
        let s = builtin_747().validate().unwrap();
        let err = compute_lr(&s.gains.a_r, &s.gains.b_p, &s.plant.c_1).unwrap_err();
        assert!(matches!(err, Error::SingularDCGain { .. }));
        let mut c = builtin_747();
        c.design.feedforward = Feedforward::Full;
        assert!(matches!(c.validate(), Err(Error::SingularDCGain { .. })));
    }

    #[test]
    fn short_period_feedforward() {
        // −C_spᵀ A_sp⁻¹ B_sp by hand for the 2×2 block.
        let (a, b, c, d) = (-0.319, 7.74, -0.101, -0.429);
        let det = a * d - b * c;
        let (b1, b2) = (-0.18, -1.16);
        let q_ss = -(-c * b1 + a * b2) / det;
        let s = builtin_747().validate().unwrap();
        assert!((s.gains.l_r[(0, 0)] - 1.0 / q_ss).abs() < 1e-12);
        assert!((s.gains.l_r[(0, 0)] + 2.61067186).abs() < 1e-6);
    }
}
