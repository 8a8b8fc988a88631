"""Smoke test for the pilotsim_py extension.

Build and install first:  pip install --no-build-isolation ./crates/py
Then:                     python python/smoke_test.py
"""

import math
import sys

import pilotsim_py as ps


def check(cond, msg):
    if not cond:
        print("FAIL:", msg)
        sys.exit(1)
    print("ok:", msg)


def main():
    sc = ps.Scenario.builtin()
    check(sc.name == "boeing747-longitudinal", "builtin scenario loads")

    again = ps.Scenario.from_json(sc.to_json())
    check(again.to_json() == sc.to_json(), "JSON round trip")

    try:
        ps.Scenario.from_json("{ not json")
        check(False, "malformed JSON rejected")
    except ValueError as e:
        check("parse error" in str(e), "malformed JSON raises ValueError")

    gains = sc.gains()
    check(abs(gains["l_r"][0][0] + 2.61067186) < 1e-6, "short-period feed-forward gain")

    short = sc.with_overrides(["sim.duration=40", "events.0.time=20"])
    run = ps.run_simulation(short)
    check(run.error is None, "40 s run completes")
    check(len(run) == 4001, "one row per log interval")
    cols = run.columns()
    check(cols["t"][-1] == 40.0, "time column ends at the duration")
    y_o = 10 * ps.CRAD_PER_DEG
    check(max(abs(v) for v in cols["y_h1"]) <= y_o, "pilot command within saturation")
    check(run.to_csv().splitlines()[0] == ",".join(run.header()), "CSV header")

    m = run.metrics(20.0, 40.0)
    check(math.isfinite(m["rms_tracking_error"]), "metrics are finite")

    blown = ps.run_simulation(sc.with_overrides(["sim.duration=10", "events=[]", "sim.divergence_cap=1.0"]))
    check(blown.error is not None and "diverged" in blown.error, "divergence reported on the run")

    p = ps.solve_lyapunov([[-1.0, 0.0], [0.0, -2.0]], [[1.0, 0.0], [0.0, 1.0]])
    check(abs(p[0][0] - 0.5) < 1e-12 and abs(p[1][1] - 0.25) < 1e-12, "Lyapunov solve")
    _, k, res = ps.solve_care([[0.0]], [[1.0]], [[1.0]], [[1.0]])
    check(abs(k[0][0] - 1.0) < 1e-9 and res < 1e-10, "scalar Riccati")
    e = ps.matrix_exponential([[0.0, 1.0], [0.0, 0.0]], 2.0)
    check(e == [[1.0, 2.0], [0.0, 1.0]], "matrix exponential of a nilpotent matrix")

    results = ps.verify(sc, only="solvers")
    check(len(results) == 1 and results[0][1], "solver checks pass")

    csv = ps.sweep(sc.with_overrides(["sim.duration=10", "events=[]"]), tau=[0.0, 0.3], scale=[1.0], workers=2)
    check(len(csv.strip().splitlines()) == 3, "two-point sweep")
    print("all smoke checks passed")


if __name__ == "__main__":
    main()
