//! Scenario configuration, the built-in 747 case, the simulation driver and
//! the delay/learning-rate sweep.

mod builtin;
mod config;
mod log;
mod simulate;
mod sweep;

pub use builtin::builtin_747;
pub use config::{
    load_config, BoxBounds, DesignSection, FailureEvent, Feedforward, InnerSection, OuterSection,
    PlantSection, ReferenceSegment, ReferenceSignal, Rows, Scenario, ScenarioConfig, SimSection,
    SweepSection, CRAD_PER_DEG,
};
pub use log::{Layout, Signal, SimLog};
pub use simulate::{run_simulation, simulate, RunOutcome};
pub use sweep::{sweep, sweep_default, SweepRow, SweepTable, TrendReport};
