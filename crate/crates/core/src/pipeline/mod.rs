//! Yearly simulation loop: configuration, target schedules, cycle execution
//! and replicate runs.

mod config;
mod run;
mod targets;


pub use config::{
    load_config, parse_config, DrainMode, EventName, Inputs, Preset, RunConfig, CONFIG_REFERENCE,
    DEFAULT_N_BINS, DEFAULT_N_CYCLES, DEFAULT_START_YEAR,
};
pub use run::{
    aggregate, run_cycle, run_dir, run_replicates, run_simulation, write_summary, year_metrics,
    AggregateRow, Occurrence, RunInputs, RunSummary, SimulationState, YearTrace,
};
pub use targets::TargetSchedule;
