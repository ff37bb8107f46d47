//! Monte Carlo BER experiments: configuration, seeded paired trials, SNR
//! sweeps, parameter sweeps and CSV output.

pub mod config;
pub mod csv;
pub mod experiment;
pub mod presets;
pub mod sweep;

pub use config::{load_config, parse_config, DetectorKind, ExperimentConfig};
pub use csv::{emit_csv, parse_csv, records_to_csv, CSV_HEADER};
pub use experiment::{run_experiment, run_experiment_report, trial_instance, BerRecord, ExperimentReport};
pub use presets::{find_preset, Preset, PRESETS};
pub use sweep::{sweep_params, sweep_to_csv, SweepRecord};
