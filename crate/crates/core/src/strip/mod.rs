//! Time-dependent scattering of a Landau edge packet off a boundary bend.

pub mod config;
pub mod extract;
pub mod operator;
pub mod packet;
pub mod propagate;
pub mod run;

pub use config::{blob_hash, StripConfig, StripGrid};
pub use extract::ScatteringRecord;
pub use operator::StripOperator;
pub use packet::{BandBasis, StripState};
pub use propagate::CrankNicolson;
pub use run::{manifest_json, simulate, simulate_with, write_observables_csv, Observation, SimulationOutput};
