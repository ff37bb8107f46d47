//! Multi-user MIMO detection for QAM by penalized-sum ADMM (PS-ADMM),
//! with reference detectors, convergence certificates and a Monte Carlo
//! BER harness.

pub mod baselines;
pub mod detector;
pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod numerics;
pub mod signal;

pub use detector::{psadmm_detect, Detection, DetectorParams, InitMode, PsAdmm};
pub use error::{Error, Result};
pub use signal::{ChannelInstance, Modulation};
