//! Asymptotic secret-key rates for coherent-one-way (COW) quantum key
//! distribution with vacuum and `|α⟩|α⟩` decoy sequences.
//!
//! The crate is organised bottom-up:
//!
//! * [`params`]: validated physical and protocol parameters, channel loss.
//! * [`gains`]: closed-form click probabilities on the data and monitoring lines.
//! * [`security`]: error rates, the phase-error upper bound, key rates and
//!   reference bounds.
//! * [`optimize`]: grid-plus-golden-section maximisation over `(μ, t_B)`
//!   and distance scans.
//! * [`oracle`]: a seeded Monte-Carlo sampler of the detection model used to
//!   cross-check the analytic gains.

pub mod error;
pub mod gains;
pub mod optimize;
pub mod oracle;
pub mod params;
pub mod security;

pub use error::{Error, Result};
pub use gains::{DataLineGains, GainSet, MonitorPair, MonitoringGains, SlotPair};
pub use optimize::{optimize_point, scan, Protocol, RateFlag, ScanConfig};
pub use oracle::OracleEstimate;
pub use params::{ParamsBuilder, SystemParams, Variant};
pub use security::{BoundPair, ErrorRates, Evaluation, PhaseErrorBound, RatePoint};
