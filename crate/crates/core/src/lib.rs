//! Continuous-variable port-based teleportation (CV-PBT) in a truncated Fock basis.
//!
//! Modules, bottom up:
//! - [`fock`]: truncated states, operators, norms and fidelity.
//! - [`two_port`]: closed-form two-port channel, output energy, regimes.
//! - [`bounds`]: lossy and replacement-channel comparisons and diamond-norm bounds.
//! - [`nport`]: multiset sectors, eigenbases, Gamma matrices and the N-port channel.
//! - [`oracle`]: brute-force protocol construction used to check the closed forms.

pub mod bounds;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod nport;
pub mod oracle;
pub mod two_port;

pub use error::{Error, Result};
pub use fock::{Cutoff, DensityOperator, FockOperator, FockVector};
pub use two_port::{ChannelParams, Regime};
