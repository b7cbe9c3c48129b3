//! Sum-rate optimization for downlink multi-user systems assisted by an
//! intelligent omni-surface: a passive element array that both reflects and
//! refracts, so users on either side can be served at once.
//!
//! - [`geometry`]: element layout, user sides, per-element response.
//! - [`channel`]: surface and direct links, compound channel matrix.
//! - [`precoding`]: zero forcing with water-filling power allocation.
//! - [`phase_opt`]: phase search (coordinate ascent, branch and bound) and
//!   the alternating joint optimizer.
//! - [`analysis`]: closed-form two-user results on the power split.
//! - [`experiment`]: configuration, Monte Carlo sweeps and checks.

pub mod analysis;
pub mod channel;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod phase_opt;
pub mod precoding;

pub use error::{Error, Result};
