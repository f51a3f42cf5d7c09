//! Regret of mismatched MMSE estimation on the scalar Gaussian channel
//! `Y = aX + V` with an unknown gain.
//!
//! A blind channel estimator produces `â` from past outputs, and the input is
//! then estimated with the posterior mean tuned to `â`. This crate computes
//! the resulting absolute and relative regret, the Fisher informations that
//! bound them, Cramér–Rao driven expected-regret bounds, and the identity
//! `(ρ(a) + 1)·I(Y;a) = σx²/σv²` tying the regret scalar to the output Fisher
//! information. A harness runs declarative sweeps and emits tidy CSV.

pub mod blindest;
pub mod error;
pub mod harness;
pub mod information;
pub mod model;
pub mod numerics;
pub mod posterior;
pub mod regret;

pub use error::{Error, FieldError, Result};
pub use model::{ChannelModel, InputDistribution, SampleBatch};
pub use numerics::{Estimate, QuadMethod, QuadratureSpec};
