//! Deadline-constrained scheduling over i.i.d. fading channels with monomial
//! energy cost `E = b^n / g`.
//!
//! The crate provides the optimal causal schedulers for the energy
//! minimization problem (deliver `B` bits in `T` slots) and for its dual
//! (maximize bits delivered with energy `E` in `T` slots), their non-causal
//! counterparts, simple baselines, and two independent checks: a discretized
//! backward-induction solver and a seeded Monte Carlo harness.
//!
//! ```
//! use fadesched::channel::FadingModel;
//! use fadesched::quadrature::QuadratureConfig;
//! use fadesched::thresholds::{xi_table, MonomialCost};
//!
//! let channel = FadingModel::Discrete { atoms: vec![(1.0, 0.5), (4.0, 0.5)] }
//!     .validate()
//!     .unwrap();
//! let cost = MonomialCost::new(2.0).unwrap();
//! let table = xi_table(&channel, cost, 2, &QuadratureConfig::default()).unwrap();
//! assert!((table.values[1] - 0.2815934).abs() < 1e-7);
//! ```

pub mod channel;
pub mod cli;
pub mod error;
pub mod montecarlo;
pub mod oracle;
pub mod policies;
pub mod quadrature;
pub mod thresholds;
pub mod verify;

pub use channel::{Channel, FadingModel, SeededStream};
pub use error::{Result, SchedError};
pub use policies::{PolicyKind, PolicySpec};
pub use quadrature::QuadratureConfig;
pub use thresholds::{MonomialCost, TableKind, ThresholdTable};
