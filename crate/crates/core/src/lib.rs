#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN.

pub mod error;
pub mod exec;
pub mod gp_prior;
pub mod gpivi;
pub mod grid;
pub mod harness;
pub mod hi_order;
pub mod models;
pub mod posterior;
pub mod presets;
pub mod report;
pub mod rng;
pub mod transfer;

pub use error::{Error, Result};
pub use grid::{DivergenceKind, GridDensity, GridSpec};
pub use report::{CheckReport, SlopeReport};
pub use transfer::TransferFunction;
