pub mod cohesive;
pub mod envelope;
pub mod error;
pub mod export;
pub mod lattice;
pub mod limit;
pub mod minimize;
pub mod model;
pub mod quadrature;
pub mod scalar;
pub mod solver;

pub use error::{Error, Result};
pub use model::{HypothesisReport, ModelSpec, ScalingRule, SigmaBar, SigmaKind};
pub use scalar::{Domain, Family, ScalarFnSpec};
