pub mod boundary_algebra;
pub mod characteristic;
pub mod cli_reports;
pub mod error;
pub mod expansion_engine;
pub mod fd_oracle;
pub mod grid;
pub mod jet;
pub mod ode_core;
pub mod quadrature;
pub mod singular_integrals;

pub use error::{LabError, Result};
