pub mod assembly;
pub mod error;
pub mod linsolve;
pub mod models;
pub mod mortar;
pub mod multipatch;
pub mod postproc;
pub mod quadrature;
pub mod splines;
pub mod studies;
pub mod substructuring;

pub use error::{Error, Result};
