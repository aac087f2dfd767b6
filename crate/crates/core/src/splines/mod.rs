//! B-spline and NURBS bases, curves, tensor-product patches and the patch exchange format.

mod arc;
mod curve;
pub mod exchange;
mod knots;
mod patch;
mod rational;

pub use arc::{make_circular_arc, make_line};
pub use curve::NurbsCurve;
pub use knots::{BasisValues, KnotVector};
pub use patch::{MapSample, NurbsPatch, Side, INVERSE_MAX_ITER, INVERSE_TOL};
pub use rational::{nurbs_basis_eval, Weights};
