//! Multipatch domains, global C0 spaces with Dirichlet and anti-periodic constraints,
//! and the air-gap trace space.

mod domain;
mod space;
mod trace;

pub use domain::{BoundaryTag, Interface, MultiPatchDomain, GLUE_TOL};
pub use space::{glue_c0, uniform_spaces, ConstraintReport, DiscreteSpace, PatchSpace, TensorBasis};
pub use trace::{trace_on_airgap, TracePoint, TraceSegment, TraceSpace};
