//! Benchmark and application geometries.

pub mod machine;
pub mod units;
pub mod verification;

pub use machine::{
    build_pmsm_pole, magnet_excitation, winding_excitation, MachineModel, Phase, PmsmPole, Region,
};
pub use units::{Dimension, Quantity};
pub use verification::{build_conforming_ring, build_quarter_ring, VerificationModel, VerificationSpaces};
