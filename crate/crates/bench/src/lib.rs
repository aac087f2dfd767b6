//! Fixtures shared by the benchmarks.

use igahc::assembly::QuadratureRule;
use igahc::models::machine::MachineModel;
use igahc::models::verification::{build_quarter_ring, DEFAULT_SPLIT};
use igahc::studies::{machine_problem, verification_problem, CoupledProblem, MachineProblem};

/// Harmonic orders up to 15 give the anti-periodic set used for the EMF studies.
pub const MACHINE_MAX_ORDER: i32 = 15;

pub fn machine(degree: usize, level: u32) -> MachineProblem {
    machine_problem(&MachineModel::default(), degree, level, MACHINE_MAX_ORDER, [0.0; 3], QuadratureRule::Default)
        .expect("default machine assembles")
}

pub fn ring(degree: usize, level: u32) -> CoupledProblem {
    let model = build_quarter_ring(DEFAULT_SPLIT).expect("ring geometry");
    verification_problem(&model, degree, level, 3, QuadratureRule::Extra(1)).expect("ring assembles")
}
