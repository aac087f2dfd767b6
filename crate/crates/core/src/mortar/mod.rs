//! Harmonic stator-rotor coupling.
//!
//! The interface flux is expanded as `H(theta) = sum_l lambda_l exp(-i l theta)` in the rotor
//! frame. The stator sees the same expansion shifted by the rotor angle, which turns rotation
//! into a diagonal phase factor on the multipliers.

mod infsup;
mod saddle;

pub use infsup::{harmonic_mass, infsup_constant, InfSup};
pub use saddle::{
    realify, solve_coupled, CoupledSolution, RealSaddle, SaddleSystem, SchurSolver,
};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multipatch::TraceSpace;

/// Phase condition satisfied by every order of a harmonic set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Symmetry {
    Periodic,
    Antiperiodic,
}

/// Double-sided, sorted set of harmonic orders.
#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicSet {
    orders: Vec<i32>,
    symmetry: Symmetry,
    pitch: f64,
}

impl HarmonicSet {
    /// Validate an explicit list of orders against the symmetry over `pitch`.
    pub fn new(mut orders: Vec<i32>, symmetry: Symmetry, pitch: f64) -> Result<Self> {
        orders.sort_unstable();
        orders.dedup();
        if orders.is_empty() {
            return Err(Error::InvalidHarmonics("empty harmonic set".into()));
        }
        for &l in &orders {
            if orders.binary_search(&-l).is_err() {
                return Err(Error::InvalidHarmonics(format!("order {l} present without {}", -l)));
            }
            if !admissible(l, symmetry, pitch) {
                return Err(Error::InvalidHarmonics(format!(
                    "order {l} violates the {symmetry:?} condition over pitch {pitch}"
                )));
            }
        }
        Ok(HarmonicSet {
            orders,
            symmetry,
            pitch,
        })
    }

    pub fn orders(&self) -> &[i32] {
        &self.orders
    }

    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn index_of(&self, l: i32) -> Option<usize> {
        self.orders.binary_search(&l).ok()
    }

    /// Non-negative orders, ascending.
    pub fn magnitudes(&self) -> Vec<i32> {
        self.orders.iter().copied().filter(|&l| l >= 0).collect()
    }

    /// Number of real multiplier unknowns: one for order zero, two per positive order.
    pub fn real_len(&self) -> usize {
        self.magnitudes().iter().map(|&l| if l == 0 { 1 } else { 2 }).sum()
    }

    /// `sum_l lambda_l exp(-i l theta)`.
    pub fn synthesize(&self, lambda: &[Complex64], theta: f64) -> Complex64 {
        self.orders
            .iter()
            .zip(lambda)
            .map(|(&l, &c)| c * Complex64::from_polar(1.0, -(l as f64) * theta))
            .sum()
    }
}

fn admissible(l: i32, symmetry: Symmetry, pitch: f64) -> bool {
    let target = match symmetry {
        Symmetry::Periodic => 1.0,
        Symmetry::Antiperiodic => -1.0,
    };
    let phase = Complex64::from_polar(1.0, -(l as f64) * pitch);
    (phase - target).norm() < 1e-9
}

/// All orders up to `max_order` in magnitude that satisfy the phase condition.
pub fn select_harmonics(symmetry: Symmetry, pitch: f64, max_order: i32) -> Result<HarmonicSet> {
    let orders: Vec<i32> = (-max_order.max(0)..=max_order.max(0))
        .filter(|&l| admissible(l, symmetry, pitch))
        .collect();
    if orders.is_empty() {
        return Err(Error::NoHarmonics { max_order });
    }
    HarmonicSet::new(orders, symmetry, pitch)
}

/// Diagonal of the rotation matrix, `exp(i l alpha)`.
pub fn rotation_matrix(set: &HarmonicSet, alpha: f64) -> Vec<Complex64> {
    set.orders
        .iter()
        .map(|&l| Complex64::from_polar(1.0, l as f64 * alpha))
        .collect()
}

/// Which side of the interface a coupling matrix belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterfaceSide {
    Rotor,
    Stator,
}

impl InterfaceSide {
    fn sign(self) -> f64 {
        match self {
            InterfaceSide::Rotor => 1.0,
            InterfaceSide::Stator => -1.0,
        }
    }
}

/// Coupling matrix `G` restricted to the rows of the trace functions.
///
/// Rotor: `g_il = +int exp(-i l theta) w_i d theta`, stator: the negative.
#[derive(Clone, Debug)]
pub struct Coupling {
    side: InterfaceSide,
    n_dof: usize,
    dofs: Vec<usize>,
    harmonics: HarmonicSet,
    values: DMatrix<Complex64>,
}

/// Assemble the coupling matrix of one side with `p + 2` Gauss points per trace element.
pub fn assemble_coupling(
    trace: &TraceSpace,
    n_dof: usize,
    harmonics: &HarmonicSet,
    side: InterfaceSide,
) -> Coupling {
    let p = trace
        .segments()
        .iter()
        .map(|s| s.knots.degree())
        .max()
        .unwrap_or(1);
    let mut values = DMatrix::zeros(trace.len(), harmonics.len());
    let s = side.sign();
    for q in trace.quadrature(p + 2) {
        for (c, &l) in harmonics.orders().iter().enumerate() {
            let e = Complex64::from_polar(s * q.weight, -(l as f64) * q.theta);
            for &(i, v) in &q.basis {
                values[(i, c)] += e * v;
            }
        }
    }
    Coupling {
        side,
        n_dof,
        dofs: trace.dofs().to_vec(),
        harmonics: harmonics.clone(),
        values,
    }
}

impl Coupling {
    /// Build from explicit trace rows.
    pub fn from_values(
        side: InterfaceSide,
        n_dof: usize,
        dofs: Vec<usize>,
        harmonics: HarmonicSet,
        values: DMatrix<Complex64>,
    ) -> Result<Self> {
        if values.nrows() != dofs.len() || values.ncols() != harmonics.len() {
            return Err(Error::DimensionMismatch {
                what: "coupling values",
                expected: dofs.len() * harmonics.len(),
                found: values.len(),
            });
        }
        if let Some(&d) = dofs.iter().find(|&&d| d >= n_dof) {
            return Err(Error::DimensionMismatch {
                what: "coupling row index",
                expected: n_dof,
                found: d,
            });
        }
        Ok(Coupling {
            side,
            n_dof,
            dofs,
            harmonics,
            values,
        })
    }

    pub fn side(&self) -> InterfaceSide {
        self.side
    }

    pub fn n_dof(&self) -> usize {
        self.n_dof
    }

    pub fn dofs(&self) -> &[usize] {
        &self.dofs
    }

    pub fn harmonics(&self) -> &HarmonicSet {
        &self.harmonics
    }

    /// Trace rows, `trace dofs x harmonics`.
    pub fn values(&self) -> &DMatrix<Complex64> {
        &self.values
    }

    /// Full column `c` as a vector over all degrees of freedom.
    pub fn column(&self, c: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.n_dof];
        for (r, &d) in self.dofs.iter().enumerate() {
            out[d] += self.values[(r, c)];
        }
        out
    }

    /// Dense `n_dof x N` matrix.
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.n_dof, self.harmonics.len());
        for (r, &d) in self.dofs.iter().enumerate() {
            for c in 0..self.harmonics.len() {
                m[(d, c)] += self.values[(r, c)];
            }
        }
        m
    }

    /// `G^H u`.
    pub fn adjoint_apply(&self, u: &[f64]) -> Vec<Complex64> {
        (0..self.harmonics.len())
            .map(|c| {
                self.dofs
                    .iter()
                    .enumerate()
                    .map(|(r, &d)| self.values[(r, c)].conj() * u[d])
                    .sum()
            })
            .collect()
    }

    /// `G lambda` (real for conjugate-symmetric `lambda`; the imaginary part is dropped).
    pub fn apply(&self, lambda: &[Complex64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_dof];
        for (r, &d) in self.dofs.iter().enumerate() {
            let v: Complex64 = (0..lambda.len()).map(|c| self.values[(r, c)] * lambda[c]).sum();
            out[d] += v.re;
        }
        out
    }

    /// Unsigned cosine and sine moments `int cos(l theta) w`, `int sin(l theta) w` per
    /// non-negative order, as columns over all degrees of freedom.
    pub fn trig_moments(&self) -> Vec<(i32, Vec<f64>, Vec<f64>)> {
        let s = self.side.sign();
        self.harmonics
            .magnitudes()
            .into_iter()
            .map(|l| {
                let c = self.harmonics.index_of(l).expect("order present");
                let g = self.column(c);
                // g = s (C - i S)
                let cos = g.iter().map(|z| s * z.re).collect();
                let sin = g.iter().map(|z| -s * z.im).collect();
                (l, cos, sin)
            })
            .collect()
    }
}
