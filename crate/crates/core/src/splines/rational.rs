use super::knots::{BasisValues, KnotVector};
use crate::error::{Error, Result};

/// Positive NURBS weights; construction rejects non-positive entries.
#[derive(Clone, Debug, PartialEq)]
pub struct Weights(Vec<f64>);

impl Weights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if let Some(&bad) = w.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::OutOfDomain {
                what: "weight",
                value: bad,
                domain: "(0, inf)",
            });
        }
        Ok(Weights(w))
    }

    pub fn ones(n: usize) -> Self {
        Weights(vec![1.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Rational basis `N_i = w_i B_i / sum_j w_j B_j` and its derivatives up to `order`.
pub fn nurbs_basis_eval(
    kv: &KnotVector,
    weights: &Weights,
    xi: f64,
    order: usize,
) -> Result<BasisValues> {
    if weights.len() != kv.dim() {
        return Err(Error::DimensionMismatch {
            what: "NURBS weights",
            expected: kv.dim(),
            found: weights.len(),
        });
    }
    let b = kv.eval(xi, order)?;
    Ok(rationalize(&b, weights.as_slice()))
}

/// Quotient-rule conversion of polynomial basis derivatives into rational ones.
pub(crate) fn rationalize(b: &BasisValues, weights: &[f64]) -> BasisValues {
    let nb = b.ders[0].len();
    let order = b.ders.len() - 1;
    let w = &weights[b.first..b.first + nb];
    // A_i^(k) = w_i B_i^(k), W^(k) = sum_i A_i^(k)
    let wk: Vec<f64> = b
        .ders
        .iter()
        .map(|row| row.iter().zip(w).map(|(v, wi)| v * wi).sum())
        .collect();
    let mut ders = vec![vec![0.0; nb]; order + 1];
    for k in 0..=order {
        for i in 0..nb {
            let mut v = w[i] * b.ders[k][i];
            for j in 1..=k {
                v -= binomial(k, j) * wk[j] * ders[k - j][i];
            }
            ders[k][i] = v / wk[0];
        }
    }
    BasisValues {
        first: b.first,
        ders,
    }
}
