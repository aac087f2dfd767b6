use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

/// How pivots are validated during factorization.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PivotRule {
    /// Every pivot must be positive relative to its diagonal entry.
    Positive,
    /// Pivots may have either sign but must stay away from zero.
    NonZero,
}

/// Relative pivot threshold for singularity detection.
pub const PIVOT_TOL: f64 = 1e-12;

/// Sparse `P A P^T = L D L^T` without pivoting (up-looking, elimination-tree based).
#[derive(Clone, Debug)]
pub struct LdlFactor {
    n: usize,
    perm: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
}

/// Approximate minimum degree ordering of a structurally symmetric matrix.
pub fn amd_order(a: &CsrMatrix<f64>) -> Vec<usize> {
    let n = a.nrows();
    if n == 0 {
        return Vec::new();
    }
    let ap: Vec<i64> = a.indptr().iter().map(|&x| x as i64).collect();
    let ai: Vec<i64> = a.indices().iter().map(|&x| x as i64).collect();
    match amd::order(n as i64, &ap, &ai, &amd::Control::default()) {
        Ok((p, _, _)) => p.into_iter().map(|x| x as usize).collect(),
        Err(_) => (0..n).collect(),
    }
}

/// Minimum degree ordering of the leading `n_primal` block, trailing indices kept last.
pub fn saddle_order(a: &CsrMatrix<f64>, n_primal: usize) -> Vec<usize> {
    let rows: Vec<usize> = (0..n_primal).collect();
    let mut p = amd_order(&a.submatrix(&rows, &rows));
    p.extend(n_primal..a.nrows());
    p
}

impl LdlFactor {
    pub fn factor(a: &CsrMatrix<f64>, perm: Vec<usize>, rule: PivotRule) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || perm.len() != n {
            return Err(Error::DimensionMismatch {
                what: "LDL factorization",
                expected: n,
                found: if a.ncols() != n { a.ncols() } else { perm.len() },
            });
        }
        let mut pinv = vec![0usize; n];
        for (k, &p) in perm.iter().enumerate() {
            pinv[p] = k;
        }
        let scale = a.max_abs();

        // symbolic: elimination tree and column counts
        const NONE: usize = usize::MAX;
        let mut parent = vec![NONE; n];
        let mut flag = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            for (c, _) in a.row(perm[k]) {
                let mut i = pinv[c];
                if i >= k {
                    continue;
                }
                while flag[i] != k {
                    if parent[i] == NONE {
                        parent[i] = k;
                    }
                    lnz[i] += 1;
                    flag[i] = k;
                    i = parent[i];
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for k in 0..n {
            lp[k + 1] = lp[k] + lnz[k];
        }
        let nnz = lp[n];
        let mut li = vec![0usize; nnz];
        let mut lx = vec![0.0; nnz];
        let mut d = vec![0.0; n];

        // numeric: row k of L from a sparse triangular solve
        let mut y = vec![0.0; n];
        let mut pattern = vec![0usize; n];
        lnz.iter_mut().for_each(|x| *x = 0);
        flag.iter_mut().for_each(|x| *x = NONE);
        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            let mut akk = 0.0;
            for (c, v) in a.row(perm[k]) {
                let mut i = pinv[c];
                if i > k {
                    continue;
                }
                y[i] += v;
                if i == k {
                    akk = v;
                    continue;
                }
                let mut len = 0;
                while flag[i] != k {
                    pattern[len] = i;
                    len += 1;
                    flag[i] = k;
                    i = parent[i];
                }
                while len > 0 {
                    top -= 1;
                    len -= 1;
                    pattern[top] = pattern[len];
                }
            }
            d[k] = y[k];
            y[k] = 0.0;
            for &i in &pattern[top..n] {
                let yi = y[i];
                y[i] = 0.0;
                let end = lp[i] + lnz[i];
                for p in lp[i]..end {
                    y[li[p]] -= lx[p] * yi;
                }
                let l_ki = yi / d[i];
                d[k] -= l_ki * yi;
                li[end] = k;
                lx[end] = l_ki;
                lnz[i] += 1;
            }
            match rule {
                PivotRule::Positive => {
                    if !(d[k] > PIVOT_TOL * akk.abs()) || akk <= 0.0 {
                        return Err(if d[k] < 0.0 || akk < 0.0 {
                            Error::NotPositiveDefinite { pivot: perm[k] }
                        } else {
                            Error::Singular {
                                pivot: perm[k],
                                hint: "check that Dirichlet constraints pin the solution",
                            }
                        });
                    }
                }
                PivotRule::NonZero => {
                    if !(d[k].abs() > PIVOT_TOL * scale) {
                        return Err(Error::Singular {
                            pivot: perm[k],
                            hint: "the constraint block may be rank deficient; use fewer harmonics or a finer mesh",
                        });
                    }
                }
            }
        }
        Ok(LdlFactor {
            n,
            perm,
            lp,
            li,
            lx,
            d,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz_l(&self) -> usize {
        self.lx.len()
    }

    /// Number of positive and negative pivots.
    pub fn inertia(&self) -> (usize, usize) {
        let pos = self.d.iter().filter(|&&x| x > 0.0).count();
        (pos, self.n - pos)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n, "right-hand side length must match");
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for j in 0..self.n {
            let xj = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                x[self.li[p]] -= self.lx[p] * xj;
            }
        }
        for (xi, di) in x.iter_mut().zip(&self.d) {
            *xi /= di;
        }
        for j in (0..self.n).rev() {
            let mut acc = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                acc -= self.lx[p] * x[self.li[p]];
            }
            x[j] = acc;
        }
        let mut out = vec![0.0; self.n];
        for (k, &p) in self.perm.iter().enumerate() {
            out[p] = x[k];
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize) -> CsrMatrix<f64> {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, &t).unwrap()
    }

    #[test]
    fn tridiagonal_solve() {
        let a = laplace_1d(20);
        let f = LdlFactor::factor(&a, amd_order(&a), PivotRule::Positive).unwrap();
        let x_true: Vec<f64> = (0..20).map(|i| (i as f64).sin()).collect();
        let b = a.mul_vec(&x_true);
        let x = f.solve(&b);
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-12);
        }
        assert_eq!(f.inertia(), (20, 0));
    }

    #[test]
    fn indefinite_without_zero_pivots() {
        // [[2, 1], [1, -3]] is quasi-definite
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, -3.0)])
            .unwrap();
        let f = LdlFactor::factor(&a, vec![0, 1], PivotRule::NonZero).unwrap();
        let x = f.solve(&[3.0, -2.0]);
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
        assert_eq!(f.inertia(), (1, 1));
        assert!(LdlFactor::factor(&a, vec![0, 1], PivotRule::Positive).is_err());
    }

    #[test]
    fn zero_pivot_detected() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        assert!(LdlFactor::factor(&a, vec![0, 1], PivotRule::NonZero).is_err());
    }
}
