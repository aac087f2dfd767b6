use crate::error::{Error, Result};

/// Open knot vector on `[0, 1]` together with its polynomial degree.
#[derive(Clone, Debug, PartialEq)]
pub struct KnotVector {
    degree: usize,
    knots: Vec<f64>,
}

/// Nonzero basis functions (and derivatives) at one parameter value.
///
/// `ders[k][j]` is the `k`-th derivative of basis function `first + j`.
#[derive(Clone, Debug)]
pub struct BasisValues {
    pub first: usize,
    pub ders: Vec<Vec<f64>>,
}

impl BasisValues {
    pub fn values(&self) -> &[f64] {
        &self.ders[0]
    }
}

const KNOT_TOL: f64 = 1e-14;

impl KnotVector {
    pub fn new(degree: usize, knots: Vec<f64>) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidKnots("degree must be positive".into()));
        }
        let p = degree;
        if knots.len() < 2 * (p + 1) {
            return Err(Error::InvalidKnots(format!(
                "{} knots cannot hold an open vector of degree {p}",
                knots.len()
            )));
        }
        if knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidKnots("knots must be non-decreasing".into()));
        }
        let m = knots.len();
        if knots[..=p].iter().any(|&k| k != 0.0) || knots[m - p - 1..].iter().any(|&k| k != 1.0) {
            return Err(Error::InvalidKnots(format!(
                "vector must start with {} zeros and end with {} ones",
                p + 1,
                p + 1
            )));
        }
        let kv = KnotVector { degree, knots };
        for (value, mult) in kv.interior_multiplicities() {
            if mult > p {
                return Err(Error::InvalidKnots(format!(
                    "interior knot {value} has multiplicity {mult} > degree {p}"
                )));
            }
        }
        Ok(kv)
    }

    /// Open vector with `n_elements` equal elements and maximal continuity.
    pub fn open_uniform(degree: usize, n_elements: usize) -> Result<Self> {
        if n_elements == 0 {
            return Err(Error::InvalidKnots("at least one element required".into()));
        }
        let mut knots = vec![0.0; degree + 1];
        knots.extend((1..n_elements).map(|i| i as f64 / n_elements as f64));
        knots.extend(std::iter::repeat_n(1.0, degree + 1));
        Self::new(degree, knots)
    }

    /// Open vector of given degree whose breakpoints are `breaks` (including 0 and 1),
    /// each interior breakpoint repeated `multiplicity` times.
    pub fn from_breakpoints(degree: usize, breaks: &[f64], multiplicity: usize) -> Result<Self> {
        let mut knots = vec![0.0; degree + 1];
        for &b in &breaks[1..breaks.len() - 1] {
            knots.extend(std::iter::repeat_n(b, multiplicity));
        }
        knots.extend(std::iter::repeat_n(1.0, degree + 1));
        Self::new(degree, knots)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of basis functions.
    pub fn dim(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    /// Distinct knot values, ascending, including 0 and 1.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for &k in &self.knots {
            if out.last().is_none_or(|&l| k - l > KNOT_TOL) {
                out.push(k);
            }
        }
        out
    }

    pub fn n_elements(&self) -> usize {
        self.breakpoints().len() - 1
    }

    fn interior_multiplicities(&self) -> Vec<(f64, usize)> {
        let p = self.degree;
        let inner = &self.knots[p + 1..self.knots.len() - p - 1];
        let mut out: Vec<(f64, usize)> = Vec::new();
        for &k in inner {
            match out.last_mut() {
                Some((v, m)) if (k - *v).abs() <= KNOT_TOL => *m += 1,
                _ => out.push((k, 1)),
            }
        }
        out
    }

    pub fn multiplicity(&self, value: f64) -> usize {
        self.knots.iter().filter(|&&k| (k - value).abs() <= KNOT_TOL).count()
    }

    /// Index `i` with `knots[i] <= xi < knots[i+1]`; `xi = 1` maps to the last non-empty span.
    pub fn find_span(&self, xi: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&xi) || xi.is_nan() {
            return Err(Error::OutOfDomain {
                what: "xi",
                value: xi,
                domain: "[0, 1]",
            });
        }
        Ok(self.span_unchecked(xi))
    }

    pub(crate) fn span_unchecked(&self, xi: f64) -> usize {
        let n = self.dim();
        if xi >= self.knots[n] {
            return n - 1;
        }
        if xi <= self.knots[self.degree] {
            return self.degree;
        }
        // binary search over [p, n)
        let (mut lo, mut hi) = (self.degree, n);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if xi < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    /// Values and derivatives up to `order` of the `p + 1` functions supported at `xi`.
    /// Orders above the degree are returned as zeros.
    pub fn eval(&self, xi: f64, order: usize) -> Result<BasisValues> {
        let span = self.find_span(xi)?;
        Ok(self.eval_at_span(span, xi, order))
    }

    pub(crate) fn eval_clamped(&self, xi: f64, order: usize) -> BasisValues {
        let xi = xi.clamp(0.0, 1.0);
        self.eval_at_span(self.span_unchecked(xi), xi, order)
    }

    /// Cox-de Boor triangle with derivatives (Piegl & Tiller, A2.3).
    pub fn eval_at_span(&self, span: usize, xi: f64, order: usize) -> BasisValues {
        let p = self.degree;
        let u = &self.knots;
        let mut ndu = vec![vec![0.0; p + 1]; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        ndu[0][0] = 1.0;
        for j in 1..=p {
            left[j] = xi - u[span + 1 - j];
            right[j] = u[span + j] - xi;
            let mut saved = 0.0;
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }

        let mut ders = vec![vec![0.0; p + 1]; order + 1];
        for j in 0..=p {
            ders[0][j] = ndu[j][p];
        }
        let n = order.min(p);
        let mut a = vec![vec![0.0; p + 1]; 2];
        for r in 0..=p {
            let (mut s1, mut s2) = (0usize, 1usize);
            a[0][0] = 1.0;
            for k in 1..=n {
                let mut d = 0.0;
                let rk = r as isize - k as isize;
                let pk = p - k;
                if r >= k {
                    let rk = rk as usize;
                    a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
                    d = a[s2][0] * ndu[rk][pk];
                }
                let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
                let j2 = if r as isize - 1 <= pk as isize { k - 1 } else { p - r };
                for j in j1..=j2 {
                    let idx = (rk + j as isize) as usize;
                    a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                    d += a[s2][j] * ndu[idx][pk];
                }
                if r <= pk {
                    a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                    d += a[s2][k] * ndu[r][pk];
                }
                ders[k][r] = d;
                std::mem::swap(&mut s1, &mut s2);
            }
        }
        let mut fac = p as f64;
        for k in 1..=n {
            for v in ders[k].iter_mut() {
                *v *= fac;
            }
            fac *= (p - k) as f64;
        }
        BasisValues {
            first: span - p,
            ders,
        }
    }

    /// Knot vector with `new_knots` inserted (each value once per occurrence).
    pub fn with_inserted(&self, new_knots: &[f64]) -> Result<Self> {
        for &k in new_knots {
            if !(k > 0.0 && k < 1.0) {
                return Err(Error::OutOfDomain {
                    what: "inserted knot",
                    value: k,
                    domain: "(0, 1)",
                });
            }
        }
        let mut knots = self.knots.clone();
        knots.extend_from_slice(new_knots);
        knots.sort_by(f64::total_cmp);
        Self::new(self.degree, knots)
    }

    /// Interior knots splitting every element into `parts` equal pieces.
    pub fn uniform_insertions(&self, parts: usize) -> Vec<f64> {
        let bp = self.breakpoints();
        let mut out = Vec::new();
        for w in bp.windows(2) {
            for k in 1..parts {
                out.push(w[0] + (w[1] - w[0]) * k as f64 / parts as f64);
            }
        }
        out
    }

    /// Knot vector reversed through `xi -> 1 - xi`.
    pub fn reversed(&self) -> Self {
        let knots = self.knots.iter().rev().map(|k| 1.0 - k).collect();
        KnotVector {
            degree: self.degree,
            knots,
        }
    }

    /// Approximate equality of degree and knots.
    pub fn matches(&self, other: &KnotVector, tol: f64) -> bool {
        self.degree == other.degree
            && self.knots.len() == other.knots.len()
            && self
                .knots
                .iter()
                .zip(&other.knots)
                .all(|(a, b)| (a - b).abs() <= tol)
    }

    /// Greville abscissae (averages of `p` consecutive interior knots).
    pub fn greville(&self) -> Vec<f64> {
        let p = self.degree;
        (0..self.dim())
            .map(|i| self.knots[i + 1..=i + p].iter().sum::<f64>() / p as f64)
            .collect()
    }
}
