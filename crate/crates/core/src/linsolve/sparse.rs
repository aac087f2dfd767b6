use std::fmt::Debug;
use std::io::{BufRead, Write};
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;
use num_traits::Zero;

use crate::error::{Error, Result};

/// Entry type of [`CsrMatrix`]: real or complex doubles.
pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + Zero
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + 'static
{
    fn conj(self) -> Self;
    fn modulus(self) -> f64;
    fn write_fields(self) -> String;
    fn parse_fields(fields: &[&str]) -> Result<Self>;
}

impl Scalar for f64 {
    fn conj(self) -> Self {
        self
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn write_fields(self) -> String {
        format!("{self:.17e}")
    }
    fn parse_fields(fields: &[&str]) -> Result<Self> {
        match fields {
            [v] => v.parse().map_err(|e| Error::Parse(format!("bad value `{v}`: {e}"))),
            _ => Err(Error::Parse(format!("expected one value, found {}", fields.len()))),
        }
    }
}

impl Scalar for Complex64 {
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn write_fields(self) -> String {
        format!("{:.17e} {:.17e}", self.re, self.im)
    }
    fn parse_fields(fields: &[&str]) -> Result<Self> {
        match fields {
            [re, im] => {
                let p = |s: &str| {
                    s.parse::<f64>()
                        .map_err(|e| Error::Parse(format!("bad value `{s}`: {e}")))
                };
                Ok(Complex64::new(p(re)?, p(im)?))
            }
            _ => Err(Error::Parse(format!(
                "expected real and imaginary parts, found {} fields",
                fields.len()
            ))),
        }
    }
}

/// Compressed sparse row matrix with sorted, unique column indices per row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    /// Duplicates are summed in input order, so the result depends only on the triplet order.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, T)]) -> Result<Self> {
        for &(r, c, _) in triplets {
            if r >= nrows || c >= ncols {
                return Err(Error::DimensionMismatch {
                    what: "triplet index",
                    expected: nrows.max(ncols),
                    found: r.max(c),
                });
            }
        }
        let mut counts = vec![0usize; nrows + 1];
        for &(r, _, _) in triplets {
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        // bucket by row (stable), then sort each row by column (stable)
        let mut order = vec![0usize; triplets.len()];
        let mut next = counts.clone();
        for (k, &(r, _, _)) in triplets.iter().enumerate() {
            order[next[r]] = k;
            next[r] += 1;
        }
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::new();
        let mut data: Vec<T> = Vec::new();
        indptr.push(0);
        for r in 0..nrows {
            let row = &mut order[counts[r]..counts[r + 1]];
            row.sort_by_key(|&k| triplets[k].1);
            let mut last = usize::MAX;
            for &k in row.iter() {
                let (_, c, v) = triplets[k];
                if c == last {
                    *data.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    data.push(v);
                    last = c;
                }
            }
            indptr.push(indices.len());
        }
        Ok(CsrMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        })
    }

    pub fn identity(n: usize) -> Self
    where
        T: num_traits::One,
    {
        CsrMatrix {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            data: vec![T::one(); n],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let s = self.indptr[r]..self.indptr[r + 1];
        self.indices[s.clone()].iter().copied().zip(self.data[s].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        let s = self.indptr[r]..self.indptr[r + 1];
        match self.indices[s.clone()].binary_search(&c) {
            Ok(k) => self.data[s.start + k],
            Err(_) => T::zero(),
        }
    }

    pub fn triplets(&self) -> Vec<(usize, usize, T)> {
        (0..self.nrows)
            .flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v)))
            .collect()
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.ncols, "vector length must match the column count");
        (0..self.nrows)
            .map(|r| {
                let mut acc = T::zero();
                for (c, v) in self.row(r) {
                    acc += v * x[c];
                }
                acc
            })
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let t: Vec<_> = self.triplets().into_iter().map(|(r, c, v)| (c, r, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, &t).expect("indices in range")
    }

    pub fn adjoint(&self) -> Self {
        let t: Vec<_> = self
            .triplets()
            .into_iter()
            .map(|(r, c, v)| (c, r, v.conj()))
            .collect();
        Self::from_triplets(self.ncols, self.nrows, &t).expect("indices in range")
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.modulus()).fold(0.0, f64::max)
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// `max |A - A^H| / max |A|` (zero for an empty matrix).
    pub fn hermitian_defect(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r).conj()).modulus());
            }
        }
        worst / scale
    }

    /// Rows `rows` and columns `cols` (both in the given order).
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut cmap = vec![usize::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            cmap[c] = k;
        }
        let mut t = Vec::new();
        for (k, &r) in rows.iter().enumerate() {
            for (c, v) in self.row(r) {
                if cmap[c] != usize::MAX {
                    t.push((k, cmap[c], v));
                }
            }
        }
        Self::from_triplets(rows.len(), cols.len(), &t).expect("indices in range")
    }

    pub fn scale(&self, s: T) -> Self {
        let mut out = self.clone();
        for v in &mut out.data {
            *v = *v * s;
        }
        out
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<T> {
        let mut m = nalgebra::DMatrix::from_element(self.nrows, self.ncols, T::zero());
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        m
    }

    /// Triplet text: a `# rows cols` header, then `row col value...` per line.
    pub fn write_triplets<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# {} {}", self.nrows, self.ncols)?;
        for (r, c, v) in self.triplets() {
            writeln!(w, "{r} {c} {}", v.write_fields())?;
        }
        Ok(())
    }

    /// Reads the triplet text format; without a header the size is inferred from the indices.
    pub fn read_triplets<R: BufRead>(reader: R) -> Result<Self> {
        let mut dims: Option<(usize, usize)> = None;
        let mut t = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let f: Vec<&str> = rest.split_whitespace().collect();
                if let [r, c] = f[..] {
                    if let (Ok(r), Ok(c)) = (r.parse(), c.parse()) {
                        dims = Some((r, c));
                    }
                }
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() < 3 {
                return Err(Error::Parse(format!("line {}: too few fields", lineno + 1)));
            }
            let idx = |s: &str| {
                s.parse::<usize>()
                    .map_err(|e| Error::Parse(format!("line {}: bad index `{s}`: {e}", lineno + 1)))
            };
            t.push((idx(f[0])?, idx(f[1])?, T::parse_fields(&f[2..])?));
        }
        let (nr, nc) = dims.unwrap_or_else(|| {
            t.iter()
                .fold((0, 0), |(a, b), &(r, c, _)| (a.max(r + 1), b.max(c + 1)))
        });
        Self::from_triplets(nr, nc, &t)
    }
}

impl CsrMatrix<f64> {
    /// Symmetric diagonal scaling `D A D`.
    pub fn scale_symmetric(&self, d: &[f64]) -> Self {
        let mut out = self.clone();
        for r in 0..self.nrows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                out.data[k] *= d[r] * d[self.indices[k]];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, 2.0), (0, 1, 3.0), (0, 0, 1.0)])
            .unwrap();
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(0, 1), 4.0);
        assert_eq!(a.mul_vec(&[1.0, 1.0]), vec![5.0, 2.0]);
        assert!(CsrMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn hermitian_defect_detects_asymmetry() {
        let i = Complex64::i();
        let h = CsrMatrix::from_triplets(2, 2, &[(0, 1, i), (1, 0, -i), (0, 0, 1.0.into())]).unwrap();
        assert_eq!(h.hermitian_defect(), 0.0);
        let n = CsrMatrix::from_triplets(2, 2, &[(0, 1, i), (1, 0, i)]).unwrap();
        assert!(n.hermitian_defect() > 1.0);
    }

    #[test]
    fn triplet_round_trip() {
        let a = CsrMatrix::from_triplets(3, 4, &[(0, 3, 1.5), (2, 1, -1e-300), (1, 1, 7.0)]).unwrap();
        let mut buf = Vec::new();
        a.write_triplets(&mut buf).unwrap();
        let b = CsrMatrix::<f64>::read_triplets(&buf[..]).unwrap();
        assert_eq!(a, b);

        let c = CsrMatrix::from_triplets(2, 2, &[(1, 0, Complex64::new(0.25, -3.0))]).unwrap();
        let mut buf = Vec::new();
        c.write_triplets(&mut buf).unwrap();
        assert_eq!(CsrMatrix::<Complex64>::read_triplets(&buf[..]).unwrap(), c);
        assert!(CsrMatrix::<f64>::read_triplets(&b"0 1\n"[..]).is_err());
    }

    #[test]
    fn submatrix_and_transpose() {
        let a = CsrMatrix::from_triplets(3, 3, &[(0, 0, 1.0), (0, 2, 2.0), (2, 1, 3.0), (1, 1, 4.0)])
            .unwrap();
        let s = a.submatrix(&[2, 0], &[1, 2]);
        assert_eq!(s.to_dense(), nalgebra::dmatrix![3.0, 0.0; 0.0, 2.0]);
        assert_eq!(a.transpose().get(2, 0), 2.0);
    }
}
