//! Dense complex matrix primitives.
//!
//! Everything here works on small row-major matrices of `Complex<f64>`.
//! Hermitian eigendecomposition goes through the real symmetric embedding
//! `[[Re, -Im], [Im, Re]]`, Householder tridiagonalization and implicit QL.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use num_complex::Complex;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Sweep cap for the QL iteration, per eigenvalue.
pub const EIG_MAX_SWEEPS: usize = 64;

/// Absolute tolerance floor used together with relative tolerances.
pub const ABS_FLOOR: f64 = 1e-14;

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.6}{:+.6}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {}x{} matrix",
                data.len(),
                rows,
                cols
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("non-finite matrix entry".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_real(rows: usize, cols: usize, values: &[f64]) -> Self {
        assert_eq!(values.len(), rows * cols);
        Self { rows, cols, data: values.iter().map(|&v| C64::new(v, 0.0)).collect() }
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = C64::new(v, 0.0);
        }
        m
    }

    /// `|u><v|`
    pub fn outer(u: &[C64], v: &[C64]) -> Self {
        Self::from_fn(u.len(), v.len(), |r, c| u[r] * v[c].conj())
    }

    /// `|u><u|`
    pub fn projector(u: &[C64]) -> Self {
        Self::outer(u, u)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn column(&self, c: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn conj(&self) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn scale_c(&self, s: C64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// `trace(self * other)` without forming the product.
    pub fn trace_product(&self, other: &ComplexMatrix) -> C64 {
        debug_assert_eq!(self.cols, other.rows);
        debug_assert_eq!(self.rows, other.cols);
        let mut acc = ZERO;
        for r in 0..self.rows {
            for k in 0..self.cols {
                acc += self[(r, k)] * other[(k, r)];
            }
        }
        acc
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entrywise deviation from `other`.
    pub fn max_diff(&self, other: &ComplexMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, rel_tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let tol = rel_tol * self.max_abs() + ABS_FLOOR;
        for r in 0..self.rows {
            for c in r..self.cols {
                if (self[(r, c)] - self[(c, r)].conj()).norm() > tol {
                    return false;
                }
            }
        }
        true
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = ComplexMatrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == ZERO {
                    continue;
                }
                let orow = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[r * other.cols..(r + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| self[(r, c)] * v[c]).sum())
            .collect()
    }

    /// Copy of the sub-matrix starting at `(r0, c0)`.
    pub fn submatrix(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(rows, cols, |r, c| self[(r0 + r, c0 + c)])
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

impl Add<&ComplexMatrix> for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub<&ComplexMatrix> for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl AddAssign<&ComplexMatrix> for ComplexMatrix {
    fn add_assign(&mut self, rhs: &ComplexMatrix) {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl SubAssign<&ComplexMatrix> for ComplexMatrix {
    fn sub_assign(&mut self, rhs: &ComplexMatrix) {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
    }
}

impl Mul<&ComplexMatrix> for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.scale(-1.0)
    }
}

/// A square matrix equal to its conjugate transpose.
///
/// Construction symmetrizes, so the stored entries satisfy the invariant
/// exactly; [`HermitianMatrix::new`] additionally rejects inputs that were
/// far from Hermitian to begin with.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix(ComplexMatrix);

impl HermitianMatrix {
    /// Tolerance (relative to the largest entry) accepted by [`HermitianMatrix::new`].
    pub const TOL: f64 = 1e-12;

    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "hermitian matrix must be square, got {}x{}",
                m.rows, m.cols
            )));
        }
        if !m.is_hermitian(Self::TOL) {
            return Err(Error::InvalidInput("matrix is not hermitian".into()));
        }
        Ok(Self::symmetrize(&m))
    }

    /// `(m + m*) / 2`
    pub fn symmetrize(m: &ComplexMatrix) -> Self {
        assert!(m.is_square(), "symmetrize needs a square matrix");
        let n = m.rows;
        let mut out = m.clone();
        for r in 0..n {
            out[(r, r)] = C64::new(m[(r, r)].re, 0.0);
            for c in r + 1..n {
                let z = (m[(r, c)] + m[(c, r)].conj()) * 0.5;
                out[(r, c)] = z;
                out[(c, r)] = z.conj();
            }
        }
        Self(out)
    }

    pub fn zeros(n: usize) -> Self {
        Self(ComplexMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(ComplexMatrix::identity(n))
    }

    pub fn diag(values: &[f64]) -> Self {
        Self(ComplexMatrix::diag(values))
    }

    pub fn projector(u: &[C64]) -> Self {
        Self::symmetrize(&ComplexMatrix::projector(u))
    }

    pub fn dim(&self) -> usize {
        self.0.rows
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn real_trace(&self) -> f64 {
        self.0.trace().re
    }

    /// Real trace inner product `tr(self * other)`.
    pub fn inner(&self, other: &HermitianMatrix) -> f64 {
        self.0.trace_product(&other.0).re
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.scale(s))
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(herm_eig(self)?.values.last().copied().unwrap_or(0.0))
    }

    pub fn max_eigenvalue(&self) -> Result<f64> {
        Ok(herm_eig(self)?.values.first().copied().unwrap_or(0.0))
    }
}

impl std::ops::Deref for HermitianMatrix {
    type Target = ComplexMatrix;
    fn deref(&self) -> &ComplexMatrix {
        &self.0
    }
}

impl Add<&HermitianMatrix> for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn add(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix(&self.0 + &rhs.0)
    }
}

impl Sub<&HermitianMatrix> for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn sub(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix(&self.0 - &rhs.0)
    }
}

impl AddAssign<&HermitianMatrix> for HermitianMatrix {
    fn add_assign(&mut self, rhs: &HermitianMatrix) {
        self.0 += &rhs.0;
    }
}

/// Kronecker product; dimensions multiply.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (ar, ac, br, bc) = (a.rows, a.cols, b.rows, b.cols);
    let mut out = ComplexMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            if s == ZERO {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = s * b[(k, l)];
                }
            }
        }
    }
    out
}

pub fn kron_herm(a: &HermitianMatrix, b: &HermitianMatrix) -> HermitianMatrix {
    HermitianMatrix(kron(a, b))
}

fn decode(mut idx: usize, dims: &[usize], digits: &mut [usize]) {
    for f in (0..dims.len()).rev() {
        digits[f] = idx % dims[f];
        idx /= dims[f];
    }
}

fn encode(digits: impl Iterator<Item = (usize, usize)>) -> usize {
    digits.fold(0, |acc, (d, n)| acc * n + d)
}

/// Trace out every tensor factor not listed in `keep`.
///
/// `dims` lists the factor dimensions in Kronecker order; kept factors
/// stay in their original relative order.
pub fn partial_trace(m: &ComplexMatrix, dims: &[usize], keep: &[usize]) -> Result<ComplexMatrix> {
    let total: usize = dims.iter().product();
    if !m.is_square() || m.rows != total {
        return Err(Error::DimensionMismatch(format!(
            "partial trace: {}x{} matrix vs factor dims {:?}",
            m.rows, m.cols, dims
        )));
    }
    if let Some(&bad) = keep.iter().find(|&&k| k >= dims.len()) {
        return Err(Error::DimensionMismatch(format!("partial trace: factor {bad} out of range")));
    }
    let kept: Vec<usize> = (0..dims.len()).filter(|f| keep.contains(f)).collect();
    let traced: Vec<usize> = (0..dims.len()).filter(|f| !keep.contains(f)).collect();
    let out_dim: usize = kept.iter().map(|&f| dims[f]).product();

    let mut digits = vec![0; dims.len()];
    let mut kept_idx = vec![0; total];
    let mut traced_idx = vec![0; total];
    for idx in 0..total {
        decode(idx, dims, &mut digits);
        kept_idx[idx] = encode(kept.iter().map(|&f| (digits[f], dims[f])));
        traced_idx[idx] = encode(traced.iter().map(|&f| (digits[f], dims[f])));
    }

    let mut out = ComplexMatrix::zeros(out_dim, out_dim);
    for r in 0..total {
        for c in 0..total {
            if traced_idx[r] == traced_idx[c] {
                out[(kept_idx[r], kept_idx[c])] += m[(r, c)];
            }
        }
    }
    Ok(out)
}

/// Reorder tensor factors: factor `k` of the result is factor `perm[k]` of `m`.
pub fn permute_factors(m: &ComplexMatrix, dims: &[usize], perm: &[usize]) -> Result<ComplexMatrix> {
    let total: usize = dims.iter().product();
    if !m.is_square() || m.rows != total || perm.len() != dims.len() {
        return Err(Error::DimensionMismatch(format!(
            "permute_factors: {}x{} matrix vs dims {:?} / perm {:?}",
            m.rows, m.cols, dims, perm
        )));
    }
    let mut seen = vec![false; dims.len()];
    for &p in perm {
        if p >= dims.len() || std::mem::replace(&mut seen[p], true) {
            return Err(Error::InvalidInput(format!("{perm:?} is not a permutation")));
        }
    }
    let mut digits = vec![0; dims.len()];
    let map: Vec<usize> = (0..total)
        .map(|idx| {
            decode(idx, dims, &mut digits);
            encode(perm.iter().map(|&p| (digits[p], dims[p])))
        })
        .collect();
    let mut out = ComplexMatrix::zeros(total, total);
    for r in 0..total {
        for c in 0..total {
            out[(map[r], map[c])] = m[(r, c)];
        }
    }
    Ok(out)
}

/// Spectral decomposition `h = V diag(values) V*` with values descending.
#[derive(Clone, Debug)]
pub struct HermEig {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl HermEig {
    /// `V f(diag) V*`
    pub fn map(&self, f: impl Fn(f64) -> f64) -> HermitianMatrix {
        let n = self.values.len();
        let mut out = ComplexMatrix::zeros(n, n);
        for (k, &lam) in self.values.iter().enumerate() {
            let w = f(lam);
            if w == 0.0 {
                continue;
            }
            for r in 0..n {
                let vr = self.vectors[(r, k)] * w;
                for c in 0..n {
                    out[(r, c)] += vr * self.vectors[(c, k)].conj();
                }
            }
        }
        HermitianMatrix::symmetrize(&out)
    }
}

pub fn herm_eig(h: &HermitianMatrix) -> Result<HermEig> {
    let n = h.dim();
    if n == 0 {
        return Ok(HermEig { values: vec![], vectors: ComplexMatrix::zeros(0, 0) });
    }
    let is_real = h.as_slice().iter().all(|z| z.im == 0.0);
    if is_real {
        let a: Vec<f64> = h.as_slice().iter().map(|z| z.re).collect();
        let (vals, vecs) = symmetric_eig(&a, n)?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&x, &y| vals[y].total_cmp(&vals[x]));
        let values = order.iter().map(|&k| vals[k]).collect();
        let vectors = ComplexMatrix::from_fn(n, n, |r, c| C64::new(vecs[r * n + order[c]], 0.0));
        return Ok(HermEig { values, vectors });
    }

    // Real embedding [[A, -B], [B, A]] of A + iB; every eigenvalue doubles.
    let m = 2 * n;
    let mut a = vec![0.0; m * m];
    for r in 0..n {
        for c in 0..n {
            let z = h[(r, c)];
            a[r * m + c] = z.re;
            a[(r + n) * m + (c + n)] = z.re;
            a[r * m + (c + n)] = -z.im;
            a[(r + n) * m + c] = z.im;
        }
    }
    let (vals, vecs) = symmetric_eig(&a, m)?;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&x, &y| vals[y].total_cmp(&vals[x]));

    // Pick n complex-orthonormal vectors out of the 2n real ones.
    let mut chosen: Vec<Vec<C64>> = Vec::with_capacity(n);
    for &k in &order {
        if chosen.len() == n {
            break;
        }
        let mut v: Vec<C64> = (0..n).map(|r| C64::new(vecs[r * m + k], vecs[(r + n) * m + k])).collect();
        for u in &chosen {
            let proj: C64 = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (vi, ui) in v.iter_mut().zip(u) {
                *vi -= proj * ui;
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.5 {
            for z in &mut v {
                *z /= norm;
            }
            chosen.push(v);
        }
    }
    if chosen.len() != n {
        return Err(Error::NonConvergence(format!(
            "complex eigenvector extraction found {} of {} vectors",
            chosen.len(),
            n
        )));
    }
    let mut pairs: Vec<(f64, Vec<C64>)> = chosen
        .into_iter()
        .map(|v| {
            let hv = h.mul_vec(&v);
            let lam: f64 = v.iter().zip(&hv).map(|(a, b)| (a.conj() * b).re).sum();
            (lam, v)
        })
        .collect();
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
    let values = pairs.iter().map(|p| p.0).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, c| pairs[c].1[r]);
    Ok(HermEig { values, vectors })
}

/// Eigen-decomposition of a real symmetric row-major matrix.
/// Returns unsorted eigenvalues and the row-major eigenvector matrix (columns).
fn symmetric_eig(a: &[f64], n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut v: Vec<Vec<f64>> = (0..n).map(|r| a[r * n..(r + 1) * n].to_vec()).collect();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut v, &mut d, &mut e);
    tql2(&mut v, &mut d, &mut e)?;
    let mut flat = vec![0.0; n * n];
    for r in 0..n {
        flat[r * n..(r + 1) * n].copy_from_slice(&v[r]);
    }
    Ok((d, flat))
}

// Householder reduction to tridiagonal form (EISPACK tred2).
fn tred2(v: &mut [Vec<f64>], d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[n - 1][j];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[i - 1][j];
                v[i][j] = 0.0;
                v[j][i] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for j in 0..i {
                e[j] = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[j][i] = f;
                g = e[j] + v[j][j] * f;
                for k in j + 1..i {
                    g += v[k][j] * d[k];
                    e[k] += v[k][j] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[k][j] -= f * e[k] + g * d[k];
                }
                d[j] = v[i - 1][j];
                v[i][j] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n.saturating_sub(1) {
        v[n - 1][i] = v[i][i];
        v[i][i] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[k][i + 1] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[k][i + 1] * v[k][j];
                }
                for k in 0..=i {
                    v[k][j] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[k][i + 1] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[n - 1][j];
        v[n - 1][j] = 0.0;
    }
    v[n - 1][n - 1] = 1.0;
    e[0] = 0.0;
}

// Implicit-shift QL on the tridiagonal form (EISPACK tql2).
fn tql2(v: &mut [Vec<f64>], d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                if sweeps > EIG_MAX_SWEEPS {
                    return Err(Error::NonConvergence(format!(
                        "QL iteration exceeded {EIG_MAX_SWEEPS} sweeps"
                    )));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for row in v.iter_mut() {
                        h = row[i + 1];
                        row[i + 1] = s * row[i] + c * h;
                        row[i] = c * row[i] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Sum of singular values.
pub fn trace_norm(m: &ComplexMatrix) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch("trace norm needs a square matrix".into()));
    }
    if m.is_hermitian(0.0) {
        let eig = herm_eig(&HermitianMatrix::symmetrize(m))?;
        return Ok(eig.values.iter().map(|v| v.abs()).sum());
    }
    let gram = HermitianMatrix::symmetrize(&m.adjoint().matmul(m));
    let eig = herm_eig(&gram)?;
    Ok(eig.values.iter().map(|v| v.max(0.0).sqrt()).sum())
}

/// Lower-triangular `L` with `h = L L*`; fails if `h` is not positive definite.
pub fn cholesky(h: &HermitianMatrix) -> Result<ComplexMatrix> {
    let n = h.dim();
    let mut l = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        let mut diag = h[(j, j)].re;
        for k in 0..j {
            diag -= l[(j, k)].norm_sqr();
        }
        if diag <= 0.0 || !diag.is_finite() {
            return Err(Error::NotPositiveDefinite);
        }
        let ljj = diag.sqrt();
        l[(j, j)] = C64::new(ljj, 0.0);
        for i in j + 1..n {
            let mut s = h[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Inverse of a lower-triangular matrix.
pub fn lower_inverse(l: &ComplexMatrix) -> ComplexMatrix {
    let n = l.rows();
    let mut inv = ComplexMatrix::zeros(n, n);
    for c in 0..n {
        inv[(c, c)] = ONE / l[(c, c)];
        for r in c + 1..n {
            let mut s = ZERO;
            for k in c..r {
                s += l[(r, k)] * inv[(k, c)];
            }
            inv[(r, c)] = -s / l[(r, r)];
        }
    }
    inv
}

/// Inverse of a Hermitian positive definite matrix.
pub fn hpd_inverse(h: &HermitianMatrix) -> Result<HermitianMatrix> {
    let linv = lower_inverse(&cholesky(h)?);
    Ok(HermitianMatrix::symmetrize(&linv.adjoint().matmul(&linv)))
}

/// `h^{-1/2}` for positive definite `h`; eigenvalues below `floor` are rejected.
pub fn inv_sqrt(h: &HermitianMatrix, floor: f64) -> Result<HermitianMatrix> {
    let eig = herm_eig(h)?;
    if eig.values.iter().any(|&v| v <= floor) {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(eig.map(|v| 1.0 / v.sqrt()))
}

/// Projection onto the PSD cone (negative eigenvalues clipped to zero).
pub fn psd_part(h: &HermitianMatrix) -> Result<HermitianMatrix> {
    Ok(herm_eig(h)?.map(|v| v.max(0.0)))
}

/// Number of real coordinates of an `n x n` Hermitian matrix.
pub fn svec_len(n: usize) -> usize {
    n * n
}

/// Coordinates of `h` in the trace-orthonormal Hermitian basis from [`hermitian_basis`].
pub fn svec(h: &ComplexMatrix) -> Vec<f64> {
    let n = h.rows();
    let s2 = std::f64::consts::SQRT_2;
    let mut out = Vec::with_capacity(n * n);
    for k in 0..n {
        out.push(h[(k, k)].re);
        for l in k + 1..n {
            out.push(s2 * h[(k, l)].re);
            out.push(s2 * h[(k, l)].im);
        }
    }
    out
}

/// Inverse of [`svec`].
pub fn smat(v: &[f64], n: usize) -> HermitianMatrix {
    assert_eq!(v.len(), n * n);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut m = ComplexMatrix::zeros(n, n);
    let mut t = 0;
    for k in 0..n {
        m[(k, k)] = C64::new(v[t], 0.0);
        t += 1;
        for l in k + 1..n {
            let z = C64::new(v[t] * s, v[t + 1] * s);
            m[(k, l)] = z;
            m[(l, k)] = z.conj();
            t += 2;
        }
    }
    HermitianMatrix(m)
}

/// Trace-orthonormal real basis of the `n x n` Hermitian matrices, ordered like [`svec`].
pub fn hermitian_basis(n: usize) -> Vec<HermitianMatrix> {
    (0..n * n)
        .map(|t| {
            let mut v = vec![0.0; n * n];
            v[t] = 1.0;
            smat(&v, n)
        })
        .collect()
}

/// Cholesky solve of a real symmetric positive definite system, in place.
/// `a` is row-major `n x n` and gets overwritten by its factor.
pub fn real_cholesky(a: &mut [f64], n: usize) -> Result<()> {
    for j in 0..n {
        let mut diag = a[j * n + j];
        for k in 0..j {
            diag -= a[j * n + k] * a[j * n + k];
        }
        if diag <= 0.0 || !diag.is_finite() {
            return Err(Error::NotPositiveDefinite);
        }
        let ljj = diag.sqrt();
        a[j * n + j] = ljj;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / ljj;
        }
    }
    Ok(())
}

/// Solve `L L^T x = b` given the factor from [`real_cholesky`].
pub fn real_cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut y = b.to_vec();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    y
}

/// Symmetric eigendecomposition of a real row-major matrix, values descending.
pub fn real_symmetric_eig(a: &[f64], n: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    if n == 0 {
        return Ok((vec![], vec![]));
    }
    let (vals, vecs) = symmetric_eig(a, n)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| vals[y].total_cmp(&vals[x]));
    let values = order.iter().map(|&k| vals[k]).collect();
    let vectors = order.iter().map(|&k| (0..n).map(|r| vecs[r * n + k]).collect()).collect();
    Ok((values, vectors))
}

/// Least-squares coefficients `c` minimizing `|sum_k c_k columns[k] - target|`.
///
/// Uses the pseudo-inverse of the Gram matrix with singular values below
/// `cutoff * largest` discarded. Returns the coefficients and the residual norm.
pub fn least_squares(columns: &[Vec<f64>], target: &[f64], cutoff: f64) -> Result<(Vec<f64>, f64)> {
    let k = columns.len();
    let mut gram = vec![0.0; k * k];
    for a in 0..k {
        for b in a..k {
            let g: f64 = columns[a].iter().zip(&columns[b]).map(|(x, y)| x * y).sum();
            gram[a * k + b] = g;
            gram[b * k + a] = g;
        }
    }
    let rhs: Vec<f64> = columns.iter().map(|c| c.iter().zip(target).map(|(x, y)| x * y).sum()).collect();
    let (vals, vecs) = real_symmetric_eig(&gram, k)?;
    let top = vals.first().copied().unwrap_or(0.0).max(0.0);
    let mut coeffs = vec![0.0; k];
    for (lam, v) in vals.iter().zip(&vecs) {
        if *lam > cutoff * top && *lam > 0.0 {
            let proj: f64 = v.iter().zip(&rhs).map(|(x, y)| x * y).sum::<f64>() / lam;
            for (c, vi) in coeffs.iter_mut().zip(v) {
                *c += proj * vi;
            }
        }
    }
    let mut resid = target.to_vec();
    for (c, col) in coeffs.iter().zip(columns) {
        for (r, x) in resid.iter_mut().zip(col) {
            *r -= c * x;
        }
    }
    let norm = resid.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok((coeffs, norm))
}

/// Numerical rank: singular values above `rel * largest`.
pub fn numerical_rank(columns: &[Vec<f64>], rel: f64) -> Result<usize> {
    let k = columns.len();
    let mut gram = vec![0.0; k * k];
    for a in 0..k {
        for b in a..k {
            let g: f64 = columns[a].iter().zip(&columns[b]).map(|(x, y)| x * y).sum();
            gram[a * k + b] = g;
            gram[b * k + a] = g;
        }
    }
    let (vals, _) = real_symmetric_eig(&gram, k)?;
    let sv: Vec<f64> = vals.iter().map(|v| v.max(0.0).sqrt()).collect();
    let top = sv.first().copied().unwrap_or(0.0);
    Ok(sv.iter().filter(|&&s| s > rel * top && s > 0.0).count())
}
