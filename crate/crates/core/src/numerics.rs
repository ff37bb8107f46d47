//! Dense complex linear algebra used by every detector.
//!
//! Matrices are small (at most a few hundred rows) and dense, so everything
//! here is a straightforward row-major implementation: the Gram matrix
//! `H^H H`, a Cholesky factorization of `H^H H + rho I` that is computed once
//! per channel realization and reused for every iteration, and power
//! iteration for the extreme eigenvalues of the Gram matrix.

use std::ops::{Deref, Index, IndexMut};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Default iteration cap for [`spectrum_bounds`].
pub const DEFAULT_POWER_ITERATIONS: usize = 500;

/// Default relative tolerance for the eigenvalue estimates.
pub const DEFAULT_EIGEN_TOLERANCE: f64 = 1e-6;

const POWER_START_SEED: u64 = 0x05ee_d0f9_aa11;

/// Dense complex matrix stored in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    /// Builds a matrix from row-major entries; rejects empty shapes and
    /// non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument(format!(
                "matrix shape {rows}x{cols} is empty"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        if !data.iter().all(|z| z.is_finite()) {
            return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix shape must be non-empty");
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn diagonal(entries: &[Complex64]) -> Self {
        let mut m = Self::zeros(entries.len(), entries.len());
        for (i, &d) in entries.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
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

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `A v`.
    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.cols, "mul_vec dimension mismatch");
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(Complex64::new(0.0, 0.0), |acc, (a, x)| acc + a * x)
            })
            .collect()
    }

    /// `A^H v`.
    pub fn adjoint_mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.rows, "adjoint_mul_vec dimension mismatch");
        let mut out = vec![Complex64::new(0.0, 0.0); self.cols];
        for (i, vi) in v.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a.conj() * vi;
            }
        }
        out
    }

    /// Largest absolute row sum; an upper bound on every eigenvalue modulus.
    pub fn max_abs_row_sum(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| (i..self.cols).all(|j| self[(i, j)] == self[(j, i)].conj()))
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Dense complex vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVector(Vec<Complex64>);

impl ComplexVector {
    /// Wraps entries; rejects empty or non-finite input.
    pub fn new(entries: Vec<Complex64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidArgument("vector is empty".into()));
        }
        if !entries.iter().all(|z| z.is_finite()) {
            return Err(Error::InvalidArgument("vector has non-finite entries".into()));
        }
        Ok(Self(entries))
    }

    pub fn zeros(len: usize) -> Self {
        Self::filled(len, Complex64::new(0.0, 0.0))
    }

    pub fn filled(len: usize, value: Complex64) -> Self {
        Self(vec![value; len])
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<Complex64> {
        self.0
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.is_finite())
    }
}

impl From<Vec<Complex64>> for ComplexVector {
    fn from(entries: Vec<Complex64>) -> Self {
        Self(entries)
    }
}

impl Deref for ComplexVector {
    type Target = [Complex64];

    fn deref(&self) -> &[Complex64] {
        &self.0
    }
}

/// `sum |v_i|^2`.
pub fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// `|| a - b ||^2`.
pub fn dist_sqr(a: &[Complex64], b: &[Complex64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum()
}

/// `Re <a, b> = Re(a^H b)`, the real inner product on `C^n` viewed as `R^2n`.
pub fn re_inner(a: &[Complex64], b: &[Complex64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

/// `H^H H`, with the lower triangle mirrored from the upper one so the result
/// is exactly Hermitian.
pub fn gram(h: &ComplexMatrix) -> ComplexMatrix {
    let u = h.cols();
    let mut g = ComplexMatrix::zeros(u, u);
    for k in 0..h.rows() {
        let row = h.row(k);
        for i in 0..u {
            let hi = row[i].conj();
            for j in i..u {
                g[(i, j)] += hi * row[j];
            }
        }
    }
    for i in 0..u {
        g[(i, i)].im = 0.0;
        for j in (i + 1)..u {
            g[(j, i)] = g[(i, j)].conj();
        }
    }
    g
}

/// Cholesky factor `L` of a Hermitian positive-definite matrix `A = L L^H`.
#[derive(Debug, Clone)]
pub struct HermitianFactorization {
    dim: usize,
    // row-major lower triangle, full storage
    lower: Vec<Complex64>,
}

impl HermitianFactorization {
    pub fn dim(&self) -> usize {
        self.dim
    }

    fn l(&self, i: usize, j: usize) -> Complex64 {
        self.lower[i * self.dim + j]
    }

    /// Solves `A v = b` by forward then backward substitution.
    pub fn solve(&self, b: &[Complex64]) -> Result<ComplexVector> {
        if b.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: b.len(),
            });
        }
        let n = self.dim;
        let mut z = b.to_vec();
        for i in 0..n {
            let mut acc = z[i];
            for k in 0..i {
                acc -= self.l(i, k) * z[k];
            }
            z[i] = acc / self.l(i, i).re;
        }
        for i in (0..n).rev() {
            let mut acc = z[i];
            for k in (i + 1)..n {
                acc -= self.l(k, i).conj() * z[k];
            }
            z[i] = acc / self.l(i, i).re;
        }
        Ok(ComplexVector(z))
    }
}

/// Factorizes `G + shift I` for a Hermitian `G` and `shift >= 0`.
///
/// A pivot is rejected when it falls below `n * eps * max|diag|`, which is
/// how a rank-deficient Gram matrix shows up in floating point.
pub(crate) fn factor_shifted(g: &ComplexMatrix, shift: f64) -> Result<HermitianFactorization> {
    if !g.is_square() {
        return Err(Error::DimensionMismatch {
            expected: g.rows(),
            found: g.cols(),
        });
    }
    let n = g.rows();
    let scale = (0..n)
        .map(|i| (g[(i, i)].re + shift).abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let pivot_floor = n as f64 * f64::EPSILON * scale;
    let mut lower = vec![Complex64::new(0.0, 0.0); n * n];
    for j in 0..n {
        let mut d = g[(j, j)].re + shift;
        for k in 0..j {
            d -= lower[j * n + k].norm_sqr();
        }
        if !(d > pivot_floor) {
            return Err(Error::FactorizationFailure { index: j, pivot: d });
        }
        let djj = d.sqrt();
        lower[j * n + j] = Complex64::new(djj, 0.0);
        for i in (j + 1)..n {
            let mut s = g[(i, j)];
            for k in 0..j {
                s -= lower[i * n + k] * lower[j * n + k].conj();
            }
            lower[i * n + j] = s / djj;
        }
    }
    Ok(HermitianFactorization { dim: n, lower })
}

/// Factorizes `G + rho I` for repeated solves.
pub fn factor_regularized(g: &ComplexMatrix, rho: f64) -> Result<HermitianFactorization> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "regularization rho must be positive, got {rho}"
        )));
    }
    factor_shifted(g, rho)
}

/// Solves with a factorization built by [`factor_regularized`].
pub fn solve(fact: &HermitianFactorization, b: &[Complex64]) -> Result<ComplexVector> {
    fact.solve(b)
}

/// Extreme eigenvalue estimates of a Hermitian PSD matrix.
///
/// `max_residual` and `min_residual` are the achieved eigen-residuals
/// `||G v - theta v||` of the final Ritz vectors. For a Hermitian matrix some
/// eigenvalue lies within that distance of each estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumBounds {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub rel_tolerance: f64,
    pub max_residual: f64,
    pub min_residual: f64,
    pub max_converged: bool,
    pub min_converged: bool,
    gershgorin: f64,
}

impl SpectrumBounds {
    /// Exact bounds, for callers that already know the spectrum.
    pub fn exact(lambda_min: f64, lambda_max: f64) -> Self {
        Self {
            lambda_min,
            lambda_max,
            rel_tolerance: 0.0,
            max_residual: 0.0,
            min_residual: 0.0,
            max_converged: true,
            min_converged: true,
            gershgorin: lambda_max,
        }
    }

    pub fn converged(&self) -> bool {
        self.max_converged && self.min_converged
    }

    /// An upper bound on the true largest eigenvalue.
    pub fn certified_max(&self) -> f64 {
        if self.max_converged {
            (self.lambda_max + self.max_residual).min(self.gershgorin.max(self.lambda_max))
        } else {
            self.gershgorin.max(self.lambda_max)
        }
    }

    /// A lower bound on the true smallest eigenvalue (PSD input).
    pub fn certified_min(&self) -> f64 {
        if self.min_converged {
            (self.lambda_min - self.min_residual).max(0.0)
        } else {
            0.0
        }
    }
}

/// Estimates `lambda_min` and `lambda_max` of a Hermitian PSD matrix with the
/// default iteration cap.
pub fn spectrum_bounds(g: &ComplexMatrix, rel_tolerance: f64) -> Result<SpectrumBounds> {
    spectrum_bounds_capped(g, rel_tolerance, DEFAULT_POWER_ITERATIONS)
}

/// Power iteration on `G` for `lambda_max`, then on `lambda_max I - G` for
/// `lambda_min`. Each stage stops once its eigen-residual is at most
/// `rel_tolerance * lambda_max`.
pub fn spectrum_bounds_capped(
    g: &ComplexMatrix,
    rel_tolerance: f64,
    max_iters: usize,
) -> Result<SpectrumBounds> {
    if !(rel_tolerance > 0.0 && rel_tolerance <= 1e-3) {
        return Err(Error::InvalidArgument(format!(
            "rel_tolerance must lie in (0, 1e-3], got {rel_tolerance}"
        )));
    }
    if !g.is_square() {
        return Err(Error::DimensionMismatch {
            expected: g.rows(),
            found: g.cols(),
        });
    }
    let n = g.rows();
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_START_SEED);
    let start: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let start = normalized(start);

    // Largest eigenvalue.
    let mut v = start.clone();
    let (mut lambda_max, mut max_residual, mut max_converged) = (0.0, f64::INFINITY, false);
    for _ in 0..max_iters.max(1) {
        let w = g.mul_vec(&v);
        let theta = re_inner(&v, &w);
        let res = ritz_residual(&w, &v, theta);
        lambda_max = theta.max(0.0);
        max_residual = res;
        if res <= rel_tolerance * lambda_max {
            max_converged = true;
            break;
        }
        v = normalized(w);
    }

    // Smallest eigenvalue through the shifted operator.
    let mut v = start;
    let (mut lambda_min, mut min_residual, mut min_converged) = (0.0, f64::INFINITY, false);
    for _ in 0..max_iters.max(1) {
        let gv = g.mul_vec(&v);
        let theta = re_inner(&v, &gv);
        let res = ritz_residual(&gv, &v, theta);
        lambda_min = theta.clamp(0.0, lambda_max);
        min_residual = res;
        if res <= rel_tolerance * lambda_max {
            min_converged = true;
            break;
        }
        let shifted: Vec<Complex64> = v.iter().zip(&gv).map(|(vi, gi)| lambda_max * vi - gi).collect();
        v = normalized(shifted);
    }

    let bounds = SpectrumBounds {
        lambda_min,
        lambda_max,
        rel_tolerance,
        max_residual,
        min_residual,
        max_converged,
        min_converged,
        gershgorin: g.max_abs_row_sum(),
    };
    if bounds.converged() {
        Ok(bounds)
    } else {
        Err(Error::Unconverged {
            partial: Box::new(bounds),
        })
    }
}

/// Like [`spectrum_bounds_capped`], but returns the partial estimates instead
/// of an error when the cap is hit.
pub fn spectrum_bounds_lenient(g: &ComplexMatrix, rel_tolerance: f64, max_iters: usize) -> Result<SpectrumBounds> {
    match spectrum_bounds_capped(g, rel_tolerance, max_iters) {
        Err(Error::Unconverged { partial }) => Ok(*partial),
        other => other,
    }
}

fn ritz_residual(w: &[Complex64], v: &[Complex64], theta: f64) -> f64 {
    w.iter()
        .zip(v)
        .map(|(wi, vi)| (wi - theta * vi).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

fn normalized(mut v: Vec<Complex64>) -> Vec<Complex64> {
    let norm = norm_sqr(&v).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|z| *z /= norm);
    }
    v
}
