//! Maximally monotone operators, accessed only through their resolvents.
//!
//! Each operator implements [`MonotoneOp`]; `resolvent(y, step)` evaluates
//! `J_{step A}(y) = (I + step A)^{-1}(y)`. The free functions below are the
//! closed-form proximity operators used by the experiments.

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{self, Lu, Mat};

/// A maximally monotone operator on `R^d`.
pub trait MonotoneOp: Send + Sync {
    /// Writes `J_{step A}(y)` into `out`.
    fn resolvent_into(&self, y: &[f64], step: f64, out: &mut [f64]);

    fn resolvent(&self, y: &[f64], step: f64) -> Vec<f64> {
        let mut out = vec![0.0; y.len()];
        self.resolvent_into(y, step, &mut out);
        out
    }

    fn kind(&self) -> &'static str;

    /// Strong monotonicity modulus, `0` when merely monotone.
    fn strong_modulus(&self) -> f64 {
        0.0
    }
}

impl<T: MonotoneOp + ?Sized> MonotoneOp for Box<T> {
    fn resolvent_into(&self, y: &[f64], step: f64, out: &mut [f64]) {
        (**self).resolvent_into(y, step, out)
    }

    fn kind(&self) -> &'static str {
        (**self).kind()
    }

    fn strong_modulus(&self) -> f64 {
        (**self).strong_modulus()
    }
}

impl<T: MonotoneOp + ?Sized> MonotoneOp for &T {
    fn resolvent_into(&self, y: &[f64], step: f64, out: &mut [f64]) {
        (**self).resolvent_into(y, step, out)
    }

    fn kind(&self) -> &'static str {
        (**self).kind()
    }

    fn strong_modulus(&self) -> f64 {
        (**self).strong_modulus()
    }
}

/// The zero operator; its resolvent is the identity.
#[derive(Clone, Copy, Debug, Default)]
pub struct Zero;

impl MonotoneOp for Zero {
    fn resolvent_into(&self, y: &[f64], _step: f64, out: &mut [f64]) {
        out.copy_from_slice(y);
    }

    fn kind(&self) -> &'static str {
        "zero"
    }
}

/// `∂‖· − c‖₁`, whose resolvent soft-thresholds around `c`.
#[derive(Clone, Debug)]
pub struct ShiftedAbs {
    pub center: Vec<f64>,
}

impl ShiftedAbs {
    pub fn new(center: Vec<f64>) -> Self {
        ShiftedAbs { center }
    }
}

impl MonotoneOp for ShiftedAbs {
    fn resolvent_into(&self, y: &[f64], step: f64, out: &mut [f64]) {
        for ((o, yi), ci) in out.iter_mut().zip(y).zip(&self.center) {
            *o = ci + soft(yi - ci, step);
        }
    }

    fn kind(&self) -> &'static str {
        "shifted-abs"
    }
}

/// Normal cone of the singleton `{p}`: every resolvent returns `p`.
#[derive(Clone, Debug)]
pub struct PointIndicator {
    pub point: Vec<f64>,
}

impl MonotoneOp for PointIndicator {
    fn resolvent_into(&self, _y: &[f64], _step: f64, out: &mut [f64]) {
        out.copy_from_slice(&self.point);
    }

    fn kind(&self) -> &'static str {
        "point-indicator"
    }
}

/// Normal cone of the hyperplane `{x : <a, x> = offset}`; the resolvent is the
/// orthogonal projection.
#[derive(Clone, Debug)]
pub struct Hyperplane {
    normal: Vec<f64>,
    offset: f64,
}

impl Hyperplane {
    pub fn new(normal: Vec<f64>, offset: f64) -> Result<Self> {
        if linalg::norm(&normal) == 0.0 {
            return Err(Error::param("hyperplane normal must be nonzero"));
        }
        Ok(Hyperplane { normal, offset })
    }
}

impl MonotoneOp for Hyperplane {
    fn resolvent_into(&self, y: &[f64], _step: f64, out: &mut [f64]) {
        let t = (linalg::dot(&self.normal, y) - self.offset) / linalg::norm_sq(&self.normal);
        for ((o, yi), ai) in out.iter_mut().zip(y).zip(&self.normal) {
            *o = yi - t * ai;
        }
    }

    fn kind(&self) -> &'static str {
        "normal-cone"
    }
}

/// Affine operator `x ↦ M x + c` with `M + Mᵀ ⪰ 0`.
#[derive(Clone)]
pub struct Affine {
    matrix: Mat,
    shift: Vec<f64>,
    modulus: f64,
    unit_step: Lu,
}

impl Affine {
    /// Tolerance on the smallest eigenvalue of the symmetric part.
    pub const MONOTONE_TOL: f64 = 1e-12;

    pub fn new(matrix: Mat, shift: Vec<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.rows() != shift.len() {
            return Err(Error::shape(format!(
                "affine operator needs square matrix matching shift of length {}",
                shift.len()
            )));
        }
        let modulus = linalg::sym_eigenvalues(&matrix.sym_part())?[0];
        if modulus < -Self::MONOTONE_TOL {
            return Err(Error::param(format!(
                "matrix is not monotone: symmetric part has eigenvalue {modulus:e}"
            )));
        }
        let unit_step = Lu::factor(&Mat::identity(matrix.rows()).add(&matrix))?;
        Ok(Affine {
            matrix,
            shift,
            modulus: modulus.max(0.0),
            unit_step,
        })
    }

    pub fn matrix(&self) -> &Mat {
        &self.matrix
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    /// `M x + c`
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut v = self.matrix.matvec(x);
        linalg::axpy(1.0, &self.shift, &mut v);
        v
    }
}

impl MonotoneOp for Affine {
    fn resolvent_into(&self, y: &[f64], step: f64, out: &mut [f64]) {
        let rhs: Vec<f64> = y.iter().zip(&self.shift).map(|(yi, ci)| yi - step * ci).collect();
        let x = if step == 1.0 {
            self.unit_step.solve(&rhs)
        } else {
            // I + step M is invertible for monotone M and step > 0
            resolvent_affine(&self.matrix, &self.shift, y, step)
                .expect("monotone affine resolvent is well defined")
        };
        out.copy_from_slice(&x);
    }

    fn kind(&self) -> &'static str {
        "affine"
    }

    fn strong_modulus(&self) -> f64 {
        self.modulus
    }
}

impl fmt::Debug for Affine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Affine")
            .field("matrix", &self.matrix)
            .field("shift", &self.shift)
            .field("modulus", &self.modulus)
            .finish()
    }
}

/// `factor · A` for a positive factor; `J_{step·factor·A} = J^A_{step·factor}`.
///
/// Rescaling by `1/β` turns a `β`-strongly monotone operator into a
/// 1-strongly monotone one without changing the zero set of a sum.
#[derive(Clone, Debug)]
pub struct Scaled<O> {
    pub inner: O,
    pub factor: f64,
}

impl<O: MonotoneOp> Scaled<O> {
    pub fn new(inner: O, factor: f64) -> Result<Self> {
        if !(factor > 0.0) {
            return Err(Error::param(format!("scale factor {factor} must be positive")));
        }
        Ok(Scaled { inner, factor })
    }
}

impl<O: MonotoneOp> MonotoneOp for Scaled<O> {
    fn resolvent_into(&self, y: &[f64], step: f64, out: &mut [f64]) {
        self.inner.resolvent_into(y, step * self.factor, out)
    }

    fn kind(&self) -> &'static str {
        self.inner.kind()
    }

    fn strong_modulus(&self) -> f64 {
        self.factor * self.inner.strong_modulus()
    }
}

/// An operator given directly by a resolvent closure.
pub struct FromResolvent<F> {
    label: &'static str,
    modulus: f64,
    f: F,
}

impl<F> FromResolvent<F>
where
    F: Fn(&[f64], f64) -> Vec<f64> + Send + Sync,
{
    pub fn new(label: &'static str, f: F) -> Self {
        FromResolvent {
            label,
            modulus: 0.0,
            f,
        }
    }

    pub fn with_modulus(mut self, modulus: f64) -> Self {
        self.modulus = modulus;
        self
    }
}

impl<F> MonotoneOp for FromResolvent<F>
where
    F: Fn(&[f64], f64) -> Vec<f64> + Send + Sync,
{
    fn resolvent_into(&self, y: &[f64], step: f64, out: &mut [f64]) {
        out.copy_from_slice(&(self.f)(y, step));
    }

    fn kind(&self) -> &'static str {
        self.label
    }

    fn strong_modulus(&self) -> f64 {
        self.modulus
    }
}

/// `sign(t) · max(|t| − λ, 0)`
#[inline]
pub fn soft(t: f64, lambda: f64) -> f64 {
    if t > lambda {
        t - lambda
    } else if t < -lambda {
        t + lambda
    } else {
        0.0
    }
}

/// Resolvent of `∂|· − c|` with the given step, componentwise.
pub fn prox_abs(y: &[f64], c: &[f64], step: f64) -> Vec<f64> {
    y.iter().zip(c).map(|(yi, ci)| ci + soft(yi - ci, step)).collect()
}

/// Elementwise soft-threshold, the prox of `λ‖·‖₁`.
pub fn prox_l1(y: &Mat, lambda: f64) -> Mat {
    Mat::from_fn(y.rows(), y.cols(), |i, j| soft(y[(i, j)], lambda))
}

/// Singular value soft-threshold, the prox of `λ‖·‖_*`.
pub fn prox_nuclear(y: &Mat, lambda: f64) -> Result<Mat> {
    let s = linalg::svd(y)?;
    let shrunk: Vec<f64> = s.sigma.iter().map(|v| (v - lambda).max(0.0)).collect();
    let us = Mat::from_fn(s.u.rows(), s.u.cols(), |i, j| s.u[(i, j)] * shrunk[j]);
    us.matmul(&s.vt)
}

/// Resolvent of `x ↦ M x + c`: `(I + step M)^{-1}(y − step c)`.
pub fn resolvent_affine(m: &Mat, c: &[f64], y: &[f64], step: f64) -> Result<Vec<f64>> {
    if !m.is_square() || m.rows() != c.len() || c.len() != y.len() {
        return Err(Error::shape("affine resolvent dimensions disagree"));
    }
    let lhs = Mat::identity(m.rows()).add(&m.scale(step));
    let rhs: Vec<f64> = y.iter().zip(c).map(|(yi, ci)| yi - step * ci).collect();
    linalg::solve_small(&lhs, &rhs)
}

/// Resolvent of the constant operator `x ↦ −b` (the gradient of `−<b, ·>`):
/// a shift by `step · b`.
pub fn prox_linear(b: &[f64], y: &[f64], step: f64) -> Vec<f64> {
    y.iter().zip(b).map(|(yi, bi)| yi + step * bi).collect()
}

/// Observation pattern `Ω` of a partially known matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(rows: usize, cols: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != rows * cols {
            return Err(Error::shape("mask size disagrees with shape"));
        }
        Ok(Mask { rows, cols, bits })
    }

    pub fn full(rows: usize, cols: usize) -> Self {
        Mask {
            rows,
            cols,
            bits: vec![true; rows * cols],
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.cols + j]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn density(&self) -> f64 {
        self.count() as f64 / self.bits.len() as f64
    }

    /// `P_Ω`: zero out unobserved entries.
    pub fn project(&self, m: &Mat) -> Mat {
        assert_eq!(m.shape(), self.shape());
        let data = m
            .as_slice()
            .iter()
            .zip(&self.bits)
            .map(|(v, b)| if *b { *v } else { 0.0 })
            .collect();
        Mat::new(self.rows, self.cols, data).expect("shape preserved")
    }

    /// `‖P_Ω(m)‖_F`
    pub fn masked_norm(&self, m: &Mat) -> f64 {
        m.as_slice()
            .iter()
            .zip(&self.bits)
            .filter(|(_, b)| **b)
            .map(|(v, _)| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

/// A matrix known only on its mask; values off the mask are ignored and
/// stored as zero.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialMatrix {
    values: Mat,
    mask: Mask,
}

impl PartialMatrix {
    pub fn new(values: Mat, mask: Mask) -> Result<Self> {
        if values.shape() != mask.shape() {
            return Err(Error::shape("partial matrix values and mask disagree"));
        }
        let values = mask.project(&values);
        Ok(PartialMatrix { values, mask })
    }

    pub fn values(&self) -> &Mat {
        &self.values
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.shape()
    }
}

/// Projection onto `{D : ‖P_Ω(D)‖_F ≤ δ}`. Entries off `Ω` are unconstrained
/// and pass through; entries on `Ω` are scaled radially.
pub fn project_partial_ball(v: &Mat, omega: &Mask, delta: f64) -> Mat {
    let nrm = omega.masked_norm(v);
    if nrm <= delta {
        return v.clone();
    }
    let s = delta / nrm;
    let data = v
        .as_slice()
        .iter()
        .zip(omega.bits())
        .map(|(x, b)| if *b { s * x } else { *x })
        .collect();
    Mat::new(v.rows(), v.cols(), data).expect("shape preserved")
}

/// `‖J(y)−J(ȳ)‖² − <J(y)−J(ȳ), y−ȳ>`; nonpositive for a firmly nonexpansive map.
pub fn firm_nonexpansive_slack(op: &dyn MonotoneOp, y: &[f64], ybar: &[f64], step: f64) -> f64 {
    let jy = op.resolvent(y, step);
    let jb = op.resolvent(ybar, step);
    let dj = linalg::sub(&jy, &jb);
    let dy = linalg::sub(y, ybar);
    linalg::norm_sq(&dj) - linalg::dot(&dj, &dy)
}
