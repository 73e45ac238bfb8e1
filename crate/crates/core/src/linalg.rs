//! Dense row-major linear algebra over `f64`.
//!
//! Only what the splitting algorithms need: slice-level vector helpers, a
//! [`Mat`] type, one-sided Jacobi SVD, the operator norm, and small LU solves.
//! Lifted points (elements of a product space) live in [`Blocks`].

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Absolute floor used in `atol + rtol * scale` comparisons.
pub const ATOL: f64 = 1e-12;

const SVD_MAX_SWEEPS: usize = 100;
const SVD_TOL: f64 = 1e-12;
const QL_MAX_ITER: usize = 60;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| s * x).collect()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// Dense matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::shape(format!("empty matrix {rows}x{cols}")));
        }
        if rows * cols != data.len() {
            return Err(Error::shape(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Mat { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Mat::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::shape(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Mat::new(rows.len(), cols, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        all_finite(&self.data)
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec dimension");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `selfᵀ x`
    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows, "matvec_t dimension");
        let mut out = vec![0.0; self.cols];
        for (i, xi) in x.iter().enumerate() {
            axpy(*xi, self.row(i), &mut out);
        }
        out
    }

    pub fn matmul(&self, other: &Mat) -> Result<Mat> {
        if self.cols != other.rows {
            return Err(Error::shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, a) in self.row(i).iter().enumerate() {
                if *a != 0.0 {
                    axpy(*a, other.row(k), dst);
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ self`
    pub fn gram(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.cols);
        for i in 0..self.rows {
            let r = self.row(i);
            for (a, ra) in r.iter().enumerate() {
                if *ra != 0.0 {
                    axpy(*ra, r, out.row_mut(a));
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!(self.shape(), other.shape());
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: add(&self.data, &other.data),
        }
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        assert_eq!(self.shape(), other.shape());
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: sub(&self.data, &other.data),
        }
    }

    pub fn scale(&self, s: f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: scale(&self.data, s),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square() && (0..self.rows).all(|i| (0..i).all(|j| self[(i, j)] == self[(j, i)]))
    }

    /// Symmetric part `(M + Mᵀ)/2`.
    pub fn sym_part(&self) -> Mat {
        assert!(self.is_square());
        Mat::from_fn(self.rows, self.cols, |i, j| 0.5 * (self[(i, j)] + self[(j, i)]))
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

/// Thin singular value decomposition `X = U diag(sigma) Vᵀ`.
///
/// With `k = min(rows, cols)`, `u` is `rows x k`, `sigma` has `k` entries in
/// descending order and `vt` is `k x cols`.
#[derive(Clone, Debug)]
pub struct SvdResult {
    pub u: Mat,
    pub sigma: Vec<f64>,
    pub vt: Mat,
}

impl SvdResult {
    pub fn reconstruct(&self) -> Mat {
        let scaled = Mat::from_fn(self.u.rows(), self.u.cols(), |i, j| {
            self.u[(i, j)] * self.sigma[j]
        });
        scaled.matmul(&self.vt).expect("svd factors conform")
    }
}

/// One-sided (Hestenes) Jacobi SVD.
pub fn svd(x: &Mat) -> Result<SvdResult> {
    if !x.is_finite() {
        return Err(Error::param("svd input has non-finite entries"));
    }
    if x.rows() >= x.cols() {
        jacobi_tall(x)
    } else {
        let t = jacobi_tall(&x.transpose())?;
        Ok(SvdResult {
            u: t.vt.transpose(),
            sigma: t.sigma,
            vt: t.u.transpose(),
        })
    }
}

// Rows of `w` are the columns of X V; rows of `v` are the rows of Vᵀ. Both
// receive the same plane rotations.
fn jacobi_tall(x: &Mat) -> Result<SvdResult> {
    let (m, n) = x.shape();
    let mut w = x.transpose();
    let mut v = Mat::identity(n);

    // columns below this norm are numerically zero and need no rotation
    let negligible = f64::EPSILON * x.frobenius_norm();
    let floor = negligible * negligible;
    let mut converged = n < 2;
    let mut sweeps = 0;
    while !converged {
        if sweeps == SVD_MAX_SWEEPS {
            return Err(Error::Decomposition(SVD_MAX_SWEEPS));
        }
        sweeps += 1;
        converged = true;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let a = norm_sq(w.row(p));
                let b = norm_sq(w.row(q));
                let d = dot(w.row(p), w.row(q));
                if d == 0.0 || a <= floor || b <= floor || d.abs() <= SVD_TOL * (a * b).sqrt() {
                    continue;
                }
                converged = false;
                let zeta = (b - a) / (2.0 * d);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_rows(&mut w, p, q, c, s);
                rotate_rows(&mut v, p, q, c, s);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|j| norm(w.row(j))).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

    let sigma: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let smax = sigma.first().copied().unwrap_or(0.0);
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut vt = Mat::zeros(n, n);
    for (k, &j) in order.iter().enumerate() {
        vt.row_mut(k).copy_from_slice(v.row(j));
        let s = sigma[k];
        if s > 0.0 && s > f64::EPSILON * smax * (m as f64) {
            u_cols.push(scale(w.row(j), 1.0 / s));
        } else {
            u_cols.push(complete_basis(&u_cols, m));
        }
    }
    let u = Mat::from_fn(m, n, |i, k| u_cols[k][i]);
    Ok(SvdResult { u, sigma, vt })
}

fn rotate_rows(m: &mut Mat, p: usize, q: usize, c: f64, s: f64) {
    let cols = m.cols();
    let (lo, hi) = m.data.split_at_mut(q * cols);
    let rp = &mut lo[p * cols..(p + 1) * cols];
    let rq = &mut hi[..cols];
    for (a, b) in rp.iter_mut().zip(rq.iter_mut()) {
        let (x, y) = (*a, *b);
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}

// A unit vector orthogonal to `basis`, by Gram-Schmidt over the standard basis.
fn complete_basis(basis: &[Vec<f64>], m: usize) -> Vec<f64> {
    let mut best = vec![0.0; m];
    let mut best_norm = -1.0;
    for e in 0..m {
        let mut cand = vec![0.0; m];
        cand[e] = 1.0;
        for _ in 0..2 {
            for b in basis {
                let proj = dot(&cand, b);
                axpy(-proj, b, &mut cand);
            }
        }
        let nc = norm(&cand);
        if nc > best_norm {
            best_norm = nc;
            best = cand;
        }
        if nc > 0.5 {
            break;
        }
    }
    scale(&best, 1.0 / best_norm)
}

/// Largest singular value.
///
/// Symmetric input goes through Householder tridiagonalisation and implicit
/// QL (cheap at n = 1000); everything else through [`svd`].
pub fn op_norm(x: &Mat) -> Result<f64> {
    if x.is_symmetric() && x.rows() > 1 {
        let eig = sym_eigenvalues(x)?;
        Ok(eig.iter().fold(0.0_f64, |acc, l| acc.max(l.abs())))
    } else {
        Ok(svd(x)?.sigma[0])
    }
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn sym_eigenvalues(x: &Mat) -> Result<Vec<f64>> {
    if !x.is_square() {
        return Err(Error::shape("eigenvalues of a non-square matrix"));
    }
    if !x.is_finite() {
        return Err(Error::param("eigenvalue input has non-finite entries"));
    }
    let (mut d, mut e) = tridiagonalize(x);
    tql_implicit(&mut d, &mut e)?;
    d.sort_by(f64::total_cmp);
    Ok(d)
}

// Householder reduction to tridiagonal form; returns (diagonal, subdiagonal)
// with the subdiagonal stored in e[1..].
fn tridiagonalize(x: &Mat) -> (Vec<f64>, Vec<f64>) {
    let n = x.rows();
    let mut a = x.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let scale: f64 = (0..=l).map(|k| a[(i, k)].abs()).sum();
            if scale == 0.0 {
                e[i] = a[(i, l)];
            } else {
                for k in 0..=l {
                    a[(i, k)] /= scale;
                    h += a[(i, k)] * a[(i, k)];
                }
                let f = a[(i, l)];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                a[(i, l)] = f - g;
                let mut f = 0.0;
                for j in 0..=l {
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += a[(j, k)] * a[(i, k)];
                    }
                    for k in j + 1..=l {
                        g += a[(k, j)] * a[(i, k)];
                    }
                    e[j] = g / h;
                    f += e[j] * a[(i, j)];
                }
                let hh = f / (h + h);
                for j in 0..=l {
                    let f = a[(i, j)];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        a[(j, k)] -= f * e[k] + g * a[(i, k)];
                    }
                }
            }
        } else {
            e[i] = a[(i, l)];
        }
        d[i] = h;
    }
    for (i, di) in d.iter_mut().enumerate() {
        *di = a[(i, i)];
    }
    (d, e)
}

fn tql_implicit(d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > QL_MAX_ITER {
                return Err(Error::Decomposition(QL_MAX_ITER));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// LU factorisation with partial pivoting.
#[derive(Clone, Debug)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    pub fn factor(m: &Mat) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::shape(format!(
                "LU of non-square {}x{} matrix",
                m.rows(),
                m.cols()
            )));
        }
        let n = m.rows();
        let scale = m.as_slice().iter().fold(0.0_f64, |a, x| a.max(x.abs()));
        let tiny = f64::EPSILON * (n as f64) * scale.max(ATOL);
        let mut lu = m.as_slice().to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (piv, pval) = (k..n)
                .map(|i| (i, lu[i * n + k].abs()))
                .fold((k, -1.0), |acc, c| if c.1 > acc.1 { c } else { acc });
            if pval <= tiny {
                return Err(Error::Singular {
                    column: k,
                    pivot: pval,
                });
            }
            if piv != k {
                for j in 0..n {
                    lu.swap(k * n + j, piv * n + j);
                }
                perm.swap(k, piv);
            }
            let pivot = lu[k * n + k];
            for i in k + 1..n {
                let f = lu[i * n + k] / pivot;
                lu[i * n + k] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        lu[i * n + j] -= f * lu[k * n + j];
                    }
                }
            }
        }
        Ok(Lu { n, lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n, "LU solve dimension");
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s = dot(&self.lu[i * n..i * n + i], &x[..i]);
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s = dot(&self.lu[i * n + i + 1..(i + 1) * n], &x[i + 1..]);
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
        x
    }
}

/// Solves `M x = b` for a small dense square `M`.
pub fn solve_small(m: &Mat, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != m.rows() {
        return Err(Error::shape(format!(
            "right-hand side has {} entries, matrix has {} rows",
            b.len(),
            m.rows()
        )));
    }
    Ok(Lu::factor(m)?.solve(b))
}

/// `count` points of `R^dim` stored contiguously: an element of a product space.
#[derive(Clone, PartialEq)]
pub struct Blocks {
    dim: usize,
    data: Vec<f64>,
}

impl Blocks {
    pub fn zeros(count: usize, dim: usize) -> Self {
        Blocks {
            dim,
            data: vec![0.0; count * dim],
        }
    }

    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::shape(format!(
                "{} values do not split into blocks of {dim}",
                data.len()
            )));
        }
        Ok(Blocks { dim, data })
    }

    pub fn from_blocks<B: AsRef<[f64]>>(blocks: &[B]) -> Result<Self> {
        let dim = blocks
            .first()
            .map(|b| b.as_ref().len())
            .ok_or_else(|| Error::shape("no blocks"))?;
        let mut data = Vec::with_capacity(dim * blocks.len());
        for b in blocks {
            if b.as_ref().len() != dim {
                return Err(Error::shape("blocks of unequal dimension"));
            }
            data.extend_from_slice(b.as_ref());
        }
        Blocks::from_flat(dim, data)
    }

    pub fn count(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn to_vecs(&self) -> Vec<Vec<f64>> {
        self.iter().map(<[f64]>::to_vec).collect()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn dist(&self, other: &Blocks) -> f64 {
        dist(&self.data, &other.data)
    }

    pub fn sub(&self, other: &Blocks) -> Blocks {
        assert_eq!(self.dim, other.dim);
        Blocks {
            dim: self.dim,
            data: sub(&self.data, &other.data),
        }
    }

    /// Blockwise sum.
    pub fn sum(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for b in self.iter() {
            axpy(1.0, b, &mut out);
        }
        out
    }

    /// Blockwise mean.
    pub fn mean(&self) -> Vec<f64> {
        scale(&self.sum(), 1.0 / self.count() as f64)
    }

    /// `max_{i,j} |x_i - x_j|`, the diameter of the block set.
    pub fn spread(&self) -> f64 {
        if self.dim == 1 {
            let lo = self.data.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            return if self.data.is_empty() { 0.0 } else { hi - lo };
        }
        let k = self.count();
        let mut worst = 0.0_f64;
        for i in 0..k {
            for j in i + 1..k {
                worst = worst.max(dist(self.block(i), self.block(j)));
            }
        }
        worst
    }
}

impl fmt::Debug for Blocks {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.iter()).finish()
    }
}
