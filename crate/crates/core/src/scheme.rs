//! Frugal resolvent splittings described by six coefficient matrices:
//!
//! ```text
//! y = B z + L x,   x_i = J_{A_i}(y_i),   T(z) = Tz z + Tx x,   S(z) = Sz z + Sx x
//! ```
//!
//! with `L` strictly lower triangular so the resolvents can be evaluated in
//! order `1..n`. Matrices act blockwise on `H = R^dim`.

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{self, Blocks, Mat};
use crate::operators::{MonotoneOp, Zero};
use crate::problems::Rng;
use crate::splitting::{averagedness_slack, DIVERGENCE_BOUND};
use crate::textio::{self, Reader};

/// Fixed-point tolerance required before a point is certified.
pub const FIXED_POINT_TOL: f64 = 1e-10;
/// Tolerance on kernel witness residuals.
pub const WITNESS_TOL: f64 = 1e-8;
/// `check_solution_mapping` refuses points with `‖T z − z‖` above this.
pub const MAPPING_PRECONDITION_TOL: f64 = 1e-8;

#[derive(Clone, PartialEq)]
pub struct SchemeMatrices {
    b: Mat,
    l: Mat,
    tz: Mat,
    tx: Mat,
    sz: Mat,
    sx: Mat,
}

impl SchemeMatrices {
    pub fn new(b: Mat, l: Mat, tz: Mat, tx: Mat, sz: Mat, sx: Mat) -> Result<Self> {
        let (n, d) = b.shape();
        if n == 0 || d == 0 {
            return Err(Error::shape("scheme needs n >= 1 and d >= 1"));
        }
        let expect = [
            ("L", &l, (n, n)),
            ("Tz", &tz, (d, d)),
            ("Tx", &tx, (d, n)),
            ("Sz", &sz, (1, d)),
            ("Sx", &sx, (1, n)),
        ];
        for (name, m, shape) in expect {
            if m.shape() != shape {
                return Err(Error::shape(format!(
                    "{name} is {}x{}, expected {}x{} for n={n}, d={d}",
                    m.rows(),
                    m.cols(),
                    shape.0,
                    shape.1
                )));
            }
        }
        for i in 0..n {
            for j in i..n {
                if l[(i, j)] != 0.0 {
                    return Err(Error::shape(format!(
                        "L must be strictly lower triangular, L[{},{}] = {}",
                        i + 1,
                        j + 1,
                        l[(i, j)]
                    )));
                }
            }
        }
        Ok(SchemeMatrices { b, l, tz, tx, sz, sx })
    }

    pub fn n(&self) -> usize {
        self.b.rows()
    }

    pub fn d(&self) -> usize {
        self.b.cols()
    }

    pub fn b(&self) -> &Mat {
        &self.b
    }

    pub fn l(&self) -> &Mat {
        &self.l
    }

    pub fn tz(&self) -> &Mat {
        &self.tz
    }

    pub fn tx(&self) -> &Mat {
        &self.tx
    }

    pub fn sz(&self) -> &Mat {
        &self.sz
    }

    pub fn sx(&self) -> &Mat {
        &self.sx
    }

    /// The minimal-lifting scheme on `H^{n−1}` with relaxation `gamma`.
    pub fn minimal_lifting(n: usize, gamma: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::param(format!("minimal lifting needs n >= 2, got {n}")));
        }
        let d = n - 1;
        let mut b = Mat::zeros(n, d);
        let mut l = Mat::zeros(n, n);
        b[(0, 0)] = 1.0;
        for i in 1..n - 1 {
            b[(i, i)] = 1.0;
            b[(i, i - 1)] = -1.0;
            l[(i, i - 1)] = 1.0;
        }
        b[(n - 1, n - 2)] = -1.0;
        l[(n - 1, 0)] += 1.0;
        l[(n - 1, n - 2)] += 1.0;
        let mut tx = Mat::zeros(d, n);
        for i in 0..d {
            tx[(i, i)] = -gamma;
            tx[(i, i + 1)] = gamma;
        }
        let mut sx = Mat::zeros(1, n);
        sx[(0, 0)] = 1.0;
        SchemeMatrices::new(b, l, Mat::identity(d), tx, Mat::zeros(1, d), sx)
    }

    /// Relaxed Douglas–Rachford: `x1 = J1(z)`, `x2 = J2(2x1 − z)`.
    pub fn douglas_rachford(gamma: f64) -> Self {
        SchemeMatrices::new(
            Mat::from_rows(&[[1.0], [-1.0]]).unwrap(),
            Mat::from_rows(&[[0.0, 0.0], [2.0, 0.0]]).unwrap(),
            Mat::identity(1),
            Mat::from_rows(&[[-gamma, gamma]]).unwrap(),
            Mat::zeros(1, 1),
            Mat::from_rows(&[[1.0, 0.0]]).unwrap(),
        )
        .expect("well-formed")
    }

    /// Ryu's three-operator scheme on `H^2`.
    pub fn ryu3(gamma: f64) -> Self {
        SchemeMatrices::new(
            Mat::from_rows(&[[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]]).unwrap(),
            Mat::from_rows(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0]]).unwrap(),
            Mat::identity(2),
            Mat::from_rows(&[[-gamma, 0.0, gamma], [0.0, -gamma, gamma]]).unwrap(),
            Mat::zeros(1, 2),
            Mat::from_rows(&[[1.0, 0.0, 0.0]]).unwrap(),
        )
        .expect("well-formed")
    }

    /// The four-operator extension of Ryu's scheme on `H^3`.
    pub fn ryu4(gamma: f64) -> Self {
        SchemeMatrices::new(
            Mat::from_rows(&[
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, 0.0, 1.0],
                [-1.0, -1.0, -1.0],
            ])
            .unwrap(),
            Mat::from_rows(&[
                [0.0, 0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0, 0.0],
                [-1.0, 1.0, 0.0, 0.0],
                [1.0, 1.0, 1.0, 0.0],
            ])
            .unwrap(),
            Mat::identity(3),
            Mat::from_rows(&[
                [-gamma, 0.0, 0.0, gamma],
                [0.0, -gamma, 0.0, gamma],
                [0.0, 0.0, -gamma, gamma],
            ])
            .unwrap(),
            Mat::zeros(1, 3),
            Mat::from_rows(&[[1.0, 0.0, 0.0, 0.0]]).unwrap(),
        )
        .expect("well-formed")
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.n(), self.d());
        for (name, m) in [
            ("B", &self.b),
            ("L", &self.l),
            ("Tz", &self.tz),
            ("Tx", &self.tx),
            ("Sz", &self.sz),
            ("Sx", &self.sx),
        ] {
            s.push_str("# ");
            s.push_str(name);
            s.push('\n');
            textio::write_matrix(&mut s, m);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut r = Reader::new(text);
        let h = r.header(None, 2)?;
        let (n, d) = (h[0] as usize, h[1] as usize);
        if n == 0 || d == 0 {
            return Err(Error::Parse {
                line: 1,
                message: "n and d must be positive".into(),
            });
        }
        let b = r.matrix(n, d)?;
        let l = r.matrix(n, n)?;
        let tz = r.matrix(d, d)?;
        let tx = r.matrix(d, n)?;
        let sz = r.matrix(1, d)?;
        let sx = r.matrix(1, n)?;
        r.finish()?;
        SchemeMatrices::new(b, l, tz, tx, sz, sx)
    }
}

impl fmt::Debug for SchemeMatrices {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SchemeMatrices")
            .field("n", &self.n())
            .field("d", &self.d())
            .field("B", &self.b)
            .field("L", &self.l)
            .field("Tz", &self.tz)
            .field("Tx", &self.tx)
            .field("Sz", &self.sz)
            .field("Sx", &self.sx)
            .finish()
    }
}

/// Outputs of one evaluation of a scheme.
#[derive(Clone, Debug)]
pub struct SchemeEval {
    /// `T(z)`, `d` blocks.
    pub t: Blocks,
    /// `S(z)`
    pub s: Vec<f64>,
    pub x: Blocks,
    pub y: Blocks,
    pub resolvent_calls: usize,
}

/// `out = Σ_j coeffs[j] · blocks[j]`, accumulated in index order.
fn combine(out: &mut [f64], coeffs: &[f64], blocks: &Blocks) {
    for (c, b) in coeffs.iter().zip(blocks.iter()) {
        if *c != 0.0 {
            linalg::axpy(*c, b, out);
        }
    }
}

pub fn eval_scheme<O: MonotoneOp>(s: &SchemeMatrices, z: &Blocks, ops: &[O]) -> Result<SchemeEval> {
    let (n, d) = (s.n(), s.d());
    if ops.len() != n {
        return Err(Error::shape(format!(
            "scheme has n={n} but {} operators given",
            ops.len()
        )));
    }
    if z.count() != d || z.dim() == 0 {
        return Err(Error::shape(format!(
            "scheme has d={d} but z has {} blocks",
            z.count()
        )));
    }
    let dim = z.dim();
    let mut x = Blocks::zeros(n, dim);
    let mut y = Blocks::zeros(n, dim);
    let mut calls = 0;
    for i in 0..n {
        let mut yi = vec![0.0; dim];
        combine(&mut yi, s.b.row(i), z);
        for k in 0..i {
            let c = s.l[(i, k)];
            if c != 0.0 {
                linalg::axpy(c, x.block(k), &mut yi);
            }
        }
        ops[i].resolvent_into(&yi, 1.0, x.block_mut(i));
        calls += 1;
        y.block_mut(i).copy_from_slice(&yi);
    }
    let mut t = Blocks::zeros(d, dim);
    for i in 0..d {
        let ti = t.block_mut(i);
        combine(ti, s.tz.row(i), z);
        combine(ti, s.tx.row(i), &x);
    }
    let mut sv = vec![0.0; dim];
    combine(&mut sv, s.sz.row(0), z);
    combine(&mut sv, s.sx.row(0), &x);
    Ok(SchemeEval {
        t,
        s: sv,
        x,
        y,
        resolvent_calls: calls,
    })
}

/// A candidate `v = (z, x, y, a)` in the kernel of the block matrix whose rows
/// encode `x − y + a = 0`, `Bz + Lx − y = 0` and `(Tz − I)z + Tx x = 0`.
#[derive(Clone, Debug)]
pub struct KernelWitness {
    pub z: Blocks,
    pub x: Blocks,
    pub y: Blocks,
    pub a: Blocks,
    pub residuals: [f64; 3],
}

impl KernelWitness {
    pub fn new(s: &SchemeMatrices, z: Blocks, x: Blocks, y: Blocks, a: Blocks) -> Result<Self> {
        let mut w = KernelWitness {
            z,
            x,
            y,
            a,
            residuals: [0.0; 3],
        };
        w.residuals = kernel_residuals(s, &w)?;
        Ok(w)
    }

    /// The witness implied by one evaluation at `z`: `a_i = y_i − x_i`, which
    /// lies in `A_i x_i` by definition of the resolvent.
    pub fn from_eval(s: &SchemeMatrices, z: &Blocks, e: &SchemeEval) -> Result<Self> {
        let a = e.y.sub(&e.x);
        KernelWitness::new(s, z.clone(), e.x.clone(), e.y.clone(), a)
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

pub fn kernel_residuals(s: &SchemeMatrices, w: &KernelWitness) -> Result<[f64; 3]> {
    let (n, d) = (s.n(), s.d());
    let dim = w.z.dim();
    for (name, b, want) in [("x", &w.x, n), ("y", &w.y, n), ("a", &w.a, n), ("z", &w.z, d)] {
        if b.count() != want || b.dim() != dim {
            return Err(Error::shape(format!("witness {name} has wrong block layout")));
        }
    }
    let mut r1 = 0.0;
    let mut r2 = 0.0;
    for i in 0..n {
        let mut v: Vec<f64> = (0..dim)
            .map(|j| w.x.block(i)[j] - w.y.block(i)[j] + w.a.block(i)[j])
            .collect();
        r1 += linalg::norm_sq(&v);
        v.iter_mut().for_each(|e| *e = 0.0);
        combine(&mut v, s.b.row(i), &w.z);
        combine(&mut v, s.l.row(i), &w.x);
        linalg::axpy(-1.0, w.y.block(i), &mut v);
        r2 += linalg::norm_sq(&v);
    }
    let mut r3 = 0.0;
    for i in 0..d {
        let mut v = vec![0.0; dim];
        combine(&mut v, s.tz.row(i), &w.z);
        linalg::axpy(-1.0, w.z.block(i), &mut v);
        combine(&mut v, s.tx.row(i), &w.x);
        r3 += linalg::norm_sq(&v);
    }
    Ok([r1.sqrt(), r2.sqrt(), r3.sqrt()])
}

#[derive(Clone, Debug)]
pub struct SolutionMappingReport {
    /// `‖T z − z‖`
    pub fixed_point_residual: f64,
    /// `max_i ‖x_i − x_1‖`
    pub spread: f64,
    /// `‖S(z) − mean(y)‖`
    pub mapping_gap: f64,
    /// `‖Σ_i (y_i − x_i)‖`
    pub inclusion_residual: f64,
    pub solution: Vec<f64>,
}

impl SolutionMappingReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.spread <= tol && self.mapping_gap <= tol && self.inclusion_residual <= tol
    }
}

pub fn check_solution_mapping<O: MonotoneOp>(
    s: &SchemeMatrices,
    ops: &[O],
    z_fixed: &Blocks,
) -> Result<SolutionMappingReport> {
    let e = eval_scheme(s, z_fixed, ops)?;
    let fixed_point_residual = e.t.dist(z_fixed);
    if !(fixed_point_residual <= MAPPING_PRECONDITION_TOL) {
        return Err(Error::NotFixedPoint(fixed_point_residual));
    }
    let x1 = e.x.block(0);
    let spread = e.x.iter().map(|xi| linalg::dist(xi, x1)).fold(0.0, f64::max);
    let mapping_gap = linalg::dist(&e.s, &e.y.mean());
    let inclusion_residual = linalg::norm(&linalg::sub(&e.y.sum(), &e.x.sum()));
    Ok(SolutionMappingReport {
        fixed_point_residual,
        spread,
        mapping_gap,
        inclusion_residual,
        solution: e.s,
    })
}

/// Whether the lifting dimension can support a frugal resolvent splitting
/// for every tuple of `n` maximally monotone operators: `d ≥ n − 1` for
/// `n ≥ 2`, `d ≥ 1` for `n = 1`.
pub fn validate_lifting(s: &SchemeMatrices) -> bool {
    lifting_ok(s.n(), s.d())
}

pub fn lifting_ok(n: usize, d: usize) -> bool {
    if n >= 2 {
        d + 1 >= n
    } else {
        d >= 1
    }
}

/// Outcome of iterating `z ← T(z)`.
#[derive(Clone, Debug)]
pub struct SchemeRun {
    pub converged: bool,
    pub diverged: bool,
    pub iterations: usize,
    pub z: Blocks,
    pub residual: f64,
}

pub fn iterate_scheme<O: MonotoneOp>(
    s: &SchemeMatrices,
    ops: &[O],
    z0: Blocks,
    tol: f64,
    max_iter: usize,
) -> Result<SchemeRun> {
    let mut z = z0;
    let mut residual = f64::INFINITY;
    for k in 1..=max_iter {
        let e = eval_scheme(s, &z, ops)?;
        residual = e.t.dist(&z);
        z = e.t;
        if !residual.is_finite() || residual > DIVERGENCE_BOUND {
            return Ok(SchemeRun {
                converged: false,
                diverged: true,
                iterations: k,
                z,
                residual,
            });
        }
        if residual <= tol {
            return Ok(SchemeRun {
                converged: true,
                diverged: false,
                iterations: k,
                z,
                residual,
            });
        }
    }
    Ok(SchemeRun {
        converged: false,
        diverged: false,
        iterations: max_iter,
        z,
        residual,
    })
}

/// Worst normalised slack of the averagedness inequality with parameter
/// `gamma` for `T` over random Gaussian pairs.
pub fn scheme_averagedness<O: MonotoneOp>(
    s: &SchemeMatrices,
    ops: &[O],
    dim: usize,
    gamma: f64,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::param(format!("gamma = {gamma} must be positive")));
    }
    let d = s.d();
    let mut rng = Rng::new(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials {
        let z = Blocks::from_flat(dim, rng.normal_vec(d * dim))?;
        let zb = Blocks::from_flat(dim, rng.normal_vec(d * dim))?;
        let tz = eval_scheme(s, &z, ops)?.t;
        let tzb = eval_scheme(s, &zb, ops)?.t;
        worst = worst.max(averagedness_slack(&z, &zb, &tz, &tzb, gamma));
    }
    Ok(worst)
}

/// `max_k ‖T^k z‖ / ‖z‖` over `iters` steps from a random `z`, with all
/// operators zero. `T` is then linear with `0` as a fixed point, so any ratio
/// above 1 refutes nonexpansiveness.
pub fn zero_operator_growth(s: &SchemeMatrices, dim: usize, iters: usize, seed: u64) -> Result<f64> {
    let ops = vec![Zero; s.n()];
    let mut rng = Rng::new(seed);
    let mut z = Blocks::from_flat(dim, rng.normal_vec(s.d() * dim))?;
    let n0 = z.norm();
    let mut worst = 1.0_f64;
    for _ in 0..iters {
        z = eval_scheme(s, &z, &ops)?.t;
        worst = worst.max(z.norm() / n0);
    }
    Ok(worst)
}
