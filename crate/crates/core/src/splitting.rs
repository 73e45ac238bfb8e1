//! Fixed-point iterations built from resolvents: the minimal-lifting scheme
//! on `H^{n-1}`, Douglas–Rachford, Ryu's three-operator scheme and its
//! four-operator extension, and Douglas–Rachford on the product space.
//!
//! Resolvents are always evaluated with step 1. Block arithmetic goes through
//! [`chain_input`], [`last_input`] and [`relax`] so that the distributed
//! simulator in `network` reproduces these iterates bit for bit.

use crate::error::{Error, Result};
use crate::linalg::{self, Blocks};
use crate::operators::MonotoneOp;
use crate::problems::Rng;
use crate::trace::ResidualTrace;

pub const DEFAULT_GAMMA: f64 = 0.9;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 100_000;
/// Residuals above this abort a run as diverged.
pub const DIVERGENCE_BOUND: f64 = 1e12;

/// `out = (z_i − z_{i−1}) + x_{i−1}`
#[inline]
pub fn chain_input(z_i: &[f64], z_prev: &[f64], x_prev: &[f64], out: &mut [f64]) {
    for (((o, a), b), x) in out.iter_mut().zip(z_i).zip(z_prev).zip(x_prev) {
        *o = (a - b) + x;
    }
}

/// `out = (x_1 + x_{n−1}) − z_{n−1}`
#[inline]
pub fn last_input(x_first: &[f64], x_prev: &[f64], z_last: &[f64], out: &mut [f64]) {
    for (((o, a), b), z) in out.iter_mut().zip(x_first).zip(x_prev).zip(z_last) {
        *o = (a + b) - z;
    }
}

/// `out = z_i + γ (x_{i+1} − x_i)`
#[inline]
pub fn relax(z_i: &[f64], x_next: &[f64], x_i: &[f64], gamma: f64, out: &mut [f64]) {
    for (((o, z), a), b) in out.iter_mut().zip(z_i).zip(x_next).zip(x_i) {
        *o = z + gamma * (a - b);
    }
}

/// Lifted iterate together with the resolvent outputs that produced it.
#[derive(Clone, Debug)]
pub struct SplitState {
    pub z: Blocks,
    pub x: Blocks,
    pub k: usize,
    /// `(1/γ)‖z^{k+1} − z^k‖` of the last step; infinite before the first.
    pub residual: f64,
}

impl SplitState {
    pub fn new(z: Blocks, n_ops: usize) -> Self {
        let dim = z.dim();
        SplitState {
            z,
            x: Blocks::zeros(n_ops, dim),
            k: 0,
            residual: f64::INFINITY,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub converged: bool,
    pub diverged: bool,
    pub iterations: usize,
    /// The solution estimate (`x_1` for the lifted schemes).
    pub final_x: Vec<f64>,
    pub final_z: Blocks,
    pub x: Blocks,
    pub residual: f64,
    /// `max_{i,j} ‖x_i − x_j‖` at exit.
    pub consensus_spread: f64,
    /// Columns `residual`, `consensus_spread`.
    pub trace: ResidualTrace,
}

fn check_gamma(gamma: f64, lo_open: f64, hi: f64, hi_closed: bool) -> Result<()> {
    let ok = gamma > lo_open && (gamma < hi || (hi_closed && gamma == hi));
    if ok {
        Ok(())
    } else {
        let close = if hi_closed { ']' } else { ')' };
        Err(Error::param(format!(
            "gamma = {gamma} outside ({lo_open}, {hi}{close}"
        )))
    }
}

fn check_blocks(z: &Blocks, want: usize, what: &str) -> Result<()> {
    if z.count() != want || z.dim() == 0 {
        return Err(Error::shape(format!(
            "{what} expects {want} blocks, got {}",
            z.count()
        )));
    }
    Ok(())
}

/// One step of the minimal-lifting iteration, writing into preallocated
/// buffers. `y` is scratch of length `dim`.
pub fn mt_step_into<O: MonotoneOp>(
    z: &Blocks,
    ops: &[O],
    gamma: f64,
    x: &mut Blocks,
    z_next: &mut Blocks,
    y: &mut [f64],
) {
    let n = ops.len();
    ops[0].resolvent_into(z.block(0), 1.0, x.block_mut(0));
    for i in 1..n - 1 {
        chain_input(z.block(i), z.block(i - 1), x.block(i - 1), y);
        ops[i].resolvent_into(y, 1.0, x.block_mut(i));
    }
    last_input(x.block(0), x.block(n - 2), z.block(n - 2), y);
    ops[n - 1].resolvent_into(y, 1.0, x.block_mut(n - 1));
    for i in 0..n - 1 {
        relax(z.block(i), x.block(i + 1), x.block(i), gamma, z_next.block_mut(i));
    }
}

fn check_mt<O>(z: &Blocks, ops: &[O], gamma: f64) -> Result<()> {
    if ops.len() < 2 {
        return Err(Error::param(format!(
            "need at least 2 operators, got {}",
            ops.len()
        )));
    }
    check_gamma(gamma, 0.0, 1.0, true)?;
    check_blocks(z, ops.len() - 1, "minimal lifting")
}

/// Returns `(z_next, x)`.
pub fn mt_step<O: MonotoneOp>(z: &Blocks, ops: &[O], gamma: f64) -> Result<(Blocks, Blocks)> {
    check_mt(z, ops, gamma)?;
    let mut x = Blocks::zeros(ops.len(), z.dim());
    let mut z_next = Blocks::zeros(z.count(), z.dim());
    let mut y = vec![0.0; z.dim()];
    mt_step_into(z, ops, gamma, &mut x, &mut z_next, &mut y);
    Ok((z_next, x))
}

/// The resolvent inputs `y_i` that produced `x` from `z`.
pub fn mt_inputs(z: &Blocks, x: &Blocks) -> Blocks {
    let n = x.count();
    let mut y = Blocks::zeros(n, x.dim());
    y.block_mut(0).copy_from_slice(z.block(0));
    for i in 1..n - 1 {
        chain_input(z.block(i), z.block(i - 1), x.block(i - 1), y.block_mut(i));
    }
    last_input(x.block(0), x.block(n - 2), z.block(n - 2), y.block_mut(n - 1));
    y
}

/// `‖Σ_i (y_i − x_i)‖`: each `y_i − x_i` lies in `A_i x_i`, so this measures
/// how far the common point is from a zero of the sum.
pub fn inclusion_residual(y: &Blocks, x: &Blocks) -> f64 {
    linalg::norm(&linalg::sub(&y.sum(), &x.sum()))
}

/// `(z, x, z_next)`: writes the resolvent outputs and the next iterate.
type StepFn<'a> = Box<dyn FnMut(&Blocks, &mut Blocks, &mut Blocks) + 'a>;

struct Stepper<'a> {
    residual_scale: f64,
    step: StepFn<'a>,
    solution: fn(&Blocks, &Blocks) -> Vec<f64>,
    require_consensus: bool,
}

fn run(mut s: Stepper<'_>, z0: Blocks, n_x: usize, tol: f64, max_iter: usize) -> Result<SolveReport> {
    if !(tol > 0.0) {
        return Err(Error::param(format!("tol = {tol} must be positive")));
    }
    let dim = z0.dim();
    let mut z = z0;
    let mut z_next = z.clone();
    let mut x = Blocks::zeros(n_x, dim);
    let mut trace = ResidualTrace::new(&["residual", "consensus_spread"]);
    let mut residual = f64::INFINITY;
    let mut spread = f64::INFINITY;
    let mut converged = false;
    let mut diverged = false;
    let mut k = 0;
    while k < max_iter {
        (s.step)(&z, &mut x, &mut z_next);
        k += 1;
        residual = z_next.dist(&z) * s.residual_scale;
        spread = x.spread();
        trace.record(k, &[residual, spread]);
        std::mem::swap(&mut z, &mut z_next);
        if !residual.is_finite() || residual > DIVERGENCE_BOUND {
            diverged = true;
            break;
        }
        if residual <= tol && (!s.require_consensus || spread <= tol) {
            converged = true;
            break;
        }
    }
    Ok(SolveReport {
        converged,
        diverged,
        iterations: k,
        final_x: (s.solution)(&z, &x),
        final_z: z,
        x,
        residual,
        consensus_spread: spread,
        trace,
    })
}

fn first_x(_z: &Blocks, x: &Blocks) -> Vec<f64> {
    x.block(0).to_vec()
}

/// Iterates [`mt_step`] from `z0` until `(1/γ)‖z^{k+1} − z^k‖ ≤ tol`.
pub fn mt_solve<O: MonotoneOp>(
    ops: &[O],
    gamma: f64,
    z0: Blocks,
    tol: f64,
    max_iter: usize,
) -> Result<SolveReport> {
    check_mt(&z0, ops, gamma)?;
    check_gamma(gamma, 0.0, 1.0, false)?;
    let mut y = vec![0.0; z0.dim()];
    let stepper = Stepper {
        residual_scale: 1.0 / gamma,
        step: Box::new(move |z, x, zn| mt_step_into(z, ops, gamma, x, zn, &mut y)),
        solution: first_x,
        require_consensus: false,
    };
    run(stepper, z0, ops.len(), tol, max_iter)
}

/// The `γ = 1` iteration, convergent when operators `2..n` are uniformly
/// monotone. `moduli[i]` is the declared modulus of operator `i + 2`.
///
/// Zero moduli are accepted so that instances violating the hypothesis can be
/// run and observed not to converge; termination then requires both the
/// residual and the consensus spread to fall below `tol`.
pub fn pr_solve<O: MonotoneOp>(
    ops: &[O],
    z0: Blocks,
    tol: f64,
    max_iter: usize,
    moduli: &[f64],
) -> Result<SolveReport> {
    check_mt(&z0, ops, 1.0)?;
    if moduli.len() != ops.len() - 1 {
        return Err(Error::shape(format!(
            "expected {} moduli for operators 2..n, got {}",
            ops.len() - 1,
            moduli.len()
        )));
    }
    if moduli.iter().any(|b| !(*b >= 0.0)) {
        return Err(Error::param("moduli must be nonnegative"));
    }
    let mut y = vec![0.0; z0.dim()];
    let stepper = Stepper {
        residual_scale: 1.0,
        step: Box::new(move |z, x, zn| mt_step_into(z, ops, 1.0, x, zn, &mut y)),
        solution: first_x,
        require_consensus: true,
    };
    run(stepper, z0, ops.len(), tol, max_iter)
}

/// Relaxed Douglas–Rachford; returns `(z_next, x1, x2)`.
pub fn dr_step<A: MonotoneOp + ?Sized, B: MonotoneOp + ?Sized>(
    z: &[f64],
    op1: &A,
    op2: &B,
    gamma: f64,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    check_gamma(gamma, 0.0, 2.0, false)?;
    let x1 = op1.resolvent(z, 1.0);
    let r: Vec<f64> = x1.iter().zip(z).map(|(a, b)| 2.0 * a - b).collect();
    let x2 = op2.resolvent(&r, 1.0);
    let mut zn = vec![0.0; z.len()];
    relax(z, &x2, &x1, gamma, &mut zn);
    Ok((zn, x1, x2))
}

fn ryu3_into<O: MonotoneOp>(z: &Blocks, ops: &[O], gamma: f64, x: &mut Blocks, zn: &mut Blocks) {
    let (z1, z2) = (z.block(0), z.block(1));
    ops[0].resolvent_into(z1, 1.0, x.block_mut(0));
    let y2 = linalg::add(z2, x.block(0));
    ops[1].resolvent_into(&y2, 1.0, x.block_mut(1));
    let y3: Vec<f64> = (0..z.dim())
        .map(|j| (x.block(0)[j] - z1[j]) + (x.block(1)[j] - z2[j]))
        .collect();
    ops[2].resolvent_into(&y3, 1.0, x.block_mut(2));
    for i in 0..2 {
        relax(z.block(i), x.block(2), x.block(i), gamma, zn.block_mut(i));
    }
}

/// Ryu's three-operator scheme on `H^2`; returns `(z_next, x)`.
pub fn ryu3_step<O: MonotoneOp>(z: &Blocks, ops: &[O], gamma: f64) -> Result<(Blocks, Blocks)> {
    if ops.len() != 3 {
        return Err(Error::shape(format!(
            "three-operator scheme got {} operators",
            ops.len()
        )));
    }
    check_blocks(z, 2, "three-operator scheme")?;
    check_gamma(gamma, 0.0, 1.0, false)?;
    let mut x = Blocks::zeros(3, z.dim());
    let mut zn = Blocks::zeros(2, z.dim());
    ryu3_into(z, ops, gamma, &mut x, &mut zn);
    Ok((zn, x))
}

pub fn ryu3_solve<O: MonotoneOp>(
    ops: &[O],
    gamma: f64,
    z0: Blocks,
    tol: f64,
    max_iter: usize,
) -> Result<SolveReport> {
    ryu3_step(&z0, ops, gamma)?;
    let stepper = Stepper {
        residual_scale: 1.0 / gamma,
        step: Box::new(move |z, x, zn| ryu3_into(z, ops, gamma, x, zn)),
        solution: first_x,
        require_consensus: false,
    };
    run(stepper, z0, 3, tol, max_iter)
}

fn ryu4_into<O: MonotoneOp>(z: &Blocks, ops: &[O], gamma: f64, x: &mut Blocks, zn: &mut Blocks) {
    let (z1, z2, z3) = (z.block(0), z.block(1), z.block(2));
    ops[0].resolvent_into(z1, 1.0, x.block_mut(0));
    let y2 = linalg::add(z2, x.block(0));
    ops[1].resolvent_into(&y2, 1.0, x.block_mut(1));
    let y3: Vec<f64> = (0..z.dim())
        .map(|j| (z3[j] + x.block(1)[j]) - x.block(0)[j])
        .collect();
    ops[2].resolvent_into(&y3, 1.0, x.block_mut(2));
    let y4: Vec<f64> = (0..z.dim())
        .map(|j| (x.block(0)[j] - z1[j]) + (x.block(1)[j] - z2[j]) + (x.block(2)[j] - z3[j]))
        .collect();
    ops[3].resolvent_into(&y4, 1.0, x.block_mut(3));
    for i in 0..3 {
        relax(z.block(i), x.block(3), x.block(i), gamma, zn.block_mut(i));
    }
}

/// The four-operator extension of Ryu's scheme on `H^3`:
/// `x3 = J3(z3 + x2 − x1)`, `x4 = J4(x1−z1 + x2−z2 + x3−z3)`,
/// `z ← z + γ(x4 − x1, x4 − x2, x4 − x3)`. Not nonexpansive in general.
pub fn ryu4_step<O: MonotoneOp>(z: &Blocks, ops: &[O], gamma: f64) -> Result<(Blocks, Blocks)> {
    if ops.len() != 4 {
        return Err(Error::shape(format!(
            "four-operator scheme got {} operators",
            ops.len()
        )));
    }
    check_blocks(z, 3, "four-operator scheme")?;
    if !(gamma > 0.0) {
        return Err(Error::param(format!("gamma = {gamma} must be positive")));
    }
    let mut x = Blocks::zeros(4, z.dim());
    let mut zn = Blocks::zeros(3, z.dim());
    ryu4_into(z, ops, gamma, &mut x, &mut zn);
    Ok((zn, x))
}

pub fn ryu4_solve<O: MonotoneOp>(
    ops: &[O],
    gamma: f64,
    z0: Blocks,
    tol: f64,
    max_iter: usize,
) -> Result<SolveReport> {
    ryu4_step(&z0, ops, gamma)?;
    let stepper = Stepper {
        residual_scale: 1.0 / gamma,
        step: Box::new(move |z, x, zn| ryu4_into(z, ops, gamma, x, zn)),
        solution: first_x,
        require_consensus: false,
    };
    run(stepper, z0, 4, tol, max_iter)
}

fn product_dr_into<O: MonotoneOp>(z: &Blocks, ops: &[O], gamma: f64, x: &mut Blocks, zn: &mut Blocks) {
    let p = z.mean();
    let mut r = vec![0.0; z.dim()];
    for (i, op) in ops.iter().enumerate() {
        for ((o, pj), zj) in r.iter_mut().zip(&p).zip(z.block(i)) {
            *o = 2.0 * pj - zj;
        }
        op.resolvent_into(&r, 1.0, x.block_mut(i));
        relax(z.block(i), x.block(i), &p, gamma, zn.block_mut(i));
    }
}

/// Douglas–Rachford for `N_Δ + (A_1 × … × A_n)` on `H^n`; the solution is
/// the block mean of the limit.
pub fn product_dr_solve<O: MonotoneOp>(
    ops: &[O],
    gamma: f64,
    z0: Blocks,
    tol: f64,
    max_iter: usize,
) -> Result<SolveReport> {
    if ops.is_empty() {
        return Err(Error::param("need at least one operator"));
    }
    check_gamma(gamma, 0.0, 1.0, true)?;
    check_blocks(&z0, ops.len(), "product-space splitting")?;
    let stepper = Stepper {
        residual_scale: 1.0 / gamma,
        step: Box::new(move |z, x, zn| product_dr_into(z, ops, gamma, x, zn)),
        solution: |z, _| z.mean(),
        require_consensus: false,
    };
    run(stepper, z0, ops.len(), tol, max_iter)
}

/// Slack of the averagedness inequality for one pair, normalised by
/// `1 + ‖z − z̄‖²`:
/// `‖Tz−Tz̄‖² + ((1−γ)/γ)‖Δ(I−T)‖² + (1/γ)‖Σ_i Δ(I−T)_i‖² − ‖z−z̄‖²`.
pub fn averagedness_slack(z: &Blocks, zbar: &Blocks, tz: &Blocks, tzbar: &Blocks, gamma: f64) -> f64 {
    let dz = z.sub(zbar);
    let dt = tz.sub(tzbar);
    let dr = dz.sub(&dt);
    let lhs =
        dt.norm().powi(2) + (1.0 - gamma) / gamma * dr.norm().powi(2) + linalg::norm_sq(&dr.sum()) / gamma;
    let rhs = dz.norm().powi(2);
    (lhs - rhs) / (1.0 + rhs)
}

/// Worst normalised slack of the averagedness inequality for [`mt_step`]
/// over `trials` random pairs of Gaussian points. For `n = 2` the window is
/// `γ ∈ (0, 2)`, otherwise `(0, 1]`.
pub fn averagedness_check<O: MonotoneOp>(
    ops: &[O],
    dim: usize,
    gamma: f64,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if ops.len() < 2 {
        return Err(Error::param("need at least 2 operators"));
    }
    if ops.len() == 2 {
        check_gamma(gamma, 0.0, 2.0, false)?;
    } else {
        check_gamma(gamma, 0.0, 1.0, true)?;
    }
    let d = ops.len() - 1;
    let mut rng = Rng::new(seed);
    let mut worst = f64::NEG_INFINITY;
    let mut x = Blocks::zeros(ops.len(), dim);
    let mut y = vec![0.0; dim];
    let mut tz = Blocks::zeros(d, dim);
    let mut tzb = Blocks::zeros(d, dim);
    for _ in 0..trials {
        let scale = 10f64.powf(2.0 * rng.uniform() - 1.0);
        let z = Blocks::from_flat(dim, linalg::scale(&rng.normal_vec(d * dim), scale))?;
        let zb = Blocks::from_flat(dim, linalg::scale(&rng.normal_vec(d * dim), scale))?;
        mt_step_into(&z, ops, gamma, &mut x, &mut tz, &mut y);
        mt_step_into(&zb, ops, gamma, &mut x, &mut tzb, &mut y);
        worst = worst.max(averagedness_slack(&z, &zb, &tz, &tzb, gamma));
    }
    Ok(worst)
}
