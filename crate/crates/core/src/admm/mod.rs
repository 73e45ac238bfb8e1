//! Multi-block ADMM for `min Σ f_i(w_i)  s.t.  Σ A_i w_i = b`.
//!
//! Two iterations are provided. The averaged form carries `n−1` lifted dual
//! blocks `z`. The augmented-Lagrangian form carries `n` multipliers `μ`.
//! Under the change of variables in [`mu_from_z`] / [`z_from_mu`] they
//! produce the same primal sequence. Each block only needs the subproblem
//! solver `v ↦ argmin_w f_i(w) + ½‖A_i w + v‖²`.

mod asalm;
mod blocks;
mod maps;
mod pdhg;

pub use asalm::{
    asalm_step, masked_primal_residual, relative_change, rpca_problem, run_asalm, run_rpca_admm, RpcaRun,
    RpcaState,
};
pub use blocks::{BlockSolver, PointBlock, ProxBlock, QuadraticBlock};
pub use maps::{CycleLaplacian, Identity, LinearMap};
pub use pdhg::{
    check_pdhg_steps, pdhg_residual, pdhg_solve, pdhg_step, reference_step_pairs, PdhgReport,
    PDHG_PRODUCT_SLACK,
};

use crate::error::{Error, Result};
use crate::linalg::{self, Blocks};
use crate::operators::MonotoneOp;
use crate::splitting::DIVERGENCE_BOUND;
use crate::trace::ResidualTrace;

/// `min Σ f_i(w_i)` subject to `Σ A_i w_i = b`.
pub struct SepProblem {
    blocks: Vec<Box<dyn BlockSolver>>,
    b: Vec<f64>,
}

impl SepProblem {
    pub fn new(blocks: Vec<Box<dyn BlockSolver>>, b: Vec<f64>) -> Result<Self> {
        if blocks.len() < 2 {
            return Err(Error::param(format!(
                "need at least 2 blocks, got {}",
                blocks.len()
            )));
        }
        for (i, blk) in blocks.iter().enumerate() {
            let out = blk.map().out_dim();
            if out != b.len() {
                return Err(Error::shape(format!(
                    "block {} maps into R^{out} but b has length {}",
                    i + 1,
                    b.len()
                )));
            }
            if !blk.coercive() && !blk.injective() {
                return Err(Error::param(format!(
                    "block {}: f is not coercive and A^T A is not invertible",
                    i + 1
                )));
            }
        }
        Ok(SepProblem { blocks, b })
    }

    pub fn n(&self) -> usize {
        self.blocks.len()
    }

    /// Dimension of the constraint space.
    pub fn m(&self) -> usize {
        self.b.len()
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn block(&self, i: usize) -> &dyn BlockSolver {
        self.blocks[i].as_ref()
    }

    pub fn zero_primal(&self) -> Vec<Vec<f64>> {
        self.blocks.iter().map(|b| vec![0.0; b.map().in_dim()]).collect()
    }

    fn solve(&self, i: usize, v: &[f64]) -> Result<Vec<f64>> {
        self.blocks[i].solve(v).map_err(|e| Error::Subproblem {
            block: i + 1,
            source: Box::new(e),
        })
    }

    fn images(&self, w: &[Vec<f64>]) -> Vec<Vec<f64>> {
        w.iter()
            .zip(&self.blocks)
            .map(|(wi, blk)| blk.map().apply(wi))
            .collect()
    }

    /// `Σ A_i w_i − b`.
    pub fn constraint_gap(&self, w: &[Vec<f64>]) -> Vec<f64> {
        let mut r = linalg::scale(&self.b, -1.0);
        for aw in self.images(w) {
            linalg::axpy(1.0, &aw, &mut r);
        }
        r
    }

    pub fn primal_residual(&self, w: &[Vec<f64>]) -> f64 {
        linalg::norm(&self.constraint_gap(w))
    }

    fn check_primal(&self, w: &[Vec<f64>]) -> Result<()> {
        if w.len() != self.n() {
            return Err(Error::shape(format!(
                "{} primal blocks for {} blocks",
                w.len(),
                self.n()
            )));
        }
        for (i, (wi, blk)) in w.iter().zip(&self.blocks).enumerate() {
            if wi.len() != blk.map().in_dim() {
                return Err(Error::shape(format!("primal block {} has wrong length", i + 1)));
            }
        }
        Ok(())
    }

    fn check_lifted(&self, z: &Blocks, count: usize) -> Result<()> {
        if z.count() != count || z.dim() != self.m() {
            return Err(Error::shape(format!(
                "expected {count} blocks of length {}, got {} of length {}",
                self.m(),
                z.count(),
                z.dim()
            )));
        }
        Ok(())
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::param(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    Ok(())
}

/// Primal blocks of one sweep and their images `A_i w_i`.
struct Sweep {
    w: Vec<Vec<f64>>,
    aw: Vec<Vec<f64>>,
}

/// Block minimisations of the averaged form, driven by `z`.
fn avg_sweep(p: &SepProblem, z: &Blocks) -> Result<Sweep> {
    let n = p.n();
    let mut w = Vec::with_capacity(n);
    let mut aw: Vec<Vec<f64>> = Vec::with_capacity(n);

    let w1 = p.solve(0, z.block(0))?;
    aw.push(p.block(0).map().apply(&w1));
    w.push(w1);
    let mut prefix = aw[0].clone();
    for i in 1..n - 1 {
        let v = linalg::add(&prefix, z.block(i));
        let wi = p.solve(i, &v)?;
        let awi = p.block(i).map().apply(&wi);
        linalg::axpy(1.0, &awi, &mut prefix);
        w.push(wi);
        aw.push(awi);
    }
    let v = last_offset(&prefix, &aw[0], p.b(), z.block(0));
    let wn = p.solve(n - 1, &v)?;
    aw.push(p.block(n - 1).map().apply(&wn));
    w.push(wn);
    Ok(Sweep { w, aw })
}

/// `(Σ_{j<n} A_j w_j + A_1 w_1) − b + z_1`.
fn last_offset(prefix: &[f64], aw1: &[f64], b: &[f64], z1: &[f64]) -> Vec<f64> {
    prefix
        .iter()
        .zip(aw1)
        .zip(b)
        .zip(z1)
        .map(|(((p, a), b), z)| (p + a) - b + z)
        .collect()
}

/// Reconstructed duals `x_i = z_i + Σ_{j≤i} A_j w_j` for `i < n`, and the
/// last block's `x_n = (offset of block n) + A_n w_n`.
pub fn reconstruct_duals(p: &SepProblem, z: &Blocks, aw: &[Vec<f64>]) -> Blocks {
    let n = p.n();
    let mut out = Blocks::zeros(n, p.m());
    let mut prefix = vec![0.0; p.m()];
    for i in 0..n - 1 {
        linalg::axpy(1.0, &aw[i], &mut prefix);
        let xi = linalg::add(z.block(i), &prefix);
        out.block_mut(i).copy_from_slice(&xi);
    }
    let v = last_offset(&prefix, &aw[0], p.b(), z.block(0));
    let xn = linalg::add(&v, &aw[n - 1]);
    out.block_mut(n - 1).copy_from_slice(&xn);
    out
}

fn avg_update(p: &SepProblem, z: &Blocks, aw: &[Vec<f64>], gamma: f64) -> Blocks {
    let n = p.n();
    let mut next = z.clone();
    for i in 0..n - 2 {
        let zi = z.block(i);
        let znext = z.block(i + 1);
        let out = next.block_mut(i);
        for t in 0..zi.len() {
            out[t] = zi[t] + gamma * (znext[t] - zi[t]) + gamma * aw[i + 1][t];
        }
    }
    let (z1, zl) = (z.block(0), z.block(n - 2));
    let out = next.block_mut(n - 2);
    for t in 0..zl.len() {
        out[t] = zl[t] + gamma * (z1[t] - zl[t]) + gamma * (aw[0][t] + aw[n - 1][t] - p.b[t]);
    }
    next
}

/// One iteration of the averaged form. Returns `(z_next, w)`, where `w` is
/// the primal sweep driven by `z`.
pub fn admm_avg_step(p: &SepProblem, z: &Blocks, gamma: f64) -> Result<(Blocks, Vec<Vec<f64>>)> {
    check_gamma(gamma)?;
    p.check_lifted(z, p.n() - 1)?;
    let sweep = avg_sweep(p, z)?;
    Ok((avg_update(p, z, &sweep.aw, gamma), sweep.w))
}

/// One iteration of the augmented-Lagrangian form. `mu` has `n` blocks and
/// `w_prev` is the previous primal sweep. Returns `(mu_next, w_next)`.
///
/// The last multiplier is refreshed by `A_1(w_1^{k+1} − w_1^k)` once the
/// first block has moved; without it the two forms drift apart.
pub fn admm_auglag_step(
    p: &SepProblem,
    mu: &Blocks,
    w_prev: &[Vec<f64>],
    gamma: f64,
) -> Result<(Blocks, Vec<Vec<f64>>)> {
    check_gamma(gamma)?;
    p.check_lifted(mu, p.n())?;
    p.check_primal(w_prev)?;
    let (n, m) = (p.n(), p.m());
    let aw_prev = p.images(w_prev);

    // suffix[i] = Σ_{j>i} A_j w_j^k
    let mut suffix = vec![vec![0.0; m]; n];
    for i in (0..n - 1).rev() {
        suffix[i] = linalg::add(&suffix[i + 1], &aw_prev[i + 1]);
    }

    let mut w = Vec::with_capacity(n);
    let mut aw: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut prefix = vec![0.0; m];
    for i in 0..n - 1 {
        let v: Vec<f64> = (0..m)
            .map(|t| prefix[t] + suffix[i][t] - p.b[t] + mu.block(i)[t])
            .collect();
        let wi = p.solve(i, &v)?;
        let awi = p.block(i).map().apply(&wi);
        linalg::axpy(1.0, &awi, &mut prefix);
        w.push(wi);
        aw.push(awi);
    }
    let mu_last: Vec<f64> = (0..m)
        .map(|t| mu.block(n - 1)[t] + (aw[0][t] - aw_prev[0][t]))
        .collect();
    let v: Vec<f64> = (0..m).map(|t| prefix[t] - p.b[t] + mu_last[t]).collect();
    let wn = p.solve(n - 1, &v)?;
    aw.push(p.block(n - 1).map().apply(&wn));
    w.push(wn);

    let mu_at = |i: usize| -> &[f64] {
        if i == n - 1 {
            &mu_last
        } else {
            mu.block(i)
        }
    };
    let mut next = Blocks::zeros(n, m);
    for i in 0..n - 1 {
        let mut tail = vec![0.0; m];
        for j in i + 2..n {
            for t in 0..m {
                tail[t] += aw_prev[j][t] - aw[j][t];
            }
        }
        let (mi, mn) = (mu.block(i), mu_at(i + 1));
        let out = next.block_mut(i);
        for t in 0..m {
            out[t] = mn[t] + tail[t] + (1.0 - gamma) * (mi[t] - mn[t] + aw_prev[i + 1][t] - aw[i + 1][t]);
        }
    }
    let mut gap = linalg::scale(&p.b, -1.0);
    for a in &aw {
        linalg::axpy(1.0, a, &mut gap);
    }
    let last = linalg::add(next.block(0), &gap);
    next.block_mut(n - 1).copy_from_slice(&last);
    Ok((next, w))
}

/// Multipliers matching the averaged state `z` when the previous sweep was
/// `w_prev`: `μ_i = z_i − (Σ_{j>i} A_j w_j − b)` and `μ_n = z_1 + A_1 w_1`.
pub fn mu_from_z(p: &SepProblem, z: &Blocks, w_prev: &[Vec<f64>]) -> Result<Blocks> {
    p.check_lifted(z, p.n() - 1)?;
    p.check_primal(w_prev)?;
    let (n, m) = (p.n(), p.m());
    let aw = p.images(w_prev);
    let mut mu = Blocks::zeros(n, m);
    let mut suffix = vec![0.0; m];
    for i in (0..n - 1).rev() {
        linalg::axpy(1.0, &aw[i + 1], &mut suffix);
        let out = mu.block_mut(i);
        for t in 0..m {
            out[t] = z.block(i)[t] - (suffix[t] - p.b[t]);
        }
    }
    let last = linalg::add(z.block(0), &aw[0]);
    mu.block_mut(n - 1).copy_from_slice(&last);
    Ok(mu)
}

/// Inverse of [`mu_from_z`] on its first `n−1` blocks.
pub fn z_from_mu(p: &SepProblem, mu: &Blocks, w_prev: &[Vec<f64>]) -> Result<Blocks> {
    p.check_lifted(mu, p.n())?;
    p.check_primal(w_prev)?;
    let (n, m) = (p.n(), p.m());
    let aw = p.images(w_prev);
    let mut z = Blocks::zeros(n - 1, m);
    let mut suffix = vec![0.0; m];
    for i in (0..n - 1).rev() {
        linalg::axpy(1.0, &aw[i + 1], &mut suffix);
        let out = z.block_mut(i);
        for t in 0..m {
            out[t] = mu.block(i)[t] + (suffix[t] - p.b[t]);
        }
    }
    Ok(z)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdmmForm {
    Averaged,
    AugLag,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KktResidual {
    pub primal: f64,
    pub dual_spread: f64,
    pub subgradient: Vec<f64>,
}

impl KktResidual {
    pub fn max(&self) -> f64 {
        self.subgradient
            .iter()
            .copied()
            .fold(self.primal.max(self.dual_spread), f64::max)
    }
}

/// KKT residuals of the pair `(w, x)` where `duals` holds one estimate of `x`
/// per block. Block `i` is optimal for `x_i` exactly when `w_i` re-minimises
/// its subproblem with offset `x_i − A_i w_i`.
pub fn kkt_residual(p: &SepProblem, w: &[Vec<f64>], duals: &Blocks) -> Result<KktResidual> {
    p.check_primal(w)?;
    p.check_lifted(duals, p.n())?;
    let aw = p.images(w);
    let mut subgradient = Vec::with_capacity(p.n());
    for i in 0..p.n() {
        let v = linalg::sub(duals.block(i), &aw[i]);
        let wi = p.solve(i, &v)?;
        subgradient.push(linalg::dist(&wi, &w[i]));
    }
    Ok(KktResidual {
        primal: p.primal_residual(w),
        dual_spread: duals.spread(),
        subgradient,
    })
}

pub struct AdmmReport {
    pub converged: bool,
    pub diverged: bool,
    pub iterations: usize,
    pub w: Vec<Vec<f64>>,
    /// Averaged-form state after the last step, whichever form was run.
    pub z: Blocks,
    /// Mean of the reconstructed duals of the last sweep.
    pub dual: Vec<f64>,
    pub kkt: KktResidual,
    /// Largest `‖w^k‖` seen.
    pub max_w_norm: f64,
    /// Columns `primal_residual, relative_change, dual_spread`.
    pub trace: ResidualTrace,
}

fn flat_norm(w: &[Vec<f64>]) -> f64 {
    w.iter().map(|b| linalg::norm_sq(b)).sum::<f64>().sqrt()
}

fn flat_dist(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| linalg::norm_sq(&linalg::sub(x, y)))
        .sum::<f64>()
        .sqrt()
}

/// Runs either form from the averaged-form start `z0` (zeros when `None`).
/// Stops once the primal residual and the spread of reconstructed duals are
/// both `≤ tol`.
pub fn admm_solve(
    p: &SepProblem,
    form: AdmmForm,
    gamma: f64,
    z0: Option<Blocks>,
    tol: f64,
    max_iter: usize,
) -> Result<AdmmReport> {
    check_gamma(gamma)?;
    let z0 = z0.unwrap_or_else(|| Blocks::zeros(p.n() - 1, p.m()));
    p.check_lifted(&z0, p.n() - 1)?;

    let mut trace = ResidualTrace::new(&["primal_residual", "relative_change", "dual_spread"]);
    let mut w_prev = p.zero_primal();
    let mut z = z0;
    let mut mu = match form {
        AdmmForm::Averaged => None,
        AdmmForm::AugLag => Some(mu_from_z(p, &z, &w_prev)?),
    };
    let mut duals = Blocks::zeros(p.n(), p.m());
    let (mut converged, mut diverged, mut iterations) = (false, false, 0);
    let mut max_w_norm = 0.0_f64;

    for k in 0..max_iter {
        let w = match mu.as_mut() {
            None => {
                let sweep = avg_sweep(p, &z)?;
                duals = reconstruct_duals(p, &z, &sweep.aw);
                z = avg_update(p, &z, &sweep.aw, gamma);
                sweep.w
            }
            Some(mu) => {
                let z_used = z_from_mu(p, mu, &w_prev)?;
                let (mu_next, w) = admm_auglag_step(p, mu, &w_prev, gamma)?;
                duals = reconstruct_duals(p, &z_used, &p.images(&w));
                z = z_from_mu(p, &mu_next, &w)?;
                *mu = mu_next;
                w
            }
        };
        iterations = k + 1;
        let primal = p.primal_residual(&w);
        let change = flat_dist(&w, &w_prev) / (flat_norm(&w_prev) + 1.0);
        let spread = duals.spread();
        trace.record(iterations, &[primal, change, spread]);
        let wn = flat_norm(&w);
        max_w_norm = max_w_norm.max(wn);
        w_prev = w;
        if !wn.is_finite() || wn > DIVERGENCE_BOUND || !z.as_slice().iter().all(|v| v.is_finite()) {
            diverged = true;
            break;
        }
        if primal <= tol && spread <= tol {
            converged = true;
            break;
        }
    }

    let kkt = if diverged {
        KktResidual {
            primal: f64::INFINITY,
            dual_spread: f64::INFINITY,
            subgradient: vec![f64::INFINITY; p.n()],
        }
    } else {
        kkt_residual(p, &w_prev, &duals)?
    };
    Ok(AdmmReport {
        converged,
        diverged,
        iterations,
        dual: duals.mean(),
        w: w_prev,
        z,
        kkt,
        max_w_norm,
        trace,
    })
}

/// The dual operator of block `i`. Its resolvent (step 1 only) is
/// `u ↦ u + A_i ŵ` with `ŵ = argmin f_i + ½‖A_i w + u‖²`; the last block
/// also carries the constraint, `u ↦ u + A_n ŵ − b` with
/// `ŵ = argmin f_n + ½‖A_n w − b + u‖²`.
pub struct DualOp<'a> {
    p: &'a SepProblem,
    i: usize,
}

pub fn dual_ops(p: &SepProblem) -> Vec<DualOp<'_>> {
    (0..p.n()).map(|i| DualOp { p, i }).collect()
}

impl MonotoneOp for DualOp<'_> {
    /// Subproblem failures show up as NaN output.
    fn resolvent_into(&self, u: &[f64], step: f64, out: &mut [f64]) {
        assert!(step == 1.0, "dual operators support unit steps only");
        let last = self.i + 1 == self.p.n();
        match prox_compose(
            self.p.block(self.i),
            if last { Some(self.p.b()) } else { None },
            u,
        ) {
            Ok(x) => out.copy_from_slice(&x),
            Err(_) => out.fill(f64::NAN),
        }
    }

    fn kind(&self) -> &'static str {
        "admm-dual"
    }
}

/// Primal blocks behind the resolvent inputs `y` of the dual operators.
pub fn primal_from_dual_inputs(p: &SepProblem, y: &Blocks) -> Result<Vec<Vec<f64>>> {
    p.check_lifted(y, p.n())?;
    let n = p.n();
    (0..n)
        .map(|i| {
            if i + 1 == n {
                p.solve(i, &linalg::sub(y.block(i), p.b()))
            } else {
                p.solve(i, y.block(i))
            }
        })
        .collect()
}

/// Prox at `u` of `h(x) = h₁*(−Aᵀx) + ⟨b, x⟩` (`b = 0` when `None`), via
/// `u + A ŵ − b` with `ŵ` the block's subproblem solution at offset `u − b`.
pub fn prox_compose(block: &dyn BlockSolver, b: Option<&[f64]>, u: &[f64]) -> Result<Vec<f64>> {
    let map = block.map();
    if u.len() != map.out_dim() || b.is_some_and(|b| b.len() != u.len()) {
        return Err(Error::shape("prox_compose offset has wrong length"));
    }
    let shifted = match b {
        Some(b) => linalg::sub(u, b),
        None => u.to_vec(),
    };
    let w = block.solve(&shifted)?;
    let aw = map.apply(&w);
    Ok(linalg::add(&shifted, &aw))
}

/// Worst violation of the prox inequality `⟨u − p, q − p⟩ ≤ h(q) − h(p)` over
/// `competitors`; nonpositive exactly when `p` passes as `prox_h(u)` on them.
pub fn prox_inequality_slack(
    h: impl Fn(&[f64]) -> f64,
    u: &[f64],
    p: &[f64],
    competitors: &[Vec<f64>],
) -> f64 {
    let hp = h(p);
    let g = linalg::sub(u, p);
    competitors
        .iter()
        .map(|q| linalg::dot(&g, &linalg::sub(q, p)) - (h(q) - hp))
        .fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests;
