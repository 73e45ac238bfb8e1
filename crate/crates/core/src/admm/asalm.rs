//! Robust PCA with partial observations,
//! `min ‖L‖_* + λ‖S‖₁ + ι_C(D)  s.t.  L + S + D = M`, where
//! `C = {D : ‖P_Ω(D)‖_F ≤ δ}`: the ASALM baseline and the multi-block ADMM
//! runners used to compare against it.

use super::blocks::ProxBlock;
use super::{admm_auglag_step, admm_avg_step, mu_from_z, AdmmForm, SepProblem};
use crate::error::{Error, Result};
use crate::linalg::{Blocks, Mat};
use crate::operators::{project_partial_ball, prox_l1, prox_nuclear, Mask, PartialMatrix};
use crate::trace::ResidualTrace;

#[derive(Clone, Debug, PartialEq)]
pub struct RpcaState {
    pub l: Mat,
    pub s: Mat,
    pub d: Mat,
    /// ASALM's single multiplier.
    pub mu: Mat,
}

impl RpcaState {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let z = Mat::zeros(rows, cols);
        RpcaState {
            l: z.clone(),
            s: z.clone(),
            d: z.clone(),
            mu: z,
        }
    }
}

fn check_params(lambda: f64, delta: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) || !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::param(format!(
            "lambda and delta must be positive, got {lambda} and {delta}"
        )));
    }
    Ok(())
}

/// One ASALM sweep over `D`, `S`, `L`, then `μ ← μ + (L + S + D − M)`.
pub fn asalm_step(state: &RpcaState, lambda: f64, delta: f64, m: &PartialMatrix) -> Result<RpcaState> {
    check_params(lambda, delta)?;
    let shape = m.shape();
    for x in [&state.l, &state.s, &state.d, &state.mu] {
        if x.shape() != shape {
            return Err(Error::shape(format!("state {:?} for data {shape:?}", x.shape())));
        }
    }
    let mv = m.values();
    let base = mv.sub(&state.mu);
    let d = project_partial_ball(&base.sub(&state.l).sub(&state.s), m.mask(), delta);
    let s = prox_l1(&base.sub(&state.l).sub(&d), lambda);
    let l = prox_nuclear(&base.sub(&s).sub(&d), 1.0)?;
    let mu = state.mu.add(&l.add(&s).add(&d).sub(mv));
    Ok(RpcaState { l, s, d, mu })
}

/// `‖(L⁺, S⁺) − (L, S)‖ / (‖(L, S)‖ + 1)`.
pub fn relative_change(l: &Mat, s: &Mat, l_next: &Mat, s_next: &Mat) -> f64 {
    let num = (l_next.sub(l).frobenius_norm().powi(2) + s_next.sub(s).frobenius_norm().powi(2)).sqrt();
    let den = (l.frobenius_norm().powi(2) + s.frobenius_norm().powi(2)).sqrt() + 1.0;
    num / den
}

/// `‖P_Ω(L + S + D − M)‖_F`.
pub fn masked_primal_residual(l: &Mat, s: &Mat, d: &Mat, m: &PartialMatrix) -> f64 {
    m.mask().masked_norm(&l.add(s).add(d).sub(m.values()))
}

/// The problem as three ADMM blocks `(D, S, L)`, each with `A = I` and
/// `b = M` flattened row-major.
pub fn rpca_problem(m: &PartialMatrix, lambda: f64, delta: f64) -> Result<SepProblem> {
    check_params(lambda, delta)?;
    let (rows, cols) = m.shape();
    let size = rows * cols;
    let mask: Mask = m.mask().clone();
    let reshape = move |y: &[f64]| Mat::new(rows, cols, y.to_vec());
    let d_block = ProxBlock::new(size, false, move |y| {
        Ok(project_partial_ball(&reshape(y)?, &mask, delta).into_vec())
    });
    let s_block = ProxBlock::new(size, true, move |y| Ok(prox_l1(&reshape(y)?, lambda).into_vec()));
    let l_block = ProxBlock::new(size, true, move |y| {
        Ok(prox_nuclear(&reshape(y)?, 1.0)?.into_vec())
    });
    SepProblem::new(
        vec![Box::new(d_block), Box::new(s_block), Box::new(l_block)],
        m.values().as_slice().to_vec(),
    )
}

pub struct RpcaRun {
    pub l: Mat,
    pub s: Mat,
    pub d: Mat,
    pub iterations: usize,
    /// Columns `relative_change, primal_residual`.
    pub trace: ResidualTrace,
}

fn rpca_trace() -> ResidualTrace {
    ResidualTrace::new(&["relative_change", "primal_residual"])
}

/// ASALM from zero matrices for a fixed number of iterations.
pub fn run_asalm(m: &PartialMatrix, lambda: f64, delta: f64, iters: usize) -> Result<RpcaRun> {
    let (rows, cols) = m.shape();
    let mut state = RpcaState::zeros(rows, cols);
    let mut trace = rpca_trace();
    for k in 1..=iters {
        let next = asalm_step(&state, lambda, delta, m)?;
        let change = relative_change(&state.l, &state.s, &next.l, &next.s);
        let primal = masked_primal_residual(&next.l, &next.s, &next.d, m);
        trace.record(k, &[change, primal]);
        state = next;
    }
    Ok(RpcaRun {
        l: state.l,
        s: state.s,
        d: state.d,
        iterations: iters,
        trace,
    })
}

/// Multi-block ADMM from zero matrices for a fixed number of iterations.
pub fn run_rpca_admm(
    m: &PartialMatrix,
    lambda: f64,
    delta: f64,
    gamma: f64,
    iters: usize,
    form: AdmmForm,
) -> Result<RpcaRun> {
    let p = rpca_problem(m, lambda, delta)?;
    let (rows, cols) = m.shape();
    let as_mat = |v: &[f64]| Mat::new(rows, cols, v.to_vec());
    let mut w = p.zero_primal();
    let mut z = Blocks::zeros(2, p.m());
    let mut mu = match form {
        AdmmForm::Averaged => None,
        AdmmForm::AugLag => Some(mu_from_z(&p, &z, &w)?),
    };
    let mut trace = rpca_trace();
    for k in 1..=iters {
        let w_next = match mu.as_mut() {
            None => {
                let (z_next, w_next) = admm_avg_step(&p, &z, gamma)?;
                z = z_next;
                w_next
            }
            Some(mu) => {
                let (mu_next, w_next) = admm_auglag_step(&p, mu, &w, gamma)?;
                *mu = mu_next;
                w_next
            }
        };
        let (l0, s0) = (as_mat(&w[2])?, as_mat(&w[1])?);
        let (d1, s1, l1) = (as_mat(&w_next[0])?, as_mat(&w_next[1])?, as_mat(&w_next[2])?);
        let change = relative_change(&l0, &s0, &l1, &s1);
        let primal = masked_primal_residual(&l1, &s1, &d1, m);
        trace.record(k, &[change, primal]);
        w = w_next;
    }
    Ok(RpcaRun {
        d: as_mat(&w[0])?,
        s: as_mat(&w[1])?,
        l: as_mat(&w[2])?,
        iterations: iters,
        trace,
    })
}
