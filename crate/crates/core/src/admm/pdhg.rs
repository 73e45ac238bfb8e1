//! Primal-dual hybrid gradient for decentralised ℓ1 consensus,
//! `min ‖x − c‖₁  s.t.  L x = 0` with `L` a symmetric graph Laplacian.

use super::maps::LinearMap;
use crate::error::{Error, Result};
use crate::linalg;
use crate::operators::prox_abs;
use crate::splitting::DIVERGENCE_BOUND;
use crate::trace::ResidualTrace;

/// Relative rounding allowance on `τσ‖L‖² ≤ 1`. The published step pairs
/// sit exactly on the boundary, where a product can round to `1 + ulp`.
pub const PDHG_PRODUCT_SLACK: f64 = 1e-12;

/// Accepts `τ, σ > 0` with `τσ‖L‖² ≤ 1` up to [`PDHG_PRODUCT_SLACK`].
pub fn check_pdhg_steps(tau: f64, sigma: f64, lap_norm: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite() && sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::param(format!(
            "tau and sigma must be positive, got {tau} and {sigma}"
        )));
    }
    let product = tau * sigma * lap_norm * lap_norm;
    if product > 1.0 + PDHG_PRODUCT_SLACK {
        return Err(Error::param(format!(
            "tau*sigma*|L|^2 = {product} exceeds 1 (tau={tau}, sigma={sigma}, |L|={lap_norm})"
        )));
    }
    Ok(())
}

/// `(1/‖L‖, 1/‖L‖)`, `(10/‖L‖, 1/(10‖L‖))`, `(1/(10‖L‖), 10/‖L‖)`.
pub fn reference_step_pairs(lap_norm: f64) -> [(f64, f64); 3] {
    [
        (1.0 / lap_norm, 1.0 / lap_norm),
        (10.0 / lap_norm, 1.0 / (10.0 * lap_norm)),
        (1.0 / (10.0 * lap_norm), 10.0 / lap_norm),
    ]
}

/// `x⁺ = prox_{τ‖·−c‖₁}(x − τLy)`, `y⁺ = y + σL(2x⁺ − x)`.
#[allow(clippy::too_many_arguments)]
pub fn pdhg_step<M: LinearMap + ?Sized>(
    x: &[f64],
    y: &[f64],
    tau: f64,
    sigma: f64,
    lap: &M,
    lap_norm: f64,
    c: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_pdhg_steps(tau, sigma, lap_norm)?;
    let n = c.len();
    if x.len() != n || y.len() != n || lap.in_dim() != n || lap.out_dim() != n {
        return Err(Error::shape(format!("pdhg_step expects length {n} throughout")));
    }
    let ly = lap.adjoint(y);
    let arg: Vec<f64> = x.iter().zip(&ly).map(|(x, l)| x - tau * l).collect();
    let xn = prox_abs(&arg, c, tau);
    let extrap: Vec<f64> = xn.iter().zip(x).map(|(a, b)| 2.0 * a - b).collect();
    let lx = lap.apply(&extrap);
    let yn = y.iter().zip(&lx).map(|(y, l)| y + sigma * l).collect();
    Ok((xn, yn))
}

/// `(‖Δx‖²/τ² + ‖Δy‖²/σ²)^{1/2}`.
pub fn pdhg_residual(x: &[f64], xn: &[f64], y: &[f64], yn: &[f64], tau: f64, sigma: f64) -> f64 {
    (linalg::norm_sq(&linalg::sub(xn, x)) / (tau * tau)
        + linalg::norm_sq(&linalg::sub(yn, y)) / (sigma * sigma))
        .sqrt()
}

pub struct PdhgReport {
    pub converged: bool,
    pub diverged: bool,
    pub iterations: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub residual: f64,
    /// Column `residual`.
    pub trace: ResidualTrace,
}

/// PDHG from `x = y = 0` until the residual drops to `tol`.
pub fn pdhg_solve<M: LinearMap + ?Sized>(
    c: &[f64],
    lap: &M,
    tau: f64,
    sigma: f64,
    tol: f64,
    max_iter: usize,
) -> Result<PdhgReport> {
    let lap_norm = lap.norm()?;
    check_pdhg_steps(tau, sigma, lap_norm)?;
    let n = c.len();
    let (mut x, mut y) = (vec![0.0; n], vec![0.0; n]);
    let mut trace = ResidualTrace::new(&["residual"]);
    let (mut converged, mut diverged, mut iterations) = (false, false, 0);
    let mut residual = f64::INFINITY;
    for k in 0..max_iter {
        let (xn, yn) = pdhg_step(&x, &y, tau, sigma, lap, lap_norm, c)?;
        residual = pdhg_residual(&x, &xn, &y, &yn, tau, sigma);
        iterations = k + 1;
        trace.record(iterations, &[residual]);
        x = xn;
        y = yn;
        if !residual.is_finite() || linalg::norm(&x) > DIVERGENCE_BOUND {
            diverged = true;
            break;
        }
        if residual <= tol {
            converged = true;
            break;
        }
    }
    Ok(PdhgReport {
        converged,
        diverged,
        iterations,
        x,
        y,
        residual,
        trace,
    })
}
