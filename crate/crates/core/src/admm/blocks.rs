//! Per-block subproblem solvers `v ↦ argmin_w f(w) + ½‖A w + v‖²`.

use super::maps::{Identity, LinearMap};
use crate::error::{Error, Result};
use crate::linalg::{self, Lu, Mat};

/// Floor below which an eigenvalue counts as zero for the flags.
const FLAG_EPS: f64 = 1e-12;

pub trait BlockSolver: Send + Sync {
    fn map(&self) -> &dyn LinearMap;

    /// `argmin_w f(w) + ½‖A w + v‖²`.
    fn solve(&self, v: &[f64]) -> Result<Vec<f64>>;

    fn coercive(&self) -> bool;

    /// Whether `AᵀA` is invertible.
    fn injective(&self) -> bool;
}

type ProxFn = dyn Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync;

/// A block with `A = I`, solved by the proximity operator of `f`:
/// the minimiser is `prox_f(−v)`.
pub struct ProxBlock {
    map: Identity,
    prox: Box<ProxFn>,
    coercive: bool,
}

impl ProxBlock {
    pub fn new(
        dim: usize,
        coercive: bool,
        prox: impl Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync + 'static,
    ) -> Self {
        ProxBlock {
            map: Identity(dim),
            prox: Box::new(prox),
            coercive,
        }
    }
}

impl BlockSolver for ProxBlock {
    fn map(&self) -> &dyn LinearMap {
        &self.map
    }

    fn solve(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.map.0 {
            return Err(Error::shape(format!(
                "offset of length {} for R^{}",
                v.len(),
                self.map.0
            )));
        }
        let w = (self.prox)(&linalg::scale(v, -1.0))?;
        if w.len() != self.map.0 {
            return Err(Error::shape("prox returned the wrong length"));
        }
        Ok(w)
    }

    fn coercive(&self) -> bool {
        self.coercive
    }

    fn injective(&self) -> bool {
        true
    }
}

/// `f(w) = ½ wᵀQw + rᵀw` with a dense map `A`; the subproblem is the linear
/// system `(Q + AᵀA) w = −r − Aᵀv`.
pub struct QuadraticBlock {
    q: Mat,
    r: Vec<f64>,
    a: Mat,
    lu: Lu,
    coercive: bool,
    injective: bool,
}

impl QuadraticBlock {
    pub fn new(q: Mat, r: Vec<f64>, a: Mat) -> Result<Self> {
        let k = a.cols();
        if q.shape() != (k, k) || r.len() != k {
            return Err(Error::shape(format!(
                "Q is {:?} and r has length {} for a map with {k} columns",
                q.shape(),
                r.len()
            )));
        }
        if !q.is_symmetric() {
            return Err(Error::param("Q must be symmetric"));
        }
        let q_min = min_eig(&q)?;
        if q_min < -FLAG_EPS {
            return Err(Error::param(format!(
                "Q is not positive semidefinite (eigenvalue {q_min:e})"
            )));
        }
        let gram = a.gram();
        let injective = min_eig(&gram)? > FLAG_EPS;
        let lu = Lu::factor(&q.add(&gram))?;
        Ok(QuadraticBlock {
            coercive: q_min > FLAG_EPS,
            injective,
            q,
            r,
            a,
            lu,
        })
    }

    pub fn q(&self) -> &Mat {
        &self.q
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn value(&self, w: &[f64]) -> f64 {
        0.5 * linalg::dot(w, &self.q.matvec(w)) + linalg::dot(&self.r, w)
    }

    pub fn gradient(&self, w: &[f64]) -> Vec<f64> {
        linalg::add(&self.q.matvec(w), &self.r)
    }
}

fn min_eig(m: &Mat) -> Result<f64> {
    if m.rows() == 0 {
        return Ok(f64::INFINITY);
    }
    Ok(linalg::sym_eigenvalues(m)?
        .into_iter()
        .fold(f64::INFINITY, f64::min))
}

impl BlockSolver for QuadraticBlock {
    fn map(&self) -> &dyn LinearMap {
        &self.a
    }

    fn solve(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.a.rows() {
            return Err(Error::shape("offset length differs from the map's codomain"));
        }
        let atv = self.a.matvec_t(v);
        let rhs: Vec<f64> = self.r.iter().zip(&atv).map(|(r, t)| -r - t).collect();
        Ok(self.lu.solve(&rhs))
    }

    fn coercive(&self) -> bool {
        self.coercive
    }

    fn injective(&self) -> bool {
        self.injective
    }
}

/// Indicator of a single point: the subproblem ignores its offset.
pub struct PointBlock {
    point: Vec<f64>,
    map: Box<dyn LinearMap>,
}

impl PointBlock {
    pub fn new(point: Vec<f64>, map: Box<dyn LinearMap>) -> Result<Self> {
        if point.len() != map.in_dim() {
            return Err(Error::shape("point length differs from the map's domain"));
        }
        Ok(PointBlock { point, map })
    }
}

impl BlockSolver for PointBlock {
    fn map(&self) -> &dyn LinearMap {
        self.map.as_ref()
    }

    fn solve(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.map.out_dim() {
            return Err(Error::shape("offset length differs from the map's codomain"));
        }
        Ok(self.point.clone())
    }

    fn coercive(&self) -> bool {
        true
    }

    fn injective(&self) -> bool {
        false
    }
}
