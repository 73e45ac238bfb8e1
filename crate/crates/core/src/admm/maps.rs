//! Linear maps `A_i` of the separable problem, applied matrix-free where a
//! dense matrix would be wasteful.

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};

pub trait LinearMap: Send + Sync {
    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;
    fn apply(&self, w: &[f64]) -> Vec<f64>;
    fn adjoint(&self, v: &[f64]) -> Vec<f64>;

    fn to_dense(&self) -> Mat {
        let (m, n) = (self.out_dim(), self.in_dim());
        let mut out = Mat::zeros(m, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.apply(&e);
            for i in 0..m {
                out[(i, j)] = col[i];
            }
            e[j] = 0.0;
        }
        out
    }

    /// Operator norm.
    fn norm(&self) -> Result<f64> {
        linalg::op_norm(&self.to_dense())
    }
}

impl LinearMap for Mat {
    fn in_dim(&self) -> usize {
        self.cols()
    }

    fn out_dim(&self) -> usize {
        self.rows()
    }

    fn apply(&self, w: &[f64]) -> Vec<f64> {
        self.matvec(w)
    }

    fn adjoint(&self, v: &[f64]) -> Vec<f64> {
        self.matvec_t(v)
    }

    fn to_dense(&self) -> Mat {
        self.clone()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Identity(pub usize);

impl LinearMap for Identity {
    fn in_dim(&self) -> usize {
        self.0
    }

    fn out_dim(&self) -> usize {
        self.0
    }

    fn apply(&self, w: &[f64]) -> Vec<f64> {
        w.to_vec()
    }

    fn adjoint(&self, v: &[f64]) -> Vec<f64> {
        v.to_vec()
    }

    fn norm(&self) -> Result<f64> {
        Ok(if self.0 == 0 { 0.0 } else { 1.0 })
    }
}

/// Laplacian of the cycle on `n ≥ 3` nodes as a three-point stencil.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CycleLaplacian {
    n: usize,
}

impl CycleLaplacian {
    pub fn new(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::param(format!("cycle Laplacian needs n >= 3, got {n}")));
        }
        Ok(CycleLaplacian { n })
    }
}

impl LinearMap for CycleLaplacian {
    fn in_dim(&self) -> usize {
        self.n
    }

    fn out_dim(&self) -> usize {
        self.n
    }

    fn apply(&self, w: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| 2.0 * w[i] - w[(i + n - 1) % n] - w[(i + 1) % n])
            .collect()
    }

    fn adjoint(&self, v: &[f64]) -> Vec<f64> {
        self.apply(v)
    }

    /// `max_k 2 − 2 cos(2πk/n)`, the circulant spectrum.
    fn norm(&self) -> Result<f64> {
        if self.n.is_multiple_of(2) {
            return Ok(4.0);
        }
        let k = (self.n / 2) as f64;
        Ok(2.0 - 2.0 * (2.0 * std::f64::consts::PI * k / self.n as f64).cos())
    }
}
