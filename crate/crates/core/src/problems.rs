//! Seeded instance generators for the consensus and robust PCA experiments and
//! for randomized property tests.
//!
//! All randomness comes from [`Rng`], a ChaCha8 stream seeded from a `u64`, so
//! every instance is a pure function of its parameters and seed on every
//! platform.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::operators::{Affine, Mask, PartialMatrix, ShiftedAbs};
use crate::textio::{self, Reader};

/// Portable seeded generator with Box–Muller normals.
#[derive(Clone, Debug)]
pub struct Rng {
    inner: ChaCha8Rng,
    spare: Option<f64>,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng {
            inner: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform integer in `lo..hi`.
    pub fn below(&mut self, lo: u64, hi: u64) -> u64 {
        self.inner.random_range(lo..hi)
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(v) = self.spare.take() {
            return v;
        }
        // 1 - U lies in (0, 1], keeping the log finite
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn normal_vec(&mut self, len: usize) -> Vec<f64> {
        (0..len).map(|_| self.normal()).collect()
    }

    pub fn normal_mat(&mut self, rows: usize, cols: usize) -> Mat {
        Mat::from_fn(rows, cols, |_, _| self.normal())
    }

    /// A uniformly random subset of `0..total` of exactly `count` indices, as
    /// a boolean mask (partial Fisher–Yates).
    pub fn subset(&mut self, total: usize, count: usize) -> Vec<bool> {
        let mut idx: Vec<usize> = (0..total).collect();
        for i in 0..count.min(total) {
            let j = self.below(i as u64, total as u64) as usize;
            idx.swap(i, j);
        }
        let mut bits = vec![false; total];
        for &i in &idx[..count.min(total)] {
            bits[i] = true;
        }
        bits
    }
}

/// `min_x Σ |x − c_i|`, one shifted absolute value per node.
#[derive(Clone, Debug, PartialEq)]
pub struct ConsensusInstance {
    pub c: Vec<f64>,
    pub seed: u64,
}

impl ConsensusInstance {
    pub fn n(&self) -> usize {
        self.c.len()
    }

    /// `∂|· − c_i|` for every node, on `R^1`.
    pub fn ops(&self) -> Vec<ShiftedAbs> {
        self.c.iter().map(|&ci| ShiftedAbs::new(vec![ci])).collect()
    }

    /// The minimiser set `[lo, hi]`; a single point when `n` is odd.
    pub fn median_interval(&self) -> (f64, f64) {
        median_interval(&self.c)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("consensus {} {}\n", self.n(), self.seed);
        textio::write_row(&mut s, &self.c);
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut r = Reader::new(text);
        let h = r.header(Some("consensus"), 2)?;
        let c = r.row(h[0] as usize)?;
        r.finish()?;
        Ok(ConsensusInstance { c, seed: h[1] })
    }
}

pub fn median_interval(c: &[f64]) -> (f64, f64) {
    let mut s = c.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        (s[n / 2], s[n / 2])
    } else {
        (s[n / 2 - 1], s[n / 2])
    }
}

/// Distance from `x` to the interval `[lo, hi]`.
pub fn interval_distance(x: f64, (lo, hi): (f64, f64)) -> f64 {
    (lo - x).max(x - hi).max(0.0)
}

pub fn gen_consensus(n: usize, seed: u64) -> Result<ConsensusInstance> {
    if n < 2 {
        return Err(Error::param(format!("consensus needs n >= 2, got {n}")));
    }
    let mut rng = Rng::new(seed);
    Ok(ConsensusInstance {
        c: rng.normal_vec(n),
        seed,
    })
}

/// Laplacian of the cycle graph on `n` nodes.
pub fn cycle_laplacian(n: usize) -> Result<Mat> {
    if n < 3 {
        return Err(Error::param(format!("cycle Laplacian needs n >= 3, got {n}")));
    }
    Ok(Mat::from_fn(n, n, |i, j| {
        if i == j {
            2.0
        } else if (i + 1) % n == j || (j + 1) % n == i {
            -1.0
        } else {
            0.0
        }
    }))
}

/// Partially observed low-rank plus sparse matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct RpcaInstance {
    pub l_true: Mat,
    pub s_true: Mat,
    pub observed: PartialMatrix,
    pub seed: u64,
}

impl RpcaInstance {
    pub fn shape(&self) -> (usize, usize) {
        self.l_true.shape()
    }

    pub fn omega(&self) -> &Mask {
        self.observed.mask()
    }

    pub fn to_text(&self) -> String {
        let (m, n) = self.shape();
        let mut s = format!("rpca {m} {n} {}\n", self.seed);
        textio::write_matrix(&mut s, &self.l_true);
        textio::write_matrix(&mut s, &self.s_true);
        let mask = Mat::from_fn(m, n, |i, j| if self.omega().get(i, j) { 1.0 } else { 0.0 });
        textio::write_matrix(&mut s, &mask);
        textio::write_matrix(&mut s, self.observed.values());
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut r = Reader::new(text);
        let h = r.header(Some("rpca"), 3)?;
        let (m, n) = (h[0] as usize, h[1] as usize);
        let l_true = r.matrix(m, n)?;
        let s_true = r.matrix(m, n)?;
        let mask = r.matrix(m, n)?;
        let values = r.matrix(m, n)?;
        r.finish()?;
        let bits = mask.as_slice().iter().map(|v| *v != 0.0).collect();
        Ok(RpcaInstance {
            l_true,
            s_true,
            observed: PartialMatrix::new(values, Mask::new(m, n, bits)?)?,
            seed: h[2],
        })
    }
}

pub const RPCA_SPARSE_FRAC: f64 = 0.15;
pub const RPCA_OBS_FRAC: f64 = 0.40;

pub fn gen_rpca(m: usize, n: usize, seed: u64) -> Result<RpcaInstance> {
    gen_rpca_with(m, n, seed, RPCA_SPARSE_FRAC, RPCA_OBS_FRAC)
}

/// Checkerboard `L` (parity of `i + j`), standard-normal `S` on a random
/// support of `sparse_frac·mn` entries, and `Ω` of `obs_frac·mn` entries.
pub fn gen_rpca_with(m: usize, n: usize, seed: u64, sparse_frac: f64, obs_frac: f64) -> Result<RpcaInstance> {
    if m < 2 || n < 2 {
        return Err(Error::param(format!("robust PCA needs m, n >= 2, got {m}x{n}")));
    }
    for f in [sparse_frac, obs_frac] {
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::param(format!("fraction {f} outside [0, 1]")));
        }
    }
    let total = m * n;
    let mut rng = Rng::new(seed);
    let l_true = Mat::from_fn(m, n, |i, j| ((i + j) % 2) as f64);
    let support = rng.subset(total, (sparse_frac * total as f64).round() as usize);
    let mut s_true = Mat::zeros(m, n);
    for (k, on) in support.iter().enumerate() {
        if *on {
            s_true.as_mut_slice()[k] = rng.normal();
        }
    }
    let omega = Mask::new(
        m,
        n,
        rng.subset(total, (obs_frac * total as f64).round() as usize),
    )?;
    let observed = PartialMatrix::new(l_true.add(&s_true), omega)?;
    Ok(RpcaInstance {
        l_true,
        s_true,
        observed,
        seed,
    })
}

/// Scales of the random parts of [`gen_affine_monotone_with`].
#[derive(Clone, Copy, Debug)]
pub struct AffineConfig {
    pub psd_scale: f64,
    pub skew_scale: f64,
    pub shift_scale: f64,
}

impl Default for AffineConfig {
    fn default() -> Self {
        AffineConfig {
            psd_scale: 1.0,
            skew_scale: 1.0,
            shift_scale: 1.0,
        }
    }
}

/// Operators `x ↦ M_i x + c_i` whose sum vanishes at a recorded point.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineMonotoneInstance {
    pub dim: usize,
    pub matrices: Vec<Mat>,
    pub shifts: Vec<Vec<f64>>,
    pub moduli: Vec<f64>,
    pub solution: Vec<f64>,
    pub seed: u64,
}

impl AffineMonotoneInstance {
    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn ops(&self) -> Result<Vec<Affine>> {
        self.matrices
            .iter()
            .zip(&self.shifts)
            .map(|(m, c)| Affine::new(m.clone(), c.clone()))
            .collect()
    }

    /// `Σ_i (M_i x + c_i)`
    pub fn sum_residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; self.dim];
        for (m, c) in self.matrices.iter().zip(&self.shifts) {
            linalg::axpy(1.0, &m.matvec(x), &mut r);
            linalg::axpy(1.0, c, &mut r);
        }
        r
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("affine {} {} {}\n", self.len(), self.dim, self.seed);
        textio::write_row(&mut s, &self.moduli);
        textio::write_row(&mut s, &self.solution);
        for (m, c) in self.matrices.iter().zip(&self.shifts) {
            textio::write_matrix(&mut s, m);
            textio::write_row(&mut s, c);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut r = Reader::new(text);
        let h = r.header(Some("affine"), 3)?;
        let (count, dim) = (h[0] as usize, h[1] as usize);
        let moduli = r.row(count)?;
        let solution = r.row(dim)?;
        let mut matrices = Vec::with_capacity(count);
        let mut shifts = Vec::with_capacity(count);
        for _ in 0..count {
            matrices.push(r.matrix(dim, dim)?);
            shifts.push(r.row(dim)?);
        }
        r.finish()?;
        Ok(AffineMonotoneInstance {
            dim,
            matrices,
            shifts,
            moduli,
            solution,
            seed: h[2],
        })
    }
}

/// `moduli` is either empty (all zero) or has one entry per operator.
pub fn gen_affine_monotone(
    n_ops: usize,
    dim: usize,
    seed: u64,
    moduli: &[f64],
) -> Result<AffineMonotoneInstance> {
    gen_affine_monotone_with(n_ops, dim, seed, moduli, AffineConfig::default())
}

/// `M_i = P_iᵀP_i + (K_i − K_iᵀ) + β_i I` with Gaussian `P_i, K_i`; the shifts
/// of the first `n−1` operators are Gaussian and the last is chosen so that a
/// Gaussian point `x*` is a zero of the sum.
pub fn gen_affine_monotone_with(
    n_ops: usize,
    dim: usize,
    seed: u64,
    moduli: &[f64],
    cfg: AffineConfig,
) -> Result<AffineMonotoneInstance> {
    if dim == 0 || n_ops == 0 {
        return Err(Error::param(
            "affine instance needs dim >= 1 and at least one operator",
        ));
    }
    let moduli = match moduli.len() {
        0 => vec![0.0; n_ops],
        k if k == n_ops => moduli.to_vec(),
        k => return Err(Error::shape(format!("{k} moduli for {n_ops} operators"))),
    };
    if moduli.iter().any(|b| !(*b >= 0.0)) {
        return Err(Error::param("moduli must be nonnegative"));
    }
    let mut rng = Rng::new(seed);
    let root = 1.0 / (dim as f64).sqrt();
    let solution = rng.normal_vec(dim);
    let mut matrices = Vec::with_capacity(n_ops);
    let mut shifts = Vec::with_capacity(n_ops);
    let mut total = vec![0.0; dim];
    for (i, beta) in moduli.iter().enumerate() {
        let p = rng.normal_mat(dim, dim).scale(cfg.psd_scale * root);
        let k = rng.normal_mat(dim, dim).scale(cfg.skew_scale * root);
        let m = p
            .gram()
            .add(&k.sub(&k.transpose()))
            .add(&Mat::identity(dim).scale(*beta));
        let mx = m.matvec(&solution);
        let c = if i + 1 < n_ops {
            let c = linalg::scale(&rng.normal_vec(dim), cfg.shift_scale);
            linalg::axpy(1.0, &c, &mut total);
            c
        } else {
            linalg::scale(&linalg::add(&total, &mx), -1.0)
        };
        if i + 1 < n_ops {
            linalg::axpy(1.0, &mx, &mut total);
        }
        matrices.push(m);
        shifts.push(c);
    }
    Ok(AffineMonotoneInstance {
        dim,
        matrices,
        shifts,
        moduli,
        solution,
        seed,
    })
}
