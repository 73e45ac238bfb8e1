//! Acceptance checks. Each prints one PASS/FAIL line; the binary exits
//! nonzero if any check fails. Every derived quantity is recomputed here from
//! first principles rather than read back from the library's own checkers.

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use minlift_core::admm::{
    admm_auglag_step, admm_avg_step, dual_ops, mu_from_z, pdhg_solve, reference_step_pairs, rpca_problem,
    run_asalm, run_rpca_admm, AdmmForm, BlockSolver, CycleLaplacian, LinearMap, QuadraticBlock, SepProblem,
};
use minlift_core::linalg::{self, solve_small, Blocks, Mat};
use minlift_core::network::{init_nodes, run_protocol, Schedule};
use minlift_core::operators::{Affine, MonotoneOp, Zero};
use minlift_core::problems::{cycle_laplacian, gen_affine_monotone, gen_consensus, gen_rpca, Rng};
use minlift_core::scheme::{
    check_solution_mapping, eval_scheme, validate_lifting, KernelWitness, SchemeMatrices,
};
use minlift_core::splitting::{mt_solve, mt_step, pr_solve, ryu4_step};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// ---------------------------------------------------------------- oracles

/// The minimal-lifting step written straight from its recursion.
fn mt_oracle<O: MonotoneOp>(z: &Blocks, ops: &[O], gamma: f64) -> (Blocks, Vec<Vec<f64>>) {
    let n = ops.len();
    let dim = z.dim();
    let mut x: Vec<Vec<f64>> = vec![ops[0].resolvent(z.block(0), 1.0)];
    for i in 1..n - 1 {
        let y: Vec<f64> = (0..dim)
            .map(|t| (z.block(i)[t] - z.block(i - 1)[t]) + x[i - 1][t])
            .collect();
        x.push(ops[i].resolvent(&y, 1.0));
    }
    let y: Vec<f64> = (0..dim)
        .map(|t| (x[0][t] + x[n - 2][t]) - z.block(n - 2)[t])
        .collect();
    x.push(ops[n - 1].resolvent(&y, 1.0));
    let mut out = z.clone();
    for i in 0..n - 1 {
        for t in 0..dim {
            out.block_mut(i)[t] = z.block(i)[t] + gamma * (x[i + 1][t] - x[i][t]);
        }
    }
    (out, x)
}

/// Left side minus right side of the three-term averagedness inequality.
fn three_term_slack(z: &Blocks, zb: &Blocks, tz: &Blocks, tzb: &Blocks, gamma: f64) -> f64 {
    let (mut t_sq, mut r_sq, mut z_sq) = (0.0, 0.0, 0.0);
    let mut sum = vec![0.0; z.dim()];
    for i in 0..z.count() {
        for t in 0..z.dim() {
            let dz = z.block(i)[t] - zb.block(i)[t];
            let dt = tz.block(i)[t] - tzb.block(i)[t];
            t_sq += dt * dt;
            r_sq += (dz - dt) * (dz - dt);
            z_sq += dz * dz;
            sum[t] += dz - dt;
        }
    }
    let s_sq: f64 = sum.iter().map(|v| v * v).sum();
    t_sq + (1.0 - gamma) / gamma * r_sq + s_sq / gamma - z_sq
}

/// Minimiser set of `Σ|x − c_i|`.
fn median_oracle(c: &[f64]) -> (f64, f64) {
    let mut s = c.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len();
    if n % 2 == 1 {
        (s[n / 2], s[n / 2])
    } else {
        (s[n / 2 - 1], s[n / 2])
    }
}

fn dist_to_interval(x: f64, (lo, hi): (f64, f64)) -> f64 {
    if x < lo {
        lo - x
    } else if x > hi {
        x - hi
    } else {
        0.0
    }
}

struct Quad {
    q: Mat,
    r: Vec<f64>,
    a: Mat,
}

impl Quad {
    /// `argmin ½wᵀQw + rᵀw + ½‖Aw + v‖²` by a dense solve.
    fn argmin(&self, v: &[f64]) -> Vec<f64> {
        let at = self.a.transpose();
        let lhs = self.q.add(&at.matmul(&self.a).unwrap());
        let atv = at.matvec(v);
        let rhs: Vec<f64> = self.r.iter().zip(&atv).map(|(r, t)| -r - t).collect();
        solve_small(&lhs, &rhs).unwrap()
    }
}

fn random_quads(count: usize, k: usize, m: usize, seed: u64) -> Vec<Quad> {
    let mut rng = Rng::new(seed);
    (0..count)
        .map(|_| {
            let p = rng.normal_mat(k, k);
            Quad {
                q: p.transpose().matmul(&p).unwrap().scale(0.5),
                r: rng.normal_vec(k),
                a: rng.normal_mat(m, k),
            }
        })
        .collect()
}

fn quad_problem(quads: &[Quad], b: Vec<f64>) -> SepProblem {
    let blocks = quads
        .iter()
        .map(|q| {
            Box::new(QuadraticBlock::new(q.q.clone(), q.r.clone(), q.a.clone()).unwrap())
                as Box<dyn BlockSolver>
        })
        .collect();
    SepProblem::new(blocks, b).unwrap()
}

fn max_gap(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| linalg::dist(x, y))
        .fold(0.0, f64::max)
}

fn random_blocks(rng: &mut Rng, count: usize, dim: usize) -> Blocks {
    Blocks::from_flat(dim, rng.normal_vec(count * dim)).unwrap()
}

// --------------------------------------------------------------- criteria

fn averagedness() -> Outcome {
    let start = Instant::now();
    let dim = 3;
    let mut worst = f64::NEG_INFINITY;
    let mut worst_step_gap = 0.0_f64;
    let mut count = 0;
    for n in 2..=6 {
        for (gi, gamma) in [0.1, 0.5, 0.9].into_iter().enumerate() {
            for trial in 0..1000u64 {
                let seed = (n as u64) << 40 | (gi as u64) << 32 | trial;
                let ops = gen_affine_monotone(n, dim, seed, &[]).unwrap().ops().unwrap();
                let mut rng = Rng::new(seed ^ 0x5eed);
                let scale = 10f64.powf(2.0 * rng.uniform() - 1.0);
                let z = Blocks::from_flat(dim, linalg::scale(&rng.normal_vec((n - 1) * dim), scale)).unwrap();
                let zb =
                    Blocks::from_flat(dim, linalg::scale(&rng.normal_vec((n - 1) * dim), scale)).unwrap();
                let (tz, _) = mt_step(&z, &ops, gamma).unwrap();
                let (tzb, _) = mt_step(&zb, &ops, gamma).unwrap();
                let (oz, _) = mt_oracle(&z, &ops, gamma);
                worst_step_gap = worst_step_gap.max(tz.dist(&oz) / (1.0 + z.norm()));
                let slack = three_term_slack(&z, &zb, &tz, &tzb, gamma);
                worst = worst.max(slack / (1.0 + z.dist(&zb).powi(2)));
                count += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-9 && worst_step_gap <= 1e-12 && secs < 30.0,
        format!(
            "{count} pairs, worst normalised slack {worst:e}, step vs oracle {worst_step_gap:e}, {secs:.2}s"
        ),
    )
}

fn isometry_witness() -> Outcome {
    let ops = vec![Zero; 5];
    let mut rng = Rng::new(2);
    let mut worst5 = 0.0_f64;
    let mut worst4 = 0.0_f64;
    let mut exact = 0;
    for _ in 0..100 {
        let z = random_blocks(&mut rng, 4, 3);
        let mut t = z.clone();
        for k in 1..=5 {
            t = mt_step(&t, &ops, 1.0).unwrap().0;
            if k == 4 {
                worst4 = worst4.max(t.dist(&z));
            }
        }
        let d = t.dist(&z);
        worst5 = worst5.max(d);
        if d == 0.0 {
            exact += 1;
        }
    }
    outcome(
        exact == 100,
        format!(
            "{exact}/100 with T^5 z = z exactly; max |T^5 z - z| = {worst5:e}, max |T^4 z - z| = {worst4:e}"
        ),
    )
}

fn divergence_witness() -> Outcome {
    let ops = vec![Zero; 4];
    let mut z = Blocks::from_blocks(&[[0.0], [0.0], [1.0]]).unwrap();
    let mut worst = 0.0_f64;
    let mut first_bad = None;
    for k in 0..=40 {
        if k > 0 {
            z = ryu4_step(&z, &ops, 0.5).unwrap().0;
        }
        let ratio = z.norm() / 1.5f64.powi(k);
        let dev = (ratio - 1.0).abs();
        if dev > 1e-9 && first_bad.is_none() {
            first_bad = Some((k, ratio));
        }
        worst = worst.max(dev);
    }
    let detail = match first_bad {
        None => format!("max |ratio - 1| = {worst:e}"),
        Some((k, r)) => format!(
            "ratio |z^k|/1.5^k = {r:e} at k={k}; |z^40| = {:e}; max |ratio - 1| = {worst:e}",
            z.norm()
        ),
    };
    outcome(first_bad.is_none(), detail)
}

fn consensus() -> Outcome {
    let mut failures = Vec::new();
    let mut worst_iters = 0;
    let mut worst_err = 0.0_f64;
    for n in [10, 100] {
        for seed in 0..20 {
            let inst = gen_consensus(n, seed).unwrap();
            let rep = mt_solve(&inst.ops(), 0.9, Blocks::zeros(n - 1, 1), 1e-8, 50_000).unwrap();
            let err = dist_to_interval(rep.final_x[0], median_oracle(&inst.c));
            if rep.converged {
                worst_iters = worst_iters.max(rep.iterations);
                worst_err = worst_err.max(err);
            }
            if !rep.converged || err > 1e-6 {
                failures.push(format!(
                    "n={n} seed={seed} (converged={}, residual {:e}, error {err:e})",
                    rep.converged, rep.residual
                ));
            }
        }
    }
    let mut detail = format!(
        "{}/40 runs ok; worst iterations {worst_iters}, worst median error {worst_err:e}",
        40 - failures.len()
    );
    if !failures.is_empty() {
        detail.push_str("; failed: ");
        detail.push_str(&failures.join(", "));
    }
    outcome(failures.is_empty(), detail)
}

fn distributed() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    for n in [3, 10] {
        let inst = gen_affine_monotone(n, 2, 50 + n as u64, &[]).unwrap();
        let ops = inst.ops().unwrap();
        let z0 = random_blocks(&mut Rng::new(n as u64), n - 1, 2);
        let boxed: Vec<Box<dyn MonotoneOp>> = ops
            .iter()
            .map(|o| Box::new(o.clone()) as Box<dyn MonotoneOp>)
            .collect();
        let mut nodes = init_nodes(boxed, &z0).unwrap();
        let rep = run_protocol(&mut nodes, 0.9, 1000, 0.0, Schedule::Strict).unwrap();

        let mut z = z0.clone();
        let mut max_dev = 0.0_f64;
        let mut bad_counts = 0;
        let mut bad_edges = 0;
        for log in &rep.history {
            z = mt_step(&z, &ops, 0.9).unwrap().0;
            let sim = log.z_after().unwrap();
            max_dev = max_dev.max(
                sim.as_slice()
                    .iter()
                    .zip(z.as_slice())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max),
            );
            for node in 1..=n {
                if log.messages.iter().filter(|m| m.from == node).count() != 2 {
                    bad_counts += 1;
                }
            }
            for m in &log.messages {
                let d = (m.from + n - m.to) % n;
                if !(d == 1 || d == n - 1) {
                    bad_edges += 1;
                }
            }
        }
        // A run that stops early has hit an exact fixed point; the remaining
        // rounds must then leave z untouched.
        let mut idle = true;
        for _ in rep.history.len()..1000 {
            idle &= mt_step(&z, &ops, 0.9).unwrap().0 == z;
        }
        let central = mt_solve(&ops, 0.9, z0, f64::MIN_POSITIVE, 1000).unwrap();
        let final_equal = central.iterations == rep.history.len() && central.final_z == z;
        let ok = idle && max_dev == 0.0 && bad_counts == 0 && bad_edges == 0 && final_equal;
        pass &= ok;
        notes.push(format!(
            "n={n}: {} rounds, max deviation {max_dev:e}, count violations {bad_counts}, adjacency violations {bad_edges}, mt_solve final equal {final_equal}",
            rep.history.len()
        ));
    }
    outcome(pass, notes.join("; "))
}

fn scheme_calculus() -> Outcome {
    let mut rng = Rng::new(6);
    let mut step_gap = 0.0_f64;
    let mut kernel = 0.0_f64;
    let mut mapping = 0.0_f64;
    let mut unsolved = 0;
    for n in 2..=6 {
        for trial in 0..100u64 {
            let gamma = 0.1 + 0.8 * rng.uniform();
            let s = SchemeMatrices::minimal_lifting(n, gamma).unwrap();
            let inst = gen_affine_monotone(n, 3, (n as u64) * 1000 + trial, &[]).unwrap();
            let ops = inst.ops().unwrap();
            let z = random_blocks(&mut rng, n - 1, 3);
            let e = eval_scheme(&s, &z, &ops).unwrap();
            let (tz, _) = mt_oracle(&z, &ops, gamma);
            step_gap = step_gap.max(e.t.dist(&tz));

            if trial < 10 {
                let rep = mt_solve(&ops, gamma, z, 1e-13, 500_000).unwrap();
                if !rep.converged {
                    unsolved += 1;
                    continue;
                }
                let zbar = rep.final_z;
                let e = eval_scheme(&s, &zbar, &ops).unwrap();
                let w = KernelWitness::from_eval(&s, &zbar, &e).unwrap();
                kernel = kernel.max(kernel_oracle(&s, &w));
                let r = check_solution_mapping(&s, &ops, &zbar).unwrap();
                let ybar = e.y.mean();
                let xbar = e.x.block(0);
                let mut gap = linalg::dist(&r.solution, &ybar).max(linalg::dist(&r.solution, xbar));
                for xi in e.x.iter() {
                    gap = gap.max(linalg::dist(xi, xbar));
                }
                mapping = mapping.max(gap);
            }
        }
    }
    let shape = |n: usize, d: usize| {
        SchemeMatrices::new(
            Mat::zeros(n, d),
            Mat::zeros(n, n),
            Mat::zeros(d, d),
            Mat::zeros(d, n),
            Mat::zeros(1, d),
            Mat::zeros(1, n),
        )
        .unwrap()
    };
    let rejects = !validate_lifting(&shape(4, 2));
    let accepts = (2..=8).all(|n| validate_lifting(&shape(n, n - 1)));
    outcome(
        step_gap <= 1e-12 && kernel <= 1e-8 && mapping <= 1e-7 && rejects && accepts && unsolved == 0,
        format!(
            "eval vs step {step_gap:e}, kernel residual {kernel:e}, mapping gap {mapping:e}, rejects (4,2) {rejects}, accepts (n,n-1) {accepts}, unsolved {unsolved}"
        ),
    )
}

/// Residuals of the three kernel rows recomputed from the matrices.
fn kernel_oracle(s: &SchemeMatrices, w: &KernelWitness) -> f64 {
    let (n, d, dim) = (s.n(), s.d(), w.z.dim());
    let mut worst = 0.0_f64;
    for i in 0..n {
        let mut r1 = vec![0.0; dim];
        let mut r2 = vec![0.0; dim];
        for t in 0..dim {
            r1[t] = w.x.block(i)[t] - w.y.block(i)[t] + w.a.block(i)[t];
            let mut v = -w.y.block(i)[t];
            for j in 0..d {
                v += s.b()[(i, j)] * w.z.block(j)[t];
            }
            for k in 0..n {
                v += s.l()[(i, k)] * w.x.block(k)[t];
            }
            r2[t] = v;
        }
        worst = worst.max(linalg::norm(&r1)).max(linalg::norm(&r2));
    }
    // Σ a_i = 0 at a zero of the sum.
    let asum = w.a.sum();
    worst = worst.max(linalg::norm(&asum));
    for i in 0..d {
        let mut r3 = vec![0.0; dim];
        for t in 0..dim {
            let mut v = -w.z.block(i)[t];
            for j in 0..d {
                v += s.tz()[(i, j)] * w.z.block(j)[t];
            }
            for k in 0..n {
                v += s.tx()[(i, k)] * w.x.block(k)[t];
            }
            r3[t] = v;
        }
        worst = worst.max(linalg::norm(&r3));
    }
    worst
}

fn two_operator_reductions() -> Outcome {
    // Relaxed DR through reflections, z ← (1 − γ/2)z + (γ/2) R₂R₁z.
    let inst = gen_affine_monotone(2, 3, 70, &[]).unwrap();
    let ops = inst.ops().unwrap();
    let reflect = |op: &Affine, v: &[f64]| -> Vec<f64> {
        op.resolvent(v, 1.0)
            .iter()
            .zip(v)
            .map(|(j, v)| 2.0 * j - v)
            .collect()
    };
    let mut dr_gap = 0.0_f64;
    for gamma in [0.3_f64, 0.7, 1.0] {
        let mut z = random_blocks(&mut Rng::new(71), 1, 3);
        let mut zd = z.block(0).to_vec();
        for _ in 0..100 {
            z = mt_step(&z, &ops, gamma).unwrap().0;
            let r = reflect(&ops[1], &reflect(&ops[0], &zd));
            zd = zd
                .iter()
                .zip(&r)
                .map(|(a, b)| (1.0 - gamma / 2.0) * a + gamma / 2.0 * b)
                .collect();
            dr_gap = dr_gap.max(linalg::dist(z.block(0), &zd) / (1.0 + linalg::norm(&zd)));
        }
    }

    // Augmented-Lagrangian form at γ = 1 against classical two-block ADMM
    // that updates block 2, then block 1, then the scaled multiplier u.
    let quads = random_quads(2, 2, 3, 72);
    let b = Rng::new(73).normal_vec(3);
    let p = quad_problem(&quads, b.clone());
    let z0 = random_blocks(&mut Rng::new(74), 1, 3);
    let mut w_prev = p.zero_primal();
    let mut mu = mu_from_z(&p, &z0, &w_prev).unwrap();
    let mut w1 = quads[0].argmin(z0.block(0));
    let mut u = linalg::add(z0.block(0), &quads[0].a.matvec(&w1));
    let mut admm_gap = 0.0_f64;
    for _ in 0..200 {
        let (mu_next, w) = admm_auglag_step(&p, &mu, &w_prev, 1.0).unwrap();
        let a1w1 = quads[0].a.matvec(&w1);
        let w2 = quads[1].argmin(&linalg::sub(&linalg::add(&a1w1, &u), &b));
        admm_gap = admm_gap
            .max(linalg::dist(&w[0], &w1))
            .max(linalg::dist(&w[1], &w2));
        let a2w2 = quads[1].a.matvec(&w2);
        w1 = quads[0].argmin(&linalg::sub(&linalg::add(&a2w2, &u), &b));
        let a1w1 = quads[0].a.matvec(&w1);
        for t in 0..3 {
            u[t] += a2w2[t] + a1w1[t] - b[t];
        }
        mu = mu_next;
        w_prev = w;
    }
    outcome(
        dr_gap <= 1e-12 && admm_gap <= 1e-10,
        format!(
            "step vs relaxed DR {dr_gap:e} over 100 steps; aug-Lag (gamma=1) vs two-block ADMM {admm_gap:e}"
        ),
    )
}

fn form_equivalence() -> Outcome {
    let run = |p: &SepProblem, z0: Blocks, gamma: f64, iters: usize| -> f64 {
        let mut z = z0;
        let mut w_prev = p.zero_primal();
        let mut mu = mu_from_z(p, &z, &w_prev).unwrap();
        let mut worst = 0.0_f64;
        for _ in 0..iters {
            let (zn, wa) = admm_avg_step(p, &z, gamma).unwrap();
            let (mn, wl) = admm_auglag_step(p, &mu, &w_prev, gamma).unwrap();
            worst = worst.max(max_gap(&wa, &wl));
            z = zn;
            mu = mn;
            w_prev = wl;
        }
        worst
    };
    let quads = random_quads(3, 2, 3, 80);
    let p = quad_problem(&quads, Rng::new(81).normal_vec(3));
    let quad_gap = run(&p, random_blocks(&mut Rng::new(82), 2, 3), 0.8, 500);
    let inst = gen_rpca(20, 20, 1).unwrap();
    let rp = rpca_problem(&inst.observed, 0.25, 0.1).unwrap();
    let rpca_gap = run(&rp, Blocks::zeros(2, 400), 0.8, 500);
    outcome(
        quad_gap <= 1e-10 && rpca_gap <= 1e-10,
        format!("3-block quadratic {quad_gap:e}, robust PCA {rpca_gap:e} over 500 iterations"),
    )
}

fn dual_path() -> Outcome {
    let quads = random_quads(3, 2, 3, 90);
    let b = Rng::new(91).normal_vec(3);
    let p = quad_problem(&quads, b.clone());
    // Dual resolvents by dense algebra: J(u) = u + Aŵ, with the last block
    // carrying −b.
    struct DenseDual<'a> {
        q: &'a Quad,
        b: Option<Vec<f64>>,
    }
    impl MonotoneOp for DenseDual<'_> {
        fn resolvent_into(&self, u: &[f64], _step: f64, out: &mut [f64]) {
            let shifted = match &self.b {
                Some(b) => linalg::sub(u, b),
                None => u.to_vec(),
            };
            let w = self.q.argmin(&shifted);
            out.copy_from_slice(&linalg::add(&shifted, &self.q.a.matvec(&w)));
        }
        fn kind(&self) -> &'static str {
            "dense-dual"
        }
    }
    let dense: Vec<DenseDual> = quads
        .iter()
        .enumerate()
        .map(|(i, q)| DenseDual {
            q,
            b: (i == 2).then(|| b.clone()),
        })
        .collect();
    let lib_ops = dual_ops(&p);
    let gamma = 0.7;
    let mut z = random_blocks(&mut Rng::new(92), 2, 3);
    let (mut z_gap, mut w_gap, mut op_gap) = (0.0_f64, 0.0_f64, 0.0_f64);
    for _ in 0..200 {
        let (za, wa) = admm_avg_step(&p, &z, gamma).unwrap();
        let (zm, x) = mt_oracle(&z, &dense, gamma);
        let (zl, _) = mt_step(&z, &lib_ops, gamma).unwrap();
        op_gap = op_gap.max(zl.dist(&zm));
        z_gap = z_gap.max(za.dist(&zm));
        // w_i from the resolvent inputs: y_1 = z_1, y_i = z_i − z_{i−1} + x_{i−1},
        // y_3 = x_1 + x_2 − z_2.
        let y1 = z.block(0).to_vec();
        let y2: Vec<f64> = (0..3).map(|t| z.block(1)[t] - z.block(0)[t] + x[0][t]).collect();
        let y3: Vec<f64> = (0..3).map(|t| x[0][t] + x[1][t] - z.block(1)[t]).collect();
        let wm = [
            quads[0].argmin(&y1),
            quads[1].argmin(&y2),
            quads[2].argmin(&linalg::sub(&y3, &b)),
        ];
        w_gap = w_gap.max(max_gap(&wa, &wm));
        z = za;
    }
    outcome(
        z_gap <= 1e-10 && w_gap <= 1e-10 && op_gap <= 1e-10,
        format!("z gap {z_gap:e}, w gap {w_gap:e}, library dual operators vs dense {op_gap:e} over 200 iterations"),
    )
}

fn robust_pca() -> Outcome {
    let start = Instant::now();
    let inst = gen_rpca(20, 20, 1).unwrap();
    let m = &inst.observed;
    let admm = run_rpca_admm(m, 0.25, 0.1, 0.8, 2000, AdmmForm::Averaged).unwrap();
    let asalm = run_asalm(m, 0.25, 0.1, 2000).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let masked_residual = |l: &Mat, s: &Mat, d: &Mat| -> f64 {
        let mut acc = 0.0;
        for i in 0..20 {
            for j in 0..20 {
                if m.mask().get(i, j) {
                    let r = l[(i, j)] + s[(i, j)] + d[(i, j)] - m.values()[(i, j)];
                    acc += r * r;
                }
            }
        }
        acc.sqrt()
    };
    let r_admm = masked_residual(&admm.l, &admm.s, &admm.d);
    let r_asalm = masked_residual(&asalm.l, &asalm.s, &asalm.d);
    let last_change = |t: &minlift_core::ResidualTrace| *t.column("relative_change").unwrap().last().unwrap();
    let (c_admm, c_asalm) = (last_change(&admm.trace), last_change(&asalm.trace));
    let agree = admm.l.sub(&asalm.l).frobenius_norm() / asalm.l.frobenius_norm();
    let pass = r_admm <= 1e-4
        && r_asalm <= 1e-4
        && c_admm <= 1e-5
        && c_asalm <= 1e-5
        && agree <= 1e-2
        && secs < 60.0;
    outcome(
        pass,
        format!(
            "ADMM residual {r_admm:e} change {c_admm:e}; ASALM residual {r_asalm:e} change {c_asalm:e}; L relative gap {agree:e}; {secs:.2}s"
        ),
    )
}

fn uniform_monotone() -> Outcome {
    let inst = gen_affine_monotone(3, 3, 110, &[0.0, 0.5, 0.5]).unwrap();
    let ops = inst.ops().unwrap();
    let rep = pr_solve(&ops, Blocks::zeros(2, 3), 1e-8, 10_000, &[0.5, 0.5]).unwrap();
    let x = &rep.x;
    let mut spread = 0.0_f64;
    for a in x.iter() {
        for b in x.iter() {
            spread = spread.max(linalg::dist(a, b));
        }
    }
    let err = linalg::dist(&rep.final_x, &inst.solution);

    let z0 = random_blocks(&mut Rng::new(111), 2, 3);
    let zero = pr_solve(&[Zero; 3], z0, 1e-8, 10_000, &[0.0, 0.0]).unwrap();
    let pass = rep.converged && spread <= 1e-8 && !zero.converged;
    outcome(
        pass,
        format!(
            "beta=0.5: converged {} in {} iterations, spread {spread:e}, distance to solution {err:e}; zero operators: converged {} (residual {:e})",
            rep.converged, rep.iterations, zero.converged, zero.residual
        ),
    )
}

fn pdhg_baseline() -> Outcome {
    let n = 10;
    let lap = CycleLaplacian::new(n).unwrap();
    let dense_norm = linalg::op_norm(&cycle_laplacian(n).unwrap()).unwrap();
    let closed = 2.0 - 2.0 * (2.0 * std::f64::consts::PI * (n / 2) as f64 / n as f64).cos();
    let norm = lap.norm().unwrap();
    let products: Vec<f64> = reference_step_pairs(norm)
        .iter()
        .map(|(t, s)| t * s * closed * closed)
        .collect();
    let strict = products.iter().all(|p| *p < 1.0);

    let inst = gen_consensus(n, 1).unwrap();
    let interval = median_oracle(&inst.c);
    let mut worst = 0.0_f64;
    let mut all_converged = true;
    for (tau, sigma) in reference_step_pairs(norm) {
        let rep = pdhg_solve(&inst.c, &lap, tau, sigma, 1e-10, 500_000).unwrap();
        all_converged &= rep.converged;
        for xi in &rep.x {
            worst = worst.max(dist_to_interval(*xi, interval));
        }
    }
    outcome(
        strict && all_converged && worst <= 1e-6 && (norm - dense_norm).abs() <= 1e-12,
        format!(
            "tau*sigma*|L|^2 = {products:?} (strictly below 1: {strict}); |L| = {norm} (dense {dense_norm}); PDHG converged {all_converged}, median error {worst:e}"
        ),
    )
}

fn main() -> ExitCode {
    type Check = (&'static str, fn() -> Outcome);
    let checks: [Check; 12] = [
        ("averagedness inequality", averagedness),
        ("isometry witness", isometry_witness),
        ("divergence witness", divergence_witness),
        ("l1 consensus", consensus),
        ("distributed equivalence", distributed),
        ("scheme calculus", scheme_calculus),
        ("two-operator reductions", two_operator_reductions),
        ("ADMM form equivalence", form_equivalence),
        ("ADMM dual path", dual_path),
        ("robust PCA", robust_pca),
        ("uniform monotonicity", uniform_monotone),
        ("PDHG baseline", pdhg_baseline),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let out = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !out.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} {name} ({:.1}s): {}",
            i + 1,
            if out.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            out.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
