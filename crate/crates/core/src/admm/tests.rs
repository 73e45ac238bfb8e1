use super::*;
use crate::linalg::{solve_small, Mat};
use crate::problems::Rng;
use crate::splitting::{mt_inputs, mt_step};

struct Quad {
    q: Mat,
    r: Vec<f64>,
    a: Mat,
}

fn random_quads(dims: &[usize], m: usize, seed: u64, strongly_convex: bool) -> Vec<Quad> {
    let mut rng = Rng::new(seed);
    dims.iter()
        .map(|&k| {
            let p = rng.normal_mat(k, k);
            let mut q = p.transpose().matmul(&p).unwrap().scale(0.5);
            if strongly_convex {
                q = q.add(&Mat::identity(k).scale(0.5));
            }
            Quad {
                q,
                r: rng.normal_vec(k),
                a: rng.normal_mat(m, k),
            }
        })
        .collect()
}

fn problem(quads: &[Quad], b: Vec<f64>) -> SepProblem {
    let blocks: Vec<Box<dyn BlockSolver>> = quads
        .iter()
        .map(|q| {
            Box::new(QuadraticBlock::new(q.q.clone(), q.r.clone(), q.a.clone()).unwrap())
                as Box<dyn BlockSolver>
        })
        .collect();
    SepProblem::new(blocks, b).unwrap()
}

/// Solves `[Q Aᵀ; A 0][w; x] = [−r; b]` densely.
fn kkt_oracle(quads: &[Quad], b: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let m = b.len();
    let total: usize = quads.iter().map(|q| q.q.rows()).sum();
    let size = total + m;
    let mut k = Mat::zeros(size, size);
    let mut rhs = vec![0.0; size];
    let mut off = 0;
    for q in quads {
        let d = q.q.rows();
        for i in 0..d {
            rhs[off + i] = -q.r[i];
            for j in 0..d {
                k[(off + i, off + j)] = q.q[(i, j)];
            }
            for t in 0..m {
                k[(off + i, total + t)] = q.a[(t, i)];
                k[(total + t, off + i)] = q.a[(t, i)];
            }
        }
        off += d;
    }
    rhs[total..].copy_from_slice(b);
    let sol = solve_small(&k, &rhs).unwrap();
    let mut w = Vec::new();
    let mut off = 0;
    for q in quads {
        w.push(sol[off..off + q.q.rows()].to_vec());
        off += q.q.rows();
    }
    (w, sol[total..].to_vec())
}

fn dense_argmin(q: &Quad, v: &[f64]) -> Vec<f64> {
    let lhs = q.q.add(&q.a.transpose().matmul(&q.a).unwrap());
    let atv = q.a.transpose().matvec(v);
    let rhs: Vec<f64> = q.r.iter().zip(&atv).map(|(r, t)| -r - t).collect();
    solve_small(&lhs, &rhs).unwrap()
}

fn max_block_gap(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| linalg::dist(x, y))
        .fold(0.0, f64::max)
}

#[test]
fn zero_functions_stay_at_the_origin() {
    let zero = |k: usize| Quad {
        q: Mat::zeros(k, k),
        r: vec![0.0; k],
        a: Mat::identity(k),
    };
    let p = problem(&[zero(2), zero(2), zero(2)], vec![0.0; 2]);
    let (z, w) = admm_avg_step(&p, &Blocks::zeros(2, 2), 0.5).unwrap();
    assert_eq!(z, Blocks::zeros(2, 2));
    assert!(w.iter().all(|b| b.iter().all(|v| *v == 0.0)));
}

#[test]
fn validation() {
    let quads = random_quads(&[2, 2], 3, 1, true);
    let p = problem(&quads, vec![0.0; 3]);
    let z = Blocks::zeros(1, 3);
    assert_eq!(admm_avg_step(&p, &z, 0.0).unwrap_err().kind(), "parameter");
    assert_eq!(admm_avg_step(&p, &z, 1.5).unwrap_err().kind(), "parameter");
    assert_eq!(
        admm_avg_step(&p, &Blocks::zeros(2, 3), 0.5).unwrap_err().kind(),
        "shape"
    );
    let mu = Blocks::zeros(2, 3);
    assert_eq!(
        admm_auglag_step(&p, &mu, &[vec![0.0; 2]], 0.5)
            .unwrap_err()
            .kind(),
        "shape"
    );

    let single: Vec<Box<dyn BlockSolver>> = vec![Box::new(
        PointBlock::new(vec![0.0], Box::new(Identity(1))).unwrap(),
    )];
    assert_eq!(
        SepProblem::new(single, vec![0.0]).err().unwrap().kind(),
        "parameter"
    );
    let wrong_b: Vec<Box<dyn BlockSolver>> = vec![
        Box::new(PointBlock::new(vec![0.0], Box::new(Identity(1))).unwrap()),
        Box::new(PointBlock::new(vec![0.0], Box::new(Identity(1))).unwrap()),
    ];
    assert_eq!(
        SepProblem::new(wrong_b, vec![0.0; 2]).err().unwrap().kind(),
        "shape"
    );
    // Q = 0 with a rank-deficient map: neither hypothesis holds.
    let flat = QuadraticBlock::new(
        Mat::zeros(2, 2),
        vec![0.0; 2],
        Mat::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap(),
    );
    assert!(flat.is_err());
}

#[test]
fn subproblem_failures_carry_the_block_index() {
    let ok = ProxBlock::new(1, true, |y| Ok(y.to_vec()));
    let bad = ProxBlock::new(1, true, |_| Err(Error::param("boom")));
    let p = SepProblem::new(vec![Box::new(ok), Box::new(bad)], vec![0.0]).unwrap();
    match admm_avg_step(&p, &Blocks::zeros(1, 1), 0.5).unwrap_err() {
        Error::Subproblem { block, .. } => assert_eq!(block, 2),
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn point_blocks_are_feasible_immediately() {
    let blocks: Vec<Box<dyn BlockSolver>> = vec![
        Box::new(PointBlock::new(vec![1.0, 2.0], Box::new(Identity(2))).unwrap()),
        Box::new(PointBlock::new(vec![-3.0, 0.5], Box::new(Identity(2))).unwrap()),
        Box::new(PointBlock::new(vec![4.0, 1.0], Box::new(Identity(2))).unwrap()),
    ];
    let p = SepProblem::new(blocks, vec![2.0, 3.5]).unwrap();
    let mu = Blocks::from_blocks(&[[5.0, -1.0], [0.3, 0.2], [9.0, 9.0]]).unwrap();
    let (_, w) = admm_auglag_step(&p, &mu, &p.zero_primal(), 0.7).unwrap();
    assert_eq!(p.primal_residual(&w), 0.0);
}

#[test]
fn two_blocks_match_relaxed_admm() {
    let quads = random_quads(&[3, 2], 4, 7, false);
    let b = Rng::new(8).normal_vec(4);
    let p = problem(&quads, b.clone());
    let gamma = 0.7;
    let aw = |q: &Quad, w: &[f64]| q.a.matvec(w);

    // Direct relaxed ADMM with block 2 updated first and multiplier u.
    let mut z = Blocks::from_blocks(&[Rng::new(9).normal_vec(4)]).unwrap();
    let mut w1 = dense_argmin(&quads[0], z.block(0));
    let mut u = linalg::add(z.block(0), &aw(&quads[0], &w1));
    for _ in 0..100 {
        let (z_next, w) = admm_avg_step(&p, &z, gamma).unwrap();
        assert!(linalg::dist(&w[0], &w1) <= 1e-10);

        let a1w1_b = linalg::sub(&aw(&quads[0], &w1), &b);
        let x = dense_argmin(&quads[1], &linalg::add(&a1w1_b, &u));
        assert!(linalg::dist(&w[1], &x) <= 1e-10);
        let a2x = aw(&quads[1], &x);
        let h: Vec<f64> = (0..4)
            .map(|t| gamma * a2x[t] - (1.0 - gamma) * a1w1_b[t])
            .collect();
        w1 = dense_argmin(&quads[0], &linalg::sub(&linalg::add(&h, &u), &b));
        let gap = linalg::sub(&linalg::add(&h, &aw(&quads[0], &w1)), &b);
        linalg::axpy(1.0, &gap, &mut u);
        z = z_next;
    }
}

#[test]
fn forms_agree_on_quadratic_blocks() {
    let quads = random_quads(&[2, 3, 2], 3, 21, false);
    let b = Rng::new(22).normal_vec(3);
    let p = problem(&quads, b);
    let gamma = 0.6;
    let mut z = Blocks::from_flat(3, Rng::new(23).normal_vec(6)).unwrap();
    let mut w_prev = vec![vec![0.3; 2], vec![-0.1; 3], vec![2.0; 2]];
    let mut mu = mu_from_z(&p, &z, &w_prev).unwrap();
    let back = z_from_mu(&p, &mu, &w_prev).unwrap();
    assert!(back.dist(&z) <= 1e-14);
    for _ in 0..500 {
        let (z_next, w_avg) = admm_avg_step(&p, &z, gamma).unwrap();
        let (mu_next, w_aug) = admm_auglag_step(&p, &mu, &w_prev, gamma).unwrap();
        assert!(max_block_gap(&w_avg, &w_aug) <= 1e-10);
        z = z_next;
        mu = mu_next;
        w_prev = w_aug;
    }
}

#[test]
fn dual_path_matches_splitting() {
    let quads = random_quads(&[2, 2, 3], 3, 31, false);
    let p = problem(&quads, Rng::new(32).normal_vec(3));
    let ops = dual_ops(&p);
    let gamma = 0.8;
    let mut z = Blocks::from_flat(3, Rng::new(33).normal_vec(6)).unwrap();
    for _ in 0..200 {
        let (z_admm, w_admm) = admm_avg_step(&p, &z, gamma).unwrap();
        let (z_mt, x_mt) = mt_step(&z, &ops, gamma).unwrap();
        assert!(z_admm.dist(&z_mt) <= 1e-10);
        let w_mt = primal_from_dual_inputs(&p, &mt_inputs(&z, &x_mt)).unwrap();
        assert!(max_block_gap(&w_admm, &w_mt) <= 1e-10);
        let sweep = avg_sweep(&p, &z).unwrap();
        assert!(reconstruct_duals(&p, &z, &sweep.aw).dist(&x_mt) <= 1e-10);
        z = z_admm;
    }
}

#[test]
fn kkt_oracle_pair_has_tiny_residuals() {
    let quads = random_quads(&[2, 3, 2], 3, 41, true);
    let b = Rng::new(42).normal_vec(3);
    let p = problem(&quads, b.clone());
    let (w, x) = kkt_oracle(&quads, &b);
    let duals = Blocks::from_blocks(&[x.clone(), x.clone(), x.clone()]).unwrap();
    let r = kkt_residual(&p, &w, &duals).unwrap();
    assert!(r.max() <= 1e-9, "{r:?}");

    let bumped: Vec<f64> = x.iter().map(|v| v + 0.1).collect();
    let duals = Blocks::from_blocks(&[bumped.clone(), bumped.clone(), bumped]).unwrap();
    let r2 = kkt_residual(&p, &w, &duals).unwrap();
    assert_eq!(r2.primal, r.primal);
    assert!(r2.subgradient.iter().all(|s| *s > 1e-3));
}

#[test]
fn solve_reaches_the_analytic_kkt_point() {
    let quads = random_quads(&[2, 2], 2, 51, true);
    let b = Rng::new(52).normal_vec(2);
    let p = problem(&quads, b.clone());
    let (w_star, x_star) = kkt_oracle(&quads, &b);
    for form in [AdmmForm::Averaged, AdmmForm::AugLag] {
        let rep = admm_solve(&p, form, 0.9, None, 1e-11, 50_000).unwrap();
        assert!(rep.converged, "{form:?}");
        assert!(max_block_gap(&rep.w, &w_star) <= 1e-8);
        assert!(linalg::dist(&rep.dual, &x_star) <= 1e-8);
        assert!(rep.kkt.max() <= 1e-10 * 10.0, "{:?}", rep.kkt);
        assert_eq!(
            rep.trace.columns(),
            ["primal_residual", "relative_change", "dual_spread"]
        );
    }
}

#[test]
fn infeasible_constraint_does_not_converge() {
    let col = Mat::from_rows(&[[1.0], [0.0]]).unwrap();
    let quad = || QuadraticBlock::new(Mat::identity(1), vec![0.0], col.clone()).unwrap();
    let p = SepProblem::new(vec![Box::new(quad()), Box::new(quad())], vec![0.0, 1.0]).unwrap();
    let rep = admm_solve(&p, AdmmForm::Averaged, 0.5, None, 1e-8, 2000).unwrap();
    assert!(!rep.converged);
    assert!(rep.kkt.primal >= 0.99);
}

#[test]
fn prox_compose_matches_closed_forms() {
    // h₁ = ½‖·‖², A = I: h = ½‖·‖² (+ ⟨b,·⟩), prox(u) = (u − b)/2.
    let half = QuadraticBlock::new(Mat::identity(3), vec![0.0; 3], Mat::identity(3)).unwrap();
    let mut rng = Rng::new(61);
    let u = rng.normal_vec(3);
    let b = rng.normal_vec(3);
    let p0 = prox_compose(&half, None, &u).unwrap();
    assert!(linalg::dist(&p0, &linalg::scale(&u, 0.5)) <= 1e-14);
    let pb = prox_compose(&half, Some(&b), &u).unwrap();
    assert!(linalg::dist(&pb, &linalg::scale(&linalg::sub(&u, &b), 0.5)) <= 1e-14);

    let competitors: Vec<Vec<f64>> = (0..200).map(|_| rng.normal_vec(3)).collect();
    let h = |x: &[f64]| 0.5 * linalg::norm_sq(x) + linalg::dot(&b, x);
    assert!(prox_inequality_slack(h, &u, &pb, &competitors) <= 1e-12);
    let off = linalg::add(&pb, &[0.05, 0.0, 0.0]);
    assert!(prox_inequality_slack(h, &u, &off, std::slice::from_ref(&pb)) > 0.0);

    // A = 0 leaves only the linear term.
    let null = QuadraticBlock::new(Mat::identity(2), vec![0.0; 2], Mat::zeros(3, 2)).unwrap();
    let pz = prox_compose(&null, Some(&b), &u).unwrap();
    assert_eq!(pz, linalg::sub(&u, &b));
    let pz0 = prox_compose(&null, None, &[0.0; 3]).unwrap();
    assert_eq!(pz0, vec![0.0; 3]);
}

#[test]
fn bounded_iterates_are_reproducible() {
    let quads = random_quads(&[2, 2, 2], 2, 71, false);
    let p = problem(&quads, Rng::new(72).normal_vec(2));
    let a = admm_solve(&p, AdmmForm::Averaged, 0.8, None, 0.0, 2000).unwrap();
    let b = admm_solve(&p, AdmmForm::Averaged, 0.8, None, 0.0, 2000).unwrap();
    assert!(a.max_w_norm.is_finite() && !a.diverged);
    assert_eq!(a.max_w_norm, b.max_w_norm);
}
