use std::fmt::Write as _;
use std::path::PathBuf;
use std::thread;

use clap::Args;
use minlift_core::admm::{check_pdhg_steps, pdhg_solve, reference_step_pairs, CycleLaplacian, LinearMap};
use minlift_core::linalg::Blocks;
use minlift_core::problems::{gen_consensus, interval_distance, ConsensusInstance};
use minlift_core::splitting::{mt_solve, product_dr_solve, ryu3_solve, SolveReport};
use minlift_core::ResidualTrace;

use crate::config::{pick, pick_opt, pick_path};
use crate::{parse_algorithms, require, Algorithm, CliError, Common, Outcome, COMMON_KEYS};

#[derive(Debug, Args)]
pub struct ConsensusArgs {
    #[command(flatten)]
    pub common: Common,
    /// Number of nodes [default: 10]
    #[arg(long)]
    pub n: Option<usize>,
    /// Comma-separated from mt, product_dr, ryu3, pdhg1, pdhg2, pdhg3, pdhg
    /// [default: mt,pdhg1,pdhg2,pdhg3]
    #[arg(long)]
    pub algorithms: Option<String>,
    /// PDHG primal step for the `pdhg` arm
    #[arg(long)]
    pub tau: Option<f64>,
    /// PDHG dual step for the `pdhg` arm
    #[arg(long)]
    pub sigma: Option<f64>,
}

const ALLOWED: [Algorithm; 7] = [
    Algorithm::Mt,
    Algorithm::ProductDr,
    Algorithm::Ryu3,
    Algorithm::Pdhg(1),
    Algorithm::Pdhg(2),
    Algorithm::Pdhg(3),
    Algorithm::PdhgCustom,
];

#[derive(Debug)]
pub struct ConsensusConfig {
    pub n: usize,
    pub seed: u64,
    pub gamma: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub algorithms: Vec<Algorithm>,
    /// `(τ, σ)` for every PDHG arm, in the order of `algorithms`.
    pub pdhg_steps: Vec<(Algorithm, f64, f64)>,
    pub out: Option<PathBuf>,
}

impl ConsensusConfig {
    pub fn resolve(a: &ConsensusArgs) -> Result<Self, CliError> {
        let mut keys = COMMON_KEYS.to_vec();
        keys.extend(["n", "algorithms", "tau", "sigma"]);
        let file = a.common.file(&keys)?;
        let c = &a.common;
        let n = pick(a.n, &file, "n", 10)?;
        let seed = pick(c.seed, &file, "seed", 1)?;
        let gamma = pick(c.gamma, &file, "gamma", 0.9)?;
        let tol = pick(c.tol, &file, "tol", 1e-8)?;
        let max_iter = pick(c.max_iter, &file, "max-iter", 100_000)?;
        let list = pick(
            a.algorithms.clone(),
            &file,
            "algorithms",
            "mt,pdhg1,pdhg2,pdhg3".to_string(),
        )?;
        let algorithms = parse_algorithms(&list, &ALLOWED, "consensus")?;
        let tau = pick_opt(a.tau, &file, "tau")?;
        let sigma = pick_opt(a.sigma, &file, "sigma")?;
        let out = pick_path(c.out.clone(), &file, "out")?;

        require(n >= 2, format!("n = {n}: consensus needs at least 2 nodes"))?;
        require(
            tol > 0.0 && tol.is_finite(),
            format!("tol = {tol} must be positive"),
        )?;
        require(max_iter >= 1, "max-iter must be at least 1")?;
        let has = |x: Algorithm| algorithms.contains(&x);
        if has(Algorithm::Mt) || has(Algorithm::Ryu3) {
            require(
                gamma > 0.0 && gamma < 1.0,
                format!("gamma = {gamma} must lie in (0, 1) for mt and ryu3"),
            )?;
        }
        if has(Algorithm::ProductDr) {
            require(
                gamma > 0.0 && gamma <= 1.0,
                format!("gamma = {gamma} must lie in (0, 1] for product_dr"),
            )?;
        }
        if has(Algorithm::Ryu3) {
            require(n == 3, format!("ryu3 needs exactly 3 nodes, got n = {n}"))?;
        }
        let custom = has(Algorithm::PdhgCustom);
        require(
            custom || (tau.is_none() && sigma.is_none()),
            "tau and sigma only apply to the `pdhg` algorithm",
        )?;

        let mut pdhg_steps = Vec::new();
        if algorithms
            .iter()
            .any(|a| matches!(a, Algorithm::Pdhg(_) | Algorithm::PdhgCustom))
        {
            require(
                n >= 3,
                format!("PDHG runs on the cycle Laplacian, which needs n >= 3, got {n}"),
            )?;
            let norm = CycleLaplacian::new(n)?.norm()?;
            let pairs = reference_step_pairs(norm);
            for &alg in &algorithms {
                let (t, s) = match alg {
                    Algorithm::Pdhg(i) => pairs[i - 1],
                    Algorithm::PdhgCustom => match (tau, sigma) {
                        (Some(t), Some(s)) => (t, s),
                        _ => {
                            return Err(CliError::Config(
                                "the `pdhg` algorithm needs --tau and --sigma".into(),
                            ))
                        }
                    },
                    _ => continue,
                };
                check_pdhg_steps(t, s, norm)?;
                pdhg_steps.push((alg, t, s));
            }
        }
        Ok(ConsensusConfig {
            n,
            seed,
            gamma,
            tol,
            max_iter,
            algorithms,
            pdhg_steps,
            out,
        })
    }
}

struct Arm {
    algorithm: Algorithm,
    residuals: Vec<(usize, f64)>,
    converged: bool,
    diverged: bool,
    iterations: usize,
    residual: f64,
    /// Worst distance from a node's estimate to the minimiser set.
    median_error: f64,
}

fn residual_rows(trace: &ResidualTrace) -> Vec<(usize, f64)> {
    trace.rows().map(|(k, v)| (k, v[0])).collect()
}

fn splitting_arm(alg: Algorithm, rep: SolveReport, interval: (f64, f64)) -> Arm {
    let median_error = rep
        .x
        .iter()
        .map(|xi| interval_distance(xi[0], interval))
        .fold(interval_distance(rep.final_x[0], interval), f64::max);
    Arm {
        algorithm: alg,
        residuals: residual_rows(&rep.trace),
        converged: rep.converged,
        diverged: rep.diverged,
        iterations: rep.iterations,
        residual: rep.residual,
        median_error,
    }
}

fn run_arm(cfg: &ConsensusConfig, inst: &ConsensusInstance, alg: Algorithm) -> Result<Arm, CliError> {
    let ops = inst.ops();
    let n = cfg.n;
    let interval = inst.median_interval();
    let (g, tol, it) = (cfg.gamma, cfg.tol, cfg.max_iter);
    let rep = match alg {
        Algorithm::Mt => mt_solve(&ops, g, Blocks::zeros(n - 1, 1), tol, it)?,
        Algorithm::ProductDr => product_dr_solve(&ops, g, Blocks::zeros(n, 1), tol, it)?,
        Algorithm::Ryu3 => ryu3_solve(&ops, g, Blocks::zeros(2, 1), tol, it)?,
        _ => {
            let &(_, tau, sigma) = cfg
                .pdhg_steps
                .iter()
                .find(|(a, _, _)| *a == alg)
                .expect("steps resolved for every PDHG arm");
            let lap = CycleLaplacian::new(n)?;
            let rep = pdhg_solve(&inst.c, &lap, tau, sigma, tol, it)?;
            let median_error = rep
                .x
                .iter()
                .map(|x| interval_distance(*x, interval))
                .fold(0.0, f64::max);
            return Ok(Arm {
                algorithm: alg,
                residuals: residual_rows(&rep.trace),
                converged: rep.converged,
                diverged: rep.diverged,
                iterations: rep.iterations,
                residual: rep.residual,
                median_error,
            });
        }
    };
    Ok(splitting_arm(alg, rep, interval))
}

/// Columns `k, algorithm, residual`, arms in the order requested.
fn csv(arms: &[Arm]) -> String {
    let mut s = String::from("k,algorithm,residual\n");
    for arm in arms {
        for (k, r) in &arm.residuals {
            writeln!(s, "{k},{},{r:?}", arm.algorithm).unwrap();
        }
    }
    s
}

pub fn run(a: &ConsensusArgs) -> Result<Outcome, CliError> {
    let cfg = ConsensusConfig::resolve(a)?;
    let inst = gen_consensus(cfg.n, cfg.seed)?;
    // Arms are independent; results are collected in request order so the CSV
    // does not depend on scheduling.
    let arms: Vec<Arm> = thread::scope(|scope| {
        let handles: Vec<_> = cfg
            .algorithms
            .iter()
            .map(|&alg| {
                let (cfg, inst) = (&cfg, &inst);
                scope.spawn(move || run_arm(cfg, inst, alg))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("algorithm arm panicked"))
            .collect::<Result<_, _>>()
    })?;
    let (lo, hi) = inst.median_interval();
    let mut summary = vec![format!(
        "consensus n={} seed={}: minimiser set [{lo:?}, {hi:?}]",
        cfg.n, cfg.seed
    )];
    for arm in &arms {
        let state = if arm.converged {
            "converged"
        } else if arm.diverged {
            "diverged"
        } else {
            "stopped"
        };
        summary.push(format!(
            "{}: {state} after {} iterations, residual {:e}, distance to minimiser set {:e}",
            arm.algorithm, arm.iterations, arm.residual, arm.median_error
        ));
    }
    Ok(Outcome {
        body: csv(&arms),
        out: cfg.out,
        summary,
        status: 0,
    })
}
