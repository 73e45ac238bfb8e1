use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::thread;

use clap::Args;
use minlift_core::admm::{run_asalm, run_rpca_admm, RpcaRun};
use minlift_core::linalg::{svd, Mat};
use minlift_core::problems::{gen_rpca, RpcaInstance};
use minlift_core::AdmmForm;

use crate::config::{pick, pick_path};
use crate::{parse_algorithms, require, Algorithm, CliError, Common, Outcome, COMMON_KEYS};

#[derive(Debug, Args)]
pub struct RpcaArgs {
    #[command(flatten)]
    pub common: Common,
    /// Matrix rows [default: 20]
    #[arg(long)]
    pub rows: Option<usize>,
    /// Matrix columns [default: 20]
    #[arg(long)]
    pub cols: Option<usize>,
    /// Weight of the l1 term [default: 0.25]
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Radius of the observation-noise ball [default: 0.1]
    #[arg(long)]
    pub delta: Option<f64>,
    /// Comma-separated from admm_avg, admm_auglag, asalm [default: admm_avg,asalm]
    #[arg(long)]
    pub algorithms: Option<String>,
    /// Directory for the recovered L and S matrices [default: next to --out]
    #[arg(long = "matrix-dir")]
    pub matrix_dir: Option<PathBuf>,
}

const ALLOWED: [Algorithm; 3] = [Algorithm::AdmmAvg, Algorithm::AdmmAuglag, Algorithm::Asalm];

#[derive(Debug)]
pub struct RpcaConfig {
    pub rows: usize,
    pub cols: usize,
    pub seed: u64,
    pub gamma: f64,
    pub lambda: f64,
    pub delta: f64,
    pub iterations: usize,
    pub algorithms: Vec<Algorithm>,
    pub out: Option<PathBuf>,
    pub matrix_dir: Option<PathBuf>,
}

impl RpcaConfig {
    pub fn resolve(a: &RpcaArgs) -> Result<Self, CliError> {
        let mut keys = COMMON_KEYS.to_vec();
        keys.extend(["rows", "cols", "lambda", "delta", "algorithms", "matrix-dir"]);
        let file = a.common.file(&keys)?;
        let c = &a.common;
        // Runs are fixed-length, so a stopping tolerance would be ignored.
        let tol: Option<f64> = crate::config::pick_opt(c.tol, &file, "tol")?;
        require(
            tol.is_none(),
            "tol does not apply to rpca; the run length is set by max-iter",
        )?;
        let rows = pick(a.rows, &file, "rows", 20)?;
        let cols = pick(a.cols, &file, "cols", 20)?;
        let seed = pick(c.seed, &file, "seed", 1)?;
        let gamma = pick(c.gamma, &file, "gamma", 0.8)?;
        let lambda = pick(a.lambda, &file, "lambda", 0.25)?;
        let delta = pick(a.delta, &file, "delta", 0.1)?;
        let iterations = pick(c.max_iter, &file, "max-iter", 2000)?;
        let list = pick(
            a.algorithms.clone(),
            &file,
            "algorithms",
            "admm_avg,asalm".to_string(),
        )?;
        let algorithms = parse_algorithms(&list, &ALLOWED, "rpca")?;
        let out = pick_path(c.out.clone(), &file, "out")?;
        let matrix_dir = pick_path(a.matrix_dir.clone(), &file, "matrix-dir")?.or_else(|| {
            out.as_ref()
                .map(|p| p.parent().unwrap_or(Path::new("")).to_path_buf())
        });

        require(
            rows >= 2 && cols >= 2,
            format!("matrix must be at least 2x2, got {rows}x{cols}"),
        )?;
        require(
            gamma > 0.0 && gamma <= 1.0,
            format!("gamma = {gamma} must lie in (0, 1]"),
        )?;
        require(
            lambda > 0.0 && lambda.is_finite(),
            format!("lambda = {lambda} must be positive"),
        )?;
        require(
            delta >= 0.0 && delta.is_finite(),
            format!("delta = {delta} must be nonnegative"),
        )?;
        require(iterations >= 1, "max-iter must be at least 1")?;
        Ok(RpcaConfig {
            rows,
            cols,
            seed,
            gamma,
            lambda,
            delta,
            iterations,
            algorithms,
            out,
            matrix_dir,
        })
    }
}

fn run_arm(cfg: &RpcaConfig, inst: &RpcaInstance, alg: Algorithm) -> Result<RpcaRun, CliError> {
    let m = &inst.observed;
    let (lambda, delta, iters) = (cfg.lambda, cfg.delta, cfg.iterations);
    Ok(match alg {
        Algorithm::AdmmAvg => run_rpca_admm(m, lambda, delta, cfg.gamma, iters, AdmmForm::Averaged)?,
        Algorithm::AdmmAuglag => run_rpca_admm(m, lambda, delta, cfg.gamma, iters, AdmmForm::AugLag)?,
        Algorithm::Asalm => run_asalm(m, lambda, delta, iters)?,
        other => unreachable!("{other} rejected during validation"),
    })
}

/// Header `rows cols`, then one whitespace-separated row per line.
pub fn matrix_text(m: &Mat) -> String {
    let mut s = format!("{} {}\n", m.rows(), m.cols());
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:?}")).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

fn numerical_rank(m: &Mat) -> Result<usize, CliError> {
    let sigma = svd(m)?.sigma;
    let top = sigma.iter().copied().fold(0.0, f64::max);
    Ok(sigma.iter().filter(|s| **s > 1e-6 * top.max(1.0)).count())
}

pub fn run(a: &RpcaArgs) -> Result<Outcome, CliError> {
    let cfg = RpcaConfig::resolve(a)?;
    let inst = gen_rpca(cfg.rows, cfg.cols, cfg.seed)?;
    let runs: Vec<RpcaRun> = thread::scope(|scope| {
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

    let mut body = String::from("k,algorithm,relative_change,primal_residual\n");
    let mut summary = vec![format!(
        "rpca {}x{} seed={} lambda={:?} delta={:?} gamma={:?}",
        cfg.rows, cfg.cols, cfg.seed, cfg.lambda, cfg.delta, cfg.gamma
    )];
    let stem = cfg
        .out
        .as_ref()
        .and_then(|p| p.file_stem())
        .map_or("rpca".to_string(), |s| s.to_string_lossy().into_owned());
    for (alg, run) in cfg.algorithms.iter().zip(&runs) {
        for (k, v) in run.trace.rows() {
            writeln!(body, "{k},{alg},{:?},{:?}", v[0], v[1]).unwrap();
        }
        let (_, last) = run.trace.last().expect("at least one iteration");
        let l_err = run.l.sub(&inst.l_true).frobenius_norm() / inst.l_true.frobenius_norm();
        summary.push(format!(
            "{alg}: relative change {:e}, primal residual {:e}, rank(L) {}, |L - L_true|/|L_true| {:e}",
            last[0],
            last[1],
            numerical_rank(&run.l)?,
            l_err
        ));
        if let Some(dir) = &cfg.matrix_dir {
            for (name, m) in [("L", &run.l), ("S", &run.s)] {
                let path = dir.join(format!("{stem}.{alg}.{name}.txt"));
                std::fs::write(&path, matrix_text(m)).map_err(|e| CliError::io(&path, e))?;
                summary.push(format!("wrote {}", path.display()));
            }
        }
    }
    if cfg.matrix_dir.is_none() {
        summary.push("recovered matrices not written; pass --out or --matrix-dir".into());
    }
    Ok(Outcome {
        body,
        out: cfg.out,
        summary,
        status: 0,
    })
}
