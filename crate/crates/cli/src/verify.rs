use std::fmt::Write as _;
use std::path::Path;

use clap::Args;
use minlift_core::linalg::{self, Blocks};
use minlift_core::problems::gen_affine_monotone;
use minlift_core::scheme::{
    check_solution_mapping, eval_scheme, iterate_scheme, scheme_averagedness, validate_lifting,
    zero_operator_growth, KernelWitness, WITNESS_TOL,
};
use minlift_core::SchemeMatrices;

use crate::config::pick;
use crate::{require, CliError, Common, Outcome, COMMON_KEYS};

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// A scheme file, or one of the built-ins mt, ryu3, ryu4, dr
    pub scheme: String,
    #[command(flatten)]
    pub common: Common,
    /// Operator count for the built-in mt scheme [default: 4]
    #[arg(long)]
    pub n: Option<usize>,
    /// Random point pairs for averagedness sampling [default: 200]
    #[arg(long)]
    pub trials: Option<usize>,
    /// Dimension of the underlying space [default: 3]
    #[arg(long)]
    pub dim: Option<usize>,
}

/// Random affine instances used for the averagedness and fixed-point checks.
const INSTANCES: u64 = 4;
const GROWTH_STEPS: usize = 200;
const GROWTH_TOL: f64 = 1e-9;
const FIXED_POINT_TOL: f64 = 1e-11;
const SOLUTION_TOL: f64 = 1e-6;

pub struct VerifyConfig {
    pub label: String,
    pub scheme: SchemeMatrices,
    pub gamma: f64,
    pub seed: u64,
    pub trials: usize,
    pub dim: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub out: Option<std::path::PathBuf>,
}

impl VerifyConfig {
    pub fn resolve(a: &VerifyArgs) -> Result<Self, CliError> {
        let mut keys = COMMON_KEYS.to_vec();
        keys.extend(["n", "trials", "dim"]);
        let file = a.common.file(&keys)?;
        let c = &a.common;
        let builtin = matches!(a.scheme.as_str(), "mt" | "ryu3" | "ryu4" | "dr");
        // A scheme file carries no relaxation parameter, so the inequality is
        // checked in its weakest form unless one is supplied.
        let gamma = pick(c.gamma, &file, "gamma", if builtin { 0.5 } else { 1.0 })?;
        require(
            gamma > 0.0 && gamma <= 1.0,
            format!("gamma = {gamma} must lie in (0, 1]"),
        )?;
        let n = pick(a.n, &file, "n", 4)?;
        let scheme = match a.scheme.as_str() {
            "mt" => SchemeMatrices::minimal_lifting(n, gamma)?,
            "ryu3" => SchemeMatrices::ryu3(gamma),
            "ryu4" => SchemeMatrices::ryu4(gamma),
            "dr" => SchemeMatrices::douglas_rachford(gamma),
            path => {
                let p = Path::new(path);
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                SchemeMatrices::from_text(&text)?
            }
        };
        if a.n.is_some() && a.scheme != "mt" {
            return Err(CliError::Config(
                "--n only applies to the built-in mt scheme".into(),
            ));
        }
        let cfg = VerifyConfig {
            label: a.scheme.clone(),
            scheme,
            gamma,
            seed: pick(c.seed, &file, "seed", 0)?,
            trials: pick(a.trials, &file, "trials", 200)?,
            dim: pick(a.dim, &file, "dim", 3)?,
            tol: pick(c.tol, &file, "tol", 1e-9)?,
            max_iter: pick(c.max_iter, &file, "max-iter", 100_000)?,
            out: crate::config::pick_path(c.out.clone(), &file, "out")?,
        };
        require(cfg.trials >= 1, "trials must be at least 1")?;
        require(cfg.dim >= 1, "dim must be at least 1")?;
        require(
            cfg.tol > 0.0 && cfg.tol.is_finite(),
            format!("tol = {} must be positive", cfg.tol),
        )?;
        require(cfg.max_iter >= 1, "max-iter must be at least 1")?;
        Ok(cfg)
    }
}

pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &'static str, pass: bool, detail: String) -> Check {
    Check { name, pass, detail }
}

pub fn checks(cfg: &VerifyConfig) -> Result<Vec<Check>, CliError> {
    let s = &cfg.scheme;
    let (n, d, dim) = (s.n(), s.d(), cfg.dim);
    let mut out = vec![check(
        "lifting",
        validate_lifting(s),
        format!(
            "n={n} operators on {d} lifted copies; at least {} needed",
            n.saturating_sub(1).max(1)
        ),
    )];

    let per = cfg.trials.div_ceil(INSTANCES as usize);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..INSTANCES {
        let ops = gen_affine_monotone(n, dim, cfg.seed.wrapping_add(i), &[])?.ops()?;
        worst = worst.max(scheme_averagedness(
            s,
            &ops,
            dim,
            cfg.gamma,
            per,
            cfg.seed.wrapping_add(i),
        )?);
    }
    out.push(check(
        "averagedness",
        worst <= cfg.tol,
        format!(
            "worst normalised slack {worst:e} over {} pairs at gamma={:?} (tolerance {:e})",
            per * INSTANCES as usize,
            cfg.gamma,
            cfg.tol
        ),
    ));

    let growth = zero_operator_growth(s, dim, GROWTH_STEPS, cfg.seed)?;
    out.push(check(
        "zero-operator growth",
        growth <= 1.0 + GROWTH_TOL,
        format!("max |T^k z|/|z| = {growth:e} over {GROWTH_STEPS} steps"),
    ));

    let (mut kernel, mut mapping, mut solution) = (0.0_f64, 0.0_f64, 0.0_f64);
    let mut failures = Vec::new();
    for i in 0..INSTANCES {
        let inst = gen_affine_monotone(n, dim, cfg.seed.wrapping_add(100 + i), &[])?;
        let ops = inst.ops()?;
        let run = iterate_scheme(s, &ops, Blocks::zeros(d, dim), FIXED_POINT_TOL, cfg.max_iter)?;
        if !run.converged {
            let what = if run.diverged {
                "diverged"
            } else {
                "did not converge"
            };
            failures.push(format!(
                "instance {i} {what} (|Tz - z| = {:e} after {} steps)",
                run.residual, run.iterations
            ));
            continue;
        }
        let e = eval_scheme(s, &run.z, &ops)?;
        kernel = kernel.max(KernelWitness::from_eval(s, &run.z, &e)?.max_residual());
        let rep = check_solution_mapping(s, &ops, &run.z)?;
        mapping = mapping
            .max(rep.spread)
            .max(rep.mapping_gap)
            .max(rep.inclusion_residual);
        solution = solution.max(linalg::dist(&rep.solution, &inst.solution));
    }
    let reached = failures.is_empty();
    let fixed_detail = if reached {
        format!("{INSTANCES} random affine instances reached |Tz - z| <= {FIXED_POINT_TOL:e}")
    } else {
        failures.join("; ")
    };
    out.push(check("fixed point", reached, fixed_detail));
    if reached {
        out.push(check(
            "kernel",
            kernel <= WITNESS_TOL,
            format!("worst kernel residual {kernel:e} (tolerance {WITNESS_TOL:e})"),
        ));
        out.push(check(
            "solution mapping",
            mapping <= 1e-7 && solution <= SOLUTION_TOL,
            format!("worst spread/mapping gap {mapping:e}, distance to known zero {solution:e}"),
        ));
    }
    Ok(out)
}

pub fn run(a: &VerifyArgs) -> Result<Outcome, CliError> {
    let cfg = VerifyConfig::resolve(a)?;
    let results = checks(&cfg)?;
    let mut body = format!(
        "scheme {} (n={}, d={}, seed={})\n",
        cfg.label,
        cfg.scheme.n(),
        cfg.scheme.d(),
        cfg.seed
    );
    for c in &results {
        writeln!(
            body,
            "{}: {}: {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        )
        .unwrap();
    }
    let failed = results.iter().filter(|c| !c.pass).count();
    let verdict = if failed == 0 { "PASS" } else { "FAIL" };
    writeln!(
        body,
        "{verdict}: overall: {failed} of {} checks failed",
        results.len()
    )
    .unwrap();
    Ok(Outcome {
        body,
        out: cfg.out,
        summary: Vec::new(),
        status: if failed == 0 { 0 } else { 3 },
    })
}
