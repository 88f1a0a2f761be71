//! Command-line front end: `solve`, `eval`, `check` and `sample`.
//!
//! Human-readable summaries go to stdout (the point stream, for `sample`);
//! `--out FILE` writes the machine-readable [`record::RunRecord`].

pub mod record;

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use bilevel_core::belief::{
    continuity_probe, expected_value, expected_value_on_face, support_check, BeliefSpec, ProbeReport,
};
use bilevel_core::devolve::{de_minimize, fixed_seed_stream, DEConfig};
use bilevel_core::error::Error;
use bilevel_core::expr::Expression;
use bilevel_core::lp::EPS_FEAS;
use bilevel_core::oracle::{exact_expectation, explicit_phi_n_example22};
use bilevel_core::polytope::sample_uniform;
use bilevel_core::problem::BilevelProblem;
use bilevel_core::reaction::{argmin_face, domain_box, domain_contains, face_slack, lower_value};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use record::{float_list, RunRecord};

#[derive(Debug, Parser)]
#[command(name = "bilevel", version, about = "Bilevel programs with a linear lower level under a belief")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Record wall time in the output (breaks byte-identical records).
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Minimize the belief value with Differential Evolution.
    Solve(SolveArgs),
    /// Estimate the belief value at one leader decision.
    Eval(EvalArgs),
    /// Run the verification checks on a problem.
    Check(CheckArgs),
    /// Write uniform samples of the follower's optimal set.
    Sample(SampleArgs),
}

#[derive(Debug, Args)]
pub struct ProblemArgs {
    /// Problem file.
    #[arg(value_name = "FILE", required_unless_present = "builtin", conflicts_with = "builtin")]
    pub file: Option<PathBuf>,
    /// Built-in problem: example22, triangle_to_segment or singleton_1d.
    #[arg(long, value_name = "NAME")]
    pub builtin: Option<String>,
    /// Density of a conditional belief, replacing the file's.
    #[arg(long, value_name = "EXPR", allow_hyphen_values = true)]
    pub density: Option<String>,
    /// Write the run record to this file.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Random seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Monte-Carlo samples per evaluation.
    #[arg(long, default_value_t = 1_000_000)]
    pub mc: usize,
    /// Population size [default: max(20, 10 d)].
    #[arg(long)]
    pub pop: Option<usize>,
    /// Maximum number of generations.
    #[arg(long, default_value_t = 200)]
    pub gens: usize,
    /// Differential weight F.
    #[arg(long, default_value_t = 0.8)]
    pub f: f64,
    /// Crossover rate CR.
    #[arg(long, default_value_t = 0.9)]
    pub cr: f64,
    /// Stop after this many generations without improvement.
    #[arg(long, default_value_t = 30)]
    pub stall: usize,
    /// Draw fresh samples for every evaluation instead of sharing one seed.
    #[arg(long)]
    pub fresh_seeds: bool,
    /// Worker threads (0: all cores).
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Leader decision, comma separated.
    #[arg(long, value_name = "CSV", allow_hyphen_values = true)]
    pub x: String,
    /// Monte-Carlo samples.
    #[arg(long, default_value_t = 1_000_000)]
    pub mc: usize,
    /// Random seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also compute the exact value by quadrature (faces of dimension <= 2).
    #[arg(long)]
    pub oracle: bool,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Grid points per leader coordinate.
    #[arg(long, default_value_t = 21)]
    pub grid: usize,
    /// Monte-Carlo samples per grid point.
    #[arg(long, default_value_t = 1_000_000)]
    pub mc: usize,
    /// Random seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Continuity probe from a to b in the given number of steps; a and b
    /// are comma-separated points.
    #[arg(long, value_name = "a:b:steps", allow_hyphen_values = true)]
    pub path: Option<String>,
    /// Largest centroid speed accepted along the path between points of
    /// equal face dimension.
    #[arg(long, default_value_t = 10.0)]
    pub lipschitz: f64,
    /// Worker threads (0: all cores).
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Leader decision, comma separated.
    #[arg(long, value_name = "CSV", allow_hyphen_values = true)]
    pub x: String,
    /// Number of points.
    #[arg(short = 'n', default_value_t = 1000)]
    pub count: usize,
    /// Random seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Failure of a command, mapped to the process exit code.
#[derive(Debug)]
pub enum CliError {
    Lib(Error),
    Usage(String),
    Output(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Usage(m) | CliError::Output(m) => f.write_str(m),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Output(_) => 2,
            CliError::Lib(e) => match e {
                Error::Syntax { .. }
                | Error::DimensionMismatch(_)
                | Error::UnknownVariable(_)
                | Error::UnknownBuiltin(_)
                | Error::Io { .. }
                | Error::ConfigInvalid(_) => 2,
                Error::EmptyPolytope
                | Error::UnboundedPolytope
                | Error::EmptyFeasibleSet
                | Error::EmptyJointPolytope
                | Error::OutsideDomain(_)
                | Error::EmptyDomain
                | Error::UnboundedFeasibleRegion => 3,
                Error::NumericalFailure(_)
                | Error::RejectionBudgetExhausted(_)
                | Error::ZeroDensityMass
                | Error::ExpressionEval(_)
                | Error::DegenerateFace(_)
                | Error::UnsupportedDimension(_)
                | Error::OutsideSimplex(_) => 4,
            },
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// What a successful run prints, and its exit status (1 when a check failed).
#[derive(Debug)]
pub struct Outcome {
    pub stdout: String,
    pub status: i32,
}

/// Runs a parsed command line. `echo` is the argument list recorded in the
/// run record.
pub fn run(cli: &Cli, echo: &str) -> CliResult<Outcome> {
    let start = Instant::now();
    let (mut record, mut stdout, status, target) = match &cli.command {
        Command::Solve(a) => {
            let (r, o) = solve(a, echo)?;
            (r, o, 0, &a.problem.out)
        }
        Command::Eval(a) => {
            let (r, o) = eval(a, echo)?;
            (r, o, 0, &a.problem.out)
        }
        Command::Check(a) => {
            let (r, o, failed) = check(a, echo)?;
            (r, o, i32::from(failed > 0), &a.problem.out)
        }
        Command::Sample(a) => {
            let (r, o) = sample(a, echo)?;
            (r, o, 0, &a.problem.out)
        }
    };
    if cli.timing {
        let t = start.elapsed().as_secs_f64();
        record.wall_time = Some(t);
        if !matches!(cli.command, Command::Sample(_)) {
            let _ = writeln!(stdout, "wall time    {t:.3} s");
        }
    }
    write_record(&record, target)?;
    Ok(Outcome { stdout, status })
}

fn write_record(record: &RunRecord, target: &Option<PathBuf>) -> CliResult<()> {
    if let Some(path) = target {
        std::fs::write(path, record.to_text())
            .map_err(|e| CliError::Output(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

fn load(args: &ProblemArgs) -> CliResult<(BilevelProblem, BeliefSpec)> {
    let mut problem = match (&args.builtin, &args.file) {
        (Some(name), _) => bilevel_core::builtin::builtin(name)?,
        (None, Some(path)) => BilevelProblem::load(path)?,
        (None, None) => return Err(CliError::Usage("give a problem FILE or --builtin NAME".into())),
    };
    if let Some(src) = &args.density {
        problem = problem.with_density(Expression::parse(src)?)?;
    }
    let belief = BeliefSpec::for_problem(&problem);
    Ok((problem, belief))
}

fn belief_label(belief: &BeliefSpec) -> String {
    match belief {
        BeliefSpec::Neutral => "neutral".into(),
        BeliefSpec::Conditional(rho) => format!("density {rho}"),
    }
}

pub fn parse_point(src: &str) -> CliResult<Vec<f64>> {
    src.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::Usage(format!("cannot read `{t}` in point `{src}`")))
        })
        .collect()
}

/// `a:b:steps` into `steps + 1` evenly spaced points from `a` to `b`.
pub fn parse_path(src: &str, d: usize) -> CliResult<Vec<Vec<f64>>> {
    let parts: Vec<&str> = src.split(':').collect();
    let [a, b, steps] = parts.as_slice() else {
        return Err(CliError::Usage(format!("path `{src}` is not of the form a:b:steps")));
    };
    let (a, b) = (parse_point(a)?, parse_point(b)?);
    let steps: usize = steps
        .trim()
        .parse()
        .ok()
        .filter(|&s| s > 0)
        .ok_or_else(|| CliError::Usage(format!("bad step count in path `{src}`")))?;
    if a.len() != d || b.len() != d {
        return Err(Error::DimensionMismatch(format!("path endpoints must have length {d}")).into());
    }
    Ok((0..=steps)
        .map(|i| {
            let t = i as f64 / steps as f64;
            a.iter().zip(&b).map(|(p, q)| p + t * (q - p)).collect()
        })
        .collect())
}

fn check_dim(problem: &BilevelProblem, x: &[f64]) -> CliResult<()> {
    if x.len() != problem.leader_dim() {
        return Err(Error::DimensionMismatch(format!(
            "x has length {}, expected {}",
            x.len(),
            problem.leader_dim()
        ))
        .into());
    }
    Ok(())
}

fn show(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(", ")
}

fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn solve(a: &SolveArgs, echo: &str) -> CliResult<(RunRecord, String)> {
    let (problem, belief) = load(&a.problem)?;
    let defaults = DEConfig::for_dim(problem.leader_dim());
    let config = DEConfig {
        pop_size: a.pop.unwrap_or(defaults.pop_size),
        weight_f: a.f,
        crossover_cr: a.cr,
        max_generations: a.gens,
        mc_samples: a.mc,
        seed: a.seed,
        stall_generations: a.stall,
        common_random_numbers: !a.fresh_seeds,
        threads: a.threads,
        ..defaults
    };
    let report = de_minimize(&problem, &belief, &config)?;

    let mut r = RunRecord::new(echo, &problem.name);
    r.config("belief", belief_label(&belief))
        .config("seed", config.seed)
        .config("mc", config.mc_samples)
        .config("pop", config.pop_size)
        .config("f", format!("{:?}", config.weight_f))
        .config("cr", format!("{:?}", config.crossover_cr))
        .config("gens", config.max_generations)
        .config("stall_generations", config.stall_generations)
        .config("stall_tol", format!("{:?}", config.stall_tol))
        .config("common_random_numbers", config.common_random_numbers);
    r.result("best_x", float_list(&report.best_x))
        .result("best_value", format!("{:?}", report.best_value))
        .result("best_stderr", format!("{:?}", report.best_stderr))
        .result("generations", report.generations())
        .result("evaluations", report.evaluations);
    for (i, (best, mean)) in report.history.iter().enumerate() {
        r.result(&format!("history.{i}"), format!("{best:?},{mean:?}"));
    }

    let mut out = String::new();
    let _ = writeln!(out, "problem      {}", problem.name);
    let _ = writeln!(out, "belief       {}", belief_label(&belief));
    let _ = writeln!(out, "best x       {}", show(&report.best_x));
    let _ = writeln!(out, "value        {:.6} ± {:.6}", report.best_value, report.best_stderr);
    let _ = writeln!(out, "generations  {}", report.generations());
    let _ = writeln!(out, "evaluations  {}", report.evaluations);
    let _ = writeln!(out, "seed         {}", config.seed);
    Ok((r, out))
}

fn eval(a: &EvalArgs, echo: &str) -> CliResult<(RunRecord, String)> {
    let (problem, belief) = load(&a.problem)?;
    let x = parse_point(&a.x)?;
    check_dim(&problem, &x)?;
    let est = expected_value(&problem, &x, &belief, a.mc, a.seed)?;

    let mut r = RunRecord::new(echo, &problem.name);
    r.config("belief", belief_label(&belief))
        .config("x", float_list(&x))
        .config("mc", a.mc)
        .config("seed", a.seed);
    r.result("mean", format!("{:?}", est.mean))
        .result("stderr", format!("{:?}", est.stderr))
        .result("n", est.n_samples)
        .result("face_dim", est.face_dim)
        .result("proposals", est.n_proposals)
        .result("accepted", est.n_accepted);

    let mut out = String::new();
    let _ = writeln!(out, "problem      {}", problem.name);
    let _ = writeln!(out, "x            {}", show(&x));
    let _ = writeln!(out, "belief       {}", belief_label(&belief));
    let _ = writeln!(out, "estimate     {:.6} ± {:.6}", est.mean, est.stderr);
    let _ = writeln!(out, "samples      {} (seed {})", est.n_samples, a.seed);
    let _ = writeln!(out, "face dim     {}", est.face_dim);
    if est.n_proposals > 0 {
        let _ = writeln!(out, "acceptance   {:.4}", est.n_accepted as f64 / est.n_proposals as f64);
    }

    if a.oracle {
        let face = argmin_face(&problem.lower, &x, 0.0)?;
        if face.dim() <= 2 {
            let exact = exact_expectation(&face, &problem, &x, &belief)?;
            let diff = est.mean - exact;
            r.result("oracle", format!("{exact:?}"))
                .result("discrepancy", format!("{diff:?}"));
            let _ = writeln!(out, "oracle       {exact:.9}");
            if est.stderr > 0.0 {
                let _ = writeln!(out, "discrepancy  {diff:.3e} ({:.2} stderr)", diff / est.stderr);
            } else {
                let _ = writeln!(out, "discrepancy  {diff:.3e}");
            }
        } else {
            r.result("oracle", "unavailable");
            let _ = writeln!(out, "oracle       unavailable for face dimension {}", face.dim());
        }
        if problem.name == "example22" && matches!(belief, BeliefSpec::Neutral) {
            if let Ok(v) = explicit_phi_n_example22(&x) {
                r.result("closed_form", format!("{v:?}"));
                let _ = writeln!(out, "closed form  {v:.9}");
            }
        }
    }
    Ok((r, out))
}

fn sample(a: &SampleArgs, echo: &str) -> CliResult<(RunRecord, String)> {
    let (problem, _) = load(&a.problem)?;
    let x = parse_point(&a.x)?;
    check_dim(&problem, &x)?;
    if !domain_contains(&problem.lower, &x)? {
        return Err(Error::OutsideDomain(x).into());
    }
    let face = argmin_face(&problem.lower, &x, 0.0)?;
    let batch = sample_uniform(&face, a.count, a.seed)?;

    let mut r = RunRecord::new(echo, &problem.name);
    r.config("x", float_list(&x)).config("n", a.count).config("seed", a.seed);
    r.result("dim", face.dim())
        .result("acceptance_rate", format!("{:?}", batch.stats.acceptance_rate()))
        .result("hit_and_run", batch.stats.hit_and_run);

    let mut out = String::with_capacity(a.count * 48);
    let _ = writeln!(out, "# problem {}", problem.name);
    let _ = writeln!(out, "# x {}", float_list(&x));
    let _ = writeln!(out, "# dim {}", face.dim());
    let _ = writeln!(out, "# acceptance_rate {:.6}", batch.stats.acceptance_rate());
    let _ = writeln!(out, "# hit_and_run {}", batch.stats.hit_and_run);
    let _ = writeln!(out, "# seed {}", a.seed);
    for y in &batch.points {
        let line: Vec<String> = y.iter().map(|v| sig17(*v)).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    Ok((r, out))
}

/// Plain decimal with 17 significant digits.
pub fn sig17(v: f64) -> String {
    if v == 0.0 {
        return format!("{:.16}", 0.0);
    }
    let sci = format!("{v:.16e}");
    let exp: i32 = sci.rsplit('e').next().and_then(|e| e.parse().ok()).unwrap_or(0);
    let decimals = (16 - exp).max(0) as usize;
    format!("{v:.decimals$}")
}

struct CheckRow {
    name: &'static str,
    passed: Option<bool>,
    detail: String,
}

fn grid_points(bounds: &[(f64, f64)], g: usize) -> Vec<Vec<f64>> {
    let axis = |(lo, hi): (f64, f64)| -> Vec<f64> {
        if g < 2 {
            return vec![(lo + hi) / 2.0];
        }
        (0..g).map(|i| lo + (hi - lo) * i as f64 / (g - 1) as f64).collect()
    };
    match bounds {
        [b] => axis(*b).into_iter().map(|v| vec![v]).collect(),
        [b0, b1] => {
            let (u, v) = (axis(*b0), axis(*b1));
            u.iter().flat_map(|p| v.iter().map(move |q| vec![*p, *q])).collect()
        }
        _ => Vec::new(),
    }
}

struct GridEval {
    x: Vec<f64>,
    support_ok: bool,
    support: (f64, f64),
    oracle: Option<f64>,
    mc: Option<(f64, f64)>,
}

fn evaluate_grid_point(
    problem: &BilevelProblem,
    belief: &BeliefSpec,
    x: &[f64],
    mc: usize,
    seed: u64,
    index: u64,
) -> Result<GridEval, Error> {
    let face = argmin_face(&problem.lower, x, 0.0)?;
    let batch = sample_uniform(&face, 200, fixed_seed_stream(seed, 1, index))?;
    let report = support_check(problem, x, &batch.points)?;
    let scale = problem.lower.cost.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    let gap_tol = if scale == 0.0 {
        0.0
    } else {
        let value = lower_value(&problem.lower, x)?;
        scale * (face_slack(value / scale) + EPS_FEAS)
    };
    let support_ok = report.within(1e-7, gap_tol);
    let (oracle, estimate) = if face.dim() <= 2 {
        let exact = exact_expectation(&face, problem, x, belief)?;
        let est = expected_value_on_face(problem, &face, x, belief, mc, fixed_seed_stream(seed, 0, index))?;
        (Some(exact), Some((est.mean, est.stderr)))
    } else {
        (None, None)
    };
    Ok(GridEval {
        x: x.to_vec(),
        support_ok,
        support: (report.max_constraint_violation, report.max_optimality_gap),
        oracle,
        mc: estimate,
    })
}

fn check(a: &CheckArgs, echo: &str) -> CliResult<(RunRecord, String, usize)> {
    let (problem, belief) = load(&a.problem)?;
    let bounds = domain_box(&problem.lower)?;
    let mut rows: Vec<CheckRow> = Vec::new();
    let mut out = String::new();

    let mut candidates = Vec::new();
    for x in grid_points(&bounds, a.grid) {
        if domain_contains(&problem.lower, &x)? {
            candidates.push(x);
        }
    }
    let evals: Vec<Result<GridEval, Error>> = with_pool(a.threads, || {
        candidates
            .par_iter()
            .enumerate()
            .map(|(i, x)| evaluate_grid_point(&problem, &belief, x, a.mc, a.seed, i as u64))
            .collect()
    })?;
    let evals: Vec<GridEval> = evals.into_iter().collect::<Result<_, _>>()?;

    if evals.is_empty() {
        rows.push(CheckRow {
            name: "support",
            passed: None,
            detail: format!("no grid for leader dimension {}", problem.leader_dim()),
        });
        rows.push(CheckRow {
            name: "oracle-grid",
            passed: None,
            detail: "no grid".into(),
        });
    } else {
        let bad = evals.iter().filter(|e| !e.support_ok).count();
        let worst_v = evals.iter().map(|e| e.support.0).fold(0.0, f64::max) + 0.0;
        let worst_g = evals.iter().map(|e| e.support.1).fold(0.0, f64::max);
        rows.push(CheckRow {
            name: "support",
            passed: Some(bad == 0),
            detail: format!(
                "{} points, {bad} outside S(x); max violation {worst_v:.1e}, max gap {worst_g:.1e}",
                evals.len()
            ),
        });

        let mut compared = 0usize;
        let mut failed = Vec::new();
        let mut worst_z: f64 = 0.0;
        for e in &evals {
            let (Some(exact), Some((mean, se))) = (e.oracle, e.mc) else {
                continue;
            };
            compared += 1;
            let diff = (mean - exact).abs();
            let allowed = 5.0 * se + 1e-9 * (1.0 + exact.abs());
            if se > 0.0 {
                worst_z = worst_z.max(diff / se);
            }
            if diff > allowed {
                failed.push(e.x.clone());
            }
        }
        let skipped = evals.len() - compared;
        rows.push(CheckRow {
            name: "oracle-grid",
            passed: if compared == 0 { None } else { Some(failed.is_empty()) },
            detail: format!(
                "{compared} compared at 5 stderr, {skipped} skipped (face dim > 2), worst {worst_z:.2} stderr{}",
                if failed.is_empty() {
                    String::new()
                } else {
                    format!("; failing at {:?}", failed)
                }
            ),
        });
    }

    if problem.name == "example22" && problem.leader_dim() == 2 && matches!(belief, BeliefSpec::Neutral) {
        // Mirror images of each grid point must share the exact value.
        let mut worst: f64 = 0.0;
        let mut n = 0;
        for e in &evals {
            let Some(v) = e.oracle else { continue };
            let mirrored = [e.x[0].abs(), e.x[1].abs()];
            let face = argmin_face(&problem.lower, &mirrored, 0.0)?;
            let w = exact_expectation(&face, &problem, &mirrored, &belief)?;
            worst = worst.max((v - w).abs());
            n += 1;
        }
        rows.push(CheckRow {
            name: "symmetry",
            passed: Some(worst <= 1e-9),
            detail: format!("{n} points, max |phi(x) - phi(|x|)| = {worst:.1e}"),
        });

        let g = a.grid.max(2) - 1;
        let mut worst: f64 = 0.0;
        let mut n = 0;
        for i in 0..=g {
            for j in 0..=(g - i) {
                let x = [i as f64 / g as f64, j as f64 / g as f64];
                let face = argmin_face(&problem.lower, &x, 0.0)?;
                let exact = exact_expectation(&face, &problem, &x, &belief)?;
                let closed = explicit_phi_n_example22(&x)?;
                worst = worst.max((exact - closed).abs());
                n += 1;
            }
        }
        rows.push(CheckRow {
            name: "closed-form",
            passed: Some(worst <= 1e-3),
            detail: format!("{n} simplex points, max |oracle - formula| = {worst:.1e}"),
        });
    }

    let mut probe: Option<ProbeReport> = None;
    if let Some(src) = &a.path {
        let path = parse_path(src, problem.leader_dim())?;
        let report = continuity_probe(&problem.lower, &path, a.mc.max(2), a.seed, a.lipschitz)?;
        let changes: Vec<String> = report
            .dimension_changes
            .iter()
            .map(|c| {
                format!(
                    "{} -> {} between x = [{}] and [{}]",
                    c.from_dim,
                    c.to_dim,
                    show(&report.points[c.from_index].x),
                    show(&report.points[c.to_index].x)
                )
            })
            .collect();
        rows.push(CheckRow {
            name: "path",
            passed: Some(report.continuous()),
            detail: format!(
                "{} points, {} dimension change(s), {} jump(s) within a dimension",
                report.points.len(),
                changes.len(),
                report.violations.len()
            ),
        });
        probe = Some(report);
    }

    let mut r = RunRecord::new(echo, &problem.name);
    r.config("belief", belief_label(&belief))
        .config("grid", a.grid)
        .config("mc", a.mc)
        .config("seed", a.seed);
    if let Some(p) = &a.path {
        r.config("path", p).config("lipschitz", format!("{:?}", a.lipschitz));
    }
    let _ = writeln!(out, "problem  {}", problem.name);
    let _ = writeln!(out, "{:<12} {:<7} detail", "check", "status");
    for row in &rows {
        let status = match row.passed {
            Some(true) => "pass",
            Some(false) => "FAIL",
            None => "skipped",
        };
        let _ = writeln!(out, "{:<12} {:<7} {}", row.name, status, row.detail);
        r.result(&format!("check.{}", row.name), status)
            .result(&format!("detail.{}", row.name), &row.detail);
    }
    if let Some(report) = &probe {
        for (i, c) in report.dimension_changes.iter().enumerate() {
            let from = &report.points[c.from_index];
            let to = &report.points[c.to_index];
            let _ = writeln!(
                out,
                "  dimension {} -> {} between x = [{}] and [{}]; centroid [{}] -> [{}]",
                c.from_dim,
                c.to_dim,
                show(&from.x),
                show(&to.x),
                show(&from.centroid),
                show(&to.centroid)
            );
            r.result(
                &format!("path.change.{i}"),
                format!(
                    "{}->{} at {}|{} jump {}",
                    c.from_dim,
                    c.to_dim,
                    float_list(&from.x),
                    float_list(&to.x),
                    float_list(&c.jump)
                ),
            );
        }
        for (i, p) in report.points.iter().enumerate() {
            r.result(
                &format!("path.point.{i}"),
                format!("{}|{}|{}", float_list(&p.x), p.dim, float_list(&p.centroid)),
            );
        }
    }
    let failed = rows.iter().filter(|row| row.passed == Some(false)).count();
    Ok((r, out, failed))
}
