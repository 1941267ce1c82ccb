mod args;
mod input;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use corrboot::harness::{
    self, rho_grid, BiasConfig, Checkpoint, CheckpointSink, MseConfig, NullSink, RedrawTotals,
    RowSink, StudyConfig,
};
use corrboot::intervals::ci_for_method;
use corrboot::resampling::bootstrap_replicates;
use corrboot::{Error, EstimatorKind, Family, Method, SpearmanSETable};
use serde::Serialize;

use args::{BiasArgs, CiArgs, Cli, Command, CoverageArgs, Dist, FamilyArgs, MseArgs, RhoArgs, RunArgs, SeTableArgs};

/// Failure classes mapped to exit codes.
enum Failure {
    /// Flags or input that do not describe a valid run (exit 2).
    Usage(Error),
    /// The computation itself failed (exit 1).
    Compute(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Compute(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Compute(e.into())
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ci(a) => cmd_ci(a),
        Command::Coverage(a) => cmd_coverage(a),
        Command::Bias(a) => cmd_bias(a),
        Command::Mse(a) => cmd_mse(a),
        Command::SeTable(a) => cmd_se_table(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Compute(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(Error::InvalidParameter(msg.into()))
}

fn families(args: &FamilyArgs) -> Vec<Family> {
    let poisson = Family::Poisson { lambda1: args.lambda1, lambda2: args.lambda2 };
    let negbin = Family::NegBin { r: args.r, ratio: args.ratio };
    match args.dist {
        Dist::Poisson => vec![poisson],
        Dist::Negbin => vec![negbin],
        Dist::Both => vec![poisson, negbin],
    }
}

fn rhos(args: &RhoArgs, default: impl FnOnce() -> Vec<f64>) -> std::result::Result<Vec<f64>, Failure> {
    if let Some(grid) = &args.rho_grid {
        let parts: Vec<f64> = grid
            .split(':')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| usage(format!("--rho-grid '{grid}' is not START:STOP:STEP")))?;
        if parts.len() != 3 {
            return Err(usage(format!("--rho-grid '{grid}' is not START:STOP:STEP")));
        }
        return rho_grid(parts[0], parts[1], parts[2]).map_err(Failure::Usage);
    }
    Ok(if args.rho.is_empty() { default() } else { args.rho.clone() })
}

fn or_default<T: Clone>(values: &[T], default: &[T]) -> Vec<T> {
    if values.is_empty() {
        default.to_vec()
    } else {
        values.to_vec()
    }
}

fn seed_or_random(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(rand::random)
}

fn workers(run: &RunArgs) -> usize {
    run.workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Prints the resolved configuration to stderr and, next to an output file,
/// as `<out>.config.json`.
fn echo_config<C: Serialize>(command: &str, config: &C, out: Option<&Path>) -> CmdResult {
    #[derive(Serialize)]
    struct Echo<'a, C> {
        command: &'a str,
        version: &'a str,
        config: &'a C,
    }
    let echo = Echo { command, version: env!("CARGO_PKG_VERSION"), config };
    let json = serde_json::to_string_pretty(&echo).map_err(Error::from)?;
    eprintln!("{json}");
    if let Some(out) = out {
        let mut path = out.as_os_str().to_owned();
        path.push(".config.json");
        std::fs::write(path, json + "\n")?;
    }
    Ok(())
}

fn output(out: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn print_summary(rows: usize, wall: std::time::Duration, redraws: RedrawTotals) {
    eprintln!(
        "rows: {rows}, wall time: {:.2}s, redraws: {} (datasets {}, bootstrap {}, studentized {})",
        wall.as_secs_f64(),
        redraws.total(),
        redraws.datasets,
        redraws.bootstrap,
        redraws.studentized
    );
}

#[derive(Serialize)]
struct CiConfig<'a> {
    input: &'a Path,
    estimator: EstimatorKind,
    methods: &'a [Method],
    alpha: f64,
    #[serde(rename = "B")]
    b: usize,
    seed: u64,
    spearman_se: Option<f64>,
}

fn cmd_ci(a: CiArgs) -> CmdResult {
    let methods = or_default(&a.methods, &Method::ALL);
    let seed = seed_or_random(a.seed);
    let config = CiConfig {
        input: &a.input,
        estimator: a.estimator,
        methods: &methods,
        alpha: a.alpha,
        b: a.b,
        seed,
        spearman_se: a.spearman_se,
    };
    if !(a.alpha > 0.0 && a.alpha <= 0.5) {
        return Err(usage(format!("--alpha must lie in (0, 0.5], got {}", a.alpha)));
    }
    if a.b < 1 {
        return Err(usage("--B must be at least 1"));
    }
    let text = std::fs::read_to_string(&a.input)?;
    let sample = input::parse_pairs(&text).map_err(Failure::Usage)?;

    let mut out = io::stdout().lock();
    writeln!(out, "# config: {}", serde_json::to_string(&config).map_err(Error::from)?)?;
    writeln!(out, "n: {}", sample.len())?;
    for e in EstimatorKind::ALL {
        match e.estimate(&sample) {
            Ok(v) => writeln!(out, "theta_hat {e}: {v}")?,
            Err(err) => writeln!(out, "theta_hat {e}: undefined ({err})")?,
        }
    }
    let theta = a.estimator.estimate(&sample)?;
    let dist = if methods.iter().any(Method::uses_bootstrap) {
        Some(bootstrap_replicates(&sample, &a.estimator, a.b, seed)?)
    } else {
        None
    };
    writeln!(out, "method,lower,upper,flags")?;
    for &method in &methods {
        match ci_for_method(&sample, a.estimator, theta, method, dist.as_ref(), a.spearman_se, a.alpha) {
            Ok(ci) => {
                let mut flags = Vec::new();
                if ci.exceeds_range {
                    flags.push("exceeds_range".to_string());
                }
                if ci.clamped_z0 {
                    flags.push("clamped_z0".to_string());
                }
                if ci.clamped_r {
                    flags.push("clamped_r".to_string());
                }
                if ci.redraws > 0 {
                    flags.push(format!("redraws={}", ci.redraws));
                }
                writeln!(out, "{method},{},{},{}", ci.lower, ci.upper, flags.join(";"))?;
            }
            Err(err) => writeln!(out, "{method},,,unavailable: {err}")?,
        }
    }
    if let Some(d) = &dist {
        if d.redraw_count() > 0 {
            writeln!(out, "# bootstrap redraws: {}", d.redraw_count())?;
        }
    }
    Ok(())
}

fn cmd_coverage(a: CoverageArgs) -> CmdResult {
    let config = StudyConfig {
        families: families(&a.family),
        rhos: rhos(&a.rho, || corrboot::DEFAULT_RHOS.to_vec())?,
        sample_sizes: or_default(&a.n, &corrboot::DEFAULT_SAMPLE_SIZES),
        estimators: or_default(&a.estimators, &[EstimatorKind::Pearson]),
        methods: or_default(&a.methods, &Method::ALL),
        n_sims: a.sims,
        b: a.b,
        alpha: a.alpha,
        seed: seed_or_random(a.run.seed),
        workers: workers(&a.run),
        se_reps: a.se_reps,
        allow_negbin_high_rho: a.allow_negbin_high_rho,
    };
    config.validate().map_err(Failure::Usage)?;
    echo_config("coverage", &config, a.run.out.as_deref())?;

    let mut se_table = match &a.se_table {
        Some(path) if path.exists() => SpearmanSETable::read_csv(path)?,
        _ => SpearmanSETable::new(),
    };
    let completed = match &a.checkpoint {
        Some(path) if a.resume && path.exists() => Checkpoint::load(path)?,
        _ => Checkpoint::default(),
    };
    if !completed.is_empty() {
        eprintln!("resuming: {} combinations restored from checkpoint", completed.len());
    }
    let mut sink: Box<dyn RowSink> = match &a.checkpoint {
        Some(path) => {
            if !a.resume && path.exists() {
                std::fs::remove_file(path)?;
            }
            Box::new(CheckpointSink::append(path)?)
        }
        None => Box::new(NullSink),
    };
    let result = harness::run_coverage_study_with(&config, &mut se_table, &completed, sink.as_mut());
    // keep whatever SEs were built even if a later combination failed
    if let Some(path) = &a.se_table {
        se_table.write_csv(path)?;
    }
    let summary = result?;
    harness::write_coverage_csv(output(a.run.out.as_deref())?, &summary.rows, a.clipped_length)?;
    print_summary(summary.rows_written, summary.wall_time, summary.redraws);
    Ok(())
}

fn cmd_bias(a: BiasArgs) -> CmdResult {
    let config = BiasConfig {
        families: families(&a.family),
        rhos: rhos(&a.rho, || corrboot::DEFAULT_RHOS.to_vec())?,
        estimators: or_default(&a.estimators, &EstimatorKind::ALL),
        pairs_per_rep: a.pairs_per_rep,
        reps: a.reps,
        seed: seed_or_random(a.run.seed),
        workers: workers(&a.run),
        allow_negbin_high_rho: a.allow_negbin_high_rho,
    };
    config.validate().map_err(Failure::Usage)?;
    echo_config("bias", &config, a.run.out.as_deref())?;
    let summary = harness::run_bias_study(&config)?;
    harness::write_bias_csv(output(a.run.out.as_deref())?, &summary.rows)?;
    print_summary(summary.rows_written, summary.wall_time, summary.redraws);
    Ok(())
}

fn cmd_mse(a: MseArgs) -> CmdResult {
    let config = MseConfig {
        families: families(&a.family),
        rhos: rhos(&a.rho, || rho_grid(0.05, 0.95, 0.01).expect("valid grid"))?,
        sample_sizes: or_default(&a.n, &corrboot::DEFAULT_SAMPLE_SIZES),
        estimators: or_default(&a.estimators, &EstimatorKind::ALL),
        reps: a.reps,
        seed: seed_or_random(a.run.seed),
        workers: workers(&a.run),
    };
    config.validate().map_err(Failure::Usage)?;
    echo_config("mse", &config, a.run.out.as_deref())?;
    let summary = harness::run_mse_study(&config)?;
    harness::write_mse_csv(output(a.run.out.as_deref())?, &summary.rows)?;
    print_summary(summary.rows_written, summary.wall_time, summary.redraws);
    Ok(())
}

#[derive(Serialize)]
struct SeTableConfig<'a> {
    families: &'a [Family],
    rhos: &'a [f64],
    sample_sizes: &'a [usize],
    reps: usize,
    seed: u64,
    workers: usize,
    allow_negbin_high_rho: bool,
}

fn cmd_se_table(a: SeTableArgs) -> CmdResult {
    let config = StudyConfig {
        families: families(&a.family),
        rhos: rhos(&a.rho, || corrboot::DEFAULT_RHOS.to_vec())?,
        sample_sizes: or_default(&a.n, &corrboot::DEFAULT_SAMPLE_SIZES),
        se_reps: a.reps,
        seed: seed_or_random(a.run.seed),
        workers: workers(&a.run),
        allow_negbin_high_rho: a.allow_negbin_high_rho,
        ..StudyConfig::default()
    };
    config.validate().map_err(Failure::Usage)?;
    let echo = SeTableConfig {
        families: &config.families,
        rhos: &config.rhos,
        sample_sizes: &config.sample_sizes,
        reps: config.se_reps,
        seed: config.seed,
        workers: config.workers,
        allow_negbin_high_rho: config.allow_negbin_high_rho,
    };
    echo_config("se-table", &echo, a.run.out.as_deref())?;

    let start = std::time::Instant::now();
    let mut table = match &a.run.out {
        Some(path) if path.exists() => SpearmanSETable::read_csv(path)?,
        _ => SpearmanSETable::new(),
    };
    let built = harness::build_se_table(&config, &mut table)?;
    table.write_csv_to(output(a.run.out.as_deref())?)?;
    eprintln!("built {built} of {} entries", table.entries().len());
    print_summary(table.entries().len(), start.elapsed(), RedrawTotals::default());
    Ok(())
}
