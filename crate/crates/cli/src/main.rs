//! `hdmr`: reapproximate sample sets, reconstruct vMF mixtures, run the
//! filter benchmark and the oracle suites.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hdmr::harness::{self, Benchmark};
use hdmr::io::{parse_samples, write_samples, RunConfig};
use hdmr::reapprox::hdmr_detailed;
use hdmr::reconstruct::{hellinger_s2, reconstruct};
use hdmr::{oracle, Error};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "hdmr", version, about = "Hyperspherical Dirac mixture reapproximation")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compress a sample set to n equally weighted points.
    Reapprox(ReapproxArgs),
    /// Reapproximate, then fit a shared-concentration vMF mixture.
    Reconstruct(ReconstructArgs),
    /// Monte Carlo filter comparison; the CSV leaves runtimes blank.
    FilterSim(SimArgs),
    /// Same runs as filter-sim with wall-clock runtimes filled in.
    Bench(SimArgs),
    /// Run a reference-value suite.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ReapproxArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Target size.
    #[arg(long)]
    n: Option<usize>,
    /// Weighting parameter, overriding the size-based schedule.
    #[arg(long)]
    epsilon: Option<f64>,
    /// JSON report path; defaults to `<out>.report.json`.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ReconstructArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long = "in")]
    input: PathBuf,
    /// Mixture JSON output.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Args)]
struct SimArgs {
    #[command(flatten)]
    common: Common,
    /// Results CSV; the full results go to `<out>.json`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    /// Raise the defaults to 5000 runs and the full noise-set list.
    #[arg(long)]
    full_scale: bool,
}

#[derive(Args)]
struct OracleArgs {
    /// One of hcvmd-unit, derivatives, metric, mle.
    suite: String,
    /// JSON artifact path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Core(Error),
    Invalid(Vec<String>),
    Failed(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn read_to_string(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))
}

fn load_config(common: &Common) -> CliResult<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => toml::from_str::<RunConfig>(&read_to_string(p)?)
            .map_err(|e| CliError::Failed(format!("{}: {e}", p.display())))?,
        None => RunConfig::default(),
    };
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    cfg.resolve_seed();
    Ok(cfg)
}

fn check(cfg: &RunConfig) -> CliResult<()> {
    let errs = cfg.validate();
    if errs.is_empty() {
        Ok(())
    } else {
        Err(CliError::Invalid(errs))
    }
}

fn read_samples(path: &Path) -> CliResult<hdmr::DiracMixture> {
    parse_samples(&read_to_string(path)?).map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, contents: &str) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    // temp files are created 0600
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(std::fs::Permissions::from_mode(0o644))?;
    }
    tmp.persist(path).map_err(|e| CliError::Core(e.error.into()))?;
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(Error::from)?;
    s.push('\n');
    Ok(s)
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

#[derive(Serialize)]
struct ReapproxReport<'a> {
    input: String,
    source_size: usize,
    n_target: usize,
    seed: u64,
    epsilon: f64,
    distance_before: f64,
    distance_after: f64,
    iterations: usize,
    termination: hdmr::rtr::Termination,
    used_fallback: bool,
    solve: &'a hdmr::rtr::SolveReport,
    config: &'a RunConfig,
}

fn cmd_reapprox(a: &ReapproxArgs) -> CliResult<()> {
    let mut cfg = load_config(&a.common)?;
    if let Some(n) = a.n {
        cfg.reapprox.n_target = n;
    }
    if a.epsilon.is_some() {
        cfg.reapprox.epsilon_override = a.epsilon;
    }
    check(&cfg)?;
    let source = read_samples(&a.input)?;
    log::info!("resolved config: {cfg:?}");
    let out = hdmr_detailed(&source, &cfg.reapprox, None)?;
    let report = ReapproxReport {
        input: a.input.display().to_string(),
        source_size: source.len(),
        n_target: cfg.reapprox.n_target,
        seed: cfg.reapprox.seed,
        epsilon: out.epsilon,
        distance_before: out.distance_before,
        distance_after: out.distance_after,
        iterations: out.report.iterations,
        termination: out.report.termination,
        used_fallback: out.used_fallback,
        solve: &out.report,
        config: &cfg,
    };
    write_atomic(&a.out, &write_samples(&out.target, false))?;
    let report_path = a.report.clone().unwrap_or_else(|| with_suffix(&a.out, ".report.json"));
    write_atomic(&report_path, &to_json(&report)?)?;
    println!(
        "{} -> {} points, D {:.6e} -> {:.6e} in {} iterations",
        source.len(),
        out.target.len(),
        out.distance_before,
        out.distance_after,
        out.report.iterations
    );
    Ok(())
}

#[derive(Serialize)]
struct ReconstructReport<'a> {
    means: Vec<Vec<f64>>,
    lambda: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    hellinger: Option<f64>,
    seed: u64,
    epsilon: f64,
    mle: &'a hdmr::reconstruct::MleState,
    solve: &'a hdmr::rtr::SolveReport,
    config: &'a RunConfig,
}

fn cmd_reconstruct(a: &ReconstructArgs) -> CliResult<()> {
    let mut cfg = load_config(&a.common)?;
    if let Some(n) = a.n {
        cfg.reapprox.n_target = n;
    }
    if a.epsilon.is_some() {
        cfg.reapprox.epsilon_override = a.epsilon;
    }
    check(&cfg)?;
    let source = read_samples(&a.input)?;
    log::info!("resolved config: {cfg:?}");
    let rec = reconstruct(&source, &cfg.reapprox)?;
    let hellinger = match &cfg.reconstruct.reference {
        Some(r) => {
            let reference = r.resolve()?;
            if reference.dim() != 3 || source.dim() != 3 {
                return Err(CliError::Failed(
                    "the Hellinger distance is only available on S² (d = 3)".into(),
                ));
            }
            Some(hellinger_s2(
                |x| rec.mixture.logpdf(x),
                |x| reference.logpdf(x),
                cfg.reconstruct.hellinger_lattice,
            ))
        }
        None => None,
    };
    let report = ReconstructReport {
        means: rec
            .mixture
            .means()
            .column_iter()
            .map(|c| c.iter().copied().collect())
            .collect(),
        lambda: rec.mixture.lambda(),
        hellinger,
        seed: cfg.reapprox.seed,
        epsilon: cfg.reapprox.epsilon(source.dim()),
        mle: &rec.mle,
        solve: &rec.solve,
        config: &cfg,
    };
    write_atomic(&a.out, &to_json(&report)?)?;
    match hellinger {
        Some(h) => println!(
            "{} means, lambda = {:.6}, H = {h:.6}",
            rec.mixture.len(),
            rec.mixture.lambda()
        ),
        None => println!("{} means, lambda = {:.6}", rec.mixture.len(), rec.mixture.lambda()),
    }
    Ok(())
}

fn cmd_sim(a: &SimArgs, keep_runtime: bool) -> CliResult<()> {
    let mut cfg = load_config(&a.common)?;
    if a.full_scale {
        let scaled = harness::SimConfig::full_scale();
        cfg.sim.num_runs = scaled.num_runs;
        cfg.sim.n_w_list = scaled.n_w_list;
    }
    if let Some(r) = a.runs {
        cfg.sim.num_runs = r;
    }
    if let Some(s) = a.steps {
        cfg.sim.num_steps = s;
    }
    check(&cfg)?;
    log::info!("resolved config: {cfg:?}");
    let mut bench: Benchmark = harness::benchmark(&cfg.sim)?;
    if !keep_runtime {
        bench = bench.without_runtime();
    }
    write_atomic(&a.out, &bench.to_csv())?;
    write_atomic(&with_suffix(&a.out, ".json"), &to_json(&bench)?)?;
    print!("{}", bench.to_csv());
    Ok(())
}

fn cmd_oracle(a: &OracleArgs) -> CliResult<()> {
    let report = oracle::run_suite(&a.suite)?;
    if let Some(first) = report.rows.first().and_then(|r| r.as_object()) {
        let keys: Vec<&String> = first.keys().collect();
        println!("{}", keys.iter().map(|k| k.as_str()).collect::<Vec<_>>().join("\t"));
        for row in &report.rows {
            let cells: Vec<String> = keys.iter().map(|k| row[k.as_str()].to_string()).collect();
            println!("{}", cells.join("\t"));
        }
    }
    println!(
        "suite {}: {}",
        report.suite,
        if report.passed { "pass" } else { "FAIL" }
    );
    if let Some(out) = &a.out {
        write_atomic(out, &to_json(&report)?)?;
    }
    if report.passed {
        Ok(())
    } else {
        Err(CliError::Failed(format!(
            "suite {} exceeded its tolerances",
            report.suite
        )))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match &cli.command {
        Command::Reapprox(a) => cmd_reapprox(a),
        Command::Reconstruct(a) => cmd_reconstruct(a),
        Command::FilterSim(a) => cmd_sim(a, false),
        Command::Bench(a) => cmd_sim(a, true),
        Command::Oracle(a) => cmd_oracle(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Invalid(errs)) => {
            eprintln!("error: invalid configuration:");
            for e in errs {
                eprintln!("  - {e}");
            }
            ExitCode::from(2)
        }
        Err(CliError::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
        Err(CliError::Failed(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
