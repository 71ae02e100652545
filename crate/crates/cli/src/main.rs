use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use weakdep_core::coefficients::write_profile_csv;
use weakdep_core::estimation::{self, EstimateRow, Workers};
use weakdep_core::harness::{self, DeltaFamily, ExperimentConfig};
use weakdep_core::processes::{self, ObservableF, ObservableKind, ProcessModel};
use weakdep_core::rng::derive_seed;
use weakdep_core::Error;

/// Deviation bounds for weakly dependent sequences, and Monte Carlo checks
/// of them.
#[derive(Parser)]
#[command(name = "weakdep", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate every threshold over an x grid, without simulation.
    Bounds(BoundsArgs),
    /// Write a model's dependence profile.
    Profile(ProfileArgs),
    /// Write one trajectory, or one coupled block with --coupled-j/--coupled-r.
    Simulate(SimulateArgs),
    /// Monte Carlo block variances.
    EstimateVariance(EstimateVarianceArgs),
    /// Largest coupled-block distances per block length and split point.
    EstimateCoupling(EstimateCouplingArgs),
    /// Run a verification experiment from a JSON config.
    Verify(VerifyArgs),
    /// Block-size growth as the target variance shrinks.
    Asymptotics(AsymptoticsArgs),
}

#[derive(Args)]
struct ModelArg {
    /// iid-uniform, doubling-map, lipschitz-kernel:K, bernoulli-shift:T[:M],
    /// infinite-memory:S:R[:M]
    #[arg(long, default_value = "doubling-map")]
    model: ProcessModel,
}

#[derive(Args)]
struct Output {
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Output {
    fn open(&self) -> Result<Box<dyn Write>, Error> {
        Ok(match &self.out {
            Some(path) => Box::new(BufWriter::new(File::create(path).map_err(|source| {
                Error::Io {
                    path: path.clone(),
                    source,
                }
            })?)),
            None => Box::new(io::stdout().lock()),
        })
    }

    fn path(&self) -> PathBuf {
        self.out
            .clone()
            .unwrap_or_else(|| PathBuf::from("<stdout>"))
    }
}

#[derive(Args)]
struct Pool {
    /// Worker threads; 0 uses every logical processor.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

impl Pool {
    fn workers(&self) -> Result<Workers, Error> {
        Workers::new(self.threads)
    }
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    model: ModelArg,
    /// identity, cosine:W or zero
    #[arg(long, default_value = "identity")]
    observable: ObservableKind,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// `0.5,1,2` or `start:stop:step`
    #[arg(long)]
    x_grid: String,
    /// Replications for the variance profile when no closed form exists.
    #[arg(long, default_value_t = 10_000)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    pool: Pool,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct ProfileArgs {
    #[command(flatten)]
    model: ModelArg,
    #[arg(long, default_value_t = 64)]
    n: usize,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArg,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Split index of a coupled block.
    #[arg(long, requires = "coupled_r")]
    coupled_j: Option<usize>,
    /// Half-length of a coupled block.
    #[arg(long, requires = "coupled_j")]
    coupled_r: Option<usize>,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct EstimateVarianceArgs {
    #[command(flatten)]
    model: ModelArg,
    #[arg(long, default_value = "identity")]
    observable: ObservableKind,
    /// Estimate block lengths 1..=n unless --k-list is given.
    #[arg(long, default_value_t = 64)]
    n: usize,
    /// Comma-separated block lengths.
    #[arg(long)]
    k_list: Option<String>,
    #[arg(long, default_value_t = 10_000)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    pool: Pool,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct EstimateCouplingArgs {
    #[command(flatten)]
    model: ModelArg,
    /// Block half-lengths 1..=r-max.
    #[arg(long, default_value_t = 20)]
    r_max: usize,
    /// Comma-separated split points.
    #[arg(long, default_value = "1,100,500")]
    j_list: String,
    #[arg(long, default_value_t = 10_000)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    pool: Pool,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct VerifyArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    pool: Pool,
    /// Report path; overrides the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AsymptoticsArgs {
    /// geometric:C:RHO or polynomial:C:DECAY
    #[arg(long, default_value = "geometric:1:0.5")]
    family: DeltaFamily,
    /// Target variances, in x-grid syntax.
    #[arg(long, default_value = "1e-2,1e-3,1e-4,1e-5,1e-6,1e-7,1e-8")]
    targets: String,
    #[command(flatten)]
    out: Output,
}

fn csv_err(path: PathBuf) -> impl FnOnce(csv::Error) -> Error {
    move |source| Error::Csv { path, source }
}

fn parse_list(field: &'static str, text: &str) -> Result<Vec<usize>, Error> {
    text.split(',')
        .map(|s| {
            s.trim().parse::<usize>().map_err(|e| Error::Config {
                field: field.to_string(),
                reason: format!("`{s}`: {e}"),
            })
        })
        .collect()
}

fn variance_profile(
    model: &ProcessModel,
    f: &ObservableF,
    n: usize,
    reps: usize,
    seed: u64,
    workers: &Workers,
) -> Result<weakdep_core::VarianceProfile, Error> {
    match estimation::analytic_sigma_profile(model, f, n) {
        Some(p) => Ok(p),
        None => estimation::estimated_sigma_profile(model, f, n, reps, seed, workers),
    }
}

fn bounds(args: BoundsArgs) -> Result<ExitCode, Error> {
    let model = &args.model.model;
    let workers = args.pool.workers()?;
    let grid = harness::parse_grid(&args.x_grid)?;
    let f = ObservableF::for_model(args.observable, model, args.reps, derive_seed(args.seed, 1))?;
    let profile = model.dependence_profile(args.n)?;
    let variance = variance_profile(
        model,
        &f,
        args.n,
        args.reps,
        derive_seed(args.seed, 2),
        &workers,
    )?;
    let rows = harness::bounds_table(&grid, args.n, &profile, &variance)?;
    harness::write_bounds_table(&rows, args.out.open()?).map_err(csv_err(args.out.path()))?;
    Ok(ExitCode::SUCCESS)
}

fn profile(args: ProfileArgs) -> Result<ExitCode, Error> {
    let profile = args.model.model.dependence_profile(args.n)?;
    write_profile_csv(&profile, args.out.open()?).map_err(csv_err(args.out.path()))?;
    Ok(ExitCode::SUCCESS)
}

fn simulate(args: SimulateArgs) -> Result<ExitCode, Error> {
    let model = &args.model.model;
    let out = args.out.open()?;
    let written = match (args.coupled_j, args.coupled_r) {
        (Some(j), Some(r)) => {
            let horizon = args.n.max(2 * r + j - 1);
            processes::simulate_coupled_block(model, j, r, horizon, args.seed)?.write_csv(out)
        }
        _ => processes::write_trajectory_csv(&processes::simulate(model, args.n, args.seed)?, out),
    };
    written.map_err(csv_err(args.out.path()))?;
    Ok(ExitCode::SUCCESS)
}

fn estimate_variance(args: EstimateVarianceArgs) -> Result<ExitCode, Error> {
    let model = &args.model.model;
    let workers = args.pool.workers()?;
    let k_list = match &args.k_list {
        Some(text) => parse_list("k_list", text)?,
        None => (1..=args.n).collect(),
    };
    let f = ObservableF::for_model(args.observable, model, args.reps, derive_seed(args.seed, 1))?;
    let estimates = estimation::estimate_sigma_profile(
        model,
        &f,
        &k_list,
        args.reps,
        derive_seed(args.seed, 2),
        &workers,
    )?;
    let rows: Vec<EstimateRow> = estimates
        .iter()
        .map(|e| EstimateRow::sigma(model, &f, e, args.seed))
        .collect();
    estimation::write_estimate_rows(&rows, args.out.open()?).map_err(csv_err(args.out.path()))?;
    Ok(ExitCode::SUCCESS)
}

fn estimate_coupling(args: EstimateCouplingArgs) -> Result<ExitCode, Error> {
    let model = &args.model.model;
    let workers = args.pool.workers()?;
    let j_list = parse_list("j_list", &args.j_list)?;
    let r_list: Vec<usize> = (1..=args.r_max).collect();
    let profile = model.dependence_profile(args.r_max.max(1))?;
    let estimates = estimation::estimate_coupling_delta(
        model, &r_list, &j_list, args.reps, None, args.seed, &workers,
    )?;
    let mut w = csv::Writer::from_writer(args.out.open()?);
    let path = args.out.path();
    let write = |w: &mut csv::Writer<Box<dyn Write>>| -> csv::Result<()> {
        w.write_record([
            "r",
            "j",
            "reps",
            "max_distance_sum",
            "delta_witness",
            "profile_delta",
        ])?;
        for e in &estimates {
            w.write_record([
                e.r.to_string(),
                e.j.to_string(),
                e.reps.to_string(),
                e.max_distance_sum.to_string(),
                e.delta_witness().to_string(),
                profile.delta(e.r).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    };
    write(&mut w).map_err(csv_err(path))?;
    Ok(ExitCode::SUCCESS)
}

fn verify(args: VerifyArgs) -> Result<ExitCode, Error> {
    let config = ExperimentConfig::load(&args.config)?;
    let workers = args.pool.workers()?;
    let run = harness::run_verification(&config, &workers)?;
    match args.out.as_deref().or(config.output.as_deref()) {
        Some(path) => {
            harness::emit_report(&run.rows, path)?;
            harness::emit_summary(&run.summary, &harness::summary_path(path))?;
        }
        None => {
            harness::write_report(&run.rows, io::stdout().lock())
                .map_err(csv_err(PathBuf::from("<stdout>")))?;
        }
    }
    let failed = run
        .rows
        .iter()
        .filter(|r| r.verdict == weakdep_core::Verdict::Fail)
        .count();
    eprintln!(
        "{} rows, {failed} failed; variance source: {}",
        run.rows.len(),
        run.summary
            .variance_source
            .map_or("unused".to_string(), |s| format!("{s:?}").to_lowercase())
    );
    Ok(if run.any_failed() {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn asymptotics(args: AsymptoticsArgs) -> Result<ExitCode, Error> {
    let targets = harness::parse_grid(&args.targets)?;
    let rows = harness::run_blocksize_asymptotics(&args.family, &targets)?;
    harness::write_asymptotics(&args.family, &rows, args.out.open()?)
        .map_err(csv_err(args.out.path()))?;
    if let Some(spread) = harness::ratio_spread(&rows) {
        eprintln!("ratio spread: {:.2}%", 100.0 * spread);
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Bounds(a) => bounds(a),
        Command::Profile(a) => profile(a),
        Command::Simulate(a) => simulate(a),
        Command::EstimateVariance(a) => estimate_variance(a),
        Command::EstimateCoupling(a) => estimate_coupling(a),
        Command::Verify(a) => verify(a),
        Command::Asymptotics(a) => asymptotics(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
