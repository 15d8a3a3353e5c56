use clap::{Args, Parser, Subcommand, ValueEnum};
use qdcav::phonon_kernel::{calibrate_g1_abs, franck_condon, BathParams, PhononKernel};
use qdcav_sweep::check::check_config;
use qdcav_sweep::{calibrated_spec, compare_rows, emit, run_sweep, with_workers, EngineSel, Format, SweepSpec};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

/// Two quantum dots in a cavity with a phonon bath: steady-state sweeps.
#[derive(Parser)]
#[command(name = "qdcav", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write one row per grid point and engine.
    Sweep(RunArgs),
    /// Run a scenario with both engines and report their differences.
    Compare(RunArgs),
    /// Fit g1_abs so that <B> hits a target at a temperature.
    Calibrate {
        /// Scenario whose [bath] section supplies alpha_p and omega_b.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 5.0)]
        temperature: f64,
        #[arg(long, default_value_t = 0.9)]
        target: f64,
    },
    /// Run the invariant suite on one configuration of a scenario.
    Check {
        #[arg(long)]
        config: PathBuf,
        /// Axis value to check (default: first grid point).
        #[arg(long, allow_negative_numbers = true)]
        at: Option<f64>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum)]
    engine: Option<EngineArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Full,
    Sme,
    Both,
}

enum Failure {
    Spec(String),
    Partial(String),
}

fn load(args: &RunArgs) -> Result<SweepSpec, Failure> {
    let mut spec = SweepSpec::from_path(&args.config).map_err(|e| Failure::Spec(e.to_string()))?;
    if let Some(e) = args.engine {
        spec.engine = match e {
            EngineArg::Full => EngineSel::FullMe,
            EngineArg::Sme => EngineSel::Sme,
            EngineArg::Both => EngineSel::Both,
        };
    }
    if let Some(f) = args.format {
        spec.format = match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        };
    }
    spec.validate().map_err(|e| Failure::Spec(e.to_string()))?;
    Ok(spec)
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Failure::Spec(format!("{}: {e}", p.display())))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn io_err(e: io::Error) -> Failure {
    Failure::Spec(e.to_string())
}

fn sweep(args: RunArgs) -> Result<(), Failure> {
    let spec = load(&args)?;
    let rows = with_workers(args.workers, || run_sweep(&spec));
    emit(&rows, &spec.outputs, spec.format, sink(&args.out)?).map_err(io_err)?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        return Err(Failure::Partial(format!("{failed} of {} points failed", rows.len())));
    }
    Ok(())
}

fn compare(args: RunArgs) -> Result<(), Failure> {
    let mut spec = load(&args)?;
    spec.engine = EngineSel::Both;
    let rows = with_workers(args.workers, || run_sweep(&spec));
    let report = compare_rows(&rows);
    report.write_csv(sink(&args.out)?).map_err(io_err)?;
    eprintln!("{}", report.summary());
    if !report.failures.is_empty() {
        return Err(Failure::Partial(report.failures.join("\n")));
    }
    Ok(())
}

fn calibrate(config: Option<PathBuf>, temperature: f64, target: f64) -> Result<(), Failure> {
    let bath = match config {
        Some(p) => SweepSpec::from_path(&p).map_err(|e| Failure::Spec(e.to_string()))?.base.bath,
        None => BathParams::default(),
    };
    let g1_abs = calibrate_g1_abs(&bath, temperature, target).map_err(|e| Failure::Spec(e.to_string()))?;
    println!("g1_abs = {g1_abs:.6} ueV (<B>({temperature} K) = {target})");
    for t in [0.0, 5.0, 10.0, 20.0] {
        let b = franck_condon(&BathParams { temperature: t, g1_abs, ..bath }).map_err(|e| Failure::Spec(e.to_string()))?;
        println!("<B>({t:>4} K) = {b:.6}");
    }
    Ok(())
}

fn check(config: PathBuf, at: Option<f64>) -> Result<(), Failure> {
    let spec = SweepSpec::from_path(&config).map_err(|e| Failure::Spec(e.to_string()))?;
    let spec = calibrated_spec(&spec).map_err(Failure::Spec)?;
    let v = at.unwrap_or(spec.grid[0]);
    let cfg = spec.config_at(v);
    cfg.validate().map_err(|e| Failure::Spec(e.to_string()))?;
    let kernel = PhononKernel::new(cfg.bath).map_err(|e| Failure::Spec(e.to_string()))?;
    println!("{} = {v}", spec.axis);
    let report = check_config(&cfg, &kernel, spec.m_max).map_err(Failure::Partial)?;
    for c in &report.checks {
        println!("{c}");
    }
    for n in &report.notes {
        println!("note {n}");
    }
    if !report.passed() {
        return Err(Failure::Partial(format!("{} checks failed", report.failures().count())));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Sweep(a) => sweep(a),
        Command::Compare(a) => compare(a),
        Command::Calibrate { config, temperature, target } => calibrate(config, temperature, target),
        Command::Check { config, at } => check(config, at),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Spec(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Partial(m)) => {
            eprintln!("{m}");
            ExitCode::from(2)
        }
    }
}
