//! `carleman`: analyze an operator family, construct the kernels of its
//! unitarily equivalent integral operators, and verify them.
//!
//! Exit status: 0 success, 1 pipeline failure or failed verification,
//! 2 usage error, 3 configuration error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use carleman_core::config::ConfigError;
use carleman_core::verify::{verify_construction, Status};
use carleman_core::{output, pipeline, Error, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "carleman", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decay profile and e-selection report.
    Analyze(RunArgs),
    /// Full construction: schedules, decomposition, Schmidt data, kernels.
    Construct(RunArgs),
    /// Construction followed by the verification suite.
    Verify(RunArgs),
    /// Tables of the mother wavelet and its derivatives.
    Wavelet(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Run configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "carleman-out")]
    out: PathBuf,
    /// Half-width L of the sampling grid [-L, L].
    #[arg(long)]
    grid_extent: Option<f64>,
    /// Grid step.
    #[arg(long)]
    grid_step: Option<f64>,
    /// Derivative order budget of the kernel fields.
    #[arg(long)]
    orders: Option<usize>,
    /// Seed for the random preset and the verification samples.
    #[arg(long)]
    seed: Option<u64>,
}

fn invalid(key: &str, value: String, reason: &str) -> Error {
    ConfigError::InvalidValue {
        section: "command line".into(),
        key: key.into(),
        value,
        reason: reason.into(),
    }
    .into()
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig, Error> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(extent) = self.grid_extent {
            if !(extent > 0.0 && extent.is_finite()) {
                return Err(invalid("--grid-extent", extent.to_string(), "must be positive"));
            }
            cfg.grid.extent = extent;
        }
        if let Some(step) = self.grid_step {
            if !(step > 0.0 && step.is_finite()) {
                return Err(invalid("--grid-step", step.to_string(), "must be positive"));
            }
            cfg.grid.step = step;
        }
        if let Some(orders) = self.orders {
            if orders > cfg.schedule.i_max {
                return Err(invalid("--orders", orders.to_string(), "exceeds I_max"));
            }
            cfg.grid.orders = Some(orders);
        }
        if let Some(seed) = self.seed {
            cfg.family.seed = seed;
            cfg.verify.seed = seed;
        }
        pipeline::grid_for(&cfg, cfg.grid.extent)?;
        Ok(cfg)
    }
}

fn analyze(cfg: &RunConfig, out: &Path) -> Result<bool, Error> {
    let analysis = pipeline::analyze(cfg)?;
    let path = output::write_analysis(out, cfg, &analysis)?;
    let sel = &analysis.selection;
    println!("family       {}", analysis.family.label());
    println!("e-selection  {:?}", sel.indices);
    println!("M            {:.6} (ceiling {:.6})", sel.m, sel.m_ceiling);
    println!("report       {}", path.display());
    Ok(true)
}

fn construct(cfg: &RunConfig, out: &Path) -> Result<pipeline::Construction, Error> {
    let c = pipeline::construct(cfg)?;
    let manifest = output::write_construction(out, &c)?;
    println!("family       {}", c.analysis.family.label());
    println!("e-selection  {:?}", c.analysis.selection.indices);
    println!("x-selection  {:?}", c.frames.x_positions());
    println!("shell radius {}", c.enumeration.radius());
    for f in manifest.files.iter().filter(|f| f.kind == "kernel") {
        println!("kernel       {}", out.join(&f.path).display());
    }
    println!("manifest     {}", out.join("manifest.json").display());
    Ok(c)
}

fn verify(cfg: &RunConfig, out: &Path) -> Result<bool, Error> {
    let c = construct(cfg, out)?;
    let report = verify_construction(&c)?;
    output::write_verification(out, &report)?;
    for check in &report.checks {
        let status = match check.status {
            Status::Pass => "pass",
            Status::Fail => "FAIL",
            Status::Skip => "skip",
        };
        println!(
            "{status}  {:<34} {:>12.4e}  tol {:>10.3e}  {}",
            check.name, check.measured, check.tolerance, check.message
        );
    }
    println!(
        "verdict: {} ({} passed, {} failed, {} skipped)",
        if report.passed() { "pass" } else { "fail" },
        report.passed,
        report.failed,
        report.skipped
    );
    Ok(report.passed())
}

fn wavelet(cfg: &RunConfig, out: &Path) -> Result<bool, Error> {
    let mother = pipeline::mother_wavelet(cfg)?;
    let grid = pipeline::grid_for(cfg, cfg.grid.extent)?;
    for path in output::write_wavelet(out, &mother, &grid)? {
        println!("{}", path.display());
    }
    Ok(true)
}

type Step = fn(&RunConfig, &Path) -> Result<bool, Error>;

fn run(command: &Command) -> Result<bool, Error> {
    let (args, step): (&RunArgs, Step) = match command {
        Command::Analyze(a) => (a, analyze),
        Command::Construct(a) => (a, |cfg, out| construct(cfg, out).map(|_| true)),
        Command::Verify(a) => (a, verify),
        Command::Wavelet(a) => (a, wavelet),
    };
    let cfg = args.load()?;
    step(&cfg, &args.out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 3 } else { 1 })
        }
    }
}
