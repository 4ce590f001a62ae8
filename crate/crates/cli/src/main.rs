use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fracsub::harness::{
    default_golden_path, regenerate_golden, run, run_selftest, with_threads, CsvTable, ExperimentConfig,
    ExperimentKind, Overrides, GOLDEN,
};
use fracsub::Error;

/// Experiments for time-fractional Cauchy problems driven by inverse stable
/// subordinators.
///
/// Settings are resolved as: command-line flag, then config file, then
/// built-in defaults. The verb always decides which experiment runs.
#[derive(Parser, Debug)]
#[command(name = "fracsub", version)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand, Debug)]
enum Verb {
    /// Monte Carlo estimate of E f(X_{Z_T}).
    Solve(Common),
    /// Density of the endpoint against the reference density.
    Density(Common),
    /// Error ladder over step sizes with envelopes and running slopes.
    Converge(Common),
    /// Two-sided envelope sandwich of the reference density.
    BoundsCheck(Common),
    /// Rescaled CTRW against its scaling limit.
    CtrwDemo(Common),
    /// Fractional PDE residual of the reference density.
    Residual(Common),
    /// Golden-value and invariant suite.
    Selftest {
        #[command(flatten)]
        common: Common,
        /// Golden file to compare against (defaults to the shipped values).
        #[arg(long)]
        golden: Option<PathBuf>,
        /// Recompute the golden values, write them, then run the suite.
        #[arg(long)]
        regen_golden: bool,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

fn load(kind: ExperimentKind, common: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => toml_default(kind)?,
    };
    cfg.experiment = kind;
    cfg.apply(&Overrides {
        seed: common.seed,
        threads: common.threads,
        output: common.out.clone(),
    });
    Ok(cfg)
}

fn toml_default(kind: ExperimentKind) -> Result<ExperimentConfig, Error> {
    ExperimentConfig::from_toml(&format!("experiment = \"{}\"", kind.name()))
}

fn emit(table: &CsvTable, out: Option<&Path>) -> Result<(), Error> {
    match out {
        Some(p) => table.write(p),
        None => {
            print!("{}", table.render());
            Ok(())
        }
    }
}

fn execute(cli: Cli) -> Result<bool, Error> {
    let (kind, common) = match &cli.verb {
        Verb::Solve(c) => (ExperimentKind::Solve, c),
        Verb::Density(c) => (ExperimentKind::Density, c),
        Verb::Converge(c) => (ExperimentKind::Converge, c),
        Verb::BoundsCheck(c) => (ExperimentKind::BoundsCheck, c),
        Verb::CtrwDemo(c) => (ExperimentKind::CtrwDemo, c),
        Verb::Residual(c) => (ExperimentKind::Residual, c),
        Verb::Selftest { common, .. } => (ExperimentKind::Selftest, common),
    };
    let Format::Csv = common.format;
    let cfg = load(kind, common)?;
    cfg.validate()?;
    if let Verb::Selftest { golden, regen_golden, .. } = &cli.verb {
        let text = if *regen_golden {
            let text = with_threads(cfg.threads, regenerate_golden)?;
            let path = golden.clone().unwrap_or_else(default_golden_path);
            std::fs::write(&path, &text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            eprintln!("wrote {}", path.display());
            text
        } else if let Some(path) = golden {
            std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?
        } else {
            GOLDEN.to_string()
        };
        let report = with_threads(cfg.threads, || run_selftest(&text))?;
        emit(&report.to_table(cfg.hash()?, cfg.scheme.seed), cfg.output.as_deref())?;
        for name in report.failures() {
            eprintln!("FAIL {name}");
        }
        return Ok(report.passed());
    }
    let table = run(&cfg)?;
    emit(&table, cfg.output.as_deref())?;
    let failed = table.footer.iter().any(|f| f.contains("pass=false"));
    Ok(!failed)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
