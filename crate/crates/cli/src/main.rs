use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::{fs, io};

use cellfree::harness::emit::{emit, Format};
use cellfree::harness::run::run;
use cellfree::harness::spec::{ExperimentSpec, Kind, Preset};
use cellfree::harness::validate::validate_moments;
use clap::{Args, Parser, Subcommand};

/// Cell-free massive MIMO downlink simulator.
#[derive(Parser)]
#[command(name = "cfsim", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the experiment described by a spec file (which must set `kind`).
    Simulate {
        spec: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// LoS link-count PMF.
    Pmf(Shortcut),
    /// Mean rate versus data SNR.
    SweepSnr(Shortcut),
    /// Per-user rate CDF.
    Cdf(Shortcut),
    /// Mean rate versus AP count.
    SweepDensity(Shortcut),
    /// Check the closed-form moments against the sampling oracle.
    Validate {
        #[arg(long, default_value_t = 20)]
        instances: u64,
        #[arg(long, default_value_t = 1_000_000)]
        trials: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Print every comparison, not only failures.
        #[arg(long)]
        verbose: bool,
    },
}

#[derive(Args)]
struct Shortcut {
    /// Optional spec file overriding preset values.
    spec: Option<PathBuf>,
    #[command(flatten)]
    opts: RunOpts,
}

#[derive(Args)]
struct RunOpts {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = default_workers())]
    workers: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value = "desk", value_parser = keyword::<Preset>)]
    preset: Preset,
    /// Comma-separated output formats.
    #[arg(long, value_delimiter = ',', default_value = "csv,svg", value_parser = keyword::<Format>)]
    format: Vec<Format>,
}

fn keyword<T: std::str::FromStr>(s: &str) -> Result<T, String> {
    s.parse().map_err(|_| format!("unknown value {s:?}"))
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

enum Failure {
    Config(String),
    Validation,
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

fn load(path: Option<&Path>, preset: Preset, kind: Option<Kind>) -> Result<ExperimentSpec, Failure> {
    let Some(path) = path else {
        return Ok(ExperimentSpec::preset(kind.expect("shortcut kind"), preset));
    };
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    ExperimentSpec::parse(&text, preset, kind).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn simulate(path: Option<&Path>, kind: Option<Kind>, o: &RunOpts) -> Result<(), Failure> {
    let mut spec = load(path, o.preset, kind)?;
    if let Some(s) = o.seed {
        spec.seed = s;
    }
    let results = run(&spec, o.workers).map_err(|e| Failure::Config(e.to_string()))?;
    for p in emit(&results, &spec, &o.out, &o.format)? {
        println!("{}", p.display());
    }
    let confirmed = results.total("jensen_confirmed");
    if confirmed > 0.0 {
        eprintln!("warning: {confirmed} confirmed bound-above-MC cases");
    }
    Ok(())
}

fn validate(instances: u64, trials: u64, seed: u64, verbose: bool) -> Result<(), Failure> {
    let cmp = validate_moments(seed, instances, trials);
    let first_fail = cmp.iter().filter(|c| !c.first_pass).count();
    let failed: Vec<_> = cmp.iter().filter(|c| !c.pass).collect();
    println!("{:>4} {:<14} {:<22} {:>14} {:>14} {:>11} result", "inst", "scheme", "field", "closed", "oracle", "stderr");
    for c in cmp.iter().filter(|c| verbose || !c.first_pass) {
        let verdict = match (c.first_pass, c.pass) {
            (true, _) => "PASS",
            (false, true) => "PASS (re-test)",
            (false, false) => "FAIL",
        };
        println!(
            "{:>4} {:<14} {:<22} {:>14.6e} {:>14.6e} {:>11.3e} {verdict}",
            c.instance,
            c.scheme.to_string(),
            c.field,
            c.closed,
            c.oracle.mean,
            c.oracle.stderr
        );
    }
    println!("{} comparisons, {first_fail} first-pass exceedances, {} failures", cmp.len(), failed.len());
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Validation)
    }
}

fn main() -> ExitCode {
    // Usage errors are configuration errors; exit code 2 is reserved for
    // validation failures.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.cmd {
        Cmd::Simulate { spec, opts } => simulate(Some(spec), None, opts),
        Cmd::Pmf(s) => simulate(s.spec.as_deref(), Some(Kind::LosPmf), &s.opts),
        Cmd::SweepSnr(s) => simulate(s.spec.as_deref(), Some(Kind::RateVsSnr), &s.opts),
        Cmd::Cdf(s) => simulate(s.spec.as_deref(), Some(Kind::RateCdf), &s.opts),
        Cmd::SweepDensity(s) => simulate(s.spec.as_deref(), Some(Kind::RateVsDensity), &s.opts),
        Cmd::Validate { instances, trials, seed, verbose } => validate(*instances, *trials, *seed, *verbose),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Validation) => ExitCode::from(2),
    }
}
