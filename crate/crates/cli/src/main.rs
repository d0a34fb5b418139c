//! `alphaspec` command-line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use alphaspec::io::{self, FmxReader, Report, RunManifest};
use alphaspec::probe::{self, AlphaAccuracy, LabeledFeatures, ProbeConfig};
use alphaspec::spectral::{self, CovarianceAccumulator, FitRange};
use alphaspec::synth::{self, Design, Solver, SynthConfig};
use alphaspec::{Error, Execution};

const BLOCK_ROWS: usize = 4096;

#[derive(Parser, Debug)]
#[command(
    name = "alphaspec",
    version,
    about = "Eigenspectrum decay estimation and power-law regression experiments"
)]
struct Cli {
    /// Run single-threaded.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate the eigenspectrum decay of a feature matrix.
    Alpha {
        #[command(subcommand)]
        command: AlphaCommand,
    },
    /// Dump the covariance eigenvalues of a feature matrix as CSV.
    Spectrum(SpectrumArgs),
    /// Synthetic power-law regression experiments.
    Synth {
        #[command(subcommand)]
        command: SynthCommand,
    },
    /// Linear readout probes.
    Probe {
        #[command(subcommand)]
        command: ProbeCommand,
    },
    /// Aggregate reports.
    Report {
        #[command(subcommand)]
        command: ReportCommand,
    },
}

#[derive(Subcommand, Debug)]
enum AlphaCommand {
    /// Fit lambda_i ~ i^-alpha to the covariance eigenvalues.
    Fit(FitArgs),
}

#[derive(Subcommand, Debug)]
enum SynthCommand {
    /// Train/test MSE against alpha at a fixed step budget.
    Sweep(SweepArgs),
    /// Convergence time against sample count.
    Scaling(ScalingArgs),
}

#[derive(Subcommand, Debug)]
enum ProbeCommand {
    /// Train a linear readout, optionally with train-label noise.
    Run(ProbeArgs),
}

#[derive(Subcommand, Debug)]
enum ReportCommand {
    /// Correlate alpha with probe accuracy across probe reports.
    Correlate(CorrelateArgs),
}

#[derive(Args, Debug, Serialize)]
struct SpectrumSource {
    /// Feature matrix, `.fmx` or `.csv`.
    #[arg(long)]
    input: PathBuf,

    /// Subtract the feature mean before forming the covariance.
    #[arg(long)]
    center: bool,

    /// Use the N x N Gram matrix instead of the D x D covariance.
    #[arg(long, conflicts_with = "center")]
    gram: bool,
}

#[derive(Args, Debug, Serialize)]
struct FitArgs {
    #[command(flatten)]
    source: SpectrumSource,

    /// First rank of the fit window (1-based).
    #[arg(long)]
    fit_lo: Option<usize>,

    /// Last rank of the fit window (1-based, inclusive).
    #[arg(long)]
    fit_hi: Option<usize>,

    /// Report path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct SpectrumArgs {
    #[command(flatten)]
    source: SpectrumSource,

    /// CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum DesignArg {
    Gaussian,
    Orthogonalized,
}

impl From<DesignArg> for Design {
    fn from(d: DesignArg) -> Self {
        match d {
            DesignArg::Gaussian => Design::Gaussian,
            DesignArg::Orthogonalized => Design::Orthogonalized,
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct SweepArgs {
    #[arg(long, value_parser = parse_list::<f64>, default_value = "0.25,0.5,1,1.5,2,3")]
    alphas: List<f64>,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 1000)]
    d: usize,
    /// Label noise standard deviation.
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    /// Gradient-descent step budget.
    #[arg(long, default_value_t = 5000)]
    steps: u64,
    /// Number of seeds, starting at `--seed`.
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.5)]
    eta_hat: f64,
    #[arg(long, value_enum, default_value_t = DesignArg::Gaussian)]
    design: DesignArg,
    /// Run gradient descent step by step instead of using the closed form.
    #[arg(long)]
    iterative: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the per-alpha summary as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct ScalingArgs {
    #[arg(long, value_parser = parse_list::<f64>, default_value = "0,1,2")]
    alphas: List<f64>,
    #[arg(long, value_parser = parse_list::<usize>, default_value = "25,50,100,200")]
    ns: List<usize>,
    #[arg(long, default_value_t = 400)]
    d: usize,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.5)]
    eta_hat: f64,
    /// Cells not converged within this many steps are censored.
    #[arg(long, default_value_t = 10_000_000)]
    max_steps: u64,
    #[arg(long, value_enum, default_value_t = DesignArg::Orthogonalized)]
    design: DesignArg,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write median convergence times as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct ProbeArgs {
    /// Feature matrix, `.fmx` or `.csv`.
    #[arg(long)]
    features: PathBuf,
    /// One integer class label per line.
    #[arg(long)]
    labels: PathBuf,
    /// Fraction of train labels to resample.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Held-out fraction.
    #[arg(long, default_value_t = 0.2)]
    test_frac: f64,
    /// Class count; defaults to the largest label plus one.
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 500)]
    epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    /// Label carried into correlation reports; defaults to the features file stem.
    #[arg(long)]
    tag: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct CorrelateArgs {
    /// Comma-separated probe reports.
    #[arg(long = "in", value_parser = parse_list::<PathBuf>)]
    inputs: List<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the (alpha, accuracy) pairs as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(transparent)]
struct List<T>(Vec<T>);

/// Parses `a,b,c`, naming the 1-based position of any empty or bad token.
fn parse_list<T: FromStr>(s: &str) -> Result<List<T>, String>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .enumerate()
        .map(|(i, tok)| {
            let tok = tok.trim();
            if tok.is_empty() {
                return Err(format!("empty value at position {} in '{s}'", i + 1));
            }
            tok.parse::<T>()
                .map_err(|e| format!("bad value '{tok}' at position {} in '{s}': {e}", i + 1))
        })
        .collect::<Result<Vec<T>, String>>()
        .map(List)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    match run(cli.command, exec) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}

fn run(command: Command, exec: Execution) -> alphaspec::Result<()> {
    match command {
        Command::Alpha {
            command: AlphaCommand::Fit(args),
        } => alpha_fit(args, exec),
        Command::Spectrum(args) => spectrum(args, exec),
        Command::Synth {
            command: SynthCommand::Sweep(args),
        } => sweep(args, exec),
        Command::Synth {
            command: SynthCommand::Scaling(args),
        } => scaling(args, exec),
        Command::Probe {
            command: ProbeCommand::Run(args),
        } => probe_run(args),
        Command::Report {
            command: ReportCommand::Correlate(args),
        } => correlate(args),
    }
}

fn emit<T: Serialize>(out: Option<&Path>, manifest: RunManifest, result: T) -> alphaspec::Result<()> {
    let report = Report {
        manifest: manifest.finish(),
        result,
    };
    match out {
        Some(path) => io::write_json_atomic(path, &report),
        None => {
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Eigenvalues of the input plus the sample count. fmx inputs on the
/// covariance path are streamed in row blocks.
fn load_spectrum(src: &SpectrumSource, exec: Execution) -> alphaspec::Result<(spectral::Eigenspectrum, u64, usize)> {
    if src.gram {
        let feats = io::read_features(&src.input)?;
        let (n, d) = (feats.rows() as u64, feats.cols());
        return Ok((spectral::eigenspectrum_gram(&feats)?, n, d));
    }
    let mut acc: Option<CovarianceAccumulator> = None;
    let mut feed = |block: &alphaspec::FeatureMatrix| -> alphaspec::Result<()> {
        let a = match acc.as_mut() {
            Some(a) => a,
            None => acc.insert(
                CovarianceAccumulator::new(block.cols())?
                    .centered(src.center)
                    .with_execution(exec),
            ),
        };
        a.accumulate_batch(block)
    };
    if is_csv(&src.input) {
        feed(&io::read_csv_features(&src.input)?)?;
    } else {
        let mut reader = FmxReader::open(&src.input)?;
        while let Some(block) = reader.next_block(BLOCK_ROWS)? {
            feed(&block)?;
        }
    }
    let acc = acc.expect("readers yield at least one row");
    let cov = acc.finalize()?;
    Ok((spectral::eigenspectrum(&cov, acc.count())?, acc.count(), acc.dim()))
}

fn alpha_fit(args: FitArgs, exec: Execution) -> alphaspec::Result<()> {
    let mut manifest = RunManifest::start("alpha fit", &args, None)?;
    manifest.add_input(&args.source.input)?;
    let (spec, n, d) = load_spectrum(&args.source, exec)?;
    let fit = spectral::fit_power_law(&spec, FitRange::new(args.fit_lo, args.fit_hi))?;
    if fit.is_weak() {
        eprintln!("warning: weak power-law fit (r2 = {:.3})", fit.r_squared);
    }
    emit(args.out.as_deref(), manifest, fit.record(n, d))
}

fn spectrum(args: SpectrumArgs, exec: Execution) -> alphaspec::Result<()> {
    let (spec, _, _) = load_spectrum(&args.source, exec)?;
    let rows: Vec<Vec<String>> = spec
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| vec![(i + 1).to_string(), v.to_string()])
        .collect();
    match &args.out {
        Some(path) => io::write_table_csv(path, &["rank", "eigenvalue"], &rows),
        None => {
            println!("rank,eigenvalue");
            for r in rows {
                println!("{},{}", r[0], r[1]);
            }
            Ok(())
        }
    }
}

fn seed_list(first: u64, count: u64) -> alphaspec::Result<Vec<u64>> {
    if count == 0 {
        return Err(Error::InvalidConfig("--seeds must be at least 1".into()));
    }
    Ok((first..first + count).collect())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

fn sweep(args: SweepArgs, exec: Execution) -> alphaspec::Result<()> {
    let base = SynthConfig {
        n: args.n,
        d: args.d,
        noise_sd: args.noise,
        max_steps: args.steps,
        eta_hat: args.eta_hat,
        seed: args.seed,
        design: args.design.into(),
        ..SynthConfig::default()
    };
    let seeds = seed_list(args.seed, args.seeds)?;
    let solver = if args.iterative {
        Solver::Iterative
    } else {
        Solver::ClosedForm
    };
    let manifest = RunManifest::start("synth sweep", &args, Some(args.seed))?;
    let report = synth::benign_overfitting_sweep_with(exec, &args.alphas.0, &seeds, &base, solver)?;
    if let Some(path) = &args.csv {
        let rows: Vec<Vec<String>> = report
            .summary
            .iter()
            .map(|s| {
                vec![
                    s.alpha.to_string(),
                    fmt_opt(s.gd.map(|m| m.train_mse)),
                    fmt_opt(s.gd.map(|m| m.test_mse)),
                    fmt_opt(s.min_norm.map(|m| m.train_mse)),
                    fmt_opt(s.min_norm.map(|m| m.test_mse)),
                    s.cells_ok.to_string(),
                ]
            })
            .collect();
        let header = [
            "alpha",
            "gd_train_mse",
            "gd_test_mse",
            "min_norm_train_mse",
            "min_norm_test_mse",
            "cells_ok",
        ];
        io::write_table_csv(path, &header, &rows)?;
    }
    emit(args.out.as_deref(), manifest, report)
}

fn scaling(args: ScalingArgs, exec: Execution) -> alphaspec::Result<()> {
    let base = SynthConfig {
        d: args.d,
        noise_sd: args.noise,
        max_steps: args.max_steps,
        eta_hat: args.eta_hat,
        seed: args.seed,
        design: args.design.into(),
        ..SynthConfig::default()
    };
    let seeds = seed_list(args.seed, args.seeds)?;
    let manifest = RunManifest::start("synth scaling", &args, Some(args.seed))?;
    let report = synth::scaling_experiment_with(exec, &args.alphas.0, &args.ns.0, &seeds, &base)?;
    for f in &report.fits {
        if f.censored_cells > 0 {
            eprintln!(
                "warning: alpha = {}: {} censored cells excluded",
                f.alpha, f.censored_cells
            );
        }
    }
    if let Some(path) = &args.csv {
        let rows: Vec<Vec<String>> = report
            .fits
            .iter()
            .flat_map(|f| {
                f.median_steps
                    .iter()
                    .map(|&(n, t)| vec![f.alpha.to_string(), n.to_string(), fmt_opt(t), fmt_opt(f.slope)])
            })
            .collect();
        io::write_table_csv(path, &["alpha", "n", "median_steps", "slope"], &rows)?;
    }
    emit(args.out.as_deref(), manifest, report)
}

fn probe_run(args: ProbeArgs) -> alphaspec::Result<()> {
    let mut manifest = RunManifest::start("probe run", &args, Some(args.seed))?;
    manifest.add_input(&args.features)?;
    manifest.add_input(&args.labels)?;
    let features = io::read_features(&args.features)?;
    let labels = io::read_labels(&args.labels)?;
    let data = LabeledFeatures::random_split(features, labels, args.classes, args.test_frac, args.seed)?;
    let config = ProbeConfig {
        learning_rate: args.lr,
        epochs: args.epochs,
        noise_frac: args.noise,
        seed: args.seed,
        estimate_alpha: true,
    };
    let result = probe::train_linear_probe(&data, &config)?;
    let tag = args.tag.clone().unwrap_or_else(|| {
        args.features
            .file_stem()
            .map_or_else(String::new, |s| s.to_string_lossy().into_owned())
    });
    emit(args.out.as_deref(), manifest, ProbeOutput { tag, probe: result })
}

#[derive(Debug, Serialize, Deserialize)]
struct ProbeOutput {
    tag: String,
    probe: probe::ProbeResult,
}

#[derive(Debug, Serialize)]
struct Source {
    report: PathBuf,
    tag: String,
    /// Digests of the files the probe read, as recorded in its manifest.
    inputs: Vec<io::InputDigest>,
}

#[derive(Debug, Serialize)]
struct CorrelateOutput {
    sources: Vec<Source>,
    correlation: probe::CorrelationReport,
}

fn correlate(args: CorrelateArgs) -> alphaspec::Result<()> {
    let mut manifest = RunManifest::start("report correlate", &args, None)?;
    let mut pairs = Vec::new();
    let mut sources = Vec::new();
    for path in &args.inputs.0 {
        manifest.add_input(path)?;
        let bytes = std::fs::read(path).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        let report: Report<ProbeOutput> = serde_json::from_slice(&bytes)?;
        let Some(fit) = report.result.probe.alpha_of_features else {
            let why = report.result.probe.alpha_error.unwrap_or_default();
            return Err(Error::InvalidConfig(format!(
                "{}: no alpha estimate ({why})",
                path.display()
            )));
        };
        pairs.push(AlphaAccuracy {
            alpha: fit.alpha,
            accuracy: report.result.probe.test_acc,
            tag: report.result.tag.clone(),
        });
        sources.push(Source {
            report: path.clone(),
            tag: report.result.tag,
            inputs: report.manifest.inputs,
        });
    }
    let correlation = probe::correlate_alpha_accuracy(&pairs)?;
    if let Some(path) = &args.csv {
        let rows: Vec<Vec<String>> = pairs
            .iter()
            .map(|p| vec![p.tag.clone(), p.alpha.to_string(), p.accuracy.to_string()])
            .collect();
        io::write_table_csv(path, &["tag", "alpha", "accuracy"], &rows)?;
    }
    emit(args.out.as_deref(), manifest, CorrelateOutput { sources, correlation })
}
