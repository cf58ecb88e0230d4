//! The `synthfid` command line.
//!
//! Exit codes: 0 success, 2 usage or parse error, 3 numerical failure.

mod prompt;

pub use prompt::{describe, prompt_correlations};

use std::fs;
use std::io::{self, IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benchfns;
use crate::corrbounds::{Bounds, CorrelationSpec};
use crate::error::{Error, Result};
use crate::io as fmt;
use crate::linalg;
use crate::mogp::{self, FidelityDataset, FitConfig, GradientMode, KernelChoice, MogpModel, NoiseMode};
use crate::sampler::{self, PriorDraw, SyntheticSample};

/// Mixed into a sample seed to get an independent stream for random specs.
const SPEC_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Parser, Debug)]
#[command(name = "synthfid", version, about = "Synthetic fidelities with exact correlations to existing data")]
pub struct Cli {
    /// Seed for fit restarts, prior draws and random correlation vectors.
    #[arg(long, global = true, env = "SYNTHFID_SEED", default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fit a model to a dataset CSV and write a model archive.
    Fit {
        data: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        fit: FitArgs,
    },
    /// Draw synthetic fidelities from a fitted model.
    Sample {
        model: PathBuf,
        #[arg(short, long)]
        output_dir: PathBuf,
        #[command(flatten)]
        correlations: CorrelationArgs,
        #[arg(long, value_enum, default_value_t = PriorDrawArg::Matrix)]
        prior_draw: PriorDrawArg,
    },
    /// Print the live bounds after a partial correlation vector.
    Bounds {
        model: PathBuf,
        /// Entries chosen so far, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        chosen: Vec<f64>,
        #[arg(long, value_enum, default_value_t = PriorDrawArg::Matrix)]
        prior_draw: PriorDrawArg,
    },
    /// Grid a built-in function pair, fit it, and draw samples.
    Bench {
        #[arg(value_enum, required_unless_present = "benchmark")]
        name: Option<BenchName>,
        #[arg(long, value_enum, conflicts_with = "name")]
        benchmark: Option<BenchName>,
        /// Points per dimension (default 50 for liu, 20 for currin).
        #[arg(long)]
        points: Option<usize>,
        #[arg(short, long, default_value = "bench-out")]
        output_dir: PathBuf,
        #[command(flatten)]
        fit: FitArgs,
        #[command(flatten)]
        correlations: CorrelationArgs,
        #[arg(long, value_enum, default_value_t = PriorDrawArg::Matrix)]
        prior_draw: PriorDrawArg,
    },
    /// Check a dataset CSV and summarize it.
    Validate { data: PathBuf },
}

#[derive(Args, Debug, Clone)]
pub struct FitArgs {
    #[arg(long, value_enum, default_value_t = KernelArg::SpectralMixture)]
    pub kernel: KernelArg,
    /// Spectral mixture components.
    #[arg(long, default_value_t = 4)]
    pub mixtures: usize,
    #[arg(long, default_value_t = 8)]
    pub restarts: usize,
    #[arg(long, default_value_t = 200)]
    pub max_iters: usize,
    #[arg(long, value_enum, default_value_t = NoiseArg::Shared)]
    pub noise: NoiseArg,
    /// Noise variance for `--noise fixed`.
    #[arg(long, default_value_t = 0.0)]
    pub noise_value: f64,
    #[arg(long, value_enum, default_value_t = GradientArg::Analytic)]
    pub gradient: GradientArg,
}

#[derive(Args, Debug, Clone, Default)]
#[group(multiple = false)]
pub struct CorrelationArgs {
    /// One correlation per basis column: fidelities in order, then the prior
    /// draw. Missing trailing entries are filled with defaults.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub correlations: Option<Vec<f64>>,
    /// Number of random valid correlation vectors, one sample each.
    #[arg(long)]
    pub random: Option<usize>,
    /// Ask for each entry on the terminal.
    #[arg(long)]
    pub interactive: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum BenchName {
    Liu,
    Currin,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum KernelArg {
    Rbf,
    SpectralMixture,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum NoiseArg {
    Shared,
    PerFidelity,
    Fixed,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum GradientArg {
    Analytic,
    Numeric,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum PriorDrawArg {
    Matrix,
    Cholesky,
}

impl From<PriorDrawArg> for PriorDraw {
    fn from(a: PriorDrawArg) -> Self {
        match a {
            PriorDrawArg::Matrix => PriorDraw::Matrix,
            PriorDrawArg::Cholesky => PriorDraw::Cholesky,
        }
    }
}

impl FitArgs {
    pub fn config(&self, seed: u64) -> FitConfig {
        FitConfig {
            kernel: match self.kernel {
                KernelArg::Rbf => KernelChoice::Rbf,
                KernelArg::SpectralMixture => KernelChoice::SpectralMixture {
                    mixtures: self.mixtures,
                },
            },
            noise: match self.noise {
                NoiseArg::Shared => NoiseMode::Shared,
                NoiseArg::PerFidelity => NoiseMode::PerFidelity,
                NoiseArg::Fixed => NoiseMode::Fixed(self.noise_value),
            },
            restarts: self.restarts,
            max_iters: self.max_iters,
            seed,
            gradient: match self.gradient {
                GradientArg::Analytic => GradientMode::Analytic,
                GradientArg::Numeric => GradientMode::Numeric,
            },
        }
    }
}

/// How correlation vectors are obtained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum CorrelationMode {
    Interactive,
    Explicit { values: Vec<f64> },
    Random { count: usize },
}

impl CorrelationArgs {
    fn mode(&self, default_random: usize) -> CorrelationMode {
        if self.interactive {
            CorrelationMode::Interactive
        } else if let Some(values) = &self.correlations {
            CorrelationMode::Explicit {
                values: values.clone(),
            }
        } else {
            CorrelationMode::Random {
                count: self.random.unwrap_or(default_random),
            }
        }
    }
}

/// Everything that determines a run besides the input data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitConfig>,
    pub prior_draw: PriorDraw,
    pub correlations: CorrelationMode,
    /// Files written, relative to the output directory.
    pub outputs: Vec<String>,
}

/// Audit record written next to every sample.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampleReport {
    pub seed: u64,
    pub prior_draw: PriorDraw,
    pub basis: Vec<String>,
    pub requested: Vec<f64>,
    pub achieved: Vec<f64>,
    pub max_abs_error: f64,
    pub bounds: Vec<Bounds>,
    pub heuristic_variance: f64,
    pub heuristic_weights: Vec<f64>,
    pub realized_variance: f64,
    pub coefficients: Vec<f64>,
    /// Cross-covariances of the synthetic task with each fidelity implied by
    /// the coefficients.
    pub implied_task_cross: Vec<f64>,
}

impl SampleReport {
    fn new(sample: &SyntheticSample, spec: &CorrelationSpec, basis: Vec<String>, seed: u64, prior_draw: PriorDraw) -> Self {
        let max_abs_error = sample
            .requested
            .iter()
            .zip(&sample.achieved)
            .map(|(r, a)| (r - a).abs())
            .fold(0.0, f64::max);
        SampleReport {
            seed,
            prior_draw,
            basis,
            requested: sample.requested.clone(),
            achieved: sample.achieved.clone(),
            max_abs_error,
            bounds: spec.bounds().to_vec(),
            heuristic_variance: sample.heuristic_variance,
            heuristic_weights: sample.weights.clone(),
            realized_variance: sample.realized_variance,
            coefficients: sample.coefficients.clone(),
            implied_task_cross: sample.implied_task_cross.clone(),
        }
    }
}

/// Parses the process arguments, runs the command and maps the outcome to
/// an exit code.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

pub fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() {
        3
    } else {
        2
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let seed = cli.seed;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match &cli.command {
        Command::Fit { data, output, fit } => {
            let data = read_dataset(data)?;
            let config = fit.config(seed);
            let model = mogp::fit(&data, &config)?;
            write_file(output, &fmt::model_to_json(&model, Some(&config))?)?;
            writeln!(out, "log marginal likelihood: {:.6}", model.log_marginal_likelihood())?;
            writeln!(out, "model written to {}", output.display())?;
        }
        Command::Sample {
            model,
            output_dir,
            correlations,
            prior_draw,
        } => {
            let model = fmt::model_from_json(&fs::read_to_string(model)?)?;
            let run = RunConfig {
                seed,
                benchmark: None,
                points: None,
                fit: None,
                prior_draw: (*prior_draw).into(),
                correlations: correlations.mode(1),
                outputs: Vec::new(),
            };
            fs::create_dir_all(output_dir)?;
            let samples = draw_samples(&model, &run, &mut out)?;
            write_samples(&model, &samples, &run, output_dir, &mut out)?;
        }
        Command::Bounds {
            model,
            chosen,
            prior_draw,
        } => {
            let model = fmt::model_from_json(&fs::read_to_string(model)?)?;
            print_bounds(&model, seed, (*prior_draw).into(), chosen, &mut out)?;
        }
        Command::Bench {
            name,
            benchmark,
            points,
            output_dir,
            fit,
            correlations,
            prior_draw,
        } => {
            let which = name.or(*benchmark).expect("clap enforces a benchmark name");
            let pair = benchfns::lookup(match which {
                BenchName::Liu => "liu",
                BenchName::Currin => "currin",
            })?;
            let points = points.unwrap_or(match which {
                BenchName::Liu => 50,
                BenchName::Currin => 20,
            });
            let config = fit.config(seed);
            let mut run = RunConfig {
                seed,
                benchmark: Some(pair.name.to_string()),
                points: Some(points),
                fit: Some(config.clone()),
                prior_draw: (*prior_draw).into(),
                correlations: correlations.mode(6),
                outputs: vec!["dataset.csv".into(), "model.json".into()],
            };
            let data = pair.grid(points)?;
            fs::create_dir_all(output_dir)?;
            write_file(&output_dir.join("dataset.csv"), &fmt::dataset_to_csv_string(&data))?;
            writeln!(out, "{}: {} points, {} fidelities", pair.name, data.n_points(), data.n_fidelities())?;
            let model = mogp::fit(&data, &config)?;
            write_file(&output_dir.join("model.json"), &fmt::model_to_json(&model, Some(&config))?)?;
            writeln!(out, "log marginal likelihood: {:.6}", model.log_marginal_likelihood())?;
            let samples = draw_samples(&model, &run, &mut out)?;
            run.outputs.push("plot_data.csv".into());
            let values: Vec<Vec<f64>> = samples.iter().map(|(s, _, _)| s.values.clone()).collect();
            let mut plot = Vec::new();
            fmt::write_plot_data(&data, &values, &mut plot)?;
            fs::write(output_dir.join("plot_data.csv"), plot)?;
            write_samples(&model, &samples, &run, output_dir, &mut out)?;
        }
        Command::Validate { data } => {
            let data = read_dataset(data)?;
            summarize(&data, &mut out)?;
        }
    }
    Ok(())
}

fn read_dataset(path: &Path) -> Result<FidelityDataset> {
    let file = fs::File::open(path)?;
    fmt::read_dataset_csv(io::BufReader::new(file), Some(&path.display().to_string()))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

fn basis_labels(model: &MogpModel) -> Vec<String> {
    let mut labels = model.data().labels().to_vec();
    labels.push("prior_draw".into());
    labels
}

type Drawn = (SyntheticSample, CorrelationSpec, u64);

fn draw_samples<W: Write>(model: &MogpModel, run: &RunConfig, out: &mut W) -> Result<Vec<Drawn>> {
    let mode = run.prior_draw;
    let seed = run.seed;
    match &run.correlations {
        CorrelationMode::Random { count } => (0..*count as u64)
            .into_par_iter()
            .map(|k| {
                let s = seed.wrapping_add(k);
                let basis = sampler::build_basis(model, s, mode)?;
                let spec = basis.bounds_session()?.sample_random(s ^ SPEC_STREAM)?;
                let sample = sampler::draw_with_basis(model, &basis, &spec)?;
                Ok((sample, spec, s))
            })
            .collect(),
        CorrelationMode::Explicit { values } => {
            let basis = sampler::build_basis(model, seed, mode)?;
            let spec = CorrelationSpec::from_values(basis.correlation(), values)?;
            let sample = sampler::draw_with_basis(model, &basis, &spec)?;
            Ok(vec![(sample, spec, seed)])
        }
        CorrelationMode::Interactive => {
            if !io::stdin().is_terminal() {
                return Err(Error::Usage(
                    "interactive mode needs a terminal; use --correlations or --random".into(),
                ));
            }
            let basis = sampler::build_basis(model, seed, mode)?;
            let spec = prompt_correlations(
                basis.bounds_session()?,
                &basis_labels(model),
                io::stdin().lock(),
                &mut *out,
            )?;
            let sample = sampler::draw_with_basis(model, &basis, &spec)?;
            Ok(vec![(sample, spec, seed)])
        }
    }
}

fn write_samples<W: Write>(
    model: &MogpModel,
    samples: &[Drawn],
    run: &RunConfig,
    dir: &Path,
    out: &mut W,
) -> Result<()> {
    let data = model.data();
    let labels = basis_labels(model);
    let mut run = run.clone();
    for (k, (sample, spec, s)) in samples.iter().enumerate() {
        let n = data.n_points();
        let nt = data.n_fidelities();
        let y = DMatrix::from_fn(n, nt + 1, |i, j| {
            if j < nt {
                data.y()[(i, j)]
            } else {
                sample.values[i]
            }
        });
        let mut names = data.labels().to_vec();
        names.push(unique_label(&names, "synthetic"));
        let mut extended = FidelityDataset::new(data.x().clone(), y, names)?;
        if let Some(p) = data.provenance() {
            extended = extended.with_provenance(p.clone());
        }
        let csv_name = format!("sample_{k}.csv");
        let json_name = format!("sample_{k}.json");
        write_file(&dir.join(&csv_name), &fmt::dataset_to_csv_string(&extended))?;
        let report = SampleReport::new(sample, spec, labels.clone(), *s, run.prior_draw);
        write_file(&dir.join(&json_name), &(serde_json::to_string_pretty(&report)? + "\n"))?;
        run.outputs.push(csv_name);
        run.outputs.push(json_name);

        let pairs: Vec<String> = labels
            .iter()
            .zip(sample.requested.iter().zip(&sample.achieved))
            .map(|(l, (r, a))| format!("{l} {r:.6}->{a:.6}"))
            .collect();
        writeln!(out, "sample {k} (seed {s}): {}", pairs.join(", "))?;
    }
    run.outputs.push("run_config.json".into());
    write_file(&dir.join("run_config.json"), &(serde_json::to_string_pretty(&run)? + "\n"))?;
    writeln!(out, "wrote {} sample(s) to {}", samples.len(), dir.display())?;
    Ok(())
}

fn unique_label(existing: &[String], base: &str) -> String {
    let mut label = base.to_string();
    let mut k = 1;
    while existing.contains(&label) {
        label = format!("{base}_{k}");
        k += 1;
    }
    label
}

fn print_bounds<W: Write>(
    model: &MogpModel,
    seed: u64,
    mode: PriorDraw,
    chosen: &[f64],
    out: &mut W,
) -> Result<()> {
    let basis = sampler::build_basis(model, seed, mode)?;
    let labels = basis_labels(model);
    let mut session = basis.bounds_session()?;
    writeln!(out, "basis (seed {seed}): {}", labels.join(", "))?;
    for &v in chosen {
        let i = session.cursor();
        let b = session.bounds_for_next()?;
        session.choose(v)?;
        writeln!(out, "entry {i} ({}): {} chosen {:.6}", labels[i], describe(&b), session.values()[i])?;
    }
    if session.is_complete() {
        writeln!(out, "vector complete")?;
    } else {
        let i = session.cursor();
        let b = session.bounds_for_next()?;
        writeln!(out, "next entry {i} ({}): {}", labels[i], describe(&b))?;
    }
    Ok(())
}

fn summarize<W: Write>(data: &FidelityDataset, out: &mut W) -> Result<()> {
    writeln!(
        out,
        "ok: {} points, {} dimensions, {} fidelities",
        data.n_points(),
        data.n_dims(),
        data.n_fidelities()
    )?;
    for (k, label) in data.labels().iter().enumerate() {
        let f = data.fidelity(k);
        writeln!(out, "fidelity {k} ({label}): mean {:.6}, std {:.6}", linalg::mean(f), linalg::std_dev(f))?;
    }
    if data.n_fidelities() > 1 {
        writeln!(out, "correlation matrix:")?;
        for a in 0..data.n_fidelities() {
            let row: Vec<String> = (0..data.n_fidelities())
                .map(|b| format!("{:9.6}", linalg::pearson(data.fidelity(a), data.fidelity(b))))
                .collect();
            writeln!(out, "  {}", row.join(" "))?;
        }
    }
    Ok(())
}
