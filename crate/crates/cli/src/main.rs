use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use tpi_ssa::formats::{
    self, BootstrapOutput, DecompositionExport, EstimateOutput, FitInitFile, FitOutput, ParamFile, StudyReportOutput,
    SweepSpecFile, MHZ,
};
use tpi_ssa::{
    bin_profile, bootstrap_uncertainty, crb_curve, decompose, estimate_delta_nu, fit_model, run_sweep, sample_histogram,
    ComponentChoice, EmbeddingConfig, ErrorCategory,
};

#[derive(Parser)]
#[command(name = "tpi-ssa", version, about = "Frequency-separation estimation from two-photon interference histograms")]
struct Cli {
    /// Print progress and timing to stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Expected (or Poisson-sampled) coincidence histogram from a parameter file.
    Simulate {
        #[arg(long)]
        params: PathBuf,
        /// Override a parameter, e.g. `delta_nu_MHz=440`. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Draw Poisson counts instead of writing the expected profile.
        #[arg(long)]
        sample: bool,
        #[arg(long, requires = "sample")]
        seed: Option<u64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Spectral δν estimate of a histogram CSV.
    Analyze {
        input: PathBuf,
        #[arg(long, default_value_t = 5)]
        nc: usize,
        /// `auto`, `2`, `2,3`, ...
        #[arg(long, default_value = "auto")]
        components: String,
        /// Also write eigenvalues and reconstructed components as JSON.
        #[arg(long, value_name = "PATH")]
        dump_components: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Least-squares model fit of a histogram CSV.
    Fit {
        input: PathBuf,
        /// Initial guess: a parameter file with optional `amplitude`.
        #[arg(long)]
        init: PathBuf,
        #[arg(long, default_value_t = 200)]
        max_iter: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Fisher information and Cramér–Rao bound over a δν grid (MHz).
    Fisher {
        #[arg(long)]
        params: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long, default_value_t = 10.0)]
        from_mhz: f64,
        #[arg(long, default_value_t = 900.0)]
        to_mhz: f64,
        #[arg(long, default_value_t = 10.0)]
        grid_step_mhz: f64,
        /// Finite-difference step.
        #[arg(long, default_value_t = 1.0)]
        fd_step_mhz: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Monte Carlo sweep described by a JSON spec.
    Sweep {
        spec: PathBuf,
        /// Used when the sweep file has no seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Also write a per-point summary CSV.
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
    },
    /// δν estimate with a Poisson-bootstrap standard deviation.
    Bootstrap {
        input: PathBuf,
        #[arg(long, default_value_t = 5)]
        nc: usize,
        #[arg(long, default_value = "auto")]
        components: String,
        #[arg(long, default_value_t = 1000)]
        resamples: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<tpi_ssa::Error>() {
            return match err.category() {
                ErrorCategory::Validation => 2,
                ErrorCategory::Estimation => 3,
                ErrorCategory::Io => 4,
            };
        }
        if cause.downcast_ref::<io::Error>().is_some() {
            return 4;
        }
    }
    2
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).map_err(tpi_ssa::Error::from).with_context(|| format!("reading {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            let f = File::create(p).map_err(tpi_ssa::Error::from).with_context(|| format!("writing {}", p.display()))?;
            Box::new(BufWriter::new(f))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: serde::Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let mut w = sink(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(tpi_ssa::Error::from)?;
    writeln!(w).map_err(tpi_ssa::Error::from)?;
    w.flush().map_err(tpi_ssa::Error::from)?;
    Ok(())
}

fn load_params(path: &Path, overrides: &[String]) -> Result<ParamFile> {
    let mut file = ParamFile::from_reader(open(path)?).with_context(|| format!("parsing {}", path.display()))?;
    for o in overrides {
        file.apply_override(o)?;
    }
    Ok(file)
}

fn load_histogram(path: &Path) -> Result<tpi_ssa::CoincidenceHistogram> {
    formats::read_histogram_csv(open(path)?).with_context(|| format!("parsing {}", path.display()))
}

/// Seeds are always echoed so a run without `--seed` can be repeated.
fn fresh_seed(what: &str) -> u64 {
    let seed = rand::random::<u64>();
    eprintln!("{what}: generated seed {seed}");
    seed
}

fn run(cli: Cli) -> Result<()> {
    let verbose = cli.verbose;
    match cli.command {
        Command::Simulate { params, overrides, sample, seed, output } => {
            let (p, cfg) = load_params(&params, &overrides)?.to_model()?;
            let mut hist = bin_profile(&p, &cfg)?;
            if sample {
                let seed = seed.unwrap_or_else(|| fresh_seed("simulate"));
                if verbose > 0 {
                    eprintln!("simulate: sampling with seed {seed}");
                }
                hist = sample_histogram(&hist, seed);
            }
            let mut w = sink(output.as_deref())?;
            formats::write_histogram_csv(&hist, &mut w)?;
            w.flush().map_err(tpi_ssa::Error::from)?;
        }
        Command::Analyze { input, nc, components, dump_components, output } => {
            let hist = load_histogram(&input)?;
            let embedding = EmbeddingConfig::new(nc);
            let choice = formats::parse_components(&components)?;
            if let Some(path) = dump_components {
                embedding.validate_for(hist.len())?;
                let d = decompose(hist.counts(), &embedding)?;
                write_json(&DecompositionExport::from(&d), Some(&path))?;
            }
            let selection = match &choice {
                ComponentChoice::Auto => None,
                ComponentChoice::Fixed(s) => Some(s),
            };
            let est = estimate_delta_nu(&hist, &embedding, selection)?;
            if verbose > 0 {
                eprintln!("analyze: components {}, peak bin {}", est.components_used, est.peak_bin);
            }
            write_json(&EstimateOutput::from(&est), output.as_deref())?;
        }
        Command::Fit { input, init, max_iter, output } => {
            let hist = load_histogram(&input)?;
            let init_file: FitInitFile =
                serde_json::from_reader(open(&init)?).map_err(tpi_ssa::Error::from).with_context(|| format!("parsing {}", init.display()))?;
            let guess = init_file.to_fit_params(&hist)?;
            let res = fit_model(&hist, &guess, max_iter)?;
            if verbose > 0 {
                eprintln!("fit: {} iterations in {:.3} s", res.iterations, res.wall_time);
            }
            write_json(&FitOutput::from(&res), output.as_deref())?;
        }
        Command::Fisher { params, overrides, from_mhz, to_mhz, grid_step_mhz, fd_step_mhz, output } => {
            let (p, cfg) = load_params(&params, &overrides)?.to_model()?;
            if !(grid_step_mhz > 0.0 && from_mhz.is_finite() && to_mhz.is_finite() && from_mhz <= to_mhz) {
                return Err(tpi_ssa::Error::ParameterDomain(format!(
                    "invalid grid {from_mhz}..{to_mhz} step {grid_step_mhz} MHz"
                ))
                .into());
            }
            let n = ((to_mhz - from_mhz) / grid_step_mhz + 1e-9).floor() as usize + 1;
            let grid: Vec<f64> = (0..n).map(|i| (from_mhz + i as f64 * grid_step_mhz) * MHZ).collect();
            let res = crb_curve(&p, &cfg, &grid, fd_step_mhz * MHZ)?;
            let mut w = sink(output.as_deref())?;
            formats::write_fisher_csv(&res, &mut w)?;
            w.flush().map_err(tpi_ssa::Error::from)?;
        }
        Command::Sweep { spec, seed, output, csv } => {
            let file: SweepSpecFile =
                serde_json::from_reader(open(&spec)?).map_err(tpi_ssa::Error::from).with_context(|| format!("parsing {}", spec.display()))?;
            let fallback = match (file.seed, seed) {
                (Some(_), _) => 0,
                (None, Some(s)) => s,
                (None, None) => fresh_seed("sweep"),
            };
            let spec = file.to_spec(fallback)?;
            let started = std::time::Instant::now();
            let report = run_sweep(&spec)?;
            if verbose > 0 {
                eprintln!(
                    "sweep: {} points x {} runs in {:.2} s",
                    spec.values.len(),
                    spec.runs_per_point,
                    started.elapsed().as_secs_f64()
                );
            }
            if let Some(path) = csv {
                let mut w = sink(Some(&path))?;
                formats::write_sweep_csv(&report, &mut w)?;
                w.flush().map_err(tpi_ssa::Error::from)?;
            }
            write_json(&StudyReportOutput::from(&report), output.as_deref())?;
        }
        Command::Bootstrap { input, nc, components, resamples, seed, output } => {
            let hist = load_histogram(&input)?;
            let choice = formats::parse_components(&components)?;
            let seed = seed.unwrap_or_else(|| fresh_seed("bootstrap"));
            let res = bootstrap_uncertainty(&hist, &EmbeddingConfig::new(nc), &choice, resamples, seed)?;
            if !res.reliable {
                eprintln!("bootstrap: {} of {} resamples failed; sigma unreliable", res.failures, res.n_resamples);
            }
            write_json(&BootstrapOutput::from(&res), output.as_deref())?;
        }
    }
    Ok(())
}
