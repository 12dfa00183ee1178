use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use bubblescope::market_data::{parse_ticks, write_ticks};
use bubblescope::pipeline::{self, Report};
use bubblescope::sde_sim::{self, SimSpec};
use bubblescope::RunConfig;
use clap::{Args, Parser, Subcommand};

/// Detect asset-price bubbles from minute bars via nonparametric volatility
/// estimation and RKHS tail extrapolation.
#[derive(Parser)]
#[command(name = "bubblescope", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage on a price file.
    Detect {
        /// Price file (`-` for standard input).
        input: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Simulate a driftless CEV path dS = sigma0·S^theta dW.
    Simulate(SimOpts),
    /// Grid and volatility estimates (summary.json, estimate.csv).
    Estimate {
        input: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Interpolated volatility curve (curve.csv) from estimate.csv.
    Interpolate {
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Optimized extrapolation (mscan.csv, extrapolation.csv, model.json).
    Extrapolate {
        /// Estimate table to read instead of <out>/estimate.csv.
        #[arg(long)]
        estimate: Option<PathBuf>,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Verdict and report.json from the earlier stage files.
    Report {
        #[command(flatten)]
        opts: RunOpts,
    },
}

#[derive(Args, Default)]
struct RunOpts {
    /// Output directory for stage files.
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    field: Option<String>,
    #[arg(long)]
    time_span: Option<f64>,
    #[arg(long)]
    estimator: Option<String>,
    #[arg(long)]
    confidence: Option<f64>,
    #[arg(long)]
    min_visits: Option<usize>,
    /// Keep only the first N reliable grid points.
    #[arg(long)]
    max_points: Option<usize>,
    #[arg(long)]
    interpolator: Option<String>,
    #[arg(long)]
    tau: Option<f64>,
    /// Smoothness index n of the extrapolation space.
    #[arg(long, short = 'n')]
    smoothness: Option<u32>,
    #[arg(long)]
    m_min: Option<f64>,
    #[arg(long)]
    m_max: Option<f64>,
    #[arg(long)]
    mesh: Option<usize>,
    #[arg(long)]
    scan_points: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    lower_bound: Option<f64>,
    #[arg(long)]
    split_factor: Option<f64>,
}

impl RunOpts {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            cfg.apply_file_contents(&text).with_context(|| format!("in config {}", path.display()))?;
        }
        let flags: [(&str, Option<String>); 16] = [
            ("field", self.field.clone()),
            ("time_span", self.time_span.map(|v| v.to_string())),
            ("estimator", self.estimator.clone()),
            ("confidence", self.confidence.map(|v| v.to_string())),
            ("min_visits", self.min_visits.map(|v| v.to_string())),
            ("max_points", self.max_points.map(|v| v.to_string())),
            ("interpolator", self.interpolator.clone()),
            ("tau", self.tau.map(|v| v.to_string())),
            ("smoothness", self.smoothness.map(|v| v.to_string())),
            ("m_min", self.m_min.map(|v| v.to_string())),
            ("m_max", self.m_max.map(|v| v.to_string())),
            ("mesh", self.mesh.map(|v| v.to_string())),
            ("scan_points", self.scan_points.map(|v| v.to_string())),
            ("epsilon", self.epsilon.map(|v| v.to_string())),
            ("lower_bound", self.lower_bound.map(|v| v.to_string())),
            ("split_factor", self.split_factor.map(|v| v.to_string())),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        if let Some(out) = &self.out {
            cfg.output = Some(out.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn out_dir(cfg: &RunConfig) -> PathBuf {
    cfg.output.clone().unwrap_or_else(|| PathBuf::from("bubblescope-out"))
}

#[derive(Args)]
struct SimOpts {
    #[arg(long, default_value_t = 0.2)]
    sigma0: f64,
    #[arg(long, default_value_t = 1.0)]
    theta: f64,
    #[arg(long, default_value_t = 1.0)]
    s0: f64,
    /// Number of observations written.
    #[arg(long, default_value_t = 1535)]
    steps: usize,
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file (standard output when omitted).
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
}

fn read_input(path: &Path) -> Result<String> {
    if path == Path::new("-") {
        let mut text = String::new();
        std::io::Read::read_to_string(&mut std::io::stdin(), &mut text)?;
        Ok(text)
    } else {
        fs::read_to_string(path).with_context(|| format!("[estimate] reading {}", path.display()))
    }
}

fn load_series(path: &Path, cfg: &RunConfig) -> Result<bubblescope::PriceSeries> {
    let text = read_input(path)?;
    parse_ticks(&text, cfg.field).with_context(|| format!("[estimate] parsing {}", path.display()))
}

fn print_report(report: &Report) -> Result<()> {
    let line = serde_json::json!({
        "classification": report.verdict.classification,
        "alpha": report.verdict.alpha,
        "m": report.provenance.m,
        "knots": report.provenance.knots,
        "n": report.provenance.smoothness,
        "integral_finite": report.verdict.integral_finite,
    });
    println!("{line}");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Detect { input, opts } => {
            let cfg = opts.config()?;
            let series = load_series(&input, &cfg)?;
            let report = pipeline::run_detect(&series, &cfg, &out_dir(&cfg))?;
            print_report(&report)
        }
        Command::Simulate(sim) => {
            let spec = SimSpec {
                sigma0: sim.sigma0,
                theta: sim.theta,
                s0: sim.s0,
                steps: sim.steps,
                horizon: sim.horizon,
                seed: sim.seed,
            };
            let series = sde_sim::simulate(&spec).context("[simulate]")?;
            match &sim.out {
                Some(path) => {
                    let file = fs::File::create(path).with_context(|| format!("[simulate] creating {}", path.display()))?;
                    write_ticks(&series, std::io::BufWriter::new(file)).context("[simulate]")?;
                    let (alpha, bubble) = sde_sim::ground_truth_alpha(&spec);
                    eprintln!(
                        "{}",
                        serde_json::json!({
                            "observations": series.len(),
                            "alpha": alpha,
                            "bubble": bubble,
                            "generator": sde_sim::GENERATOR,
                        })
                    );
                }
                None => write_ticks(&series, std::io::stdout().lock()).context("[simulate]")?,
            }
            Ok(())
        }
        Command::Estimate { input, opts } => {
            let cfg = opts.config()?;
            let series = load_series(&input, &cfg)?;
            let est = pipeline::run_estimate(&series, &cfg, &out_dir(&cfg))?;
            println!("{}", serde_json::json!({ "grid_points": est.len(), "summary": series.summary() }));
            Ok(())
        }
        Command::Interpolate { opts } => {
            let cfg = opts.config()?;
            let curve = pipeline::run_interpolate(&cfg, &out_dir(&cfg))?;
            println!("{}", serde_json::json!({ "interpolator": curve.kind() }));
            Ok(())
        }
        Command::Extrapolate { estimate, opts } => {
            let cfg = opts.config()?;
            let dir = out_dir(&cfg);
            if let Some(src) = estimate {
                fs::create_dir_all(&dir)?;
                let target = dir.join(bubblescope::io::ESTIMATE_FILE);
                if fs::canonicalize(&src).ok() != fs::canonicalize(&target).ok() {
                    fs::copy(&src, &target).with_context(|| format!("[extrapolate] reading {}", src.display()))?;
                }
            }
            let opt = pipeline::run_extrapolate(&cfg, &dir)?;
            println!(
                "{}",
                serde_json::json!({
                    "m": opt.m,
                    "alpha": bubblescope::verdict::alpha_from_m(opt.m),
                    "objective": opt.objective,
                    "knots": opt.model.knots.len(),
                    "n": opt.model.n,
                })
            );
            Ok(())
        }
        Command::Report { opts } => {
            let cfg = opts.config()?;
            let report = pipeline::run_report(&cfg, &out_dir(&cfg))?;
            print_report(&report)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
