//! Argument parsing and the process-level driver.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, ValueEnum};
use waist_core::tube::Ambient;

use crate::config::{Experiment, ExperimentConfig, Format, Subcommand, TGrid};
use crate::error::{CliError, Result};
use crate::output::{render, Report};
use crate::presets;
use crate::run::execute;

#[derive(Debug, Parser)]
#[command(name = "waist", version, about = "Seeded tube-volume and waist experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Subcommand)]
pub enum Command {
    /// Model tube fractions (Gaussian, spherical, projective)
    Tube {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        tube: TubeFlags,
    },
    /// Equal-measure cut trees and their audits
    Pancake(Common),
    /// Monotone transport onto convex bodies
    Transport(Common),
    /// Fiber tube measures against the model tube
    Waist(Common),
    /// Certify a shortfall below the model tube
    Counterexample(Common),
    /// Tubes around submanifolds of spheres and projective spaces
    Manifold(Common),
    /// Partition, equalize and measure the common fiber
    Demo(Common),
    /// List the presets
    Presets,
}

/// Flags shared by every experiment subcommand.
#[derive(Debug, Default, Args)]
pub struct Common {
    /// Experiment config file (JSON)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Named preset; see `waist presets`
    #[arg(long, conflicts_with = "config")]
    pub preset: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Output file; standard output when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Cap on worker threads
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AmbientKind {
    Euclidean,
    Sphere,
    Cp,
}

/// Direct tube queries without a config file.
#[derive(Debug, Default, Args)]
pub struct TubeFlags {
    #[arg(long, value_enum)]
    pub ambient: Option<AmbientKind>,
    /// Ambient dimension
    #[arg(long)]
    pub n: Option<usize>,
    /// Dimension of the core subspace
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    pub tmin: f64,
    #[arg(long)]
    pub tmax: Option<f64>,
    #[arg(long, default_value_t = 64)]
    pub count: usize,
    /// Gaussian scales of the normal directions, comma separated
    #[arg(long, value_delimiter = ',')]
    pub scales: Option<Vec<f64>>,
}

impl TubeFlags {
    fn config(&self) -> Result<Option<ExperimentConfig>> {
        let Some(kind) = self.ambient else { return Ok(None) };
        let need = |v: Option<usize>, flag: &str| v.ok_or_else(|| CliError::Usage(format!("tube --ambient needs --{flag}")));
        let n = need(self.n, "n")?;
        let k = need(self.k, "k")?;
        let tmax = self.tmax.ok_or_else(|| CliError::Usage("tube --ambient needs --tmax".into()))?;
        let ambient = match kind {
            AmbientKind::Euclidean => Ambient::Euclidean(n),
            AmbientKind::Sphere => Ambient::Sphere(n),
            AmbientKind::Cp => Ambient::ComplexProjective(n),
        };
        let experiment = Experiment::Tube { ambient, core_dim: k, gaussian_scales: self.scales.clone(), measure: None };
        Ok(Some(ExperimentConfig::new(experiment).with_grid(TGrid::range(self.tmin, tmax, self.count))))
    }
}

fn read_config(path: &PathBuf) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
    ExperimentConfig::from_json(&text)
}

/// Resolves the config for `sub` from a file, a preset or direct flags,
/// then applies the command-line overrides.
pub fn resolve(sub: Subcommand, common: &Common, direct: Option<ExperimentConfig>) -> Result<ExperimentConfig> {
    let mut config = if let Some(path) = &common.config {
        read_config(path)?
    } else if let Some(name) = &common.preset {
        let preset = presets::find(name).ok_or_else(|| CliError::Usage(format!("unknown preset {name:?}; see `waist presets`")))?;
        if preset.subcommand != sub {
            return Err(CliError::Usage(format!("preset {name} belongs to `{}`", preset.subcommand.name())));
        }
        presets::config(name).expect("listed presets have configs")
    } else if let Some(c) = direct {
        c
    } else {
        return Err(CliError::Usage(format!("`{}` needs --config or --preset", sub.name())));
    };
    if config.experiment.subcommand() != sub {
        return Err(CliError::field(
            "experiment.kind",
            format!("this experiment belongs to `{}`, not `{}`", config.experiment.subcommand().name(), sub.name()),
        ));
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(samples) = common.samples {
        config.samples = Some(samples);
    }
    if let Some(format) = common.format {
        config.format = Some(format);
    }
    if let Some(out) = &common.out {
        config.out = Some(out.display().to_string());
    }
    config.validate()?;
    Ok(config)
}

/// Runs `config`, capping the worker pool at `threads` when given.
pub fn run_config(config: &ExperimentConfig, threads: Option<usize>) -> Result<Report> {
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| CliError::Usage(format!("cannot build a pool of {n} threads: {e}")))?;
            pool.install(|| execute(config))
        }
        None => execute(config),
    }
}

fn write_artifact(config: &ExperimentConfig, report: &Report) -> Result<()> {
    let text = render(config, report);
    match &config.out {
        Some(path) => std::fs::write(path, text).map_err(|source| CliError::Io { path: path.clone(), source }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|source| CliError::Io { path: "stdout".into(), source })
        }
    }
}

fn list_presets() -> String {
    let mut out = String::new();
    for p in presets::PRESETS {
        out.push_str(&format!("{:<16} {:<24} {}\n", p.subcommand.name(), p.name, p.about));
    }
    out
}

fn dispatch(cli: Cli) -> Result<i32> {
    let (sub, common, direct) = match cli.command {
        Command::Presets => {
            print!("{}", list_presets());
            return Ok(0);
        }
        Command::Tube { common, tube } => {
            let direct = tube.config()?;
            (Subcommand::Tube, common, direct)
        }
        Command::Pancake(c) => (Subcommand::Pancake, c, None),
        Command::Transport(c) => (Subcommand::Transport, c, None),
        Command::Waist(c) => (Subcommand::Waist, c, None),
        Command::Counterexample(c) => (Subcommand::Counterexample, c, None),
        Command::Manifold(c) => (Subcommand::Manifold, c, None),
        Command::Demo(c) => (Subcommand::Demo, c, None),
    };
    let config = resolve(sub, &common, direct)?;
    let report = run_config(&config, common.threads)?;
    write_artifact(&config, &report)?;
    Ok(if report.inconclusive { 2 } else { 0 })
}

/// Parses `args` and runs the command, returning the process exit status:
/// 0 on completion, 2 when the result is inconclusive or a solver did not
/// converge, 1 on input errors.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
