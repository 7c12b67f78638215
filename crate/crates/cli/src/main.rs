use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use pdmp_impulse::config::RunConfig;
use pdmp_impulse::pipeline::{self, BudgetRow, Chains};
use pdmp_impulse::Error;

/// Impulse control of piecewise deterministic Markov processes by quantization.
#[derive(Parser)]
#[command(name = "pdmp-impulse", version)]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "PDMP_IMPULSE_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Flat key = value configuration; the benchmark when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Cells per layer; give once for all layers or once per layer.
    #[arg(long = "layer-size")]
    layer_size: Vec<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Train the main and control grids and write them to a directory.
    Quantize {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run both backward recursions on stored grids.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        grids: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Theoretical error bound for stored grids.
    Budget {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        grids: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Oracle and Monte Carlo checks; exit code 3 when any fails.
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        grids: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Trajectory data `(t, X(t))`.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10)]
        n_jumps: usize,
        #[arg(long, default_value_t = 2)]
        paths: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full sweep over grid sizes and horizons.
    Benchmark {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Config(anyhow::Error),
    Validation(String),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        let is_config = e.chain().any(|c| {
            matches!(
                c.downcast_ref::<Error>(),
                Some(Error::Config(_) | Error::Corrupt(_) | Error::VersionMismatch { .. } | Error::Domain(_))
            )
        });
        if is_config {
            Failure::Config(e)
        } else {
            Failure::Other(e)
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

fn load_config(c: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if !c.layer_size.is_empty() {
        cfg.set_layer_sizes(&c.layer_size)?;
    }
    Ok(cfg)
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.cmd {
        Command::Quantize { common, out } => {
            let cfg = load_config(&common)?;
            let (model, _) = cfg.model.build();
            let chains = pipeline::train_chains(&cfg, &model, &cfg.layer_sizes)?;
            chains.save(&out)?;
            print!("{}", pipeline::header(&cfg));
            println!("chain,layer,cells,distortion_z,distortion_s");
            let named = std::iter::once(("main".to_string(), &chains.main))
                .chain(chains.control.iter().enumerate().map(|(i, c)| (format!("control{i}"), c)));
            for (name, c) in named {
                for (n, l) in c.layers.iter().enumerate() {
                    println!("{name},{n},{},{:.6e},{:.6e}", l.len(), c.distortion_z[n], c.distortion_s[n]);
                }
                for w in &c.warnings {
                    eprintln!("warning ({name}): {w}");
                }
            }
        }
        Command::Solve { common, grids, out } => {
            let cfg = load_config(&common)?;
            let (model, cost) = cfg.model.build();
            let chains = Chains::load(&grids)?;
            let s = pipeline::solve(&cfg, &model, &cost, &chains, cfg.horizon)?;
            write(&out.join("solve.json"), &serde_json::to_string_pretty(&s.report).context("serializing")?)?;
            write(&out.join("values.csv"), &pipeline::values_csv(&cfg, &s.control))?;
            println!("v0 = {:.10}", s.main.v0);
        }
        Command::Budget { common, grids, out } => {
            let cfg = load_config(&common)?;
            let (model, cost) = cfg.model.build();
            let chains = Chains::load(&grids)?;
            let b = pipeline::budget(&cfg, &model, &cost, &chains, cfg.horizon)?;
            let row = BudgetRow {
                horizon: cfg.horizon,
                size: chains.main.layer_sizes().iter().skip(1).copied().max().unwrap_or(1),
                total: b.total,
                floor_violations: b.floor_violations,
                saturated: b.saturated,
            };
            let csv = pipeline::budget_csv(&cfg, std::slice::from_ref(&row));
            match out {
                Some(dir) => {
                    write(&dir.join("budget.csv"), &csv)?;
                    write(&dir.join("budget.json"), &serde_json::to_string_pretty(&b).context("serializing")?)?;
                }
                None => print!("{csv}"),
            }
        }
        Command::Validate { common, grids, out } => {
            let cfg = load_config(&common)?;
            let chains = grids.as_deref().map(Chains::load).transpose()?;
            let report = pipeline::validate(&cfg, chains.as_ref())?;
            let json = serde_json::to_string_pretty(&report).context("serializing")?;
            match out {
                Some(p) => write(&p, &json)?,
                None => println!("{json}"),
            }
            if !report.pass {
                let failed: Vec<_> = report.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
                return Err(Failure::Validation(failed.join(", ")));
            }
        }
        Command::Simulate { common, n_jumps, paths, out } => {
            let cfg = load_config(&common)?;
            let (model, _) = cfg.model.build();
            write(&out, &pipeline::trajectories_csv(&cfg, &model, paths, n_jumps))?;
        }
        Command::Benchmark { common, out } => {
            let cfg = load_config(&common)?;
            let s = pipeline::run_benchmark(&cfg, &out)?;
            println!("{}", serde_json::to_string_pretty(&s).context("serializing")?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Validation(names)) => {
            eprintln!("validation failed: {names}");
            ExitCode::from(3)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
