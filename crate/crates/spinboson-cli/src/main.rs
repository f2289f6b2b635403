//! Command-line runner: load a scenario config (or a built-in preset), evolve
//! the physical and simulated systems, and write CSV results.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical-quality failure
//! (trace, positivity or truncation thresholds exceeded).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use spinboson::scenario::{self, ScenarioConfig};
use spinboson::{presets, Error};

#[derive(Parser)]
#[command(name = "spinboson", version, about = "Dissipative spin-boson model simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario from a config file or preset name.
    Run {
        /// Path to a TOML scenario config, or a preset name.
        config: String,
        /// Output directory for CSV files.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the Fock truncation.
        #[arg(long)]
        dim: Option<usize>,
        /// Override the integrator step, in units of 1/nu.
        #[arg(long)]
        dt: Option<f64>,
        /// Override the frequency hierarchy nu/nu_tilde.
        #[arg(long)]
        scale: Option<f64>,
        /// Run at the hierarchy used by the source publication.
        #[arg(long)]
        paper_scale: bool,
        /// Worker threads for multi-run commands.
        #[arg(long, default_value_t = 2)]
        workers: usize,
    },
    /// Print the config of a built-in scenario.
    Preset {
        /// One of the built-in names; omit to list them.
        name: Option<String>,
    },
    /// Run a scenario once per value of a numeric config axis.
    Sweep {
        config: String,
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long)]
        values: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 2)]
        workers: usize,
    },
    /// Re-run a scenario across frequency hierarchies and report whether the
    /// simulation error decreases.
    Convergence {
        config: String,
        /// Comma-separated ascending scales.
        #[arg(long)]
        scales: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 2)]
        workers: usize,
    },
}

fn load_config(source: &str) -> Result<ScenarioConfig, Error> {
    if Path::new(source).exists() {
        let text = std::fs::read_to_string(source)?;
        ScenarioConfig::from_toml(&text)
    } else {
        presets::preset(source, None)
    }
}

fn apply_overrides(
    cfg: &mut ScenarioConfig,
    dim: Option<usize>,
    dt: Option<f64>,
    scale: Option<f64>,
    paper_scale: bool,
) -> Result<(), Error> {
    if let Some(d) = dim {
        cfg.scenario.dim = d;
    }
    if let Some(x) = dt {
        if x <= 0.0 {
            return Err(Error::Config("--dt must be positive".into()));
        }
        cfg.scenario.steps_per_period = (2.0 * std::f64::consts::PI / x).round().max(1.0) as usize;
    }
    if let Some(s) = scale {
        cfg.scenario.scale = s;
    }
    if paper_scale {
        match cfg.scenario.paper_scale {
            Some(s) => cfg.scenario.scale = s,
            None => {
                return Err(Error::Config(
                    "--paper-scale requires paper_scale in the config".into(),
                ))
            }
        }
    }
    Ok(())
}

fn parse_values(s: &str) -> Result<Vec<f64>, Error> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad numeric value `{x}`")))
        })
        .collect()
}

fn csv_path(out: &Path, cfg: &ScenarioConfig, fallback: &str) -> PathBuf {
    match &cfg.run.out {
        Some(p) if Path::new(p).is_absolute() => PathBuf::from(p),
        Some(p) => out.join(p),
        None => out.join(format!("{fallback}.csv")),
    }
}

fn run(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Run {
            config,
            out,
            dim,
            dt,
            scale,
            paper_scale,
            ..
        } => {
            let mut cfg = load_config(&config)?;
            apply_overrides(&mut cfg, dim, dt, scale, paper_scale)?;
            std::fs::create_dir_all(&out)?;
            let res = scenario::run_scenario(&cfg)?;
            let path = csv_path(&out, &cfg, &cfg.scenario.name);
            let file = std::fs::File::create(&path)?;
            scenario::write_csv(&res, std::io::BufWriter::new(file))?;
            println!("{}", res.summary);
            println!("wrote {}", path.display());
            Ok(res.summary.quality_ok)
        }
        Command::Preset { name } => {
            match name {
                Some(n) => print!("{}", presets::preset(&n, None)?.to_toml()),
                None => {
                    for n in presets::PRESET_NAMES {
                        println!("{n}");
                    }
                }
            }
            Ok(true)
        }
        Command::Sweep {
            config,
            axis,
            values,
            out,
            workers,
        } => {
            let cfg = load_config(&config)?;
            let values = parse_values(&values)?;
            std::fs::create_dir_all(&out)?;
            let points = scenario::run_sweep(&cfg, &axis, &values, workers)?;
            let mut ok = true;
            for p in &points {
                let path = out.join(format!("{}_{}={}.csv", cfg.scenario.name, axis, p.value));
                let file = std::fs::File::create(&path)?;
                scenario::write_csv(&p.result, std::io::BufWriter::new(file))?;
                println!("{}", p.result.summary);
                ok &= p.result.summary.quality_ok;
            }
            let summary = scenario::sweep_summary_csv(&points, &axis);
            let spath = out.join(format!("{}_sweep_{}.csv", cfg.scenario.name, axis));
            std::fs::write(&spath, summary)?;
            println!("wrote sweep summary {}", spath.display());
            Ok(ok)
        }
        Command::Convergence {
            config,
            scales,
            out,
            workers,
        } => {
            let cfg = load_config(&config)?;
            let scales = parse_values(&scales)?;
            std::fs::create_dir_all(&out)?;
            let report = scenario::rwa_convergence(&cfg, &scales, workers)?;
            let mut text = String::from("scale,max_infidelity\n");
            for (s, e) in report.scales.iter().zip(&report.max_infidelities) {
                text.push_str(&format!("{s},{e:.16e}\n"));
                println!("scale {s}: max infidelity {e:.3e}");
            }
            let spath = out.join(format!("{}_convergence.csv", cfg.scenario.name));
            std::fs::write(&spath, text)?;
            println!(
                "strictly decreasing: {}",
                if report.strictly_decreasing { "yes" } else { "no" }
            );
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("numerical-quality thresholds exceeded; see warnings above");
            ExitCode::from(3)
        }
        Err(e) => {
            let code = match &e {
                Error::Config(_) | Error::UnknownPreset(_) | Error::InvalidParams(_) => 2,
                Error::Io(_) => 2,
                Error::IntegrationFailure { .. } | Error::UnstableStep(_) => 3,
                _ => 3,
            };
            eprintln!("error: {e}");
            ExitCode::from(code)
        }
    }
}
