use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use smallbody_cli::config::{OutputConfig, OutputFormat, ScenarioConfig, Shape};
use smallbody_cli::output::float;
use smallbody_cli::{verify, CliError, EXIT_VERIFICATION};

#[derive(Parser)]
#[command(
    name = "smallbody",
    version,
    about = "Small rigid body in an ideal fluid with vortex blobs"
)]
struct Cli {
    /// Machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ShapeArg {
    Disk,
    Joukowski,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Jsonl,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario and write its trajectory.
    Simulate {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        /// Overrides `output.path`.
        #[arg(long, value_name = "PATH")]
        output: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
    },
    /// Run the identity suite for one shape.
    Verify {
        /// Take the shape and seed from a scenario file.
        #[arg(long, value_name = "PATH")]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "disk")]
        shape: ShapeArg,
        /// Joukowski parameter.
        #[arg(long, default_value_t = 0.5)]
        a: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Replace every threshold.
        #[arg(long, value_name = "X")]
        tol: Option<f64>,
    },
    /// Finite-size disk runs against the limit system.
    Convergence {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
    },
    /// Force decomposition at the scenario's initial state.
    Forces {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
    },
}

fn print_json<T: Serialize>(value: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("serializable")
    );
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    match &cli.command {
        Command::Simulate {
            config,
            output,
            format,
        } => {
            let mut cfg = ScenarioConfig::load(config)?;
            if output.is_some() || format.is_some() {
                let base = cfg.output.take();
                let path = output
                    .clone()
                    .or_else(|| base.as_ref().map(|o| o.path.clone()))
                    .ok_or_else(|| {
                        CliError::Config("--format given without an output path".into())
                    })?;
                let format = match format {
                    Some(FormatArg::Jsonl) => OutputFormat::Jsonl,
                    Some(FormatArg::Csv) => OutputFormat::Csv,
                    None => base.map(|o| o.format).unwrap_or_default(),
                };
                cfg.output = Some(OutputConfig { path, format });
            }
            let s = smallbody_cli::simulate(&cfg)?;
            if cli.json {
                print_json(&s);
            } else {
                println!("mode        {}", s.mode);
                if let Some(eps) = s.epsilon {
                    println!("body        {} epsilon={eps}", s.shape);
                }
                println!("steps       {} (dt={})", s.steps, s.dt);
                println!("t_final     {}", float(s.t_final));
                println!(
                    "h_final     {} {}",
                    float(s.h_final[0]),
                    float(s.h_final[1])
                );
                println!("drift       {:.3e}", s.drift);
                if let Some(c) = s.circulation_error {
                    println!("circulation {c:.3e}");
                }
                println!(
                    "support     {} (margin {:.3e}, slack {:.3e})",
                    if s.support.passed { "ok" } else { "VIOLATED" },
                    s.support.min_margin,
                    s.support.slack
                );
                if let Some(p) = &s.output {
                    println!("wrote       {} records to {}", s.records, p.display());
                }
            }
            Ok(0)
        }
        Command::Verify {
            config,
            shape,
            a,
            seed,
            tol,
        } => {
            let (shape, seed) = match config {
                Some(path) => {
                    let cfg = ScenarioConfig::load(path)?;
                    (cfg.shape, cfg.seed)
                }
                None => (
                    match shape {
                        ShapeArg::Disk => Shape::Disk,
                        ShapeArg::Joukowski => Shape::Joukowski { a: *a },
                    },
                    *seed,
                ),
            };
            if let Some(t) = tol {
                if !(t.is_finite() && *t >= 0.0) {
                    return Err(CliError::Config(format!("invalid --tol {t}")));
                }
            }
            let report = verify::run_suite(&shape, seed, *tol);
            if cli.json {
                print_json(&report);
            } else {
                println!("identity suite for {} (seed {})", report.shape, report.seed);
                for c in &report.checks {
                    println!(
                        "{} {:<20} residual {:.3e} tolerance {:.1e}{}",
                        if c.passed { "PASS" } else { "FAIL" },
                        c.name,
                        c.residual,
                        c.tolerance,
                        c.note
                            .as_deref()
                            .map(|n| format!(" ({n})"))
                            .unwrap_or_default()
                    );
                }
            }
            Ok(if report.passed { 0 } else { EXIT_VERIFICATION })
        }
        Command::Convergence { config } => {
            let cfg = ScenarioConfig::load(config)?;
            let report = smallbody_cli::convergence(&cfg)?;
            if cli.json {
                print_json(&report);
            } else {
                println!("epsilon,sup_error,final_error,energy_drift,max_eps_r");
                for r in &report.rows {
                    println!(
                        "{},{},{},{},{}",
                        float(r.epsilon),
                        float(r.sup_error),
                        float(r.final_error),
                        float(r.energy_drift),
                        float(r.max_eps_r)
                    );
                }
                match report.monotone {
                    Some(true) => println!("# sup_error strictly decreasing"),
                    Some(false) => println!("# sup_error NOT strictly decreasing"),
                    None => println!("# single row, no monotonicity claim"),
                }
            }
            Ok(0)
        }
        Command::Forces { config } => {
            let cfg = ScenarioConfig::load(config)?;
            let report = smallbody_cli::forces(&cfg)?;
            if cli.json {
                print_json(&report);
            } else {
                let f = &report.forces;
                let v = |x: nalgebra::Vector3<f64>| {
                    format!("{} {} {}", float(x[0]), float(x[1]), float(x[2]))
                };
                println!("body    {} epsilon={}", report.shape, report.epsilon);
                println!("B       {}", v(f.b));
                println!("C_a     {}", v(f.c_a));
                println!("C_b     {}", v(f.c_b));
                println!("C_c     {}", v(f.c_c));
                println!("C_d     {}", v(f.c_d));
                println!(
                    "force   {} {}",
                    float(f.total_force.x),
                    float(f.total_force.y)
                );
                println!("torque  {}", float(f.total_torque));
                println!("limit   {}", v(report.small_body.predicted));
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            match &e {
                CliError::Runtime(_) | CliError::Io(_) => eprintln!("{}", e.diagnostic()),
                _ => eprintln!("{e}"),
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
