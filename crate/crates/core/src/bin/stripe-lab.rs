//! Command-line front end. Exit codes: 0 success, 1 other failure,
//! 2 configuration error, 3 numerical divergence.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use stripe_lab::config::{parse_config, ExperimentConfig};
use stripe_lab::experiment::{apply_seed, run_experiment, run_sweep};
use stripe_lab::stability::{
    dissipativity_certificate, kinetic_eigenvalues, lifespan_lower_bound, macro_eigenvalues, mass_ode_solution, Masses,
};
use stripe_lab::{Error, HypothesisConstants};

#[derive(Parser)]
#[command(name = "stripe-lab", version, about = "Chemotaxis stripe-formation models")]
struct Cli {
    /// Experiment configuration (TOML); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory or file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Seed for random initial data.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Linearization {
    Kinetic,
    Macro,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Simulate,
    /// Tabulate eigenvalues of the linearization at (0, 0, n0).
    Dispersion {
        #[arg(long, value_enum, default_value = "macro")]
        model: Linearization,
        #[arg(long, default_value_t = 1.0)]
        n0: f64,
        /// Largest |m| (first axis).
        #[arg(long, default_value_t = 8)]
        max_mode: i64,
        /// Largest |m_z| (kinetic only).
        #[arg(long, default_value_t = 0)]
        max_mode_z: i64,
        /// Internal state at which the kinetic coefficients are taken.
        #[arg(long, default_value_t = 0.5)]
        z: f64,
    },
    /// Tabulate the closed-form total masses.
    Masses {
        #[arg(long, default_value_t = 1.0)]
        rho0: f64,
        #[arg(long, default_value_t = 0.0)]
        h0: f64,
        #[arg(long, default_value_t = 0.0)]
        n_mass0: f64,
        #[arg(long, default_value_t = 1.0)]
        n0: f64,
        #[arg(long, default_value_t = 1.0)]
        t_end: f64,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
    /// Dissipativity certificate for the steady state with density rho_a.
    Certify {
        #[arg(long)]
        rho_a: f64,
    },
    /// Lower bound on the local existence time.
    Lifespan {
        /// Initial energy.
        #[arg(long)]
        energy: f64,
        /// Gronwall constant.
        #[arg(long)]
        c: f64,
    },
    /// Run the configured parameter sweep.
    Sweep,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::ParameterDomain(_) | Error::ModelConfig(_) | Error::GridMismatch(_) => 2,
        Error::Divergence { .. } | Error::Cfl { .. } => 3,
        _ => 1,
    }
}

fn load(path: Option<&Path>) -> Result<ExperimentConfig, Error> {
    match path {
        None => Ok(ExperimentConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| {
                Error::Config(stripe_lab::config::ConfigError {
                    line: None,
                    column: None,
                    message: format!("cannot read {}: {e}", p.display()),
                })
            })?;
            Ok(parse_config(&text)?)
        }
    }
}

fn output(out: Option<&Path>) -> Result<Box<dyn Write>, Error> {
    Ok(match out {
        Some(p) => Box::new(std::io::BufWriter::new(fs::File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut config = load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        apply_seed(&mut config, seed);
    }
    let params = config.params;
    match cli.command {
        Command::Simulate => {
            let dir = cli.out.unwrap_or_else(|| PathBuf::from(&config.output.dir));
            let out = run_experiment(&config, &dir)?;
            let mut w = std::io::stdout().lock();
            writeln!(w, "{}", serde_json::to_string_pretty(&out.summary).expect("summary serializes"))?;
        }
        Command::Sweep => {
            let dir = cli.out.unwrap_or_else(|| PathBuf::from(&config.output.dir));
            let rows = run_sweep(&config, &dir, cli.threads)?;
            let failed = rows.iter().filter(|r| r.status != "ok").count();
            let mut w = std::io::stdout().lock();
            writeln!(w, "{} runs, {} failed; table in {}", rows.len(), failed, dir.join("sweep.csv").display())?;
        }
        Command::Dispersion {
            model,
            n0,
            max_mode,
            max_mode_z,
            z,
        } => {
            let mut w = output(cli.out.as_deref())?;
            writeln!(w, "m,m_z,re_lambda,im_lambda,branch")?;
            for m in -max_mode..=max_mode {
                let mut ms = vec![m];
                ms.resize(config.grid.dim_x, 0);
                let m_zs: Vec<i64> = match model {
                    Linearization::Kinetic => (-max_mode_z..=max_mode_z).collect(),
                    Linearization::Macro => vec![0],
                };
                for m_z in m_zs {
                    let p = match model {
                        Linearization::Kinetic => kinetic_eigenvalues(&ms, m_z, z, n0, &params)?,
                        Linearization::Macro => macro_eigenvalues(&ms, n0, &params)?,
                    };
                    writeln!(w, "{m},{m_z},{:.16e},0,1", p.lambda1)?;
                    writeln!(w, "{m},{m_z},{:.16e},0,2", p.lambda2)?;
                    writeln!(w, "{m},{m_z},{:.16e},{:.16e},3", p.lambda3.re, p.lambda3.im)?;
                }
            }
            w.flush()?;
        }
        Command::Masses {
            rho0,
            h0,
            n_mass0,
            n0,
            t_end,
            samples,
        } => {
            let mut w = output(cli.out.as_deref())?;
            writeln!(w, "t,a_rho,a_h,a_n")?;
            let initial = Masses {
                rho: rho0,
                h: h0,
                n: n_mass0,
            };
            let samples = samples.max(1);
            for i in 0..=samples {
                let t = t_end * i as f64 / samples as f64;
                let m = mass_ode_solution(initial, n0, &params, t)?;
                writeln!(w, "{t:.16e},{:.16e},{:.16e},{:.16e}", m.rho, m.h, m.n)?;
            }
            w.flush()?;
        }
        Command::Certify { rho_a } => {
            let constants = HypothesisConstants::compute(&params, config.grid.length_x, 1024)?;
            let cert = dissipativity_certificate(rho_a, &params, &constants)?;
            let report = serde_json::json!({
                "rho_a": rho_a,
                "lambda_b": constants.lambda_b,
                "certificate": cert,
            });
            let mut w = output(cli.out.as_deref())?;
            writeln!(w, "{}", serde_json::to_string_pretty(&report).expect("report serializes"))?;
        }
        Command::Lifespan { energy, c } => {
            let t0 = lifespan_lower_bound(energy, params.eps, params.sobolev_s, c)?;
            let mut w = output(cli.out.as_deref())?;
            writeln!(w, "{t0:.16e}")?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        // a closed pipe on stdout is not a failure of the run
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
