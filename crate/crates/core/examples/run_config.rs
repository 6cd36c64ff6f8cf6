//! Runs a TOML experiment file the same way the `simulate` subcommand does.
//!
//!     cargo run --example run_config -- configs/conservation.toml /tmp/out

use std::path::PathBuf;

use stripe_lab::config::parse_config;
use stripe_lab::experiment::run_experiment;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| "configs/conservation.toml".into());
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("stripe-lab-example"));
    let config = parse_config(&std::fs::read_to_string(&path)?)?;
    let run = run_experiment(&config, &out)?;
    let s = &run.summary;
    println!("{} to t = {} in {} steps", s.model, s.t_final, s.steps);
    println!("invariant drift {:.3e}, min rho {:.3e}", s.invariant_drift, s.min_rho);
    for m in &s.mode_rates {
        println!("  {:?} mode {}: rate {:.4}", m.field, m.m, m.rate);
    }
    println!("output in {}", out.display());
    Ok(())
}
