//! Config-driven runs: initial data, output files and parameter sweeps.
//!
//! A run directory holds `diagnostics.csv` (one row per record),
//! `summary.json` and, when requested, `snapshots/snap_NNNNN.txt`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{ExperimentConfig, InitialConfig};
use crate::diagnostics::{fit_exponential, gronwall_audit, CsvSink, DiagnosticsRecord, FieldSel};
use crate::error::{Error, Result};
use crate::grid::{PeriodicGrid, ScalarField, Snapshot};
use crate::kinetic::{self, KineticSolver, KineticState, Sink};
use crate::macroscopic::{random_macro_state, MacroSolver, MacroState};
use crate::model::smoothed_switch;

/// State types that can be written as snapshots.
pub trait SnapshotState {
    fn snapshot(&self) -> Snapshot;
}

impl SnapshotState for KineticState {
    fn snapshot(&self) -> Snapshot {
        let g = self.grid();
        Snapshot {
            dim_x: g.dim_x(),
            n_x: g.n_x(),
            n_z: g.n_z(),
            t: self.t,
            fields: vec![self.rho.values().to_vec(), self.h.values().to_vec(), self.n.values().to_vec()],
        }
    }
}

impl SnapshotState for MacroState {
    fn snapshot(&self) -> Snapshot {
        let g = self.grid();
        Snapshot {
            dim_x: g.dim_x(),
            n_x: g.n_x(),
            n_z: 0,
            t: self.t,
            fields: vec![self.rho.values().to_vec(), self.h.values().to_vec(), self.n.values().to_vec()],
        }
    }
}

/// Writes one numbered snapshot file per record.
pub struct SnapshotSink {
    dir: PathBuf,
    count: usize,
}

impl SnapshotSink {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir, count: 0 })
    }

    pub fn written(&self) -> usize {
        self.count
    }
}

impl<S: SnapshotState> Sink<S> for SnapshotSink {
    fn record(&mut self, state: &S, _record: &DiagnosticsRecord) -> Result<()> {
        let path = self.dir.join(format!("snap_{:05}.txt", self.count));
        state.snapshot().write(BufWriter::new(File::create(path)?))?;
        self.count += 1;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeRate {
    pub field: FieldSel,
    pub m: u32,
    pub rate: f64,
    pub residual: f64,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub model: &'static str,
    pub t_final: f64,
    pub steps: usize,
    pub records: usize,
    pub invariant_initial: f64,
    pub invariant_final: f64,
    /// `|I(t_end) - I(0)| / max(|I(0)|, 1e-300)`.
    pub invariant_drift: f64,
    pub min_rho: f64,
    pub min_h: f64,
    pub min_n: f64,
    /// Exponential rate of the second `z`-moment (kinetic runs).
    pub m2_z_rate: Option<f64>,
    pub mode_rates: Vec<ModeRate>,
    /// Fitted Gronwall constant when energies were recorded.
    pub gronwall_c: Option<f64>,
    pub gronwall_violations: Option<usize>,
}

/// Outcome of a run: the summary plus the in-memory records.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub records: Vec<DiagnosticsRecord>,
}

/// Wrapped Gaussian in `z`, normalized to `int profile dz = mass`.
fn z_profile(grid: &PeriodicGrid, mass: f64, center: f64, width: f64) -> Vec<f64> {
    let z_w = grid.z_w();
    let raw: Vec<f64> = grid
        .z_nodes()
        .iter()
        .map(|&z| {
            let mut d = (z - center).rem_euclid(z_w);
            if d > 0.5 * z_w {
                d -= z_w;
            }
            (-d * d / (2.0 * width * width)).exp()
        })
        .collect();
    let total: f64 = raw.iter().sum::<f64>() * grid.dz();
    raw.iter().map(|v| mass * v / total).collect()
}

fn mode_fields(grid: PeriodicGrid, init: &InitialConfig) -> Option<[ScalarField; 3]> {
    let InitialConfig::Mode {
        rho,
        h,
        n,
        field,
        m,
        amplitude,
        ..
    } = *init
    else {
        return None;
    };
    let mut out = [
        ScalarField::constant(grid, rho),
        ScalarField::constant(grid, h),
        ScalarField::constant(grid, n),
    ];
    let target = match field {
        FieldSel::Rho => &mut out[0],
        FieldSel::H => &mut out[1],
        FieldSel::N => &mut out[2],
    };
    for (node, v) in target.values_mut().iter_mut().enumerate() {
        *v += amplitude * (m as f64 * grid.x(node)[0]).cos();
    }
    Some(out)
}

pub fn kinetic_initial(config: &ExperimentConfig) -> Result<KineticState> {
    let grid = config.periodic_grid()?;
    let params = &config.params;
    match config.initial {
        InitialConfig::Inoculum {
            mass,
            width_x,
            width_z,
            nutrient,
        } => kinetic::inoculum(grid, mass, width_x, width_z, nutrient),
        InitialConfig::Random {
            scale_rho,
            scale_h,
            scale_n,
            seed,
        } => Ok(kinetic::random_state(grid, seed, [scale_rho, scale_h, scale_n])),
        InitialConfig::Homogeneous {
            rho,
            h,
            n,
            z_center,
            z_width,
        } => kinetic::homogeneous(grid, &z_profile(&grid, rho, z_center, z_width), h, n),
        InitialConfig::Mode { concentrated, .. } => {
            let [density, h, n] = mode_fields(grid, &config.initial).expect("mode initial data");
            if concentrated {
                return kinetic::concentrated(&density, &h, &n, params, grid.n_z());
            }
            // each column sits around its own switch level
            let width = 0.1 * grid.z_w();
            let mut rho = Vec::with_capacity(grid.n_nodes() * grid.n_z());
            for node in 0..grid.n_nodes() {
                let level = smoothed_switch(h.values()[node], params);
                rho.extend(z_profile(&grid, density.values()[node], level, width));
            }
            KineticState::new(0.0, crate::grid::KineticField::new(grid, rho)?, h, n)
        }
    }
}

pub fn macro_initial(config: &ExperimentConfig) -> Result<MacroState> {
    let grid = config.periodic_grid()?;
    match config.initial {
        InitialConfig::Random {
            scale_rho,
            scale_h,
            scale_n,
            seed,
        } => Ok(random_macro_state(grid, seed, [scale_rho, scale_h, scale_n])),
        InitialConfig::Homogeneous { rho, h, n, .. } => Ok(MacroState::constant(grid, rho, h, n)),
        InitialConfig::Mode { .. } => {
            let [rho, h, n] = mode_fields(grid, &config.initial).expect("mode initial data");
            MacroState::new(0.0, rho, h, n)
        }
        InitialConfig::Inoculum { .. } => {
            let k = kinetic_initial(config)?;
            MacroState::new(0.0, k.density(), k.h, k.n)
        }
    }
}

/// Replaces the seed of random initial data; other kinds are unaffected.
pub fn apply_seed(config: &mut ExperimentConfig, seed: u64) {
    if let InitialConfig::Random { seed: s, .. } = &mut config.initial {
        *s = seed;
    }
}

fn summarize(config: &ExperimentConfig, records: &[DiagnosticsRecord], steps: usize, t_final: f64) -> Result<RunSummary> {
    let first = records.first().ok_or_else(|| Error::Fit("run produced no records".into()))?;
    let last = records.last().expect("nonempty");
    let fold_min = |f: fn(&DiagnosticsRecord) -> f64| records.iter().map(f).fold(f64::INFINITY, f64::min);
    let drift = (last.combined_invariant - first.combined_invariant).abs() / first.combined_invariant.abs().max(1e-300);

    let t_min = 0.1 * config.control.t_end;
    let m2: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.t >= t_min)
        .filter_map(|r| r.m2_z.map(|m| (r.t, m)))
        .collect();
    let m2_z_rate = fit_exponential(&m2).ok().map(|f| f.rate);

    let mut mode_rates = Vec::new();
    for &field in &config.diagnostics.fields {
        for &m in &config.diagnostics.modes {
            let samples: Vec<(f64, f64)> = records
                .iter()
                .filter(|r| r.t >= t_min)
                .filter_map(|r| r.mode(field, m).map(|a| (r.t, a)))
                .collect();
            if let Ok(fit) = fit_exponential(&samples) {
                mode_rates.push(ModeRate {
                    field,
                    m,
                    rate: fit.rate,
                    residual: fit.residual,
                });
            }
        }
    }

    let audit = if config.diagnostics.energies && config.diagnostics.reference_rho.is_none() && records.len() >= 10 {
        Some(gronwall_audit(records, config.params.eps, config.params.sobolev_s)?)
    } else {
        None
    };

    Ok(RunSummary {
        model: config.model.name(),
        t_final,
        steps,
        records: records.len(),
        invariant_initial: first.combined_invariant,
        invariant_final: last.combined_invariant,
        invariant_drift: drift,
        min_rho: fold_min(|r| r.min_rho),
        min_h: fold_min(|r| r.min_h),
        min_n: fold_min(|r| r.min_n),
        m2_z_rate,
        mode_rates,
        gronwall_c: audit.map(|a| a.c),
        gronwall_violations: audit.map(|a| a.violations),
    })
}

/// `error.json`: `{"kind": ..., "message": ..., "t": ...}` for a failed run.
fn write_error_record(out_dir: &Path, e: &Error) -> Result<()> {
    let (kind, t) = match e {
        Error::Divergence { t, .. } => ("divergence", Some(*t)),
        Error::Cfl { .. } => ("cfl", None),
        Error::Resolution(_) => ("resolution", None),
        Error::Domain(_) | Error::ParameterDomain(_) | Error::ModelConfig(_) => ("domain", None),
        _ => ("other", None),
    };
    let record = serde_json::json!({ "kind": kind, "message": e.to_string(), "t": t });
    fs::write(out_dir.join("error.json"), format!("{record:#}\n"))?;
    Ok(())
}

/// Runs `config` and writes its outputs under `out_dir`.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<RunOutput> {
    fs::create_dir_all(out_dir)?;
    let spec = config.diagnostics_spec();
    let mut csv = CsvSink::new(BufWriter::new(File::create(out_dir.join("diagnostics.csv"))?));
    let mut snaps = if config.diagnostics.snapshots {
        Some(SnapshotSink::new(out_dir.join("snapshots"))?)
    } else {
        None
    };

    let solved: Result<_> = (|| match config.model.macro_model() {
        None => {
            let solver = KineticSolver::new(&config.params, config.periodic_grid()?)?;
            let initial = kinetic_initial(config)?;
            let mut sinks: Vec<&mut dyn Sink<KineticState>> = vec![&mut csv];
            if let Some(s) = snaps.as_mut() {
                sinks.push(s);
            }
            let traj = solver.run(&initial, &config.control, &spec, &mut sinks)?;
            Ok((traj.records, traj.steps, traj.final_state.t))
        }
        Some(model) => {
            let solver = MacroSolver::new(&config.params, config.periodic_grid()?, model)?;
            let initial = macro_initial(config)?;
            let mut sinks: Vec<&mut dyn Sink<MacroState>> = vec![&mut csv];
            if let Some(s) = snaps.as_mut() {
                sinks.push(s);
            }
            let traj = solver.run(&initial, &config.control, &spec, &mut sinks)?;
            Ok((traj.records, traj.steps, traj.final_state.t))
        }
    })();
    csv.into_inner().flush()?;
    let (records, steps, t_final) = match solved {
        Ok(v) => v,
        Err(e) => {
            write_error_record(out_dir, &e)?;
            return Err(e);
        }
    };

    let summary = summarize(config, &records, steps, t_final)?;
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Io(e.into()))?;
    fs::write(out_dir.join("summary.json"), json + "\n")?;
    Ok(RunOutput { summary, records })
}

/// One row of `sweep.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub index: usize,
    pub value: f64,
    /// `None` when the run failed; the error text is in `status`.
    pub m2_z_rate: Option<f64>,
    pub invariant_drift: Option<f64>,
    pub status: String,
}

/// Runs every value of `config.sweep` on a pool of `threads` workers.
/// Run `i` writes to `out_dir/run_iii`; rows come back in input order, so
/// the output does not depend on scheduling.
pub fn run_sweep(config: &ExperimentConfig, out_dir: &Path, threads: usize) -> Result<Vec<SweepRow>> {
    use rayon::prelude::*;
    let sweep = config
        .sweep
        .as_ref()
        .ok_or_else(|| crate::config::ConfigError {
            line: None,
            column: None,
            message: "no [sweep] table".into(),
        })?;
    let configs = sweep
        .values
        .iter()
        .map(|&v| config.with_value(&sweep.parameter, v))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    fs::create_dir_all(out_dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        configs
            .par_iter()
            .enumerate()
            .map(|(index, c)| {
                let value = sweep.values[index];
                match run_experiment(c, &out_dir.join(format!("run_{index:03}"))) {
                    Ok(out) => SweepRow {
                        index,
                        value,
                        m2_z_rate: out.summary.m2_z_rate,
                        invariant_drift: Some(out.summary.invariant_drift),
                        status: "ok".into(),
                    },
                    Err(e) => SweepRow {
                        index,
                        value,
                        m2_z_rate: None,
                        invariant_drift: None,
                        status: e.to_string().replace(',', ";"),
                    },
                }
            })
            .collect()
    });

    let mut w = BufWriter::new(File::create(out_dir.join("sweep.csv"))?);
    writeln!(w, "index,{},m2_z_rate,invariant_drift,status", sweep.parameter)?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.16e}"));
    for r in &rows {
        writeln!(
            w,
            "{},{:.16e},{},{},{}",
            r.index,
            r.value,
            opt(r.m2_z_rate),
            opt(r.invariant_drift),
            r.status
        )?;
    }
    w.flush()?;
    Ok(rows)
}
