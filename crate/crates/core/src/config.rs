//! Experiment configuration: a sectioned `key = value` text format (TOML
//! subset) with strict schema checking.
//!
//! ```toml
//! model = "k-eecp"
//!
//! [params]
//! eps = 0.1
//!
//! [params.motility]
//! kind = "constant"
//! lambda = 1.0
//! mu = 1.0
//!
//! [grid]
//! n_x = 64
//!
//! [control]
//! t_end = 1.0
//!
//! [initial]
//! kind = "inoculum"
//! ```
//!
//! Every omitted key takes its documented default. Unknown keys are errors
//! that name the nearest valid key.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use toml::Value;

use crate::diagnostics::{DiagnosticsSpec, FieldSel};
use crate::grid::PeriodicGrid;
use crate::kinetic::StepControl;
use crate::macroscopic::MacroModel;
use crate::model::{ModelParams, MotilityProfile};

/// Parse or validation failure, addressed by 1-based line and column when
/// the offending key can be located.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "config line {l}, column {c}: {}", self.message),
            _ => write!(f, "config: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum ModelKind {
    #[default]
    #[serde(rename = "k-eecp")]
    Kinetic,
    #[serde(rename = "ad-eecp")]
    AdEecp,
    #[serde(rename = "science-2011")]
    Science2011,
}

impl ModelKind {
    pub fn macro_model(self) -> Option<MacroModel> {
        match self {
            ModelKind::Kinetic => None,
            ModelKind::AdEecp => Some(MacroModel::AdEecp),
            ModelKind::Science2011 => Some(MacroModel::Science2011),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Kinetic => "k-eecp",
            ModelKind::AdEecp => "ad-eecp",
            ModelKind::Science2011 => "science-2011",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub dim_x: usize,
    pub n_x: usize,
    /// Spatial period per axis (default `2 pi`).
    pub length_x: f64,
    /// `z` cells (kinetic runs only).
    pub n_z: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            dim_x: 1,
            n_x: 64,
            length_x: 2.0 * PI,
            n_z: 32,
        }
    }
}

/// Initial data. Spatial profiles refer to the first coordinate `x_0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialConfig {
    /// Gaussian colony at the origin, motile (`z` near `Z_w`), uniform
    /// nutrient, no AHL. Macroscopic runs use the `z` integral.
    Inoculum {
        mass: f64,
        width_x: f64,
        width_z: f64,
        nutrient: f64,
    },
    /// Independent uniform draws in `[0, scale)`.
    Random {
        scale_rho: f64,
        scale_h: f64,
        scale_n: f64,
        seed: u64,
    },
    /// Constant `h`, `n` and density `rho`; kinetic runs spread `rho` over
    /// a Gaussian in `z`.
    Homogeneous {
        rho: f64,
        h: f64,
        n: f64,
        z_center: f64,
        z_width: f64,
    },
    /// Constants plus `amplitude cos(m x_0)` added to one field. With
    /// `concentrated`, kinetic runs place all cells at `z = L_l(h)`.
    Mode {
        rho: f64,
        h: f64,
        n: f64,
        field: FieldSel,
        m: u32,
        amplitude: f64,
        concentrated: bool,
    },
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig::Inoculum {
            mass: 1.0,
            width_x: 0.3,
            width_z: 0.1,
            nutrient: 1.0,
        }
    }
}

impl InitialConfig {
    fn defaults() -> Vec<InitialConfig> {
        vec![
            InitialConfig::default(),
            InitialConfig::Random {
                scale_rho: 1.0,
                scale_h: 1.0,
                scale_n: 1.0,
                seed: 0,
            },
            InitialConfig::Homogeneous {
                rho: 1.0,
                h: 0.0,
                n: 1.0,
                z_center: 0.5,
                z_width: 0.1,
            },
            InitialConfig::Mode {
                rho: 0.0,
                h: 0.0,
                n: 0.0,
                field: FieldSel::H,
                m: 1,
                amplitude: 1.0,
                concentrated: false,
            },
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    pub energies: bool,
    /// Fluctuation energies about the constant state `(rho_a, alpha rho_a / beta, 0)`.
    pub reference_rho: Option<f64>,
    pub modes: Vec<u32>,
    pub fields: Vec<FieldSel>,
    /// Write a snapshot file with every record.
    pub snapshots: bool,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            energies: false,
            reference_rho: None,
            modes: vec![1],
            fields: vec![FieldSel::H],
            snapshots: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Dotted key path, e.g. `params.eps` or `initial.rho`.
    pub parameter: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub params: ModelParams,
    pub grid: GridConfig,
    pub control: StepControl,
    pub initial: InitialConfig,
    pub diagnostics: DiagnosticsConfig,
    pub output: OutputConfig,
    pub sweep: Option<SweepConfig>,
}

impl ExperimentConfig {
    pub fn periodic_grid(&self) -> crate::error::Result<PeriodicGrid> {
        PeriodicGrid::new(self.grid.dim_x, self.grid.n_x, self.grid.length_x, self.grid.n_z, self.params.z_w)
    }

    pub fn diagnostics_spec(&self) -> DiagnosticsSpec {
        DiagnosticsSpec {
            energies: self.diagnostics.energies,
            reference: self
                .diagnostics
                .reference_rho
                .map(|r| (r, self.params.alpha * r / self.params.beta)),
            modes: self.diagnostics.modes.clone(),
            mode_fields: self.diagnostics.fields.clone(),
            ..DiagnosticsSpec::default()
        }
    }

    /// Copy with the dotted key `path` set to `value`.
    pub fn with_value(&self, path: &str, value: f64) -> Result<Self, ConfigError> {
        let mut tree = Value::try_from(self).map_err(|e| plain(e.to_string()))?;
        let mut node = &mut tree;
        let parts: Vec<&str> = path.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let table = node
                .as_table_mut()
                .ok_or_else(|| plain(format!("'{path}' does not name a key")))?;
            let slot = table
                .get_mut(*part)
                .ok_or_else(|| plain(format!("'{path}' does not name a key")))?;
            if i + 1 == parts.len() {
                *slot = match slot {
                    Value::Float(_) => Value::Float(value),
                    Value::Integer(_) if value.fract() == 0.0 => Value::Integer(value as i64),
                    _ => return Err(plain(format!("'{path}' is not a numeric key"))),
                };
                break;
            }
            node = slot;
        }
        let out: ExperimentConfig = tree.try_into().map_err(|e: toml::de::Error| plain(e.message().to_string()))?;
        validate(&out).map_err(plain)?;
        Ok(out)
    }
}

fn plain(message: String) -> ConfigError {
    ConfigError {
        line: None,
        column: None,
        message,
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

/// Position of `key` inside the table `section` (dotted; empty for the root).
fn locate(text: &str, section: &str, key: &str) -> Option<(usize, usize)> {
    let mut current = String::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim_start();
        if let Some(rest) = trimmed.strip_prefix('[') {
            if let Some(name) = rest.split(']').next() {
                current = name.trim().to_string();
            }
            continue;
        }
        if current == section {
            let indent = line.len() - trimmed.len();
            if let Some(after) = trimmed.strip_prefix(key) {
                if after.trim_start().starts_with('=') {
                    return Some((i + 1, indent + 1));
                }
            }
        }
    }
    None
}

fn keys_of<T: Serialize>(value: &T) -> Vec<String> {
    match Value::try_from(value) {
        Ok(Value::Table(t)) => t.keys().cloned().collect(),
        _ => Vec::new(),
    }
}

fn nearest<'a>(key: &str, candidates: &'a [String]) -> Option<&'a str> {
    candidates
        .iter()
        .map(|c| (strsim::levenshtein(key, c), c))
        .min_by_key(|(d, _)| *d)
        .map(|(_, c)| c.as_str())
}

fn unknown_key(text: &str, section: &str, key: &str, allowed: &[String]) -> ConfigError {
    let (line, column) = locate(text, section, key).map_or((None, None), |(l, c)| (Some(l), Some(c)));
    let place = if section.is_empty() {
        "top level".to_string()
    } else {
        format!("[{section}]")
    };
    let hint = nearest(key, allowed).map_or(String::new(), |n| format!("; did you mean '{n}'?"));
    ConfigError {
        line,
        column,
        message: format!("unknown key '{key}' in {place}{hint}"),
    }
}

fn check_table(text: &str, section: &str, table: &toml::Table, allowed: &[String]) -> Result<(), ConfigError> {
    for key in table.keys() {
        if !allowed.iter().any(|a| a == key) {
            return Err(unknown_key(text, section, key, allowed));
        }
    }
    Ok(())
}

/// Allowed keys of a tagged table given its `kind`.
fn variant_keys<T: Serialize>(text: &str, section: &str, table: &toml::Table, variants: &[T]) -> Result<Vec<String>, ConfigError> {
    let kinds: Vec<(String, Vec<String>)> = variants
        .iter()
        .filter_map(|v| match Value::try_from(v) {
            Ok(Value::Table(t)) => {
                let kind = t.get("kind")?.as_str()?.to_string();
                Some((kind, t.keys().cloned().collect()))
            }
            _ => None,
        })
        .collect();
    let Some(kind) = table.get("kind") else {
        // the default variant applies
        return Ok(kinds.first().map(|k| k.1.clone()).unwrap_or_default());
    };
    let kind = kind.as_str().unwrap_or_default();
    match kinds.iter().find(|(k, _)| k == kind) {
        Some((_, keys)) => Ok(keys.clone()),
        None => {
            let names: Vec<String> = kinds.iter().map(|k| k.0.clone()).collect();
            let (line, column) = locate(text, section, "kind").map_or((None, None), |(l, c)| (Some(l), Some(c)));
            Err(ConfigError {
                line,
                column,
                message: format!("unknown kind '{kind}' in [{section}]; expected one of {}", names.join(", ")),
            })
        }
    }
}

fn check_schema(text: &str, root: &toml::Table) -> Result<(), ConfigError> {
    let default = ExperimentConfig {
        sweep: Some(SweepConfig {
            parameter: String::new(),
            values: Vec::new(),
        }),
        diagnostics: DiagnosticsConfig {
            reference_rho: Some(0.0),
            ..DiagnosticsConfig::default()
        },
        ..ExperimentConfig::default()
    };
    check_table(text, "", root, &keys_of(&default))?;
    let sections: [(&str, Vec<String>); 6] = [
        ("params", keys_of(&default.params)),
        ("grid", keys_of(&default.grid)),
        ("control", keys_of(&default.control)),
        ("diagnostics", keys_of(&default.diagnostics)),
        ("output", keys_of(&default.output)),
        ("sweep", keys_of(&default.sweep)),
    ];
    for (name, allowed) in &sections {
        if let Some(Value::Table(t)) = root.get(*name) {
            check_table(text, name, t, allowed)?;
        }
    }
    if let Some(Value::Table(params)) = root.get("params") {
        if let Some(Value::Table(m)) = params.get("motility") {
            let variants = [
                MotilityProfile::default(),
                MotilityProfile::Constant { lambda: 1.0, mu: 1.0 },
            ];
            let allowed = variant_keys(text, "params.motility", m, &variants)?;
            check_table(text, "params.motility", m, &allowed)?;
        }
    }
    if let Some(Value::Table(init)) = root.get("initial") {
        let allowed = variant_keys(text, "initial", init, &InitialConfig::defaults())?;
        check_table(text, "initial", init, &allowed)?;
    }
    Ok(())
}

/// Fills omitted keys of tagged tables from the defaults of their kind.
fn fill_variant_defaults(root: &mut toml::Table) {
    let fill = |table: &mut toml::Table, defaults: Vec<Value>| {
        let kind = table.get("kind").and_then(|k| k.as_str()).map(str::to_string);
        let chosen = defaults.into_iter().find_map(|d| match d {
            Value::Table(t) if kind.is_none() || t.get("kind").and_then(|k| k.as_str()) == kind.as_deref() => Some(t),
            _ => None,
        });
        if let Some(d) = chosen {
            for (k, v) in d {
                table.entry(k).or_insert(v);
            }
        }
    };
    if let Some(Value::Table(params)) = root.get_mut("params") {
        if let Some(Value::Table(m)) = params.get_mut("motility") {
            let defaults = [
                MotilityProfile::default(),
                MotilityProfile::Constant { lambda: 1.0, mu: 1.0 },
            ]
            .iter()
            .filter_map(|v| Value::try_from(v).ok())
            .collect();
            fill(m, defaults);
        }
    }
    if let Some(Value::Table(init)) = root.get_mut("initial") {
        let defaults = InitialConfig::defaults().iter().filter_map(|v| Value::try_from(v).ok()).collect();
        fill(init, defaults);
    }
}

/// Semantic checks beyond the schema.
pub fn validate(config: &ExperimentConfig) -> Result<(), String> {
    config.params.validate().map_err(|e| strip_kind(e.to_string()))?;
    config.control.validate().map_err(|e| strip_kind(e.to_string()))?;
    config.periodic_grid().map_err(|e| strip_kind(e.to_string()))?;
    if config.model != ModelKind::Kinetic && config.params.sobolev_s < 4 {
        return Err(format!(
            "sobolev_s must be at least 4 for macroscopic models, got {}",
            config.params.sobolev_s
        ));
    }
    let nonneg = |name: &str, v: f64| -> Result<(), String> {
        if v >= 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(format!("{name} must be nonnegative, got {v}"))
        }
    };
    match config.initial {
        InitialConfig::Inoculum {
            mass,
            width_x,
            width_z,
            nutrient,
        } => {
            nonneg("mass", mass)?;
            nonneg("nutrient", nutrient)?;
            if !(width_x > 0.0 && width_z > 0.0) {
                return Err("width_x and width_z must be positive".into());
            }
        }
        InitialConfig::Random {
            scale_rho,
            scale_h,
            scale_n,
            ..
        } => {
            nonneg("scale_rho", scale_rho)?;
            nonneg("scale_h", scale_h)?;
            nonneg("scale_n", scale_n)?;
        }
        InitialConfig::Homogeneous { rho, h, n, z_width, .. } => {
            nonneg("rho", rho)?;
            nonneg("h", h)?;
            nonneg("n", n)?;
            if !(z_width > 0.0) {
                return Err(format!("z_width must be positive, got {z_width}"));
            }
        }
        InitialConfig::Mode { amplitude, .. } => {
            if !amplitude.is_finite() {
                return Err("amplitude must be finite".into());
            }
        }
    }
    if let Some(r) = config.diagnostics.reference_rho {
        nonneg("reference_rho", r)?;
    }
    if let Some(sweep) = &config.sweep {
        if sweep.values.is_empty() {
            return Err("sweep values must not be empty".into());
        }
        if let Some(v) = sweep.values.iter().find(|v| !v.is_finite()) {
            return Err(format!("sweep values must be finite, got {v}"));
        }
    }
    Ok(())
}

fn strip_kind(message: String) -> String {
    // drop the error-category prefix, keep the "<key> must ..." part
    match message.split_once(": ") {
        Some((_, rest)) => rest.to_string(),
        None => message,
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut root: toml::Table = text.parse().map_err(|e: toml::de::Error| {
        let (line, column) = e.span().map_or((None, None), |s| {
            let (l, c) = line_col(text, s.start);
            (Some(l), Some(c))
        });
        ConfigError {
            line,
            column,
            message: e.message().trim().to_string(),
        }
    })?;
    check_schema(text, &root)?;
    fill_variant_defaults(&mut root);
    let config: ExperimentConfig = Value::Table(root).try_into().map_err(|e: toml::de::Error| plain(e.message().trim().to_string()))?;
    validate(&config).map_err(|message| {
        let key = message.split_whitespace().next().unwrap_or_default();
        let position = ["", "params", "grid", "control", "initial", "diagnostics", "sweep"]
            .iter()
            .find_map(|s| locate(text, s, key));
        ConfigError {
            line: position.map(|p| p.0),
            column: position.map(|p| p.1),
            message,
        }
    })?;
    Ok(config)
}

/// Canonical text form; `parse_config(&render(c)) == c`.
pub fn render(config: &ExperimentConfig) -> String {
    toml::to_string(config).expect("configuration serializes")
}
