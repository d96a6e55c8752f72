//! Experiment configuration: a flat TOML file with one section per concern,
//! overridable from the command line, validated exhaustively. Validation
//! reports *every* violation it finds, each carrying a stable machine code,
//! so a config can be fixed in one round trip.

use std::fmt;
use std::path::{Path, PathBuf};

use brw_core::engine::BrwConfig;
use brw_core::galton::OffspringLaw;
use brw_core::tail::{DisplacementLaw, Regime, TailFunction, TailTable};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The operation a config drives; mirrors the CLI subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Normalize,
    Simulate,
    LimitSample,
    VerifyMax,
    VerifyPp,
    VerifyLemmas,
    VerifyGw,
    Report,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Normalize => "normalize",
            Self::Simulate => "simulate",
            Self::LimitSample => "limit-sample",
            Self::VerifyMax => "verify-max",
            Self::VerifyPp => "verify-pp",
            Self::VerifyLemmas => "verify-lemmas",
            Self::VerifyGw => "verify-gw",
            Self::Report => "report",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "normalize" => Self::Normalize,
            "simulate" => Self::Simulate,
            "limit-sample" => Self::LimitSample,
            "verify-max" => Self::VerifyMax,
            "verify-pp" => Self::VerifyPp,
            "verify-lemmas" => Self::VerifyLemmas,
            "verify-gw" => Self::VerifyGw,
            "report" => Self::Report,
            _ => return None,
        })
    }

    /// Whether this operation simulates or samples (and therefore needs
    /// offspring/displacement laws and a horizon).
    fn needs_laws(self) -> bool {
        !matches!(self, Self::Report)
    }

    fn needs_horizon(self) -> bool {
        matches!(
            self,
            Self::Normalize | Self::Simulate | Self::VerifyMax | Self::VerifyPp
        )
    }

    fn single_horizon(self) -> bool {
        matches!(self, Self::Simulate | Self::VerifyPp)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Stable machine-readable category for one validation failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationCode {
    /// The file is not syntactically valid TOML for the schema.
    Parse,
    /// `[experiment] kind` is not a recognized operation.
    UnknownKind,
    /// `[experiment] kind` disagrees with the invoked subcommand.
    KindMismatch,
    /// Offspring or displacement family name is not recognized.
    UnknownFamily,
    /// Declared normalization regime disagrees with the displacement law.
    RegimeMismatch,
    /// `[run] seed` is absent.
    MissingSeed,
    /// A field required by the experiment kind is absent.
    MissingField,
    /// A present field has an unusable value.
    InvalidParameter,
    /// A displacement table file cannot be read or parsed.
    TableUnreadable,
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Parse => "parse",
            Self::UnknownKind => "unknown-kind",
            Self::KindMismatch => "kind-mismatch",
            Self::UnknownFamily => "unknown-family",
            Self::RegimeMismatch => "regime-mismatch",
            Self::MissingSeed => "missing-seed",
            Self::MissingField => "missing-field",
            Self::InvalidParameter => "invalid-parameter",
            Self::TableUnreadable => "table-unreadable",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub message: String,
}

impl Violation {
    fn new(code: ViolationCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| format!("  [{}] {}", v.code, v.message))
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid override `{0}` (expected KEY=VALUE with a dotted key)")]
    BadOverride(String),
    #[error("configuration invalid ({} violation(s)):\n{}", .0.len(), format_violations(.0))]
    Invalid(Vec<Violation>),
}

#[cfg(test)]
impl ConfigError {
    /// All violation codes carried by this error (empty for I/O errors).
    pub fn codes(&self) -> Vec<ViolationCode> {
        match self {
            Self::Invalid(list) => list.iter().map(|v| v.code).collect(),
            _ => Vec::new(),
        }
    }
}

// ---------------------------------------------------------------------------
// Raw schema (serde view of the TOML file)
// ---------------------------------------------------------------------------

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Option<RawExperiment>,
    offspring: Option<RawOffspring>,
    displacement: Option<RawDisplacement>,
    normalization: Option<RawNormalization>,
    window: Option<RawWindow>,
    engine: Option<RawEngine>,
    run: Option<RawRun>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    kind: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOffspring {
    family: Option<String>,
    count: Option<u32>,
    mean: Option<f64>,
    probabilities: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDisplacement {
    family: Option<String>,
    c: Option<f64>,
    beta: Option<f64>,
    prefactor: Option<f64>,
    decrease_exponent: Option<f64>,
    table: Option<String>,
    table_regime: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNormalization {
    regime: Option<String>,
    delta: Option<f64>,
    t_big: Option<f64>,
    k_shift: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWindow {
    window_min: Option<f64>,
    grid: Option<Vec<f64>>,
    bound_grid: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEngine {
    node_cap: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    seed: Option<u64>,
    n: Option<u32>,
    n_list: Option<Vec<u32>>,
    replicates: Option<u64>,
    out: Option<String>,
    threads: Option<usize>,
    ks_threshold: Option<f64>,
    tv_distinct_threshold: Option<f64>,
    tv_total_threshold: Option<f64>,
    limit_samples: Option<u64>,
    count_cap: Option<u32>,
    j_cap: Option<u32>,
    cluster_tol: Option<f64>,
    gamma: Option<f64>,
    y_frac: Option<f64>,
    z_frac: Option<f64>,
    w_pool: Option<u64>,
    w_pool_cap: Option<u64>,
    emit_positions: Option<bool>,
}

// ---------------------------------------------------------------------------
// Resolved configuration and its serializable echo
// ---------------------------------------------------------------------------

/// Echo of every resolved setting (defaults filled in), embedded verbatim in
/// `report.json` so an artifact records the exact experiment definition.
/// Execution details that must not affect artifact bytes (thread count,
/// output directory) are deliberately absent.
#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub kind: ExperimentKind,
    pub offspring: OffspringEcho,
    pub displacement: DisplacementEcho,
    pub regime: Regime,
    pub seed: u64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub n_list: Vec<u32>,
    pub replicates: u64,
    pub normalization: NormalizationEcho,
    pub window: WindowEcho,
    pub node_cap: u64,
    pub analysis: AnalysisEcho,
}

#[derive(Debug, Clone, Serialize)]
pub struct OffspringEcho {
    pub family: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probabilities: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DisplacementEcho {
    pub family: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    pub prefactor: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decrease_exponent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table_regime: Option<Regime>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NormalizationEcho {
    pub delta: f64,
    pub t_big: f64,
    pub k_shift: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WindowEcho {
    pub window_min: f64,
    pub grid: Vec<f64>,
    pub bound_grid: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisEcho {
    pub ks_threshold: f64,
    pub tv_distinct_threshold: f64,
    pub tv_total_threshold: f64,
    pub limit_samples: u64,
    pub count_cap: u32,
    pub j_cap: u32,
    pub cluster_tol: f64,
    pub gamma: f64,
    pub y_frac: f64,
    pub z_frac: f64,
    pub w_pool: u64,
    pub w_pool_cap: u64,
    pub emit_positions: bool,
}

/// A validated experiment, ready to run: constructed laws plus every scalar
/// setting with defaults applied.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub kind: ExperimentKind,
    pub offspring: OffspringLaw,
    pub displacement: DisplacementLaw,
    pub regime: Regime,
    pub seed: u64,
    pub n_list: Vec<u32>,
    pub replicates: u64,
    pub out: PathBuf,
    pub threads: usize,
    pub delta: f64,
    pub t_big: f64,
    pub k_shift: f64,
    pub window_min: f64,
    pub grid: Vec<f64>,
    pub bound_grid: Vec<f64>,
    pub node_cap: u64,
    pub ks_threshold: f64,
    pub tv_distinct_threshold: f64,
    pub tv_total_threshold: f64,
    pub limit_samples: u64,
    pub count_cap: u32,
    pub j_cap: u32,
    pub cluster_tol: f64,
    pub gamma: f64,
    pub y_frac: f64,
    pub z_frac: f64,
    pub w_pool: u64,
    pub w_pool_cap: u64,
    pub emit_positions: bool,
    pub echo: ConfigEcho,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Default, Clone)]
pub struct CliOverrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    /// `key=value` pairs with dotted keys, e.g. `run.replicates=500`.
    pub assignments: Vec<String>,
}

/// Loads, overrides, and validates a config file for the given subcommand.
pub fn load(
    path: &Path,
    kind: ExperimentKind,
    overrides: &CliOverrides,
) -> Result<ResolvedConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut table: toml::Table = match text.parse() {
        Ok(t) => t,
        Err(e) => {
            return Err(ConfigError::Invalid(vec![Violation::new(
                ViolationCode::Parse,
                e.to_string(),
            )]))
        }
    };
    for assignment in &overrides.assignments {
        apply_assignment(&mut table, assignment)?;
    }
    let mut raw: RawConfig = match table.try_into() {
        Ok(raw) => raw,
        Err(e) => {
            return Err(ConfigError::Invalid(vec![Violation::new(
                ViolationCode::Parse,
                e.to_string(),
            )]))
        }
    };
    // Flags outrank both the file and --override assignments; they are
    // applied after parsing so a full-range u64 seed never has to squeeze
    // through TOML's i64 integers.
    let run = raw.run.get_or_insert_with(RawRun::default);
    if let Some(seed) = overrides.seed {
        run.seed = Some(seed);
    }
    if let Some(threads) = overrides.threads {
        run.threads = Some(threads);
    }
    if let Some(out) = &overrides.out {
        run.out = Some(out.display().to_string());
    }
    let base_dir = path.parent().unwrap_or_else(|| Path::new("."));
    resolve(raw, kind, base_dir).map_err(ConfigError::Invalid)
}

/// Parses `key=value` and sets the dotted path in the TOML table. The value
/// is parsed as a TOML literal (so numbers, booleans, and arrays work) and
/// falls back to a plain string.
fn apply_assignment(table: &mut toml::Table, assignment: &str) -> Result<(), ConfigError> {
    let Some((key, raw_value)) = assignment.split_once('=') else {
        return Err(ConfigError::BadOverride(assignment.to_string()));
    };
    let segments: Vec<&str> = key.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) || segments.is_empty() {
        return Err(ConfigError::BadOverride(assignment.to_string()));
    }
    let value = parse_toml_literal(raw_value);
    set_path(table, &segments, value);
    Ok(())
}

fn parse_toml_literal(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match wrapped.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("literal just inserted"),
        Err(_) => toml::Value::from(raw),
    }
}

fn set_path(table: &mut toml::Table, segments: &[&str], value: toml::Value) {
    let (last, parents) = segments.split_last().expect("non-empty path");
    let mut current = table;
    for parent in parents {
        let entry = current
            .entry(parent.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        if !entry.is_table() {
            *entry = toml::Value::Table(toml::Table::new());
        }
        current = entry.as_table_mut().expect("just ensured a table");
    }
    current.insert(last.to_string(), value);
}

// ---------------------------------------------------------------------------
// Semantic validation
// ---------------------------------------------------------------------------

const DEFAULT_DELTA: f64 = 0.1;
const DEFAULT_T_BIG: f64 = 10.0;
const DEFAULT_REPLICATES: u64 = 1_000;
const DEFAULT_LIMIT_SAMPLES: u64 = 20_000;
const DEFAULT_COUNT_CAP: u32 = 64;
const DEFAULT_J_CAP: u32 = 20;
const DEFAULT_CLUSTER_TOL: f64 = 1e-12;
const DEFAULT_KS_THRESHOLD: f64 = 0.05;
const DEFAULT_TV_DISTINCT: f64 = 0.05;
const DEFAULT_TV_TOTAL: f64 = 0.07;
const DEFAULT_GAMMA: f64 = 0.5;
const DEFAULT_Y_FRAC: f64 = 0.6;
const DEFAULT_Z_FRAC: f64 = 0.3;
const DEFAULT_W_POOL: u64 = 1_024;
const DEFAULT_W_POOL_CAP: u64 = 10_000;

fn resolve(
    raw: RawConfig,
    cli_kind: ExperimentKind,
    base_dir: &Path,
) -> Result<ResolvedConfig, Vec<Violation>> {
    let mut violations = Vec::new();

    // Kind: the subcommand decides; a declared kind must agree.
    if let Some(declared) = raw.experiment.as_ref().and_then(|e| e.kind.as_deref()) {
        match ExperimentKind::parse(declared) {
            None => violations.push(Violation::new(
                ViolationCode::UnknownKind,
                format!("experiment.kind `{declared}` is not a known operation"),
            )),
            Some(k) if k != cli_kind => violations.push(Violation::new(
                ViolationCode::KindMismatch,
                format!(
                    "experiment.kind is `{k}` but the `{cli_kind}` subcommand was invoked"
                ),
            )),
            Some(_) => {}
        }
    }
    let kind = cli_kind;

    // Seed is mandatory for every operation that draws or derives anything.
    let run = raw.run.unwrap_or_default();
    let seed = match run.seed {
        Some(s) => s,
        None => {
            violations.push(Violation::new(
                ViolationCode::MissingSeed,
                "run.seed is required (determinism is part of the output contract)",
            ));
            0
        }
    };

    let offspring = resolve_offspring(raw.offspring, kind, &mut violations);
    let (displacement, displacement_echo) =
        resolve_displacement(raw.displacement, kind, base_dir, &mut violations);

    // Normalization regime: explicit when the engine runs, else inferred.
    let normalization = raw.normalization.unwrap_or_default();
    let declared_regime = match normalization.regime.as_deref() {
        Some("suplog") => Some(Regime::Suplogarithmic),
        Some("sublog") => Some(Regime::Sublogarithmic),
        Some(other) => {
            violations.push(Violation::new(
                ViolationCode::InvalidParameter,
                format!("normalization.regime `{other}` is neither `suplog` nor `sublog`"),
            ));
            None
        }
        None => None,
    };
    let regime = match (declared_regime, &displacement) {
        (Some(declared), Some(law)) => {
            if declared != law.regime() {
                violations.push(Violation::new(
                    ViolationCode::RegimeMismatch,
                    format!(
                        "normalization.regime is `{}` but the displacement tail is {:?}",
                        normalization.regime.as_deref().unwrap_or(""),
                        law.regime()
                    ),
                ));
            }
            declared
        }
        (Some(declared), None) => declared,
        (None, Some(law)) => law.regime(),
        (None, None) => Regime::Suplogarithmic,
    };

    let delta = normalization.delta.unwrap_or(DEFAULT_DELTA);
    let t_big = normalization.t_big.unwrap_or(DEFAULT_T_BIG);
    let k_shift = normalization.k_shift.unwrap_or(0.0);
    if !(delta > 0.0 && delta < 1.0) {
        violations.push(Violation::new(
            ViolationCode::InvalidParameter,
            format!("normalization.delta must lie in (0,1), got {delta}"),
        ));
    }
    if !(t_big > 0.0 && t_big.is_finite()) {
        violations.push(Violation::new(
            ViolationCode::InvalidParameter,
            format!("normalization.t_big must be a positive real, got {t_big}"),
        ));
    }
    if !k_shift.is_finite() {
        violations.push(Violation::new(
            ViolationCode::InvalidParameter,
            format!("normalization.k_shift must be finite, got {k_shift}"),
        ));
    }

    let window = raw.window.unwrap_or_default();
    let window_min = window.window_min.unwrap_or(0.0);
    if !window_min.is_finite() {
        violations.push(Violation::new(
            ViolationCode::InvalidParameter,
            format!("window.window_min must be finite, got {window_min}"),
        ));
    }
    let grid = window.grid.unwrap_or_else(|| vec![0.0]);
    if grid.is_empty() || grid.iter().any(|x| !x.is_finite()) {
        violations.push(Violation::new(
            ViolationCode::InvalidParameter,
            "window.grid must be a non-empty list of finite reals".to_string(),
        ));
    }
    let bound_grid = window
        .bound_grid
        .unwrap_or_else(|| vec![1e4, 1e6, 1e8, 1e10]);
    if bound_grid.is_empty() || bound_grid.iter().any(|x| x.is_nan() || *x <= 0.0 || !x.is_finite()) {
        violations.push(Violation::new(
            ViolationCode::InvalidParameter,
            "window.bound_grid must be a non-empty list of positive reals".to_string(),
        ));
    }

    let node_cap = raw
        .engine
        .unwrap_or_default()
        .node_cap
        .unwrap_or(BrwConfig::DEFAULT_NODE_CAP);
    if node_cap == 0 {
        violations.push(Violation::new(
            ViolationCode::InvalidParameter,
            "engine.node_cap must be positive".to_string(),
        ));
    }

    // Horizons.
    let mut n_list: Vec<u32> = match (run.n, run.n_list.clone()) {
        (Some(_), Some(_)) => {
            violations.push(Violation::new(
                ViolationCode::InvalidParameter,
                "run.n and run.n_list are mutually exclusive".to_string(),
            ));
            Vec::new()
        }
        (Some(n), None) => vec![n],
        (None, Some(list)) => list,
        (None, None) => Vec::new(),
    };
    if kind.needs_horizon() {
        if n_list.is_empty() {
            violations.push(Violation::new(
                ViolationCode::MissingField,
                format!("`{kind}` needs run.n (or run.n_list)"),
            ));
        } else if n_list.contains(&0) {
            violations.push(Violation::new(
                ViolationCode::InvalidParameter,
                "horizons must be at least 1".to_string(),
            ));
        } else if kind.single_horizon() && n_list.len() > 1 {
            violations.push(Violation::new(
                ViolationCode::InvalidParameter,
                format!("`{kind}` runs a single horizon; got {} entries", n_list.len()),
            ));
        }
    } else {
        n_list.clear();
    }

    let replicates = run.replicates.unwrap_or(DEFAULT_REPLICATES);
    if replicates == 0 {
        violations.push(Violation::new(
            ViolationCode::InvalidParameter,
            "run.replicates must be positive".to_string(),
        ));
    }
    let threads = run.threads.unwrap_or(1);
    if threads == 0 || threads > 512 {
        violations.push(Violation::new(
            ViolationCode::InvalidParameter,
            format!("run.threads must lie in 1..=512, got {threads}"),
        ));
    }

    let ks_threshold = run.ks_threshold.unwrap_or(DEFAULT_KS_THRESHOLD);
    let tv_distinct_threshold = run.tv_distinct_threshold.unwrap_or(DEFAULT_TV_DISTINCT);
    let tv_total_threshold = run.tv_total_threshold.unwrap_or(DEFAULT_TV_TOTAL);
    let limit_samples = run.limit_samples.unwrap_or(DEFAULT_LIMIT_SAMPLES);
    let count_cap = run.count_cap.unwrap_or(DEFAULT_COUNT_CAP);
    let j_cap = run.j_cap.unwrap_or(DEFAULT_J_CAP);
    let cluster_tol = run.cluster_tol.unwrap_or(DEFAULT_CLUSTER_TOL);
    let gamma = run.gamma.unwrap_or(DEFAULT_GAMMA);
    let y_frac = run.y_frac.unwrap_or(DEFAULT_Y_FRAC);
    let z_frac = run.z_frac.unwrap_or(DEFAULT_Z_FRAC);
    let w_pool = run.w_pool.unwrap_or(DEFAULT_W_POOL);
    let w_pool_cap = run.w_pool_cap.unwrap_or(DEFAULT_W_POOL_CAP);
    let emit_positions = run.emit_positions.unwrap_or(false);
    for (name, value, lo, hi) in [
        ("run.ks_threshold", ks_threshold, 0.0, 1.0),
        ("run.tv_distinct_threshold", tv_distinct_threshold, 0.0, 1.0),
        ("run.tv_total_threshold", tv_total_threshold, 0.0, 1.0),
        ("run.gamma", gamma, 0.0, 1.0),
    ] {
        if !(value > lo && value < hi) {
            violations.push(Violation::new(
                ViolationCode::InvalidParameter,
                format!("{name} must lie in ({lo},{hi}), got {value}"),
            ));
        }
    }
    if !(cluster_tol > 0.0 && cluster_tol < 1e-3) {
        violations.push(Violation::new(
            ViolationCode::InvalidParameter,
            format!("run.cluster_tol must lie in (0, 1e-3), got {cluster_tol}"),
        ));
    }
    if limit_samples == 0 || count_cap == 0 || j_cap == 0 || w_pool == 0 || w_pool_cap == 0 {
        violations.push(Violation::new(
            ViolationCode::InvalidParameter,
            "run.limit_samples, run.count_cap, run.j_cap, run.w_pool, and \
             run.w_pool_cap must all be positive"
                .to_string(),
        ));
    }

    let out = PathBuf::from(run.out.unwrap_or_else(|| "out".to_string()));

    if !violations.is_empty() {
        return Err(violations);
    }

    // `needs_laws` kinds are guaranteed both laws here; `report` (which only
    // consolidates existing artifacts) carries placeholders that are never
    // executed against.
    let (offspring, offspring_echo) = offspring.unwrap_or_else(|| {
        (
            OffspringLaw::deterministic(2).expect("placeholder law"),
            OffspringEcho {
                family: "deterministic".to_string(),
                count: Some(2),
                mean: None,
                probabilities: None,
            },
        )
    });
    let displacement = displacement
        .unwrap_or_else(|| DisplacementLaw::power_log(0.5, 2.0).expect("placeholder law"));
    let displacement_echo = displacement_echo.unwrap_or_else(|| DisplacementEcho {
        family: "power-log".to_string(),
        c: Some(0.5),
        beta: Some(2.0),
        prefactor: 1.0,
        decrease_exponent: None,
        table: None,
        table_regime: None,
    });

    let echo = ConfigEcho {
        kind,
        offspring: offspring_echo,
        displacement: displacement_echo,
        regime,
        seed,
        n_list: n_list.clone(),
        replicates,
        normalization: NormalizationEcho {
            delta,
            t_big,
            k_shift,
        },
        window: WindowEcho {
            window_min,
            grid: grid.clone(),
            bound_grid: bound_grid.clone(),
        },
        node_cap,
        analysis: AnalysisEcho {
            ks_threshold,
            tv_distinct_threshold,
            tv_total_threshold,
            limit_samples,
            count_cap,
            j_cap,
            cluster_tol,
            gamma,
            y_frac,
            z_frac,
            w_pool,
            w_pool_cap,
            emit_positions,
        },
    };

    Ok(ResolvedConfig {
        kind,
        offspring,
        displacement,
        regime,
        seed,
        n_list,
        replicates,
        out,
        threads,
        delta,
        t_big,
        k_shift,
        window_min,
        grid,
        bound_grid,
        node_cap,
        ks_threshold,
        tv_distinct_threshold,
        tv_total_threshold,
        limit_samples,
        count_cap,
        j_cap,
        cluster_tol,
        gamma,
        y_frac,
        z_frac,
        w_pool,
        w_pool_cap,
        emit_positions,
        echo,
    })
}

#[allow(clippy::type_complexity)]
fn resolve_offspring(
    raw: Option<RawOffspring>,
    kind: ExperimentKind,
    violations: &mut Vec<Violation>,
) -> Option<(OffspringLaw, OffspringEcho)> {
    let section = match raw {
        Some(s) => s,
        None => {
            if kind.needs_laws() {
                violations.push(Violation::new(
                    ViolationCode::MissingField,
                    "an [offspring] section is required",
                ));
            }
            return None;
        }
    };
    let family = match section.family.as_deref() {
        Some(f) => f,
        None => {
            violations.push(Violation::new(
                ViolationCode::MissingField,
                "offspring.family is required",
            ));
            return None;
        }
    };
    let built = match family {
        "deterministic" => match section.count {
            Some(count) => OffspringLaw::deterministic(u64::from(count)).map(|law| {
                (
                    law,
                    OffspringEcho {
                        family: family.to_string(),
                        count: Some(count),
                        mean: None,
                        probabilities: None,
                    },
                )
            }),
            None => {
                violations.push(Violation::new(
                    ViolationCode::MissingField,
                    "offspring.count is required for the deterministic family",
                ));
                return None;
            }
        },
        "poisson" | "geometric" => match section.mean {
            Some(mean) => {
                let law = if family == "poisson" {
                    OffspringLaw::poisson(mean)
                } else {
                    OffspringLaw::geometric(mean)
                };
                law.map(|law| {
                    (
                        law,
                        OffspringEcho {
                            family: family.to_string(),
                            count: None,
                            mean: Some(mean),
                            probabilities: None,
                        },
                    )
                })
            }
            None => {
                violations.push(Violation::new(
                    ViolationCode::MissingField,
                    format!("offspring.mean is required for the {family} family"),
                ));
                return None;
            }
        },
        "explicit" => match &section.probabilities {
            Some(probabilities) => OffspringLaw::explicit(probabilities).map(|law| {
                (
                    law,
                    OffspringEcho {
                        family: family.to_string(),
                        count: None,
                        mean: None,
                        probabilities: Some(probabilities.clone()),
                    },
                )
            }),
            None => {
                violations.push(Violation::new(
                    ViolationCode::MissingField,
                    "offspring.probabilities is required for the explicit family",
                ));
                return None;
            }
        },
        other => {
            violations.push(Violation::new(
                ViolationCode::UnknownFamily,
                format!(
                    "offspring.family `{other}` is not one of deterministic, \
                     poisson, geometric, explicit"
                ),
            ));
            return None;
        }
    };
    match built {
        Ok(pair) => Some(pair),
        Err(e) => {
            violations.push(Violation::new(
                ViolationCode::InvalidParameter,
                format!("offspring law rejected: {e}"),
            ));
            None
        }
    }
}

fn resolve_displacement(
    raw: Option<RawDisplacement>,
    kind: ExperimentKind,
    base_dir: &Path,
    violations: &mut Vec<Violation>,
) -> (Option<DisplacementLaw>, Option<DisplacementEcho>) {
    let section = match raw {
        Some(s) => s,
        None => {
            if kind.needs_laws() {
                violations.push(Violation::new(
                    ViolationCode::MissingField,
                    "a [displacement] section is required",
                ));
            }
            return (None, None);
        }
    };
    let family = match section.family.as_deref() {
        Some(f) => f,
        None => {
            violations.push(Violation::new(
                ViolationCode::MissingField,
                "displacement.family is required",
            ));
            return (None, None);
        }
    };
    let prefactor = section.prefactor.unwrap_or(1.0);
    let mut table_regime = None;
    let tail = match family {
        "lognormal" => Some(TailFunction::lognormal()),
        "power-log" => match (section.c, section.beta) {
            (Some(c), Some(beta)) => match TailFunction::power_log(c, beta) {
                Ok(t) => Some(t),
                Err(e) => {
                    violations.push(Violation::new(
                        ViolationCode::InvalidParameter,
                        format!("displacement tail rejected: {e}"),
                    ));
                    None
                }
            },
            _ => {
                violations.push(Violation::new(
                    ViolationCode::MissingField,
                    "displacement.c and displacement.beta are required for power-log",
                ));
                None
            }
        },
        "table" => {
            let regime = match section.table_regime.as_deref() {
                Some("suplog") => Some(Regime::Suplogarithmic),
                Some("sublog") => Some(Regime::Sublogarithmic),
                Some(other) => {
                    violations.push(Violation::new(
                        ViolationCode::InvalidParameter,
                        format!(
                            "displacement.table_regime `{other}` is neither \
                             `suplog` nor `sublog`"
                        ),
                    ));
                    None
                }
                None => {
                    violations.push(Violation::new(
                        ViolationCode::MissingField,
                        "displacement.table_regime is required for the table family",
                    ));
                    None
                }
            };
            let path = match section.table.as_deref() {
                Some(p) => Some(p),
                None => {
                    violations.push(Violation::new(
                        ViolationCode::MissingField,
                        "displacement.table (a CSV path) is required for the table family",
                    ));
                    None
                }
            };
            table_regime = regime;
            match (path, regime) {
                (Some(path), Some(regime)) => {
                    let full = base_dir.join(path);
                    match std::fs::read_to_string(&full) {
                        Ok(text) => match TailTable::from_csv(&text, regime) {
                            Ok(table) => Some(TailFunction::from_table(table)),
                            Err(e) => {
                                violations.push(Violation::new(
                                    ViolationCode::TableUnreadable,
                                    format!("table {} rejected: {e}", full.display()),
                                ));
                                None
                            }
                        },
                        Err(e) => {
                            violations.push(Violation::new(
                                ViolationCode::TableUnreadable,
                                format!("cannot read table {}: {e}", full.display()),
                            ));
                            None
                        }
                    }
                }
                _ => None,
            }
        }
        other => {
            violations.push(Violation::new(
                ViolationCode::UnknownFamily,
                format!(
                    "displacement.family `{other}` is not one of lognormal, \
                     power-log, table"
                ),
            ));
            None
        }
    };
    let tail = match (tail, section.decrease_exponent) {
        (Some(t), Some(xi)) => match t.with_decrease_exponent(xi) {
            Ok(t) => Some(t),
            Err(e) => {
                violations.push(Violation::new(
                    ViolationCode::InvalidParameter,
                    format!("displacement.decrease_exponent rejected: {e}"),
                ));
                None
            }
        },
        (t, _) => t,
    };
    let law = tail.and_then(|t| match DisplacementLaw::new(t, prefactor) {
        Ok(law) => Some(law),
        Err(e) => {
            violations.push(Violation::new(
                ViolationCode::InvalidParameter,
                format!("displacement law rejected: {e}"),
            ));
            None
        }
    });
    let echo = DisplacementEcho {
        family: family.to_string(),
        c: section.c,
        beta: section.beta,
        prefactor,
        decrease_exponent: section.decrease_exponent,
        table: section.table.clone(),
        table_regime,
    };
    (law, Some(echo))
}
