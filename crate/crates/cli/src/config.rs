//! Flat TOML run configuration with strict key checking.

use ptgeom::models::InitialState;
use ptgeom::{GammaPolicy, Model, TwoLevelPTParams, YangLeeParams};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Spectrum,
    PhaseMap,
    Evolve,
    Metric,
    LindbladMetric,
    ControlOpt,
    YangLee,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Spectrum => "spectrum",
            Scenario::PhaseMap => "phase-map",
            Scenario::Evolve => "evolve",
            Scenario::Metric => "metric",
            Scenario::LindbladMetric => "lindblad-metric",
            Scenario::ControlOpt => "control-opt",
            Scenario::YangLee => "yang-lee",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    TwoLevel,
    YangLee,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    Plus,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum PolicyKey {
    Strict,
    Shift,
}

/// The document exactly as written; every key is optional here and
/// requirements are enforced per scenario.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: Option<Scenario>,
    model: Option<ModelKind>,
    s: Option<f64>,
    r: Option<f64>,
    lam: Option<f64>,
    kappa: Option<f64>,
    n_sites: Option<usize>,
    sites: Option<Vec<usize>>,
    ratios: Option<Vec<f64>>,
    ratio_start: Option<f64>,
    ratio_end: Option<f64>,
    ratio_steps: Option<usize>,
    lam_min: Option<f64>,
    lam_max: Option<f64>,
    kappa_min: Option<f64>,
    kappa_max: Option<f64>,
    grid_points: Option<usize>,
    phase_tol: Option<f64>,
    t_start: Option<f64>,
    t_end: Option<f64>,
    n_steps: Option<usize>,
    param: Option<String>,
    initial_state: Option<InitialKind>,
    gamma_policy: Option<PolicyKey>,
    fd_step: Option<f64>,
    horizon: Option<f64>,
    intervals: Option<usize>,
    max_iter: Option<usize>,
    amplitude_bound: Option<f64>,
    output: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub t_start: f64,
    pub t_end: f64,
    pub n_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioScan {
    pub start: f64,
    pub end: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseGrid {
    pub lam_min: f64,
    pub lam_max: f64,
    pub kappa_min: f64,
    pub kappa_max: f64,
    pub points: usize,
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlConfig {
    pub horizon: f64,
    pub intervals: usize,
    pub max_iter: usize,
    pub amplitude_bound: f64,
}

/// Validated configuration with every default applied.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub model: Model,
    /// Chain lengths of the yang-lee scenario.
    pub sites: Vec<usize>,
    /// `r/s` values of the lindblad-metric scenario, one series each; empty
    /// means a single series at the configured `s`.
    pub ratios: Vec<f64>,
    pub ratio_scan: RatioScan,
    pub phase_grid: PhaseGrid,
    pub grid: GridConfig,
    pub param: String,
    pub initial_state: InitialKind,
    pub gamma_policy: GammaPolicy,
    /// `None` selects the `1e-5 max(1, |theta|)` rule.
    pub fd_step: Option<f64>,
    pub control: ControlConfig,
    /// File-name prefix of every CSV written.
    pub output: String,
}

impl RunConfig {
    pub fn initial(&self) -> InitialState {
        match self.initial_state {
            InitialKind::Plus => InitialState::Plus,
            InitialKind::Zero => InitialState::Zero,
        }
    }
}

fn finite(field: &'static str, value: Option<f64>) -> CliResult<Option<f64>> {
    match value {
        Some(v) if !v.is_finite() => Err(CliError::Field { field, reason: format!("must be finite, got {v}") }),
        other => Ok(other),
    }
}

fn required(field: &'static str, value: Option<f64>, scenario: Scenario) -> CliResult<f64> {
    finite(field, value)?.ok_or(CliError::Missing { field, scenario: scenario.as_str() })
}

fn positive_count(field: &'static str, value: usize) -> CliResult<usize> {
    if value == 0 {
        return Err(CliError::Field { field, reason: "must be at least 1".into() });
    }
    Ok(value)
}

fn yang_lee(lam: f64, kappa: f64, n_sites: usize) -> CliResult<Model> {
    YangLeeParams::new(lam, kappa, n_sites)
        .map(Model::YangLee)
        .map_err(|e| CliError::Field { field: "n_sites", reason: e.to_string() })
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> CliResult<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    let scenario = raw.scenario.ok_or(CliError::Config("missing required field `scenario`".into()))?;
    let model_kind = match scenario {
        Scenario::Spectrum => {
            if raw.model == Some(ModelKind::YangLee) {
                return Err(CliError::Field { field: "model", reason: "spectrum scans the two-level model".into() });
            }
            ModelKind::TwoLevel
        }
        Scenario::PhaseMap | Scenario::YangLee => {
            if raw.model == Some(ModelKind::TwoLevel) {
                return Err(CliError::Field {
                    field: "model",
                    reason: format!("{} runs the Yang-Lee chain", scenario.as_str()),
                });
            }
            ModelKind::YangLee
        }
        _ => raw.model.unwrap_or(ModelKind::TwoLevel),
    };

    let mut sites = Vec::new();
    let model = match (scenario, model_kind) {
        (Scenario::PhaseMap, _) => {
            let n = raw.n_sites.ok_or(CliError::Missing { field: "n_sites", scenario: scenario.as_str() })?;
            yang_lee(finite("lam", raw.lam)?.unwrap_or(0.0), finite("kappa", raw.kappa)?.unwrap_or(0.0), n)?
        }
        (Scenario::YangLee, _) => {
            let lam = required("lam", raw.lam, scenario)?;
            let kappa = required("kappa", raw.kappa, scenario)?;
            sites = match (&raw.sites, raw.n_sites) {
                (Some(_), Some(_)) => {
                    return Err(CliError::Field { field: "sites", reason: "give either `sites` or `n_sites`".into() })
                }
                (Some(list), None) => list.clone(),
                (None, Some(n)) => vec![n],
                (None, None) => vec![1, 2, 3],
            };
            if sites.is_empty() {
                return Err(CliError::Field { field: "sites", reason: "must list at least one chain length".into() });
            }
            for &n in &sites {
                yang_lee(lam, kappa, n)?;
            }
            yang_lee(lam, kappa, sites[0])?
        }
        (_, ModelKind::TwoLevel) => {
            let r = required("r", raw.r, scenario)?;
            // a ratio sweep sets s per series
            let sweep = raw.ratios.as_ref().is_some_and(|q| !q.is_empty());
            let s = if sweep { finite("s", raw.s)?.unwrap_or(r) } else { required("s", raw.s, scenario)? };
            Model::TwoLevel(TwoLevelPTParams { s, r })
        }
        (_, ModelKind::YangLee) => {
            let lam = required("lam", raw.lam, scenario)?;
            let kappa = required("kappa", raw.kappa, scenario)?;
            let n = raw.n_sites.ok_or(CliError::Missing { field: "n_sites", scenario: scenario.as_str() })?;
            yang_lee(lam, kappa, n)?
        }
    };
    if raw.sites.is_some() && scenario != Scenario::YangLee {
        return Err(CliError::Field {
            field: "sites",
            reason: "only the yang-lee scenario takes a list of sites".into(),
        });
    }

    let ratios = raw.ratios.clone().unwrap_or_default();
    if !ratios.is_empty() {
        if scenario != Scenario::LindbladMetric || model_kind != ModelKind::TwoLevel {
            return Err(CliError::Field {
                field: "ratios",
                reason: "only two-level lindblad-metric runs take ratios".into(),
            });
        }
        if ratios.iter().any(|q| !q.is_finite() || *q <= 0.0) {
            return Err(CliError::Field {
                field: "ratios",
                reason: "every r/s ratio must be positive and finite".into(),
            });
        }
        if raw.r.is_some_and(|r| r == 0.0) {
            return Err(CliError::Field { field: "r", reason: "ratios need a non-zero r".into() });
        }
    }

    let ratio_scan = RatioScan {
        start: finite("ratio_start", raw.ratio_start)?.unwrap_or(0.0),
        end: finite("ratio_end", raw.ratio_end)?.unwrap_or(2.0),
        steps: positive_count("ratio_steps", raw.ratio_steps.unwrap_or(200))?,
    };
    if ratio_scan.end < ratio_scan.start {
        return Err(CliError::Field { field: "ratio_end", reason: "must not be below ratio_start".into() });
    }

    let phase_grid = PhaseGrid {
        lam_min: finite("lam_min", raw.lam_min)?.unwrap_or(-1.0),
        lam_max: finite("lam_max", raw.lam_max)?.unwrap_or(1.0),
        kappa_min: finite("kappa_min", raw.kappa_min)?.unwrap_or(-2.0),
        kappa_max: finite("kappa_max", raw.kappa_max)?.unwrap_or(2.0),
        points: raw.grid_points.unwrap_or(21),
        tol: finite("phase_tol", raw.phase_tol)?.unwrap_or(ptgeom::models::PHASE_TOL),
    };
    if phase_grid.points < 2 {
        return Err(CliError::Field { field: "grid_points", reason: "must be at least 2".into() });
    }
    if phase_grid.tol <= 0.0 {
        return Err(CliError::Field { field: "phase_tol", reason: "must be positive".into() });
    }

    let default_end = if scenario == Scenario::YangLee { 100.0 } else { 10.0 };
    let grid = GridConfig {
        t_start: finite("t_start", raw.t_start)?.unwrap_or(0.0),
        t_end: finite("t_end", raw.t_end)?.unwrap_or(default_end),
        n_steps: positive_count(
            "n_steps",
            raw.n_steps.unwrap_or(if scenario == Scenario::YangLee { 1000 } else { 100 }),
        )?,
    };
    if grid.t_end <= grid.t_start {
        return Err(CliError::Field { field: "t_end", reason: "must exceed t_start".into() });
    }

    let param = raw.param.clone().unwrap_or_else(|| model.parameter_names()[0].to_string());
    if model.get(&param).is_err() {
        return Err(CliError::Field {
            field: "param",
            reason: format!("`{param}` is not one of {:?}", model.parameter_names()),
        });
    }
    if !ratios.is_empty() && param != "s" && param != "r" {
        return Err(CliError::Field { field: "param", reason: "ratio sweeps estimate s or r".into() });
    }

    // dissipative two-level runs start in |0>; a |+> start carries no information under the shift policy
    let dissipative_two_level =
        matches!(scenario, Scenario::LindbladMetric | Scenario::ControlOpt) && model_kind == ModelKind::TwoLevel;
    let initial_state =
        raw.initial_state.unwrap_or(if dissipative_two_level { InitialKind::Zero } else { InitialKind::Plus });

    let gamma_policy = match raw.gamma_policy.unwrap_or(PolicyKey::Shift) {
        PolicyKey::Strict => GammaPolicy::Strict,
        PolicyKey::Shift => GammaPolicy::Shift,
    };

    let fd_step = finite("fd_step", raw.fd_step)?;
    if fd_step.is_some_and(|h| h <= 0.0) {
        return Err(CliError::Field { field: "fd_step", reason: "must be positive".into() });
    }

    let control = ControlConfig {
        horizon: finite("horizon", raw.horizon)?.unwrap_or(10.0),
        intervals: positive_count("intervals", raw.intervals.unwrap_or(100))?,
        max_iter: raw.max_iter.unwrap_or(200),
        amplitude_bound: finite("amplitude_bound", raw.amplitude_bound)?.unwrap_or(0.0),
    };
    if control.horizon <= 0.0 {
        return Err(CliError::Field { field: "horizon", reason: "must be positive".into() });
    }
    if control.amplitude_bound < 0.0 {
        return Err(CliError::Field { field: "amplitude_bound", reason: "must be >= 0 (0 means unbounded)".into() });
    }

    let output = raw.output.clone().unwrap_or_else(|| scenario.as_str().to_string());
    if output.is_empty() || output.contains(['/', '\\']) {
        return Err(CliError::Field { field: "output", reason: "must be a plain file-name prefix".into() });
    }

    Ok(RunConfig {
        scenario,
        model,
        sites,
        ratios,
        ratio_scan,
        phase_grid,
        grid,
        param,
        initial_state,
        gamma_policy,
        fd_step,
        control,
        output,
    })
}
