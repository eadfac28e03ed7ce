//! JSON run configurations. Every file carries a `schema` version and
//! rejects unknown keys.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use leapfrog::boundstate::{DressingOptions, FivePipelineConfig, DEFAULT_FRACTION};
use leapfrog::robustness::RobustnessSetup;
use leapfrog::scars::MAX_ENUMERATION_SITES;
use leapfrog::scattering::CollisionSetup;
use leapfrog::{parse_loadout, Boundary, EvolutionPlan, FockState, ModelParams, SignMode};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

fn invalid(field: &str, message: impl Into<String>) -> CliError {
    CliError::Config { field: field.into(), message: message.into() }
}

pub trait RunConfig: Serialize + DeserializeOwned {
    fn schema(&self) -> u32;

    fn validate(&self) -> Result<(), CliError>;

    fn from_json(text: &str) -> Result<Self, CliError> {
        let config: Self = serde_json::from_str(text).map_err(|e| invalid("<document>", e.to_string()))?;
        if config.schema() != SCHEMA_VERSION {
            return Err(invalid("schema", format!("expected {SCHEMA_VERSION}, found {}", config.schema())));
        }
        config.validate()?;
        Ok(config)
    }

    fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| invalid("<file>", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config { field, message } => {
                CliError::Config { field, message: format!("{message} (in {})", path.display()) }
            }
            other => other,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    /// File name prefix inside the output directory.
    pub stem: String,
}

impl Outputs {
    fn named(stem: &str) -> Self {
        Outputs { stem: stem.into() }
    }

    fn validate(&self) -> Result<(), CliError> {
        let ok = !self.stem.is_empty() && self.stem.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c));
        if !ok {
            return Err(invalid("outputs.stem", format!("`{}` is not a plain file name", self.stem)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    LabFrame,
    Gauged,
    Effective,
    FluxError,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::LabFrame => "lab_frame",
            ModelKind::Gauged => "gauged",
            ModelKind::Effective => "effective",
            ModelKind::FluxError => "flux_error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Observable {
    Density,
    Doublon,
    /// Population strictly right of `j0`.
    Transmitted { j0: usize },
    /// Population of `sites`, or of the loadout's occupied sites when omitted.
    InitialPopulation {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sites: Option<Vec<usize>>,
    },
    /// `|<target|psi>|^2` for a product state.
    Overlap { target: String },
}

impl Observable {
    pub fn name(&self) -> &'static str {
        match self {
            Observable::Density => "density",
            Observable::Doublon => "doublon",
            Observable::Transmitted { .. } => "transmitted",
            Observable::InitialPopulation { .. } => "initial_population",
            Observable::Overlap { .. } => "overlap",
        }
    }
}

fn default_outputs_scenario() -> Outputs {
    Outputs::named("scenario")
}

/// One time evolution of a product state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema: u32,
    pub model: ModelKind,
    pub params: ModelParams,
    pub loadout: String,
    pub plan: EvolutionPlan,
    pub observables: Vec<Observable>,
    #[serde(default = "default_outputs_scenario")]
    pub outputs: Outputs,
}

impl ScenarioConfig {
    pub fn seed(&self) -> Result<FockState, CliError> {
        parse_loadout(&self.loadout).map_err(|e| invalid("loadout", e.to_string()))
    }
}

impl RunConfig for ScenarioConfig {
    fn schema(&self) -> u32 {
        self.schema
    }

    fn validate(&self) -> Result<(), CliError> {
        self.params.validate().map_err(|e| invalid("params", e.to_string()))?;
        let seed = self.seed()?;
        let l = self.params.sites;
        if seed.sites() != l {
            return Err(invalid("loadout", format!("{} sites, but params.sites is {l}", seed.sites())));
        }
        if seed.n_atoms() == 0 {
            return Err(invalid("loadout", "holds no atoms"));
        }
        self.plan.validate().map_err(|e| invalid("plan", e.to_string()))?;
        if self.observables.is_empty() {
            return Err(invalid("observables", "nothing to measure"));
        }
        for (i, obs) in self.observables.iter().enumerate() {
            let field = format!("observables[{i}]");
            match obs {
                Observable::Transmitted { j0 } if *j0 >= l => {
                    return Err(invalid(&field, format!("j0 = {j0} is off the {l}-site chain")));
                }
                Observable::InitialPopulation { sites: Some(s) } => {
                    if let Some(j) = s.iter().find(|&&j| j >= l) {
                        return Err(invalid(&field, format!("site {j} is off the {l}-site chain")));
                    }
                }
                Observable::Overlap { target } => {
                    let t = parse_loadout(target).map_err(|e| invalid(&field, e.to_string()))?;
                    if t.sites() != l {
                        return Err(invalid(&field, format!("target has {} sites, expected {l}", t.sites())));
                    }
                }
                _ => {}
            }
            if self.observables[..i].iter().any(|o| o.name() == obs.name()) {
                return Err(invalid(&field, format!("{} is listed twice", obs.name())));
            }
        }
        self.outputs.validate()
    }
}

fn two() -> f64 {
    2.0
}

fn default_outputs_collision() -> Outputs {
    Outputs::named("collision")
}

/// A 2-tuplet hitting an orphan, next to its single-particle surrogate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatterConfig {
    pub schema: u32,
    pub setup: CollisionSetup,
    /// Impurity strength of the surrogate chain.
    #[serde(default = "two")]
    pub depth: f64,
    #[serde(default = "default_outputs_collision")]
    pub outputs: Outputs,
}

impl Default for ScatterConfig {
    fn default() -> Self {
        ScatterConfig {
            schema: SCHEMA_VERSION,
            setup: CollisionSetup::default(),
            depth: 2.0,
            outputs: default_outputs_collision(),
        }
    }
}

impl RunConfig for ScatterConfig {
    fn schema(&self) -> u32 {
        self.schema
    }

    fn validate(&self) -> Result<(), CliError> {
        self.setup.initial_state().map_err(|e| invalid("setup", e.to_string()))?;
        if !(self.setup.t_end > 0.0 && self.setup.dt > 0.0) {
            return Err(invalid("setup", "t_end and dt must be positive"));
        }
        if !self.depth.is_finite() {
            return Err(invalid("depth", "must be finite"));
        }
        self.outputs.validate()
    }
}

fn default_fraction() -> f64 {
    DEFAULT_FRACTION
}

fn default_plateau() -> (f64, f64) {
    FivePipelineConfig::default().plateau
}

fn default_pipeline_dt() -> f64 {
    FivePipelineConfig::default().dt
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineSection {
    #[serde(default = "default_plateau")]
    pub plateau: (f64, f64),
    #[serde(default = "default_pipeline_dt")]
    pub dt: f64,
    #[serde(default)]
    pub gram_corrected: bool,
    #[serde(default = "yes")]
    pub renormalize: bool,
}

fn default_outputs_bound() -> Outputs {
    Outputs::named("boundstates")
}

/// Localized eigenstates of an `N`-tuplet and the population they predict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundStatesConfig {
    pub schema: u32,
    pub sites: usize,
    pub atoms: usize,
    /// Leftmost tuplet site; centred when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first: Option<usize>,
    #[serde(default)]
    pub boundary: Boundary,
    #[serde(default)]
    pub signs: SignMode,
    #[serde(default = "default_fraction")]
    pub min_fraction: f64,
    /// Dressed-state prediction, for a centred 5-tuplet on an open chain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pipeline: Option<PipelineSection>,
    #[serde(default = "default_outputs_bound")]
    pub outputs: Outputs,
}

impl BoundStatesConfig {
    pub fn first_site(&self) -> usize {
        self.first.unwrap_or((self.sites - self.atoms) / 2)
    }

    pub fn pipeline_config(&self) -> Option<FivePipelineConfig> {
        self.pipeline.as_ref().map(|p| FivePipelineConfig {
            sites: self.sites,
            plateau: p.plateau,
            dt: p.dt,
            dressing: DressingOptions { renormalize: p.renormalize },
            gram_corrected: p.gram_corrected,
        })
    }
}

impl RunConfig for BoundStatesConfig {
    fn schema(&self) -> u32 {
        self.schema
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.atoms == 0 || self.atoms > self.sites {
            return Err(invalid("atoms", format!("{} atoms on {} sites", self.atoms, self.sites)));
        }
        if self.sites > leapfrog::fock::MAX_SITES {
            return Err(invalid("sites", format!("at most {} sites", leapfrog::fock::MAX_SITES)));
        }
        if self.first.is_some_and(|f| f + self.atoms > self.sites) {
            return Err(invalid("first", "tuplet runs off the chain"));
        }
        if !(self.min_fraction > 0.0 && self.min_fraction <= 1.0) {
            return Err(invalid("min_fraction", "must lie in (0, 1]"));
        }
        if let Some(p) = &self.pipeline {
            let centred = self.first.is_none_or(|f| f == (self.sites - self.atoms) / 2);
            if self.atoms != 5 || !centred || self.boundary != Boundary::Open {
                return Err(invalid("pipeline", "needs a centred 5-tuplet on an open chain"));
            }
            if !(p.plateau.0 >= 0.0 && p.plateau.1 > p.plateau.0 && p.dt > 0.0) {
                return Err(invalid("pipeline", "plateau must be an increasing window and dt positive"));
            }
        }
        self.outputs.validate()
    }
}

fn default_lengths() -> Vec<usize> {
    (2..=20).collect()
}

fn default_outputs_scars() -> Outputs {
    Outputs::named("scars")
}

/// Frozen product-state counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScarsConfig {
    pub schema: u32,
    #[serde(default = "default_lengths")]
    pub lengths: Vec<usize>,
    /// Cross-check the recursion by brute force up to this length (0 skips).
    #[serde(default)]
    pub enumerate_up_to: usize,
    #[serde(default = "default_outputs_scars")]
    pub outputs: Outputs,
}

impl Default for ScarsConfig {
    fn default() -> Self {
        ScarsConfig {
            schema: SCHEMA_VERSION,
            lengths: default_lengths(),
            enumerate_up_to: 8,
            outputs: default_outputs_scars(),
        }
    }
}

impl RunConfig for ScarsConfig {
    fn schema(&self) -> u32 {
        self.schema
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.lengths.is_empty() {
            return Err(invalid("lengths", "empty"));
        }
        if let Some(l) = self.lengths.iter().find(|&&l| !(2..=120).contains(&l)) {
            return Err(invalid("lengths", format!("{l} outside 2..=120")));
        }
        if self.enumerate_up_to > MAX_ENUMERATION_SITES {
            return Err(invalid("enumerate_up_to", format!("at most {MAX_ENUMERATION_SITES}")));
        }
        self.outputs.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweptParameter {
    /// `U/J` at zero detuning.
    UOverJ,
    /// Flux error in radians.
    DeltaPhi,
    /// `U - Omega` in units of `J`.
    DeltaOmega,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    /// Relative doublon-number error against the resonant model.
    DoublonError,
    /// Mean doublon number over `window`, divided by its zero-detuning value.
    SteadyStateDoublonRatio,
}

impl SweptParameter {
    pub fn reduction(self) -> Reduction {
        match self {
            SweptParameter::UOverJ | SweptParameter::DeltaPhi => Reduction::DoublonError,
            SweptParameter::DeltaOmega => Reduction::SteadyStateDoublonRatio,
        }
    }
}

fn default_window() -> (f64, f64) {
    (10.0, 50.0)
}

fn default_outputs_sweep() -> Outputs {
    Outputs::named("sweep")
}

/// A parameter sweep of the gauged model around `base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub schema: u32,
    pub base: RobustnessSetup,
    pub parameter: SweptParameter,
    pub reduction: Reduction,
    pub values: Vec<f64>,
    /// Averaging window of a steady-state reduction; evolution runs to its end.
    #[serde(default = "default_window")]
    pub window: (f64, f64),
    #[serde(default = "default_outputs_sweep")]
    pub outputs: Outputs,
}

impl RunConfig for SweepConfig {
    fn schema(&self) -> u32 {
        self.schema
    }

    fn validate(&self) -> Result<(), CliError> {
        self.base.params().map_err(|e| invalid("base", e.to_string()))?;
        if self.values.is_empty() || self.values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("values", "need at least one finite value"));
        }
        if self.reduction != self.parameter.reduction() {
            return Err(invalid(
                "reduction",
                format!("{:?} sweeps use {:?}", self.parameter, self.parameter.reduction()),
            ));
        }
        if self.parameter == SweptParameter::UOverJ && self.values.iter().any(|&u| u <= 0.0) {
            return Err(invalid("values", "U/J must be positive"));
        }
        let (a, b) = self.window;
        if !(a >= 0.0 && b > a) {
            return Err(invalid("window", format!("[{a}, {b}] is not an increasing window")));
        }
        self.outputs.validate()
    }
}

fn default_k_points() -> usize {
    0
}

fn default_outputs_analytic() -> Outputs {
    Outputs::named("analytic")
}

/// Closed-form constants and the transmission integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyticConfig {
    pub schema: u32,
    #[serde(default = "two")]
    pub depth: f64,
    /// Samples of `T(k)` on `[0, pi]` written to CSV (0 skips).
    #[serde(default = "default_k_points")]
    pub k_points: usize,
    #[serde(default = "default_outputs_analytic")]
    pub outputs: Outputs,
}

impl Default for AnalyticConfig {
    fn default() -> Self {
        AnalyticConfig { schema: SCHEMA_VERSION, depth: 2.0, k_points: 0, outputs: default_outputs_analytic() }
    }
}

impl RunConfig for AnalyticConfig {
    fn schema(&self) -> u32 {
        self.schema
    }

    fn validate(&self) -> Result<(), CliError> {
        if !self.depth.is_finite() {
            return Err(invalid("depth", "must be finite"));
        }
        if self.k_points == 1 {
            return Err(invalid("k_points", "need 0 or at least 2"));
        }
        self.outputs.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario_json() -> &'static str {
        r#"{
            "schema": 1,
            "model": "effective",
            "params": {"sites": 7, "boundary": "open"},
            "loadout": "..uuu..",
            "plan": {"t_end": 2.0, "dt": 0.5},
            "observables": ["density", {"transmitted": {"j0": 3}}, {"initial_population": {}}]
        }"#
    }

    #[test]
    fn parses_and_defaults() {
        let c = ScenarioConfig::from_json(scenario_json()).unwrap();
        assert_eq!(c.outputs.stem, "scenario");
        assert_eq!(c.params.tunneling, 1.0);
        assert_eq!(c.observables[2], Observable::InitialPopulation { sites: None });
    }

    #[test]
    fn names_the_offending_field() {
        let bad = scenario_json().replace("..uuu..", "..uuu.");
        match ScenarioConfig::from_json(&bad) {
            Err(CliError::Config { field, .. }) => assert_eq!(field, "loadout"),
            other => panic!("{other:?}"),
        }
        let bad = scenario_json().replace("\"j0\": 3", "\"j0\": 9");
        match ScenarioConfig::from_json(&bad) {
            Err(CliError::Config { field, .. }) => assert_eq!(field, "observables[1]"),
            other => panic!("{other:?}"),
        }
        let bad = scenario_json().replace("\"schema\": 1", "\"schema\": 2");
        match ScenarioConfig::from_json(&bad) {
            Err(CliError::Config { field, .. }) => assert_eq!(field, "schema"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = scenario_json().replace("\"loadout\"", "\"colour\": 1, \"loadout\"");
        let err = ScenarioConfig::from_json(&bad).unwrap_err().to_string();
        assert!(err.contains("colour"), "{err}");
        let bad = scenario_json().replace("\"boundary\": \"open\"", "\"boundary\": \"open\", \"hbar\": 1");
        assert!(ScenarioConfig::from_json(&bad).is_err());
    }

    #[test]
    fn sweep_reduction_must_match() {
        let mut c = SweepConfig {
            schema: 1,
            base: RobustnessSetup::default(),
            parameter: SweptParameter::DeltaOmega,
            reduction: Reduction::DoublonError,
            values: vec![0.0, 1.0],
            window: default_window(),
            outputs: default_outputs_sweep(),
        };
        assert!(c.validate().is_err());
        c.reduction = Reduction::SteadyStateDoublonRatio;
        assert!(c.validate().is_ok());
        c.window = (5.0, 5.0);
        assert!(c.validate().is_err());
    }
}
