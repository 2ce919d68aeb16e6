//! Run configuration: every tunable in one TOML document.

use std::path::Path;

use pitchaudit::catalog::ComponentCatalog;
use pitchaudit::demo::{HeckmanDemoConfig, LooDemoConfig};
use pitchaudit::panel::PanelSpec;
use pitchaudit::sim::{CallbackDgpParams, EvalDgpParams, EventTiming};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::fail::Failure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignConfig {
    /// Evaluator sessions for the rating experiment.
    pub sessions: usize,
    pub profiles_per_session: u32,
    pub funds: u64,
    pub investors: u64,
    pub ideas: u64,
    pub start_day: u32,
    pub min_gap_days: u32,
    pub window_days: Option<u32>,
}

impl Default for DesignConfig {
    fn default() -> Self {
        Self {
            sessions: 60,
            profiles_per_session: 16,
            funds: 400,
            investors: 800,
            ideas: 8,
            start_day: 0,
            min_gap_days: 14,
            window_days: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LooFitConfig {
    pub treatment: String,
    pub classify_on: String,
    pub outcomes: Vec<String>,
    pub bootstrap: usize,
}

impl Default for LooFitConfig {
    fn default() -> Self {
        Self {
            treatment: "female".into(),
            classify_on: "q3".into(),
            outcomes: vec!["q1".into(), "q2".into(), "q3".into(), "q4".into()],
            bootstrap: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurveConfig {
    pub outcome: String,
    pub group: String,
    pub grid_min: f64,
    pub grid_max: f64,
    pub grid_step: f64,
}

impl Default for CurveConfig {
    fn default() -> Self {
        Self { outcome: "q3".into(), group: "female".into(), grid_min: 0.0, grid_max: 100.0, grid_step: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub ols: PanelSpec,
    /// Group indicator of the callback models.
    pub group: String,
    pub loo: LooFitConfig,
    pub curve: CurveConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        let ols =
            PanelSpec::new("q1", &["female", "asian", "top_school", "young", "positive_traction", "n_advantages"])
                .interact(&["female", "second_half"])
                .fixed_effect("investor_id")
                .cluster("investor_id");
        Self { ols, group: "female".into(), loo: LooFitConfig::default(), curve: CurveConfig::default() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoConfig {
    pub heckman: HeckmanDemoConfig,
    pub loo: LooDemoConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub design: DesignConfig,
    pub catalog: ComponentCatalog,
    pub evaluations: EvalDgpParams,
    pub callbacks: CallbackDgpParams,
    pub events: EventTiming,
    pub fit: FitConfig,
    pub demo: DemoConfig,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::config_flag("--config", format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| Failure::config_flag("--config", format!("{}: {}", path.display(), e.message())))
    }

    pub fn validate(&self) -> Result<(), Failure> {
        let bad = |e: pitchaudit::Error| Failure::config(e.to_string());
        self.catalog.validate().map_err(bad)?;
        self.evaluations.validate().map_err(bad)?;
        self.callbacks.validate().map_err(bad)?;
        let d = &self.design;
        if d.sessions == 0 || d.profiles_per_session == 0 || d.profiles_per_session % 2 != 0 {
            return Err(Failure::config("design needs sessions and an even, positive profiles_per_session"));
        }
        if d.funds == 0 || d.investors < d.funds || d.ideas == 0 {
            return Err(Failure::config("design needs funds > 0, investors >= funds and ideas > 0"));
        }
        if !(self.fit.curve.grid_step > 0.0 && self.fit.curve.grid_max >= self.fit.curve.grid_min) {
            return Err(Failure::config("curve grid needs a positive step and max >= min"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}
