use std::path::Path;

use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::belief::{GoalPrior, PriorKind};
use crate::edp::EdpConfig;
use crate::optim::GaConfig;
use crate::planners::PlannerKind;
use crate::query::{CostModel, QueryCharge};

/// Everything a sweep depends on. Results are a pure function of this value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub name: String,
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub stations: usize,
    pub toolboxes: usize,
    pub instances: usize,
    /// Episodes per (instance, prior); the true goal of each is drawn from
    /// the prior. The same episodes are replayed for every cost and planner.
    pub episodes_per_instance: usize,
    pub priors: Vec<PriorKind>,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    pub per_station_costs: Vec<f64>,
    pub query_base: f64,
    pub planners: Vec<PlannerKind>,
    #[serde(default)]
    pub charge: QueryCharge,
    #[serde(default)]
    pub ga: GaConfig,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_temperature() -> f64 {
    1.0
}

fn default_epsilon() -> f64 {
    EdpConfig::default().epsilon
}

impl SweepConfig {
    /// 10x10 grid, 10 stations, 2 toolboxes, 50 instances.
    pub fn desk() -> Self {
        SweepConfig {
            name: "desk".into(),
            seed: 20_231,
            width: 10,
            height: 10,
            stations: 10,
            toolboxes: 2,
            instances: 50,
            episodes_per_instance: 10,
            priors: vec![PriorKind::BoltzmannDistance, PriorKind::BoltzmannNegativeDistance],
            temperature: default_temperature(),
            per_station_costs: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
            query_base: 0.5,
            planners: PlannerKind::ALL.to_vec(),
            charge: QueryCharge::Replace,
            ga: GaConfig::default(),
            epsilon: default_epsilon(),
        }
    }

    /// 20x20 grid, 50 stations, 5 toolboxes, 100 instances.
    pub fn paper() -> Self {
        SweepConfig {
            name: "paper".into(),
            width: 20,
            height: 20,
            stations: 50,
            toolboxes: 5,
            instances: 100,
            ..Self::desk()
        }
    }

    pub fn profile(name: &str) -> Option<Self> {
        match name {
            "desk" => Some(Self::desk()),
            "paper" => Some(Self::paper()),
            _ => None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        let config: SweepConfig =
            toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::Config(m));
        let cells = self.width * self.height;
        if self.width == 0 || self.height == 0 {
            return bad("grid dimensions must be positive".into());
        }
        if self.stations < 2 {
            return bad(format!("need at least 2 stations, got {}", self.stations));
        }
        if self.toolboxes == 0 || self.instances == 0 || self.episodes_per_instance == 0 {
            return bad("toolbox, instance and episode counts must be positive".into());
        }
        if self.stations > cells || self.toolboxes > cells {
            return bad(format!(
                "{} stations and {} toolboxes do not fit {} cells",
                self.stations, self.toolboxes, cells
            ));
        }
        if self.priors.is_empty() || self.planners.is_empty() || self.per_station_costs.is_empty()
        {
            return bad("priors, planners and per-station costs must be nonempty".into());
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad(format!("temperature must be positive, got {}", self.temperature));
        }
        for &c in &self.per_station_costs {
            CostModel::new(self.query_base, c).map_err(|e| BenchError::Config(e.to_string()))?;
        }
        if !(self.epsilon > 0.0) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        self.ga
            .validate()
            .map_err(|e| BenchError::Config(e.to_string()))
    }

    pub fn cost_model(&self, per_station: f64) -> CostModel {
        CostModel::new(self.query_base, per_station)
            .expect("validated costs")
            .with_charge(self.charge)
    }

    pub fn goal_prior(&self, kind: PriorKind) -> GoalPrior {
        GoalPrior {
            kind,
            temperature: self.temperature,
        }
    }

    pub fn edp_config(&self) -> EdpConfig {
        EdpConfig {
            epsilon: self.epsilon,
            max_sweeps: None,
        }
    }
}
