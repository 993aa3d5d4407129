//! Experiment configuration: a TOML document describing the instance, the
//! mechanism and what to do with it.

use budgetmech::revenue_public::epir_iir_gap_instance;
use budgetmech::{Agent, BudgetSpec, Distribution, Feasibility, Instance};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mechanisms the runner can build, by config name.
pub const MECHANISMS: &[&str] = &[
    "capped_myerson",
    "myerson",
    "optimal_single_agent",
    "private_menu",
    "modified_vcg",
    "iir_allpay",
    "iir_allpay_max",
    "welfare_allpay",
    "welfare_via_revenue",
    "first_price",
];

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{path}: {message}")]
pub struct ConfigError {
    /// Dotted path of the offending field, or `line N` for syntax errors.
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn at(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Action {
    /// Monte Carlo revenue and welfare.
    Run,
    /// Incentive, IR and budget audits.
    Audit,
    /// Optimal BIC benchmark only.
    Oracle,
    /// Mechanism against the oracle on the same discretization.
    Compare,
}

impl Action {
    pub fn as_str(self) -> &'static str {
        match self {
            Action::Run => "run",
            Action::Audit => "audit",
            Action::Oracle => "oracle",
            Action::Compare => "compare",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleIr {
    ExPost,
    Interim,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    Revenue,
    Welfare,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub value: Distribution,
    pub budget: BudgetSpec,
    /// Number of identical agents this entry stands for.
    #[serde(default = "one")]
    pub count: usize,
}

/// The instance that separates ex-post from interim IR revenue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapConfig {
    pub n: usize,
    #[serde(default = "unit")]
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub agents: Vec<AgentConfig>,
    #[serde(default = "single_item")]
    pub feasibility: Feasibility,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<GapConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismConfig {
    pub name: String,
    /// Monopoly fraction for `private_menu`; searched when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Value points per agent for audits and grid-based mechanisms.
    #[serde(default = "eight")]
    pub value_points: usize,
    /// Budget points per agent for private-budget audits.
    #[serde(default = "four")]
    pub budget_points: usize,
    /// Points per agent in the oracle's discretization.
    #[serde(default = "eight")]
    pub oracle_points: usize,
    /// Grid of the single-agent menu LP.
    #[serde(default = "sixty_four")]
    pub menu_points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            value_points: 8,
            budget_points: 4,
            oracle_points: 8,
            menu_points: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default = "both")]
    pub ir: OracleIr,
    #[serde(default = "revenue")]
    pub objective: Objective,
    #[serde(default = "unit")]
    pub budget_scale: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            ir: OracleIr::Both,
            objective: Objective::Revenue,
            budget_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub id: String,
    pub action: Action,
    #[serde(default)]
    pub seed: u64,
    /// Monte Carlo samples for estimates and sampled audits.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Directory for result files; `--out` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    pub instance: InstanceConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mechanism: Option<MechanismConfig>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
}

fn one() -> usize {
    1
}
fn four() -> usize {
    4
}
fn eight() -> usize {
    8
}
fn sixty_four() -> usize {
    64
}
fn unit() -> f64 {
    1.0
}
fn both() -> OracleIr {
    OracleIr::Both
}
fn revenue() -> Objective {
    Objective::Revenue
}
fn single_item() -> Feasibility {
    Feasibility::SingleItem
}
fn default_samples() -> usize {
    20_000
}

/// Parses and validates a config.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| syntax_error(text, &e))?;
    cfg.validate()?;
    Ok(cfg)
}

fn syntax_error(text: &str, e: &toml::de::Error) -> ConfigError {
    let path = match e.span() {
        Some(span) => format!(
            "line {}",
            text[..span.start.min(text.len())].matches('\n').count() + 1
        ),
        None => "config".to_string(),
    };
    ConfigError::at(path, e.message().trim())
}

impl ExperimentConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config model serializes to TOML")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.id.is_empty()
            || !self
                .id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c))
        {
            return Err(ConfigError::at(
                "id",
                "must be nonempty and use only letters, digits, '-', '_' or '.'",
            ));
        }
        let inst = &self.instance;
        match (&inst.gap, inst.agents.is_empty()) {
            (Some(_), false) => {
                return Err(ConfigError::at(
                    "instance",
                    "give either `agents` or `gap`, not both",
                ))
            }
            (None, true) => {
                return Err(ConfigError::at(
                    "instance.agents",
                    "at least one agent is required",
                ))
            }
            _ => {}
        }
        if let Some(g) = &inst.gap {
            if g.n == 0 {
                return Err(ConfigError::at("instance.gap.n", "must be at least 1"));
            }
            if !(g.value > 0.0 && g.value.is_finite()) {
                return Err(ConfigError::at(
                    "instance.gap.value",
                    format!("must be positive, got {}", g.value),
                ));
            }
        }
        for (i, a) in inst.agents.iter().enumerate() {
            let at = |f: &str| format!("instance.agents[{i}].{f}");
            if a.count == 0 {
                return Err(ConfigError::at(at("count"), "must be at least 1"));
            }
            a.value
                .validate()
                .map_err(|e| ConfigError::at(at("value"), e.to_string()))?;
            if a.value.support_bounds().0 < 0.0 {
                return Err(ConfigError::at(at("value"), "values must be nonnegative"));
            }
            match &a.budget {
                BudgetSpec::Public { amount } if amount.is_nan() || *amount < 0.0 => {
                    return Err(ConfigError::at(
                        at("budget.amount"),
                        format!("budget must be nonnegative, got {amount}"),
                    ))
                }
                b => b
                    .validate()
                    .map_err(|e| ConfigError::at(at("budget"), e.to_string()))?,
            }
        }
        let n: usize = inst.agents.iter().map(|a| a.count).sum();
        if inst.gap.is_none() {
            inst.feasibility
                .validate(n)
                .map_err(|e| ConfigError::at("instance.feasibility", e.to_string()))?;
        }
        match &self.mechanism {
            None if self.action != Action::Oracle => {
                return Err(ConfigError::at(
                    "mechanism",
                    format!("action `{}` needs a mechanism", self.action.as_str()),
                ))
            }
            Some(m) if !MECHANISMS.contains(&m.name.as_str()) => {
                return Err(ConfigError::at(
                    "mechanism.name",
                    format!(
                        "unknown mechanism `{}`; valid names: {}",
                        m.name,
                        MECHANISMS.join(", ")
                    ),
                ))
            }
            Some(MechanismConfig { alpha: Some(a), .. }) if !(*a > 0.0 && *a <= 1.0) => {
                return Err(ConfigError::at(
                    "mechanism.alpha",
                    format!("must lie in (0, 1], got {a}"),
                ))
            }
            _ => {}
        }
        if self.samples < 100 {
            return Err(ConfigError::at(
                "samples",
                format!("must be at least 100, got {}", self.samples),
            ));
        }
        for (name, v) in [
            ("value_points", self.grid.value_points),
            ("budget_points", self.grid.budget_points),
            ("oracle_points", self.grid.oracle_points),
            ("menu_points", self.grid.menu_points),
        ] {
            if v == 0 {
                return Err(ConfigError::at(
                    format!("grid.{name}"),
                    "must be at least 1",
                ));
            }
        }
        let s = self.oracle.budget_scale;
        if !(s >= 0.0 && s.is_finite()) {
            return Err(ConfigError::at(
                "oracle.budget_scale",
                format!("must be nonnegative, got {s}"),
            ));
        }
        Ok(())
    }

    /// The validated instance, with `count` entries expanded.
    pub fn build_instance(&self) -> Result<Instance, ConfigError> {
        if let Some(g) = &self.instance.gap {
            return epir_iir_gap_instance(g.n, g.value)
                .map_err(|e| ConfigError::at("instance.gap", e.to_string()));
        }
        let agents: Vec<Agent> = self
            .instance
            .agents
            .iter()
            .flat_map(|a| {
                std::iter::repeat_n(Agent::new(a.value.clone(), a.budget.clone()), a.count)
            })
            .collect();
        Instance::new(agents, self.instance.feasibility.clone())
            .map_err(|e| ConfigError::at("instance", e.to_string()))
    }
}
