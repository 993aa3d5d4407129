//! Executes a parsed experiment and writes its result files.

use std::fs;
use std::path::{Path, PathBuf};

use budgetmech::harness::{
    audit_bic, audit_budget, audit_dsic, audit_epir, audit_interim_ir, estimate, exact_expectation,
    AuditGrid, AuditReport, Metric, PerfEstimate,
};
use budgetmech::model::{FirstPrice, IrMode};
use budgetmech::oracle::{optimal_bic, DiscreteInstance, OracleObjective};
use budgetmech::revenue_private::{PrivateMenuMechanism, PrivateMenuParams};
use budgetmech::revenue_public::{capped_myerson, myerson, optimal_single_agent};
use budgetmech::welfare::{
    build_allpay, modified_vcg, welfare_via_revenue, AllPayRule, AllocationRule,
};
use budgetmech::{BudgetSpec, Instance, Mechanism};
use serde::{Deserialize, Serialize};

use crate::config::{Action, ConfigError, ExperimentConfig, Objective, OracleIr};

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_AUDIT_FAILED: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] budgetmech::Error),
    #[error("writing results: {0}")]
    Io(#[from] std::io::Error),
    #[error("writing CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("writing JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// One CSV line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment_id: String,
    pub mechanism: String,
    pub metric: String,
    pub value: f64,
    pub ci_halfwidth: Option<f64>,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    pub ir_mode: IrMode,
    pub objective: OracleObjective,
    pub budget_scale: f64,
    pub value: f64,
    pub profiles: usize,
    pub interim_allocation: Vec<Vec<f64>>,
    pub interim_payment: Vec<Vec<f64>>,
}

/// Everything an experiment produced; serialized as the detail file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment_id: String,
    pub action: Action,
    pub seed: u64,
    pub config: String,
    pub rows: Vec<ResultRow>,
    pub estimates: Vec<PerfEstimate>,
    pub audits: Vec<AuditReport>,
    pub oracles: Vec<OracleSummary>,
    pub ratio: Option<f64>,
}

impl Report {
    pub fn audits_passed(&self) -> bool {
        self.audits.iter().all(|a| a.passed)
    }

    pub fn exit_code(&self) -> i32 {
        if self.audits_passed() {
            EXIT_OK
        } else {
            EXIT_AUDIT_FAILED
        }
    }

    fn row(&mut self, mechanism: &str, metric: &str, value: f64, ci: Option<f64>, samples: usize) {
        self.rows.push(ResultRow {
            experiment_id: self.experiment_id.clone(),
            mechanism: mechanism.to_string(),
            metric: metric.to_string(),
            value,
            ci_halfwidth: ci,
            samples,
            seed: self.seed,
        });
    }
}

fn ir_label(ir: IrMode) -> &'static str {
    match ir {
        IrMode::ExPost => "epir",
        IrMode::Interim => "iir",
    }
}

fn objective(o: Objective) -> (OracleObjective, Metric) {
    match o {
        Objective::Revenue => (OracleObjective::Revenue, Metric::Revenue),
        Objective::Welfare => (OracleObjective::Welfare, Metric::Welfare),
    }
}

/// Builds the configured mechanism. Grid-based mechanisms run on the
/// `grid_points` discretization, which is returned alongside.
pub fn build_mechanism(
    cfg: &ExperimentConfig,
    instance: &Instance,
    grid_points: usize,
) -> Result<(Box<dyn Mechanism>, Instance), RunError> {
    let spec = cfg.mechanism.as_ref().ok_or_else(|| ConfigError {
        path: "mechanism".into(),
        message: "no mechanism configured".into(),
    })?;
    let same = instance.clone();
    let allpay = |rule, pay| -> Result<(Box<dyn Mechanism>, Instance), RunError> {
        let m = build_allpay(instance, grid_points, rule, pay)?;
        Ok((Box::new(m), instance.discretized(grid_points)))
    };
    Ok(match spec.name.as_str() {
        "capped_myerson" => (Box::new(capped_myerson(instance)?), same),
        "myerson" => (Box::new(myerson(instance)), same),
        "optimal_single_agent" => {
            let budget = match (instance.n(), &instance.agent(0).budget) {
                (1, BudgetSpec::Public { amount }) => *amount,
                _ => {
                    return Err(ConfigError {
                        path: "mechanism.name".into(),
                        message:
                            "optimal_single_agent needs exactly one agent with a public budget"
                                .into(),
                    }
                    .into())
                }
            };
            let (m, _) =
                optimal_single_agent(&instance.agent(0).value, budget, cfg.grid.menu_points)?;
            (Box::new(m), same)
        }
        "private_menu" => {
            let params = PrivateMenuParams {
                alpha: spec.alpha,
                ..Default::default()
            };
            (
                Box::new(PrivateMenuMechanism::for_instance(instance, &params)?),
                same,
            )
        }
        "modified_vcg" => (Box::new(modified_vcg(instance)?), same),
        "iir_allpay" => allpay(AllocationRule::ModifiedVcg, AllPayRule::InterimExpectation)?,
        "iir_allpay_max" => allpay(AllocationRule::ModifiedVcg, AllPayRule::RevenueMaximal)?,
        "welfare_allpay" => allpay(AllocationRule::WelfareOptimal, AllPayRule::RevenueMaximal)?,
        "welfare_via_revenue" => (Box::new(welfare_via_revenue(instance)?), same),
        "first_price" => (Box::new(FirstPrice), same),
        other => {
            return Err(ConfigError {
                path: "mechanism.name".into(),
                message: format!("unknown mechanism `{other}`"),
            }
            .into())
        }
    })
}

/// Runs the experiment in memory.
pub fn execute(cfg: &ExperimentConfig) -> Result<Report, RunError> {
    cfg.validate()?;
    let instance = cfg.build_instance()?;
    let mut report = Report {
        experiment_id: cfg.id.clone(),
        action: cfg.action,
        seed: cfg.seed,
        config: cfg.to_toml(),
        rows: Vec::new(),
        estimates: Vec::new(),
        audits: Vec::new(),
        oracles: Vec::new(),
        ratio: None,
    };
    match cfg.action {
        Action::Run => {
            let (mech, inst) = build_mechanism(cfg, &instance, cfg.grid.value_points)?;
            for metric in [Metric::Revenue, Metric::Welfare] {
                let e = estimate(mech.as_ref(), &inst, metric, cfg.samples, cfg.seed)?;
                report.row(
                    mech.name(),
                    metric.as_str(),
                    e.mean,
                    Some(e.half_width),
                    e.samples,
                );
                report.estimates.push(e);
            }
        }
        Action::Audit => {
            let (mech, inst) = build_mechanism(cfg, &instance, cfg.grid.value_points)?;
            let grid =
                AuditGrid::from_instance(&inst, cfg.grid.value_points, cfg.grid.budget_points);
            let m = mech.as_ref();
            let audits = match m.ir_mode() {
                IrMode::ExPost => vec![
                    audit_dsic(m, &grid, cfg.seed)?,
                    audit_epir(m, &inst, cfg.samples, cfg.seed)?,
                    audit_budget(m, &inst, cfg.samples, cfg.seed)?,
                ],
                IrMode::Interim => vec![
                    audit_bic(m, &grid, cfg.seed)?,
                    audit_interim_ir(m, &grid, cfg.seed)?,
                    audit_budget(m, &inst, cfg.samples, cfg.seed)?,
                ],
            };
            for a in audits {
                let property = serde_json::to_value(a.property)?;
                let metric = format!(
                    "audit_{}",
                    property.as_str().unwrap_or("unknown").replace('-', "_")
                );
                let gain = a.worst.as_ref().map_or(0.0, |v| v.gain);
                report.row(m.name(), &metric, gain, None, a.checks);
                report.audits.push(a);
            }
        }
        Action::Oracle => {
            let modes = match cfg.oracle.ir {
                OracleIr::ExPost => vec![IrMode::ExPost],
                OracleIr::Interim => vec![IrMode::Interim],
                OracleIr::Both => vec![IrMode::ExPost, IrMode::Interim],
            };
            let discrete = DiscreteInstance::from_instance(&instance, cfg.grid.oracle_points);
            for ir in modes {
                let o = oracle(cfg, &discrete, ir)?;
                let metric = format!(
                    "oracle_{}_{}",
                    metric_name(cfg.oracle.objective),
                    ir_label(ir)
                );
                report.row("optimal_bic", &metric, o.value, None, o.profiles);
                report.oracles.push(o);
            }
        }
        Action::Compare => {
            let points = cfg.grid.oracle_points;
            let discrete_inst = instance.discretized(points);
            let (mech, inst) = build_mechanism(cfg, &discrete_inst, points)?;
            let grid = AuditGrid::from_instance(&inst, points, points);
            let (_, metric) = objective(cfg.oracle.objective);
            let value = exact_expectation(mech.as_ref(), &grid, metric, cfg.seed)?;
            let ir = match cfg.oracle.ir {
                OracleIr::ExPost => IrMode::ExPost,
                OracleIr::Interim => IrMode::Interim,
                OracleIr::Both => mech.ir_mode(),
            };
            let o = oracle(cfg, &DiscreteInstance::from_instance(&inst, points), ir)?;
            let name = mech.name().to_string();
            report.row(&name, metric.as_str(), value, None, o.profiles);
            let oracle_metric = format!(
                "oracle_{}_{}",
                metric_name(cfg.oracle.objective),
                ir_label(ir)
            );
            report.row("optimal_bic", &oracle_metric, o.value, None, o.profiles);
            let ratio = if o.value > 0.0 {
                value / o.value
            } else {
                f64::NAN
            };
            report.row(&name, "ratio", ratio, None, o.profiles);
            report.ratio = Some(ratio);
            report.oracles.push(o);
        }
    }
    Ok(report)
}

fn metric_name(o: Objective) -> &'static str {
    objective(o).1.as_str()
}

fn oracle(
    cfg: &ExperimentConfig,
    discrete: &DiscreteInstance,
    ir: IrMode,
) -> Result<OracleSummary, RunError> {
    let (obj, _) = objective(cfg.oracle.objective);
    let r = optimal_bic(discrete, ir, obj, cfg.oracle.budget_scale)?;
    Ok(OracleSummary {
        ir_mode: ir,
        objective: obj,
        budget_scale: cfg.oracle.budget_scale,
        value: r.value,
        profiles: discrete.profile_count(),
        interim_allocation: r.interim_allocation,
        interim_payment: r.interim_payment,
    })
}

/// Writes `<id>.csv` and `<id>.json` into `dir`, creating it if needed.
pub fn write_results(report: &Report, dir: &Path) -> Result<(PathBuf, PathBuf), RunError> {
    fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{}.csv", report.experiment_id));
    let json_path = dir.join(format!("{}.json", report.experiment_id));
    let mut w = csv::Writer::from_path(&csv_path)?;
    for row in &report.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    fs::write(&json_path, json)?;
    Ok((csv_path, json_path))
}

/// Executes the experiment, writes its results and returns the exit code.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> i32 {
    let report = match execute(cfg) {
        Ok(r) => r,
        Err(e) => {
            log::error!("{e}");
            return EXIT_ERROR;
        }
    };
    if let Err(e) = write_results(&report, out_dir) {
        log::error!("{e}");
        return EXIT_ERROR;
    }
    for a in report.audits.iter().filter(|a| !a.passed) {
        log::warn!(
            "{:?} audit failed for {}: {:?}",
            a.property,
            a.mechanism,
            a.worst
        );
    }
    report.exit_code()
}
