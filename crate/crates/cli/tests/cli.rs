use std::path::{Path, PathBuf};
use std::process::Command;

use budgetmech_cli::{execute, parse_config, Action, ExperimentConfig, ResultRow};
use proptest::prelude::*;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_budgetmech"));
    c.env("RUST_LOG", "off");
    c
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
}

fn rows(path: &Path) -> Vec<ResultRow> {
    csv::Reader::from_path(path)
        .unwrap()
        .deserialize()
        .map(|r| r.unwrap())
        .collect()
}

#[test]
fn gap_oracle_reports_both_revenues() {
    let out = tempfile::tempdir().unwrap();
    let status = bin()
        .arg("--config")
        .arg(config("gap_oracle.toml"))
        .arg("--out")
        .arg(out.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let rows = rows(&out.path().join("gap-oracle.csv"));
    let get = |m: &str| rows.iter().find(|r| r.metric == m).unwrap().value;
    assert!((get("oracle_revenue_iir") - 1.0).abs() < 1e-9);
    assert!((get("oracle_revenue_epir") - 0.25).abs() < 1e-9);
    let detail: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.path().join("gap-oracle.json")).unwrap())
            .unwrap();
    assert_eq!(detail["oracles"].as_array().unwrap().len(), 2);
}

#[test]
fn exit_codes_separate_audit_failures_from_config_errors() {
    let out = tempfile::tempdir().unwrap();
    let code = |path: &Path| {
        bin()
            .arg("--config")
            .arg(path)
            .arg("--out")
            .arg(out.path())
            .status()
            .unwrap()
            .code()
    };
    assert_eq!(code(&config("capped_audit.toml")), Some(0));
    assert_eq!(code(&config("first_price_audit.toml")), Some(2));

    let bad = out.path().join("bad.toml");
    let text = std::fs::read_to_string(config("capped_audit.toml"))
        .unwrap()
        .replace("amount = 0.3", "amount = -1.0");
    std::fs::write(&bad, text).unwrap();
    let res = bin().arg("--config").arg(&bad).output().unwrap();
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("instance.agents[0].budget.amount"));
    assert_eq!(code(&out.path().join("missing.toml")), Some(1));
}

#[test]
fn command_and_seed_flags_override_the_config() {
    let out = tempfile::tempdir().unwrap();
    let status = bin()
        .arg("run")
        .arg("--config")
        .arg(config("capped_audit.toml"))
        .args(["--seed", "99", "--out"])
        .arg(out.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let rows = rows(&out.path().join("capped-audit.csv"));
    assert_eq!(
        rows.iter().map(|r| r.metric.as_str()).collect::<Vec<_>>(),
        ["revenue", "welfare"]
    );
    assert!(rows
        .iter()
        .all(|r| r.seed == 99 && r.ci_halfwidth.is_some()));
}

#[test]
fn compare_reports_ratio_against_the_oracle() {
    let text = std::fs::read_to_string(config("vcg_compare.toml")).unwrap();
    let report = execute(&parse_config(&text).unwrap()).unwrap();
    let ratio = report.ratio.unwrap();
    let value = |m: &str| report.rows.iter().find(|r| r.metric == m).unwrap().value;
    assert!((ratio - value("welfare") / value("oracle_welfare_epir")).abs() < 1e-12);
    // Welfare with full budgets is at least half the optimum with halved budgets.
    assert!(ratio >= 0.5);
}

#[test]
fn every_bundled_config_parses_and_round_trips() {
    for entry in std::fs::read_dir(Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")).unwrap() {
        let path = entry.unwrap().path();
        let cfg = parse_config(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(
            parse_config(&cfg.to_toml()).unwrap(),
            cfg,
            "{}",
            path.display()
        );
    }
}

fn arb_config() -> impl Strategy<Value = ExperimentConfig> {
    let action = prop_oneof![
        Just(Action::Run),
        Just(Action::Audit),
        Just(Action::Compare)
    ];
    (
        action,
        any::<u64>(),
        100usize..100_000,
        prop::collection::vec((1u32..50, 0u32..40, 1usize..3, any::<bool>()), 1..4),
        prop::sample::select(budgetmech_cli::MECHANISMS.to_vec()),
        prop::option::of(1u32..=16),
        1usize..20,
    )
        .prop_map(|(action, seed, samples, agents, name, alpha, points)| {
            let agents = agents
                .into_iter()
                .map(|(hi, b, count, exp)| {
                    let value = if exp {
                        budgetmech::Distribution::Exponential {
                            rate: hi as f64 / 8.0,
                        }
                    } else {
                        budgetmech::Distribution::Uniform {
                            lo: 0.0,
                            hi: hi as f64 / 8.0,
                        }
                    };
                    let budget = if b == 0 {
                        budgetmech::BudgetSpec::Public {
                            amount: f64::INFINITY,
                        }
                    } else {
                        budgetmech::BudgetSpec::Public {
                            amount: b as f64 / 16.0,
                        }
                    };
                    budgetmech_cli::config::AgentConfig {
                        value,
                        budget,
                        count,
                    }
                })
                .collect();
            ExperimentConfig {
                id: format!("exp-{seed}"),
                action,
                seed,
                samples,
                output: None,
                instance: budgetmech_cli::config::InstanceConfig {
                    agents,
                    feasibility: budgetmech::Feasibility::SingleItem,
                    gap: None,
                },
                mechanism: Some(budgetmech_cli::config::MechanismConfig {
                    name: name.to_string(),
                    alpha: alpha.map(|a| a as f64 / 16.0),
                }),
                grid: budgetmech_cli::config::GridConfig {
                    value_points: points,
                    budget_points: points,
                    oracle_points: points,
                    menu_points: 4 * points,
                },
                oracle: Default::default(),
            }
        })
}

proptest! {
    #[test]
    fn config_round_trip(cfg in arb_config()) {
        cfg.validate().unwrap();
        prop_assert_eq!(parse_config(&cfg.to_toml()).unwrap(), cfg);
    }
}
