//! Acceptance suite: prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use budgetmech::harness::{
    audit_bic, audit_dsic, audit_epir, audit_interim_ir, exact_expectation, AuditGrid, Metric,
    Property,
};
use budgetmech::model::{FirstPrice, IrMode};
use budgetmech::oracle::{optimal_bic, optimal_bic_for, DiscreteInstance, OracleObjective};
use budgetmech::revenue_private::{build_private_menu, PrivateMenuMechanism, PrivateMenuParams};
use budgetmech::revenue_public::{
    best_posted_price, capped_myerson, epir_iir_gap_instance, optimal_single_agent,
    solve_single_agent,
};
use budgetmech::welfare::{
    ex_ante_matching, expected_2x2, modified_vcg, to_iir_allpay, topchoice_2x2, welfare_via_revenue,
};
use budgetmech::{BudgetSpec, Distribution, Feasibility, Instance, IronedCurve, Mechanism};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_secs: u64) -> Result<(), String> {
    ensure(elapsed < Duration::from_secs(limit_secs), || {
        format!("took {elapsed:.2?}, limit {limit_secs}s")
    })
}

fn uniform() -> Distribution {
    Distribution::uniform(0.0, 1.0).unwrap()
}

fn exponential(rate: f64) -> Distribution {
    Distribution::exponential(rate).unwrap()
}

fn three_point() -> Distribution {
    Distribution::discrete(vec![1.0, 2.0, 3.0], vec![0.3, 0.4, 0.3]).unwrap()
}

fn iid(n: usize, d: Distribution, budget: f64) -> Instance {
    Instance::single_item_iid(n, d, BudgetSpec::Public { amount: budget }).unwrap()
}

fn gap() -> Check {
    let start = Instant::now();
    let d = DiscreteInstance::from_instance(
        &epir_iir_gap_instance(4, 1.0).map_err(|e| e.to_string())?,
        8,
    );
    let iir = optimal_bic(&d, IrMode::Interim, OracleObjective::Revenue, 1.0)
        .map_err(|e| e.to_string())?
        .value;
    let epir = optimal_bic(&d, IrMode::ExPost, OracleObjective::Revenue, 1.0)
        .map_err(|e| e.to_string())?
        .value;
    ensure((iir - 1.0).abs() <= 1e-6, || {
        format!("IIR revenue {iir}, expected 1")
    })?;
    ensure((epir - 0.25).abs() <= 1e-6, || {
        format!("EPIR revenue {epir}, expected 0.25")
    })?;
    within(start.elapsed(), 10)?;
    Ok(format!("IIR {iir:.9}, EPIR {epir:.9}"))
}

fn welfare_two_by_two() -> Check {
    let start = Instant::now();
    let u12 = Distribution::discrete(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap();
    let ex: [[Distribution; 2]; 2] = [[u12.clone(), u12.clone()], [u12.clone(), u12]];
    let (got, opt) = expected_2x2(&ex, |v| topchoice_2x2(v, &ex));
    ensure(got >= 0.75 * opt, || {
        format!("top-choice welfare {got} below 3/4 of {opt}")
    })?;
    // Rare unit values: reports matter, but a mechanism that ignores them
    // keeps only the fixed matching's two entries.
    let rare = Distribution::discrete(vec![0.0, 1.0], vec![1.0 - 1e-9, 1e-9]).unwrap();
    let ex: [[Distribution; 2]; 2] = [[rare.clone(), rare.clone()], [rare.clone(), rare]];
    let fixed = ex_ante_matching(&ex);
    let (blind, blind_opt) = expected_2x2(&ex, |_| fixed);
    let blind_ratio = blind / blind_opt;
    ensure(blind_ratio <= 0.5 + 1e-9, || {
        format!("budget-ignoring ratio {blind_ratio}")
    })?;
    within(start.elapsed(), 1)?;
    Ok(format!(
        "top-choice ratio {:.6}, budget-ignoring ratio {blind_ratio:.12}",
        got / opt
    ))
}

fn epsilon_tradeoff() -> Check {
    let start = Instant::now();
    let fixtures = [
        ("2 x U[0,1], B=0.3", iid(2, uniform(), 0.3)),
        ("2 x Exp(1), B=0.5", iid(2, exponential(1.0), 0.5)),
        ("2 x {1,2,3}, B=1.5", iid(2, three_point(), 1.5)),
    ];
    let mut worst = f64::INFINITY;
    for (name, inst) in &fixtures {
        let d = inst.discretized(8);
        let grid = AuditGrid::from_instance(&d, 8, 1);
        let mech = modified_vcg(&d).map_err(|e| e.to_string())?;
        let w = exact_expectation(&mech, &grid, Metric::Welfare, 0).map_err(|e| e.to_string())?;
        for eps in [0.25, 0.5] {
            let o = optimal_bic_for(inst, 8, IrMode::ExPost, OracleObjective::Welfare, 1.0 - eps)
                .map_err(|e| e.to_string())?
                .value;
            ensure(w >= eps * o - 1e-9, || {
                format!("{name}, eps {eps}: welfare {w} < {eps} x {o}")
            })?;
            worst = worst.min(w / o);
        }
    }
    within(start.elapsed(), 60)?;
    Ok(format!(
        "{} fixtures, smallest welfare/oracle {worst:.6}",
        fixtures.len()
    ))
}

fn mhr_welfare() -> Check {
    let start = Instant::now();
    let bound = 1.0 / (2.0 * (1.0 + std::f64::consts::E));
    let fixtures = [
        ("2 x Exp(1), B=1", iid(2, exponential(1.0), 1.0)),
        ("2 x U[0,1], B=0.3", iid(2, uniform(), 0.3)),
        ("3 x Exp(1), B=0.5", iid(3, exponential(1.0), 0.5)),
    ];
    let mut worst = f64::INFINITY;
    for (name, inst) in &fixtures {
        let d = inst.discretized(8);
        let grid = AuditGrid::from_instance(&d, 8, 1);
        let mech = welfare_via_revenue(&d).map_err(|e| e.to_string())?;
        let w = exact_expectation(&mech, &grid, Metric::Welfare, 0).map_err(|e| e.to_string())?;
        let o = optimal_bic_for(inst, 8, IrMode::ExPost, OracleObjective::Welfare, 1.0)
            .map_err(|e| e.to_string())?
            .value;
        ensure(w / o >= bound, || {
            format!("{name}: ratio {} below {bound}", w / o)
        })?;
        worst = worst.min(w / o);
    }
    within(start.elapsed(), 60)?;
    Ok(format!("smallest ratio {worst:.6} vs bound {bound:.6}"))
}

fn single_agent() -> Check {
    let fixtures = [
        (uniform(), 0.2),
        (uniform(), 0.6),
        (exponential(1.0), 0.5),
        (
            Distribution::discrete(vec![1.0, 2.0, 4.0], vec![0.5, 0.3, 0.2]).unwrap(),
            1.5,
        ),
        (
            Distribution::discrete(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap(),
            f64::INFINITY,
        ),
    ];
    let mut worst = 0.0f64;
    for (d, b) in &fixtures {
        let lp = solve_single_agent(d, *b, 16).map_err(|e| e.to_string())?;
        let o = optimal_bic_for(
            &iid(1, d.clone(), *b),
            16,
            IrMode::ExPost,
            OracleObjective::Revenue,
            1.0,
        )
        .map_err(|e| e.to_string())?;
        worst = worst.max((lp.revenue - o.value).abs());
    }
    ensure(worst <= 1e-6, || format!("LP and oracle differ by {worst}"))?;
    let (_, lp_rev) = optimal_single_agent(&uniform(), 0.2, 64).map_err(|e| e.to_string())?;
    let (_, posted) = best_posted_price(&uniform(), 0.2, 64);
    ensure(lp_rev > 0.16, || {
        format!("menu revenue {lp_rev} does not beat 0.16")
    })?;
    ensure((lp_rev - 0.161511230469).abs() <= 1e-9, || {
        format!("menu revenue {lp_rev} moved from baseline")
    })?;
    Ok(format!("max |LP - oracle| {worst:.1e}; U[0,1], B=0.2: menu {lp_rev:.9} > 0.16 (grid posted {posted:.6})"))
}

fn audits() -> Check {
    let mut count = 0;
    let mut pass = |m: &dyn Mechanism, inst: &Instance, grid: &AuditGrid| -> Result<(), String> {
        let d = audit_dsic(m, grid, 1).map_err(|e| e.to_string())?;
        ensure(d.passed, || format!("{} DSIC: {:?}", m.name(), d.worst))?;
        let e = audit_epir(m, inst, 2000, 1).map_err(|e| e.to_string())?;
        ensure(e.passed, || format!("{} EPIR: {:?}", m.name(), e.worst))?;
        count += 1;
        Ok(())
    };
    let public = [
        iid(2, uniform(), 0.3),
        iid(2, exponential(1.0), 0.5),
        iid(2, three_point(), 1.5),
        iid(3, exponential(1.0), 0.5),
        Instance::new(
            vec![
                budgetmech::Agent::public(uniform(), 0.2),
                budgetmech::Agent::public(three_point(), 2.5),
            ],
            Feasibility::SingleItem,
        )
        .unwrap(),
    ];
    for inst in &public {
        let grid = AuditGrid::from_instance(inst, 8, 1);
        pass(
            &capped_myerson(inst).map_err(|e| e.to_string())?,
            inst,
            &grid,
        )?;
        pass(&modified_vcg(inst).map_err(|e| e.to_string())?, inst, &grid)?;
    }
    for (d, b) in [
        (uniform(), 0.2),
        (exponential(1.0), 0.5),
        (three_point(), 1.5),
    ] {
        let inst = iid(1, d.clone(), b);
        let (menu, _) = optimal_single_agent(&d, b, 64).map_err(|e| e.to_string())?;
        pass(&menu, &inst, &AuditGrid::from_instance(&inst, 16, 1))?;
    }
    for (v, bd) in private_fixtures() {
        let inst = Instance::single_item_iid(1, v, BudgetSpec::Private { dist: bd }).unwrap();
        let mech = PrivateMenuMechanism::for_instance(&inst, &private_params())
            .map_err(|e| e.to_string())?;
        let grid = AuditGrid::new(vec![mech.menus()[0].audit_grid()]).map_err(|e| e.to_string())?;
        pass(&mech, &inst, &grid)?;
    }
    for inst in &public[..3] {
        let m = to_iir_allpay(inst, 6).map_err(|e| e.to_string())?;
        let grid = AuditGrid::from_instance(&inst.discretized(6), 6, 1);
        let b = audit_bic(&m, &grid, 1).map_err(|e| e.to_string())?;
        ensure(b.passed, || format!("all-pay BIC: {:?}", b.worst))?;
        let ir = audit_interim_ir(&m, &grid, 1).map_err(|e| e.to_string())?;
        ensure(ir.passed, || format!("all-pay interim IR: {:?}", ir.worst))?;
        count += 1;
    }
    let fp_inst = iid(2, three_point(), f64::INFINITY);
    let fp = audit_dsic(&FirstPrice, &AuditGrid::from_instance(&fp_inst, 3, 1), 1)
        .map_err(|e| e.to_string())?;
    let witness = fp
        .worst
        .clone()
        .filter(|w| w.misreport.is_some() && w.gain > 1e-6);
    ensure(
        !fp.passed && fp.property == Property::Dsic && witness.is_some(),
        || "first-price control passed the DSIC audit".into(),
    )?;
    let w = witness.unwrap();
    Ok(format!(
        "{count} mechanism/fixture pairs pass; first price fails: type {:?} gains {} by reporting {:?}",
        w.true_type,
        w.gain,
        w.misreport.unwrap()
    ))
}

fn private_fixtures() -> Vec<(Distribution, Distribution)> {
    vec![
        (
            exponential(1.0),
            Distribution::discrete(vec![0.5, 1.0], vec![0.5, 0.5]).unwrap(),
        ),
        (
            uniform(),
            Distribution::discrete(vec![0.2, 0.4, 0.6], vec![1.0 / 3.0; 3]).unwrap(),
        ),
        (exponential(2.0), Distribution::uniform(0.1, 0.5).unwrap()),
    ]
}

fn private_params() -> PrivateMenuParams {
    PrivateMenuParams {
        value_points: 16,
        budget_points: 4,
        ..Default::default()
    }
}

fn private_structure() -> Check {
    // Revenue relative to the ex-post IR oracle on the menu's audit grid,
    // frozen from the measured values.
    let floors = [0.982, 0.955, 0.949];
    let mut lines = Vec::new();
    for ((v, bd), floor) in private_fixtures().into_iter().zip(floors) {
        ensure(v.is_mhr(), || "fixture is not MHR".into())?;
        let menu = build_private_menu(&v, &bd, &private_params()).map_err(|e| e.to_string())?;
        let s = menu.structure();
        ensure(s.holds(), || {
            format!("{} grid points choose an unmarked option", s.unmarked)
        })?;
        let d = DiscreteInstance {
            types: vec![menu.audit_grid()],
            sets: vec![0, 1],
        };
        let o = optimal_bic(&d, IrMode::ExPost, OracleObjective::Revenue, 1.0)
            .map_err(|e| e.to_string())?;
        let ratio = menu.revenue() / o.value;
        ensure(ratio >= floor, || {
            format!("revenue ratio {ratio} below floor {floor}")
        })?;
        lines.push(format!("{ratio:.4}"));
    }
    Ok(format!(
        "structure holds on 3 MHR fixtures; revenue/oracle {}",
        lines.join(", ")
    ))
}

fn plumbing() -> Check {
    let cases = common::lp_cases();
    for (name, lp, expect, pointed) in &cases {
        common::check_lp_case(name, lp, expect, *pointed)?;
    }
    let bimodal =
        Distribution::piecewise(vec![(0.0, 0.0), (1.0, 0.45), (3.0, 0.55), (4.0, 1.0)]).unwrap();
    let skewed = Distribution::discrete(
        (1..=100).map(|k| k as f64).collect(),
        (1..=100)
            .map(|k| if k % 7 == 0 { 0.05 } else { 0.3 / 86.0 })
            .collect(),
    )
    .unwrap();
    let curves = [
        IronedCurve::on_grid(&uniform(), &common::grid(0.0, 1.0, 100)).unwrap(),
        IronedCurve::on_grid(&exponential(2.0), &common::grid(0.0, 3.0, 100)).unwrap(),
        IronedCurve::on_grid(&bimodal, &common::grid(0.0, 4.0, 100)).unwrap(),
        IronedCurve::new(&skewed),
    ];
    let hull = curves.iter().map(common::hull_error).fold(0.0, f64::max);
    ensure(hull <= 1e-8, || {
        format!("ironing differs from brute-force hull by {hull}")
    })?;
    let mut tail = 0.0f64;
    for (lo, hi) in [(0.0, 1.0), (1.0, 3.0)] {
        let u = Distribution::uniform(lo, hi).unwrap();
        for t in [0.0, 0.3, 0.8] {
            let b = lo + t * (hi - lo);
            tail = tail.max((u.tail_expectation(b).unwrap() - (b + hi) / 2.0).abs());
        }
    }
    for rate in [0.5, 2.0] {
        let e = exponential(rate);
        for b in [0.0, 1.0, 4.0] {
            tail = tail.max((e.tail_expectation(b).unwrap() - (b + 1.0 / rate)).abs());
        }
    }
    ensure(tail <= 1e-12, || format!("tail expectation off by {tail}"))?;
    Ok(format!(
        "{} LP cases; hull error {hull:.1e}; tail error {tail:.1e}",
        cases.len()
    ))
}

fn determinism() -> Check {
    let bin = env!("CARGO_BIN_EXE_budgetmech");
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut paths: Vec<_> = std::fs::read_dir(&configs)
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    paths.sort();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for p in &paths {
        for d in &dirs {
            let status = Command::new(bin)
                .arg("--config")
                .arg(p)
                .args(["--seed", "20261018", "--out"])
                .arg(d.path())
                .env("RUST_LOG", "off")
                .status()
                .map_err(|e| e.to_string())?;
            ensure(matches!(status.code(), Some(0) | Some(2)), || {
                format!("{} exited with {status}", p.display())
            })?;
        }
    }
    let mut files: Vec<_> = std::fs::read_dir(dirs[0].path())
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok().map(|e| e.file_name()))
        .collect();
    files.sort();
    ensure(files.len() == 2 * paths.len(), || {
        format!(
            "expected {} result files, found {}",
            2 * paths.len(),
            files.len()
        )
    })?;
    for f in &files {
        let a = std::fs::read(dirs[0].path().join(f)).map_err(|e| e.to_string())?;
        let b = std::fs::read(dirs[1].path().join(f)).map_err(|e| e.to_string())?;
        ensure(a == b, || {
            format!("{} differs between runs", f.to_string_lossy())
        })?;
    }
    Ok(format!(
        "{} configs, {} result files byte-identical across two runs",
        paths.len(),
        files.len()
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("ex-post vs interim IR revenue gap", gap),
        ("2x2 top-choice welfare", welfare_two_by_two),
        ("welfare under scaled budgets", epsilon_tradeoff),
        ("MHR welfare via revenue", mhr_welfare),
        ("single-agent optimality", single_agent),
        ("incentive and IR audits", audits),
        ("private-budget menu structure", private_structure),
        ("numerical plumbing", plumbing),
        ("CLI determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (title, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .unwrap_or_else(|| "panicked".into()))
        });
        let elapsed = start.elapsed();
        match result {
            Ok(detail) => println!(
                "criterion {} PASS  {title}: {detail} [{elapsed:.2?}]",
                k + 1
            ),
            Err(detail) => {
                failed += 1;
                println!(
                    "criterion {} FAIL  {title}: {detail} [{elapsed:.2?}]",
                    k + 1
                );
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria pass",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
