mod common;

use std::time::Instant;

use common::*;
use timerep::formulations::build_hm;
use timerep::milp::{
    fix_and_relax, parse_mps, write_mps, HighsSolver, Key, MilpModel, RowSense, SolveStatus, SolverAdapter,
    SolverOptions,
};
use timerep::milp::relax::fixed_lp;

fn opts() -> SolverOptions {
    SolverOptions::default()
}

#[test]
fn integer_bound_is_met_exactly() {
    let mut m = MilpModel::new("x3");
    let x = m.add_var(Key::new("x"), 0.0, 10.0, true, 1.0);
    m.add_row(Key::new("c"), [(x, 1.0)], RowSense::Ge, 3.0);
    let sol = HighsSolver.solve(&m, &opts()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!((sol.value(x) - 3.0).abs() < 1e-9);
    assert!((sol.objective - 3.0).abs() < 1e-9);
}

#[test]
fn contradictory_rows_are_infeasible() {
    let mut m = MilpModel::new("bad");
    let x = m.add_continuous(Key::new("x"), f64::NEG_INFINITY, f64::INFINITY, 0.0);
    m.add_row(Key::new("up"), [(x, 1.0)], RowSense::Le, 1.0);
    m.add_row(Key::new("down"), [(x, 1.0)], RowSense::Ge, 2.0);
    let sol = HighsSolver.solve(&m, &opts()).unwrap();
    assert_eq!(sol.status, SolveStatus::Infeasible);
    assert!(sol.values.is_empty());
}

fn uc_toy() -> timerep::system::PowerSystem {
    single_bus(
        vec![thermal("G1", 10.0, 6.0, 30.0, 3.0, 8.0), thermal("G2", 22.0, 2.0, 4.0, 1.0, 6.0)],
        Vec::new(),
    )
}

#[test]
fn two_hour_commitment_matches_enumeration() {
    let sys = uc_toy();
    for demand in [[5.0, 12.0], [2.0, 2.0], [9.0, 0.5], [13.0, 15.0]] {
        let data = horizon(&sys, &demand, &[], &[]);
        let out = build_hm(&sys, &data, false).unwrap();
        let sol = HighsSolver.solve(&out.model, &opts()).unwrap();
        let oracle = brute_force_uc(&sys, &demand, &[]);
        assert!(rel_err(sol.objective, oracle) < 1e-6, "{demand:?}: {} vs {oracle}", sol.objective);
    }
}

#[test]
fn fixing_commitment_keeps_the_objective() {
    let sys = uc_toy();
    let data = horizon(&sys, &[5.0, 12.0, 7.0], &[], &[]);
    let out = build_hm(&sys, &data, false).unwrap();
    let mip = HighsSolver.solve(&out.model, &opts()).unwrap();
    let lp = fix_and_relax(&out.model, &mip, &HighsSolver).unwrap();
    assert!(rel_err(lp.objective, mip.objective) < 1e-9);
    assert!(lp.duals.is_some());
}

#[test]
fn continuous_model_is_left_alone() {
    let mut m = MilpModel::new("lp");
    let x = m.add_continuous(Key::new("x"), 0.0, 4.0, 2.0);
    let y = m.add_continuous(Key::new("y"), 0.0, 4.0, 3.0);
    m.add_row(Key::new("c"), [(x, 1.0), (y, 1.0)], RowSense::Ge, 5.0);
    let sol = HighsSolver.solve(&m, &opts()).unwrap();
    let fixed = fixed_lp(&m, &sol);
    assert_eq!(fixed.variables, m.variables);
    assert_eq!(fixed.constraints, m.constraints);
}

#[test]
fn balance_duals_price_the_marginal_source() {
    let sys = uc_toy();
    // first hour served by G1 between its limits, second hour short
    let data = horizon(&sys, &[6.0, 20.0], &[], &[]);
    let out = build_hm(&sys, &data, false).unwrap();
    let mip = HighsSolver.solve(&out.model, &opts()).unwrap();
    assert!(mip.value(out.periods[1].pns[0]) > 1e-6);
    let lp = fix_and_relax(&out.model, &mip, &HighsSolver).unwrap();
    let dual = |p: usize| lp.dual(out.periods[p].balance[0]).unwrap().abs();
    assert!((dual(0) - sys.thermal[0].marginal_cost()).abs() < 1e-6, "{}", dual(0));
    assert!((dual(1) - sys.config.pns_penalty).abs() < 1e-6, "{}", dual(1));
}

fn mps_bytes(model: &MilpModel) -> Vec<u8> {
    let mut buf = Vec::new();
    write_mps(model, &mut buf).unwrap();
    buf
}

#[test]
fn built_models_write_identical_bytes_and_parse_back() {
    let sys = uc_toy();
    let data = horizon(&sys, &[5.0, 12.0, 7.0, 3.0], &[], &[]);
    let a = mps_bytes(&build_hm(&sys, &data, false).unwrap().model);
    let b = mps_bytes(&build_hm(&sys, &data, false).unwrap().model);
    assert_eq!(a, b);

    let model = build_hm(&sys, &data, false).unwrap().model;
    let parsed = parse_mps(&a[..]).unwrap();
    assert!(parsed.same_structure(&model));
    let x = HighsSolver.solve(&model, &opts()).unwrap();
    let y = HighsSolver.solve(&parsed, &opts()).unwrap();
    assert!(rel_err(y.objective, x.objective) < 1e-9);
}

#[test]
fn large_model_streams_quickly() {
    let n = 100_000;
    let mut m = MilpModel::new("big");
    let vars: Vec<_> = (0..n)
        .map(|i| m.add_var(Key::new("x").at("i", i), 0.0, 1.0, i % 3 == 0, (i % 7) as f64))
        .collect();
    for (i, pair) in vars.windows(2).enumerate() {
        m.add_row(Key::new("c").at("i", i), [(pair[0], 1.0), (pair[1], 1.0)], RowSense::Le, 1.5);
    }
    let start = Instant::now();
    let mut sink = std::io::sink();
    write_mps(&m, &mut sink).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 5.0, "writing took {elapsed} s");
}
