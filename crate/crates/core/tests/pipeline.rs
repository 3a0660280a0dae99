use std::process::Command;

use proptest::prelude::{prop_assert, proptest};

use mhd_ensemble::ensemble::{sample_viscosities, EnsembleConfig, MemberParams, Sampling, ViscosityRanges};
use mhd_ensemble::experiments::cavity::CavityProblem;
use mhd_ensemble::experiments::channel::{run_step_channel, ChannelSetup};
use mhd_ensemble::experiments::convergence::{
    compute_rate, run_mms, run_spatial_convergence, unit_square_discretization, Comparison, MmsRun,
};
use mhd_ensemble::experiments::mms::{Mms, MmsProblem};
use mhd_ensemble::mesh::{barycentric_refine, build_cavity};
use mhd_ensemble::stepper::{Discretization, EnsembleSolver};

const SAMPLE_A: ViscosityRanges = ViscosityRanges { nu: [0.009, 0.011], nu_m: [0.09, 0.11] };

fn small_run(n: usize) -> MmsRun {
    MmsRun {
        n,
        dt: 0.01,
        end_time: 0.03,
        eps: 0.01,
        mu: 1.0,
        members: sample_viscosities(SAMPLE_A, 4, Sampling::Grid).unwrap(),
        comparison: Comparison::Interpolant,
    }
}

#[test]
fn grid_sampled_tables_are_bitwise_reproducible() {
    let template = small_run(2);
    let a = run_spatial_convergence(&template, &[2, 4]).unwrap();
    let b = run_spatial_convergence(&template, &[2, 4]).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    for (x, y) in a.rows.iter().zip(&b.rows) {
        assert_eq!(x.err_v.to_bits(), y.err_v.to_bits());
        assert_eq!(x.err_w.to_bits(), y.err_w.to_bits());
    }
}

#[test]
fn interpolant_and_exact_comparisons_agree_to_leading_order() {
    let run = small_run(8);
    let a = run_mms(&run).unwrap();
    let b = run_mms(&MmsRun { comparison: Comparison::Exact, ..run }).unwrap();
    assert!(a.err_v > 0.0 && b.err_v > 0.0);
    let ratio = a.err_v / b.err_v;
    assert!((0.5..2.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn energy_is_quadratic_in_the_initial_data() {
    let members = sample_viscosities(SAMPLE_A, 2, Sampling::Grid).unwrap();
    let problem = MmsProblem::unforced(Mms::new(0.01, members.clone()).unwrap());
    let config = EnsembleConfig { s: 1.0, mu: 1.0, dt: 0.05, end_time: 0.05, eps: 0.01, members, seed: 0 };
    let disc = unit_square_discretization(4).unwrap();
    let solver = EnsembleSolver::new(disc, config, &problem).unwrap();
    let mut state = solver.initial_state().unwrap();
    let e0 = solver.energy(&state);
    assert!(e0 > 0.0);
    for f in state.v.iter_mut().chain(state.w.iter_mut()) {
        f.iter_mut().for_each(|x| *x *= 2.0);
    }
    state.refresh().unwrap();
    let e1 = solver.energy(&state);
    assert!((e1 - 4.0 * e0).abs() <= 1e-13 * e1, "{e0} {e1}");
}

#[test]
fn zero_coupling_keeps_the_families_identical() {
    let mesh = std::sync::Arc::new(barycentric_refine(&build_cavity(4).unwrap()).unwrap());
    let disc = std::sync::Arc::new(Discretization::new(mesh).unwrap());
    let members = vec![MemberParams::new(0.002, 0.01).unwrap(), MemberParams::new(0.0018, 0.011).unwrap()];
    let problem = CavityProblem { s: 0.0, eps: 0.01 };
    let config = EnsembleConfig { s: 0.0, mu: 1.0, dt: 1.0, end_time: 3.0, eps: 0.01, members, seed: 0 };
    let mut solver = EnsembleSolver::new(disc, config, &problem).unwrap();
    let (report, state) = solver
        .run(|_, _, st| {
            assert_eq!(st.v, st.w);
            Ok(())
        })
        .unwrap();
    assert_eq!(report.steps(), 3);
    assert!(state.v[0].iter().any(|&x| x != 0.0));
}

#[test]
fn parameter_spread_violation_warns_but_runs() {
    // nu - nu_m far from zero while the mean diffusion is small: alpha < 0
    let members = vec![MemberParams::new(0.001, 0.2).unwrap(), MemberParams::new(0.001, 0.001).unwrap()];
    let problem = MmsProblem::forced(Mms::new(0.0, members.clone()).unwrap());
    let config = EnsembleConfig { s: 1.0, mu: 0.4, dt: 0.01, end_time: 0.02, eps: 0.0, members, seed: 0 };
    let disc = unit_square_discretization(2).unwrap();
    let mut solver = EnsembleSolver::new(disc, config, &problem).unwrap();
    let (report, _) = solver.run(|_, _, _| Ok(())).unwrap();
    assert_eq!(report.steps(), 2);
    assert_eq!(report.warnings.len(), 2, "{:?}", report.warnings);
}

#[test]
fn channel_ensemble_approaches_usual_run_as_eps_shrinks() {
    let setup = ChannelSetup { h_target: 1.0, dt: 0.1, end_time: 0.5, s: 0.001, mu: 1.0 };
    let ranges = ViscosityRanges { nu: [0.0009, 0.0011], nu_m: [0.009, 0.011] };
    let members = sample_viscosities(ranges, 4, Sampling::Grid).unwrap();
    let out = run_step_channel(&setup, &[0.1, 0.01, 0.0], &members).unwrap();
    assert_eq!(out.cases.len(), 4);
    assert_eq!(out.cases[3].label, "usual_mhd");
    let d = &out.distances;
    assert!(d[0] > d[1] && d[1] > d[2], "{d:?}");
    for c in &out.cases {
        assert!(c.report.divergence[1..].iter().all(|&x| x <= 1e-10));
    }
}

#[test]
fn cli_writes_tables_and_checks_forcing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("space.toml");
    std::fs::write(&cfg, "J = 2\nT = 0.002\nmeshes = [2, 4]\neps_list = [0.0]\n").unwrap();
    let bin = env!("CARGO_BIN_EXE_mhd-ensemble");
    let out = dir.path().join("out");
    let status = Command::new(bin)
        .args(["converge-space", "--deterministic-grid", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(out.join("spatial_sample1_eps0.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("h_or_dt,err_v,rate_v,err_w,rate_w"));
    assert_eq!(lines.count(), 2);

    let status = Command::new(bin).args(["validate-mms", "--seed", "3", "--out"]).arg(&out).status().unwrap();
    assert!(status.success());
    assert!(std::fs::read_to_string(out.join("mms_residual.txt")).unwrap().contains("PASS"));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "unknown_key = 1\n").unwrap();
    let status = Command::new(bin).args(["energy", "--config"]).arg(&bad).arg("--out").arg(&out).status().unwrap();
    assert!(!status.success());
}

proptest! {
    #[test]
    fn rates_are_scale_invariant(e1 in 1e-8f64..1.0, e2 in 1e-8f64..1.0, k in 1e-3f64..1e3, s1 in 0.01f64..1.0) {
        let s2 = s1 / 2.0;
        let a = compute_rate(e1, e2, s1, s2).unwrap();
        let b = compute_rate(k * e1, k * e2, s1, s2).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }
}
