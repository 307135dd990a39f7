//! Per-figure sign expectations for the preset sweeps. Late times are the
//! second half of the run.

use nmchaos::experiments::{
    run_fig3, run_fig4, run_fig5, run_sweep, Axis, Figure, GridResult, SweepSpec, TimeOrWindow,
};
use nmchaos::{integrate, FullState};

const LATE: (f64, f64) = (100.0, 200.0);

fn late(grid: &GridResult, at: &[f64], obs: &str) -> f64 {
    grid.late_mean(at, obs, LATE.0, LATE.1).unwrap()
}

fn fig2(taus: &[f64]) -> GridResult {
    let mut spec = SweepSpec::preset(Figure::Fig2);
    spec.axes = vec![Axis::new("tau", taus.to_vec())];
    run_sweep(&spec).unwrap()
}

fn components(grid: &GridResult, tau: f64) -> Vec<f64> {
    (1..=5)
        .map(|i| late(grid, &[tau], &format!("ReF{i}")))
        .collect()
}

#[test]
fn fig2_long_memory_is_chaotic() {
    let lam = late(&fig2(&[10.0]), &[10.0], "q1");
    assert!(lam > 0.0, "{lam}");
}

#[test]
fn fig2_short_and_markovian_memory_are_regular() {
    let grid = fig2(&[0.01, 0.5]);
    for tau in [0.01, 0.5] {
        let lam = late(&grid, &[tau], "q1");
        assert!(lam < 0.0, "tau {tau}: {lam}");
    }
}

#[test]
fn fig3_long_memory_has_a_positive_component() {
    let grid = run_fig3(&[10.0]).unwrap();
    let lams = components(&grid, 10.0);
    assert!(lams.iter().any(|&l| l > 0.0), "{lams:?}");
}

#[test]
fn fig3_short_memory_components_are_negative() {
    let grid = run_fig3(&[0.5, 1.0]).unwrap();
    for tau in [0.5, 1.0] {
        let lams = components(&grid, tau);
        assert!(lams.iter().all(|&l| l < 0.0), "tau {tau}: {lams:?}");
    }
}

#[test]
fn fig3_component_signs_follow_q1() {
    let taus = [0.5, 1.0, 10.0];
    let mut spec = SweepSpec::preset(Figure::Fig3);
    spec.axes = vec![Axis::new("tau", taus.to_vec())];
    spec.observables.push("q1".into());
    let grid = run_sweep(&spec).unwrap();
    for tau in taus {
        let q1 = late(&grid, &[tau], "q1");
        let lams = components(&grid, tau);
        assert!(
            lams.iter().all(|l| l.signum() == q1.signum()),
            "tau {tau}: q1 {q1}, F {lams:?}"
        );
    }
}

#[test]
fn fig4_resonant_environment_is_chaotic() {
    let lam = late(&run_fig4(&[2.0]).unwrap(), &[2.0], "p1");
    assert!(lam > 0.0, "{lam}");
}

#[test]
fn fig4_zero_frequency_is_mostly_negative() {
    let grid = run_fig4(&[0.0]).unwrap();
    let lams: Vec<f64> = grid
        .select(&[0.0], "p1")
        .map(|r| r.lambda)
        .filter(|l| l.is_finite())
        .collect();
    let negative = lams.iter().filter(|&&l| l < 0.0).count();
    assert!(2 * negative > lams.len(), "{negative} of {}", lams.len());
}

#[test]
fn fig4_far_detuned_is_regular() {
    let lam = late(&run_fig4(&[10.0]).unwrap(), &[10.0], "p1");
    assert!(lam < 0.0, "{lam}");
}

fn fig5_windowed(grid: &GridResult, k1: f64, k2: f64) -> f64 {
    grid.select(&[k1, k2], "p1")
        .find(|r| matches!(r.at, TimeOrWindow::Window(..)))
        .unwrap()
        .lambda
}

#[test]
fn fig5_strong_coupling_corner_is_chaotic() {
    let grid = run_fig5(&[2.0], &[2.0]).unwrap();
    let lam = fig5_windowed(&grid, 2.0, 2.0);
    assert!(lam > 0.0, "{lam}");
}

#[test]
fn fig5_uncoupled_corner_is_regular() {
    let grid = run_fig5(&[0.0], &[0.0]).unwrap();
    let lam = fig5_windowed(&grid, 0.0, 0.0);
    assert!(lam < 0.0, "{lam}");
}

#[test]
fn fig5_more_sensitive_to_kappa1() {
    let grid = run_fig5(&[0.1, 2.0], &[0.1, 2.0]).unwrap();
    let base = fig5_windowed(&grid, 0.1, 0.1);
    let along_k1 = (fig5_windowed(&grid, 2.0, 0.1) - base).abs();
    let along_k2 = (fig5_windowed(&grid, 0.1, 2.0) - base).abs();
    assert!(along_k1 > along_k2, "dk1 {along_k1} vs dk2 {along_k2}");
}

#[test]
fn fig6_signs_and_photon_number() {
    let taus = [0.1, 10.0, 20.0];
    let mut spec = SweepSpec::preset(Figure::Fig6);
    spec.axes = vec![Axis::new("tau", taus.to_vec())];
    spec.observables = vec!["p1".into()];
    spec.report_max = false;
    let grid = run_sweep(&spec).unwrap();
    assert!(late(&grid, &[0.1], "p1") < 0.0);
    assert!(late(&grid, &[10.0], "p1") > 0.0 || late(&grid, &[20.0], "p1") > 0.0);
    for cell in spec.cells() {
        let (sys, env) = spec.cell_params(&cell).unwrap();
        let traj = integrate(
            &sys,
            &env,
            &FullState::initial(spec.init),
            spec.t_max,
            0.1,
            spec.control,
            &spec.toggles,
        )
        .unwrap();
        assert!(traj.samples.iter().all(|s| s.obs.n == 2.0));
    }
}
