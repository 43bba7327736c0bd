//! Grid solver: consistency with the closed form, with simulation of its own
//! feedback control, and with the verdict classifier.

use gbm_coupling::analytic;
use gbm_coupling::hjb::{self, BoundaryMode, GridSpec};
use gbm_coupling::simulate::{estimate_survival, simulate_tau, CouplingPolicy, SimConfig};
use gbm_coupling::{derive, DerivedConstants, Error, ProblemSpec, Sign};

fn spec(x: f64, y: f64, a1: f64, a2: f64, s1: f64, s2: f64) -> DerivedConstants {
    derive(&ProblemSpec::new(x, y, a1, a2, s1, s2).unwrap()).unwrap()
}

fn stable(d: &DerivedConstants, horizon: f64, n_z: usize, mode: BoundaryMode) -> GridSpec {
    let g = GridSpec::standard(d, horizon, n_z, 1, mode);
    GridSpec { n_t: g.stable_n_t(d, horizon), ..g }
}

#[test]
fn feedback_control_reproduces_grid_value() {
    let d = spec(2.0, 1.0, 0.0, 1.0, 1.0, 1.0);
    let grid = stable(&d, 1.0, 256, BoundaryMode::AnalyticMirror);
    let surface = hjb::solve(&d, Sign::Plus, 1.0, &grid).unwrap();
    let policy = hjb::extract_policy(&surface);
    let cfg = SimConfig { n_paths: 20_000, dt: surface.dt(), horizon: 1.0, master_seed: 3, bridge_correction: true };
    let out = simulate_tau(&d, &policy, &cfg).unwrap();
    let sim = estimate_survival(&out, 1.0).unwrap();
    let value = surface.value_at(d.z0);
    let phi = analytic::phi(&d, 1.0, Sign::Plus).unwrap();
    assert!((sim.mean - value).abs() <= 3.0 * sim.std_error + 0.02, "{} vs {value}", sim.mean);
    // Both beat the mirror coupling by a wide margin.
    assert!(value < phi - 0.1 && sim.mean < phi - 0.1);
}

#[test]
fn optimal_regime_keeps_the_candidate_control() {
    for mu in [-1.0, -0.1, 0.0] {
        let d = spec(2.0, 1.0, 0.0, mu - 0.125 + 0.5, 0.5, 1.0);
        let grid = stable(&d, 1.0, 96, BoundaryMode::AnalyticMirror);
        let surface = hjb::solve(&d, Sign::Plus, 1.0, &grid).unwrap();
        assert!(surface.controls.iter().all(|&c| c == -1), "mu={mu}");
        // The extracted feedback then simulates exactly like the mirror coupling.
        let policy = hjb::extract_policy(&surface);
        let cfg = SimConfig { n_paths: 2000, dt: 0.01, horizon: 1.0, master_seed: 5, bridge_correction: true };
        let a = simulate_tau(&d, &policy, &cfg).unwrap();
        let b = simulate_tau(&d, &CouplingPolicy::Mirror, &cfg).unwrap();
        assert_eq!(a, b);
        let dev = surface.max_deviation(&d, 0.5).unwrap();
        assert!(dev < 5e-3, "mu={mu}: {dev}");
    }
}

#[test]
fn surface_is_a_survival_surface() {
    let d = spec(3.0, 1.0, 0.0, 0.2, 0.6, 0.9);
    for sign in [Sign::Plus, Sign::Minus] {
        let grid = stable(&d, 2.0, 64, BoundaryMode::One);
        let s = hjb::solve(&d, sign, 2.0, &grid).unwrap();
        assert_eq!(s.values.len(), (grid.n_t + 1) * grid.n_z);
        for j in 0..=grid.n_t {
            let row = s.row(j);
            assert_eq!(row[0], 0.0);
            assert!(row.iter().all(|v| (0.0..=1.0 + 1e-12).contains(v)));
        }
        assert!(s.row(0)[1..].iter().all(|&v| v == 1.0));
    }
}

#[test]
fn explicit_step_limit_is_enforced() {
    let d = spec(2.0, 1.0, 0.0, 0.0, 1.0, 1.0);
    let g = stable(&d, 1.0, 128, BoundaryMode::AnalyticMirror);
    let too_coarse = GridSpec { n_t: g.n_t - 1, ..g };
    match hjb::solve_final(&d, Sign::Plus, 1.0, &too_coarse) {
        Err(Error::Unstable { .. }) => {}
        other => panic!("expected an unstable-grid error, got {other:?}"),
    }
    assert!(hjb::solve_final(&d, Sign::Plus, 1.0, &g).is_ok());
}

#[test]
fn gap_reports_agree_with_the_classifier() {
    // Optimal regime: no significant gap.
    let d = spec(2.0, 1.0, 0.0, -0.5, 0.5, 1.0);
    let r = hjb::gap_report(&d, Sign::Plus, 1.0, &stable(&d, 1.0, 64, BoundaryMode::AnalyticMirror)).unwrap();
    assert!(!r.significant && r.consistent());
    assert!(r.gap.abs() <= r.error.max(1e-6), "{} vs {}", r.gap, r.error);
    // Suboptimal regime: a significant gap.
    let d = spec(2.0, 1.0, 0.0, 1.0, 1.0, 1.0);
    let r = hjb::gap_report(&d, Sign::Plus, 1.0, &stable(&d, 1.0, 64, BoundaryMode::AnalyticMirror)).unwrap();
    assert!(r.significant && r.gap > r.error);
    assert_eq!(r.levels.len(), 3);
    assert_eq!(r.grids[1], r.grids[0].refined());
}

#[test]
fn boundary_modes_agree_away_from_the_truncation() {
    let d = spec(2.0, 1.0, 0.0, 0.0, 0.5, 1.0);
    let a = stable(&d, 1.0, 128, BoundaryMode::AnalyticMirror);
    let b = GridSpec { boundary_mode: BoundaryMode::One, ..a };
    let fa = hjb::solve_final(&d, Sign::Plus, 1.0, &a).unwrap();
    let fb = hjb::solve_final(&d, Sign::Plus, 1.0, &b).unwrap();
    let i = (d.z0 / a.dz()).round() as usize;
    assert!((fa[i] - fb[i]).abs() < 1e-6, "{} vs {}", fa[i], fb[i]);
}
