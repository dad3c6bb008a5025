//! Sanity checks of the Newton profile-synthesis scaffolding.

mod common;

use common::{hump_count, single_hump, swe_residual, two_pulse, SweGrid};

#[test]
fn single_hump_continuation_reaches_beta_two() {
    let grid = SweGrid::new(32.0, 0.02);
    let (phi, res) = single_hump(&grid, 2.0);
    assert!(res <= 1e-7, "residual {res}");
    assert_eq!(hump_count(&phi, 0.5), 1);
    let max = phi.iter().cloned().fold(0.0f64, f64::max);
    assert!((max - 1.86).abs() < 0.05, "amplitude {max}");
}

#[test]
fn two_pulse_converges_with_two_humps() {
    let grid = SweGrid::new(32.0, 0.02);
    let (phi, res) = two_pulse(&grid, 2.0, 2.3);
    assert!(res <= 1e-7, "residual {res}");
    assert_eq!(hump_count(&phi, 0.5), 2);
    // symmetric two-pulse
    let n = grid.n();
    let mut asym: f64 = 0.0;
    for i in 0..n {
        asym = asym.max((phi[i] - phi[n - 1 - i]).abs());
    }
    assert!(asym <= 1e-7, "asymmetry {asym}");
    // the residual of the continuum equation evaluated independently
    let f = swe_residual(&grid, -1.0, 2.0, &phi);
    let r2 = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(r2 <= 1e-7, "{r2}");
}
