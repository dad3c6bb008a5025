//! Test scaffolding: synthesize standing-wave profiles by Newton iteration on
//! the sixth-order finite-difference discretization, for feeding the sampled
//! -profile pipeline with genuine (numerically polished) solitons.

use maslov_core::solves::{banded::BandedMatrix, solve_near_singular};

pub struct SweGrid {
    pub xs: Vec<f64>,
    pub h: f64,
}

impl SweGrid {
    pub fn new(l: f64, h: f64) -> SweGrid {
        let n = (2.0 * l / h).round() as usize + 1;
        let xs = (0..n)
            .map(|i| -l + 2.0 * l * (i as f64) / ((n - 1) as f64))
            .collect();
        SweGrid { xs, h }
    }

    pub fn n(&self) -> usize {
        self.xs.len()
    }
}

fn stencil4(h: f64) -> [f64; 9] {
    let h4 = h.powi(4);
    [
        7.0 / 240.0,
        -2.0 / 5.0,
        169.0 / 60.0,
        -122.0 / 15.0,
        91.0 / 8.0,
        -122.0 / 15.0,
        169.0 / 60.0,
        -2.0 / 5.0,
        7.0 / 240.0,
    ]
    .map(|c| c / h4)
}

fn stencil2(h: f64) -> [f64; 7] {
    let h2 = h * h;
    [
        1.0 / 90.0,
        -3.0 / 20.0,
        3.0 / 2.0,
        -49.0 / 18.0,
        3.0 / 2.0,
        -3.0 / 20.0,
        1.0 / 90.0,
    ]
    .map(|c| c / h2)
}

/// Compensated evaluation of the standing-wave residual
/// phi'''' + sigma2 phi'' + beta phi - phi^3 on the interior rows.
pub fn swe_residual(grid: &SweGrid, sigma2: f64, beta: f64, phi: &[f64]) -> Vec<f64> {
    let n = grid.n();
    let c4 = stencil4(grid.h);
    let c2 = stencil2(grid.h);
    let mut out = vec![0.0; n];
    for i in 4..n - 4 {
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        let mut acc = |coef: f64, v: f64| {
            let term = coef * v;
            comp += coef.mul_add(v, -term);
            let t = sum + term;
            if sum.abs() >= term.abs() {
                comp += (sum - t) + term;
            } else {
                comp += (term - t) + sum;
            }
            sum = t;
        };
        for (k, c) in c4.iter().enumerate() {
            acc(*c, phi[i - 4 + k]);
        }
        for (k, c) in c2.iter().enumerate() {
            acc(sigma2 * c, phi[i - 3 + k]);
        }
        acc(beta, phi[i]);
        acc(-phi[i] * phi[i], phi[i]);
        out[i] = sum + comp;
    }
    out
}

/// One Newton solve of the standing wave equation from an initial guess,
/// pinning the translation mode through the deflated linear solver.
/// Returns (profile, interior residual max).
pub fn swe_newton(
    grid: &SweGrid,
    sigma2: f64,
    beta: f64,
    guess: &[f64],
    max_iter: usize,
) -> (Vec<f64>, f64) {
    let n = grid.n();
    let c4 = stencil4(grid.h);
    let c2 = stencil2(grid.h);
    let mut phi = guess.to_vec();
    let mut best_res = f64::INFINITY;
    for _ in 0..max_iter {
        let mut f = swe_residual(grid, sigma2, beta, &phi);
        let res = f[4..n - 4]
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        best_res = best_res.min(res);
        if res < 5.0 * f64::EPSILON * (45.5 / grid.h.powi(4)) {
            return (phi, res);
        }
        for i in [0, 1, 2, 3, n - 4, n - 3, n - 2, n - 1] {
            f[i] = phi[i];
        }
        // Jacobian: d4 + sigma2 d2 + beta - 3 phi^2 with Dirichlet buffer rows
        let mut a = BandedMatrix::zeros(n, 4, 4);
        for i in 4..n - 4 {
            for (k, c) in c4.iter().enumerate() {
                a.add(i, i - 4 + k, *c);
            }
            for (k, c) in c2.iter().enumerate() {
                a.add(i, i - 3 + k, sigma2 * c);
            }
            a.add(i, i, beta - 3.0 * phi[i] * phi[i]);
        }
        for i in [0, 1, 2, 3, n - 4, n - 3, n - 2, n - 1] {
            a.set(i, i, 1.0);
        }
        // translation kernel hint: centered differences of the iterate
        let mut ker = vec![0.0; n];
        for i in 1..n - 1 {
            ker[i] = (phi[i + 1] - phi[i - 1]) / (2.0 * grid.h);
        }
        let step = match solve_near_singular(&a, &ker, &f) {
            Ok(s) => s,
            Err(_) => break,
        };
        for i in 0..n {
            phi[i] -= step[i];
        }
    }
    let f = swe_residual(grid, sigma2, beta, &phi);
    let res = f[4..n - 4].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    (phi, res)
}

/// Continue the primary soliton from the exact closed-form solution at
/// beta = 4/25 up to the requested beta (sigma2 = -1).
pub fn single_hump(grid: &SweGrid, beta_target: f64) -> (Vec<f64>, f64) {
    let amp = (3.0f64 / 10.0).sqrt();
    let c = 2.0 * 5.0f64.sqrt();
    let mut phi: Vec<f64> = grid
        .xs
        .iter()
        .map(|&x| amp / (x / c).cosh().powi(2))
        .collect();
    let mut res = f64::INFINITY;
    let steps = [0.16, 0.3, 0.5, 0.8, 1.2, 1.6, 2.0];
    for &b in steps.iter().filter(|&&b| b <= beta_target + 1e-12) {
        let (p, r) = swe_newton(grid, -1.0, b, &phi, 30);
        phi = p;
        res = r;
    }
    (phi, res)
}

/// Glue two copies of a single-hump profile at separation 2a and polish into
/// a genuine two-pulse standing wave.
pub fn two_pulse(grid: &SweGrid, beta: f64, a: f64) -> (Vec<f64>, f64) {
    let (single, _res) = single_hump(grid, beta);
    let shift = |x: f64| -> f64 {
        // linear interpolation of the single-hump samples
        let xs = &grid.xs;
        if x <= xs[0] || x >= xs[xs.len() - 1] {
            return 0.0;
        }
        let t = (x - xs[0]) / grid.h;
        let i = t.floor() as usize;
        let frac = t - i as f64;
        single[i] * (1.0 - frac) + single[i + 1] * frac
    };
    let guess: Vec<f64> = grid.xs.iter().map(|&x| shift(x - a) + shift(x + a)).collect();
    swe_newton(grid, -1.0, beta, &guess, 40)
}

/// Count well-separated humps (local maxima above the threshold).
pub fn hump_count(phi: &[f64], threshold: f64) -> usize {
    let mut count = 0;
    for i in 1..phi.len() - 1 {
        if phi[i] > threshold && phi[i] > phi[i - 1] && phi[i] > phi[i + 1] {
            count += 1;
        }
    }
    count
}

/// Write a two-column sampled-profile file.
pub fn write_profile_file(path: &std::path::Path, xs: &[f64], phi: &[f64]) {
    let mut text = String::with_capacity(xs.len() * 48);
    text.push_str("# sampled standing-wave profile\n");
    for (x, p) in xs.iter().zip(phi.iter()) {
        text.push_str(&format!("{x:.17e} {p:.17e}\n"));
    }
    std::fs::write(path, text).unwrap();
}
