//! Independent reference computations used by the verification suite.
//!
//! Nothing here shares numerics with the production solvers: the Poisson
//! reference is a plain five-point finite-difference scheme in `(ln r, phi)`
//! and the quadrature oracles are brute-force midpoint sums.

use ndarray::Array2;
use rayon::prelude::*;

/// Solve the tridiagonal system `sub x_{i-1} + diag_i x_i + sup x_{i+1} = rhs_i`.
fn thomas(sub: f64, diag: &[f64], sup: f64, rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - sub * c[i - 1];
        c[i] = sup / m;
        d[i] = (rhs[i] - sub * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Five-point finite differences for `-Delta u = f` on the sector with
/// Dirichlet legs, Dirichlet arc at `r = R`, and `u = 0` imposed at
/// `r = R e^{-n_t dt}`. Returns `u[[k, j]]` at `t_k = ln R - (n_t - k) dt`,
/// `phi_j = j omega / n_phi`. The angular direction is diagonalised with the
/// discrete sine transform, each sine mode is a tridiagonal solve in `t`.
pub fn fd_poisson_dirichlet(
    omega: f64,
    radius: f64,
    f: &(dyn Fn(f64, f64) -> f64 + Sync),
    n_t: usize,
    n_phi: usize,
    dt: f64,
) -> Array2<f64> {
    let tr = radius.ln();
    let dphi = omega / n_phi as f64;
    let np = n_phi;
    // sine table S[n][j] = sin(n pi j / N)
    let sines: Vec<Vec<f64>> = (1..np)
        .map(|n| (1..np).map(|j| (std::f64::consts::PI * (n * j) as f64 / np as f64).sin()).collect())
        .collect();
    let interior = n_t - 1;
    // g = r^2 f on interior nodes, transformed
    let ghat: Vec<Vec<f64>> = (1..n_t)
        .into_par_iter()
        .map(|k| {
            let t = tr - (n_t - k) as f64 * dt;
            let r = t.exp();
            let g: Vec<f64> = (1..np).map(|j| r * r * f(r, j as f64 * dphi)).collect();
            sines.iter().map(|s| 2.0 / np as f64 * s.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>()).collect()
        })
        .collect();
    let idt2 = 1.0 / (dt * dt);
    let uhat: Vec<Vec<f64>> = (0..np - 1)
        .into_par_iter()
        .map(|n| {
            let mu = 4.0 / (dphi * dphi) * (std::f64::consts::PI * (n + 1) as f64 / (2 * np) as f64).sin().powi(2);
            let diag = vec![-2.0 * idt2 - mu; interior];
            let rhs: Vec<f64> = (0..interior).map(|k| -ghat[k][n]).collect();
            thomas(idt2, &diag, idt2, &rhs)
        })
        .collect();
    let mut u = Array2::zeros((n_t + 1, np + 1));
    for k in 0..interior {
        for j in 1..np {
            u[[k + 1, j]] = (0..np - 1).map(|n| uhat[n][k] * sines[n][j - 1]).sum();
        }
    }
    u
}

/// Richardson extrapolation of [`fd_poisson_dirichlet`] from `(dt, dphi)`
/// and `(dt/2, dphi/2)`, reported on the coarse nodes.
pub fn fd_poisson_dirichlet_extrapolated(
    omega: f64,
    radius: f64,
    f: &(dyn Fn(f64, f64) -> f64 + Sync),
    n_t: usize,
    n_phi: usize,
    dt: f64,
) -> Array2<f64> {
    let coarse = fd_poisson_dirichlet(omega, radius, f, n_t, n_phi, dt);
    let fine = fd_poisson_dirichlet(omega, radius, f, 2 * n_t, 2 * n_phi, dt / 2.0);
    Array2::from_shape_fn(coarse.dim(), |(k, j)| (4.0 * fine[[2 * k, 2 * j]] - coarse[[k, j]]) / 3.0)
}

/// Midpoint sum of `h` on `[a, b]` with `n` cells: a brute-force check for
/// the production quadratures.
pub fn midpoint(h: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let dx = (b - a) / n as f64;
    (0..n).map(|k| h(a + (k as f64 + 0.5) * dx)).sum::<f64>() * dx
}

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
