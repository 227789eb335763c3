//! Angular eigen-projection and the per-mode radial Green's kernels.
//!
//! In `t = ln r` the mode equation `-(u'' + u'/r - lambda^2 u / r^2) = f_n`
//! becomes `u_tt - lambda^2 u = -g` with `g = r^2 f_n`. Its Green's function
//! is a pair of decaying exponentials, so the two running integrals are
//! accumulated with `e^{-lambda dt}` damping and integrated exactly against
//! a local degree-5 interpolant of `g`.

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CornerError, Result};
use crate::product::cell_integrals;
use crate::sector::{area_integral, build_spectrum, check_same, corner_tail, Bc, EigenSpectrum, Grid, ScalarField, SectorGeometry};

/// Angular quadrature used for projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum ProjectionRule {
    /// Trapezoid on the uniform nodes: exact discrete orthogonality of the
    /// sampled eigenfunctions, so band-limited data round-trips exactly.
    #[default]
    Discrete,
    /// Gregory end-corrected trapezoid: high order for data that is not
    /// band-limited, at the cost of a small cross-mode leak.
    HighOrder,
}

/// Outer-arc condition for the radial solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Outer {
    /// `u = 0` on `r = R`.
    #[default]
    Dirichlet,
    /// No outer boundary: the restriction to `C_R` of the solution on the
    /// infinite cone for data supported in `C_R` (decaying at infinity).
    Transparent,
}

/// Field stored as angular eigen-coefficients `coeffs[[n, i]] = f_n(r_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalField {
    pub spectrum: EigenSpectrum,
    pub grid: Grid,
    pub coeffs: Array2<f64>,
}

impl ModalField {
    pub fn n_modes(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn mode(&self, n: usize) -> Vec<f64> {
        self.coeffs.row(n).to_vec()
    }

    /// `sum_n f_n(r) e_n(phi)` on the grid.
    pub fn reconstruct(&self) -> ScalarField {
        let g = &self.grid;
        let mut vals = Array2::zeros(g.shape());
        for n in 0..self.n_modes() {
            let e: Vec<f64> = g.phi.iter().map(|&p| self.spectrum.eval(n, p)).collect();
            for i in 0..g.r.len() {
                let c = self.coeffs[[n, i]];
                if c == 0.0 {
                    continue;
                }
                for (j, ej) in e.iter().enumerate() {
                    vals[[i, j]] += c * ej;
                }
            }
        }
        ScalarField { grid: g.clone(), values: vals }
    }
}

fn angular_rule(n: usize, omega: f64, rule: ProjectionRule) -> Vec<f64> {
    let h = omega / (n - 1) as f64;
    match rule {
        ProjectionRule::Discrete => {
            let mut w = vec![h; n];
            w[0] *= 0.5;
            w[n - 1] *= 0.5;
            w
        }
        ProjectionRule::HighOrder => crate::sector::gregory_weights(n, h),
    }
}

/// Project onto the first `n_modes` eigenfunctions with the default rule.
pub fn project(f: &ScalarField, spec: &EigenSpectrum, n_modes: usize) -> Result<ModalField> {
    project_with(f, spec, n_modes, ProjectionRule::Discrete)
}

/// `f_n(r_i) = (1 / ||e_n||^2) int_0^omega f(r_i, phi) e_n(phi) dphi`.
pub fn project_with(f: &ScalarField, spec: &EigenSpectrum, n_modes: usize, rule: ProjectionRule) -> Result<ModalField> {
    if n_modes > spec.len() || n_modes == 0 {
        return Err(CornerError::Invalid(format!("n_modes={n_modes} but spectrum has {}", spec.len())));
    }
    let g = &f.grid;
    if (g.omega - spec.omega).abs() > 1e-12 {
        return Err(CornerError::GridMismatch("grid and spectrum have different omega".into()));
    }
    let w = angular_rule(g.phi.len(), g.omega, rule);
    let mut coeffs = Array2::zeros((n_modes, g.r.len()));
    for n in 0..n_modes {
        let e: Vec<f64> = g.phi.iter().zip(&w).map(|(&p, wj)| spec.eval(n, p) * wj / spec.norm_sq(n)).collect();
        for i in 0..g.r.len() {
            coeffs[[n, i]] = f.values.row(i).iter().zip(&e).map(|(a, b)| a * b).sum();
        }
    }
    let mut spectrum = spec.clone();
    spectrum.lambdas.truncate(n_modes);
    spectrum.kinds.truncate(n_modes);
    Ok(ModalField { spectrum, grid: g.clone(), coeffs })
}

/// Per-interval integrals of `g` against `e^{-lambda (tau - t_k)}`
/// (`reversed = false`) or `e^{-lambda (t_{k+1} - tau)}` (`reversed = true`),
/// with `g` replaced by its degree-5 interpolant on the nearest six nodes.
pub(crate) fn interval_integrals(g: &[f64], lambda: f64, dt: f64, reversed: bool) -> Vec<f64> {
    let gc: Vec<Complex64> = g.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    cell_integrals(&gc, Complex64::new(lambda, 0.0), dt, reversed).into_iter().map(|v| v.re).collect()
}

/// Mass of `g` below the first node, weighted by `e^{-lambda (t_0 - tau)}`,
/// assuming `g ~ e^{beta t}` there.
fn lower_tail(g0: f64, g1: f64, lambda: f64, dt: f64) -> f64 {
    if g0 == 0.0 {
        return 0.0;
    }
    let beta = if g1 != 0.0 && g0.signum() == g1.signum() { (g1 / g0).ln() / dt } else { 2.0 };
    let beta = beta.clamp(0.1, 60.0);
    g0 / (lambda + beta)
}

/// Radial solve for one mode on the grid's log nodes.
///
/// For `lambda > 0`:
/// `u = (1/2 lambda) [ A(t) + B(t) - e^{lambda (t - T)} B(T) ]` with
/// `A(t) = int_t^T e^{-lambda(tau - t)} g`, `B(t) = int_{-inf}^t e^{-lambda(t - tau)} g`,
/// `T = ln R`. The last term enforces `u(R) = 0` and is dropped for [`Outer::Transparent`].
/// For `lambda = 0` the kernel is `T - max(t, tau)`.
pub fn solve_radial_mode(f_n: &[f64], lambda: f64, grid: &Grid, outer: Outer) -> Result<Vec<f64>> {
    if f_n.len() != grid.r.len() {
        return Err(CornerError::GridMismatch(format!("{} radial samples for {} nodes", f_n.len(), grid.r.len())));
    }
    if !(lambda >= 0.0) {
        return Err(CornerError::Invalid(format!("negative eigenvalue {lambda}")));
    }
    let n = grid.r.len();
    let dt = grid.dt;
    let g: Vec<f64> = f_n.iter().zip(&grid.r).map(|(f, r)| f * r * r).collect();
    if g.iter().all(|v| *v == 0.0) {
        return Ok(vec![0.0; n]);
    }
    let big_t = grid.t[n - 1];
    if lambda == 0.0 {
        if outer == Outer::Transparent {
            return Err(CornerError::Invalid("the constant mode needs an outer Dirichlet arc".into()));
        }
        // u(t) = (T - t) int_{-inf}^t g + int_t^T (T - tau) g
        let fwd = interval_integrals(&g, 0.0, dt, false);
        let h: Vec<f64> = g.iter().zip(&grid.t).map(|(v, t)| (big_t - t) * v).collect();
        let fh = interval_integrals(&h, 0.0, dt, false);
        let mut c0 = vec![0.0; n];
        c0[0] = lower_tail(g[0], g[1], 0.0, dt);
        for k in 0..n - 1 {
            c0[k + 1] = c0[k] + fwd[k];
        }
        let mut c1 = vec![0.0; n];
        for k in (0..n - 1).rev() {
            c1[k] = c1[k + 1] + fh[k];
        }
        return Ok((0..n).map(|k| (big_t - grid.t[k]) * c0[k] + c1[k]).collect());
    }
    let damp = (-lambda * dt).exp();
    let ia = interval_integrals(&g, lambda, dt, false);
    let ib = interval_integrals(&g, lambda, dt, true);
    let mut a = vec![0.0; n];
    for k in (0..n - 1).rev() {
        a[k] = damp * a[k + 1] + ia[k];
    }
    let mut b = vec![0.0; n];
    b[0] = lower_tail(g[0], g[1], lambda, dt);
    for k in 0..n - 1 {
        b[k + 1] = damp * b[k] + ib[k];
    }
    let bt = b[n - 1];
    Ok((0..n)
        .map(|k| {
            let hom = match outer {
                Outer::Dirichlet => (lambda * (grid.t[k] - big_t)).exp() * bt,
                Outer::Transparent => 0.0,
            };
            (a[k] + b[k] - hom) / (2.0 * lambda)
        })
        .collect())
}

/// Options for [`solve_poisson_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub n_modes: usize,
    /// Largest tolerated fraction of `||f||^2` outside the resolved modes.
    pub tail_tol: f64,
    pub rule: ProjectionRule,
    pub outer: Outer,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { n_modes: 32, tail_tol: 0.05, rule: ProjectionRule::Discrete, outer: Outer::Dirichlet }
    }
}

/// Solution with the modal data and the truncation diagnostic.
#[derive(Debug, Clone)]
pub struct Solution {
    pub u: ScalarField,
    pub modes: ModalField,
    pub tail_ratio: f64,
}

fn check_geometry(grid: &Grid, geom: &SectorGeometry) -> Result<()> {
    if (grid.omega - geom.omega).abs() > 1e-12 || (grid.radius - geom.radius).abs() > 1e-12 * geom.radius {
        return Err(CornerError::GridMismatch("field grid does not cover the sector".into()));
    }
    Ok(())
}

/// Fraction of `int |f|^2 dx` not captured by the projected modes.
pub fn tail_energy_ratio(f: &ScalarField, m: &ModalField) -> Result<f64> {
    check_same(&f.grid, &m.grid)?;
    let total = area_integral(&f.map(|v| v * v));
    if total <= 0.0 {
        return Ok(0.0);
    }
    let g = &m.grid;
    let per_r: Vec<f64> = (0..g.r.len())
        .map(|i| (0..m.n_modes()).map(|n| m.coeffs[[n, i]].powi(2) * m.spectrum.norm_sq(n)).sum())
        .collect();
    let captured = crate::sector::radial_quadrature(&per_r, g);
    Ok(((total - captured) / total).max(0.0))
}

/// `-Delta u = f` on `C_R` with the leg conditions of `geom` and `u = 0` on the arc.
pub fn solve_poisson(f: &ScalarField, geom: &SectorGeometry, n_modes: usize) -> Result<ScalarField> {
    let opts = SolverOptions { n_modes, ..Default::default() };
    Ok(solve_poisson_with(f, geom, &opts)?.u)
}

pub fn solve_poisson_with(f: &ScalarField, geom: &SectorGeometry, opts: &SolverOptions) -> Result<Solution> {
    check_geometry(&f.grid, geom)?;
    let spec = build_spectrum(geom, opts.n_modes);
    let fm = project_with(f, &spec, opts.n_modes, opts.rule)?;
    let tail = tail_energy_ratio(f, &fm)?;
    if tail > opts.tail_tol {
        return Err(CornerError::TailEnergy { ratio: tail, tol: opts.tail_tol, what: "insufficient modes".into() });
    }
    let rows: Vec<Result<Vec<f64>>> = (0..opts.n_modes)
        .into_par_iter()
        .map(|n| solve_radial_mode(&fm.coeffs.row(n).to_vec(), fm.spectrum.lambda(n), &f.grid, opts.outer))
        .collect();
    let mut coeffs = Array2::zeros(fm.coeffs.dim());
    for (n, row) in rows.into_iter().enumerate() {
        for (i, v) in row?.into_iter().enumerate() {
            coeffs[[n, i]] = v;
        }
    }
    let modes = ModalField { spectrum: fm.spectrum, grid: f.grid.clone(), coeffs };
    Ok(Solution { u: modes.reconstruct(), modes, tail_ratio: tail })
}

/// `(1/omega) int_C f dx`: the scale of the `ln r` term in the Neumann expansion.
pub fn neumann_log_coefficient(f: &ScalarField, geom: &SectorGeometry) -> Result<f64> {
    if geom.bc != Bc::Neumann {
        return Err(CornerError::WrongBc(format!("log coefficient needs Neumann, got {}", geom.bc.name())));
    }
    check_geometry(&f.grid, geom)?;
    Ok(area_integral(f) / geom.omega)
}

/// Below-grid contribution helper, re-exported for callers that integrate
/// radial profiles themselves.
pub fn radial_tail(h0: f64, h1: f64, grid: &Grid) -> f64 {
    corner_tail(h0, h1, grid.r[0], grid.dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn power_law_error(lambda: f64, n_r: usize) -> f64 {
        let big_r: f64 = 1.5;
        let grid = Grid::new(big_r, 1.0, n_r, 4, 1e-6).unwrap();
        let f: Vec<f64> = grid.r.iter().map(|r| r.powf(lambda)).collect();
        let u = solve_radial_mode(&f, lambda, &grid, Outer::Dirichlet).unwrap();
        let mut err: f64 = 0.0;
        let mut size: f64 = 0.0;
        for (ui, r) in u.iter().zip(&grid.r) {
            let exact = (r.powf(lambda) * big_r * big_r - r.powf(lambda + 2.0)) / (4.0 * (lambda + 1.0));
            err = err.max((ui - exact).abs());
            size = size.max(exact.abs());
        }
        err / size
    }

    #[test]
    fn power_law_mode_matches_closed_form() {
        for lambda in [0.5, 2.0 / 3.0, 4.0] {
            assert!(power_law_error(lambda, 400) < 1e-6, "lambda={lambda}");
        }
        // r^20 varies by a factor two per node at n_r = 400; refine
        let e1 = power_law_error(20.0, 800);
        let e2 = power_law_error(20.0, 1600);
        assert!(e2 < 1e-6 && e1 / e2 > 40.0, "{e1} {e2}");
    }

    #[test]
    fn constant_mode_closed_form() {
        // -(u'' + u'/r) = 1, u(R) = 0 => u = (R^2 - r^2)/4
        let grid = Grid::new(1.0, 1.0, 400, 4, 1e-6).unwrap();
        let f = vec![1.0; grid.r.len()];
        let u = solve_radial_mode(&f, 0.0, &grid, Outer::Dirichlet).unwrap();
        for (ui, r) in u.iter().zip(&grid.r) {
            assert!((ui - (1.0 - r * r) / 4.0).abs() < 1e-8);
        }
    }

    #[test]
    fn discrete_projection_is_exact_for_modes() {
        for bc in [Bc::Dirichlet, Bc::Neumann, Bc::Mixed] {
            let geom = SectorGeometry::pi_frac(3, 2, 1.0, bc).unwrap();
            let grid = Grid::for_sector(&geom, 16, 64).unwrap();
            let spec = build_spectrum(&geom, 10);
            let f = ScalarField::from_fn(&grid, |r, p| r * spec.eval(2, p) + 0.5 * spec.eval(0, p));
            let m = project(&f, &spec, 10).unwrap();
            for n in 0..10 {
                let want = match n {
                    2 => grid.r[5],
                    0 => 0.5,
                    _ => 0.0,
                };
                assert!((m.coeffs[[n, 5]] - want).abs() < 1e-13, "{bc:?} {n}");
            }
            let back = m.reconstruct();
            assert!(crate::sector::rel_l2(&back, &f).unwrap() < 1e-12);
        }
    }

    #[test]
    fn neumann_log_coefficient_examples() {
        let geom = SectorGeometry::pi_frac(3, 2, 1.0, Bc::Neumann).unwrap();
        let grid = Grid::for_sector(&geom, 200, 32).unwrap();
        let one = ScalarField::from_fn(&grid, |_, _| 1.0);
        assert!((neumann_log_coefficient(&one, &geom).unwrap() - 0.5).abs() < 1e-8);
        let d = SectorGeometry::pi_frac(3, 2, 1.0, Bc::Dirichlet).unwrap();
        assert!(neumann_log_coefficient(&one, &d).is_err());
        let _ = PI;
    }
}
