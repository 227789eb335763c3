//! Stress intensity coefficients and the decomposition
//! `u = u_0 + chi P_{k-1} + sum_j S_j s_j chi`.
//!
//! With `e_j` normalised by `int_0^omega e_j^2 = omega/2`, the coefficient of
//! `r^{lambda_j} e_j(phi)` in the solution on the infinite cone is
//!
//! `S_j = 1/(lambda_j omega) int_C r^{-lambda_j} e_j(phi) F dx`, `F = f + Delta(chi P)`.
//!
//! On the truncated cone with a Dirichlet arc the kernel `r^{-lambda}` picks
//! up the image term `- R^{-2 lambda} r^{lambda}`. The dual formula
//! `S_j = 1/(lambda_j omega) [ int f s eta + int u Delta(s eta) ]` with
//! `s = r^{-lambda_j} e_j` reads the coefficient off any solution `u` and
//! only needs `u` on the cutoff band.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CornerError, Result};
use crate::modal::{project_with, solve_poisson_with, ProjectionRule, SolverOptions};
use crate::poly_lift::{assemble_p, eval_cutoff_lift, laplacian_cutoff_lift_at, Lift, Taylor};
use crate::sector::{
    angular_weights, build_spectrum, radial_quadrature, Bc, Cutoff, EigenSpectrum, Grid, Kind, ScalarField, SectorGeometry,
};

/// One term `c r^lambda (ln r)^p trig(lambda phi)`, or with `phi_factor`
/// the log-harmonic pair `c r^lambda (ln r trig + phi trig')`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingularTerm {
    pub lambda: f64,
    pub kind: Kind,
    pub log_power: u8,
    pub phi_factor: bool,
    pub coefficient: f64,
}

impl SingularTerm {
    /// Unit-coefficient term for spectrum position `pos`.
    pub fn from_spectrum(spec: &EigenSpectrum, pos: usize, coefficient: f64) -> Self {
        SingularTerm { lambda: spec.lambda(pos), kind: spec.kinds[pos], log_power: 0, phi_factor: false, coefficient }
    }

    /// Value without the coefficient.
    pub fn shape(&self, r: f64, phi: f64) -> f64 {
        let (s, c) = (self.lambda * phi).sin_cos();
        let (t1, t2) = match self.kind {
            Kind::Sine => (s, c),
            Kind::Cosine => (c, -s),
        };
        let rl = r.powf(self.lambda);
        if self.phi_factor {
            return rl * (r.ln() * t1 + phi * t2);
        }
        rl * r.ln().powi(self.log_power as i32) * t1
    }

    pub fn eval(&self, r: f64, phi: f64) -> f64 {
        self.coefficient * self.shape(r, phi)
    }

    /// Polar Laplacian by centred differences in `(ln r, phi)`; used to
    /// certify harmonicity away from the apex.
    pub fn laplacian_fd(&self, r: f64, phi: f64, h: f64) -> f64 {
        let t = r.ln();
        let v = |tt: f64, p: f64| self.shape(tt.exp(), p);
        let utt = (v(t + h, phi) - 2.0 * v(t, phi) + v(t - h, phi)) / (h * h);
        let upp = (v(t, phi + h) - 2.0 * v(t, phi) + v(t, phi - h)) / (h * h);
        self.coefficient * (utt + upp) / (r * r)
    }
}

/// Radial kernel of the direct formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum SifKernel {
    /// `r^{-lambda}`: coefficient on the infinite cone.
    Cone,
    /// `r^{-lambda} - R^{-2 lambda} r^{lambda}`: truncated cone with Dirichlet arc.
    #[default]
    Truncated,
}

/// Spectrum position of the `j`-th singular term (`j >= 1`, positive eigenvalues only).
pub fn term_position(spec: &EigenSpectrum, j: usize) -> Result<usize> {
    if j == 0 {
        return Err(CornerError::IndexOutOfRange { index: 0, len: spec.len() });
    }
    let pos = spec.first_positive() + j - 1;
    if pos >= spec.len() {
        return Err(CornerError::IndexOutOfRange { index: j, len: spec.len() });
    }
    Ok(pos)
}

fn angular_moment(f: &ScalarField, spec: &EigenSpectrum, pos: usize) -> Vec<f64> {
    // same trapezoid rule as the solver's projection, so all paths see the same discrete data
    let g = &f.grid;
    let m = project_with(f, spec, pos + 1, ProjectionRule::Discrete).expect("valid projection");
    (0..g.r.len()).map(|i| m.coeffs[[pos, i]] * spec.norm_sq(pos)).collect()
}

fn check_integrable(moment: &[f64], grid: &Grid, lambda: f64) -> Result<()> {
    // local exponent a of |F_j| near the apex; need a + 2 - lambda > 0
    let k = 8.min(grid.r.len() - 1);
    let (m0, mk) = (moment[0].abs(), moment[k].abs());
    let scale = moment.iter().zip(&grid.r).fold(0.0f64, |a, (v, r)| a.max(v.abs() * r.powf(2.0 - lambda)));
    if m0 == 0.0 || scale == 0.0 {
        return Ok(());
    }
    let lead = m0 * grid.r[0].powf(2.0 - lambda) / scale;
    let a = if mk > 0.0 { (mk / m0).ln() / (grid.t[k] - grid.t[0]) } else { 0.0 };
    if a + 2.0 - lambda <= 0.0 && lead > 1e-8 {
        return Err(CornerError::Cancellation(format!(
            "integrand r^(1-lambda) F_j behaves like r^{:.3} at the apex",
            a + 1.0 - lambda
        )));
    }
    Ok(())
}

/// Direct coefficient from an already assembled right-hand side `F`.
pub fn stress_intensity_from_rhs(big_f: &ScalarField, j: usize, geom: &SectorGeometry, kernel: SifKernel) -> Result<f64> {
    let spec = build_spectrum(geom, j + 2);
    let pos = term_position(&spec, j)?;
    let lam = spec.lambda(pos);
    let g = &big_f.grid;
    let mom = angular_moment(big_f, &spec, pos);
    check_integrable(&mom, g, lam)?;
    let big_r = geom.radius;
    let h: Vec<f64> = mom
        .iter()
        .zip(&g.r)
        .map(|(m, r)| {
            let k = match kernel {
                SifKernel::Cone => r.powf(-lam),
                SifKernel::Truncated => r.powf(-lam) - big_r.powf(-2.0 * lam) * r.powf(lam),
            };
            k * m
        })
        .collect();
    Ok(radial_quadrature(&h, g) / (lam * geom.omega))
}

/// `S_j` from the data: `1/(lambda_j omega) int K(r) e_j(phi) (f + Delta(chi P)) dx`.
pub fn stress_intensity_direct(
    f: &ScalarField,
    lift: &Lift,
    j: usize,
    geom: &SectorGeometry,
    chi: &Cutoff,
    kernel: SifKernel,
) -> Result<f64> {
    let big_f = if lift.is_zero() {
        f.clone()
    } else {
        let g = &f.grid;
        ScalarField::from_fn(g, |r, p| laplacian_cutoff_lift_at(lift, chi, r, p)).zip_with(f, |a, b| a + b)?
    };
    stress_intensity_from_rhs(&big_f, j, geom, kernel)
}

/// `S_j` from a solution `u` of `-Delta u = f`.
pub fn stress_intensity_dual(u: &ScalarField, f: &ScalarField, j: usize, geom: &SectorGeometry, eta: &Cutoff) -> Result<f64> {
    crate::sector::check_same(&u.grid, &f.grid)?;
    if eta.outer >= geom.radius * (1.0 - 1e-12) {
        return Err(CornerError::Cutoff(format!("touches the outer arc (b={} >= R={})", eta.outer, geom.radius)));
    }
    if eta.inner <= u.grid.r_min() {
        return Err(CornerError::Cutoff("band reaches below the grid floor".into()));
    }
    let spec = build_spectrum(geom, j + 2);
    let pos = term_position(&spec, j)?;
    let lam = spec.lambda(pos);
    let g = &u.grid;
    let fm = angular_moment(f, &spec, pos);
    let um = angular_moment(u, &spec, pos);
    let h: Vec<f64> = (0..g.r.len())
        .map(|i| {
            let r = g.r[i];
            let (e0, e1, e2) = eta.eval3(r);
            let s = r.powf(-lam);
            let band = s * (e2 + e1 / r - 2.0 * lam * e1 / r);
            fm[i] * s * e0 + um[i] * band
        })
        .collect();
    Ok(radial_quadrature(&h, g) / (lam * geom.omega))
}

/// Taylor data from a least-squares polynomial fit of degree `order` on `r < radius_frac R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorFit {
    pub taylor: Taylor,
    pub condition: f64,
    pub max_residual: f64,
}

pub fn fit_taylor(f: &ScalarField, order: usize, radius_frac: f64) -> Result<TaylorFit> {
    let g = &f.grid;
    let rmax = radius_frac * g.radius;
    let idx: Vec<(usize, usize)> = (0..=order).flat_map(|e| (0..=e).map(move |i| (i, e - i))).collect();
    let mut rows = vec![];
    let mut rhs = vec![];
    for (i, &r) in g.r.iter().enumerate() {
        if r > rmax {
            continue;
        }
        // weight by r so each annulus counts by area, not by node count
        let w = r / rmax;
        for (j, &p) in g.phi.iter().enumerate() {
            let (s, c) = p.sin_cos();
            let (x, y) = (r * c / rmax, r * s / rmax);
            rows.push(idx.iter().map(|&(a, b)| w * x.powi(a as i32) * y.powi(b as i32)).collect::<Vec<f64>>());
            rhs.push(w * f.values[[i, j]]);
        }
    }
    if rows.len() < idx.len() {
        return Err(CornerError::Invalid("too few nodes near the apex for the Taylor fit".into()));
    }
    let a = DMatrix::from_fn(rows.len(), idx.len(), |i, j| rows[i][j]);
    let b = DVector::from_vec(rhs);
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let x = svd.solve(&b, 1e-14 * smax).expect("svd solve");
    let res = (&a * &x - &b).amax();
    let mut taylor = Taylor::new();
    for (k, &(i, j)) in idx.iter().enumerate() {
        let fact: f64 = (1..=i).chain(1..=j).map(|v| v as f64).product();
        taylor.insert((i, j), x[k] * fact / rmax.powi((i + j) as i32));
    }
    Ok(TaylorFit { taylor, condition: smax / smin.max(f64::MIN_POSITIVE), max_residual: res })
}

/// Options for [`decompose_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecomposeOptions {
    pub eps: f64,
    /// Smallest allowed `|k + 1 + eps - lambda_j|`.
    pub margin_tol: f64,
    pub solver: SolverOptions,
    pub taylor_radius: f64,
    pub kernel: SifKernel,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        DecomposeOptions {
            eps: 0.05,
            margin_tol: 0.02,
            solver: SolverOptions::default(),
            taylor_radius: 0.05,
            kernel: SifKernel::Truncated,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionMeta {
    pub k: usize,
    pub eps: f64,
    pub tail_ratio: f64,
    pub taylor_condition: Option<f64>,
    /// `(1/omega) int f` for Neumann data: scale of the `ln r` term on the infinite cone.
    pub neumann_log: Option<f64>,
}

/// `u = regular + chi P + sum_j S_j s_j chi`.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub solution: ScalarField,
    pub regular: ScalarField,
    pub lift: Lift,
    pub cutoff: Cutoff,
    pub singular: Vec<SingularTerm>,
    pub meta: DecompositionMeta,
}

impl Decomposition {
    pub fn reconstruct(&self) -> ScalarField {
        let g = &self.regular.grid;
        ScalarField::from_fn(g, |r, p| {
            let c = self.cutoff.value(r);
            c * (self.lift.eval(r, p) + self.singular.iter().map(|s| s.eval(r, p)).sum::<f64>())
        })
        .zip_with(&self.regular, |a, b| a + b)
        .expect("same grid")
    }
}

/// Positions of the singular terms `lambda_j < k + 1 + eps`, refusing
/// orders outside the windows this decomposition covers.
pub fn singular_positions(geom: &SectorGeometry, k: usize, eps: f64, margin_tol: f64) -> Result<Vec<usize>> {
    let spec = build_spectrum(geom, k + 6);
    let cut = k as f64 + 1.0 + eps;
    let mut out = vec![];
    for pos in spec.first_positive()..spec.len() {
        let l = spec.lambda(pos);
        let margin = (cut - l).abs();
        if margin < margin_tol {
            return Err(CornerError::ResonanceMargin { margin, tol: margin_tol });
        }
        if l < cut {
            out.push(pos);
        }
    }
    let max_terms = if geom.bc == Bc::Mixed { 2 } else { 1 };
    if out.len() > max_terms {
        return Err(CornerError::Invalid(format!(
            "k={k} needs {} singular terms; the {} case is covered up to {max_terms}",
            out.len(),
            geom.bc.name()
        )));
    }
    Ok(out)
}

pub fn decompose(f: &ScalarField, geom: &SectorGeometry, k: usize, chi: &Cutoff) -> Result<Decomposition> {
    decompose_with(f, geom, k, chi, &DecomposeOptions::default())
}

pub fn decompose_with(
    f: &ScalarField,
    geom: &SectorGeometry,
    k: usize,
    chi: &Cutoff,
    opts: &DecomposeOptions,
) -> Result<Decomposition> {
    if chi.outer >= geom.radius {
        return Err(CornerError::Cutoff("must vanish before the outer arc".into()));
    }
    let positions = singular_positions(geom, k, opts.eps, opts.margin_tol)?;
    let (lift, cond) = if k == 0 {
        (Lift::zero(geom), None)
    } else {
        let fit = fit_taylor(f, k - 1, opts.taylor_radius)?;
        (assemble_p(&fit.taylor, k, geom)?, Some(fit.condition))
    };
    let g = &f.grid;
    let big_f = if lift.is_zero() {
        f.clone()
    } else {
        ScalarField::from_fn(g, |r, p| laplacian_cutoff_lift_at(&lift, chi, r, p)).zip_with(f, |a, b| a + b)?
    };
    let spec = build_spectrum(geom, k + 6);
    let mut singular = vec![];
    for (j, &pos) in positions.iter().enumerate() {
        let s = stress_intensity_from_rhs(&big_f, j + 1, geom, opts.kernel)?;
        singular.push(SingularTerm::from_spectrum(&spec, pos, s));
    }
    let sol = solve_poisson_with(f, geom, &opts.solver)?;
    let chip = eval_cutoff_lift(&lift, chi, g);
    let regular = ScalarField::from_fn(g, |r, p| {
        chi.value(r) * singular.iter().map(|s| s.eval(r, p)).sum::<f64>()
    });
    let regular = sol.u.zip_with(&regular, |a, b| a - b)?.zip_with(&chip, |a, b| a - b)?;
    let neumann_log = if geom.bc == Bc::Neumann { Some(crate::modal::neumann_log_coefficient(f, geom)?) } else { None };
    Ok(Decomposition {
        solution: sol.u,
        regular,
        lift,
        cutoff: *chi,
        singular,
        meta: DecompositionMeta { k, eps: opts.eps, tail_ratio: sol.tail_ratio, taylor_condition: cond, neumann_log },
    })
}

/// Angular weights used by the coefficient formulas, exposed for reports.
pub fn angular_rule(grid: &Grid) -> Vec<f64> {
    angular_weights(grid.phi.len(), grid.omega)
}
