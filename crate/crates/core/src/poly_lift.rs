//! Particular solutions of `-Delta p = x^i y^j` satisfying the corner
//! conditions, and the lift `P_{k-1}` built from Taylor data of `f`.
//!
//! `p_{i,j}` is homogeneous of degree `d = i + j + 2`. For most angles a
//! polynomial of that degree works. When a harmonic polynomial of degree `d`
//! already satisfies both leg conditions (resonance), the boundary map is
//! singular and one log-harmonic term `r^d (ln r sin + phi cos)` (or its
//! cosine partner for Neumann) is appended.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CornerError, Result};
use crate::sector::{Bc, Cutoff, Grid, ScalarField, SectorGeometry};

/// Dense `sum a_{mn} x^m y^n` with `m + n <= degree`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BivariatePoly {
    pub degree: usize,
    /// `coeffs[m][n]`, rows of decreasing length.
    pub coeffs: Vec<Vec<f64>>,
}

impl BivariatePoly {
    pub fn zero(degree: usize) -> Self {
        BivariatePoly { degree, coeffs: (0..=degree).map(|m| vec![0.0; degree - m + 1]).collect() }
    }

    pub fn monomial(i: usize, j: usize, c: f64) -> Self {
        let mut p = Self::zero(i + j);
        p.coeffs[i][j] = c;
        p
    }

    pub fn get(&self, m: usize, n: usize) -> f64 {
        if m + n > self.degree {
            0.0
        } else {
            self.coeffs[m][n]
        }
    }

    pub fn set(&mut self, m: usize, n: usize, v: f64) {
        if m + n > self.degree {
            self.grow(m + n);
        }
        self.coeffs[m][n] = v;
    }

    fn grow(&mut self, degree: usize) {
        let mut p = Self::zero(degree);
        for (m, row) in self.coeffs.iter().enumerate() {
            for (n, v) in row.iter().enumerate() {
                p.coeffs[m][n] = *v;
            }
        }
        *self = p;
    }

    pub fn add_scaled(&mut self, other: &BivariatePoly, s: f64) {
        if other.degree > self.degree {
            self.grow(other.degree);
        }
        for (m, row) in other.coeffs.iter().enumerate() {
            for (n, v) in row.iter().enumerate() {
                self.coeffs[m][n] += s * v;
            }
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        // Horner in y inside Horner in x
        let mut acc = 0.0;
        for row in self.coeffs.iter().rev() {
            let inner = row.iter().rev().fold(0.0, |a, c| a * y + c);
            acc = acc * x + inner;
        }
        acc
    }

    pub fn dx(&self) -> Self {
        let mut p = Self::zero(self.degree.saturating_sub(1));
        for m in 1..=self.degree {
            for n in 0..=self.degree - m {
                p.coeffs[m - 1][n] = m as f64 * self.coeffs[m][n];
            }
        }
        p
    }

    pub fn dy(&self) -> Self {
        let mut p = Self::zero(self.degree.saturating_sub(1));
        for m in 0..self.degree {
            for n in 1..=self.degree - m {
                p.coeffs[m][n - 1] = n as f64 * self.coeffs[m][n];
            }
        }
        p
    }

    /// Exact Laplacian.
    pub fn laplacian(&self) -> Self {
        let mut p = self.dx().dx();
        p.add_scaled(&self.dy().dy(), 1.0);
        p
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Which harmonic log term: `Im(z^n ln z)` or `Re(z^n ln z)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LogKind {
    /// `r^n (ln r sin n phi + phi cos n phi)`
    Im,
    /// `r^n (ln r cos n phi - phi sin n phi)`
    Re,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogTerm {
    pub n: u32,
    pub kind: LogKind,
    pub coeff: f64,
}

/// Value and polar derivatives of one log term:
/// `(T, T_r, T_phi, T_rr, T_phiphi)`.
pub fn log_term_derivs(n: u32, kind: LogKind, r: f64, phi: f64) -> [f64; 5] {
    let nf = n as f64;
    let l = r.ln();
    let (s, c) = (nf * phi).sin_cos();
    // x = the bracket, a = the "extra" trig produced by d/dr of ln r
    let (x, a, dphi_bracket) = match kind {
        LogKind::Im => (l * s + phi * c, s, nf * l * c + c - nf * phi * s),
        LogKind::Re => (l * c - phi * s, c, -nf * l * s - s - nf * phi * c),
    };
    let rn = r.powi(n as i32);
    let rn1 = rn / r;
    let rn2 = rn1 / r;
    [
        rn * x,
        rn1 * (nf * x + a),
        rn * dphi_bracket,
        rn2 * (nf * (nf - 1.0) * x + (2.0 * nf - 1.0) * a),
        rn * (-nf * nf * x - 2.0 * nf * a),
    ]
}

impl LogTerm {
    pub fn eval(&self, r: f64, phi: f64) -> f64 {
        self.coeff * log_term_derivs(self.n, self.kind, r, phi)[0]
    }

    /// Laplacian assembled from the analytic polar derivatives. Zero up to rounding.
    pub fn laplacian(&self, r: f64, phi: f64) -> f64 {
        let d = log_term_derivs(self.n, self.kind, r, phi);
        self.coeff * (d[3] + d[1] / r + d[4] / (r * r))
    }
}

/// Sum of log-harmonic terms.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LogHarmonic {
    pub terms: Vec<LogTerm>,
}

impl LogHarmonic {
    fn sum(&self, r: f64, phi: f64, k: usize) -> f64 {
        self.terms.iter().map(|t| t.coeff * log_term_derivs(t.n, t.kind, r, phi)[k]).sum()
    }

    fn push(&mut self, t: LogTerm) {
        if let Some(e) = self.terms.iter_mut().find(|e| e.n == t.n && e.kind == t.kind) {
            e.coeff += t.coeff;
        } else {
            self.terms.push(t);
        }
    }
}

/// A lift `poly + log_part` with `-Delta(lift) = target`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lift {
    pub poly: BivariatePoly,
    pub log_part: LogHarmonic,
    /// Degrees `n` at which a log term was appended.
    pub resonance_set: Vec<u32>,
    /// Right-hand side polynomial, kept for residual certificates.
    pub target: BivariatePoly,
    pub bc: Bc,
    pub omega: f64,
}

impl Lift {
    pub fn zero(geom: &SectorGeometry) -> Self {
        Lift {
            poly: BivariatePoly::zero(0),
            log_part: LogHarmonic::default(),
            resonance_set: vec![],
            target: BivariatePoly::zero(0),
            bc: geom.bc,
            omega: geom.omega,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.poly.max_abs_coeff() == 0.0 && self.log_part.terms.iter().all(|t| t.coeff == 0.0)
    }

    pub fn eval(&self, r: f64, phi: f64) -> f64 {
        let (s, c) = phi.sin_cos();
        self.poly.eval(r * c, r * s) + self.log_part.sum(r, phi, 0)
    }

    /// `(d/dr, d/dphi)` of the lift.
    pub fn grad_polar(&self, r: f64, phi: f64) -> (f64, f64) {
        let (s, c) = phi.sin_cos();
        let (x, y) = (r * c, r * s);
        let px = self.poly.dx().eval(x, y);
        let py = self.poly.dy().eval(x, y);
        (
            c * px + s * py + self.log_part.sum(r, phi, 1),
            r * (-s * px + c * py) + self.log_part.sum(r, phi, 2),
        )
    }

    /// Exact Laplacian: symbolic for the polynomial, analytic for the log terms.
    pub fn laplacian(&self, r: f64, phi: f64) -> f64 {
        let (s, c) = phi.sin_cos();
        let lp = self.poly.laplacian().eval(r * c, r * s);
        lp + self.log_part.terms.iter().map(|t| t.laplacian(r, phi)).sum::<f64>()
    }

    pub fn add_scaled(&mut self, other: &Lift, s: f64) {
        self.poly.add_scaled(&other.poly, s);
        self.target.add_scaled(&other.target, s);
        for t in &other.log_part.terms {
            self.log_part.push(LogTerm { coeff: t.coeff * s, ..*t });
        }
        for n in &other.resonance_set {
            if !self.resonance_set.contains(n) {
                self.resonance_set.push(*n);
            }
        }
        self.resonance_set.sort_unstable();
    }

    /// `max |Delta L + target| / max |target|` over a polar sample of `C_R`.
    pub fn pde_residual(&self, radius: f64) -> f64 {
        let mut num: f64 = 0.0;
        let mut den: f64 = 0.0;
        for a in 1..=16 {
            let r = radius * a as f64 / 16.0;
            for b in 0..=16 {
                let phi = self.omega * b as f64 / 16.0;
                let (s, c) = phi.sin_cos();
                let t = self.target.eval(r * c, r * s);
                num = num.max((self.laplacian(r, phi) + t).abs());
                den = den.max(t.abs());
            }
        }
        if den == 0.0 {
            num
        } else {
            num / den
        }
    }

    /// Boundary residual on both legs at 64 Chebyshev points in `(0, R]`,
    /// relative to the size of the lift and its gradient there.
    pub fn boundary_residual(&self, radius: f64) -> f64 {
        let mut num: f64 = 0.0;
        // size of the lift over the whole sector, so that legs on which
        // everything vanishes do not produce 0/0
        let mut scale: f64 = 0.0;
        for a in 1..=16 {
            let r = radius * a as f64 / 16.0;
            for b in 0..=16 {
                let phi = self.omega * b as f64 / 16.0;
                let (gr, gp) = self.grad_polar(r, phi);
                scale = scale.max(self.eval(r, phi).abs()).max((r * gr).abs()).max(gp.abs());
            }
        }
        for k in 0..64 {
            let x = (PI * (k as f64 + 0.5) / 64.0).cos();
            let r = radius * 0.5 * (1.0 + x);
            for (phi, dirichlet) in leg_conditions(self.bc, self.omega) {
                let res = if dirichlet { self.eval(r, phi) } else { self.grad_polar(r, phi).1 };
                num = num.max(res.abs());
            }
        }
        if scale == 0.0 {
            num
        } else {
            num / scale
        }
    }
}

/// `(phi, is_dirichlet)` for the two legs.
fn leg_conditions(bc: Bc, omega: f64) -> [(f64, bool); 2] {
    match bc {
        Bc::Dirichlet => [(0.0, true), (omega, true)],
        Bc::Neumann => [(0.0, false), (omega, false)],
        Bc::Mixed => [(0.0, true), (omega, false)],
    }
}

/// Membership test for a log term at degree `n`. Exact on `p/q pi` angles,
/// never true for angles given only in radians, and never used at `omega = pi`.
pub fn is_resonant(geom: &SectorGeometry, n: u32) -> bool {
    if geom.is_smooth_case() {
        return false;
    }
    let Some(f) = geom.pi_fraction else {
        return false;
    };
    let n = n as i64;
    match geom.bc {
        Bc::Dirichlet | Bc::Neumann => (n * f.p) % f.q == 0,
        Bc::Mixed => (2 * n * f.p + f.q) % (2 * f.q) == 0,
    }
}

/// The resonance set for order `k`: `n in {2..k+2}` (D, N) or `{1..k+2}` (M).
pub fn resonance_set(geom: &SectorGeometry, k: u32) -> Vec<u32> {
    let lo = if geom.bc == Bc::Mixed { 1 } else { 2 };
    (lo..=k + 2).filter(|&n| is_resonant(geom, n)).collect()
}

fn log_kind(bc: Bc) -> LogKind {
    match bc {
        Bc::Neumann => LogKind::Re,
        Bc::Dirichlet | Bc::Mixed => LogKind::Im,
    }
}

/// Homogeneous harmonic polynomial of degree `n` satisfying both leg
/// conditions, when one exists (exactly at resonance).
pub fn kernel_element(geom: &SectorGeometry, n: u32) -> Option<BivariatePoly> {
    if !is_resonant(geom, n) && !(geom.is_smooth_case() && geom.bc != Bc::Mixed) {
        return None;
    }
    // Re/Im of (x + i y)^n by binomial expansion
    let n = n as usize;
    let mut p = BivariatePoly::zero(n);
    let mut binom = 1.0;
    for k in 0..=n {
        // term C(n,k) x^{n-k} (i y)^k
        let (re, im) = match k % 4 {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, -1.0),
        };
        let c = if geom.bc == Bc::Neumann { re } else { im };
        p.coeffs[n - k][k] = binom * c;
        binom = binom * (n - k) as f64 / (k + 1) as f64;
    }
    Some(p)
}

/// `cos^m(phi) sin^n(phi)` and its phi-derivative.
fn trig_mono(m: usize, n: usize, phi: f64) -> (f64, f64) {
    let (s, c) = phi.sin_cos();
    let v = c.powi(m as i32) * s.powi(n as i32);
    let mut d = 0.0;
    if m > 0 {
        d -= m as f64 * c.powi(m as i32 - 1) * s.powi(n as i32 + 1);
    }
    if n > 0 {
        d += n as f64 * c.powi(m as i32 + 1) * s.powi(n as i32 - 1);
    }
    (v, d)
}

/// `p_{i,j}`: `-Delta p = x^i y^j` in the sector with the leg conditions of `geom`.
pub fn build_pij(i: usize, j: usize, geom: &SectorGeometry) -> Lift {
    let d = i + j + 2;
    let omega = geom.omega;
    let resonant = is_resonant(geom, d as u32);
    // unknowns: a_{m, d-m} for m = 0..=d, then the log coefficient
    let nu = d + 1 + usize::from(resonant);
    let neq = (d - 1) + 2;
    let mut a = DMatrix::<f64>::zeros(neq, nu);
    let mut rhs = DVector::<f64>::zeros(neq);

    // Laplacian rows, indexed by the x-power of the degree d-2 monomial
    for m in 0..=d {
        let n = d - m;
        if m >= 2 {
            a[(m - 2, m)] += (m * (m - 1)) as f64;
        }
        if n >= 2 {
            a[(m, m)] += (n * (n - 1)) as f64;
        }
    }
    rhs[i] = -1.0;

    // leg phi = 0
    let row0 = d - 1;
    match geom.bc {
        Bc::Dirichlet | Bc::Mixed => a[(row0, d)] = 1.0,
        Bc::Neumann => a[(row0, d - 1)] = 1.0,
    }

    // leg phi = omega, coefficient of r^d
    let row1 = d;
    let dirichlet_far = geom.bc == Bc::Dirichlet;
    for m in 0..=d {
        let (v, dv) = trig_mono(m, d - m, omega);
        a[(row1, m)] = if dirichlet_far { v } else { dv };
    }
    if resonant {
        let df = d as f64;
        a[(row1, d + 1)] = match geom.bc {
            Bc::Dirichlet => omega * (df * omega).cos(),
            Bc::Neumann => -df * omega * (df * omega).cos(),
            Bc::Mixed => -df * omega * (df * omega).sin(),
        };
    }

    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let x = svd.solve(&rhs, 1e-11 * smax).expect("svd solve with computed U and V");

    let mut poly = BivariatePoly::zero(d);
    for m in 0..=d {
        poly.coeffs[m][d - m] = x[m];
    }
    let mut log_part = LogHarmonic::default();
    let mut res = vec![];
    if resonant {
        log_part.terms.push(LogTerm { n: d as u32, kind: log_kind(geom.bc), coeff: x[d + 1] });
        res.push(d as u32);
    }
    Lift {
        poly,
        log_part,
        resonance_set: res,
        target: BivariatePoly::monomial(i, j, 1.0),
        bc: geom.bc,
        omega,
    }
}

/// Taylor data `(i, j) -> d_x^i d_y^j f(0)`.
pub type Taylor = BTreeMap<(usize, usize), f64>;

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `P_{k-1} = sum_{i+j <= k-1} p_{i,j} d^{ij} f(0) / (i! j!)`; zero for `k = 0`.
pub fn assemble_p(taylor: &Taylor, k: usize, geom: &SectorGeometry) -> Result<Lift> {
    let mut lift = Lift::zero(geom);
    if k == 0 {
        return Ok(lift);
    }
    for e in 0..k {
        for i in 0..=e {
            let j = e - i;
            let c = *taylor
                .get(&(i, j))
                .ok_or_else(|| CornerError::Invalid(format!("taylor data missing ({i},{j})")))?;
            if c != 0.0 {
                lift.add_scaled(&build_pij(i, j, geom), c / (factorial(i) * factorial(j)));
            }
        }
    }
    Ok(lift)
}

/// Samples of the lift on a grid.
pub fn eval_lift(lift: &Lift, grid: &Grid) -> ScalarField {
    ScalarField::from_fn(grid, |r, phi| lift.eval(r, phi))
}

/// Samples of `chi P`.
pub fn eval_cutoff_lift(lift: &Lift, chi: &Cutoff, grid: &Grid) -> ScalarField {
    ScalarField::from_fn(grid, |r, phi| chi.value(r) * lift.eval(r, phi))
}

/// `Delta(chi P) = chi Delta P + 2 chi' dP/dr + (chi'' + chi'/r) P` with `chi` radial.
pub fn laplacian_cutoff_lift_at(lift: &Lift, chi: &Cutoff, r: f64, phi: f64) -> f64 {
    let (c0, c1, c2) = chi.eval3(r);
    let mut v = c0 * lift.laplacian(r, phi);
    if c1 != 0.0 || c2 != 0.0 {
        let (pr, _) = lift.grad_polar(r, phi);
        v += 2.0 * c1 * pr + (c2 + c1 / r) * lift.eval(r, phi);
    }
    v
}

pub fn eval_laplacian_of_cutoff_lift(lift: &Lift, chi: &Cutoff, grid: &Grid) -> ScalarField {
    ScalarField::from_fn(grid, |r, phi| laplacian_cutoff_lift_at(lift, chi, r, phi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quarter_pi_dirichlet_matches_closed_form() {
        let g = SectorGeometry::pi_frac(1, 4, 1.0, Bc::Dirichlet).unwrap();
        let p = build_pij(0, 0, &g);
        assert!(p.resonance_set.is_empty());
        assert!((p.poly.get(1, 1) - 0.5).abs() < 1e-13);
        assert!((p.poly.get(0, 2) + 0.5).abs() < 1e-13);
        assert!(p.poly.get(2, 0).abs() < 1e-13);
    }

    #[test]
    fn resonance_cases() {
        let g = SectorGeometry::pi_frac(1, 2, 1.0, Bc::Dirichlet).unwrap();
        assert_eq!(build_pij(0, 0, &g).resonance_set, vec![2]);
        for bc in [Bc::Dirichlet, Bc::Neumann, Bc::Mixed] {
            let g = SectorGeometry::pi_frac(1, 1, 1.0, bc).unwrap();
            for (i, j) in [(0, 0), (1, 0), (0, 2)] {
                let p = build_pij(i, j, &g);
                assert!(p.log_part.terms.is_empty());
                assert!(p.pde_residual(1.0) < 1e-10);
                assert!(p.boundary_residual(1.0) < 1e-10, "{bc:?} {i} {j}");
            }
        }
        let g = SectorGeometry::pi_frac(3, 4, 1.0, Bc::Mixed).unwrap();
        // 2n*3 + 4 divisible by 8 <=> n = 2 (mod 4)
        assert_eq!(resonance_set(&g, 4), vec![2, 6]);
    }

    #[test]
    fn log_terms_are_harmonic() {
        for kind in [LogKind::Im, LogKind::Re] {
            for n in 1..6 {
                let t = LogTerm { n, kind, coeff: 1.0 };
                let v = t.laplacian(0.37, 1.1);
                assert!(v.abs() < 1e-12, "{kind:?} {n} {v}");
            }
        }
    }

    #[test]
    fn cutoff_lift_inside_plateau() {
        let g = SectorGeometry::pi_frac(2, 3, 1.0, Bc::Neumann).unwrap();
        let p = build_pij(1, 1, &g);
        let chi = Cutoff::quintic(0.5, 0.8).unwrap();
        let (r, phi) = (0.3f64, 0.9f64);
        let (s, c) = phi.sin_cos();
        let v = laplacian_cutoff_lift_at(&p, &chi, r, phi);
        assert!((v + r * c * r * s).abs() < 1e-12);
    }

    #[test]
    fn assemble_linearity() {
        let g = SectorGeometry::pi_frac(1, 4, 1.0, Bc::Dirichlet).unwrap();
        let mut t = Taylor::new();
        t.insert((0, 0), 3.0);
        t.insert((1, 0), 0.0);
        t.insert((0, 1), 0.0);
        let p = assemble_p(&t, 2, &g).unwrap();
        let p00 = build_pij(0, 0, &g);
        assert!((p.eval(0.4, 0.3) - 3.0 * p00.eval(0.4, 0.3)).abs() < 1e-14);
        assert!(assemble_p(&t, 0, &g).unwrap().is_zero());
        assert!(assemble_p(&t, 3, &g).is_err());
    }
}
