//! Sector geometry, corner spectra, log-radial grids, sampled fields,
//! cutoffs and the quadrature rules everything else is built on.
//!
//! Polar coordinates throughout: `r` is the distance from the apex and
//! `phi` runs over `[0, omega]`. The radial grid is uniform in `t = ln r`.

use std::f64::consts::PI;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{CornerError, Result};

/// Boundary condition on the two legs. `Mixed` is Dirichlet on `phi = 0`
/// and Neumann on `phi = omega`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bc {
    Dirichlet,
    Neumann,
    Mixed,
}

impl Bc {
    pub fn name(self) -> &'static str {
        match self {
            Bc::Dirichlet => "dirichlet",
            Bc::Neumann => "neumann",
            Bc::Mixed => "mixed",
        }
    }
}

/// Opening angle as a reduced fraction `p/q` of pi.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PiFraction {
    pub p: i64,
    pub q: i64,
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl PiFraction {
    pub fn new(p: i64, q: i64) -> Result<Self> {
        if p <= 0 || q <= 0 {
            return Err(CornerError::Invalid(format!("bad pi fraction {p}/{q}")));
        }
        let g = gcd(p, q);
        Ok(PiFraction { p: p / g, q: q / g })
    }

    pub fn radians(self) -> f64 {
        self.p as f64 * PI / self.q as f64
    }
}

/// Plane sector of opening `omega` truncated at radius `radius`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorGeometry {
    pub omega: f64,
    /// Exact value of `omega / pi` when known. Resonance tests need it.
    pub pi_fraction: Option<PiFraction>,
    pub radius: f64,
    pub bc: Bc,
}

impl SectorGeometry {
    pub fn new(omega: f64, radius: f64, bc: Bc) -> Result<Self> {
        if !(omega > 0.0 && omega < 2.0 * PI) {
            return Err(CornerError::Invalid(format!("omega={omega} not in (0, 2pi)")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(CornerError::Invalid(format!("radius={radius} must be > 0")));
        }
        Ok(SectorGeometry { omega, pi_fraction: None, radius, bc })
    }

    /// `omega = p/q * pi`, keeping the fraction for exact resonance arithmetic.
    pub fn pi_frac(p: i64, q: i64, radius: f64, bc: Bc) -> Result<Self> {
        let frac = PiFraction::new(p, q)?;
        let mut g = Self::new(frac.radians(), radius, bc)?;
        g.pi_fraction = Some(frac);
        Ok(g)
    }

    /// Half-plane: the solution is as smooth as the data, there is no
    /// corner exponent to measure.
    pub fn is_smooth_case(&self) -> bool {
        match self.pi_fraction {
            Some(f) => f.p == 1 && f.q == 1,
            None => (self.omega - PI).abs() < 1e-14,
        }
    }

    /// Endpoint analyses refuse `omega = pi` for D/N when asked to.
    pub fn check_endpoint_mode(&self) -> Result<()> {
        if self.bc != Bc::Mixed && self.is_smooth_case() {
            return Err(CornerError::Invalid(
                "omega = pi has no corner exponent for Dirichlet/Neumann".into(),
            ));
        }
        Ok(())
    }
}

/// Angular eigenfunction type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Kind {
    Sine,
    Cosine,
}

/// Ordered corner eigenvalues with their angular eigenfunctions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSpectrum {
    pub lambdas: Vec<f64>,
    pub kinds: Vec<Kind>,
    pub includes_zero: bool,
    pub omega: f64,
    pub bc: Bc,
}

pub fn build_spectrum(geom: &SectorGeometry, n_max: usize) -> EigenSpectrum {
    let w = geom.omega;
    let n_max = n_max.max(1);
    let (lambdas, kind): (Vec<f64>, Kind) = match geom.bc {
        Bc::Dirichlet => ((1..=n_max).map(|n| n as f64 * PI / w).collect(), Kind::Sine),
        Bc::Neumann => ((0..n_max).map(|n| n as f64 * PI / w).collect(), Kind::Cosine),
        Bc::Mixed => ((1..=n_max).map(|n| (n as f64 - 0.5) * PI / w).collect(), Kind::Sine),
    };
    EigenSpectrum {
        kinds: vec![kind; lambdas.len()],
        lambdas,
        includes_zero: geom.bc == Bc::Neumann,
        omega: w,
        bc: geom.bc,
    }
}

impl EigenSpectrum {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    /// Conventional label of position `pos`: Neumann counts from 0, the others from 1.
    pub fn label(&self, pos: usize) -> usize {
        if self.includes_zero {
            pos
        } else {
            pos + 1
        }
    }

    /// Position of the first eigenvalue that is strictly positive.
    pub fn first_positive(&self) -> usize {
        usize::from(self.includes_zero)
    }

    pub fn lambda(&self, pos: usize) -> f64 {
        self.lambdas[pos]
    }

    /// `e_pos(phi)`.
    pub fn eval(&self, pos: usize, phi: f64) -> f64 {
        let l = self.lambdas[pos];
        match self.kinds[pos] {
            Kind::Sine => (l * phi).sin(),
            Kind::Cosine => (l * phi).cos(),
        }
    }

    /// `e_pos'(phi)`.
    pub fn deriv(&self, pos: usize, phi: f64) -> f64 {
        let l = self.lambdas[pos];
        match self.kinds[pos] {
            Kind::Sine => l * (l * phi).cos(),
            Kind::Cosine => -l * (l * phi).sin(),
        }
    }

    /// `int_0^omega e_pos^2`: omega/2, or omega for the constant mode.
    pub fn norm_sq(&self, pos: usize) -> f64 {
        if self.lambdas[pos] == 0.0 {
            self.omega
        } else {
            0.5 * self.omega
        }
    }
}

/// Eigenfunction by conventional label `n` (Neumann from 0, others from 1).
pub fn eigenfunction(spec: &EigenSpectrum, n: usize, phi: f64) -> Result<f64> {
    let pos = if spec.includes_zero {
        Some(n)
    } else {
        n.checked_sub(1)
    };
    match pos {
        Some(p) if p < spec.len() => Ok(spec.eval(p, phi)),
        _ => Err(CornerError::IndexOutOfRange { index: n, len: spec.len() }),
    }
}

/// Log-radial by uniform-angular tensor grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub radius: f64,
    pub omega: f64,
    /// `ln r` at the radial nodes, uniform with spacing `dt`.
    pub t: Vec<f64>,
    pub r: Vec<f64>,
    pub phi: Vec<f64>,
    pub dt: f64,
    pub dphi: f64,
}

impl Grid {
    /// `n_r + 1` radial nodes from `radius * r_min_ratio` to `radius`,
    /// `n_phi + 1` angular nodes on `[0, omega]`.
    pub fn new(radius: f64, omega: f64, n_r: usize, n_phi: usize, r_min_ratio: f64) -> Result<Self> {
        if n_r < 8 || n_phi < 2 {
            return Err(CornerError::Invalid(format!("grid too small: n_r={n_r}, n_phi={n_phi}")));
        }
        if !(r_min_ratio > 0.0 && r_min_ratio < 1.0) {
            return Err(CornerError::Invalid(format!("r_min ratio {r_min_ratio} not in (0,1)")));
        }
        let dt = -r_min_ratio.ln() / n_r as f64;
        let tr = radius.ln();
        let t: Vec<f64> = (0..=n_r).map(|i| tr - (n_r - i) as f64 * dt).collect();
        let mut r: Vec<f64> = t.iter().map(|x| x.exp()).collect();
        r[n_r] = radius;
        let dphi = omega / n_phi as f64;
        let phi = (0..=n_phi).map(|j| j as f64 * dphi).collect();
        Ok(Grid { radius, omega, t, r, phi, dt, dphi })
    }

    /// Grid on the sector with the default corner floor `r_min = 1e-6 R`.
    pub fn for_sector(geom: &SectorGeometry, n_r: usize, n_phi: usize) -> Result<Self> {
        Self::new(geom.radius, geom.omega, n_r, n_phi, 1e-6)
    }

    pub fn n_r(&self) -> usize {
        self.r.len() - 1
    }

    pub fn n_phi(&self) -> usize {
        self.phi.len() - 1
    }

    pub fn r_min(&self) -> f64 {
        self.r[0]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.r.len(), self.phi.len())
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self.shape() == other.shape()
            && (self.dt - other.dt).abs() <= 1e-14 * self.dt
            && (self.omega - other.omega).abs() <= 1e-14
            && (self.radius - other.radius).abs() <= 1e-14 * self.radius
    }
}

/// Real samples `values[[i, j]] = u(r_i, phi_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Array2<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Array2<f64>) -> Result<Self> {
        if values.dim() != grid.shape() {
            return Err(CornerError::GridMismatch(format!(
                "values {:?} vs grid {:?}",
                values.dim(),
                grid.shape()
            )));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn zeros(grid: &Grid) -> Self {
        ScalarField { values: Array2::zeros(grid.shape()), grid: grid.clone() }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = Array2::from_shape_fn(grid.shape(), |(i, j)| f(grid.r[i], grid.phi[j]));
        ScalarField { values, grid: grid.clone() }
    }

    /// Pointwise combination with another field on the same grid.
    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        check_same(&self.grid, &other.grid)?;
        let mut values = self.values.clone();
        values.zip_mut_with(&other.values, |a, &b| *a = f(*a, b));
        Ok(ScalarField { values, grid: self.grid.clone() })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField { values: self.values.mapv(f), grid: self.grid.clone() }
    }

    /// `int_C u^2 dx` over the grid region.
    pub fn l2_norm(&self) -> f64 {
        area_integral(&self.map(|v| v * v)).max(0.0).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub(crate) fn check_same(a: &Grid, b: &Grid) -> Result<()> {
    if a.same_as(b) {
        Ok(())
    } else {
        Err(CornerError::GridMismatch(format!("{:?} vs {:?}", a.shape(), b.shape())))
    }
}

/// Relative L2 distance `||a - b|| / ||b||`.
pub fn rel_l2(a: &ScalarField, b: &ScalarField) -> Result<f64> {
    let d = a.zip_with(b, |x, y| x - y)?;
    Ok(d.l2_norm() / b.l2_norm().max(f64::MIN_POSITIVE))
}

/// Radial cutoff profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Profile {
    /// `1 - (10 s^3 - 15 s^4 + 6 s^5)`: C^2, closed-form derivatives.
    Quintic,
    /// Ratio of `exp(-1/x)` bumps: C-infinity.
    Smooth,
}

/// `chi(r) = 1` on `[0, a]`, `0` on `[b, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub inner: f64,
    pub outer: f64,
    pub profile: Profile,
}

fn psi(x: f64) -> (f64, f64, f64) {
    if x <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let v = (-1.0 / x).exp();
    let x2 = x * x;
    (v, v / x2, v * (1.0 / (x2 * x2) - 2.0 / (x2 * x)))
}

impl Cutoff {
    pub fn new(inner: f64, outer: f64, profile: Profile) -> Result<Self> {
        if !(inner >= 0.0 && outer > inner) {
            return Err(CornerError::Cutoff(format!("needs 0 <= a < b, got a={inner}, b={outer}")));
        }
        Ok(Cutoff { inner, outer, profile })
    }

    pub fn quintic(inner: f64, outer: f64) -> Result<Self> {
        Self::new(inner, outer, Profile::Quintic)
    }

    pub fn smooth(inner: f64, outer: f64) -> Result<Self> {
        Self::new(inner, outer, Profile::Smooth)
    }

    /// `(chi, chi', chi'')` at `r`.
    pub fn eval3(&self, r: f64) -> (f64, f64, f64) {
        if r <= self.inner {
            return (1.0, 0.0, 0.0);
        }
        if r >= self.outer {
            return (0.0, 0.0, 0.0);
        }
        let w = self.outer - self.inner;
        let s = (r - self.inner) / w;
        match self.profile {
            Profile::Quintic => {
                let u = 1.0 - s;
                let g = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
                let g1 = 30.0 * s * s * u * u;
                let g2 = 60.0 * s * u * (1.0 - 2.0 * s);
                (1.0 - g, -g1 / w, -g2 / (w * w))
            }
            Profile::Smooth => {
                let (a, a1, a2) = psi(s);
                let (b, b1m, b2) = psi(1.0 - s);
                let b1 = -b1m;
                let d = a + b;
                let num = a1 * b - a * b1;
                let g = a / d;
                let g1 = num / (d * d);
                let g2 = (a2 * b - a * b2) / (d * d) - 2.0 * num * (a1 + b1) / (d * d * d);
                (1.0 - g, -g1 / w, -g2 / (w * w))
            }
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        self.eval3(r).0
    }

    pub fn d1(&self, r: f64) -> f64 {
        self.eval3(r).1
    }

    pub fn d2(&self, r: f64) -> f64 {
        self.eval3(r).2
    }

    /// Laplacian of the radial function `chi(|x|)`.
    pub fn laplacian(&self, r: f64) -> f64 {
        let (_, c1, c2) = self.eval3(r);
        c2 + c1 / r
    }
}

/// Composite Simpson on uniform samples over `[0, omega]`. An odd number of
/// intervals finishes with a 3/8 panel.
pub fn angular_quadrature(g: &[f64], omega: f64) -> f64 {
    let w = angular_weights(g.len(), omega);
    g.iter().zip(&w).map(|(a, b)| a * b).sum()
}

/// Weights of [`angular_quadrature`] for `n` samples.
pub fn angular_weights(n: usize, omega: f64) -> Vec<f64> {
    assert!(n >= 2, "need at least two angular samples");
    let m = n - 1;
    let h = omega / m as f64;
    let mut w = vec![0.0; n];
    if m == 1 {
        w[0] = 0.5 * h;
        w[1] = 0.5 * h;
        return w;
    }
    let simpson_end = if m % 2 == 0 { m } else { m - 3 };
    let mut k = 0;
    while k + 2 <= simpson_end {
        w[k] += h / 3.0;
        w[k + 1] += 4.0 * h / 3.0;
        w[k + 2] += h / 3.0;
        k += 2;
    }
    if simpson_end < m {
        let c = 3.0 * h / 8.0;
        w[m - 3] += c;
        w[m - 2] += 3.0 * c;
        w[m - 1] += 3.0 * c;
        w[m] += c;
    }
    w
}

/// Gregory weights (end corrections through fifth differences) for
/// `int g dt` on `n` uniform nodes of spacing `h`.
pub fn gregory_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    if n < 12 {
        // plain trapezoid for short sequences
        w[0] = 0.5 * h;
        w[n - 1] = 0.5 * h;
        return w;
    }
    let ends = [
        19087.0 / 60480.0,
        84199.0 / 60480.0,
        18869.0 / 30240.0,
        37621.0 / 30240.0,
        55031.0 / 60480.0,
        61343.0 / 60480.0,
    ];
    for (k, c) in ends.iter().enumerate() {
        w[k] = c * h;
        w[n - 1 - k] = c * h;
    }
    w
}

/// Mass below the grid floor, `int_0^{r_0} h r dr`, assuming `h ~ r^a`
/// locally with `a` read off the first two nodes.
pub(crate) fn corner_tail(h0: f64, h1: f64, r0: f64, dt: f64) -> f64 {
    if h0 == 0.0 {
        return 0.0;
    }
    let mut a = 0.0;
    if h1 != 0.0 && h0.signum() == h1.signum() {
        a = (h1 / h0).ln() / dt;
    }
    let a = a.clamp(-1.5, 50.0);
    h0 * r0 * r0 / (2.0 + a)
}

/// `int_0^R h(r) r dr` from samples on the log grid.
pub fn radial_quadrature(h: &[f64], grid: &Grid) -> f64 {
    assert_eq!(h.len(), grid.r.len(), "radial sample count mismatch");
    let w = gregory_weights(h.len(), grid.dt);
    let body: f64 = h.iter().zip(&w).zip(&grid.r).map(|((v, w), r)| v * w * r * r).sum();
    body + corner_tail(h[0], h[1], grid.r[0], grid.dt)
}

/// `int_C u dx` over the truncated sector.
pub fn area_integral(u: &ScalarField) -> f64 {
    let g = &u.grid;
    let wa = angular_weights(g.phi.len(), g.omega);
    let radial: Vec<f64> = (0..g.r.len())
        .map(|i| u.values.row(i).iter().zip(&wa).map(|(a, b)| a * b).sum())
        .collect();
    radial_quadrature(&radial, g)
}

/// Second-order polar finite-difference Laplacian at the interior nodes.
/// Boundary rows and columns are left at zero.
pub fn discrete_laplacian(u: &ScalarField) -> ScalarField {
    let g = &u.grid;
    let (nr, np) = g.shape();
    let mut out = Array2::zeros((nr, np));
    let dp2 = g.dphi * g.dphi;
    for i in 1..nr - 1 {
        let (rm, r0, rp) = (g.r[i - 1], g.r[i], g.r[i + 1]);
        let h1 = r0 - rm;
        let h2 = rp - r0;
        let den = h1 * h2 * (h1 + h2);
        for j in 1..np - 1 {
            let (um, u0, up) = (u.values[[i - 1, j]], u.values[[i, j]], u.values[[i + 1, j]]);
            let urr = 2.0 * (h1 * up - (h1 + h2) * u0 + h2 * um) / den;
            let ur = (h1 * h1 * up + (h2 * h2 - h1 * h1) * u0 - h2 * h2 * um) / den;
            let upp = (u.values[[i, j + 1]] - 2.0 * u0 + u.values[[i, j - 1]]) / dp2;
            out[[i, j]] = urr + ur / r0 + upp / (r0 * r0);
        }
    }
    ScalarField { values: out, grid: g.clone() }
}

/// `Delta_h u + f` at interior nodes (zero on the boundary).
pub fn laplacian_residual_field(u: &ScalarField, f: &ScalarField) -> Result<ScalarField> {
    check_same(&u.grid, &f.grid)?;
    let mut lap = discrete_laplacian(u);
    let (nr, np) = lap.grid.shape();
    for i in 1..nr - 1 {
        for j in 1..np - 1 {
            lap.values[[i, j]] += f.values[[i, j]];
        }
    }
    Ok(lap)
}

/// `max |Delta_h u + f|` over interior nodes.
pub fn laplacian_residual(u: &ScalarField, f: &ScalarField) -> Result<f64> {
    laplacian_residual_annulus(u, f, 0.0, f64::INFINITY)
}

/// As [`laplacian_residual`] but restricted to interior nodes with `r_lo <= r <= r_hi`.
pub fn laplacian_residual_annulus(u: &ScalarField, f: &ScalarField, r_lo: f64, r_hi: f64) -> Result<f64> {
    let res = laplacian_residual_field(u, f)?;
    let g = &res.grid;
    let mut m: f64 = 0.0;
    for i in 1..g.r.len() - 1 {
        if g.r[i] < r_lo || g.r[i] > r_hi {
            continue;
        }
        for j in 1..g.phi.len() - 1 {
            m = m.max(res.values[[i, j]].abs());
        }
    }
    Ok(m)
}
