//! Mellin transform along lines `Im zeta = -eta`.
//!
//! With `r = e^t`, `M[u](xi - i eta) = (1/sqrt(2 pi)) int e^{-i xi t} e^{-eta t} u dt`,
//! a Fourier transform of the reweighted profile. Line transforms use the
//! DFT on a zero-padded copy of the log grid (odd length, so the frequency
//! grid is symmetric); point values at arbitrary `zeta` use product
//! integration against a local degree-5 interpolant.
//!
//! The corner operator acts on mode `n` as `zeta^2 + lambda_n^2`. Solving on
//! two lines that straddle `-i lambda` and subtracting leaves exactly the
//! residue, `c r^lambda e_n(phi)`, which is then fitted.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{CornerError, Result};
use crate::modal::{project, ModalField};
use crate::product::cell_integrals;
use crate::sector::{build_spectrum, Bc, EigenSpectrum, Grid, Kind, ScalarField, SectorGeometry};
use crate::sif::SingularTerm;

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

/// Samples of a Mellin transform on one line, one channel per angular mode
/// (or a single radial channel).
#[derive(Debug, Clone)]
pub struct MellinLine {
    pub eta: f64,
    /// Symmetric, ascending; spacing `2 pi / (len * dt)`.
    pub xi: Vec<f64>,
    /// `samples[c][k]` for channel `c` at `xi[k]`.
    pub samples: Vec<Vec<Complex64>>,
    /// Eigenvalue of each channel, when the channels are modes.
    pub lambdas: Option<Vec<f64>>,
    /// `int_0^omega e_c^2` per channel (1 for a bare radial channel).
    pub channel_norms: Vec<f64>,
    /// `t` of padded index 0.
    pub t_start: f64,
    pub dt: f64,
    /// Padded index of the first data node and number of data nodes.
    pub data_offset: usize,
    pub n_data: usize,
}

impl MellinLine {
    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    pub fn dxi(&self) -> f64 {
        2.0 * PI / (self.len() as f64 * self.dt)
    }

    /// `int sum_c norm_c sum_{j<=k} |xi|^{2(k-j)} lambda_c^{2j} |U_c|^2 dxi`:
    /// the squared `H^k(G; |xi|)` line norm for modal channels.
    pub fn norm_sq(&self, k: u32) -> f64 {
        let dxi = self.dxi();
        let mut s = 0.0;
        for (c, row) in self.samples.iter().enumerate() {
            let lam = self.lambdas.as_ref().map_or(0.0, |l| l[c]);
            for (x, u) in self.xi.iter().zip(row) {
                let w: f64 = (0..=k).map(|j| x.abs().powi(2 * (k - j) as i32) * lam.powi(2 * j as i32)).sum();
                s += self.channel_norms[c] * w * u.norm_sqr();
            }
        }
        s * dxi
    }
}

fn planner_pair(m: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    let mut p = FftPlanner::new();
    (p.plan_fft_forward(m), p.plan_fft_inverse(m))
}

/// Odd padded length holding `n` data nodes plus `pad` on each side.
fn padded_len(n: usize, pad: usize) -> usize {
    let m = n + 2 * pad;
    m | 1
}

fn freq(k: usize, m: usize) -> i64 {
    if k <= (m - 1) / 2 {
        k as i64
    } else {
        k as i64 - m as i64
    }
}

/// Options for line transforms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineOptions {
    /// Zero padding on each side, in units of `t`.
    pub pad_t: f64,
    /// Largest tolerated `|e^{-eta t_0} g(t_0)| / max |e^{-eta t} g|` at the corner end.
    pub tail_tol: f64,
}

impl Default for LineOptions {
    fn default() -> Self {
        LineOptions { pad_t: 8.0, tail_tol: 1e-4 }
    }
}

fn check_tail(h: &[f64], tol: f64) -> Result<()> {
    let m = h.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if m == 0.0 {
        return Ok(());
    }
    let ratio = h[0].abs() / m;
    if ratio > tol {
        return Err(CornerError::TailEnergy { ratio, tol, what: "profile not decayed at the corner end of the line".into() });
    }
    Ok(())
}

/// Line transform of radial channels sampled on `grid`.
fn forward_channels(
    channels: &[Vec<f64>],
    grid: &Grid,
    eta: f64,
    opts: &LineOptions,
) -> Result<MellinLine> {
    let n = grid.t.len();
    let dt = grid.dt;
    let pad = (opts.pad_t / dt).ceil() as usize;
    let m = padded_len(n, pad);
    let t_start = grid.t[0] - pad as f64 * dt;
    let (fwd, _) = planner_pair(m);
    let xi: Vec<f64> = {
        let mut v: Vec<f64> = (0..m).map(|k| 2.0 * PI * freq(k, m) as f64 / (m as f64 * dt)).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    };
    let samples: Result<Vec<Vec<Complex64>>> = channels
        .iter()
        .map(|g| {
            let h: Vec<f64> = g.iter().zip(&grid.t).map(|(v, t)| (-eta * t).exp() * v).collect();
            check_tail(&h, opts.tail_tol)?;
            let mut buf = vec![Complex64::new(0.0, 0.0); m];
            for (i, v) in h.iter().enumerate() {
                buf[pad + i] = Complex64::new(*v, 0.0);
            }
            fwd.process(&mut buf);
            let mut out = vec![Complex64::new(0.0, 0.0); m];
            for (k, v) in buf.iter().enumerate() {
                let f = freq(k, m);
                let x = 2.0 * PI * f as f64 / (m as f64 * dt);
                let idx = (f + (m as i64 - 1) / 2) as usize;
                out[idx] = v * Complex64::from_polar(dt / SQRT_2PI, -x * t_start);
            }
            Ok(out)
        })
        .collect();
    Ok(MellinLine {
        eta,
        xi,
        samples: samples?,
        lambdas: None,
        channel_norms: vec![1.0; channels.len()],
        t_start,
        dt,
        data_offset: pad,
        n_data: n,
    })
}

/// Mellin transform of one radial profile on the line `Im zeta = -eta`.
pub fn mellin_forward_radial(u: &[f64], grid: &Grid, eta: f64, opts: &LineOptions) -> Result<MellinLine> {
    if u.len() != grid.t.len() {
        return Err(CornerError::GridMismatch("radial samples vs grid".into()));
    }
    forward_channels(&[u.to_vec()], grid, eta, opts)
}

/// Mellin transform of every mode of a modal field.
pub fn mellin_forward(u: &ModalField, eta: f64, opts: &LineOptions) -> Result<MellinLine> {
    let ch: Vec<Vec<f64>> = (0..u.n_modes()).map(|n| u.mode(n)).collect();
    let mut line = forward_channels(&ch, &u.grid, eta, opts)?;
    line.lambdas = Some(u.spectrum.lambdas.clone());
    line.channel_norms = (0..u.n_modes()).map(|n| u.spectrum.norm_sq(n)).collect();
    Ok(line)
}

/// Inverse transform on the padded grid; returns `(t, u)` per channel.
pub fn mellin_inverse_full(line: &MellinLine) -> (Vec<f64>, Vec<Vec<f64>>) {
    let m = line.len();
    let (_, inv) = planner_pair(m);
    let t: Vec<f64> = (0..m).map(|i| line.t_start + i as f64 * line.dt).collect();
    let scale = line.dxi() / SQRT_2PI;
    let out = line
        .samples
        .iter()
        .map(|row| {
            let mut buf = vec![Complex64::new(0.0, 0.0); m];
            for (idx, (x, v)) in line.xi.iter().zip(row).enumerate() {
                let f = idx as i64 - (m as i64 - 1) / 2;
                let k = if f >= 0 { f as usize } else { (f + m as i64) as usize };
                buf[k] = v * Complex64::from_polar(scale, x * line.t_start);
            }
            inv.process(&mut buf);
            buf.iter().zip(&t).map(|(v, ti)| v.re * (line.eta * ti).exp()).collect()
        })
        .collect();
    (t, out)
}

/// Inverse transform restricted to the original grid nodes.
pub fn mellin_inverse(line: &MellinLine) -> Vec<Vec<f64>> {
    let (_, full) = mellin_inverse_full(line);
    full.into_iter().map(|v| v[line.data_offset..line.data_offset + line.n_data].to_vec()).collect()
}

/// Default minimal distance between a line and the poles.
pub const DELTA_MIN: f64 = 1e-3;

/// Distance from `eta` to the nearest pole `+-lambda_n`.
pub fn pole_distance(eta: f64, lambdas: &[f64]) -> (f64, f64) {
    let mut best = (f64::INFINITY, 0.0);
    for &l in lambdas {
        for p in [l, -l] {
            let d = (eta - p).abs();
            if d < best.0 {
                best = (d, l);
            }
        }
    }
    best
}

/// `U_n(zeta) = G_n(zeta) / (zeta^2 + lambda_n^2)` on the line.
pub fn operator_solve_line(g: &MellinLine, spec: &EigenSpectrum) -> Result<MellinLine> {
    operator_solve_line_guarded(g, spec, DELTA_MIN)
}

pub fn operator_solve_line_guarded(g: &MellinLine, spec: &EigenSpectrum, delta_min: f64) -> Result<MellinLine> {
    let nch = g.samples.len();
    if spec.len() < nch {
        return Err(CornerError::Invalid("spectrum shorter than the line's channel count".into()));
    }
    let lambdas = &spec.lambdas[..nch];
    let (d, l) = pole_distance(g.eta, lambdas);
    if d < delta_min {
        return Err(CornerError::SpectralCollision { eta: g.eta, lambda: l, dist: d });
    }
    let mut out = g.clone();
    for (c, row) in out.samples.iter_mut().enumerate() {
        let l2 = lambdas[c] * lambdas[c];
        for (x, v) in g.xi.iter().zip(row.iter_mut()) {
            let z = Complex64::new(*x, -g.eta);
            *v /= z * z + l2;
        }
    }
    out.lambdas = Some(lambdas.to_vec());
    out.channel_norms = (0..nch).map(|n| spec.norm_sq(n)).collect();
    Ok(out)
}

/// `M[u](zeta)` for one radial profile by product integration, with the
/// profile taken as zero above the grid and as a pure power below it.
pub fn mellin_eval(u: &[f64], grid: &Grid, zeta: Complex64) -> Complex64 {
    let c = Complex64::i() * zeta;
    let gc: Vec<Complex64> = u.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    let cells = cell_integrals(&gc, c, grid.dt, false);
    let mut s: Complex64 = cells.iter().zip(&grid.t).map(|(v, t)| v * (-c * t).exp()).sum();
    // power-law continuation below the first node
    if u[0] != 0.0 && u[1] != 0.0 && u[0].signum() == u[1].signum() {
        let beta = (u[1] / u[0]).ln() / grid.dt;
        let den = beta - c;
        if den.re > 0.0 {
            s += u[0] * (-c * grid.t[0]).exp() / den;
        }
    }
    s / SQRT_2PI
}

/// Line padding long enough for the slowest-decaying channel at distance `d`
/// from its pole to fall below roundoff.
pub fn default_pad(eta: f64, lambdas: &[f64]) -> f64 {
    let (d, _) = pole_distance(eta, lambdas);
    (36.0 / d.max(1e-3)).clamp(8.0, 4000.0)
}

/// Solve `-Delta u = f` on the infinite cone, mode by mode, on one line.
/// Returns `u_n(t)` on the grid's nodes.
pub fn solve_on_line(fm: &ModalField, eta: f64, tail_tol: f64) -> Result<Vec<Vec<f64>>> {
    let g = &fm.grid;
    let lambdas = &fm.spectrum.lambdas;
    let opts = LineOptions { pad_t: default_pad(eta, lambdas), tail_tol };
    let gm = ModalField {
        coeffs: ndarray::Array2::from_shape_fn(fm.coeffs.dim(), |(n, i)| fm.coeffs[[n, i]] * g.r[i] * g.r[i]),
        ..fm.clone()
    };
    let line = mellin_forward(&gm, eta, &opts)?;
    let sol = operator_solve_line(&line, &fm.spectrum)?;
    Ok(mellin_inverse(&sol))
}

/// Options for [`two_line_residue`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidueOptions {
    pub n_modes: usize,
    pub fit_tol: f64,
    pub tail_tol: f64,
}

impl Default for ResidueOptions {
    fn default() -> Self {
        ResidueOptions { n_modes: 16, fit_tol: 1e-6, tail_tol: 1e-4 }
    }
}

/// Least-squares fit of `d` on the given basis columns; returns coefficients
/// and the max residual relative to max |fit|.
fn ls_fit(d: &[f64], basis: &[Vec<f64>]) -> (Vec<f64>, f64) {
    let n = d.len();
    let k = basis.len();
    let a = nalgebra::DMatrix::from_fn(n, k, |i, j| basis[j][i]);
    let b = nalgebra::DVector::from_column_slice(d);
    let svd = a.svd(true, true);
    let x = svd.solve(&b, 1e-14).expect("svd solve");
    let fit = (0..n).map(|i| (0..k).map(|j| x[j] * basis[j][i]).sum::<f64>());
    let mut res: f64 = 0.0;
    let mut size: f64 = 0.0;
    for (i, v) in fit.enumerate() {
        res = res.max((d[i] - v).abs());
        size = size.max(v.abs());
    }
    let rel = if size > 0.0 { res / size } else { res };
    (x.iter().copied().collect(), rel)
}

/// Singular coefficients from the difference of the solutions on two lines.
///
/// Every eigenvalue strictly between `eta_1` and `eta_2` contributes one term
/// `c r^lambda e(phi)`; for Neumann data a line pair enclosing 0 also yields
/// `a ln r + b`.
pub fn two_line_residue(
    f: &ScalarField,
    geom: &SectorGeometry,
    eta_1: f64,
    eta_2: f64,
    opts: &ResidueOptions,
) -> Result<Vec<SingularTerm>> {
    let (lo, hi) = if eta_1 < eta_2 { (eta_1, eta_2) } else { (eta_2, eta_1) };
    let spec = build_spectrum(geom, opts.n_modes);
    for eta in [lo, hi] {
        let (d, l) = pole_distance(eta, &spec.lambdas);
        if d < DELTA_MIN {
            return Err(CornerError::SpectralCollision { eta, lambda: l, dist: d });
        }
    }
    let enclosed: Vec<usize> = (0..spec.len()).filter(|&n| spec.lambdas[n] > lo && spec.lambdas[n] < hi).collect();
    if enclosed.is_empty() {
        return Ok(vec![]);
    }
    let fm = project(f, &spec, opts.n_modes)?;
    // only the enclosed modes need the two-line solve
    let sub = enclosed.iter().map(|&n| fm.coeffs.row(n).to_vec()).collect::<Vec<_>>();
    let sub_spec = EigenSpectrum {
        lambdas: enclosed.iter().map(|&n| spec.lambdas[n]).collect(),
        kinds: enclosed.iter().map(|&n| spec.kinds[n]).collect(),
        ..spec.clone()
    };
    let sub_field = ModalField {
        spectrum: sub_spec.clone(),
        grid: f.grid.clone(),
        coeffs: ndarray::Array2::from_shape_fn((sub.len(), f.grid.r.len()), |(n, i)| sub[n][i]),
    };
    let (ua, ub) = rayon::join(
        || solve_on_line(&sub_field, lo, opts.tail_tol),
        || solve_on_line(&sub_field, hi, opts.tail_tol),
    );
    let (ua, ub) = (ua?, ub?);
    let t = &f.grid.t;
    let terms: Result<Vec<Vec<SingularTerm>>> = (0..enclosed.len())
        .into_par_iter()
        .map(|c| {
            let d: Vec<f64> = ua[c].iter().zip(&ub[c]).map(|(a, b)| a - b).collect();
            let lam = sub_spec.lambdas[c];
            let kind = sub_spec.kinds[c];
            if lam == 0.0 {
                let basis = vec![t.clone(), vec![1.0; t.len()]];
                let (x, rel) = ls_fit(&d, &basis);
                if rel > opts.fit_tol {
                    return Err(CornerError::FitResidual { residual: rel, tol: opts.fit_tol });
                }
                Ok(vec![
                    SingularTerm { lambda: 0.0, kind: Kind::Cosine, log_power: 1, phi_factor: false, coefficient: x[0] },
                    SingularTerm { lambda: 0.0, kind: Kind::Cosine, log_power: 0, phi_factor: false, coefficient: x[1] },
                ])
            } else {
                let basis = vec![t.iter().map(|ti| (lam * ti).exp()).collect::<Vec<f64>>()];
                let (x, rel) = ls_fit(&d, &basis);
                if rel > opts.fit_tol && x[0].abs() > 1e-300 {
                    return Err(CornerError::FitResidual { residual: rel, tol: opts.fit_tol });
                }
                Ok(vec![SingularTerm { lambda: lam, kind, log_power: 0, phi_factor: false, coefficient: x[0] }])
            }
        })
        .collect();
    let mut out: Vec<SingularTerm> = terms?.into_iter().flatten().collect();
    out.sort_by(|a, b| a.lambda.partial_cmp(&b.lambda).unwrap().then(b.log_power.cmp(&a.log_power)));
    Ok(out)
}

/// A reasonable line pair for extracting the first `count` terms: the lower
/// line at 0 (or just below 0 for Neumann), the upper one midway between
/// eigenvalue `count` and `count + 1`.
pub fn default_lines(geom: &SectorGeometry, count: usize) -> (f64, f64) {
    let spec = build_spectrum(geom, count + 3);
    let p = spec.first_positive();
    let l1 = spec.lambdas[p];
    let lo = if geom.bc == Bc::Neumann { -0.4 * l1 } else { 0.0 };
    let last = p + count - 1;
    let hi = 0.5 * (spec.lambdas[last] + spec.lambdas[last + 1]);
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xi_grid_symmetric_and_dual_spacing() {
        let grid = Grid::new(1.0, 1.0, 100, 4, 1e-3).unwrap();
        let u: Vec<f64> = grid.r.iter().map(|r| r * r * (1.0 - r)).collect();
        let line = mellin_forward_radial(&u, &grid, 0.0, &LineOptions::default()).unwrap();
        let n = line.len();
        assert!(n % 2 == 1);
        for k in 0..n {
            assert!((line.xi[k] + line.xi[n - 1 - k]).abs() < 1e-12);
        }
        assert!((line.xi[1] - line.xi[0] - 2.0 * PI / (n as f64 * grid.dt)).abs() < 1e-12);
    }

    #[test]
    fn zero_in_zero_out() {
        let grid = Grid::new(1.0, 1.0, 100, 4, 1e-3).unwrap();
        let line = mellin_forward_radial(&vec![0.0; 101], &grid, 0.3, &LineOptions::default()).unwrap();
        assert!(line.samples[0].iter().all(|v| v.norm() == 0.0));
        assert_eq!(mellin_eval(&vec![0.0; 101], &grid, Complex64::new(1.0, -0.2)), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn collision_guard() {
        let g = SectorGeometry::pi_frac(3, 2, 1.0, Bc::Dirichlet).unwrap();
        let spec = build_spectrum(&g, 4);
        let grid = Grid::for_sector(&g, 100, 8).unwrap();
        let mf = crate::modal::project(&ScalarField::zeros(&grid), &spec, 4).unwrap();
        let line = mellin_forward(&mf, 2.0 / 3.0, &LineOptions::default()).unwrap();
        assert!(matches!(operator_solve_line(&line, &spec), Err(CornerError::SpectralCollision { .. })));
    }
}
