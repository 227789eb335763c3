use std::f64::consts::PI;

use cornerlab::mellin::{
    default_lines, mellin_eval, mellin_forward, mellin_forward_radial, mellin_inverse, operator_solve_line,
    two_line_residue, LineOptions, ResidueOptions,
};
use cornerlab::modal::project;
use cornerlab::poly_lift::Lift;
use cornerlab::sector::{build_spectrum, Bc, Cutoff, Grid, ScalarField, SectorGeometry};
use cornerlab::sif::{stress_intensity_direct, SifKernel};
use cornerlab::verify::bump;
use cornerlab::CornerError;
use num_complex::Complex64;

const SQRT_2PI: f64 = 2.5066282746310002;

fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

#[test]
fn power_pair_on_admissible_lines() {
    let grid = Grid::new(1.0, 1.0, 800, 4, 1e-6).unwrap();
    for j in [1.0f64, 2.5] {
        let u: Vec<f64> = grid.r.iter().map(|r| r.powf(j)).collect();
        for eta in [-0.5, 0.0, 0.5 * j] {
            for k in -8..=8 {
                let zeta = Complex64::new(2.5 * k as f64, -eta);
                let want = 1.0 / (SQRT_2PI * (Complex64::new(j, 0.0) - Complex64::i() * zeta));
                let got = mellin_eval(&u, &grid, zeta);
                assert!((got - want).norm() < 1e-4 * want.norm(), "j={j} zeta={zeta}");
            }
        }
    }
}

#[test]
fn round_trip_and_shifted_lines() {
    let grid = Grid::new(1.0, 1.0, 600, 4, 1e-6).unwrap();
    let u: Vec<f64> = grid.r.iter().map(|&r| bump(r, 0.01, 0.6)).collect();
    let opts = LineOptions::default();
    let mut back = vec![];
    for eta in [-1.0, 0.0, 1.5] {
        let line = mellin_forward_radial(&u, &grid, eta, &opts).unwrap();
        let v = mellin_inverse(&line).remove(0);
        assert!(rel_l2(&v, &u) < 1e-8, "eta={eta}");
        back.push(v);
    }
    // no poles for a compactly supported profile: every line gives the same function
    assert!(rel_l2(&back[0], &back[2]) < 1e-6);
}

#[test]
fn transform_is_holomorphic() {
    let grid = Grid::new(1.0, 1.0, 800, 4, 1e-6).unwrap();
    let u: Vec<f64> = grid.r.iter().map(|&r| bump(r, 0.05, 0.7) * (1.0 + r)).collect();
    let m = |z: Complex64| mellin_eval(&u, &grid, z);
    for (x, y) in [(0.0, 0.0), (1.5, -0.7), (-3.0, 1.2)] {
        let z = Complex64::new(x, y);
        let h = 1e-3;
        let dx = (m(z + h) - m(z - h)) / (2.0 * h);
        let dy = (m(z + Complex64::i() * h) - m(z - Complex64::i() * h)) / (2.0 * h);
        // Cauchy-Riemann: d/dx = -i d/dy
        let gap = (dx + Complex64::i() * dy).norm();
        assert!(gap < 1e-5 * dx.norm().max(1e-3), "gap {gap} at {z}");
    }
}

#[test]
fn operator_solve_at_zero_frequency_and_uniform_bound() {
    let g = SectorGeometry::pi_frac(3, 2, 1.0, Bc::Dirichlet).unwrap();
    let grid = Grid::for_sector(&g, 400, 64).unwrap();
    let spec = build_spectrum(&g, 6);
    let f = ScalarField::from_fn(&grid, |r, p| bump(r, 0.1, 0.7) * (spec.eval(0, p) + 0.3 * spec.eval(3, p)));
    let fm = project(&f, &spec, 6).unwrap();
    let l1 = spec.lambdas[0];

    let gl = mellin_forward(&fm, 0.0, &LineOptions::default()).unwrap();
    let ul = operator_solve_line(&gl, &spec).unwrap();
    let mid = gl.len() / 2;
    assert_eq!(gl.xi[mid], 0.0);
    let want = gl.samples[0][mid] / (l1 * l1);
    assert!((ul.samples[0][mid] - want).norm() < 1e-14 * want.norm());

    // H^2(G; |xi|) norm of U against the L^2 norm of G, pointwise in xi
    let eta = 0.5 * l1;
    let gl = mellin_forward(&fm, eta, &LineOptions::default()).unwrap();
    let ul = operator_solve_line(&gl, &spec).unwrap();
    let mut worst: f64 = 0.0;
    for k in 0..gl.len() {
        let x = gl.xi[k];
        let (mut num, mut den) = (0.0, 0.0);
        for c in 0..6 {
            let l = spec.lambdas[c];
            let w = x.powi(4) + x * x * l * l + l.powi(4);
            num += spec.norm_sq(c) * w * ul.samples[c][k].norm_sqr();
            den += spec.norm_sq(c) * gl.samples[c][k].norm_sqr();
        }
        if den > 1e-30 {
            worst = worst.max((num / den).sqrt());
        }
    }
    // |zeta^2 + lambda^2| >= (1 - (eta/lambda)^2) (|xi|^2 + lambda^2) bounds the ratio by 4/3
    assert!(worst <= 4.0 / 3.0 + 1e-9, "sup ratio {worst}");
}

#[test]
fn collision_is_refused() {
    let g = SectorGeometry::pi_frac(3, 2, 1.0, Bc::Dirichlet).unwrap();
    let grid = Grid::for_sector(&g, 200, 32).unwrap();
    let spec = build_spectrum(&g, 4);
    let f = ScalarField::from_fn(&grid, |r, p| bump(r, 0.1, 0.7) * spec.eval(0, p));
    let fm = project(&f, &spec, 4).unwrap();
    let line = mellin_forward(&fm, spec.lambdas[0], &LineOptions { pad_t: 8.0, tail_tol: 1.0 }).unwrap();
    let err = operator_solve_line(&line, &spec).unwrap_err();
    assert_eq!(err.guard_name(), Some("spectral-collision"));
    let err = two_line_residue(&f, &g, spec.lambdas[0], 2.0, &ResidueOptions::default()).unwrap_err();
    assert!(matches!(err, CornerError::SpectralCollision { .. }));
}

#[test]
fn residue_matches_direct_integral_and_respects_orthogonality() {
    let g = SectorGeometry::pi_frac(3, 2, 1.0, Bc::Dirichlet).unwrap();
    let grid = Grid::for_sector(&g, 800, 64).unwrap();
    let spec = build_spectrum(&g, 4);
    let (lo, hi) = default_lines(&g, 1);
    let chi = Cutoff::smooth(0.05, 0.1).unwrap();

    let f = ScalarField::from_fn(&grid, |r, p| bump(r, 0.2, 0.7) * spec.eval(0, p));
    let terms = two_line_residue(&f, &g, lo, hi, &ResidueOptions::default()).unwrap();
    assert_eq!(terms.len(), 1);
    let direct = stress_intensity_direct(&f, &Lift::zero(&g), 1, &g, &chi, SifKernel::Cone).unwrap();
    assert!((terms[0].coefficient - direct).abs() < 1e-4 * direct.abs());
    // the residue is the cone integral with magnitude 1/pi
    assert!((terms[0].lambda * g.omega - PI).abs() < 1e-12);

    let f2 = ScalarField::from_fn(&grid, |r, p| bump(r, 0.2, 0.7) * spec.eval(1, p));
    let t2 = two_line_residue(&f2, &g, lo, hi, &ResidueOptions::default()).unwrap();
    assert!(t2.iter().all(|t| t.coefficient.abs() < 1e-8));

    // a strip without poles returns nothing
    let none = two_line_residue(&f, &g, 0.1, 0.5, &ResidueOptions::default()).unwrap();
    assert!(none.iter().all(|t| t.coefficient.abs() < 1e-8));
}
