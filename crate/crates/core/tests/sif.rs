use std::f64::consts::PI;

use cornerlab::modal::{solve_poisson_with, SolverOptions};
use cornerlab::poly_lift::{assemble_p, kernel_element, Lift, Taylor};
use cornerlab::sector::{build_spectrum, rel_l2, Bc, Cutoff, Grid, ScalarField, SectorGeometry};
use cornerlab::sif::{
    decompose, decompose_with, stress_intensity_direct, stress_intensity_dual, DecomposeOptions, SifKernel,
};
use cornerlab::verify::{bump, manufactured_singular};
use cornerlab::CornerError;

fn geom(p: i64, q: i64, bc: Bc) -> SectorGeometry {
    SectorGeometry::pi_frac(p, q, 1.0, bc).unwrap()
}

#[test]
fn dual_vanishes_without_singular_content() {
    // u = g(r) (e_1 + e_2 / 2) with g = ((r-a)(b-r))^4 on (a, b): f = -Delta u in closed form
    let (a, b) = (0.3, 0.7);
    for bc in [Bc::Dirichlet, Bc::Neumann, Bc::Mixed] {
        let g = geom(3, 2, bc);
        let grid = Grid::for_sector(&g, 800, 128).unwrap();
        let spec = build_spectrum(&g, 4);
        let p1 = spec.first_positive();
        let radial = |r: f64| -> (f64, f64, f64) {
            if r <= a || r >= b {
                return (0.0, 0.0, 0.0);
            }
            let q = (r - a) * (b - r);
            let dq = a + b - 2.0 * r;
            (q.powi(4), 4.0 * q.powi(3) * dq, 12.0 * q * q * dq * dq - 8.0 * q.powi(3))
        };
        let u = ScalarField::from_fn(&grid, |r, p| radial(r).0 * (spec.eval(p1, p) + 0.5 * spec.eval(p1 + 1, p)));
        let f = ScalarField::from_fn(&grid, |r, p| {
            let (v, d1, d2) = radial(r);
            [(p1, 1.0), (p1 + 1, 0.5)]
                .iter()
                .map(|&(n, c)| {
                    let l = spec.lambda(n);
                    -c * (d2 + d1 / r - l * l * v / (r * r)) * spec.eval(n, p)
                })
                .sum()
        });
        let eta = Cutoff::smooth(0.1, 0.25).unwrap();
        let c = stress_intensity_dual(&u, &f, 1, &g, &eta).unwrap();
        assert!(c.abs() < 1e-6, "{bc:?}: {c}");
    }
}

#[test]
fn dual_refuses_bad_cutoffs() {
    let g = geom(3, 2, Bc::Dirichlet);
    let grid = Grid::for_sector(&g, 100, 32).unwrap();
    let z = ScalarField::zeros(&grid);
    let outer = Cutoff::smooth(0.5, 1.0).unwrap();
    assert!(matches!(stress_intensity_dual(&z, &z, 1, &g, &outer), Err(CornerError::Cutoff(_))));
}

#[test]
fn manufactured_singular_plus_smooth() {
    // u = chi (s_1 + q), q = xy e^{-r^2} / 2 vanishes on both legs of the 3pi/2 sector
    let g = geom(3, 2, Bc::Dirichlet);
    let grid = Grid::for_sector(&g, 1200, 256).unwrap();
    let chi = Cutoff::smooth(0.2, 0.8).unwrap();
    let lam = 2.0 / 3.0;
    let q = |r: f64, p: f64| 0.25 * r * r * (2.0 * p).sin() * (-r * r).exp();
    let f = ScalarField::from_fn(&grid, |r, p| {
        let (c0, c1, c2) = chi.eval3(r);
        let e = (-r * r).exp();
        let s = r.powf(lam) * (lam * p).sin();
        let s_r = lam * r.powf(lam - 1.0) * (lam * p).sin();
        let q_r = 0.5 * (r - r.powi(3)) * e * (2.0 * p).sin();
        let lap_q = (r.powi(4) - 3.0 * r * r) * e * (2.0 * p).sin();
        -(c0 * lap_q + 2.0 * c1 * (s_r + q_r) + (c2 + c1 / r) * (s + q(r, p)))
    });
    let cut = Cutoff::smooth(0.05, 0.1).unwrap();
    let opts = DecomposeOptions { solver: SolverOptions { n_modes: 64, ..Default::default() }, ..Default::default() };
    let d = decompose_with(&f, &g, 0, &cut, &opts).unwrap();
    assert_eq!(d.singular.len(), 1);
    assert!((d.singular[0].coefficient - 1.0).abs() < 1e-4, "S_1 = {}", d.singular[0].coefficient);
    // the remainder is chi q plus the cutoff mismatch (chi - cut) s_1
    let want = ScalarField::from_fn(&grid, |r, p| chi.value(r) * q(r, p) + (chi.value(r) - cut.value(r)) * r.powf(lam) * (lam * p).sin());
    assert!(rel_l2(&d.regular, &want).unwrap() < 1e-4);
}

#[test]
fn manufactured_pure_singular_through_every_formula() {
    let g = geom(3, 2, Bc::Dirichlet);
    let grid = Grid::for_sector(&g, 800, 128).unwrap();
    let chi = Cutoff::smooth(0.2, 0.8).unwrap();
    let (ue, fe) = manufactured_singular(&g, &chi);
    let f = ScalarField::from_fn(&grid, &fe);
    let u = ScalarField::from_fn(&grid, &ue);
    let z = Lift::zero(&g);
    let cut = Cutoff::smooth(0.05, 0.1).unwrap();
    for k in [SifKernel::Cone, SifKernel::Truncated] {
        let s = stress_intensity_direct(&f, &z, 1, &g, &cut, k).unwrap();
        assert!((s - 1.0).abs() < 1e-4, "{k:?}: {s}");
    }
    for eta in [Cutoff::smooth(0.05, 0.15).unwrap(), Cutoff::smooth(0.1, 0.3).unwrap()] {
        let s = stress_intensity_dual(&u, &f, 1, &g, &eta).unwrap();
        assert!((s - 1.0).abs() < 1e-4, "dual: {s}");
    }
}

#[test]
fn coefficient_does_not_see_the_lift_kernel() {
    // at 2pi/3 Dirichlet, Im z^3 satisfies both legs and can be added to the k = 1 lift
    let g = geom(2, 3, Bc::Dirichlet);
    let grid = Grid::for_sector(&g, 800, 128).unwrap();
    let f = ScalarField::from_fn(&grid, |r, p| (-r * r / 0.1).exp() * (1.0 + r * p.cos()));
    let mut t = Taylor::new();
    t.insert((0, 0), 1.0);
    let lift = assemble_p(&t, 1, &g).unwrap();
    let mut other = lift.clone();
    other.poly.add_scaled(&kernel_element(&g, 3).unwrap(), 0.7);
    let chi = Cutoff::smooth(0.1, 0.3).unwrap();
    for k in [SifKernel::Cone, SifKernel::Truncated] {
        let a = stress_intensity_direct(&f, &lift, 1, &g, &chi, k).unwrap();
        let b = stress_intensity_direct(&f, &other, 1, &g, &chi, k).unwrap();
        assert!((a - b).abs() < 1e-6 * a.abs(), "{k:?}: {a} vs {b}");
    }
}

#[test]
fn mixed_seven_quarters_has_two_terms() {
    let g = geom(7, 4, Bc::Mixed);
    let grid = Grid::for_sector(&g, 800, 128).unwrap();
    let f = ScalarField::from_fn(&grid, |r, p| bump(r, 0.2, 0.7) * (1.0 + 0.3 * p));
    let chi = Cutoff::smooth(0.05, 0.1).unwrap();
    let d = decompose(&f, &g, 0, &chi).unwrap();
    assert_eq!(d.singular.len(), 2);
    assert!((d.singular[0].lambda - 2.0 / 7.0).abs() < 1e-12);
    assert!((d.singular[1].lambda - 6.0 / 7.0).abs() < 1e-12);
    assert!(rel_l2(&d.reconstruct(), &d.solution).unwrap() < 1e-10);
}

#[test]
fn acute_dirichlet_has_no_singular_terms() {
    let g = geom(1, 2, Bc::Dirichlet);
    let grid = Grid::for_sector(&g, 400, 64).unwrap();
    let f = ScalarField::from_fn(&grid, |r, _| bump(r, 0.2, 0.7));
    let chi = Cutoff::smooth(0.05, 0.1).unwrap();
    let d = decompose(&f, &g, 0, &chi).unwrap();
    assert!(d.singular.is_empty());
    let u = solve_poisson_with(&f, &g, &SolverOptions::default()).unwrap().u;
    assert!(rel_l2(&d.regular, &u).unwrap() < 1e-12);
}

#[test]
fn windows_outside_the_table_are_refused() {
    let g = geom(7, 4, Bc::Mixed);
    let grid = Grid::for_sector(&g, 100, 32).unwrap();
    let f = ScalarField::zeros(&grid);
    let chi = Cutoff::smooth(0.05, 0.1).unwrap();
    // k = 2 would need the third mixed exponent and beyond
    assert!(decompose(&f, &g, 2, &chi).is_err());
    // eps placing k + 1 + eps on an eigenvalue trips the margin guard
    let d = SectorGeometry::new(PI / 1.02, 1.0, Bc::Dirichlet).unwrap();
    let grid = Grid::for_sector(&d, 100, 32).unwrap();
    let err = decompose_with(&ScalarField::zeros(&grid), &d, 0, &chi, &DecomposeOptions { eps: 0.01, ..Default::default() });
    assert!(matches!(err, Err(CornerError::ResonanceMargin { .. })), "{err:?}");
}
