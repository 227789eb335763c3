use std::f64::consts::PI;

use cornerlab::poly_lift::{
    assemble_p, build_pij, eval_cutoff_lift, eval_laplacian_of_cutoff_lift, kernel_element, Lift, Taylor,
};
use cornerlab::sector::{discrete_laplacian, Bc, Cutoff, Grid, SectorGeometry};
use proptest::prelude::*;

const OMEGAS: [(i64, i64); 5] = [(1, 4), (1, 2), (2, 3), (3, 2), (7, 4)];

#[test]
fn lattice_residuals() {
    for bc in [Bc::Dirichlet, Bc::Neumann, Bc::Mixed] {
        for (p, q) in OMEGAS {
            let g = SectorGeometry::pi_frac(p, q, 1.0, bc).unwrap();
            for d in 0..=3 {
                for i in 0..=d {
                    let l = build_pij(i, d - i, &g);
                    assert!(l.pde_residual(1.0) < 1e-8, "{bc:?} {p}/{q} ({i},{})", d - i);
                    assert!(l.boundary_residual(1.0) < 1e-9, "{bc:?} {p}/{q} ({i},{})", d - i);
                }
            }
        }
    }
}

#[test]
fn half_plane_is_polynomial() {
    for bc in [Bc::Dirichlet, Bc::Neumann, Bc::Mixed] {
        let g = SectorGeometry::pi_frac(1, 1, 1.0, bc).unwrap();
        for (i, j) in [(0, 0), (1, 0), (0, 1), (2, 1)] {
            let l = build_pij(i, j, &g);
            assert!(l.log_part.terms.is_empty(), "{bc:?} ({i},{j})");
            assert!(l.pde_residual(1.0) < 1e-8 && l.boundary_residual(1.0) < 1e-9);
        }
    }
}

#[test]
fn right_angle_dirichlet_needs_log_term() {
    let g = SectorGeometry::pi_frac(1, 2, 1.0, Bc::Dirichlet).unwrap();
    let l = build_pij(0, 0, &g);
    assert_eq!(l.resonance_set, vec![2]);
    assert_eq!(l.log_part.terms.len(), 1);
    assert!(l.log_part.terms[0].coeff.abs() > 1e-3);
}

#[test]
fn assemble_examples() {
    let g = SectorGeometry::pi_frac(1, 4, 1.0, Bc::Dirichlet).unwrap();
    let mut t = Taylor::new();
    t.insert((0, 0), 1.0);
    assert!(assemble_p(&t, 0, &g).unwrap().is_zero());
    let p = assemble_p(&t, 1, &g).unwrap();
    // (xy - y^2) / 2
    for &(x, y) in &[(0.3, 0.1), (0.7, 0.2), (0.5, 0.5)] {
        assert!((p.eval(f64::hypot(x, y), f64::atan2(y, x)) - (x * y - y * y) / 2.0).abs() < 1e-12);
    }
    // gradient zero: k = 2 keeps only the constant part
    let mut t2 = Taylor::new();
    t2.insert((0, 0), 2.5);
    t2.insert((1, 0), 0.0);
    t2.insert((0, 1), 0.0);
    let p2 = assemble_p(&t2, 2, &g).unwrap();
    let p00 = build_pij(0, 0, &g);
    for &(r, phi) in &[(0.2, 0.1), (0.9, 0.7)] {
        assert!((p2.eval(r, phi) - 2.5 * p00.eval(r, phi)).abs() < 1e-13);
    }
    assert!(assemble_p(&Taylor::new(), 1, &g).is_err());
}

#[test]
fn kernel_elements_are_harmonic_and_satisfy_both_legs() {
    // Im z^3 vanishes on both legs of the 2pi/3 sector
    let g = SectorGeometry::pi_frac(2, 3, 1.0, Bc::Dirichlet).unwrap();
    let k = kernel_element(&g, 3).expect("resonant degree");
    assert!(k.laplacian().max_abs_coeff() < 1e-12);
    for r in [0.3, 0.8] {
        let (s, c) = (2.0 * PI / 3.0).sin_cos();
        assert!(k.eval(r, 0.0).abs() < 1e-14);
        assert!(k.eval(r * c, r * s).abs() < 1e-12);
    }
    assert!(kernel_element(&g, 2).is_none());
}

#[test]
fn zero_lift_evaluates_to_zero() {
    let g = SectorGeometry::pi_frac(3, 2, 1.0, Bc::Mixed).unwrap();
    let grid = Grid::for_sector(&g, 64, 16).unwrap();
    let chi = Cutoff::smooth(0.2, 0.5).unwrap();
    let z = Lift::zero(&g);
    assert_eq!(eval_cutoff_lift(&z, &chi, &grid).max_abs(), 0.0);
    assert_eq!(eval_laplacian_of_cutoff_lift(&z, &chi, &grid).max_abs(), 0.0);
}

/// `max |Delta_h(chi P) - Delta(chi P)|` over an annulus inside the cutoff band.
fn fd_gap(lift: &Lift, chi: &Cutoff, g: &SectorGeometry, n_r: usize, n_phi: usize) -> f64 {
    let grid = Grid::new(1.0, g.omega, n_r, n_phi, 1e-2).unwrap();
    let fd = discrete_laplacian(&eval_cutoff_lift(lift, chi, &grid));
    let exact = eval_laplacian_of_cutoff_lift(lift, chi, &grid);
    let mut m: f64 = 0.0;
    for i in 1..grid.r.len() - 1 {
        if grid.r[i] < 0.1 || grid.r[i] > 0.9 {
            continue;
        }
        for j in 1..grid.phi.len() - 1 {
            m = m.max((fd.values[[i, j]] - exact.values[[i, j]]).abs());
        }
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn cutoff_lift_laplacian_matches_differences(
        c in prop::collection::vec(-2.0f64..2.0, 6),
        w in 0usize..5,
        bc in prop_oneof![Just(Bc::Dirichlet), Just(Bc::Neumann), Just(Bc::Mixed)],
    ) {
        let (p, q) = OMEGAS[w];
        let g = SectorGeometry::pi_frac(p, q, 1.0, bc).unwrap();
        let mut t = Taylor::new();
        let idx = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)];
        for (k, ij) in idx.iter().enumerate() {
            t.insert(*ij, c[k]);
        }
        let lift = assemble_p(&t, 3, &g).unwrap();
        // C-infinity profile: the quintic's third-derivative jump costs O(h) at the band edge
        let chi = Cutoff::smooth(0.3, 0.7).unwrap();
        let a = fd_gap(&lift, &chi, &g, 200, 64);
        let b = fd_gap(&lift, &chi, &g, 400, 128);
        let scale = eval_laplacian_of_cutoff_lift(&lift, &chi, &Grid::new(1.0, g.omega, 200, 64, 1e-2).unwrap()).max_abs();
        prop_assume!(scale > 1e-6);
        // second order: halving h divides the gap by about four
        prop_assert!(b < 0.35 * a || b < 1e-9 * scale, "gaps {} {}", a, b);
    }
}
