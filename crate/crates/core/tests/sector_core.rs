use std::f64::consts::PI;

use cornerlab::poly_lift::is_resonant;
use cornerlab::sector::{
    angular_quadrature, build_spectrum, laplacian_residual_annulus, Bc, Cutoff, Grid, Kind, ScalarField,
    SectorGeometry,
};
use proptest::prelude::*;

fn bc_strategy() -> impl Strategy<Value = Bc> {
    prop_oneof![Just(Bc::Dirichlet), Just(Bc::Neumann), Just(Bc::Mixed)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spectrum_gap_is_pi_over_omega(omega in 0.1f64..6.2, bc in bc_strategy(), n in 2usize..12) {
        let g = SectorGeometry::new(omega, 1.0, bc).unwrap();
        let s = build_spectrum(&g, n);
        prop_assert_eq!(s.len(), n);
        for k in 1..n {
            prop_assert!((s.lambdas[k] - s.lambdas[k - 1] - PI / omega).abs() < 1e-12 * s.lambdas[k].max(1.0));
        }
        let first = match bc {
            Bc::Dirichlet => PI / omega,
            Bc::Neumann => 0.0,
            Bc::Mixed => 0.5 * PI / omega,
        };
        prop_assert!((s.lambdas[0] - first).abs() < 1e-14 * first.max(1.0));
        let kind = if bc == Bc::Neumann { Kind::Cosine } else { Kind::Sine };
        prop_assert!(s.kinds.iter().all(|&k| k == kind));
    }

    #[test]
    fn eigenfunctions_orthogonal_under_quadrature(omega in 0.3f64..6.2, bc in bc_strategy(), n in 0usize..6, m in 0usize..6) {
        let g = SectorGeometry::new(omega, 1.0, bc).unwrap();
        let s = build_spectrum(&g, 6);
        let phi: Vec<f64> = (0..=512).map(|j| omega * j as f64 / 512.0).collect();
        let prod: Vec<f64> = phi.iter().map(|&p| s.eval(n, p) * s.eval(m, p)).collect();
        let want = if n != m { 0.0 } else if s.lambdas[n] == 0.0 { omega } else { omega / 2.0 };
        prop_assert!((angular_quadrature(&prod, omega) - want).abs() < 1e-8);
    }

    #[test]
    fn cutoff_is_a_monotone_partition(a in 0.01f64..0.5, w in 0.05f64..0.5, r in 0.0f64..1.2, dr in 0.0f64..0.1) {
        let b = a + w;
        let c = Cutoff::smooth(a, b).unwrap();
        let q = Cutoff::quintic(a, b).unwrap();
        for chi in [c, q] {
            let v = chi.value(r);
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert!(chi.value(r + dr) <= v + 1e-15);
            if r <= a {
                prop_assert_eq!(v, 1.0);
            }
            if r >= b {
                prop_assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn resonance_matches_float_oracle(p in 1i64..16, q in 1i64..12, n in 1u32..9, bc in bc_strategy()) {
        prop_assume!(p < 2 * q);
        let g = SectorGeometry::pi_frac(p, q, 1.0, bc).unwrap();
        prop_assume!(!g.is_smooth_case());
        let x = n as f64 * g.omega;
        let oracle = match bc {
            Bc::Mixed => x.cos().abs() < 1e-9,
            _ => x.sin().abs() < 1e-9,
        };
        prop_assert_eq!(is_resonant(&g, n), oracle);
    }
}

#[test]
fn radians_never_resonant() {
    let g = SectorGeometry::new(PI / 2.0, 1.0, Bc::Dirichlet).unwrap();
    assert!(!is_resonant(&g, 2));
    let h = SectorGeometry::pi_frac(1, 2, 1.0, Bc::Dirichlet).unwrap();
    assert!(is_resonant(&h, 2));
}

#[test]
fn harmonic_singularity_residual_is_second_order() {
    let omega = 1.5 * PI;
    let res = |n_r: usize, n_phi: usize| {
        let grid = Grid::new(1.0, omega, n_r, n_phi, 1e-3).unwrap();
        let u = ScalarField::from_fn(&grid, |r, p| r.powf(2.0 / 3.0) * (2.0 * p / 3.0).sin());
        let f = ScalarField::zeros(&grid);
        laplacian_residual_annulus(&u, &f, 0.2, 0.8).unwrap()
    };
    let (a, b, c) = (res(100, 32), res(200, 64), res(400, 128));
    let o1 = (a / b).log2();
    let o2 = (b / c).log2();
    assert!((o1 - 2.0).abs() < 0.1 && (o2 - 2.0).abs() < 0.1, "orders {o1} {o2}");
}
