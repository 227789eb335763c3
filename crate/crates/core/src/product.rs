//! Product integration on uniform grids: `int e^{-a x} p(x) dx` over a unit
//! cell with `p` the local Lagrange interpolant, for complex `a`.

use num_complex::Complex64;

pub(crate) const STENCIL: usize = 6;

/// `J_m(a) = int_0^1 x^m e^{-a x} dx` for `m < STENCIL`.
pub(crate) fn moments(a: Complex64) -> [Complex64; STENCIL] {
    let mut j = [Complex64::new(0.0, 0.0); STENCIL];
    if a.norm() < 2.0 {
        for (m, jm) in j.iter_mut().enumerate() {
            let mut term = Complex64::new(1.0, 0.0);
            let mut s = Complex64::new(0.0, 0.0);
            for k in 0..40 {
                s += term / (m + k + 1) as f64;
                term *= -a / (k + 1) as f64;
            }
            *jm = s;
        }
    } else {
        let e = (-a).exp();
        j[0] = (1.0 - e) / a;
        for m in 1..STENCIL {
            j[m] = (m as f64 * j[m - 1] - e) / a;
        }
    }
    j
}

/// `int_0^1 e^{-a x} L_k(x) dx` for the Lagrange basis on `nodes`.
pub(crate) fn lagrange_weights(nodes: &[f64], a: Complex64) -> Vec<Complex64> {
    let jm = moments(a);
    let p = nodes.len();
    (0..p)
        .map(|k| {
            // monomial coefficients of prod_{m != k} (x - x_m) / (x_k - x_m)
            let mut c = vec![0.0; p];
            c[0] = 1.0;
            let mut deg = 0;
            let mut den = 1.0;
            for m in 0..p {
                if m == k {
                    continue;
                }
                let mut nc = vec![0.0; p];
                for q in 0..=deg {
                    nc[q + 1] += c[q];
                    nc[q] -= nodes[m] * c[q];
                }
                c = nc;
                deg += 1;
                den *= nodes[k] - nodes[m];
            }
            (0..p).map(|q| jm[q] * c[q]).sum::<Complex64>() / den
        })
        .collect()
}

/// First node of the stencil used for cell `k` of a grid with `n` cells.
pub(crate) fn stencil_start(k: usize, n: usize, p: usize) -> usize {
    k.saturating_sub(p / 2 - 1).min(n + 1 - p)
}

/// Per-cell integrals `int_{t_k}^{t_{k+1}} e^{-c (tau - t_k)} g dtau`, or with
/// `reversed` the kernel `e^{-c (t_{k+1} - tau)}`.
pub(crate) fn cell_integrals(g: &[Complex64], c: Complex64, dt: f64, reversed: bool) -> Vec<Complex64> {
    let n = g.len() - 1;
    let p = STENCIL.min(n + 1);
    let a = c * dt;
    let mut cache: Vec<Option<Vec<Complex64>>> = vec![None; p];
    (0..n)
        .map(|k| {
            let start = stencil_start(k, n, p);
            let off = k - start;
            let w = cache[off].get_or_insert_with(|| {
                let nodes: Vec<f64> = (0..p)
                    .map(|m| {
                        let x = m as f64 - off as f64;
                        if reversed {
                            1.0 - x
                        } else {
                            x
                        }
                    })
                    .collect();
                lagrange_weights(&nodes, a).into_iter().map(|v| v * dt).collect()
            });
            (0..p).map(|m| w[m] * g[start + m]).sum()
        })
        .collect()
}
