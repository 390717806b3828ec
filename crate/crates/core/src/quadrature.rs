//! Time-domain Gaussian averages by Gauss–Hermite quadrature.
//!
//! Used as the independent check on the eigenbasis filters: evolution here
//! goes through a matrix exponential, never through the eigenvectors.

use faer::Mat;

use crate::linalg::{self, c64};

pub const DEFAULT_ORDER: usize = 64;
/// Nodes with `|t| > WINDOW·√q/ΔE` carry weight below 1e-14 and are dropped.
pub const WINDOW: f64 = 8.0;

/// Nodes and weights for `∫ e^{-x²} f(x) dx` (Golub–Welsch).
pub fn gauss_hermite(order: usize) -> (Vec<f64>, Vec<f64>) {
    let alpha = vec![0.0; order];
    let beta: Vec<f64> = (1..order).map(|k| (k as f64 / 2.0).sqrt()).collect();
    let (nodes, vecs) = linalg::tridiagonal_eigen(&alpha, &beta);
    let weights = (0..order).map(|i| std::f64::consts::PI.sqrt() * vecs[(0, i)] * vecs[(0, i)]).collect();
    (nodes, weights)
}

/// Times and normalized weights realizing
/// `(ΔE/√(2πq)) ∫ dt f(t) e^{-(tΔE)²/2q} ≈ Σ_i w_i f(t_i)`.
pub fn gaussian_time_nodes(q: f64, delta_e: f64, order: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_hermite(order);
    let stretch = (2.0 * q).sqrt() / delta_e;
    let cutoff = WINDOW * q.sqrt() / delta_e;
    x.iter()
        .zip(&w)
        .map(|(xi, wi)| (xi * stretch, wi / std::f64::consts::PI.sqrt()))
        .filter(|(t, _)| t.abs() <= cutoff)
        .collect()
}

/// `e^{iHt}` for a batch of times, pairing `±t` through the adjoint.
fn propagators(h: &Mat<c64>, times: &[f64]) -> Vec<Mat<c64>> {
    let n = h.nrows();
    times
        .iter()
        .map(|&t| {
            let gen = Mat::from_fn(n, n, |i, j| h[(i, j)] * c64::new(0.0, t.abs()));
            let u = linalg::expm(gen.as_ref());
            if t < 0.0 {
                linalg::adjoint(u.as_ref())
            } else {
                u
            }
        })
        .collect()
}

/// Quadrature estimate of `(ΔE/√(2πq)) ∫ dt e^{iHt} A e^{-iHt} e^{-(tΔE)²/2q}`.
pub fn filter_operator_quadrature(h: &Mat<c64>, a: &Mat<c64>, q: f64, delta_e: f64, order: usize) -> Mat<c64> {
    let nodes = gaussian_time_nodes(q, delta_e, order);
    let times: Vec<f64> = nodes.iter().map(|(t, _)| *t).collect();
    let us = propagators(h, &times);
    let mut acc = Mat::<c64>::zeros(a.nrows(), a.ncols());
    for ((_, w), u) in nodes.iter().zip(&us) {
        let at = linalg::mul_adj(linalg::mul(u.as_ref(), a.as_ref()).as_ref(), u.as_ref());
        acc += linalg::scaled(at.as_ref(), *w);
    }
    acc
}

/// Quadrature estimate of `P_q = (ΔE/√(2πq)) ∫ dt e^{iHt} e^{-(tΔE)²/2q}`;
/// `h` must already have its ground energy at zero.
pub fn filter_projector_quadrature(h: &Mat<c64>, q: f64, delta_e: f64, order: usize) -> Mat<c64> {
    let nodes = gaussian_time_nodes(q, delta_e, order);
    let times: Vec<f64> = nodes.iter().map(|(t, _)| *t).collect();
    let us = propagators(h, &times);
    let mut acc = Mat::<c64>::zeros(h.nrows(), h.ncols());
    for ((_, w), u) in nodes.iter().zip(&us) {
        acc += linalg::scaled(u.as_ref(), *w);
    }
    acc
}

/// Largest frequency `ω` for which the rule integrates `e^{iωt}` against the
/// Gaussian weight to within about 1e-10. The rule is exact for polynomials
/// of degree `< 2·order`, so resolution degrades once `ω√(2q)/ΔE` exceeds
/// roughly `0.2·order`.
pub fn resolvable_frequency(q: f64, delta_e: f64, order: usize) -> f64 {
    0.2 * order as f64 * delta_e / (2.0 * q).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_sqrt_pi_and_moments() {
        let (x, w) = gauss_hermite(64);
        let s: f64 = w.iter().sum();
        assert!((s - std::f64::consts::PI.sqrt()).abs() < 1e-13);
        // ∫ x² e^{-x²} = √π/2, ∫ x⁴ e^{-x²} = 3√π/4
        let m2: f64 = x.iter().zip(&w).map(|(a, b)| a * a * b).sum();
        let m4: f64 = x.iter().zip(&w).map(|(a, b)| a.powi(4) * b).sum();
        assert!((m2 - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-13);
        assert!((m4 - 3.0 * std::f64::consts::PI.sqrt() / 4.0).abs() < 1e-12);
    }

    #[test]
    fn characteristic_function_of_gaussian() {
        // ∫ e^{iωt} (ΔE/√(2πq)) e^{-(tΔE)²/2q} dt = e^{-qω²/(2ΔE²)}
        let (q, de) = (1.5, 0.8);
        let nodes = gaussian_time_nodes(q, de, 64);
        for omega in [0.0, 0.3, 1.0, 2.5] {
            let got: f64 = nodes.iter().map(|(t, w)| w * (omega * t).cos()).sum();
            let expect = (-q * omega * omega / (2.0 * de * de)).exp();
            assert!((got - expect).abs() < 1e-12, "omega={omega}: {got} vs {expect}");
        }
    }

    #[test]
    fn resolution_limit_is_conservative() {
        let (q, de) = (2.0, 1.0);
        let wmax = resolvable_frequency(q, de, 64);
        let nodes = gaussian_time_nodes(q, de, 64);
        for k in 0..=20 {
            let omega = wmax * k as f64 / 20.0;
            let got: f64 = nodes.iter().map(|(t, w)| w * (omega * t).cos()).sum();
            let expect = (-q * omega * omega / (2.0 * de * de)).exp();
            assert!((got - expect).abs() < 1e-10, "omega={omega}");
        }
    }

    fn tfim_check(n: usize, q: f64) -> (f64, f64) {
        use crate::lattice::tfim;
        use crate::spectral::{diagonalize, gaussian_filter_operator, Mode};
        let h = tfim(n, 2.0);
        let sd = diagonalize::<c64>(&h, Mode::Full).unwrap();
        let dense = h.dense::<c64>();
        let a = linalg::embed(crate::lattice::pauli_x().as_ref(), n / 2, n, 2);
        let exact = gaussian_filter_operator(&sd, &a, q).unwrap();
        let quad = filter_operator_quadrature(&dense, &a, q, sd.gap, DEFAULT_ORDER);
        let op_err = linalg::op_norm((&exact - &quad).as_ref());
        let mut shifted = dense.clone();
        linalg::add_identity(&mut shifted, -sd.e0);
        let pq = crate::spectral::gaussian_filter_projector(&sd, q).unwrap();
        let pq_quad = filter_projector_quadrature(&shifted, q, sd.gap, DEFAULT_ORDER);
        let proj_err = linalg::op_norm((&pq - &pq_quad).as_ref());
        (op_err, proj_err)
    }

    #[test]
    fn operator_filter_matches_eigenbasis_route() {
        for n in [6, 8] {
            for q in [0.5, 1.0, 2.0] {
                let (op_err, _) = tfim_check(n, q);
                assert!(op_err < 1e-8, "n={n} q={q}: {op_err:.3e}");
            }
        }
    }

    #[test]
    fn projector_filter_matches_where_resolved() {
        use crate::lattice::tfim;
        use crate::spectral::{diagonalize, Mode};
        let mut checked = 0;
        for n in [6, 8] {
            let sd = diagonalize::<c64>(&tfim(n, 2.0), Mode::Full).unwrap();
            let emax = *sd.energies.last().unwrap();
            for q in [0.5, 1.0, 2.0] {
                if emax > resolvable_frequency(q, sd.gap, DEFAULT_ORDER) {
                    continue;
                }
                let (_, proj_err) = tfim_check(n, q);
                assert!(proj_err < 1e-8, "n={n} q={q}: {proj_err:.3e}");
                checked += 1;
            }
        }
        assert!(checked > 0);
    }
}
