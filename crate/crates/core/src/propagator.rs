//! Adaptive Dormand–Prince 5(4) integration of matrix ODEs, and the
//! interaction-picture propagator built on it.

use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg::{self, c64, Scalar};

#[derive(Debug, Clone, Copy)]
pub struct Rk45Options {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Allowed `‖W†W − 1‖` per unit time for unitary flows.
    pub unitarity_drift: f64,
}

impl Default for Rk45Options {
    fn default() -> Self {
        Rk45Options { rtol: 1e-12, atol: 1e-13, max_steps: 200_000, unitarity_drift: 1e-9 }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

fn axpy(y: &mut Mat<c64>, s: f64, x: &Mat<c64>) {
    for j in 0..y.ncols() {
        for i in 0..y.nrows() {
            y[(i, j)] += x[(i, j)].scale(s);
        }
    }
}

/// Integrates `dY/dt = f(t, Y)` from `(t0, y0)` and returns `Y` at each of
/// `targets`, which must be monotone in one direction away from `t0`.
pub fn integrate(
    y0: &Mat<c64>,
    t0: f64,
    targets: &[f64],
    mut f: impl FnMut(f64, &Mat<c64>) -> Mat<c64>,
    opts: Rk45Options,
) -> Result<Vec<Mat<c64>>> {
    let mut out = Vec::with_capacity(targets.len());
    if targets.is_empty() {
        return Ok(out);
    }
    let dir = if targets.iter().any(|&t| t < t0) { -1.0 } else { 1.0 };
    if targets.windows(2).any(|w| (w[1] - w[0]) * dir < 0.0) || targets.iter().any(|&t| (t - t0) * dir < 0.0) {
        return Err(Error::InvalidParameter("integration targets must be monotone".into()));
    }
    let span = (targets[targets.len() - 1] - t0).abs();
    let mut t = t0;
    let mut y = y0.clone();
    let mut h = (span / 100.0).max(1e-6) * dir;
    let mut k1 = f(t, &y);
    let mut steps = 0;
    for &target in targets {
        while (target - t) * dir > 0.0 {
            if steps >= opts.max_steps {
                return Err(Error::IntegratorFailure(format!("step budget exhausted at t = {t}")));
            }
            steps += 1;
            let last = (target - t - h) * dir <= 0.0;
            let hs = if last { target - t } else { h };
            let mut ks: Vec<Mat<c64>> = Vec::with_capacity(7);
            ks.push(k1.clone());
            for s in 1..7 {
                let mut ys = y.clone();
                for (r, kr) in ks.iter().enumerate() {
                    if A[s][r] != 0.0 {
                        axpy(&mut ys, hs * A[s][r], kr);
                    }
                }
                ks.push(f(t + C[s] * hs, &ys));
            }
            let mut y5 = y.clone();
            let mut err = Mat::<c64>::zeros(y.nrows(), y.ncols());
            for s in 0..7 {
                axpy(&mut y5, hs * B5[s], &ks[s]);
                axpy(&mut err, hs * (B5[s] - B4[s]), &ks[s]);
            }
            let mut e = 0.0f64;
            for j in 0..y.ncols() {
                for i in 0..y.nrows() {
                    let sc = opts.atol + opts.rtol * y[(i, j)].abs().max(y5[(i, j)].abs());
                    e = e.max(err[(i, j)].abs() / sc);
                }
            }
            if e <= 1.0 {
                t = if last { target } else { t + hs };
                y = y5;
                // FSAL: the seventh stage is the derivative at the new point.
                k1 = ks.pop().unwrap();
            }
            let factor = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
            let next = hs.abs() * factor;
            if next < 1e-14 * span.max(1.0) {
                return Err(Error::IntegratorFailure(format!("step size underflow at t = {t}")));
            }
            if !last || e > 1.0 {
                h = next * dir;
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}

/// `W(t) = e^{i(K+B)t} e^{-iKt}` for each requested time, written in the
/// eigenbasis of `K`. `kappa` holds the eigenvalues of `K` and `b_k` the
/// perturbation in that basis. `W` solves `dW/dt = i W B(t)` with
/// `B(t) = e^{iKt} B e^{-iKt}`.
pub fn interaction_propagators(kappa: &[f64], b_k: &Mat<c64>, times: &[f64], opts: Rk45Options) -> Result<Vec<Mat<c64>>> {
    let n = kappa.len();
    if b_k.nrows() != n || b_k.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b_k.nrows() });
    }
    let rhs = |t: f64, w: &Mat<c64>| {
        let bt = Mat::from_fn(n, n, |a, b| {
            let ph = (kappa[a] - kappa[b]) * t;
            b_k[(a, b)] * c64::new(-ph.sin(), ph.cos())
        });
        linalg::mul(w.as_ref(), bt.as_ref())
    };
    let id = Mat::<c64>::identity(n, n);
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let neg: Vec<usize> = order.iter().copied().filter(|&i| times[i] < 0.0).rev().collect();
    let pos: Vec<usize> = order.iter().copied().filter(|&i| times[i] >= 0.0).collect();
    let mut result: Vec<Option<Mat<c64>>> = vec![None; times.len()];
    for branch in [neg, pos] {
        let ts: Vec<f64> = branch.iter().map(|&i| times[i]).collect();
        let ws = integrate(&id, 0.0, &ts, rhs, opts)?;
        for (&i, w) in branch.iter().zip(ws) {
            let drift = linalg::max_abs_diff(linalg::adj_mul(w.as_ref(), w.as_ref()).as_ref(), id.as_ref());
            if drift > opts.unitarity_drift * times[i].abs().max(1.0) {
                return Err(Error::IntegratorFailure(format!("unitarity drift {drift:.3e} at t = {}", times[i])));
            }
            result[i] = Some(w);
        }
    }
    Ok(result.into_iter().map(|w| w.unwrap()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scalar_exponential() {
        let y0 = Mat::from_fn(1, 1, |_, _| c64::new(1.0, 0.0));
        let ts = [0.5, 1.0, 2.0];
        let ys = integrate(&y0, 0.0, &ts, |_, y| linalg::scaled(y.as_ref(), -1.3), Rk45Options::default()).unwrap();
        for (t, y) in ts.iter().zip(ys) {
            assert!((y[(0, 0)].re - (-1.3 * t).exp()).abs() < 1e-11);
        }
    }

    #[test]
    fn backward_direction() {
        let y0 = Mat::from_fn(1, 1, |_, _| c64::new(1.0, 0.0));
        let ys = integrate(&y0, 0.0, &[-0.5, -1.5], |_, y| y.clone(), Rk45Options::default()).unwrap();
        assert!((ys[1][(0, 0)].re - (-1.5f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn rejects_non_monotone_targets() {
        let y0 = Mat::<c64>::identity(1, 1);
        assert!(integrate(&y0, 0.0, &[1.0, 0.5], |_, y| y.clone(), Rk45Options::default()).is_err());
    }

    #[test]
    fn interaction_picture_matches_exponentials() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 6;
        let kappa: Vec<f64> = (0..n).map(|i| i as f64 * 0.7 - 1.0).collect();
        let b = linalg::random_hermitian::<c64>(n, &mut rng);
        let k = Mat::from_fn(n, n, |i, j| if i == j { c64::new(kappa[i], 0.0) } else { c64::new(0.0, 0.0) });
        let times = [1.3, -0.4, 0.0, 2.1];
        let ws = interaction_propagators(&kappa, &b, &times, Rk45Options::default()).unwrap();
        for (t, w) in times.iter().zip(&ws) {
            let mt = Mat::from_fn(n, n, |i, j| (k[(i, j)] + b[(i, j)]) * c64::new(0.0, *t));
            let kt = Mat::from_fn(n, n, |i, j| k[(i, j)] * c64::new(0.0, -*t));
            let expect = linalg::mul(linalg::expm(mt.as_ref()).as_ref(), linalg::expm(kt.as_ref()).as_ref());
            assert!(linalg::max_abs_diff(w.as_ref(), expect.as_ref()) < 1e-9, "t={t}");
        }
    }
}
