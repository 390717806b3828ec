//! Lieb–Robinson commutator profiles, the constants fitted from them, and
//! support truncation by conditional expectation.

use std::io::Write;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::export::{fmt_f64, write_table, RunMeta};
use crate::linalg::{self, c64, Scalar};
use crate::spectral::SpectralData;

/// An operator on the sites `first..first+len` (1-based), `len` implied by
/// its dimension.
#[derive(Debug, Clone)]
pub struct LocalOp<T: Scalar> {
    pub first: usize,
    pub op: Mat<T>,
}

impl<T: Scalar> LocalOp<T> {
    pub fn new(first: usize, op: Mat<T>) -> Self {
        LocalOp { first, op }
    }

    pub fn len(&self, d: usize) -> usize {
        linalg::sites_of(self.op.nrows(), d).expect("operator dimension is a power of d")
    }

    pub fn last(&self, d: usize) -> usize {
        self.first + self.len(d) - 1
    }
}

/// Sites strictly between two intervals; `None` when they overlap.
pub fn distance(x: (usize, usize), y: (usize, usize)) -> Option<usize> {
    let (l, r) = if x.0 <= y.0 { (x, y) } else { (y, x) };
    (r.0 > l.1).then(|| r.0 - l.1 - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub t: f64,
    pub distance: usize,
    pub norm: f64,
}

/// Operators in the energy eigenbasis, where time evolution is a phase.
struct Frame {
    energies: Vec<f64>,
}

impl Frame {
    fn phase_apply<T: Scalar>(&self, m: &Mat<T>, t: f64, x: &[c64], adjoint: bool) -> Vec<c64> {
        // A(t) = D A D†, D = diag(e^{iEt}); A(t)† = D A† D†
        let e = &self.energies;
        let y: Vec<c64> = x.iter().zip(e).map(|(v, &en)| *v * c64::new((en * t).cos(), -(en * t).sin())).collect();
        let z = if adjoint { adj_matvec_mixed(m, &y) } else { matvec_mixed(m, &y) };
        z.iter().zip(e).map(|(v, &en)| *v * c64::new((en * t).cos(), (en * t).sin())).collect()
    }
}

fn matvec_mixed<T: Scalar>(m: &Mat<T>, x: &[c64]) -> Vec<c64> {
    let mut y = vec![c64::new(0.0, 0.0); m.nrows()];
    for (j, xj) in x.iter().enumerate() {
        let col = m.col_as_slice(j);
        for (yi, mij) in y.iter_mut().zip(col) {
            *yi += mij.to_c64() * *xj;
        }
    }
    y
}

fn adj_matvec_mixed<T: Scalar>(m: &Mat<T>, x: &[c64]) -> Vec<c64> {
    (0..m.ncols())
        .map(|j| {
            let col = m.col_as_slice(j);
            col.iter().zip(x).fold(c64::new(0.0, 0.0), |acc, (mij, xi)| acc + mij.conj().to_c64() * *xi)
        })
        .collect()
}

/// `‖[A(t), B]‖` for each `(t, B)` pair, with `A(t) = e^{iHt} A e^{-iHt}`.
pub fn commutator_norms<T: Scalar>(
    sd: &SpectralData<T>,
    n: usize,
    d: usize,
    a: &LocalOp<T>,
    bs: &[LocalOp<T>],
    times: &[f64],
) -> Result<Vec<ProfileRow>> {
    sd.require_full()?;
    let xa = (a.first, a.last(d));
    if xa.1 > n {
        return Err(Error::IntervalOutOfRange { a: xa.0, b: xa.1, n });
    }
    let a_full = linalg::embed(a.op.as_ref(), a.first - 1, n, d);
    let a_e = sd.to_eigenbasis(&a_full)?;
    let frame = Frame { energies: sd.energies.clone() };
    let mut rows = Vec::with_capacity(bs.len() * times.len());
    for b in bs {
        let xb = (b.first, b.last(d));
        if xb.1 > n {
            return Err(Error::IntervalOutOfRange { a: xb.0, b: xb.1, n });
        }
        let dist = distance(xa, xb).ok_or_else(|| Error::OverlappingSupports(format!("{xa:?} and {xb:?}")))?;
        let b_e = sd.to_eigenbasis(&linalg::embed(b.op.as_ref(), b.first - 1, n, d))?;
        for &t in times {
            let apply = |x: &[c64]| {
                let ab = frame.phase_apply(&a_e, t, &matvec_mixed(&b_e, x), false);
                let ba = matvec_mixed(&b_e, &frame.phase_apply(&a_e, t, x, false));
                ab.iter().zip(&ba).map(|(p, q)| *p - *q).collect::<Vec<_>>()
            };
            let apply_adj = |x: &[c64]| {
                let ab = adj_matvec_mixed(&b_e, &frame.phase_apply(&a_e, t, x, true));
                let ba = frame.phase_apply(&a_e, t, &adj_matvec_mixed(&b_e, x), true);
                ab.iter().zip(&ba).map(|(p, q)| *p - *q).collect::<Vec<_>>()
            };
            let norm = linalg::operator_norm_by::<c64>(sd.dim, apply, apply_adj);
            rows.push(ProfileRow { t, distance: dist, norm });
        }
    }
    Ok(rows)
}

/// Profile of a single-site `a` at `site` against single-site `b` placed at
/// every site to its right.
pub fn commutator_sweep<T: Scalar>(
    sd: &SpectralData<T>,
    n: usize,
    d: usize,
    a: &Mat<T>,
    site: usize,
    b: &Mat<T>,
    times: &[f64],
) -> Result<Vec<ProfileRow>> {
    let bs: Vec<LocalOp<T>> = (site + 1..=n).map(|s| LocalOp::new(s, b.clone())).collect();
    commutator_norms(sd, n, d, &LocalOp::new(site, a.clone()), &bs, times)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Norm above `envelope·‖A‖‖B‖` counts as inside the light cone.
    pub envelope: f64,
    pub min_r_squared: f64,
    pub a_norm: f64,
    pub b_norm: f64,
    /// Number of sites in the support of `A`.
    pub support: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { envelope: 0.1, min_r_squared: 0.9, a_norm: 1.0, b_norm: 1.0, support: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalityConstants {
    pub v: f64,
    /// Decay length of commutators outside the light cone.
    pub xi_c: f64,
    pub xi: f64,
    pub xi_prime: f64,
    /// Smallest prefactor with `norm ≤ c·|X|‖A‖‖B‖ e^{-d/ξ_C}` on the
    /// sub-ballistic rows.
    pub c: f64,
    pub slope: f64,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
    /// True when no row was inside the light cone and `v` is only the grid
    /// resolution `d_min / t_max`.
    pub v_from_grid: bool,
}

impl LocalityConstants {
    /// Constants with an externally chosen velocity.
    pub fn with_velocity(&self, v: f64, delta_e: f64) -> LocalityConstants {
        let mut out = self.clone();
        out.v = v;
        out.xi = (2.0 * v / delta_e).max(self.xi_c);
        out.xi_prime = 6.0 * out.xi;
        out
    }
}

pub fn fit_locality_constants(rows: &[ProfileRow], delta_e: f64, opts: &FitOptions) -> Result<LocalityConstants> {
    if !(delta_e > 0.0) {
        return Err(Error::InvalidParameter(format!("gap {delta_e}")));
    }
    let mut dists: Vec<usize> = rows.iter().map(|r| r.distance).collect();
    dists.sort_unstable();
    dists.dedup();
    let mut times: Vec<f64> = rows.iter().map(|r| r.t).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    if dists.len() < 3 || times.len() < 3 {
        return Err(Error::FitFailed(format!("{} distances and {} times, need 3 of each", dists.len(), times.len())));
    }
    if rows.iter().all(|r| r.norm <= 0.0) {
        return Err(Error::FitFailed("all commutator norms vanish".into()));
    }
    let scale = opts.a_norm * opts.b_norm;
    let threshold = opts.envelope * scale;
    let inside: Vec<f64> =
        rows.iter().filter(|r| r.t > 0.0 && r.norm > threshold).map(|r| r.distance as f64 / r.t).collect();
    let t_max = times.last().copied().unwrap();
    let (v, v_from_grid) = if inside.is_empty() {
        ((dists[0].max(1) as f64) / t_max, true)
    } else {
        (inside.iter().fold(0.0f64, |m, &x| m.max(x)), false)
    };
    if !(v > 0.0) {
        return Err(Error::FitFailed("light-cone velocity is zero".into()));
    }
    // Per-time demeaned regression of ln(norm) on distance outside the cone.
    let sub: Vec<&ProfileRow> =
        rows.iter().filter(|r| r.norm > 0.0 && r.t < r.distance as f64 / v).collect();
    let mut groups: std::collections::BTreeMap<u64, Vec<(f64, f64)>> = Default::default();
    for r in &sub {
        groups.entry(r.t.to_bits()).or_default().push((r.distance as f64, r.norm.ln()));
    }
    let mut pts = Vec::new();
    for g in groups.values().filter(|g| g.len() >= 2) {
        let mx = g.iter().map(|p| p.0).sum::<f64>() / g.len() as f64;
        let my = g.iter().map(|p| p.1).sum::<f64>() / g.len() as f64;
        pts.extend(g.iter().map(|&(x, y)| (x - mx, y - my)));
    }
    if pts.len() < 3 {
        return Err(Error::FitFailed(format!("only {} usable sub-ballistic points", pts.len())));
    }
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let syy: f64 = pts.iter().map(|p| p.1 * p.1).sum();
    if sxx == 0.0 {
        return Err(Error::FitFailed("no distance spread within a time slice".into()));
    }
    let slope = sxy / sxx;
    let residuals: Vec<f64> = pts.iter().map(|p| p.1 - slope * p.0).collect();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    if !(slope < 0.0) {
        return Err(Error::FitFailed(format!("non-decaying profile, slope {slope:.4}")));
    }
    if r_squared < opts.min_r_squared {
        return Err(Error::FitFailed(format!("R² = {r_squared:.4} below {}", opts.min_r_squared)));
    }
    let xi_c = -1.0 / slope;
    let c = sub
        .iter()
        .map(|r| r.norm / (opts.support as f64 * scale * (-(r.distance as f64) / xi_c).exp()))
        .fold(0.0f64, f64::max);
    let xi = (2.0 * v / delta_e).max(xi_c);
    Ok(LocalityConstants { v, xi_c, xi, xi_prime: 6.0 * xi, c, slope, r_squared, residuals, v_from_grid })
}

/// `E_[a,b](A)`: the normalized partial trace onto sites `a..=b`, tensored
/// with the identity elsewhere.
pub fn truncate_support<T: Scalar>(op: &Mat<T>, n: usize, d: usize, a: usize, b: usize) -> Result<Mat<T>> {
    if a < 1 || a > b || b > n {
        return Err(Error::IntervalOutOfRange { a, b, n });
    }
    if op.nrows() != linalg::pow_dim(d, n) {
        return Err(Error::DimensionMismatch { expected: linalg::pow_dim(d, n), got: op.nrows() });
    }
    Ok(linalg::conditional_expectation(op.as_ref(), a - 1, b - a + 1, n, d))
}

pub fn write_profile_csv(rows: &[ProfileRow], meta: &RunMeta, w: impl Write) -> Result<()> {
    let table: Vec<Vec<String>> =
        rows.iter().map(|r| vec![fmt_f64(r.t), r.distance.to_string(), fmt_f64(r.norm)]).collect();
    write_table(w, &["t", "distance", "norm"], &table, meta)
}

pub fn write_fit_json(c: &LocalityConstants, w: impl Write) -> Result<()> {
    serde_json::to_writer_pretty(w, c).map_err(|e| Error::Format(e.to_string()))
}
