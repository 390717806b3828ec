//! Approximate ground-state projectors `O_B O_L O_R` across a cut.
//!
//! The Hamiltonian is split into left, boundary and right bond sets, each
//! piece is Gaussian-filtered and then truncated back to a neighbourhood
//! of the cut by conditional expectation. `O_L`, `O_R` are spectral
//! projectors of the truncated side pieces and `O_B` is the truncated
//! time average of the interaction-picture propagator generated by the
//! boundary piece.
//!
//! Sites and windows are 1-based and inclusive. Operators that live on a
//! block of sites are stored as the block matrix together with its first
//! site.

use std::io::Write;

use faer::Mat;

use crate::entanglement::InequalityCheck;
use crate::error::{Error, Result};
use crate::export::{fmt_f64, write_table, RunMeta};
use crate::lattice::Hamiltonian1D;
use crate::linalg::{self, c64, Scalar};
use crate::propagator::{interaction_propagators, Rk45Options};
use crate::quadrature::{gaussian_time_nodes, DEFAULT_ORDER};
use crate::spectral::{gaussian_weight, SpectralData};

/// `‖O_B‖` above one by at most this much is rescaled; more is an error.
pub const NORM_SLACK: f64 = 1e-6;
const PROJECTOR_TOL: f64 = 1e-10;

/// Bond sets and truncation regions for a cut after site `j` and
/// half-width `l`, with `r1 = round(l/3)` and `r2 = round(2l/3)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Regions {
    pub n: usize,
    pub j: usize,
    pub l: usize,
    pub r1: usize,
    pub r2: usize,
}

impl Regions {
    pub fn new(n: usize, j: usize, l: usize) -> Result<Regions> {
        if j < 1 || j >= n {
            return Err(Error::CutOutOfRange { j, max: n - 1 });
        }
        if l == 0 || l >= n {
            return Err(Error::WindowOutOfRange { j, l, n });
        }
        let r1 = ((l as f64) / 3.0).round().max(1.0) as usize;
        let r2 = (((2 * l) as f64) / 3.0).round().max(r1 as f64) as usize;
        let reg = Regions { n, j, l, r1, r2 };
        if reg.bonds_left().is_empty() || reg.bonds_right().is_empty() {
            return Err(Error::WindowOutOfRange { j, l, n });
        }
        Ok(reg)
    }

    /// 0-based bond indices; bond `b` couples sites `b+1, b+2`.
    pub fn bonds_left(&self) -> Vec<usize> {
        (0..self.j.saturating_sub(self.r1)).collect()
    }

    pub fn bonds_boundary(&self) -> Vec<usize> {
        (self.j.saturating_sub(self.r1)..(self.j + self.r1).min(self.n - 1)).collect()
    }

    pub fn bonds_right(&self) -> Vec<usize> {
        ((self.j + self.r1).min(self.n - 1)..self.n - 1).collect()
    }

    pub fn truncation_left(&self) -> (usize, usize) {
        (self.j.saturating_sub(self.r2).max(1), self.j)
    }

    pub fn truncation_boundary(&self) -> (usize, usize) {
        (self.j.saturating_sub(self.r2).max(1), (self.j + 1 + self.r2).min(self.n))
    }

    pub fn truncation_right(&self) -> (usize, usize) {
        (self.j + 1, (self.j + 1 + self.r2).min(self.n))
    }

    /// Support of `O_B`.
    pub fn window(&self) -> (usize, usize) {
        ((self.j + 1).saturating_sub(self.l).max(1), (self.j + self.l).min(self.n))
    }

    /// `q = (l/3)ΔE/(2v)`.
    pub fn filter_width(&self, gap: f64, v: f64) -> f64 {
        (self.l as f64 / 3.0) * gap / (2.0 * v)
    }
}

/// The three bond sets and the constants that zero their ground-state
/// expectations.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub regions: Regions,
    /// `⟨Ψ0|H_X|Ψ0⟩` for `X = L, B, R`.
    pub shifts: [f64; 3],
}

impl Split {
    pub fn bonds(&self, piece: usize) -> Vec<usize> {
        match piece {
            0 => self.regions.bonds_left(),
            1 => self.regions.bonds_boundary(),
            _ => self.regions.bonds_right(),
        }
    }

    /// Dense `H_X − ⟨H_X⟩` on the whole chain.
    pub fn dense_piece<T: Scalar>(&self, h: &Hamiltonian1D, piece: usize) -> Mat<T> {
        let mut m = h.dense_terms::<T>(self.bonds(piece));
        linalg::add_identity(&mut m, -self.shifts[piece]);
        m
    }
}

pub fn split_hamiltonian<T: Scalar>(h: &Hamiltonian1D, psi: &[T], j: usize, l: usize) -> Result<Split> {
    let regions = Regions::new(h.n_sites, j, l)?;
    if psi.len() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), got: psi.len() });
    }
    let terms = h.terms_as::<T>();
    let mut split = Split { regions, shifts: [0.0; 3] };
    let mut y = vec![T::zero(); psi.len()];
    for piece in 0..3 {
        h.apply_terms(&terms, &split.bonds(piece), psi, &mut y);
        split.shifts[piece] = linalg::dot(psi, &y).re();
    }
    Ok(split)
}

/// Sum of the given bond terms as an operator on sites `first..first+len`
/// (0-based), minus `shift` times the identity.
fn block_sum<T: Scalar>(h: &Hamiltonian1D, bonds: &[usize], first: usize, len: usize, shift: f64) -> Mat<T> {
    let d = h.local_dim;
    let dim = linalg::pow_dim(d, len);
    let mut out = Mat::<T>::zeros(dim, dim);
    for &b in bonds {
        let t: Mat<T> = linalg::from_complex(h.terms[b].as_ref());
        out += linalg::embed(t.as_ref(), b - first, len, d);
    }
    linalg::add_identity(&mut out, -shift);
    out
}

/// `V G` with `V G V† = H̃_X`, the Gaussian-filtered piece `H_X − shift`.
fn filtered_factor<T: Scalar>(h: &Hamiltonian1D, sd: &SpectralData<T>, bonds: &[usize], shift: f64, q: f64) -> Result<Mat<T>> {
    sd.require_full()?;
    let terms = h.terms_as::<T>();
    let hv = h.apply_terms_mat(&terms, bonds, &sd.eigenvectors);
    let mut b = linalg::adj_mul(sd.eigenvectors.as_ref(), hv.as_ref());
    drop(hv);
    linalg::add_identity(&mut b, -shift);
    let g = crate::spectral::filter_in_eigenbasis(sd, &b, q);
    Ok(linalg::mul(sd.eigenvectors.as_ref(), g.as_ref()))
}

fn hermitian_norm<T: Scalar>(a: &Mat<T>) -> Result<f64> {
    Ok(linalg::hermitian_eigenvalues(a.as_ref())?.iter().fold(0.0f64, |m, e| m.max(e.abs())))
}

fn dense_norm<T: Scalar>(a: &Mat<T>) -> f64 {
    linalg::operator_norm_by::<T>(a.nrows(), |x| linalg::matvec(a.as_ref(), x), |x| linalg::adj_matvec(a.as_ref(), x))
}

#[derive(Debug, Clone)]
pub struct TruncatedPieces<T: Scalar> {
    pub q: f64,
    /// `M_L` on sites `1..=j`.
    pub m_l: Mat<T>,
    /// `M_R` on sites `j+1..=n`.
    pub m_r: Mat<T>,
    /// `M_B` on the boundary truncation region.
    pub m_b: Mat<T>,
    pub m_b_first: usize,
    /// `‖M_X Ψ0‖` for `X = L, B, R`.
    pub gs_residuals: [f64; 3],
    /// `‖M_X − H̃_X‖`, the truncation error; three dense eigensolves, so
    /// only computed on request.
    pub truncation_errors: Option<[f64; 3]>,
    /// Anti-Hermitian part removed from `M_L`, `M_R`.
    pub hermiticity_defects: [f64; 2],
}

pub fn build_truncated_pieces<T: Scalar>(
    h: &Hamiltonian1D,
    sd: &SpectralData<T>,
    split: &Split,
    v: f64,
    diagnostics: bool,
) -> Result<TruncatedPieces<T>> {
    if !(v > 0.0) {
        return Err(Error::InvalidParameter(format!("velocity {v}")));
    }
    let reg = split.regions;
    let (n, d, j) = (reg.n, h.local_dim, reg.j);
    let q = reg.filter_width(sd.gap, v);
    let psi = sd.ground_state();

    // Left and right pieces are filtered directly; the boundary piece is the
    // remainder, since the filter fixes H itself. Without diagnostics only
    // the conditional blocks are needed, and those come from the factors.
    let vecs = &sd.eigenvectors;
    let factors = [
        filtered_factor(h, sd, &split.bonds(0), split.shifts[0], q)?,
        filtered_factor(h, sd, &split.bonds(2), split.shifts[2], q)?,
    ];
    let region_b = reg.truncation_boundary();
    let mut deltas = Vec::with_capacity(2);
    let mut trunc = [0.0; 3];
    let block_b;
    if diagnostics {
        let filtered: Vec<Mat<T>> = factors.iter().map(|f| linalg::mul_adj(f.as_ref(), vecs.as_ref())).collect();
        for (k, piece) in [0usize, 2].into_iter().enumerate() {
            let region = if piece == 0 { reg.truncation_left() } else { reg.truncation_right() };
            let diff = &filtered[k] - &split.dense_piece::<T>(h, piece);
            let block = linalg::conditional_block(diff.as_ref(), region.0 - 1, region.1 - region.0 + 1, d);
            let resid = &linalg::embed(block.as_ref(), region.0 - 1, n, d) - &diff;
            trunc[piece] = hermitian_norm(&resid)?;
            deltas.push((region, block));
        }
        let mut hb = h.dense::<T>();
        linalg::add_identity(&mut hb, -sd.e0);
        hb -= &filtered[0];
        hb -= &filtered[1];
        drop(filtered);
        let diff = &hb - &split.dense_piece::<T>(h, 1);
        drop(hb);
        block_b = linalg::conditional_block(diff.as_ref(), region_b.0 - 1, region_b.1 - region_b.0 + 1, d);
        let resid = &linalg::embed(block_b.as_ref(), region_b.0 - 1, n, d) - &diff;
        trunc[1] = hermitian_norm(&resid)?;
    } else {
        let cond = |m: &Mat<T>, r: (usize, usize)| linalg::conditional_block(m.as_ref(), r.0 - 1, r.1 - r.0 + 1, d);
        let cond_f = |f: &Mat<T>, r: (usize, usize)| {
            linalg::conditional_block_product(f.as_ref(), vecs.as_ref(), r.0 - 1, r.1 - r.0 + 1, d)
        };
        for (k, piece) in [0usize, 2].into_iter().enumerate() {
            let region = if piece == 0 { reg.truncation_left() } else { reg.truncation_right() };
            let block = &cond_f(&factors[k], region) - &cond(&split.dense_piece::<T>(h, piece), region);
            deltas.push((region, block));
        }
        let mut rest = h.dense::<T>();
        linalg::add_identity(&mut rest, -sd.e0);
        rest -= &split.dense_piece::<T>(h, 1);
        block_b = &(&cond(&rest, region_b) - &cond_f(&factors[0], region_b)) - &cond_f(&factors[1], region_b);
    }
    drop(factors);

    let ((la, _), dl) = (deltas[0].0, &deltas[0].1);
    let mut m_l = block_sum::<T>(h, &split.bonds(0), 0, j, split.shifts[0]);
    m_l += linalg::embed(dl.as_ref(), la - 1, j, d);
    let ((ra, _), dr) = (deltas[1].0, &deltas[1].1);
    let mut m_r = block_sum::<T>(h, &split.bonds(2), j, n - j, split.shifts[2]);
    m_r += linalg::embed(dr.as_ref(), ra - 1 - j, n - j, d);
    let len_b = region_b.1 - region_b.0 + 1;
    let mut m_b = block_sum::<T>(h, &split.bonds(1), region_b.0 - 1, len_b, split.shifts[1]);
    m_b += &block_b;

    let defects = [linalg::hermiticity_defect(m_l.as_ref()), linalg::hermiticity_defect(m_r.as_ref())];
    let m_l = linalg::hermitian_part(m_l.as_ref());
    let m_r = linalg::hermitian_part(m_r.as_ref());

    let resid = |op: &Mat<T>, first: usize| {
        let mut y = vec![T::zero(); psi.len()];
        linalg::apply_local(op.as_ref(), first, d, &psi, &mut y, false);
        linalg::norm(&y)
    };
    let gs_residuals = [resid(&m_l, 0), resid(&m_b, region_b.0 - 1), resid(&m_r, j)];
    Ok(TruncatedPieces {
        q,
        m_l,
        m_r,
        m_b,
        m_b_first: region_b.0,
        gs_residuals,
        truncation_errors: diagnostics.then_some(trunc),
        hermiticity_defects: defects,
    })
}

/// Spectral projector of a Hermitian matrix onto `|λ| ≤ threshold`.
pub fn low_projector<T: Scalar>(m: &Mat<T>, threshold: f64) -> Result<Mat<T>> {
    if !(threshold > 0.0) {
        return Err(Error::BadThreshold(threshold));
    }
    let (vals, vecs) = linalg::hermitian_eigen(linalg::hermitian_part(m.as_ref()).as_ref())?;
    let keep: Vec<usize> = (0..vals.len()).filter(|&k| vals[k].abs() <= threshold).collect();
    let sel = Mat::from_fn(vecs.nrows(), keep.len(), |i, c| vecs[(i, keep[c])]);
    Ok(linalg::mul_adj(sel.as_ref(), sel.as_ref()))
}

#[derive(Debug, Clone)]
pub struct SideProjectors<T: Scalar> {
    pub o_l: Mat<T>,
    pub o_r: Mat<T>,
    pub threshold: f64,
}

pub fn build_side_projectors<T: Scalar>(m_l: &Mat<T>, m_r: &Mat<T>, threshold: f64) -> Result<SideProjectors<T>> {
    Ok(SideProjectors { o_l: low_projector(m_l, threshold)?, o_r: low_projector(m_r, threshold)?, threshold })
}

/// `J²/ΔE · e^{-l/(6ξ)}`.
pub fn side_threshold(j_bound: f64, gap: f64, l: usize, xi: f64) -> f64 {
    j_bound * j_bound / gap * (-(l as f64) / (6.0 * xi)).exp()
}

/// Dense `M_L ⊗ 1`, `1 ⊗ M_R` and `M_B` pieces on the whole chain.
fn full_boundary<T: Scalar>(m_b: &Mat<T>, m_b_first: usize, n: usize, d: usize) -> Mat<T> {
    linalg::embed(m_b.as_ref(), m_b_first - 1, n, d)
}

/// Time average of `e^{iMt}e^{-iKt}` with the Gaussian weight, where
/// `K = M_L + M_R` and `M = K + M_B`, evaluated in closed form from the
/// eigendecompositions of `M` and `K`:
/// `P_B = V_M (C ∘ G) V_K†`, `C = V_M† V_K`, `G_mk = e^{-q(μ_m−κ_k)²/2ΔE²}`.
pub fn p_b_closed_form<T: Scalar>(
    m_l: &Mat<T>,
    m_r: &Mat<T>,
    m_b: &Mat<T>,
    m_b_first: usize,
    n: usize,
    d: usize,
    q: f64,
    gap: f64,
) -> Result<Mat<T>> {
    if !(q > 0.0) {
        return Err(Error::InvalidParameter(format!("filter width q = {q}")));
    }
    let j = linalg::sites_of(m_l.nrows(), d).ok_or(Error::DimensionMismatch { expected: 0, got: m_l.nrows() })?;
    let (lam, vl) = linalg::hermitian_eigen(m_l.as_ref())?;
    let (rho, vr) = linalg::hermitian_eigen(m_r.as_ref())?;
    let kappa: Vec<f64> = lam.iter().flat_map(|a| rho.iter().map(move |b| a + b)).collect();
    let mut m = full_boundary(m_b, m_b_first, n, d);
    m += linalg::embed(m_l.as_ref(), 0, n, d);
    m += linalg::embed(m_r.as_ref(), j, n, d);
    let (mu, vm) = linalg::hermitian_eigen(m.as_ref())?;
    drop(m);
    // V_K = V_L ⊗ V_R is applied factor by factor.
    let mut c = linalg::mul_kron(linalg::adjoint(vm.as_ref()).as_ref(), vl.as_ref(), vr.as_ref());
    for k in 0..c.ncols() {
        for i in 0..c.nrows() {
            c[(i, k)] = c[(i, k)].scale(gaussian_weight(mu[i] - kappa[k], q, gap));
        }
    }
    let vc = linalg::mul(vm.as_ref(), c.as_ref());
    drop(c);
    Ok(linalg::mul_kron(vc.as_ref(), linalg::adjoint(vl.as_ref()).as_ref(), linalg::adjoint(vr.as_ref()).as_ref()))
}

/// The same average by integrating `dW/dt = i W M_B(t)` with RK45 and
/// summing over the Gauss–Hermite nodes. Independent of the eigenvectors
/// of `M`; cost grows with the number of nodes, so this is an oracle for
/// small chains.
pub fn p_b_by_propagator<T: Scalar>(
    m_l: &Mat<T>,
    m_r: &Mat<T>,
    m_b: &Mat<T>,
    m_b_first: usize,
    n: usize,
    d: usize,
    q: f64,
    gap: f64,
    opts: Rk45Options,
) -> Result<Mat<c64>> {
    let (lam, vl) = linalg::hermitian_eigen(linalg::to_complex(m_l.as_ref()).as_ref())?;
    let (rho, vr) = linalg::hermitian_eigen(linalg::to_complex(m_r.as_ref()).as_ref())?;
    let kappa: Vec<f64> = lam.iter().flat_map(|a| rho.iter().map(move |b| a + b)).collect();
    let vk = linalg::kron(vl.as_ref(), vr.as_ref());
    let mb = linalg::to_complex(full_boundary(m_b, m_b_first, n, d).as_ref());
    let b_k = linalg::adj_mul(vk.as_ref(), linalg::mul(mb.as_ref(), vk.as_ref()).as_ref());
    let nodes = gaussian_time_nodes(q, gap, DEFAULT_ORDER);
    let times: Vec<f64> = nodes.iter().map(|p| p.0).collect();
    let ws = interaction_propagators(&kappa, &b_k, &times, opts)?;
    let mut avg = Mat::<c64>::zeros(kappa.len(), kappa.len());
    for ((_, w), wt) in nodes.iter().zip(&ws) {
        avg += linalg::scaled(wt.as_ref(), *w);
    }
    let back = linalg::mul(vk.as_ref(), avg.as_ref());
    Ok(linalg::mul_adj(back.as_ref(), vk.as_ref()))
}

/// Operator norm, and the factor applied to bring it back to one when it
/// exceeds one by at most [`NORM_SLACK`].
pub fn normalize_contraction<T: Scalar>(b: &mut Mat<T>) -> Result<(f64, f64)> {
    let nrm = dense_norm(b);
    let scale = contraction_scale(nrm)?;
    if scale != 1.0 {
        *b = linalg::scaled(b.as_ref(), scale);
    }
    Ok((nrm, scale))
}

fn contraction_scale(nrm: f64) -> Result<f64> {
    if nrm > 1.0 + NORM_SLACK {
        return Err(Error::NormTooLarge(nrm));
    }
    Ok(if nrm > 1.0 { 1.0 / nrm } else { 1.0 })
}

#[derive(Debug, Clone)]
pub struct AgspTriple<T: Scalar> {
    pub j: usize,
    pub l: usize,
    pub q: f64,
    pub threshold: f64,
    /// `O_L` on sites `1..=j`.
    pub o_l: Mat<T>,
    /// `O_R` on sites `j+1..=n`.
    pub o_r: Mat<T>,
    /// `O_B` on `window`.
    pub o_b: Mat<T>,
    pub window: (usize, usize),
    /// `O_B† O_B` on `window`.
    pub o_b_plus: Mat<T>,
    /// `‖O_B O_L O_R − P0‖`.
    pub epsilon: f64,
    /// `‖O_B⁺ O_L O_R − P0‖`.
    pub epsilon_plus: f64,
    /// `Re⟨Ψ0|O_B|Ψ0⟩`.
    pub ob_gs: f64,
    pub ob_plus_gs: f64,
    /// `Re⟨Ψ0|O_B O_L O_R|Ψ0⟩`.
    pub obq_gs: f64,
    /// `⟨Ψ0|O_L O_R|Ψ0⟩`.
    pub q_gs: f64,
    /// `‖(O_L−1)Ψ0‖`, `‖(O_R−1)Ψ0‖`.
    pub side_defects: [f64; 2],
    pub ob_norm: f64,
    pub ob_scale: f64,
    pub pieces: TruncatedPieces<T>,
}

/// `‖B Q − P0‖` and related expectations for `B` on `window` and
/// `Q = O_L ⊗ O_R`, all matrix-free.
pub struct Measurement {
    pub epsilon: f64,
    pub b_gs: f64,
    pub bq_gs: f64,
    pub q_gs: f64,
}

pub fn measure<T: Scalar>(
    psi: &[T],
    d: usize,
    b: &Mat<T>,
    window: (usize, usize),
    o_l: &Mat<T>,
    o_r: &Mat<T>,
) -> Result<Measurement> {
    let j = linalg::sites_of(o_l.nrows(), d).ok_or(Error::DimensionMismatch { expected: 0, got: o_l.nrows() })?;
    let dim = psi.len();
    if o_l.nrows() * o_r.nrows() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: o_l.nrows() * o_r.nrows() });
    }
    let bf = window.0 - 1;
    let b_adj = linalg::adjoint(b.as_ref());
    let apply_q = |x: &[T]| {
        let mut y = vec![T::zero(); dim];
        let mut z = vec![T::zero(); dim];
        linalg::apply_local(o_l.as_ref(), 0, d, x, &mut y, false);
        linalg::apply_local(o_r.as_ref(), j, d, &y, &mut z, false);
        z
    };
    let apply_b = |m: &Mat<T>, x: &[T]| {
        let mut y = vec![T::zero(); dim];
        linalg::apply_local(m.as_ref(), bf, d, x, &mut y, false);
        y
    };
    let minus_p0 = |mut y: Vec<T>, x: &[T]| {
        let c = linalg::dot(psi, x);
        for (yi, pi) in y.iter_mut().zip(psi) {
            *yi -= *pi * c;
        }
        y
    };
    let epsilon = linalg::operator_norm_by::<T>(
        dim,
        |x| minus_p0(apply_b(b, &apply_q(x)), x),
        |x| minus_p0(apply_q(&apply_b(&b_adj, x)), x),
    );
    let qpsi = apply_q(psi);
    Ok(Measurement {
        epsilon,
        b_gs: linalg::dot(psi, &apply_b(b, psi)).re(),
        bq_gs: linalg::dot(psi, &apply_b(b, &qpsi)).re(),
        q_gs: linalg::dot(psi, &qpsi).re(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgspParams {
    /// Velocity setting the filter width `q = (l/3)ΔE/(2v)`.
    pub v: f64,
    /// Length setting the side-projector threshold `J²/ΔE·e^{-l/(6ξ)}`.
    pub xi: f64,
    /// Also measure the truncation errors `‖M_X − H̃_X‖`.
    pub diagnostics: bool,
}

/// Full construction at cut `j` and half-width `l`.
pub fn build_agsp<T: Scalar>(
    h: &Hamiltonian1D,
    sd: &SpectralData<T>,
    j: usize,
    l: usize,
    params: &AgspParams,
) -> Result<AgspTriple<T>> {
    let (v, xi) = (params.v, params.xi);
    if !(xi > 0.0) {
        return Err(Error::InvalidParameter(format!("correlation length {xi}")));
    }
    let psi = sd.ground_state();
    let split = split_hamiltonian(h, &psi, j, l)?;
    let reg = split.regions;
    let (n, d) = (h.n_sites, h.local_dim);
    let pieces = build_truncated_pieces(h, sd, &split, v, params.diagnostics)?;
    let threshold = side_threshold(h.j_bound, sd.gap, l, xi);
    let sides = build_side_projectors(&pieces.m_l, &pieces.m_r, threshold)?;
    let p_b = p_b_closed_form(&pieces.m_l, &pieces.m_r, &pieces.m_b, pieces.m_b_first, n, d, pieces.q, sd.gap)?;
    let window = reg.window();
    let mut o_b = linalg::conditional_block(p_b.as_ref(), window.0 - 1, window.1 - window.0 + 1, d);
    drop(p_b);
    // ‖O_B‖² is read off O_B†O_B, which is needed anyway and halves the
    // Lanczos matvecs.
    let mut o_b_plus = linalg::adj_mul(o_b.as_ref(), o_b.as_ref());
    let ob_norm = linalg::lanczos_max_eig::<T>(o_b_plus.nrows(), |x| linalg::matvec(o_b_plus.as_ref(), x)).max(0.0).sqrt();
    let ob_scale = contraction_scale(ob_norm)?;
    if ob_scale != 1.0 {
        o_b = linalg::scaled(o_b.as_ref(), ob_scale);
        o_b_plus = linalg::scaled(o_b_plus.as_ref(), ob_scale * ob_scale);
    }
    let m = measure(&psi, d, &o_b, window, &sides.o_l, &sides.o_r)?;
    let mp = measure(&psi, d, &o_b_plus, window, &sides.o_l, &sides.o_r)?;
    let defect = |o: &Mat<T>, first: usize| {
        let mut y = vec![T::zero(); psi.len()];
        linalg::apply_local(o.as_ref(), first, d, &psi, &mut y, false);
        let diff: Vec<T> = y.iter().zip(&psi).map(|(a, b)| *a - *b).collect();
        linalg::norm(&diff)
    };
    Ok(AgspTriple {
        j,
        l,
        q: pieces.q,
        threshold,
        side_defects: [defect(&sides.o_l, 0), defect(&sides.o_r, j)],
        o_l: sides.o_l,
        o_r: sides.o_r,
        o_b,
        window,
        o_b_plus,
        epsilon: m.epsilon,
        epsilon_plus: mp.epsilon,
        ob_gs: m.b_gs,
        ob_plus_gs: mp.b_gs,
        obq_gs: m.bq_gs,
        q_gs: m.q_gs,
        ob_norm,
        ob_scale,
        pieces,
    })
}

/// `√(1−(1−ε)²) + 3ε + ε²`.
pub fn positivization_bound(eps: f64) -> f64 {
    (1.0 - (1.0 - eps).powi(2)).max(0.0).sqrt() + 3.0 * eps + eps * eps
}

impl<T: Scalar> AgspTriple<T> {
    /// Exact consequences of `‖O_B Q − P0‖ = ε` with `‖O_B‖ ≤ 1`.
    pub fn consistency(&self) -> Vec<InequalityCheck> {
        let e = self.epsilon;
        vec![
            InequalityCheck::new("overlap_bq", self.obq_gs - (1.0 - e)),
            InequalityCheck::new("overlap_b", self.ob_gs - (1.0 - 2.0 * e)),
            InequalityCheck::new("overlap_q", self.q_gs - (1.0 - 2.0 * e)),
            InequalityCheck::new("positivization", positivization_bound(e) - self.epsilon_plus),
            InequalityCheck::new("contraction", 1.0 - self.ob_norm * self.ob_scale),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositivizationReport {
    pub epsilon: f64,
    /// `‖B†B Q − P‖`.
    pub lhs: f64,
    pub bound: f64,
    /// Factor applied to `B` to make it a contraction.
    pub scale: f64,
}

impl PositivizationReport {
    pub fn slack(&self) -> f64 {
        self.bound - self.lhs
    }
}

/// `B†B` together with the measured and bounded errors for a projector
/// `Q` and the target projector `P`.
pub fn positivize<T: Scalar>(b: &Mat<T>, q: &Mat<T>, p: &Mat<T>) -> Result<(Mat<T>, PositivizationReport)> {
    let qq = linalg::mul(q.as_ref(), q.as_ref());
    let dev = linalg::max_abs_diff(qq.as_ref(), q.as_ref()).max(linalg::hermiticity_defect(q.as_ref()));
    if dev > PROJECTOR_TOL {
        return Err(Error::NotProjector(dev));
    }
    let mut b = b.clone();
    let (_, scale) = normalize_contraction(&mut b)?;
    let bq = linalg::mul(b.as_ref(), q.as_ref());
    let epsilon = linalg::op_norm((&bq - p).as_ref());
    let plus = linalg::adj_mul(b.as_ref(), b.as_ref());
    let lhs = linalg::op_norm((&linalg::mul(plus.as_ref(), q.as_ref()) - p).as_ref());
    Ok((plus, PositivizationReport { epsilon, lhs, bound: positivization_bound(epsilon), scale }))
}

pub const SWEEP_HEADER: [&str; 9] = ["j", "l", "q", "epsilon", "epsilon_plus", "ob_gs", "ml_psi", "mb_psi", "mr_psi"];

pub fn sweep_row<T: Scalar>(t: &AgspTriple<T>) -> Vec<String> {
    let g = t.pieces.gs_residuals;
    vec![
        t.j.to_string(),
        t.l.to_string(),
        fmt_f64(t.q),
        fmt_f64(t.epsilon),
        fmt_f64(t.epsilon_plus),
        fmt_f64(t.ob_gs),
        fmt_f64(g[0]),
        fmt_f64(g[1]),
        fmt_f64(g[2]),
    ]
}

pub fn write_sweep_csv<T: Scalar>(triples: &[AgspTriple<T>], meta: &RunMeta, w: impl Write) -> Result<()> {
    let rows: Vec<Vec<String>> = triples.iter().map(sweep_row).collect();
    write_table(w, &SWEEP_HEADER, &rows, meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{pauli_z, tfim};
    use crate::spectral::{diagonalize, Mode};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const PARAMS: AgspParams = AgspParams { v: 2.0, xi: 1.0, diagnostics: false };

    fn diag<T: Scalar>(v: &[f64]) -> Mat<T> {
        Mat::from_fn(v.len(), v.len(), |i, j| if i == j { T::from_re(v[i]) } else { T::zero() })
    }

    #[test]
    fn regions_follow_rounding() {
        let r = Regions::new(12, 6, 6).unwrap();
        assert_eq!((r.r1, r.r2), (2, 4));
        assert_eq!(r.bonds_left(), vec![0, 1, 2, 3]);
        assert_eq!(r.bonds_boundary(), vec![4, 5, 6, 7]);
        assert_eq!(r.bonds_right(), vec![8, 9, 10]);
        assert_eq!(r.truncation_left(), (2, 6));
        assert_eq!(r.truncation_boundary(), (2, 11));
        assert_eq!(r.truncation_right(), (7, 11));
        assert_eq!(r.window(), (1, 12));
        let r = Regions::new(12, 6, 3).unwrap();
        assert_eq!((r.r1, r.r2, r.window()), (1, 2, (4, 9)));
        let r = Regions::new(12, 6, 9).unwrap();
        assert_eq!((r.r1, r.r2, r.window()), (3, 6, (1, 12)));
        assert!(Regions::new(12, 6, 12).is_err());
        assert!(Regions::new(12, 0, 3).is_err());
        assert!(Regions::new(6, 1, 3).is_err());
    }

    #[test]
    fn split_partitions_and_centres() {
        let h = tfim(12, 2.0);
        let sd = diagonalize::<f64>(&h, Mode::LowestM(2)).unwrap();
        let psi = sd.ground_state();
        let s = split_hamiltonian(&h, &psi, 6, 6).unwrap();
        let mut all: Vec<usize> = (0..3).flat_map(|p| s.bonds(p)).collect();
        all.sort_unstable();
        assert_eq!(all, (0..11).collect::<Vec<_>>());
        let terms = h.terms_as::<f64>();
        let mut y = vec![0.0; psi.len()];
        for p in 0..3 {
            h.apply_terms(&terms, &s.bonds(p), &psi, &mut y);
            let centred = linalg::dot(&psi, &y) - s.shifts[p];
            assert!(centred.abs() < 1e-10);
        }
        assert!((s.shifts.iter().sum::<f64>() - sd.e0).abs() < 1e-9);
        assert!(matches!(split_hamiltonian(&h, &psi, 6, 12), Err(Error::WindowOutOfRange { .. })));
    }

    /// Ising couplings with a longitudinal field: all terms commute and the
    /// ground state is the all-up product state.
    fn commuting_chain(n: usize) -> Hamiltonian1D {
        let z = pauli_z();
        let id = Mat::<c64>::identity(2, 2);
        let zz = linalg::kron(z.as_ref(), z.as_ref());
        let zi = linalg::kron(z.as_ref(), id.as_ref());
        let iz = linalg::kron(id.as_ref(), z.as_ref());
        let terms = (0..n - 1)
            .map(|b| {
                let fl = if b == 0 { 1.0 } else { 0.5 };
                let fr = if b == n - 2 { 1.0 } else { 0.5 };
                Mat::from_fn(4, 4, |i, k| -zz[(i, k)] - zi[(i, k)] * fl * 0.7 - iz[(i, k)] * fr * 0.7)
            })
            .collect();
        Hamiltonian1D::from_terms(n, 2, terms).unwrap()
    }

    #[test]
    fn commuting_terms_are_fixed_by_the_filter() {
        let h = commuting_chain(6);
        let sd = diagonalize::<f64>(&h, Mode::Full).unwrap();
        let psi = sd.ground_state();
        let split = split_hamiltonian(&h, &psi, 3, 3).unwrap();
        let p = build_truncated_pieces(&h, &sd, &split, 2.0, true).unwrap();
        for x in 0..3 {
            assert!(p.gs_residuals[x] < 1e-10);
            assert!(p.truncation_errors.unwrap()[x] < 1e-10);
        }
        let expect_l = block_sum::<f64>(&h, &split.bonds(0), 0, 3, split.shifts[0]);
        assert!(linalg::max_abs_diff(p.m_l.as_ref(), expect_l.as_ref()) < 1e-10);
    }

    #[test]
    fn pieces_from_factors_match_dense_pieces() {
        let h = tfim(8, 1.5);
        let sd = diagonalize::<f64>(&h, Mode::Full).unwrap();
        for (j, l) in [(4, 2), (4, 4), (3, 6)] {
            let split = split_hamiltonian(&h, &sd.ground_state(), j, l).unwrap();
            let dense = build_truncated_pieces(&h, &sd, &split, 2.0, true).unwrap();
            let fast = build_truncated_pieces(&h, &sd, &split, 2.0, false).unwrap();
            for (a, b) in [(&dense.m_l, &fast.m_l), (&dense.m_r, &fast.m_r), (&dense.m_b, &fast.m_b)] {
                assert!(linalg::max_abs_diff(a.as_ref(), b.as_ref()) < 1e-12, "j={j} l={l}");
            }
        }
    }

    #[test]
    fn side_projector_examples() {
        let zero = Mat::<f64>::zeros(4, 4);
        let s = build_side_projectors(&zero, &zero, 0.1).unwrap();
        assert!(linalg::max_abs_diff(s.o_l.as_ref(), Mat::<f64>::identity(4, 4).as_ref()) < 1e-14);
        assert!(matches!(build_side_projectors(&zero, &zero, 0.0), Err(Error::BadThreshold(_))));
        let m = diag::<f64>(&[0.0, 0.5, -2.0, 0.05]);
        let o = low_projector(&m, 0.1).unwrap();
        assert!(linalg::max_abs_diff(o.as_ref(), diag::<f64>(&[1.0, 0.0, 0.0, 1.0]).as_ref()) < 1e-14);
    }

    fn random_blocks(seed: u64, n: usize, j: usize) -> (Mat<c64>, Mat<c64>, Mat<c64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ml = linalg::random_hermitian::<c64>(1 << j, &mut rng);
        let mr = linalg::random_hermitian::<c64>(1 << (n - j), &mut rng);
        let mb = linalg::scaled(linalg::random_hermitian::<c64>(4, &mut rng).as_ref(), 0.5);
        (ml, mr, mb)
    }

    #[test]
    fn p_b_with_zero_boundary_is_identity() {
        let (ml, mr, _) = random_blocks(1, 4, 2);
        let zero = Mat::<c64>::zeros(4, 4);
        let p = p_b_closed_form(&ml, &mr, &zero, 2, 4, 2, 0.7, 0.5).unwrap();
        assert!(linalg::max_abs_diff(p.as_ref(), Mat::<c64>::identity(16, 16).as_ref()) < 1e-12);
    }

    #[test]
    fn p_b_commuting_case_is_spectral_filter_of_boundary() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut rv = |k: usize| (0..k).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect::<Vec<_>>();
        let (ml, mr) = (diag::<c64>(&rv(4)), diag::<c64>(&rv(4)));
        let mb_vals = rv(16);
        let mb = diag::<c64>(&mb_vals);
        let (q, gap) = (0.8, 0.6);
        let expect = diag::<c64>(&mb_vals.iter().map(|&m| gaussian_weight(m, q, gap)).collect::<Vec<_>>());
        let closed = p_b_closed_form(&ml, &mr, &mb, 1, 4, 2, q, gap).unwrap();
        assert!(linalg::max_abs_diff(closed.as_ref(), expect.as_ref()) < 1e-12);
        let ode = p_b_by_propagator(&ml, &mr, &mb, 1, 4, 2, q, gap, Rk45Options::default()).unwrap();
        assert!(linalg::max_abs_diff(ode.as_ref(), expect.as_ref()) < 1e-8);
    }

    #[test]
    fn p_b_routes_agree_on_random_blocks() {
        let (ml, mr, mb) = random_blocks(9, 4, 2);
        let (q, gap) = (0.5, 1.0);
        let closed = p_b_closed_form(&ml, &mr, &mb, 2, 4, 2, q, gap).unwrap();
        let ode = p_b_by_propagator(&ml, &mr, &mb, 2, 4, 2, q, gap, Rk45Options::default()).unwrap();
        let err = linalg::op_norm((&closed - &ode).as_ref());
        assert!(err < 1e-8, "{err:.3e}");
        assert!(linalg::op_norm(closed.as_ref()) <= 1.0 + 1e-12);
    }

    #[test]
    fn p_b_routes_agree_on_tfim_pipeline() {
        let h = tfim(6, 2.0);
        let sd = diagonalize::<f64>(&h, Mode::Full).unwrap();
        let split = split_hamiltonian(&h, &sd.ground_state(), 3, 3).unwrap();
        let p = build_truncated_pieces(&h, &sd, &split, 2.0, false).unwrap();
        let closed = p_b_closed_form(&p.m_l, &p.m_r, &p.m_b, p.m_b_first, 6, 2, p.q, sd.gap).unwrap();
        let ode = p_b_by_propagator(&p.m_l, &p.m_r, &p.m_b, p.m_b_first, 6, 2, p.q, sd.gap, Rk45Options::default())
            .unwrap();
        let err = linalg::op_norm((&linalg::to_complex(closed.as_ref()) - &ode).as_ref());
        assert!(err < 1e-6, "{err:.3e}");
    }

    #[test]
    fn tfim_triple_invariants() {
        let n = 8;
        let h = tfim(n, 2.0);
        let sd = diagonalize::<f64>(&h, Mode::Full).unwrap();
        let t = build_agsp(&h, &sd, 4, 3, &PARAMS).unwrap();
        for c in t.consistency() {
            assert!(c.holds(1e-10), "{} {}", c.name, c.slack);
        }
        // projectors
        for o in [&t.o_l, &t.o_r] {
            let oo = linalg::mul(o.as_ref(), o.as_ref());
            assert!(linalg::max_abs_diff(oo.as_ref(), o.as_ref()) < 1e-10);
            assert!(linalg::hermiticity_defect(o.as_ref()) < 1e-10);
        }
        // supports, checked against random operators on the complement
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let full = |m: &Mat<f64>, first: usize| linalg::embed(m.as_ref(), first, n, 2);
        let comm = |a: &Mat<f64>, b: &Mat<f64>| {
            linalg::op_norm((&linalg::mul(a.as_ref(), b.as_ref()) - &linalg::mul(b.as_ref(), a.as_ref())).as_ref())
        };
        let ol = full(&t.o_l, 0);
        let or = full(&t.o_r, 4);
        let ob = full(&t.o_b, t.window.0 - 1);
        for _ in 0..3 {
            let right = full(&linalg::random_hermitian::<f64>(16, &mut rng), 4);
            let left = full(&linalg::random_hermitian::<f64>(16, &mut rng), 0);
            assert!(comm(&ol, &right) < 1e-10);
            assert!(comm(&or, &left) < 1e-10);
            let outside = full(&linalg::random_hermitian::<f64>(2, &mut rng), 0);
            assert!(comm(&ob, &outside) < 1e-10);
        }
        // the real part of an expectation only sees the Hermitian part
        let psi = sd.ground_state();
        let herm = linalg::hermitian_part(ob.as_ref());
        assert!((linalg::expectation(herm.as_ref(), &psi) - t.ob_gs).abs() < 1e-10);
        // Markov-type bound on the side projector defect
        assert!(t.side_defects[0] <= t.pieces.gs_residuals[0] / t.threshold + 1e-12);
        assert!(t.side_defects[1] <= t.pieces.gs_residuals[2] / t.threshold + 1e-12);
        // dense oracle for ε
        let p0 = sd.ground_projector();
        let dense_eps = linalg::op_norm((&linalg::mul(ob.as_ref(), linalg::mul(ol.as_ref(), or.as_ref()).as_ref()) - &p0).as_ref());
        assert!((dense_eps - t.epsilon).abs() < 1e-9);
    }

    #[test]
    fn trivial_triples() {
        let h = tfim(6, 2.0);
        let sd = diagonalize::<f64>(&h, Mode::Full).unwrap();
        let psi = sd.ground_state();
        let id8 = Mat::<f64>::identity(8, 8);
        let m = measure(&psi, 2, &Mat::<f64>::identity(4, 4), (3, 4), &id8, &id8).unwrap();
        assert!((m.epsilon - 1.0).abs() < 1e-10);
        // product ground state with all three operators equal to its projector pieces
        let mut prod = vec![0.0; 64];
        prod[0] = 1.0;
        let e0 = diag::<f64>(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let m = measure(&prod, 2, &diag::<f64>(&[1.0, 0.0, 0.0, 0.0]), (3, 4), &e0, &e0).unwrap();
        assert!(m.epsilon < 1e-12);
    }

    #[test]
    fn positivization_two_by_two_example() {
        for eps in [0.01f64, 0.1] {
            let s = (1.0 - (1.0 - eps) * (1.0 - eps)).sqrt();
            let b = Mat::from_fn(2, 2, |i, j| match (i, j) {
                (0, 0) => 1.0 - eps,
                (0, 1) => s,
                _ => 0.0,
            });
            let p = diag::<f64>(&[1.0, 0.0]);
            let (plus, rep) = positivize(&b, &p, &p).unwrap();
            assert!((rep.epsilon - eps).abs() < 1e-12);
            assert!(rep.lhs > 3.0 * eps);
            assert!(rep.slack() >= -1e-10);
            assert!(linalg::hermiticity_defect(plus.as_ref()) < 1e-15);
        }
        let p = diag::<f64>(&[1.0, 0.0]);
        let (_, rep) = positivize(&p, &p, &p).unwrap();
        assert_eq!((rep.epsilon, rep.lhs), (0.0, 0.0));
        assert!(matches!(positivize(&p, &diag::<f64>(&[0.5, 0.0]), &p), Err(Error::NotProjector(_))));
        assert!(matches!(positivize(&linalg::scaled(p.as_ref(), 1.1), &p, &p), Err(Error::NormTooLarge(_))));
    }

    #[test]
    fn sweep_csv_header() {
        let h = tfim(6, 2.0);
        let sd = diagonalize::<f64>(&h, Mode::Full).unwrap();
        let t = build_agsp(&h, &sd, 3, 2, &PARAMS).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&[t], &RunMeta::default(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("j,l,q,epsilon,epsilon_plus,ob_gs,ml_psi,mb_psi,mr_psi,config_hash,version\n3,2,"));
    }

    /// Random contraction `B` and random projectors `Q ≥ P` of rank one.
    pub(crate) fn random_instance(seed: u64, dim: usize) -> (Mat<c64>, Mat<c64>, Mat<c64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Mat::from_fn(dim, dim, |_, _| c64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let (_, u) = linalg::hermitian_eigen(linalg::hermitian_part(g.as_ref()).as_ref()).unwrap();
        let rank = 1 + rng.random_range(0..dim - 1);
        let qd = Mat::from_fn(dim, rank, |i, c| u[(i, c)]);
        let q = linalg::mul_adj(qd.as_ref(), qd.as_ref());
        let p = linalg::outer(u.col_as_slice(0), u.col_as_slice(0));
        let noise = linalg::scaled(linalg::random_hermitian::<c64>(dim, &mut rng).as_ref(), rng.random::<f64>() * 0.3);
        let mut b = &p + &noise;
        let nrm = linalg::op_norm(b.as_ref());
        if nrm > 1.0 {
            b = linalg::scaled(b.as_ref(), 1.0 / nrm);
        }
        (b, q, p)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]

        #[test]
        fn positivization_bound_on_random_contractions(seed in any::<u64>(), dim in 2usize..8) {
            let (b, q, p) = random_instance(seed, dim);
            let (_, rep) = positivize(&b, &q, &p).unwrap();
            prop_assert!(rep.slack() >= -1e-10, "{rep:?}");
        }
    }
}
