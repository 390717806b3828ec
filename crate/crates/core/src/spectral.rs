//! Exact spectra, real-time evolution and Gaussian energy filters.
//!
//! Energies are shifted so the ground state sits at zero. All filters are
//! evaluated in the eigenbasis: a Gaussian time average with weight
//! `exp(-(tΔE)²/2q)` multiplies the matrix element between levels `m`, `n`
//! by `exp(-q(E_m-E_n)²/(2ΔE²))`.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use faer::Mat;

use crate::error::{Error, Result};
use crate::lattice::Hamiltonian1D;
use crate::linalg::{self, c64, Scalar};

/// Largest dimension handled by full diagonalization.
pub const FULL_BUDGET: usize = 1 << 14;
/// Relative gap below which the ground state counts as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-8;
const RESIDUAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Full,
    LowestM(usize),
}

#[derive(Debug, Clone)]
pub struct SpectralData<T: Scalar> {
    /// Ascending, with `energies[0] == 0`.
    pub energies: Vec<f64>,
    /// Unshifted ground energy.
    pub e0: f64,
    /// Eigenvectors as columns, matching `energies`.
    pub eigenvectors: Mat<T>,
    pub gap: f64,
    pub dim: usize,
}

impl<T: Scalar> SpectralData<T> {
    pub fn is_full(&self) -> bool {
        self.energies.len() == self.dim
    }

    pub fn require_full(&self) -> Result<()> {
        if self.is_full() {
            Ok(())
        } else {
            Err(Error::PartialSpectrum { have: self.energies.len(), dim: self.dim })
        }
    }

    pub fn ground_state(&self) -> Vec<T> {
        self.eigenvectors.col_as_slice(0).to_vec()
    }

    pub fn ground_projector(&self) -> Mat<T> {
        let g = self.ground_state();
        linalg::outer(&g, &g)
    }

    /// `V† A V`.
    pub fn to_eigenbasis(&self, a: &Mat<T>) -> Result<Mat<T>> {
        self.require_full()?;
        check_dim(self.dim, a.nrows())?;
        let av = linalg::mul(a.as_ref(), self.eigenvectors.as_ref());
        Ok(linalg::adj_mul(self.eigenvectors.as_ref(), av.as_ref()))
    }

    /// `V B V†`.
    pub fn from_eigenbasis(&self, b: &Mat<T>) -> Result<Mat<T>> {
        self.require_full()?;
        check_dim(self.dim, b.nrows())?;
        let vb = linalg::mul(self.eigenvectors.as_ref(), b.as_ref());
        Ok(linalg::mul_adj(vb.as_ref(), self.eigenvectors.as_ref()))
    }

    /// Gaussian suppression factor between levels `m` and `n`.
    pub fn filter_weight(&self, m: usize, n: usize, q: f64) -> f64 {
        gaussian_weight(self.energies[m] - self.energies[n], q, self.gap)
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// `exp(-q ω²/(2ΔE²))`; an infinite gap (single level) leaves only `ω = 0`.
pub fn gaussian_weight(omega: f64, q: f64, gap: f64) -> f64 {
    if omega == 0.0 {
        return 1.0;
    }
    (-q * omega * omega / (2.0 * gap * gap)).exp()
}

/// Diagonalizes a chain Hamiltonian. Real scalars require a real model.
pub fn diagonalize<T: Scalar>(h: &Hamiltonian1D, mode: Mode) -> Result<SpectralData<T>> {
    diagonalize_with_budget(h, mode, FULL_BUDGET)
}

pub fn diagonalize_with_budget<T: Scalar>(h: &Hamiltonian1D, mode: Mode, budget: usize) -> Result<SpectralData<T>> {
    if !T::IS_COMPLEX && !h.is_real() {
        return Err(Error::Inconsistent("complex Hamiltonian requested with real amplitudes".into()));
    }
    let dim = h.dim();
    let scale = h.j_bound;
    match mode {
        Mode::Full => {
            if dim > budget {
                return Err(Error::BudgetExceeded { dim, budget });
            }
            diagonalize_matrix(h.dense::<T>(), scale)
        }
        Mode::LowestM(m) => {
            let m = m.max(2).min(dim);
            let terms = h.terms_as::<T>();
            let bonds: Vec<usize> = (0..h.n_sites - 1).collect();
            let hnorm = scale * (h.n_sites - 1) as f64;
            let apply = |x: &[T]| {
                let mut y = vec![T::zero(); x.len()];
                h.apply_terms(&terms, &bonds, x, &mut y);
                y
            };
            let (vals, vecs) = linalg::lanczos_lowest(dim, m, RESIDUAL_TOL * hnorm.max(1e-300), 800, 17, apply)?;
            let mut v = Mat::<T>::zeros(dim, m);
            for (c, vec) in vecs.iter().enumerate() {
                v.col_as_slice_mut(c).copy_from_slice(vec);
            }
            finish(vals, v, scale, dim)
        }
    }
}

/// Full diagonalization of an explicit Hermitian matrix. `scale` sets the
/// degeneracy tolerance (`gap ≤ 1e-8·scale` is rejected).
pub fn diagonalize_matrix<T: Scalar>(h: Mat<T>, scale: f64) -> Result<SpectralData<T>> {
    let dim = h.nrows();
    let (vals, vecs) = linalg::hermitian_eigen(h.as_ref())?;
    let hnorm = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let hv = linalg::mul(h.as_ref(), vecs.as_ref());
    let mut worst = 0.0f64;
    for c in 0..dim {
        let r: f64 = (0..dim).map(|i| (hv[(i, c)] - vecs[(i, c)].scale(vals[c])).abs2()).sum::<f64>().sqrt();
        worst = worst.max(r);
    }
    if worst > RESIDUAL_TOL * hnorm.max(1e-300) {
        return Err(Error::Inconsistent(format!("eigen residual {worst:.3e}")));
    }
    finish(vals, vecs, scale, dim)
}

fn finish<T: Scalar>(vals: Vec<f64>, vecs: Mat<T>, scale: f64, dim: usize) -> Result<SpectralData<T>> {
    let e0 = vals[0];
    let gap = if vals.len() > 1 { vals[1] - vals[0] } else { f64::INFINITY };
    let tol = DEGENERACY_TOL * scale.max(f64::MIN_POSITIVE);
    if gap <= tol {
        return Err(Error::DegenerateGroundState { gap, tol });
    }
    Ok(SpectralData { energies: vals.iter().map(|v| v - e0).collect(), e0, eigenvectors: vecs, gap, dim })
}

/// `e^{iHt} A e^{-iHt}` through the eigenbasis.
pub fn evolve<T: Scalar>(sd: &SpectralData<T>, a: &Mat<T>, t: f64) -> Result<Mat<c64>> {
    let b = linalg::to_complex(sd.to_eigenbasis(a)?.as_ref());
    let e = &sd.energies;
    let phased = Mat::from_fn(sd.dim, sd.dim, |m, n| {
        let w = (e[m] - e[n]) * t;
        b[(m, n)] * c64::new(w.cos(), w.sin())
    });
    let v = linalg::to_complex(sd.eigenvectors.as_ref());
    let vb = linalg::mul(v.as_ref(), phased.as_ref());
    Ok(linalg::mul_adj(vb.as_ref(), v.as_ref()))
}

/// Filter of an operator already written in the eigenbasis.
pub fn filter_in_eigenbasis<T: Scalar>(sd: &SpectralData<T>, b: &Mat<T>, q: f64) -> Mat<T> {
    let mut out = b.clone();
    let c = -q / (2.0 * sd.gap * sd.gap);
    for n in 0..out.ncols() {
        let en = sd.energies[n];
        for (x, em) in out.col_as_slice_mut(n).iter_mut().zip(&sd.energies) {
            let w = em - en;
            // Weights below e^-700 would only produce subnormals, which are
            // slow and far below any tolerance used here.
            let e = c * w * w;
            *x = if e < -700.0 { T::zero() } else { x.scale(e.exp()) };
        }
    }
    out
}

/// `(ΔE/√(2πq)) ∫ dt A(t) e^{-(tΔE)²/2q}`.
pub fn gaussian_filter_operator<T: Scalar>(sd: &SpectralData<T>, a: &Mat<T>, q: f64) -> Result<Mat<T>> {
    if !(q > 0.0) {
        return Err(Error::InvalidParameter(format!("filter width q = {q}")));
    }
    let b = sd.to_eigenbasis(a)?;
    sd.from_eigenbasis(&filter_in_eigenbasis(sd, &b, q))
}

/// `P_q`, with eigenvalues `exp(-q E_n²/(2ΔE²))`.
pub fn gaussian_filter_projector<T: Scalar>(sd: &SpectralData<T>, q: f64) -> Result<Mat<T>> {
    if !(q > 0.0) {
        return Err(Error::InvalidParameter(format!("filter width q = {q}")));
    }
    sd.require_full()?;
    let d = Mat::from_fn(sd.dim, sd.dim, |m, n| {
        if m == n {
            T::from_re(gaussian_weight(sd.energies[m], q, sd.gap))
        } else {
            T::zero()
        }
    });
    sd.from_eigenbasis(&d)
}

/// `‖P_q − P0‖` from the spectrum: the largest weight among excited levels.
pub fn projector_filter_error<T: Scalar>(sd: &SpectralData<T>, q: f64) -> f64 {
    sd.energies.iter().skip(1).map(|&e| gaussian_weight(e, q, sd.gap)).fold(0.0, f64::max)
}

const CACHE_MAGIC: &[u8; 4] = b"ALSD";
const CACHE_VERSION: u32 = 1;

/// Path of the cached decomposition of `h` inside `dir`.
pub fn cache_path(dir: &Path, h: &Hamiltonian1D) -> PathBuf {
    dir.join(format!("{}.alsd", h.content_hash()))
}

/// Binary container: magic, version, then `dim, n_sites, local_dim,
/// levels` as u64, `e0`, the energies, and the eigenvectors as row-major
/// complex doubles.
pub fn write_cache<T: Scalar>(sd: &SpectralData<T>, h: &Hamiltonian1D, mut w: impl Write) -> Result<()> {
    w.write_all(CACHE_MAGIC)?;
    w.write_all(&CACHE_VERSION.to_le_bytes())?;
    for v in [sd.dim, h.n_sites, h.local_dim, sd.energies.len()] {
        w.write_all(&(v as u64).to_le_bytes())?;
    }
    w.write_all(&sd.e0.to_le_bytes())?;
    for e in &sd.energies {
        w.write_all(&e.to_le_bytes())?;
    }
    for i in 0..sd.dim {
        for j in 0..sd.energies.len() {
            let z = sd.eigenvectors[(i, j)].to_c64();
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_cache<T: Scalar>(h: &Hamiltonian1D, mut r: impl Read) -> Result<SpectralData<T>> {
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    if &b4 != CACHE_MAGIC {
        return Err(Error::Format("not a spectral cache".into()));
    }
    r.read_exact(&mut b4)?;
    if u32::from_le_bytes(b4) != CACHE_VERSION {
        return Err(Error::Format("unsupported cache version".into()));
    }
    let mut b8 = [0u8; 8];
    let mut next_u64 = |r: &mut dyn Read| -> Result<u64> {
        r.read_exact(&mut b8)?;
        Ok(u64::from_le_bytes(b8))
    };
    let dim = next_u64(&mut r)? as usize;
    let n = next_u64(&mut r)? as usize;
    let d = next_u64(&mut r)? as usize;
    let levels = next_u64(&mut r)? as usize;
    if dim != h.dim() || n != h.n_sites || d != h.local_dim {
        return Err(Error::Format("cache header does not match the model".into()));
    }
    let mut f = [0u8; 8];
    let mut next_f64 = |r: &mut dyn Read| -> Result<f64> {
        r.read_exact(&mut f)?;
        Ok(f64::from_le_bytes(f))
    };
    let e0 = next_f64(&mut r)?;
    let energies = (0..levels).map(|_| next_f64(&mut r)).collect::<Result<Vec<_>>>()?;
    let mut v = Mat::<T>::zeros(dim, levels);
    for i in 0..dim {
        for j in 0..levels {
            let re = next_f64(&mut r)?;
            let im = next_f64(&mut r)?;
            v[(i, j)] = T::from_c64(c64::new(re, im));
        }
    }
    let gap = if levels > 1 { energies[1] - energies[0] } else { f64::INFINITY };
    Ok(SpectralData { energies, e0, eigenvectors: v, gap, dim })
}

/// Full diagonalization through an on-disk cache keyed by the model hash.
pub fn diagonalize_cached<T: Scalar>(h: &Hamiltonian1D, dir: &Path) -> Result<SpectralData<T>> {
    let path = cache_path(dir, h);
    if let Ok(file) = std::fs::File::open(&path) {
        if let Ok(sd) = read_cache(h, std::io::BufReader::new(file)) {
            return Ok(sd);
        }
    }
    let sd = diagonalize(h, Mode::Full)?;
    std::fs::create_dir_all(dir)?;
    let file = std::fs::File::create(&path)?;
    write_cache(&sd, h, std::io::BufWriter::new(file))?;
    Ok(sd)
}
