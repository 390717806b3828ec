//! Nearest-neighbour Hamiltonians `H = Σ_i H_{i,i+1}` on open chains.
//!
//! Single-site fields are split half/half between the two bonds touching a
//! site; the first and last sites belong to one bond only and put their full
//! field there.

use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};
use std::path::Path;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{self, c64, Scalar};

const HERMITIAN_TOL: f64 = 1e-12;

pub fn pauli_x() -> Mat<c64> {
    Mat::from_fn(2, 2, |i, j| c64::new(if i != j { 1.0 } else { 0.0 }, 0.0))
}

pub fn pauli_y() -> Mat<c64> {
    Mat::from_fn(2, 2, |i, j| match (i, j) {
        (0, 1) => c64::new(0.0, -1.0),
        (1, 0) => c64::new(0.0, 1.0),
        _ => c64::new(0.0, 0.0),
    })
}

pub fn pauli_z() -> Mat<c64> {
    Mat::from_fn(2, 2, |i, j| match (i, j) {
        (0, 0) => c64::new(1.0, 0.0),
        (1, 1) => c64::new(-1.0, 0.0),
        _ => c64::new(0.0, 0.0),
    })
}

fn id(d: usize) -> Mat<c64> {
    Mat::identity(d, d)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian1D {
    pub n_sites: usize,
    pub local_dim: usize,
    /// `terms[i]` acts on sites `i, i+1` (0-based), a `D² × D²` matrix.
    pub terms: Vec<Mat<c64>>,
    pub j_bound: f64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    TransverseIsing,
    Xxz,
    RandomGapped,
    Custom,
}

impl Family {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "transverse_ising" | "tfim" => Ok(Family::TransverseIsing),
            "xxz" => Ok(Family::Xxz),
            "random_gapped" => Ok(Family::RandomGapped),
            "custom" => Ok(Family::Custom),
            other => Err(Error::UnknownFamily(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::TransverseIsing => "transverse_ising",
            Family::Xxz => "xxz",
            Family::RandomGapped => "random_gapped",
            Family::Custom => "custom",
        }
    }

    /// The parameter a coupling sweep varies.
    pub fn primary_param(&self) -> Option<&'static str> {
        match self {
            Family::TransverseIsing => Some("h"),
            Family::Xxz => Some("delta"),
            Family::RandomGapped => Some("h"),
            Family::Custom => None,
        }
    }
}

fn param(family: &Family, params: &BTreeMap<String, f64>, key: &str, default: Option<f64>) -> Result<f64> {
    match (params.get(key), default) {
        (Some(v), _) if v.is_finite() => Ok(*v),
        (Some(v), _) => Err(Error::InvalidParameter(format!("{key} = {v}"))),
        (None, Some(d)) => Ok(d),
        (None, None) => Err(Error::MissingParameter {
            family: family.name().to_string(),
            param: key.to_string(),
        }),
    }
}

/// Field weights `(left, right)` of bond `i` in an `n`-site chain.
fn field_split(i: usize, n: usize) -> (f64, f64) {
    let left = if i == 0 { 1.0 } else { 0.5 };
    let right = if i + 2 == n { 1.0 } else { 0.5 };
    (left, right)
}

fn two_site(a: &Mat<c64>, b: &Mat<c64>) -> Mat<c64> {
    linalg::kron(a.as_ref(), b.as_ref())
}

fn combine(parts: &[(f64, Mat<c64>)]) -> Mat<c64> {
    let dim = parts[0].1.nrows();
    let mut out = Mat::<c64>::zeros(dim, dim);
    for (c, m) in parts {
        out += linalg::scaled(m.as_ref(), *c);
    }
    out
}

fn tfim_term(i: usize, n: usize, j: f64, h_left: f64, h_right: f64) -> Mat<c64> {
    let (x, z, one) = (pauli_x(), pauli_z(), id(2));
    let (wl, wr) = field_split(i, n);
    combine(&[
        (-j, two_site(&z, &z)),
        (-h_left * wl, two_site(&x, &one)),
        (-h_right * wr, two_site(&one, &x)),
    ])
}

fn xxz_term(i: usize, n: usize, jxy: f64, delta: f64, hz: f64) -> Mat<c64> {
    let (x, y, z, one) = (pauli_x(), pauli_y(), pauli_z(), id(2));
    let (wl, wr) = field_split(i, n);
    combine(&[
        (jxy, two_site(&x, &x)),
        (jxy, two_site(&y, &y)),
        (delta, two_site(&z, &z)),
        (-hz * wl, two_site(&z, &one)),
        (-hz * wr, two_site(&one, &z)),
    ])
}

/// Builds a named model family.
///
/// Parameters: `transverse_ising` needs `h` (optional `j`, default 1);
/// `xxz` needs `delta` (optional `jxy` = 1, `hz` = 0); `random_gapped`
/// needs `seed` (optional `w` = 0.1, `h` = 2.5). Custom chains go through
/// [`Hamiltonian1D::from_terms`].
pub fn build_model(family: &str, n_sites: usize, params: &BTreeMap<String, f64>) -> Result<Hamiltonian1D> {
    let fam = Family::parse(family)?;
    if n_sites < 2 {
        return Err(Error::TooFewSites(n_sites));
    }
    let n = n_sites;
    let terms: Vec<Mat<c64>> = match fam {
        Family::TransverseIsing => {
            let h = param(&fam, params, "h", None)?;
            let j = param(&fam, params, "j", Some(1.0))?;
            (0..n - 1).map(|i| tfim_term(i, n, j, h, h)).collect()
        }
        Family::Xxz => {
            let delta = param(&fam, params, "delta", None)?;
            let jxy = param(&fam, params, "jxy", Some(1.0))?;
            let hz = param(&fam, params, "hz", Some(0.0))?;
            (0..n - 1).map(|i| xxz_term(i, n, jxy, delta, hz)).collect()
        }
        Family::RandomGapped => {
            let seed = param(&fam, params, "seed", None)?;
            let w = param(&fam, params, "w", Some(0.1))?;
            let h = param(&fam, params, "h", Some(2.5))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed as u64);
            let fields: Vec<f64> = (0..n).map(|_| h * (1.0 + w * (2.0 * rng.random::<f64>() - 1.0))).collect();
            (0..n - 1)
                .map(|i| {
                    let j = 1.0 + w * (2.0 * rng.random::<f64>() - 1.0);
                    let mut t = tfim_term(i, n, j, fields[i], fields[i + 1]);
                    let r = linalg::random_hermitian::<c64>(4, &mut rng);
                    let rn = linalg::op_norm(r.as_ref());
                    t += linalg::scaled(r.as_ref(), w / rn);
                    t
                })
                .collect()
        }
        Family::Custom => {
            return Err(Error::InvalidParameter(
                "custom models are built from explicit terms".to_string(),
            ))
        }
    };
    let mut h = Hamiltonian1D::from_terms(n, 2, terms)?;
    h.label = fam.name().to_string();
    Ok(h)
}

impl Hamiltonian1D {
    /// Validates and wraps explicit bond terms; `j_bound` is the largest
    /// term norm.
    pub fn from_terms(n_sites: usize, local_dim: usize, terms: Vec<Mat<c64>>) -> Result<Self> {
        if n_sites < 2 {
            return Err(Error::TooFewSites(n_sites));
        }
        if terms.len() != n_sites - 1 {
            return Err(Error::DimensionMismatch { expected: n_sites - 1, got: terms.len() });
        }
        let dd = local_dim * local_dim;
        let mut j_bound = 0.0f64;
        for (index, t) in terms.iter().enumerate() {
            if t.nrows() != dd || t.ncols() != dd {
                return Err(Error::DimensionMismatch { expected: dd, got: t.nrows() });
            }
            let deviation = linalg::hermiticity_defect(t.as_ref());
            if deviation > HERMITIAN_TOL {
                return Err(Error::NotHermitian { index, deviation });
            }
            j_bound = j_bound.max(linalg::op_norm(t.as_ref()));
        }
        Ok(Self { n_sites, local_dim, terms, j_bound, label: "custom".to_string() })
    }

    pub fn dim(&self) -> usize {
        linalg::pow_dim(self.local_dim, self.n_sites)
    }

    pub fn is_real(&self) -> bool {
        self.terms.iter().all(|t| {
            (0..t.ncols()).all(|j| (0..t.nrows()).all(|i| t[(i, j)].im == 0.0))
        })
    }

    pub fn term_norms(&self) -> Vec<f64> {
        self.terms.iter().map(|t| linalg::op_norm(t.as_ref())).collect()
    }

    pub fn terms_as<T: Scalar>(&self) -> Vec<Mat<T>> {
        self.terms.iter().map(|t| linalg::from_complex(t.as_ref())).collect()
    }

    /// Dense sum of the selected bond terms (0-based bond indices).
    pub fn dense_terms<T: Scalar>(&self, bonds: impl IntoIterator<Item = usize>) -> Mat<T> {
        let dim = self.dim();
        let mut out = Mat::<T>::zeros(dim, dim);
        let d = self.local_dim;
        let dr_total = dim;
        for b in bonds {
            let op: Mat<T> = linalg::from_complex(self.terms[b].as_ref());
            let dm = d * d;
            let dl = linalg::pow_dim(d, b);
            let dr = dr_total / (dl * dm);
            for l in 0..dl {
                for mc in 0..dm {
                    for r in 0..dr {
                        let col = (l * dm + mc) * dr + r;
                        for mr in 0..dm {
                            let v = op[(mr, mc)];
                            if v != T::zero() {
                                out[((l * dm + mr) * dr + r, col)] += v;
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn dense<T: Scalar>(&self) -> Mat<T> {
        self.dense_terms(0..self.n_sites - 1)
    }

    /// `y = H_S x` for the bond subset `S`, matrix-free.
    pub fn apply_terms<T: Scalar>(&self, terms: &[Mat<T>], bonds: &[usize], x: &[T], y: &mut [T]) {
        y.fill(T::zero());
        for &b in bonds {
            linalg::apply_local(terms[b].as_ref(), b, self.local_dim, x, y, true);
        }
    }

    /// Columnwise `H_S X` for a dense block of vectors.
    pub fn apply_terms_mat<T: Scalar>(&self, terms: &[Mat<T>], bonds: &[usize], x: &Mat<T>) -> Mat<T> {
        let mut out = Mat::<T>::zeros(x.nrows(), x.ncols());
        for c in 0..x.ncols() {
            let (src, dst) = (x.col_as_slice(c), out.col_as_slice_mut(c));
            for &b in bonds {
                linalg::apply_local(terms[b].as_ref(), b, self.local_dim, src, dst, true);
            }
        }
        out
    }

    /// SHA-256 over sizes and term entries; keys the eigendecomposition cache.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n_sites as u64).to_le_bytes());
        h.update((self.local_dim as u64).to_le_bytes());
        for t in &self.terms {
            for j in 0..t.ncols() {
                for i in 0..t.nrows() {
                    h.update(t[(i, j)].re.to_le_bytes());
                    h.update(t[(i, j)].im.to_le_bytes());
                }
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Groups `b` consecutive sites into one site of dimension `D^b`.
///
/// Bond `I` of the blocked chain carries the original bond between blocks
/// `I` and `I+1` plus the internal bonds of block `I`; the last block's
/// internal bonds go to the last blocked bond.
pub fn block_sites(h: &Hamiltonian1D, b: usize) -> Result<Hamiltonian1D> {
    if b == 0 || h.n_sites % b != 0 || (b > 1 && h.n_sites / b < 2) {
        return Err(Error::BadBlock { block: b, n_sites: h.n_sites });
    }
    if b == 1 {
        return Ok(h.clone());
    }
    let m = h.n_sites / b;
    let d = h.local_dim;
    let span = 2 * b;
    let dim = linalg::pow_dim(d, span);
    let mut terms = Vec::with_capacity(m - 1);
    for big in 0..m - 1 {
        let start = big * b;
        let mut bonds: Vec<usize> = (start..start + b).collect();
        if big + 2 == m {
            bonds.extend(start + b..start + 2 * b - 1);
        }
        let mut t = Mat::<c64>::zeros(dim, dim);
        for bond in bonds {
            t += linalg::embed(h.terms[bond].as_ref(), bond - start, span, d);
        }
        terms.push(t);
    }
    let mut out = Hamiltonian1D::from_terms(m, linalg::pow_dim(d, b), terms)?;
    out.label = format!("{}/block{}", h.label, b);
    Ok(out)
}

/// Model definition file (TOML).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub family: String,
    pub n_sites: usize,
    #[serde(default)]
    pub local_dim: Option<usize>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    /// Custom terms, text or `ALTM` binary; relative to the model file.
    #[serde(default)]
    pub terms_file: Option<String>,
}

pub fn load_model_file(path: &Path) -> Result<Hamiltonian1D> {
    let text = std::fs::read_to_string(path)?;
    let spec: ModelFile = toml::from_str(&text).map_err(|e| Error::Format(e.to_string()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    model_from_file_spec(&spec, base)
}

pub fn model_from_file_spec(spec: &ModelFile, base: &Path) -> Result<Hamiltonian1D> {
    if Family::parse(&spec.family)? != Family::Custom {
        return build_model(&spec.family, spec.n_sites, &spec.params);
    }
    let file = spec.terms_file.as_ref().ok_or_else(|| Error::MissingParameter {
        family: "custom".into(),
        param: "terms_file".into(),
    })?;
    let terms = read_terms(&base.join(file))?;
    let dim = terms.first().map(|t| t.nrows()).unwrap_or(0);
    let d = spec.local_dim.unwrap_or_else(|| (dim as f64).sqrt().round() as usize);
    Hamiltonian1D::from_terms(spec.n_sites, d, terms)
}

const MAGIC: &[u8; 4] = b"ALTM";
const VERSION: u32 = 1;

/// Reads terms from either format, sniffing the binary magic.
pub fn read_terms(path: &Path) -> Result<Vec<Mat<c64>>> {
    let bytes = std::fs::read(path)?;
    if bytes.starts_with(MAGIC) {
        read_terms_binary(&mut bytes.as_slice())
    } else {
        read_terms_text(bytes.as_slice())
    }
}

/// Text format: header `count dim`, then each matrix row-major as `re im`
/// pairs; `#` starts a comment.
pub fn read_terms_text(r: impl BufRead) -> Result<Vec<Mat<c64>>> {
    let mut nums = Vec::new();
    for line in r.lines() {
        let line = line?;
        let body = line.split('#').next().unwrap_or("");
        for tok in body.split_whitespace() {
            nums.push(tok.parse::<f64>().map_err(|e| Error::Format(format!("{tok}: {e}")))?);
        }
    }
    if nums.len() < 2 {
        return Err(Error::Format("missing `count dim` header".into()));
    }
    let (count, dim) = (nums[0] as usize, nums[1] as usize);
    let need = count * dim * dim * 2;
    if nums.len() - 2 != need {
        return Err(Error::Format(format!("expected {need} numbers, found {}", nums.len() - 2)));
    }
    let data = &nums[2..];
    Ok((0..count)
        .map(|k| {
            let off = k * dim * dim * 2;
            Mat::from_fn(dim, dim, |i, j| {
                let p = off + 2 * (i * dim + j);
                c64::new(data[p], data[p + 1])
            })
        })
        .collect())
}

pub fn write_terms_text(terms: &[Mat<c64>], mut w: impl Write) -> Result<()> {
    let dim = terms.first().map(|t| t.nrows()).unwrap_or(0);
    writeln!(w, "# bond terms, row-major (re im) pairs")?;
    writeln!(w, "{} {}", terms.len(), dim)?;
    for (k, t) in terms.iter().enumerate() {
        writeln!(w, "# term {k}")?;
        for i in 0..dim {
            let row: Vec<String> = (0..dim).map(|j| format!("{:e} {:e}", t[(i, j)].re, t[(i, j)].im)).collect();
            writeln!(w, "{}", row.join(" "))?;
        }
    }
    Ok(())
}

pub fn read_terms_binary(r: &mut impl Read) -> Result<Vec<Mat<c64>>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let count = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b8)?;
    let dim = u64::from_le_bytes(b8) as usize;
    let mut terms = Vec::with_capacity(count);
    for _ in 0..count {
        let mut m = Mat::<c64>::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                r.read_exact(&mut b8)?;
                let re = f64::from_le_bytes(b8);
                r.read_exact(&mut b8)?;
                let im = f64::from_le_bytes(b8);
                m[(i, j)] = c64::new(re, im);
            }
        }
        terms.push(m);
    }
    Ok(terms)
}

pub fn write_terms_binary(terms: &[Mat<c64>], mut w: impl Write) -> Result<()> {
    let dim = terms.first().map(|t| t.nrows()).unwrap_or(0);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(terms.len() as u64).to_le_bytes())?;
    w.write_all(&(dim as u64).to_le_bytes())?;
    for t in terms {
        for i in 0..dim {
            for j in 0..dim {
                w.write_all(&t[(i, j)].re.to_le_bytes())?;
                w.write_all(&t[(i, j)].im.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

pub fn tfim(n_sites: usize, h: f64) -> Hamiltonian1D {
    build_model("transverse_ising", n_sites, &params(&[("h", h)])).expect("valid TFIM parameters")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted_spectrum(h: &Hamiltonian1D) -> Vec<f64> {
        linalg::hermitian_eigenvalues(h.dense::<c64>().as_ref()).unwrap()
    }

    #[test]
    fn classical_ising_pair() {
        let h = tfim(2, 0.0);
        assert_eq!(h.terms.len(), 1);
        let zz = two_site(&pauli_z(), &pauli_z());
        assert!(linalg::max_abs_diff(h.terms[0].as_ref(), linalg::scaled(zz.as_ref(), -1.0).as_ref()) < 1e-15);
        assert!((h.j_bound - 1.0).abs() < 1e-14);
    }

    #[test]
    fn tfim_field_split_norms() {
        let h = tfim(10, 2.0);
        assert_eq!(h.terms.len(), 9);
        for (i, t) in h.terms.iter().enumerate() {
            let ev = linalg::hermitian_eigenvalues(t.as_ref()).unwrap();
            let nrm = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let (wl, wr) = field_split(i, 10);
            assert!(nrm <= 1.0 + 2.0 * (wl + wr) + 1e-12);
            assert!(h.j_bound >= nrm - 1e-12);
        }
        // Frozen from an independent numpy eigensolve of the 4x4 terms.
        let interior = linalg::hermitian_eigenvalues(h.terms[4].as_ref()).unwrap();
        assert!((interior[3] - 2.23606797749979).abs() < 1e-12);
        assert!((h.j_bound - 3.1622776601683795).abs() < 1e-12);
    }

    #[test]
    fn custom_round_trip_and_hermiticity() {
        let base = tfim(3, 0.7);
        let echo = Hamiltonian1D::from_terms(3, 2, base.terms.clone()).unwrap();
        assert_eq!(echo.terms, base.terms);
        let mut bad = base.terms.clone();
        bad[1][(0, 1)] = c64::new(0.3, 0.0);
        assert!(matches!(Hamiltonian1D::from_terms(3, 2, bad), Err(Error::NotHermitian { index: 1, .. })));
    }

    #[test]
    fn errors() {
        assert!(matches!(build_model("potts", 4, &BTreeMap::new()), Err(Error::UnknownFamily(_))));
        assert!(matches!(build_model("xxz", 4, &BTreeMap::new()), Err(Error::MissingParameter { .. })));
        assert!(matches!(build_model("transverse_ising", 1, &params(&[("h", 1.0)])), Err(Error::TooFewSites(1))));
        assert!(matches!(block_sites(&tfim(6, 1.0), 4), Err(Error::BadBlock { .. })));
    }

    #[test]
    fn blocking_preserves_spectrum() {
        for (n, b) in [(4usize, 2usize), (6, 3), (6, 2)] {
            let h = tfim(n, 1.3);
            let hb = block_sites(&h, b).unwrap();
            assert_eq!(hb.n_sites, n / b);
            assert_eq!(hb.local_dim, 1 << b);
            let (s0, s1) = (sorted_spectrum(&h), sorted_spectrum(&hb));
            for (a, c) in s0.iter().zip(&s1) {
                assert!((a - c).abs() < 1e-10);
            }
        }
        assert_eq!(block_sites(&tfim(5, 1.0), 1).unwrap(), tfim(5, 1.0));
    }

    #[test]
    fn random_gapped_is_complex_and_hermitian() {
        let h = build_model("random_gapped", 5, &params(&[("seed", 3.0)])).unwrap();
        assert!(!h.is_real());
        assert!(tfim(4, 1.0).is_real());
        assert!(build_model("xxz", 4, &params(&[("delta", 0.5)])).unwrap().is_real());
    }

    #[test]
    fn term_files_round_trip() {
        let h = build_model("random_gapped", 4, &params(&[("seed", 1.0)])).unwrap();
        let mut text = Vec::new();
        write_terms_text(&h.terms, &mut text).unwrap();
        let back = read_terms_text(text.as_slice()).unwrap();
        assert_eq!(back, h.terms);
        let mut bin = Vec::new();
        write_terms_binary(&h.terms, &mut bin).unwrap();
        assert_eq!(read_terms_binary(&mut bin.as_slice()).unwrap(), h.terms);
    }

    #[test]
    fn matrix_free_apply_matches_dense() {
        let h = tfim(6, 1.1);
        let dense = h.dense::<f64>();
        let terms = h.terms_as::<f64>();
        let bonds: Vec<usize> = (0..5).collect();
        let x: Vec<f64> = (0..64).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut y = vec![0.0; 64];
        h.apply_terms(&terms, &bonds, &x, &mut y);
        let expect = linalg::matvec(dense.as_ref(), &x);
        for (a, b) in y.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-13);
        }
    }
}
