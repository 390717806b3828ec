//! Matrix product states, Schmidt tails, expander-graph states and the
//! forward-backward correlation functional with its search probe.

use std::io::Write;

use faer::Mat;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::entanglement::{self, CutData};
use crate::error::{Error, Result};
use crate::export::{self, fmt_f64, RunMeta};
use crate::linalg::{self, Scalar};
use crate::locality::LocalOp;

/// Largest dense state handled by conversions and probes.
pub const MAX_STATE_DIM: usize = 1 << 22;
/// Slack on `infidelity ≤ Σ discarded`.
pub const TRUNCATION_TOL: f64 = 1e-10;
/// Interval RDMs are flagged unless `k ≥ REGIME_RATIO · D^len`.
pub const REGIME_RATIO: usize = 4;

const GRAPH_TRIES: usize = 200;
const COLORING_ORDERS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Canonical {
    None,
    Left,
}

#[derive(Debug, Clone)]
pub struct MatrixProductState<T: Scalar> {
    pub n_sites: usize,
    pub local_dim: usize,
    /// `tensors[i][s]` is `χ_i × χ_{i+1}` with `χ_0 = χ_n = 1`.
    pub tensors: Vec<Vec<Mat<T>>>,
    pub canonical: Canonical,
    /// Weight dropped at each of the `n−1` cuts, relative to the input norm.
    pub discarded: Vec<f64>,
    /// `1 − |⟨Ψ_mps|Ψ⟩|²` measured against the input.
    pub infidelity: f64,
}

impl<T: Scalar> MatrixProductState<T> {
    pub fn bond_dims(&self) -> Vec<usize> {
        let mut b: Vec<usize> = self.tensors.iter().map(|t| t[0].nrows()).collect();
        b.push(1);
        b
    }

    pub fn discarded_total(&self) -> f64 {
        self.discarded.iter().sum()
    }

    /// Contracts the chain into a `D^N` vector.
    pub fn to_state(&self) -> Result<Vec<T>> {
        let dim = linalg::pow_dim(self.local_dim, self.n_sites);
        if dim > MAX_STATE_DIM {
            return Err(Error::BudgetExceeded { dim, budget: MAX_STATE_DIM });
        }
        let d = self.local_dim;
        let mut v = Mat::<T>::from_fn(1, 1, |_, _| T::one());
        for site in &self.tensors {
            let chi = site[0].ncols();
            let mut next = Mat::<T>::zeros(v.nrows() * d, chi);
            for (s, a) in site.iter().enumerate() {
                let prod = linalg::mul(v.as_ref(), a.as_ref());
                for p in 0..v.nrows() {
                    for b in 0..chi {
                        next[(p * d + s, b)] = prod[(p, b)];
                    }
                }
            }
            v = next;
        }
        Ok(v.col_as_slice(0).to_vec())
    }

    /// `max_i max|Σ_s A_i(s)†A_i(s) − 1|`.
    pub fn left_canonical_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for site in &self.tensors {
            let chi = site[0].ncols();
            let mut acc = Mat::<T>::zeros(chi, chi);
            for a in site {
                acc += linalg::adj_mul(a.as_ref(), a.as_ref());
            }
            linalg::add_identity(&mut acc, -1.0);
            worst = worst.max(acc.col_iter().flat_map(|c| c.iter().map(|x| x.abs()).collect::<Vec<_>>()).fold(0.0, f64::max));
        }
        worst
    }
}

/// Left-to-right sequence of Schmidt decompositions keeping at most
/// `max_bond` values above `cut_tol` per cut. The result is normalized and
/// left-canonical; its infidelity is checked against the discarded weights.
pub fn state_to_mps<T: Scalar>(
    psi: &[T],
    n: usize,
    d: usize,
    max_bond: usize,
    cut_tol: f64,
) -> Result<MatrixProductState<T>> {
    if n == 0 || d < 2 {
        return Err(Error::InvalidParameter(format!("{n} sites of dimension {d}")));
    }
    let dim = linalg::pow_dim(d, n);
    if dim > MAX_STATE_DIM {
        return Err(Error::BudgetExceeded { dim, budget: MAX_STATE_DIM });
    }
    if psi.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: psi.len() });
    }
    if max_bond == 0 {
        return Err(Error::InvalidParameter("max_bond must be at least 1".into()));
    }
    let norm = linalg::norm(psi);
    if !(norm > 0.0) {
        return Err(Error::InvalidParameter("zero state".into()));
    }
    let mut rest = Mat::<T>::from_fn(1, dim, |_, c| psi[c].scale(1.0 / norm));
    let mut tensors = Vec::with_capacity(n);
    let mut discarded = Vec::with_capacity(n.saturating_sub(1));
    for _ in 0..n - 1 {
        let chi = rest.nrows();
        let cols = rest.ncols() / d;
        let m = Mat::<T>::from_fn(chi * d, cols, |r, c| rest[(r / d, (r % d) * cols + c)]);
        let (u, s, v) = linalg::thin_svd(m.as_ref())?;
        let keep = s.iter().take(max_bond).filter(|&&x| x > cut_tol).count().max(1);
        discarded.push(s[keep..].iter().map(|x| x * x).sum());
        tensors.push((0..d).map(|sv| Mat::from_fn(chi, keep, |a, b| u[(a * d + sv, b)])).collect());
        rest = Mat::from_fn(keep, cols, |a, c| v[(c, a)].conj().scale(s[a]));
    }
    let kept: f64 = rest.col_iter().flat_map(|c| c.iter().map(|x| x.abs2()).collect::<Vec<_>>()).sum::<f64>().sqrt();
    if !(kept > 0.0) {
        return Err(Error::Inconsistent("truncation removed the whole state".into()));
    }
    tensors.push((0..d).map(|sv| Mat::from_fn(rest.nrows(), 1, |a, _| rest[(a, sv)].scale(1.0 / kept))).collect());

    let mut mps = MatrixProductState { n_sites: n, local_dim: d, tensors, canonical: Canonical::Left, discarded, infidelity: 0.0 };
    let phi = mps.to_state()?;
    let overlap = linalg::dot(&phi, psi).abs() / norm;
    mps.infidelity = (1.0 - overlap * overlap).max(0.0);
    if mps.infidelity > mps.discarded_total() + TRUNCATION_TOL {
        return Err(Error::Inconsistent(format!(
            "infidelity {:.3e} exceeds discarded weight {:.3e}",
            mps.infidelity,
            mps.discarded_total()
        )));
    }
    Ok(mps)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationRow {
    pub max_bond: usize,
    pub infidelity: f64,
    pub discarded: f64,
}

pub fn truncation_sweep<T: Scalar>(psi: &[T], n: usize, d: usize, bonds: &[usize]) -> Result<Vec<TruncationRow>> {
    bonds
        .iter()
        .map(|&k| {
            let m = state_to_mps(psi, n, d, k, 0.0)?;
            Ok(TruncationRow { max_bond: k, infidelity: m.infidelity, discarded: m.discarded_total() })
        })
        .collect()
}

/// `Σ_{α ≥ k'} A(α)²`, counting from 1.
pub fn schmidt_tail<T: Scalar>(cut: &CutData<T>, k_prime: usize) -> Result<f64> {
    if k_prime == 0 {
        return Err(Error::InvalidParameter("k' counts from 1".into()));
    }
    Ok(cut.tail(k_prime))
}

/// `e^{2s}/2`.
pub fn k0_from_entropy(s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::InvalidParameter(format!("entropy {s}")));
    }
    Ok((2.0 * s).exp() / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct K0Check {
    pub entropy: f64,
    pub k0: f64,
    /// `⌈k0⌉`, at least 1.
    pub top: usize,
    /// `Σ_{α ≤ top} A(α)²`.
    pub mass: f64,
}

impl K0Check {
    pub fn holds(&self) -> bool {
        self.mass >= 0.5
    }
}

pub fn k0_mass_check<T: Scalar>(cut: &CutData<T>) -> K0Check {
    let p: Vec<f64> = cut.coefficients.iter().map(|c| c * c).collect();
    let entropy = entanglement::entropy_of_spectrum(&p);
    let k0 = (2.0 * entropy).exp() / 2.0;
    let top = (k0.ceil() as usize).max(1);
    K0Check { entropy, k0, top, mass: p.iter().take(top).sum() }
}

/// `⌊log_D(k'/k0)⌋`, robust to `k'/k0` landing on a power of `D`.
pub fn tail_level(k_prime: usize, k0: f64, d: usize) -> i64 {
    ((k_prime as f64 / k0).ln() / (d as f64).ln() + 1e-9).floor() as i64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub k_prime: usize,
    pub level: i64,
    pub tail: f64,
}

pub fn tail_profile<T: Scalar>(cut: &CutData<T>, d: usize, k0: f64) -> Vec<TailRow> {
    (1..=cut.coefficients.len()).map(|k| TailRow { k_prime: k, level: tail_level(k, k0, d), tail: cut.tail(k) }).collect()
}

/// `Σ_{α ≥ k0·D^{2m}+1} A(α)²` for `m = 0..=m_max`.
pub fn level_tails<T: Scalar>(cut: &CutData<T>, d: usize, k0: f64, m_max: usize) -> Vec<(usize, f64)> {
    (0..=m_max)
        .map(|m| {
            let first = (k0 * (d as f64).powi(2 * m as i32) + 1.0).ceil() as usize;
            (m, cut.tail(first))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `(level, tail)` at the first `k'` of each level, above the floor.
    pub points: Vec<(i64, f64)>,
}

/// Fits `ln tail` against the level, using the largest tail of each level
/// (its first `k'`) and dropping tails at or below `floor`.
pub fn fit_tail_levels(rows: &[TailRow], floor: f64) -> Result<TailFit> {
    let mut points: Vec<(i64, f64)> = Vec::new();
    for r in rows {
        if r.tail > floor && points.last().map_or(true, |p| p.0 != r.level) {
            points.push((r.level, r.tail));
        }
    }
    if points.len() < 3 {
        return Err(Error::FitFailed(format!("{} tail levels above {floor:e}", points.len())));
    }
    let x: Vec<f64> = points.iter().map(|p| p.0 as f64).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (slope, intercept, r_squared) = linalg::linear_fit(&x, &y).ok_or_else(|| Error::FitFailed("degenerate levels".into()))?;
    Ok(TailFit { slope, intercept, r_squared, points })
}

/// A `d`-regular multigraph on `k` nodes with a proper `d`-edge-coloring.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpanderGraph {
    pub k: usize,
    pub d: usize,
    pub edges: Vec<(usize, usize)>,
    /// Color of each edge, `0..d`.
    pub colors: Vec<usize>,
}

impl ExpanderGraph {
    /// `table[c][α]` is the neighbour of `α` along its edge of color `c`,
    /// with that edge's index.
    pub fn color_table(&self) -> Result<Vec<Vec<(usize, usize)>>> {
        let mut t = vec![vec![(usize::MAX, usize::MAX); self.k]; self.d];
        for (e, (&(u, v), &c)) in self.edges.iter().zip(&self.colors).enumerate() {
            if c >= self.d || u == v {
                return Err(Error::Expander(format!("edge {e} has color {c} or is a loop")));
            }
            for (x, y) in [(u, v), (v, u)] {
                if t[c][x].0 != usize::MAX {
                    return Err(Error::Expander(format!("node {x} sees color {c} twice")));
                }
                t[c][x] = (y, e);
            }
        }
        if t.iter().flatten().any(|p| p.0 == usize::MAX) {
            return Err(Error::Expander("a node misses a color".into()));
        }
        Ok(t)
    }

    /// One `node node color` line per edge, colors counted from 1.
    pub fn write_edge_list(&self, mut w: impl Write) -> Result<()> {
        for (&(u, v), &c) in self.edges.iter().zip(&self.colors) {
            writeln!(w, "{u} {v} {}", c + 1)?;
        }
        Ok(())
    }
}

/// Configuration-model pairing. Loops are always rejected; parallel edges
/// are rejected from `k = 8` on.
pub fn random_regular_graph(k: usize, d: usize, rng: &mut impl Rng) -> Result<Vec<(usize, usize)>> {
    if k < 2 || (k * d) % 2 != 0 || (k >= 8 && d >= k) {
        return Err(Error::InvalidParameter(format!("no {d}-regular graph on {k} nodes")));
    }
    let mut stubs: Vec<usize> = (0..k).flat_map(|x| std::iter::repeat(x).take(d)).collect();
    'attempt: for _ in 0..GRAPH_TRIES {
        stubs.shuffle(rng);
        let mut edges = Vec::with_capacity(k * d / 2);
        let mut seen = std::collections::HashSet::new();
        for p in stubs.chunks(2) {
            let (u, v) = (p[0].min(p[1]), p[0].max(p[1]));
            if u == v || (k >= 8 && !seen.insert((u, v))) {
                continue 'attempt;
            }
            edges.push((u, v));
        }
        return Ok(edges);
    }
    Err(Error::Expander(format!("no admissible pairing in {GRAPH_TRIES} tries")))
}

/// Greedy `d`-edge-coloring in the given edge order. When the endpoints
/// have no common free color, an alternating two-color path from one end
/// is swapped to free one. `None` if no swap helps for some edge.
pub fn kempe_coloring(k: usize, d: usize, edges: &[(usize, usize)], order: &[usize]) -> Option<Vec<usize>> {
    const FREE: usize = usize::MAX;
    let mut at = vec![vec![FREE; d]; k];
    let mut color = vec![FREE; edges.len()];
    for &e in order {
        let (u, v) = edges[e];
        let fu: Vec<usize> = (0..d).filter(|&c| at[u][c] == FREE).collect();
        let fv: Vec<usize> = (0..d).filter(|&c| at[v][c] == FREE).collect();
        let mut chosen = fu.iter().copied().find(|c| fv.contains(c));
        if chosen.is_none() {
            'pairs: for &a in &fu {
                for &b in &fv {
                    let mut path = Vec::new();
                    let (mut x, mut c) = (v, a);
                    while at[x][c] != FREE {
                        let f = at[x][c];
                        path.push(f);
                        x = if edges[f].0 == x { edges[f].1 } else { edges[f].0 };
                        c = if c == a { b } else { a };
                    }
                    if x == u {
                        continue;
                    }
                    for &f in &path {
                        let (p, q) = edges[f];
                        at[p][color[f]] = FREE;
                        at[q][color[f]] = FREE;
                    }
                    for &f in &path {
                        let (p, q) = edges[f];
                        color[f] = if color[f] == a { b } else { a };
                        at[p][color[f]] = f;
                        at[q][color[f]] = f;
                    }
                    chosen = Some(a);
                    break 'pairs;
                }
            }
        }
        let c = chosen?;
        color[e] = c;
        at[u][c] = e;
        at[v][c] = e;
    }
    Some(color)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AmplitudeRule {
    /// Every allowed entry is `1/√D`.
    Uniform,
    /// Entries are `±1/√D` with a random sign per edge.
    Signed,
}

impl AmplitudeRule {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(AmplitudeRule::Uniform),
            "signed" => Ok(AmplitudeRule::Signed),
            _ => Err(Error::InvalidParameter(format!("amplitude rule `{s}`"))),
        }
    }
}

/// MPS whose tensor `A(s)` is supported on the edges of color `s`. Each
/// `A(s)` is a signed permutation scaled by `1/√D`.
#[derive(Debug, Clone)]
pub struct ExpanderMps {
    pub graph: ExpanderGraph,
    pub rule: AmplitudeRule,
    /// `perm[s][α]`: the `β` with `A_{αβ}(s) ≠ 0`.
    pub perm: Vec<Vec<usize>>,
    pub sign: Vec<Vec<f64>>,
}

impl ExpanderMps {
    pub fn k(&self) -> usize {
        self.graph.k
    }

    pub fn local_dim(&self) -> usize {
        self.graph.d
    }

    pub fn tensor(&self, s: usize) -> Mat<f64> {
        let amp = 1.0 / (self.local_dim() as f64).sqrt();
        let mut a = Mat::zeros(self.k(), self.k());
        for alpha in 0..self.k() {
            a[(alpha, self.perm[s][alpha])] = self.sign[s][alpha] * amp;
        }
        a
    }
}

pub fn build_expander_mps(k: usize, d: usize, seed: u64, rule: AmplitudeRule) -> Result<ExpanderMps> {
    if d < 3 {
        return Err(Error::InvalidParameter(format!("expansion needs d ≥ 3, got {d}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..GRAPH_TRIES {
        let edges = random_regular_graph(k, d, &mut rng)?;
        let mut order: Vec<usize> = (0..edges.len()).collect();
        for _ in 0..COLORING_ORDERS {
            if let Some(colors) = kempe_coloring(k, d, &edges, &order) {
                let graph = ExpanderGraph { k, d, edges, colors };
                let table = graph.color_table()?;
                let edge_sign: Vec<f64> = match rule {
                    AmplitudeRule::Uniform => vec![1.0; graph.edges.len()],
                    AmplitudeRule::Signed => (0..graph.edges.len()).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect(),
                };
                let perm = table.iter().map(|row| row.iter().map(|p| p.0).collect()).collect();
                let sign = table.iter().map(|row| row.iter().map(|p| edge_sign[p.1]).collect()).collect();
                return Ok(ExpanderMps { graph, rule, perm, sign });
            }
            order.shuffle(&mut rng);
        }
    }
    Err(Error::Expander("coloring retries exhausted".into()))
}

/// Product of tensors along a word, as a signed map `α ↦ (to[α], sign[α])`.
#[derive(Debug, Clone)]
struct Word {
    to: Vec<usize>,
    sign: Vec<f64>,
}

impl Word {
    fn identity(k: usize) -> Self {
        Word { to: (0..k).collect(), sign: vec![1.0; k] }
    }

    fn then(&self, e: &ExpanderMps, s: usize) -> Self {
        Word {
            to: self.to.iter().map(|&b| e.perm[s][b]).collect(),
            sign: self.to.iter().zip(&self.sign).map(|(&b, &g)| g * e.sign[s][b]).collect(),
        }
    }

    /// `Tr[W · R]` up to the `D^{-len/2}` factors.
    fn trace_with(&self, r: &Word) -> f64 {
        self.to.iter().enumerate().filter(|&(a, &b)| r.to[b] == a).map(|(a, &b)| self.sign[a] * r.sign[b]).sum()
    }
}

/// Visits all `D^len` words in lexicographic order, first letter most
/// significant.
fn for_each_word(e: &ExpanderMps, len: usize, f: &mut impl FnMut(usize, &Word)) {
    fn rec(e: &ExpanderMps, w: &Word, left: usize, idx: usize, f: &mut impl FnMut(usize, &Word)) {
        if left == 0 {
            f(idx, w);
            return;
        }
        for s in 0..e.local_dim() {
            rec(e, &w.then(e, s), left - 1, idx * e.local_dim() + s, f);
        }
    }
    rec(e, &Word::identity(e.k()), len, 0, f);
}

fn all_words(e: &ExpanderMps, len: usize) -> Vec<Word> {
    let mut out = Vec::with_capacity(linalg::pow_dim(e.local_dim(), len));
    for_each_word(e, len, &mut |_, w| out.push(w.clone()));
    out
}

/// Environment of an interval in an expander MPS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// `Ψ = Tr[A(s_1)…A(s_N)]` on a ring.
    Ring,
    /// `Ψ = ⟨left|A(s_1)…A(s_N)|right⟩`.
    Open { left: usize, right: usize },
    /// Both environments at the identity fixed point of the transfer map;
    /// the bulk of an infinite chain.
    Mixed,
}

#[derive(Debug, Clone)]
pub struct ExpanderRdm {
    pub rho: Mat<f64>,
    /// `‖ρ − 1/D^len‖₁`.
    pub deviation: f64,
    pub entropy: f64,
    /// `k ≥ REGIME_RATIO · D^len`.
    pub regime_ok: bool,
}

/// Reduced density matrix of sites `a..=b` (1-based). Open and mixed
/// boundaries contract random-walk environments in `O(N k D)`; the ring
/// sums the trace over every word of the complementary `N−len` sites,
/// which costs `D^{N−len}·D^len·k` time but no amplitude storage.
pub fn expander_interval_rdm(e: &ExpanderMps, n: usize, interval: (usize, usize), boundary: Boundary) -> Result<ExpanderRdm> {
    let (a, b) = interval;
    if a < 1 || b < a || b > n {
        return Err(Error::IntervalOutOfRange { a, b, n });
    }
    let (d, k) = (e.local_dim(), e.k());
    let len = b - a + 1;
    let dim = linalg::pow_dim(d, len);
    let inner = all_words(e, len);
    let mut rho = Mat::<f64>::zeros(dim, dim);
    match boundary {
        Boundary::Ring => {
            let work = linalg::pow_dim(d, n);
            if work > MAX_STATE_DIM {
                return Err(Error::BudgetExceeded { dim: work, budget: MAX_STATE_DIM });
            }
            let mut t = vec![0.0; dim];
            for_each_word(e, n - len, &mut |_, r| {
                for (i, w) in inner.iter().enumerate() {
                    t[i] = w.trace_with(r);
                }
                for i in 0..dim {
                    if t[i] != 0.0 {
                        for j in 0..dim {
                            rho[(i, j)] += t[i] * t[j];
                        }
                    }
                }
            });
        }
        Boundary::Open { .. } | Boundary::Mixed => {
            let (lw, rw) = match boundary {
                Boundary::Open { left, right } => {
                    if left >= k || right >= k {
                        return Err(Error::InvalidParameter(format!("boundary index outside 0..{k}")));
                    }
                    (walk(e, left, a - 1), walk(e, right, n - b))
                }
                _ => (vec![1.0 / k as f64; k], vec![1.0 / k as f64; k]),
            };
            for alpha in 0..k {
                if lw[alpha] == 0.0 {
                    continue;
                }
                for i in 0..dim {
                    for j in 0..dim {
                        let (wi, wj) = (&inner[i], &inner[j]);
                        if wi.to[alpha] == wj.to[alpha] {
                            rho[(i, j)] += lw[alpha] * wi.sign[alpha] * wj.sign[alpha] * rw[wi.to[alpha]];
                        }
                    }
                }
            }
        }
    }
    let tr = linalg::trace(rho.as_ref()).re();
    if !(tr > 0.0) {
        return Err(Error::Expander("all amplitudes vanish for this boundary".into()));
    }
    let rho = linalg::scaled(rho.as_ref(), 1.0 / tr);
    let eigs = linalg::hermitian_eigenvalues(rho.as_ref())?;
    let deviation = eigs.iter().map(|x| (x - 1.0 / dim as f64).abs()).sum();
    let entropy = entanglement::entropy_of_spectrum(&entanglement::clipped_spectrum(&eigs)?);
    Ok(ExpanderRdm { rho, deviation, entropy, regime_ok: k >= REGIME_RATIO * dim })
}

/// Distribution of the bond index after `steps` letters starting from
/// `start`; the graph is undirected, so the same walk serves the right end.
fn walk(e: &ExpanderMps, start: usize, steps: usize) -> Vec<f64> {
    let mut p = vec![0.0; e.k()];
    p[start] = 1.0;
    let w = 1.0 / e.local_dim() as f64;
    for _ in 0..steps {
        let mut q = vec![0.0; e.k()];
        for (alpha, &x) in p.iter().enumerate() {
            if x != 0.0 {
                for s in 0..e.local_dim() {
                    q[e.perm[s][alpha]] += x * w;
                }
            }
        }
        p = q;
    }
    p
}

/// Normalized `D^N` amplitude vector of a ring or open expander state.
pub fn expander_state(e: &ExpanderMps, n: usize, boundary: Boundary) -> Result<Vec<f64>> {
    let dim = linalg::pow_dim(e.local_dim(), n);
    if dim > MAX_STATE_DIM {
        return Err(Error::BudgetExceeded { dim, budget: MAX_STATE_DIM });
    }
    let mut psi = vec![0.0; dim];
    match boundary {
        Boundary::Ring => for_each_word(e, n, &mut |i, w| psi[i] = w.trace_with(&Word::identity(e.k()))),
        Boundary::Open { left, right } => {
            if left >= e.k() || right >= e.k() {
                return Err(Error::InvalidParameter(format!("boundary index outside 0..{}", e.k())));
            }
            for_each_word(e, n, &mut |i, w| {
                if w.to[left] == right {
                    psi[i] = w.sign[left];
                }
            })
        }
        Boundary::Mixed => return Err(Error::InvalidParameter("the mixed boundary has no state vector".into())),
    }
    let nrm = linalg::norm(&psi);
    if !(nrm > 0.0) {
        return Err(Error::Expander("all amplitudes vanish for this boundary".into()));
    }
    Ok(psi.into_iter().map(|x| x / nrm).collect())
}

/// Sites `j−l+1..=j+l` clipped to the chain, 1-based.
pub fn excluded_window(n: usize, j: usize, l: usize) -> (usize, usize) {
    ((j + 1).saturating_sub(l).max(1), (j + l).min(n))
}

/// `3√(2ε) + ε`.
pub fn fwdback_bound(eps: f64) -> f64 {
    3.0 * (2.0 * eps).sqrt() + eps
}

fn b_l_apply<T: Scalar>(cut: &CutData<T>, o: &[f64]) -> Vec<T> {
    let (dl, dr) = (cut.left_basis.nrows(), cut.right_basis.nrows());
    let mut phi = vec![T::zero(); dl * dr];
    for (k, (&c, &w)) in cut.coefficients.iter().zip(o).enumerate() {
        if w == 0.0 || c == 0.0 {
            continue;
        }
        for l in 0..dl {
            let lv = cut.left_basis[(l, k)].scale(c * w);
            for r in 0..dr {
                phi[l * dr + r] += lv * cut.right_basis[(r, k)];
            }
        }
    }
    phi
}

fn check_weights(o: &[f64]) -> Result<()> {
    match o.iter().find(|w| !(w.abs() <= 1.0 + 1e-12)) {
        Some(w) => Err(Error::InvalidParameter(format!("|O(α)| = {w} exceeds one"))),
        None => Ok(()),
    }
}

/// `Re(⟨A B_L⟩ − ⟨A⟩⟨B_L⟩)` where `A` is the product of the given local
/// operators and `B_L = Σ_α O(α)|Ψ_L(α)⟩⟨Ψ_L(α)| ⊗ 1` in the Schmidt basis
/// of cut `j`. Weights beyond `o.len()` are zero.
pub fn fwdback_functional<T: Scalar>(
    psi: &[T],
    n: usize,
    d: usize,
    j: usize,
    l: usize,
    a: &[LocalOp<T>],
    o: &[f64],
) -> Result<f64> {
    check_weights(o)?;
    if l == 0 {
        return Err(Error::InvalidParameter("l must be at least 1".into()));
    }
    let cut = entanglement::schmidt_cut(psi, n, d, j)?;
    let window = excluded_window(n, j, l);
    let mut norm = 1.0;
    for (i, op) in a.iter().enumerate() {
        let (first, last) = (op.first, op.last(d));
        if first < 1 || last > n {
            return Err(Error::IntervalOutOfRange { a: first, b: last, n });
        }
        if crate::locality::distance((first, last), window).is_none() {
            return Err(Error::SupportIntersectsWindow);
        }
        if a[..i].iter().any(|p| crate::locality::distance((p.first, p.last(d)), (first, last)).is_none()) {
            return Err(Error::OverlappingSupports(format!("factor {i}")));
        }
        norm *= linalg::op_norm(op.op.as_ref());
    }
    if norm > 1.0 + 1e-9 {
        return Err(Error::NormTooLarge(norm));
    }
    let phi = b_l_apply(&cut, o);
    let b_exp: f64 = cut.coefficients.iter().zip(o).map(|(c, w)| c * c * w).sum();
    let apply = |x: &[T]| {
        let mut v = x.to_vec();
        for op in a {
            let mut y = vec![T::zero(); v.len()];
            linalg::apply_local(op.op.as_ref(), op.first - 1, d, &v, &mut y, false);
            v = y;
        }
        v
    };
    let a_phi = apply(&phi);
    let a_psi = apply(psi);
    Ok((linalg::dot(psi, &a_phi) - linalg::dot(psi, &a_psi).scale(b_exp)).re())
}

/// Cap on `rank · dim²` for the far-region matrices, 512 MiB of `f64`.
pub const PROBE_MAX_ENTRIES: usize = 1 << 26;

/// The functional as a bilinear form in `(A, O)` on the far region
/// `X_{1,j−l} ∪ X_{j+l+1,N}`, whose basis is left sites then right sites.
/// For fixed weights the supremum over `‖A‖ ≤ 1` is a trace norm.
#[derive(Debug, Clone)]
pub struct FarCorrelation<T: Scalar> {
    pub window: (usize, usize),
    /// `G_α − p_α G_0` per Schmidt index.
    pub terms: Vec<Mat<T>>,
}

impl<T: Scalar> FarCorrelation<T> {
    pub fn new(psi: &[T], n: usize, d: usize, j: usize, l: usize) -> Result<Self> {
        if l == 0 {
            return Err(Error::InvalidParameter("l must be at least 1".into()));
        }
        let cut = entanglement::schmidt_cut(psi, n, d, j)?;
        let window = excluded_window(n, j, l);
        let (first, len) = (window.0 - 1, window.1 - window.0 + 1);
        let far = psi.len() / linalg::pow_dim(d, len);
        let entries = cut.coefficients.len().saturating_mul(far * far);
        if entries > PROBE_MAX_ENTRIES {
            return Err(Error::ProbeTooLarge { entries, budget: PROBE_MAX_ENTRIES });
        }
        let s_psi = linalg::state_matrix(psi, first, len, d);
        let g0 = linalg::adj_mul(s_psi.as_ref(), s_psi.as_ref());
        let mut terms = Vec::with_capacity(cut.coefficients.len());
        let mut o = vec![0.0; cut.coefficients.len()];
        for (k, &c) in cut.coefficients.iter().enumerate() {
            o[k] = 1.0;
            let s_phi = linalg::state_matrix(&b_l_apply(&cut, &o), first, len, d);
            o[k] = 0.0;
            let mut g = linalg::adj_mul(s_psi.as_ref(), s_phi.as_ref());
            g -= linalg::scaled(g0.as_ref(), c * c);
            terms.push(g);
        }
        Ok(FarCorrelation { window, terms })
    }

    pub fn rank(&self) -> usize {
        self.terms.len()
    }

    /// `G_c` with `f(A) = Σ_{xy} A_{xy} G_c[x,y]`.
    pub fn matrix(&self, o: &[f64]) -> Mat<T> {
        let dim = self.terms[0].nrows();
        let mut g = Mat::<T>::zeros(dim, dim);
        for (t, &w) in self.terms.iter().zip(o) {
            if w != 0.0 {
                g += linalg::scaled(t.as_ref(), w);
            }
        }
        g
    }

    /// `sup_{‖A‖≤1} |f(A)|`, the trace norm of `G_c`.
    pub fn sup_over_a(&self, o: &[f64]) -> Result<f64> {
        check_weights(o)?;
        Ok(linalg::singular_values(self.matrix(o).as_ref()).iter().sum())
    }

    /// The contraction attaining [`Self::sup_over_a`]: with
    /// `G_cᵀ = U Σ V†` it is `V U†`.
    pub fn optimal_a(&self, o: &[f64]) -> Result<Mat<T>> {
        let g = self.matrix(o);
        let gt = Mat::from_fn(g.ncols(), g.nrows(), |i, j| g[(j, i)]);
        let (u, _, v) = linalg::thin_svd(gt.as_ref())?;
        Ok(linalg::mul_adj(v.as_ref(), u.as_ref()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeOptions {
    pub trials: usize,
    pub seed: u64,
    pub xi_primes: Vec<f64>,
    /// Coordinate-ascent passes over the sign pattern per trial.
    pub ascent_sweeps: usize,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions { trials: 200, seed: 0, xi_primes: vec![0.5, 1.0, 2.0, 4.0], ascent_sweeps: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub l: usize,
    pub trials: usize,
    /// Largest functional found, over random local pairs and over the
    /// optimal `A` for each searched sign pattern.
    pub max_functional: f64,
    /// Largest functional from random single-site pairs alone.
    pub max_random_pair: f64,
    pub xi_prime: f64,
    /// `3√(2ε)+ε` with `ε = e^{−l/ξ'}`.
    pub bound: f64,
    pub entropy: f64,
}

impl ProbeRow {
    pub fn margin(&self) -> f64 {
        self.max_functional - self.bound
    }
}

/// Best functional value per `l` found by the search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeMax {
    pub l: usize,
    pub max_functional: f64,
    pub max_random_pair: f64,
}

/// Random sign patterns `O(α) = ±1`, each improved by single flips, with
/// the optimal `A` for each pattern; plus one random pair of unit-norm
/// single-site Hermitian operators, one on each far side, per trial.
pub fn probe_functional<T: Scalar>(psi: &[T], n: usize, d: usize, j: usize, l: usize, opts: &ProbeOptions) -> Result<ProbeMax> {
    let far = FarCorrelation::new(psi, n, d, j, l)?;
    let (w0, w1) = far.window;
    let mut best = ProbeMax { l, max_functional: 0.0, max_random_pair: 0.0 };
    for trial in 0..opts.trials {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (trial as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ l as u64);
        let mut o: Vec<f64> = (0..far.rank()).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();

        let mut pair = Vec::new();
        for side in [(1usize, w0.saturating_sub(1)), (w1 + 1, n)] {
            if side.0 <= side.1 {
                let site = rng.random_range(side.0..=side.1);
                let h = linalg::random_hermitian::<T>(d, &mut rng);
                let nrm = linalg::op_norm(h.as_ref());
                pair.push(LocalOp::new(site, linalg::scaled(h.as_ref(), 1.0 / nrm)));
            }
        }
        let v = fwdback_functional(psi, n, d, j, l, &pair, &o)?;
        best.max_random_pair = best.max_random_pair.max(v);

        let mut cur = far.sup_over_a(&o)?;
        for _ in 0..opts.ascent_sweeps {
            for k in 0..o.len() {
                o[k] = -o[k];
                let cand = far.sup_over_a(&o)?;
                if cand > cur {
                    cur = cand;
                } else {
                    o[k] = -o[k];
                }
            }
        }
        best.max_functional = best.max_functional.max(cur).max(v);
    }
    Ok(best)
}

/// Searches each `l` and tabulates the best value against the bound at
/// each `ξ'`, alongside the entropy of cut `j`.
pub fn conjecture_probe<T: Scalar>(
    psi: &[T],
    n: usize,
    d: usize,
    j: usize,
    l_list: &[usize],
    opts: &ProbeOptions,
) -> Result<Vec<ProbeRow>> {
    let cut = entanglement::schmidt_cut(psi, n, d, j)?;
    let p: Vec<f64> = cut.coefficients.iter().map(|c| c * c).collect();
    let entropy = entanglement::entropy_of_spectrum(&p);
    let mut rows = Vec::new();
    for &l in l_list {
        let best = probe_functional(psi, n, d, j, l, opts)?;
        for &xi in &opts.xi_primes {
            rows.push(ProbeRow {
                l,
                trials: opts.trials,
                max_functional: best.max_functional,
                max_random_pair: best.max_random_pair,
                xi_prime: xi,
                bound: fwdback_bound((-(l as f64) / xi).exp()),
                entropy,
            });
        }
    }
    Ok(rows)
}

pub const PROBE_HEADER: [&str; 8] =
    ["l", "trials", "max_functional", "max_random_pair", "xi_prime", "bound_at_xi_prime", "margin", "entropy"];

pub fn write_probe_csv(rows: &[ProbeRow], meta: &RunMeta, w: impl Write) -> Result<()> {
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.l.to_string(),
                r.trials.to_string(),
                fmt_f64(r.max_functional),
                fmt_f64(r.max_random_pair),
                fmt_f64(r.xi_prime),
                fmt_f64(r.bound),
                fmt_f64(r.margin()),
                fmt_f64(r.entropy),
            ]
        })
        .collect();
    export::write_table(w, &PROBE_HEADER, &table, meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::tfim;
    use crate::spectral::{diagonalize, Mode};
    use proptest::prelude::{prop_assert, prop_assume, proptest, ProptestConfig};

    fn ground_state(n: usize, h: f64) -> Vec<f64> {
        diagonalize::<f64>(&tfim(n, h), Mode::LowestM(2)).unwrap().ground_state()
    }

    fn ghz(n: usize) -> Vec<f64> {
        let mut v = vec![0.0; 1 << n];
        v[0] = 0.5f64.sqrt();
        v[(1 << n) - 1] = 0.5f64.sqrt();
        v
    }

    fn random_state(n: usize, d: usize, seed: u64) -> Vec<linalg::c64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v: Vec<linalg::c64> =
            (0..linalg::pow_dim(d, n)).map(|_| linalg::c64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
        linalg::normalize(&mut v);
        v
    }

    #[test]
    fn product_state_is_exact_at_bond_one() {
        let mut v = vec![0.0; 1 << 5];
        v[0b10110] = 1.0;
        let m = state_to_mps(&v, 5, 2, 1, 0.0).unwrap();
        assert_eq!(m.bond_dims(), vec![1; 6]);
        assert!(m.infidelity < 1e-14 && m.discarded_total() < 1e-14);
        assert!(m.to_state().unwrap().iter().zip(&v).all(|(a, b)| (a - b).abs() < 1e-14));
    }

    #[test]
    fn ghz_needs_bond_two() {
        let v = ghz(6);
        let exact = state_to_mps(&v, 6, 2, 2, 0.0).unwrap();
        assert!(exact.infidelity < 1e-14);
        let cut = state_to_mps(&v, 6, 2, 1, 0.0).unwrap();
        assert!((cut.infidelity - 0.5).abs() < 1e-14);
        assert!((cut.discarded_total() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn left_canonical_after_truncation() {
        let psi = random_state(6, 2, 3);
        let m = state_to_mps(&psi, 6, 2, 3, 0.0).unwrap();
        assert_eq!(m.canonical, Canonical::Left);
        assert!(m.left_canonical_defect() < 1e-10);
    }

    #[test]
    fn tfim_truncation_between_single_cut_and_summed_tails() {
        let n = 10;
        let psi = ground_state(n, 2.0);
        let cuts: Vec<CutData<f64>> = (1..n).map(|j| entanglement::schmidt_cut(&psi, n, 2, j).unwrap()).collect();
        let rows = truncation_sweep(&psi, n, 2, &(1..=8).collect::<Vec<_>>()).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].infidelity <= w[0].infidelity + 1e-14);
        }
        for r in &rows {
            let tails: Vec<f64> = cuts.iter().map(|c| c.tail(r.max_bond + 1)).collect();
            let lower = tails.iter().cloned().fold(0.0, f64::max);
            let upper: f64 = tails.iter().sum();
            assert!(r.infidelity >= lower - 1e-12, "{r:?} below {lower}");
            assert!(r.infidelity <= upper + 1e-12, "{r:?} above {upper}");
        }
        assert!(rows[0].infidelity > 1e-4 && rows[7].infidelity < 1e-8);
    }

    #[test]
    fn tails_and_k0() {
        let psi = ground_state(8, 2.0);
        let cut = entanglement::schmidt_cut(&psi, 8, 2, 4).unwrap();
        assert!((schmidt_tail(&cut, 1).unwrap() - 1.0).abs() < 1e-12);
        assert!(schmidt_tail(&cut, 0).is_err());
        let mut prod = vec![0.0; 16];
        prod[5] = 1.0;
        let pc = entanglement::schmidt_cut(&prod, 4, 2, 2).unwrap();
        assert!(schmidt_tail(&pc, 2).unwrap() < 1e-28);
        assert_eq!(k0_from_entropy(0.0).unwrap(), 0.5);
        assert!((k0_from_entropy(2f64.ln()).unwrap() - 2.0).abs() < 1e-12);
        assert!(k0_from_entropy(-0.1).is_err());
        let bell = vec![0.5f64.sqrt(), 0.0, 0.0, 0.5f64.sqrt()];
        let bc = k0_mass_check(&entanglement::schmidt_cut(&bell, 2, 2, 1).unwrap());
        assert!((bc.k0 - 2.0).abs() < 1e-12 && bc.top == 2 && (bc.mass - 1.0).abs() < 1e-12);
        assert!(k0_mass_check(&cut).holds());
    }

    #[test]
    fn tail_levels() {
        assert_eq!(tail_level(1, 0.5, 2), 1);
        assert_eq!(tail_level(4, 1.0, 2), 2);
        assert_eq!(tail_level(3, 1.0, 2), 1);
        let psi = ground_state(10, 2.0);
        let cut = entanglement::schmidt_cut(&psi, 10, 2, 5).unwrap();
        let k0 = k0_mass_check(&cut).k0;
        let lt = level_tails(&cut, 2, k0, 2);
        for &(m, t) in &lt {
            let first = (k0 * 4f64.powi(m as i32) + 1.0).ceil() as usize;
            let direct: f64 = cut.coefficients.iter().skip(first - 1).map(|c| c * c).sum();
            assert_eq!(t, direct);
        }
        assert!(lt[1].1 < lt[0].1);
    }

    fn petersen() -> Vec<(usize, usize)> {
        let mut e: Vec<(usize, usize)> = (0..5).map(|i| (i, (i + 1) % 5)).collect();
        e.extend((0..5).map(|i| (i, i + 5)));
        e.extend((0..5).map(|i| (5 + i, 5 + (i + 2) % 5)));
        e
    }

    #[test]
    fn kempe_coloring_cases() {
        let k4 = vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
        let order: Vec<usize> = (0..6).collect();
        let c = kempe_coloring(4, 3, &k4, &order).unwrap();
        let g = ExpanderGraph { k: 4, d: 3, edges: k4, colors: c };
        assert!(g.color_table().is_ok());
        // The Petersen graph has chromatic index 4.
        let p = petersen();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut order: Vec<usize> = (0..15).collect();
        for _ in 0..20 {
            assert!(kempe_coloring(10, 3, &p, &order).is_none());
            order.shuffle(&mut rng);
        }
    }

    #[test]
    fn smallest_expander() {
        let e = build_expander_mps(2, 3, 0, AmplitudeRule::Uniform).unwrap();
        assert_eq!(e.graph.edges, vec![(0, 1); 3]);
        let mut colors = e.graph.colors.clone();
        colors.sort();
        assert_eq!(colors, vec![0, 1, 2]);
        for s in 0..3 {
            let a = e.tensor(s);
            let r = 1.0 / 3f64.sqrt();
            assert_eq!((a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]), (0.0, r, r, 0.0));
        }
    }

    #[test]
    fn expander_structure() {
        for rule in [AmplitudeRule::Uniform, AmplitudeRule::Signed] {
            let e = build_expander_mps(64, 3, 7, rule).unwrap();
            let table = e.graph.color_table().unwrap();
            let mut degree = vec![0; 64];
            for &(u, v) in &e.graph.edges {
                degree[u] += 1;
                degree[v] += 1;
            }
            assert!(degree.iter().all(|&x| x == 3));
            for s in 0..3 {
                let a = e.tensor(s);
                for alpha in 0..64 {
                    for beta in 0..64 {
                        if a[(alpha, beta)] != 0.0 {
                            let edge = table[s][alpha].1;
                            let (u, v) = e.graph.edges[edge];
                            assert!((u, v) == (alpha, beta) || (v, u) == (alpha, beta));
                            assert_eq!(e.graph.colors[edge], s);
                        }
                    }
                }
            }
        }
        assert!(build_expander_mps(64, 2, 7, AmplitudeRule::Uniform).is_err());
        assert!(build_expander_mps(5, 3, 7, AmplitudeRule::Uniform).is_err());
    }

    #[test]
    fn edge_list_format() {
        let e = build_expander_mps(2, 3, 0, AmplitudeRule::Uniform).unwrap();
        let mut buf = Vec::new();
        e.graph.write_edge_list(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().all(|l| l.starts_with("0 1 ")));
    }

    #[test]
    fn rdm_matches_dense_state() {
        for rule in [AmplitudeRule::Uniform, AmplitudeRule::Signed] {
            let e = build_expander_mps(16, 3, 11, rule).unwrap();
            for boundary in [Boundary::Ring, Boundary::Open { left: 0, right: 5 }] {
                let n = 7;
                let psi = match expander_state(&e, n, boundary) {
                    Ok(p) => p,
                    Err(Error::Expander(_)) => continue,
                    Err(x) => panic!("{x}"),
                };
                for interval in [(3, 3), (2, 3), (1, 2)] {
                    let r = expander_interval_rdm(&e, n, interval, boundary).unwrap();
                    let dense = entanglement::reduced_density(&psi, n, 3, interval.0, interval.1).unwrap();
                    assert!(linalg::max_abs_diff(r.rho.as_ref(), dense.as_ref()) < 1e-12);
                }
            }
        }
    }

    #[test]
    fn rdm_regimes() {
        let e = build_expander_mps(64, 3, 7, AmplitudeRule::Uniform).unwrap();
        let one = expander_interval_rdm(&e, 8, (4, 4), Boundary::Ring).unwrap();
        assert!(one.regime_ok && one.deviation < 0.05, "{}", one.deviation);
        let two = expander_interval_rdm(&e, 8, (4, 5), Boundary::Ring).unwrap();
        assert!(two.entropy <= 2.0 * 3f64.ln() + 1e-12);
        let mixed = expander_interval_rdm(&e, 8, (4, 4), Boundary::Mixed).unwrap();
        assert!(mixed.deviation < 1e-12);
        let tiny = build_expander_mps(2, 3, 0, AmplitudeRule::Uniform).unwrap();
        let r = expander_interval_rdm(&tiny, 6, (3, 3), Boundary::Ring).unwrap();
        assert!(!r.regime_ok);
        assert!((r.deviation - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn fwdback_trivial_cases() {
        let mut prod = vec![0.0; 1 << 8];
        prod[0b1011_0010] = 1.0;
        let x = Mat::from_fn(2, 2, |i, j| if i != j { 1.0 } else { 0.0 });
        let z = Mat::from_fn(2, 2, |i, j| if i == j { if i == 0 { 1.0 } else { -1.0 } } else { 0.0 });
        let a = [LocalOp::new(1, z.clone()), LocalOp::new(8, x.clone())];
        assert_eq!(fwdback_functional(&prod, 8, 2, 4, 2, &a, &[1.0]).unwrap(), 0.0);
        let psi = ground_state(8, 2.0);
        let id = [LocalOp::new(1, Mat::<f64>::identity(2, 2))];
        assert!(fwdback_functional(&psi, 8, 2, 4, 2, &id, &[1.0, -1.0, 0.5]).unwrap().abs() < 1e-14);
        let bad = [LocalOp::new(3, z)];
        assert_eq!(fwdback_functional(&psi, 8, 2, 4, 2, &bad, &[1.0]), Err(Error::SupportIntersectsWindow));
        let big = [LocalOp::new(1, linalg::scaled(x.as_ref(), 2.0))];
        assert!(fwdback_functional(&psi, 8, 2, 4, 2, &big, &[1.0]).is_err());
    }

    #[test]
    fn optimal_a_attains_trace_norm() {
        // Far region is sites 1..2 only, so the optimum is a local operator.
        let (n, j, l) = (8, 5, 3);
        let psi = ground_state(n, 1.2);
        let far = FarCorrelation::new(&psi, n, 2, j, l).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let o: Vec<f64> = (0..far.rank()).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let sup = far.sup_over_a(&o).unwrap();
            let a = far.optimal_a(&o).unwrap();
            assert!((linalg::op_norm(a.as_ref()) - 1.0).abs() < 1e-10);
            let v = fwdback_functional(&psi, n, 2, j, l, &[LocalOp::new(1, a)], &o).unwrap();
            assert!((v - sup).abs() < 1e-10, "{v} vs {sup}");
            let h = linalg::random_hermitian::<f64>(4, &mut rng);
            let h = linalg::scaled(h.as_ref(), 1.0 / linalg::op_norm(h.as_ref()));
            let r = fwdback_functional(&psi, n, 2, j, l, &[LocalOp::new(1, h)], &o).unwrap();
            assert!(r <= sup + 1e-12);
        }
    }

    #[test]
    fn far_correlation_refuses_oversized_regions() {
        // A two-site window in a chain of 10 qutrits leaves a 3^8-dimensional far region.
        let e = build_expander_mps(16, 3, 7, AmplitudeRule::Uniform).unwrap();
        let psi = expander_state(&e, 10, Boundary::Ring).unwrap();
        assert!(matches!(FarCorrelation::new(&psi, 10, 3, 5, 1), Err(Error::ProbeTooLarge { .. })));
    }

    #[test]
    fn probe_on_product_and_gapped_states() {
        let mut prod = vec![0.0; 1 << 8];
        prod[3] = 1.0;
        let opts = ProbeOptions { trials: 5, ..Default::default() };
        let rows = conjecture_probe(&prod, 8, 2, 4, &[1, 2], &opts).unwrap();
        assert!(rows.iter().all(|r| r.max_functional.abs() < 1e-12 && r.entropy.abs() < 1e-12));
        let psi = ground_state(8, 2.0);
        let rows = conjecture_probe(&psi, 8, 2, 4, &[2, 4], &opts).unwrap();
        assert_eq!(rows.len(), 8);
        assert!(rows.iter().all(|r| r.max_functional <= 2.0 && r.max_functional >= r.max_random_pair));
        // l = 4 leaves no far region.
        assert!(rows.iter().filter(|r| r.l == 4).all(|r| r.max_functional.abs() < 1e-12));
        let mut buf = Vec::new();
        write_probe_csv(&rows, &RunMeta::default(), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn truncation_identity(n in 2usize..7, d in 2usize..4, bond in 1usize..6, seed in 0u64..1000) {
            prop_assume!(linalg::pow_dim(d, n) <= 1024);
            let psi = random_state(n, d, seed);
            let m = state_to_mps(&psi, n, d, bond, 0.0).unwrap();
            prop_assert!(m.infidelity <= m.discarded_total() + TRUNCATION_TOL);
            prop_assert!((m.infidelity - m.discarded_total()).abs() < 1e-10);
            prop_assert!(m.bond_dims().iter().all(|&b| b <= bond));
            prop_assert!(m.left_canonical_defect() < 1e-10);
        }

        #[test]
        fn k0_mass_always_half(n in 2usize..8, seed in 0u64..1000, j in 1usize..7) {
            prop_assume!(j < n);
            let psi = random_state(n, 2, seed);
            let cut = entanglement::schmidt_cut(&psi, n, 2, j).unwrap();
            prop_assert!(k0_mass_check(&cut).holds());
        }
    }
}
