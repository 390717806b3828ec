//! Configuration-driven runs: model sweeps, AGSP sweeps and the expander
//! suite, persisted as one directory of CSV files per run.
//!
//! Layout of a run directory:
//!
//! | file | contents |
//! |------|----------|
//! | `config.snapshot` | the configuration text as given |
//! | `spectra.csv` | ground energy and gap per model and size, or the skip reason |
//! | `profile_<model>_n<N>.csv` | entropies, Rényi entropies and Schmidt values at every cut |
//! | `inequalities.csv` | entropy inequalities per state |
//! | `tails.csv`, `truncation.csv` | Schmidt tails by level, MPS truncation sweep |
//! | `agsp.csv`, `checks.csv` | AGSP sweep and every exact check or margin derived from it |
//! | `probe.csv` | correlation-functional search |
//! | `expander.csv`, `edges_k<k>_d<d>_s<seed>.txt` | expander RDMs and graphs |
//! | `bounds.csv` | closed-form bounds against measured values |
//! | `summary.json` | hash, counts, failing checks, skipped points and errors |
//!
//! Every CSV row carries the SHA-256 of `config.snapshot` and the crate
//! version.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agsp::{self, AgspParams, AgspTriple};
use crate::bounds::{self, BoundParameters, BoundRow};
use crate::entanglement::{self, InequalityCheck};
use crate::error::{Error, Result};
use crate::export::{fmt_f64, write_table, RunMeta};
use crate::lattice::{self, Hamiltonian1D};
use crate::linalg;
use crate::mps::{self, AmplitudeRule, Boundary, ProbeOptions};
use crate::spectral::{self, Mode, SpectralData};

/// Exact checks fail below `-CHECK_TOL`.
pub const CHECK_TOL: f64 = 1e-9;
pub const SNAPSHOT: &str = "config.snapshot";
pub const SUMMARY: &str = "summary.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub workers: usize,
    /// Used when the caller gives no output directory.
    #[serde(default)]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub budget: Budget,
    #[serde(default)]
    pub models: Vec<ModelSpec>,
    #[serde(default)]
    pub sweep: Sweep,
    #[serde(default)]
    pub agsp: Option<AgspSection>,
    #[serde(default)]
    pub probe: Option<ProbeSection>,
    #[serde(default)]
    pub expander: Option<ExpanderSection>,
    #[serde(default)]
    pub bounds: BoundOverrides,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budget {
    /// Largest Hilbert-space dimension diagonalized; bigger points are
    /// skipped with a recorded reason.
    #[serde(default = "default_max_dim")]
    pub max_dim: usize,
}

fn default_max_dim() -> usize {
    4096
}

impl Default for Budget {
    fn default() -> Self {
        Budget { max_dim: default_max_dim() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub family: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl ModelSpec {
    /// `transverse_ising_h2` style label used in file names.
    pub fn label(&self) -> String {
        let mut s = self.family.clone();
        for (k, v) in &self.params {
            s.push_str(&format!("_{k}{v}"));
        }
        s.replace(['.', '-'], "p")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    #[serde(default)]
    pub n_sites: Vec<usize>,
    /// Rényi orders.
    #[serde(default)]
    pub alphas: Vec<f64>,
    /// Cuts `j`; empty means `N/2`.
    #[serde(default)]
    pub cuts: Vec<usize>,
    /// Half-widths `l` for the AGSP sweep and the probe.
    #[serde(default)]
    pub l: Vec<usize>,
    /// `k'` values for the Schmidt tails at each cut.
    #[serde(default)]
    pub k_prime: Vec<usize>,
    /// Bond dimensions for the MPS truncation sweep.
    #[serde(default)]
    pub bonds: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgspSection {
    #[serde(default = "default_v")]
    pub v: f64,
    #[serde(default = "default_xi")]
    pub xi: f64,
    #[serde(default)]
    pub diagnostics: bool,
}

fn default_v() -> f64 {
    2.0
}

fn default_xi() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_xi_primes")]
    pub xi_primes: Vec<f64>,
    #[serde(default = "one")]
    pub ascent_sweeps: usize,
}

fn default_trials() -> usize {
    200
}

fn default_xi_primes() -> Vec<f64> {
    ProbeOptions::default().xi_primes
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpanderInstance {
    pub k: usize,
    pub d: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpanderSection {
    #[serde(default)]
    pub instances: Vec<ExpanderInstance>,
    #[serde(default = "default_ring")]
    pub n_sites: usize,
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
    #[serde(default = "default_rule")]
    pub rule: String,
    /// Interval lengths for the RDMs, each starting at site 1.
    #[serde(default = "default_lengths")]
    pub interval_lengths: Vec<usize>,
    /// Probe trials on the expander state; 0 keeps the suite structural.
    #[serde(default)]
    pub trials: usize,
    #[serde(default)]
    pub probe_l: Vec<usize>,
}

fn default_ring() -> usize {
    10
}

fn default_boundary() -> Boundary {
    Boundary::Ring
}

fn default_rule() -> String {
    "uniform".into()
}

fn default_lengths() -> Vec<usize> {
    vec![1]
}

/// Replaces the defaults of [`BoundParameters`] per model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundOverrides {
    pub xi: Option<f64>,
    pub xi_prime: Option<f64>,
    pub c0: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every sweep value against the preconditions of the modules
    /// before anything is computed.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if self.budget.max_dim < 4 {
            return bad(format!("budget.max_dim = {}", self.budget.max_dim));
        }
        let s = &self.sweep;
        if let Some(&n) = s.n_sites.iter().find(|&&n| n < 2) {
            return bad(format!("n_sites {n} below 2"));
        }
        if let Some(&a) = s.alphas.iter().find(|&&a| !(a > 0.0 && a.is_finite()) || a == 1.0) {
            return bad(format!("Rényi order {a} must be positive and not 1"));
        }
        for &n in &s.n_sites {
            if let Some(&j) = s.cuts.iter().find(|&&j| j < 1 || j >= n) {
                return bad(format!("cut {j} outside 1..{} for N = {n}", n - 1));
            }
        }
        if s.l.contains(&0) || s.k_prime.contains(&0) || s.bonds.contains(&0) {
            return bad("l, k_prime and bonds count from 1".into());
        }
        for m in &self.models {
            for &n in &s.n_sites {
                lattice::build_model(&m.family, n, &m.params).map_err(|e| Error::Config(format!("{}: {e}", m.label())))?;
            }
        }
        if let Some(a) = &self.agsp {
            if !(a.v > 0.0 && a.xi > 0.0) {
                return bad(format!("agsp v = {}, xi = {}", a.v, a.xi));
            }
        }
        if let Some(p) = &self.probe {
            if p.xi_primes.iter().any(|x| !(*x > 0.0)) {
                return bad("probe xi_primes must be positive".into());
            }
        }
        if let Some(e) = &self.expander {
            AmplitudeRule::parse(&e.rule).map_err(|err| Error::Config(err.to_string()))?;
            if e.n_sites < 2 {
                return bad(format!("expander n_sites = {}", e.n_sites));
            }
            if e.interval_lengths.iter().any(|&len| len == 0 || len > e.n_sites) {
                return bad("expander interval lengths must lie in 1..=n_sites".into());
            }
            if e.instances.iter().any(|i| i.k == 0) {
                return bad("expander k must be positive".into());
            }
        }
        let o = &self.bounds;
        for (name, v) in [("xi", o.xi), ("xi_prime", o.xi_prime), ("c0", o.c0), ("c1", o.c1)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return bad(format!("bounds.{name} = {v}"));
                }
            }
        }
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// A check as persisted in `checks.csv`: exact checks must hold, margins are
/// reported only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub model: String,
    pub n: usize,
    pub j: usize,
    pub l: usize,
    pub check: String,
    pub exact: bool,
    pub slack: f64,
}

impl CheckRow {
    pub fn fails(&self) -> bool {
        self.exact && !(self.slack >= -CHECK_TOL)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config_hash: String,
    pub version: String,
    pub points: usize,
    pub exact_checks: usize,
    pub failures: Vec<String>,
    /// Bound-versus-measured margins, keyed `model/N/quantity`.
    pub margins: BTreeMap<String, f64>,
    pub skipped: Vec<String>,
    pub errors: Vec<String>,
}

/// Everything computed for one `(model, N)` point.
#[derive(Default)]
struct PointResult {
    spectrum: Option<(f64, f64)>,
    skipped: Option<String>,
    errors: Vec<String>,
    profile: Vec<entanglement::ProfileRow>,
    inequalities: Vec<InequalityCheck>,
    tails: Vec<Vec<String>>,
    truncation: Vec<Vec<String>>,
    agsp: Vec<Vec<String>>,
    checks: Vec<CheckRow>,
    probe: Vec<Vec<String>>,
    bounds: Vec<BoundRow>,
}

struct Point<'a> {
    index: usize,
    model: &'a ModelSpec,
    n: usize,
}

/// Runs a validated configuration into `out_dir`, which is created if
/// needed; `snapshot` is the exact configuration text that gets hashed.
pub fn run(cfg: &ExperimentConfig, snapshot: &str, out_dir: &Path) -> Result<Summary> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join(SNAPSHOT), snapshot)?;
    let meta = RunMeta::new(sha256_hex(snapshot.as_bytes()));

    let points: Vec<Point> = cfg
        .models
        .iter()
        .flat_map(|m| cfg.sweep.n_sites.iter().map(move |&n| (m, n)))
        .enumerate()
        .map(|(index, (model, n))| Point { index, model, n })
        .collect();
    let mut results: Vec<Option<PointResult>> = (0..points.len()).map(|_| None).collect();
    let workers = cfg.workers.min(points.len()).max(1);
    let chunks: Vec<Vec<(usize, PointResult)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let points = &points;
                scope.spawn(move || {
                    points.iter().skip(w).step_by(workers).map(|p| (p.index, run_point(cfg, p))).collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    for (i, r) in chunks.into_iter().flatten() {
        results[i] = Some(r);
    }
    let results: Vec<PointResult> = results.into_iter().map(|r| r.expect("every point ran")).collect();

    let mut summary = Summary {
        config_hash: meta.config_hash.clone(),
        version: meta.version.clone(),
        points: points.len(),
        ..Default::default()
    };
    write_point_outputs(cfg, &points, &results, &meta, out_dir, &mut summary)?;
    if let Some(e) = &cfg.expander {
        run_expander_suite(cfg.seed, e, &meta, out_dir, &mut summary)?;
    }
    summary.failures.sort();
    write_json(&out_dir.join(SUMMARY), &summary)?;
    Ok(summary)
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v).map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn create(path: PathBuf) -> Result<std::io::BufWriter<fs::File>> {
    Ok(std::io::BufWriter::new(fs::File::create(path)?))
}

fn prefixed(model: &str, n: usize, rows: &[Vec<String>]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            let mut out = vec![model.to_string(), n.to_string()];
            out.extend(r.iter().cloned());
            out
        })
        .collect()
}

fn write_point_outputs(
    cfg: &ExperimentConfig,
    points: &[Point],
    results: &[PointResult],
    meta: &RunMeta,
    dir: &Path,
    summary: &mut Summary,
) -> Result<()> {
    let mut spectra = Vec::new();
    let mut ineq = Vec::new();
    let (mut tails, mut trunc, mut agsp_rows, mut probe, mut bound_rows) = (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut checks = Vec::new();
    for (p, r) in points.iter().zip(results) {
        let label = p.model.label();
        let key = format!("{label}/{}", p.n);
        match (&r.spectrum, &r.skipped) {
            (Some((e0, gap)), _) => spectra.push(vec![label.clone(), p.n.to_string(), "ok".into(), fmt_f64(*e0), fmt_f64(*gap)]),
            (None, reason) => {
                let reason = reason.clone().unwrap_or_else(|| "failed".into());
                summary.skipped.push(format!("{key}: {reason}"));
                spectra.push(vec![label.clone(), p.n.to_string(), reason, "nan".into(), "nan".into()]);
            }
        }
        summary.errors.extend(r.errors.iter().map(|e| format!("{key}: {e}")));
        if !r.profile.is_empty() {
            let f = create(dir.join(format!("profile_{label}_n{}.csv", p.n)))?;
            entanglement::write_profile_csv(&r.profile, &cfg.sweep.alphas, meta, f)?;
        }
        for c in &r.inequalities {
            ineq.push(vec![label.clone(), p.n.to_string(), c.name.clone(), fmt_f64(c.slack)]);
            summary.exact_checks += 1;
            if !c.holds(CHECK_TOL) {
                summary.failures.push(format!("{key}/{}: slack {:.3e}", c.name, c.slack));
            }
        }
        tails.extend(prefixed(&label, p.n, &r.tails));
        trunc.extend(prefixed(&label, p.n, &r.truncation));
        agsp_rows.extend(prefixed(&label, p.n, &r.agsp));
        probe.extend(prefixed(&label, p.n, &r.probe));
        for c in &r.checks {
            if c.exact {
                summary.exact_checks += 1;
                if c.fails() {
                    summary.failures.push(format!("{key}/j{}/l{}/{}: slack {:.3e}", c.j, c.l, c.check, c.slack));
                }
            } else {
                summary.margins.insert(format!("{key}/j{}/l{}/{}", c.j, c.l, c.check), c.slack);
            }
            checks.push(vec![
                c.model.clone(),
                c.n.to_string(),
                c.j.to_string(),
                c.l.to_string(),
                c.check.clone(),
                if c.exact { "exact" } else { "margin" }.to_string(),
                fmt_f64(c.slack),
            ]);
        }
        for b in &r.bounds {
            summary.margins.insert(format!("{key}/{}", b.quantity), b.slack);
            bound_rows.push(vec![label.clone(), p.n.to_string(), b.quantity.clone(), fmt_f64(b.formula), fmt_f64(b.measured), fmt_f64(b.slack)]);
        }
    }
    write_table(create(dir.join("spectra.csv"))?, &["model", "n", "status", "e0", "gap"], &spectra, meta)?;
    write_table(create(dir.join("inequalities.csv"))?, &["model", "n", "check", "slack"], &ineq, meta)?;
    write_table(create(dir.join("tails.csv"))?, &TAILS_HEADER, &tails, meta)?;
    write_table(create(dir.join("truncation.csv"))?, &["model", "n", "max_bond", "infidelity", "discarded"], &trunc, meta)?;
    let mut agsp_head = vec!["model", "n"];
    agsp_head.extend(agsp::SWEEP_HEADER);
    write_table(create(dir.join("agsp.csv"))?, &agsp_head, &agsp_rows, meta)?;
    write_table(create(dir.join("checks.csv"))?, &CHECKS_HEADER, &checks, meta)?;
    let mut probe_head = vec!["model", "n", "j"];
    probe_head.extend(mps::PROBE_HEADER);
    write_table(create(dir.join("probe.csv"))?, &probe_head, &probe, meta)?;
    let mut bounds_head = vec!["model", "n"];
    bounds_head.extend(bounds::BOUNDS_HEADER);
    write_table(create(dir.join("bounds.csv"))?, &bounds_head, &bound_rows, meta)?;
    Ok(())
}

pub const TAILS_HEADER: [&str; 8] = ["model", "n", "j", "k_prime", "level", "tail", "k0", "k0_mass"];
pub const CHECKS_HEADER: [&str; 7] = ["model", "n", "j", "l", "check", "kind", "slack"];
pub const EXPANDER_HEADER: [&str; 10] =
    ["k", "d", "seed", "n", "boundary", "interval_len", "deviation", "entropy", "regime_ok", "status"];

fn run_point(cfg: &ExperimentConfig, p: &Point) -> PointResult {
    let mut out = PointResult::default();
    let label = p.model.label();
    let h = match lattice::build_model(&p.model.family, p.n, &p.model.params) {
        Ok(h) => h,
        Err(e) => {
            out.skipped = Some(format!("model: {e}"));
            return out;
        }
    };
    let dim = linalg::pow_dim(h.local_dim, h.n_sites);
    if dim > cfg.budget.max_dim {
        out.skipped = Some(format!("budget: dimension {dim} exceeds {}", cfg.budget.max_dim));
        return out;
    }
    let sd = match spectral::diagonalize::<f64>(&h, Mode::Full) {
        Ok(sd) => sd,
        Err(e) => {
            out.skipped = Some(format!("spectrum: {e}"));
            return out;
        }
    };
    out.spectrum = Some((sd.e0, sd.gap));
    let psi = sd.ground_state();
    let (n, d) = (h.n_sites, h.local_dim);

    let r = entanglement::entropy_profile(&psi, n, d, &cfg.sweep.alphas).map(|rows| out.profile = rows);
    record(&mut out, r);
    let r = entanglement::entropy_inequalities(&psi, n, d).map(|c| out.inequalities = c);
    record(&mut out, r);

    let cuts: Vec<usize> = if cfg.sweep.cuts.is_empty() { vec![n / 2] } else { cfg.sweep.cuts.clone() };
    for &j in &cuts {
        let r = tails_rows(&psi, n, d, j, &cfg.sweep.k_prime).map(|rows| out.tails.extend(rows));
        record(&mut out, r);
    }
    if !cfg.sweep.bonds.is_empty() {
        let r = mps::truncation_sweep(&psi, n, d, &cfg.sweep.bonds).map(|rows| {
            out.truncation = rows
                .iter()
                .map(|t| vec![t.max_bond.to_string(), fmt_f64(t.infidelity), fmt_f64(t.discarded)])
                .collect()
        });
        record(&mut out, r);
    }

    let mut params = default_bound_parameters(&cfg.bounds, &h, &sd, cfg.agsp.as_ref());
    let mut eps_by_jl = BTreeMap::new();
    if let Some(a) = &cfg.agsp {
        let ap = AgspParams { v: a.v, xi: a.xi, diagnostics: a.diagnostics };
        for &j in &cuts {
            for &l in &cfg.sweep.l {
                match build_agsp_point(&h, &sd, &psi, j, l, &ap, params.c2, &label) {
                    Ok((t, checks)) => {
                        eps_by_jl.insert((j, l), t.epsilon);
                        out.agsp.push(agsp::sweep_row(&t));
                        out.checks.extend(checks);
                    }
                    Err(e) => out.errors.push(format!("agsp j={j} l={l}: {e}")),
                }
            }
            // ε(l) = C1 e^{-l/ξ'} from this cut's sweep, unless overridden.
            let (ls, eps): (Vec<f64>, Vec<f64>) =
                eps_by_jl.iter().filter(|((jj, _), _)| *jj == j).map(|((_, l), e)| (*l as f64, *e)).unzip();
            if let Ok(fit) = bounds::fit_decay(&ls, &eps) {
                if fit.slope < 0.0 {
                    if cfg.bounds.c1.is_none() {
                        params.c1 = fit.c1;
                    }
                    if cfg.bounds.xi_prime.is_none() {
                        params.xi_prime = fit.xi_prime;
                    }
                }
                out.bounds.push(BoundRow::floor(format!("decay_r2_j{j}"), 0.0, fit.r_squared));
            }
        }
    }

    if let Some(ps) = &cfg.probe {
        let opts = ProbeOptions { trials: ps.trials, seed: cfg.seed, xi_primes: ps.xi_primes.clone(), ascent_sweeps: ps.ascent_sweeps };
        for &j in &cuts {
            for &l in &cfg.sweep.l {
                match mps::conjecture_probe(&psi, n, d, j, &[l], &opts) {
                    Ok(rows) => {
                        if let (Some(r0), Some(&eps)) = (rows.first(), eps_by_jl.get(&(j, l))) {
                            out.checks.push(CheckRow {
                                model: label.clone(),
                                n,
                                j,
                                l,
                                check: "fwdback_vs_measured_eps".into(),
                                exact: true,
                                slack: mps::fwdback_bound(eps) - r0.max_functional,
                            });
                        }
                        for r in rows {
                            let mut rec = vec![j.to_string()];
                            rec.extend(probe_row(&r));
                            out.probe.push(rec);
                        }
                    }
                    Err(e) => out.errors.push(format!("probe j={j} l={l}: {e}")),
                }
            }
        }
    }

    let r = bound_rows(&params, &out.profile, &cfg.sweep.alphas).map(|rows| out.bounds.extend(rows));
    record(&mut out, r);
    out
}

fn record(out: &mut PointResult, r: Result<()>) {
    if let Err(e) = r {
        out.errors.push(e.to_string());
    }
}

fn probe_row(r: &mps::ProbeRow) -> Vec<String> {
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
}

fn tails_rows(psi: &[f64], n: usize, d: usize, j: usize, k_primes: &[usize]) -> Result<Vec<Vec<String>>> {
    let cut = entanglement::schmidt_cut(psi, n, d, j)?;
    let k0 = mps::k0_mass_check(&cut);
    k_primes
        .iter()
        .map(|&k| {
            Ok(vec![
                j.to_string(),
                k.to_string(),
                mps::tail_level(k, k0.k0, d).to_string(),
                fmt_f64(mps::schmidt_tail(&cut, k)?),
                fmt_f64(k0.k0),
                fmt_f64(k0.mass),
            ])
        })
        .collect()
}

fn default_bound_parameters(o: &BoundOverrides, h: &Hamiltonian1D, sd: &SpectralData<f64>, a: Option<&AgspSection>) -> BoundParameters {
    let xi = o.xi.unwrap_or(a.map_or(1.0, |a| a.xi));
    BoundParameters {
        xi,
        xi_prime: o.xi_prime.unwrap_or(6.0 * xi),
        local_dim: h.local_dim as f64,
        c0: o.c0.unwrap_or(1.0),
        c1: o.c1.unwrap_or(1.0),
        c2: o.c2.unwrap_or(1.0),
        j_coupling: h.j_bound,
        delta_e: sd.gap,
        v: a.map_or(default_v(), |a| a.v),
    }
}

#[allow(clippy::too_many_arguments)]
fn build_agsp_point(
    h: &Hamiltonian1D,
    sd: &SpectralData<f64>,
    psi: &[f64],
    j: usize,
    l: usize,
    ap: &AgspParams,
    c2: f64,
    label: &str,
) -> Result<(AgspTriple<f64>, Vec<CheckRow>)> {
    let t = agsp::build_agsp(h, sd, j, l, ap)?;
    let (n, d) = (h.n_sites, h.local_dim);
    let row = |check: &str, exact: bool, slack: f64| CheckRow { model: label.to_string(), n, j, l, check: check.into(), exact, slack };
    let mut checks: Vec<CheckRow> = t.consistency().into_iter().map(|c| row(&c.name, true, c.slack)).collect();
    let chain = bounds::xbd_chain_check(&bounds::chain_inputs(psi, n, d, &t)?)?;
    checks.extend(chain.checks.iter().map(|c| row(&format!("chain_{}", c.name), true, c.slack)));
    let (relent, dense) = bounds::window_measurement(psi, n, d, &t, c2)?;
    for c in &relent.checks {
        checks.push(row(&format!("relent_{}", c.name), c.name != "gap_form", c.slack));
    }
    checks.push(row("relent_dense_measurement", true, dense.slack));
    checks.push(row(
        "relent_routes_agree",
        true,
        bounds::EXACT_TOL.sqrt() - (dense.relative_entropy - relent.mutual_information).abs(),
    ));
    Ok((t, checks))
}

fn bound_rows(p: &BoundParameters, profile: &[entanglement::ProfileRow], alphas: &[f64]) -> Result<Vec<BoundRow>> {
    let mut rows = Vec::new();
    let max_s = profile.iter().map(|r| r.entropy).fold(0.0, f64::max);
    if p.xi_prime > 1.0 {
        let s_max = bounds::s_max(p)?;
        rows.push(BoundRow::ceiling("s_max", s_max, max_s));
        let entropies: Vec<f64> = profile.iter().map(|r| r.entropy).collect();
        let holds = bounds::cut_implication(&entropies, s_max, p.local_dim);
        rows.push(BoundRow::floor("cut_implication", 0.0, if holds { 0.0 } else { -1.0 }));
    }
    for &a in alphas {
        let rc = bounds::renyi_convergence_ok(a, p)?;
        rows.push(BoundRow::floor(format!("renyi_order_{a}"), rc.threshold, a));
    }
    if 2.0 * p.c1 > 1.0 {
        let xi0 = 2.0 * p.xi_prime * (2.0 * p.c1).ln();
        let it = bounds::claim_iteration(xi0 * p.local_dim.ln(), xi0, p)?;
        if let Some(l0) = it.l0_iteration {
            rows.push(BoundRow::ceiling("claim_l0", it.l0_formula, l0));
        }
    }
    Ok(rows)
}

fn run_expander_suite(seed: u64, e: &ExpanderSection, meta: &RunMeta, dir: &Path, summary: &mut Summary) -> Result<()> {
    let rule = AmplitudeRule::parse(&e.rule)?;
    let boundary = match e.boundary {
        Boundary::Ring => "ring".to_string(),
        Boundary::Mixed => "mixed".to_string(),
        Boundary::Open { left, right } => format!("open_{left}_{right}"),
    };
    let mut rows = Vec::new();
    let mut probe = Vec::new();
    for inst in &e.instances {
        let base = vec![inst.k.to_string(), inst.d.to_string(), inst.seed.to_string(), e.n_sites.to_string(), boundary.clone()];
        let ex = match mps::build_expander_mps(inst.k, inst.d, inst.seed, rule) {
            Ok(ex) => ex,
            Err(err) => {
                summary.errors.push(format!("expander k={} d={} seed={}: {err}", inst.k, inst.d, inst.seed));
                let mut rec = base.clone();
                rec.extend(["0".into(), "nan".into(), "nan".into(), "false".into(), format!("error: {err}")]);
                rows.push(rec);
                continue;
            }
        };
        let mut edges = create(dir.join(format!("edges_k{}_d{}_s{}.txt", inst.k, inst.d, inst.seed)))?;
        ex.graph.write_edge_list(&mut edges)?;
        edges.flush()?;
        for &len in &e.interval_lengths {
            let mut rec = base.clone();
            rec.push(len.to_string());
            match mps::expander_interval_rdm(&ex, e.n_sites, (1, len), e.boundary) {
                Ok(r) => {
                    rec.extend([fmt_f64(r.deviation), fmt_f64(r.entropy), r.regime_ok.to_string(), "ok".into()]);
                    summary.margins.insert(format!("expander/k{}/d{}/len{len}/deviation", inst.k, inst.d), r.deviation);
                }
                Err(err) => {
                    summary.errors.push(format!("expander k={} len={len}: {err}", inst.k));
                    rec.extend(["nan".into(), "nan".into(), "false".into(), format!("error: {err}")]);
                }
            }
            rows.push(rec);
        }
        if e.trials > 0 && !e.probe_l.is_empty() {
            let opts = ProbeOptions { trials: e.trials, seed, ..ProbeOptions::default() };
            let j = e.n_sites / 2;
            let res = mps::expander_state(&ex, e.n_sites, e.boundary)
                .and_then(|psi| mps::conjecture_probe(&psi, e.n_sites, inst.d, j, &e.probe_l, &opts));
            match res {
                Ok(pr) => {
                    for r in pr {
                        let mut rec = vec![format!("expander_k{}_d{}_s{}", inst.k, inst.d, inst.seed), e.n_sites.to_string(), j.to_string()];
                        rec.extend(probe_row(&r));
                        probe.push(rec);
                    }
                }
                Err(err) => summary.errors.push(format!("expander probe k={}: {err}", inst.k)),
            }
        }
    }
    write_table(create(dir.join("expander.csv"))?, &EXPANDER_HEADER, &rows, meta)?;
    if !probe.is_empty() {
        let mut head = vec!["model", "n", "j"];
        head.extend(mps::PROBE_HEADER);
        write_table(create(dir.join("expander_probe.csv"))?, &head, &probe, meta)?;
    }
    Ok(())
}

/// Outcome of re-verifying a run directory from its files alone.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub files: usize,
    pub checked: usize,
    pub failures: Vec<String>,
}

impl CheckReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let header = r.headers().map_err(crate::export::csv_err)?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|rec| rec.iter().map(String::from).collect()).map_err(crate::export::csv_err))
        .collect::<Result<Vec<Vec<String>>>>()?;
    Ok((header, rows))
}

fn parse_f64(s: &str) -> f64 {
    match s {
        "inf" => f64::INFINITY,
        "-inf" => f64::NEG_INFINITY,
        _ => s.parse().unwrap_or(f64::NAN),
    }
}

fn csv_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    Ok(files)
}

/// Re-verifies a run directory from the persisted files: the config hash
/// and version on every row, every exact check, and the per-site entropy
/// bound, entropy positivity, Rényi ordering and tail monotonicity
/// recomputed from the raw columns.
pub fn check_run_dir(dir: &Path) -> Result<CheckReport> {
    let snapshot = fs::read(dir.join(SNAPSHOT)).map_err(|e| Error::Config(format!("{}: {e}", dir.join(SNAPSHOT).display())))?;
    let text = String::from_utf8(snapshot.clone()).map_err(|e| Error::Config(e.to_string()))?;
    let cfg = ExperimentConfig::from_toml(&text)?;
    let hash = sha256_hex(&snapshot);
    let mut rep = CheckReport::default();
    let fail = |rep: &mut CheckReport, msg: String| rep.failures.push(msg);

    for path in csv_files(dir)? {
        let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
        let (header, rows) = read_csv(&path)?;
        rep.files += 1;
        let (hc, vc) = (header.len().saturating_sub(2), header.len().saturating_sub(1));
        if header.get(hc).map(String::as_str) != Some("config_hash") || header.get(vc).map(String::as_str) != Some("version") {
            fail(&mut rep, format!("{name}: missing provenance columns"));
            continue;
        }
        for (i, r) in rows.iter().enumerate() {
            if r[hc] != hash {
                fail(&mut rep, format!("{name} row {}: config hash does not match {SNAPSHOT}", i + 1));
            }
        }
        let col = |c: &str| header.iter().position(|h| h == c);
        match name.as_str() {
            "inequalities.csv" => {
                let s = col("slack").unwrap_or(3);
                for r in &rows {
                    rep.checked += 1;
                    let v = parse_f64(&r[s]);
                    if !(v >= -CHECK_TOL) {
                        fail(&mut rep, format!("{name}: {}/{}/{} slack {v:.3e}", r[0], r[1], r[2]));
                    }
                }
            }
            "checks.csv" => {
                let (k, s) = (col("kind").unwrap_or(5), col("slack").unwrap_or(6));
                for r in rows.iter().filter(|r| r[k] == "exact") {
                    rep.checked += 1;
                    let v = parse_f64(&r[s]);
                    if !(v >= -CHECK_TOL) {
                        fail(&mut rep, format!("{name}: {}/{}/j{}/l{}/{} slack {v:.3e}", r[0], r[1], r[2], r[3], r[4]));
                    }
                }
            }
            "tails.csv" => {
                let mut last: BTreeMap<(String, String, String), f64> = BTreeMap::new();
                for r in &rows {
                    rep.checked += 1;
                    let t = parse_f64(&r[5]);
                    let key = (r[0].clone(), r[1].clone(), r[2].clone());
                    if let Some(prev) = last.insert(key, t) {
                        if t > prev + CHECK_TOL {
                            fail(&mut rep, format!("{name}: tail increases at {}/{}/j{} k'={}", r[0], r[1], r[2], r[3]));
                        }
                    }
                }
            }
            n if n.starts_with("profile_") => {
                let ln_d = profile_local_dim(&cfg, n).ln();
                let ent = col("entropy").unwrap_or(1);
                let renyi: Vec<(f64, usize)> = header
                    .iter()
                    .enumerate()
                    .filter_map(|(i, h)| h.strip_prefix("renyi_").map(|a| (parse_f64(a), i)))
                    .collect();
                let mut prev = 0.0;
                for r in &rows {
                    rep.checked += 1;
                    let s = parse_f64(&r[ent]);
                    if !(s >= -CHECK_TOL) || !((s - prev).abs() <= ln_d + CHECK_TOL) {
                        fail(&mut rep, format!("{name}: cut {} entropy {s} after {prev}", r[0]));
                    }
                    prev = s;
                    // S_α is non-increasing in α, with S_1 the entropy.
                    let mut orders: Vec<(f64, f64)> = renyi.iter().map(|&(a, i)| (a, parse_f64(&r[i]))).collect();
                    orders.push((1.0, s));
                    orders.sort_by(|x, y| x.0.total_cmp(&y.0));
                    if orders.windows(2).any(|w| w[1].1 > w[0].1 + 1e-8) {
                        fail(&mut rep, format!("{name}: Rényi order violated at cut {}", r[0]));
                    }
                }
                // Last cut back to the full chain, which is pure.
                if !(prev <= ln_d + CHECK_TOL) {
                    fail(&mut rep, format!("{name}: last cut entropy {prev}"));
                }
            }
            "expander.csv" => {
                let dv = col("deviation").unwrap_or(6);
                for r in &rows {
                    let v = parse_f64(&r[dv]);
                    if v.is_nan() {
                        continue;
                    }
                    rep.checked += 1;
                    if !(-CHECK_TOL..=2.0 + CHECK_TOL).contains(&v) {
                        fail(&mut rep, format!("{name}: trace distance {v} outside [0,2]"));
                    }
                }
            }
            _ => {}
        }
    }
    if rep.files == 0 {
        return Err(Error::Config(format!("{} holds no CSV files", dir.display())));
    }
    Ok(rep)
}

fn profile_local_dim(cfg: &ExperimentConfig, file: &str) -> f64 {
    cfg.models
        .iter()
        .find(|m| file.starts_with(&format!("profile_{}_n", m.label())))
        .and_then(|m| lattice::build_model(&m.family, 2, &m.params).ok())
        .map_or(2.0, |h| h.local_dim as f64)
}

/// Long-format concatenation of every CSV in a run directory:
/// `file,row,column,value`, metadata columns excluded.
pub fn export_long_csv(dir: &Path, w: impl Write) -> Result<()> {
    let files = csv_files(dir)?;
    if files.is_empty() {
        return Err(Error::Config(format!("{} holds no CSV files", dir.display())));
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["file", "row", "column", "value"]).map_err(crate::export::csv_err)?;
    for path in files {
        let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
        let (header, rows) = read_csv(&path)?;
        let keep = header.len().saturating_sub(2);
        for (i, r) in rows.iter().enumerate() {
            for (h, v) in header.iter().zip(r).take(keep) {
                out.write_record([name.as_str(), &(i + 1).to_string(), h.as_str(), v.as_str()]).map_err(crate::export::csv_err)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}
