//! Closed-form entropy bounds and the inequality chain that links measured
//! AGSP data to them. Formulas with order-unity constants are reported as
//! margins; only the exact inequalities are meant to be asserted.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::agsp::AgspTriple;
use crate::entanglement::{self, binary_divergence, InequalityCheck, MeasurementReport};
use crate::error::{Error, Result};
use crate::export::{self, fmt_f64, RunMeta};
use crate::linalg::{self, Scalar};
use crate::locality::LocalityConstants;

/// Slack below which an exact inequality counts as violated.
pub const EXACT_TOL: f64 = 1e-9;
const MAX_DOUBLINGS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParameters {
    pub xi: f64,
    pub xi_prime: f64,
    /// Local dimension; real so that the formulas can be probed off the
    /// integers.
    pub local_dim: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub j_coupling: f64,
    pub delta_e: f64,
    pub v: f64,
}

impl BoundParameters {
    /// `ξ' = 6ξ`, `c0 = C2 = 1`, `C1` from a decay fit.
    pub fn from_locality(consts: &LocalityConstants, local_dim: usize, j_coupling: f64, delta_e: f64, c1: f64) -> Result<Self> {
        let p = BoundParameters {
            xi: consts.xi,
            xi_prime: 6.0 * consts.xi,
            local_dim: local_dim as f64,
            c0: 1.0,
            c1,
            c2: 1.0,
            j_coupling,
            delta_e,
            v: consts.v,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("xi", self.xi),
            ("xi_prime", self.xi_prime),
            ("local_dim", self.local_dim),
            ("c0", self.c0),
            ("c1", self.c1),
            ("j_coupling", self.j_coupling),
            ("delta_e", self.delta_e),
            ("v", self.v),
        ];
        if let Some((name, x)) = named.iter().find(|(_, x)| !(*x > 0.0 && x.is_finite())) {
            return Err(Error::BadBoundParameters(format!("{name} = {x}")));
        }
        if !self.c2.is_finite() {
            return Err(Error::BadBoundParameters(format!("c2 = {}", self.c2)));
        }
        Ok(())
    }

    fn ln_d(&self) -> f64 {
        self.local_dim.ln()
    }

    /// `C1 e^{-l/ξ'}`.
    pub fn epsilon(&self, l: f64) -> f64 {
        self.c1 * (-l / self.xi_prime).exp()
    }
}

/// `c0 ξ' ln ξ' ln D 2^{ξ' ln D}`.
pub fn s_max(p: &BoundParameters) -> Result<f64> {
    if !(p.xi_prime > 1.0) {
        return Err(Error::BadBoundParameters(format!("ξ' = {} must exceed 1", p.xi_prime)));
    }
    let ln_d = p.ln_d();
    Ok(p.c0 * p.xi_prime * p.xi_prime.ln() * ln_d * 2f64.powf(p.xi_prime * ln_d))
}

/// `(ξ'+4) ln D + 1 + ln(D²−1) + ln(ξ'/2+1)`.
pub fn entropy_offset(xi_prime: f64, local_dim: f64) -> f64 {
    (xi_prime + 4.0) * local_dim.ln() + 1.0 + (local_dim * local_dim - 1.0).ln() + (xi_prime / 2.0 + 1.0).ln()
}

/// Entropy ceiling for a state with overlap `p_overlap` on a mixture of
/// Schmidt-rank-`k` states.
pub fn bootstrap_bound(k: usize, p_overlap: f64, p: &BoundParameters) -> Result<f64> {
    if !(p_overlap > 0.0) {
        return Err(Error::BadBoundParameters(format!("overlap {p_overlap} must be positive")));
    }
    if k == 0 {
        return Err(Error::BadBoundParameters("rank 0".into()));
    }
    Ok((k as f64).ln()
        + p.xi_prime * (2.0 * p.c1 * p.c1 / p_overlap).ln() * p.ln_d()
        + entropy_offset(p.xi_prime, p.local_dim))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenyiConvergence {
    pub ok: bool,
    /// Order at which `e^{-2α/ξ'} D^{2(1−α)} = 1`.
    pub threshold: f64,
}

/// Whether `e^{-2α/ξ'} (D²)^{1−α} < 1`.
pub fn renyi_convergence_ok(alpha: f64, p: &BoundParameters) -> Result<RenyiConvergence> {
    if !(alpha > 0.0) {
        return Err(Error::BadRenyiIndex(alpha));
    }
    let ln_d = p.ln_d();
    let exponent = -2.0 * alpha / p.xi_prime + 2.0 * (1.0 - alpha) * ln_d;
    Ok(RenyiConvergence { ok: exponent < 0.0, threshold: ln_d / (ln_d + 1.0 / p.xi_prime) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClaimStep {
    pub l: f64,
    /// Upper bound on `S_l` from iterating the doubling recursion.
    pub recursion: f64,
    /// `l ln D − l⌊log₂(l/ξ0)⌋/ξ' + (2 + ln C1 + C2) l/ξ0`.
    pub closed_form: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimIteration {
    /// `2ξ' ln(2C1)`.
    pub xi0: f64,
    pub steps: Vec<ClaimStep>,
    /// First doubling length with `⌊log₂(l/ξ0)⌋ ≥ ξ' ln D + (2+C2)ξ'/ξ0 + 1/2`.
    pub contradiction_l: Option<f64>,
    /// Last admissible length before the contradiction, `contradiction_l/2`.
    pub l0_iteration: Option<f64>,
    /// `ξ' ln(2C1) 2^{⌈ξ' ln D + (2+C2)ξ'/ξ0 + 1/2⌉}`.
    pub l0_formula: f64,
    /// First length at which the recursion bound itself turns negative.
    pub recursion_negative_l: Option<f64>,
}

impl ClaimIteration {
    pub fn max_deviation(&self) -> f64 {
        self.steps.iter().map(|s| (s.recursion - s.closed_form).abs()).fold(0.0, f64::max)
    }
}

pub fn claim_closed_form(l: f64, xi0: f64, p: &BoundParameters) -> f64 {
    l * p.ln_d() - l * (l / xi0).log2().floor() / p.xi_prime + (2.0 + p.c1.ln() + p.c2) * l / xi0
}

pub fn contradiction_threshold(xi0: f64, p: &BoundParameters) -> f64 {
    p.xi_prime * p.ln_d() + (2.0 + p.c2) * p.xi_prime / xi0 + 0.5
}

/// Doubles `l` from `l_start` with
/// `S_{2l} ≤ 2S_l − (1 − 2C1 e^{-l/ξ'}) l/ξ' + ln C1 + C2`, starting from
/// `S = s_initial`, and records the closed form alongside each step. Empty
/// when `l_start < ξ0`.
pub fn claim_iteration(s_initial: f64, l_start: f64, p: &BoundParameters) -> Result<ClaimIteration> {
    p.validate()?;
    if !(s_initial >= 0.0) || !(l_start > 0.0) {
        return Err(Error::BadBoundParameters(format!("start ({l_start}, {s_initial})")));
    }
    if !(2.0 * p.c1 > 1.0) {
        return Err(Error::BadBoundParameters(format!("2C1 = {} must exceed 1", 2.0 * p.c1)));
    }
    let xi0 = 2.0 * p.xi_prime * (2.0 * p.c1).ln();
    let threshold = contradiction_threshold(xi0, p);
    let l0_formula = p.xi_prime * (2.0 * p.c1).ln() * 2f64.powf(threshold.ceil());

    let mut steps = Vec::new();
    let mut contradiction_l = None;
    let mut recursion_negative_l = None;
    if l_start >= xi0 {
        let (mut l, mut s) = (l_start, s_initial);
        for _ in 0..MAX_DOUBLINGS {
            let next_l = 2.0 * l;
            s = 2.0 * s - (1.0 - 2.0 * p.c1 * (-l / p.xi_prime).exp()) * l / p.xi_prime + p.c1.ln() + p.c2;
            l = next_l;
            steps.push(ClaimStep { l, recursion: s, closed_form: claim_closed_form(l, xi0, p) });
            if recursion_negative_l.is_none() && s < 0.0 {
                recursion_negative_l = Some(l);
            }
            if (l / xi0).log2().floor() >= threshold {
                contradiction_l = Some(l);
                break;
            }
        }
    }
    Ok(ClaimIteration {
        xi0,
        steps,
        l0_iteration: contradiction_l.map(|l| l / 2.0),
        contradiction_l,
        l0_formula,
        recursion_negative_l,
    })
}

/// Inputs of the overlap chain, all measured against the product of the
/// half-chain marginals `σ = ρ_L ⊗ ρ_R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainInputs {
    /// `⟨Ψ0|σ|Ψ0⟩`.
    pub p_overlap: f64,
    /// `tr(O_B σ)` with `0 ≤ O_B ≤ 1`.
    pub x: f64,
    /// `tr(O_L O_R σ)`.
    pub y: f64,
    /// `Re tr(O_B O_L O_R σ)`.
    pub xy_joint: f64,
    /// `‖O_B O_L O_R − P0‖`.
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    /// `max(ε, (1−y)/2)`: the smallest value for which every step holds
    /// as stated.
    pub epsilon_eff: f64,
    pub checks: Vec<InequalityCheck>,
    /// `x` ceiling implied by the chain; infinite once `1 − 2ε_eff ≤ 0`.
    pub x_ceiling: f64,
}

impl ChainReport {
    pub fn holds(&self) -> bool {
        self.checks.iter().all(|c| c.holds(EXACT_TOL))
    }
}

fn unit(name: &str, x: f64) -> Result<()> {
    if (-EXACT_TOL..=1.0 + EXACT_TOL).contains(&x) {
        Ok(())
    } else {
        Err(Error::OutOfUnitInterval(format!("{name} = {x}")))
    }
}

/// `P ≥ Re tr(O_B Q σ) − ε ≥ xy − √(x−x²)√(y−y²) − ε
///    ≥ x(1−2ε) − √x√(2ε) − ε`, and the resulting ceiling on `x`.
pub fn xbd_chain_check(inp: &ChainInputs) -> Result<ChainReport> {
    for (name, v) in [("P", inp.p_overlap), ("x", inp.x), ("y", inp.y), ("epsilon", inp.epsilon)] {
        unit(name, v)?;
    }
    let (x, y, e) = (inp.x.clamp(0.0, 1.0), inp.y.clamp(0.0, 1.0), inp.epsilon.max(0.0));
    let ee = e.max((1.0 - y) / 2.0);
    let cs = x * y - (x - x * x).max(0.0).sqrt() * (y - y * y).max(0.0).sqrt();
    let weak = x * (1.0 - 2.0 * ee) - x.sqrt() * (2.0 * ee).sqrt() - ee;
    let x_ceiling = if 1.0 - 2.0 * ee > 0.0 {
        (inp.p_overlap + x.sqrt() * (2.0 * ee).sqrt() + 2.0 * ee) / (1.0 - 2.0 * ee)
    } else {
        f64::INFINITY
    };
    let checks = vec![
        InequalityCheck::new("overlap_vs_product", inp.p_overlap - (inp.xy_joint - e)),
        InequalityCheck::new("cauchy_schwarz", inp.xy_joint - cs),
        InequalityCheck::new("overlap_chain", inp.p_overlap - (cs - e)),
        InequalityCheck::new("y_floor", y - (1.0 - 2.0 * ee)),
        InequalityCheck::new("overlap_weakened", inp.p_overlap - weak),
        InequalityCheck::new("x_ceiling", x_ceiling - x),
    ];
    Ok(ChainReport { epsilon_eff: ee, checks, x_ceiling })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelentReport {
    /// `S_left + S_right − S_joint`.
    pub mutual_information: f64,
    /// `D(p‖x)` for the measured `p = tr(O_B ρ_joint)`; always a lower
    /// bound on the mutual information.
    pub measured_divergence: f64,
    /// `(1−2ε) ln((1−2ε)/x) + 2ε ln(2ε/(1−x))`, only meaningful when
    /// `x ≤ 1−2ε ≤ p`.
    pub gated_divergence: Option<f64>,
    /// `(1−2ε) ln(1/ε) − C2`.
    pub gap_form: f64,
    pub checks: Vec<InequalityCheck>,
}

impl RelentReport {
    /// Exact checks only; the `C2` form is a margin.
    pub fn holds(&self) -> bool {
        self.checks.iter().filter(|c| c.name != "gap_form").all(|c| c.holds(EXACT_TOL))
    }

    pub fn gap_form_slack(&self) -> f64 {
        self.mutual_information - self.gap_form
    }
}

/// Lower bounds on the mutual information of the two halves of a window
/// from a two-outcome measurement with `p = tr(O_B ρ)`, `x = tr(O_B σ)`.
pub fn relent_gap_check(entropies: (f64, f64, f64), p: f64, x: f64, epsilon: f64, c2: f64) -> Result<RelentReport> {
    unit("p", p)?;
    unit("x", x)?;
    unit("epsilon", epsilon)?;
    let (p, x) = (p.clamp(0.0, 1.0), x.clamp(0.0, 1.0));
    let mi = entropies.0 + entropies.1 - entropies.2;
    let measured = binary_divergence(p, x);
    let q = 1.0 - 2.0 * epsilon;
    let gated = (x <= q && q <= p).then(|| binary_divergence(q, x));
    let gap_form = if epsilon > 0.0 { q * (1.0 / epsilon).ln() - c2 } else { f64::INFINITY };
    let mut checks = vec![InequalityCheck::new("measured_divergence", mi - measured)];
    if let Some(g) = gated {
        checks.push(InequalityCheck::new("gated_divergence", mi - g));
    }
    checks.push(InequalityCheck::new("gap_form", mi - gap_form));
    Ok(RelentReport { mutual_information: mi, measured_divergence: measured, gated_divergence: gated, gap_form, checks })
}

/// `Re tr(M S)` without forming the product.
fn trace_product<T: Scalar>(m: &faer::Mat<T>, s: &faer::Mat<T>) -> f64 {
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            acc += (m[(i, j)] * s[(j, i)]).re();
        }
    }
    acc
}

/// Chain inputs for the positivized `O_B⁺` of a triple, against
/// `σ = ρ_{1..j} ⊗ ρ_{j+1..n}`. The overlap `⟨Ψ0|σ|Ψ0⟩` is `Σ_α A(α)⁶`.
pub fn chain_inputs<T: Scalar>(psi: &[T], n: usize, d: usize, t: &AgspTriple<T>) -> Result<ChainInputs> {
    let j = t.j;
    let (w0, w1) = t.window;
    let cut = entanglement::schmidt_cut(psi, n, d, j)?;
    let p_overlap = cut.coefficients.iter().map(|c| c.powi(6)).sum();
    let rho_l = entanglement::reduced_density(psi, n, d, 1, j)?;
    let rho_r = entanglement::reduced_density(psi, n, d, j + 1, n)?;
    let sigma_w = linalg::kron(
        entanglement::reduced_density(psi, n, d, w0, j)?.as_ref(),
        entanglement::reduced_density(psi, n, d, j + 1, w1)?.as_ref(),
    );
    let x = trace_product(&t.o_b_plus, &sigma_w);
    let y = trace_product(&t.o_l, &rho_l) * trace_product(&t.o_r, &rho_r);
    // tr(O_B⁺ Q σ) with Qσ = (O_L ρ_L) ⊗ (O_R ρ_R).
    let q_sigma = linalg::kron(linalg::mul(t.o_l.as_ref(), rho_l.as_ref()).as_ref(), linalg::mul(t.o_r.as_ref(), rho_r.as_ref()).as_ref());
    let ob_full = linalg::embed(t.o_b_plus.as_ref(), w0 - 1, n, d);
    let xy_joint = trace_product(&ob_full, &q_sigma);
    Ok(ChainInputs { p_overlap, x, y, xy_joint, epsilon: t.epsilon_plus })
}

/// Both routes to the measurement bound on the window of a triple, with
/// `O_B⁺` as the measurement and `σ` the product of the window halves
/// `[w0, j]` and `[j+1, w1]`: the entropy form through
/// [`relent_gap_check`], and the dense relative entropy through
/// [`entanglement::lindblad_uhlmann_check_product`].
pub fn window_measurement<T: Scalar>(
    psi: &[T],
    n: usize,
    d: usize,
    t: &AgspTriple<T>,
    c2: f64,
) -> Result<(RelentReport, MeasurementReport)> {
    let j = t.j;
    let (w0, w1) = t.window;
    let rho = entanglement::reduced_density(psi, n, d, w0, w1)?;
    let sigma_l = entanglement::reduced_density(psi, n, d, w0, j)?;
    let sigma_r = entanglement::reduced_density(psi, n, d, j + 1, w1)?;
    let sigma = linalg::kron(sigma_l.as_ref(), sigma_r.as_ref());
    let p = trace_product(&t.o_b_plus, &rho).clamp(0.0, 1.0);
    let x = trace_product(&t.o_b_plus, &sigma).clamp(0.0, 1.0);
    drop(sigma);
    let entropies = (
        entanglement::interval_entropy(psi, n, d, w0, j)?,
        entanglement::interval_entropy(psi, n, d, j + 1, w1)?,
        entanglement::interval_entropy(psi, n, d, w0, w1)?,
    );
    let relent = relent_gap_check(entropies, p, x, t.epsilon_plus, c2)?;
    let dense = entanglement::lindblad_uhlmann_check_product(&rho, &sigma_l, &sigma_r, &t.o_b_plus)?;
    Ok((relent, dense))
}

/// If some cut exceeds `S_max`, every cut within `S_max/(3 ln D)` sites to
/// its right must stay above `2S_max/3`, given that entropy changes by at
/// most `ln D` per site. Returns whether the implication holds on the
/// profile (vacuously when no cut exceeds `S_max`).
pub fn cut_implication(profile: &[f64], s_max: f64, local_dim: f64) -> bool {
    let ln_d = local_dim.ln();
    let reach = (s_max / (3.0 * ln_d)).floor() as usize;
    profile.iter().enumerate().filter(|(_, &s)| s > s_max).all(|(i, _)| {
        profile[i..profile.len().min(i + reach + 1)].iter().all(|&s| s >= 2.0 * s_max / 3.0)
    })
}

/// `ε(l) = C1 e^{-l/ξ'}` fitted to measured values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub c1: f64,
    pub xi_prime: f64,
    pub slope: f64,
    pub r_squared: f64,
}

pub fn fit_decay(ls: &[f64], eps: &[f64]) -> Result<DecayFit> {
    if ls.len() != eps.len() || ls.len() < 2 || eps.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::FitFailed("need two or more positive values".into()));
    }
    let y: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let (slope, intercept, r_squared) = crate::linalg::linear_fit(ls, &y).ok_or_else(|| Error::FitFailed("degenerate lengths".into()))?;
    Ok(DecayFit { c1: intercept.exp(), xi_prime: -1.0 / slope, slope, r_squared })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub quantity: String,
    pub formula: f64,
    pub measured: f64,
    pub slack: f64,
}

impl BoundRow {
    /// `slack = formula − measured` for ceilings.
    pub fn ceiling(quantity: impl Into<String>, formula: f64, measured: f64) -> Self {
        BoundRow { quantity: quantity.into(), formula, measured, slack: formula - measured }
    }

    /// `slack = measured − formula` for floors.
    pub fn floor(quantity: impl Into<String>, formula: f64, measured: f64) -> Self {
        BoundRow { quantity: quantity.into(), formula, measured, slack: measured - formula }
    }
}

pub const BOUNDS_HEADER: [&str; 4] = ["quantity", "formula_value", "measured_value", "slack"];

pub fn write_bounds_csv(rows: &[BoundRow], meta: &RunMeta, w: impl Write) -> Result<()> {
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.quantity.clone(), fmt_f64(r.formula), fmt_f64(r.measured), fmt_f64(r.slack)])
        .collect();
    export::write_table(w, &BOUNDS_HEADER, &table, meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::E;

    fn params(xi_prime: f64, d: f64, c1: f64, c2: f64) -> BoundParameters {
        BoundParameters { xi: xi_prime / 6.0, xi_prime, local_dim: d, c0: 1.0, c1, c2, j_coupling: 1.0, delta_e: 1.0, v: 1.0 }
    }

    #[test]
    fn s_max_values() {
        // e · ln e · ln e · 2^e, evaluated by hand.
        let v = s_max(&params(E, E, 1.0, 1.0)).unwrap();
        assert!((v - E * 2f64.powf(E)).abs() < 1e-12);
        assert!((v - 17.8887).abs() < 1e-4);
        assert_eq!(s_max(&params(3.0, 1.0, 1.0, 1.0)).unwrap(), 0.0);
        assert!(s_max(&params(1.0, 2.0, 1.0, 1.0)).is_err());
        let (a, b) = (s_max(&params(3.0, 2.0, 1.0, 1.0)).unwrap(), s_max(&params(6.0, 2.0, 1.0, 1.0)).unwrap());
        assert!(b / a > 2f64.powf(3.0 * 2f64.ln()));
    }

    #[test]
    fn offset_and_bootstrap() {
        let f = entropy_offset(2.0, 2.0);
        assert!((f - (6.0 * 2f64.ln() + 1.0 + 3f64.ln() + 2f64.ln())).abs() < 1e-12);
        assert!((f - 6.9506).abs() < 1e-4);
        // ln(2C1²) = 0 leaves only the offset.
        let p = params(2.0, 2.0, 0.5f64.sqrt(), 1.0);
        assert!((bootstrap_bound(1, 1.0, &p).unwrap() - f).abs() < 1e-12);
        assert!(bootstrap_bound(1, 0.0, &p).is_err());
    }

    #[test]
    fn renyi_threshold() {
        let p = params(6.0, 2.0, 1.0, 1.0);
        assert!(renyi_convergence_ok(1.0, &p).unwrap().ok);
        assert!(!renyi_convergence_ok(1e-9, &p).unwrap().ok);
        let t = renyi_convergence_ok(0.5, &p).unwrap().threshold;
        assert!((t - 2f64.ln() / (2f64.ln() + 1.0 / 6.0)).abs() < 1e-14);
        assert!((t - 0.806).abs() < 1e-3);
        assert!(!renyi_convergence_ok(t - 1e-6, &p).unwrap().ok && renyi_convergence_ok(t + 1e-6, &p).unwrap().ok);
        assert!(renyi_convergence_ok(0.0, &p).is_err());
    }

    /// Plain loop over the doubling grid, independent of the library loop.
    fn hand_iteration(p: &BoundParameters) -> (f64, Vec<(f64, f64)>) {
        let xi0 = 2.0 * p.xi_prime * (2.0 * p.c1).ln();
        let mut out = Vec::new();
        let (mut l, mut s) = (xi0, xi0 * p.local_dim.ln());
        for n in 1..40 {
            s = 2.0 * s - (1.0 - 2.0 * p.c1 * (-l / p.xi_prime).exp()) * l / p.xi_prime + p.c1.ln() + p.c2;
            l *= 2.0;
            out.push((l, s));
            if n as f64 >= p.xi_prime * p.local_dim.ln() + (2.0 + p.c2) * p.xi_prime / xi0 + 0.5 {
                break;
            }
        }
        (xi0, out)
    }

    #[test]
    fn claim_iteration_small_case() {
        // ln(2C1) = 1, ξ' = 1, D = 1: ξ0 = 2 and the closed form is
        // −l⌊log₂(l/2)⌋ + (3 + ln(e/2)) l/2.
        let p = params(1.0, 1.0, E / 2.0, 1.0);
        let it = claim_iteration(0.0, 2.0, &p).unwrap();
        assert!((it.xi0 - 2.0).abs() < 1e-15);
        for s in &it.steps {
            let expect = -s.l * (s.l / 2.0).log2().floor() + (3.0 + (E / 2.0).ln()) * s.l / 2.0;
            assert!((s.closed_form - expect).abs() < 1e-12);
        }
        // Threshold (2+1)/2 + 1/2 = 2: contradiction at l = 8.
        assert_eq!(it.contradiction_l, Some(8.0));
        assert!((it.l0_formula - 4.0).abs() < 1e-12);
        assert_eq!(it.l0_iteration, Some(4.0));
    }

    #[test]
    fn claim_iteration_matches_hand_loop() {
        let p = params(6.0, 2.0, 2.0, 1.0);
        let it = claim_iteration(0.0, 1.0, &p).unwrap();
        assert!(it.steps.is_empty());
        let (xi0, hand) = hand_iteration(&p);
        let it = claim_iteration(xi0 * 2f64.ln(), xi0, &p).unwrap();
        assert_eq!(it.steps.len(), hand.len());
        for (s, (l, v)) in it.steps.iter().zip(&hand) {
            assert_eq!(s.l, *l);
            assert!((s.recursion - v).abs() <= 1e-12 * v.abs().max(1.0));
        }
        assert!(it.contradiction_l.is_some());
        assert!((it.l0_iteration.unwrap() - it.l0_formula).abs() <= 1e-12 * it.l0_formula);
        assert!(claim_iteration(0.0, 1.0, &params(6.0, 2.0, 0.5, 1.0)).is_err());
    }

    #[test]
    fn chain_trivial_inputs() {
        let r = xbd_chain_check(&ChainInputs { p_overlap: 1.0, x: 1.0, y: 1.0, xy_joint: 1.0, epsilon: 0.0 }).unwrap();
        assert!(r.holds());
        assert!(r.checks.iter().find(|c| c.name == "overlap_weakened").unwrap().slack.abs() < 1e-15);
        let r = xbd_chain_check(&ChainInputs { p_overlap: 0.3, x: 0.0, y: 0.7, xy_joint: 0.0, epsilon: 0.2 }).unwrap();
        assert!(r.holds());
        assert!(xbd_chain_check(&ChainInputs { p_overlap: 1.2, x: 0.0, y: 0.0, xy_joint: 0.0, epsilon: 0.0 }).is_err());
    }

    #[test]
    fn relent_trivial_and_toy() {
        // Product state: no mutual information, measurement at x = 1 − 2ε.
        let r = relent_gap_check((0.3, 0.3, 0.6), 0.8, 0.8, 0.1, 1.0).unwrap();
        assert!(r.holds());
        assert!(r.gated_divergence.unwrap().abs() < 1e-15);
        assert!(r.gap_form <= 0.0 + (0.8 * 10f64.ln() - 1.0));
        // Two Bell pairs straddling the cut, projector onto both singlets:
        // p = 1, x = 1/16.
        let mi = 2.0 * 2f64.ln() + 2.0 * 2f64.ln() - 0.0;
        let r = relent_gap_check((2.0 * 2f64.ln(), 2.0 * 2f64.ln(), 0.0), 1.0, 1.0 / 16.0, 0.01, 1.0).unwrap();
        assert!((r.mutual_information - mi).abs() < 1e-15);
        assert!((r.measured_divergence - 16f64.ln()).abs() < 1e-12);
        // Measuring the singlet projector saturates the measured form.
        assert!(r.holds());
        assert!(r.checks[0].slack.abs() < 1e-12);
        assert!(r.gated_divergence.unwrap() < r.measured_divergence && r.checks[1].slack > 0.0);
    }

    #[test]
    fn cut_implication_logic() {
        // Reach ⌊6/3⌋ = 2 sites, floor 2S_max/3 = 4 ln 2.
        let s_max = 6.0 * 2f64.ln();
        assert!(cut_implication(&[0.1, 0.2, 0.1], s_max, 2.0));
        assert!(cut_implication(&[0.1, 4.5, 3.0, 2.9, 0.5], s_max, 2.0));
        assert!(!cut_implication(&[0.1, 4.5, 3.0, 0.2, 0.1], s_max, 2.0));
    }

    #[test]
    fn decay_fit_recovers_constants() {
        let ls = [3.0, 6.0, 9.0];
        let eps: Vec<f64> = ls.iter().map(|&l: &f64| 1.7 * (-l / 4.0).exp()).collect();
        let f = fit_decay(&ls, &eps).unwrap();
        assert!((f.c1 - 1.7).abs() < 1e-12 && (f.xi_prime - 4.0).abs() < 1e-12 && (f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bounds_csv_layout() {
        let rows = vec![BoundRow::ceiling("s_max", 2.0, 0.5)];
        let mut buf = Vec::new();
        write_bounds_csv(&rows, &RunMeta::new("h"), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("quantity,formula_value,measured_value,slack,config_hash,version\ns_max,"));
    }

    proptest! {
        #[test]
        fn l0_formula_is_half_the_contradiction_length(xi_prime in 1.5f64..12.0, d in 2usize..5, c1 in 0.6f64..6.0, c2 in 0.0f64..3.0) {
            let p = params(xi_prime, d as f64, c1, c2);
            let xi0 = 2.0 * xi_prime * (2.0 * c1).ln();
            let it = claim_iteration(xi0 * p.local_dim.ln(), xi0, &p).unwrap();
            let l = it.l0_iteration.unwrap();
            prop_assert!((l - it.l0_formula).abs() <= 1e-12 * it.l0_formula);
        }

        #[test]
        fn chain_holds_for_commuting_projectors(a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0, w in 0.0f64..1.0) {
            // Diagonal σ with O_B, Q diagonal 0/1 and P0 the first basis
            // state; every step of the chain must then hold exactly.
            let sigma = [w * a, w * (1.0 - a), (1.0 - w) * b, (1.0 - w) * (1.0 - b)];
            let ob = [1.0, 1.0, 0.0, if c > 0.5 { 1.0 } else { 0.0 }];
            let q = [1.0, 0.0, 1.0, 0.0];
            let x: f64 = sigma.iter().zip(&ob).map(|(s, o)| s * o).sum();
            let y: f64 = sigma.iter().zip(&q).map(|(s, o)| s * o).sum();
            let joint: f64 = (0..4).map(|i| sigma[i] * ob[i] * q[i]).sum();
            // ‖O_B Q − P0‖ over the diagonal.
            let eps = (1..4).map(|i| (ob[i] * q[i]).abs()).fold(0.0, f64::max);
            let r = xbd_chain_check(&ChainInputs { p_overlap: sigma[0], x, y, xy_joint: joint, epsilon: eps }).unwrap();
            prop_assert!(r.holds(), "{:?}", r);
        }
    }
}
