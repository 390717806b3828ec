//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Each exported function wraps a plain Rust function of the same name
//! with a `_native` suffix, which the native tests call directly.

use arealaw::bounds::{self, BoundParameters};
use arealaw::entanglement;
use arealaw::error::Result;
use arealaw::lattice;
use arealaw::mps::{self, AmplitudeRule, Boundary};
use arealaw::spectral::{self, Mode};
use wasm_bindgen::prelude::*;

/// Largest chain the page diagonalizes; 2^10 levels take about a second
/// in the browser.
pub const MAX_SITES: usize = 10;

#[wasm_bindgen]
pub struct Profile {
    gap: f64,
    entropies: Vec<f64>,
}

#[wasm_bindgen]
impl Profile {
    #[wasm_bindgen(getter)]
    pub fn gap(&self) -> f64 {
        self.gap
    }

    /// Entropy at cuts `1..N`, in nats.
    #[wasm_bindgen(getter)]
    pub fn entropies(&self) -> Vec<f64> {
        self.entropies.clone()
    }
}

pub fn tfim_profile_native(n: usize, h: f64) -> Result<Profile> {
    if n > MAX_SITES {
        return Err(arealaw::error::Error::InvalidParameter(format!("at most {MAX_SITES} sites in the browser")));
    }
    let sd = spectral::diagonalize::<f64>(&lattice::tfim(n, h), Mode::Full)?;
    let rows = entanglement::entropy_profile(&sd.ground_state(), n, 2, &[])?;
    Ok(Profile { gap: sd.gap, entropies: rows.iter().map(|r| r.entropy).collect() })
}

/// Ground-state entropy profile of the transverse-field Ising chain.
#[wasm_bindgen]
pub fn tfim_profile(n: usize, h: f64) -> std::result::Result<Profile, JsError> {
    tfim_profile_native(n, h).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub struct ExpanderSummary {
    pub deviation: f64,
    pub entropy: f64,
    pub regime_ok: bool,
}

pub fn expander_site_native(k: usize, d: usize, seed: u64, n: usize) -> Result<ExpanderSummary> {
    let e = mps::build_expander_mps(k, d, seed, AmplitudeRule::Uniform)?;
    let r = mps::expander_interval_rdm(&e, n, (1, 1), Boundary::Ring)?;
    Ok(ExpanderSummary { deviation: r.deviation, entropy: r.entropy, regime_ok: r.regime_ok })
}

/// Single-site reduced density matrix of an expander ring state of `n`
/// sites, measured against the maximally mixed state.
#[wasm_bindgen]
pub fn expander_site(k: usize, d: usize, seed: u64, n: usize) -> std::result::Result<ExpanderSummary, JsError> {
    expander_site_native(k, d, seed, n).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub struct BoundValues {
    pub s_max: f64,
    pub renyi_threshold: f64,
    pub entropy_offset: f64,
}

pub fn bound_values_native(xi_prime: f64, local_dim: f64, c0: f64) -> Result<BoundValues> {
    let p = BoundParameters {
        xi: xi_prime / 6.0,
        xi_prime,
        local_dim,
        c0,
        c1: 1.0,
        c2: 1.0,
        j_coupling: 1.0,
        delta_e: 1.0,
        v: 1.0,
    };
    p.validate()?;
    Ok(BoundValues {
        s_max: bounds::s_max(&p)?,
        renyi_threshold: bounds::renyi_convergence_ok(1.0, &p)?.threshold,
        entropy_offset: bounds::entropy_offset(xi_prime, local_dim),
    })
}

/// Closed-form entropy ceiling, the smallest convergent Rényi order and the
/// bootstrap offset for a decay length `ξ'` and local dimension `D`.
#[wasm_bindgen]
pub fn bound_values(xi_prime: f64, local_dim: f64, c0: f64) -> std::result::Result<BoundValues, JsError> {
    bound_values_native(xi_prime, local_dim, c0).map_err(|e| JsError::new(&e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_is_symmetric_and_bounded() {
        let p = tfim_profile_native(6, 2.0).unwrap();
        assert_eq!(p.entropies.len(), 5);
        assert!(p.gap > 0.0);
        for (a, b) in p.entropies.iter().zip(p.entropies.iter().rev()) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(p.entropies.iter().all(|&s| (0.0..=2f64.ln()).contains(&s)));
        assert!(tfim_profile_native(MAX_SITES + 1, 2.0).is_err());
    }

    #[test]
    fn expander_site_is_nearly_mixed() {
        let s = expander_site_native(64, 3, 7, 6).unwrap();
        assert!(s.deviation < 0.1 && s.regime_ok);
        assert!((s.entropy - 3f64.ln()).abs() < 0.01);
        assert!(expander_site_native(16, 2, 7, 6).is_err());
    }

    #[test]
    fn bound_values_match_formulas() {
        let e = std::f64::consts::E;
        let b = bound_values_native(e, e, 1.0).unwrap();
        assert!((b.s_max - e * 2f64.powf(e)).abs() < 1e-12);
        assert!(bound_values_native(0.5, 2.0, 1.0).is_err());
    }
}
