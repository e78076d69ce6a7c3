//! Composable finite-key length for efficient BB84 with two decoy intensities.
//!
//! The chain is: expected counts -> rescaled finite-size bounds -> vacuum and
//! single-photon lower bounds -> phase error -> reconciliation leakage ->
//! `ell = floor(s_x0 + s_x1 (1 - h(phi_x)) - lambda_ec - 6 log2(21/eps_s) - log2(2/eps_c))`.

mod bounds;
mod leakage;

use serde::{Deserialize, Serialize};

use crate::channel::{BlockCounts, ProtocolParams};
use crate::error::{config, domain, Result};

pub use bounds::{
    chernoff_delta, decoy_tau, phase_error, phase_error_fluctuation, scaled_count_bounds, single_photon_bound,
    single_photon_error_bound, vacuum_bound, CountBounds, Interval3, Side,
};
pub use leakage::{binomial_cdf, binomial_quantile, ec_leakage, Reconciliation, DEFAULT_F_EC};

/// Default correctness parameter.
pub const DEFAULT_EPS_C: f64 = 1e-15;
/// Default secrecy parameter.
pub const DEFAULT_EPS_S: f64 = 1e-9;

/// How the failure probability is turned into the concentration exponent `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BetaAllocation {
    /// `beta = ln(21 / eps_s)`: each bound gets its share of the secrecy budget.
    #[default]
    PerBound,
    /// `beta = ln(1 / (eps_s + eps_c))`.
    Combined,
}

impl BetaAllocation {
    pub fn beta(self, eps_s: f64, eps_c: f64) -> f64 {
        match self {
            BetaAllocation::PerBound => (21.0 / eps_s).ln(),
            BetaAllocation::Combined => (1.0 / (eps_s + eps_c)).ln(),
        }
    }
}

/// Security parameters and the estimation settings derived from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecurityParams {
    pub eps_s: f64,
    pub eps_c: f64,
    /// Exponent used in every concentration correction.
    pub beta: f64,
    pub reconciliation: Reconciliation,
}

impl Default for SecurityParams {
    fn default() -> Self {
        Self::new(DEFAULT_EPS_S, DEFAULT_EPS_C).expect("default security parameters are valid")
    }
}

impl SecurityParams {
    pub fn new(eps_s: f64, eps_c: f64) -> Result<Self> {
        Self::with_allocation(eps_s, eps_c, BetaAllocation::default())
    }

    pub fn with_allocation(eps_s: f64, eps_c: f64, allocation: BetaAllocation) -> Result<Self> {
        for (name, v) in [("eps_s", eps_s), ("eps_c", eps_c)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(config(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        Ok(Self {
            eps_s,
            eps_c,
            beta: allocation.beta(eps_s, eps_c),
            reconciliation: Reconciliation::default(),
        })
    }

    /// Overrides the concentration exponent; `0` removes all finite-size corrections.
    pub fn with_beta(mut self, beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(config(format!("beta must be finite and >= 0, got {beta}")));
        }
        self.beta = beta;
        Ok(self)
    }

    pub fn with_reconciliation(mut self, reconciliation: Reconciliation) -> Self {
        self.reconciliation = reconciliation;
        self
    }

    /// Bits consumed by verification and privacy amplification, independent of the data.
    pub fn fixed_cost_bits(&self) -> f64 {
        6.0 * (21.0 / self.eps_s).log2() + (2.0 / self.eps_c).log2()
    }
}

/// Binary entropy in bits, `h(0) = h(1) = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(domain(format!("binary entropy needs x in [0, 1], got {x}")));
    }
    if x == 0.0 || x == 1.0 {
        return Ok(0.0);
    }
    Ok(-x * x.log2() - (1.0 - x) * (1.0 - x).log2())
}

/// Why a key length evaluated to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoKeyReason {
    /// No sifted detections in the key basis.
    NoDetections,
    /// The single-photon bound in X or Z is vacuous.
    VacuousSinglePhoton,
    /// The length formula is negative.
    NegativeLength,
    /// An intermediate quantity was not finite.
    NonFinite,
}

/// Secure key length together with every intermediate estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyLengthResult {
    /// Secure key length in bits.
    pub ell: u64,
    /// Unfloored length expression; on no-key paths a continuous surrogate
    /// that still rewards moving towards a certifiable key.
    pub objective: f64,
    pub s_x0: f64,
    pub s_x1: f64,
    pub s_z0: f64,
    pub s_z1: f64,
    pub v_z1: f64,
    pub phi_x: f64,
    pub lambda_ec: f64,
    pub qber_x: f64,
    pub n_x: f64,
    pub n_z: f64,
    pub bounds: CountBounds,
    pub no_key: Option<NoKeyReason>,
}

/// Runs the full estimation chain on expected counts.
pub fn secure_key_length(counts: &BlockCounts, params: &ProtocolParams, sec: &SecurityParams) -> Result<KeyLengthResult> {
    let bounds = scaled_count_bounds(counts, params, sec)?;
    let s_x0 = vacuum_bound(&bounds.n_x, params)?;
    let s_z0 = vacuum_bound(&bounds.n_z, params)?;
    let s_x1_raw = bounds::single_photon_bound_unclamped(&bounds.n_x, s_x0, params)?;
    let s_z1_raw = bounds::single_photon_bound_unclamped(&bounds.n_z, s_z0, params)?;
    let (s_x1, s_z1) = (s_x1_raw.max(0.0), s_z1_raw.max(0.0));
    let v_z1 = single_photon_error_bound(&bounds.m_z, params)?;

    let n_x = counts.n_x_total();
    let qber_x = counts.qber_x();
    let lambda_ec = ec_leakage(n_x, qber_x, sec.eps_c, sec.reconciliation);
    let fixed = sec.fixed_cost_bits();

    let mut result = KeyLengthResult {
        ell: 0,
        objective: 0.0,
        s_x0,
        s_x1,
        s_z0,
        s_z1,
        v_z1,
        phi_x: 0.5,
        lambda_ec,
        qber_x,
        n_x,
        n_z: counts.n_z_total(),
        bounds,
        no_key: None,
    };

    let phi = phase_error(s_z1, v_z1, s_x1, sec);
    let phi_x = phi.unwrap_or(0.5);
    result.phi_x = phi_x;
    let h_phi = binary_entropy(phi_x)?;
    let length = s_x0 + s_x1 * (1.0 - h_phi) - lambda_ec - fixed;

    if !(n_x > 0.0) {
        result.objective = -fixed;
        result.no_key = Some(NoKeyReason::NoDetections);
        return Ok(result);
    }
    if phi.is_none() {
        // Penalise how far each single-photon bound is from being positive.
        result.objective = length + s_x1_raw.min(0.0) + s_z1_raw.min(0.0);
        result.no_key = Some(NoKeyReason::VacuousSinglePhoton);
        return Ok(result);
    }
    if !length.is_finite() {
        result.objective = f64::MIN;
        result.no_key = Some(NoKeyReason::NonFinite);
        return Ok(result);
    }
    result.objective = length;
    if length < 0.0 {
        result.no_key = Some(NoKeyReason::NegativeLength);
    } else {
        result.ell = length.floor() as u64;
    }
    Ok(result)
}
