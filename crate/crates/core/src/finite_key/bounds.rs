//! Finite-size corrections and decoy-state bounds on vacuum and single-photon
//! contributions.

use serde::{Deserialize, Serialize};

use crate::channel::{BlockCounts, ProtocolParams};
use crate::error::{config, domain, Result};

use super::SecurityParams;

/// Which side of the concentration bound to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
}

/// Correction added to (or subtracted from) an expected count `y`.
///
/// Plus: `beta + sqrt(2 beta y + beta^2)`. Minus: `beta/2 + sqrt(2 beta y + beta^2/4)`.
pub fn chernoff_delta(y: f64, beta: f64, side: Side) -> Result<f64> {
    if !(y.is_finite() && y >= 0.0) {
        return Err(domain(format!("count must be finite and >= 0, got {y}")));
    }
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(domain(format!("beta must be finite and >= 0, got {beta}")));
    }
    Ok(match side {
        Side::Plus => beta + (2.0 * beta * y + beta * beta).sqrt(),
        Side::Minus => beta / 2.0 + (2.0 * beta * y + beta * beta / 4.0).sqrt(),
    })
}

/// Lower/upper estimates for one family of counts, per intensity class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Interval3 {
    pub minus: [f64; 3],
    pub plus: [f64; 3],
}

/// Rescaled finite-size bounds `(e^mu_k / p_k) (y_k -/+ delta)` for all count families.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CountBounds {
    pub n_x: Interval3,
    pub n_z: Interval3,
    pub m_x: Interval3,
    pub m_z: Interval3,
}

pub fn scaled_count_bounds(counts: &BlockCounts, params: &ProtocolParams, sec: &SecurityParams) -> Result<CountBounds> {
    Ok(CountBounds {
        n_x: scale_family(&counts.n_x, params, sec.beta)?,
        n_z: scale_family(&counts.n_z, params, sec.beta)?,
        m_x: scale_family(&counts.m_x, params, sec.beta)?,
        m_z: scale_family(&counts.m_z, params, sec.beta)?,
    })
}

fn scale_family(y: &[f64; 3], params: &ProtocolParams, beta: f64) -> Result<Interval3> {
    let mut out = Interval3::default();
    for k in 0..3 {
        let p = params.p_mu[k];
        if !(p > 0.0) {
            return Err(config(format!("intensity probability p_{} must be > 0, got {p}", k + 1)));
        }
        let factor = params.mu[k].exp() / p;
        out.minus[k] = (factor * (y[k] - chernoff_delta(y[k], beta, Side::Minus)?)).max(0.0);
        out.plus[k] = factor * (y[k] + chernoff_delta(y[k], beta, Side::Plus)?);
    }
    Ok(out)
}

/// Photon-number weight `tau_n = sum_k p_k e^{-mu_k} mu_k^n / n!` for n in {0, 1}.
pub fn decoy_tau(n: u32, params: &ProtocolParams) -> Result<f64> {
    if n > 1 {
        return Err(domain(format!("photon number must be 0 or 1, got {n}")));
    }
    Ok(params
        .mu
        .iter()
        .zip(&params.p_mu)
        .map(|(&mu, &p)| p * (-mu).exp() * if n == 0 { 1.0 } else { mu })
        .sum())
}

/// Lower bound on detections originating from vacuum pulses.
pub fn vacuum_bound(bounds: &Interval3, params: &ProtocolParams) -> Result<f64> {
    let [_, mu2, mu3] = params.mu;
    if !(mu2 > mu3) {
        return Err(config(format!("vacuum bound needs mu2 > mu3, got {mu2} <= {mu3}")));
    }
    let tau0 = decoy_tau(0, params)?;
    let s0 = tau0 * (mu2 * bounds.minus[2] - mu3 * bounds.plus[1]) / (mu2 - mu3);
    Ok(s0.max(0.0))
}

/// Lower bound on detections originating from single-photon pulses.
pub fn single_photon_bound(bounds: &Interval3, s0: f64, params: &ProtocolParams) -> Result<f64> {
    Ok(single_photon_bound_unclamped(bounds, s0, params)?.max(0.0))
}

pub(crate) fn single_photon_bound_unclamped(bounds: &Interval3, s0: f64, params: &ProtocolParams) -> Result<f64> {
    let [mu1, mu2, mu3] = params.mu;
    let denom = mu1 * (mu2 - mu3) - mu2 * mu2 + mu3 * mu3;
    if !(denom > 0.0) || !(mu1 > 0.0) {
        return Err(config(format!("degenerate single-photon bound for intensities {:?}", params.mu)));
    }
    let tau0 = decoy_tau(0, params)?;
    let tau1 = decoy_tau(1, params)?;
    let multi = (mu2 * mu2 - mu3 * mu3) / (mu1 * mu1) * (bounds.plus[0] - s0 / tau0);
    Ok(tau1 * mu1 * (bounds.minus[1] - bounds.plus[2] - multi) / denom)
}

/// Upper bound on single-photon errors in a basis, from its error-count bounds.
pub fn single_photon_error_bound(errors: &Interval3, params: &ProtocolParams) -> Result<f64> {
    let [_, mu2, mu3] = params.mu;
    if !(mu2 > mu3) {
        return Err(config(format!("error bound needs mu2 > mu3, got {mu2} <= {mu3}")));
    }
    let tau1 = decoy_tau(1, params)?;
    Ok(tau1 * (errors.plus[1] - errors.minus[2]) / (mu2 - mu3))
}

/// Statistical fluctuation between the Z-basis single-photon error rate
/// `ratio` and the X-basis phase error rate.
pub fn phase_error_fluctuation(eps_s: f64, ratio: f64, s_z1: f64, s_x1: f64) -> f64 {
    if ratio <= 0.0 || ratio >= 1.0 {
        return 0.0;
    }
    let spread = ratio * (1.0 - ratio);
    let sum = s_z1 + s_x1;
    let prod = s_z1 * s_x1;
    let scale = sum * spread / (prod * std::f64::consts::LN_2);
    let log_term = (sum / (prod * spread) * (21.0 / eps_s).powi(2)).log2().max(0.0);
    (scale * log_term).sqrt()
}

/// Phase error in the key basis, or `None` when no key can be certified.
pub fn phase_error(s_z1: f64, v_z1: f64, s_x1: f64, sec: &SecurityParams) -> Option<f64> {
    if !(s_z1 > 0.0 && s_x1 > 0.0) || !s_z1.is_finite() || !s_x1.is_finite() || !v_z1.is_finite() {
        return None;
    }
    let ratio = (v_z1 / s_z1).max(0.0);
    if ratio >= 0.5 {
        return Some(0.5);
    }
    Some((ratio + phase_error_fluctuation(sec.eps_s, ratio, s_z1, s_x1)).min(0.5))
}
