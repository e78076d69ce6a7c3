//! Expected detection statistics for a weak coherent pulse source sent over a
//! lossy channel with extraneous counts, after-pulsing and misalignment.
//!
//! Everything here is an expected-value model: counts are real numbers and no
//! sampling takes place. Rounding only happens at the final key length step.

use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Result};

/// Number of intensity classes (signal, decoy, vacuum).
pub const INTENSITY_CLASSES: usize = 3;

/// Default after-pulse probability.
pub const DEFAULT_P_AP: f64 = 1e-3;
/// Default source repetition rate in Hz.
pub const DEFAULT_F_S: f64 = 1e8;
/// Default value substituted for the vacuum intensity.
pub const DEFAULT_MU3: f64 = 1e-9;

const SIMPLEX_TOL: f64 = 1e-9;

/// Environment and fixed hardware constants for one transmission window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelConditions {
    /// Total system loss in dB, detector efficiency included.
    pub eta_loss_db: f64,
    /// Extraneous count probability per pulse.
    pub p_ec: f64,
    /// Intrinsic quantum bit error rate.
    pub qber_i: f64,
    /// After-pulse probability.
    pub p_ap: f64,
    /// Source repetition rate in Hz.
    pub f_s: f64,
    /// Length of the transmission window in seconds.
    pub integration_time_s: f64,
}

impl ChannelConditions {
    /// Conditions with the default after-pulse probability and repetition rate.
    pub fn new(eta_loss_db: f64, p_ec: f64, qber_i: f64, integration_time_s: f64) -> Result<Self> {
        let c = Self {
            eta_loss_db,
            p_ec,
            qber_i,
            p_ap: DEFAULT_P_AP,
            f_s: DEFAULT_F_S,
            integration_time_s,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_eta_loss_db(mut self, eta_loss_db: f64) -> Self {
        self.eta_loss_db = eta_loss_db;
        self
    }

    pub fn with_p_ec(mut self, p_ec: f64) -> Self {
        self.p_ec = p_ec;
        self
    }

    pub fn with_integration_time(mut self, seconds: f64) -> Self {
        self.integration_time_s = seconds;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta_loss_db.is_finite() && self.eta_loss_db >= 0.0) {
            return Err(config(format!("eta_loss_db must be finite and >= 0, got {}", self.eta_loss_db)));
        }
        if !(0.0..0.5).contains(&self.p_ec) {
            return Err(config(format!("p_ec must lie in [0, 0.5), got {}", self.p_ec)));
        }
        if !(0.0..0.5).contains(&self.qber_i) {
            return Err(config(format!("qber_i must lie in [0, 0.5), got {}", self.qber_i)));
        }
        if !(0.0..1.0).contains(&self.p_ap) {
            return Err(config(format!("p_ap must lie in [0, 1), got {}", self.p_ap)));
        }
        if !(self.f_s.is_finite() && self.f_s > 0.0) {
            return Err(config(format!("f_s must be finite and > 0, got {}", self.f_s)));
        }
        if !(self.integration_time_s.is_finite() && self.integration_time_s >= 0.0) {
            return Err(config(format!(
                "integration_time_s must be finite and >= 0, got {}",
                self.integration_time_s
            )));
        }
        Ok(())
    }

    /// Linear transmittance corresponding to `eta_loss_db`.
    pub fn transmittance(&self) -> Result<f64> {
        transmittance_from_loss(self.eta_loss_db)
    }

    /// Number of pulses sent during the window.
    pub fn pulses(&self) -> f64 {
        self.f_s * self.integration_time_s
    }
}

/// The tunable protocol knobs: basis biases, intensities and their probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    /// Probability that the sender prepares in the X basis.
    pub pax: f64,
    /// Probability that the receiver measures in the X basis.
    pub pbx: f64,
    /// Mean photon numbers, strictly decreasing.
    pub mu: [f64; INTENSITY_CLASSES],
    /// Probability of sending each intensity.
    pub p_mu: [f64; INTENSITY_CLASSES],
}

impl ProtocolParams {
    pub fn new(pax: f64, pbx: f64, mu: [f64; 3], p_mu: [f64; 3]) -> Result<Self> {
        let p = Self { pax, pbx, mu, p_mu };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("pax", self.pax), ("pbx", self.pbx)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(config(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        let [m1, m2, m3] = self.mu;
        if !self.mu.iter().all(|m| m.is_finite()) || m3 < 0.0 {
            return Err(config(format!("intensities must be finite and >= 0, got {:?}", self.mu)));
        }
        if !(m1 > m2 && m2 > m3) {
            return Err(config(format!("intensities must satisfy mu1 > mu2 > mu3, got {:?}", self.mu)));
        }
        if !(m1 > m2 + m3) {
            return Err(config(format!("intensities must satisfy mu1 > mu2 + mu3, got {:?}", self.mu)));
        }
        if !self.p_mu.iter().all(|&p| p > 0.0 && p.is_finite()) {
            return Err(config(format!("intensity probabilities must be > 0, got {:?}", self.p_mu)));
        }
        let total: f64 = self.p_mu.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(config(format!("intensity probabilities must sum to 1, got {total}")));
        }
        Ok(())
    }

    /// Probability that a pulse survives basis sifting in the X basis.
    pub fn sift_x(&self) -> f64 {
        self.pax * self.pbx
    }

    /// Probability that a pulse survives basis sifting in the Z basis.
    pub fn sift_z(&self) -> f64 {
        (1.0 - self.pax) * (1.0 - self.pbx)
    }
}

/// Expected sifted detections and errors, per intensity class and basis.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BlockCounts {
    pub n_x: [f64; 3],
    pub n_z: [f64; 3],
    pub m_x: [f64; 3],
    pub m_z: [f64; 3],
}

impl BlockCounts {
    pub fn n_x_total(&self) -> f64 {
        self.n_x.iter().sum()
    }

    pub fn n_z_total(&self) -> f64 {
        self.n_z.iter().sum()
    }

    pub fn m_x_total(&self) -> f64 {
        self.m_x.iter().sum()
    }

    pub fn m_z_total(&self) -> f64 {
        self.m_z.iter().sum()
    }

    /// Observed X-basis error rate, 0 when there are no detections.
    pub fn qber_x(&self) -> f64 {
        let n = self.n_x_total();
        if n > 0.0 {
            self.m_x_total() / n
        } else {
            0.0
        }
    }

    fn accumulate(&mut self, other: &BlockCounts) {
        for k in 0..INTENSITY_CLASSES {
            self.n_x[k] += other.n_x[k];
            self.n_z[k] += other.n_z[k];
            self.m_x[k] += other.m_x[k];
            self.m_z[k] += other.m_z[k];
        }
    }
}

/// Per-pulse click and error probabilities for each intensity class, as seen
/// in one measurement basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseRates {
    pub detection: [f64; 3],
    pub error: [f64; 3],
}

impl PulseRates {
    /// Rates for the intensities `mu` over `channel`.
    pub fn for_intensities(mu: &[f64; 3], channel: &ChannelConditions) -> Result<Self> {
        let p_d = channel.transmittance()?;
        let mut detection = [0.0; 3];
        let mut error = [0.0; 3];
        for k in 0..INTENSITY_CLASSES {
            detection[k] = detection_probability(mu[k], p_d, channel.p_ec, channel.p_ap)?;
            error[k] = error_probability(mu[k], p_d, channel.p_ec, channel.p_ap, channel.qber_i, detection[k])?;
        }
        Ok(Self { detection, error })
    }

    /// Element-wise mean of two rate tables.
    pub fn average(&self, other: &PulseRates) -> PulseRates {
        let mut out = *self;
        for k in 0..INTENSITY_CLASSES {
            out.detection[k] = 0.5 * (self.detection[k] + other.detection[k]);
            out.error[k] = 0.5 * (self.error[k] + other.error[k]);
        }
        out
    }
}

/// Inverts the dB loss definition: `p_d = 10^(-eta/10)`.
pub fn transmittance_from_loss(eta_loss_db: f64) -> Result<f64> {
    if !(eta_loss_db.is_finite() && eta_loss_db >= 0.0) {
        return Err(domain(format!("loss must be finite and >= 0 dB, got {eta_loss_db}")));
    }
    Ok(10f64.powf(-eta_loss_db / 10.0))
}

/// Probability that a pulse of mean photon number `k` produces a click.
///
/// `D_k = (1 + p_ap) * (1 - (1 - 2 p_ec) * exp(-p_d k))`
pub fn detection_probability(k: f64, p_d: f64, p_ec: f64, p_ap: f64) -> Result<f64> {
    check_pulse_inputs(k, p_d, p_ec, p_ap)?;
    Ok((1.0 + p_ap) * (1.0 - (1.0 - 2.0 * p_ec) * (-p_d * k).exp()))
}

/// Probability that a pulse of mean photon number `k` yields an erroneous bit.
///
/// `e_k = p_ec + p_ap D_k / 2 + qber_i (1 - exp(-p_d k))`
pub fn error_probability(k: f64, p_d: f64, p_ec: f64, p_ap: f64, qber_i: f64, d_k: f64) -> Result<f64> {
    check_pulse_inputs(k, p_d, p_ec, p_ap)?;
    if !(0.0..0.5).contains(&qber_i) {
        return Err(domain(format!("qber_i must lie in [0, 0.5), got {qber_i}")));
    }
    if !(d_k.is_finite() && d_k >= 0.0) {
        return Err(domain(format!("detection probability must be finite and >= 0, got {d_k}")));
    }
    Ok(p_ec + p_ap * d_k / 2.0 + qber_i * (1.0 - (-p_d * k).exp()))
}

fn check_pulse_inputs(k: f64, p_d: f64, p_ec: f64, p_ap: f64) -> Result<()> {
    if !(k.is_finite() && k >= 0.0) {
        return Err(domain(format!("intensity must be finite and >= 0, got {k}")));
    }
    if !(p_d > 0.0 && p_d <= 1.0) {
        return Err(domain(format!("transmittance must lie in (0, 1], got {p_d}")));
    }
    if !(0.0..0.5).contains(&p_ec) {
        return Err(domain(format!("p_ec must lie in [0, 0.5), got {p_ec}")));
    }
    if !(0.0..1.0).contains(&p_ap) {
        return Err(domain(format!("p_ap must lie in [0, 1), got {p_ap}")));
    }
    Ok(())
}

/// Expected block counts for one window of constant channel conditions.
pub fn expected_block_counts(params: &ProtocolParams, channel: &ChannelConditions) -> Result<BlockCounts> {
    params.validate()?;
    channel.validate()?;
    let rates = PulseRates::for_intensities(&params.mu, channel)?;
    Ok(block_counts_from_rates(params, &rates, &rates, channel.pulses()))
}

/// Expected block counts accumulated over consecutive time slots.
///
/// Each slot carries its own conditions; its `integration_time_s` is the slot
/// width. Errors are apportioned within each slot before summing.
pub fn expected_block_counts_slotted(params: &ProtocolParams, slots: &[ChannelConditions]) -> Result<BlockCounts> {
    params.validate()?;
    let mut total = BlockCounts::default();
    for slot in slots {
        slot.validate()?;
        let rates = PulseRates::for_intensities(&params.mu, slot)?;
        total.accumulate(&block_counts_from_rates(params, &rates, &rates, slot.pulses()));
    }
    Ok(total)
}

/// Sifted counts and errors given per-basis pulse rates.
///
/// Basis error totals are `m = n * sum(p_k e_k) / sum(p_k D_k)`, split across
/// intensity classes with weights `p_k D_k / sum(p_k D_k)`.
pub fn block_counts_from_rates(
    params: &ProtocolParams,
    x_rates: &PulseRates,
    z_rates: &PulseRates,
    pulses: f64,
) -> BlockCounts {
    let (n_x, m_x) = basis_counts(params.sift_x() * pulses, &params.p_mu, x_rates);
    let (n_z, m_z) = basis_counts(params.sift_z() * pulses, &params.p_mu, z_rates);
    BlockCounts { n_x, n_z, m_x, m_z }
}

fn basis_counts(scale: f64, p_mu: &[f64; 3], rates: &PulseRates) -> ([f64; 3], [f64; 3]) {
    let mut n = [0.0; 3];
    let mut m = [0.0; 3];
    let weighted_d: f64 = (0..3).map(|k| p_mu[k] * rates.detection[k]).sum();
    let weighted_e: f64 = (0..3).map(|k| p_mu[k] * rates.error[k]).sum();
    if scale <= 0.0 || weighted_d <= 0.0 {
        return (n, m);
    }
    for k in 0..INTENSITY_CLASSES {
        n[k] = scale * p_mu[k] * rates.detection[k];
    }
    let n_total: f64 = n.iter().sum();
    let m_total = n_total * weighted_e / weighted_d;
    for k in 0..INTENSITY_CLASSES {
        m[k] = m_total * p_mu[k] * rates.detection[k] / weighted_d;
    }
    (n, m)
}
