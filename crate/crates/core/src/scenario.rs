//! Batch analyses over channel conditions: key-length grids, loss budgets,
//! key rate against integration time, and the basis-bias sifting equivalence.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelConditions, ProtocolParams};
use crate::error::{config, domain, Result};
use crate::finite_key::{KeyLengthResult, SecurityParams};
use crate::optimize::{evaluate, optimize, OptimizationSpec};

/// How protocol parameters are chosen at each channel point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Evaluation {
    Fixed(ProtocolParams),
    Optimized(OptimizationSpec),
}

/// Parameters used at one channel point and the resulting key length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluated {
    pub params: ProtocolParams,
    pub result: KeyLengthResult,
}

impl Evaluation {
    pub fn validate(&self) -> Result<()> {
        match self {
            Evaluation::Fixed(p) => p.validate(),
            Evaluation::Optimized(spec) => spec.validate(),
        }
    }

    pub fn run(&self, channel: &ChannelConditions, sec: &SecurityParams) -> Result<Evaluated> {
        match self {
            Evaluation::Fixed(params) => Ok(Evaluated { params: *params, result: evaluate(params, channel, sec)? }),
            Evaluation::Optimized(spec) => {
                let out = optimize(spec, channel, sec)?;
                Ok(Evaluated { params: out.best_params, result: out.best })
            }
        }
    }
}

/// Grid axes. Each axis is a non-empty, finite, strictly monotone list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxes {
    pub eta_loss_db: Vec<f64>,
    pub log10_pec: Vec<f64>,
    pub qber_i: Vec<f64>,
    pub tau_s: Vec<f64>,
}

impl SweepAxes {
    /// Single point taken from `channel`.
    pub fn point(channel: &ChannelConditions) -> Self {
        Self {
            eta_loss_db: vec![channel.eta_loss_db],
            log10_pec: vec![channel.p_ec.log10()],
            qber_i: vec![channel.qber_i],
            tau_s: vec![channel.integration_time_s],
        }
    }

    pub fn len(&self) -> usize {
        self.eta_loss_db.len() * self.log10_pec.len() * self.qber_i.len() * self.tau_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        for (name, axis) in [
            ("eta_loss_db", &self.eta_loss_db),
            ("log10_pec", &self.log10_pec),
            ("qber_i", &self.qber_i),
            ("tau_s", &self.tau_s),
        ] {
            check_axis(name, axis)?;
        }
        Ok(())
    }
}

fn check_axis(name: &str, axis: &[f64]) -> Result<()> {
    if axis.is_empty() {
        return Err(config(format!("sweep axis {name} is empty")));
    }
    if let Some(v) = axis.iter().find(|v| !v.is_finite()) {
        return Err(config(format!("sweep axis {name} contains non-finite value {v}")));
    }
    let up = axis.windows(2).all(|w| w[1] > w[0]);
    let down = axis.windows(2).all(|w| w[1] < w[0]);
    if !(up || down) {
        return Err(config(format!("sweep axis {name} must be strictly monotone")));
    }
    Ok(())
}

/// Evenly spaced axis from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, points: usize) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![start],
        _ => (0..points)
            .map(|i| if i == points - 1 { stop } else { start + (stop - start) * i as f64 / (points - 1) as f64 })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axes: SweepAxes,
    /// Supplies every channel field that is not swept.
    pub base: ChannelConditions,
    pub evaluation: Evaluation,
    pub sec: SecurityParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eta_loss_db: f64,
    pub log10_pec: f64,
    pub qber_i: f64,
    pub tau_s: f64,
    pub params: ProtocolParams,
    pub result: KeyLengthResult,
}

/// Evaluates every grid point. Rows come out row-major over
/// (eta_loss_db, log10_pec, qber_i, tau_s), last axis fastest.
pub fn sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.axes.validate()?;
    spec.evaluation.validate()?;
    let a = &spec.axes;
    let mut points = Vec::with_capacity(a.len());
    for &eta in &a.eta_loss_db {
        for &lp in &a.log10_pec {
            for &q in &a.qber_i {
                for &t in &a.tau_s {
                    points.push((eta, lp, q, t));
                }
            }
        }
    }
    points
        .into_par_iter()
        .map(|(eta, lp, q, t)| {
            let channel = ChannelConditions {
                eta_loss_db: eta,
                p_ec: 10f64.powf(lp),
                qber_i: q,
                integration_time_s: t,
                ..spec.base
            };
            channel.validate()?;
            let e = spec.evaluation.run(&channel, &spec.sec)?;
            Ok(SweepRow { eta_loss_db: eta, log10_pec: lp, qber_i: q, tau_s: t, params: e.params, result: e.result })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBudgetQuery {
    /// Required key length; `0` asks for any positive key.
    pub target_bits: u64,
    /// Conditions at each probe; the loss field is overwritten.
    pub channel: ChannelConditions,
    pub evaluation: Evaluation,
    pub sec: SecurityParams,
    /// Width of the final bracket in dB.
    pub resolution_db: f64,
    /// Initial search interval in dB.
    pub bracket: (f64, f64),
}

impl LossBudgetQuery {
    pub fn new(target_bits: u64, channel: ChannelConditions, evaluation: Evaluation, sec: SecurityParams) -> Self {
        Self { target_bits, channel, evaluation, sec, resolution_db: 0.1, bracket: (0.0, 70.0) }
    }

    pub fn with_resolution(mut self, resolution_db: f64) -> Self {
        self.resolution_db = resolution_db;
        self
    }

    pub fn with_bracket(mut self, lo: f64, hi: f64) -> Self {
        self.bracket = (lo, hi);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BudgetMethod {
    Bisection,
    GridScan,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBudget {
    /// Largest loss meeting the target, or `None` when even the bracket floor fails.
    pub eta_loss_db: Option<f64>,
    /// Key length at `eta_loss_db`.
    pub ell: u64,
    pub method: BudgetMethod,
    /// True when the target is still met at the widened upper end.
    pub saturated: bool,
    pub probes: usize,
}

/// Largest loss with key length at least the target.
///
/// Bisection assumes the key length falls with loss. That is checked at five
/// points across the bracket first; a violation switches to a scan at the
/// requested resolution.
pub fn max_loss(query: &LossBudgetQuery) -> Result<LossBudget> {
    query.evaluation.validate()?;
    max_loss_with(query.target_bits, query.bracket, query.resolution_db, |eta| {
        Ok(query.evaluation.run(&query.channel.with_eta_loss_db(eta), &query.sec)?.result.ell)
    })
}

/// [`max_loss`] for an arbitrary loss-to-key-length map.
pub fn max_loss_with<F>(target_bits: u64, bracket: (f64, f64), resolution_db: f64, ell_at: F) -> Result<LossBudget>
where
    F: Fn(f64) -> Result<u64> + Sync,
{
    let (lo, mut hi) = bracket;
    if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo < hi) {
        return Err(config(format!("loss bracket must satisfy 0 <= lo < hi, got ({lo}, {hi})")));
    }
    if !(resolution_db > 0.0 && resolution_db.is_finite()) {
        return Err(config(format!("resolution_db must be > 0, got {resolution_db}")));
    }
    let need = target_bits.max(1);
    let mut probes = 0;
    let mut probe = |eta: f64| {
        probes += 1;
        ell_at(eta)
    };
    let done = |eta, ell, method, saturated, probes| LossBudget { eta_loss_db: eta, ell, method, saturated, probes };

    let ell_lo = probe(lo)?;
    if ell_lo < need {
        return Ok(done(None, ell_lo, BudgetMethod::Bisection, false, probes));
    }
    let mut ell_hi = probe(hi)?;
    let mut widenings = 0;
    while ell_hi >= need && widenings < 3 {
        hi += bracket.1 - bracket.0;
        ell_hi = probe(hi)?;
        widenings += 1;
    }
    if ell_hi >= need {
        return Ok(done(Some(hi), ell_hi, BudgetMethod::Bisection, true, probes));
    }

    let mut spots = vec![(lo, ell_lo)];
    for i in 1..4 {
        let eta = lo + (hi - lo) * i as f64 / 4.0;
        spots.push((eta, probe(eta)?));
    }
    spots.push((hi, ell_hi));
    if !spots.windows(2).all(|w| w[1].1 <= w[0].1) {
        let count = ((hi - lo) / resolution_db).ceil() as usize;
        let etas: Vec<f64> = (0..=count).map(|i| (lo + resolution_db * i as f64).min(hi)).collect();
        let ells: Vec<u64> = etas.par_iter().map(|&eta| ell_at(eta)).collect::<Result<_>>()?;
        probes += etas.len();
        let best = etas.iter().zip(&ells).rev().find(|(_, &ell)| ell >= need);
        return Ok(done(best.map(|(e, _)| *e), best.map_or(0, |(_, l)| *l), BudgetMethod::GridScan, false, probes));
    }

    // Tighten the bracket with the spot checks: last passing, first failing.
    let mut good = spots.iter().rev().find(|s| s.1 >= need).copied().unwrap_or((lo, ell_lo));
    let mut bad = spots.iter().find(|s| s.1 < need).map(|s| s.0).unwrap_or(hi);
    while bad - good.0 > resolution_db {
        let mid = 0.5 * (good.0 + bad);
        let ell = probe(mid)?;
        if ell >= need {
            good = (mid, ell);
        } else {
            bad = mid;
        }
    }
    Ok(done(Some(good.0), good.1, BudgetMethod::Bisection, false, probes))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkrPoint {
    pub tau_s: f64,
    pub ell: u64,
    /// Secret bits per minute of integration time.
    pub skr_bits_per_min: f64,
    pub params: ProtocolParams,
}

/// Secret key rate at each integration time; `times` must be positive and ascending.
pub fn skr_vs_time(
    times: &[f64],
    channel: &ChannelConditions,
    evaluation: &Evaluation,
    sec: &SecurityParams,
) -> Result<Vec<SkrPoint>> {
    evaluation.validate()?;
    if times.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(config("integration times must be finite and > 0"));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(config("integration times must be sorted ascending"));
    }
    times
        .par_iter()
        .map(|&tau| {
            let e = evaluation.run(&channel.with_integration_time(tau), sec)?;
            let ell = e.result.ell;
            Ok(SkrPoint { tau_s: tau, ell, skr_bits_per_min: ell as f64 * 60.0 / tau, params: e.params })
        })
        .collect()
}

/// Symmetric basis choice with the same X:Z sifted ratio as a biased pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiftingEquivalence {
    /// Common X-basis probability giving the same X:Z ratio.
    pub p_x: f64,
    /// X:Z sifted ratio `pax pbx / ((1 - pax)(1 - pbx))`.
    pub k: f64,
    /// Sifted fraction with the original biases.
    pub f: f64,
    /// Sifted fraction with both sides at `p_x`.
    pub f_prime: f64,
}

pub fn sifting_equivalence(pax: f64, pbx: f64) -> Result<SiftingEquivalence> {
    for (name, v) in [("pax", pax), ("pbx", pbx)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(domain(format!("{name} must lie in (0, 1), got {v}")));
        }
    }
    let k = pax * pbx / ((1.0 - pax) * (1.0 - pbx));
    let root = k.sqrt();
    Ok(SiftingEquivalence {
        p_x: root / (1.0 + root),
        k,
        f: pax * pbx + (1.0 - pax) * (1.0 - pbx),
        f_prime: (1.0 + k) / (1.0 + root).powi(2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sifting_examples() {
        let s = sifting_equivalence(0.5, 0.5).unwrap();
        assert_eq!((s.p_x, s.k, s.f, s.f_prime), (0.5, 1.0, 0.5, 0.5));
        let s = sifting_equivalence(0.9, 0.5).unwrap();
        assert!((s.k - 9.0).abs() < 1e-12);
        assert!((s.p_x - 0.75).abs() < 1e-12);
        assert!((s.f - 0.5).abs() < 1e-12);
        assert!((s.f_prime - 0.625).abs() < 1e-12);
        assert!(sifting_equivalence(0.0, 0.5).is_err());
        assert!(sifting_equivalence(0.5, 1.0).is_err());
    }

    #[test]
    fn axis_checks() {
        assert!(check_axis("a", &[]).is_err());
        assert!(check_axis("a", &[1.0, 1.0]).is_err());
        assert!(check_axis("a", &[1.0, f64::NAN]).is_err());
        assert!(check_axis("a", &[3.0, 2.0, 1.0]).is_ok());
        assert_eq!(linspace(10.0, 20.0, 3), vec![10.0, 15.0, 20.0]);
    }

    #[test]
    fn unsorted_times_rejected() {
        let ch = ChannelConditions::new(30.0, 1e-6, 0.01, 60.0).unwrap();
        let p = ProtocolParams::new(0.8, 0.8, [0.5, 0.1, 1e-9], [0.7, 0.2, 0.1]).unwrap();
        let r = skr_vs_time(&[60.0, 30.0], &ch, &Evaluation::Fixed(p), &SecurityParams::default());
        assert!(r.is_err());
    }
}
