//! Protocol parameter optimisation under the three deployment regimes:
//! everything free (receiver bias tied to the sender's), receiver bias fixed,
//! and receiver bias plus intensities fixed.
//!
//! Search happens in unconstrained coordinates. Probabilities go through a
//! scaled logistic map, `p_mu` through stick breaking, and `mu2` is placed
//! between its lower bound and `mu1 - mu3`, so every decoded point satisfies
//! the intensity ordering and simplex constraints.

mod nelder_mead;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{expected_block_counts, ChannelConditions, ProtocolParams, DEFAULT_MU3};
use crate::error::{config, Result};
use crate::finite_key::{secure_key_length, KeyLengthResult, SecurityParams};

pub use nelder_mead::{minimize, Options as NelderMeadOptions, Outcome as NelderMeadOutcome};

/// Which parameters are free.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "kebab-case")]
pub enum Regime {
    /// Free: `pax, p_mu1, p_mu2, mu1, mu2`, with `pbx = pax`.
    Full,
    /// Free: `pax, p_mu1, p_mu2, mu1, mu2`.
    FixedPbx { pbx: f64 },
    /// Free: `pax, p_mu1, p_mu2`.
    FixedPbxAndMu { pbx: f64, mu: [f64; 3] },
}

impl Regime {
    fn dimension(&self) -> usize {
        match self {
            Regime::FixedPbxAndMu { .. } => 3,
            _ => 5,
        }
    }
}

/// Box limits applied to the free variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBounds {
    pub probability: (f64, f64),
    pub intensity: (f64, f64),
}

impl Default for SearchBounds {
    fn default() -> Self {
        Self { probability: (0.001, 0.999), intensity: (1e-4, 1.0) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizationSpec {
    pub regime: Regime,
    pub bounds: SearchBounds,
    pub restarts: usize,
    pub seed: u64,
    /// Simplex diameter, in transformed coordinates, at which a restart stops.
    pub tolerance: f64,
    pub max_evals_per_restart: usize,
    /// Vacuum intensity used whenever the intensities are free.
    pub mu3: f64,
}

impl OptimizationSpec {
    pub fn new(regime: Regime) -> Self {
        Self {
            regime,
            bounds: SearchBounds::default(),
            restarts: 8,
            seed: 0,
            tolerance: 1e-5,
            max_evals_per_restart: 2000,
            mu3: DEFAULT_MU3,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (plo, phi) = self.bounds.probability;
        if !(plo > 0.0 && plo < phi && phi < 1.0 && 3.0 * plo < 1.0) {
            return Err(config(format!("probability bounds must satisfy 0 < lo < hi < 1 and 3 lo < 1, got ({plo}, {phi})")));
        }
        let (ilo, ihi) = self.bounds.intensity;
        if !(ilo > 0.0 && ilo < ihi && ihi.is_finite()) {
            return Err(config(format!("intensity bounds must satisfy 0 < lo < hi, got ({ilo}, {ihi})")));
        }
        if !(self.mu3 >= 0.0 && self.mu3 < ilo) {
            return Err(config(format!("mu3 must lie in [0, {ilo}), got {}", self.mu3)));
        }
        if self.restarts == 0 || self.max_evals_per_restart == 0 {
            return Err(config("restarts and max_evals_per_restart must be positive"));
        }
        if !(self.tolerance > 0.0) {
            return Err(config(format!("tolerance must be > 0, got {}", self.tolerance)));
        }
        match self.regime {
            Regime::Full => {}
            Regime::FixedPbx { pbx } | Regime::FixedPbxAndMu { pbx, .. } => {
                if !(pbx > 0.0 && pbx < 1.0) {
                    return Err(config(format!("fixed pbx must lie in (0, 1), got {pbx}")));
                }
            }
        }
        if let Regime::FixedPbxAndMu { mu, pbx } = self.regime {
            let probe = ProtocolParams { pax: 0.5, pbx, mu, p_mu: [1.0 / 3.0; 3] };
            probe.validate()?;
        }
        Ok(())
    }
}

/// Summary of one multi-start run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartTrace {
    pub start: Vec<f64>,
    pub best_objective: f64,
    pub best_ell: u64,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub best_params: ProtocolParams,
    pub best_ell: u64,
    pub best: KeyLengthResult,
    pub evaluations: usize,
    pub restarts: Vec<RestartTrace>,
}

/// True iff the intensity ordering, intensity-sum and simplex constraints hold.
pub fn feasible(params: &ProtocolParams) -> bool {
    params.validate().is_ok()
}

/// Expected counts followed by the estimation chain.
pub fn evaluate(params: &ProtocolParams, channel: &ChannelConditions, sec: &SecurityParams) -> Result<KeyLengthResult> {
    let counts = expected_block_counts(params, channel)?;
    secure_key_length(&counts, params, sec)
}

/// Maps unconstrained coordinates onto feasible protocol parameters.
struct ParamMap {
    regime: Regime,
    bounds: SearchBounds,
    mu3: f64,
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(u: f64) -> f64 {
    (u / (1.0 - u)).ln()
}

impl ParamMap {
    fn decode(&self, x: &[f64]) -> Option<ProtocolParams> {
        let (plo, phi) = self.bounds.probability;
        let pax = plo + (phi - plo) * logistic(x[0]);
        let p1 = plo + (1.0 - 3.0 * plo) * logistic(x[1]);
        let p2 = plo + (1.0 - 2.0 * plo - p1) * logistic(x[2]);
        let p3 = 1.0 - p1 - p2;
        let (pbx, mu) = match self.regime {
            Regime::Full => (pax, self.intensities(x[3], x[4])?),
            Regime::FixedPbx { pbx } => (pbx, self.intensities(x[3], x[4])?),
            Regime::FixedPbxAndMu { pbx, mu } => (pbx, mu),
        };
        let params = ProtocolParams { pax, pbx, mu, p_mu: [p1, p2, p3] };
        feasible(&params).then_some(params)
    }

    fn intensities(&self, x1: f64, x2: f64) -> Option<[f64; 3]> {
        let (ilo, ihi) = self.bounds.intensity;
        let mu1 = ilo + (ihi - ilo) * logistic(x1);
        let top = ihi.min(mu1 - self.mu3);
        if top <= ilo {
            return None;
        }
        let mu2 = ilo + (top - ilo) * logistic(x2);
        Some([mu1, mu2, self.mu3])
    }

    /// Unit-cube point to transformed coordinates.
    fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter().map(|&v| logit(v.clamp(1e-6, 1.0 - 1e-6))).collect()
    }
}

fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let mut result = 0.0;
    let mut f = 1.0 / base as f64;
    while index > 0 {
        result += f * (index % base) as f64;
        index /= base;
        f /= base as f64;
    }
    result
}

/// Seeded, randomly shifted Halton points in the unit cube.
fn start_points(dimension: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    const PRIMES: [u64; 5] = [2, 3, 5, 7, 11];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..dimension).map(|_| rng.random::<f64>()).collect();
    (0..count)
        .map(|i| {
            (0..dimension)
                .map(|d| (radical_inverse(i as u64 + 1, PRIMES[d]) + shift[d]).fract())
                .collect()
        })
        .collect()
}

struct Candidate {
    params: ProtocolParams,
    result: KeyLengthResult,
}

fn key(params: &ProtocolParams) -> [f64; 8] {
    [
        params.pax,
        params.pbx,
        params.mu[0],
        params.mu[1],
        params.mu[2],
        params.p_mu[0],
        params.p_mu[1],
        params.p_mu[2],
    ]
}

/// Higher objective wins; ties go to the lexicographically smaller parameter vector.
fn better(a: &Candidate, b: &Candidate) -> bool {
    match a.result.objective.total_cmp(&b.result.objective) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => {
            let (ka, kb) = (key(&a.params), key(&b.params));
            ka.iter().zip(&kb).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()) == Some(std::cmp::Ordering::Less)
        }
    }
}

struct RestartOutcome {
    best: Option<Candidate>,
    trace: RestartTrace,
}

fn run_restart(
    map: &ParamMap,
    start_unit: &[f64],
    spec: &OptimizationSpec,
    channel: &ChannelConditions,
    sec: &SecurityParams,
) -> RestartOutcome {
    let mut best: Option<Candidate> = None;
    let mut objective = |x: &[f64]| -> f64 {
        let Some(params) = map.decode(x) else {
            return f64::INFINITY;
        };
        match evaluate(&params, channel, sec) {
            Ok(result) => {
                let value = -result.objective;
                let cand = Candidate { params, result };
                if best.as_ref().map_or(true, |b| better(&cand, b)) {
                    best = Some(cand);
                }
                value
            }
            Err(_) => f64::INFINITY,
        }
    };

    let start = map.from_unit(start_unit);
    let mut remaining = spec.max_evals_per_restart;
    let mut evaluations = 0;
    let mut converged = false;
    let mut point = start.clone();
    let mut step = 1.0;
    // A converged simplex is restarted once from its best vertex to escape
    // premature collapse on ridges.
    for _ in 0..2 {
        if remaining == 0 {
            break;
        }
        let opts = NelderMeadOptions { x_tolerance: spec.tolerance, max_evaluations: remaining, initial_step: step };
        let out = minimize(&mut objective, &point, &opts);
        evaluations += out.evaluations;
        remaining = remaining.saturating_sub(out.evaluations);
        converged = out.converged;
        point = out.x;
        step = 0.25;
        if !converged {
            break;
        }
    }

    let trace = RestartTrace {
        start,
        best_objective: best.as_ref().map_or(f64::NEG_INFINITY, |b| b.result.objective),
        best_ell: best.as_ref().map_or(0, |b| b.result.ell),
        evaluations,
        converged,
    };
    RestartOutcome { best, trace }
}

/// Maximises the secure key length over the regime's free variables.
pub fn optimize(spec: &OptimizationSpec, channel: &ChannelConditions, sec: &SecurityParams) -> Result<OptimizationResult> {
    spec.validate()?;
    channel.validate()?;
    let map = ParamMap { regime: spec.regime, bounds: spec.bounds, mu3: spec.mu3 };
    let dim = spec.regime.dimension();
    let mut starts = vec![default_start(dim)];
    starts.extend(start_points(dim, spec.restarts.saturating_sub(1), spec.seed));

    let outcomes: Vec<RestartOutcome> = starts
        .par_iter()
        .map(|u| run_restart(&map, u, spec, channel, sec))
        .collect();

    let evaluations = outcomes.iter().map(|o| o.trace.evaluations).sum();
    let mut best: Option<Candidate> = None;
    let mut traces = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        traces.push(o.trace);
        if let Some(c) = o.best {
            if best.as_ref().map_or(true, |b| better(&c, b)) {
                best = Some(c);
            }
        }
    }
    let best = best.ok_or_else(|| config("no feasible point could be evaluated in the search region"))?;
    Ok(OptimizationResult {
        best_params: best.params,
        best_ell: best.result.ell,
        best: best.result,
        evaluations,
        restarts: traces,
    })
}

/// Unit-cube start near typical optima: strong X bias, mostly signal pulses.
fn default_start(dim: usize) -> Vec<f64> {
    let typical = [0.8, 0.7, 0.6, 0.55, 0.25];
    typical[..dim].to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(regime: Regime) -> ParamMap {
        ParamMap { regime, bounds: SearchBounds::default(), mu3: DEFAULT_MU3 }
    }

    #[test]
    fn feasibility_examples() {
        let p = [1.0 / 3.0; 3];
        assert!(feasible(&ProtocolParams { pax: 0.5, pbx: 0.5, mu: [0.5, 0.1, 0.0], p_mu: p }));
        assert!(!feasible(&ProtocolParams { pax: 0.5, pbx: 0.5, mu: [0.5, 0.3, 0.3], p_mu: p }));
        assert!(!feasible(&ProtocolParams { pax: 0.5, pbx: 0.5, mu: [0.4, 0.3, 0.15], p_mu: p }));
    }

    #[test]
    fn decoded_points_are_feasible_and_bounded() {
        let m = map(Regime::FixedPbx { pbx: 0.3 });
        for u in start_points(5, 200, 7) {
            let x = m.from_unit(&u);
            let p = m.decode(&x).unwrap();
            assert!(feasible(&p));
            assert!(p.pax > 0.001 - 1e-15 && p.pax < 0.999 + 1e-15);
            assert!(p.p_mu.iter().all(|&v| v >= 0.001 - 1e-12));
            assert!(p.mu[0] <= 1.0 && p.mu[1] >= 1e-4);
            assert_eq!(p.pbx, 0.3);
        }
    }

    #[test]
    fn full_regime_ties_bases() {
        let m = map(Regime::Full);
        let p = m.decode(&[0.3, 0.1, -0.2, 0.4, -1.0]).unwrap();
        assert_eq!(p.pax, p.pbx);
    }

    #[test]
    fn halton_points_depend_on_seed() {
        let a = start_points(3, 4, 1);
        assert_eq!(a, start_points(3, 4, 1));
        assert_ne!(a, start_points(3, 4, 2));
        assert!(a.iter().flatten().all(|&v| (0.0..1.0).contains(&v)));
    }

    #[test]
    fn spec_validation() {
        let mut spec = OptimizationSpec::new(Regime::FixedPbx { pbx: 1.2 });
        assert!(spec.validate().is_err());
        spec.regime = Regime::FixedPbxAndMu { pbx: 0.5, mu: [0.4, 0.3, 0.15] };
        assert!(spec.validate().is_err());
        spec.regime = Regime::Full;
        spec.restarts = 0;
        assert!(spec.validate().is_err());
    }
}
