//! Worst-case key length when the sender's intensities are only known to lie
//! within a fractional interval around their nominal values.
//!
//! The signal and decoy intensity of each of the four signal states (H, V, D,
//! A) vary independently, and so does the intensity pair assumed by the
//! estimator. Channel statistics are generated from the true per-state
//! intensities, averaged over the two states of each basis; the estimation
//! chain uses the estimator's pair. The vacuum intensity is never varied.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{block_counts_from_rates, ChannelConditions, ProtocolParams, PulseRates};
use crate::error::{config, Result};
use crate::finite_key::{secure_key_length, KeyLengthResult, SecurityParams};

/// One varied intensity, in grid enumeration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridDimension {
    HSignal,
    HDecoy,
    VSignal,
    VDecoy,
    DSignal,
    DDecoy,
    ASignal,
    ADecoy,
    EstimatorSignal,
    EstimatorDecoy,
}

impl GridDimension {
    /// All dimensions, outermost first.
    pub const ALL: [GridDimension; 10] = [
        GridDimension::HSignal,
        GridDimension::HDecoy,
        GridDimension::VSignal,
        GridDimension::VDecoy,
        GridDimension::DSignal,
        GridDimension::DDecoy,
        GridDimension::ASignal,
        GridDimension::ADecoy,
        GridDimension::EstimatorSignal,
        GridDimension::EstimatorDecoy,
    ];

    fn slot(self) -> (usize, usize) {
        let i = self as usize;
        (i / 2, i % 2)
    }
}

/// Intensities actually emitted for each signal state, plus those assumed by the estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntensityConfiguration {
    /// `[mu1, mu2]` for H, V, D, A.
    pub states: [[f64; 2]; 4],
    pub estimator: [f64; 2],
}

impl IntensityConfiguration {
    pub fn nominal(params: &ProtocolParams) -> Self {
        let pair = [params.mu[0], params.mu[1]];
        Self { states: [pair; 4], estimator: pair }
    }

    pub fn get(&self, dim: GridDimension) -> f64 {
        let (row, col) = dim.slot();
        if row < 4 {
            self.states[row][col]
        } else {
            self.estimator[col]
        }
    }

    pub fn set(&mut self, dim: GridDimension, value: f64) {
        let (row, col) = dim.slot();
        if row < 4 {
            self.states[row][col] = value;
        } else {
            self.estimator[col] = value;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntensityUncertaintyModel {
    /// Maximal fractional deviation from nominal, in `[0, 0.5)`.
    pub f: f64,
    pub nominal: ProtocolParams,
    pub grid_points_per_dim: usize,
}

impl IntensityUncertaintyModel {
    pub fn new(f: f64, nominal: ProtocolParams) -> Result<Self> {
        let m = Self { f, nominal, grid_points_per_dim: 3 };
        m.validate()?;
        Ok(m)
    }

    pub fn with_grid_points(mut self, points: usize) -> Result<Self> {
        self.grid_points_per_dim = points;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.f) {
            return Err(config(format!("fractional deviation f must lie in [0, 0.5), got {}", self.f)));
        }
        if self.grid_points_per_dim == 0 {
            return Err(config("grid_points_per_dim must be >= 1"));
        }
        self.nominal.validate()?;
        let [mu1, mu2, mu3] = self.nominal.mu;
        if !(mu1 * (1.0 - self.f) > mu2 * (1.0 + self.f) + mu3) {
            return Err(config(format!(
                "f = {} lets the estimator's signal intensity fall below decoy plus vacuum for mu = {:?}",
                self.f, self.nominal.mu
            )));
        }
        Ok(())
    }

    /// Evenly spaced candidates over `[mu (1 - f), mu (1 + f)]`; the nominal value alone for one point.
    pub fn candidates(&self, mu: f64) -> Vec<f64> {
        let g = self.grid_points_per_dim;
        if g == 1 {
            return vec![mu];
        }
        let (lo, hi) = (mu * (1.0 - self.f), mu * (1.0 + self.f));
        (0..g)
            .map(|i| {
                if i == g - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (g - 1) as f64
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCase {
    pub min_ell: u64,
    pub argmin: IntensityConfiguration,
    pub result: KeyLengthResult,
    pub nominal_ell: u64,
    pub evaluations: u64,
}

/// Key length when the states emit `config` and the estimator assumes `config.estimator`.
pub fn key_length_for_configuration(
    nominal: &ProtocolParams,
    configuration: &IntensityConfiguration,
    channel: &ChannelConditions,
    sec: &SecurityParams,
) -> Result<KeyLengthResult> {
    channel.validate()?;
    let mu3 = nominal.mu[2];
    let rates = |pair: [f64; 2]| PulseRates::for_intensities(&[pair[0], pair[1], mu3], channel);
    let s = &configuration.states;
    let x = rates(s[0])?.average(&rates(s[1])?);
    let z = rates(s[2])?.average(&rates(s[3])?);
    let estimator = estimator_params(nominal, configuration.estimator)?;
    let counts = block_counts_from_rates(&estimator, &x, &z, channel.pulses());
    secure_key_length(&counts, &estimator, sec)
}

fn estimator_params(nominal: &ProtocolParams, pair: [f64; 2]) -> Result<ProtocolParams> {
    let p = ProtocolParams { mu: [pair[0], pair[1], nominal.mu[2]], ..*nominal };
    p.validate()?;
    Ok(p)
}

/// Minimum key length over the full grid of all ten dimensions.
pub fn worst_case_key_length(
    model: &IntensityUncertaintyModel,
    channel: &ChannelConditions,
    sec: &SecurityParams,
) -> Result<WorstCase> {
    worst_case_over(model, &GridDimension::ALL, channel, sec)
}

/// Minimum key length when only `dims` vary; the others stay nominal.
///
/// Grid points are enumerated row-major in the order of [`GridDimension::ALL`]
/// (last dimension fastest); among equal minima the first one wins.
pub fn worst_case_over(
    model: &IntensityUncertaintyModel,
    dims: &[GridDimension],
    channel: &ChannelConditions,
    sec: &SecurityParams,
) -> Result<WorstCase> {
    model.validate()?;
    channel.validate()?;
    let mut order: Vec<GridDimension> = GridDimension::ALL.iter().copied().filter(|d| dims.contains(d)).collect();
    order.dedup();

    let nominal_cfg = IntensityConfiguration::nominal(&model.nominal);
    let values: Vec<Vec<f64>> = order.iter().map(|&d| model.candidates(nominal_cfg.get(d))).collect();
    let g = model.grid_points_per_dim as u64;
    let total = g
        .checked_pow(order.len() as u32)
        .ok_or_else(|| config("worst-case grid is too large"))?;

    let decode = |mut index: u64| {
        let mut cfg = nominal_cfg;
        for (pos, &dim) in order.iter().enumerate().rev() {
            cfg.set(dim, values[pos][(index % g) as usize]);
            index /= g;
        }
        cfg
    };

    let (min_ell, argmin_index, evaluations) = (0..total)
        .into_par_iter()
        .map(|i| {
            key_length_for_configuration(&model.nominal, &decode(i), channel, sec).map(|r| (r.ell, i, 1u64))
        })
        .try_reduce(
            || (u64::MAX, u64::MAX, 0),
            |a, b| {
                let best = if (b.0, b.1) < (a.0, a.1) { b } else { a };
                Ok((best.0, best.1, a.2 + b.2))
            },
        )?;

    let argmin = decode(argmin_index);
    let result = key_length_for_configuration(&model.nominal, &argmin, channel, sec)?;
    let nominal_ell = key_length_for_configuration(&model.nominal, &nominal_cfg, channel, sec)?.ell;
    Ok(WorstCase { min_ell, argmin, result, nominal_ell, evaluations })
}
