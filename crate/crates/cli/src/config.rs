//! Run configuration: flat dotted `key = value` text or JSON, layered as
//! defaults < file < environment < command-line flags.
//!
//! Text grammar, one entry per line:
//!
//! ```text
//! # comment
//! channel.eta_loss_db = 42
//! [protocol]          # prefixes following keys with "protocol."
//! pax = 0.8
//! ```
//!
//! Lists are comma separated (`20, 30, 40`) or `start:stop:count` ranges.

use std::collections::BTreeMap;

use ebb84_core::channel::{DEFAULT_F_S, DEFAULT_P_AP};
use ebb84_core::finite_key::{DEFAULT_EPS_C, DEFAULT_EPS_S, DEFAULT_F_EC};
use ebb84_core::scenario::linspace;
use ebb84_core::{
    BetaAllocation, ChannelConditions, Evaluation, OptimizationSpec, ProtocolParams, Reconciliation, Regime,
    SearchBounds, SecurityParams, SweepAxes,
};
use serde_json::Value;

use crate::error::CliError;

/// Prefix of environment variables that override configuration keys.
/// `EBB84_CHANNEL__P_EC=1e-5` sets `channel.p_ec`.
pub const ENV_PREFIX: &str = "EBB84_";

const KEYS: &[(&str, &str)] = &[
    ("channel.eta_loss_db", "30"),
    ("channel.p_ec", "1e-6"),
    ("channel.qber_i", "0.01"),
    ("channel.p_ap", ""),
    ("channel.f_s", ""),
    ("channel.integration_time_s", "1800"),
    ("security.eps_s", ""),
    ("security.eps_c", ""),
    ("security.beta_allocation", "per-bound"),
    ("security.beta", ""),
    ("security.reconciliation", "finite-size"),
    ("security.f_ec", ""),
    ("protocol.pax", "0.5"),
    ("protocol.pbx", "0.5"),
    ("protocol.mu1", "0.5"),
    ("protocol.mu2", "0.1"),
    ("protocol.mu3", "1e-9"),
    ("protocol.p_mu1", "0.7"),
    ("protocol.p_mu2", "0.2"),
    ("protocol.p_mu3", "0.1"),
    ("optimize.regime", "full"),
    ("optimize.restarts", "8"),
    ("optimize.seed", "0"),
    ("optimize.tolerance", "1e-5"),
    ("optimize.max_evals_per_restart", "2000"),
    ("optimize.probability_min", "0.001"),
    ("optimize.probability_max", "0.999"),
    ("optimize.intensity_min", "1e-4"),
    ("optimize.intensity_max", "1"),
    ("evaluation.mode", "fixed"),
    ("sweep.eta_loss_db", ""),
    ("sweep.log10_pec", ""),
    ("sweep.qber_i", ""),
    ("sweep.tau_s", ""),
    ("budget.target_bits", "0"),
    ("budget.resolution_db", "0.1"),
    ("budget.min_db", "0"),
    ("budget.max_db", "70"),
    ("worstcase.f", "0.1"),
    ("worstcase.grid_points", "3"),
    ("worstcase.nominal", "fixed"),
];

fn is_known(key: &str) -> bool {
    KEYS.iter().any(|(k, _)| *k == key)
}

/// Flat key-value store after all layers are merged.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn set(&mut self, key: &str, value: String) -> Result<(), CliError> {
        if !is_known(key) {
            return Err(CliError::Config(format!("unknown configuration key `{key}`")));
        }
        self.values.insert(key.to_string(), value);
        Ok(())
    }

    /// Parses a configuration file body; JSON when it starts with `{`.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        if text.trim_start().starts_with('{') {
            Self::parse_json(text)
        } else {
            Self::parse_text(text)
        }
    }

    fn parse_text(text: &str) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Config(format!("line {}: expected `key = value`, got `{line}`", i + 1)));
            };
            let key = key.trim();
            let full = if section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
            if cfg.values.contains_key(&full) {
                return Err(CliError::Config(format!("line {}: duplicate key `{full}`", i + 1)));
            }
            cfg.set(&full, value.trim().to_string())?;
        }
        Ok(cfg)
    }

    fn parse_json(text: &str) -> Result<Self, CliError> {
        let root: Value = serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid JSON: {e}")))?;
        let mut cfg = Self::default();
        flatten(&root, "", &mut cfg)?;
        Ok(cfg)
    }

    /// Applies `EBB84_SECTION__KEY` variables from `vars`.
    pub fn apply_env<I: IntoIterator<Item = (String, String)>>(&mut self, vars: I) -> Result<(), CliError> {
        let mut overrides: Vec<(String, String)> = vars
            .into_iter()
            .filter_map(|(k, v)| k.strip_prefix(ENV_PREFIX).map(|rest| (rest.to_ascii_lowercase().replace("__", "."), v)))
            .collect();
        overrides.sort();
        for (key, value) in overrides {
            self.set(&key, value)?;
        }
        Ok(())
    }

    fn raw(&self, key: &str) -> Option<&str> {
        debug_assert!(is_known(key), "{key}");
        self.values
            .get(key)
            .map(String::as_str)
            .or_else(|| KEYS.iter().find(|(k, _)| *k == key).map(|(_, d)| *d))
            .filter(|v| !v.is_empty())
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => parse_f64(key, v),
        }
    }

    fn f64(&self, key: &str) -> Result<f64, CliError> {
        self.f64_or(key, f64::NAN)
    }

    fn u64(&self, key: &str) -> Result<u64, CliError> {
        let v = self.raw(key).unwrap_or("");
        v.parse().map_err(|_| CliError::Config(format!("`{key}`: expected a non-negative integer, got `{v}`")))
    }

    fn text(&self, key: &str) -> &str {
        self.raw(key).unwrap_or("")
    }

    fn list(&self, key: &str, fallback: f64) -> Result<Vec<f64>, CliError> {
        let Some(v) = self.raw(key) else { return Ok(vec![fallback]) };
        let parts: Vec<&str> = v.split(':').map(str::trim).collect();
        if parts.len() == 3 {
            let count = parts[2]
                .parse::<usize>()
                .map_err(|_| CliError::Config(format!("`{key}`: range count must be an integer, got `{}`", parts[2])))?;
            return Ok(linspace(parse_f64(key, parts[0])?, parse_f64(key, parts[1])?, count));
        }
        v.split(',').map(|p| parse_f64(key, p.trim())).collect()
    }

    pub fn channel(&self) -> Result<ChannelConditions, CliError> {
        let c = ChannelConditions {
            eta_loss_db: self.f64("channel.eta_loss_db")?,
            p_ec: self.f64("channel.p_ec")?,
            qber_i: self.f64("channel.qber_i")?,
            p_ap: self.f64_or("channel.p_ap", DEFAULT_P_AP)?,
            f_s: self.f64_or("channel.f_s", DEFAULT_F_S)?,
            integration_time_s: self.f64("channel.integration_time_s")?,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn security(&self) -> Result<SecurityParams, CliError> {
        let allocation = match self.text("security.beta_allocation") {
            "per-bound" => BetaAllocation::PerBound,
            "combined" => BetaAllocation::Combined,
            other => return Err(invalid_choice("security.beta_allocation", other, "per-bound, combined")),
        };
        let eps_s = self.f64_or("security.eps_s", DEFAULT_EPS_S)?;
        let eps_c = self.f64_or("security.eps_c", DEFAULT_EPS_C)?;
        let mut sec = SecurityParams::with_allocation(eps_s, eps_c, allocation)?;
        if self.raw("security.beta").is_some() {
            sec = sec.with_beta(self.f64("security.beta")?)?;
        }
        let reconciliation = match self.text("security.reconciliation") {
            "finite-size" => Reconciliation::FiniteSize,
            "fixed-efficiency" => {
                Reconciliation::FixedEfficiency { f_ec: self.f64_or("security.f_ec", DEFAULT_F_EC)? }
            }
            other => return Err(invalid_choice("security.reconciliation", other, "finite-size, fixed-efficiency")),
        };
        Ok(sec.with_reconciliation(reconciliation))
    }

    fn mu(&self) -> Result<[f64; 3], CliError> {
        Ok([self.f64("protocol.mu1")?, self.f64("protocol.mu2")?, self.f64("protocol.mu3")?])
    }

    pub fn protocol(&self) -> Result<ProtocolParams, CliError> {
        let p_mu = [self.f64("protocol.p_mu1")?, self.f64("protocol.p_mu2")?, self.f64("protocol.p_mu3")?];
        Ok(ProtocolParams::new(self.f64("protocol.pax")?, self.f64("protocol.pbx")?, self.mu()?, p_mu)?)
    }

    pub fn optimization(&self) -> Result<OptimizationSpec, CliError> {
        let pbx = self.f64("protocol.pbx")?;
        let regime = match self.text("optimize.regime") {
            "full" => Regime::Full,
            "fixed-pbx" => Regime::FixedPbx { pbx },
            "fixed-pbx-and-mu" => Regime::FixedPbxAndMu { pbx, mu: self.mu()? },
            other => return Err(invalid_choice("optimize.regime", other, "full, fixed-pbx, fixed-pbx-and-mu")),
        };
        let spec = OptimizationSpec {
            bounds: SearchBounds {
                probability: (self.f64("optimize.probability_min")?, self.f64("optimize.probability_max")?),
                intensity: (self.f64("optimize.intensity_min")?, self.f64("optimize.intensity_max")?),
            },
            restarts: self.u64("optimize.restarts")? as usize,
            seed: self.u64("optimize.seed")?,
            tolerance: self.f64("optimize.tolerance")?,
            max_evals_per_restart: self.u64("optimize.max_evals_per_restart")? as usize,
            mu3: self.f64("protocol.mu3")?,
            ..OptimizationSpec::new(regime)
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn evaluation(&self) -> Result<Evaluation, CliError> {
        match self.text("evaluation.mode") {
            "fixed" => Ok(Evaluation::Fixed(self.protocol()?)),
            "optimized" => Ok(Evaluation::Optimized(self.optimization()?)),
            other => Err(invalid_choice("evaluation.mode", other, "fixed, optimized")),
        }
    }

    pub fn sweep_axes(&self, base: &ChannelConditions) -> Result<SweepAxes, CliError> {
        let axes = SweepAxes {
            eta_loss_db: self.list("sweep.eta_loss_db", base.eta_loss_db)?,
            log10_pec: self.list("sweep.log10_pec", base.p_ec.log10())?,
            qber_i: self.list("sweep.qber_i", base.qber_i)?,
            tau_s: self.list("sweep.tau_s", base.integration_time_s)?,
        };
        axes.validate()?;
        Ok(axes)
    }

    pub fn budget_target(&self) -> Result<u64, CliError> {
        self.u64("budget.target_bits")
    }

    pub fn budget_resolution(&self) -> Result<f64, CliError> {
        self.f64("budget.resolution_db")
    }

    pub fn budget_bracket(&self) -> Result<(f64, f64), CliError> {
        Ok((self.f64("budget.min_db")?, self.f64("budget.max_db")?))
    }

    pub fn worstcase_f(&self) -> Result<f64, CliError> {
        self.f64("worstcase.f")
    }

    pub fn worstcase_grid_points(&self) -> Result<usize, CliError> {
        Ok(self.u64("worstcase.grid_points")? as usize)
    }

    /// Whether the worst-case nominal design is re-optimised at the channel point.
    pub fn worstcase_optimized_nominal(&self) -> Result<bool, CliError> {
        match self.text("worstcase.nominal") {
            "fixed" => Ok(false),
            "optimized" => Ok(true),
            other => Err(invalid_choice("worstcase.nominal", other, "fixed, optimized")),
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64, CliError> {
    v.parse::<f64>().map_err(|_| CliError::Config(format!("`{key}`: expected a number, got `{v}`")))
}

fn invalid_choice(key: &str, got: &str, allowed: &str) -> CliError {
    CliError::Config(format!("`{key}`: unknown value `{got}` (expected one of: {allowed})"))
}

fn flatten(value: &Value, prefix: &str, cfg: &mut RawConfig) -> Result<(), CliError> {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(v, &key, cfg)?;
            }
            Ok(())
        }
        _ if prefix.is_empty() => Err(CliError::Config("JSON configuration must be an object".into())),
        Value::Array(items) => {
            let parts: Result<Vec<String>, CliError> = items.iter().map(|v| scalar(prefix, v)).collect();
            cfg.set(prefix, parts?.join(","))
        }
        v => {
            let s = scalar(prefix, v)?;
            cfg.set(prefix, s)
        }
    }
}

fn scalar(key: &str, v: &Value) -> Result<String, CliError> {
    match v {
        Value::Number(n) => Ok(n.to_string()),
        Value::String(s) => Ok(s.clone()),
        Value::Bool(b) => Ok(b.to_string()),
        _ => Err(CliError::Config(format!("`{key}`: expected a number or string"))),
    }
}
