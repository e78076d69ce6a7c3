//! CSV and JSON renderings of command results.
//!
//! Sweep CSV header:
//! `eta_loss_db,log10_pec,qber_i,tau_s,ell,s_x0,s_x1,phi_x,lambda_ec,pax,pbx,mu1,mu2,mu3,p_mu1,p_mu2,p_mu3`.
//! Floats are written in shortest round-trip form.

use ebb84_core::{
    ChannelConditions, IntensityUncertaintyModel, KeyLengthResult, LossBudget, LossBudgetQuery, OptimizationResult,
    ProtocolParams, SiftingEquivalence, SweepRow, WorstCase,
};
use serde_json::{json, Value};

use crate::error::CliError;

const SWEEP_HEADER: [&str; 17] = [
    "eta_loss_db",
    "log10_pec",
    "qber_i",
    "tau_s",
    "ell",
    "s_x0",
    "s_x1",
    "phi_x",
    "lambda_ec",
    "pax",
    "pbx",
    "mu1",
    "mu2",
    "mu3",
    "p_mu1",
    "p_mu2",
    "p_mu3",
];

pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
    json: Value,
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Result<String, CliError> {
        let mut s = serde_json::to_string_pretty(&self.json).map_err(|e| CliError::Numeric(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("result types serialise")
}

fn sweep_row(eta: f64, log10_pec: f64, qber: f64, tau: f64, params: &ProtocolParams, r: &KeyLengthResult) -> Vec<String> {
    let mut row = vec![num(eta), num(log10_pec), num(qber), num(tau), r.ell.to_string()];
    row.extend([r.s_x0, r.s_x1, r.phi_x, r.lambda_ec, params.pax, params.pbx].map(num));
    row.extend(params.mu.map(num));
    row.extend(params.p_mu.map(num));
    row
}

fn channel_row(channel: &ChannelConditions, params: &ProtocolParams, r: &KeyLengthResult) -> Vec<String> {
    sweep_row(channel.eta_loss_db, channel.p_ec.log10(), channel.qber_i, channel.integration_time_s, params, r)
}

pub fn keylength(channel: &ChannelConditions, params: &ProtocolParams, result: &KeyLengthResult) -> Table {
    Table {
        header: SWEEP_HEADER.to_vec(),
        rows: vec![channel_row(channel, params, result)],
        json: json!({ "channel": to_value(channel), "params": to_value(params), "result": to_value(result) }),
    }
}

pub fn optimized(channel: &ChannelConditions, r: &OptimizationResult) -> Table {
    Table {
        header: SWEEP_HEADER.to_vec(),
        rows: vec![channel_row(channel, &r.best_params, &r.best)],
        json: json!({ "channel": to_value(channel), "optimization": to_value(r) }),
    }
}

pub fn sweep_rows(rows: &[SweepRow]) -> Table {
    Table {
        header: SWEEP_HEADER.to_vec(),
        rows: rows
            .iter()
            .map(|r| sweep_row(r.eta_loss_db, r.log10_pec, r.qber_i, r.tau_s, &r.params, &r.result))
            .collect(),
        json: to_value(&rows),
    }
}

pub fn budget(query: &LossBudgetQuery, b: &LossBudget) -> Table {
    Table {
        header: vec!["target_bits", "eta_loss_db", "ell", "method", "saturated", "probes"],
        rows: vec![vec![
            query.target_bits.to_string(),
            b.eta_loss_db.map(num).unwrap_or_default(),
            b.ell.to_string(),
            to_value(&b.method).as_str().unwrap_or_default().to_string(),
            b.saturated.to_string(),
            b.probes.to_string(),
        ]],
        json: json!({ "query": to_value(query), "budget": to_value(b) }),
    }
}

pub fn worst_case(model: &IntensityUncertaintyModel, w: &WorstCase) -> Table {
    let mut row = vec![num(model.f), w.nominal_ell.to_string(), w.min_ell.to_string(), w.evaluations.to_string()];
    for state in &w.argmin.states {
        row.extend(state.map(num));
    }
    row.extend(w.argmin.estimator.map(num));
    Table {
        header: vec![
            "f",
            "nominal_ell",
            "min_ell",
            "evaluations",
            "h_mu1",
            "h_mu2",
            "v_mu1",
            "v_mu2",
            "d_mu1",
            "d_mu2",
            "a_mu1",
            "a_mu2",
            "est_mu1",
            "est_mu2",
        ],
        rows: vec![row],
        json: json!({ "model": to_value(model), "worst_case": to_value(w) }),
    }
}

pub fn sifting(pax: f64, pbx: f64, s: &SiftingEquivalence) -> Table {
    Table {
        header: vec!["pax", "pbx", "k", "p_x", "f", "f_prime"],
        rows: vec![[pax, pbx, s.k, s.p_x, s.f, s.f_prime].map(num).to_vec()],
        json: json!({ "pax": pax, "pbx": pbx, "equivalence": to_value(s) }),
    }
}
