//! Straight-line reference evaluation of the key length chain, written
//! without touching the library so it can serve as an oracle.

#![allow(dead_code)]

pub struct Reference {
    pub n_x: [f64; 3],
    pub m_x: [f64; 3],
    pub n_z: [f64; 3],
    pub m_z: [f64; 3],
    pub s_x0: f64,
    pub s_x1: f64,
    pub s_z1: f64,
    pub v_z1: f64,
    pub phi: f64,
    pub objective: f64,
}

pub struct Setup {
    pub pax: f64,
    pub pbx: f64,
    pub mu: [f64; 3],
    pub p: [f64; 3],
    pub eta_db: f64,
    pub p_ec: f64,
    pub qber_i: f64,
    pub p_ap: f64,
    pub pulses: f64,
    pub beta: f64,
    pub eps_s: f64,
    pub eps_c: f64,
}

pub fn entropy(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -(x * x.ln() + (1.0 - x) * (1.0 - x).ln()) / std::f64::consts::LN_2
}

/// Per-intensity click and error probabilities for one pulse.
pub fn pulse(mu: f64, eta_db: f64, p_ec: f64, p_ap: f64, qber_i: f64) -> (f64, f64) {
    let t = (-eta_db * std::f64::consts::LN_10 / 10.0).exp();
    let no_signal = (-t * mu).exp();
    let click = (1.0 + p_ap) * (1.0 - (1.0 - 2.0 * p_ec) * no_signal);
    let err = p_ec + 0.5 * p_ap * click + qber_i * (1.0 - no_signal);
    (click, err)
}

fn basis(s: &Setup, sift: f64) -> ([f64; 3], [f64; 3]) {
    let mut clicks = [0.0; 3];
    let mut errs = [0.0; 3];
    for k in 0..3 {
        let (c, e) = pulse(s.mu[k], s.eta_db, s.p_ec, s.p_ap, s.qber_i);
        clicks[k] = c;
        errs[k] = e;
    }
    let mut n = [0.0; 3];
    let mut m = [0.0; 3];
    let dsum = s.p[0] * clicks[0] + s.p[1] * clicks[1] + s.p[2] * clicks[2];
    let esum = s.p[0] * errs[0] + s.p[1] * errs[1] + s.p[2] * errs[2];
    for k in 0..3 {
        n[k] = sift * s.pulses * s.p[k] * clicks[k];
    }
    let total = n[0] + n[1] + n[2];
    for k in 0..3 {
        m[k] = total * (esum / dsum) * (s.p[k] * clicks[k] / dsum);
    }
    (n, m)
}

fn lower(y: f64, mu: f64, p: f64, beta: f64) -> f64 {
    let d = beta / 2.0 + (2.0 * beta * y + beta * beta / 4.0).sqrt();
    (mu.exp() / p * (y - d)).max(0.0)
}

fn upper(y: f64, mu: f64, p: f64, beta: f64) -> f64 {
    let d = beta + (2.0 * beta * y + beta * beta).sqrt();
    mu.exp() / p * (y + d)
}

/// Exact lower tail of Bin(n, p) at the `eps` level by log-space summation.
pub fn binomial_ppf(eps: f64, n: u64, p: f64) -> u64 {
    let ln_choose = |k: u64| -> f64 {
        let mut acc = 0.0;
        for i in 0..k {
            acc += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
        }
        acc
    };
    // start far in the lower tail and walk upwards
    let mean = n as f64 * p;
    let sd = (mean * (1.0 - p)).sqrt();
    let start = (mean - 12.0 * sd).max(0.0) as u64;
    let mut log_term = ln_choose(start) + start as f64 * p.ln() + (n - start) as f64 * (1.0 - p).ln();
    let mut cdf = 0.0;
    let mut k = start;
    loop {
        cdf += log_term.exp();
        if cdf >= eps || k == n {
            return k;
        }
        log_term += ((n - k) as f64).ln() - ((k + 1) as f64).ln() + p.ln() - (1.0 - p).ln();
        k += 1;
    }
}

pub fn leakage(n_x: f64, q: f64, eps_c: f64) -> f64 {
    let f = binomial_ppf(eps_c, n_x.floor() as u64, 1.0 - q) as f64;
    let l = ((1.0 - q) / q).log2();
    (n_x * entropy(q) + (n_x * (1.0 - q) - f - 1.0) * l - 0.5 * n_x.log2() - (1.0 / eps_c).log2()).max(0.0)
}

pub fn evaluate(s: &Setup) -> Reference {
    let (n_x, m_x) = basis(s, s.pax * s.pbx);
    let (n_z, m_z) = basis(s, (1.0 - s.pax) * (1.0 - s.pbx));
    let [a, b, c] = s.mu;
    let t0: f64 = (0..3).map(|k| s.p[k] * (-s.mu[k]).exp()).sum();
    let t1: f64 = (0..3).map(|k| s.p[k] * (-s.mu[k]).exp() * s.mu[k]).sum();
    let lo = |y: &[f64; 3], k: usize| lower(y[k], s.mu[k], s.p[k], s.beta);
    let hi = |y: &[f64; 3], k: usize| upper(y[k], s.mu[k], s.p[k], s.beta);

    let vac = |y: &[f64; 3]| (t0 * (b * lo(y, 2) - c * hi(y, 1)) / (b - c)).max(0.0);
    let single = |y: &[f64; 3], s0: f64| {
        let num = lo(y, 1) - hi(y, 2) - (b * b - c * c) / (a * a) * (hi(y, 0) - s0 / t0);
        (t1 * a * num / (a * (b - c) - b * b + c * c)).max(0.0)
    };
    let s_x0 = vac(&n_x);
    let s_x1 = single(&n_x, s_x0);
    let s_z0 = vac(&n_z);
    let s_z1 = single(&n_z, s_z0);
    let v_z1 = t1 * (hi(&m_z, 1) - lo(&m_z, 2)) / (b - c);

    let ratio = v_z1 / s_z1;
    let phi = if ratio >= 0.5 {
        0.5
    } else {
        let (cc, dd) = (s_z1, s_x1);
        let spread = ratio * (1.0 - ratio);
        let g = ((cc + dd) * spread / (cc * dd * std::f64::consts::LN_2)
            * ((cc + dd) / (cc * dd * spread) * (21.0 / s.eps_s).powi(2)).log2())
        .sqrt();
        (ratio + g).min(0.5)
    };
    let total_n: f64 = n_x.iter().sum();
    let q = m_x.iter().sum::<f64>() / total_n;
    let objective = s_x0 + s_x1 * (1.0 - entropy(phi)) - leakage(total_n, q, s.eps_c)
        - 6.0 * (21.0 / s.eps_s).log2()
        - (2.0 / s.eps_c).log2();
    Reference { n_x, m_x, n_z, m_z, s_x0, s_x1, s_z1, v_z1, phi, objective }
}

/// Expected single-photon detections in X: every one-photon component clicks with probability `p_d`.
pub fn poisson_single_photon_x(s: &Setup) -> f64 {
    let t = (-s.eta_db * std::f64::consts::LN_10 / 10.0).exp();
    let weight: f64 = (0..3).map(|k| s.p[k] * s.mu[k] * (-s.mu[k]).exp()).sum();
    s.pax * s.pbx * s.pulses * weight * t
}

/// Agreement to `sig` significant figures.
pub fn same_sig(a: f64, b: f64, sig: i32) -> bool {
    if a == b {
        return true;
    }
    let scale = a.abs().max(b.abs());
    (a - b).abs() <= 0.5 * scale * 10f64.powi(1 - sig)
}
