use std::io::Write;

use serde::Serialize;

use crate::density::SLOPE_BOUND;
use crate::error::{arg, Result};

/// Bound on `Gamma_k` that the round schedule is meant to keep.
pub const GAMMA_CAP: f64 = 18.0;
const GAMMA_START: f64 = 17.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScheduleConfig {
    /// `C` of the semi-local input.
    pub c_start: f64,
    /// `C-hat` in `eta_k = C-hat 2^{-k/3} n^{-1/18} ln n`.
    pub c_hat: f64,
    /// Derivative bound `C-tilde`, entering `C' = C + C-tilde C`.
    pub c_tilde: f64,
    pub gamma_start: f64,
}

impl ScheduleConfig {
    pub fn new(c_start: f64, c_hat: f64) -> Self {
        Self {
            c_start,
            c_hat,
            c_tilde: SLOPE_BOUND,
            gamma_start: GAMMA_START,
        }
    }

    pub fn c_prime(&self) -> f64 {
        self.c_start + self.c_tilde * self.c_start
    }
}

/// One round of the cascade. Rounds `1..K` smooth from `m_k` to
/// `ell_k = m_{k+1}`; round `K` is the final step down to `ell = 1`, which has
/// no `r` and whose error term is not part of this schedule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundParams {
    pub k: usize,
    pub m: f64,
    pub ell: f64,
    pub r: Option<f64>,
    pub lambda: f64,
    pub eta: Option<f64>,
    pub eps: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleParams {
    pub n: f64,
    pub config: ScheduleConfig,
    #[serde(rename = "K")]
    pub k_rounds: usize,
    pub rounds: Vec<RoundParams>,
    /// `eps_K` and `Gamma_K`, the statement handed to the final round.
    pub final_eps: f64,
    pub final_gamma: f64,
    /// `m_K / n^{1/3}`.
    pub m_k_over_cube_root: f64,
    /// Largest `C-hat` for which `Gamma_K <= 18` is guaranteed at this `n`.
    pub c_hat_max: f64,
}

impl ScheduleParams {
    /// `ell_k * 2 == m_k` exactly for every smoothing round.
    pub fn halving_exact(&self) -> bool {
        self.rounds[..self.k_rounds - 1]
            .iter()
            .all(|r| r.ell * 2.0 == r.m)
    }

    /// `m_K` within a factor 4 of `C n^{1/3}`.
    pub fn m_k_in_range(&self) -> bool {
        let ratio = self.m_k_over_cube_root / self.config.c_start;
        (0.25..=4.0).contains(&ratio)
    }

    pub fn max_gamma(&self) -> f64 {
        self.rounds.iter().map(|r| r.gamma).fold(0.0, f64::max)
    }

    /// `sum_{j<K} eta_j`.
    pub fn eta_sum(&self) -> f64 {
        self.rounds.iter().filter_map(|r| r.eta).sum()
    }
}

fn rounds_for(n: f64) -> usize {
    (0.5 * n.log2()).floor() as usize + 1
}

/// `sum_{k<K} 2^{-k/3} n^{-1/18} ln n`, the per-unit-`C-hat` total of the
/// `eta_k`.
fn eta_unit_sum(n: f64) -> f64 {
    let k_rounds = rounds_for(n);
    (1..k_rounds)
        .map(|k| 2f64.powf(-(k as f64) / 3.0))
        .sum::<f64>()
        * n.powf(-1.0 / 18.0)
        * n.ln()
}

/// `ln(18/17) / sum_{k<K} 2^{-k/3} n^{-1/18} ln n`. Since
/// `Gamma_K <= 17 exp(sum eta_k)`, any `C-hat` up to this keeps `Gamma_K <= 18`.
pub fn c_hat_max(n: f64) -> f64 {
    (GAMMA_CAP / GAMMA_START).ln() / eta_unit_sum(n)
}

pub fn schedule(n: f64, c_start: f64, c_hat: f64) -> Result<ScheduleParams> {
    schedule_with(n, &ScheduleConfig::new(c_start, c_hat))
}

pub fn schedule_with(n: f64, cfg: &ScheduleConfig) -> Result<ScheduleParams> {
    if !(n >= 4.0 && n.is_finite()) {
        return arg(format!("n = {n} must be at least 4"));
    }
    if !(cfg.c_start > 0.0) || !(cfg.c_hat >= 0.0) {
        return arg("C must be positive and C-hat non-negative");
    }
    let k_rounds = rounds_for(n);
    let lambda = n.ln();
    let top = 4.0 * cfg.c_start * n.powf(5.0 / 6.0);
    // Division by exact powers of two keeps ell_k = m_k / 2 bit-exact.
    let m = |k: usize| top / 2f64.powi(k as i32);
    let mut rounds = Vec::with_capacity(k_rounds);
    let (mut eps, mut gamma) = (cfg.c_prime() * n.powf(-1.0 / 6.0), cfg.gamma_start);
    for k in 1..=k_rounds {
        if k < k_rounds {
            let (mk, ell) = (m(k), m(k + 1));
            let r = (mk * ell).powf(2.0 / 3.0) / n.cbrt();
            let eta = cfg.c_hat * 2f64.powf(-(k as f64) / 3.0) * n.powf(-1.0 / 18.0) * lambda;
            rounds.push(RoundParams {
                k,
                m: mk,
                ell,
                r: Some(r),
                lambda,
                eta: Some(eta),
                eps,
                gamma,
            });
            eps += gamma * eta;
            gamma *= 1.0 + eta;
        } else {
            rounds.push(RoundParams {
                k,
                m: m(k),
                ell: 1.0,
                r: None,
                lambda,
                eta: None,
                eps,
                gamma,
            });
        }
    }
    Ok(ScheduleParams {
        n,
        config: *cfg,
        k_rounds,
        final_eps: eps,
        final_gamma: gamma,
        m_k_over_cube_root: m(k_rounds) / n.cbrt(),
        c_hat_max: c_hat_max(n),
        rounds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SoftRound {
    pub i: usize,
    pub omega: f64,
    pub m: f64,
    pub ell: f64,
    pub r: f64,
    pub lambda: f64,
    /// `m / sqrt(r n) = omega^{-0.1}`.
    pub m_over_sqrt_rn: f64,
    /// `r / ell = omega^{-0.3}`.
    pub r_over_ell: f64,
}

/// Rounds with `m = n/omega`, `ell = n/omega^{1.5}`, `r = n/omega^{1.8}`,
/// `lambda = ln omega` and `omega_{i+1} = omega_i^{1.5}`, applied while the
/// current scale `n/omega_i` exceeds `n^{0.4}`. With `omega_0 <= n^{0.9}` the
/// scale reached at the end lies in `[n^{0.1}, n^{0.4}]`.
pub fn soft_schedule(n: f64, omega0: f64) -> Result<Vec<SoftRound>> {
    if !(n > 1.0 && n.is_finite()) {
        return arg(format!("n = {n} must exceed 1"));
    }
    if !(omega0 > 1.0 && omega0 <= n.powf(0.9)) {
        return arg(format!(
            "omega0 = {omega0} outside (1, n^0.9 = {}]",
            n.powf(0.9)
        ));
    }
    let stop = n.powf(0.4);
    let mut out = Vec::new();
    let mut omega = omega0;
    while n / omega > stop {
        let (m, ell, r) = (n / omega, n / omega.powf(1.5), n / omega.powf(1.8));
        out.push(SoftRound {
            i: out.len(),
            omega,
            m,
            ell,
            r,
            lambda: omega.ln(),
            m_over_sqrt_rn: m / (r * n).sqrt(),
            r_over_ell: r / ell,
        });
        omega = omega.powf(1.5);
    }
    Ok(out)
}

pub fn write_schedule_csv<W: Write>(params: &ScheduleParams, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "m", "ell", "r", "lambda", "eta", "eps", "gamma"])?;
    let opt = |x: Option<f64>| x.map(|v| format!("{v:e}")).unwrap_or_default();
    for r in &params.rounds {
        w.write_record([
            r.k.to_string(),
            format!("{:e}", r.m),
            format!("{:e}", r.ell),
            opt(r.r),
            format!("{:e}", r.lambda),
            opt(r.eta),
            format!("{:e}", r.eps),
            format!("{:e}", r.gamma),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_soft_schedule_csv<W: Write>(rounds: &[SoftRound], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rounds {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
