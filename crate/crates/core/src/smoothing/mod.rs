//! Interval statements about the law of `Q_n`, window flatness, the error
//! terms of the smoothing lemmas and the multi-round parameter schedules.

mod bounds;
mod eta;
mod schedule;

use rayon::prelude::*;
use serde::Serialize;

pub use bounds::{
    azuma_bound, berry_esseen_check, binomial_ratio, lemma23_azuma_bound, normal_cdf,
    tail_bound_check, tilt_ratio_check, BerryEsseenReport, TailBoundReport, TiltRatioConfig,
    TiltRatioReport, DEFAULT_BE_CONSTANT,
};
pub use eta::{
    eta_bin, eta_core, eta_core_with, EtaConditions, EtaReport, EtaTerm, EtaWarning, WarningKind,
};
pub use schedule::{
    c_hat_max, schedule, schedule_with, soft_schedule, write_schedule_csv, write_soft_schedule_csv,
    RoundParams, ScheduleConfig, ScheduleParams, SoftRound, GAMMA_CAP,
};

use crate::density::{scan_windows, DensityEstimate, EvalPoints, SLOPE_BOUND};
use crate::error::{arg, Result};
use crate::interval::{subinterval_point_sets, HalfOpen, PrefixMass};
use crate::pmf::LatticePmf;
use crate::quicksort::mean_recurrence;

/// Largest accepted gap between the mean of the supplied law and `q_n`.
pub const MEAN_TOL: f64 = 1e-6;

/// `S(n, m, eps, Gamma)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmoothingStatement {
    pub n: usize,
    pub m: f64,
    pub eps: f64,
    pub gamma: f64,
}

impl SmoothingStatement {
    pub fn new(n: usize, m: f64, eps: f64, gamma: f64) -> Result<Self> {
        if n == 0 {
            return arg("n must be positive");
        }
        if !(m >= 1.0 && m.is_finite()) {
            return arg(format!("m = {m} must be at least 1"));
        }
        if !(eps > 0.0) {
            return arg(format!("eps = {eps} must be positive"));
        }
        if !(gamma >= 1.0) {
            return arg(format!("Gamma = {gamma} must be at least 1"));
        }
        Ok(Self { n, m, eps, gamma })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothingReport {
    pub target: SmoothingStatement,
    /// Worst `|P(I) - (m/n) f(x)| n/m` over windows, with `x` at both ends
    /// and the midpoint of each window.
    pub measured_eps: f64,
    pub measured_gamma: f64,
    /// `f'`-bound allowance for points strictly inside a window,
    /// `2466 (m/n) / 2`. Reported separately; `holds` does not include it.
    pub interior_slack: f64,
    pub worst_interval_i: HalfOpen,
    pub worst_interval_ii: HalfOpen,
    pub stride: usize,
    pub windows: usize,
    pub holds: bool,
}

/// Measures clauses (i) and (ii) of `target` for the law `pmf` of `Q_n`
/// against the density estimate `d`, on windows whose integer left ends step
/// by `stride`.
pub fn check_statement_s(
    pmf: &LatticePmf,
    target: &SmoothingStatement,
    d: &DensityEstimate,
    stride: usize,
) -> Result<SmoothingReport> {
    let n = target.n;
    let q_n = mean_recurrence(n)[n];
    if (pmf.mean() - q_n).abs() > MEAN_TOL {
        return arg(format!("law has mean {} but q_{n} = {q_n}", pmf.mean()));
    }
    let scan = scan_windows(
        pmf,
        q_n,
        n,
        target.m,
        stride,
        d,
        EvalPoints::EndsAndMidpoint,
    )?;
    let window = |a: f64| HalfOpen {
        lo: a,
        hi: a + target.m,
    };
    Ok(SmoothingReport {
        target: *target,
        measured_eps: scan.eps,
        measured_gamma: scan.gamma,
        interior_slack: SLOPE_BOUND * (target.m / n as f64) / 2.0,
        worst_interval_i: window(scan.worst_eps_start),
        worst_interval_ii: window(scan.worst_gamma_start),
        stride,
        windows: scan.windows,
        holds: scan.eps <= target.eps && scan.gamma <= target.gamma,
    })
}

/// Largest spread `max - min` of `P(Q_n in I)` over length-`ell` subintervals
/// `I` of a window `J` of length `m`, maximised over windows with integer left
/// end stepping by `stride`, in units of `ell/n`.
pub fn window_flatness(pmf: &LatticePmf, n: usize, ell: f64, m: f64, stride: usize) -> Result<f64> {
    if !(ell > 0.0) || ell > m {
        return arg(format!("need 0 < ell <= m, got ell = {ell}, m = {m}"));
    }
    if stride == 0 || n == 0 {
        return arg("stride and n must be positive");
    }
    let prefix = PrefixMass::new(pmf);
    let first = pmf.min_support() - m.ceil() as i64;
    let starts: Vec<i64> = (first..=pmf.max_support()).step_by(stride).collect();
    let spread = starts
        .par_iter()
        .map(|&a| {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for (x, y) in subinterval_point_sets(a as f64, m, ell) {
                let p = prefix.mass(x, y);
                lo = lo.min(p);
                hi = hi.max(p);
            }
            hi - lo
        })
        .reduce(|| 0.0, f64::max);
    Ok(spread * n as f64 / ell)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AveragingReport {
    pub min_sub: f64,
    /// `(ell/m) P(Q_n in J)`.
    pub average: f64,
    pub max_sub: f64,
    pub holds: bool,
}

/// Floating-point allowance in the averaging comparison.
pub const AVERAGING_TOL: f64 = 1e-15;

/// For `J = (a, a + m]` with `m / ell` a positive integer, checks
/// `min_I P(I) <= (ell/m) P(J) <= max_I P(I)` over all length-`ell`
/// subintervals `I` of `J`.
pub fn averaging_check(pmf: &LatticePmf, a: f64, m: f64, ell: f64) -> Result<AveragingReport> {
    if !(ell > 0.0) || ell > m {
        return arg(format!("need 0 < ell <= m, got ell = {ell}, m = {m}"));
    }
    let ratio = m / ell;
    if (ratio - ratio.round()).abs() > 1e-9 * ratio {
        return arg(format!("m / ell = {ratio} is not an integer"));
    }
    let prefix = PrefixMass::new(pmf);
    let (mut min_sub, mut max_sub) = (f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in subinterval_point_sets(a, m, ell) {
        let p = prefix.mass(x, y);
        min_sub = min_sub.min(p);
        max_sub = max_sub.max(p);
    }
    let average = prefix.interval(a, a + m) / ratio.round();
    let holds = min_sub <= average + AVERAGING_TOL && average <= max_sub + AVERAGING_TOL;
    Ok(AveragingReport {
        min_sub,
        average,
        max_sub,
        holds,
    })
}
