use serde::Serialize;

use super::LatticePmf;
use crate::error::{Error, Result};

/// Largest admissible `|alpha| * span`. Beyond this the smallest tilted
/// weight would underflow and the support would shrink.
pub const MAX_TILT_EXPONENT: f64 = 700.0;

/// Exponentially tilted law `p(x) e^{alpha x} / gamma`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TiltResult {
    pub tilted: LatticePmf,
    pub alpha: f64,
    /// `ln gamma`, kept separately because `gamma` itself overflows for
    /// supports far from the origin.
    pub log_gamma: f64,
}

impl TiltResult {
    /// The normaliser `gamma = E e^{alpha X}`.
    pub fn gamma(&self) -> f64 {
        self.log_gamma.exp()
    }
}

pub fn tilt(p: &LatticePmf, alpha: f64) -> Result<TiltResult> {
    if !alpha.is_finite() {
        return Err(Error::Argument(format!(
            "tilt parameter {alpha} is not finite"
        )));
    }
    if alpha == 0.0 {
        return Ok(TiltResult {
            tilted: p.clone(),
            alpha,
            log_gamma: 0.0,
        });
    }
    let span = (p.len() - 1) as f64;
    if alpha.abs() * span > MAX_TILT_EXPONENT {
        return Err(Error::Range(format!(
            "|alpha * span| = {} exceeds {MAX_TILT_EXPONENT}",
            alpha.abs() * span
        )));
    }
    // Exponents are taken relative to the support midpoint x0 and then
    // shifted by their maximum, so every factor lies in (e^{-700}, 1].
    let half = span / 2.0;
    let exps: Vec<f64> = (0..p.len()).map(|i| alpha * (i as f64 - half)).collect();
    let top = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = p
        .probs()
        .iter()
        .zip(&exps)
        .map(|(pi, e)| pi * (e - top).exp())
        .collect();
    let z: f64 = weights.iter().sum();
    let probs: Vec<f64> = weights.into_iter().map(|w| w / z).collect();
    let x0 = p.offset() as f64 + half;
    let log_gamma = alpha * x0 + top + z.ln();
    let tilted = LatticePmf::from_computed(p.offset(), probs)?;
    if tilted.len() != p.len() {
        return Err(Error::Range(
            "tilted weights underflowed at the support edge".into(),
        ));
    }
    Ok(TiltResult {
        tilted,
        alpha,
        log_gamma,
    })
}

fn tilted_mean(p: &LatticePmf, alpha: f64) -> Result<f64> {
    Ok(tilt(p, alpha)?.tilted.mean())
}

/// Finds `alpha` with `|E X^(alpha) - target| <= tol`.
///
/// The tilted mean is strictly increasing in `alpha` for non-degenerate laws,
/// so the root is bracketed by doubling outward from `[-1, 1]` and refined by
/// bisection.
pub fn solve_tilt(p: &LatticePmf, target_mean: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::Argument(format!("tolerance {tol} must be positive")));
    }
    let (lo_pt, hi_pt) = (p.min_support() as f64, p.max_support() as f64);
    if p.is_degenerate() {
        if (target_mean - lo_pt).abs() <= tol {
            return Ok(0.0);
        }
        return Err(Error::Infeasible(format!(
            "degenerate law at {lo_pt} cannot reach mean {target_mean}"
        )));
    }
    if !(target_mean > lo_pt && target_mean < hi_pt) {
        return Err(Error::Infeasible(format!(
            "target {target_mean} outside open hull ({lo_pt}, {hi_pt})"
        )));
    }
    let m0 = p.mean();
    if (m0 - target_mean).abs() <= tol {
        return Ok(0.0);
    }
    let alpha_cap = MAX_TILT_EXPONENT / (hi_pt - lo_pt);
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    while tilted_mean(p, lo.max(-alpha_cap))? > target_mean {
        if lo <= -alpha_cap {
            return Err(Error::Range(format!(
                "target {target_mean} needs a tilt beyond -{alpha_cap}"
            )));
        }
        hi = lo;
        lo *= 2.0;
    }
    lo = lo.max(-alpha_cap);
    while tilted_mean(p, hi.min(alpha_cap))? < target_mean {
        if hi >= alpha_cap {
            return Err(Error::Range(format!(
                "target {target_mean} needs a tilt beyond {alpha_cap}"
            )));
        }
        lo = hi;
        hi *= 2.0;
    }
    hi = hi.min(alpha_cap);

    let mut best = (f64::INFINITY, 0.0);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        let m = tilted_mean(p, mid)?;
        let err = (m - target_mean).abs();
        if err < best.0 {
            best = (err, mid);
        }
        if err <= tol {
            return Ok(mid);
        }
        if mid <= lo || mid >= hi {
            break;
        }
        if m < target_mean {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if best.0 <= tol {
        Ok(best.1)
    } else {
        Err(Error::Numeric(format!(
            "bisection stalled {} away from the target",
            best.0
        )))
    }
}
