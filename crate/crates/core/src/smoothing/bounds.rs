use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::interval::HalfOpen;
use crate::pmf::{convolve, ClassParams, LatticePmf};

use super::eta::{EtaWarning, WarningKind};

/// Default Berry-Esseen constant for non-identically distributed summands.
pub const DEFAULT_BE_CONSTANT: f64 = 0.56;

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// `exp(-2 a^2 / sum spans^2)`.
pub fn azuma_bound(increment_spans: &[f64], a: f64) -> Result<f64> {
    if !(a >= 0.0) {
        return arg(format!("deviation a = {a} must be non-negative"));
    }
    if increment_spans.iter().any(|s| !(*s >= 0.0)) {
        return arg("increment spans must be non-negative");
    }
    if a == 0.0 {
        return Ok(1.0);
    }
    let total: f64 = increment_spans.iter().map(|s| s * s).sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    Ok((-2.0 * a * a / total).exp())
}

/// The martingale step of the medium-sublist bound: `t0 = ceil(20 n / r)`
/// increments in `(-1, 1)` (span 2 each) and deviation `a = n / (3r)`, which
/// gives `exp(-n^2 / (18 r^2 t0))`.
pub fn lemma23_azuma_bound(n: usize, r: usize) -> Result<f64> {
    if r == 0 {
        return arg("r must be positive");
    }
    let t0 = (20 * n).div_ceil(r);
    azuma_bound(&vec![2.0; t0], n as f64 / (3.0 * r as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BerryEsseenReport {
    pub sup_dist: f64,
    pub bound: f64,
    pub mean: f64,
    pub sigma: f64,
    pub rho: f64,
    pub constant: f64,
}

impl BerryEsseenReport {
    pub fn passed(&self) -> bool {
        self.sup_dist <= self.bound
    }
}

/// Convolves the components and measures `sup_x |P(S <= x) - Phi((x - mu)/sigma)|`
/// exactly, checking both one-sided limits at each atom. `rho` is the sum of
/// the third absolute central moments.
pub fn berry_esseen_check(components: &[LatticePmf], constant: f64) -> Result<BerryEsseenReport> {
    if components.is_empty() {
        return arg("no components");
    }
    let (mut var, mut rho) = (0.0, 0.0);
    for c in components {
        let m = c.moments();
        var += m.variance;
        rho += m.abs_third_central;
    }
    if !(var > 0.0) {
        return Err(Error::Degenerate("sum has zero variance".into()));
    }
    let mut sum = components[0].clone();
    for c in &components[1..] {
        sum = convolve(&sum, c)?;
    }
    let mean = sum.mean();
    let sigma = var.sqrt();
    let mut below = 0.0;
    let mut sup = 0.0f64;
    for (x, p) in sum.iter() {
        let phi = normal_cdf((x as f64 - mean) / sigma);
        sup = sup.max((below - phi).abs());
        below += p;
        sup = sup.max((below - phi).abs());
    }
    Ok(BerryEsseenReport {
        sup_dist: sup,
        bound: constant * rho / sigma.powi(3),
        mean,
        sigma,
        rho,
        constant,
    })
}

/// `P(B = k+1) / P(B = k) = ((s - k)/(k + 1)) (p / (1 - p))` for `B ~ Bi(s, p)`.
pub fn binomial_ratio(s: u64, p: f64, k: u64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return arg(format!("p = {p} must lie in (0, 1)"));
    }
    if k >= s {
        return arg(format!("k = {k} must be below s = {s}"));
    }
    Ok((s - k) as f64 / (k + 1) as f64 * (p / (1.0 - p)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailBoundReport {
    pub t: f64,
    pub ell: f64,
    /// `P(X in [t, t + ell])`.
    pub measured: f64,
    /// `(C ell / (r sqrt s)) exp(-c t^2 / (r^2 s))`.
    pub bound: f64,
    pub ratio: f64,
    pub passed: bool,
}

pub fn tail_bound_check(
    x: &LatticePmf,
    params: &ClassParams,
    t: f64,
    ell: f64,
    big_c: f64,
    c: f64,
) -> Result<TailBoundReport> {
    if !(t >= 0.0) {
        return arg(format!("t = {t} must be non-negative"));
    }
    if !(ell >= params.r()) {
        return arg(format!("ell = {ell} must be at least r = {}", params.r()));
    }
    let (r, s) = (params.r(), params.s() as f64);
    let measured = x.closed_prob(t, t + ell)?;
    let bound = big_c * ell / (r * s.sqrt()) * (-c * t * t / (r * r * s)).exp();
    let ratio = if bound > 0.0 {
        measured / bound
    } else {
        f64::INFINITY
    };
    Ok(TailBoundReport {
        t,
        ell,
        measured,
        bound,
        ratio,
        passed: measured <= bound,
    })
}

/// Constants of the tilting comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiltRatioConfig {
    /// `K` in `lambda m / (r sqrt s) <= K` and `J within [-K lambda r sqrt s, K lambda r sqrt s]`.
    pub k_const: f64,
    pub c_prime: f64,
    /// Implicit constant of the `O(r/ell + lambda m/(r sqrt s))` term.
    pub constant: f64,
}

impl Default for TiltRatioConfig {
    fn default() -> Self {
        Self {
            k_const: 5.0,
            c_prime: 1.0,
            constant: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TiltRatioReport {
    pub ratio: f64,
    pub deviation: f64,
    pub r_over_ell: f64,
    pub lambda_m_term: f64,
    /// `constant * (r/ell + lambda m/(r sqrt s))`.
    pub bound: f64,
    pub within_bound: bool,
    pub warnings: Vec<EtaWarning>,
}

/// Compares `P(X in I2) / P(X in I1)` with `1` for two length-`ell`
/// subintervals of a window `J` of length `m`.
pub fn tilt_ratio_check(
    x: &LatticePmf,
    params: &ClassParams,
    i1: &HalfOpen,
    i2: &HalfOpen,
    j: &HalfOpen,
    lambda: f64,
    cfg: &TiltRatioConfig,
) -> Result<TiltRatioReport> {
    let ell = i1.len();
    if (i2.len() - ell).abs() > 1e-9 * ell.max(1.0) {
        return arg(format!("subintervals have lengths {ell} and {}", i2.len()));
    }
    if !j.contains_interval(i1) || !j.contains_interval(i2) {
        return arg("subintervals must lie inside J");
    }
    let (r, s, m) = (params.r(), params.s() as f64, j.len());
    let p1 = i1.prob(x);
    if p1 == 0.0 {
        return Err(Error::Undefined(format!(
            "P(X in ({}, {}]) = 0",
            i1.lo, i1.hi
        )));
    }
    let ratio = i2.prob(x) / p1;
    let r_over_ell = r / ell;
    let lambda_m_term = lambda * m / (r * s.sqrt());
    let mut warnings = Vec::new();
    let mut need = |condition: &'static str, lhs: f64, rhs: f64| {
        if lhs > rhs * (1.0 + 1e-12) {
            warnings.push(EtaWarning {
                condition,
                lhs,
                rhs,
                kind: WarningKind::Violated,
            });
        }
    };
    need("1 <= lambda", 1.0, lambda);
    need("ell <= m", ell, m);
    need("C' r <= ell", cfg.c_prime * r, ell);
    need("lambda m / (r sqrt s) <= K", lambda_m_term, cfg.k_const);
    let reach = cfg.k_const * lambda * r * s.sqrt();
    need(
        "J within K lambda r sqrt s",
        j.lo.abs().max(j.hi.abs()),
        reach,
    );
    let bound = cfg.constant * (r_over_ell + lambda_m_term);
    let deviation = (ratio - 1.0).abs();
    Ok(TiltRatioReport {
        ratio,
        deviation,
        r_over_ell,
        lambda_m_term,
        bound,
        within_bound: deviation <= bound,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pmf::build_brs;

    fn sign_sum(s: usize) -> Vec<LatticePmf> {
        vec![LatticePmf::uniform(&[-1, 1]).unwrap(); s]
    }

    #[test]
    fn azuma_examples() {
        assert!((azuma_bound(&[2.0; 100], 20.0).unwrap() - (-2.0f64).exp()).abs() < 1e-15);
        assert_eq!(azuma_bound(&[2.0; 10], 0.0).unwrap(), 1.0);
        assert_eq!(azuma_bound(&[0.0; 10], 1.0).unwrap(), 0.0);
        assert!(azuma_bound(&[1.0], -1.0).is_err());
    }

    #[test]
    fn lemma23_form_is_reproduced() {
        for (n, r) in [(4000usize, 20usize), (1000, 20), (100, 20)] {
            let t0 = (20 * n).div_ceil(r) as f64;
            let expected = (-((n * n) as f64) / (18.0 * (r * r) as f64 * t0)).exp();
            assert!((lemma23_azuma_bound(n, r).unwrap() - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn berry_esseen_sign_sum() {
        let rep = berry_esseen_check(&sign_sum(400), DEFAULT_BE_CONSTANT).unwrap();
        assert!((rep.bound - 0.028).abs() < 1e-12);
        assert!(rep.passed(), "{rep:?}");
        assert!(rep.sup_dist > 0.01);
    }

    #[test]
    fn berry_esseen_single_two_point() {
        let rep = berry_esseen_check(&sign_sum(1), DEFAULT_BE_CONSTANT).unwrap();
        let expected = 0.5 - normal_cdf(-1.0);
        assert!((rep.sup_dist - expected).abs() < 1e-12);
        assert!((rep.bound - 0.56).abs() < 1e-12);
    }

    #[test]
    fn berry_esseen_degenerate() {
        assert!(matches!(
            berry_esseen_check(&[LatticePmf::delta(3)], 0.56),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn binomial_ratio_examples() {
        assert!((binomial_ratio(3, 2.0 / 3.0, 1).unwrap() - 2.0).abs() < 1e-15);
        assert!((binomial_ratio(3, 2.0 / 3.0, 2).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(binomial_ratio(3, 0.5, 3).is_err());
        assert!(binomial_ratio(3, 1.0, 0).is_err());
        let s = 10_000u64;
        let p = 0.3;
        let k = (p * s as f64).floor() as u64;
        assert!((binomial_ratio(s, p, k).unwrap() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn binomial_ratio_product_and_rewrite() {
        let (s, p) = (40u64, 0.37);
        let product: f64 = (0..s).map(|k| binomial_ratio(s, p, k).unwrap()).product();
        let expected = (p / (1.0 - p)).powi(s as i32);
        assert!((product / expected - 1.0).abs() < 1e-9);
        for k in 0..s {
            let (kf, sf) = (k as f64, s as f64);
            let rewritten = (1.0 - kf / sf) / (1.0 - p) * p / (kf / sf + 1.0 / sf);
            assert!((binomial_ratio(s, p, k).unwrap() - rewritten).abs() < 1e-12 * rewritten);
        }
    }

    #[test]
    fn tail_bound_edge_cases() {
        let params = ClassParams::new(1.0, 400, 0.5).unwrap();
        let x = build_brs(&sign_sum(400), &params).unwrap();
        let far = tail_bound_check(&x, &params, 500.0, 1.0, 1.0, 0.01).unwrap();
        assert_eq!(far.measured, 0.0);
        assert!(far.passed);
        let zero = tail_bound_check(&x, &params, 0.0, 20.0, 1.0, 0.01).unwrap();
        assert!((zero.bound - 1.0).abs() < 1e-15);
        assert!(tail_bound_check(&x, &params, -1.0, 20.0, 1.0, 0.01).is_err());
        assert!(tail_bound_check(&x, &params, 0.0, 0.5, 1.0, 0.01).is_err());
    }

    #[test]
    fn tilt_ratio_trivial_cases() {
        let r = 10i64;
        let params = ClassParams::new(r as f64, 400, 0.5).unwrap();
        let comp = LatticePmf::uniform(&(-r..=r).collect::<Vec<_>>()).unwrap();
        let x = build_brs(&vec![comp; 400], &params).unwrap();
        let j = HalfOpen::new(-200.0, 200.0).unwrap();
        let i1 = HalfOpen::new(-200.0, 0.0).unwrap();
        let cfg = TiltRatioConfig::default();
        let same = tilt_ratio_check(&x, &params, &i1, &i1, &j, 2.0, &cfg).unwrap();
        assert_eq!(same.ratio, 1.0);
        let i1 = HalfOpen::new(10.0, 160.0).unwrap();
        let i2 = i1.reflect_integer();
        let j = HalfOpen::new(-170.0, 170.0).unwrap();
        let mirror = tilt_ratio_check(&x, &params, &i1, &i2, &j, 2.0, &cfg).unwrap();
        assert!(mirror.deviation <= 1e-12, "{mirror:?}");
    }

    #[test]
    fn tilt_ratio_errors() {
        let params = ClassParams::new(1.0, 1, 0.5).unwrap();
        let x = LatticePmf::uniform(&[-1, 1]).unwrap();
        let j = HalfOpen::new(-10.0, 10.0).unwrap();
        let empty = HalfOpen::new(2.0, 4.0).unwrap();
        let other = HalfOpen::new(-2.0, 0.0).unwrap();
        let cfg = TiltRatioConfig::default();
        assert!(matches!(
            tilt_ratio_check(&x, &params, &empty, &other, &j, 1.0, &cfg),
            Err(Error::Undefined(_))
        ));
        let longer = HalfOpen::new(-2.0, 1.0).unwrap();
        assert!(tilt_ratio_check(&x, &params, &other, &longer, &j, 1.0, &cfg).is_err());
    }
}
