use serde::Serialize;

use super::{convolve, LatticePmf};
use crate::error::{arg, Error, Result};

/// Mean tolerance of the zero-mean clause.
pub const CLASS_MEAN_TOL: f64 = 1e-9;

/// Parameters of the classes `D_r` (scale `r`, variance constant `c1`) and
/// `B_{r,s}` (`s` summands).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassParams {
    r: f64,
    s: usize,
    c1: f64,
}

impl ClassParams {
    pub fn new(r: f64, s: usize, c1: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return arg(format!("scale r = {r} must be positive"));
        }
        if s == 0 {
            return arg("s must be at least 1");
        }
        if !(c1 > 0.0 && c1 < 1.0) {
            return arg(format!("c1 = {c1} must lie in (0, 1)"));
        }
        Ok(Self { r, s, c1 })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    /// Lower bound `c1 (r/2)^2` on the variance of a `D_r` member.
    pub fn min_variance(&self) -> f64 {
        self.c1 * (self.r / 2.0).powi(2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DrClause {
    ZeroMean,
    Bounded,
    Variance,
}

/// Outcome of a `D_r` membership check with the measured quantities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DrCheck {
    pub mean: f64,
    pub max_abs: f64,
    pub variance: f64,
    pub violations: Vec<DrClause>,
}

impl DrCheck {
    pub fn is_member(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `E X = 0`, `|X| <= 4r` and `Var X >= c1 (r/2)^2`.
pub fn class_dr_check(p: &LatticePmf, params: &ClassParams) -> DrCheck {
    class_dr_check_centered(p, 0.0, params)
}

/// Same clauses for the law of `Y - center`, where `Y ~ p`. Used for laws that
/// live on a shifted lattice, such as truncated comparison counts minus their
/// conditional mean.
pub fn class_dr_check_centered(p: &LatticePmf, center: f64, params: &ClassParams) -> DrCheck {
    let m = p.moments();
    let mean = m.mean - center;
    let max_abs = (p.min_support() as f64 - center)
        .abs()
        .max((p.max_support() as f64 - center).abs());
    let mut violations = Vec::new();
    if mean.abs() > CLASS_MEAN_TOL {
        violations.push(DrClause::ZeroMean);
    }
    if max_abs > 4.0 * params.r() {
        violations.push(DrClause::Bounded);
    }
    if m.variance < params.min_variance() {
        violations.push(DrClause::Variance);
    }
    DrCheck {
        mean,
        max_abs,
        variance: m.variance,
        violations,
    }
}

/// Convolves exactly `s` members of `D_r` into a `B_{r,s}` law.
pub fn build_brs(components: &[LatticePmf], params: &ClassParams) -> Result<LatticePmf> {
    if components.len() != params.s() {
        return arg(format!(
            "expected {} components, got {}",
            params.s(),
            components.len()
        ));
    }
    for (index, c) in components.iter().enumerate() {
        let check = class_dr_check(c, params);
        if !check.is_member() {
            return Err(Error::Class {
                index,
                reason: format!("violated {:?}", check.violations),
            });
        }
    }
    let mut acc = components[0].clone();
    for c in &components[1..] {
        acc = convolve(&acc, c)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_are_validated() {
        assert!(ClassParams::new(0.0, 1, 0.5).is_err());
        assert!(ClassParams::new(1.0, 0, 0.5).is_err());
        assert!(ClassParams::new(1.0, 1, 1.0).is_err());
        assert!(ClassParams::new(1.0, 1, 0.0).is_err());
        assert!(ClassParams::new(1.0, 1, 0.5).is_ok());
    }

    #[test]
    fn sign_law_scaled_by_r_is_member() {
        let r = 6;
        let params = ClassParams::new(r as f64, 1, 0.5).unwrap();
        let p = LatticePmf::uniform(&[-r, r]).unwrap();
        let check = class_dr_check(&p, &params);
        assert!(check.is_member(), "{check:?}");
        assert_eq!(check.variance, 36.0);
    }

    #[test]
    fn delta_fails_variance_clause() {
        let params = ClassParams::new(3.0, 1, 0.1).unwrap();
        let check = class_dr_check(&LatticePmf::delta(0), &params);
        assert_eq!(check.violations, vec![DrClause::Variance]);
    }

    #[test]
    fn wide_two_point_law_fails_support_clause() {
        // Uniform on {0, 8r + 2}, shifted to mean zero: endpoints at +-(4r + 1).
        let r = 5i64;
        let params = ClassParams::new(r as f64, 1, 0.5).unwrap();
        let p = LatticePmf::uniform(&[-(4 * r + 1), 4 * r + 1]).unwrap();
        let check = class_dr_check(&p, &params);
        assert_eq!(check.violations, vec![DrClause::Bounded]);
    }

    #[test]
    fn nonzero_mean_is_reported() {
        let params = ClassParams::new(2.0, 1, 0.5).unwrap();
        let check = class_dr_check(&LatticePmf::uniform(&[-1, 3]).unwrap(), &params);
        assert_eq!(check.violations, vec![DrClause::ZeroMean]);
        let centered =
            class_dr_check_centered(&LatticePmf::uniform(&[-1, 3]).unwrap(), 1.0, &params);
        assert!(centered.is_member());
    }

    #[test]
    fn brs_of_four_sign_laws() {
        let r = 3i64;
        let params = ClassParams::new(r as f64, 4, 0.5).unwrap();
        let comps = vec![LatticePmf::uniform(&[-r, r]).unwrap(); 4];
        let b = build_brs(&comps, &params).unwrap();
        assert!((b.variance() - 4.0 * (r * r) as f64).abs() < 1e-12);
        assert!(b.mean().abs() < 4e-9);
    }

    #[test]
    fn brs_single_member_unchanged() {
        let params = ClassParams::new(2.0, 1, 0.5).unwrap();
        let p = LatticePmf::from_point_masses([(-2, 1.0), (1, 2.0)]).unwrap();
        assert_eq!(build_brs(std::slice::from_ref(&p), &params).unwrap(), p);
    }

    #[test]
    fn brs_mixed_components_variance_bounds() {
        let r = 10i64;
        let c1 = 0.05;
        let params = ClassParams::new(r as f64, 100, c1).unwrap();
        let family = [
            LatticePmf::uniform(&[-r, r]).unwrap(),
            LatticePmf::from_point_masses([(-2 * r, 1.0), (r, 2.0)]).unwrap(),
            LatticePmf::uniform(&(-r..=r).collect::<Vec<_>>()).unwrap(),
            LatticePmf::from_point_masses([(-4 * r, 1.0), (0, 2.0), (4 * r, 1.0)]).unwrap(),
        ];
        let comps: Vec<LatticePmf> = (0..100).map(|i| family[i % family.len()].clone()).collect();
        let b = build_brs(&comps, &params).unwrap();
        let v = b.variance();
        assert!(v >= c1 * 100.0 * 25.0 && v <= 100.0 * 1600.0, "{v}");
        let expected: f64 = comps.iter().map(LatticePmf::variance).sum();
        assert!((v - expected).abs() < 1e-6 * expected);
        assert!(b.mean().abs() <= 100.0 * 1e-9);
    }

    #[test]
    fn brs_rejects_bad_component_by_index() {
        let params = ClassParams::new(2.0, 3, 0.5).unwrap();
        let good = LatticePmf::uniform(&[-2, 2]).unwrap();
        let comps = vec![good.clone(), good, LatticePmf::delta(0)];
        assert!(matches!(
            build_brs(&comps, &params),
            Err(Error::Class { index: 2, .. })
        ));
        assert!(matches!(
            build_brs(&comps[..2], &params),
            Err(Error::Argument(_))
        ));
    }
}
