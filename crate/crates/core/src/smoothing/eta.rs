use serde::Serialize;

use crate::error::{arg, Result};
use crate::execution_tree::DEFAULT_R0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WarningKind {
    Violated,
    /// Holds with equality (within 1e-9 relative).
    Boundary,
}

/// A precondition of an error-term formula that fails or sits on its
/// boundary. The formula is still evaluated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EtaWarning {
    pub condition: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub kind: WarningKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EtaTerm {
    pub label: &'static str,
    /// Value before multiplication by `C`.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EtaReport {
    pub eta: f64,
    pub terms: Vec<EtaTerm>,
    pub dominant: &'static str,
    pub warnings: Vec<EtaWarning>,
}

impl EtaReport {
    fn build(big_c: f64, terms: Vec<EtaTerm>, warnings: Vec<EtaWarning>) -> Self {
        let dominant = terms
            .iter()
            .fold(
                &terms[0],
                |best, t| if t.value > best.value { t } else { best },
            )
            .label;
        let eta = big_c * terms.iter().map(|t| t.value).sum::<f64>();
        Self {
            eta,
            terms,
            dominant,
            warnings,
        }
    }

    pub fn term(&self, label: &str) -> Option<f64> {
        self.terms
            .iter()
            .find(|t| t.label == label)
            .map(|t| t.value)
    }
}

/// Records `lhs <= rhs` when it fails or is tight.
fn require(warnings: &mut Vec<EtaWarning>, condition: &'static str, lhs: f64, rhs: f64) {
    let tight = (lhs - rhs).abs() <= 1e-9 * lhs.abs().max(rhs.abs());
    if tight {
        warnings.push(EtaWarning {
            condition,
            lhs,
            rhs,
            kind: WarningKind::Boundary,
        });
    } else if lhs > rhs {
        warnings.push(EtaWarning {
            condition,
            lhs,
            rhs,
            kind: WarningKind::Violated,
        });
    }
}

fn check_inputs(values: &[(&str, f64)]) -> Result<()> {
    for (name, v) in values {
        if !(v.is_finite() && *v >= 0.0) {
            return arg(format!("{name} = {v} must be finite and non-negative"));
        }
    }
    Ok(())
}

/// Constants appearing only in the side conditions of [`eta_core`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EtaConditions {
    pub r0: f64,
    pub c_prime: f64,
}

impl Default for EtaConditions {
    fn default() -> Self {
        Self {
            r0: DEFAULT_R0 as f64,
            c_prime: 1.0,
        }
    }
}

/// `C (e^{-c lambda^2} + lambda m / sqrt(r n) + r / ell + (n / ell) e^{-c n / r})`,
/// with the conditions `r0 <= r <= c n`, `m >= ell >= C' r` and
/// `lambda m <= sqrt(r n)` reported as warnings.
pub fn eta_core(
    n: f64,
    m: f64,
    ell: f64,
    r: f64,
    lambda: f64,
    big_c: f64,
    c: f64,
) -> Result<EtaReport> {
    eta_core_with(n, m, ell, r, lambda, big_c, c, &EtaConditions::default())
}

#[allow(clippy::too_many_arguments)]
pub fn eta_core_with(
    n: f64,
    m: f64,
    ell: f64,
    r: f64,
    lambda: f64,
    big_c: f64,
    c: f64,
    cond: &EtaConditions,
) -> Result<EtaReport> {
    check_inputs(&[
        ("n", n),
        ("m", m),
        ("ell", ell),
        ("r", r),
        ("lambda", lambda),
        ("C", big_c),
        ("c", c),
    ])?;
    if n == 0.0 || r == 0.0 || ell == 0.0 {
        return arg("n, r and ell must be positive");
    }
    let terms = vec![
        EtaTerm {
            label: "tail_term",
            value: (-c * lambda * lambda).exp(),
        },
        EtaTerm {
            label: "lambda_m_term",
            value: lambda * m / (r * n).sqrt(),
        },
        EtaTerm {
            label: "r_over_ell_term",
            value: r / ell,
        },
        EtaTerm {
            label: "large_deviation_term",
            value: (n / ell) * (-c * n / r).exp(),
        },
    ];
    let mut warnings = Vec::new();
    require(&mut warnings, "r0 <= r", cond.r0, r);
    require(&mut warnings, "r <= c n", r, c * n);
    require(&mut warnings, "ell <= m", ell, m);
    require(&mut warnings, "C' r <= ell", cond.c_prime * r, ell);
    require(
        &mut warnings,
        "lambda m <= sqrt(r n)",
        lambda * m,
        (r * n).sqrt(),
    );
    Ok(EtaReport::build(big_c, terms, warnings))
}

/// `C (e^{-c lambda^2} + lambda m / sqrt(n) + n e^{-c n})`, with
/// `lambda m <= sqrt(n)` and `lambda <= c sqrt(n) / 20` reported as warnings.
pub fn eta_bin(n: f64, m: f64, lambda: f64, big_c: f64, c: f64) -> Result<EtaReport> {
    check_inputs(&[
        ("n", n),
        ("m", m),
        ("lambda", lambda),
        ("C", big_c),
        ("c", c),
    ])?;
    if n == 0.0 {
        return arg("n must be positive");
    }
    let terms = vec![
        EtaTerm {
            label: "tail_term",
            value: (-c * lambda * lambda).exp(),
        },
        EtaTerm {
            label: "lambda_m_term",
            value: lambda * m / n.sqrt(),
        },
        EtaTerm {
            label: "exp_n_term",
            value: n * (-c * n).exp(),
        },
    ];
    let mut warnings = Vec::new();
    require(&mut warnings, "lambda m <= sqrt(n)", lambda * m, n.sqrt());
    require(
        &mut warnings,
        "lambda <= c sqrt(n) / 20",
        lambda,
        c * n.sqrt() / 20.0,
    );
    Ok(EtaReport::build(big_c, terms, warnings))
}
