//! Fitted implicit constants and pinned regression values.
//!
//! The checked-in file `constants/fitted.json` records the output of the
//! `fit_constants` example. Callers may load a different file with
//! [`Constants::from_path`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};
use crate::smoothing::TiltRatioConfig;

pub const CONSTANTS_SCHEMA_VERSION: u32 = 1;

const PINNED: &str = include_str!("../constants/fitted.json");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailConstants {
    #[serde(rename = "C")]
    pub big_c: f64,
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityTolerances {
    /// Sup difference between two independent MC estimates.
    pub self_consistency_tol: f64,
    /// Sup difference between MC and fixed-point estimates on `|x| <= 2`.
    pub mc_vs_fixed_point_tol: f64,
    pub fixed_point_iterations: usize,
}

/// Values measured once on the exact laws with the fixed-point density, used
/// as regression thresholds (times `1 + slack`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regression {
    pub slack: f64,
    pub n: Vec<usize>,
    pub llt_deviation: Vec<f64>,
    pub semi_local_sup_deviation: Vec<f64>,
    pub kolmogorov_distance: Vec<f64>,
    pub statement_eps: Vec<f64>,
    pub flatness_half_window: Vec<f64>,
}

impl Regression {
    /// Pinned value for `n` in `series`, widened by the slack.
    pub fn threshold(&self, series: &[f64], n: usize) -> Option<f64> {
        let i = self.n.iter().position(|&k| k == n)?;
        series.get(i).map(|v| v * (1.0 + self.slack))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub schema_version: u32,
    pub c1: f64,
    pub tail: TailConstants,
    pub tilt: TiltRatioConfig,
    pub berry_esseen_a: f64,
    pub binomial_c: f64,
    pub c_hat: f64,
    pub density: DensityTolerances,
    pub regression: Regression,
}

impl Constants {
    /// The checked-in constants.
    pub fn pinned() -> Self {
        Self::from_json(PINNED).expect("checked-in constants file is valid")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)?;
        Self::from_json(&s)
    }

    fn validate(&self) -> Result<()> {
        if self.schema_version != CONSTANTS_SCHEMA_VERSION {
            return arg(format!(
                "unsupported constants schema_version {}",
                self.schema_version
            ));
        }
        let r = &self.regression;
        let lens = [
            r.llt_deviation.len(),
            r.semi_local_sup_deviation.len(),
            r.kolmogorov_distance.len(),
            r.statement_eps.len(),
            r.flatness_half_window.len(),
        ];
        if lens.iter().any(|&l| l != r.n.len()) {
            return arg("regression series must match the n list in length");
        }
        let positive = [
            self.c1,
            self.tail.big_c,
            self.tail.c,
            self.tilt.constant,
            self.berry_esseen_a,
            self.binomial_c,
            self.c_hat,
        ];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return arg("constants must be positive and finite");
        }
        Ok(())
    }
}
