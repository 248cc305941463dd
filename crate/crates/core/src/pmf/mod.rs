//! Finite-support probability mass functions on the integers.
//!
//! A [`LatticePmf`] stores the smallest support point and a dense vector of
//! weights. Every constructor enforces unit mass (within [`MASS_TOL`]) and a
//! tight support, so the first and last weights are strictly positive. Mass
//! drift is reported as an error rather than silently renormalised.

mod class;
mod convolve;
mod io;
mod tilt;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};

pub use class::{
    build_brs, class_dr_check, class_dr_check_centered, ClassParams, DrCheck, DrClause,
};
pub(crate) use convolve::fft_product_with;
pub use convolve::{convolve, convolve_direct, convolve_fft, convolve_with, ConvolutionConfig};
pub use tilt::{solve_tilt, tilt, TiltResult, MAX_TILT_EXPONENT};

/// Allowed deviation of the total mass from one.
pub const MASS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPmf")]
pub struct LatticePmf {
    offset: i64,
    probs: Vec<f64>,
}

#[derive(Deserialize)]
struct RawPmf {
    offset: i64,
    probs: Vec<f64>,
}

impl TryFrom<RawPmf> for LatticePmf {
    type Error = Error;

    fn try_from(raw: RawPmf) -> Result<Self> {
        LatticePmf::new(raw.offset, raw.probs)
    }
}

/// Summary moments of a lattice law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub abs_third_central: f64,
}

impl LatticePmf {
    /// Validating constructor. Leading and trailing zero weights are trimmed;
    /// the weights must already carry unit mass.
    pub fn new(offset: i64, probs: Vec<f64>) -> Result<Self> {
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(Error::Construction(format!(
                "weight {p} at index {i} is negative or not finite"
            )));
        }
        let (offset, probs) =
            trim(offset, probs).ok_or_else(|| Error::Construction("no positive weight".into()))?;
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::Construction(format!(
                "total mass {total} differs from 1"
            )));
        }
        Ok(Self { offset, probs })
    }

    /// Builds a law from weights produced by an internal computation. Tiny
    /// negative values (transform round-off) are clamped to zero; mass drift
    /// beyond [`MASS_TOL`] is a numeric error.
    pub(crate) fn from_computed(offset: i64, mut probs: Vec<f64>) -> Result<Self> {
        for p in probs.iter_mut() {
            if !p.is_finite() {
                return Err(Error::Numeric("non-finite weight".into()));
            }
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        let (offset, probs) =
            trim(offset, probs).ok_or_else(|| Error::Numeric("all weights vanished".into()))?;
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::Numeric(format!("mass drifted to {total}")));
        }
        Ok(Self { offset, probs })
    }

    /// Builds a law from `(point, weight)` pairs. Duplicates are merged and
    /// the weights are normalised to unit mass.
    pub fn from_point_masses<I>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (i64, f64)>,
    {
        let mut merged: BTreeMap<i64, f64> = BTreeMap::new();
        for (x, w) in entries {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Construction(format!(
                    "weight {w} at point {x} is negative or not finite"
                )));
            }
            *merged.entry(x).or_insert(0.0) += w;
        }
        let total: f64 = merged.values().sum();
        if merged.is_empty() {
            return Err(Error::Construction("no entries".into()));
        }
        if total <= 0.0 {
            return Err(Error::Construction("all weights are zero".into()));
        }
        let positive: Vec<(i64, f64)> = merged.into_iter().filter(|(_, w)| *w > 0.0).collect();
        let lo = positive[0].0;
        let hi = positive[positive.len() - 1].0;
        let len =
            usize::try_from(hi - lo + 1).map_err(|_| Error::Size("support too wide".into()))?;
        let mut probs = vec![0.0; len];
        for (x, w) in positive {
            probs[(x - lo) as usize] = w / total;
        }
        Self::new(lo, probs)
    }

    pub fn delta(point: i64) -> Self {
        Self {
            offset: point,
            probs: vec![1.0],
        }
    }

    /// Uniform law on the given (distinct or repeated) points.
    pub fn uniform(points: &[i64]) -> Result<Self> {
        Self::from_point_masses(points.iter().map(|&x| (x, 1.0)))
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min_support(&self) -> i64 {
        self.offset
    }

    pub fn max_support(&self) -> i64 {
        self.offset + self.probs.len() as i64 - 1
    }

    pub fn is_degenerate(&self) -> bool {
        self.probs.len() == 1
    }

    /// `P(X = x)`.
    pub fn prob(&self, x: i64) -> f64 {
        if x < self.offset {
            return 0.0;
        }
        self.probs
            .get((x - self.offset) as usize)
            .copied()
            .unwrap_or(0.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Iterates over `(point, probability)` pairs, including interior zeros.
    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .map(move |(i, &p)| (self.offset + i as i64, p))
    }

    /// Law of `X + k`.
    pub fn shift(&self, k: i64) -> Self {
        Self {
            offset: self.offset + k,
            probs: self.probs.clone(),
        }
    }

    /// Law of `-X`.
    pub fn negate(&self) -> Self {
        let mut probs = self.probs.clone();
        probs.reverse();
        Self {
            offset: -self.max_support(),
            probs,
        }
    }

    pub fn mean(&self) -> f64 {
        // Work relative to the offset so large supports keep their precision.
        let rel: f64 = self
            .probs
            .iter()
            .enumerate()
            .map(|(i, p)| p * i as f64)
            .sum();
        self.offset as f64 + rel
    }

    pub fn moments(&self) -> Moments {
        let rel_mean: f64 = self
            .probs
            .iter()
            .enumerate()
            .map(|(i, p)| p * i as f64)
            .sum();
        let mut variance = 0.0;
        let mut third = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            let d = i as f64 - rel_mean;
            let d2 = d * d;
            variance += p * d2;
            third += p * d2 * d.abs();
        }
        Moments {
            mean: self.offset as f64 + rel_mean,
            variance,
            abs_third_central: third,
        }
    }

    pub fn variance(&self) -> f64 {
        self.moments().variance
    }

    /// `P(a < X <= b)` over the half-open interval `(a, b]`.
    pub fn interval_prob(&self, a: f64, b: f64) -> Result<f64> {
        if a.is_nan() || b.is_nan() {
            return arg("interval endpoints must not be NaN");
        }
        if a > b {
            return arg(format!("interval ({a}, {b}] has a > b"));
        }
        Ok(self.index_range_mass(a.floor() + 1.0, b.floor()))
    }

    /// `P(a <= X <= b)` over the closed interval `[a, b]`.
    pub fn closed_prob(&self, a: f64, b: f64) -> Result<f64> {
        if a.is_nan() || b.is_nan() {
            return arg("interval endpoints must not be NaN");
        }
        if a > b {
            return arg(format!("interval [{a}, {b}] has a > b"));
        }
        Ok(self.index_range_mass(a.ceil(), b.floor()))
    }

    /// Mass on the integer points `lo..=hi` given as floats (possibly infinite).
    fn index_range_mass(&self, lo: f64, hi: f64) -> f64 {
        let first = self.offset as f64;
        let last = self.max_support() as f64;
        let lo = lo.max(first);
        let hi = hi.min(last);
        if lo > hi {
            return 0.0;
        }
        let i = (lo - first) as usize;
        let j = (hi - first) as usize;
        self.probs[i..=j].iter().sum()
    }

    /// Cumulative distribution `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.index_range_mass(f64::NEG_INFINITY, x.floor())
    }

    /// Largest pointwise absolute difference between two laws.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let lo = self.offset.min(other.offset);
        let hi = self.max_support().max(other.max_support());
        (lo..=hi)
            .map(|x| (self.prob(x) - other.prob(x)).abs())
            .fold(0.0, f64::max)
    }

    /// Conditional law given `lo <= X <= hi`, together with the conditioning
    /// probability.
    pub fn condition_closed(&self, lo: f64, hi: f64) -> Result<(Self, f64)> {
        let mass = self.closed_prob(lo, hi)?;
        if mass <= 0.0 {
            return Err(Error::Infeasible(format!("no mass in [{lo}, {hi}]")));
        }
        let entries = self
            .iter()
            .filter(|(x, p)| *p > 0.0 && (*x as f64) >= lo && (*x as f64) <= hi)
            .map(|(x, p)| (x, p / mass));
        Ok((Self::from_point_masses(entries)?, mass))
    }
}

fn trim(offset: i64, mut probs: Vec<f64>) -> Option<(i64, Vec<f64>)> {
    let first = probs.iter().position(|&p| p > 0.0)?;
    let last = probs.iter().rposition(|&p| p > 0.0)?;
    probs.truncate(last + 1);
    probs.drain(..first);
    Some((offset + first as i64, probs))
}
