//! Half-open intervals and prefix-sum scans over lattice laws.

use serde::Serialize;

use crate::error::{arg, Result};
use crate::pmf::LatticePmf;

/// The half-open interval `(lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HalfOpen {
    pub lo: f64,
    pub hi: f64,
}

impl HalfOpen {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return arg(format!("invalid interval ({lo}, {hi}]"));
        }
        Ok(Self { lo, hi })
    }

    pub fn with_length(lo: f64, len: f64) -> Result<Self> {
        Self::new(lo, lo + len)
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi == self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x <= self.hi
    }

    pub fn contains_interval(&self, other: &HalfOpen) -> bool {
        other.lo >= self.lo && other.hi <= self.hi
    }

    /// Mirror image `(-hi, -lo]`, closed on the other side; for lattice laws
    /// this is the interval `[-hi, -lo)` which we express as `(-hi - 1, -lo - 1]`
    /// when both endpoints are integers.
    pub fn reflect_integer(&self) -> HalfOpen {
        HalfOpen {
            lo: -self.hi - 1.0,
            hi: -self.lo - 1.0,
        }
    }

    pub fn prob(&self, p: &LatticePmf) -> f64 {
        p.interval_prob(self.lo, self.hi)
            .expect("validated interval")
    }
}

/// Compensated prefix sums of a lattice law; `mass(a, b)` returns the mass of
/// the integer points `a..=b` in O(1).
#[derive(Debug, Clone)]
pub struct PrefixMass {
    offset: i64,
    // cum[i] = P(X < offset + i)
    cum: Vec<f64>,
}

impl PrefixMass {
    pub fn new(p: &LatticePmf) -> Self {
        let mut cum = Vec::with_capacity(p.len() + 1);
        cum.push(0.0);
        let (mut s, mut c) = (0.0f64, 0.0f64);
        for &x in p.probs() {
            // Neumaier summation.
            let t = s + x;
            if s.abs() >= x.abs() {
                c += (s - t) + x;
            } else {
                c += (x - t) + s;
            }
            s = t;
            cum.push(s + c);
        }
        Self {
            offset: p.offset(),
            cum,
        }
    }

    pub fn min_point(&self) -> i64 {
        self.offset
    }

    pub fn max_point(&self) -> i64 {
        self.offset + self.cum.len() as i64 - 2
    }

    /// `P(X < x)` for integer `x`.
    fn below(&self, x: i64) -> f64 {
        let i = (x - self.offset).clamp(0, self.cum.len() as i64 - 1);
        self.cum[i as usize]
    }

    /// Mass of the integer points `a..=b`.
    pub fn mass(&self, a: i64, b: i64) -> f64 {
        if b < a {
            return 0.0;
        }
        (self.below(b + 1) - self.below(a)).max(0.0)
    }

    /// Mass of `(lo, hi]`.
    pub fn interval(&self, lo: f64, hi: f64) -> f64 {
        self.mass(lo.floor() as i64 + 1, hi.floor() as i64)
    }
}

/// Length-`len` subintervals `(a + t, a + t + len]` of `(a, a + m]`, reduced to
/// the distinct integer point sets they cover. Returns the inclusive integer
/// ranges.
pub fn subinterval_point_sets(a: f64, m: f64, len: f64) -> Vec<(i64, i64)> {
    debug_assert!(len <= m);
    let span = m - len;
    let mut ts: Vec<f64> = vec![0.0];
    // Point sets change only where a + t or a + t + len crosses an integer.
    let first = (a).floor() as i64 + 1;
    let last = (a + span).floor() as i64;
    for k in first..=last {
        ts.push(k as f64 - a);
    }
    let first = (a + len).floor() as i64 + 1;
    let last = (a + len + span).floor() as i64;
    for k in first..=last {
        ts.push(k as f64 - a - len);
    }
    let mut sets: Vec<(i64, i64)> = ts
        .into_iter()
        .filter(|t| *t >= 0.0 && *t <= span)
        .map(|t| ((a + t).floor() as i64 + 1, (a + t + len).floor() as i64))
        .collect();
    sets.sort_unstable();
    sets.dedup();
    sets
}
