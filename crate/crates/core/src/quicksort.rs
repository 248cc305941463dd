//! Distribution of the comparison count `Q_n` of randomized QuickSort.
//!
//! With a uniform pivot the law satisfies
//! `Q_n = n - 1 + Q_{I-1} + Q'_{n-I}`, `I ~ U{1..n}`, which gives
//! `law(Q_n) = (1/n) sum_i shift(law(Q_{i-1}) * law(Q_{n-i}), n - 1)`.
//! [`QnTable`] evaluates this exactly for small `n` by direct convolution and
//! switches to a spectral form (pointwise products of the generating
//! functions on a common FFT grid) for larger `n`.

use std::ops::RangeInclusive;

use itertools::Itertools;
use rand::Rng;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{arg, Error, Result};
use crate::pmf::LatticePmf;
use crate::rng::rng_from_seed;

/// Largest `n` accepted by the brute-force oracle.
pub const BRUTE_FORCE_MAX: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QnConfig {
    /// Largest `n` the table may be built for.
    pub n_cap: usize,
    /// Laws up to this `n` are built by direct convolution, which keeps every
    /// support point (including tails far below round-off) exact.
    pub direct_limit: usize,
}

impl Default for QnConfig {
    fn default() -> Self {
        Self {
            n_cap: 512,
            direct_limit: 64,
        }
    }
}

/// `q_0..=q_{n_max}` from `q_n = (n - 1) + (2/n) sum_{i<n} q_i`.
pub fn mean_recurrence(n_max: usize) -> Vec<f64> {
    let mut q = vec![0.0; n_max + 1];
    let mut prefix = 0.0;
    for n in 1..=n_max {
        prefix += q[n - 1];
        if n >= 2 {
            q[n] = (n - 1) as f64 + 2.0 * prefix / n as f64;
        }
    }
    q
}

/// Fewest comparisons any run on `n` keys can make (balanced splits).
pub fn min_comparisons(n_max: usize) -> Vec<u64> {
    let mut m = vec![0u64; n_max + 1];
    for n in 2..=n_max {
        m[n] = (n - 1) as u64 + m[(n - 1) / 2] + m[n / 2];
    }
    m
}

pub fn max_comparisons(n: usize) -> u64 {
    (n * n.saturating_sub(1) / 2) as u64
}

/// Exact laws of `Q_0..=Q_{n_max}` and their means.
#[derive(Debug, Clone)]
pub struct QnTable {
    pmfs: Vec<LatticePmf>,
    means: Vec<f64>,
}

/// One row of the CSV summary export.
#[derive(Debug, Clone, Serialize)]
pub struct QnSummaryRow {
    pub n: usize,
    pub q_n: f64,
    pub variance: f64,
    pub support_min: i64,
    pub support_max: i64,
}

impl QnTable {
    pub fn build(n_max: usize) -> Result<Self> {
        Self::build_with(n_max, &QnConfig::default())
    }

    pub fn build_with(n_max: usize, cfg: &QnConfig) -> Result<Self> {
        if n_max > cfg.n_cap {
            return Err(Error::Size(format!(
                "n = {n_max} exceeds the exact-law cap {}",
                cfg.n_cap
            )));
        }
        let means = mean_recurrence(n_max);
        let mins = min_comparisons(n_max);
        let mut pmfs = Vec::with_capacity(n_max + 1);
        pmfs.push(LatticePmf::delta(0));
        if n_max >= 1 {
            pmfs.push(LatticePmf::delta(0));
        }
        let direct_top = n_max.min(cfg.direct_limit.max(1));
        for (n, &min) in mins.iter().enumerate().take(direct_top + 1).skip(2) {
            pmfs.push(direct_step(&pmfs, n, min)?);
        }
        if n_max > direct_top {
            spectral_extend(&mut pmfs, n_max, &mins)?;
        }
        Ok(Self { pmfs, means })
    }

    pub fn n_max(&self) -> usize {
        self.pmfs.len() - 1
    }

    pub fn pmf(&self, n: usize) -> Result<&LatticePmf> {
        self.pmfs
            .get(n)
            .ok_or_else(|| Error::Size(format!("n = {n} beyond table size {}", self.n_max())))
    }

    pub fn pmfs(&self) -> &[LatticePmf] {
        &self.pmfs
    }

    pub fn mean(&self, n: usize) -> f64 {
        self.means[n]
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn normalized(&self, n: usize) -> Result<NormalizedView<'_>> {
        NormalizedView::new(n, self.pmf(n)?, self.means[n])
    }

    pub fn summary_rows(&self) -> Vec<QnSummaryRow> {
        self.pmfs
            .iter()
            .enumerate()
            .map(|(n, p)| QnSummaryRow {
                n,
                q_n: self.means[n],
                variance: p.variance(),
                support_min: p.min_support(),
                support_max: p.max_support(),
            })
            .collect()
    }
}

/// Exact law of `Q_n` under the default cap.
pub fn exact_pmf(n: usize) -> Result<LatticePmf> {
    let table = QnTable::build(n)?;
    Ok(table.pmfs[n].clone())
}

fn direct_step(pmfs: &[LatticePmf], n: usize, min_n: u64) -> Result<LatticePmf> {
    // Values are indexed relative to the smallest possible count before the
    // n - 1 comparisons of the first partition are added.
    let base = min_n as i64 - (n as i64 - 1);
    let len = (max_comparisons(n) - min_n) as usize + 1;
    let mut acc = vec![0.0; len];
    // Pivot ranks i and n + 1 - i produce the same pair of sublist sizes.
    for i in 1..=n.div_ceil(2) {
        let (a, b) = (&pmfs[i - 1], &pmfs[n - i]);
        let weight = if 2 * i == n + 1 { 1.0 } else { 2.0 };
        let start = (a.offset() + b.offset() - base) as usize;
        let (short, long) = if a.len() <= b.len() {
            (a.probs(), b.probs())
        } else {
            (b.probs(), a.probs())
        };
        for (j, &x) in short.iter().enumerate() {
            let wx = weight * x;
            for (o, &y) in acc[start + j..start + j + long.len()].iter_mut().zip(long) {
                *o += wx * y;
            }
        }
    }
    let inv = 1.0 / n as f64;
    acc.iter_mut().for_each(|v| *v *= inv);
    LatticePmf::from_computed(min_n as i64, acc)
}

fn spectral_extend(pmfs: &mut Vec<LatticePmf>, n_max: usize, mins: &[u64]) -> Result<()> {
    let size = (max_comparisons(n_max) as usize + 1).next_power_of_two();
    let half = size / 2 + 1;
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);

    // spectra[j][k] = sum_x P(Q_j = x) w^{x k}, w = e^{-2 pi i / size}, k < size/2 + 1.
    let mut spectra: Vec<Vec<Complex64>> = Vec::with_capacity(n_max + 1);
    let mut buf = vec![Complex64::new(0.0, 0.0); size];
    for p in pmfs.iter() {
        buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        for (x, pr) in p.iter() {
            buf[x as usize].re = pr;
        }
        fwd.process(&mut buf);
        spectra.push(buf[..half].to_vec());
    }

    let twiddle: Vec<Complex64> = (0..half)
        .map(|k| Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * k as f64 / size as f64))
        .collect();
    let mut sum = vec![Complex64::new(0.0, 0.0); half];
    for n in pmfs.len()..=n_max {
        sum.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        for i in 1..=n.div_ceil(2) {
            let weight = if 2 * i == n + 1 { 1.0 } else { 2.0 };
            let (a, b) = (&spectra[i - 1], &spectra[n - i]);
            for k in 0..half {
                sum[k] += a[k] * b[k] * weight;
            }
        }
        // Shift by n - 1 multiplies the transform by w^{(n-1) k}.
        let shift = (n - 1) as u64;
        let inv_n = 1.0 / n as f64;
        let mut spec = vec![Complex64::new(0.0, 0.0); half];
        for k in 0..half {
            let phase_idx = ((shift * k as u64) % size as u64) as usize;
            let phase = if phase_idx < half {
                twiddle[phase_idx]
            } else {
                twiddle[size - phase_idx].conj()
            };
            spec[k] = sum[k] * phase * inv_n;
        }

        buf[..half].copy_from_slice(&spec[..half]);
        for k in half..size {
            buf[k] = spec[size - k].conj();
        }
        inv.process(&mut buf);
        let scale = 1.0 / size as f64;
        let lo = mins[n] as usize;
        let hi = max_comparisons(n) as usize;
        let probs: Vec<f64> = buf[lo..=hi].iter().map(|c| c.re * scale).collect();
        pmfs.push(LatticePmf::from_computed(lo as i64, probs)?);
        spectra.push(spec);
    }
    Ok(())
}

/// Exact law of `Q_n` for `n <= 9` by running first-element-pivot QuickSort on
/// all `n!` orderings of distinct keys and counting comparisons.
pub fn brute_force_pmf(n: usize) -> Result<LatticePmf> {
    if n > BRUTE_FORCE_MAX {
        return Err(Error::Size(format!(
            "brute force limited to n <= {BRUTE_FORCE_MAX}, got {n}"
        )));
    }
    let top = max_comparisons(n) as usize;
    let mut counts = vec![0u64; top + 1];
    let mut total = 0u64;
    for perm in (0..n as u32).permutations(n) {
        counts[first_pivot_comparisons(&perm) as usize] += 1;
        total += 1;
    }
    let probs: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
    LatticePmf::new(0, probs)
}

fn first_pivot_comparisons(keys: &[u32]) -> u64 {
    if keys.len() < 2 {
        return 0;
    }
    let pivot = keys[0];
    let (left, right): (Vec<u32>, Vec<u32>) = keys[1..].iter().partition(|&&k| k < pivot);
    (keys.len() - 1) as u64 + first_pivot_comparisons(&left) + first_pivot_comparisons(&right)
}

/// Runs randomized QuickSort on `n` keys and returns the comparison count.
///
/// Only sublist sizes matter for the count, so the recursion tree is simulated
/// directly: a sublist of length `k` costs `k - 1` comparisons and splits into
/// lengths `u - 1` and `k - u` with `u` uniform on `1..=k`.
pub fn simulate_qn<R: Rng + ?Sized>(n: usize, rng: &mut R) -> u64 {
    let mut stack = vec![n];
    let mut total = 0u64;
    while let Some(k) = stack.pop() {
        if k < 2 {
            continue;
        }
        total += (k - 1) as u64;
        let u = rng.random_range(1..=k);
        stack.push(u - 1);
        stack.push(k - u);
    }
    total
}

/// One draw of `Q_n` from a fresh stream seeded with `seed`.
pub fn sample_qn(n: usize, seed: u64) -> u64 {
    simulate_qn(n, &mut rng_from_seed(seed))
}

/// Fast sampler of `Q_n` that simulates the recursion only above a cutoff and
/// draws whole subtrees of size `<= cutoff` from their exact laws.
#[derive(Debug, Clone)]
pub struct QnSampler {
    cutoff: usize,
    // cdfs[k] = cumulative weights of Q_k, offset by mins[k]
    cdfs: Vec<(u64, Vec<f64>)>,
}

impl QnSampler {
    pub fn new(cutoff: usize) -> Result<Self> {
        let table = QnTable::build(cutoff)?;
        Ok(Self::from_table(&table))
    }

    pub fn from_table(table: &QnTable) -> Self {
        let cdfs = table
            .pmfs()
            .iter()
            .map(|p| {
                let mut acc = 0.0;
                let cdf = p.probs().iter().map(|x| {
                    acc += x;
                    acc
                });
                (p.offset() as u64, cdf.collect())
            })
            .collect();
        Self {
            cutoff: table.n_max(),
            cdfs,
        }
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    fn draw_leaf<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> u64 {
        let (base, cdf) = &self.cdfs[k];
        let u: f64 = rng.random::<f64>() * cdf[cdf.len() - 1];
        let idx = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        base + idx as u64
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> u64 {
        let mut stack = vec![n];
        let mut total = 0u64;
        while let Some(k) = stack.pop() {
            if k <= self.cutoff {
                total += self.draw_leaf(k, rng);
                continue;
            }
            total += (k - 1) as u64;
            let u = rng.random_range(1..=k);
            stack.push(u - 1);
            stack.push(k - u);
        }
        total
    }
}

/// `Q_n* = (Q_n - q_n) / n` as a view on the law of `Q_n`.
#[derive(Debug, Clone, Copy)]
pub struct NormalizedView<'a> {
    pub n: usize,
    pub base: &'a LatticePmf,
    pub q_n: f64,
}

impl<'a> NormalizedView<'a> {
    pub fn new(n: usize, base: &'a LatticePmf, q_n: f64) -> Result<Self> {
        if n == 0 {
            return arg("normalisation needs n >= 1");
        }
        Ok(Self { n, base, q_n })
    }

    pub fn map(&self, x: i64) -> f64 {
        (x as f64 - self.q_n) / self.n as f64
    }

    pub fn unmap(&self, y: f64) -> f64 {
        self.q_n + self.n as f64 * y
    }

    /// `P(Q_n* in [lo, hi])`.
    pub fn closed_prob(&self, lo: f64, hi: f64) -> Result<f64> {
        self.base.closed_prob(self.unmap(lo), self.unmap(hi))
    }

    pub fn cdf(&self, y: f64) -> f64 {
        self.base.cdf(self.unmap(y))
    }

    pub fn mean(&self) -> f64 {
        (self.base.mean() - self.q_n) / self.n as f64
    }

    /// `(y, P)` pairs of the normalized law.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.base.iter().map(move |(x, p)| (self.map(x), p))
    }
}

/// `min_n min(P(Q_n* in [-2,-1]), P(Q_n* in [1,2]))` over the range.
pub fn estimate_c1(table: &QnTable, range: RangeInclusive<usize>) -> Result<f64> {
    if range.is_empty() {
        return arg("empty n range");
    }
    let mut best = f64::INFINITY;
    for n in range {
        let view = table.normalized(n)?;
        let left = view.closed_prob(-2.0, -1.0)?;
        let right = view.closed_prob(1.0, 2.0)?;
        best = best.min(left.min(right));
    }
    Ok(best)
}
