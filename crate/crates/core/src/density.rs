//! Estimates of the density `f` of the limit law `Q` of `(Q_n - q_n)/n`, and
//! the interval-level comparison of exact laws against such an estimate.
//!
//! Two independent estimators are provided: a binned Gaussian KDE over Monte
//! Carlo draws of `Q_n` at large `n`, and direct iteration of the fixed-point
//! map `Z -> U Z + (1 - U) Z' + C(U)` on a grid. They are meant to be
//! cross-checked against each other.

use std::io::{Read, Write};

use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::interval::PrefixMass;
use crate::pmf::{fft_product_with, LatticePmf};
use crate::quicksort::{mean_recurrence, QnSampler, QnTable};
use crate::rng::{derive_seed, rng_from_seed};

/// Bounds on `f` and `f'` that every accepted estimate must respect.
pub const SUP_BOUND: f64 = 16.0;
pub const SLOPE_BOUND: f64 = 2466.0;
/// Relative padding applied to both bounds.
pub const BOUND_PADDING: f64 = 0.05;

/// Allowed deviation of the trapezoid integral from 1.
pub const INTEGRAL_TOL: f64 = 0.01;

pub const DEFAULT_BANDWIDTH: f64 = 0.02;
pub const DEFAULT_GRID: Grid = Grid {
    lo: -3.0,
    step: 0.005,
    len: 1601,
};

/// Sample fraction outside the grid above which the MC grid is widened.
pub const AUTO_EXTEND_MASS: f64 = 1e-4;

/// Mass of an exact law allowed to fall outside a density grid before
/// interval comparisons refuse to run.
pub const COVERAGE_TOL: f64 = 1e-4;

const MC_SHARDS: u64 = 64;
const KERNEL_SIGMAS: f64 = 6.0;

/// Uniform grid `lo + i * step`, `i < len`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lo: f64,
    pub step: f64,
    pub len: usize,
}

impl Grid {
    /// Grid from `lo` to (at least) `hi` with the given step.
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite() && lo.is_finite() && hi.is_finite() && hi > lo) {
            return arg(format!("invalid grid [{lo}, {hi}] with step {step}"));
        }
        let len = ((hi - lo) / step - 1e-9).ceil() as usize + 1;
        Ok(Self { lo, step, len })
    }

    pub fn x(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.step
    }

    pub fn hi(&self) -> f64 {
        self.x(self.len - 1)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi()
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(|i| self.x(i))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityMethod {
    McKde,
    FixedPoint,
    /// Window-averaged exact law; only used for self-comparisons.
    ExactWindow,
    /// Read back from a CSV file without a sidecar.
    External,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DensityMeta {
    pub n: Option<usize>,
    pub iterations: Option<usize>,
    pub samples: Option<usize>,
    pub bandwidth: Option<f64>,
    pub seed: Option<u64>,
    /// Fraction of mass that fell outside the grid (cumulative over rounds
    /// for the fixed-point method).
    pub outside_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub method: DensityMethod,
    pub meta: DensityMeta,
}

impl DensityEstimate {
    pub fn new(
        grid: Grid,
        values: Vec<f64>,
        method: DensityMethod,
        meta: DensityMeta,
    ) -> Result<Self> {
        if values.len() != grid.len || grid.len < 2 {
            return Err(Error::Construction(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Construction(
                "density values must be finite and non-negative".into(),
            ));
        }
        Ok(Self {
            grid,
            values,
            method,
            meta,
        })
    }

    /// Linear interpolation; outside the grid is a coverage error.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !self.grid.contains(x) {
            return Err(Error::Coverage(format!(
                "x = {x} outside [{}, {}]",
                self.grid.lo,
                self.grid.hi()
            )));
        }
        let t = (x - self.grid.lo) / self.grid.step;
        let i = (t.floor() as usize).min(self.grid.len - 2);
        let w = t - i as f64;
        Ok(self.values[i] * (1.0 - w) + self.values[i + 1] * w)
    }

    pub fn integral(&self) -> f64 {
        trapezoid(&self.values, self.grid.step)
    }

    /// Cumulative trapezoid integral at each grid point.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.values.len());
        out.push(0.0);
        for w in self.values.windows(2) {
            acc += 0.5 * (w[0] + w[1]) * self.grid.step;
            out.push(acc);
        }
        out
    }

    /// `F(x)` from the cumulative integral, 0 left of the grid and the total
    /// mass right of it.
    pub fn cdf_at(&self, cum: &[f64], x: f64) -> f64 {
        if x <= self.grid.lo {
            return 0.0;
        }
        if x >= self.grid.hi() {
            return cum[cum.len() - 1];
        }
        let t = (x - self.grid.lo) / self.grid.step;
        let i = (t.floor() as usize).min(self.grid.len - 2);
        let w = t - i as f64;
        let (a, b) = (self.values[i], self.values[i + 1]);
        // Exact integral of the linear interpolant over [x_i, x].
        cum[i] + self.grid.step * (a * w + 0.5 * (b - a) * w * w)
    }

    /// Checks non-negativity and the normalisation invariant.
    pub fn validate(&self) -> Result<()> {
        let integral = self.integral();
        if (integral - 1.0).abs() > INTEGRAL_TOL {
            return Err(Error::Numeric(format!("density integrates to {integral}")));
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "density"])?;
        for (x, v) in self.grid.points().zip(&self.values) {
            w.write_record([format!("{x:.17e}"), format!("{v:.17e}")])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads an `x,density` CSV on a uniform grid.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| {
                        Error::Construction(format!(
                            "malformed density row {:?}",
                            rec.iter().collect::<Vec<_>>()
                        ))
                    })
            };
            xs.push(parse(0)?);
            vs.push(parse(1)?);
        }
        if xs.len() < 2 {
            return Err(Error::Construction(
                "density CSV needs at least two rows".into(),
            ));
        }
        let step = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
        if !(step > 0.0)
            || xs
                .iter()
                .enumerate()
                .any(|(i, x)| (x - (xs[0] + i as f64 * step)).abs() > 1e-6 * step)
        {
            return Err(Error::Construction(
                "density CSV grid is not uniform".into(),
            ));
        }
        let grid = Grid {
            lo: xs[0],
            step,
            len: xs.len(),
        };
        Self::new(grid, vs, DensityMethod::External, DensityMeta::default())
    }

    /// JSON sidecar holding everything except the values.
    pub fn sidecar_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Sidecar<'a> {
            schema_version: u32,
            grid: &'a Grid,
            method: DensityMethod,
            meta: &'a DensityMeta,
            integral: f64,
        }
        Ok(serde_json::to_string_pretty(&Sidecar {
            schema_version: 1,
            grid: &self.grid,
            method: self.method,
            meta: &self.meta,
            integral: self.integral(),
        })?)
    }

    /// `f` evaluated as `n/m * P(Q_n in window of length m centred at q_n + n x)`
    /// on the given grid. Comparing an exact law with this estimate isolates
    /// interpolation and lattice effects.
    pub fn from_pmf_window(
        pmf: &LatticePmf,
        q_n: f64,
        n: usize,
        m: f64,
        grid: Grid,
    ) -> Result<Self> {
        let prefix = PrefixMass::new(pmf);
        let nf = n as f64;
        let values = grid
            .points()
            .map(|x| {
                let mid = q_n + nf * x;
                prefix.interval(mid - m / 2.0, mid + m / 2.0) * nf / m
            })
            .collect();
        let meta = DensityMeta {
            n: Some(n),
            ..DensityMeta::default()
        };
        Self::new(grid, values, DensityMethod::ExactWindow, meta)
    }
}

fn trapezoid(values: &[f64], step: f64) -> f64 {
    values.windows(2).map(|w| 0.5 * (w[0] + w[1])).sum::<f64>() * step
}

/// Splits each value between its two neighbouring grid points. Returns the
/// weights (summing to the number of values inside the grid) and the count
/// of values that fell outside.
fn linear_bin(values: &[f64], grid: &Grid) -> (Vec<f64>, usize) {
    let mut w = vec![0.0; grid.len];
    let mut outside = 0;
    for &v in values {
        let t = (v - grid.lo) / grid.step;
        if !(t >= 0.0 && t <= (grid.len - 1) as f64) {
            outside += 1;
            continue;
        }
        let i = (t.floor() as usize).min(grid.len - 2);
        let frac = t - i as f64;
        w[i] += 1.0 - frac;
        w[i + 1] += frac;
    }
    (w, outside)
}

/// Discrete Gaussian smoothing of grid masses; returns densities.
fn gaussian_smooth(masses: &[f64], step: f64, bandwidth: f64) -> Vec<f64> {
    let half = (KERNEL_SIGMAS * bandwidth / step).ceil() as usize;
    let kernel: Vec<f64> = (0..=2 * half)
        .map(|j| {
            let z = (j as f64 - half as f64) * step / bandwidth;
            (-0.5 * z * z).exp()
        })
        .collect();
    let norm: f64 = kernel.iter().sum();
    let mut out = vec![0.0; masses.len()];
    for (i, &m) in masses.iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        let lo = i.saturating_sub(half);
        let hi = (i + half).min(masses.len() - 1);
        for j in lo..=hi {
            out[j] += m * kernel[j + half - i] / norm;
        }
    }
    out.iter_mut().for_each(|v| *v /= step);
    out
}

fn check_bandwidth(bandwidth: f64) -> Result<()> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return arg(format!("bandwidth {bandwidth} must be positive"));
    }
    Ok(())
}

/// Gaussian KDE of `samples` draws of `(Q_n - q_n)/n`, using a hybrid sampler
/// with exact leaves of size up to 256.
pub fn estimate_density_mc(
    n: usize,
    samples: usize,
    bandwidth: f64,
    grid: Grid,
    seed: u64,
) -> Result<DensityEstimate> {
    check_mc_args(n, samples, bandwidth)?;
    let sampler = QnSampler::new(256)?;
    estimate_density_mc_with(&sampler, n, samples, bandwidth, grid, seed)
}

pub fn estimate_density_mc_with(
    sampler: &QnSampler,
    n: usize,
    samples: usize,
    bandwidth: f64,
    grid: Grid,
    seed: u64,
) -> Result<DensityEstimate> {
    check_mc_args(n, samples, bandwidth)?;
    let draws = draw_normalized(sampler, n, samples, seed);
    kde(
        &draws,
        bandwidth,
        grid,
        DensityMeta {
            n: Some(n),
            samples: Some(samples),
            bandwidth: Some(bandwidth),
            seed: Some(seed),
            ..DensityMeta::default()
        },
    )
}

fn check_mc_args(n: usize, samples: usize, bandwidth: f64) -> Result<()> {
    check_bandwidth(bandwidth)?;
    if n < 1000 {
        return arg(format!(
            "n = {n} is too small for a limit-density estimate (need >= 1000)"
        ));
    }
    if samples < 10_000 {
        return arg(format!("{samples} samples is too few (need >= 10000)"));
    }
    Ok(())
}

/// Draws `(Q_n - q_n)/n` in fixed shards so the result does not depend on the
/// number of worker threads.
pub fn draw_normalized(sampler: &QnSampler, n: usize, samples: usize, seed: u64) -> Vec<f64> {
    let q_n = mean_recurrence(n)[n];
    let nf = n as f64;
    let per = samples as u64 / MC_SHARDS;
    let extra = samples as u64 % MC_SHARDS;
    let shards: Vec<Vec<f64>> = (0..MC_SHARDS)
        .into_par_iter()
        .map(|s| {
            let mut rng = rng_from_seed(derive_seed(seed, s));
            let count = per + u64::from(s < extra);
            (0..count)
                .map(|_| (sampler.sample(n, &mut rng) as f64 - q_n) / nf)
                .collect()
        })
        .collect();
    shards.concat()
}

/// Binned Gaussian KDE; widens the grid (same step) when more than
/// [`AUTO_EXTEND_MASS`] of the draws fall outside it.
pub fn kde(
    draws: &[f64],
    bandwidth: f64,
    grid: Grid,
    mut meta: DensityMeta,
) -> Result<DensityEstimate> {
    check_bandwidth(bandwidth)?;
    if draws.is_empty() {
        return arg("no draws");
    }
    let mut grid = grid;
    let outside = draws.iter().filter(|&&x| !grid.contains(x)).count();
    if outside as f64 > AUTO_EXTEND_MASS * draws.len() as f64 {
        let lo = draws.iter().copied().fold(grid.lo, f64::min) - KERNEL_SIGMAS * bandwidth;
        let hi = draws.iter().copied().fold(grid.hi(), f64::max) + KERNEL_SIGMAS * bandwidth;
        let lo = grid.lo - ((grid.lo - lo) / grid.step).ceil() * grid.step;
        grid = Grid::new(lo, hi, grid.step)?;
    }
    let (mut masses, outside) = linear_bin(draws, &grid);
    let total = draws.len() as f64;
    masses.iter_mut().for_each(|m| *m /= total);
    meta.outside_mass = outside as f64 / total;
    meta.bandwidth = Some(bandwidth);
    let values = gaussian_smooth(&masses, grid.step, bandwidth);
    DensityEstimate::new(grid, values, DensityMethod::McKde, meta)
}

/// The toll `C(u) = 1 + 2u ln u + 2(1-u) ln(1-u)`.
pub fn toll(u: f64) -> f64 {
    let xlogx = |x: f64| if x > 0.0 { x * x.ln() } else { 0.0 };
    1.0 + 2.0 * xlogx(u) + 2.0 * xlogx(1.0 - u)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointConfig {
    /// Midpoint nodes for `U` on `(0, 1/2]`; the map is symmetric in
    /// `u <-> 1 - u`.
    pub u_nodes: usize,
    /// Bandwidth of the Gaussian smoothing applied to the terminal law.
    pub bandwidth: f64,
    /// Largest tolerated cumulative loss of mass off the grid.
    pub max_drift: f64,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self {
            u_nodes: 512,
            bandwidth: DEFAULT_BANDWIDTH,
            max_drift: 0.05,
        }
    }
}

/// Masses on the lattice `h * (kmin + i)`.
#[derive(Debug, Clone)]
struct GridLaw {
    kmin: i64,
    w: Vec<f64>,
}

impl GridLaw {
    /// Law of `u * X` rebinned linearly onto the lattice.
    fn scaled(&self, u: f64) -> GridLaw {
        let first = self.w.iter().position(|&x| x != 0.0).unwrap_or(0);
        let last = self.w.iter().rposition(|&x| x != 0.0).unwrap_or(0);
        let lo = (u * (self.kmin + first as i64) as f64).floor() as i64;
        let hi = (u * (self.kmin + last as i64) as f64).floor() as i64 + 1;
        let mut out = vec![0.0; (hi - lo + 1) as usize];
        for (i, &m) in self.w.iter().enumerate().take(last + 1).skip(first) {
            if m == 0.0 {
                continue;
            }
            let p = u * (self.kmin + i as i64) as f64;
            let k = p.floor();
            let frac = p - k;
            let j = (k as i64 - lo) as usize;
            out[j] += m * (1.0 - frac);
            out[j + 1] += m * frac;
        }
        GridLaw { kmin: lo, w: out }
    }
}

/// Iterates `law(Z) -> law(U Z + (1-U) Z' + C(U))` from a point mass at 0 on
/// the lattice `step * Z` restricted to the grid range, then smooths the
/// result. `seed` is recorded but the iteration is deterministic.
pub fn estimate_density_fixed_point(
    grid: Grid,
    iterations: usize,
    seed: u64,
) -> Result<DensityEstimate> {
    estimate_density_fixed_point_with(grid, iterations, seed, &FixedPointConfig::default())
}

pub fn estimate_density_fixed_point_with(
    grid: Grid,
    iterations: usize,
    seed: u64,
    cfg: &FixedPointConfig,
) -> Result<DensityEstimate> {
    if iterations == 0 {
        return arg("iterations must be at least 1");
    }
    check_bandwidth(cfg.bandwidth)?;
    if cfg.u_nodes == 0 {
        return arg("need at least one quadrature node");
    }
    let h = grid.step;
    let kmin = (grid.lo / h).floor() as i64;
    let kmax = (grid.hi() / h).ceil() as i64;
    if kmin > 0 || kmax < 0 {
        return arg("fixed-point grid must contain 0");
    }
    let n_pts = (kmax - kmin + 1) as usize;
    let (law, leaked) = fixed_point_iterate(kmin, n_pts, h, iterations, cfg)?;
    let lattice = Grid {
        lo: kmin as f64 * h,
        step: h,
        len: n_pts,
    };
    let values = gaussian_smooth(&law.w, h, cfg.bandwidth);
    let meta = DensityMeta {
        iterations: Some(iterations),
        bandwidth: Some(cfg.bandwidth),
        seed: Some(seed),
        outside_mass: leaked,
        ..DensityMeta::default()
    };
    DensityEstimate::new(lattice, values, DensityMethod::FixedPoint, meta)
}

fn fixed_point_iterate(
    kmin: i64,
    n_pts: usize,
    h: f64,
    iterations: usize,
    cfg: &FixedPointConfig,
) -> Result<(GridLaw, f64)> {
    let mut w = vec![0.0; n_pts];
    w[(-kmin) as usize] = 1.0;
    let mut law = GridLaw { kmin, w };
    let nodes: Vec<f64> = (0..cfg.u_nodes)
        .map(|i| (i as f64 + 0.5) / (2 * cfg.u_nodes) as f64)
        .collect();
    let weight = 1.0 / cfg.u_nodes as f64;
    let mut leaked = 0.0;
    for it in 0..iterations {
        let parts: Vec<Vec<f64>> = nodes
            .par_chunks(
                nodes
                    .len()
                    .div_ceil(rayon::current_num_threads().max(1))
                    .max(1),
            )
            .map(|chunk| {
                let mut planner = FftPlanner::new();
                let mut acc = vec![0.0; n_pts];
                for &u in chunk {
                    let a = law.scaled(u);
                    let b = law.scaled(1.0 - u);
                    let prod = fft_product_with(&mut planner, &a.w, &b.w);
                    let base = a.kmin + b.kmin;
                    let shift = toll(u) / h;
                    let (k, frac) = (shift.floor(), shift - shift.floor());
                    for (i, &m) in prod.iter().enumerate() {
                        if m <= 0.0 {
                            continue;
                        }
                        let j = base + i as i64 + k as i64 - kmin;
                        for (idx, share) in [(j, 1.0 - frac), (j + 1, frac)] {
                            if (0..n_pts as i64).contains(&idx) {
                                acc[idx as usize] += weight * m * share;
                            }
                        }
                    }
                }
                acc
            })
            .collect();
        let mut next = vec![0.0; n_pts];
        for p in &parts {
            for (o, v) in next.iter_mut().zip(p) {
                *o += v;
            }
        }
        // The map squares the total mass, so leaks are renormalised away each
        // round and tracked cumulatively instead.
        let mass: f64 = next.iter().sum();
        leaked += (1.0 - mass).abs();
        if leaked > cfg.max_drift || !(mass > 0.0) {
            return Err(Error::Numeric(format!(
                "fixed-point iteration {} drifted: cumulative mass change {leaked}",
                it + 1
            )));
        }
        next.iter_mut().for_each(|w| *w /= mass);
        law = GridLaw { kmin, w: next };
    }
    Ok((law, leaked))
}

/// Grid law of the first iterate, exposed for checks on its support.
pub fn fixed_point_law(
    grid: Grid,
    iterations: usize,
    cfg: &FixedPointConfig,
) -> Result<Vec<(f64, f64)>> {
    let h = grid.step;
    let kmin = (grid.lo / h).floor() as i64;
    let kmax = (grid.hi() / h).ceil() as i64;
    let (law, _) = fixed_point_iterate(kmin, (kmax - kmin + 1) as usize, h, iterations, cfg)?;
    Ok(law
        .w
        .iter()
        .enumerate()
        .map(|(i, &m)| ((kmin + i as i64) as f64 * h, m))
        .collect())
}

/// Refuses to compare an exact law with a density whose grid misses more than
/// [`COVERAGE_TOL`] of it.
pub(crate) fn check_coverage(
    pmf: &LatticePmf,
    q_n: f64,
    n: usize,
    d: &DensityEstimate,
) -> Result<()> {
    let prefix = PrefixMass::new(pmf);
    let nf = n as f64;
    let lo = q_n + nf * d.grid.lo;
    let hi = q_n + nf * d.grid.hi();
    let outside = prefix.mass(pmf.min_support(), lo.ceil() as i64 - 1)
        + prefix.mass(hi.floor() as i64 + 1, pmf.max_support());
    if outside > COVERAGE_TOL {
        return Err(Error::Coverage(format!(
            "{outside:.3e} of the law of Q_{n} lies outside the density grid [{}, {}]",
            d.grid.lo,
            d.grid.hi()
        )));
    }
    Ok(())
}

/// Where clause (i) evaluates the density inside each window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum EvalPoints {
    Midpoint,
    EndsAndMidpoint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct WindowScan {
    pub eps: f64,
    pub gamma: f64,
    /// Left ends of the worst windows for each clause.
    pub worst_eps_start: f64,
    pub worst_gamma_start: f64,
    pub windows: usize,
}

/// Scans windows `(a, a + m]` with integer `a` stepping by `stride` across the
/// support and measures both clauses.
pub(crate) fn scan_windows(
    pmf: &LatticePmf,
    q_n: f64,
    n: usize,
    m: f64,
    stride: usize,
    d: &DensityEstimate,
    points: EvalPoints,
) -> Result<WindowScan> {
    if !(m > 0.0) || stride == 0 {
        return arg(format!(
            "window length {m} and stride {stride} must be positive"
        ));
    }
    check_coverage(pmf, q_n, n, d)?;
    let prefix = PrefixMass::new(pmf);
    let nf = n as f64;
    let scale = nf / m;
    let first = pmf.min_support() - m.ceil() as i64;
    let last = pmf.max_support();
    let starts: Vec<i64> = (first..=last).step_by(stride).collect();
    let per_window = |a: i64| -> (f64, f64) {
        let lo = a as f64;
        let p = prefix.interval(lo, lo + m);
        let xs: &[f64] = match points {
            EvalPoints::Midpoint => &[0.5],
            EvalPoints::EndsAndMidpoint => &[0.0, 0.5, 1.0],
        };
        let mut dev = f64::NEG_INFINITY;
        for t in xs {
            let x = (lo + t * m - q_n) / nf;
            if let Ok(f) = d.eval(x) {
                dev = dev.max((p * scale - f).abs());
            }
        }
        (dev, p * scale)
    };
    let results: Vec<(f64, f64)> = starts.par_iter().map(|&a| per_window(a)).collect();
    let mut scan = WindowScan {
        eps: 0.0,
        gamma: 0.0,
        worst_eps_start: f64::NAN,
        worst_gamma_start: f64::NAN,
        windows: 0,
    };
    for (&a, &(dev, g)) in starts.iter().zip(&results) {
        if dev.is_finite() {
            scan.windows += 1;
            if dev > scan.eps {
                scan.eps = dev;
                scan.worst_eps_start = a as f64;
            }
        }
        if g > scan.gamma {
            scan.gamma = g;
            scan.worst_gamma_start = a as f64;
        }
    }
    Ok(scan)
}

/// Default interval stride `ceil(m / 64)`.
pub fn default_stride(m: f64) -> usize {
    ((m / 64.0).ceil() as usize).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SemiLocalReport {
    pub n: usize,
    pub delta_n: f64,
    pub m: f64,
    pub sup_deviation: f64,
    /// `sup P(Q_n in I) * n / m` over the same windows.
    pub gamma: f64,
    #[serde(rename = "C_used")]
    pub c_used: f64,
    pub stride: usize,
    pub windows: usize,
}

/// Compares `P(Q_n in I)` with `(m/n) f(x_I)` on windows of length
/// `m = delta_n n = 2 C n^{5/6}`, `x_I` being the normalised midpoint.
pub fn semi_local_check(
    table: &QnTable,
    n: usize,
    d: &DensityEstimate,
    c_used: f64,
) -> Result<SemiLocalReport> {
    if !(c_used > 0.0) {
        return arg(format!("C = {c_used} must be positive"));
    }
    let pmf = table.pmf(n)?;
    let delta_n = 2.0 * c_used * (n as f64).powf(-1.0 / 6.0);
    let m = delta_n * n as f64;
    let stride = default_stride(m);
    let scan = scan_windows(pmf, table.mean(n), n, m, stride, d, EvalPoints::Midpoint)?;
    Ok(SemiLocalReport {
        n,
        delta_n,
        m,
        sup_deviation: scan.eps,
        gamma: scan.gamma,
        c_used,
        stride,
        windows: scan.windows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityClause {
    SupBound,
    SlopeBound,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityBoundsReport {
    pub sup: f64,
    pub max_slope: f64,
    pub sup_limit: f64,
    pub slope_limit: f64,
    pub violations: Vec<DensityClause>,
}

impl DensityBoundsReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn density_bounds_check(d: &DensityEstimate) -> DensityBoundsReport {
    let sup = d.values.iter().copied().fold(0.0, f64::max);
    let max_slope = d
        .values
        .windows(2)
        .map(|w| (w[1] - w[0]).abs() / d.grid.step)
        .fold(0.0, f64::max);
    let sup_limit = SUP_BOUND * (1.0 + BOUND_PADDING);
    let slope_limit = SLOPE_BOUND * (1.0 + BOUND_PADDING);
    let mut violations = Vec::new();
    if sup > sup_limit {
        violations.push(DensityClause::SupBound);
    }
    if max_slope > slope_limit {
        violations.push(DensityClause::SlopeBound);
    }
    DensityBoundsReport {
        sup,
        max_slope,
        sup_limit,
        slope_limit,
        violations,
    }
}

/// `sup_x |n P(Q_n = x) - f((x - q_n)/n)|` over lattice points mapped inside
/// the grid.
pub fn llt_deviation(pmf: &LatticePmf, q_n: f64, n: usize, d: &DensityEstimate) -> Result<f64> {
    check_coverage(pmf, q_n, n, d)?;
    let nf = n as f64;
    let mut sup = 0.0f64;
    for (x, p) in pmf.iter() {
        let y = (x as f64 - q_n) / nf;
        if let Ok(f) = d.eval(y) {
            sup = sup.max((nf * p - f).abs());
        }
    }
    // Lattice points with zero mass inside the grid also count.
    for y in d.grid.points() {
        let x = q_n + nf * y;
        if x < pmf.min_support() as f64 - 1.0 || x > pmf.max_support() as f64 + 1.0 {
            sup = sup.max(d.eval(y)?);
        }
    }
    Ok(sup)
}

/// Kolmogorov distance between the law of `(Q_n - q_n)/n` and the CDF of the
/// estimate, using both one-sided limits at each atom.
pub fn kolmogorov_distance(pmf: &LatticePmf, q_n: f64, n: usize, d: &DensityEstimate) -> f64 {
    let cum = d.cumulative();
    let total = cum[cum.len() - 1];
    let nf = n as f64;
    let mut below = 0.0;
    let mut sup = 0.0f64;
    for (x, p) in pmf.iter() {
        let f = d.cdf_at(&cum, (x as f64 - q_n) / nf) / total;
        sup = sup.max((below - f).abs());
        below += p;
        sup = sup.max((below - f).abs());
    }
    sup
}
