//! Two-phase QuickSort runs and the `Q_n = A + B` decompositions built on them.
//!
//! Phase I repeatedly partitions a sublist longer than `r` (largest first,
//! ties broken by creation order) until every sublist has length at most `r`.
//! Phase II finishes the sort on whatever is left. The decomposition samplers
//! set aside some Phase-II instances as the "smooth part" `B` and charge every
//! other comparison to `A`.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{arg, Error, Result};
use crate::pmf::LatticePmf;
use crate::quicksort::QnTable;
use crate::rng::{derive_seed, rng_from_seed};

/// Schema tag written as the first (comment) line of ensemble CSV output.
pub const ENSEMBLE_SCHEMA: &str = "# schema: quickllt-ensemble v1";

/// Smallest scale accepted by the truncated decomposition.
pub const DEFAULT_R0: usize = 20;

/// Default fraction `c` for the size-3 (binomial) decomposition, and the
/// largest accepted value.
pub const DEFAULT_BINOMIAL_C: f64 = 0.05;
pub const MAX_BINOMIAL_C: f64 = 0.1;
pub const BINOMIAL_N0: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Phase1Result {
    /// Lengths of the sublists left at the end of Phase I, in creation order.
    pub sublists: Vec<usize>,
    /// Number of partitioning steps `T`.
    pub active_steps: usize,
    pub comparisons_phase1: u64,
}

/// Records every partition performed so totals can be recounted
/// independently of the per-phase bookkeeping.
#[derive(Debug, Default)]
struct NodeLog {
    sizes: Vec<usize>,
}

impl NodeLog {
    fn record(&mut self, len: usize) -> u64 {
        self.sizes.push(len);
        (len - 1) as u64
    }

    fn recount(&self) -> u64 {
        self.sizes.iter().map(|&k| (k - 1) as u64).sum()
    }
}

fn finish_sublist<R: Rng + ?Sized>(len: usize, rng: &mut R, log: &mut NodeLog) -> u64 {
    let mut stack = vec![len];
    let mut total = 0;
    while let Some(k) = stack.pop() {
        if k < 2 {
            continue;
        }
        total += log.record(k);
        let u = rng.random_range(1..=k);
        stack.push(u - 1);
        stack.push(k - u);
    }
    total
}

/// Expands lists of length `>= split_from` (largest first) until `stop`
/// says so or nothing is left to split. Returns the terminal lists in creation
/// order, the step count and the comparisons spent.
fn expand<R, F>(
    n: usize,
    split_from: usize,
    rng: &mut R,
    log: &mut NodeLog,
    mut stop: F,
) -> Phase1Result
where
    R: Rng + ?Sized,
    F: FnMut(&[usize], &[bool]) -> bool,
{
    let mut lengths = vec![n];
    let mut alive = vec![true];
    let mut heap: BinaryHeap<(usize, Reverse<usize>)> = BinaryHeap::new();
    if n >= split_from {
        heap.push((n, Reverse(0)));
    }
    let mut steps = 0;
    let mut comparisons = 0;
    while steps < n {
        if stop(&lengths, &alive) {
            break;
        }
        let Some((len, Reverse(idx))) = heap.pop() else {
            break;
        };
        alive[idx] = false;
        comparisons += log.record(len);
        let u = rng.random_range(1..=len);
        for child in [u - 1, len - u] {
            let id = lengths.len();
            lengths.push(child);
            alive.push(true);
            if child >= split_from {
                heap.push((child, Reverse(id)));
            }
        }
        steps += 1;
    }
    let sublists = lengths
        .iter()
        .zip(&alive)
        .filter(|(_, a)| **a)
        .map(|(l, _)| *l)
        .collect();
    Phase1Result {
        sublists,
        active_steps: steps,
        comparisons_phase1: comparisons,
    }
}

fn check_even_r(r: usize) -> Result<()> {
    if r < 2 || r % 2 == 1 {
        return arg(format!("r = {r} must be an even integer >= 2"));
    }
    Ok(())
}

fn phase1_rng<R: Rng + ?Sized>(n: usize, r: usize, rng: &mut R, log: &mut NodeLog) -> Phase1Result {
    expand(n, r + 1, rng, log, |_, _| false)
}

/// Phase I on `n` keys with threshold `r`. Lists of length `<= r`, including
/// the initial list when `n <= r`, are never split.
pub fn run_phase1(n: usize, r: usize, seed: u64) -> Result<Phase1Result> {
    check_even_r(r)?;
    Ok(phase1_rng(
        n,
        r,
        &mut rng_from_seed(seed),
        &mut NodeLog::default(),
    ))
}

fn is_medium(len: usize, r: usize) -> bool {
    2 * len >= r && len <= r
}

/// `X_{n,r}`: sublists with length in `[r/2, r]`.
pub fn count_medium_sublists(res: &Phase1Result, r: usize) -> usize {
    res.sublists.iter().filter(|&&l| is_medium(l, r)).count()
}

/// `E X_{n,r}`: 0 below `r/2`, 1 on `[r/2, r]`, `(n+1)/(r+1)` above `r`.
pub fn xi(n: usize, r: usize) -> f64 {
    if 2 * n < r {
        0.0
    } else if n <= r {
        1.0
    } else {
        (n + 1) as f64 / (r + 1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecompositionKind {
    Plain,
    Truncated,
    Binomial,
}

/// One realised split of a full QuickSort run into `A` and the parts of `B`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionSample {
    pub kind: DecompositionKind,
    pub n: usize,
    pub a: u64,
    /// Raw comparison counts of the selected instances (minus 2 each for the
    /// binomial kind).
    pub b_parts: Vec<u64>,
    /// Sublist length behind each part.
    pub part_scales: Vec<usize>,
    /// Centering constants: `z_{r_i}` for the truncated kind, empty otherwise.
    pub centers: Vec<f64>,
    pub e_occurred: bool,
    /// Integer amount removed from the parts before they enter `b_parts`
    /// (`2 ceil(cn)` for the binomial kind when `E` holds).
    pub removed: u64,
    /// Total comparisons recounted from the node log of the run.
    pub total: u64,
    pub active_steps: usize,
    /// `X_{n,r}` for the plain and truncated kinds; number of size-3 leaves
    /// for the binomial kind.
    pub x_count: usize,
}

impl DecompositionSample {
    pub fn b_total(&self) -> u64 {
        self.b_parts.iter().sum()
    }

    /// `A + sum B_i (+ removed) == total`.
    pub fn accounting_holds(&self) -> bool {
        self.a + self.b_total() + self.removed == self.total
    }

    /// `B_i - z_{r_i}` for truncated samples; the raw parts otherwise.
    pub fn centered_parts(&self) -> Vec<f64> {
        if self.centers.is_empty() {
            return self.b_parts.iter().map(|&b| b as f64).collect();
        }
        self.b_parts
            .iter()
            .zip(&self.centers)
            .map(|(&b, z)| b as f64 - z)
            .collect()
    }
}

struct PlainRun {
    phase1: Phase1Result,
    /// (length, comparisons) of every medium sublist selected, in order.
    selected: Vec<(usize, u64)>,
    a: u64,
    log: NodeLog,
    x: usize,
}

/// Phase I, then Phase IIa on unselected sublists and Phase IIb on the first
/// `t` medium sublists (if at least `t` exist).
fn plain_run<R: Rng + ?Sized>(n: usize, r: usize, t: usize, rng: &mut R) -> PlainRun {
    let mut log = NodeLog::default();
    let phase1 = phase1_rng(n, r, rng, &mut log);
    let x = count_medium_sublists(&phase1, r);
    let mut chosen = vec![false; phase1.sublists.len()];
    if x >= t {
        let mut left = t;
        for (i, &len) in phase1.sublists.iter().enumerate() {
            if left == 0 {
                break;
            }
            if is_medium(len, r) {
                chosen[i] = true;
                left -= 1;
            }
        }
    }
    let mut a = phase1.comparisons_phase1;
    for (i, &len) in phase1.sublists.iter().enumerate() {
        if !chosen[i] {
            a += finish_sublist(len, rng, &mut log);
        }
    }
    let mut selected = Vec::new();
    for (i, &len) in phase1.sublists.iter().enumerate() {
        if chosen[i] {
            selected.push((len, finish_sublist(len, rng, &mut log)));
        }
    }
    PlainRun {
        phase1,
        selected,
        a,
        log,
        x,
    }
}

fn check_plain_params(n: usize, r: usize) -> Result<()> {
    check_even_r(r)?;
    if r < 20 {
        return arg(format!("r = {r} must be at least 20"));
    }
    if n < 5 * r {
        return arg(format!("n = {n} must be at least 5r = {}", 5 * r));
    }
    Ok(())
}

/// Plain decomposition: `E = {X_{n,r} >= ceil(n/(3r))}`; when `E` holds the
/// parts are the comparison counts of the first `ceil(n/(3r))` medium
/// sublists.
pub fn sample_decomposition(n: usize, r: usize, seed: u64) -> Result<DecompositionSample> {
    check_plain_params(n, r)?;
    let s = n.div_ceil(3 * r);
    let mut rng = rng_from_seed(seed);
    let run = plain_run(n, r, s, &mut rng);
    let e = run.x >= s;
    Ok(DecompositionSample {
        kind: DecompositionKind::Plain,
        n,
        a: run.a,
        b_parts: run.selected.iter().map(|p| p.1).collect(),
        part_scales: run.selected.iter().map(|p| p.0).collect(),
        centers: Vec::new(),
        e_occurred: e,
        removed: 0,
        total: run.log.recount(),
        active_steps: run.phase1.active_steps,
        x_count: run.x,
    })
}

/// Truncation window `[q_k - 2k, q_k + 2k]` and the conditional law of `Q_k`
/// on it.
#[derive(Debug, Clone)]
pub struct TruncatedLaw {
    pub k: usize,
    pub lo: f64,
    pub hi: f64,
    /// `P(Q_k in window)`.
    pub window_prob: f64,
    /// Law of `Q_k` given the window.
    pub conditional: LatticePmf,
    /// `z_k = E[Q_k | window]`.
    pub center: f64,
}

impl TruncatedLaw {
    pub fn new(table: &QnTable, k: usize) -> Result<Self> {
        let pmf = table.pmf(k)?;
        let q = table.mean(k);
        let (lo, hi) = (q - 2.0 * k as f64, q + 2.0 * k as f64);
        let (conditional, window_prob) = pmf.condition_closed(lo, hi)?;
        let center = conditional.mean();
        Ok(Self {
            k,
            lo,
            hi,
            window_prob,
            conditional,
            center,
        })
    }

    pub fn contains(&self, x: u64) -> bool {
        let x = x as f64;
        x >= self.lo && x <= self.hi
    }
}

/// Precomputed truncation laws for the part sizes `r/2..=r`.
#[derive(Debug, Clone)]
pub struct TruncationTable {
    r: usize,
    laws: Vec<TruncatedLaw>,
}

impl TruncationTable {
    pub fn new(table: &QnTable, r: usize) -> Result<Self> {
        if r > table.n_max() {
            return Err(Error::Size(format!(
                "part scale {r} beyond the exact-law table ({})",
                table.n_max()
            )));
        }
        let laws = (r / 2..=r)
            .map(|k| TruncatedLaw::new(table, k))
            .collect::<Result<_>>()?;
        Ok(Self { r, laws })
    }

    pub fn law(&self, k: usize) -> &TruncatedLaw {
        &self.laws[k - self.r / 2]
    }

    pub fn r(&self) -> usize {
        self.r
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedParams {
    pub n: usize,
    pub r: usize,
    pub c1: f64,
    pub c2: f64,
    pub r0: usize,
}

impl TruncatedParams {
    /// Uses `c2 = c1 / 6` and `r0 = 20`.
    pub fn new(n: usize, r: usize, c1: f64) -> Self {
        Self {
            n,
            r,
            c1,
            c2: c1 / 6.0,
            r0: DEFAULT_R0,
        }
    }

    /// `s = ceil(c2 n / r)`.
    pub fn s(&self) -> usize {
        ((self.c2 * self.n as f64) / self.r as f64).ceil() as usize
    }

    /// `t = ceil(n / (3r))` candidate parts from the plain decomposition.
    pub fn t(&self) -> usize {
        self.n.div_ceil(3 * self.r)
    }

    fn validate(&self) -> Result<()> {
        check_plain_params(self.n, self.r)?;
        if self.r < self.r0 {
            return arg(format!("r = {} below r0 = {}", self.r, self.r0));
        }
        if !(self.c1 > 0.0 && self.c1 < 1.0) {
            return arg(format!("c1 = {} must lie in (0, 1)", self.c1));
        }
        if !(self.c2 > 0.0) {
            return arg(format!("c2 = {} must be positive", self.c2));
        }
        if self.s() > self.t() {
            return arg(format!(
                "s = {} exceeds the {} available parts",
                self.s(),
                self.t()
            ));
        }
        Ok(())
    }
}

/// Truncated decomposition: among the first `t` medium parts, keep the first
/// `s` whose count lands in `[q_{r_i} - 2 r_i, q_{r_i} + 2 r_i]`; `E` requires
/// the plain event and at least `s` such parts. Centering constants are the
/// exact conditional means `z_{r_i}`.
pub fn sample_truncated_decomposition(
    params: &TruncatedParams,
    trunc: &TruncationTable,
    seed: u64,
) -> Result<DecompositionSample> {
    params.validate()?;
    if trunc.r() != params.r {
        return arg(format!(
            "truncation table built for r = {}, not {}",
            trunc.r(),
            params.r
        ));
    }
    let (s, t) = (params.s(), params.t());
    let mut rng = rng_from_seed(seed);
    let run = plain_run(params.n, params.r, t, &mut rng);
    let mut picked: Vec<usize> = Vec::new();
    if run.x >= t {
        for (i, &(len, b)) in run.selected.iter().enumerate() {
            if picked.len() == s {
                break;
            }
            if trunc.law(len).contains(b) {
                picked.push(i);
            }
        }
    }
    let e = picked.len() == s && run.x >= t;
    if !e {
        picked.clear();
    }
    let b_parts: Vec<u64> = picked.iter().map(|&i| run.selected[i].1).collect();
    let part_scales: Vec<usize> = picked.iter().map(|&i| run.selected[i].0).collect();
    let centers = part_scales.iter().map(|&k| trunc.law(k).center).collect();
    let total = run.log.recount();
    let b_sum: u64 = b_parts.iter().sum();
    Ok(DecompositionSample {
        kind: DecompositionKind::Truncated,
        n: params.n,
        a: run.a + run.selected.iter().map(|p| p.1).sum::<u64>() - b_sum,
        b_parts,
        part_scales,
        centers,
        e_occurred: e,
        removed: 0,
        total,
        active_steps: run.phase1.active_steps,
        x_count: run.x,
    })
}

/// Size-3 decomposition: expand lists of length `>= 4` until `ceil(cn)`
/// sublists of length exactly 3 exist. Each selected size-3 instance
/// contributes its comparison count minus 2, which is Bernoulli(2/3).
pub fn sample_binomial_decomposition(n: usize, c: f64, seed: u64) -> Result<DecompositionSample> {
    if n < BINOMIAL_N0 {
        return arg(format!("n = {n} below n0 = {BINOMIAL_N0}"));
    }
    if !(c > 0.0 && c <= MAX_BINOMIAL_C) && !(n == 3 && c > 0.0 && c <= 1.0 / 3.0) {
        return arg(format!("c = {c} outside (0, {MAX_BINOMIAL_C}]"));
    }
    let k = (c * n as f64).ceil() as usize;
    let mut rng = rng_from_seed(seed);
    let mut log = NodeLog::default();
    let phase1 = expand(n, 4, &mut rng, &mut log, |lengths, alive| {
        lengths
            .iter()
            .zip(alive)
            .filter(|(l, a)| **a && **l == 3)
            .count()
            >= k
    });
    let threes = phase1.sublists.iter().filter(|&&l| l == 3).count();
    let e = threes >= k;
    let mut chosen = vec![false; phase1.sublists.len()];
    if e {
        let mut left = k;
        for (i, &len) in phase1.sublists.iter().enumerate() {
            if left == 0 {
                break;
            }
            if len == 3 {
                chosen[i] = true;
                left -= 1;
            }
        }
    }
    let mut a = phase1.comparisons_phase1;
    for (i, &len) in phase1.sublists.iter().enumerate() {
        if !chosen[i] {
            a += finish_sublist(len, &mut rng, &mut log);
        }
    }
    let mut b_parts = Vec::new();
    for (i, &len) in phase1.sublists.iter().enumerate() {
        if chosen[i] {
            b_parts.push(finish_sublist(len, &mut rng, &mut log) - 2);
        }
    }
    Ok(DecompositionSample {
        kind: DecompositionKind::Binomial,
        n,
        a,
        part_scales: vec![3; b_parts.len()],
        b_parts,
        centers: Vec::new(),
        e_occurred: e,
        removed: if e { 2 * k as u64 } else { 0 },
        total: log.recount(),
        active_steps: phase1.active_steps,
        x_count: threes,
    })
}

/// One CSV row of an ensemble run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleRow {
    pub seed: u64,
    pub n: usize,
    pub r: usize,
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "X_nr")]
    pub x_nr: usize,
    #[serde(rename = "E")]
    pub e: bool,
    #[serde(rename = "A")]
    pub a: u64,
    #[serde(rename = "B_total")]
    pub b_total: u64,
}

impl EnsembleRow {
    pub fn from_sample(seed: u64, r: usize, s: &DecompositionSample) -> Self {
        Self {
            seed,
            n: s.n,
            r,
            t: s.active_steps,
            x_nr: s.x_count,
            e: s.e_occurred,
            a: s.a,
            b_total: s.b_total(),
        }
    }
}

/// Seeds `derive_seed(base, 0..count)`; results do not depend on the thread
/// count.
pub fn ensemble_seeds(base: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|i| derive_seed(base, i)).collect()
}

/// Runs `f` once per seed in parallel, preserving seed order.
pub fn run_ensemble<T, F>(seeds: &[u64], f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    seeds.par_iter().map(|&s| f(s)).collect()
}

pub fn write_ensemble_csv<W: Write>(rows: &[EnsembleRow], mut out: W) -> Result<()> {
    writeln!(out, "{ENSEMBLE_SCHEMA}")?;
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase1_single_forced_split() {
        for seed in 0..50 {
            let res = run_phase1(5, 4, seed).unwrap();
            assert_eq!(res.active_steps, 1);
            assert_eq!(res.sublists.len(), 2);
            assert_eq!(res.sublists.iter().sum::<usize>(), 4);
            assert_eq!(res.comparisons_phase1, 4);
        }
    }

    #[test]
    fn phase1_nothing_to_split() {
        let res = run_phase1(4, 4, 1).unwrap();
        assert_eq!(
            res,
            Phase1Result {
                sublists: vec![4],
                active_steps: 0,
                comparisons_phase1: 0
            }
        );
    }

    #[test]
    fn phase1_rejects_odd_r() {
        assert!(matches!(run_phase1(100, 21, 0), Err(Error::Argument(_))));
        assert!(matches!(run_phase1(100, 0, 0), Err(Error::Argument(_))));
    }

    #[test]
    fn phase1_identity_and_termination() {
        for seed in 0..200 {
            let (n, r) = (
                50 + (seed as usize * 37) % 900,
                2 * (1 + (seed as usize * 7) % 30),
            );
            let res = run_phase1(n, r, seed).unwrap();
            let t = res.active_steps;
            assert_eq!(res.sublists.len(), t + 1);
            assert_eq!(res.sublists.iter().sum::<usize>(), n - t);
            assert!(res.sublists.iter().all(|&l| l <= r));
        }
    }

    #[test]
    fn medium_count_examples() {
        let res = Phase1Result {
            sublists: vec![10, 20, 3],
            active_steps: 2,
            comparisons_phase1: 0,
        };
        assert_eq!(count_medium_sublists(&res, 20), 2);
        let res = Phase1Result {
            sublists: vec![1, 1, 1],
            active_steps: 2,
            comparisons_phase1: 0,
        };
        assert_eq!(count_medium_sublists(&res, 20), 0);
    }

    #[test]
    fn xi_examples() {
        assert_eq!(xi(9, 20), 0.0);
        assert_eq!(xi(10, 20), 1.0);
        assert_eq!(xi(15, 20), 1.0);
        assert_eq!(xi(20, 20), 1.0);
        assert_eq!(xi(41, 20), 2.0);
        // The closed form also holds at n = r.
        assert_eq!((20.0 + 1.0) / 21.0, xi(20, 20));
    }

    #[test]
    fn xi_satisfies_its_recurrence() {
        let r = 20;
        for n in r + 1..200 {
            let avg: f64 = (0..n).map(|i| xi(i, r)).sum::<f64>() * 2.0 / n as f64;
            assert!((avg - xi(n, r)).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn medium_sublist_mean_at_41() {
        let seeds = 20_000u64;
        let total: usize = (0..seeds)
            .map(|s| count_medium_sublists(&run_phase1(41, 20, s).unwrap(), 20))
            .sum();
        let mean = total as f64 / seeds as f64;
        assert!((mean - 2.0).abs() < 0.03, "{mean}");
    }

    #[test]
    fn plain_decomposition_pinned_run() {
        let seed = (0..)
            .find(|&s| sample_decomposition(200, 20, s).unwrap().e_occurred)
            .unwrap();
        let d = sample_decomposition(200, 20, seed).unwrap();
        assert_eq!(d.b_parts.len(), 4);
        assert!(d.part_scales.iter().all(|&k| (10..=20).contains(&k)));
        assert!(d.b_parts.iter().all(|&b| b >= 9));
        assert!(d.accounting_holds());
        assert_eq!(d, sample_decomposition(200, 20, seed).unwrap());
    }

    #[test]
    fn plain_decomposition_total_matches_plain_sampler_law() {
        // Without splitting into phases the total is just Q_n; compare means.
        let n = 100;
        let draws = 4000u64;
        let mean: f64 = (0..draws)
            .map(|s| sample_decomposition(n, 20, s).unwrap().total as f64)
            .sum::<f64>()
            / draws as f64;
        let q = crate::quicksort::mean_recurrence(n)[n];
        let sd = (0.33 * (n * n) as f64 / draws as f64).sqrt();
        assert!((mean - q).abs() < 4.0 * sd, "{mean} vs {q}");
    }

    #[test]
    fn plain_decomposition_rejects_bad_params() {
        assert!(sample_decomposition(99, 20, 0).is_err());
        assert!(sample_decomposition(1000, 18, 0).is_err());
        assert!(sample_decomposition(1000, 21, 0).is_err());
    }

    #[test]
    fn truncation_centering_is_exact() {
        let table = QnTable::build(40).unwrap();
        let trunc = TruncationTable::new(&table, 40).unwrap();
        for k in 20..=40 {
            let law = trunc.law(k);
            let centered_mean = law.conditional.mean() - law.center;
            assert!(centered_mean.abs() <= 1e-9);
            assert!(law.window_prob > 0.99);
        }
    }

    #[test]
    fn truncated_decomposition_accounting() {
        let table = QnTable::build(40).unwrap();
        let trunc = TruncationTable::new(&table, 40).unwrap();
        let mut params = TruncatedParams::new(4000, 40, 0.05);
        params.c2 = 0.3;
        assert_eq!((params.s(), params.t()), (30, 34));
        let mut seen_e = false;
        for seed in 0..40 {
            let d = sample_truncated_decomposition(&params, &trunc, seed).unwrap();
            assert!(d.accounting_holds());
            if d.e_occurred {
                seen_e = true;
                assert_eq!(d.b_parts.len(), 30);
                for (x, &k) in d.centered_parts().iter().zip(&d.part_scales) {
                    assert!(x.abs() <= 4.0 * k as f64);
                }
            } else {
                assert!(d.b_parts.is_empty());
            }
        }
        assert!(seen_e);
    }

    #[test]
    fn truncated_rejects_too_many_parts() {
        let table = QnTable::build(40).unwrap();
        let trunc = TruncationTable::new(&table, 40).unwrap();
        let mut params = TruncatedParams::new(4000, 40, 0.05);
        params.c2 = 0.4;
        assert!(sample_truncated_decomposition(&params, &trunc, 0).is_err());
        let params = TruncatedParams::new(4000, 20, 0.05);
        assert!(sample_truncated_decomposition(&params, &trunc, 0).is_err());
    }

    #[test]
    fn binomial_size_three_case() {
        let mut ones = 0;
        let draws = 30_000u64;
        for seed in 0..draws {
            let d = sample_binomial_decomposition(3, 0.1, seed).unwrap();
            assert!(d.e_occurred);
            assert_eq!(d.b_parts.len(), 1);
            assert!(d.b_parts[0] <= 1);
            assert!(d.accounting_holds());
            ones += d.b_parts[0];
        }
        let p = ones as f64 / draws as f64;
        let sd = (2.0 / 9.0 / draws as f64).sqrt();
        assert!((p - 2.0 / 3.0).abs() < 4.0 * sd, "{p}");
    }

    #[test]
    fn binomial_accounting_and_bounds() {
        for seed in 0..300 {
            let d = sample_binomial_decomposition(300, 0.1, seed).unwrap();
            assert!(d.accounting_holds());
            if d.e_occurred {
                assert_eq!(d.b_parts.len(), 30);
                assert!(d.b_total() <= 30);
            } else {
                assert_eq!(d.removed, 0);
            }
        }
        assert!(sample_binomial_decomposition(2, 0.1, 0).is_err());
        assert!(sample_binomial_decomposition(300, 0.2, 0).is_err());
    }

    #[test]
    fn ensemble_csv_has_schema_line() {
        let seeds = ensemble_seeds(1, 3);
        let rows = run_ensemble(&seeds, |s| {
            let d = sample_decomposition(200, 20, s)?;
            Ok(EnsembleRow::from_sample(s, 20, &d))
        })
        .unwrap();
        let mut buf = Vec::new();
        write_ensemble_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(ENSEMBLE_SCHEMA));
        assert_eq!(lines.next(), Some("seed,n,r,T,X_nr,E,A,B_total"));
        assert_eq!(lines.count(), 3);
    }
}
