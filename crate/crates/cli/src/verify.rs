use anyhow::{bail, Result};
use clap::{Args, ValueEnum};
use serde_json::{json, Value};

use quickllt::constants::Constants;
use quickllt::density::{density_bounds_check, semi_local_check};
use quickllt::execution_tree::{
    count_medium_sublists, ensemble_seeds, run_ensemble, run_phase1, sample_binomial_decomposition,
    sample_decomposition, sample_truncated_decomposition, TruncatedParams, TruncationTable,
};
use quickllt::pmf::{build_brs, class_dr_check_centered};
use quickllt::quicksort::QnTable;
use quickllt::smoothing::{
    berry_esseen_check, lemma23_azuma_bound, tail_bound_check, tilt_ratio_check,
};
use quickllt::{ClassParams, HalfOpen, LatticePmf};

use crate::{load_constants, require_seed, write_json, Global, Status, SCHEMA_VERSION};

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    /// Lower tail of the number of medium Phase-I sublists.
    Lemma23,
    /// Plain decomposition: event probability and accounting.
    Cor24,
    /// Truncated decomposition: class membership of the parts.
    Lemma27,
    /// Size-3 decomposition: event probability and part law.
    Lemma42,
    /// Berry-Esseen distance for sums of D_1 members.
    Lemma31,
    /// Interval tail bound for B_{r,s} families.
    Lemma32,
    /// Tilting comparison of two subintervals.
    Lemma33,
    /// Window check of the exact law against the density.
    #[value(name = "thm51-window")]
    Thm51Window,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(value_enum)]
    target: Target,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    r: Option<usize>,
    /// Number of runs for the statistical targets.
    #[arg(long, default_value_t = 1000)]
    seeds: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Size-3 fraction for `lemma42`.
    #[arg(long)]
    c: Option<f64>,
    /// Number of summands for `lemma31`, `lemma32` and `lemma33`.
    #[arg(long)]
    s: Option<usize>,
    #[arg(long, default_value_t = 2.0)]
    lambda: f64,
    /// `lemma33`: compare an interval with itself.
    #[arg(long)]
    identical_intervals: bool,
    /// `thm51-window`: the constant C in m = 2 C n^{5/6}.
    #[arg(long, default_value_t = 1.0)]
    c_used: f64,
}

fn frequency(hits: usize, total: usize) -> f64 {
    hits as f64 / total as f64
}

fn lemma23(a: &VerifyArgs) -> Result<(bool, Value)> {
    let (n, r) = (a.n.unwrap_or(4000), a.r.unwrap_or(20));
    let seed = require_seed(a.seed, "verify lemma23")?;
    let seeds = ensemble_seeds(seed, a.seeds);
    let low: usize = run_ensemble(&seeds, |s| {
        let res = run_phase1(n, r, s)?;
        Ok((count_medium_sublists(&res, r) as f64 <= n as f64 / (3.0 * r as f64)) as usize)
    })?
    .into_iter()
    .sum();
    let measured = frequency(low, seeds.len());
    let bound = (-(n as f64) / (400.0 * r as f64)).exp();
    Ok((
        measured <= bound,
        json!({ "n": n, "r": r, "runs": seeds.len(), "measured": measured, "bound": bound,
                "azuma_bound": lemma23_azuma_bound(n, r)? }),
    ))
}

fn cor24(a: &VerifyArgs) -> Result<(bool, Value)> {
    let (n, r) = (a.n.unwrap_or(4000), a.r.unwrap_or(20));
    let seed = require_seed(a.seed, "verify cor24")?;
    let seeds = ensemble_seeds(seed, a.seeds);
    let samples = run_ensemble(&seeds, |s| sample_decomposition(n, r, s))?;
    let s_parts = n.div_ceil(3 * r);
    let misses = samples.iter().filter(|s| !s.e_occurred).count();
    let accounting = samples.iter().all(|s| s.accounting_holds());
    let parts_ok = samples
        .iter()
        .filter(|s| s.e_occurred)
        .all(|s| s.b_parts.len() == s_parts && s.part_scales.iter().all(|&k| 2 * k >= r && k <= r));
    let measured = frequency(misses, samples.len());
    let bound = (-(n as f64) / (400.0 * r as f64)).exp();
    Ok((
        accounting && parts_ok && measured <= bound,
        json!({ "n": n, "r": r, "s": s_parts, "runs": samples.len(), "p_not_e": measured, "bound": bound,
                "accounting_holds": accounting, "part_sizes_ok": parts_ok }),
    ))
}

fn lemma27(a: &VerifyArgs, consts: &Constants) -> Result<(bool, Value)> {
    let (n, r) = (a.n.unwrap_or(4000), a.r.unwrap_or(40));
    let seed = require_seed(a.seed, "verify lemma27")?;
    let table = QnTable::build(r)?;
    let trunc = TruncationTable::new(&table, r)?;
    let params = TruncatedParams::new(n, r, consts.c1);
    let class = ClassParams::new(r as f64, params.s(), consts.c1)?;
    let failing: Vec<usize> = (r / 2..=r)
        .filter(|&k| {
            let law = trunc.law(k);
            !class_dr_check_centered(&law.conditional, law.center, &class).is_member()
        })
        .collect();
    let seeds = ensemble_seeds(seed, a.seeds);
    let samples = run_ensemble(&seeds, |s| {
        sample_truncated_decomposition(&params, &trunc, s)
    })?;
    let accounting = samples.iter().all(|s| s.accounting_holds());
    let out_of_range = samples
        .iter()
        .flat_map(|s| s.centered_parts())
        .filter(|y| y.abs() > 4.0 * r as f64)
        .count();
    let p_e = frequency(
        samples.iter().filter(|s| s.e_occurred).count(),
        samples.len(),
    );
    Ok((
        failing.is_empty() && accounting && out_of_range == 0,
        json!({ "n": n, "r": r, "c1": consts.c1, "s": params.s(), "t": params.t(), "runs": samples.len(),
                "p_e": p_e, "laws_failing_class_check": failing, "parts_out_of_range": out_of_range,
                "accounting_holds": accounting }),
    ))
}

/// Largest accepted P(not E) for the size-3 decomposition.
const BINOMIAL_MISS_LIMIT: f64 = 1e-3;

fn lemma42(a: &VerifyArgs, consts: &Constants) -> Result<(bool, Value)> {
    let n = a.n.unwrap_or(300);
    let c = a.c.unwrap_or(consts.binomial_c);
    let seed = require_seed(a.seed, "verify lemma42")?;
    let seeds = ensemble_seeds(seed, a.seeds);
    let samples = run_ensemble(&seeds, |s| sample_binomial_decomposition(n, c, s))?;
    let accounting = samples.iter().all(|s| s.accounting_holds());
    let p_not_e = frequency(
        samples.iter().filter(|s| !s.e_occurred).count(),
        samples.len(),
    );
    let parts: Vec<u64> = samples
        .iter()
        .filter(|s| s.e_occurred)
        .flat_map(|s| s.b_parts.clone())
        .collect();
    let binary = parts.iter().all(|&b| b <= 1);
    let mean = parts.iter().sum::<u64>() as f64 / parts.len().max(1) as f64;
    // Five standard errors of a Bernoulli(2/3) mean.
    let tol = 5.0 * (2.0f64 / 9.0 / parts.len().max(1) as f64).sqrt();
    let mean_ok = (mean - 2.0 / 3.0).abs() <= tol;
    Ok((
        accounting && binary && mean_ok && p_not_e < BINOMIAL_MISS_LIMIT,
        json!({ "n": n, "c": c, "runs": samples.len(), "p_not_e": p_not_e, "limit": BINOMIAL_MISS_LIMIT,
                "part_mean": mean, "part_mean_tol": tol, "parts_binary": binary, "accounting_holds": accounting }),
    ))
}

fn d1_families() -> Vec<(&'static str, LatticePmf)> {
    vec![
        ("sign", LatticePmf::uniform(&[-1, 1]).unwrap()),
        ("three_point", LatticePmf::uniform(&[-1, 0, 1]).unwrap()),
        (
            "skewed",
            LatticePmf::from_point_masses([(-1, 2.0 / 3.0), (2, 1.0 / 3.0)]).unwrap(),
        ),
    ]
}

fn lemma31(a: &VerifyArgs, consts: &Constants) -> Result<(bool, Value)> {
    let s = a.s.unwrap_or(400);
    let mut pass = true;
    let mut reports = Vec::new();
    for (name, comp) in d1_families() {
        let rep = berry_esseen_check(&vec![comp; s], consts.berry_esseen_a)?;
        pass &= rep.passed();
        reports.push(json!({ "family": name, "report": rep, "passed": rep.passed() }));
    }
    Ok((pass, json!({ "s": s, "families": reports })))
}

fn lemma32(a: &VerifyArgs, consts: &Constants) -> Result<(bool, Value)> {
    let s = a.s.unwrap_or(400);
    let r = a.r.unwrap_or(10) as i64;
    let params = ClassParams::new(r as f64, s, 0.1)?;
    let comp = LatticePmf::uniform(&(-r..=r).collect::<Vec<_>>())?;
    let x = build_brs(&vec![comp; s], &params)?;
    let scale = r as f64 * (s as f64).sqrt();
    let mut pass = true;
    let mut rows = Vec::new();
    for t in [0.0, scale, 2.0 * scale] {
        for ell in [1.0, 2.0, 4.0].map(|k| k * r as f64) {
            let rep = tail_bound_check(&x, &params, t, ell, consts.tail.big_c, consts.tail.c)?;
            pass &= rep.passed;
            rows.push(rep);
        }
    }
    Ok((
        pass,
        json!({ "family": "uniform", "r": r, "s": s, "C": consts.tail.big_c, "c": consts.tail.c, "checks": rows }),
    ))
}

fn lemma33(a: &VerifyArgs, consts: &Constants) -> Result<(bool, Value)> {
    let s = a.s.unwrap_or(400);
    let r = a.r.unwrap_or(10) as i64;
    let params = ClassParams::new(r as f64, s, 0.1)?;
    let comp = LatticePmf::uniform(&(-r..=r).collect::<Vec<_>>())?;
    let x = build_brs(&vec![comp; s], &params)?;
    let m = 2.0 * r as f64 * (s as f64).sqrt();
    let ell = m / 2.0;
    let j = HalfOpen::new(-m / 2.0, m / 2.0)?;
    let i1 = HalfOpen::new(-m / 2.0, -m / 2.0 + ell)?;
    let i2 = if a.identical_intervals {
        i1
    } else {
        HalfOpen::new(m / 2.0 - ell, m / 2.0)?
    };
    let rep = tilt_ratio_check(&x, &params, &i1, &i2, &j, a.lambda, &consts.tilt)?;
    let pass = if a.identical_intervals {
        rep.ratio == 1.0
    } else {
        rep.within_bound
    };
    Ok((
        pass,
        json!({ "r": r, "s": s, "m": m, "ell": ell, "lambda": a.lambda, "i1": i1, "i2": i2, "report": rep }),
    ))
}

fn thm51_window(a: &VerifyArgs, consts: &Constants) -> Result<(bool, Value)> {
    let n = a.n.unwrap_or(256);
    let d = quickllt::density::estimate_density_fixed_point(
        quickllt::density::DEFAULT_GRID,
        consts.density.fixed_point_iterations,
        0,
    )?;
    let table = QnTable::build(n)?;
    let rep = semi_local_check(&table, n, &d, a.c_used)?;
    let bounds = density_bounds_check(&d);
    let reg = &consts.regression;
    let threshold = reg.threshold(&reg.semi_local_sup_deviation, n);
    let gamma_ok = rep.gamma <= 17.0;
    let dev_ok = threshold.is_none_or(|t| rep.sup_deviation <= t);
    Ok((
        gamma_ok && dev_ok && bounds.passed(),
        json!({ "report": rep, "gamma_limit": 17.0, "pinned_sup_deviation": threshold, "density_bounds": bounds }),
    ))
}

pub fn cmd_verify(g: &Global, a: &VerifyArgs) -> Result<Status> {
    if a.seeds == 0 {
        bail!("--seeds must be positive");
    }
    let consts = load_constants(g)?;
    let (passed, details) = match a.target {
        Target::Lemma23 => lemma23(a)?,
        Target::Cor24 => cor24(a)?,
        Target::Lemma27 => lemma27(a, &consts)?,
        Target::Lemma42 => lemma42(a, &consts)?,
        Target::Lemma31 => lemma31(a, &consts)?,
        Target::Lemma32 => lemma32(a, &consts)?,
        Target::Lemma33 => lemma33(a, &consts)?,
        Target::Thm51Window => thm51_window(a, &consts)?,
    };
    let target = a
        .target
        .to_possible_value()
        .map(|v| v.get_name().to_owned());
    write_json(
        g,
        &json!({ "schema_version": SCHEMA_VERSION, "target": target, "passed": passed, "details": details }),
    )?;
    Ok(Status::from_pass(passed))
}
