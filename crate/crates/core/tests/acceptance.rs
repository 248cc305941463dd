//! Acceptance suite. Runs every criterion, prints one line per criterion and
//! exits non-zero if any fails. Positional arguments filter by id or name.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::Instant;

use rand::Rng;

use quickllt::constants::Constants;
use quickllt::density::{
    density_bounds_check, estimate_density_fixed_point, estimate_density_mc, llt_deviation,
    semi_local_check, DensityEstimate, DEFAULT_BANDWIDTH, DEFAULT_GRID, INTEGRAL_TOL, SLOPE_BOUND,
    SUP_BOUND,
};
use quickllt::execution_tree::{
    count_medium_sublists, ensemble_seeds, run_ensemble, run_phase1,
    sample_truncated_decomposition, xi, TruncatedParams, TruncationTable,
};
use quickllt::pmf::{build_brs, class_dr_check_centered, convolve, solve_tilt, tilt};
use quickllt::quicksort::{brute_force_pmf, exact_pmf, mean_recurrence, QnTable};
use quickllt::rng::{derive_seed, rng_from_seed};
use quickllt::smoothing::{
    averaging_check, berry_esseen_check, schedule, tail_bound_check, GAMMA_CAP,
};
use quickllt::{ClassParams, LatticePmf};

type Outcome = Result<String, String>;

/// Id, name and check.
type Criterion = (&'static str, &'static str, fn() -> Outcome);

fn constants() -> &'static Constants {
    static C: OnceLock<Constants> = OnceLock::new();
    C.get_or_init(Constants::pinned)
}

fn table() -> &'static QnTable {
    static T: OnceLock<QnTable> = OnceLock::new();
    T.get_or_init(|| QnTable::build(256).expect("exact table"))
}

fn fixed_point_density() -> &'static DensityEstimate {
    static D: OnceLock<DensityEstimate> = OnceLock::new();
    D.get_or_init(|| {
        estimate_density_fixed_point(DEFAULT_GRID, constants().density.fixed_point_iterations, 0)
            .expect("fixed point")
    })
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn oracle_equivalence() -> Outcome {
    let mut worst = 0.0f64;
    for n in 0..=8 {
        let exact = exact_pmf(n).map_err(|e| e.to_string())?;
        let brute = brute_force_pmf(n).map_err(|e| e.to_string())?;
        worst = worst.max(exact.max_abs_diff(&brute));
    }
    verdict(
        worst <= 1e-12,
        format!("max pointwise diff {worst:.3e} over n <= 8"),
    )
}

fn law_of_three() -> Outcome {
    let p = exact_pmf(3).map_err(|e| e.to_string())?;
    let q3 = mean_recurrence(3)[3];
    let ok = p.min_support() == 2
        && p.max_support() == 3
        && (p.prob(2) - 1.0 / 3.0).abs() <= 1e-15
        && (p.prob(3) - 2.0 / 3.0).abs() <= 1e-15
        && (q3 - 8.0 / 3.0).abs() <= 1e-15;
    verdict(
        ok,
        format!("P(2) = {}, P(3) = {}, q_3 = {q3}", p.prob(2), p.prob(3)),
    )
}

fn mean_consistency() -> Outcome {
    let t = table();
    let mut worst = 0.0f64;
    for n in 0..=256 {
        let q = t.mean(n);
        let err = (t.pmf(n).map_err(|e| e.to_string())?.mean() - q).abs() / (1.0 + q);
        worst = worst.max(err);
    }
    verdict(
        worst <= 1e-9,
        format!("max |mean - q_n| / (1 + q_n) = {worst:.3e} over n <= 256"),
    )
}

fn phase1_identity() -> Outcome {
    let mut rng = rng_from_seed(11);
    let cases: Vec<(usize, usize, u64)> = (0..10_000)
        .map(|_| {
            (
                rng.random_range(1..5000),
                2 * rng.random_range(1..40),
                rng.random(),
            )
        })
        .collect();
    let index: Vec<u64> = (0..cases.len() as u64).collect();
    let violations = run_ensemble(&index, |i| {
        let (n, r, seed) = cases[i as usize];
        let res = run_phase1(n, r, seed)?;
        let t = res.active_steps;
        let ok = res.sublists.len() == t + 1 && res.sublists.iter().sum::<usize>() == n - t;
        Ok(!ok as usize)
    })
    .map_err(|e| e.to_string())?
    .into_iter()
    .sum::<usize>();
    verdict(
        violations == 0,
        format!("{violations} violations in 10^4 fuzzed runs"),
    )
}

fn medium_sublist_tail() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for (n, r) in [(4000usize, 20usize), (8000, 20)] {
        let seeds = ensemble_seeds(derive_seed(5, n as u64), 10_000);
        let low = run_ensemble(&seeds, |s| {
            let res = run_phase1(n, r, s)?;
            Ok((count_medium_sublists(&res, r) as f64 <= n as f64 / (3.0 * r as f64)) as usize)
        })
        .map_err(|e| e.to_string())?
        .into_iter()
        .sum::<usize>();
        let freq = low as f64 / seeds.len() as f64;
        let bound = (-(n as f64) / (400.0 * r as f64)).exp();
        ok &= freq <= bound;
        parts.push(format!("({n},{r}): {freq:.4} <= {bound:.4}"));
    }
    verdict(ok, parts.join("; "))
}

fn xi_formula() -> Outcome {
    let (n, r) = (1000usize, 20usize);
    let seeds = ensemble_seeds(6, 10_000);
    let xs = run_ensemble(&seeds, |s| {
        Ok(count_medium_sublists(&run_phase1(n, r, s)?, r) as f64)
    })
    .map_err(|e| e.to_string())?;
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let target = xi(n, r);
    let rel = (mean - target).abs() / target;
    verdict(
        rel <= 0.05,
        format!("mean X = {mean:.3}, (n+1)/(r+1) = {target:.3}, rel err {rel:.4}"),
    )
}

fn class_membership() -> Outcome {
    let (n, r) = (4000usize, 40usize);
    let c1 = constants().c1;
    let exact = QnTable::build(r).map_err(|e| e.to_string())?;
    let trunc = TruncationTable::new(&exact, r).map_err(|e| e.to_string())?;
    let params = TruncatedParams::new(n, r, c1);
    let class = ClassParams::new(r as f64, params.s(), c1).map_err(|e| e.to_string())?;
    let mut bad_laws = Vec::new();
    for k in r / 2..=r {
        let law = trunc.law(k);
        if !class_dr_check_centered(&law.conditional, law.center, &class).is_member() {
            bad_laws.push(k);
        }
    }
    let seeds = ensemble_seeds(7, 2_000);
    let samples = run_ensemble(&seeds, |s| {
        sample_truncated_decomposition(&params, &trunc, s)
    })
    .map_err(|e| e.to_string())?;
    let conditioned: Vec<_> = samples
        .iter()
        .filter(|s| s.e_occurred)
        .take(1_000)
        .collect();
    let mut bad_parts = 0;
    let mut parts = 0;
    for s in &conditioned {
        for (&k, y) in s.part_scales.iter().zip(s.centered_parts()) {
            parts += 1;
            if !(k >= r / 2 && k <= r && y.abs() <= 4.0 * r as f64) {
                bad_parts += 1;
            }
        }
    }
    let ok = bad_laws.is_empty() && bad_parts == 0 && conditioned.len() == 1_000;
    verdict(
        ok,
        format!(
            "{} conditioned samples, {parts} parts, {bad_parts} out of range; laws failing the class check: {bad_laws:?}",
            conditioned.len()
        ),
    )
}

fn tilting_suite() -> Outcome {
    let p = LatticePmf::from_point_masses([(-3, 0.1), (-1, 0.25), (0, 0.2), (2, 0.3), (5, 0.15)])
        .unwrap();
    let q = LatticePmf::uniform(&[-2, 0, 1, 4]).unwrap();
    let e = |e: quickllt::Error| e.to_string();
    let identity = tilt(&p, 0.0).map_err(e)?.tilted == p;
    let mut commute = 0.0f64;
    for alpha in [-0.7, -0.2, 0.3, 0.9] {
        let left = tilt(&convolve(&p, &q).map_err(e)?, alpha)
            .map_err(e)?
            .tilted;
        let right = convolve(
            &tilt(&p, alpha).map_err(e)?.tilted,
            &tilt(&q, alpha).map_err(e)?.tilted,
        )
        .map_err(e)?;
        for (x, v) in left.iter() {
            if v > 0.0 {
                commute = commute.max((v - right.prob(x)).abs() / v);
            }
        }
    }
    let mut roundtrip = 0.0f64;
    for target in [-2.5, -1.0, 0.0, 1.7, 4.2] {
        let alpha = solve_tilt(&p, target, 1e-12).map_err(e)?;
        roundtrip = roundtrip.max((tilt(&p, alpha).map_err(e)?.tilted.mean() - target).abs());
    }
    let h = 1e-4;
    let mut deriv = 0.0f64;
    for i in 0..21 {
        let alpha = -1.0 + 0.1 * i as f64;
        let up = tilt(&p, alpha + h).map_err(e)?.tilted.mean();
        let down = tilt(&p, alpha - h).map_err(e)?.tilted.mean();
        let var = tilt(&p, alpha).map_err(e)?.tilted.variance();
        deriv = deriv.max(((up - down) / (2.0 * h) - var).abs() / var);
    }
    let ok = identity && commute <= 1e-12 && roundtrip <= 1e-9 && deriv <= 1e-6;
    verdict(
        ok,
        format!("identity {identity}, commutation {commute:.2e}, round-trip {roundtrip:.2e}, derivative {deriv:.2e}"),
    )
}

fn berry_esseen() -> Outcome {
    let a = constants().berry_esseen_a;
    let sign = LatticePmf::uniform(&[-1, 1]).unwrap();
    let three = LatticePmf::uniform(&[-1, 0, 1]).unwrap();
    let skewed = LatticePmf::from_point_masses([(-1, 2.0 / 3.0), (2, 1.0 / 3.0)]).unwrap();
    let wide = LatticePmf::uniform(&[-4, 0, 4]).unwrap();
    let mixed: Vec<LatticePmf> = (0..400)
        .map(|i| [&sign, &three, &skewed, &wide][i % 4].clone())
        .collect();
    let families = [
        ("sign", vec![sign.clone(); 400]),
        ("three-point", vec![three; 400]),
        ("skewed", vec![skewed; 400]),
        ("mixed", mixed),
    ];
    let class = ClassParams::new(1.0, 400, constants().c1).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, comps) in &families {
        if comps
            .iter()
            .any(|c| !class_dr_check_centered(c, 0.0, &class).is_member())
        {
            return Err(format!("{name} components are not in D_1"));
        }
        let rep = berry_esseen_check(comps, a).map_err(|e| e.to_string())?;
        ok &= rep.passed();
        parts.push(format!("{name} {:.4} <= {:.4}", rep.sup_dist, rep.bound));
    }
    verdict(ok, parts.join("; "))
}

fn tail_bound() -> Outcome {
    let tail = constants().tail;
    let c1 = 0.1;
    let uniform = |r: i64| LatticePmf::uniform(&(-r..=r).collect::<Vec<_>>()).unwrap();
    let families = [
        ("sign", LatticePmf::uniform(&[-1, 1]).unwrap(), 1.0, 400),
        ("uniform", uniform(10), 10.0, 100),
        (
            "three-point",
            LatticePmf::uniform(&[-8, 0, 8]).unwrap(),
            8.0,
            200,
        ),
        (
            "skewed",
            LatticePmf::from_point_masses([(-1, 2.0 / 3.0), (2, 1.0 / 3.0)]).unwrap(),
            2.0,
            300,
        ),
    ];
    let mut worst = 0.0f64;
    for (name, comp, r, s) in families {
        let params = ClassParams::new(r, s, c1).unwrap();
        let x = build_brs(&vec![comp; s], &params).map_err(|e| format!("{name}: {e}"))?;
        let scale = r * (s as f64).sqrt();
        for t in [0.0, scale, 2.0 * scale] {
            for ell in [r, 2.0 * r, 4.0 * r] {
                let rep = tail_bound_check(&x, &params, t, ell, tail.big_c, tail.c)
                    .map_err(|e| e.to_string())?;
                worst = worst.max(rep.ratio);
            }
        }
    }
    verdict(
        worst <= 1.0,
        format!(
            "max measured/bound {worst:.4} with C = {}, c = {}",
            tail.big_c, tail.c
        ),
    )
}

fn averaging() -> Outcome {
    let p = table().pmf(256).map_err(|e| e.to_string())?;
    let mut rng = rng_from_seed(12);
    let mut failures = 0;
    for _ in 0..1_000 {
        let ell = rng.random_range(1.0..400.0);
        let k = rng.random_range(1..=8) as f64;
        let a = rng.random_range(p.min_support() as f64 - k * ell..p.max_support() as f64);
        if !averaging_check(p, a, k * ell, ell)
            .map_err(|e| e.to_string())?
            .holds
        {
            failures += 1;
        }
    }
    verdict(
        failures == 0,
        format!("{failures} failures in 10^3 random (J, ell) pairs at n = 256"),
    )
}

fn density_estimate() -> Outcome {
    let tol = constants().density.mc_vs_fixed_point_tol;
    let fp = fixed_point_density();
    let mc = estimate_density_mc(10_000, 1_000_000, DEFAULT_BANDWIDTH, DEFAULT_GRID, 13)
        .map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, d) in [("mc", &mc), ("fixed point", fp)] {
        let bounds = density_bounds_check(d);
        let integral = d.integral();
        ok &= (integral - 1.0).abs() <= INTEGRAL_TOL
            && bounds.sup <= SUP_BOUND
            && bounds.max_slope <= SLOPE_BOUND;
        parts.push(format!(
            "{name}: integral {integral:.6}, sup {:.4}, slope {:.3}",
            bounds.sup, bounds.max_slope
        ));
    }
    let mut diff = 0.0f64;
    for x in DEFAULT_GRID.points().filter(|x| x.abs() <= 2.0) {
        diff = diff.max(
            (mc.eval(x).map_err(|e| e.to_string())? - fp.eval(x).map_err(|e| e.to_string())?).abs(),
        );
    }
    ok &= diff <= tol;
    parts.push(format!("mc vs fixed point on |x| <= 2: {diff:.4} <= {tol}"));
    verdict(ok, parts.join("; "))
}

fn semi_local() -> Outcome {
    let rep =
        semi_local_check(table(), 256, fixed_point_density(), 1.0).map_err(|e| e.to_string())?;
    verdict(
        rep.gamma <= 17.0,
        format!(
            "Gamma = {:.4} <= 17 at n = 256, m = {:.2}, sup deviation {:.4}",
            rep.gamma, rep.m, rep.sup_deviation
        ),
    )
}

fn llt_sequence() -> Outcome {
    let reg = &constants().regression;
    let d = fixed_point_density();
    let ns = [64usize, 128, 256];
    let mut devs = Vec::new();
    let mut ok = true;
    for n in ns {
        let p = table().pmf(n).map_err(|e| e.to_string())?;
        let dev = llt_deviation(p, table().mean(n), n, d).map_err(|e| e.to_string())?;
        let cap = reg
            .threshold(&reg.llt_deviation, n)
            .ok_or(format!("no pinned value for n = {n}"))?;
        ok &= dev <= cap;
        devs.push(dev);
    }
    ok &= devs.windows(2).all(|w| w[1] <= w[0] * (1.0 + reg.slack));
    verdict(
        ok,
        format!(
            "sup deviations {devs:.4?} for n = {ns:?} (slack {})",
            reg.slack
        ),
    )
}

fn schedule_integrity() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for e in [10u32, 12, 16] {
        let n = 2f64.powi(e as i32);
        let sched = schedule(n, 1.0, constants().c_hat).map_err(|e| e.to_string())?;
        let k_expected = (0.5 * n.log2()).floor() as usize + 1;
        let good = sched.k_rounds == k_expected
            && sched.rounds.len() == k_expected
            && sched.halving_exact()
            && sched.m_k_in_range()
            && sched.max_gamma() <= GAMMA_CAP;
        ok &= good;
        parts.push(format!(
            "n = 2^{e}: K = {}, m_K / n^(1/3) = {:.3}, Gamma_K = {:.4}, c_hat_max = {:.3e}",
            sched.k_rounds, sched.m_k_over_cube_root, sched.final_gamma, sched.c_hat_max
        ));
    }
    verdict(ok, parts.join("; "))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 15] = [
        ("AC01", "oracle equivalence", oracle_equivalence),
        ("AC02", "law of Q_3", law_of_three),
        ("AC03", "mean consistency", mean_consistency),
        ("AC04", "phase I identity", phase1_identity),
        ("AC05", "medium sublist lower tail", medium_sublist_tail),
        ("AC06", "medium sublist mean", xi_formula),
        ("AC07", "class membership", class_membership),
        ("AC08", "tilting", tilting_suite),
        ("AC09", "berry-esseen", berry_esseen),
        ("AC10", "tail bound", tail_bound),
        ("AC11", "averaging inequality", averaging),
        ("AC12", "density estimate", density_estimate),
        ("AC13", "semi-local check", semi_local),
        ("AC14", "llt diagnostic", llt_sequence),
        ("AC15", "schedule integrity", schedule_integrity),
    ];
    let filters: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    let mut ran = 0;
    for (id, name, check) in criteria {
        if !filters.is_empty()
            && !filters
                .iter()
                .any(|f| id.contains(f.as_str()) || name.contains(f.as_str()))
        {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome =
            catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("{id} PASS {name} ({secs:.1} s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("{id} FAIL {name} ({secs:.1} s): {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
