//! Pilot run behind `constants/fitted.json`. Prints the fitted implicit
//! constants and the regression values measured on the exact laws.
//!
//! `cargo run --release --example fit_constants`

use quickllt::density::{
    default_stride, estimate_density_fixed_point, kolmogorov_distance, llt_deviation,
    semi_local_check, DEFAULT_GRID,
};
use quickllt::pmf::build_brs;
use quickllt::quicksort::QnTable;
use quickllt::smoothing::{check_statement_s, window_flatness, SmoothingStatement};
use quickllt::{ClassParams, HalfOpen, LatticePmf};

const TAIL_C_SMALL: f64 = 1.0 / 128.0;

fn families() -> Vec<(&'static str, LatticePmf, ClassParams)> {
    let params = |r: f64, s: usize| ClassParams::new(r, s, 0.1).unwrap();
    let uniform = |r: i64| LatticePmf::uniform(&(-r..=r).collect::<Vec<_>>()).unwrap();
    vec![
        (
            "sign",
            LatticePmf::uniform(&[-1, 1]).unwrap(),
            params(1.0, 400),
        ),
        ("uniform", uniform(10), params(10.0, 100)),
        (
            "three_point",
            LatticePmf::uniform(&[-8, 0, 8]).unwrap(),
            params(8.0, 200),
        ),
        (
            "skewed",
            LatticePmf::from_point_masses([(-1, 2.0 / 3.0), (2, 1.0 / 3.0)]).unwrap(),
            params(2.0, 300),
        ),
    ]
}

fn main() {
    let mut tail_max = 0.0f64;
    let mut tilt_max = 0.0f64;
    for (name, comp, params) in families() {
        let x = build_brs(&vec![comp; params.s()], &params).unwrap();
        let (r, s) = (params.r(), params.s() as f64);
        let scale = r * s.sqrt();
        let mut fam_tail = 0.0f64;
        for k in 0..=40 {
            let t = k as f64 * scale / 10.0;
            for ell in [r, 2.0 * r, 4.0 * r, scale] {
                let measured = x.closed_prob(t, t + ell).unwrap();
                let shape = ell / scale * (-TAIL_C_SMALL * t * t / (r * r * s)).exp();
                fam_tail = fam_tail.max(measured / shape);
            }
        }
        // Tilting comparison: J centred, ell = m/2 and m/4, lambda = 2.
        let lambda = 2.0;
        let mut fam_tilt = 0.0f64;
        for m_mult in [2.0, 4.0] {
            let m = m_mult * scale;
            let j = HalfOpen::new(-m / 2.0, m / 2.0).unwrap();
            for div in [2.0, 4.0] {
                let ell = m / div;
                let steps = 32;
                let starts: Vec<f64> = (0..=steps)
                    .map(|i| j.lo + (m - ell) * i as f64 / steps as f64)
                    .collect();
                let probs: Vec<f64> = starts
                    .iter()
                    .map(|&a| HalfOpen::new(a, a + ell).unwrap().prob(&x))
                    .collect();
                let (lo, hi) = probs
                    .iter()
                    .fold((f64::INFINITY, 0.0f64), |(l, h), &p| (l.min(p), h.max(p)));
                let dev = (hi / lo - 1.0).max(1.0 - lo / hi);
                fam_tilt = fam_tilt.max(dev / (r / ell + lambda * m / scale));
            }
        }
        println!("{name}: tail C ratio {fam_tail:.4}, tilt constant ratio {fam_tilt:.4}");
        tail_max = tail_max.max(fam_tail);
        tilt_max = tilt_max.max(fam_tilt);
    }
    println!("tail C fit (c = 1/128): {tail_max:.4}; tilt constant fit: {tilt_max:.4}");

    let t = std::time::Instant::now();
    let d = estimate_density_fixed_point(DEFAULT_GRID, 30, 0).unwrap();
    let table = QnTable::build(256).unwrap();
    println!("density + table: {:?}", t.elapsed());
    for n in [64usize, 128, 256] {
        let p = table.pmf(n).unwrap();
        let q = table.mean(n);
        let semi = semi_local_check(&table, n, &d, 1.0).unwrap();
        let llt = llt_deviation(p, q, n, &d).unwrap();
        let kol = kolmogorov_distance(p, q, n, &d);
        let m = 2.0 * (n as f64).powf(5.0 / 6.0);
        let stmt = check_statement_s(
            p,
            &SmoothingStatement::new(n, m, 1.0, 17.0).unwrap(),
            &d,
            default_stride(m),
        )
        .unwrap();
        let flat = window_flatness(p, n, m / 2.0, m, default_stride(m)).unwrap();
        println!(
            "n={n}: semi sup_dev {:.6} gamma {:.6} | llt {llt:.6} | kolmogorov {kol:.6} | stmt eps {:.6} gamma {:.6} | flatness {flat:.6}",
            semi.sup_deviation, semi.gamma, stmt.measured_eps, stmt.measured_gamma
        );
    }
}
