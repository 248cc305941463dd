use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::LatticePmf;
use crate::error::{Error, Result};

/// Controls the choice between schoolbook and transform-based convolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvolutionConfig {
    /// Combined support size (`|p| + |q|`) at or below which the direct
    /// product is used.
    pub fft_threshold: usize,
    /// Largest permitted support length of a result.
    pub max_support: usize,
}

impl Default for ConvolutionConfig {
    fn default() -> Self {
        Self {
            fft_threshold: 4096,
            max_support: 1 << 24,
        }
    }
}

/// Law of the independent sum, with the default configuration.
pub fn convolve(p: &LatticePmf, q: &LatticePmf) -> Result<LatticePmf> {
    convolve_with(p, q, &ConvolutionConfig::default())
}

pub fn convolve_with(
    p: &LatticePmf,
    q: &LatticePmf,
    cfg: &ConvolutionConfig,
) -> Result<LatticePmf> {
    let len = p.len() + q.len() - 1;
    if len > cfg.max_support {
        return Err(Error::Size(format!(
            "convolution support {len} exceeds cap {}",
            cfg.max_support
        )));
    }
    if p.len() + q.len() <= cfg.fft_threshold {
        convolve_direct(p, q)
    } else {
        convolve_fft(p, q)
    }
}

pub fn convolve_direct(p: &LatticePmf, q: &LatticePmf) -> Result<LatticePmf> {
    let out = direct_product(p.probs(), q.probs());
    LatticePmf::from_computed(p.offset() + q.offset(), out)
}

pub fn convolve_fft(p: &LatticePmf, q: &LatticePmf) -> Result<LatticePmf> {
    let out = fft_product(p.probs(), q.probs());
    LatticePmf::from_computed(p.offset() + q.offset(), out)
}

pub(crate) fn direct_product(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    for (i, &x) in short.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (o, &y) in out[i..i + long.len()].iter_mut().zip(long) {
            *o += x * y;
        }
    }
    out
}

/// Linear convolution of two real sequences by packing both into one complex
/// transform.
pub(crate) fn fft_product(a: &[f64], b: &[f64]) -> Vec<f64> {
    fft_product_with(&mut FftPlanner::new(), a, b)
}

/// As [`fft_product`], reusing the caller's planner across calls.
pub(crate) fn fft_product_with(planner: &mut FftPlanner<f64>, a: &[f64], b: &[f64]) -> Vec<f64> {
    let len = a.len() + b.len() - 1;
    let size = len.next_power_of_two();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);

    // z = a + i b; A_k = (Z_k + conj Z_{-k}) / 2, B_k = (Z_k - conj Z_{-k}) / 2i.
    let mut z = vec![Complex64::new(0.0, 0.0); size];
    for (slot, &x) in z.iter_mut().zip(a) {
        slot.re = x;
    }
    for (slot, &y) in z.iter_mut().zip(b) {
        slot.im = y;
    }
    fwd.process(&mut z);
    let mut prod = vec![Complex64::new(0.0, 0.0); size];
    for k in 0..size {
        let zk = z[k];
        let zc = z[(size - k) % size].conj();
        let ak = (zk + zc) * 0.5;
        let bk = (zk - zc) * Complex64::new(0.0, -0.5);
        prod[k] = ak * bk;
    }
    inv.process(&mut prod);
    let scale = 1.0 / size as f64;
    prod[..len].iter().map(|c| c.re * scale).collect()
}
