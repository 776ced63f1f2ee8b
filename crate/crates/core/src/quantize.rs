//! Scalar quantization, bit planes and Bob's channel evidence.
//!
//! Observations are handled in units of their own per-real-dimension standard
//! deviation. Alice and Bob see jointly Gaussian values with correlation
//! `rho`, so Bob's evidence for Alice's cell is a difference of conditional
//! Gaussian CDFs.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::error::{invalid_arg, invalid_config, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Quantizer {
    levels: usize,
    thresholds: Vec<f64>,
}

impl Quantizer {
    pub fn new(levels: usize, thresholds: Vec<f64>) -> Result<Self> {
        if levels != 2 && levels != 4 {
            return Err(invalid_config(format!("quantizer levels must be 2 or 4, got {levels}")));
        }
        if thresholds.len() != levels - 1 {
            return Err(invalid_config(format!("{levels} levels need {} thresholds", levels - 1)));
        }
        if thresholds.iter().any(|t| !t.is_finite()) || thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid_config("thresholds must be finite and strictly ascending"));
        }
        Ok(Self { levels, thresholds })
    }

    /// Cells of equal probability under a standard Gaussian source.
    pub fn equiprobable(levels: usize) -> Result<Self> {
        let thresholds = match levels {
            2 => vec![0.0],
            4 => {
                let z = Normal::standard().inverse_cdf(0.75);
                vec![-z, 0.0, z]
            }
            _ => return Err(invalid_config(format!("quantizer levels must be 2 or 4, got {levels}"))),
        };
        Self::new(levels, thresholds)
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    /// Bits carried by one symbol.
    pub fn bits(&self) -> usize {
        if self.levels == 4 {
            2
        } else {
            1
        }
    }

    /// Cell index of a normalised value; boundaries go to the upper cell.
    pub fn cell(&self, z: f64) -> u8 {
        self.thresholds.partition_point(|&t| t <= z) as u8
    }

    pub fn cell_edges(&self, a: usize) -> (f64, f64) {
        let lo = if a == 0 { f64::NEG_INFINITY } else { self.thresholds[a - 1] };
        let hi = if a + 1 == self.levels { f64::INFINITY } else { self.thresholds[a] };
        (lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedBlock {
    pub levels: usize,
    pub symbols: Vec<u8>,
    /// `floor(x / 2)`; for `q = 2` the symbols themselves.
    pub plane_m: Vec<u8>,
    /// `x mod 2`; empty for `q = 2`.
    pub plane_l: Vec<u8>,
}

impl QuantizedBlock {
    pub fn from_symbols(levels: usize, symbols: Vec<u8>) -> Result<Self> {
        if symbols.iter().any(|&s| s as usize >= levels) {
            return Err(invalid_arg("symbol out of range"));
        }
        let (plane_m, plane_l) = if levels == 4 { bit_planes(&symbols)? } else { (symbols.clone(), Vec::new()) };
        Ok(Self { levels, symbols, plane_m, plane_l })
    }
}

/// Quantize values already normalised to unit standard deviation.
pub fn quantize(x: &[f64], quantizer: &Quantizer) -> QuantizedBlock {
    let symbols: Vec<u8> = x.iter().map(|&v| quantizer.cell(v)).collect();
    QuantizedBlock::from_symbols(quantizer.levels, symbols).expect("cells are in range")
}

pub fn bit_planes(symbols: &[u8]) -> Result<(Vec<u8>, Vec<u8>)> {
    if symbols.iter().any(|&s| s > 3) {
        return Err(invalid_arg("quaternary symbol out of range"));
    }
    Ok((symbols.iter().map(|s| s >> 1).collect(), symbols.iter().map(|s| s & 1).collect()))
}

pub fn combine_planes(m: &[u8], l: &[u8]) -> Result<Vec<u8>> {
    if m.len() != l.len() {
        return Err(crate::Error::LengthMismatch { expected: m.len(), got: l.len() });
    }
    Ok(m.iter().zip(l).map(|(a, b)| (a << 1) | b).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvidenceMode {
    Soft,
    Hard,
}

/// Per-symbol posteriors `G_i(a)`, stored row-major with `levels` entries per symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct Evidence {
    pub levels: usize,
    pub probs: Vec<f64>,
    pub mode: EvidenceMode,
}

pub const LLR_CLAMP: f64 = 30.0;

impl Evidence {
    pub fn len(&self) -> usize {
        self.probs.len() / self.levels
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.probs[i * self.levels..(i + 1) * self.levels]
    }

    /// Point-mass evidence on a known symbol vector.
    pub fn deterministic(levels: usize, symbols: &[u8]) -> Self {
        let mut probs = vec![0.0; levels * symbols.len()];
        for (i, &s) in symbols.iter().enumerate() {
            probs[i * levels + s as usize] = 1.0;
        }
        Self { levels, probs, mode: EvidenceMode::Soft }
    }

    /// `ln(G(0) / G(1))` per bit, clamped. Binary evidence only.
    pub fn binary_llrs(&self) -> Vec<f64> {
        assert_eq!(self.levels, 2, "binary LLRs need two-level evidence");
        self.probs.chunks(2).map(|p| prob_llr(p[0], p[1])).collect()
    }
}

pub(crate) fn prob_llr(p0: f64, p1: f64) -> f64 {
    if p0 <= 0.0 && p1 <= 0.0 {
        return 0.0;
    }
    (p0.ln() - p1.ln()).clamp(-LLR_CLAMP, LLR_CLAMP)
}

/// Standard normal upper tail.
fn q_tail(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// `P[lo < Z < hi]` for `Z ~ N(mean, sd^2)`; `sd = 0` is a point mass.
pub(crate) fn interval_prob(lo: f64, hi: f64, mean: f64, sd: f64) -> f64 {
    if sd == 0.0 {
        return if lo <= mean && mean < hi { 1.0 } else { 0.0 };
    }
    let a = (lo - mean) / sd;
    let b = (hi - mean) / sd;
    if a >= 0.0 {
        q_tail(a) - q_tail(b)
    } else if b <= 0.0 {
        q_tail(-b) - q_tail(-a)
    } else {
        1.0 - q_tail(-a) - q_tail(b)
    }
}

pub(crate) fn conditional_row_into(z: f64, rho: f64, quantizer: &Quantizer, out: &mut [f64]) {
    let sd = (1.0 - rho * rho).max(0.0).sqrt();
    let mean = rho * z;
    for (a, o) in out.iter_mut().enumerate() {
        let (lo, hi) = quantizer.cell_edges(a);
        *o = interval_prob(lo, hi, mean, sd).max(0.0);
    }
    let s: f64 = out.iter().sum();
    if s > 0.0 {
        out.iter_mut().for_each(|v| *v /= s);
    } else {
        out.iter_mut().for_each(|v| *v = 1.0 / quantizer.levels as f64);
    }
}

/// Soft evidence for observations with raw scale `sigma` (variance `sigma^2/2`
/// per real dimension) at correlation `rho`.
pub fn soft_evidence(y: &[f64], rho: f64, sigma: f64, quantizer: &Quantizer) -> Result<Evidence> {
    if !(rho.abs() <= 1.0) {
        return Err(invalid_arg("need |rho| <= 1"));
    }
    if !(sigma > 0.0) {
        return Err(invalid_arg("sigma must be positive"));
    }
    let s = sigma / std::f64::consts::SQRT_2;
    let z: Vec<f64> = y.iter().map(|v| v / s).collect();
    soft_evidence_normalized(&z, &vec![rho; y.len()], quantizer)
}

/// Soft evidence for unit-variance observations with a per-position `rho`.
pub fn soft_evidence_normalized(z: &[f64], rho: &[f64], quantizer: &Quantizer) -> Result<Evidence> {
    if z.len() != rho.len() {
        return Err(crate::Error::LengthMismatch { expected: z.len(), got: rho.len() });
    }
    let q = quantizer.levels;
    let mut probs = vec![0.0; q * z.len()];
    for (i, row) in probs.chunks_mut(q).enumerate() {
        conditional_row_into(z[i], rho[i], quantizer, row);
    }
    Ok(Evidence { levels: q, probs, mode: EvidenceMode::Soft })
}

/// Joint law of `(X_A, X_B)` for both parties using the same quantizer.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    pub levels: usize,
    /// `joint[a * q + b] = P[X_A = a, X_B = b]`.
    pub joint: Vec<f64>,
}

impl ConfusionMatrix {
    pub fn conditional(&self, a: usize, b: usize) -> f64 {
        let q = self.levels;
        let col: f64 = (0..q).map(|k| self.joint[k * q + b]).sum();
        self.joint[a * q + b] / col
    }

    pub fn disagreement(&self) -> f64 {
        let q = self.levels;
        1.0 - (0..q).map(|a| self.joint[a * q + a]).sum::<f64>()
    }

    pub fn mutual_information_bits(&self) -> f64 {
        let q = self.levels;
        let pa: Vec<f64> = (0..q).map(|a| (0..q).map(|b| self.joint[a * q + b]).sum()).collect();
        let pb: Vec<f64> = (0..q).map(|b| (0..q).map(|a| self.joint[a * q + b]).sum()).collect();
        let mut mi = 0.0;
        for a in 0..q {
            for b in 0..q {
                let p = self.joint[a * q + b];
                if p > 0.0 {
                    mi += p * (p / (pa[a] * pb[b])).log2();
                }
            }
        }
        mi
    }
}

const QUAD_TOL: f64 = 1e-8;
const QUAD_LIMIT: f64 = 12.0;

fn std_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// Confusion matrix by adaptive quadrature over Bob's cell, with Alice's
/// conditional cell probability in closed form.
pub fn compute_confusion(rho: f64, quantizer: &Quantizer) -> ConfusionMatrix {
    let q = quantizer.levels;
    let sd = (1.0 - rho * rho).max(0.0).sqrt();
    let mut joint = vec![0.0; q * q];
    for b in 0..q {
        let (lo, hi) = quantizer.cell_edges(b);
        let (lo, hi) = (lo.max(-QUAD_LIMIT), hi.min(QUAD_LIMIT));
        for a in 0..q {
            let (alo, ahi) = quantizer.cell_edges(a);
            let f = |y: f64| std_pdf(y) * interval_prob(alo, ahi, rho * y, sd);
            // split at points where the integrand has a kink or step
            let mut cuts = vec![lo, hi];
            for t in [alo, ahi] {
                if t.is_finite() && rho != 0.0 {
                    let y = t / rho;
                    if y > lo && y < hi {
                        cuts.push(y);
                    }
                }
            }
            cuts.sort_by(f64::total_cmp);
            joint[a * q + b] = cuts.windows(2).map(|w| adaptive_simpson(&f, w[0], w[1], QUAD_TOL)).sum();
        }
    }
    ConfusionMatrix { levels: q, joint }
}

type CacheKey = (u64, Vec<u64>);

fn cache() -> &'static Mutex<HashMap<CacheKey, Arc<ConfusionMatrix>>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, Arc<ConfusionMatrix>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Cached [`compute_confusion`].
pub fn confusion_matrix(rho: f64, quantizer: &Quantizer) -> Arc<ConfusionMatrix> {
    let key = (rho.to_bits(), quantizer.thresholds.iter().map(|t| t.to_bits()).collect());
    if let Some(m) = cache().lock().expect("cache lock").get(&key) {
        return Arc::clone(m);
    }
    let m = Arc::new(compute_confusion(rho, quantizer));
    cache().lock().expect("cache lock").insert(key, Arc::clone(&m));
    m
}

pub fn hard_evidence(y_quantized: &[u8], rho: f64, quantizer: &Quantizer) -> Result<Evidence> {
    hard_evidence_per_position(y_quantized, &vec![rho; y_quantized.len()], quantizer)
}

pub fn hard_evidence_per_position(y_quantized: &[u8], rho: &[f64], quantizer: &Quantizer) -> Result<Evidence> {
    if y_quantized.len() != rho.len() {
        return Err(crate::Error::LengthMismatch { expected: y_quantized.len(), got: rho.len() });
    }
    let q = quantizer.levels;
    if y_quantized.iter().any(|&b| b as usize >= q) {
        return Err(invalid_arg("quantized symbol out of range"));
    }
    let mut probs = vec![0.0; q * y_quantized.len()];
    let mut local: HashMap<u64, Arc<ConfusionMatrix>> = HashMap::new();
    for (i, row) in probs.chunks_mut(q).enumerate() {
        let cm = local.entry(rho[i].to_bits()).or_insert_with(|| confusion_matrix(rho[i], quantizer));
        let b = y_quantized[i] as usize;
        for (a, o) in row.iter_mut().enumerate() {
            *o = cm.conditional(a, b);
        }
    }
    Ok(Evidence { levels: q, probs, mode: EvidenceMode::Hard })
}
