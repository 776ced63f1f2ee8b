//! Secret key capacity under CSI, RSSI and magnitude/phase observation models.
//!
//! Capacities are in bits per real dimension of the (padded) stacked
//! observation vector, so a block of `M` tones spans `2M` dimensions.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{complex_gaussian, SnrProfile};
use crate::error::{invalid_arg, Result};
use crate::mi::{self, MiEstimate};

pub const DEFAULT_COHERENCE_S: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelTag {
    Csi,
    CsiIdeal,
    RssiNumeric,
    RssiGaussian,
    MagPhase,
}

impl ModelTag {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelTag::Csi => "csi",
            ModelTag::CsiIdeal => "csi_ideal",
            ModelTag::RssiNumeric => "rssi_numeric",
            ModelTag::RssiGaussian => "rssi_gaussian",
            ModelTag::MagPhase => "magphase",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityReport {
    pub capacity_per_dim: f64,
    pub bits_per_coherence: f64,
    pub bits_per_second: f64,
    pub model: ModelTag,
}

impl CapacityReport {
    pub fn new(capacity_per_dim: f64, tones: usize, model: ModelTag) -> Self {
        Self::with_coherence(capacity_per_dim, tones, model, DEFAULT_COHERENCE_S)
    }

    pub fn with_coherence(capacity_per_dim: f64, tones: usize, model: ModelTag, coherence_s: f64) -> Self {
        let bits = 2.0 * tones as f64 * capacity_per_dim;
        Self { capacity_per_dim, bits_per_coherence: bits, bits_per_second: bits / coherence_s, model }
    }
}

/// `-1/2 log2(1 - rho^2)`.
pub fn mi_gaussian(rho: f64) -> Result<f64> {
    if !(rho.abs() < 1.0) {
        return Err(invalid_arg(format!("|rho| must be < 1, got {rho}")));
    }
    Ok(-0.5 * (-rho * rho).ln_1p() / std::f64::consts::LN_2)
}

/// Per complex coefficient: `-log2(1 - rho^2)` with `rho = snr / (1 + snr)`.
/// Written as `log2((1+s)^2 / (1+2s))` to stay accurate for large `s`.
fn csi_bits(snr: f64) -> f64 {
    if snr.is_infinite() {
        return f64::INFINITY;
    }
    2.0 * snr.ln_1p() / std::f64::consts::LN_2 - (2.0 * snr).ln_1p() / std::f64::consts::LN_2
}

pub fn csi_capacity(profile: &SnrProfile, tones: usize) -> CapacityReport {
    let total: f64 = profile.per_bin_snr.iter().map(|&s| csi_bits(s)).sum();
    CapacityReport::new(total / (2.0 * tones as f64), tones, ModelTag::Csi)
}

pub fn csi_capacity_ideal(snr_tau: f64, dof: usize, tones: usize) -> Result<CapacityReport> {
    if !(snr_tau >= 0.0) || dof == 0 || dof > tones {
        return Err(invalid_arg("need snr_tau >= 0 and 1 <= L <= M"));
    }
    let c = dof as f64 * csi_bits(snr_tau) / (2.0 * tones as f64);
    Ok(CapacityReport::new(c, tones, ModelTag::CsiIdeal))
}

/// `rho_tau = M rho_f / (L + (M - L) rho_f)`.
pub fn rho_time_from_freq(rho_f: f64, tones: usize, dof: usize) -> Result<f64> {
    if dof == 0 || dof > tones || !(0.0..1.0).contains(&rho_f) {
        return Err(invalid_arg("need 0 <= rho_f < 1 and 1 <= L <= M"));
    }
    let (m, l) = (tones as f64, dof as f64);
    Ok(m * rho_f / (l + (m - l) * rho_f))
}

/// `(1/4M) log2(1/(1 - rho^4))`, independent of `L`.
pub fn rssi_capacity_gaussian(rho_tau: f64, tones: usize) -> Result<CapacityReport> {
    if !(0.0..1.0).contains(&rho_tau) {
        return Err(invalid_arg("need 0 <= rho_tau < 1"));
    }
    let c = -(-rho_tau.powi(4)).ln_1p() / std::f64::consts::LN_2 / (4.0 * tones as f64);
    Ok(CapacityReport::new(c, tones, ModelTag::RssiGaussian))
}

/// Draw `samples` pairs `(R_A, R_B) = (sum |h_A|^2, sum |h_B|^2)`.
pub fn rssi_samples<R: Rng + ?Sized>(profile: &SnrProfile, samples: usize, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let nv = profile.noise_var;
    let mut ra = Vec::with_capacity(samples);
    let mut rb = Vec::with_capacity(samples);
    for _ in 0..samples {
        let (mut a, mut b) = (0.0, 0.0);
        for &v in &profile.bin_var {
            let h = complex_gaussian(rng, v);
            a += (h + complex_gaussian(rng, nv)).norm_sqr();
            b += (h + complex_gaussian(rng, nv)).norm_sqr();
        }
        ra.push(a);
        rb.push(b);
    }
    (ra, rb)
}

pub fn rssi_capacity_numeric<R: Rng + ?Sized>(
    profile: &SnrProfile,
    tones: usize,
    samples: usize,
    rng: &mut R,
) -> Result<(CapacityReport, MiEstimate)> {
    if samples < 10_000 {
        return Err(invalid_arg("RSSI capacity needs at least 1e4 samples"));
    }
    let (ra, rb) = rssi_samples(profile, samples, rng);
    let est = mi::mi_estimate(&ra, &rb, mi::DEFAULT_BINS)?;
    let report = CapacityReport::new(est.value / (2.0 * tones as f64), tones, ModelTag::RssiNumeric);
    Ok((report, est))
}

/// Jointly Gaussian `(h_A, h_B)` with unit variance and correlation `rho`.
pub fn correlated_complex_pairs<R: Rng + ?Sized>(
    rho: f64,
    samples: usize,
    rng: &mut R,
) -> (Vec<Complex64>, Vec<Complex64>) {
    let a = rho.sqrt();
    let b = (1.0 - rho).sqrt();
    (0..samples)
        .map(|_| {
            let h = complex_gaussian(rng, 1.0);
            let na = complex_gaussian(rng, 1.0);
            let nb = complex_gaussian(rng, 1.0);
            (h * a + na * b, h * a + nb * b)
        })
        .unzip()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagPhaseRecord {
    pub snr: f64,
    pub rho: f64,
    pub i_full: f64,
    pub i_re: MiEstimate,
    pub i_im: MiEstimate,
    pub i_mag: MiEstimate,
    pub i_phase: MiEstimate,
}

fn sum_est(a: &MiEstimate, b: &MiEstimate) -> (f64, f64) {
    (a.value + b.value, a.std_error.hypot(b.std_error))
}

impl MagPhaseRecord {
    pub fn re_plus_im(&self) -> (f64, f64) {
        sum_est(&self.i_re, &self.i_im)
    }

    pub fn mag_plus_phase(&self) -> (f64, f64) {
        sum_est(&self.i_mag, &self.i_phase)
    }
}

/// Compare the full complex MI against the real+imaginary and
/// magnitude+phase splits at linear SNR `snr`.
pub fn magphase_decomposition<R: Rng + ?Sized>(snr: f64, samples: usize, rng: &mut R) -> Result<MagPhaseRecord> {
    if samples < 100_000 {
        return Err(invalid_arg("magnitude/phase study needs at least 1e5 samples"));
    }
    if !(snr >= 0.0) || snr.is_infinite() {
        return Err(invalid_arg("snr must be finite and nonnegative"));
    }
    let rho = snr / (1.0 + snr);
    let (ha, hb) = correlated_complex_pairs(rho, samples, rng);
    let part = |f: fn(&Complex64) -> f64| -> (Vec<f64>, Vec<f64>) { (ha.iter().map(f).collect(), hb.iter().map(f).collect()) };
    let (ra, rb) = part(|c| c.re);
    let (ia, ib) = part(|c| c.im);
    let (ma, mb) = part(|c| c.norm());
    let (pa, pb) = part(|c| c.arg());
    Ok(MagPhaseRecord {
        snr,
        rho,
        i_full: 2.0 * mi_gaussian(rho)?,
        i_re: mi::mi_adaptive(&ra, &rb)?,
        i_im: mi::mi_adaptive(&ia, &ib)?,
        i_mag: mi::mi_adaptive(&ma, &mb)?,
        i_phase: mi::mi_circular(&pa, &pb, mi::DEFAULT_BINS)?,
    })
}

/// Information the observations carry about a grid-uniform phase offset,
/// `I(theta; h_A, h_B e^{j theta})`, for `dof` equal-variance coefficients at
/// per-coefficient SNR `snr`. Returns `(bits, std_error)`.
///
/// The posterior over the grid depends on the observations only through
/// `z = sum_l h_B,l conj(h_A,l)`, so the loss is `log2 B - E[H(theta | z)]`.
pub fn phase_offset_loss<R: Rng + ?Sized>(
    dof: usize,
    snr: f64,
    grid_size: usize,
    samples: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if grid_size == 0 || dof == 0 || samples < 2 {
        return Err(invalid_arg("need L >= 1, B >= 1 and at least two samples"));
    }
    if !(snr >= 0.0) || snr.is_infinite() {
        return Err(invalid_arg("snr must be finite and nonnegative"));
    }
    if grid_size == 1 || snr == 0.0 {
        return Ok((0.0, 0.0));
    }
    let (sh, sw) = (snr, 1.0);
    let s = sh + sw;
    let kappa = 2.0 * sh / (s * s - sh * sh);
    let grid: Vec<Complex64> = (0..grid_size)
        .map(|b| Complex64::from_polar(1.0, -TAU * b as f64 / grid_size as f64))
        .collect();
    let log_b = (grid_size as f64).log2();
    let mut logp = vec![0.0; grid_size];
    let losses: Vec<f64> = (0..samples)
        .map(|_| {
            let theta = grid[rng.random_range(0..grid_size)].conj();
            let mut z = Complex64::new(0.0, 0.0);
            for _ in 0..dof {
                let h = complex_gaussian(rng, sh);
                let ya = h + complex_gaussian(rng, sw);
                let yb = (h + complex_gaussian(rng, sw)) * theta;
                z += yb * ya.conj();
            }
            for (lp, g) in logp.iter_mut().zip(&grid) {
                *lp = kappa * (g * z).re;
            }
            log_b - entropy_bits_from_logits(&logp)
        })
        .collect();
    let n = samples as f64;
    let mean = losses.iter().sum::<f64>() / n;
    let var = losses.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

fn entropy_bits_from_logits(logits: &[f64]) -> f64 {
    let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logits.iter().map(|l| (l - mx).exp()).collect();
    let z: f64 = w.iter().sum();
    -w.iter().filter(|&&p| p > 0.0).map(|&p| (p / z) * (p / z).log2()).sum::<f64>()
}

/// One row of a capacity sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityRow {
    pub snr_db: f64,
    pub dof: usize,
    pub tones: usize,
    pub model: ModelTag,
    pub capacity_per_dim: f64,
    pub std_err: f64,
}

pub fn rows_to_csv(rows: &[CapacityRow]) -> String {
    let mut s = String::from("snr_db,L,M,model,capacity_bits_per_dim,std_err\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{:.9},{:.9}",
            r.snr_db,
            r.dof,
            r.tones,
            r.model.as_str(),
            r.capacity_per_dim,
            r.std_err
        );
    }
    s
}
