//! Multipath channel realizations.
//!
//! A realization is an echo-type impulse response (a set of delayed, complex
//! gains). From it we derive the per-tone frequency coefficients `H_n` and the
//! per-delay-bin sampled coefficients `h_l`. Only the first `L = ceil(tau_max W)`
//! delay bins carry energy; those `L` coefficients are the source of key
//! randomness.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid_arg, invalid_config, Result};

/// Shape of the power-delay profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerProfile {
    /// Path variance decays as `exp(-tau / pdp_decay)`.
    Exponential,
    /// Every delay bin carries the same expected power.
    Flat,
}

/// How path gains are folded into delay bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinModel {
    /// Each path lands in the bin whose centre is nearest its delay.
    Aggregate,
    /// Sinc interpolation truncated to `SINC_LOBES` side lobes.
    Sinc,
}

pub const SINC_LOBES: f64 = 8.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    /// Number of OFDM tones `M`.
    pub num_tones: usize,
    /// Signal duration `T` in seconds.
    pub duration_s: f64,
    /// Two-sided bandwidth `W` in Hz.
    pub bandwidth_hz: f64,
    /// Number of propagation paths `N_p`.
    pub num_paths: usize,
    /// Maximum delay spread in seconds.
    pub max_delay_s: f64,
    /// Exponential power-delay-profile time constant in seconds.
    pub pdp_decay_s: f64,
    /// Total channel power `sigma_H^2 = sum_k E|beta_k|^2`.
    pub total_power: f64,
    pub profile: PowerProfile,
    pub bin_model: BinModel,
}

impl ChannelConfig {
    /// 802.11a indoor parameters: 52 tones, 16.25 MHz data bandwidth,
    /// 3.2 us symbols, 800 ns delay spread, 300 paths.
    pub fn ieee80211a() -> Self {
        let max_delay_s = 800e-9;
        Self {
            num_tones: 52,
            duration_s: 3.2e-6,
            bandwidth_hz: 16.25e6,
            num_paths: 300,
            max_delay_s,
            pdp_decay_s: max_delay_s / 3.0,
            total_power: 1.0,
            profile: PowerProfile::Exponential,
            bin_model: BinModel::Aggregate,
        }
    }

    /// An idealised equal-variance channel with `dof` bins out of `tones`.
    pub fn flat(tones: usize, dof: usize) -> Self {
        let bandwidth_hz = 1e6;
        let duration_s = tones as f64 / bandwidth_hz;
        let max_delay_s = dof as f64 / bandwidth_hz;
        Self {
            num_tones: tones,
            duration_s,
            bandwidth_hz,
            num_paths: 40 * dof.max(1),
            max_delay_s,
            pdp_decay_s: max_delay_s / 3.0,
            total_power: 1.0,
            profile: PowerProfile::Flat,
            bin_model: BinModel::Aggregate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_tones == 0 {
            return Err(invalid_config("num_tones must be positive"));
        }
        if !(self.duration_s > 0.0 && self.bandwidth_hz > 0.0) {
            return Err(invalid_config("duration and bandwidth must be positive"));
        }
        let tw = self.duration_s * self.bandwidth_hz;
        if (tw - self.num_tones as f64).abs() > 0.5 {
            return Err(invalid_config(format!(
                "num_tones {} inconsistent with T*W = {tw}",
                self.num_tones
            )));
        }
        if self.num_paths == 0 {
            return Err(invalid_config("num_paths must be positive"));
        }
        if !(self.max_delay_s >= 0.0) {
            return Err(invalid_config("max delay spread must be nonnegative"));
        }
        if self.max_delay_s > self.duration_s * (1.0 + 1e-12) {
            return Err(invalid_config("max delay spread exceeds signal duration"));
        }
        if !(self.pdp_decay_s > 0.0) {
            return Err(invalid_config("pdp_decay must be positive"));
        }
        if !(self.total_power > 0.0) {
            return Err(invalid_config("total channel power must be positive"));
        }
        Ok(())
    }

    /// Degrees of freedom `L = ceil(tau_max W)`, at least 1.
    pub fn dof(&self) -> usize {
        let x = self.max_delay_s * self.bandwidth_hz;
        // tolerate representation error in products like 800e-9 * 16.25e6
        ((x - 1e-9).ceil().max(1.0) as usize).min(self.num_tones)
    }

    pub fn tone_spacing_hz(&self) -> f64 {
        1.0 / self.duration_s
    }

    /// Delay bin of a path, clamped to the `L` significant bins.
    pub fn bin_of(&self, delay_s: f64) -> usize {
        let x = delay_s * self.bandwidth_hz;
        let b = (x - 0.5).ceil().max(0.0) as usize;
        b.min(self.dof() - 1)
    }

    /// Expected fraction of channel power in each of the `L` bins.
    pub fn bin_power_fractions(&self) -> Vec<f64> {
        let l = self.dof();
        match self.profile {
            PowerProfile::Flat => vec![1.0 / l as f64; l],
            PowerProfile::Exponential => {
                let w = self.bandwidth_hz;
                let d = self.pdp_decay_s;
                let tau_max = self.max_delay_s;
                if tau_max == 0.0 {
                    return vec![1.0];
                }
                // integral of exp(-t/d) over [0, t]
                let cum = |t: f64| -d * (-t / d).exp_m1();
                let total = cum(tau_max);
                let mut edges: Vec<f64> = (0..l).map(|b| (b as f64 + 0.5) / w).collect();
                edges[l - 1] = tau_max;
                let mut prev = 0.0;
                edges
                    .iter()
                    .map(|&e| {
                        let e = e.min(tau_max);
                        let f = (cum(e) - cum(prev)) / total;
                        prev = e;
                        f
                    })
                    .collect()
            }
        }
    }

    /// Expected variance `sigma_h^2(l)` of each sampled coefficient.
    pub fn bin_variances(&self) -> Vec<f64> {
        let scale = self.num_tones as f64 * self.total_power;
        self.bin_power_fractions().into_iter().map(|f| f * scale).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub delays: Vec<f64>,
    pub gains: Vec<Complex64>,
}

impl PathSet {
    pub fn new(delays: Vec<f64>, gains: Vec<Complex64>) -> Result<Self> {
        if delays.len() != gains.len() {
            return Err(invalid_arg("delays and gains differ in length"));
        }
        if delays.iter().any(|d| !(*d >= 0.0)) {
            return Err(invalid_arg("path delays must be nonnegative"));
        }
        Ok(Self { delays, gains })
    }

    pub fn len(&self) -> usize {
        self.delays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delays.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub freq_coeffs: Vec<Complex64>,
    pub time_coeffs: Vec<Complex64>,
    pub source_paths: PathSet,
}

pub(crate) fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * s, im * s)
}

/// Draw one set of paths.
///
/// Under the exponential profile delays are uniform on `[0, tau_max]`. Under the
/// flat profile each path first picks one of the `L` bins uniformly and then a
/// delay uniformly inside that bin, so every bin has the same expected power.
/// Gain variances are normalised per realization to sum to `total_power`.
pub fn sample_paths<R: Rng + ?Sized>(config: &ChannelConfig, rng: &mut R) -> Result<PathSet> {
    config.validate()?;
    let np = config.num_paths;
    let tau_max = config.max_delay_s;
    let w = config.bandwidth_hz;
    let l = config.dof();

    let delays: Vec<f64> = match config.profile {
        PowerProfile::Exponential => (0..np).map(|_| rng.random::<f64>() * tau_max).collect(),
        PowerProfile::Flat => (0..np)
            .map(|_| {
                let b = rng.random_range(0..l) as f64;
                let lo = ((b - 0.5) / w).max(0.0);
                let hi = ((b + 0.5) / w).min(tau_max);
                lo + rng.random::<f64>() * (hi - lo).max(0.0)
            })
            .collect(),
    };

    let weights: Vec<f64> = match config.profile {
        PowerProfile::Exponential => delays.iter().map(|t| (-t / config.pdp_decay_s).exp()).collect(),
        PowerProfile::Flat => vec![1.0; np],
    };
    let wsum: f64 = weights.iter().sum();
    let gains = weights
        .iter()
        .map(|wk| complex_gaussian(rng, config.total_power * wk / wsum))
        .collect();
    Ok(PathSet { delays, gains })
}

/// `H_n = sum_k beta_k exp(-j 2 pi n tau_k / T)` for `n = 0..M`.
pub fn freq_coefficients(paths: &PathSet, config: &ChannelConfig) -> Vec<Complex64> {
    let m = config.num_tones;
    let mut out = vec![Complex64::new(0.0, 0.0); m];
    for (&tau, &beta) in paths.delays.iter().zip(&paths.gains) {
        let step = Complex64::from_polar(1.0, -2.0 * PI * tau / config.duration_s);
        let mut phase = beta;
        for h in out.iter_mut() {
            *h += phase;
            phase *= step;
        }
    }
    out
}

/// Sampled coefficients `h_l`, `l = 0..L`.
pub fn time_coefficients(paths: &PathSet, config: &ChannelConfig) -> Vec<Complex64> {
    let l = config.dof();
    let sqrt_m = (config.num_tones as f64).sqrt();
    let mut out = vec![Complex64::new(0.0, 0.0); l];
    match config.bin_model {
        BinModel::Aggregate => {
            for (&tau, &beta) in paths.delays.iter().zip(&paths.gains) {
                out[config.bin_of(tau)] += beta;
            }
        }
        BinModel::Sinc => {
            for (&tau, &beta) in paths.delays.iter().zip(&paths.gains) {
                let x = tau * config.bandwidth_hz;
                for (b, h) in out.iter_mut().enumerate() {
                    let d = b as f64 - x;
                    if d.abs() <= SINC_LOBES {
                        *h += beta * sinc(d);
                    }
                }
            }
        }
    }
    out.iter_mut().for_each(|h| *h *= sqrt_m);
    out
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// `H_n = (1/sqrt(M)) sum_{l<L} h_l exp(-j 2 pi n l / M)`.
pub fn freq_from_time(time_coeffs: &[Complex64], num_tones: usize) -> Result<Vec<Complex64>> {
    let l = time_coeffs.len();
    if l > num_tones {
        return Err(invalid_arg(format!("L = {l} exceeds M = {num_tones}")));
    }
    let m = num_tones as f64;
    let norm = 1.0 / m.sqrt();
    Ok((0..num_tones)
        .map(|n| {
            time_coeffs
                .iter()
                .enumerate()
                .map(|(b, h)| h * Complex64::from_polar(1.0, -2.0 * PI * (n * b) as f64 / m))
                .sum::<Complex64>()
                * norm
        })
        .collect())
}

pub fn realize<R: Rng + ?Sized>(config: &ChannelConfig, rng: &mut R) -> Result<ChannelRealization> {
    let paths = sample_paths(config, rng)?;
    Ok(ChannelRealization {
        freq_coeffs: freq_coefficients(&paths, config),
        time_coeffs: time_coefficients(&paths, config),
        source_paths: paths,
    })
}

/// Sampled coefficients only; skips the per-tone transform.
pub fn realize_time<R: Rng + ?Sized>(config: &ChannelConfig, rng: &mut R) -> Result<Vec<Complex64>> {
    let paths = sample_paths(config, rng)?;
    Ok(time_coefficients(&paths, config))
}

/// SNR bookkeeping for one channel configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrProfile {
    /// `sigma_W^2`; zero for a noiseless link, infinite when `SNR_f = 0`.
    pub noise_var: f64,
    /// `sigma_h^2(l)` for each bin.
    pub bin_var: Vec<f64>,
    pub per_bin_snr: Vec<f64>,
    pub per_tone_snr: f64,
    pub rho_time: Vec<f64>,
    pub rho_freq: f64,
}

pub fn rho_from_snr(snr: f64) -> f64 {
    if snr.is_infinite() {
        1.0
    } else {
        snr / (1.0 + snr)
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl SnrProfile {
    /// Build a profile from per-bin variances and a noise variance.
    pub fn from_bin_variances(bin_var: Vec<f64>, total_power: f64, noise_var: f64) -> Self {
        let snr = |v: f64| {
            if noise_var == 0.0 {
                f64::INFINITY
            } else {
                v / noise_var
            }
        };
        let per_bin_snr: Vec<f64> = bin_var.iter().map(|&v| snr(v)).collect();
        let per_tone_snr = snr(total_power);
        Self {
            noise_var,
            rho_time: per_bin_snr.iter().map(|&s| rho_from_snr(s)).collect(),
            rho_freq: rho_from_snr(per_tone_snr),
            per_bin_snr,
            per_tone_snr,
            bin_var,
        }
    }

    pub fn dof(&self) -> usize {
        self.bin_var.len()
    }
}

/// Profile for a linear per-tone SNR. `snr_f = 0` gives infinite noise,
/// `snr_f = inf` a noiseless link.
pub fn build_snr_profile_linear(config: &ChannelConfig, snr_f: f64) -> Result<SnrProfile> {
    if !(snr_f >= 0.0) {
        return Err(invalid_arg("per-tone SNR must be nonnegative"));
    }
    let noise_var = if snr_f == 0.0 {
        f64::INFINITY
    } else if snr_f.is_infinite() {
        0.0
    } else {
        config.total_power / snr_f
    };
    Ok(SnrProfile::from_bin_variances(config.bin_variances(), config.total_power, noise_var))
}

pub fn build_snr_profile(config: &ChannelConfig, snr_f_db: f64) -> Result<SnrProfile> {
    if !snr_f_db.is_finite() {
        return Err(invalid_arg("snr_f_db must be finite"));
    }
    build_snr_profile_linear(config, db_to_linear(snr_f_db))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn table_i_has_thirteen_bins() {
        let cfg = ChannelConfig::ieee80211a();
        cfg.validate().unwrap();
        assert_eq!(cfg.dof(), 13);
        assert!((cfg.tone_spacing_hz() - 312.5e3).abs() < 1e-6);
        let paths = sample_paths(&cfg, &mut SeedStream::new(1).rng()).unwrap();
        assert_eq!(paths.len(), 300);
        assert!(paths.delays.iter().all(|&d| (0.0..=800e-9).contains(&d)));
        assert_eq!(time_coefficients(&paths, &cfg).len(), 13);
    }

    #[test]
    fn degenerate_single_path() {
        let mut cfg = ChannelConfig::ieee80211a();
        cfg.num_paths = 1;
        cfg.max_delay_s = 0.0;
        let paths = sample_paths(&cfg, &mut SeedStream::new(3).rng()).unwrap();
        assert_eq!(paths.delays, vec![0.0]);
        assert_eq!(cfg.dof(), 1);
        assert_eq!(cfg.bin_variances(), vec![52.0]);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = ChannelConfig::ieee80211a();
        cfg.num_paths = 0;
        assert!(sample_paths(&cfg, &mut SeedStream::new(0).rng()).is_err());
        let mut cfg = ChannelConfig::ieee80211a();
        cfg.max_delay_s = -1e-9;
        assert!(sample_paths(&cfg, &mut SeedStream::new(0).rng()).is_err());
        let mut cfg = ChannelConfig::ieee80211a();
        cfg.num_tones = 64;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn zero_delay_path_is_flat_in_frequency() {
        let cfg = ChannelConfig::ieee80211a();
        let p = PathSet::new(vec![0.0], vec![c(1.0, 0.0)]).unwrap();
        for h in freq_coefficients(&p, &cfg) {
            assert!((h - c(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn one_sample_delay_gives_phase_ramp() {
        let cfg = ChannelConfig::ieee80211a();
        let m = cfg.num_tones;
        let p = PathSet::new(vec![cfg.duration_s / m as f64], vec![c(1.0, 0.0)]).unwrap();
        for (n, h) in freq_coefficients(&p, &cfg).into_iter().enumerate() {
            let want = Complex64::from_polar(1.0, -2.0 * PI * n as f64 / m as f64);
            assert!((h - want).norm() < 1e-12, "tone {n}");
        }
    }

    #[test]
    fn bin_aggregation() {
        let cfg = ChannelConfig::ieee80211a();
        let w = cfg.bandwidth_hz;
        let sm = (cfg.num_tones as f64).sqrt();
        let beta = c(0.3, -0.7);
        let p = PathSet::new(vec![4.0 / w], vec![beta]).unwrap();
        let h = time_coefficients(&p, &cfg);
        for (b, v) in h.iter().enumerate() {
            let want = if b == 4 { beta * sm } else { c(0.0, 0.0) };
            assert!((v - want).norm() < 1e-12);
        }
        let (b1, b2) = (c(1.0, 2.0), c(-0.5, 0.25));
        let p = PathSet::new(vec![6.8 / w, 7.4 / w], vec![b1, b2]).unwrap();
        let h = time_coefficients(&p, &cfg);
        assert!((h[7] - (b1 + b2) * sm).norm() < 1e-12);
        // bin 0 is [0, 0.5/W]; 0.5/W itself belongs to it
        assert_eq!(cfg.bin_of(0.5 / w), 0);
        assert_eq!(cfg.bin_of(0.5000001 / w), 1);
        // the overflow beyond (L - 0.5)/W folds into the last bin
        assert_eq!(cfg.bin_of(cfg.max_delay_s), 12);
    }

    #[test]
    fn freq_from_time_basics() {
        let m = 8;
        let mut h = vec![c(0.0, 0.0); 3];
        h[0] = c((m as f64).sqrt(), 0.0);
        for v in freq_from_time(&h, m).unwrap() {
            assert!((v - c(1.0, 0.0)).norm() < 1e-12);
        }
        let mut h = vec![c(0.0, 0.0); m];
        h[1] = c(1.0, 0.0);
        for (n, v) in freq_from_time(&h, m).unwrap().into_iter().enumerate() {
            let want = Complex64::from_polar(1.0 / (m as f64).sqrt(), -2.0 * PI * n as f64 / m as f64);
            assert!((v - want).norm() < 1e-12);
        }
        assert!(freq_from_time(&vec![c(0.0, 0.0); 9], 8).is_err());
    }

    #[test]
    fn bin_centred_delays_make_both_transforms_agree() {
        let cfg = ChannelConfig::ieee80211a();
        let mut rng = SeedStream::new(11).rng();
        let delays: Vec<f64> = (0..40).map(|k| (k % 13) as f64 / cfg.bandwidth_hz).collect();
        let gains: Vec<Complex64> = (0..40).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
        let p = PathSet::new(delays, gains).unwrap();
        let direct = freq_coefficients(&p, &cfg);
        let via = freq_from_time(&time_coefficients(&p, &cfg), cfg.num_tones).unwrap();
        for (a, b) in direct.iter().zip(&via) {
            assert!((a - b).norm() <= 1e-9 * a.norm().max(1e-3));
        }
    }

    #[test]
    fn flat_snr_profile() {
        let cfg = ChannelConfig::flat(52, 13);
        assert_eq!(cfg.dof(), 13);
        let p = build_snr_profile(&cfg, 20.0).unwrap();
        for s in &p.per_bin_snr {
            assert!((s - 400.0).abs() < 1e-9);
        }
        let p = build_snr_profile_linear(&cfg, 0.0).unwrap();
        assert!(p.per_bin_snr.iter().all(|&s| s == 0.0));
        assert!(p.rho_time.iter().all(|&r| r == 0.0));
        assert_eq!(p.rho_freq, 0.0);
        let p = build_snr_profile_linear(&cfg, 1.0).unwrap();
        assert_eq!(p.rho_freq, 0.5);
    }

    #[test]
    fn snr_sum_relation_holds() {
        for cfg in [ChannelConfig::ieee80211a(), ChannelConfig::flat(10, 3)] {
            for db in [-10.0, 0.0, 7.5, 30.0] {
                let p = build_snr_profile(&cfg, db).unwrap();
                let sum: f64 = p.per_bin_snr.iter().sum();
                let want = cfg.num_tones as f64 * p.per_tone_snr;
                assert!(((sum - want) / want).abs() < 1e-9);
                for (r, s) in p.rho_time.iter().zip(&p.per_bin_snr) {
                    assert!((r - s / (1.0 + s)).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn flat_mode_gain_power_matches_total() {
        // Sum_k |beta_k|^2 per realization averages sigma_H^2.
        let mut cfg = ChannelConfig::flat(52, 13);
        cfg.num_paths = 20;
        let mut rng = SeedStream::new(5).rng();
        let n = 10_000;
        let vals: Vec<f64> = (0..n)
            .map(|_| sample_paths(&cfg, &mut rng).unwrap().gains.iter().map(|g| g.norm_sqr()).sum())
            .collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - cfg.total_power).abs() < 3.0 * se, "mean {mean} se {se}");
    }
}
