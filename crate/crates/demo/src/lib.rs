use std::sync::Arc;

use num_complex::Complex64;
use wasm_bindgen::prelude::*;

use skg_core::capacity::{csi_capacity, csi_capacity_ideal, rssi_capacity_gaussian};
use skg_core::channel::{build_snr_profile, db_to_linear, freq_from_time, realize, rho_from_snr, ChannelConfig};
use skg_core::config::ExperimentConfig;
use skg_core::pipeline::{bits_to_hex, KeySession, KeySessionResult, SessionCode};
use skg_core::rng::SeedStream;
use skg_core::sounding::sound_coefficients;

fn js_err(e: skg_core::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn channel(delay_spread_ns: f64) -> Result<ChannelConfig, JsValue> {
    let mut ch = ChannelConfig::ieee80211a();
    ch.max_delay_s = delay_spread_ns * 1e-9;
    ch.pdp_decay_s = ch.max_delay_s / 3.0;
    ch.validate().map_err(js_err)?;
    Ok(ch)
}

/// Delay bins `L` retained for a delay spread.
#[wasm_bindgen]
pub fn dof(delay_spread_ns: f64) -> Result<usize, JsValue> {
    Ok(channel(delay_spread_ns)?.dof())
}

/// Rows of `[snr_db, csi, csi_flat, rssi]` in bits per coherence interval, flattened.
#[wasm_bindgen]
pub fn capacity_curves(delay_spread_ns: f64, snr_lo: f64, snr_hi: f64, step: f64) -> Result<Vec<f64>, JsValue> {
    if !(step > 0.0) || snr_hi < snr_lo {
        return Err("bad SNR grid".into());
    }
    let ch = channel(delay_spread_ns)?;
    let (l, m) = (ch.dof(), ch.num_tones);
    let mut out = Vec::new();
    let mut snr = snr_lo;
    while snr <= snr_hi + 1e-9 {
        let csi = csi_capacity(&build_snr_profile(&ch, snr).map_err(js_err)?, m);
        let snr_tau = m as f64 * db_to_linear(snr) / l as f64;
        let flat = csi_capacity_ideal(snr_tau, l, m).map_err(js_err)?;
        let rssi = rssi_capacity_gaussian(rho_from_snr(snr_tau), m).map_err(js_err)?;
        out.extend([snr, csi.bits_per_coherence, flat.bits_per_coherence, rssi.bits_per_coherence]);
        snr += step;
    }
    Ok(out)
}

/// One channel draw seen by both ends. Layout: `|H_A|`, `|H_B|` over the M tones,
/// then `|h_A|`, `|h_B|` over the L bins, then the tone correlation `|r(k)|` for k = 0..M.
#[wasm_bindgen]
pub fn channel_view(delay_spread_ns: f64, snr_db: f64, seed: u64) -> Result<Vec<f64>, JsValue> {
    let ch = channel(delay_spread_ns)?;
    let m = ch.num_tones;
    let profile = build_snr_profile(&ch, snr_db).map_err(js_err)?;
    let mut rng = SeedStream::new(seed).rng();
    let real = realize(&ch, &mut rng).map_err(js_err)?;
    let pair = sound_coefficients(&real.time_coeffs, &profile, &mut rng).map_err(js_err)?;
    let freq_a = freq_from_time(&pair.obs_a, m).map_err(js_err)?;
    let freq_b = freq_from_time(&pair.obs_b, m).map_err(js_err)?;

    let mut out: Vec<f64> = freq_a.iter().chain(&freq_b).map(|z| z.norm()).collect();
    out.extend(pair.obs_a.iter().chain(&pair.obs_b).map(|z| z.norm()));
    let var = ch.bin_variances();
    let total: f64 = var.iter().sum();
    for k in 0..m {
        let r: Complex64 = var
            .iter()
            .enumerate()
            .map(|(l, &v)| v * Complex64::from_polar(1.0, -std::f64::consts::TAU * (l * k) as f64 / m as f64))
            .sum();
        out.push(r.norm() / total);
    }
    Ok(out)
}

/// A code built once and reused across sessions.
#[wasm_bindgen]
pub struct KeyDemo {
    session: KeySession,
    last: Option<KeySessionResult>,
}

#[wasm_bindgen]
impl KeyDemo {
    /// `levels` is 2 or 4, `rate` is key bits per data symbol.
    #[wasm_bindgen(constructor)]
    pub fn new(
        delay_spread_ns: f64,
        snr_db: f64,
        rate: f64,
        levels: usize,
        blocks: usize,
        soft: bool,
    ) -> Result<KeyDemo, JsValue> {
        let ch = channel(delay_spread_ns)?;
        let mut cfg = ExperimentConfig::default();
        let overrides = [
            format!("tau_max_s={}", ch.max_delay_s),
            format!("pdp_decay_s={}", ch.pdp_decay_s),
            format!("snr_f_db={snr_db}"),
            format!("rate={rate}"),
            format!("quantizer.levels={levels}"),
            format!("blocks={blocks}"),
            format!("decoding={}", if soft { "soft" } else { "hard" }),
        ];
        cfg.apply_overrides(&overrides).map_err(js_err)?;
        let code: Arc<SessionCode> = Arc::new(cfg.build_code().map_err(js_err)?);
        let session = KeySession::new(cfg.session_with_code(code, 0).map_err(js_err)?).map_err(js_err)?;
        Ok(KeyDemo { session, last: None })
    }

    pub fn run(&mut self, seed: u64) -> Result<bool, JsValue> {
        let r = self.session.run(seed).map_err(js_err)?;
        let agreed = r.agreed;
        self.last = Some(r);
        Ok(agreed)
    }

    pub fn code_length(&self) -> usize {
        self.session.config().code.len()
    }

    pub fn key_length(&self) -> usize {
        self.last.as_ref().map_or(0, |r| r.key_length)
    }

    pub fn public_bits(&self) -> usize {
        self.last.as_ref().map_or(0, |r| r.public_message_length)
    }

    pub fn bit_error_rate(&self) -> f64 {
        self.last.as_ref().map_or(0.0, |r| r.bit_error_rate)
    }

    pub fn symbol_errors(&self) -> usize {
        self.last.as_ref().map_or(0, |r| r.symbol_errors)
    }

    pub fn iterations(&self) -> usize {
        self.last.as_ref().map_or(0, |r| r.decoded.iterations)
    }

    pub fn key_a(&self) -> String {
        self.last.as_ref().map_or_else(String::new, |r| bits_to_hex(&r.key_a))
    }

    pub fn key_b(&self) -> String {
        self.last.as_ref().map_or_else(String::new, |r| bits_to_hex(&r.key_b))
    }
}
