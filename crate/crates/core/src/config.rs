//! Plain-text `key = value` experiment configuration.
//!
//! Blank lines and `#` comments are ignored. Unknown keys are errors so a
//! typo cannot silently fall back to a default.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::channel::{BinModel, ChannelConfig, PowerProfile};
use crate::codec::{DegreeDistribution, DEFAULT_MAX_ITER, DEFAULT_THETA_GRID};
use crate::error::{invalid_config, Error, Result};
use crate::pipeline::{CodeFamily, DecodingMode, PhaseMode, SessionCode, SessionConfig, SweepTemplate};
use crate::quantize::Quantizer;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub channel: ChannelConfig,
    pub quantizer_levels: usize,
    /// Explicit thresholds; equiprobable cells when absent.
    pub quantizer_thresholds: Option<Vec<f64>>,
    pub snr_f_db: f64,
    /// Coherence blocks per session.
    pub blocks: usize,
    /// Key bits per data symbol.
    pub rate: f64,
    pub decoding: DecodingMode,
    pub phase: PhaseMode,
    pub theta_grid: usize,
    pub max_iter: usize,
    pub code_family: CodeFamily,
    pub code_seed: u64,
    pub coherence_s: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            channel: ChannelConfig::ieee80211a(),
            quantizer_levels: 2,
            quantizer_thresholds: None,
            snr_f_db: 15.0,
            blocks: 120,
            rate: 0.5,
            decoding: DecodingMode::Soft,
            phase: PhaseMode::None,
            theta_grid: DEFAULT_THETA_GRID,
            max_iter: DEFAULT_MAX_ITER,
            code_family: CodeFamily::Irregular { variable: DegreeDistribution::default_variable() },
            code_seed: 1,
            coherence_s: crate::capacity::DEFAULT_COHERENCE_S,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| format!("{key}: {e}"))
}

fn parse_list(key: &str, v: &str) -> std::result::Result<Vec<f64>, String> {
    v.split(',').map(|t| parse_num::<f64>(key, t.trim())).collect()
}

fn parse_degrees(v: &str) -> std::result::Result<DegreeDistribution, String> {
    let entries = v
        .split(',')
        .map(|t| {
            let (d, f) = t.split_once(':').ok_or_else(|| format!("degree entry '{t}' is not 'degree:fraction'"))?;
            Ok((parse_num::<usize>("degree", d.trim())?, parse_num::<f64>("fraction", f.trim())?))
        })
        .collect::<std::result::Result<Vec<_>, String>>()?;
    DegreeDistribution::new(entries).map_err(|e| e.to_string())
}

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: i + 1, msg: format!("expected 'key = value', got '{line}'") })?;
            cfg.set(k.trim(), v.trim()).map_err(|msg| Error::Parse { line: i + 1, msg })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Apply `key=value` overrides in order, then validate the result.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for kv in overrides {
            let kv = kv.as_ref();
            let (k, v) = kv.split_once('=').ok_or_else(|| invalid_config(format!("override '{kv}' is not key=value")))?;
            self.set(k.trim(), v.trim()).map_err(Error::InvalidConfig)?;
        }
        self.validate()
    }

    fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        let ch = &mut self.channel;
        match key {
            "m_tones" => ch.num_tones = parse_num(key, v)?,
            "bandwidth_hz" => ch.bandwidth_hz = parse_num(key, v)?,
            "duration_s" => ch.duration_s = parse_num(key, v)?,
            "n_paths" => ch.num_paths = parse_num(key, v)?,
            "tau_max_s" => ch.max_delay_s = parse_num(key, v)?,
            "pdp_decay_s" => ch.pdp_decay_s = parse_num(key, v)?,
            "sigma_h2" => ch.total_power = parse_num(key, v)?,
            "profile" => {
                ch.profile = match v {
                    "exponential" => PowerProfile::Exponential,
                    "flat" => PowerProfile::Flat,
                    _ => return Err(format!("profile must be exponential or flat, got '{v}'")),
                }
            }
            "bin_model" => {
                ch.bin_model = match v {
                    "aggregate" => BinModel::Aggregate,
                    "sinc" => BinModel::Sinc,
                    _ => return Err(format!("bin_model must be aggregate or sinc, got '{v}'")),
                }
            }
            "quantizer.levels" => self.quantizer_levels = parse_num(key, v)?,
            "quantizer.thresholds" => {
                self.quantizer_thresholds = if v.is_empty() || v == "equiprobable" { None } else { Some(parse_list(key, v)?) }
            }
            "snr_f_db" => self.snr_f_db = parse_num(key, v)?,
            "blocks" => self.blocks = parse_num(key, v)?,
            "rate" => self.rate = parse_num(key, v)?,
            "decoding" => {
                self.decoding = match v {
                    "soft" => DecodingMode::Soft,
                    "hard" => DecodingMode::Hard,
                    _ => return Err(format!("decoding must be soft or hard, got '{v}'")),
                }
            }
            "phase_mode" => {
                self.phase = match v {
                    "none" => PhaseMode::None,
                    "constant" => PhaseMode::Constant,
                    "per_block" => PhaseMode::PerBlock,
                    _ => return Err(format!("phase_mode must be none, constant or per_block, got '{v}'")),
                }
            }
            "theta_grid" => self.theta_grid = parse_num(key, v)?,
            "max_iter" => self.max_iter = parse_num(key, v)?,
            "code.family" => {
                self.code_family = match v {
                    "regular" => CodeFamily::Regular { col_weight: 3 },
                    "irregular" => CodeFamily::Irregular { variable: DegreeDistribution::default_variable() },
                    _ => return Err(format!("code.family must be regular or irregular, got '{v}'")),
                }
            }
            "code.col_weight" => match &mut self.code_family {
                CodeFamily::Regular { col_weight } => *col_weight = parse_num(key, v)?,
                CodeFamily::Irregular { .. } => return Err("code.col_weight needs code.family = regular".into()),
            },
            "code.variable_degrees" => match &mut self.code_family {
                CodeFamily::Irregular { variable } => *variable = parse_degrees(v)?,
                CodeFamily::Regular { .. } => return Err("code.variable_degrees needs code.family = irregular".into()),
            },
            "code_seed" => self.code_seed = parse_num(key, v)?,
            "coherence_s" => self.coherence_s = parse_num(key, v)?,
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        self.quantizer()?;
        if self.blocks == 0 || self.max_iter == 0 || self.theta_grid == 0 {
            return Err(invalid_config("blocks, max_iter and theta_grid must be positive"));
        }
        if !(self.coherence_s > 0.0) {
            return Err(invalid_config("coherence_s must be positive"));
        }
        if self.snr_f_db.is_nan() {
            return Err(invalid_config("snr_f_db is not a number"));
        }
        let bits = self.quantizer_levels.ilog2() as f64;
        if !(self.rate > 0.0 && self.rate < bits) {
            return Err(invalid_config(format!("rate must lie in (0, {bits})")));
        }
        Ok(())
    }

    pub fn quantizer(&self) -> Result<Quantizer> {
        if !matches!(self.quantizer_levels, 2 | 4) {
            return Err(invalid_config("quantizer.levels must be 2 or 4"));
        }
        match &self.quantizer_thresholds {
            Some(t) => Quantizer::new(self.quantizer_levels, t.clone()),
            None => Quantizer::equiprobable(self.quantizer_levels),
        }
    }

    /// Canonical text form; parsing it gives back the same configuration.
    pub fn to_kv(&self) -> String {
        let ch = &self.channel;
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("m_tones", ch.num_tones.to_string());
        put("bandwidth_hz", ch.bandwidth_hz.to_string());
        put("duration_s", ch.duration_s.to_string());
        put("n_paths", ch.num_paths.to_string());
        put("tau_max_s", ch.max_delay_s.to_string());
        put("pdp_decay_s", ch.pdp_decay_s.to_string());
        put("sigma_h2", ch.total_power.to_string());
        put("profile", match ch.profile {
            PowerProfile::Exponential => "exponential",
            PowerProfile::Flat => "flat",
        }
        .into());
        put("bin_model", match ch.bin_model {
            BinModel::Aggregate => "aggregate",
            BinModel::Sinc => "sinc",
        }
        .into());
        put("quantizer.levels", self.quantizer_levels.to_string());
        put("quantizer.thresholds", self.quantizer_thresholds.as_deref().map_or("equiprobable".into(), join));
        put("snr_f_db", self.snr_f_db.to_string());
        put("blocks", self.blocks.to_string());
        put("rate", self.rate.to_string());
        put("decoding", self.decoding.as_str().into());
        put("phase_mode", match self.phase {
            PhaseMode::None => "none",
            PhaseMode::Constant => "constant",
            PhaseMode::PerBlock => "per_block",
        }
        .into());
        put("theta_grid", self.theta_grid.to_string());
        put("max_iter", self.max_iter.to_string());
        match &self.code_family {
            CodeFamily::Regular { col_weight } => {
                put("code.family", "regular".into());
                put("code.col_weight", col_weight.to_string());
            }
            CodeFamily::Irregular { variable } => {
                put("code.family", "irregular".into());
                let d: Vec<String> = variable.entries.iter().map(|(d, f)| format!("{d}:{f}")).collect();
                put("code.variable_degrees", d.join(","));
            }
        }
        put("code_seed", self.code_seed.to_string());
        put("coherence_s", self.coherence_s.to_string());
        s
    }

    pub fn sweep_template(&self) -> SweepTemplate {
        let mut t = SweepTemplate::new(
            self.channel.clone(),
            self.blocks,
            self.quantizer_levels,
            self.code_family.clone(),
            self.decoding,
        );
        t.max_iter = self.max_iter;
        t.code_seed = self.code_seed;
        t
    }

    pub fn build_code(&self) -> Result<SessionCode> {
        self.sweep_template().code_for_rate(self.rate, 0)
    }

    /// Session configuration at the configured operating point.
    pub fn session_with_code(&self, code: Arc<SessionCode>, seed: u64) -> Result<SessionConfig> {
        let mut s = SessionConfig::new(self.channel.clone(), self.snr_f_db, self.blocks, self.quantizer()?, (*code).clone());
        s.decoding = self.decoding;
        s.phase = self.phase;
        s.theta_grid = self.theta_grid;
        s.max_iter = self.max_iter;
        s.seed = seed;
        s.validate()?;
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_one_file_matches_defaults() {
        let text = "m_tones = 52\nbandwidth_hz = 16.25e6\nduration_s = 3.2e-6 # T\ntau_max_s = 800e-9\n\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.channel.dof(), 13);
        assert_eq!(cfg, ExperimentConfig::default());
    }

    #[test]
    fn canonical_form_roundtrips() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_overrides(&[
            "code.family=irregular",
            "rate=1.0",
            "quantizer.levels=4",
            "quantizer.thresholds=-0.5,0,0.5",
            "phase_mode=per_block",
        ])
        .unwrap();
        assert_eq!(ExperimentConfig::parse(&cfg.to_kv()).unwrap(), cfg);
    }

    #[test]
    fn errors_name_the_line() {
        match ExperimentConfig::parse("m_tones = 52\nbogus = 1\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(ExperimentConfig::parse("m_tones = x").is_err());
        assert!(ExperimentConfig::parse("rate = 1.5").is_err());
        assert!(ExperimentConfig::default().apply_overrides(&["blocks"]).is_err());
        assert!(ExperimentConfig::default().apply_overrides(&["rate=1.0"]).is_err());
    }
}
