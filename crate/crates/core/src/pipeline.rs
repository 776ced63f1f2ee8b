//! End-to-end key agreement: sounding, quantization, syndrome exchange,
//! decoding and key extraction.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;

use crate::capacity::csi_capacity;
use crate::channel::{build_snr_profile, build_snr_profile_linear, realize_time, ChannelConfig, SnrProfile};
use crate::codec::{
    construct_irregular, construct_regular, decode_binary, decode_quaternary, decode_with_phase_offset, grid_angle, CosetIndexer, DecodeResult, DegreeDistribution, PhaseDecodeInput,
    PlaneCodes, SparseParityCheck, DEFAULT_MAX_ITER, DEFAULT_THETA_GRID,
};
use crate::error::{invalid_config, Result};
use crate::quantize::{hard_evidence_per_position, quantize, soft_evidence_normalized, QuantizedBlock, Quantizer};
use crate::rng::{label, SeedStream};
use crate::sounding::{sound_coefficients, MeasurementPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodingMode {
    Soft,
    Hard,
}

impl DecodingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DecodingMode::Soft => "soft",
            DecodingMode::Hard => "hard",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseMode {
    None,
    /// One offset for the whole session.
    Constant,
    /// An independent offset per coherence block.
    PerBlock,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SessionCode {
    Binary(Arc<SparseParityCheck>),
    Quaternary { m: Arc<SparseParityCheck>, l: Arc<SparseParityCheck> },
}

impl SessionCode {
    pub fn len(&self) -> usize {
        match self {
            SessionCode::Binary(p) => p.cols(),
            SessionCode::Quaternary { m, .. } => m.cols(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn levels(&self) -> usize {
        match self {
            SessionCode::Binary(_) => 2,
            SessionCode::Quaternary { .. } => 4,
        }
    }

    pub fn public_bits(&self) -> usize {
        match self {
            SessionCode::Binary(p) => p.rows(),
            SessionCode::Quaternary { m, l } => m.rows() + l.rows(),
        }
    }

    /// Key bits per data symbol.
    pub fn rate(&self) -> f64 {
        let n = self.len() as f64;
        match self {
            SessionCode::Binary(_) | SessionCode::Quaternary { .. } => {
                (self.levels().ilog2() as f64 * n - self.public_bits() as f64) / n
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub channel: ChannelConfig,
    /// Per-tone SNR in dB; `+inf` gives a noiseless link.
    pub snr_f_db: f64,
    pub blocks: usize,
    pub quantizer: Quantizer,
    pub code: SessionCode,
    pub decoding: DecodingMode,
    pub phase: PhaseMode,
    pub theta_grid: usize,
    /// Apply this offset instead of drawing one uniformly from the grid.
    pub fixed_theta: Option<f64>,
    /// Let Bob estimate the offset; when false he decodes as if there were none.
    pub theta_node: bool,
    pub max_iter: usize,
    pub seed: u64,
}

impl SessionConfig {
    pub fn new(channel: ChannelConfig, snr_f_db: f64, blocks: usize, quantizer: Quantizer, code: SessionCode) -> Self {
        Self {
            channel,
            snr_f_db,
            blocks,
            quantizer,
            code,
            decoding: DecodingMode::Soft,
            phase: PhaseMode::None,
            theta_grid: DEFAULT_THETA_GRID,
            fixed_theta: None,
            theta_node: true,
            max_iter: DEFAULT_MAX_ITER,
            seed: 0,
        }
    }

    pub fn data_len(&self) -> usize {
        2 * self.blocks * self.channel.dof()
    }

    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        if self.blocks == 0 {
            return Err(invalid_config("need at least one block"));
        }
        if self.snr_f_db.is_nan() || self.snr_f_db == f64::NEG_INFINITY {
            return Err(invalid_config("snr_f_db must be a number above -inf"));
        }
        if self.data_len() != self.code.len() {
            return Err(invalid_config(format!(
                "data length 2nL = {} does not match code length {}",
                self.data_len(),
                self.code.len()
            )));
        }
        if let SessionCode::Quaternary { m, l } = &self.code {
            if m.cols() != l.cols() {
                return Err(invalid_config("plane codes differ in length"));
            }
        }
        if self.quantizer.levels() != self.code.levels() {
            return Err(invalid_config("quantizer levels do not match the code alphabet"));
        }
        if self.phase != PhaseMode::None && self.theta_node && self.decoding == DecodingMode::Hard {
            return Err(invalid_config("phase-offset estimation needs soft decoding"));
        }
        if self.theta_grid == 0 {
            return Err(invalid_config("θ grid must have at least one point"));
        }
        if let Some(t) = self.fixed_theta {
            if !(0.0..TAU).contains(&t) {
                return Err(invalid_config("fixed θ must lie in [0, 2π)"));
            }
        }
        Ok(())
    }

    pub fn profile(&self) -> Result<SnrProfile> {
        if self.snr_f_db == f64::INFINITY {
            build_snr_profile_linear(&self.channel, f64::INFINITY)
        } else {
            build_snr_profile(&self.channel, self.snr_f_db)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeySessionResult {
    pub seed: u64,
    pub alice: QuantizedBlock,
    /// Public message: one syndrome, or M-plane then L-plane syndromes.
    pub syndromes: Vec<Vec<u8>>,
    pub decoded: DecodeResult,
    pub key_a: Vec<u8>,
    pub key_b: Vec<u8>,
    pub agreed: bool,
    pub bit_error_rate: f64,
    pub key_length: usize,
    pub public_message_length: usize,
    /// Information the syndrome reveals about the key; zero by the coset argument.
    pub leakage_bound: f64,
    /// Monobit z-score of Alice's key.
    pub uniformity_stat: f64,
    pub symbol_errors: usize,
    /// Applied offsets, one per θ group.
    pub theta: Vec<f64>,
    /// Mean wrapped |θ̂ − θ| when Bob estimates the offset.
    pub theta_error: Option<f64>,
}

impl KeySessionResult {
    pub fn log_line(&self, snr_db: f64, rate: f64, mode: &str) -> String {
        format!(
            "{}, {}, {:.4}, {}, {}, {:.6e}, {}, {}",
            self.seed,
            snr_db,
            rate,
            mode,
            self.agreed,
            self.bit_error_rate,
            self.key_length,
            self.decoded.iterations
        )
    }
}

pub fn monobit_z(bits: &[u8]) -> f64 {
    if bits.is_empty() {
        return 0.0;
    }
    let ones = bits.iter().filter(|&&b| b == 1).count() as f64;
    (2.0 * ones - bits.len() as f64) / (bits.len() as f64).sqrt()
}

pub fn bits_to_hex(bits: &[u8]) -> String {
    let mut s = String::with_capacity(bits.len().div_ceil(4));
    for chunk in bits.chunks(8) {
        let byte = chunk.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | ((b & 1) << (7 - i)));
        let _ = write!(s, "{byte:02x}");
    }
    s
}

fn wrapped_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// A validated session configuration with its coset indexers prepared.
#[derive(Debug, Clone)]
pub struct KeySession {
    config: SessionConfig,
    profile: SnrProfile,
    indexers: Vec<CosetIndexer>,
    /// Per data position: scale to unit variance and correlation.
    scale: Vec<f64>,
    rho: Vec<f64>,
}

impl KeySession {
    pub fn new(config: SessionConfig) -> Result<Self> {
        config.validate()?;
        let profile = config.profile()?;
        let indexers = match &config.code {
            SessionCode::Binary(p) => vec![CosetIndexer::new(p)],
            SessionCode::Quaternary { m, l } => vec![CosetIndexer::new(m), CosetIndexer::new(l)],
        };
        let l = config.channel.dof();
        let mut scale = Vec::with_capacity(config.data_len());
        let mut rho = Vec::with_capacity(config.data_len());
        for _ in 0..config.blocks {
            for b in 0..l {
                let s = ((profile.bin_var[b] + profile.noise_var) / 2.0).sqrt();
                scale.extend([s, s]);
                rho.extend([profile.rho_time[b], profile.rho_time[b]]);
            }
        }
        Ok(Self { config, profile, indexers, scale, rho })
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn profile(&self) -> &SnrProfile {
        &self.profile
    }

    /// Shortfall of key bits caused by rank-deficient parity checks.
    pub fn rank_deficiency(&self) -> usize {
        self.indexers.iter().map(CosetIndexer::rank_deficiency).sum()
    }

    pub fn key_length(&self) -> usize {
        self.indexers.iter().map(CosetIndexer::key_len).sum()
    }

    fn keys(&self, block: &QuantizedBlock) -> Result<Vec<u8>> {
        let mut key = self.indexers[0].key(&block.plane_m)?;
        if let Some(ix) = self.indexers.get(1) {
            key.extend(ix.key(&block.plane_l)?);
        }
        Ok(key)
    }

    fn draw_offsets(&self, seeds: &SeedStream) -> Vec<f64> {
        let cfg = &self.config;
        let groups = match cfg.phase {
            PhaseMode::None => return vec![0.0],
            PhaseMode::Constant => 1,
            PhaseMode::PerBlock => cfg.blocks,
        };
        (0..groups)
            .map(|g| match cfg.fixed_theta {
                Some(t) => t,
                None => {
                    let mut rng = seeds.path(&[label::PHASE, g as u64]).rng();
                    grid_angle(rng.random_range(0..cfg.theta_grid), cfg.theta_grid)
                }
            })
            .collect()
    }

    /// Sounding for every block: Alice's and Bob's raw sampled coefficients.
    pub fn sound(&self, seed: u64) -> Result<(Vec<MeasurementPair>, Vec<f64>)> {
        let seeds = SeedStream::new(seed);
        let offsets = self.draw_offsets(&seeds);
        let mut pairs = Vec::with_capacity(self.config.blocks);
        for b in 0..self.config.blocks {
            let h = realize_time(&self.config.channel, &mut seeds.path(&[label::CHANNEL, b as u64]).rng())?;
            let mut pair = sound_coefficients(&h, &self.profile, &mut seeds.path(&[label::NOISE, b as u64]).rng())?;
            let theta = match self.config.phase {
                PhaseMode::None => 0.0,
                PhaseMode::Constant => offsets[0],
                PhaseMode::PerBlock => offsets[b],
            };
            if theta != 0.0 {
                pair = crate::sounding::apply_phase_offset(&pair, theta)?;
            }
            pairs.push(pair);
        }
        Ok((pairs, offsets))
    }

    pub fn run(&self, seed: u64) -> Result<KeySessionResult> {
        let cfg = &self.config;
        let (pairs, offsets) = self.sound(seed)?;
        let n = cfg.data_len();
        let l = cfg.channel.dof();

        // unit-variance views of both sides; complex for Bob so offsets can be undone
        let mut za = Vec::with_capacity(n);
        let mut yb = Vec::with_capacity(n / 2);
        for p in &pairs {
            for (k, (a, b)) in p.obs_a.iter().zip(&p.obs_b).enumerate() {
                let s = self.scale[2 * k];
                za.extend([a.re / s, a.im / s]);
                yb.push(b / s);
            }
        }
        let alice = quantize(&za, &cfg.quantizer);
        let syndromes: Vec<Vec<u8>> = match &cfg.code {
            SessionCode::Binary(p) => vec![p.syndrome(&alice.plane_m)?],
            SessionCode::Quaternary { m, l } => vec![m.syndrome(&alice.plane_m)?, l.syndrome(&alice.plane_l)?],
        };
        let key_a = self.keys(&alice)?;

        let estimate_phase = cfg.phase != PhaseMode::None && cfg.theta_node;
        let decoded = if estimate_phase {
            let groups: Option<Vec<usize>> =
                (cfg.phase == PhaseMode::PerBlock).then(|| (0..n / 2).map(|k| k / l).collect());
            let rho_c: Vec<f64> = self.rho.iter().step_by(2).copied().collect();
            let codes = match &cfg.code {
                SessionCode::Binary(p) => PlaneCodes::Binary { code: p, syndrome: &syndromes[0] },
                SessionCode::Quaternary { m, l } => PlaneCodes::Quaternary {
                    code_m: m,
                    code_l: l,
                    syndrome_m: &syndromes[0],
                    syndrome_l: &syndromes[1],
                },
            };
            decode_with_phase_offset(&PhaseDecodeInput {
                codes,
                obs: &yb,
                rho: &rho_c,
                groups: groups.as_deref(),
                quantizer: &cfg.quantizer,
                grid_size: cfg.theta_grid,
                max_iter: cfg.max_iter,
            })?
        } else {
            let zb: Vec<f64> = yb.iter().flat_map(|c: &Complex64| [c.re, c.im]).collect();
            let evidence = match cfg.decoding {
                DecodingMode::Soft => soft_evidence_normalized(&zb, &self.rho, &cfg.quantizer)?,
                DecodingMode::Hard => {
                    let bob = quantize(&zb, &cfg.quantizer);
                    hard_evidence_per_position(&bob.symbols, &self.rho, &cfg.quantizer)?
                }
            };
            match &cfg.code {
                SessionCode::Binary(p) => decode_binary(p, &syndromes[0], &evidence.binary_llrs(), cfg.max_iter)?,
                SessionCode::Quaternary { m, l } => {
                    decode_quaternary(m, l, &syndromes[0], &syndromes[1], &evidence, cfg.max_iter)?
                }
            }
        };

        let bob = QuantizedBlock::from_symbols(cfg.quantizer.levels(), decoded.estimate.clone())?;
        let key_b = self.keys(&bob)?;
        let errors = key_a.iter().zip(&key_b).filter(|(a, b)| a != b).count();
        let key_length = key_a.len();
        let symbol_errors = alice.symbols.iter().zip(&bob.symbols).filter(|(a, b)| a != b).count();
        let theta_error = (estimate_phase && decoded.theta_hat.len() == offsets.len()).then(|| {
            offsets.iter().zip(&decoded.theta_hat).map(|(t, h)| wrapped_distance(*t, *h)).sum::<f64>() / offsets.len() as f64
        });
        Ok(KeySessionResult {
            seed,
            uniformity_stat: monobit_z(&key_a),
            agreed: key_a == key_b,
            bit_error_rate: if key_length == 0 { 0.0 } else { errors as f64 / key_length as f64 },
            key_length,
            public_message_length: cfg.code.public_bits(),
            leakage_bound: 0.0,
            symbol_errors,
            theta: offsets,
            theta_error,
            alice,
            syndromes,
            decoded,
            key_a,
            key_b,
        })
    }
}

pub fn run_session(config: SessionConfig) -> Result<KeySessionResult> {
    let seed = config.seed;
    KeySession::new(config)?.run(seed)
}

/// Post-decoding key BER that counts as a successful operating point.
pub const TARGET_BER: f64 = 1e-3;

/// How parity checks are drawn for each rate in a sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum CodeFamily {
    Regular { col_weight: usize },
    Irregular { variable: DegreeDistribution },
}

impl CodeFamily {
    pub fn is_regular(&self) -> bool {
        matches!(self, CodeFamily::Regular { .. })
    }

    /// One plane's parity checks for length `n` at plane rate `plane_rate`.
    pub fn build(&self, n: usize, plane_rate: f64, seed: u64) -> Result<SparseParityCheck> {
        if !(plane_rate > 0.0 && plane_rate < 1.0) {
            return Err(invalid_config(format!("plane rate {plane_rate} outside (0, 1)")));
        }
        let m = (n as f64 * (1.0 - plane_rate)).round() as usize;
        let mut rng = SeedStream::new(seed).path(&[label::CODE]).rng();
        match self {
            CodeFamily::Regular { col_weight } => construct_regular(n, m, *col_weight, &mut rng),
            CodeFamily::Irregular { variable } => {
                let variable = cap_degree_two(variable, n, m);
                let variable = &variable;
                let edges: usize = variable.counts(n).iter().map(|&(d, c)| d * c).sum();
                let checks = DegreeDistribution::concentrated(edges, m)?;
                construct_irregular(n, m, variable, &checks, &mut rng)
            }
        }
    }
}

/// More degree-2 variables than checks forces cycles among them and low
/// weight codewords; the excess moves to degree 3.
fn cap_degree_two(variable: &DegreeDistribution, n: usize, m: usize) -> DegreeDistribution {
    let limit = (m.saturating_sub(1)) as f64 / n as f64;
    let Some(two) = variable.entries.iter().find(|e| e.0 == 2).map(|e| e.1) else { return variable.clone() };
    if two <= limit {
        return variable.clone();
    }
    let excess = two - limit;
    let mut entries: Vec<(usize, f64)> = variable.entries.iter().map(|&(d, f)| (d, if d == 2 { limit } else { f })).collect();
    match entries.iter_mut().find(|e| e.0 == 3) {
        Some(e) => e.1 += excess,
        None => entries.push((3, excess)),
    }
    DegreeDistribution { entries }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTemplate {
    pub channel: ChannelConfig,
    pub blocks: usize,
    /// Quantizer alphabet; 4 uses the same code on both bit planes.
    pub levels: usize,
    pub family: CodeFamily,
    pub decoding: DecodingMode,
    pub max_iter: usize,
    pub code_seed: u64,
    /// Trial seeds depend only on this, the SNR index and the trial index,
    /// so variants sharing it see the same channels.
    pub seed: u64,
    /// Stop a rate's scan after this many consecutive passing points; 0 scans the whole grid.
    pub stop_after_pass: usize,
}

impl SweepTemplate {
    pub fn new(channel: ChannelConfig, blocks: usize, levels: usize, family: CodeFamily, decoding: DecodingMode) -> Self {
        Self {
            channel,
            blocks,
            levels,
            family,
            decoding,
            max_iter: DEFAULT_MAX_ITER,
            code_seed: 1,
            seed: 0,
            stop_after_pass: 0,
        }
    }

    pub fn code_length(&self) -> usize {
        2 * self.blocks * self.channel.dof()
    }

    pub fn code_for_rate(&self, rate: f64, index: usize) -> Result<SessionCode> {
        let n = self.code_length();
        let seed = SeedStream::new(self.code_seed).child(index as u64).key();
        Ok(match self.levels {
            2 => SessionCode::Binary(Arc::new(self.family.build(n, rate, seed)?)),
            4 => {
                let p = Arc::new(self.family.build(n, rate / 2.0, seed)?);
                SessionCode::Quaternary { m: p.clone(), l: p }
            }
            q => return Err(invalid_config(format!("unsupported alphabet size {q}"))),
        })
    }
}

/// Key rates (bits per data symbol) swept by default: from 0.25 up.
pub fn default_rates(levels: usize) -> Vec<f64> {
    let scale = levels.ilog2() as f64;
    [0.25, 0.5, 0.75].iter().map(|r| r * scale).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub rate: f64,
    pub snr_db: f64,
    /// Sessions run; fewer than requested when the target became unreachable.
    pub trials: usize,
    pub agreed: usize,
    pub bit_errors: usize,
    pub key_bits: usize,
    pub mean_iterations: f64,
    pub passed: bool,
}

impl SweepPoint {
    pub fn ber(&self) -> f64 {
        if self.key_bits == 0 {
            0.0
        } else {
            self.bit_errors as f64 / self.key_bits as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub points: Vec<SweepPoint>,
    /// `(rate, threshold)` in the order the rates were given; the threshold is
    /// the lowest SNR from which every scanned point passes.
    pub thresholds: Vec<(f64, Option<f64>)>,
}

impl SweepTable {
    pub fn threshold(&self, rate: f64) -> Option<f64> {
        self.thresholds.iter().find(|t| (t.0 - rate).abs() < 1e-12).and_then(|t| t.1)
    }

    /// Largest swept rate whose threshold is at or below `snr_db`.
    pub fn throughput(&self, snr_db: f64) -> f64 {
        self.thresholds
            .iter()
            .filter(|t| t.1.is_some_and(|s| s <= snr_db))
            .map(|t| t.0)
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self, variant: &str) -> String {
        let mut s = String::new();
        for p in &self.points {
            let _ = writeln!(
                s,
                "{variant},{},{},{},{},{:.6e},{:.2},{}",
                p.rate,
                p.snr_db,
                p.trials,
                p.agreed,
                p.ber(),
                p.mean_iterations,
                p.passed
            );
        }
        s
    }
}

pub const SWEEP_CSV_HEADER: &str = "variant,rate,snr_db,trials,agreed,ber,mean_iterations,passed";

pub fn sweep_rate_vs_snr(template: &SweepTemplate, rates: &[f64], snr_grid: &[f64], trials: usize) -> Result<SweepTable> {
    if trials < 50 {
        return Err(invalid_config("a sweep needs at least 50 trials per point"));
    }
    let mut grid = snr_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let seeds = SeedStream::new(template.seed);
    let mut points = Vec::new();
    let mut thresholds = Vec::new();
    for (ri, &rate) in rates.iter().enumerate() {
        let code = template.code_for_rate(rate, ri)?;
        let mut threshold = None;
        let mut streak = 0;
        for (si, &snr) in grid.iter().enumerate() {
            let mut cfg = SessionConfig::new(
                template.channel.clone(),
                snr,
                template.blocks,
                Quantizer::equiprobable(template.levels)?,
                code.clone(),
            );
            cfg.decoding = template.decoding;
            cfg.max_iter = template.max_iter;
            let session = KeySession::new(cfg)?;
            let budget = (TARGET_BER * (trials * session.key_length()) as f64).floor() as usize;
            let mut pt = SweepPoint {
                rate,
                snr_db: snr,
                trials: 0,
                agreed: 0,
                bit_errors: 0,
                key_bits: 0,
                mean_iterations: 0.0,
                passed: false,
            };
            let mut iters = 0;
            for t in 0..trials {
                let r = session.run(seeds.path(&[label::TRIAL, si as u64, t as u64]).key())?;
                pt.trials += 1;
                pt.agreed += r.agreed as usize;
                pt.bit_errors += r.key_a.iter().zip(&r.key_b).filter(|(a, b)| a != b).count();
                pt.key_bits += r.key_length;
                iters += r.decoded.iterations;
                if pt.bit_errors > budget {
                    break;
                }
            }
            pt.mean_iterations = iters as f64 / pt.trials as f64;
            pt.passed = pt.trials == trials && pt.bit_errors <= budget;
            // the threshold opens the run of passing points that reaches the end of the scan
            if pt.passed {
                threshold.get_or_insert(snr);
                streak += 1;
            } else {
                threshold = None;
                streak = 0;
            }
            points.push(pt);
            if template.stop_after_pass > 0 && streak >= template.stop_after_pass {
                break;
            }
        }
        thresholds.push((rate, threshold));
    }
    Ok(SweepTable { points, thresholds })
}

/// CSI capacity in key bits per data symbol: bits per coherence over `2L`.
pub fn capacity_per_data_symbol(channel: &ChannelConfig, snr_f_db: f64) -> Result<f64> {
    let profile = build_snr_profile(channel, snr_f_db)?;
    let report = csi_capacity(&profile, channel.num_tones);
    Ok(report.bits_per_coherence / (2 * channel.dof()) as f64)
}
