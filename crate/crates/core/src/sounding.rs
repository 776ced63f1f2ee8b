//! Two-way channel sounding and observation stacking.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{complex_gaussian, ChannelRealization, SnrProfile};
use crate::error::{invalid_arg, Error, Result};

/// Alice's and Bob's noisy looks at the same coherence block.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementPair {
    pub obs_a: Vec<Complex64>,
    pub obs_b: Vec<Complex64>,
    pub noise_var: f64,
    pub phase_offset: f64,
}

impl MeasurementPair {
    pub fn dof(&self) -> usize {
        self.obs_a.len()
    }
}

/// `obs_a = h + n_A`, `obs_b = h + n_B`, independent noise of variance
/// `sigma_W^2` per complex dimension.
pub fn two_way_sound<R: Rng + ?Sized>(
    realization: &ChannelRealization,
    profile: &SnrProfile,
    rng: &mut R,
) -> Result<MeasurementPair> {
    sound_coefficients(&realization.time_coeffs, profile, rng)
}

/// Same as [`two_way_sound`] but takes the sampled coefficients directly.
pub fn sound_coefficients<R: Rng + ?Sized>(
    h: &[Complex64],
    profile: &SnrProfile,
    rng: &mut R,
) -> Result<MeasurementPair> {
    if h.len() != profile.dof() {
        return Err(Error::LengthMismatch { expected: profile.dof(), got: h.len() });
    }
    let var = profile.noise_var;
    let mut noisy = |h: &Complex64| {
        if var == 0.0 {
            *h
        } else {
            h + complex_gaussian(rng, var)
        }
    };
    let obs_a: Vec<Complex64> = h.iter().map(&mut noisy).collect();
    let obs_b: Vec<Complex64> = h.iter().map(&mut noisy).collect();
    Ok(MeasurementPair { obs_a, obs_b, noise_var: var, phase_offset: 0.0 })
}

/// Rotate Bob's observations by `e^{j theta}`.
pub fn apply_phase_offset(pair: &MeasurementPair, theta: f64) -> Result<MeasurementPair> {
    if !(0.0..std::f64::consts::TAU).contains(&theta) {
        return Err(invalid_arg(format!("phase offset {theta} outside [0, 2pi)")));
    }
    let mut out = pair.clone();
    if theta != 0.0 {
        let rot = Complex64::from_polar(1.0, theta);
        out.obs_b.iter_mut().for_each(|v| *v *= rot);
    }
    out.phase_offset = theta;
    Ok(out)
}

/// Per-block `[Re h_1, Im h_1, ..., Re h_L, Im h_L]` followed by `2(M - L)`
/// zeros, concatenated over `n` blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedObservation {
    pub values: Vec<f64>,
    pub blocks: usize,
    pub per_block_dof: usize,
    pub tones: usize,
}

impl StackedObservation {
    pub fn from_blocks(blocks: &[Vec<Complex64>], tones: usize) -> Result<Self> {
        let l = blocks.first().map_or(0, Vec::len);
        if blocks.iter().any(|b| b.len() != l) {
            return Err(invalid_arg("blocks have differing numbers of coefficients"));
        }
        if l > tones {
            return Err(invalid_arg(format!("L = {l} exceeds M = {tones}")));
        }
        let mut values = Vec::with_capacity(2 * tones * blocks.len());
        for b in blocks {
            for h in b {
                values.push(h.re);
                values.push(h.im);
            }
            values.resize(values.len() + 2 * (tones - l), 0.0);
        }
        Ok(Self { values, blocks: blocks.len(), per_block_dof: l, tones })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn padding_len(&self) -> usize {
        2 * self.blocks * (self.tones - self.per_block_dof)
    }

    /// The `2nL` non-padding entries in stacking order.
    pub fn data(&self) -> Vec<f64> {
        let stride = 2 * self.tones;
        let used = 2 * self.per_block_dof;
        self.values.chunks(stride).flat_map(|c| c[..used].iter().copied()).collect()
    }

    pub fn unstack(&self) -> Vec<Vec<Complex64>> {
        let stride = 2 * self.tones;
        self.values
            .chunks(stride)
            .map(|c| {
                c[..2 * self.per_block_dof]
                    .chunks(2)
                    .map(|p| Complex64::new(p[0], p[1]))
                    .collect()
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("# n,M,L\n");
        let _ = writeln!(s, "# {},{},{}", self.blocks, self.tones, self.per_block_dof);
        for v in &self.values {
            let _ = writeln!(s, "{v:e}");
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut dims = None;
        let mut values = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line == "# n,M,L" {
                continue;
            }
            let parse_err = |msg: String| Error::Parse { line: i + 1, msg };
            if let Some(rest) = line.strip_prefix('#') {
                let parts: Vec<usize> = rest
                    .split(',')
                    .map(|p| p.trim().parse::<usize>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| parse_err(e.to_string()))?;
                if parts.len() != 3 {
                    return Err(parse_err("expected n,M,L".into()));
                }
                dims = Some((parts[0], parts[1], parts[2]));
                continue;
            }
            values.push(line.parse::<f64>().map_err(|e| parse_err(e.to_string()))?);
        }
        let (n, m, l) = dims.ok_or(Error::Parse { line: 1, msg: "missing dimension line".into() })?;
        if l > m || values.len() != 2 * n * m {
            return Err(Error::LengthMismatch { expected: 2 * n * m, got: values.len() });
        }
        Ok(Self { values, blocks: n, per_block_dof: l, tones: m })
    }
}

/// Stack Alice's and Bob's observations over all blocks.
pub fn stack_observations(
    pairs: &[MeasurementPair],
    tones: usize,
) -> Result<(StackedObservation, StackedObservation)> {
    let a: Vec<Vec<Complex64>> = pairs.iter().map(|p| p.obs_a.clone()).collect();
    let b: Vec<Vec<Complex64>> = pairs.iter().map(|p| p.obs_b.clone()).collect();
    Ok((StackedObservation::from_blocks(&a, tones)?, StackedObservation::from_blocks(&b, tones)?))
}
