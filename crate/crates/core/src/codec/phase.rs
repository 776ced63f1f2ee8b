//! Joint phase-offset estimation and syndrome decoding.
//!
//! The factor graph of the offset-free decoder is extended by one θ variable
//! per group of observations, connected to every evidence node in its group.
//! Evidence nodes hold `p(x_i | y_i, θ_b)` for every grid hypothesis `θ_b`,
//! obtained by de-rotating Bob's complex observation.
//!
//! A uniform θ with uniform symbol beliefs is a fixed point of the message
//! updates (every hypothesis explains the data equally before the code has
//! contributed anything), so decoding is started from each grid point in turn
//! with a mild prior on that point. Starts are ordered by how many checks the
//! hypothesis' hard decisions already satisfy, and the first start that meets
//! the syndrome wins.

use std::f64::consts::TAU;

use num_complex::Complex64;

use super::decoder::{decode_binary, decode_quaternary, BinaryEngine, DecodeResult, QuaternaryEngine, SymbolEngine, CONVERGENCE_TOL};
use super::matrix::SparseParityCheck;
use crate::error::{invalid_arg, Error, Result};
use crate::quantize::{conditional_row_into, soft_evidence_normalized, Quantizer};

/// Log-prior weight placed on the starting hypothesis.
const START_PRIOR_NATS: f64 = 8.0;
const FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy)]
pub enum PlaneCodes<'a> {
    Binary {
        code: &'a SparseParityCheck,
        syndrome: &'a [u8],
    },
    Quaternary {
        code_m: &'a SparseParityCheck,
        code_l: &'a SparseParityCheck,
        syndrome_m: &'a [u8],
        syndrome_l: &'a [u8],
    },
}

impl PlaneCodes<'_> {
    fn len(&self) -> usize {
        match self {
            PlaneCodes::Binary { code, .. } => code.cols(),
            PlaneCodes::Quaternary { code_m, .. } => code_m.cols(),
        }
    }

    fn levels(&self) -> usize {
        match self {
            PlaneCodes::Binary { .. } => 2,
            PlaneCodes::Quaternary { .. } => 4,
        }
    }

    fn unsatisfied(&self, x: &[u8]) -> usize {
        match *self {
            PlaneCodes::Binary { code, syndrome } => code.unsatisfied(x, syndrome),
            PlaneCodes::Quaternary { code_m, code_l, syndrome_m, syndrome_l } => {
                let m: Vec<u8> = x.iter().map(|s| s >> 1).collect();
                let l: Vec<u8> = x.iter().map(|s| s & 1).collect();
                code_m.unsatisfied(&m, syndrome_m) + code_l.unsatisfied(&l, syndrome_l)
            }
        }
    }

    fn engine(&self) -> Result<Box<dyn SymbolEngine + '_>> {
        Ok(match *self {
            PlaneCodes::Binary { code, syndrome } => Box::new(BinaryEngine::new(code, syndrome)?),
            PlaneCodes::Quaternary { code_m, code_l, syndrome_m, syndrome_l } => {
                Box::new(QuaternaryEngine::new(code_m, code_l, syndrome_m, syndrome_l)?)
            }
        })
    }
}

pub struct PhaseDecodeInput<'a> {
    pub codes: PlaneCodes<'a>,
    /// Bob's complex observations, each part scaled to unit variance.
    pub obs: &'a [Complex64],
    /// Correlation coefficient of each complex observation.
    pub rho: &'a [f64],
    /// θ group of each complex observation; `None` means a single group.
    pub groups: Option<&'a [usize]>,
    pub quantizer: &'a Quantizer,
    pub grid_size: usize,
    pub max_iter: usize,
}

pub fn grid_angle(index: usize, grid_size: usize) -> f64 {
    TAU * index as f64 / grid_size as f64
}

/// Interleave `[Re, Im]` of each observation.
fn interleave(obs: &[Complex64]) -> Vec<f64> {
    obs.iter().flat_map(|c| [c.re, c.im]).collect()
}

pub fn decode_with_phase_offset(input: &PhaseDecodeInput) -> Result<DecodeResult> {
    let b = input.grid_size;
    if b == 0 {
        return Err(invalid_arg("θ grid is empty"));
    }
    let q = input.codes.levels();
    if input.quantizer.levels() != q {
        return Err(invalid_arg("quantizer and code alphabet disagree"));
    }
    let k = input.obs.len();
    let n = 2 * k;
    if input.codes.len() != n {
        return Err(Error::LengthMismatch { expected: input.codes.len(), got: n });
    }
    if input.rho.len() != k {
        return Err(Error::LengthMismatch { expected: k, got: input.rho.len() });
    }
    let groups: Vec<usize> = match input.groups {
        Some(g) if g.len() != k => return Err(Error::LengthMismatch { expected: k, got: g.len() }),
        Some(g) => g.to_vec(),
        None => vec![0; k],
    };
    let n_groups = groups.iter().copied().max().map_or(0, |g| g + 1);

    if b == 1 {
        // a single hypothesis θ = 0 leaves nothing to estimate
        let rho_sym: Vec<f64> = input.rho.iter().flat_map(|&r| [r, r]).collect();
        let ev = soft_evidence_normalized(&interleave(input.obs), &rho_sym, input.quantizer)?;
        let mut r = match input.codes {
            PlaneCodes::Binary { code, syndrome } => decode_binary(code, syndrome, &ev.binary_llrs(), input.max_iter)?,
            PlaneCodes::Quaternary { code_m, code_l, syndrome_m, syndrome_l } => {
                decode_quaternary(code_m, code_l, syndrome_m, syndrome_l, &ev, input.max_iter)?
            }
        };
        r.theta_hat = vec![0.0; n_groups];
        return Ok(r);
    }

    // table[(i * b + h) * q + a] = p(x_i = a | y_i, θ_h)
    let mut table = vec![0.0; n * b * q];
    for (j, &y) in input.obs.iter().enumerate() {
        for h in 0..b {
            let yr = y * Complex64::from_polar(1.0, -grid_angle(h, b));
            let re = (2 * j * b + h) * q;
            let im = ((2 * j + 1) * b + h) * q;
            conditional_row_into(yr.re, input.rho[j], input.quantizer, &mut table[re..re + q]);
            conditional_row_into(yr.im, input.rho[j], input.quantizer, &mut table[im..im + q]);
        }
    }

    // order starts by how many checks the per-hypothesis hard decisions violate
    let mut starts: Vec<(usize, usize)> = (0..b)
        .map(|h| {
            let x: Vec<u8> = (0..n).map(|i| argmax(&table[(i * b + h) * q..(i * b + h + 1) * q])).collect();
            (input.codes.unsatisfied(&x), h)
        })
        .collect();
    starts.sort();

    let sym_group: Vec<usize> = (0..n).map(|i| groups[i / 2]).collect();
    let mut best: Option<(f64, DecodeResult)> = None;
    for &(_, h0) in &starts {
        let (res, score) = run_from(input, &table, &sym_group, n_groups, h0)?;
        if res.syndrome_satisfied {
            return Ok(res);
        }
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, res));
        }
    }
    Ok(best.expect("at least one start").1)
}

fn argmax(v: &[f64]) -> u8 {
    let mut k = 0;
    for (i, &p) in v.iter().enumerate().skip(1) {
        if p > v[k] {
            k = i;
        }
    }
    k as u8
}

fn run_from(
    input: &PhaseDecodeInput,
    table: &[f64],
    sym_group: &[usize],
    n_groups: usize,
    h0: usize,
) -> Result<(DecodeResult, f64)> {
    let b = input.grid_size;
    let q = input.codes.levels();
    let n = sym_group.len();
    let mut engine = input.codes.engine()?;
    let mut log_g2t = vec![-(b as f64).ln(); n * b];
    let mut belief = vec![0.0; n_groups * b];
    let mut evid = vec![0.0; n * q];
    let mut ext = vec![0.0; n * q];
    let mut x = vec![0u8; n];
    let mut t2g = vec![0.0; b];
    let prior = |h: usize| if h == h0 { START_PRIOR_NATS } else { 0.0 };

    let update_belief = |belief: &mut [f64], log_g2t: &[f64]| {
        for g in 0..n_groups {
            for h in 0..b {
                belief[g * b + h] = prior(h);
            }
        }
        for i in 0..n {
            let g = sym_group[i];
            for h in 0..b {
                belief[g * b + h] += log_g2t[i * b + h];
            }
        }
    };

    let max_iter = input.max_iter.max(1);
    let mut iterations = max_iter;
    let mut satisfied = false;
    let mut converged = false;
    for it in 1..=max_iter {
        update_belief(&mut belief, &log_g2t);
        for i in 0..n {
            let g = sym_group[i];
            let mut mx = f64::NEG_INFINITY;
            for h in 0..b {
                t2g[h] = belief[g * b + h] - log_g2t[i * b + h];
                mx = mx.max(t2g[h]);
            }
            let mut z = 0.0;
            for t in t2g.iter_mut() {
                *t = (*t - mx).exp();
                z += *t;
            }
            let row = &mut evid[i * q..(i + 1) * q];
            row.iter_mut().for_each(|v| *v = 0.0);
            for h in 0..b {
                let w = t2g[h] / z;
                let src = &table[(i * b + h) * q..(i * b + h + 1) * q];
                for a in 0..q {
                    row[a] += w * src[a];
                }
            }
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
        }
        let change = engine.iterate(&evid);
        engine.decide(&evid, &mut x);
        engine.extrinsic(&mut ext);
        for i in 0..n {
            let e = &ext[i * q..(i + 1) * q];
            let mut s = 0.0;
            for h in 0..b {
                let src = &table[(i * b + h) * q..(i * b + h + 1) * q];
                let v: f64 = src.iter().zip(e).map(|(p, w)| p * w).sum();
                t2g[h] = v.max(FLOOR);
                s += t2g[h];
            }
            for h in 0..b {
                log_g2t[i * b + h] = (t2g[h] / s).ln();
            }
        }
        if engine.satisfied(&x) {
            iterations = it;
            satisfied = true;
            converged = true;
            break;
        }
        if change < CONVERGENCE_TOL {
            iterations = it;
            converged = true;
            break;
        }
    }
    update_belief(&mut belief, &log_g2t);
    let theta_idx: Vec<usize> = (0..n_groups)
        .map(|g| {
            let row = &belief[g * b..(g + 1) * b];
            (0..b).fold(0, |k, h| if row[h] > row[k] { h } else { k })
        })
        .collect();
    let score: f64 = (0..n)
        .map(|i| {
            let h = theta_idx[sym_group[i]];
            table[(i * b + h) * q + x[i] as usize].max(FLOOR).ln()
        })
        .sum();
    let res = DecodeResult {
        estimate: x,
        converged,
        iterations,
        syndrome_satisfied: satisfied,
        theta_hat: theta_idx.iter().map(|&h| grid_angle(h, b)).collect(),
    };
    Ok((res, score))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::construct::{construct_irregular, DegreeDistribution};
    use crate::quantize::quantize;
    use crate::rng::SeedStream;
    use rand::Rng;

    fn code(n: usize, m: usize, seed: u64) -> SparseParityCheck {
        let var = DegreeDistribution::single(3);
        let chk = DegreeDistribution::concentrated(3 * n, m).unwrap();
        construct_irregular(n, m, &var, &chk, &mut SeedStream::new(seed).rng()).unwrap()
    }

    #[test]
    fn empty_grid_rejected() {
        let p = code(16, 8, 1);
        let s = vec![0u8; 8];
        let q = Quantizer::equiprobable(2).unwrap();
        let obs = vec![Complex64::new(1.0, 0.0); 8];
        let input = PhaseDecodeInput {
            codes: PlaneCodes::Binary { code: &p, syndrome: &s },
            obs: &obs,
            rho: &[0.9; 8],
            groups: None,
            quantizer: &q,
            grid_size: 0,
            max_iter: 10,
        };
        assert!(decode_with_phase_offset(&input).is_err());
    }

    #[test]
    fn noiseless_on_grid_offsets_are_recovered() {
        // m/N = 0.78 leaves rate below 1/4 and an odd-weight check,
        // so the half-turn is distinguishable from complementing every bit.
        let n = 256;
        let p = code(n, 200, 2);
        let q = Quantizer::equiprobable(2).unwrap();
        let mut rng = SeedStream::new(3).rng();
        for k in 0..8 {
            let h: Vec<Complex64> = (0..n / 2)
                .map(|_| Complex64::new(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0))
                .collect();
            let x = quantize(&interleave(&h), &q).symbols;
            let s = p.syndrome(&x).unwrap();
            let theta = grid_angle(k, 8);
            let obs: Vec<Complex64> = h.iter().map(|v| v * Complex64::from_polar(1.0, theta)).collect();
            let input = PhaseDecodeInput {
                codes: PlaneCodes::Binary { code: &p, syndrome: &s },
                obs: &obs,
                rho: &vec![1.0; n / 2],
                groups: None,
                quantizer: &q,
                grid_size: 8,
                max_iter: 50,
            };
            let r = decode_with_phase_offset(&input).unwrap();
            assert!(r.syndrome_satisfied, "offset index {k}");
            assert_eq!(r.estimate, x);
            assert!((r.theta_hat[0] - theta).abs() < 1e-12);
        }
    }
}
