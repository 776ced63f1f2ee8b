//! Sum-product syndrome decoders.
//!
//! A binary plane runs flooding belief propagation on one parity-check code in
//! the LLR domain, with each check's outgoing sign flipped by its target
//! syndrome bit. Symbol-level decoders (quaternary and the phase-offset
//! decoder) drive planes through the [`SymbolEngine`] interface, exchanging
//! normalised probability vectors per symbol.

use super::matrix::SparseParityCheck;
use crate::error::{Error, Result};
use crate::quantize::{prob_llr, Evidence, LLR_CLAMP};

pub const DEFAULT_MAX_ITER: usize = 50;
pub const CONVERGENCE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    pub estimate: Vec<u8>,
    /// Stopped before `max_iter`, either on a satisfied syndrome or on stalled messages.
    pub converged: bool,
    pub iterations: usize,
    pub syndrome_satisfied: bool,
    /// Phase decoder only: estimated offset per θ group.
    pub theta_hat: Vec<f64>,
}

/// Flattened Tanner graph of one plane with its message state.
#[derive(Debug, Clone)]
pub(crate) struct BinaryPlane<'a> {
    code: &'a SparseParityCheck,
    target: &'a [u8],
    row_ptr: Vec<usize>,
    var_ptr: Vec<usize>,
    var_edge: Vec<u32>,
    c2v: Vec<f64>,
    v2c: Vec<f64>,
    /// Sum of incoming check messages per variable.
    ext: Vec<f64>,
    tanh_buf: Vec<f64>,
    pre_buf: Vec<f64>,
}

impl<'a> BinaryPlane<'a> {
    pub(crate) fn new(code: &'a SparseParityCheck, target: &'a [u8]) -> Result<Self> {
        if target.len() != code.rows() {
            return Err(Error::LengthMismatch { expected: code.rows(), got: target.len() });
        }
        let n = code.cols();
        let mut row_ptr = Vec::with_capacity(code.rows() + 1);
        let mut edge_var = Vec::with_capacity(code.edges());
        row_ptr.push(0);
        for r in 0..code.rows() {
            edge_var.extend_from_slice(code.row(r));
            row_ptr.push(edge_var.len());
        }
        let mut var_ptr = vec![0usize; n + 1];
        for &v in &edge_var {
            var_ptr[v as usize + 1] += 1;
        }
        for v in 0..n {
            var_ptr[v + 1] += var_ptr[v];
        }
        let mut fill = var_ptr.clone();
        let mut var_edge = vec![0u32; edge_var.len()];
        for (e, &v) in edge_var.iter().enumerate() {
            var_edge[fill[v as usize]] = e as u32;
            fill[v as usize] += 1;
        }
        let e = edge_var.len();
        let max_row = code.row_degrees().into_iter().max().unwrap_or(0);
        Ok(Self {
            code,
            target,
            row_ptr,
            var_ptr,
            var_edge,
            c2v: vec![0.0; e],
            v2c: vec![0.0; e],
            ext: vec![0.0; n],
            tanh_buf: vec![0.0; max_row],
            pre_buf: vec![0.0; max_row],
        })
    }

    pub(crate) fn len(&self) -> usize {
        self.ext.len()
    }

    pub(crate) fn extrinsic(&self) -> &[f64] {
        &self.ext
    }

    /// One flooding round given channel LLRs; returns the largest change of
    /// any check-to-variable message.
    pub(crate) fn iterate(&mut self, channel: &[f64]) -> f64 {
        for v in 0..self.ext.len() {
            let total = channel[v] + self.ext[v];
            for &e in &self.var_edge[self.var_ptr[v]..self.var_ptr[v + 1]] {
                let e = e as usize;
                self.v2c[e] = (total - self.c2v[e]).clamp(-LLR_CLAMP, LLR_CLAMP);
            }
        }
        let mut max_change: f64 = 0.0;
        let Self { row_ptr, target, tanh_buf, pre_buf, v2c, c2v, .. } = self;
        for r in 0..row_ptr.len() - 1 {
            let (lo, hi) = (row_ptr[r], row_ptr[r + 1]);
            let d = hi - lo;
            let sign = if target[r] & 1 == 1 { -1.0 } else { 1.0 };
            let t = &mut tanh_buf[..d];
            let pre = &mut pre_buf[..d];
            let mut acc = 1.0;
            for k in 0..d {
                t[k] = (0.5 * v2c[lo + k]).tanh();
                pre[k] = acc;
                acc *= t[k];
            }
            // leave-one-out products without division
            let mut suffix = 1.0;
            for k in (0..d).rev() {
                let p = (pre[k] * suffix).clamp(-1.0 + 1e-15, 1.0 - 1e-15);
                suffix *= t[k];
                let msg = (sign * 2.0 * p.atanh()).clamp(-LLR_CLAMP, LLR_CLAMP);
                max_change = max_change.max((msg - c2v[lo + k]).abs());
                c2v[lo + k] = msg;
            }
        }
        for v in 0..self.ext.len() {
            self.ext[v] = self.var_edge[self.var_ptr[v]..self.var_ptr[v + 1]].iter().map(|&e| self.c2v[e as usize]).sum();
        }
        max_change
    }

    pub(crate) fn hard_decisions(&self, channel: &[f64], out: &mut [u8]) {
        for v in 0..self.ext.len() {
            out[v] = u8::from(channel[v] + self.ext[v] < 0.0);
        }
    }

    pub(crate) fn satisfied(&self, x: &[u8]) -> bool {
        self.code.satisfies(x, self.target)
    }
}

/// Binary coset decoding from per-bit LLRs `ln P(0)/P(1)`.
pub fn decode_binary(code: &SparseParityCheck, syndrome: &[u8], llr: &[f64], max_iter: usize) -> Result<DecodeResult> {
    if llr.len() != code.cols() {
        return Err(Error::LengthMismatch { expected: code.cols(), got: llr.len() });
    }
    let channel: Vec<f64> = llr.iter().map(|l| l.clamp(-LLR_CLAMP, LLR_CLAMP)).collect();
    let mut plane = BinaryPlane::new(code, syndrome)?;
    let mut x = vec![0u8; code.cols()];
    let max_iter = max_iter.max(1);
    for it in 1..=max_iter {
        let change = plane.iterate(&channel);
        plane.hard_decisions(&channel, &mut x);
        if plane.satisfied(&x) {
            return Ok(DecodeResult { estimate: x, converged: true, iterations: it, syndrome_satisfied: true, theta_hat: vec![] });
        }
        if change < CONVERGENCE_TOL {
            return Ok(DecodeResult { estimate: x, converged: true, iterations: it, syndrome_satisfied: false, theta_hat: vec![] });
        }
    }
    Ok(DecodeResult { estimate: x, converged: false, iterations: max_iter, syndrome_satisfied: false, theta_hat: vec![] })
}

/// A code graph that accepts per-symbol evidence and returns per-symbol
/// extrinsic beliefs, both as normalised probability vectors (row-major).
pub(crate) trait SymbolEngine {
    fn len(&self) -> usize;
    /// One round; returns the largest message change.
    fn iterate(&mut self, evidence: &[f64]) -> f64;
    /// Code-side belief about each symbol, excluding its own evidence.
    fn extrinsic(&self, out: &mut [f64]);
    fn decide(&self, evidence: &[f64], out: &mut [u8]);
    fn satisfied(&self, x: &[u8]) -> bool;
}

fn sigmoid(llr: f64) -> f64 {
    1.0 / (1.0 + (-llr).exp())
}

pub(crate) struct BinaryEngine<'a> {
    plane: BinaryPlane<'a>,
    llr: Vec<f64>,
}

impl<'a> BinaryEngine<'a> {
    pub(crate) fn new(code: &'a SparseParityCheck, syndrome: &'a [u8]) -> Result<Self> {
        let plane = BinaryPlane::new(code, syndrome)?;
        let n = plane.len();
        Ok(Self { plane, llr: vec![0.0; n] })
    }
}

impl SymbolEngine for BinaryEngine<'_> {
    fn len(&self) -> usize {
        self.plane.len()
    }

    fn iterate(&mut self, evidence: &[f64]) -> f64 {
        for (l, g) in self.llr.iter_mut().zip(evidence.chunks(2)) {
            *l = prob_llr(g[0], g[1]);
        }
        self.plane.iterate(&self.llr)
    }

    fn extrinsic(&self, out: &mut [f64]) {
        for (o, &e) in out.chunks_mut(2).zip(self.plane.extrinsic()) {
            let p0 = sigmoid(e);
            o[0] = p0;
            o[1] = 1.0 - p0;
        }
    }

    fn decide(&self, evidence: &[f64], out: &mut [u8]) {
        for (i, g) in evidence.chunks(2).enumerate() {
            out[i] = u8::from(prob_llr(g[0], g[1]) + self.plane.extrinsic()[i] < 0.0);
        }
    }

    fn satisfied(&self, x: &[u8]) -> bool {
        self.plane.satisfied(x)
    }
}

/// Two binary planes coupled through per-symbol factors `F_i` enforcing
/// `x = x_L + 2 x_M`.
pub(crate) struct QuaternaryEngine<'a> {
    m: BinaryPlane<'a>,
    l: BinaryPlane<'a>,
    llr_m: Vec<f64>,
    llr_l: Vec<f64>,
}

impl<'a> QuaternaryEngine<'a> {
    pub(crate) fn new(
        pm: &'a SparseParityCheck,
        pl: &'a SparseParityCheck,
        sm: &'a [u8],
        sl: &'a [u8],
    ) -> Result<Self> {
        if pm.cols() != pl.cols() {
            return Err(Error::LengthMismatch { expected: pm.cols(), got: pl.cols() });
        }
        let n = pm.cols();
        Ok(Self {
            m: BinaryPlane::new(pm, sm)?,
            l: BinaryPlane::new(pl, sl)?,
            llr_m: vec![0.0; n],
            llr_l: vec![0.0; n],
        })
    }

    /// `mu_{x_{i,M} -> F_i}` and `mu_{x_{i,L} -> F_i}` as P(bit = 0).
    fn plane_beliefs(&self, i: usize) -> (f64, f64) {
        (sigmoid(self.m.extrinsic()[i]), sigmoid(self.l.extrinsic()[i]))
    }
}

/// Messages from `F_i` to the two bit nodes given symbol evidence `g` and the
/// opposite plane's belief; returned as normalised `(P_M(0), P_L(0))`.
pub(crate) fn factor_to_planes(g: &[f64], pm0: f64, pl0: f64) -> (f64, f64) {
    let (pm1, pl1) = (1.0 - pm0, 1.0 - pl0);
    let m0 = g[0] * pl0 + g[1] * pl1;
    let m1 = g[2] * pl0 + g[3] * pl1;
    let l0 = g[0] * pm0 + g[2] * pm1;
    let l1 = g[1] * pm0 + g[3] * pm1;
    let zm = m0 + m1;
    let zl = l0 + l1;
    let nm = if zm > 0.0 { m0 / zm } else { 0.5 };
    let nl = if zl > 0.0 { l0 / zl } else { 0.5 };
    (nm, nl)
}

fn argmax_lowest(v: &[f64]) -> u8 {
    let mut best = 0;
    for (k, &p) in v.iter().enumerate().skip(1) {
        if p > v[best] {
            best = k;
        }
    }
    best as u8
}

impl SymbolEngine for QuaternaryEngine<'_> {
    fn len(&self) -> usize {
        self.m.len()
    }

    fn iterate(&mut self, evidence: &[f64]) -> f64 {
        for i in 0..self.len() {
            let (pm0, pl0) = self.plane_beliefs(i);
            let (fm0, fl0) = factor_to_planes(&evidence[4 * i..4 * i + 4], pm0, pl0);
            self.llr_m[i] = prob_llr(fm0, 1.0 - fm0);
            self.llr_l[i] = prob_llr(fl0, 1.0 - fl0);
        }
        let a = self.m.iterate(&self.llr_m);
        let b = self.l.iterate(&self.llr_l);
        a.max(b)
    }

    fn extrinsic(&self, out: &mut [f64]) {
        for (i, o) in out.chunks_mut(4).enumerate() {
            let (pm0, pl0) = self.plane_beliefs(i);
            let (pm1, pl1) = (1.0 - pm0, 1.0 - pl0);
            o[0] = pm0 * pl0;
            o[1] = pm0 * pl1;
            o[2] = pm1 * pl0;
            o[3] = pm1 * pl1;
        }
    }

    fn decide(&self, evidence: &[f64], out: &mut [u8]) {
        let mut post = [0.0; 4];
        let mut ext = [0.0; 4];
        for i in 0..self.len() {
            let (pm0, pl0) = self.plane_beliefs(i);
            let (pm1, pl1) = (1.0 - pm0, 1.0 - pl0);
            ext[0] = pm0 * pl0;
            ext[1] = pm0 * pl1;
            ext[2] = pm1 * pl0;
            ext[3] = pm1 * pl1;
            for a in 0..4 {
                post[a] = evidence[4 * i + a] * ext[a];
            }
            out[i] = argmax_lowest(&post);
        }
    }

    fn satisfied(&self, x: &[u8]) -> bool {
        let planes_m: Vec<u8> = x.iter().map(|s| s >> 1).collect();
        let planes_l: Vec<u8> = x.iter().map(|s| s & 1).collect();
        self.m.satisfied(&planes_m) && self.l.satisfied(&planes_l)
    }
}

/// Run an engine with fixed evidence until its syndrome is met, messages
/// stall, or `max_iter` rounds pass.
pub(crate) fn run_fixed<E: SymbolEngine>(engine: &mut E, evidence: &[f64], max_iter: usize) -> DecodeResult {
    let mut x = vec![0u8; engine.len()];
    let max_iter = max_iter.max(1);
    for it in 1..=max_iter {
        let change = engine.iterate(evidence);
        engine.decide(evidence, &mut x);
        if engine.satisfied(&x) {
            return DecodeResult { estimate: x, converged: true, iterations: it, syndrome_satisfied: true, theta_hat: vec![] };
        }
        if change < CONVERGENCE_TOL {
            return DecodeResult { estimate: x, converged: true, iterations: it, syndrome_satisfied: false, theta_hat: vec![] };
        }
    }
    DecodeResult { estimate: x, converged: false, iterations: max_iter, syndrome_satisfied: false, theta_hat: vec![] }
}

/// Quaternary coset decoding over two bit-plane codes.
pub fn decode_quaternary(
    pm: &SparseParityCheck,
    pl: &SparseParityCheck,
    sm: &[u8],
    sl: &[u8],
    evidence: &Evidence,
    max_iter: usize,
) -> Result<DecodeResult> {
    if evidence.levels != 4 {
        return Err(crate::error::invalid_arg("quaternary decoding needs 4-level evidence"));
    }
    if evidence.len() != pm.cols() {
        return Err(Error::LengthMismatch { expected: pm.cols(), got: evidence.len() });
    }
    let mut engine = QuaternaryEngine::new(pm, pl, sm, sl)?;
    Ok(run_fixed(&mut engine, &evidence.probs, max_iter))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::construct::construct_regular;
    use crate::rng::SeedStream;
    use rand::Rng;

    #[test]
    fn saturated_evidence_decodes_in_one_iteration() {
        let p = construct_regular(96, 48, 3, &mut SeedStream::new(1).rng()).unwrap();
        let mut rng = SeedStream::new(2).rng();
        let x: Vec<u8> = (0..96).map(|_| rng.random_range(0..2)).collect();
        let s = p.syndrome(&x).unwrap();
        let llr: Vec<f64> = x.iter().map(|&b| if b == 0 { f64::INFINITY } else { f64::NEG_INFINITY }).collect();
        let r = decode_binary(&p, &s, &llr, 50).unwrap();
        assert_eq!(r.estimate, x);
        assert_eq!(r.iterations, 1);
        assert!(r.syndrome_satisfied && r.converged);
    }

    #[test]
    fn three_bit_coset_example() {
        let p = SparseParityCheck::from_rows(3, vec![vec![0, 1], vec![1, 2]]).unwrap();
        let s = p.syndrome(&[1, 1, 1]).unwrap();
        // strong belief in 1,1 on the first two bits, weak 0 on the third
        let llr = [-4.0, -4.0, 0.5];
        let r = decode_binary(&p, &s, &llr, 50).unwrap();
        assert_eq!(r.estimate, vec![1, 1, 1]);
        assert!(r.syndrome_satisfied);
    }

    #[test]
    fn factor_message_matches_worked_example() {
        let g = [0.1, 0.2, 0.3, 0.4];
        let (pm0, pl0) = (0.6, 0.7);
        let (fm0, _) = factor_to_planes(&g, pm0, pl0);
        let one = g[2] * pl0 + g[3] * (1.0 - pl0);
        let zero = g[0] * pl0 + g[1] * (1.0 - pl0);
        assert!(((1.0 - fm0) - one / (one + zero)).abs() < 1e-12);
    }

    #[test]
    fn quaternary_point_mass_evidence() {
        let p = construct_regular(64, 32, 3, &mut SeedStream::new(3).rng()).unwrap();
        let mut rng = SeedStream::new(4).rng();
        let x: Vec<u8> = (0..64).map(|_| rng.random_range(0..4)).collect();
        let (m, l) = crate::quantize::bit_planes(&x).unwrap();
        let (sm, sl) = (p.syndrome(&m).unwrap(), p.syndrome(&l).unwrap());
        let ev = Evidence::deterministic(4, &x);
        let r = decode_quaternary(&p, &p, &sm, &sl, &ev, 50).unwrap();
        assert_eq!(r.estimate, x);
        assert_eq!(r.iterations, 1);
    }
}
