//! Parity-check codes, syndromes, coset keys and the sum-product decoders.

mod construct;
mod coset;
mod decoder;
mod matrix;
mod phase;

pub use construct::{construct_irregular, construct_regular, DegreeDistribution};
pub use coset::{coset_index, CosetIndexer};
pub use decoder::{decode_binary, decode_quaternary, DecodeResult, CONVERGENCE_TOL, DEFAULT_MAX_ITER};
pub use matrix::SparseParityCheck;
pub use phase::{decode_with_phase_offset, grid_angle, PhaseDecodeInput, PlaneCodes};

pub const DEFAULT_THETA_GRID: usize = 16;

pub fn syndrome(code: &SparseParityCheck, x: &[u8]) -> crate::Result<Vec<u8>> {
    code.syndrome(x)
}
