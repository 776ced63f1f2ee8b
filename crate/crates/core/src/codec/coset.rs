//! Key extraction: the index of a word within its syndrome coset.

use super::matrix::SparseParityCheck;
use crate::error::{invalid_arg, Error, Result};

fn words(bits: usize) -> usize {
    bits.div_ceil(64)
}

fn get(row: &[u64], i: usize) -> bool {
    row[i / 64] >> (i % 64) & 1 == 1
}

fn flip(row: &mut [u64], i: usize) {
    row[i / 64] ^= 1 << (i % 64);
}

fn xor_into(dst: &mut [u64], src: &[u64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d ^= s;
    }
}

fn parity_dot(row: &[u64], bits: &[u64]) -> u8 {
    (row.iter().zip(bits).map(|(a, b)| (a & b).count_ones()).sum::<u32>() & 1) as u8
}

fn pack(x: &[u8]) -> Vec<u64> {
    let mut out = vec![0u64; words(x.len())];
    for (i, &b) in x.iter().enumerate() {
        if b & 1 == 1 {
            flip(&mut out, i);
        }
    }
    out
}

/// Row-reduced form of a parity-check matrix, computed once per code.
///
/// Pivot columns are chosen greedily left to right; the remaining
/// (information) columns carry the key, so for `P = [I | A]` the key is the
/// last `N - m` bits.
#[derive(Debug, Clone)]
pub struct CosetIndexer {
    cols: usize,
    checks: usize,
    pivots: Vec<usize>,
    info: Vec<usize>,
    /// Reduced rows `T P`, one per pivot.
    reduced: Vec<Vec<u64>>,
    /// Row transform `T`, all `m` rows; rows past the rank span the left kernel.
    transform: Vec<Vec<u64>>,
}

impl CosetIndexer {
    pub fn new(code: &SparseParityCheck) -> Self {
        let (n, m) = (code.cols(), code.rows());
        let mut rows: Vec<Vec<u64>> = (0..m)
            .map(|r| {
                let mut v = vec![0u64; words(n)];
                for &c in code.row(r) {
                    flip(&mut v, c as usize);
                }
                v
            })
            .collect();
        let mut tf: Vec<Vec<u64>> = (0..m)
            .map(|r| {
                let mut v = vec![0u64; words(m)];
                flip(&mut v, r);
                v
            })
            .collect();
        let mut pivots = Vec::new();
        let mut next = 0;
        for col in 0..n {
            if next == m {
                break;
            }
            let Some(p) = (next..m).find(|&r| get(&rows[r], col)) else { continue };
            rows.swap(next, p);
            tf.swap(next, p);
            let (pr, pt) = (rows[next].clone(), tf[next].clone());
            for r in 0..m {
                if r != next && get(&rows[r], col) {
                    xor_into(&mut rows[r], &pr);
                    xor_into(&mut tf[r], &pt);
                }
            }
            pivots.push(col);
            next += 1;
        }
        let rank = pivots.len();
        let mut is_pivot = vec![false; n];
        pivots.iter().for_each(|&c| is_pivot[c] = true);
        let info = (0..n).filter(|&c| !is_pivot[c]).collect();
        rows.truncate(rank);
        Self { cols: n, checks: m, pivots, info, reduced: rows, transform: tf }
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    /// Checks beyond the rank; zero for full-rank codes.
    pub fn rank_deficiency(&self) -> usize {
        self.checks - self.rank()
    }

    pub fn key_len(&self) -> usize {
        self.info.len()
    }

    pub fn info_positions(&self) -> &[usize] {
        &self.info
    }

    pub fn key(&self, x: &[u8]) -> Result<Vec<u8>> {
        if x.len() != self.cols {
            return Err(Error::LengthMismatch { expected: self.cols, got: x.len() });
        }
        Ok(self.info.iter().map(|&c| x[c] & 1).collect())
    }

    /// The unique word with syndrome `s` and key `key`.
    pub fn word(&self, s: &[u8], key: &[u8]) -> Result<Vec<u8>> {
        if s.len() != self.checks {
            return Err(Error::LengthMismatch { expected: self.checks, got: s.len() });
        }
        if key.len() != self.key_len() {
            return Err(Error::LengthMismatch { expected: self.key_len(), got: key.len() });
        }
        let sp = pack(s);
        if self.transform[self.rank()..].iter().any(|t| parity_dot(t, &sp) == 1) {
            return Err(invalid_arg("syndrome is outside the column space"));
        }
        let mut x = vec![0u8; self.cols];
        for (&c, &k) in self.info.iter().zip(key) {
            x[c] = k & 1;
        }
        let xp = pack(&x);
        for (i, &p) in self.pivots.iter().enumerate() {
            x[p] = parity_dot(&self.transform[i], &sp) ^ parity_dot(&self.reduced[i], &xp);
        }
        Ok(x)
    }
}

/// Key bits of `x` under `code`'s systematic form.
pub fn coset_index(code: &SparseParityCheck, x: &[u8]) -> Result<Vec<u8>> {
    CosetIndexer::new(code).key(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::construct::construct_regular;
    use crate::rng::SeedStream;
    use rand::Rng;

    #[test]
    fn systematic_matrix_keys_on_tail() {
        // P = [I_3 | A]
        let p = SparseParityCheck::from_rows(6, vec![vec![0, 3, 4], vec![1, 4, 5], vec![2, 3, 5]]).unwrap();
        let x = [1, 0, 1, 1, 0, 1];
        assert_eq!(coset_index(&p, &x).unwrap(), vec![1, 0, 1]);
    }

    #[test]
    fn word_inverts_key() {
        let p = construct_regular(60, 30, 3, &mut SeedStream::new(8).rng()).unwrap();
        let idx = CosetIndexer::new(&p);
        let mut rng = SeedStream::new(9).rng();
        for _ in 0..20 {
            let x: Vec<u8> = (0..60).map(|_| rng.random_range(0..2)).collect();
            let s = p.syndrome(&x).unwrap();
            let k = idx.key(&x).unwrap();
            assert_eq!(idx.word(&s, &k).unwrap(), x);
        }
    }

    #[test]
    fn rank_deficient_code_shortens_key() {
        // third row is the sum of the first two
        let p = SparseParityCheck::from_rows(5, vec![vec![0, 1], vec![1, 2, 3], vec![0, 2, 3], vec![3, 4]]).unwrap();
        let idx = CosetIndexer::new(&p);
        assert_eq!(idx.rank(), 3);
        assert_eq!(idx.rank_deficiency(), 1);
        assert_eq!(idx.key_len(), 2);
    }
}
