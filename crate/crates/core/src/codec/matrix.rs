use std::fmt::Write as _;

use crate::error::{invalid_arg, Error, Result};

/// Sparse binary parity-check matrix stored by rows and by columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseParityCheck {
    cols: usize,
    rows: Vec<Vec<u32>>,
    col_rows: Vec<Vec<u32>>,
}

impl SparseParityCheck {
    /// Build from per-row column supports. Rows are sorted; duplicates and
    /// empty columns are rejected.
    pub fn from_rows(cols: usize, rows: Vec<Vec<usize>>) -> Result<Self> {
        let mut sorted = Vec::with_capacity(rows.len());
        let mut col_rows = vec![Vec::new(); cols];
        for (r, row) in rows.into_iter().enumerate() {
            let mut row: Vec<u32> = row
                .into_iter()
                .map(|c| {
                    if c < cols {
                        Ok(c as u32)
                    } else {
                        Err(invalid_arg(format!("column {c} out of range in row {r}")))
                    }
                })
                .collect::<Result<_>>()?;
            row.sort_unstable();
            if row.windows(2).any(|w| w[0] == w[1]) {
                return Err(invalid_arg(format!("duplicate column in row {r}")));
            }
            for &c in &row {
                col_rows[c as usize].push(r as u32);
            }
            sorted.push(row);
        }
        if let Some(c) = col_rows.iter().position(Vec::is_empty) {
            return Err(invalid_arg(format!("column {c} has no checks")));
        }
        Ok(Self { cols, rows: sorted, col_rows })
    }

    /// Length `N`.
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of checks `m`.
    pub fn rows(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, r: usize) -> &[u32] {
        &self.rows[r]
    }

    pub fn col(&self, c: usize) -> &[u32] {
        &self.col_rows[c]
    }

    pub fn edges(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// `(1 - m/N) * bits_per_symbol`.
    pub fn design_rate(&self, bits_per_symbol: usize) -> f64 {
        (1.0 - self.rows() as f64 / self.cols as f64) * bits_per_symbol as f64
    }

    pub fn col_degrees(&self) -> Vec<usize> {
        self.col_rows.iter().map(Vec::len).collect()
    }

    pub fn row_degrees(&self) -> Vec<usize> {
        self.rows.iter().map(Vec::len).collect()
    }

    /// Number of length-4 cycles.
    pub fn four_cycles(&self) -> usize {
        let mut count = vec![0u32; self.cols];
        let mut total = 0;
        for c in 0..self.cols {
            let mut touched = Vec::new();
            for &r in &self.col_rows[c] {
                for &c2 in &self.rows[r as usize] {
                    let c2 = c2 as usize;
                    if c2 > c {
                        if count[c2] == 0 {
                            touched.push(c2);
                        }
                        count[c2] += 1;
                    }
                }
            }
            for c2 in touched {
                let k = count[c2] as usize;
                total += k * (k - 1) / 2;
                count[c2] = 0;
            }
        }
        total
    }

    /// `s = P x` over GF(2).
    pub fn syndrome(&self, x: &[u8]) -> Result<Vec<u8>> {
        if x.len() != self.cols {
            return Err(Error::LengthMismatch { expected: self.cols, got: x.len() });
        }
        Ok(self.syndrome_unchecked(x))
    }

    pub(crate) fn syndrome_unchecked(&self, x: &[u8]) -> Vec<u8> {
        self.rows.iter().map(|row| row.iter().fold(0u8, |acc, &c| acc ^ (x[c as usize] & 1))).collect()
    }

    pub(crate) fn satisfies(&self, x: &[u8], s: &[u8]) -> bool {
        self.rows
            .iter()
            .zip(s)
            .all(|(row, &sj)| row.iter().fold(0u8, |acc, &c| acc ^ (x[c as usize] & 1)) == sj)
    }

    /// Number of checks violated by `x` against target `s`.
    pub fn unsatisfied(&self, x: &[u8], s: &[u8]) -> usize {
        self.rows
            .iter()
            .zip(s)
            .filter(|(row, &sj)| row.iter().fold(0u8, |acc, &c| acc ^ (x[c as usize] & 1)) != sj)
            .count()
    }

    /// MacKay's alist text format (1-based indices, zero padded).
    pub fn to_alist(&self) -> String {
        let cd = self.col_degrees();
        let rd = self.row_degrees();
        let max_c = cd.iter().copied().max().unwrap_or(0);
        let max_r = rd.iter().copied().max().unwrap_or(0);
        let mut s = String::new();
        let join = |v: &mut dyn Iterator<Item = usize>| v.map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        let _ = writeln!(s, "{} {}", self.cols, self.rows());
        let _ = writeln!(s, "{max_c} {max_r}");
        let _ = writeln!(s, "{}", join(&mut cd.iter().copied()));
        let _ = writeln!(s, "{}", join(&mut rd.iter().copied()));
        for col in &self.col_rows {
            let mut it = col.iter().map(|&r| r as usize + 1).chain(std::iter::repeat(0)).take(max_c);
            let _ = writeln!(s, "{}", join(&mut it));
        }
        for row in &self.rows {
            let mut it = row.iter().map(|&c| c as usize + 1).chain(std::iter::repeat(0)).take(max_r);
            let _ = writeln!(s, "{}", join(&mut it));
        }
        s
    }

    pub fn from_alist(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let mut next_nums = |what: &str| -> Result<(usize, Vec<usize>)> {
            let (i, line) = lines.next().ok_or(Error::Parse { line: 0, msg: format!("missing {what}") })?;
            let nums = line
                .split_whitespace()
                .map(|t| t.parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() })?;
            Ok((i + 1, nums))
        };
        let (ln, dims) = next_nums("dimensions")?;
        if dims.len() != 2 {
            return Err(Error::Parse { line: ln, msg: "expected 'N m'".into() });
        }
        let (n, m) = (dims[0], dims[1]);
        next_nums("maximum degrees")?;
        let (_, cd) = next_nums("column degrees")?;
        let (ln, rd) = next_nums("row degrees")?;
        if cd.len() != n || rd.len() != m {
            return Err(Error::Parse { line: ln, msg: "degree list lengths disagree with dimensions".into() });
        }
        for _ in 0..n {
            next_nums("column list")?;
        }
        let mut rows = Vec::with_capacity(m);
        for r in 0..m {
            let (ln, list) = next_nums("row list")?;
            let row: Vec<usize> = list.into_iter().filter(|&c| c > 0).map(|c| c - 1).collect();
            if row.len() != rd[r] {
                return Err(Error::Parse { line: ln, msg: format!("row {} degree mismatch", r + 1) });
            }
            rows.push(row);
        }
        let p = Self::from_rows(n, rows)?;
        if p.col_degrees() != cd {
            return Err(Error::Parse { line: 3, msg: "column degrees disagree with row lists".into() });
        }
        Ok(p)
    }
}
