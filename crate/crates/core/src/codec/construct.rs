//! Random code constructions: Gallager-style regular codes and
//! progressive-edge-growth irregular codes.

use rand::seq::SliceRandom;
use rand::Rng;

use super::matrix::SparseParityCheck;
use crate::error::{invalid_arg, Error, Result};

/// Node-perspective degree distribution: fraction of nodes with each degree.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeDistribution {
    pub entries: Vec<(usize, f64)>,
}

impl DegreeDistribution {
    pub fn new(entries: Vec<(usize, f64)>) -> Result<Self> {
        if entries.is_empty() || entries.iter().any(|&(d, f)| d == 0 || !(f >= 0.0)) {
            return Err(invalid_arg("degrees must be positive and fractions nonnegative"));
        }
        let total: f64 = entries.iter().map(|e| e.1).sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(invalid_arg(format!("degree fractions sum to {total}, not 1")));
        }
        Ok(Self { entries })
    }

    pub fn single(degree: usize) -> Self {
        Self { entries: vec![(degree, 1.0)] }
    }

    pub fn mean(&self) -> f64 {
        self.entries.iter().map(|&(d, f)| d as f64 * f).sum()
    }

    /// Variable-node profile used for irregular codes by default.
    pub fn default_variable() -> Self {
        Self { entries: vec![(2, 0.5057), (3, 0.3191), (8, 0.1752)] }
    }

    /// Exact integer node counts for `nodes` nodes (largest remainder).
    pub fn counts(&self, nodes: usize) -> Vec<(usize, usize)> {
        let raw: Vec<f64> = self.entries.iter().map(|e| e.1 * nodes as f64).collect();
        let mut counts: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
        let mut left = nodes - counts.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..raw.len()).collect();
        order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())).then(a.cmp(&b)));
        for &i in order.iter().cycle() {
            if left == 0 {
                break;
            }
            counts[i] += 1;
            left -= 1;
        }
        self.entries.iter().zip(counts).map(|(&(d, _), c)| (d, c)).collect()
    }

    /// Check degrees concentrated on two adjacent values carrying `edges` edges over `checks` nodes.
    pub fn concentrated(edges: usize, checks: usize) -> Result<Self> {
        if checks == 0 || edges < checks {
            return Err(invalid_arg("every check needs at least one edge"));
        }
        let d = edges / checks;
        let k = edges - d * checks;
        let mut entries = vec![(d, (checks - k) as f64 / checks as f64)];
        if k > 0 {
            entries.push((d + 1, k as f64 / checks as f64));
        }
        Ok(Self { entries })
    }
}

fn expand(counts: &[(usize, usize)]) -> Vec<usize> {
    counts.iter().flat_map(|&(d, c)| std::iter::repeat(d).take(c)).collect()
}

fn shares_row(rows: &[Vec<u32>], r: usize, c: u32) -> bool {
    rows[r].contains(&c)
}

/// Number of other columns sharing at least two rows with `c`.
fn cycles_at(rows: &[Vec<u32>], col_rows: &[Vec<u32>], c: u32, scratch: &mut Vec<u32>) -> usize {
    scratch.clear();
    for &r in &col_rows[c as usize] {
        for &c2 in &rows[r as usize] {
            if c2 != c {
                scratch.push(c2);
            }
        }
    }
    scratch.sort_unstable();
    scratch.windows(2).filter(|w| w[0] == w[1]).count()
}

fn replace(v: &mut [u32], from: u32, to: u32) {
    if let Some(x) = v.iter_mut().find(|x| **x == from) {
        *x = to;
    }
}

/// Gallager-style regular code: exact column weight, row weight `wc N / m`,
/// no duplicate entries; 4-cycles are removed by random edge swaps within a
/// bounded budget.
pub fn construct_regular<R: Rng + ?Sized>(n: usize, m: usize, col_weight: usize, rng: &mut R) -> Result<SparseParityCheck> {
    if col_weight < 2 || m == 0 || m >= n {
        return Err(Error::Infeasible(format!("need col_weight >= 2 and 0 < m < N (N={n}, m={m})")));
    }
    if (col_weight * n) % m != 0 {
        return Err(Error::Infeasible(format!("col_weight*N = {} not divisible by m = {m}", col_weight * n)));
    }
    let wr = col_weight * n / m;
    if col_weight > m || wr > n {
        return Err(Error::Infeasible("degrees exceed matrix dimensions".into()));
    }
    let mut sockets: Vec<u32> = (0..n as u32).flat_map(|c| std::iter::repeat(c).take(col_weight)).collect();
    sockets.shuffle(rng);
    let mut rows: Vec<Vec<u32>> = sockets.chunks(wr).map(<[u32]>::to_vec).collect();
    let mut col_rows = vec![Vec::with_capacity(col_weight); n];
    for (r, row) in rows.iter().enumerate() {
        for &c in row {
            col_rows[c as usize].push(r as u32);
        }
    }

    // Swap the column of (r, slot) with the column of a random edge elsewhere.
    let swap = |rows: &mut Vec<Vec<u32>>, col_rows: &mut Vec<Vec<u32>>, r: usize, slot: usize, rng: &mut R| -> Option<(usize, usize, usize)> {
        let c = rows[r][slot];
        let r2 = rng.random_range(0..m);
        if r2 == r {
            return None;
        }
        let slot2 = rng.random_range(0..wr);
        let c2 = rows[r2][slot2];
        if c2 == c || shares_row(rows, r, c2) || shares_row(rows, r2, c) {
            return None;
        }
        rows[r][slot] = c2;
        rows[r2][slot2] = c;
        replace(&mut col_rows[c as usize], r as u32, r2 as u32);
        replace(&mut col_rows[c2 as usize], r2 as u32, r as u32);
        Some((r2, slot2, c2 as usize))
    };

    // duplicates inside a row
    let budget = 200 * n + 10_000;
    let mut tries = 0;
    loop {
        let dup = rows.iter().enumerate().find_map(|(r, row)| {
            (0..row.len()).find(|&i| row[..i].contains(&row[i])).map(|i| (r, i))
        });
        let Some((r, slot)) = dup else { break };
        tries += 1;
        if tries > budget {
            return Err(Error::Infeasible("could not remove duplicate entries".into()));
        }
        // the duplicate itself must move; allow the move even though c is in row r
        let c = rows[r][slot];
        let r2 = rng.random_range(0..m);
        let slot2 = rng.random_range(0..wr);
        let c2 = rows[r2][slot2];
        if r2 == r || rows[r].contains(&c2) || rows[r2].contains(&c) {
            continue;
        }
        rows[r][slot] = c2;
        rows[r2][slot2] = c;
        replace(&mut col_rows[c as usize], r as u32, r2 as u32);
        replace(&mut col_rows[c2 as usize], r2 as u32, r as u32);
    }

    // 4-cycles, best effort
    let mut scratch = Vec::new();
    let mut tries = 0;
    'outer: loop {
        let mut bad: Vec<u32> = (0..n as u32).filter(|&c| cycles_at(&rows, &col_rows, c, &mut scratch) > 0).collect();
        if bad.is_empty() {
            break;
        }
        bad.shuffle(rng);
        let mut improved = false;
        for c in bad {
            let before_c = cycles_at(&rows, &col_rows, c, &mut scratch);
            if before_c == 0 {
                continue;
            }
            for _ in 0..8 {
                tries += 1;
                if tries > budget {
                    break 'outer;
                }
                let r = col_rows[c as usize][rng.random_range(0..col_weight)] as usize;
                let slot = rows[r].iter().position(|&x| x == c).expect("edge present");
                let Some((r2, slot2, c2)) = swap(&mut rows, &mut col_rows, r, slot, rng) else { continue };
                let c2 = c2 as u32;
                let after = cycles_at(&rows, &col_rows, c, &mut scratch) + cycles_at(&rows, &col_rows, c2, &mut scratch);
                // undo to measure the partner's cost before the swap
                rows[r][slot] = c;
                rows[r2][slot2] = c2;
                replace(&mut col_rows[c as usize], r2 as u32, r as u32);
                replace(&mut col_rows[c2 as usize], r as u32, r2 as u32);
                let before = before_c + cycles_at(&rows, &col_rows, c2, &mut scratch);
                if after < before {
                    rows[r][slot] = c2;
                    rows[r2][slot2] = c;
                    replace(&mut col_rows[c as usize], r as u32, r2 as u32);
                    replace(&mut col_rows[c2 as usize], r2 as u32, r as u32);
                    improved = true;
                    break;
                }
            }
        }
        if !improved && tries > budget / 2 {
            break;
        }
    }

    SparseParityCheck::from_rows(n, rows.into_iter().map(|r| r.into_iter().map(|c| c as usize).collect()).collect())
}

/// Progressive edge growth honouring node-perspective degree distributions.
/// Each new edge goes to the check farthest from the variable in the current
/// graph (unreachable first), preferring the lowest current check degree.
pub fn construct_irregular<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    var_dist: &DegreeDistribution,
    check_dist: &DegreeDistribution,
    rng: &mut R,
) -> Result<SparseParityCheck> {
    if m == 0 || m >= n {
        return Err(Error::Infeasible(format!("need 0 < m < N (N={n}, m={m})")));
    }
    DegreeDistribution::new(var_dist.entries.clone())?;
    DegreeDistribution::new(check_dist.entries.clone())?;
    let ev_real = var_dist.mean() * n as f64;
    let ec_real = check_dist.mean() * m as f64;
    // integer node counts may each round by one edge per degree class
    let slack = (var_dist.entries.len() + check_dist.entries.len()) as f64;
    if (ev_real - ec_real).abs() > slack + 1e-9 * ev_real {
        return Err(Error::Infeasible(format!(
            "inconsistent distributions: {ev_real} variable edges vs {ec_real} check edges"
        )));
    }
    let mut var_deg = expand(&var_dist.counts(n));
    let mut check_target = expand(&check_dist.counts(m));
    var_deg.sort_unstable();
    if var_deg.iter().any(|&d| d > m) {
        return Err(Error::Infeasible("variable degree exceeds number of checks".into()));
    }
    // reconcile integer rounding on the check side
    let ev: usize = var_deg.iter().sum();
    let mut ec: usize = check_target.iter().sum();
    let mut i = 0;
    while ec != ev {
        let j = i % m;
        if ec < ev {
            check_target[j] += 1;
            ec += 1;
        } else if check_target[j] > 1 {
            check_target[j] -= 1;
            ec -= 1;
        }
        i += 1;
        if i > 4 * m + ev {
            return Err(Error::Infeasible("cannot reconcile edge counts".into()));
        }
    }
    if check_target.iter().any(|&d| d > n) {
        return Err(Error::Infeasible("check degree exceeds code length".into()));
    }
    check_target.shuffle(rng);

    let mut var_checks: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut check_vars: Vec<Vec<u32>> = vec![Vec::new(); m];
    let mut check_depth = vec![u32::MAX; m];
    let mut var_seen = vec![false; n];
    let mut frontier: Vec<u32> = Vec::new();
    let mut next: Vec<u32> = Vec::new();
    let mut cands: Vec<u32> = Vec::new();

    for (v, &dv) in var_deg.iter().enumerate() {
        for k in 0..dv {
            check_depth.iter_mut().for_each(|d| *d = u32::MAX);
            if k > 0 {
                var_seen.iter_mut().for_each(|s| *s = false);
                var_seen[v] = true;
                frontier.clear();
                frontier.push(v as u32);
                let mut depth = 0;
                while !frontier.is_empty() {
                    next.clear();
                    for &u in &frontier {
                        for &c in &var_checks[u as usize] {
                            if check_depth[c as usize] == u32::MAX {
                                check_depth[c as usize] = depth;
                                for &u2 in &check_vars[c as usize] {
                                    if !var_seen[u2 as usize] {
                                        var_seen[u2 as usize] = true;
                                        next.push(u2);
                                    }
                                }
                            }
                        }
                    }
                    std::mem::swap(&mut frontier, &mut next);
                    depth += 1;
                }
            }
            let open = |c: usize| check_vars[c].len() < check_target[c] && !var_checks[v].contains(&(c as u32));
            let best_depth = (0..m).filter(|&c| open(c)).map(|c| check_depth[c]).max();
            let Some(best_depth) = best_depth else {
                return Err(Error::Infeasible("ran out of check sockets".into()));
            };
            let min_deg = (0..m)
                .filter(|&c| open(c) && check_depth[c] == best_depth)
                .map(|c| check_vars[c].len())
                .min()
                .expect("nonempty");
            cands.clear();
            cands.extend(
                (0..m as u32).filter(|&c| open(c as usize) && check_depth[c as usize] == best_depth && check_vars[c as usize].len() == min_deg),
            );
            let c = cands[rng.random_range(0..cands.len())];
            var_checks[v].push(c);
            check_vars[c as usize].push(v as u32);
        }
    }
    let rows = check_vars.into_iter().map(|r| r.into_iter().map(|v| v as usize).collect()).collect();
    SparseParityCheck::from_rows(n, rows)
}
