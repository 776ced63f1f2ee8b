//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so every line is printed even when the
//! criterion passes. Exits non-zero if any criterion fails.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;

use skg_core::capacity::{correlated_complex_pairs, csi_capacity};
use skg_core::channel::{build_snr_profile, realize_time, ChannelConfig, PowerProfile};
use skg_core::codec::{construct_regular, decode_binary, CosetIndexer, SparseParityCheck};
use skg_core::config::ExperimentConfig;
use skg_core::experiments::{self, phase_sessions, session_seed, RunScale};
use skg_core::mi::correlation;
use skg_core::pipeline::{KeySession, PhaseMode, TARGET_BER};
use skg_core::rng::SeedStream;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

// ---------- oracles ----------

/// Expected bin variances of an exponential profile by midpoint quadrature,
/// scaled so they sum to `M sigma_H^2`.
fn oracle_bin_variances(ch: &ChannelConfig) -> Vec<f64> {
    let l = ch.dof();
    if ch.profile == PowerProfile::Flat {
        return vec![ch.num_tones as f64 * ch.total_power / l as f64; l];
    }
    let steps = 200_000;
    let dt = ch.max_delay_s / steps as f64;
    let mut w = vec![0.0; l];
    for i in 0..steps {
        let t = (i as f64 + 0.5) * dt;
        let b = ((t * ch.bandwidth_hz + 0.5).floor() as usize).min(l - 1);
        w[b] += (-t / ch.pdp_decay_s).exp();
    }
    let total: f64 = w.iter().sum();
    w.iter().map(|x| ch.num_tones as f64 * ch.total_power * x / total).collect()
}

/// Key bits per coherence from per-bin variances: `sum -log2(1 - rho^2)`.
fn oracle_bits_per_coherence(bin_var: &[f64], total_power: f64, snr_db: f64) -> f64 {
    let noise = total_power / 10f64.powf(snr_db / 10.0);
    bin_var
        .iter()
        .map(|v| {
            let rho = v / (v + noise);
            -(1.0 - rho * rho).log2()
        })
        .sum()
}

fn oracle_mi_gaussian_pair(rho: f64) -> f64 {
    -(1.0 - rho * rho).log2()
}

fn parse(s: &str) -> f64 {
    s.parse().unwrap_or_else(|_| panic!("not a number: {s}"))
}

// ---------- criteria ----------

fn capacity_at_20db() -> Outcome {
    let ch = ChannelConfig::ieee80211a();
    let start = Instant::now();
    let report = csi_capacity(&build_snr_profile(&ch, 20.0).unwrap(), ch.num_tones);
    let elapsed = start.elapsed().as_secs_f64();
    let oracle = oracle_bits_per_coherence(&oracle_bin_variances(&ch), ch.total_power, 20.0);

    // second route: bin variances measured from simulated realizations
    let mut rng = SeedStream::new(11).rng();
    let n = 20_000;
    let mut acc = vec![0.0; ch.dof()];
    for _ in 0..n {
        for (a, h) in acc.iter_mut().zip(realize_time(&ch, &mut rng).unwrap()) {
            *a += h.norm_sqr() / n as f64;
        }
    }
    let simulated = oracle_bits_per_coherence(&acc, ch.total_power, 20.0);

    let bits = report.bits_per_coherence;
    let ok = ch.dof() == 13
        && (88.0..=115.0).contains(&bits)
        && (880.0..=1150.0).contains(&report.bits_per_second)
        && (bits - oracle).abs() < 1e-3 * oracle
        && (bits - simulated).abs() < 0.02 * bits
        && elapsed < 1.0;
    outcome(
        ok,
        format!(
            "L = {}, {bits:.2} bits/coherence, {:.1} bits/s; quadrature {oracle:.2}, simulated {simulated:.2}; {elapsed:.1e} s",
            ch.dof(),
            report.bits_per_second
        ),
    )
}

fn rssi_structure() -> Outcome {
    let out = experiments::rssi_compare(&ExperimentConfig::default(), 3, &RunScale::DESK).unwrap();
    let table = out.table("rssi_compare").unwrap();
    let mut by_snr: HashMap<String, Vec<(usize, f64, f64, f64, f64)>> = HashMap::new();
    for r in table.rows() {
        by_snr.entry(r[0].to_string()).or_default().push((
            r[1].parse().unwrap(),
            parse(r[3]),
            parse(r[4]),
            parse(r[5]),
            parse(r[6]),
        ));
    }
    let mut csi_ok = true;
    let mut gauss_ok = true;
    let mut numeric_ok = true;
    let mut worst = 0.0f64;
    for (snr, rows) in &by_snr {
        let mut rows = rows.clone();
        rows.sort_by_key(|r| r.0);
        csi_ok &= rows.windows(2).all(|w| w[1].1 > w[0].1);
        gauss_ok &= rows.iter().all(|r| r.4 == rows[0].4);
        let snr_tau = 10f64.powf(parse(snr) / 10.0);
        let rho = snr_tau / (1.0 + snr_tau);
        let gauss = -(1.0 - rho.powi(4)).log2() / (4.0 * experiments::RSSI_TONES as f64);
        gauss_ok &= (rows[0].4 - gauss).abs() < 1e-6;
        let l10 = rows.iter().find(|r| r.0 == 10).unwrap();
        let tol = (3.0 * l10.3).max(0.1 * gauss);
        worst = worst.max((l10.2 - gauss).abs() / tol);
        numeric_ok &= (l10.2 - gauss).abs() <= tol;
    }
    let exp_ok = ["csi_increasing_in_L", "rssi_gaussian_independent_of_L", "rssi_numeric_matches_gaussian_L10"]
        .iter()
        .all(|n| out.find_check(n).is_some_and(|c| c.passed));
    outcome(
        csi_ok && gauss_ok && numeric_ok && exp_ok,
        format!(
            "{} SNR points; CSI ordered by L: {csi_ok}; Gaussian constant in L: {gauss_ok}; worst L=10 deviation {worst:.2} of tolerance",
            by_snr.len()
        ),
    )
}

fn rssi_correlation() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for (i, rho) in [0.5, 0.9, 0.99].into_iter().enumerate() {
        let mut rng = SeedStream::new(500 + i as u64).rng();
        let (a, b) = correlated_complex_pairs(rho, 1_000_000, &mut rng);
        // oracle side: the sample correlation of |h_A|^2 and |h_B|^2
        let ra: Vec<f64> = a.iter().map(Complex64::norm_sqr).collect();
        let rb: Vec<f64> = b.iter().map(Complex64::norm_sqr).collect();
        let (r, se) = correlation(&ra, &rb).unwrap();
        let pass = (r - rho * rho).abs() <= 3.0 * se;
        ok &= pass;
        details.push(format!("ρ_τ {rho}: ρ_R {r:.4} vs {:.4} ({:.1} se)", rho * rho, (r - rho * rho).abs() / se));
    }
    outcome(ok, details.join("; "))
}

fn magphase_numerics() -> Outcome {
    let out = experiments::magphase(&ExperimentConfig::default(), 5, &RunScale::DESK).unwrap();
    let mut ok = true;
    let mut gap_line = String::new();
    let mut worst = 0.0f64;
    for r in out.table("magphase").unwrap().rows() {
        let snr = parse(r[0]);
        let snr_lin = if snr.is_finite() { 10f64.powf(snr / 10.0) } else { 0.0 };
        let rho = snr_lin / (1.0 + snr_lin);
        let (ri, ri_se, mp, mp_se, mag, phase) = (parse(r[3]), parse(r[4]), parse(r[5]), parse(r[6]), parse(r[7]), parse(r[8]));
        let full = oracle_mi_gaussian_pair(rho);
        worst = worst.max((ri - full).abs() / (3.0 * ri_se));
        ok &= (ri - full).abs() <= 3.0 * ri_se;
        if snr.is_finite() {
            ok &= phase > mag;
        }
        if snr == 10.0 {
            ok &= full - mp > 3.0 * mp_se;
            gap_line = format!("gap at 10 dB {:.3} bits ({:.0} se)", full - mp, (full - mp) / mp_se);
        }
    }
    ok &= !gap_line.is_empty();
    outcome(ok, format!("Re+Im worst deviation {worst:.2} of 3 se; {gap_line}; phase > magnitude checked"))
}

fn gf2_rank(rows: &[u32]) -> usize {
    let mut rows = rows.to_vec();
    let mut rank = 0;
    for bit in 0..32 {
        if let Some(p) = (rank..rows.len()).find(|&r| rows[r] >> bit & 1 == 1) {
            rows.swap(rank, p);
            for r in 0..rows.len() {
                if r != rank && rows[r] >> bit & 1 == 1 {
                    rows[r] ^= rows[rank];
                }
            }
            rank += 1;
        }
    }
    rank
}

fn coset_oracle() -> Outcome {
    let mut rng = SeedStream::new(21).rng();
    let mut codes = 0;
    let mut failures = Vec::new();
    for n in 2..=12usize {
        for m in 1..n {
            let mut made = 0;
            while made < 3 {
                let masks: Vec<u32> = (0..m).map(|_| rng.random_range(1..1u32 << n)).collect();
                let covered = masks.iter().fold(0, |a, r| a | r);
                if covered != (1u32 << n) - 1 || gf2_rank(&masks) < m {
                    continue;
                }
                made += 1;
                codes += 1;
                let rows: Vec<Vec<usize>> = masks.iter().map(|r| (0..n).filter(|c| r >> c & 1 == 1).collect()).collect();
                let p = SparseParityCheck::from_rows(n, rows).unwrap();
                let idx = CosetIndexer::new(&p);
                let mut per_syndrome: HashMap<u32, usize> = HashMap::new();
                let mut pairs = HashSet::new();
                let mut inverse_ok = true;
                for x in 0u32..1 << n {
                    let bits: Vec<u8> = (0..n).map(|i| (x >> i & 1) as u8).collect();
                    let s = masks.iter().enumerate().fold(0u32, |acc, (j, r)| acc | (((r & x).count_ones() & 1) << j));
                    let sv: Vec<u8> = (0..m).map(|j| (s >> j & 1) as u8).collect();
                    assert_eq!(p.syndrome(&bits).unwrap(), sv);
                    *per_syndrome.entry(s).or_default() += 1;
                    let key = idx.key(&bits).unwrap();
                    inverse_ok &= idx.word(&sv, &key).unwrap() == bits;
                    pairs.insert((s, key));
                }
                let total = (1u64 << n) as f64;
                let h_cond: f64 = per_syndrome.values().map(|&c| c as f64 / total * (c as f64).log2()).sum();
                let sizes_ok = per_syndrome.len() == 1 << m && per_syndrome.values().all(|&c| c == 1 << (n - m));
                if !(sizes_ok && h_cond == (n - m) as f64 && pairs.len() == 1 << n && inverse_ok && idx.key_len() == n - m) {
                    failures.push(format!("N={n} m={m}"));
                }
            }
        }
    }
    outcome(failures.is_empty(), format!("{codes} full-rank codes, N ≤ 12; failures: {failures:?}"))
}

fn decoder_vs_ml() -> Outcome {
    let mut rng = SeedStream::new(31).rng();
    let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
    // moderate: exhaustive MAP itself misses roughly one block in thirteen
    let sigma = 0.7;
    let trials = 1000;
    let mut agree = 0;
    let mut map_correct = 0;
    let mut code = None;
    for t in 0..trials {
        let n = if t % 2 == 0 { 16 } else { 12 };
        if t % 100 < 2 {
            code = None;
        }
        let p = match &code {
            Some((cn, p)) if *cn == n => Arc::clone(p),
            _ => {
                // column weight 2 with no 4-cycles, as the production constructions aim for
                let p = loop {
                    let p = construct_regular(n, n / 2, 2, &mut rng).unwrap();
                    if p.four_cycles() == 0 {
                        break p;
                    }
                };
                let p = Arc::new(p);
                code = Some((n, p.clone()));
                p
            }
        };
        let x: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let llr: Vec<f64> = x
            .iter()
            .map(|&b| {
                let y = 1.0 - 2.0 * b as f64 + sigma * rng.sample(normal);
                2.0 * y / (sigma * sigma)
            })
            .collect();
        let s = p.syndrome(&x).unwrap();
        // exhaustive block MAP over the coset
        let mut best = (f64::NEG_INFINITY, 0u32);
        for w in 0u32..1 << n {
            let bits: Vec<u8> = (0..n).map(|i| (w >> i & 1) as u8).collect();
            let in_coset = (0..p.rows()).all(|r| p.row(r).iter().fold(0u8, |a, &c| a ^ bits[c as usize]) == s[r]);
            if in_coset {
                let score: f64 = bits.iter().zip(&llr).map(|(&b, &l)| if b == 0 { l / 2.0 } else { -l / 2.0 }).sum();
                if score > best.0 {
                    best = (score, w);
                }
            }
        }
        let map: Vec<u8> = (0..n).map(|i| (best.1 >> i & 1) as u8).collect();
        map_correct += (map == x) as usize;
        let bp = decode_binary(&p, &s, &llr, 50).unwrap();
        agree += (bp.estimate == map) as usize;
    }
    let rate = agree as f64 / trials as f64;
    outcome(
        rate >= 0.95,
        format!("BP = MAP in {agree}/{trials} trials (4-cycle-free N ∈ {{12, 16}}, σ = {sigma}); MAP itself correct in {map_correct}"),
    )
}

fn waterfall_orderings() -> Outcome {
    let cfg = ExperimentConfig::default();
    let out = experiments::ldpc_waterfall(&cfg, 7, &RunScale::DESK).unwrap();
    let mut th: HashMap<(String, String), Option<f64>> = HashMap::new();
    for r in out.table("waterfall_thresholds").unwrap().rows() {
        th.insert((r[0].into(), r[1].into()), if r[2] == "none" { None } else { Some(parse(r[2])) });
    }
    let get = |v: &str, r: &str| th.get(&(v.to_string(), r.to_string())).copied().flatten().unwrap_or(f64::INFINITY);
    let rates = ["0.25", "0.5", "0.75"];
    let soft_hard = rates
        .iter()
        .all(|r| get("reg-soft", r) <= get("reg-hard", r) && get("irr-soft", r) <= get("irr-hard", r));
    let irr_reg = rates
        .iter()
        .all(|r| get("irr-soft", r) <= get("reg-soft", r) + 0.5 && get("irr-hard", r) <= get("reg-hard", r) + 0.5);
    let throughput = |variants: &[&str], rates: &[&str], snr: f64| {
        variants
            .iter()
            .flat_map(|v| rates.iter().filter(move |r| get(v, r) <= snr).map(|r| parse(r)))
            .fold(0.0, f64::max)
    };
    let quat = [15.0, 20.0, 25.0, 30.0]
        .iter()
        .all(|&s| throughput(&["quat-soft"], &["0.5", "1", "1.5"], s) >= throughput(&["reg-soft", "irr-soft"], &rates, s));

    // every passing point against the quadrature capacity
    let bin_var = oracle_bin_variances(&cfg.channel);
    let two_l = 2.0 * cfg.channel.dof() as f64;
    let mut passing = 0;
    let mut below = true;
    for r in out.table("waterfall").unwrap().rows() {
        if r[7] == "true" {
            passing += 1;
            let cap = oracle_bits_per_coherence(&bin_var, cfg.channel.total_power, parse(r[2])) / two_l;
            below &= parse(r[1]) <= cap;
        }
    }
    let all_thresholds = th.values().all(Option::is_some);
    let line = |v: &str| rates.iter().map(|r| format!("{}", get(v, r))).collect::<Vec<_>>().join("/");
    outcome(
        soft_hard && irr_reg && quat && below && all_thresholds && out.all_passed(),
        format!(
            "thresholds dB at rates 0.25/0.5/0.75: reg-hard {} reg-soft {} irr-hard {} irr-soft {}; quat-soft (0.5/1/1.5) {}/{}/{}; {passing} passing points below capacity: {below}",
            line("reg-hard"),
            line("reg-soft"),
            line("irr-hard"),
            line("irr-soft"),
            get("quat-soft", "0.5"),
            get("quat-soft", "1"),
            get("quat-soft", "1.5"),
        ),
    )
}

fn end_to_end() -> Outcome {
    let cfg = ExperimentConfig::default();
    let code = Arc::new(cfg.build_code().unwrap());
    let session = KeySession::new(cfg.session_with_code(code, 0).unwrap()).unwrap();
    let sessions = 100;
    let (mut agreed, mut errors, mut bits) = (0, 0, 0);
    let mut ones = 0i64;
    let mut agreed_bits = 0i64;
    for i in 0..sessions {
        let r = session.run(session_seed(2024, i)).unwrap();
        let e = r.key_a.iter().zip(&r.key_b).filter(|(a, b)| a != b).count();
        assert_eq!(r.agreed, e == 0 && r.key_a.len() == r.key_b.len());
        agreed += r.agreed as usize;
        errors += e;
        bits += r.key_length;
        if r.agreed {
            ones += r.key_a.iter().map(|&b| b as i64).sum::<i64>();
            agreed_bits += r.key_a.len() as i64;
        }
    }
    let z = (2 * ones - agreed_bits) as f64 / (agreed_bits as f64).sqrt();
    let ber = errors as f64 / bits as f64;
    outcome(
        agreed as f64 >= 0.99 * sessions as f64 && ber <= TARGET_BER && agreed_bits >= 100_000 && z.abs() <= 4.0,
        format!(
            "rate {}, {} dB soft: {agreed}/{sessions} agreed, BER {ber:.2e}, monobit z {z:.2} over {agreed_bits} bits",
            cfg.rate, cfg.snr_f_db
        ),
    )
}

fn phase_offset() -> Outcome {
    let mut cfg = ExperimentConfig::default();
    cfg.snr_f_db = 20.0;
    let code = Arc::new(cfg.build_code().unwrap());
    let trials = 100;
    let base = phase_sessions(&cfg, &code, None, false, 77, trials).unwrap();
    let base_rate = base.agreed as f64 / trials as f64;
    let mut ok = true;
    let mut worst_gap = 0.0f64;
    let mut inexact = 0;
    for h in 0..cfg.theta_grid {
        let theta = std::f64::consts::TAU * h as f64 / cfg.theta_grid as f64;
        let row = phase_sessions(&cfg, &code, Some(theta), true, 77, trials).unwrap();
        let rate = row.agreed as f64 / trials as f64;
        worst_gap = worst_gap.max((rate - base_rate).abs());
        inexact += trials - row.exact;
        ok &= (rate - base_rate).abs() <= 0.02 && row.exact == trials;
    }

    // B = 1 against the offset-free decoder
    let mut one = cfg.clone();
    one.theta_grid = 1;
    let plain = KeySession::new(one.session_with_code(code.clone(), 0).unwrap()).unwrap();
    let mut sc = one.session_with_code(code, 0).unwrap();
    sc.phase = PhaseMode::Constant;
    let gridded = KeySession::new(sc).unwrap();
    let mut identical = 0;
    for i in 0..50 {
        let s = session_seed(78, i);
        let (a, g) = (plain.run(s).unwrap(), gridded.run(s).unwrap());
        identical += (a.decoded.estimate == g.decoded.estimate
            && a.decoded.iterations == g.decoded.iterations
            && a.decoded.converged == g.decoded.converged
            && a.key_b == g.key_b) as usize;
    }
    outcome(
        ok && identical == 50,
        format!(
            "B = {}: baseline success {base_rate:.2}, worst on-grid gap {worst_gap:.2}, inexact θ̂ {inexact}; B = 1 identical in {identical}/50",
            cfg.theta_grid
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("802.11a CSI key capacity at 20 dB", capacity_at_20db),
        ("RSSI vs CSI structure over L", rssi_structure),
        ("RSSI correlation is ρ_τ squared", rssi_correlation),
        ("real/imaginary vs magnitude/phase split", magphase_numerics),
        ("coset and secrecy brute force", coset_oracle),
        ("sum-product vs exhaustive MAP", decoder_vs_ml),
        ("waterfall orderings", waterfall_orderings),
        ("end-to-end key agreement", end_to_end),
        ("phase-offset decoder", phase_offset),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let status = if o.passed { "PASS" } else { "FAIL" };
        println!("{status} [{}] {name}: {} ({:.1} s)", i + 1, o.detail, start.elapsed().as_secs_f64());
        failed += (!o.passed) as usize;
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
