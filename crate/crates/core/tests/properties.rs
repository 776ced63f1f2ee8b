use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

use skg_core::capacity::csi_capacity_ideal;
use skg_core::channel::{build_snr_profile, realize, ChannelConfig};
use skg_core::codec::{construct_irregular, construct_regular, CosetIndexer, DegreeDistribution, SparseParityCheck};
use skg_core::pipeline::{KeySession, SessionCode, SessionConfig};
use skg_core::quantize::{bit_planes, combine_planes, quantize, Quantizer};
use skg_core::rng::SeedStream;
use skg_core::sounding::{apply_phase_offset, sound_coefficients, StackedObservation};

fn bits(len: usize) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..2, len)
}

fn regular(n: usize, seed: u64) -> SparseParityCheck {
    construct_regular(n, n / 2, 3, &mut SeedStream::new(seed).rng()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn syndrome_is_linear(seed in 0u64..1000, x in bits(48), y in bits(48)) {
        let p = regular(48, seed);
        let xy: Vec<u8> = x.iter().zip(&y).map(|(a, b)| a ^ b).collect();
        let sx = p.syndrome(&x).unwrap();
        let sy = p.syndrome(&y).unwrap();
        let sum: Vec<u8> = sx.iter().zip(&sy).map(|(a, b)| a ^ b).collect();
        prop_assert_eq!(p.syndrome(&xy).unwrap(), sum);
    }

    #[test]
    fn coset_key_roundtrip_irregular(seed in 0u64..1000, x in bits(60)) {
        let var = DegreeDistribution::new(vec![(2, 0.4), (3, 0.6)]).unwrap();
        let edges: usize = var.counts(60).iter().map(|&(d, c)| d * c).sum();
        let chk = DegreeDistribution::concentrated(edges, 30).unwrap();
        let p = construct_irregular(60, 30, &var, &chk, &mut SeedStream::new(seed).rng()).unwrap();
        let idx = CosetIndexer::new(&p);
        let s = p.syndrome(&x).unwrap();
        let k = idx.key(&x).unwrap();
        prop_assert_eq!(k.len() + idx.rank(), 60);
        prop_assert_eq!(idx.word(&s, &k).unwrap(), x);
    }

    #[test]
    fn alist_roundtrip(seed in 0u64..1000) {
        let p = regular(36, seed);
        prop_assert_eq!(SparseParityCheck::from_alist(&p.to_alist()).unwrap(), p);
    }

    #[test]
    fn bit_planes_invert(symbols in prop::collection::vec(0u8..4, 1..64)) {
        let (m, l) = bit_planes(&symbols).unwrap();
        prop_assert_eq!(combine_planes(&m, &l).unwrap(), symbols);
    }

    #[test]
    fn quantizer_is_monotone(mut xs in prop::collection::vec(-5.0f64..5.0, 2..50), q in prop::sample::select(vec![2usize, 4])) {
        xs.sort_by(f64::total_cmp);
        let block = quantize(&xs, &Quantizer::equiprobable(q).unwrap());
        prop_assert!(block.symbols.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(block.symbols.iter().all(|&s| (s as usize) < q));
    }

    #[test]
    fn ideal_capacity_linear_in_dof(snr in 0.0f64..1000.0, l in 1usize..20) {
        let one = csi_capacity_ideal(snr, 1, 20).unwrap().capacity_per_dim;
        let many = csi_capacity_ideal(snr, l, 20).unwrap().capacity_per_dim;
        prop_assert!((many - l as f64 * one).abs() <= 1e-12 * many.max(1.0));
    }

    #[test]
    fn phase_offset_preserves_magnitudes(seed in 0u64..1000, theta in 0.0f64..std::f64::consts::TAU) {
        let ch = ChannelConfig::ieee80211a();
        let profile = build_snr_profile(&ch, 10.0).unwrap();
        let mut rng = SeedStream::new(seed).rng();
        let h = realize(&ch, &mut rng).unwrap().time_coeffs;
        let pair = sound_coefficients(&h, &profile, &mut rng).unwrap();
        let rotated = apply_phase_offset(&pair, theta).unwrap();
        prop_assert_eq!(&rotated.obs_a, &pair.obs_a);
        for (a, b) in rotated.obs_b.iter().zip(&pair.obs_b) {
            prop_assert!((a.norm() - b.norm()).abs() < 1e-12 * b.norm().max(1.0));
        }
    }

    #[test]
    fn stacked_csv_roundtrip(values in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..8), blocks in 1usize..4) {
        let block: Vec<Complex64> = values.iter().map(|&(r, i)| Complex64::new(r, i)).collect();
        let tones = block.len() + 2;
        let stacked = StackedObservation::from_blocks(&vec![block; blocks], tones).unwrap();
        prop_assert_eq!(StackedObservation::from_csv(&stacked.to_csv()).unwrap(), stacked);
    }
}

fn small_session(snr_db: f64, levels: usize) -> KeySession {
    let ch = ChannelConfig::ieee80211a();
    let n = 2 * 8 * ch.dof();
    let p = Arc::new(regular(n, 5));
    let code = if levels == 2 { SessionCode::Binary(p) } else { SessionCode::Quaternary { m: p.clone(), l: p } };
    KeySession::new(SessionConfig::new(ch, snr_db, 8, Quantizer::equiprobable(levels).unwrap(), code)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn session_accounting(seed in any::<u64>(), snr in 0.0f64..25.0, q in prop::sample::select(vec![2usize, 4])) {
        let s = small_session(snr, q);
        let r = s.run(seed).unwrap();
        let n = s.config().code.len();
        let planes = if q == 2 { 1 } else { 2 };
        if s.rank_deficiency() == 0 {
            prop_assert_eq!(r.key_length + r.public_message_length, planes * n);
        }
        prop_assert_eq!(r.agreed, r.key_a == r.key_b);
        prop_assert!((0.0..=1.0).contains(&r.bit_error_rate));
        prop_assert_eq!(r.leakage_bound, 0.0);
        if r.decoded.syndrome_satisfied && r.decoded.estimate == r.alice.symbols {
            prop_assert!(r.agreed);
        }
        prop_assert_eq!(s.run(seed).unwrap(), r);
    }
}

#[test]
fn noiseless_session_any_code_agrees() {
    let mut rng = SeedStream::new(9).rng();
    for q in [2, 4] {
        let s = small_session(f64::INFINITY, q);
        for _ in 0..5 {
            let r = s.run(rng.random()).unwrap();
            assert!(r.agreed);
            assert_eq!(r.bit_error_rate, 0.0);
        }
    }
}

#[test]
fn uniformity_over_many_sessions() {
    // keys from 400 agreed sessions pooled
    let s = small_session(25.0, 2);
    let (mut ones, mut total) = (0i64, 0i64);
    let mut agreed = 0;
    let mut seed = 0;
    while agreed < 400 {
        let r = s.run(seed).unwrap();
        seed += 1;
        if r.agreed {
            agreed += 1;
            ones += r.key_a.iter().map(|&b| b as i64).sum::<i64>();
            total += r.key_a.len() as i64;
        }
    }
    let z = (2 * ones - total) as f64 / (total as f64).sqrt();
    assert!(z.abs() <= 4.0, "monobit z = {z}");
}
