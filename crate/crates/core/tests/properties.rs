//! Property tests for the exact arithmetic, the word codings and the
//! pair profiles.

mod common;

use proptest::prelude::*;

use scrambled::cantor::{canonical_s, g0_edge_level, g0_involution};
use scrambled::certificate::Certificate;
use scrambled::fusion::coding::{block_to_nat, decode_bits, decode_letters, encode_bits, encode_letters, nat_to_block};
use scrambled::relations::{dist_at_time, PairProfile};
use scrambled::scrambler::{scramble, ScrambleParams};
use scrambled::systems::Pattern;
use scrambled::{Cell, Dyadic, SystemHandle, Word};

fn word() -> impl Strategy<Value = Word> {
    prop::collection::vec(any::<bool>(), 0..40).prop_map(Word::from_bits)
}

fn pattern(max: usize) -> impl Strategy<Value = Vec<Option<bool>>> {
    prop::collection::vec(prop::option::weighted(0.8, any::<bool>()), 1..max)
}

fn shift() -> SystemHandle {
    SystemHandle::from_reference("shift").unwrap()
}

proptest! {
    #[test]
    fn dyadic_text_round_trip(num in any::<i64>(), exp in 0u32..80) {
        let d = Dyadic::new(num, exp);
        let back: Dyadic = d.to_string().parse().unwrap();
        prop_assert_eq!(back, d);
    }

    #[test]
    fn dyadic_order_matches_cross_multiplication(a in -1000i64..1000, p in 0u32..12, b in -1000i64..1000, q in 0u32..12) {
        let x = Dyadic::new(a, p);
        let y = Dyadic::new(b, q);
        let lhs = i128::from(a) << q;
        let rhs = i128::from(b) << p;
        prop_assert_eq!(x.cmp(&y), lhs.cmp(&rhs));
        prop_assert_eq!(&(&x + &y) - &y, x);
    }

    #[test]
    fn length_lex_round_trip(w in word()) {
        let i = w.length_lex_index().unwrap();
        prop_assert_eq!(Word::nth_length_lex(i), w);
    }

    #[test]
    fn word_text_round_trip(w in word()) {
        let back: Word = w.to_string().parse().unwrap();
        prop_assert_eq!(back, w);
    }

    #[test]
    fn canonical_s_agrees_with_oracle(n in 0usize..5000) {
        prop_assert_eq!(canonical_s(n).bits().to_vec(), common::oracle_s(n));
    }

    #[test]
    fn g0_involution_is_an_involution(n in 0usize..30, tail in prop::collection::vec(any::<bool>(), 1..20)) {
        let x = canonical_s(n).concat(&Word::from_bits(tail));
        let y = g0_involution(n, &x).unwrap();
        prop_assert_ne!(&y, &x);
        prop_assert_eq!(g0_involution(n, &y).unwrap(), x.clone());
        let (u, v) = if x.bits()[n] { (&y, &x) } else { (&x, &y) };
        prop_assert_eq!(g0_edge_level(u, v), Some(n));
        prop_assert_eq!(g0_edge_level(v, u), None);
    }

    #[test]
    fn bit_coding_round_trip(w in word()) {
        prop_assert_eq!(decode_bits(&encode_bits(&w)).unwrap(), w);
    }

    #[test]
    fn block_coding_round_trip(j in any::<u64>()) {
        let block = nat_to_block(j);
        prop_assert_eq!(block_to_nat(&block), Some(j));
    }

    #[test]
    fn letter_coding_round_trip(blocks in prop::collection::vec((prop::collection::vec(prop::sample::select(vec![0u8, 3]), 0..30), 1u8..3), 0..8)) {
        let letters: Vec<u8> = blocks
            .iter()
            .flat_map(|(head, last)| head.iter().copied().chain(std::iter::once(*last)))
            .collect();
        let coded = encode_letters(&letters).unwrap();
        prop_assert_eq!(coded.len(), blocks.len());
        prop_assert_eq!(decode_letters(&coded), letters);
    }

    #[test]
    fn symbolic_profile_matches_direct_distances(p in pattern(24), q in pattern(24), horizon in 0usize..30) {
        let sys = shift();
        let a = Cell::Symbolic(Pattern::from_symbols(p.clone()));
        let b = Cell::Symbolic(Pattern::from_symbols(q.clone()));
        let profile = PairProfile::new(&sys, &a, &b, horizon).unwrap();
        for m in 0..=horizon {
            let direct = dist_at_time(&sys, &a, &b, m).unwrap();
            prop_assert_eq!(profile.at(m), direct.clone());
            prop_assert_eq!(direct.upper, Dyadic::pow2_neg(common::agreement_run(&p, &q, m) as u32));
        }
    }

    #[test]
    fn stage_events_are_monotone(p in pattern(40), q in pattern(40), horizon in 0usize..45) {
        let sys = shift();
        let a = Cell::Symbolic(Pattern::from_symbols(p));
        let b = Cell::Symbolic(Pattern::from_symbols(q));
        let profile = PairProfile::new(&sys, &a, &b, horizon).unwrap();
        let schedule = profile.stage_schedule(horizon, &Dyadic::zero());
        for n in 1..schedule.len() {
            if schedule[n].is_some() {
                prop_assert!(schedule[n - 1].is_some(), "stage {} found but {} missing", n, n - 1);
            }
        }
        for e in schedule.iter().flatten() {
            prop_assert!(e.time >= e.stage);
            prop_assert!(e.upper < Dyadic::pow2_neg(e.stage as u32));
        }
    }

    #[test]
    fn events_grow_with_the_horizon(p in pattern(40), q in pattern(40), h in 0usize..30, extra in 0usize..15) {
        let sys = shift();
        let a = Cell::Symbolic(Pattern::from_symbols(p));
        let b = Cell::Symbolic(Pattern::from_symbols(q));
        let short = PairProfile::new(&sys, &a, &b, h).unwrap();
        let long = PairProfile::new(&sys, &a, &b, h + extra).unwrap();
        let delta = Dyadic::pow2_neg(2);
        let s = short.separations(&delta);
        prop_assert_eq!(&long.separations(&delta)[..s.len()], &s[..]);
        for n in 0..=h {
            if let Some(e) = short.stage_event(n, &Dyadic::zero()) {
                prop_assert_eq!(long.stage_event(n, &Dyadic::zero()), Some(e));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn certificates_round_trip(depth in 1usize..4, k in 1usize..3) {
        let params = ScrambleParams {
            eps: Dyadic::pow2_neg(3),
            delta: Dyadic::one(),
            k,
            horizon: 40,
            slack: Dyadic::zero(),
        };
        let s = scramble(&shift(), depth, &params).unwrap();
        let cert = Certificate::from_scrambled(&s);
        let bytes = cert.to_bytes();
        let back: Certificate = serde_json::from_slice(&bytes).unwrap();
        prop_assert_eq!(back.to_bytes(), bytes);
    }
}
