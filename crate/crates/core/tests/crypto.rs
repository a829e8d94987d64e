use proptest::prelude::*;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rrr_core::chain::{Block, ConfirmMsg, GenesisConfig, IntentMsg};
use rrr_core::codec::{Canonical, DecodeError};
use rrr_core::crypto::{hash, verify, Digest, Domain, KeyPair};
use rrr_core::fixtures::{keypairs, mined_genesis};
use rrr_core::identity::{EnrollMsg, MinedEnrollMsg};
use rrr_core::{vrf_evaluate, vrf_verify};

fn hamming(a: &Digest, b: &Digest) -> u32 {
    a.0.iter().zip(&b.0).map(|(x, y)| (x ^ y).count_ones()).sum()
}

#[test]
fn single_bit_flips_change_half_the_digest() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut total = 0u64;
    for _ in 0..1000 {
        let len = rng.gen_range(1..200);
        let mut msg = vec![0u8; len];
        rng.fill_bytes(&mut msg);
        let before = hash(&msg);
        let bit = rng.gen_range(0..len * 8);
        msg[bit / 8] ^= 1 << (bit % 8);
        let d = hamming(&before, &hash(&msg));
        assert!(d > 0);
        total += d as u64;
    }
    // 128 expected; the mean of 1000 has a standard deviation of 0.25.
    let mean = total as f64 / 1000.0;
    assert!((mean - 128.0).abs() < 1.5, "mean distance {mean}");
}

#[test]
fn vrf_is_unique_and_bound_to_its_key() {
    let keys = keypairs(77, 100);
    let prev = hash(b"previous seed");
    let mut ones = 0u32;
    let mut seeds = std::collections::BTreeSet::new();
    for (i, k) in keys.iter().enumerate() {
        let a = vrf_evaluate(k, &prev);
        assert_eq!(a, vrf_evaluate(k, &prev));
        assert!(vrf_verify(&k.public(), &prev, &a.seed, &a.proof));
        let other = keys[(i + 1) % keys.len()].public();
        assert!(!vrf_verify(&other, &prev, &a.seed, &a.proof));
        assert!(!vrf_verify(&k.public(), &hash(b"another seed"), &a.seed, &a.proof));
        let mut wrong = a.seed;
        wrong.0[31] ^= 1;
        assert!(!vrf_verify(&k.public(), &prev, &wrong, &a.proof));
        ones += a.seed.0.iter().map(|b| b.count_ones()).sum::<u32>();
        seeds.insert(a.seed);
    }
    assert_eq!(seeds.len(), 100);
    // 25600 output bits: mean 12800, sd 80.
    assert!((ones as i64 - 12800).abs() < 320, "{ones} ones");
}

#[test]
fn signatures_do_not_cross_domains() {
    let k = KeyPair::from_seed([9; 32]);
    let all = [
        Domain::Intent,
        Domain::Confirm,
        Domain::Enroll,
        Domain::Block,
        Domain::Vrf,
        Domain::Quote,
        Domain::Genesis,
        Domain::Pow,
        Domain::Sampling,
        Domain::Pseudonym,
    ];
    let msg = b"same payload";
    for a in all {
        let sig = k.sign(a, msg);
        for b in all {
            assert_eq!(verify(&k.public(), b, msg, &sig), a == b, "{a:?} vs {b:?}");
        }
    }
    // An intent signature cannot be passed off as a confirm on the same bytes.
    let intent = IntentMsg::new(&k, Digest::ZERO, 1, Digest::ZERO, Digest::ZERO);
    let mut c = ConfirmMsg::new(&k, &intent);
    c.sig = intent.sig;
    assert!(!c.verify_sig(&k.public()));
}

#[test]
fn hex_round_trips() {
    let d = hash(b"hex");
    assert_eq!(Digest::from_hex(&d.to_hex()).unwrap(), d);
    let pk = KeyPair::from_seed([4; 32]).public();
    assert_eq!(rrr_core::PublicKey::from_hex(&pk.to_hex()).unwrap(), pk);
    assert!(Digest::from_hex("zz").is_err());
}

fn arb_block() -> impl Strategy<Value = Block> {
    (
        any::<[u8; 32]>(),
        any::<u64>(),
        proptest::collection::vec(proptest::collection::vec(any::<u8>(), 0..80), 0..6),
        0usize..5,
        0usize..3,
    )
        .prop_map(|(seed, round, txs, n_confirms, n_enrolls)| {
            let leader = KeyPair::from_seed(seed);
            let intent = IntentMsg::new(&leader, hash(&seed), round, hash(b"prev"), rrr_core::chain::tx_hash(&txs));
            let confirms = (0..n_confirms)
                .map(|i| ConfirmMsg::new(&KeyPair::from_seed([i as u8; 32]), &intent))
                .collect();
            let enrolls = (0..n_enrolls)
                .map(|i| {
                    EnrollMsg::Mined(MinedEnrollMsg::new(
                        &leader,
                        vec![hash(&[i as u8])],
                        KeyPair::from_seed([100 + i as u8; 32]).public(),
                    ))
                })
                .collect();
            let upd = vrf_evaluate(&leader, &hash(b"prev seed"));
            Block::build(&leader, intent, confirms, txs, enrolls, upd)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn blocks_round_trip(b in arb_block()) {
        let bytes = b.to_bytes();
        prop_assert_eq!(Block::from_bytes(&bytes).unwrap(), b.clone());
        // Encoding is a function of the value alone.
        prop_assert_eq!(Block::from_bytes(&bytes).unwrap().to_bytes(), bytes.clone());
        let mut longer = bytes.clone();
        longer.push(0);
        prop_assert_eq!(Block::from_bytes(&longer).unwrap_err(), DecodeError::Trailing(1));
        for cut in [0, 1, bytes.len() / 2, bytes.len() - 1] {
            prop_assert!(Block::from_bytes(&bytes[..cut]).is_err());
        }
    }

    #[test]
    fn genesis_round_trips(n in 1usize..12, tag in any::<u64>()) {
        let g = mined_genesis(&keypairs(tag, n), tag);
        prop_assert_eq!(GenesisConfig::from_bytes(&g.to_bytes()).unwrap(), g);
    }

    #[test]
    fn unknown_enroll_tag_is_rejected(tag in 3u8..=255) {
        let m = EnrollMsg::Mined(MinedEnrollMsg::new(&KeyPair::from_seed([1; 32]), vec![], KeyPair::from_seed([2; 32]).public()));
        let mut bytes = m.to_bytes();
        bytes[0] = tag;
        prop_assert_eq!(EnrollMsg::from_bytes(&bytes).unwrap_err(), DecodeError::BadTag { tag, offset: 0 });
    }
}
