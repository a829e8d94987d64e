#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rrr_core::chain::{verify_branch, Block};
use rrr_core::codec::Canonical;

use super::{tx, Forge};

/// Flips one random bit of one block of a valid 12-block chain, `n` times.
/// Every mutant must fail to decode or fail verification no later than the
/// mutated block. Returns `(undecodable, rejected)`.
pub fn single_bit_mutations(forge: &Forge, n: usize, seed: u64) -> (usize, usize) {
    let mut st = forge.start();
    let mut blocks = Vec::new();
    for r in 1..=12u64 {
        let txs = (0..(r % 3) as u32).map(|i| tx(r, i)).collect();
        let b = forge.block(&st, r, (r % 2) as usize, txs, vec![]);
        st = forge.extend(&st, &b);
        blocks.push(b);
    }
    verify_branch(forge.genesis.clone(), &forge.params, &blocks).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut undecodable, mut rejected) = (0, 0);
    for _ in 0..n {
        let i = rng.gen_range(0..blocks.len());
        let mut bytes = blocks[i].to_bytes();
        let bit = rng.gen_range(0..bytes.len() * 8);
        bytes[bit / 8] ^= 1 << (bit % 8);
        match Block::from_bytes(&bytes) {
            Err(_) => undecodable += 1,
            Ok(mutated) => {
                let mut branch = blocks.clone();
                branch[i] = mutated;
                let err = verify_branch(forge.genesis.clone(), &forge.params, &branch)
                    .expect_err("mutated branch must not verify");
                assert!(err.height <= i as u64 + 1, "{err} for block {}", i + 1);
                rejected += 1;
            }
        }
    }
    (undecodable, rejected)
}
