use std::collections::BTreeMap;
use std::sync::Arc;

use rrr_core::chain::verify_branch;
use rrr_core::fixtures::{keypairs, mined_genesis, small_params, LockstepNet};

#[test]
fn honest_round_robin_is_exact() {
    let keys = keypairs(1, 10);
    let g = mined_genesis(&keys, 1);
    let mut net = LockstepNet::new(small_params(), g.clone(), &keys);
    let produced = net.run(100);
    assert_eq!(produced, 100);
    let branch = net.branch(0);
    assert_eq!(branch.len(), 100);
    let mut counts = BTreeMap::new();
    for b in &branch {
        *counts.entry(*b.leader()).or_insert(0) += 1;
    }
    assert_eq!(counts.len(), 10);
    assert!(counts.values().all(|&c| c == 10), "{counts:?}");
    verify_branch(Arc::new(g), &small_params(), &branch).unwrap();
}
