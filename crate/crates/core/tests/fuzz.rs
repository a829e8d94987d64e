mod common;

use common::fuzz::single_bit_mutations;
use common::Forge;
use rrr_core::fixtures::small_params;

#[test]
fn every_single_bit_mutation_is_rejected() {
    let forge = Forge::mined(10, small_params(), 31);
    let (undecodable, rejected) = single_bit_mutations(&forge, 1000, 31);
    assert_eq!(undecodable + rejected, 1000);
    assert!(rejected > 900, "{rejected} decoded");
}
