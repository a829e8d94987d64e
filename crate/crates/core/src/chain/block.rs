use crate::codec::{Canonical, DecodeError, Decoder, Encoder};
use crate::crypto::{hash, verify, Digest, Domain, KeyPair, PublicKey, Seed, SeedUpdate, Signature};
use crate::identity::EnrollMsg;

/// Opaque transaction payload.
pub type Tx = Vec<u8>;

/// Nominal transaction size used by generators and throughput estimates.
pub const NOMINAL_TX_BYTES: usize = 250;

/// Commitment to an ordered transaction list.
pub fn tx_hash(txs: &[Tx]) -> Digest {
    let mut e = Encoder::new();
    e.list(txs);
    hash(&e.finish())
}

/// A candidate's announcement that it wants to lead round `round`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IntentMsg {
    pub chain_id: Digest,
    pub candidate_pk: PublicKey,
    pub round: u64,
    pub prev_hash: Digest,
    pub tx_hash: Digest,
    pub sig: Signature,
}

impl IntentMsg {
    pub fn new(keys: &KeyPair, chain_id: Digest, round: u64, prev_hash: Digest, tx_hash: Digest) -> Self {
        let mut m = IntentMsg {
            chain_id,
            candidate_pk: keys.public(),
            round,
            prev_hash,
            tx_hash,
            sig: Signature([0; 64]),
        };
        m.sig = keys.sign(Domain::Intent, &m.signing_bytes());
        m
    }

    fn signing_bytes(&self) -> Vec<u8> {
        let mut e = Encoder::new();
        e.digest(&self.chain_id)
            .pk(&self.candidate_pk)
            .u64(self.round)
            .digest(&self.prev_hash)
            .digest(&self.tx_hash);
        e.finish()
    }

    pub fn verify_sig(&self) -> bool {
        verify(&self.candidate_pk, Domain::Intent, &self.signing_bytes(), &self.sig)
    }

    /// `h_i`, the digest confirmations refer to.
    pub fn digest(&self) -> Digest {
        hash(&self.to_bytes())
    }
}

impl Canonical for IntentMsg {
    fn encode(&self, enc: &mut Encoder) {
        enc.digest(&self.chain_id)
            .pk(&self.candidate_pk)
            .u64(self.round)
            .digest(&self.prev_hash)
            .digest(&self.tx_hash)
            .sig(&self.sig);
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(IntentMsg {
            chain_id: dec.digest()?,
            candidate_pk: dec.pk()?,
            round: dec.u64()?,
            prev_hash: dec.digest()?,
            tx_hash: dec.digest()?,
            sig: dec.sig()?,
        })
    }
}

/// An endorser's vote for one intent.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ConfirmMsg {
    pub chain_id: Digest,
    pub intent_hash: Digest,
    pub leader_pk_hash: Digest,
    pub endorser_pk_hash: Digest,
    pub sig: Signature,
}

impl ConfirmMsg {
    pub fn new(keys: &KeyPair, intent: &IntentMsg) -> Self {
        let mut m = ConfirmMsg {
            chain_id: intent.chain_id,
            intent_hash: intent.digest(),
            leader_pk_hash: intent.candidate_pk.key_hash(),
            endorser_pk_hash: keys.public().key_hash(),
            sig: Signature([0; 64]),
        };
        m.sig = keys.sign(Domain::Confirm, &m.signing_bytes());
        m
    }

    fn signing_bytes(&self) -> Vec<u8> {
        let mut e = Encoder::new();
        e.digest(&self.chain_id)
            .digest(&self.intent_hash)
            .digest(&self.leader_pk_hash)
            .digest(&self.endorser_pk_hash);
        e.finish()
    }

    pub fn verify_sig(&self, endorser_pk: &PublicKey) -> bool {
        endorser_pk.key_hash() == self.endorser_pk_hash
            && verify(endorser_pk, Domain::Confirm, &self.signing_bytes(), &self.sig)
    }
}

impl Canonical for ConfirmMsg {
    fn encode(&self, enc: &mut Encoder) {
        enc.digest(&self.chain_id)
            .digest(&self.intent_hash)
            .digest(&self.leader_pk_hash)
            .digest(&self.endorser_pk_hash)
            .sig(&self.sig);
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(ConfirmMsg {
            chain_id: dec.digest()?,
            intent_hash: dec.digest()?,
            leader_pk_hash: dec.digest()?,
            endorser_pk_hash: dec.digest()?,
            sig: dec.sig()?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Block {
    pub intent: IntentMsg,
    pub confirms: Vec<ConfirmMsg>,
    pub txs: Vec<Tx>,
    pub enrolls: Vec<EnrollMsg>,
    pub seed: Seed,
    pub proof: Signature,
    pub sig: Signature,
}

impl Block {
    /// Assembles and signs a block. `keys` must be the intent's candidate.
    pub fn build(
        keys: &KeyPair,
        intent: IntentMsg,
        confirms: Vec<ConfirmMsg>,
        txs: Vec<Tx>,
        enrolls: Vec<EnrollMsg>,
        update: SeedUpdate,
    ) -> Self {
        let mut b = Block {
            intent,
            confirms,
            txs,
            enrolls,
            seed: update.seed,
            proof: update.proof,
            sig: Signature([0; 64]),
        };
        b.sig = keys.sign(Domain::Block, &b.signing_bytes());
        b
    }

    fn encode_body(&self, enc: &mut Encoder) {
        self.intent.encode(enc);
        enc.list(&self.confirms)
            .list(&self.txs)
            .list(&self.enrolls)
            .digest(&self.seed)
            .sig(&self.proof);
    }

    fn signing_bytes(&self) -> Vec<u8> {
        let mut e = Encoder::new();
        self.encode_body(&mut e);
        e.finish()
    }

    pub fn verify_sig(&self) -> bool {
        verify(&self.intent.candidate_pk, Domain::Block, &self.signing_bytes(), &self.sig)
    }

    pub fn leader(&self) -> &PublicKey {
        &self.intent.candidate_pk
    }

    pub fn round(&self) -> u64 {
        self.intent.round
    }

    pub fn prev_hash(&self) -> &Digest {
        &self.intent.prev_hash
    }

    pub fn seal(self) -> SealedBlock {
        SealedBlock::new(self)
    }
}

impl Canonical for Block {
    fn encode(&self, enc: &mut Encoder) {
        self.encode_body(enc);
        enc.sig(&self.sig);
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(Block {
            intent: IntentMsg::decode(dec)?,
            confirms: dec.list()?,
            txs: dec.list()?,
            enrolls: dec.list()?,
            seed: dec.digest()?,
            proof: dec.sig()?,
            sig: dec.sig()?,
        })
    }
}

/// A block together with its canonical bytes and digest, computed once.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SealedBlock {
    block: Block,
    bytes: Vec<u8>,
    hash: Digest,
}

impl SealedBlock {
    pub fn new(block: Block) -> Self {
        let bytes = block.to_bytes();
        let hash = hash(&bytes);
        SealedBlock { block, bytes, hash }
    }

    pub fn block(&self) -> &Block {
        &self.block
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn hash(&self) -> Digest {
        self.hash
    }

    pub fn into_block(self) -> Block {
        self.block
    }
}

impl std::ops::Deref for SealedBlock {
    type Target = Block;

    fn deref(&self) -> &Block {
        &self.block
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::vrf_evaluate;

    #[test]
    fn block_round_trip_and_signature() {
        let kp = KeyPair::from_seed([1; 32]);
        let e = KeyPair::from_seed([2; 32]);
        let txs = vec![vec![7u8; 10]];
        let intent = IntentMsg::new(&kp, Digest::ZERO, 3, Digest::MAX, tx_hash(&txs));
        assert!(intent.verify_sig());
        let c = ConfirmMsg::new(&e, &intent);
        assert!(c.verify_sig(&e.public()));
        assert!(!c.verify_sig(&kp.public()));
        let b = Block::build(&kp, intent, vec![c], txs, vec![], vrf_evaluate(&kp, &Digest::ZERO));
        assert!(b.verify_sig());
        let bytes = b.to_bytes();
        assert_eq!(Block::from_bytes(&bytes).unwrap(), b);
        let sealed = b.clone().seal();
        assert_eq!(sealed.hash(), hash(&bytes));
    }
}
