use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{Canonical, DecodeError, Decoder, Encoder};
use crate::crypto::{hash_parts, Digest, Domain, PublicKey, Seed};
use crate::identity::{pow_hash, IdentityKind, Pseudonym};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenesisIdentity {
    pub pk: PublicKey,
    pub kind: IdentityKind,
    #[serde(default)]
    pub pseudonym: Option<Pseudonym>,
    /// Solution of the initial identity puzzle, when the chain requires one.
    #[serde(default)]
    pub pow_nonce: Option<u64>,
}

/// Everything that defines a chain before its first block.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenesisConfig {
    pub identities: Vec<GenesisIdentity>,
    pub seed: Seed,
    /// Stand-in for the distributed-randomness multi-signature; carried but
    /// not checked.
    #[serde(default)]
    pub seed_proof: Vec<u8>,
    pub enclave_hash: Digest,
    #[serde(default)]
    pub provider_pk: Option<PublicKey>,
    #[serde(default)]
    pub pow_target: Option<Digest>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenesisError {
    #[error("genesis has no identities")]
    Empty,
    #[error("duplicate genesis key {0}")]
    DuplicateKey(PublicKey),
    #[error("duplicate genesis pseudonym")]
    DuplicatePseudonym,
    #[error("genesis identity {0} lacks a valid puzzle solution")]
    BadPow(PublicKey),
}

impl GenesisConfig {
    pub fn chain_id(&self) -> Digest {
        hash_parts(&[&[Domain::Genesis as u8], &self.to_bytes()])
    }

    pub fn validate(&self) -> Result<(), GenesisError> {
        if self.identities.is_empty() {
            return Err(GenesisError::Empty);
        }
        let mut pks = BTreeSet::new();
        let mut pseudonyms = BTreeSet::new();
        for gi in &self.identities {
            if !pks.insert(gi.pk) {
                return Err(GenesisError::DuplicateKey(gi.pk));
            }
            if let Some(p) = gi.pseudonym {
                if !pseudonyms.insert(p) {
                    return Err(GenesisError::DuplicatePseudonym);
                }
            }
            if let Some(target) = &self.pow_target {
                match gi.pow_nonce {
                    Some(n) if pow_hash(&gi.pk, n) <= *target => {}
                    _ => return Err(GenesisError::BadPow(gi.pk)),
                }
            }
        }
        Ok(())
    }
}

impl Canonical for GenesisIdentity {
    fn encode(&self, enc: &mut Encoder) {
        enc.pk(&self.pk);
        enc.u8(match self.kind {
            IdentityKind::Mined => 1,
            IdentityKind::Attested => 2,
        });
        match &self.pseudonym {
            Some(p) => enc.u8(1).digest(&p.0),
            None => enc.u8(0),
        };
        match self.pow_nonce {
            Some(n) => enc.u8(1).u64(n),
            None => enc.u8(0),
        };
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        let pk = dec.pk()?;
        let offset = dec.position();
        let kind = match dec.u8()? {
            1 => IdentityKind::Mined,
            2 => IdentityKind::Attested,
            tag => return Err(DecodeError::BadTag { tag, offset }),
        };
        let pseudonym = if dec.bool()? { Some(Pseudonym(dec.digest()?)) } else { None };
        let pow_nonce = if dec.bool()? { Some(dec.u64()?) } else { None };
        Ok(GenesisIdentity {
            pk,
            kind,
            pseudonym,
            pow_nonce,
        })
    }
}

impl Canonical for GenesisConfig {
    fn encode(&self, enc: &mut Encoder) {
        enc.list(&self.identities)
            .digest(&self.seed)
            .bytes(&self.seed_proof)
            .digest(&self.enclave_hash);
        match &self.provider_pk {
            Some(pk) => enc.u8(1).pk(pk),
            None => enc.u8(0),
        };
        match &self.pow_target {
            Some(t) => enc.u8(1).digest(t),
            None => enc.u8(0),
        };
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(GenesisConfig {
            identities: dec.list()?,
            seed: dec.digest()?,
            seed_proof: dec.bytes()?,
            enclave_hash: dec.digest()?,
            provider_pk: if dec.bool()? { Some(dec.pk()?) } else { None },
            pow_target: if dec.bool()? { Some(dec.digest()?) } else { None },
        })
    }
}
