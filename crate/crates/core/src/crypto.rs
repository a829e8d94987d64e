//! Hashing, signatures and the sign-then-hash VRF.

use std::cell::RefCell;
use std::collections::HashSet;
use std::fmt;

use ed25519_dalek::{Signer, SigningKey, VerifyingKey};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

pub const DIGEST_LEN: usize = 32;
pub const PUBLIC_KEY_LEN: usize = 32;
pub const SIGNATURE_LEN: usize = 64;

/// A 32-byte SHA-256 output.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Digest(pub [u8; DIGEST_LEN]);

/// Per-round randomness carried by every block.
pub type Seed = Digest;

impl Digest {
    pub const ZERO: Digest = Digest([0; DIGEST_LEN]);
    pub const MAX: Digest = Digest([0xff; DIGEST_LEN]);

    pub fn as_bytes(&self) -> &[u8; DIGEST_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, hex::FromHexError> {
        let mut out = [0u8; DIGEST_LEN];
        hex::decode_to_slice(s, &mut out)?;
        Ok(Digest(out))
    }

    /// The digest `2^bits` read as a big-endian 256-bit integer.
    pub fn pow2(bits: u32) -> Self {
        assert!(bits < 256, "2^{bits} does not fit in 256 bits");
        let mut out = [0u8; DIGEST_LEN];
        let byte = DIGEST_LEN - 1 - (bits / 8) as usize;
        out[byte] = 1 << (bits % 8);
        Digest(out)
    }

    /// First eight bytes as a big-endian integer.
    pub fn prefix_u64(&self) -> u64 {
        u64::from_be_bytes(self.0[..8].try_into().unwrap())
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", &self.to_hex()[..16])
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Digest {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Digest::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

pub fn hash(payload: &[u8]) -> Digest {
    Digest(Sha256::digest(payload).into())
}

/// Hash of the concatenation of `parts`.
pub fn hash_parts(parts: &[&[u8]]) -> Digest {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    Digest(h.finalize().into())
}

/// Tag prepended to every signed payload so that a signature of one message
/// type can never be replayed as another.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Domain {
    Intent = 1,
    Confirm = 2,
    Enroll = 3,
    Block = 4,
    Vrf = 5,
    Quote = 6,
    Genesis = 7,
    Pow = 8,
    Sampling = 9,
    Pseudonym = 10,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PublicKey(pub [u8; PUBLIC_KEY_LEN]);

impl PublicKey {
    pub fn as_bytes(&self) -> &[u8; PUBLIC_KEY_LEN] {
        &self.0
    }

    /// `h(pk)`, the form in which confirmations reference identities.
    pub fn key_hash(&self) -> Digest {
        hash(&self.0)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, hex::FromHexError> {
        let mut out = [0u8; PUBLIC_KEY_LEN];
        hex::decode_to_slice(s, &mut out)?;
        Ok(PublicKey(out))
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", &self.to_hex()[..16])
    }
}

impl fmt::Display for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for PublicKey {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for PublicKey {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        PublicKey::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Signature(pub [u8; SIGNATURE_LEN]);

impl Signature {
    pub fn as_bytes(&self) -> &[u8; SIGNATURE_LEN] {
        &self.0
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({}..)", hex::encode(&self.0[..8]))
    }
}

/// An ed25519 signing key together with its encoded public key.
#[derive(Clone)]
pub struct KeyPair {
    signing: SigningKey,
    public: PublicKey,
}

impl KeyPair {
    pub fn from_seed(seed: [u8; 32]) -> Self {
        let signing = SigningKey::from_bytes(&seed);
        let public = PublicKey(signing.verifying_key().to_bytes());
        KeyPair { signing, public }
    }

    pub fn generate<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut seed = [0u8; 32];
        rng.fill_bytes(&mut seed);
        Self::from_seed(seed)
    }

    pub fn public(&self) -> PublicKey {
        self.public
    }

    pub fn secret_seed(&self) -> [u8; 32] {
        self.signing.to_bytes()
    }

    /// Deterministic signature over `domain ‖ msg`.
    pub fn sign(&self, domain: Domain, msg: &[u8]) -> Signature {
        let mut buf = Vec::with_capacity(msg.len() + 1);
        buf.push(domain as u8);
        buf.extend_from_slice(msg);
        Signature(self.signing.sign(&buf).to_bytes())
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair").field("public", &self.public).finish()
    }
}

const VERIFY_CACHE_CAP: usize = 1 << 17;

thread_local! {
    // Only successful verifications are remembered, keyed by a digest of the
    // full (pk, domain, msg, sig) tuple, so a hit is exactly as strong as a
    // fresh check.
    static VERIFIED: RefCell<HashSet<Digest>> = RefCell::new(HashSet::new());
}

fn verify_uncached(pk: &PublicKey, payload: &[u8], sig: &Signature) -> bool {
    let Ok(vk) = VerifyingKey::from_bytes(&pk.0) else {
        return false;
    };
    let sig = ed25519_dalek::Signature::from_bytes(&sig.0);
    vk.verify_strict(payload, &sig).is_ok()
}

/// Checks `sig` over `domain ‖ msg` under `pk`. Strict verification rejects
/// non-canonical encodings so at most one signature per message verifies.
pub fn verify(pk: &PublicKey, domain: Domain, msg: &[u8], sig: &Signature) -> bool {
    let mut payload = Vec::with_capacity(msg.len() + 1);
    payload.push(domain as u8);
    payload.extend_from_slice(msg);
    let key = hash_parts(&[&pk.0, &sig.0, &hash(&payload).0]);
    if VERIFIED.with(|c| c.borrow().contains(&key)) {
        return true;
    }
    let ok = verify_uncached(pk, &payload, sig);
    if ok {
        VERIFIED.with(|c| {
            let mut c = c.borrow_mut();
            if c.len() >= VERIFY_CACHE_CAP {
                c.clear();
            }
            c.insert(key);
        });
    }
    ok
}

/// Output of one VRF evaluation: the next seed and its proof.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedUpdate {
    pub seed: Seed,
    pub proof: Signature,
}

pub fn vrf_evaluate(keys: &KeyPair, prev_seed: &Seed) -> SeedUpdate {
    let proof = keys.sign(Domain::Vrf, &prev_seed.0);
    SeedUpdate {
        seed: hash(&proof.0),
        proof,
    }
}

pub fn vrf_verify(pk: &PublicKey, prev_seed: &Seed, seed: &Seed, proof: &Signature) -> bool {
    hash(&proof.0) == *seed && verify(pk, Domain::Vrf, &prev_seed.0, proof)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_hash_is_sha256_of_nothing() {
        assert_eq!(
            hash(b"").to_hex(),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn pow2_places_single_bit() {
        let d = Digest::pow2(240);
        assert_eq!(d.0[1], 1);
        assert!(d.0.iter().enumerate().all(|(i, b)| i == 1 || *b == 0));
        assert_eq!(Digest::pow2(0).0[31], 1);
    }

    #[test]
    fn signatures_bind_domain() {
        let kp = KeyPair::from_seed([7; 32]);
        let sig = kp.sign(Domain::Intent, b"m");
        assert!(verify(&kp.public(), Domain::Intent, b"m", &sig));
        assert!(!verify(&kp.public(), Domain::Confirm, b"m", &sig));
    }

    #[test]
    fn cache_does_not_leak_across_messages() {
        let kp = KeyPair::from_seed([9; 32]);
        let sig = kp.sign(Domain::Block, b"abc");
        assert!(verify(&kp.public(), Domain::Block, b"abc", &sig));
        assert!(verify(&kp.public(), Domain::Block, b"abc", &sig));
        assert!(!verify(&kp.public(), Domain::Block, b"abd", &sig));
    }
}
