//! Account keys and the signature scheme behind P2PK scripts.
//!
//! Accounts are identified by 33-byte compressed secp256k1 public keys.
//! Signatures are deterministic (RFC 6979) ECDSA in 64-byte compact form.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::sync::{Mutex, OnceLock};

use secp256k1::{ecdsa, All, Message, Secp256k1, SecretKey};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::hash::{sha256, Hash256};

pub const PUBLIC_KEY_LEN: usize = 33;

fn secp() -> &'static Secp256k1<All> {
    static CTX: OnceLock<Secp256k1<All>> = OnceLock::new();
    CTX.get_or_init(Secp256k1::new)
}

/// Identifier of the signature scheme a chain is configured with.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SignatureScheme {
    #[default]
    #[serde(rename = "secp256k1-ecdsa")]
    Secp256k1Ecdsa,
}

impl SignatureScheme {
    pub fn id(&self) -> &'static str {
        match self {
            SignatureScheme::Secp256k1Ecdsa => "secp256k1-ecdsa",
        }
    }

    pub fn verify(&self, key: &PublicKey, digest: &Hash256, signature: &[u8]) -> bool {
        match self {
            SignatureScheme::Secp256k1Ecdsa => {
                let Ok(pk) = secp256k1::PublicKey::from_slice(&key.0) else {
                    return false;
                };
                let Ok(sig) = ecdsa::Signature::from_compact(signature) else {
                    return false;
                };
                let msg = Message::from_digest(digest.0);
                secp().verify_ecdsa(&msg, &sig, &pk).is_ok()
            }
        }
    }
}

/// A compressed public key; the account identifier.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PublicKey(pub [u8; PUBLIC_KEY_LEN]);

impl PublicKey {
    /// Accepts any 33-byte string with a compressed-point prefix. Curve
    /// membership is only checked when a signature is verified.
    pub fn from_slice(bytes: &[u8]) -> Option<Self> {
        if bytes.len() != PUBLIC_KEY_LEN || !matches!(bytes[0], 0x02 | 0x03) {
            return None;
        }
        let mut out = [0u8; PUBLIC_KEY_LEN];
        out.copy_from_slice(bytes);
        Some(PublicKey(out))
    }

    pub fn as_bytes(&self) -> &[u8; PUBLIC_KEY_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    /// First eight hex characters, for compact dumps.
    pub fn short(&self) -> String {
        self.to_hex()[..10].to_string()
    }
}

impl fmt::Display for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", self.short())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid public key encoding")]
pub struct InvalidKey;

impl FromStr for PublicKey {
    type Err = InvalidKey;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bytes = hex::decode(s).map_err(|_| InvalidKey)?;
        PublicKey::from_slice(&bytes).ok_or(InvalidKey)
    }
}

impl Serialize for PublicKey {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for PublicKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A secret key together with its public key.
#[derive(Clone)]
pub struct KeyPair {
    secret: SecretKey,
    public: PublicKey,
}

impl KeyPair {
    pub fn from_secret_bytes(bytes: &[u8; 32]) -> Result<Self, InvalidKey> {
        let secret = SecretKey::from_slice(bytes).map_err(|_| InvalidKey)?;
        Ok(Self::from_secret(secret))
    }

    fn from_secret(secret: SecretKey) -> Self {
        let public = PublicKey(secret.public_key(secp()).serialize());
        KeyPair { secret, public }
    }

    /// Deterministic key derived from an integer seed.
    pub fn from_seed(seed: u64) -> Self {
        let mut counter = 0u32;
        loop {
            let mut material = b"mcoin-key".to_vec();
            material.extend_from_slice(&seed.to_le_bytes());
            material.extend_from_slice(&counter.to_le_bytes());
            if let Ok(kp) = Self::from_secret_bytes(&sha256(&material).0) {
                return kp;
            }
            counter += 1;
        }
    }

    pub fn random() -> Self {
        let (secret, _) = secp().generate_keypair(&mut secp256k1::rand::thread_rng());
        Self::from_secret(secret)
    }

    pub fn public(&self) -> PublicKey {
        self.public
    }

    pub fn secret_bytes(&self) -> [u8; 32] {
        self.secret.secret_bytes()
    }

    pub fn sign(&self, digest: &Hash256) -> Vec<u8> {
        let msg = Message::from_digest(digest.0);
        secp().sign_ecdsa(&msg, &self.secret).serialize_compact().to_vec()
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair").field("public", &self.public).finish_non_exhaustive()
    }
}

/// Memo of signatures already verified, shared between nodes that see the
/// same transactions.
#[derive(Debug, Default)]
pub struct SignatureCache {
    seen: Mutex<HashSet<Hash256>>,
}

impl SignatureCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn verify(
        &self,
        scheme: SignatureScheme,
        key: &PublicKey,
        digest: &Hash256,
        signature: &[u8],
    ) -> bool {
        let mut material = Vec::with_capacity(PUBLIC_KEY_LEN + 32 + signature.len() + 1);
        material.push(scheme as u8);
        material.extend_from_slice(&key.0);
        material.extend_from_slice(&digest.0);
        material.extend_from_slice(signature);
        let entry = sha256(&material);
        if self.seen.lock().expect("signature cache poisoned").contains(&entry) {
            return true;
        }
        let ok = scheme.verify(key, digest, signature);
        if ok {
            self.seen.lock().expect("signature cache poisoned").insert(entry);
        }
        ok
    }

    pub fn len(&self) -> usize {
        self.seen.lock().expect("signature cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
