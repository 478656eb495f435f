//! Cryptographic building blocks shared by every party.
//!
//! * [`hash`]: SHA-256, and [`HashProfile`] for the data-group hashes that
//!   must also be evaluated inside the proof circuit.
//! * [`sign`]/[`verify`]: Ed25519. The same scheme serves the issuer, the
//!   mediator, the simulated TEE root and FIDO credentials.
//! * [`ke_derive`]: static Diffie–Hellman on the Ed25519 keys followed by
//!   HKDF-SHA256.
//! * [`ae_seal`]/[`ae_open`]: ChaCha20-Poly1305.
//!
//! Nothing here keeps global state; randomness is always passed in.

pub mod encoding;
pub mod sha256;

use std::fmt;

use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::ChaCha20Poly1305;
use curve25519_dalek::edwards::CompressedEdwardsY;
use curve25519_dalek::traits::IsIdentity;
use ed25519_dalek::{Signer, SigningKey, Verifier, VerifyingKey};
use hkdf::Hkdf;
use rand::{CryptoRng, RngCore};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

pub use encoding::{encode, Decoder, Encoder};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PrimitiveError {
    #[error("public key is not a valid group element")]
    BadPoint,
    #[error("authenticated decryption failed")]
    AuthFail,
    #[error("malformed encoding: {0}")]
    Malformed(&'static str),
}

macro_rules! byte_newtype {
    ($(#[$meta:meta])* $name:ident, $len:expr) => {
        $(#[$meta])*
        #[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(pub [u8; $len]);

        impl $name {
            pub const LEN: usize = $len;

            pub fn as_bytes(&self) -> &[u8; $len] {
                &self.0
            }

            pub fn from_slice(bytes: &[u8]) -> Result<Self, PrimitiveError> {
                bytes
                    .try_into()
                    .map(Self)
                    .map_err(|_| PrimitiveError::Malformed(concat!(stringify!($name), " has wrong length")))
            }

            pub fn to_hex(&self) -> String {
                hex::encode(self.0)
            }

            pub fn from_hex(s: &str) -> Result<Self, PrimitiveError> {
                let bytes = hex::decode(s.trim()).map_err(|_| PrimitiveError::Malformed("invalid hex"))?;
                Self::from_slice(&bytes)
            }
        }

        impl AsRef<[u8]> for $name {
            fn as_ref(&self) -> &[u8] {
                &self.0
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({})", stringify!($name), hex::encode(&self.0[..8.min($len)]))
            }
        }

        impl serde::Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                crate::wire::b64::serialize(&self.0, s)
            }
        }

        impl<'de> serde::Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let bytes: Vec<u8> = crate::wire::b64::deserialize(d)?;
                Self::from_slice(&bytes).map_err(serde::de::Error::custom)
            }
        }
    };
}

byte_newtype!(
    /// A 32-byte hash output.
    Digest32,
    32
);
byte_newtype!(
    /// Compressed Edwards point; doubles as Ed25519 verification key and
    /// key-exchange public value.
    PublicKey,
    32
);
byte_newtype!(
    /// Ed25519 signature bytes. Parsed lazily: malformed values simply fail
    /// verification.
    Signature,
    64
);

impl fmt::Display for Digest32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// SHA-256 of `data`.
pub fn hash(data: &[u8]) -> Digest32 {
    Digest32(Sha256::digest(data).into())
}

/// Hash used for the document digest and the salted attestation digest.
/// Those two hashes are re-evaluated inside the disclosure circuit, so the
/// profile is a system-wide setting shared by issuer, mediator, prover and
/// verifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HashProfile {
    /// SHA-256.
    #[default]
    Default,
    /// SHA-256 with the round loop cut at [`TEST_PROFILE_ROUNDS`].
    Test,
}

/// Round count of the reduced test profile. Sixteen is the smallest count in
/// which every message word of a block enters the state.
pub const TEST_PROFILE_ROUNDS: usize = 16;

impl HashProfile {
    pub fn rounds(self) -> usize {
        match self {
            HashProfile::Default => 64,
            HashProfile::Test => TEST_PROFILE_ROUNDS,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            HashProfile::Default => "default",
            HashProfile::Test => "test",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "default" => Some(HashProfile::Default),
            "test" => Some(HashProfile::Test),
            _ => None,
        }
    }

    pub fn digest(self, data: &[u8]) -> Digest32 {
        match self {
            HashProfile::Default => hash(data),
            HashProfile::Test => Digest32(sha256::sha256_rounds(data, self.rounds())),
        }
    }
}

impl fmt::Display for HashProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Signing / key-exchange secret. Deliberately not `Serialize`.
#[derive(Clone)]
pub struct SecretKey(SigningKey);

impl SecretKey {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        SecretKey(SigningKey::generate(rng))
    }

    pub fn from_seed(seed: [u8; 32]) -> Self {
        SecretKey(SigningKey::from_bytes(&seed))
    }

    /// Raw seed, for fixture files only.
    pub fn to_seed(&self) -> [u8; 32] {
        self.0.to_bytes()
    }

    pub fn public_key(&self) -> PublicKey {
        PublicKey(self.0.verifying_key().to_bytes())
    }
}

impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SecretKey(pk={:?})", self.public_key())
    }
}

#[derive(Clone, Debug)]
pub struct KeyPair {
    pub sk: SecretKey,
    pub pk: PublicKey,
}

impl KeyPair {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        Self::from_secret(SecretKey::generate(rng))
    }

    pub fn from_secret(sk: SecretKey) -> Self {
        let pk = sk.public_key();
        KeyPair { sk, pk }
    }
}

pub fn sign(sk: &SecretKey, msg: &[u8]) -> Signature {
    Signature(sk.0.sign(msg).to_bytes())
}

/// Returns `false` for malformed keys or signatures instead of erroring.
pub fn verify(pk: &PublicKey, msg: &[u8], sig: &Signature) -> bool {
    let Ok(vk) = VerifyingKey::from_bytes(&pk.0) else {
        return false;
    };
    let sig = ed25519_dalek::Signature::from_bytes(&sig.0);
    vk.verify(msg, &sig).is_ok()
}

/// 32-byte symmetric key produced by [`ke_derive`] or a password KDF.
#[derive(Clone, PartialEq, Eq)]
pub struct SessionKey(pub(crate) [u8; 32]);

impl SessionKey {
    pub fn fingerprint(&self) -> Digest32 {
        hash(&encode(&[b"fidoac/session-key-fp", &self.0]))
    }
}

impl fmt::Debug for SessionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SessionKey(fp={})", &self.fingerprint().to_hex()[..16])
    }
}

/// HKDF-SHA256 expanded to 32 bytes.
pub fn kdf(ikm: &[u8], salt: &[u8], info: &[u8]) -> [u8; 32] {
    let hk = Hkdf::<Sha256>::new(Some(salt), ikm);
    let mut out = [0u8; 32];
    hk.expand(info, &mut out).expect("32 bytes is a valid HKDF length");
    out
}

/// Static Diffie–Hellman between `sk_self` and `pk_peer`, then HKDF bound to
/// both public keys (in sorted order, so both sides agree).
pub fn ke_derive(pk_peer: &PublicKey, sk_self: &SecretKey) -> Result<SessionKey, PrimitiveError> {
    let point = CompressedEdwardsY(pk_peer.0).decompress().ok_or(PrimitiveError::BadPoint)?;
    if point.is_small_order() {
        return Err(PrimitiveError::BadPoint);
    }
    let shared = (sk_self.0.to_scalar() * point).mul_by_cofactor();
    if shared.is_identity() {
        return Err(PrimitiveError::BadPoint);
    }
    let own = sk_self.public_key();
    let (lo, hi) = if own.0 <= pk_peer.0 { (own, *pk_peer) } else { (*pk_peer, own) };
    let info = encode(&[b"fidoac/ke", &lo.0, &hi.0]);
    Ok(SessionKey(kdf(shared.compress().as_bytes(), b"fidoac/ke-salt", &info)))
}

#[derive(Clone, PartialEq, Eq, Debug, serde::Serialize, serde::Deserialize)]
pub struct Ciphertext {
    #[serde(with = "crate::wire::b64")]
    pub nonce: [u8; 12],
    #[serde(with = "crate::wire::b64")]
    pub ad: Vec<u8>,
    #[serde(with = "crate::wire::b64")]
    pub body: Vec<u8>,
}

impl Ciphertext {
    pub fn canonical(&self) -> Vec<u8> {
        encode(&[&self.nonce, &self.ad, &self.body])
    }

    pub fn from_canonical(bytes: &[u8]) -> Result<Self, PrimitiveError> {
        let mut d = Decoder::new(bytes);
        let nonce = d.array::<12>()?;
        let ad = d.field()?.to_vec();
        let body = d.field()?.to_vec();
        d.finish()?;
        Ok(Ciphertext { nonce, ad, body })
    }
}

pub fn ae_seal(key: &SessionKey, nonce: [u8; 12], ad: &[u8], pt: &[u8]) -> Ciphertext {
    let cipher = ChaCha20Poly1305::new((&key.0).into());
    let body =
        cipher.encrypt((&nonce).into(), Payload { msg: pt, aad: ad }).expect("in-memory encryption does not fail");
    Ciphertext { nonce, ad: ad.to_vec(), body }
}

pub fn ae_open(key: &SessionKey, ct: &Ciphertext) -> Result<Vec<u8>, PrimitiveError> {
    let cipher = ChaCha20Poly1305::new((&key.0).into());
    cipher.decrypt((&ct.nonce).into(), Payload { msg: &ct.body, aad: &ct.ad }).map_err(|_| PrimitiveError::AuthFail)
}

/// Fresh AE nonce.
pub fn random_nonce<R: RngCore + CryptoRng>(rng: &mut R) -> [u8; 12] {
    let mut n = [0u8; 12];
    rng.fill_bytes(&mut n);
    n
}

pub fn random_bytes<const N: usize, R: RngCore + CryptoRng>(rng: &mut R) -> [u8; N] {
    let mut b = [0u8; N];
    rng.fill_bytes(&mut b);
    b
}
