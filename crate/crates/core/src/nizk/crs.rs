//! Common reference string and the trapdoor Fiat–Shamir transform.
//!
//! The challenge is derived as `e = H(P)` with `P = t·G + r·H`, where `t`
//! hashes the prover's first message and `r` is a prover-chosen scalar
//! carried in the proof. For an honest CRS, `H` is hashed to the group from
//! public data, so nobody knows `log_G H` and `P` binds `t`. A simulation
//! CRS sets `H = td·G`; knowing `td`, a simulator fixes `P` (hence `e`)
//! first and solves for `r` afterwards.

use std::sync::Arc;

use curve25519_dalek::constants::RISTRETTO_BASEPOINT_POINT;
use curve25519_dalek::ristretto::{CompressedRistretto, RistrettoPoint};
use curve25519_dalek::Scalar;
use rand::{CryptoRng, RngCore};
use sha2::{Digest as _, Sha256, Sha512};

use super::circuit::Circuit;
use super::policy::Policy;
use super::relation::circuit_for;
use super::NizkError;
use crate::primitives::{encode, hash, Decoder, Digest32, HashProfile};

pub const DEFAULT_TAU: u32 = 137;
pub const TEST_TAU: u32 = 40;
pub const DEFAULT_SEED: &[u8] = b"fidoac/crs/v1";

/// Default repetition count for a profile.
pub fn default_tau(profile: HashProfile) -> u32 {
    match profile {
        HashProfile::Default => DEFAULT_TAU,
        HashProfile::Test => TEST_TAU,
    }
}

#[derive(Clone)]
pub struct Crs {
    policy: Policy,
    profile: HashProfile,
    tau: u32,
    seed: Vec<u8>,
    h: RistrettoPoint,
    circuit: Arc<Circuit>,
}

impl std::fmt::Debug for Crs {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Crs")
            .field("policy", &self.policy.to_string())
            .field("profile", &self.profile)
            .field("tau", &self.tau)
            .field("circuit", &self.circuit.digest())
            .finish()
    }
}

impl PartialEq for Crs {
    fn eq(&self, other: &Self) -> bool {
        self.canonical() == other.canonical()
    }
}

/// Simulation trapdoor: the discrete log of the CRS point `H`.
#[derive(Clone)]
pub struct Trapdoor(pub(crate) Scalar);

impl std::fmt::Debug for Trapdoor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Trapdoor(..)")
    }
}

fn hash_to_point(seed: &[u8], circuit: &Digest32, tau: u32) -> RistrettoPoint {
    let wide: [u8; 64] =
        Sha512::digest(encode(&[b"fidoac/crs-point", seed, circuit.as_ref(), &tau.to_be_bytes()])).into();
    RistrettoPoint::from_uniform_bytes(&wide)
}

impl Crs {
    fn build(policy: &Policy, profile: HashProfile, tau: u32) -> Result<Arc<Circuit>, NizkError> {
        if tau == 0 {
            return Err(NizkError::BadTau);
        }
        circuit_for(policy, profile)
    }

    /// Honest, transparent setup. Deterministic in all inputs.
    pub fn setup(policy: &Policy, profile: HashProfile, tau: u32, seed: &[u8]) -> Result<Self, NizkError> {
        let circuit = Self::build(policy, profile, tau)?;
        let h = hash_to_point(seed, &circuit.digest(), tau);
        Ok(Crs { policy: policy.clone(), profile, tau, seed: seed.to_vec(), h, circuit })
    }

    /// Setup that keeps the simulation trapdoor.
    pub fn setup_with_trapdoor<R: RngCore + CryptoRng>(
        policy: &Policy,
        profile: HashProfile,
        tau: u32,
        rng: &mut R,
    ) -> Result<(Self, Trapdoor), NizkError> {
        let circuit = Self::build(policy, profile, tau)?;
        let td = loop {
            let s = random_scalar(rng);
            if s != Scalar::ZERO {
                break s;
            }
        };
        let crs =
            Crs { policy: policy.clone(), profile, tau, seed: Vec::new(), h: td * RISTRETTO_BASEPOINT_POINT, circuit };
        Ok((crs, Trapdoor(td)))
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn profile(&self) -> HashProfile {
        self.profile
    }

    pub fn tau(&self) -> u32 {
        self.tau
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    pub fn circuit_digest(&self) -> Digest32 {
        self.circuit.digest()
    }

    pub(crate) fn point(&self) -> RistrettoPoint {
        self.h
    }

    pub fn holds_trapdoor(&self, td: &Trapdoor) -> bool {
        td.0 * RISTRETTO_BASEPOINT_POINT == self.h
    }

    /// Identifier absorbed into every Fiat–Shamir transcript.
    pub fn id(&self) -> Digest32 {
        hash(&self.canonical())
    }

    pub fn canonical(&self) -> Vec<u8> {
        encode(&[
            b"fidoac/crs",
            self.profile.tag().as_bytes(),
            &self.policy.canonical(),
            &self.tau.to_be_bytes(),
            &self.seed,
            self.h.compress().as_bytes(),
            self.circuit.digest().as_ref(),
        ])
    }

    /// Parses an honest CRS. The point is recomputed from the seed and must
    /// match, so a CRS carrying a planted trapdoor is rejected.
    pub fn from_canonical(bytes: &[u8]) -> Result<Self, NizkError> {
        let bad = |_| NizkError::Malformed("crs");
        let mut d = Decoder::new(bytes);
        if d.field().map_err(bad)? != b"fidoac/crs" {
            return Err(NizkError::Malformed("crs tag"));
        }
        let profile = std::str::from_utf8(d.field().map_err(bad)?)
            .ok()
            .and_then(HashProfile::from_tag)
            .ok_or(NizkError::Malformed("crs profile"))?;
        let policy = std::str::from_utf8(d.field().map_err(bad)?)
            .map_err(|_| NizkError::Malformed("crs policy"))
            .and_then(Policy::from_canonical)?;
        let tau = d.u32().map_err(bad)?;
        let seed = d.field().map_err(bad)?.to_vec();
        let h: [u8; 32] = d.array().map_err(bad)?;
        let digest: [u8; 32] = d.array().map_err(bad)?;
        d.finish().map_err(bad)?;
        let crs = Crs::setup(&policy, profile, tau, &seed)?;
        if crs.h.compress().0 != h || crs.circuit.digest().0 != digest {
            return Err(NizkError::Malformed("crs does not match its seed and circuit"));
        }
        Ok(crs)
    }
}

pub(crate) fn random_scalar<R: RngCore + CryptoRng>(rng: &mut R) -> Scalar {
    let mut wide = [0u8; 64];
    rng.fill_bytes(&mut wide);
    Scalar::from_bytes_mod_order_wide(&wide)
}

/// Maps a transcript digest to a scalar.
pub(crate) fn transcript_scalar(t: &Digest32) -> Scalar {
    let wide: [u8; 64] = Sha512::digest(encode(&[b"fidoac/fs-scalar", t.as_ref()])).into();
    Scalar::from_bytes_mod_order_wide(&wide)
}

/// `P = t·G + r·H`.
pub(crate) fn chameleon(crs: &Crs, t: &Scalar, r: &Scalar) -> CompressedRistretto {
    RistrettoPoint::vartime_double_scalar_mul_basepoint(r, &crs.point(), t).compress()
}

/// Expands `P` into `n` uniform challenges in {0, 1, 2}.
pub(crate) fn challenge_trits(p: &CompressedRistretto, n: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(n);
    let mut counter = 0u32;
    while out.len() < n {
        let block: [u8; 32] =
            Sha256::digest(encode(&[b"fidoac/fs-trits", p.as_bytes(), &counter.to_be_bytes()])).into();
        counter += 1;
        for mut byte in block {
            // 243 = 3^5; rejecting larger bytes keeps the trits uniform.
            if byte >= 243 {
                continue;
            }
            for _ in 0..5 {
                if out.len() == n {
                    break;
                }
                out.push(byte % 3);
                byte /= 3;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eid::Date;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn age() -> Policy {
        Policy::age_over(18, Date::parse("20230101").unwrap())
    }

    #[test]
    fn setup_is_deterministic() {
        let a = Crs::setup(&age(), HashProfile::Test, 40, DEFAULT_SEED).unwrap();
        let b = Crs::setup(&age(), HashProfile::Test, 40, DEFAULT_SEED).unwrap();
        assert_eq!(a.canonical(), b.canonical());
        let other = Crs::setup(&Policy::None, HashProfile::Test, 40, DEFAULT_SEED).unwrap();
        assert_ne!(a.circuit_digest(), other.circuit_digest());
        assert!(matches!(Crs::setup(&age(), HashProfile::Test, 0, DEFAULT_SEED), Err(NizkError::BadTau)));
    }

    #[test]
    fn canonical_roundtrip_and_planted_point_rejected() {
        let a = Crs::setup(&age(), HashProfile::Test, 40, DEFAULT_SEED).unwrap();
        assert_eq!(Crs::from_canonical(&a.canonical()).unwrap(), a);
        let (t, _) =
            Crs::setup_with_trapdoor(&age(), HashProfile::Test, 40, &mut ChaCha20Rng::seed_from_u64(1)).unwrap();
        assert!(Crs::from_canonical(&t.canonical()).is_err());
    }

    #[test]
    fn trits_are_roughly_uniform() {
        let p = RISTRETTO_BASEPOINT_POINT.compress();
        let t = challenge_trits(&p, 30_000);
        let mut counts = [0usize; 3];
        for x in t {
            counts[x as usize] += 1;
        }
        for c in counts {
            assert!((9_500..10_500).contains(&c), "{counts:?}");
        }
    }

    #[test]
    fn trapdoor_is_recognised() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let (crs, td) = Crs::setup_with_trapdoor(&age(), HashProfile::Test, 4, &mut rng).unwrap();
        assert!(crs.holds_trapdoor(&td));
        let honest = Crs::setup(&age(), HashProfile::Test, 4, DEFAULT_SEED).unwrap();
        assert!(!honest.holds_trapdoor(&td));
    }
}
