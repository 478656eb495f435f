//! The trusted attestor.
//!
//! The mediator checks passive authentication of the document data, runs
//! chip authentication against the live chip, and signs
//! `att_m = H(dg1_hash || nonce) || c`. It never sees DG1 itself.
//!
//! Its signing key is certified per session by a simulated TEE root: the
//! [`KeyAttestationCert`] names the mediator package, its certificate
//! fingerprint, and carries the relying party's challenge.

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eid::{pa_verify, ChipPublicData, CA_CHALLENGE_LEN, GET_CHALLENGE};
use crate::primitives::{
    ae_open, ae_seal, encode, ke_derive, random_nonce, sign, verify, Ciphertext, Decoder, Digest32, HashProfile,
    KeyPair, PrimitiveError, PublicKey, SecretKey, SessionKey, Signature,
};
use crate::wire;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MediatorError {
    #[error("chip public key is not a valid group element")]
    BadPoint,
    #[error("attestation state already consumed")]
    StateReplay,
    #[error("malformed {0}")]
    Malformed(&'static str),
}

impl From<PrimitiveError> for MediatorError {
    fn from(e: PrimitiveError) -> Self {
        match e {
            PrimitiveError::BadPoint => MediatorError::BadPoint,
            PrimitiveError::Malformed(what) => MediatorError::Malformed(what),
            PrimitiveError::AuthFail => MediatorError::Malformed("ciphertext"),
        }
    }
}

/// `req_M = (hash(DG), pk_eID, π_PA, c, nonce)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttestRequest {
    pub dg1_hash: Digest32,
    pub pk_eid: PublicKey,
    pub pi_pa: Signature,
    #[serde(with = "wire::b64")]
    pub c: Vec<u8>,
    #[serde(with = "wire::b64")]
    pub nonce: [u8; 16],
}

impl AttestRequest {
    pub fn canonical(&self) -> Vec<u8> {
        encode(&[self.dg1_hash.as_ref(), self.pk_eid.as_ref(), self.pi_pa.as_ref(), &self.c, &self.nonce])
    }

    pub fn from_canonical(bytes: &[u8]) -> Result<Self, MediatorError> {
        let mut d = Decoder::new(bytes);
        let req = AttestRequest {
            dg1_hash: Digest32(d.array()?),
            pk_eid: PublicKey(d.array()?),
            pi_pa: Signature(d.array()?),
            c: d.field()?.to_vec(),
            nonce: d.array()?,
        };
        d.finish()?;
        Ok(req)
    }

    pub fn chip_public(&self) -> ChipPublicData {
        ChipPublicData { dg1_hash: self.dg1_hash, pk_eid: self.pk_eid, pi_pa: self.pi_pa }
    }
}

/// `chal = (pk_M, cmd_cha)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MediatorChallenge {
    pub pk_m: PublicKey,
    pub cmd_cha: Ciphertext,
}

impl MediatorChallenge {
    pub fn canonical(&self) -> Vec<u8> {
        encode(&[self.pk_m.as_ref(), &self.cmd_cha.canonical()])
    }

    pub fn from_canonical(bytes: &[u8]) -> Result<Self, MediatorError> {
        let mut d = Decoder::new(bytes);
        let pk_m = PublicKey(d.array()?);
        let cmd_cha = Ciphertext::from_canonical(d.field()?)?;
        d.finish()?;
        Ok(MediatorChallenge { pk_m, cmd_cha })
    }
}

/// Session state between the challenge and the attestation. One-shot.
#[derive(Debug)]
pub struct AttestState {
    req: AttestRequest,
    key_ses: SessionKey,
    cmd_cha: Ciphertext,
    consumed: bool,
}

impl AttestState {
    pub fn request(&self) -> &AttestRequest {
        &self.req
    }

    pub fn is_consumed(&self) -> bool {
        self.consumed
    }
}

/// `(att_m, σ_m)`; `sigma_m` is `None` when either check failed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MediatorAttestation {
    #[serde(with = "wire::b64")]
    pub att_m: Vec<u8>,
    pub sigma_m: Option<Signature>,
}

impl MediatorAttestation {
    pub fn canonical(&self) -> Vec<u8> {
        let sig = self.sigma_m.as_ref().map(|s| s.as_ref()).unwrap_or(&[]);
        encode(&[&self.att_m, sig])
    }

    pub fn from_canonical(bytes: &[u8]) -> Result<Self, MediatorError> {
        let mut d = Decoder::new(bytes);
        let att_m = d.field()?.to_vec();
        let sig = d.field()?;
        d.finish()?;
        let sigma_m = if sig.is_empty() { None } else { Some(Signature::from_slice(sig)?) };
        Ok(MediatorAttestation { att_m, sigma_m })
    }
}

/// Computes `att_m = H(dg1_hash || nonce) || c` under `profile`.
pub fn attestation_message(profile: HashProfile, dg1_hash: &Digest32, nonce: &[u8; 16], c: &[u8]) -> Vec<u8> {
    let mut salted = dg1_hash.0.to_vec();
    salted.extend_from_slice(nonce);
    let mut att_m = profile.digest(&salted).0.to_vec();
    att_m.extend_from_slice(c);
    att_m
}

/// Hardware-style key attestation for the mediator key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyAttestationCert {
    pub pk_m: PublicKey,
    pub package_name: String,
    pub package_cert_fp: Digest32,
    #[serde(with = "wire::b64")]
    pub attestation_challenge: Vec<u8>,
    pub root_sig: Signature,
}

impl KeyAttestationCert {
    fn tbs(pk_m: &PublicKey, package_name: &str, fp: &Digest32, challenge: &[u8]) -> Vec<u8> {
        encode(&[b"fidoac/key-attestation", pk_m.as_ref(), package_name.as_bytes(), fp.as_ref(), challenge])
    }

    pub fn canonical(&self) -> Vec<u8> {
        encode(&[
            self.pk_m.as_ref(),
            self.package_name.as_bytes(),
            self.package_cert_fp.as_ref(),
            &self.attestation_challenge,
            self.root_sig.as_ref(),
        ])
    }

    pub fn from_canonical(bytes: &[u8]) -> Result<Self, MediatorError> {
        let mut d = Decoder::new(bytes);
        let pk_m = PublicKey(d.array()?);
        let package_name =
            String::from_utf8(d.field()?.to_vec()).map_err(|_| MediatorError::Malformed("package name"))?;
        let cert = KeyAttestationCert {
            pk_m,
            package_name,
            package_cert_fp: Digest32(d.array()?),
            attestation_challenge: d.field()?.to_vec(),
            root_sig: Signature(d.array()?),
        };
        d.finish()?;
        Ok(cert)
    }
}

pub fn issue_key_attestation(
    pk_m: &PublicKey,
    package_name: &str,
    package_cert_fp: &Digest32,
    challenge: &[u8],
    root_sk: &SecretKey,
) -> KeyAttestationCert {
    let root_sig = sign(root_sk, &KeyAttestationCert::tbs(pk_m, package_name, package_cert_fp, challenge));
    KeyAttestationCert {
        pk_m: *pk_m,
        package_name: package_name.to_owned(),
        package_cert_fp: *package_cert_fp,
        attestation_challenge: challenge.to_vec(),
        root_sig,
    }
}

/// What a verifier expects the certificate to say.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpectedAttestation<'a> {
    pub package_name: &'a str,
    pub package_cert_fp: &'a Digest32,
    pub challenge: &'a [u8],
}

pub fn verify_key_attestation(
    cert: &KeyAttestationCert,
    expected: &ExpectedAttestation<'_>,
    root_pk: &PublicKey,
) -> bool {
    cert.package_name == expected.package_name
        && &cert.package_cert_fp == expected.package_cert_fp
        && cert.attestation_challenge == expected.challenge
        && verify(
            root_pk,
            &KeyAttestationCert::tbs(
                &cert.pk_m,
                &cert.package_name,
                &cert.package_cert_fp,
                &cert.attestation_challenge,
            ),
            &cert.root_sig,
        )
}

/// The simulated secure element that certifies mediator keys.
#[derive(Debug, Clone)]
pub struct TeeRoot {
    keys: KeyPair,
}

impl TeeRoot {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        TeeRoot { keys: KeyPair::generate(rng) }
    }

    pub fn from_secret(sk: SecretKey) -> Self {
        TeeRoot { keys: KeyPair::from_secret(sk) }
    }

    pub fn public_key(&self) -> PublicKey {
        self.keys.pk
    }

    pub fn secret(&self) -> &SecretKey {
        &self.keys.sk
    }
}

#[derive(Debug, Clone)]
pub struct MediatorConfig {
    pub issuer_pk: PublicKey,
    pub profile: HashProfile,
    pub package_name: String,
    pub package_cert_fp: Digest32,
}

impl MediatorConfig {
    pub const DEFAULT_PACKAGE: &'static str = "org.fidoac.mediator";

    pub fn new(issuer_pk: PublicKey, profile: HashProfile) -> Self {
        MediatorConfig {
            issuer_pk,
            profile,
            package_name: Self::DEFAULT_PACKAGE.to_owned(),
            package_cert_fp: crate::primitives::hash(b"fidoac/mediator-package-cert"),
        }
    }
}

/// Outcome bits of [`Mediator::attest`], exposed for experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttestChecks {
    pub b_pa: bool,
    pub b_ca: bool,
}

#[derive(Debug, Clone)]
pub struct Mediator {
    keys: KeyPair,
    tee: TeeRoot,
    config: MediatorConfig,
}

impl Mediator {
    pub fn new(keys: KeyPair, tee: TeeRoot, config: MediatorConfig) -> Self {
        Mediator { keys, tee, config }
    }

    pub fn public_key(&self) -> PublicKey {
        self.keys.pk
    }

    /// Secret key, for deployment fixtures only.
    pub fn secret_key(&self) -> &SecretKey {
        &self.keys.sk
    }

    pub fn config(&self) -> &MediatorConfig {
        &self.config
    }

    pub fn tee_root(&self) -> PublicKey {
        self.tee.public_key()
    }

    /// `attest_chal`: derives the session key with the chip and encrypts the
    /// get-challenge command under a fresh nonce.
    pub fn attest_chal<R: RngCore + CryptoRng>(
        &self,
        req: &AttestRequest,
        rng: &mut R,
    ) -> Result<(AttestState, MediatorChallenge), MediatorError> {
        let key_ses = ke_derive(&req.pk_eid, &self.keys.sk)?;
        let cmd_cha = ae_seal(&key_ses, random_nonce(rng), b"", GET_CHALLENGE);
        let st = AttestState { req: req.clone(), key_ses, cmd_cha: cmd_cha.clone(), consumed: false };
        Ok((st, MediatorChallenge { pk_m: self.keys.pk, cmd_cha }))
    }

    /// `attest`: checks PA and CA, always computes `att_m`, signs only if
    /// both checks pass. Consumes the state.
    pub fn attest(&self, st: &mut AttestState, resp: &Ciphertext) -> Result<MediatorAttestation, MediatorError> {
        self.attest_with_checks(st, resp).map(|(a, _)| a)
    }

    pub fn attest_with_checks(
        &self,
        st: &mut AttestState,
        resp: &Ciphertext,
    ) -> Result<(MediatorAttestation, AttestChecks), MediatorError> {
        if st.consumed {
            return Err(MediatorError::StateReplay);
        }
        st.consumed = true;
        let b_pa = pa_verify(&st.req.chip_public(), &self.config.issuer_pk);
        let b_ca = resp.ad == st.cmd_cha.canonical()
            && ae_open(&st.key_ses, resp).is_ok_and(|pt| pt.len() == CA_CHALLENGE_LEN);
        let att_m = attestation_message(self.config.profile, &st.req.dg1_hash, &st.req.nonce, &st.req.c);
        let sigma_m = (b_pa && b_ca).then(|| sign(&self.keys.sk, &att_m));
        Ok((MediatorAttestation { att_m, sigma_m }, AttestChecks { b_pa, b_ca }))
    }

    /// Key attestation binding this mediator's key to `challenge`.
    pub fn key_attestation(&self, challenge: &[u8]) -> KeyAttestationCert {
        issue_key_attestation(
            &self.keys.pk,
            &self.config.package_name,
            &self.config.package_cert_fp,
            challenge,
            self.tee.secret(),
        )
    }
}
