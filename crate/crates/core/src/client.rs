//! The user-side orchestrator: reads the eID, talks to the mediator and
//! produces the attribute proof `Π_Att = (att_m, σ_m, π_zkp)`.
//!
//! DG1 stays inside [`ClientSession`]. Outbound messages carry only its
//! digest, the salted digest inside `att_m`, and the proof.

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eid::{ChipPublicData, ChipState, DataGroup1, EidError};
use crate::mediator::{
    AttestRequest, KeyAttestationCert, Mediator, MediatorAttestation, MediatorChallenge, MediatorError,
};
use crate::nizk::{zk_prove, Crs, NizkError, Policy, Proof, Statement, Witness, NONCE_LEN};
use crate::primitives::{encode, hash, random_bytes, Ciphertext, Decoder, Digest32, PrimitiveError, Signature};
use crate::wire;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClientError {
    #[error(transparent)]
    Eid(#[from] EidError),
    #[error("no chip and no cached data")]
    NoSource,
    #[error("chip is required for chip authentication")]
    NoChip,
    #[error("mediator refused to attest")]
    NotAttested,
    #[error(transparent)]
    Nizk(#[from] NizkError),
    #[error(transparent)]
    Mediator(#[from] MediatorError),
    #[error("malformed {0}")]
    Malformed(&'static str),
}

impl From<PrimitiveError> for ClientError {
    fn from(_: PrimitiveError) -> Self {
        ClientError::Malformed("encoding")
    }
}

/// A chip in reach of the reader together with its access password.
pub struct ChipAccess<'a> {
    pub chip: &'a mut ChipState,
    pub password: [u8; 32],
}

impl<'a> ChipAccess<'a> {
    pub fn new(chip: &'a mut ChipState, password: [u8; 32]) -> Self {
        ChipAccess { chip, password }
    }
}

/// Opt-in store of previously read document data.
#[derive(Debug, Clone, Default)]
pub struct EidCache {
    enabled: bool,
    entry: Option<(DataGroup1, ChipPublicData)>,
}

impl EidCache {
    pub fn disabled() -> Self {
        EidCache::default()
    }

    pub fn opt_in() -> Self {
        EidCache { enabled: true, entry: None }
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    pub fn get(&self) -> Option<&(DataGroup1, ChipPublicData)> {
        self.entry.as_ref()
    }

    fn store(&mut self, dg1: &DataGroup1, public: &ChipPublicData) {
        if self.enabled {
            self.entry = Some((dg1.clone(), public.clone()));
        }
    }

    pub fn clear(&mut self) {
        self.entry = None;
    }
}

/// Per-session secrets of the client.
#[derive(Clone)]
pub struct ClientSession {
    pub nonce: [u8; NONCE_LEN],
    pub dg1: DataGroup1,
    pub public: ChipPublicData,
    pub c: Vec<u8>,
    pub policy: Policy,
}

impl std::fmt::Debug for ClientSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ClientSession")
            .field("public", &self.public)
            .field("policy", &self.policy)
            .finish_non_exhaustive()
    }
}

/// `Π_Att`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeProof {
    #[serde(with = "wire::b64")]
    pub att_m: Vec<u8>,
    pub sigma_m: Signature,
    pub pi_zkp: Proof,
}

impl AttributeProof {
    pub fn canonical(&self) -> Vec<u8> {
        encode(&[&self.att_m, self.sigma_m.as_ref(), &self.pi_zkp.to_bytes()])
    }

    pub fn from_canonical(bytes: &[u8]) -> Result<Self, ClientError> {
        let mut d = Decoder::new(bytes);
        let att_m = d.field()?.to_vec();
        let sigma_m = Signature(d.array()?);
        let pi_zkp = Proof::from_bytes(d.field()?)?;
        d.finish()?;
        Ok(AttributeProof { att_m, sigma_m, pi_zkp })
    }

    /// `hash(canonical(Π_Att))`, the value appended to the FIDO challenge.
    pub fn digest(&self) -> Digest32 {
        hash(&self.canonical())
    }

    /// `(m, c_m)`: the first 32 bytes of `att_m` and the remainder.
    pub fn split(&self) -> Option<(Digest32, &[u8])> {
        split_att(&self.att_m)
    }
}

pub(crate) fn split_att(att_m: &[u8]) -> Option<(Digest32, &[u8])> {
    if att_m.len() < 32 {
        return None;
    }
    let (m, c_m) = att_m.split_at(32);
    Some((Digest32::from_slice(m).ok()?, c_m))
}

/// Decodes a policy carried in a challenge extension.
pub fn parse_policy(ext: &[u8]) -> Result<Policy, NizkError> {
    let text = std::str::from_utf8(ext).map_err(|_| NizkError::BadPolicy("not UTF-8".into()))?;
    Policy::from_json(text)
}

#[derive(Debug, Clone, Default)]
pub struct Client {
    cache: EidCache,
}

impl Client {
    pub fn new(cache: EidCache) -> Self {
        Client { cache }
    }

    pub fn cache(&self) -> &EidCache {
        &self.cache
    }

    pub fn cache_mut(&mut self) -> &mut EidCache {
        &mut self.cache
    }

    /// `req_attest`: reads the chip (or the cache) and builds the mediator
    /// request under a fresh 128-bit nonce.
    pub fn req_attest<R: RngCore + CryptoRng>(
        &mut self,
        chip: Option<&mut ChipAccess<'_>>,
        c: &[u8],
        policy: &Policy,
        rng: &mut R,
    ) -> Result<(ClientSession, AttestRequest), ClientError> {
        let (dg1, public) = match chip {
            Some(access) => {
                let ch = access.chip.establish_channel(&access.password, rng)?;
                let public = access.chip.read_public(&ch, rng)?;
                let dg1 = access.chip.read_dg1(&ch, rng)?;
                self.cache.store(&dg1, &public);
                (dg1, public)
            }
            None => self.cache.get().cloned().ok_or(ClientError::NoSource)?,
        };
        let nonce: [u8; NONCE_LEN] = random_bytes(rng);
        let req = AttestRequest {
            dg1_hash: public.dg1_hash,
            pk_eid: public.pk_eid,
            pi_pa: public.pi_pa,
            c: c.to_vec(),
            nonce,
        };
        let session = ClientSession { nonce, dg1, public, c: c.to_vec(), policy: policy.clone() };
        Ok((session, req))
    }

    /// `attest_resp`: relays the mediator's command to the chip and its
    /// answer back, unmodified.
    pub fn attest_resp<R: RngCore + CryptoRng>(
        &self,
        chip: &mut ChipAccess<'_>,
        chal: &MediatorChallenge,
        rng: &mut R,
    ) -> Result<Ciphertext, ClientError> {
        Ok(chip.chip.ca_respond(&chal.pk_m, &chal.cmd_cha, rng)?)
    }

    /// `prove`: proves the policy about the attested salted digest.
    pub fn prove<R: RngCore + CryptoRng>(
        &self,
        session: &ClientSession,
        att: &MediatorAttestation,
        crs: &Crs,
        rng: &mut R,
    ) -> Result<AttributeProof, ClientError> {
        let sigma_m = att.sigma_m.ok_or(ClientError::NotAttested)?;
        let (m, _) = split_att(&att.att_m).ok_or(ClientError::Malformed("att_m"))?;
        let stmt = Statement { m, policy: session.policy.clone(), profile: crs.profile() };
        let wit = Witness { dg1: session.dg1.clone(), nonce: session.nonce };
        let pi_zkp = zk_prove(crs, &stmt, &wit, rng)?;
        Ok(AttributeProof { att_m: att.att_m.clone(), sigma_m, pi_zkp })
    }

    /// Runs the whole attestation and proof for challenge `c` against an
    /// in-process mediator. Returns the proof and the mediator's key
    /// attestation for `c`.
    pub fn obtain_proof<R: RngCore + CryptoRng>(
        &mut self,
        chip: &mut ChipAccess<'_>,
        mediator: &Mediator,
        c: &[u8],
        crs: &Crs,
        rng: &mut R,
    ) -> Result<(AttributeProof, KeyAttestationCert), ClientError> {
        let (session, att) = self.attest(chip, mediator, c, crs.policy(), rng)?;
        let proof = self.prove(&session, &att, crs, rng)?;
        Ok((proof, mediator.key_attestation(c)))
    }

    /// The mediator round trip alone.
    pub fn attest<R: RngCore + CryptoRng>(
        &mut self,
        chip: &mut ChipAccess<'_>,
        mediator: &Mediator,
        c: &[u8],
        policy: &Policy,
        rng: &mut R,
    ) -> Result<(ClientSession, MediatorAttestation), ClientError> {
        let (session, req) = self.req_attest(Some(chip), c, policy, rng)?;
        let (mut st, chal) = mediator.attest_chal(&req, rng)?;
        let resp = self.attest_resp(chip, &chal, rng)?;
        let att = mediator.attest(&mut st, &resp)?;
        Ok((session, att))
    }
}

/// Request from the browser-side script to the local client service.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalProofRequest {
    pub origin: String,
    #[serde(with = "wire::b64")]
    pub challenge: Vec<u8>,
    pub policy: Policy,
}

/// Reply of the local client service. `attribute_proof` is the canonical
/// encoding of `Π_Att`, so the caller can hash it without re-encoding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalProofResponse {
    #[serde(with = "wire::b64")]
    pub attribute_proof: Vec<u8>,
    pub mediator_cert: KeyAttestationCert,
}

impl LocalProofResponse {
    pub fn new(proof: &AttributeProof, cert: KeyAttestationCert) -> Self {
        LocalProofResponse { attribute_proof: proof.canonical(), mediator_cert: cert }
    }

    pub fn proof(&self) -> Result<AttributeProof, ClientError> {
        AttributeProof::from_canonical(&self.attribute_proof)
    }
}

/// Default port of the local client service; overridable via
/// [`LOCAL_PORT_ENV`].
pub const DEFAULT_LOCAL_PORT: u16 = 48_120;
pub const LOCAL_PORT_ENV: &str = "FIDOAC_CLIENT_PORT";
/// Path of the proof endpoint on the local client service.
pub const LOCAL_PROOF_PATH: &str = "/fidoac/proof";
