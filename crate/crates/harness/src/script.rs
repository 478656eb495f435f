//! Data-driven adversaries.
//!
//! A script is a list of steps. Each step names an oracle (or a local
//! computation the adversary can do without secrets), takes earlier results
//! by capture name, and binds its own result under `bind`.

use std::collections::BTreeMap;

use fidoac::client::{AttributeProof, ChipAccess, Client, ClientSession, EidCache};
use fidoac::eid::{password_for, Attributes, ChipState, Issuer};
use fidoac::fido::{bind_challenge, AcExtension, BoundResponse, ChallengeWithPolicy, TokenResponse};
use fidoac::mediator::{AttestRequest, KeyAttestationCert, MediatorAttestation, MediatorChallenge};
use fidoac::nizk::adversary::cheating_prove;
use fidoac::nizk::{salted_digest, zk_prove, Policy, Proof, Statement, Witness};
use fidoac::primitives::{ae_seal, ke_derive, random_bytes, random_nonce, Ciphertext, KeyPair, SecretKey, Signature};
use fidoac::wire::b64_decode;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::world::{Handle, OracleError, TokenInput, TokenOutput, World};

/// Attribute set as written in scripts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    /// YYMMDD
    pub birth_date: String,
    #[serde(default = "default_expiry")]
    pub expiry_date: String,
    #[serde(default = "default_nationality")]
    pub nationality: String,
    #[serde(default = "default_sex")]
    pub sex: String,
}

fn default_expiry() -> String {
    "310101".into()
}
fn default_nationality() -> String {
    "DEU".into()
}
fn default_sex() -> String {
    "X".into()
}

impl AttributeSpec {
    pub fn new(name: &str, birth_date: &str) -> Self {
        AttributeSpec {
            name: name.into(),
            birth_date: birth_date.into(),
            expiry_date: default_expiry(),
            nationality: default_nationality(),
            sex: default_sex(),
        }
    }

    pub fn attributes(&self) -> Attributes {
        Attributes::new(&self.name, &self.birth_date, &self.expiry_date, &self.nationality, &self.sex)
    }
}

/// A captured result.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum Value {
    Challenge(ChallengeWithPolicy),
    Token(TokenOutput),
    Response(BoundResponse),
    Bit(bool),
    Request(AttestRequest),
    MedChallenge(MediatorChallenge),
    CaResponse(Ciphertext),
    Attestation(MediatorAttestation),
    Proof(AttributeProof),
    Cert(KeyAttestationCert),
    #[serde(with = "fidoac::wire::b64")]
    Bytes(Vec<u8>),
    /// Name of an adversary-held chip.
    Chip(String),
    Bottom(String),
}

impl Value {
    fn kind(&self) -> &'static str {
        match self {
            Value::Challenge(_) => "challenge",
            Value::Token(_) => "token",
            Value::Response(_) => "response",
            Value::Bit(_) => "bit",
            Value::Request(_) => "request",
            Value::MedChallenge(_) => "med_challenge",
            Value::CaResponse(_) => "ca_response",
            Value::Attestation(_) => "attestation",
            Value::Proof(_) => "proof",
            Value::Cert(_) => "cert",
            Value::Bytes(_) => "bytes",
            Value::Chip(_) => "chip",
            Value::Bottom(_) => "bottom",
        }
    }
}

/// Fields of an attestation request an adversary may corrupt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestField {
    Dg1Hash,
    PkEid,
    PiPa,
    C,
    Nonce,
}

/// Computations the adversary performs on its own.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Forge {
    /// A document from an issuer key the adversary made up.
    FakeChip {
        attributes: AttributeSpec,
    },
    /// A skimmed copy of a token's document without its chip key.
    CloneChip {
        token: usize,
    },
    /// `req_attest` on an adversary-held chip.
    ChipRequest {
        chip: String,
        challenge: String,
    },
    /// Chip authentication answered by an adversary-held chip.
    ChipRespond {
        chip: String,
        chal: String,
    },
    /// A chip-authentication answer under a key of the adversary's choice.
    GuessCa {
        chal: String,
    },
    TamperRequest {
        request: String,
        field: RequestField,
    },
    /// `Π_Att` from an attestation and an adversary-held chip. Uses a
    /// random `σ_m` when the attestation carries none and the cheating
    /// prover when the chip's data does not satisfy the policy.
    ForgeProof {
        attestation: String,
        chip: String,
        server: usize,
    },
    RandomSigma {
        proof: String,
    },
    FlipProof {
        proof: String,
    },
    ExtractProof {
        response: String,
    },
    Splice {
        response: String,
        proof: String,
    },
    Bind {
        challenge: String,
        proof: String,
    },
    Assemble {
        token: String,
        proof: String,
        cert: String,
    },
    AcChallenge {
        challenge: String,
    },
    /// Plays the mediator with a key of its own.
    MediatorChal {
        request: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Step {
    Start {
        server: usize,
        i: usize,
        j: usize,
        bind: String,
    },
    /// Token oracle with the client part.
    Challenge {
        token: usize,
        i: usize,
        j: usize,
        challenge: String,
        cid: Option<String>,
        bind: String,
    },
    /// Token oracle on a raw message; origin and credential come from
    /// `challenge`.
    ChallengeRaw {
        token: usize,
        i: usize,
        j: usize,
        challenge: String,
        message: String,
        bind: String,
    },
    Complete {
        server: usize,
        i: usize,
        j: usize,
        response: String,
        bind: String,
    },
    MedReq {
        token: usize,
        challenge: String,
        bind: String,
    },
    MedChal {
        session: usize,
        request: String,
        bind: String,
    },
    MedResp {
        token: usize,
        chal: String,
        bind: String,
    },
    MedAttest {
        session: usize,
        response: String,
        bind: String,
    },
    MedCert {
        challenge: String,
        bind: String,
    },
    Forge {
        action: Forge,
        bind: String,
    },
    /// Unlinkability: `Left(cid, M)`.
    Left {
        challenge: String,
        cid: Option<String>,
        bind: String,
    },
    /// Unlinkability: `Right(cid, M)`.
    Right {
        challenge: String,
        cid: Option<String>,
        bind: String,
    },
    /// Origin and attribute privacy: the experiment's answer to the
    /// adversary's chip-authentication command.
    Respond {
        chal: String,
        bind: String,
    },
}

impl Step {
    pub fn op(&self) -> &'static str {
        match self {
            Step::Start { .. } => "start",
            Step::Challenge { .. } => "challenge",
            Step::ChallengeRaw { .. } => "challenge_raw",
            Step::Complete { .. } => "complete",
            Step::MedReq { .. } => "med_req",
            Step::MedChal { .. } => "med_chal",
            Step::MedResp { .. } => "med_resp",
            Step::MedAttest { .. } => "med_attest",
            Step::MedCert { .. } => "med_cert",
            Step::Forge { .. } => "forge",
            Step::Left { .. } => "left",
            Step::Right { .. } => "right",
            Step::Respond { .. } => "respond",
        }
    }

    pub fn bind(&self) -> &str {
        match self {
            Step::Start { bind, .. }
            | Step::Challenge { bind, .. }
            | Step::ChallengeRaw { bind, .. }
            | Step::Complete { bind, .. }
            | Step::MedReq { bind, .. }
            | Step::MedChal { bind, .. }
            | Step::MedResp { bind, .. }
            | Step::MedAttest { bind, .. }
            | Step::MedCert { bind, .. }
            | Step::Forge { bind, .. }
            | Step::Left { bind, .. }
            | Step::Right { bind, .. }
            | Step::Respond { bind, .. } => bind,
        }
    }
}

/// How the adversary turns its view into a bit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum GuessRule {
    Constant {
        bit: bool,
    },
    Random,
    /// Low bit of the first byte of a field.
    Parity {
        value: String,
        field: String,
    },
    /// 1 iff two fields are equal.
    Equal {
        a: String,
        field_a: String,
        b: String,
        field_b: String,
    },
    /// 1 iff a field contains the UTF-8 bytes of `needle`.
    Contains {
        value: String,
        field: String,
        needle: String,
    },
}

/// A chip in the adversary's hands, with the session of its last request.
pub(crate) struct AdvChip {
    chip: ChipState,
    session: Option<ClientSession>,
}

/// Captured values and adversary-held chips.
#[derive(Default)]
pub struct Captures {
    values: BTreeMap<String, Value>,
    chips: BTreeMap<String, AdvChip>,
}

impl Captures {
    pub fn get(&self, name: &str) -> Result<&Value, OracleError> {
        self.values.get(name).ok_or_else(|| OracleError::OracleAbort(format!("no capture named `{name}`")))
    }

    pub fn insert(&mut self, name: &str, v: Value) {
        self.values.insert(name.to_owned(), v);
    }

    fn chip(&mut self, name: &str) -> Result<&mut AdvChip, OracleError> {
        self.chips.get_mut(name).ok_or_else(|| OracleError::OracleAbort(format!("no chip named `{name}`")))
    }

    /// A field of a capture as bytes, addressed by JSON pointer. Strings
    /// are read as base64url when they decode, as UTF-8 otherwise.
    pub fn field(&self, name: &str, pointer: &str) -> Result<Vec<u8>, OracleError> {
        let json = serde_json::to_value(self.get(name)?).map_err(|e| OracleError::OracleAbort(e.to_string()))?;
        let inner = json.get("value").cloned().unwrap_or(json);
        let v = inner
            .pointer(pointer)
            .ok_or_else(|| OracleError::OracleAbort(format!("no field {pointer} in `{name}`")))?;
        Ok(match v {
            serde_json::Value::String(s) => b64_decode(s).unwrap_or_else(|_| s.as_bytes().to_vec()),
            other => other.to_string().into_bytes(),
        })
    }
}

fn wrong(name: &str, want: &str, got: &Value) -> OracleError {
    if let Value::Bottom(e) = got {
        return OracleError::Bottom(format!("`{name}` is ⊥: {e}"));
    }
    OracleError::OracleAbort(format!("`{name}` is {}, expected {want}", got.kind()))
}

macro_rules! take {
    ($caps:expr, $name:expr, $variant:ident, $want:literal) => {
        match $caps.get($name)? {
            Value::$variant(v) => v.clone(),
            other => return Err(wrong($name, $want, other)),
        }
    };
}

fn challenge_bytes(caps: &Captures, name: &str) -> Result<Vec<u8>, OracleError> {
    match caps.get(name)? {
        Value::Challenge(cp) => Ok(cp.ac_challenge()),
        Value::Bytes(b) => Ok(b.clone()),
        other => Err(wrong(name, "challenge or bytes", other)),
    }
}

fn response_of(caps: &Captures, name: &str) -> Result<BoundResponse, OracleError> {
    match caps.get(name)? {
        Value::Response(r) | Value::Token(TokenOutput::Full(r)) => Ok(r.clone()),
        other => Err(wrong(name, "full response", other)),
    }
}

fn cid_of(caps: &Captures, name: &Option<String>) -> Result<Option<fidoac::fido::CredentialId>, OracleError> {
    match name {
        None => Ok(None),
        Some(n) => match caps.get(n)? {
            Value::Token(t) => Ok(Some(t.cid())),
            Value::Response(r) => Ok(Some(r.cid)),
            other => Err(wrong(n, "token output", other)),
        },
    }
}

/// Executes one generic step. Experiment-specific steps are rejected here.
pub(crate) fn run_step(world: &mut World, caps: &mut Captures, step: &Step) -> Result<Value, OracleError> {
    Ok(match step {
        Step::Start { server, i, j, .. } => Value::Challenge(world.start(Handle::new(*server, *i, *j))?),
        Step::Challenge { token, i, j, challenge, cid, .. } => {
            let cp = take!(caps, challenge, Challenge, "challenge");
            let cid = cid_of(caps, cid)?;
            Value::Token(world.challenge(Handle::new(*token, *i, *j), TokenInput::WithClient { challenge: cp, cid })?)
        }
        Step::ChallengeRaw { token, i, j, challenge, message, .. } => {
            let cp = take!(caps, challenge, Challenge, "challenge");
            let message = take!(caps, message, Bytes, "bytes");
            let input = TokenInput::Raw { id_s: cp.id_s.clone(), cid: cp.allow_credential, message };
            Value::Token(world.challenge(Handle::new(*token, *i, *j), input)?)
        }
        Step::Complete { server, i, j, response, .. } => {
            let r = response_of(caps, response)?;
            Value::Bit(world.complete(Handle::new(*server, *i, *j), &r)?)
        }
        Step::MedReq { token, challenge, .. } => {
            let c = challenge_bytes(caps, challenge)?;
            Value::Request(world.med_req(*token, &c)?)
        }
        Step::MedChal { session, request, .. } => {
            if let Value::Bottom(e) = caps.get(request)? {
                return Err(world.med_chal_failed(*session, format!("`{request}` is ⊥: {e}")));
            }
            let req = take!(caps, request, Request, "request");
            Value::MedChallenge(world.med_chal(*session, &req)?)
        }
        Step::MedResp { token, chal, .. } => {
            let chal = take!(caps, chal, MedChallenge, "mediator challenge");
            Value::CaResponse(world.med_resp(*token, &chal)?)
        }
        Step::MedAttest { session, response, .. } => {
            let resp = take!(caps, response, CaResponse, "CA response");
            Value::Attestation(world.med_attest(*session, &resp)?)
        }
        Step::MedCert { challenge, .. } => Value::Cert(world.med_cert(&challenge_bytes(caps, challenge)?)),
        Step::Forge { action, bind } => forge(world, caps, action, bind)?,
        Step::Left { .. } | Step::Right { .. } | Step::Respond { .. } => {
            return Err(OracleError::OracleAbort(format!("`{}` is not available here", step.op())))
        }
    })
}

fn forge(world: &mut World, caps: &mut Captures, action: &Forge, bind: &str) -> Result<Value, OracleError> {
    let bottom = |e: String| OracleError::Bottom(e);
    Ok(match action {
        Forge::FakeChip { attributes } => {
            let issuer = Issuer::new(world.profile(), world.rng());
            let chip = issuer.issue(&attributes.attributes(), world.rng()).map_err(|e| bottom(e.to_string()))?;
            caps.chips.insert(bind.to_owned(), AdvChip { chip, session: None });
            Value::Chip(bind.to_owned())
        }
        Forge::CloneChip { token } => {
            if *token >= world.n_tokens() {
                return Err(OracleError::OracleAbort(format!("no token {token}")));
            }
            let original = world.chip(*token).clone();
            let chip = original.counterfeit(world.rng());
            caps.chips.insert(bind.to_owned(), AdvChip { chip, session: None });
            Value::Chip(bind.to_owned())
        }
        Forge::ChipRequest { chip, challenge } => {
            let c = challenge_bytes(caps, challenge)?;
            let mut rng = world.rng().clone();
            let adv = caps.chip(chip)?;
            let pw = password_for(adv.chip.attributes());
            let mut client = Client::new(EidCache::disabled());
            let (session, req) = client
                .req_attest(Some(&mut ChipAccess::new(&mut adv.chip, pw)), &c, &Policy::None, &mut rng)
                .map_err(|e| bottom(e.to_string()))?;
            adv.session = Some(session);
            *world.rng() = rng;
            Value::Request(req)
        }
        Forge::ChipRespond { chip, chal } => {
            let chal = take!(caps, chal, MedChallenge, "mediator challenge");
            let mut rng = world.rng().clone();
            let adv = caps.chip(chip)?;
            let r = adv.chip.ca_respond(&chal.pk_m, &chal.cmd_cha, &mut rng).map_err(|e| bottom(e.to_string()))?;
            *world.rng() = rng;
            Value::CaResponse(r)
        }
        Forge::GuessCa { chal } => {
            let chal = take!(caps, chal, MedChallenge, "mediator challenge");
            let sk = SecretKey::generate(world.rng());
            let key = ke_derive(&chal.pk_m, &sk).map_err(|e| bottom(e.to_string()))?;
            let pt: [u8; 8] = random_bytes(world.rng());
            Value::CaResponse(ae_seal(&key, random_nonce(world.rng()), &chal.cmd_cha.canonical(), &pt))
        }
        Forge::TamperRequest { request, field } => {
            let mut req = take!(caps, request, Request, "request");
            match field {
                RequestField::Dg1Hash => req.dg1_hash.0[0] ^= 1,
                RequestField::PkEid => req.pk_eid = KeyPair::generate(world.rng()).pk,
                RequestField::PiPa => req.pi_pa.0[0] ^= 1,
                RequestField::C => {
                    if let Some(b) = req.c.first_mut() {
                        *b ^= 1
                    }
                }
                RequestField::Nonce => req.nonce[0] ^= 1,
            }
            Value::Request(req)
        }
        Forge::ForgeProof { attestation, chip, server } => {
            let att = take!(caps, attestation, Attestation, "attestation");
            if *server >= world.n_servers() {
                return Err(OracleError::OracleAbort(format!("no server {server}")));
            }
            let policy = world.policy(*server).clone();
            let crs = world.crs(&policy)?;
            let session = caps
                .chip(chip)?
                .session
                .clone()
                .ok_or_else(|| OracleError::OracleAbort(format!("chip `{chip}` has not made a request")))?;
            let sigma_m = att.sigma_m.unwrap_or_else(|| Signature(random_64(world)));
            let m = match att.att_m.get(..32) {
                Some(m) => fidoac::primitives::Digest32::from_slice(m).expect("32 bytes"),
                None => salted_digest(world.profile(), session.dg1.as_bytes(), &session.nonce),
            };
            let stmt = Statement { m, policy, profile: world.profile() };
            let wit = Witness { dg1: session.dg1.clone(), nonce: session.nonce };
            let pi_zkp: Proof = match zk_prove(&crs, &stmt, &wit, world.rng()) {
                Ok(p) => p,
                Err(_) => cheating_prove(&crs, &stmt, &wit, world.rng()).map_err(|e| bottom(e.to_string()))?.0,
            };
            Value::Proof(AttributeProof { att_m: att.att_m, sigma_m, pi_zkp })
        }
        Forge::RandomSigma { proof } => {
            let mut p = take!(caps, proof, Proof, "proof");
            p.sigma_m = Signature(random_64(world));
            Value::Proof(p)
        }
        Forge::FlipProof { proof } => {
            let mut p = take!(caps, proof, Proof, "proof");
            let mut bytes = p.pi_zkp.to_bytes();
            let n = bytes.len();
            loop {
                let k = world.rng().gen_range(0..n);
                bytes[k] ^= 1 << world.rng().gen_range(0..8);
                if let Ok(flipped) = Proof::from_bytes(&bytes) {
                    p.pi_zkp = flipped;
                    break;
                }
                bytes = p.pi_zkp.to_bytes();
            }
            Value::Proof(p)
        }
        Forge::ExtractProof { response } => Value::Proof(response_of(caps, response)?.fidoac.attribute_proof),
        Forge::Splice { response, proof } => {
            let mut r = response_of(caps, response)?;
            r.fidoac.attribute_proof = take!(caps, proof, Proof, "proof");
            Value::Response(r)
        }
        Forge::Bind { challenge, proof } => {
            let cp = take!(caps, challenge, Challenge, "challenge");
            let p = take!(caps, proof, Proof, "proof");
            Value::Bytes(bind_challenge(&cp.rs, &p))
        }
        Forge::Assemble { token, proof, cert } => {
            let (cid, response): (_, TokenResponse) = match caps.get(token)? {
                Value::Token(TokenOutput::Raw { cid, response }) => (*cid, response.clone()),
                Value::Token(TokenOutput::Full(r)) | Value::Response(r) => (r.cid, r.response.clone()),
                other => return Err(wrong(token, "token output", other)),
            };
            let attribute_proof = take!(caps, proof, Proof, "proof");
            let mediator_cert = take!(caps, cert, Cert, "cert");
            Value::Response(BoundResponse { cid, response, fidoac: AcExtension { attribute_proof, mediator_cert } })
        }
        Forge::AcChallenge { challenge } => Value::Bytes(challenge_bytes(caps, challenge)?),
        Forge::MediatorChal { request } => {
            let req = take!(caps, request, Request, "request");
            let kp = KeyPair::generate(world.rng());
            let key = ke_derive(&req.pk_eid, &kp.sk).map_err(|e| bottom(e.to_string()))?;
            let cmd_cha = ae_seal(&key, random_nonce(world.rng()), b"", fidoac::eid::GET_CHALLENGE);
            Value::MedChallenge(MediatorChallenge { pk_m: kp.pk, cmd_cha })
        }
    })
}

fn random_64(world: &mut World) -> [u8; 64] {
    random_bytes(world.rng())
}

/// Evaluates a guess rule over the captures.
pub(crate) fn guess(world: &mut World, caps: &Captures, rule: &GuessRule) -> Result<bool, OracleError> {
    Ok(match rule {
        GuessRule::Constant { bit } => *bit,
        GuessRule::Random => world.rng().gen(),
        GuessRule::Parity { value, field } => caps.field(value, field)?.first().is_some_and(|b| b & 1 == 1),
        GuessRule::Equal { a, field_a, b, field_b } => caps.field(a, field_a)? == caps.field(b, field_b)?,
        GuessRule::Contains { value, field, needle } => {
            let hay = caps.field(value, field)?;
            let needle = needle.as_bytes();
            !needle.is_empty() && hay.windows(needle.len()).any(|w| w == needle)
        }
    })
}
