//! In-process end-to-end runs of registration and authentication.
//!
//! [`Deployment`] holds the long-lived parties (issuer, TEE root, mediator);
//! [`Holder`] is one user with a chip, a client and a token. [`run_flow`]
//! drives one relying-party session through every stage and times each.

use std::time::{Duration, Instant};

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::client::{AttributeProof, ChipAccess, Client, ClientError, EidCache};
use crate::eid::{password_for, Attributes, ChipState, EidError, Issuer};
use crate::fido::{
    bind_challenge, AcExtension, BoundResponse, FidoError, Flow, FlowVerdict, RelyingParty, TokenState, TrustAnchors,
};
use crate::mediator::{Mediator, MediatorConfig, TeeRoot};
use crate::nizk::{zk_setup, NizkError, Policy, DEFAULT_SEED};
use crate::primitives::{HashProfile, KeyPair, SecretKey};

/// Stage at which a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Challenge,
    EidRead,
    Liveliness,
    Prove,
    FidoSign,
    Verify,
}

impl Stage {
    pub fn tag(self) -> &'static str {
        match self {
            Stage::Challenge => "challenge",
            Stage::EidRead => "eid_read",
            Stage::Liveliness => "liveliness",
            Stage::Prove => "prove",
            Stage::FidoSign => "fido_sign",
            Stage::Verify => "verify",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FlowError {
    #[error("{stage}: {source}", stage = .0.tag(), source = .1)]
    Client(Stage, ClientError),
    #[error("{stage}: {source}", stage = .0.tag(), source = .1)]
    Fido(Stage, FidoError),
    #[error("liveliness: mediator refused to attest")]
    AttestationRefused,
    #[error("verify: relying party rejected the response")]
    Rejected(FlowVerdict),
}

impl FlowError {
    pub fn stage(&self) -> Stage {
        match self {
            FlowError::Client(s, _) | FlowError::Fido(s, _) => *s,
            FlowError::AttestationRefused => Stage::Liveliness,
            FlowError::Rejected(_) => Stage::Verify,
        }
    }
}

/// Wall time per stage, in milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub eid_read: f64,
    pub liveliness: f64,
    pub prove: f64,
    pub fido_sign: f64,
    pub verify: f64,
}

impl StageTimings {
    pub fn total(&self) -> f64 {
        self.eid_read + self.liveliness + self.prove + self.fido_sign + self.verify
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1000.0
}

#[derive(Debug, Clone)]
pub struct FlowOutcome {
    pub verdict: FlowVerdict,
    pub timings: StageTimings,
    pub proof: AttributeProof,
    pub response: BoundResponse,
}

/// Issuer, TEE root and mediator of one deployment.
#[derive(Debug, Clone)]
pub struct Deployment {
    pub profile: HashProfile,
    pub issuer: Issuer,
    pub tee: TeeRoot,
    pub mediator: Mediator,
}

impl Deployment {
    pub fn new<R: RngCore + CryptoRng>(profile: HashProfile, rng: &mut R) -> Self {
        let issuer = Issuer::new(profile, rng);
        let tee = TeeRoot::generate(rng);
        let mediator = Mediator::new(KeyPair::generate(rng), tee.clone(), MediatorConfig::new(issuer.keys.pk, profile));
        Deployment { profile, issuer, tee, mediator }
    }

    /// `key=value` form with every secret key of the deployment.
    pub fn to_fixture(&self) -> String {
        format!(
            "# fidoac deployment\nprofile={}\nissuer_sk={}\ntee_sk={}\nmediator_sk={}\n",
            self.profile.tag(),
            hex::encode(self.issuer.keys.sk.to_seed()),
            hex::encode(self.tee.secret().to_seed()),
            hex::encode(self.mediator.secret_key().to_seed()),
        )
    }

    pub fn from_fixture(text: &str) -> Result<Self, String> {
        let kv = crate::fixtures::parse_kv(text)?;
        let get = |k: &str| kv.get(k).ok_or_else(|| format!("missing key `{k}`"));
        let sk = |k: &str| -> Result<SecretKey, String> {
            let seed: [u8; 32] = hex::decode(get(k)?)
                .ok()
                .and_then(|b| b.try_into().ok())
                .ok_or_else(|| format!("`{k}` is not a 32-byte hex seed"))?;
            Ok(SecretKey::from_seed(seed))
        };
        let profile = HashProfile::from_tag(get("profile")?).ok_or("unknown profile")?;
        let issuer = Issuer { keys: KeyPair::from_secret(sk("issuer_sk")?), profile };
        let tee = TeeRoot::from_secret(sk("tee_sk")?);
        let mediator = Mediator::new(
            KeyPair::from_secret(sk("mediator_sk")?),
            tee.clone(),
            MediatorConfig::new(issuer.keys.pk, profile),
        );
        Ok(Deployment { profile, issuer, tee, mediator })
    }

    pub fn anchors(&self) -> TrustAnchors {
        let cfg = self.mediator.config();
        TrustAnchors {
            tee_root_pk: self.tee.public_key(),
            packages: vec![(cfg.package_name.clone(), cfg.package_cert_fp)],
            mediator_pk: None,
        }
    }

    /// A relying party with an honest CRS for `policy`.
    pub fn relying_party(&self, id_s: &str, policy: &Policy, tau: u32) -> Result<RelyingParty, NizkError> {
        let crs = zk_setup(policy, self.profile, tau, DEFAULT_SEED)?;
        Ok(RelyingParty::new(id_s, crs, self.anchors()))
    }

    pub fn holder<R: RngCore + CryptoRng>(&self, att: &Attributes, rng: &mut R) -> Result<Holder, EidError> {
        Ok(Holder::new(self.issuer.issue(att, rng)?, rng))
    }
}

/// One user: chip, client app and FIDO token.
#[derive(Debug, Clone)]
pub struct Holder {
    pub chip: ChipState,
    pub password: [u8; 32],
    pub client: Client,
    pub token: TokenState,
}

impl Holder {
    pub fn new<R: RngCore + CryptoRng>(chip: ChipState, rng: &mut R) -> Self {
        let password = password_for(chip.attributes());
        Holder { chip, password, client: Client::new(EidCache::disabled()), token: TokenState::new(rng) }
    }
}

/// Runs one registration or authentication for `account` end to end.
pub fn run_flow<R: RngCore + CryptoRng>(
    holder: &mut Holder,
    mediator: &Mediator,
    rp: &mut RelyingParty,
    account: &str,
    flow: Flow,
    rng: &mut R,
) -> Result<FlowOutcome, FlowError> {
    let mut t = StageTimings::default();
    let (cp, mut st) = rp.challenge_ac(account, flow, rng).map_err(|e| FlowError::Fido(Stage::Challenge, e))?;
    let policy = cp.policy().map_err(|e| FlowError::Client(Stage::Challenge, e.into()))?;
    let c = cp.ac_challenge();

    let start = Instant::now();
    let mut access = ChipAccess::new(&mut holder.chip, holder.password);
    let (session, req) = holder
        .client
        .req_attest(Some(&mut access), &c, &policy, rng)
        .map_err(|e| FlowError::Client(Stage::EidRead, e))?;
    t.eid_read = ms(start.elapsed());

    let start = Instant::now();
    let live = |e| FlowError::Client(Stage::Liveliness, e);
    let (mut ms_state, chal) = mediator.attest_chal(&req, rng).map_err(|e| live(e.into()))?;
    let resp = holder.client.attest_resp(&mut access, &chal, rng).map_err(live)?;
    let att = mediator.attest(&mut ms_state, &resp).map_err(|e| live(e.into()))?;
    if att.sigma_m.is_none() {
        return Err(FlowError::AttestationRefused);
    }
    let cert = mediator.key_attestation(&c);
    t.liveliness = ms(start.elapsed());

    let start = Instant::now();
    let proof = holder.client.prove(&session, &att, &rp.crs, rng).map_err(|e| FlowError::Client(Stage::Prove, e))?;
    t.prove = ms(start.elapsed());

    let start = Instant::now();
    let bound = bind_challenge(&cp.rs, &proof);
    let (cid, response) = match (flow, cp.allow_credential) {
        (Flow::Register, _) => holder.token.token_register(&cp.id_s, &bound, rng),
        (Flow::Authenticate, Some(cid)) => (
            cid,
            holder.token.token_authenticate(&cp.id_s, &cid, &bound).map_err(|e| FlowError::Fido(Stage::FidoSign, e))?,
        ),
        (Flow::Authenticate, None) => return Err(FlowError::Fido(Stage::FidoSign, FidoError::NoCredential)),
    };
    t.fido_sign = ms(start.elapsed());

    let start = Instant::now();
    let response =
        BoundResponse { cid, response, fidoac: AcExtension { attribute_proof: proof.clone(), mediator_cert: cert } };
    let verdict = rp.check_flow(&mut st, &response).map_err(|e| FlowError::Fido(Stage::Verify, e))?;
    t.verify = ms(start.elapsed());
    if !verdict.accepted() {
        return Err(FlowError::Rejected(verdict));
    }
    Ok(FlowOutcome { verdict, timings: t, proof, response })
}
