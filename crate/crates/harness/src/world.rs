//! Parties, oracles and bookkeeping of one security experiment.
//!
//! Every base oracle runs at most once per handle. Handles are
//! `(party, i, j)` with `j = 0` for the `i`-th registration and `j >= 1` for
//! the `j`-th authentication under it.

use std::collections::{BTreeMap, BTreeSet};

use fidoac::client::ChipAccess;
use fidoac::eid::{Attributes, ChipState};
use fidoac::fido::{
    bind_challenge, partner_id, AcExtension, BoundResponse, ChallengeWithPolicy, CredentialId, Flow, RelyingParty,
    ServerState, TokenResponse,
};
use fidoac::flow::{Deployment, Holder};
use fidoac::mediator::{AttestRequest, AttestState, KeyAttestationCert, MediatorAttestation, MediatorChallenge};
use fidoac::nizk::{zk_setup, Crs, Policy, DEFAULT_SEED};
use fidoac::primitives::{Ciphertext, Digest32, HashProfile};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("setup already ran")]
    AlreadySetup,
    /// A precondition of the oracle does not hold; the experiment aborts.
    #[error("oracle abort: {0}")]
    OracleAbort(String),
    /// The oracle ran and its algorithm output ⊥.
    #[error("bottom: {0}")]
    Bottom(String),
}

fn abort(msg: impl Into<String>) -> OracleError {
    OracleError::OracleAbort(msg.into())
}

/// `π_P^{i,j}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Handle {
    pub party: usize,
    pub i: usize,
    pub j: usize,
}

impl Handle {
    pub fn new(party: usize, i: usize, j: usize) -> Self {
        Handle { party, i, j }
    }

    pub fn flow(&self) -> Flow {
        if self.j == 0 {
            Flow::Register
        } else {
            Flow::Authenticate
        }
    }
}

/// What a token sees in one `Challenge` call.
#[derive(Debug, Clone, Serialize)]
pub struct TokenRecord {
    pub handle: Handle,
    pub id_s: String,
    pub cid: CredentialId,
    pub message: Vec<u8>,
    pub partner: Digest32,
    /// Issued through the `Left`/`Right` oracles.
    pub via_lr: bool,
}

/// What a server handle saw by the end of `Complete`.
#[derive(Debug, Clone, Serialize)]
pub struct ServerRecord {
    pub handle: Handle,
    pub accepted: bool,
    pub partner: Digest32,
    /// Mediator challenge `c` of this instance.
    pub c: Vec<u8>,
}

/// Input of the token oracle.
#[derive(Debug, Clone)]
pub enum TokenInput {
    /// Run the client part too: attestation, proof and binding.
    WithClient { challenge: ChallengeWithPolicy, cid: Option<CredentialId> },
    /// Token only, on an adversary-chosen message.
    Raw { id_s: String, cid: Option<CredentialId>, message: Vec<u8> },
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum TokenOutput {
    Full(BoundResponse),
    Raw { cid: CredentialId, response: TokenResponse },
}

impl TokenOutput {
    pub fn cid(&self) -> CredentialId {
        match self {
            TokenOutput::Full(r) => r.cid,
            TokenOutput::Raw { cid, .. } => *cid,
        }
    }
}

struct TokenSlot {
    holder: Holder,
    attributes: Attributes,
    used: BTreeSet<(usize, usize)>,
}

struct ServerSlot {
    rp: RelyingParty,
    states: BTreeMap<(usize, usize), ServerState>,
    completed: BTreeSet<(usize, usize)>,
    c_s: BTreeMap<usize, CredentialId>,
}

fn account(i: usize) -> String {
    format!("registration-{i}")
}

pub fn origin(server: usize) -> String {
    format!("https://server{server}.example")
}

enum MedSession {
    Open(Box<AttestState>),
    Used,
    /// `MedChal` output ⊥.
    Failed(String),
}

pub struct World {
    rng: ChaCha20Rng,
    tau: u32,
    dep: Deployment,
    setup_done: bool,
    tokens: Vec<TokenSlot>,
    servers: Vec<ServerSlot>,
    crs_cache: BTreeMap<String, Crs>,
    med_sessions: BTreeMap<usize, MedSession>,
    med_req_log: Vec<Vec<u8>>,
    med_chal_log: Vec<(Vec<u8>, MediatorChallenge)>,
    med_resp_log: Vec<MediatorChallenge>,
    token_log: Vec<TokenRecord>,
    server_log: Vec<ServerRecord>,
}

impl World {
    pub fn new(seed: u64, profile: HashProfile, tau: u32) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let dep = Deployment::new(profile, &mut rng);
        World {
            rng,
            tau,
            dep,
            setup_done: false,
            tokens: Vec::new(),
            servers: Vec::new(),
            crs_cache: BTreeMap::new(),
            med_sessions: BTreeMap::new(),
            med_req_log: Vec::new(),
            med_chal_log: Vec::new(),
            med_resp_log: Vec::new(),
            token_log: Vec::new(),
            server_log: Vec::new(),
        }
    }

    pub fn rng(&mut self) -> &mut ChaCha20Rng {
        &mut self.rng
    }

    pub fn deployment(&self) -> &Deployment {
        &self.dep
    }

    pub fn profile(&self) -> HashProfile {
        self.dep.profile
    }

    pub fn n_tokens(&self) -> usize {
        self.tokens.len()
    }

    pub fn n_servers(&self) -> usize {
        self.servers.len()
    }

    pub fn attributes(&self, token: usize) -> &Attributes {
        &self.tokens[token].attributes
    }

    pub fn chip(&self, token: usize) -> &ChipState {
        &self.tokens[token].holder.chip
    }

    pub fn policy(&self, server: usize) -> &Policy {
        self.servers[server].rp.policy()
    }

    pub fn server(&self, server: usize) -> &RelyingParty {
        &self.servers[server].rp
    }

    pub fn token_log(&self) -> &[TokenRecord] {
        &self.token_log
    }

    pub fn server_log(&self) -> &[ServerRecord] {
        &self.server_log
    }

    pub fn med_req_log(&self) -> &[Vec<u8>] {
        &self.med_req_log
    }

    /// The CRS a client would fetch for `policy`.
    pub fn crs(&mut self, policy: &Policy) -> Result<Crs, OracleError> {
        let key = policy.to_string();
        if let Some(crs) = self.crs_cache.get(&key) {
            return Ok(crs.clone());
        }
        let crs = zk_setup(policy, self.dep.profile, self.tau, DEFAULT_SEED).map_err(|e| abort(e.to_string()))?;
        self.crs_cache.insert(key, crs.clone());
        Ok(crs)
    }

    fn token(&mut self, t: usize) -> Result<&mut TokenSlot, OracleError> {
        self.tokens.get_mut(t).ok_or_else(|| abort(format!("no token {t}")))
    }

    fn server_mut(&mut self, s: usize) -> Result<&mut ServerSlot, OracleError> {
        self.servers.get_mut(s).ok_or_else(|| abort(format!("no server {s}")))
    }

    /// Challenges `c` of mediator sessions whose chip-authentication
    /// command was answered through `MedResp`.
    pub fn relayed_challenges(&self) -> BTreeSet<Vec<u8>> {
        self.med_chal_log.iter().filter(|(_, chal)| self.med_resp_log.contains(chal)).map(|(c, _)| c.clone()).collect()
    }

    /// `Setup`: one relying party per policy and one token (with a freshly
    /// issued document) per attribute set.
    pub fn setup(&mut self, policies: &[Policy], attributes: &[Attributes]) -> Result<(), OracleError> {
        if self.setup_done {
            return Err(OracleError::AlreadySetup);
        }
        self.setup_done = true;
        for (k, policy) in policies.iter().enumerate() {
            let crs = self.crs(policy)?;
            let rp = RelyingParty::new(&origin(k), crs, self.dep.anchors());
            self.servers.push(ServerSlot {
                rp,
                states: BTreeMap::new(),
                completed: BTreeSet::new(),
                c_s: BTreeMap::new(),
            });
        }
        for att in attributes {
            let holder = self.dep.holder(att, &mut self.rng).map_err(|e| abort(e.to_string()))?;
            self.tokens.push(TokenSlot { holder, attributes: att.clone(), used: BTreeSet::new() });
        }
        Ok(())
    }

    fn require_setup(&self) -> Result<(), OracleError> {
        if self.setup_done {
            Ok(())
        } else {
            Err(abort("setup has not run"))
        }
    }

    /// `Start(π_S^{i,j})`.
    pub fn start(&mut self, h: Handle) -> Result<ChallengeWithPolicy, OracleError> {
        self.require_setup()?;
        let mut rng = self.rng.clone();
        let slot = self.server_mut(h.party)?;
        if slot.states.contains_key(&(h.i, h.j)) {
            return Err(abort("Start already queried for this handle"));
        }
        let (cp, st) =
            slot.rp.challenge_ac(&account(h.i), h.flow(), &mut rng).map_err(|e| OracleError::Bottom(e.to_string()))?;
        slot.states.insert((h.i, h.j), st);
        self.rng = rng;
        Ok(cp)
    }

    /// `Challenge(π_T^{i,j}, id_S, cid, M)`.
    pub fn challenge(&mut self, h: Handle, input: TokenInput) -> Result<TokenOutput, OracleError> {
        self.challenge_inner(h, input, false)
    }

    pub(crate) fn challenge_inner(
        &mut self,
        h: Handle,
        input: TokenInput,
        via_lr: bool,
    ) -> Result<TokenOutput, OracleError> {
        self.require_setup()?;
        if !self.token(h.party)?.used.insert((h.i, h.j)) {
            return Err(abort("Challenge already queried for this handle"));
        }
        let (id_s, cid_in, message, ext) = match input {
            TokenInput::Raw { id_s, cid, message } => (id_s, cid, message, None),
            TokenInput::WithClient { challenge, cid } => {
                let (bound, ext) = self.client_part(h.party, &challenge)?;
                (challenge.id_s.clone(), cid.or(challenge.allow_credential), bound, Some(ext))
            }
        };
        let mut rng = self.rng.clone();
        let slot = self.token(h.party)?;
        let (cid, response) = if h.j == 0 {
            slot.holder.token.token_register(&id_s, &message, &mut rng)
        } else {
            let cid = cid_in.ok_or_else(|| OracleError::Bottom("authentication without a credential id".into()))?;
            let r = slot
                .holder
                .token
                .token_authenticate(&id_s, &cid, &message)
                .map_err(|e| OracleError::Bottom(e.to_string()))?;
            (cid, r)
        };
        self.rng = rng;
        let partner = partner_id(&id_s, &cid, &message, &response);
        self.token_log.push(TokenRecord { handle: h, id_s, cid, message, partner, via_lr });
        Ok(match ext {
            Some(fidoac) => TokenOutput::Full(BoundResponse { cid, response, fidoac }),
            None => TokenOutput::Raw { cid, response },
        })
    }

    /// The client algorithms for `cp`: attestation, proof and binding.
    fn client_part(&mut self, t: usize, cp: &ChallengeWithPolicy) -> Result<(Vec<u8>, AcExtension), OracleError> {
        let policy = cp.policy().map_err(|e| OracleError::Bottom(e.to_string()))?;
        let crs = self.crs(&policy)?;
        let c = cp.ac_challenge();
        self.med_req_log.push(c.clone());
        let mut rng = self.rng.clone();
        let mediator = self.dep.mediator.clone();
        let slot = self.token(t)?;
        let holder = &mut slot.holder;
        let mut access = ChipAccess::new(&mut holder.chip, holder.password);
        let (proof, cert) = holder
            .client
            .obtain_proof(&mut access, &mediator, &c, &crs, &mut rng)
            .map_err(|e| OracleError::Bottom(e.to_string()))?;
        self.rng = rng;
        Ok((bind_challenge(&cp.rs, &proof), AcExtension { attribute_proof: proof, mediator_cert: cert }))
    }

    /// `Complete(π_S^{i,j}, cid, R)`.
    pub fn complete(&mut self, h: Handle, resp: &BoundResponse) -> Result<bool, OracleError> {
        self.require_setup()?;
        let slot = self.server_mut(h.party)?;
        let Some(st) = slot.states.get(&(h.i, h.j)) else {
            return Err(abort("Complete before Start"));
        };
        if !slot.completed.insert((h.i, h.j)) {
            return Err(abort("Complete already queried for this handle"));
        }
        if h.j > 0 && slot.c_s.get(&h.i) != Some(&resp.cid) {
            return Err(abort("cid differs from the registered one"));
        }
        let mut st = st.clone();
        let verdict = slot.rp.check_flow(&mut st, resp).map_err(|e| abort(e.to_string()))?;
        if h.j == 0 {
            slot.c_s.insert(h.i, resp.cid);
        }
        let bound = bind_challenge(&st.rs, &resp.fidoac.attribute_proof);
        let partner = partner_id(&st.id_s, &resp.cid, &bound, &resp.response);
        let c = fidoac::fido::ac_challenge(&st.id_s, &st.rs);
        let accepted = verdict.accepted();
        self.server_log.push(ServerRecord { handle: h, accepted, partner, c });
        Ok(accepted)
    }

    /// `MedReq(T, c)`.
    pub fn med_req(&mut self, t: usize, c: &[u8]) -> Result<AttestRequest, OracleError> {
        self.require_setup()?;
        self.med_req_log.push(c.to_vec());
        self.request_for(t, c)
    }

    /// `req_attest` for token `t` without logging it as a `MedReq` query.
    pub(crate) fn request_for(&mut self, t: usize, c: &[u8]) -> Result<AttestRequest, OracleError> {
        let mut rng = self.rng.clone();
        let slot = self.token(t)?;
        let holder = &mut slot.holder;
        let mut access = ChipAccess::new(&mut holder.chip, holder.password);
        let (_, req) = holder
            .client
            .req_attest(Some(&mut access), c, &Policy::None, &mut rng)
            .map_err(|e| OracleError::Bottom(e.to_string()))?;
        self.rng = rng;
        Ok(req)
    }

    /// `MedChal(M^i, req)`.
    pub fn med_chal(&mut self, session: usize, req: &AttestRequest) -> Result<MediatorChallenge, OracleError> {
        self.require_setup()?;
        if self.med_sessions.contains_key(&session) {
            return Err(abort("MedChal already queried for this mediator session"));
        }
        match self.dep.mediator.attest_chal(req, &mut self.rng) {
            Ok((st, chal)) => {
                self.med_sessions.insert(session, MedSession::Open(Box::new(st)));
                self.med_chal_log.push((req.c.clone(), chal.clone()));
                Ok(chal)
            }
            Err(e) => Err(self.med_chal_failed(session, e.to_string())),
        }
    }

    /// `MedChal` on input ⊥: the session exists and its `MedAttest` is ⊥.
    pub fn med_chal_failed(&mut self, session: usize, why: String) -> OracleError {
        if self.med_sessions.contains_key(&session) {
            return abort("MedChal already queried for this mediator session");
        }
        self.med_sessions.insert(session, MedSession::Failed(why.clone()));
        OracleError::Bottom(why)
    }

    /// `MedResp(T, chal)`.
    pub fn med_resp(&mut self, t: usize, chal: &MediatorChallenge) -> Result<Ciphertext, OracleError> {
        self.require_setup()?;
        self.med_resp_log.push(chal.clone());
        let mut rng = self.rng.clone();
        let slot = self.token(t)?;
        let r = slot
            .holder
            .chip
            .ca_respond(&chal.pk_m, &chal.cmd_cha, &mut rng)
            .map_err(|e| OracleError::Bottom(e.to_string()));
        self.rng = rng;
        r
    }

    /// `MedAttest(M^i, resp)`.
    pub fn med_attest(&mut self, session: usize, resp: &Ciphertext) -> Result<MediatorAttestation, OracleError> {
        self.require_setup()?;
        let mut st = match self.med_sessions.get_mut(&session) {
            None => return Err(abort("MedAttest before MedChal")),
            Some(slot) => match std::mem::replace(slot, MedSession::Used) {
                MedSession::Open(st) => st,
                MedSession::Used => return Err(abort("MedAttest already queried for this mediator session")),
                MedSession::Failed(why) => return Err(OracleError::Bottom(why)),
            },
        };
        self.dep.mediator.attest(&mut st, resp).map_err(|e| abort(e.to_string()))
    }

    /// Key attestation of the mediator for challenge `c`.
    pub fn med_cert(&self, c: &[u8]) -> KeyAttestationCert {
        self.dep.mediator.key_attestation(c)
    }

    /// `IssCred` again for token `t`: a new document with the same
    /// attributes.
    pub fn reissue(&mut self, t: usize) -> Result<(), OracleError> {
        let mut rng = self.rng.clone();
        let att = self.token(t)?.attributes.clone();
        let chip = self.dep.issuer.issue(&att, &mut rng).map_err(|e| abort(e.to_string()))?;
        let slot = self.token(t)?;
        slot.holder.password = fidoac::eid::password_for(chip.attributes());
        slot.holder.chip = chip;
        slot.holder.client.cache_mut().clear();
        self.rng = rng;
        Ok(())
    }

    /// `attest_resp` of token `t` for an arbitrary challenge.
    pub(crate) fn respond_for(&mut self, t: usize, chal: &MediatorChallenge) -> Result<Ciphertext, OracleError> {
        self.med_resp(t, chal)
    }

    /// Fresh challenge of server `s` outside any handle.
    pub(crate) fn unbound_challenge(&mut self, s: usize) -> Result<ChallengeWithPolicy, OracleError> {
        let mut rng = self.rng.clone();
        let slot = self.server_mut(s)?;
        let (cp, _) = slot.rp.challenge_ac("experiment", Flow::Register, &mut rng).map_err(|e| abort(e.to_string()))?;
        self.rng = rng;
        Ok(cp)
    }

    /// Handles `(i, 0)` of token `t` already used.
    pub(crate) fn first_unused_registration(&self, t: usize) -> usize {
        let used = &self.tokens[t].used;
        (0..).find(|i| !used.contains(&(*i, 0))).expect("unbounded")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use fidoac::eid::Date;

    fn world() -> World {
        let mut w = World::new(1, HashProfile::Test, 8);
        let policy = Policy::age_over(18, Date::parse("20230101").unwrap());
        let adult = Attributes::new("ADULT ANNA", "890615", "310101", "DEU", "F");
        let kid = Attributes::new("YOUNG YUSUF", "100101", "310101", "DEU", "M");
        w.setup(&[policy, Policy::None], &[adult, kid]).unwrap();
        w
    }

    #[test]
    fn setup_runs_once() {
        let mut w = world();
        assert_eq!(w.n_tokens() + w.n_servers(), 4);
        assert_eq!(w.setup(&[], &[]), Err(OracleError::AlreadySetup));
    }

    #[test]
    fn honest_registration_and_authentication() {
        let mut w = world();
        let cp = w.start(Handle::new(0, 0, 0)).unwrap();
        let out = w.challenge(Handle::new(0, 0, 0), TokenInput::WithClient { challenge: cp, cid: None }).unwrap();
        let TokenOutput::Full(r) = out else { panic!() };
        assert!(w.complete(Handle::new(0, 0, 0), &r).unwrap());
        let cp = w.start(Handle::new(0, 0, 1)).unwrap();
        let TokenOutput::Full(r) =
            w.challenge(Handle::new(0, 0, 1), TokenInput::WithClient { challenge: cp, cid: None }).unwrap()
        else {
            panic!()
        };
        assert!(w.complete(Handle::new(0, 0, 1), &r).unwrap());
        assert_eq!(w.token_log()[1].partner, w.server_log()[1].partner);
    }

    #[test]
    fn ordering_and_once_only() {
        let mut w = world();
        let cp = w.start(Handle::new(0, 0, 0)).unwrap();
        assert!(matches!(w.start(Handle::new(0, 0, 0)), Err(OracleError::OracleAbort(_))));
        let TokenOutput::Full(r) =
            w.challenge(Handle::new(0, 0, 0), TokenInput::WithClient { challenge: cp.clone(), cid: None }).unwrap()
        else {
            panic!()
        };
        assert!(matches!(
            w.challenge(Handle::new(0, 0, 0), TokenInput::WithClient { challenge: cp, cid: None }),
            Err(OracleError::OracleAbort(_))
        ));
        assert!(matches!(w.complete(Handle::new(0, 1, 0), &r), Err(OracleError::OracleAbort(_))));
        assert!(w.complete(Handle::new(0, 0, 0), &r).unwrap());
        assert!(matches!(w.complete(Handle::new(0, 0, 0), &r), Err(OracleError::OracleAbort(_))));

        let cp = w.start(Handle::new(0, 0, 1)).unwrap();
        let TokenOutput::Full(mut r) =
            w.challenge(Handle::new(0, 0, 1), TokenInput::WithClient { challenge: cp, cid: None }).unwrap()
        else {
            panic!()
        };
        r.cid.0[0] ^= 1;
        assert!(matches!(w.complete(Handle::new(0, 0, 1), &r), Err(OracleError::OracleAbort(_))));
    }

    #[test]
    fn underage_client_part_is_bottom() {
        let mut w = world();
        let cp = w.start(Handle::new(0, 0, 0)).unwrap();
        let r = w.challenge(Handle::new(1, 0, 0), TokenInput::WithClient { challenge: cp, cid: None });
        assert!(matches!(r, Err(OracleError::Bottom(_))));
    }

    #[test]
    fn mediator_oracles() {
        let mut w = world();
        let req = w.med_req(0, &[1; 32]).unwrap();
        assert!(matches!(
            w.med_attest(0, &Ciphertext { nonce: [0; 12], ad: vec![], body: vec![] }),
            Err(OracleError::OracleAbort(_))
        ));
        let chal = w.med_chal(0, &req).unwrap();
        let resp = w.med_resp(0, &chal).unwrap();
        assert!(w.med_attest(0, &resp).unwrap().sigma_m.is_some());
        assert!(matches!(w.med_attest(0, &resp), Err(OracleError::OracleAbort(_))));

        // A response to another session's command does not verify.
        let req2 = w.med_req(0, &[2; 32]).unwrap();
        let chal2 = w.med_chal(1, &req2).unwrap();
        let _ = w.med_resp(0, &chal2).unwrap();
        let req3 = w.med_req(0, &[3; 32]).unwrap();
        let chal3 = w.med_chal(2, &req3).unwrap();
        let foreign = w.med_resp(0, &chal3).unwrap();
        assert!(w.med_attest(1, &foreign).unwrap().sigma_m.is_none());
    }
}
