//! Minimal passwordless-authentication core with attribute binding.
//!
//! A software token signs `canonical(id_S, bound_challenge, cid)`, where
//! the bound challenge is `rs || SHA-256(canonical(Π_Att))`. The server
//! recomputes the bound challenge from its own `rs` and the received
//! `Π_Att`, so a proof swapped in after signing breaks the signature.
//!
//! The challenge handed to the mediator is `c = SHA-256(canonical(id_S, rs))`
//! ([`ac_challenge`]): origin-qualified, but opaque to the mediator.

use std::collections::BTreeMap;

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::client::{parse_policy, split_att, AttributeProof};
use crate::mediator::{verify_key_attestation, ExpectedAttestation, KeyAttestationCert};
use crate::nizk::{zk_verify, Crs, NizkError, Policy, Statement};
use crate::primitives::{encode, hash, kdf, random_bytes, sign, verify, Digest32, PublicKey, SecretKey, Signature};
use crate::wire;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FidoError {
    #[error("no credential registered for this account")]
    NoCredential,
    #[error("credential unknown to this token or bound to another origin")]
    WrongToken,
    #[error("server state already consumed")]
    StateReplay,
    #[error(transparent)]
    Policy(#[from] NizkError),
}

/// 16-byte credential identifier.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CredentialId(#[serde(with = "wire::b64")] pub [u8; 16]);

impl std::fmt::Debug for CredentialId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "CredentialId({})", hex::encode(self.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flow {
    Register,
    Authenticate,
}

/// The mediator-facing challenge for `(id_S, rs)`.
pub fn ac_challenge(id_s: &str, rs: &[u8]) -> Vec<u8> {
    hash(&encode(&[b"fidoac/challenge", id_s.as_bytes(), rs])).0.to_vec()
}

/// `rs || hash(canonical(Π_Att))`.
pub fn bind_challenge(rs: &[u8], proof: &AttributeProof) -> Vec<u8> {
    bind_digest(rs, &proof.digest())
}

/// [`bind_challenge`] on an already computed proof digest.
pub fn bind_digest(rs: &[u8], digest: &Digest32) -> Vec<u8> {
    let mut out = rs.to_vec();
    out.extend_from_slice(digest.as_ref());
    out
}

/// Extracts the policy from the challenge extension.
pub fn pol_ext(ext: &[u8]) -> Result<Policy, NizkError> {
    parse_policy(ext)
}

/// `c_p`: the server challenge with the policy in its extension.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChallengeWithPolicy {
    pub id_s: String,
    #[serde(with = "wire::b64")]
    pub rs: [u8; 32],
    pub flow: Flow,
    pub allow_credential: Option<CredentialId>,
    /// JSON policy, as carried in the `fidoac` extension.
    pub extension: String,
}

impl ChallengeWithPolicy {
    pub fn policy(&self) -> Result<Policy, NizkError> {
        pol_ext(self.extension.as_bytes())
    }

    pub fn ac_challenge(&self) -> Vec<u8> {
        ac_challenge(&self.id_s, &self.rs)
    }
}

/// Server-side instance state. One-shot.
#[derive(Debug, Clone)]
pub struct ServerState {
    pub id_s: String,
    pub account: String,
    pub rs: [u8; 32],
    pub policy: Policy,
    pub flow: Flow,
    pub cid: Option<CredentialId>,
    consumed: bool,
}

impl ServerState {
    pub fn is_consumed(&self) -> bool {
        self.consumed
    }
}

/// The token's part of the response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TokenResponse {
    Register { pk: PublicKey, sig: Signature },
    Authenticate { sig: Signature },
}

impl TokenResponse {
    pub fn sig(&self) -> &Signature {
        match self {
            TokenResponse::Register { sig, .. } | TokenResponse::Authenticate { sig } => sig,
        }
    }

    pub fn canonical(&self) -> Vec<u8> {
        match self {
            TokenResponse::Register { pk, sig } => encode(&[b"register", pk.as_ref(), sig.as_ref()]),
            TokenResponse::Authenticate { sig } => encode(&[b"authenticate", sig.as_ref()]),
        }
    }
}

/// Payload of the `fidoac` extension result.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcExtension {
    pub attribute_proof: AttributeProof,
    pub mediator_cert: KeyAttestationCert,
}

/// `R_ac`: the token response plus the extension.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundResponse {
    pub cid: CredentialId,
    pub response: TokenResponse,
    pub fidoac: AcExtension,
}

/// Message a token signs.
pub fn token_message(id_s: &str, bound_challenge: &[u8], cid: &CredentialId) -> Vec<u8> {
    encode(&[b"fidoac/fido", id_s.as_bytes(), bound_challenge, &cid.0])
}

/// Software authenticator holding one key per credential.
#[derive(Clone)]
pub struct TokenState {
    msk: [u8; 32],
    creds: BTreeMap<CredentialId, (String, SecretKey)>,
}

impl std::fmt::Debug for TokenState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TokenState").field("credentials", &self.creds.len()).finish_non_exhaustive()
    }
}

impl TokenState {
    pub fn new<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        TokenState { msk: random_bytes(rng), creds: BTreeMap::new() }
    }

    pub fn credentials(&self) -> impl Iterator<Item = (&CredentialId, &str)> {
        self.creds.iter().map(|(cid, (origin, _))| (cid, origin.as_str()))
    }

    pub fn token_register<R: RngCore + CryptoRng>(
        &mut self,
        id_s: &str,
        bound_challenge: &[u8],
        rng: &mut R,
    ) -> (CredentialId, TokenResponse) {
        let cid = loop {
            let cid = CredentialId(random_bytes(rng));
            if !self.creds.contains_key(&cid) {
                break cid;
            }
        };
        let sk = SecretKey::from_seed(kdf(&self.msk, &cid.0, id_s.as_bytes()));
        let sig = sign(&sk, &token_message(id_s, bound_challenge, &cid));
        let pk = sk.public_key();
        self.creds.insert(cid, (id_s.to_owned(), sk));
        (cid, TokenResponse::Register { pk, sig })
    }

    pub fn token_authenticate(
        &self,
        id_s: &str,
        cid: &CredentialId,
        bound_challenge: &[u8],
    ) -> Result<TokenResponse, FidoError> {
        match self.creds.get(cid) {
            Some((origin, sk)) if origin == id_s => {
                Ok(TokenResponse::Authenticate { sig: sign(sk, &token_message(id_s, bound_challenge, cid)) })
            }
            _ => Err(FidoError::WrongToken),
        }
    }
}

/// Anchors for the key-attestation check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrustAnchors {
    pub tee_root_pk: PublicKey,
    /// Accepted mediator packages: name and signing-certificate fingerprint.
    pub packages: Vec<(String, Digest32)>,
    /// If set, only this mediator key is accepted.
    pub mediator_pk: Option<PublicKey>,
}

impl TrustAnchors {
    /// `key=value` form: `tee_root_pk`, one `package=<name>:<fp hex>` per
    /// accepted package and an optional `mediator_pk`.
    pub fn to_config(&self) -> String {
        let mut out = format!("tee_root_pk={}\n", self.tee_root_pk.to_hex());
        for (name, fp) in &self.packages {
            out.push_str(&format!("package={name}:{}\n", fp.to_hex()));
        }
        if let Some(pk) = &self.mediator_pk {
            out.push_str(&format!("mediator_pk={}\n", pk.to_hex()));
        }
        out
    }

    pub fn from_config(text: &str) -> Result<Self, String> {
        let kv = crate::fixtures::parse_multi(text)?;
        let one = |k: &str| -> Result<Option<&String>, String> {
            match kv.get(k).map(Vec::as_slice) {
                None => Ok(None),
                Some([v]) => Ok(Some(v)),
                Some(_) => Err(format!("`{k}` given more than once")),
            }
        };
        let pk = |k: &str, v: &str| PublicKey::from_hex(v).map_err(|e| format!("{k}: {e}"));
        let tee_root_pk = pk("tee_root_pk", one("tee_root_pk")?.ok_or("missing `tee_root_pk`")?)?;
        let mediator_pk = one("mediator_pk")?.map(|v| pk("mediator_pk", v)).transpose()?;
        let mut packages = Vec::new();
        for entry in kv.get("package").into_iter().flatten() {
            let (name, fp) =
                entry.rsplit_once(':').ok_or_else(|| format!("package `{entry}`: expected name:fingerprint"))?;
            let fp = Digest32::from_hex(fp).map_err(|e| format!("package `{name}`: {e}"))?;
            packages.push((name.to_owned(), fp));
        }
        if packages.is_empty() {
            return Err("no `package` entries".into());
        }
        Ok(TrustAnchors { tee_root_pk, packages, mediator_pk })
    }

    fn accepts(&self, cert: &KeyAttestationCert, c: &[u8]) -> bool {
        self.mediator_pk.is_none_or(|pk| pk == cert.pk_m)
            && self.packages.iter().any(|(name, fp)| {
                let expected = ExpectedAttestation { package_name: name, package_cert_fp: fp, challenge: c };
                verify_key_attestation(cert, &expected, &self.tee_root_pk)
            })
    }
}

/// Per-check outcome of [`check_ac`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcVerdict {
    pub b_m: bool,
    pub b_zkp: bool,
    pub b_challenge: bool,
    pub key_attestation: bool,
}

impl AcVerdict {
    pub fn ok(&self) -> bool {
        self.b_m && self.b_zkp && self.b_challenge && self.key_attestation
    }

    /// Tags of the failed checks, in a fixed order.
    pub fn failed(&self) -> Vec<&'static str> {
        [
            (self.b_m, "b_M"),
            (self.b_zkp, "b_zkp"),
            (self.b_challenge, "b_challenge"),
            (self.key_attestation, "key_attestation"),
        ]
        .into_iter()
        .filter(|(ok, _)| !ok)
        .map(|(_, tag)| tag)
        .collect()
    }
}

/// Verifies `Π_Att` for `policy` and challenge `c`. The mediator key is
/// taken from `cert`, which must be attested for `c` under `anchors`.
pub fn check_ac(
    proof: &AttributeProof,
    policy: &Policy,
    c: &[u8],
    cert: &KeyAttestationCert,
    anchors: &TrustAnchors,
    crs: &Crs,
) -> AcVerdict {
    let b_m = verify(&cert.pk_m, &proof.att_m, &proof.sigma_m);
    let split = split_att(&proof.att_m);
    let b_zkp = split.is_some_and(|(m, _)| {
        let stmt = Statement { m, policy: policy.clone(), profile: crs.profile() };
        zk_verify(crs, &stmt, &proof.pi_zkp)
    });
    let b_challenge = split.is_some_and(|(_, c_m)| c_m == c);
    let key_attestation = anchors.accepts(cert, c);
    AcVerdict { b_m, b_zkp, b_challenge, key_attestation }
}

/// Outcome of [`RelyingParty::check_flow`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowVerdict {
    pub fido: bool,
    pub ac: AcVerdict,
}

impl FlowVerdict {
    pub fn accepted(&self) -> bool {
        self.fido && self.ac.ok()
    }
}

/// Session identifier used for partnering: both sides compute it from
/// their own view.
pub fn partner_id(id_s: &str, cid: &CredentialId, bound_challenge: &[u8], response: &TokenResponse) -> Digest32 {
    hash(&encode(&[b"fidoac/partner", id_s.as_bytes(), &cid.0, bound_challenge, &response.canonical()]))
}

/// A server with one policy and its registered credentials.
#[derive(Debug, Clone)]
pub struct RelyingParty {
    pub id_s: String,
    pub crs: Crs,
    pub anchors: TrustAnchors,
    rcs: BTreeMap<CredentialId, PublicKey>,
    accounts: BTreeMap<String, CredentialId>,
}

impl RelyingParty {
    pub fn new(id_s: &str, crs: Crs, anchors: TrustAnchors) -> Self {
        RelyingParty { id_s: id_s.to_owned(), crs, anchors, rcs: BTreeMap::new(), accounts: BTreeMap::new() }
    }

    pub fn policy(&self) -> &Policy {
        self.crs.policy()
    }

    pub fn credential(&self, account: &str) -> Option<CredentialId> {
        self.accounts.get(account).copied()
    }

    pub fn credential_key(&self, cid: &CredentialId) -> Option<&PublicKey> {
        self.rcs.get(cid)
    }

    /// `challenge_ac`: fresh 32-byte `rs` with the policy attached.
    pub fn challenge_ac<R: RngCore + CryptoRng>(
        &self,
        account: &str,
        flow: Flow,
        rng: &mut R,
    ) -> Result<(ChallengeWithPolicy, ServerState), FidoError> {
        let cid = match flow {
            Flow::Register => None,
            Flow::Authenticate => Some(self.credential(account).ok_or(FidoError::NoCredential)?),
        };
        let rs: [u8; 32] = random_bytes(rng);
        let policy = self.policy().clone();
        let cp = ChallengeWithPolicy {
            id_s: self.id_s.clone(),
            rs,
            flow,
            allow_credential: cid,
            extension: policy.to_json(),
        };
        let st = ServerState {
            id_s: self.id_s.clone(),
            account: account.to_owned(),
            rs,
            policy,
            flow,
            cid,
            consumed: false,
        };
        Ok((cp, st))
    }

    /// `rcheck_ac`/`acheck_ac`. On an accepted registration the credential
    /// is stored for the account.
    pub fn check_flow(&mut self, st: &mut ServerState, resp: &BoundResponse) -> Result<FlowVerdict, FidoError> {
        if st.consumed {
            return Err(FidoError::StateReplay);
        }
        st.consumed = true;
        let proof = &resp.fidoac.attribute_proof;
        let bound = bind_challenge(&st.rs, proof);
        let msg = token_message(&st.id_s, &bound, &resp.cid);
        let fido = match (&resp.response, st.flow) {
            (TokenResponse::Register { pk, sig }, Flow::Register) => {
                !self.rcs.contains_key(&resp.cid) && verify(pk, &msg, sig)
            }
            (TokenResponse::Authenticate { sig }, Flow::Authenticate) => {
                st.cid == Some(resp.cid) && self.rcs.get(&resp.cid).is_some_and(|pk| verify(pk, &msg, sig))
            }
            _ => false,
        };
        let c = ac_challenge(&st.id_s, &st.rs);
        let ac = check_ac(proof, &st.policy, &c, &resp.fidoac.mediator_cert, &self.anchors, &self.crs);
        let verdict = FlowVerdict { fido, ac };
        if verdict.accepted() {
            if let TokenResponse::Register { pk, .. } = &resp.response {
                self.rcs.insert(resp.cid, *pk);
                self.accounts.insert(st.account.clone(), resp.cid);
            }
        }
        Ok(verdict)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn token_binds_origin_and_accepts_long_challenges() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let mut tok = TokenState::new(&mut rng);
        let (a, ra) = tok.token_register("https://a.example", b"x", &mut rng);
        let (b, rb) = tok.token_register("https://b.example", b"x", &mut rng);
        let (a2, _) = tok.token_register("https://a.example", b"x", &mut rng);
        assert!(a != b && a != a2);
        let (TokenResponse::Register { pk: pka, sig }, TokenResponse::Register { pk: pkb, .. }) = (&ra, &rb) else {
            panic!()
        };
        assert_ne!(pka, pkb);
        assert!(verify(pka, &token_message("https://a.example", b"x", &a), sig));
        assert_eq!(tok.token_authenticate("https://b.example", &a, b"x"), Err(FidoError::WrongToken));
        assert_eq!(
            tok.token_authenticate("https://a.example", &CredentialId([0; 16]), b"x"),
            Err(FidoError::WrongToken)
        );
        let long = vec![0xabu8; 4096];
        let r = tok.token_authenticate("https://a.example", &a, &long).unwrap();
        assert!(verify(pka, &token_message("https://a.example", &long, &a), r.sig()));
    }

    #[test]
    fn challenge_derivation_separates_origins() {
        let rs = [4u8; 32];
        assert_ne!(ac_challenge("https://a.example", &rs), ac_challenge("https://b.example", &rs));
        assert_eq!(ac_challenge("https://a.example", &rs).len(), 32);
        // Field boundaries are encoded, so shifting bytes between fields changes c.
        assert_ne!(ac_challenge("ab", b"c"), ac_challenge("a", b"bc"));
    }

    #[test]
    fn verdict_reasons() {
        let v = AcVerdict { b_m: true, b_zkp: false, b_challenge: false, key_attestation: true };
        assert!(!v.ok());
        assert_eq!(v.failed(), vec!["b_zkp", "b_challenge"]);
        let ok = AcVerdict { b_m: true, b_zkp: true, b_challenge: true, key_attestation: true };
        assert!(ok.ok() && ok.failed().is_empty());
    }

    #[test]
    fn wire_forms() {
        let cp = ChallengeWithPolicy {
            id_s: "https://a.example".into(),
            rs: [1; 32],
            flow: Flow::Register,
            allow_credential: Some(CredentialId([2; 16])),
            extension: Policy::None.to_json(),
        };
        let json = serde_json::to_string(&cp).unwrap();
        assert!(json.contains("\"flow\":\"register\""));
        assert_eq!(serde_json::from_str::<ChallengeWithPolicy>(&json).unwrap(), cp);
        assert_eq!(cp.policy().unwrap(), Policy::None);
    }
}
