use fidoac::client::{AttributeProof, ChipAccess};
use fidoac::eid::{Attributes, Date};
use fidoac::fido::{
    ac_challenge, bind_challenge, check_ac, partner_id, AcExtension, BoundResponse, FidoError, Flow, RelyingParty,
    ServerState, TokenResponse, TrustAnchors,
};
use fidoac::flow::{run_flow, Deployment, FlowError, Holder, Stage};
use fidoac::mediator::{issue_key_attestation, TeeRoot};
use fidoac::nizk::{Policy, TEST_TAU};
use fidoac::primitives::{HashProfile, KeyPair};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

const RP: &str = "https://shop.example";

fn age_over_18() -> Policy {
    Policy::age_over(18, Date::parse("20230101").unwrap())
}

struct Setup {
    rng: ChaCha20Rng,
    dep: Deployment,
    rp: RelyingParty,
    holder: Holder,
}

fn setup(birth: &str, policy: Policy, seed: u64) -> Setup {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let dep = Deployment::new(HashProfile::Test, &mut rng);
    let rp = dep.relying_party(RP, &policy, TEST_TAU).unwrap();
    let holder = dep.holder(&Attributes::new("MUSTERMANN ERIKA", birth, "310101", "DEU", "F"), &mut rng).unwrap();
    Setup { rng, dep, rp, holder }
}

/// Runs the client and token side by hand, stopping before the server check.
fn respond(s: &mut Setup, account: &str, flow: Flow) -> (ServerState, BoundResponse) {
    let (cp, st) = s.rp.challenge_ac(account, flow, &mut s.rng).unwrap();
    let mut access = ChipAccess::new(&mut s.holder.chip, s.holder.password);
    let c = cp.ac_challenge();
    let (proof, cert) = s.holder.client.obtain_proof(&mut access, &s.dep.mediator, &c, &s.rp.crs, &mut s.rng).unwrap();
    let bound = bind_challenge(&cp.rs, &proof);
    let (cid, response) = match flow {
        Flow::Register => s.holder.token.token_register(RP, &bound, &mut s.rng),
        Flow::Authenticate => {
            let cid = cp.allow_credential.unwrap();
            (cid, s.holder.token.token_authenticate(RP, &cid, &bound).unwrap())
        }
    };
    (st, BoundResponse { cid, response, fidoac: AcExtension { attribute_proof: proof, mediator_cert: cert } })
}

#[test]
fn register_then_authenticate() {
    let mut s = setup("890615", age_over_18(), 1);
    let reg = run_flow(&mut s.holder, &s.dep.mediator, &mut s.rp, "erika", Flow::Register, &mut s.rng).unwrap();
    assert!(reg.verdict.accepted());
    assert_eq!(s.rp.credential("erika"), Some(reg.response.cid));
    let auth = run_flow(&mut s.holder, &s.dep.mediator, &mut s.rp, "erika", Flow::Authenticate, &mut s.rng).unwrap();
    assert!(auth.verdict.accepted());
    assert_eq!(auth.response.cid, reg.response.cid);
}

#[test]
fn underage_holder_stops_at_prove() {
    let mut s = setup("050615", age_over_18(), 2);
    let err = run_flow(&mut s.holder, &s.dep.mediator, &mut s.rp, "kid", Flow::Register, &mut s.rng).unwrap_err();
    assert_eq!(err.stage(), Stage::Prove);
}

#[test]
fn empty_policy_still_proves_the_digest() {
    let mut s = setup("050615", Policy::None, 3);
    let out = run_flow(&mut s.holder, &s.dep.mediator, &mut s.rp, "kid", Flow::Register, &mut s.rng).unwrap();
    assert!(out.verdict.ac.b_zkp);
}

#[test]
fn authenticate_without_registration() {
    let mut s = setup("890615", age_over_18(), 4);
    assert_eq!(s.rp.challenge_ac("nobody", Flow::Authenticate, &mut s.rng).unwrap_err(), FidoError::NoCredential);
}

#[test]
fn fresh_server_randomness() {
    let mut s = setup("890615", age_over_18(), 5);
    let mut seen = std::collections::HashSet::new();
    for _ in 0..10_000 {
        let (cp, _) = s.rp.challenge_ac("a", Flow::Register, &mut s.rng).unwrap();
        assert!(seen.insert(cp.rs));
        assert_eq!(cp.policy().unwrap(), age_over_18());
    }
}

#[test]
fn state_is_one_shot() {
    let mut s = setup("890615", age_over_18(), 6);
    let (mut st, resp) = respond(&mut s, "a", Flow::Register);
    assert!(s.rp.check_flow(&mut st, &resp).unwrap().accepted());
    assert_eq!(s.rp.check_flow(&mut st, &resp).unwrap_err(), FidoError::StateReplay);
}

#[test]
fn every_component_is_checked() {
    let mut s = setup("890615", age_over_18(), 7);
    let (st, honest) = respond(&mut s, "a", Flow::Register);
    let mut rp = s.rp.clone();
    assert!(rp.check_flow(&mut st.clone(), &honest).unwrap().accepted());

    let mut mutations: Vec<(&str, BoundResponse)> = Vec::new();
    let mut m = honest.clone();
    if let TokenResponse::Register { sig, .. } = &mut m.response {
        sig.0[3] ^= 1;
    }
    mutations.push(("fido signature", m));
    let mut m = honest.clone();
    m.fidoac.attribute_proof.sigma_m.0[5] ^= 1;
    mutations.push(("sigma_m", m));
    let mut m = honest.clone();
    let mut bytes = m.fidoac.attribute_proof.pi_zkp.to_bytes();
    let k = bytes.len() / 2;
    bytes[k] ^= 1;
    if let Ok(p) = fidoac::nizk::Proof::from_bytes(&bytes) {
        m.fidoac.attribute_proof.pi_zkp = p;
        mutations.push(("pi_zkp", m));
    }
    let mut m = honest.clone();
    let last = m.fidoac.attribute_proof.att_m.len() - 1;
    m.fidoac.attribute_proof.att_m[last] ^= 1;
    mutations.push(("c_m", m));
    let mut m = honest.clone();
    m.fidoac.mediator_cert.attestation_challenge[0] ^= 1;
    mutations.push(("key attestation challenge", m));
    let mut m = honest.clone();
    m.fidoac.mediator_cert.root_sig.0[0] ^= 1;
    mutations.push(("key attestation signature", m));
    let mut m = honest.clone();
    m.cid.0[0] ^= 1;
    mutations.push(("cid", m));
    assert_eq!(mutations.len(), 7);

    for (what, resp) in mutations {
        let mut rp = s.rp.clone();
        let v = rp.check_flow(&mut st.clone(), &resp).unwrap();
        assert!(!v.accepted(), "{what} mutation accepted");
        assert!(rp.credential("a").is_none());
    }
}

#[test]
fn proof_swapped_after_signing_is_rejected() {
    let mut s = setup("890615", age_over_18(), 8);
    let (st1, r1) = respond(&mut s, "a", Flow::Register);
    let (st2, r2) = respond(&mut s, "b", Flow::Register);
    // Both proofs are individually valid; exchanging them breaks the token signature.
    let mut spliced = r1.clone();
    spliced.fidoac = r2.fidoac.clone();
    let v = s.rp.clone().check_flow(&mut st1.clone(), &spliced).unwrap();
    assert!(!v.fido);
    let mut spliced = r2.clone();
    spliced.fidoac.attribute_proof = r1.fidoac.attribute_proof.clone();
    let v = s.rp.clone().check_flow(&mut st2.clone(), &spliced).unwrap();
    assert!(!v.fido && !v.ac.b_challenge);
}

#[test]
fn valid_signature_over_foreign_challenge_is_rejected() {
    let mut s = setup("890615", age_over_18(), 9);
    let (cp, mut st) = s.rp.challenge_ac("a", Flow::Register, &mut s.rng).unwrap();
    let other_c = ac_challenge("https://evil.example", &cp.rs);
    let mut access = ChipAccess::new(&mut s.holder.chip, s.holder.password);
    let (proof, _) =
        s.holder.client.obtain_proof(&mut access, &s.dep.mediator, &other_c, &s.rp.crs, &mut s.rng).unwrap();
    let cert = s.dep.mediator.key_attestation(&cp.ac_challenge());
    let bound = bind_challenge(&cp.rs, &proof);
    let (cid, response) = s.holder.token.token_register(RP, &bound, &mut s.rng);
    let resp = BoundResponse { cid, response, fidoac: AcExtension { attribute_proof: proof, mediator_cert: cert } };
    let v = s.rp.check_flow(&mut st, &resp).unwrap();
    assert!(v.fido && v.ac.b_m && v.ac.b_zkp && v.ac.key_attestation);
    assert!(!v.ac.b_challenge);
}

#[test]
fn stale_proof_under_fresh_challenge() {
    let mut s = setup("890615", age_over_18(), 10);
    let (_, old) = respond(&mut s, "a", Flow::Register);
    let (cp, mut st) = s.rp.challenge_ac("a", Flow::Register, &mut s.rng).unwrap();
    let proof: AttributeProof = old.fidoac.attribute_proof.clone();
    let bound = bind_challenge(&cp.rs, &proof);
    let (cid, response) = s.holder.token.token_register(RP, &bound, &mut s.rng);
    let resp = BoundResponse { cid, response, fidoac: old.fidoac.clone() };
    let v = s.rp.check_flow(&mut st, &resp).unwrap();
    assert!(v.fido && !v.ac.b_challenge && !v.ac.key_attestation && !v.accepted());
}

#[test]
fn untrusted_mediator_key_is_rejected() {
    let mut s = setup("890615", age_over_18(), 11);
    let (st, mut resp) = respond(&mut s, "a", Flow::Register);
    let rogue = TeeRoot::generate(&mut s.rng);
    let cert = &resp.fidoac.mediator_cert;
    resp.fidoac.mediator_cert = issue_key_attestation(
        &KeyPair::generate(&mut s.rng).pk,
        &cert.package_name,
        &cert.package_cert_fp,
        &cert.attestation_challenge,
        rogue.secret(),
    );
    let c = ac_challenge(RP, &st.rs);
    let v =
        check_ac(&resp.fidoac.attribute_proof, &st.policy, &c, &resp.fidoac.mediator_cert, &s.rp.anchors, &s.rp.crs);
    assert!(!v.b_m && !v.key_attestation);
}

#[test]
fn credentials_do_not_cross_origins() {
    let mut s = setup("890615", age_over_18(), 12);
    run_flow(&mut s.holder, &s.dep.mediator, &mut s.rp, "a", Flow::Register, &mut s.rng).unwrap();
    let cid = s.rp.credential("a").unwrap();
    let mut other = s.dep.relying_party("https://other.example", &age_over_18(), TEST_TAU).unwrap();
    assert_eq!(other.challenge_ac("a", Flow::Authenticate, &mut s.rng).unwrap_err(), FidoError::NoCredential);
    assert_eq!(s.holder.token.token_authenticate("https://other.example", &cid, b"x"), Err(FidoError::WrongToken));
    let err = run_flow(&mut s.holder, &s.dep.mediator, &mut other, "a", Flow::Authenticate, &mut s.rng).unwrap_err();
    assert!(matches!(err, FlowError::Fido(Stage::Challenge, FidoError::NoCredential)));
}

#[test]
fn partnering_matches_on_honest_runs_only() {
    let mut s = setup("890615", age_over_18(), 13);
    let (st, resp) = respond(&mut s, "a", Flow::Register);
    let bound_server = bind_challenge(&st.rs, &resp.fidoac.attribute_proof);
    let v_s = partner_id(RP, &resp.cid, &bound_server, &resp.response);
    let v_t = partner_id(RP, &resp.cid, &bound_server, &resp.response);
    assert_eq!(v_s, v_t);
    let mut tampered = resp.fidoac.attribute_proof.clone();
    tampered.sigma_m.0[0] ^= 1;
    let v_x = partner_id(RP, &resp.cid, &bind_challenge(&st.rs, &tampered), &resp.response);
    assert_ne!(v_s, v_x);
}

#[test]
fn bound_challenge_shape() {
    let mut s = setup("890615", age_over_18(), 14);
    let (st, resp) = respond(&mut s, "a", Flow::Register);
    let b = bind_challenge(&st.rs, &resp.fidoac.attribute_proof);
    assert_eq!(b.len(), 64);
    assert_eq!(&b[..32], &st.rs);
    assert_eq!(b, bind_challenge(&st.rs, &resp.fidoac.attribute_proof));
    let json = serde_json::to_string(&resp).unwrap();
    assert_eq!(serde_json::from_str::<BoundResponse>(&json).unwrap(), resp);
}

#[test]
fn deployment_and_anchors_roundtrip_through_fixtures() {
    let mut rng = ChaCha20Rng::seed_from_u64(77);
    let dep = Deployment::new(HashProfile::Test, &mut rng);
    let back = Deployment::from_fixture(&dep.to_fixture()).unwrap();
    assert_eq!(back.issuer.keys.pk, dep.issuer.keys.pk);
    assert_eq!(back.mediator.public_key(), dep.mediator.public_key());
    assert_eq!(back.anchors(), dep.anchors());
    let mut anchors = dep.anchors();
    assert_eq!(TrustAnchors::from_config(&anchors.to_config()).unwrap(), anchors);
    anchors.mediator_pk = Some(dep.mediator.public_key());
    assert_eq!(TrustAnchors::from_config(&anchors.to_config()).unwrap(), anchors);
    assert!(TrustAnchors::from_config("tee_root_pk=00").is_err());
    assert!(TrustAnchors::from_config(&format!("tee_root_pk={}\n", anchors.tee_root_pk.to_hex())).is_err());
}
