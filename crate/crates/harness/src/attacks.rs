//! Ready-made adversary scripts: honest relays for every experiment and a
//! library of attacks that are expected to lose.

use fidoac::eid::Date;
use fidoac::nizk::Policy;

use crate::experiment::{ChallengeSpec, ExperimentKind, Script, SetupSpec, UnlLevel};
use crate::script::{AttributeSpec, Forge, GuessRule, RequestField, Step};

pub fn age_policy() -> Policy {
    Policy::age_over(18, Date::parse("20230101").expect("valid date"))
}

pub fn adult() -> AttributeSpec {
    AttributeSpec::new("ADULT ANNA", "890615")
}

pub fn minor() -> AttributeSpec {
    AttributeSpec::new("YOUNG YUSUF", "100101")
}

fn s(x: &str) -> String {
    x.to_owned()
}

fn start(server: usize, i: usize, j: usize, bind: &str) -> Step {
    Step::Start { server, i, j, bind: s(bind) }
}

fn challenge(token: usize, i: usize, j: usize, cp: &str, cid: Option<&str>, bind: &str) -> Step {
    Step::Challenge { token, i, j, challenge: s(cp), cid: cid.map(s), bind: s(bind) }
}

fn complete(server: usize, i: usize, j: usize, response: &str, bind: &str) -> Step {
    Step::Complete { server, i, j, response: s(response), bind: s(bind) }
}

fn forge(action: Forge, bind: &str) -> Step {
    Step::Forge { action, bind: s(bind) }
}

fn script(experiment: ExperimentKind, setup: SetupSpec, phase1: Vec<Step>) -> Script {
    Script { experiment, level: UnlLevel::Weak, setup, phase1, challenge: None, phase2: Vec::new(), guess: None }
}

/// Server 0 asks for age 18+, server 1 accepts everyone.
fn two_servers(tokens: Vec<AttributeSpec>) -> SetupSpec {
    SetupSpec { policies: vec![age_policy(), Policy::None], tokens }
}

/// Token `t` registers at and authenticates to server `srv` as account `i`
/// with the full client part.
fn honest_session(t: usize, srv: usize, i: usize, tag: &str) -> Vec<Step> {
    let n = |x: &str| format!("{x}{tag}");
    vec![
        start(srv, i, 0, &n("cp0")),
        challenge(t, i, 0, &n("cp0"), None, &n("r0")),
        complete(srv, i, 0, &n("r0"), &n("b0")),
        start(srv, i, 1, &n("cp1")),
        challenge(t, i, 1, &n("cp1"), Some(&n("r0")), &n("r1")),
        complete(srv, i, 1, &n("r1"), &n("b1")),
    ]
}

pub fn honest_imp() -> Script {
    let mut steps = honest_session(0, 0, 0, "");
    steps.extend(honest_session(1, 1, 0, "_b"));
    script(ExperimentKind::Imp, two_servers(vec![adult(), minor()]), steps)
}

pub fn honest_att_unf() -> Script {
    Script { experiment: ExperimentKind::AttUnf, ..honest_imp() }
}

pub fn honest_unl() -> Script {
    let mut sc =
        script(ExperimentKind::Unl, two_servers(vec![adult(), AttributeSpec::new("OTHER OLGA", "750302")]), vec![]);
    sc.phase1 = honest_session(0, 1, 0, "_p");
    sc.challenge = Some(ChallengeSpec::Unl { t0: 0, t1: 1, left: 0, right: 1 });
    sc.phase2 = vec![
        start(0, 5, 0, "cpl"),
        Step::Left { challenge: s("cpl"), cid: None, bind: s("l0") },
        complete(0, 5, 0, "l0", "bl0"),
        start(0, 5, 1, "cpl1"),
        Step::Left { challenge: s("cpl1"), cid: Some(s("l0")), bind: s("l1") },
        complete(0, 5, 1, "l1", "bl1"),
        start(1, 5, 0, "cpr"),
        Step::Right { challenge: s("cpr"), cid: None, bind: s("r0") },
        complete(1, 5, 0, "r0", "br0"),
    ];
    sc
}

/// Relays the challenge request to the mediator and the mediator's command
/// to the challenge token.
fn privacy_relay() -> Vec<Step> {
    vec![
        Step::MedChal { session: 0, request: s("req_b"), bind: s("chal") },
        Step::Respond { chal: s("chal"), bind: s("resp") },
        Step::MedAttest { session: 0, response: s("resp"), bind: s("att") },
    ]
}

pub fn honest_orig_priv() -> Script {
    let mut sc = script(ExperimentKind::OrigPriv, two_servers(vec![adult()]), vec![]);
    sc.challenge = Some(ChallengeSpec::OrigPriv { token: 0, s0: 0, s1: 1 });
    sc.phase2 = privacy_relay();
    sc
}

pub fn honest_att_priv() -> Script {
    let mut sc =
        script(ExperimentKind::AttPriv, two_servers(vec![adult(), AttributeSpec::new("OTHER OLGA", "750302")]), vec![]);
    sc.challenge = Some(ChallengeSpec::AttPriv { t0: 0, t1: 1, server: 0 });
    sc.phase2 = privacy_relay();
    sc
}

pub fn honest_relays() -> Vec<(&'static str, Script)> {
    vec![
        ("honest_imp", honest_imp()),
        ("honest_att_unf", honest_att_unf()),
        ("honest_unl", honest_unl()),
        ("honest_orig_priv", honest_orig_priv()),
        ("honest_att_priv", honest_att_priv()),
    ]
}

/// Token 0 is a minor, token 1 an adult. The adversary drives the minor's
/// token to register at and authenticate to the age-restricted server 0,
/// producing each `Π_Att` with `proof` and never asking `MedReq`.
fn minor_forgery(proof: impl Fn(usize, &str) -> Vec<Step>) -> Script {
    let mut steps = Vec::new();
    for j in 0..2 {
        let n = |x: &str| format!("{x}{j}");
        steps.push(start(0, 0, j, &n("cp")));
        steps.extend(proof(j, &n("cp")));
        steps.push(forge(Forge::Bind { challenge: n("cp"), proof: n("p") }, &n("m")));
        steps.push(Step::ChallengeRaw { token: 0, i: 0, j, challenge: n("cp"), message: n("m"), bind: n("tok") });
        steps.push(Step::MedCert { challenge: n("cp"), bind: n("cert") });
        steps.push(forge(Forge::Assemble { token: n("tok"), proof: n("p"), cert: n("cert") }, &n("r")));
        steps.push(complete(0, 0, j, &n("r"), &n("b")));
    }
    script(ExperimentKind::AttUnf, two_servers(vec![minor(), adult()]), steps)
}

/// Request from an adversary chip, mediator session, chip answer,
/// attestation and proof.
/// Without the chip key the adversary can only guess the chip's answer.
fn chip_chain(chip: &str, j: usize, cp: &str, tamper: Option<RequestField>, proof: &str) -> Vec<Step> {
    let n = |x: &str| format!("{x}{j}");
    let mut v = vec![forge(Forge::ChipRequest { chip: s(chip), challenge: s(cp) }, &n("req"))];
    let req = match tamper {
        Some(field) => {
            v.push(forge(Forge::TamperRequest { request: n("req"), field }, &n("treq")));
            n("treq")
        }
        None => n("req"),
    };
    v.extend([
        Step::MedChal { session: j, request: req, bind: n("chal") },
        if chip == "clone" {
            forge(Forge::GuessCa { chal: n("chal") }, &n("ca"))
        } else {
            forge(Forge::ChipRespond { chip: s(chip), chal: n("chal") }, &n("ca"))
        },
        Step::MedAttest { session: j, response: n("ca"), bind: n("att") },
        forge(Forge::ForgeProof { attestation: n("att"), chip: s(chip), server: 0 }, &n(proof)),
    ]);
    v
}

/// A document signed by an issuer key the adversary made up.
pub fn fake_dso() -> Script {
    minor_forgery(|j, cp| {
        let mut v = Vec::new();
        if j == 0 {
            v.push(forge(Forge::FakeChip { attributes: adult() }, "fake"));
        }
        v.extend(chip_chain("fake", j, cp, None, "p"));
        v
    })
}

/// The adult's public document data without the chip key.
pub fn clone_without_ask() -> Script {
    minor_forgery(|j, cp| {
        let mut v = Vec::new();
        if j == 0 {
            v.push(forge(Forge::CloneChip { token: 1 }, "clone"));
        }
        v.extend(chip_chain("clone", j, cp, None, "p"));
        v
    })
}

/// The adult's chip answers one mediator session; the answer is replayed
/// into the session for the target challenge.
pub fn ca_replay() -> Script {
    minor_forgery(|j, cp| {
        let n = |x: &str| format!("{x}{j}");
        let mut v = Vec::new();
        if j == 0 {
            v.push(forge(Forge::CloneChip { token: 1 }, "clone"));
        }
        v.extend([
            start(0, 10 + j, 0, &n("decoy")),
            forge(Forge::ChipRequest { chip: s("clone"), challenge: n("decoy") }, &n("dreq")),
            Step::MedChal { session: 100 + j, request: n("dreq"), bind: n("dchal") },
            Step::MedResp { token: 1, chal: n("dchal"), bind: n("dca") },
            forge(Forge::ChipRequest { chip: s("clone"), challenge: s(cp) }, &n("req")),
            Step::MedChal { session: j, request: n("req"), bind: n("chal") },
            Step::MedAttest { session: j, response: n("dca"), bind: n("att") },
            forge(Forge::ForgeProof { attestation: n("att"), chip: s("clone"), server: 0 }, &n("p")),
        ]);
        v
    })
}

/// A tampered DG1 digest under the adult's genuine `π_PA`.
pub fn dg_tamper() -> Script {
    minor_forgery(|j, cp| {
        let mut v = Vec::new();
        if j == 0 {
            v.push(forge(Forge::CloneChip { token: 1 }, "clone"));
        }
        v.extend(chip_chain("clone", j, cp, Some(RequestField::Dg1Hash), "p"));
        v
    })
}

/// An otherwise well-formed proof under a random mediator signature.
pub fn random_sigma() -> Script {
    minor_forgery(|j, cp| {
        let mut v = Vec::new();
        if j == 0 {
            v.push(forge(Forge::FakeChip { attributes: adult() }, "fake"));
        }
        v.extend(chip_chain("fake", j, cp, None, "raw"));
        v.push(forge(Forge::RandomSigma { proof: format!("raw{j}") }, &format!("p{j}")));
        v
    })
}

/// The adult's genuine `Π_Att` from its own session, spliced into the
/// minor's session.
pub fn proof_splice() -> Script {
    minor_forgery(|j, _cp| {
        let n = |x: &str| format!("{x}{j}");
        vec![
            start(0, 20 + j, 0, &n("acp")),
            challenge(1, 20 + j, 0, &n("acp"), None, &n("ar")),
            forge(Forge::ExtractProof { response: n("ar") }, &n("p")),
        ]
    })
}

/// Attribute lending: the adult's chip answers the mediator sessions for
/// the minor's challenges. The server accepts, but relaying through
/// `MedResp` is outside the winning condition.
pub fn chip_relay() -> Script {
    minor_forgery(|j, cp| {
        let n = |x: &str| format!("{x}{j}");
        let mut v = Vec::new();
        if j == 0 {
            v.push(forge(Forge::CloneChip { token: 1 }, "clone"));
        }
        v.extend([
            forge(Forge::ChipRequest { chip: s("clone"), challenge: s(cp) }, &n("req")),
            Step::MedChal { session: j, request: n("req"), bind: n("chal") },
            Step::MedResp { token: 1, chal: n("chal"), bind: n("ca") },
            Step::MedAttest { session: j, response: n("ca"), bind: n("att") },
            forge(Forge::ForgeProof { attestation: n("att"), chip: s("clone"), server: 0 }, &n("p")),
        ]);
        v
    })
}

/// An accepted authentication response replayed to a fresh server
/// challenge.
pub fn challenge_replay() -> Script {
    let mut steps = honest_session(0, 0, 0, "");
    steps.extend([start(0, 0, 2, "cp2"), complete(0, 0, 2, "r1", "b2")]);
    script(ExperimentKind::Imp, two_servers(vec![adult(), minor()]), steps)
}

/// The adult's token signs a bound challenge for which the server sees a
/// flipped proof.
pub fn proof_flip() -> Script {
    let mut steps = honest_session(0, 0, 0, "");
    steps.extend([
        start(0, 0, 2, "cp2"),
        challenge(0, 0, 2, "cp2", Some("r0"), "r2"),
        forge(Forge::ExtractProof { response: s("r2") }, "p2"),
        forge(Forge::FlipProof { proof: s("p2") }, "fp2"),
        forge(Forge::Splice { response: s("r2"), proof: s("fp2") }, "x2"),
        complete(0, 0, 2, "x2", "b2"),
    ]);
    script(ExperimentKind::Imp, two_servers(vec![adult(), minor()]), steps)
}

/// Guesses the origin from the low bit of the challenge in the request.
pub fn origin_parity() -> Script {
    Script { guess: Some(GuessRule::Parity { value: s("req_b"), field: s("/c") }), ..honest_orig_priv() }
}

/// Looks for the second server's origin inside the request.
pub fn origin_contains() -> Script {
    Script {
        guess: Some(GuessRule::Contains { value: s("req_b"), field: s("/c"), needle: s("server1") }),
        ..honest_orig_priv()
    }
}

/// Compares the challenge request's DG1 digest with token 1's digest seen
/// before the attribute keys were refreshed.
pub fn attribute_link() -> Script {
    let mut sc = honest_att_priv();
    sc.phase1 = vec![
        start(0, 0, 0, "cp"),
        forge(Forge::AcChallenge { challenge: s("cp") }, "c"),
        Step::MedReq { token: 1, challenge: s("c"), bind: s("seen1") },
    ];
    sc.guess =
        Some(GuessRule::Equal { a: s("req_b"), field_a: s("/dg1_hash"), b: s("seen1"), field_b: s("/dg1_hash") });
    sc
}

/// Guesses the left token from the low bit of the credential id it
/// returned.
pub fn credential_parity() -> Script {
    Script { guess: Some(GuessRule::Parity { value: s("l0"), field: s("/cid") }), ..honest_unl() }
}

pub fn attacks() -> Vec<(&'static str, Script)> {
    vec![
        ("fake_dso", fake_dso()),
        ("clone_without_ask", clone_without_ask()),
        ("ca_replay", ca_replay()),
        ("dg_tamper", dg_tamper()),
        ("random_sigma", random_sigma()),
        ("proof_splice", proof_splice()),
        ("challenge_replay", challenge_replay()),
        ("proof_flip", proof_flip()),
    ]
}

/// Scripts whose win rate over random bits should stay near one half.
pub fn distinguishers() -> Vec<(&'static str, Script)> {
    vec![
        ("origin_parity", origin_parity()),
        ("origin_contains", origin_contains()),
        ("attribute_link", attribute_link()),
        ("credential_parity", credential_parity()),
    ]
}
