//! The five experiments and their winning conditions.

use std::collections::BTreeSet;

use fidoac::fido::{CredentialId, Flow};
use fidoac::nizk::Policy;
use fidoac::primitives::HashProfile;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::script::{run_step, AttributeSpec, Captures, GuessRule, Step, Value};
use crate::world::{Handle, OracleError, ServerRecord, TokenInput, TokenRecord, World};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Imp,
    AttUnf,
    Unl,
    OrigPriv,
    AttPriv,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::Imp,
        ExperimentKind::AttUnf,
        ExperimentKind::Unl,
        ExperimentKind::OrigPriv,
        ExperimentKind::AttPriv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Imp => "Imp",
            ExperimentKind::AttUnf => "AttUnf",
            ExperimentKind::Unl => "Unl",
            ExperimentKind::OrigPriv => "OrigPriv",
            ExperimentKind::AttPriv => "AttPriv",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name().eq_ignore_ascii_case(s))
    }
}

/// Credential-separation level of the unlinkability experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnlLevel {
    #[default]
    Weak,
    Medium,
    Strong,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetupSpec {
    pub policies: Vec<Policy>,
    pub tokens: Vec<AttributeSpec>,
}

/// The adversary's challenge-phase output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChallengeSpec {
    Unl { t0: usize, t1: usize, left: usize, right: usize },
    OrigPriv { token: usize, s0: usize, s1: usize },
    AttPriv { t0: usize, t1: usize, server: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Script {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub level: UnlLevel,
    pub setup: SetupSpec,
    #[serde(default)]
    pub phase1: Vec<Step>,
    #[serde(default)]
    pub challenge: Option<ChallengeSpec>,
    /// Steps after the challenge phase.
    #[serde(default)]
    pub phase2: Vec<Step>,
    #[serde(default)]
    pub guess: Option<GuessRule>,
}

impl Script {
    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("script serialises")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceEntry {
    pub phase: &'static str,
    pub op: String,
    pub bind: String,
    pub outcome: &'static str,
    pub output: serde_json::Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub experiment: ExperimentKind,
    pub win: bool,
    pub aborted: Option<String>,
    /// The experiment's secret bit, for the bit-guessing experiments.
    pub b: Option<bool>,
    pub guess: Option<bool>,
    pub trace: Vec<TraceEntry>,
}

impl Verdict {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("verdict serialises")
    }
}

/// Experiment state after the challenge phase.
enum Challenged {
    None,
    Unl(UnlState),
    Priv { token: usize },
}

struct UnlState {
    t: [usize; 2],
    i: [usize; 2],
    j: [usize; 2],
    left: usize,
    right: usize,
    b: bool,
}

struct Run<'a> {
    world: World,
    caps: Captures,
    trace: Vec<TraceEntry>,
    script: &'a Script,
    challenged: Challenged,
    b: Option<bool>,
}

pub fn run_script(script: &Script, seed: u64, profile: HashProfile, tau: u32) -> Verdict {
    let mut run = Run {
        world: World::new(seed, profile, tau),
        caps: Captures::default(),
        trace: Vec::new(),
        script,
        challenged: Challenged::None,
        b: None,
    };
    let aborted = run.execute().err().map(|e| e.to_string());
    let (win, guess) = match &aborted {
        Some(_) => (false, None),
        None => match run.output_phase() {
            Ok(x) => x,
            Err(e) => {
                return Verdict {
                    experiment: script.experiment,
                    win: false,
                    aborted: Some(e.to_string()),
                    b: run.b,
                    guess: None,
                    trace: run.trace,
                }
            }
        },
    };
    Verdict { experiment: script.experiment, win, aborted, b: run.b, guess, trace: run.trace }
}

impl Run<'_> {
    fn execute(&mut self) -> Result<(), OracleError> {
        let setup = &self.script.setup;
        let attrs: Vec<_> = setup.tokens.iter().map(|a| a.attributes()).collect();
        self.world.setup(&setup.policies, &attrs)?;
        for step in &self.script.phase1 {
            self.step("phase1", step)?;
        }
        if let Some(spec) = &self.script.challenge {
            self.challenge_phase(spec)?;
        }
        for step in &self.script.phase2 {
            self.step("phase2", step)?;
        }
        Ok(())
    }

    fn record(&mut self, phase: &'static str, op: &str, bind: &str, result: &Result<Value, OracleError>) {
        let (outcome, output) = match result {
            Ok(v) => ("ok", serde_json::to_value(v).unwrap_or(serde_json::Value::Null)),
            Err(OracleError::Bottom(e)) => ("bottom", serde_json::Value::String(e.clone())),
            Err(e) => ("abort", serde_json::Value::String(e.to_string())),
        };
        self.trace.push(TraceEntry { phase, op: op.to_owned(), bind: bind.to_owned(), outcome, output });
    }

    fn step(&mut self, phase: &'static str, step: &Step) -> Result<(), OracleError> {
        let result = match step {
            Step::Left { challenge, cid, .. } => self.left_right(true, challenge, cid),
            Step::Right { challenge, cid, .. } => self.left_right(false, challenge, cid),
            Step::Respond { chal, .. } => self.respond(chal),
            _ => run_step(&mut self.world, &mut self.caps, step),
        };
        self.record(phase, step.op(), step.bind(), &result);
        match result {
            Ok(v) => self.caps.insert(step.bind(), v),
            Err(OracleError::Bottom(e)) => self.caps.insert(step.bind(), Value::Bottom(e)),
            Err(e) => return Err(e),
        }
        Ok(())
    }

    fn challenge_phase(&mut self, spec: &ChallengeSpec) -> Result<(), OracleError> {
        let kind = self.script.experiment;
        let b: bool = self.world.rng().gen();
        let check = |ok: bool, what: &str| if ok { Ok(()) } else { Err(OracleError::OracleAbort(what.to_owned())) };
        match (kind, spec) {
            (ExperimentKind::Unl, ChallengeSpec::Unl { t0, t1, left, right }) => {
                check(
                    *t0.max(t1) < self.world.n_tokens() && *left.max(right) < self.world.n_servers(),
                    "unknown party",
                )?;
                for s in [*left, *right] {
                    let p = self.world.policy(s);
                    let sat0 = p.satisfied_by(self.world.attributes(*t0));
                    let sat1 = p.satisfied_by(self.world.attributes(*t1));
                    check(sat0 == sat1, "tokens differ on a challenge server's policy")?;
                }
                let i = [self.world.first_unused_registration(*t0), self.world.first_unused_registration(*t1)];
                self.challenged =
                    Challenged::Unl(UnlState { t: [*t0, *t1], i, j: [0, 0], left: *left, right: *right, b });
                self.trace_challenge("unl", serde_json::json!({ "i0": i[0], "i1": i[1] }));
            }
            (ExperimentKind::OrigPriv, ChallengeSpec::OrigPriv { token, s0, s1 }) => {
                check(*token < self.world.n_tokens() && *s0.max(s1) < self.world.n_servers(), "unknown party")?;
                let s = if b { *s1 } else { *s0 };
                let cp = self.world.unbound_challenge(s)?;
                let req = self.world.request_for(*token, &cp.ac_challenge())?;
                self.caps.insert("req_b", Value::Request(req.clone()));
                self.challenged = Challenged::Priv { token: *token };
                self.trace_challenge("orig_priv", serde_json::to_value(&req).unwrap_or_default());
            }
            (ExperimentKind::AttPriv, ChallengeSpec::AttPriv { t0, t1, server }) => {
                check(*t0.max(t1) < self.world.n_tokens() && *server < self.world.n_servers(), "unknown party")?;
                self.world.reissue(*t0)?;
                self.world.reissue(*t1)?;
                let t = if b { *t1 } else { *t0 };
                let cp = self.world.unbound_challenge(*server)?;
                let req = self.world.request_for(t, &cp.ac_challenge())?;
                self.caps.insert("req_b", Value::Request(req.clone()));
                self.challenged = Challenged::Priv { token: t };
                self.trace_challenge("att_priv", serde_json::to_value(&req).unwrap_or_default());
            }
            _ => return Err(OracleError::OracleAbort(format!("{} has no such challenge phase", kind.name()))),
        }
        self.b = Some(b);
        Ok(())
    }

    fn trace_challenge(&mut self, what: &str, output: serde_json::Value) {
        self.trace.push(TraceEntry {
            phase: "challenge",
            op: what.to_owned(),
            bind: "req_b".into(),
            outcome: "ok",
            output,
        });
    }

    fn left_right(&mut self, left: bool, challenge: &str, cid: &Option<String>) -> Result<Value, OracleError> {
        let Challenged::Unl(st) = &self.challenged else {
            return Err(OracleError::OracleAbort("Left/Right before the challenge phase".into()));
        };
        let cp = match self.caps.get(challenge)? {
            Value::Challenge(cp) => cp.clone(),
            _ => return Err(OracleError::OracleAbort(format!("`{challenge}` is not a challenge"))),
        };
        let server = if left { st.left } else { st.right };
        let policy = cp.policy().map_err(|e| OracleError::OracleAbort(e.to_string()))?;
        if &policy != self.world.policy(server) || cp.id_s != self.world.server(server).id_s {
            return Err(OracleError::OracleAbort("policy or origin differs from the chosen server".into()));
        }
        // Left drives T_b, Right drives T_{1-b}.
        let side = usize::from(left != st.b);
        let h = Handle::new(st.t[side], st.i[side], st.j[side]);
        let cid = match cid {
            None => None,
            Some(n) => match self.caps.get(n)? {
                Value::Token(t) => Some(t.cid()),
                Value::Response(r) => Some(r.cid),
                _ => return Err(OracleError::OracleAbort(format!("`{n}` carries no credential id"))),
            },
        };
        let out = self.world.challenge_inner(h, TokenInput::WithClient { challenge: cp, cid }, true);
        if let Challenged::Unl(st) = &mut self.challenged {
            st.j[side] += 1;
        }
        Ok(Value::Token(out?))
    }

    fn respond(&mut self, chal: &str) -> Result<Value, OracleError> {
        let Challenged::Priv { token } = self.challenged else {
            return Err(OracleError::OracleAbort("Respond before the challenge phase".into()));
        };
        let chal = match self.caps.get(chal)? {
            Value::MedChallenge(c) => c.clone(),
            _ => return Err(OracleError::OracleAbort(format!("`{chal}` is not a mediator challenge"))),
        };
        Ok(Value::CaResponse(self.world.respond_for(token, &chal)?))
    }

    fn output_phase(&mut self) -> Result<(bool, Option<bool>), OracleError> {
        let guess = match &self.script.guess {
            Some(rule) => Some(crate::script::guess(&mut self.world, &self.caps, rule)?),
            None => None,
        };
        let win = match self.script.experiment {
            ExperimentKind::Imp => impersonation_win(&self.world),
            ExperimentKind::AttUnf => attribute_forgery_win(&self.world),
            ExperimentKind::Unl => match (&self.challenged, guess) {
                (Challenged::Unl(st), Some(g)) => {
                    g == st.b && unlinkability_conditions(&self.world, st, self.script.level)
                }
                _ => false,
            },
            ExperimentKind::OrigPriv | ExperimentKind::AttPriv => match (self.b, guess) {
                (Some(b), Some(g)) => b == g,
                _ => false,
            },
        };
        Ok((win, guess))
    }
}

fn partnered(t: &TokenRecord, s: &ServerRecord) -> bool {
    (t.handle.j == 0) == (s.handle.j == 0) && t.partner == s.partner
}

fn registration_partnered(world: &World, s: &ServerRecord) -> bool {
    world
        .server_log()
        .iter()
        .filter(|r| r.handle == Handle::new(s.handle.party, s.handle.i, 0))
        .any(|reg| world.token_log().iter().any(|t| partnered(t, reg)))
}

/// Impersonation: an accepting authentication instance, whose registration
/// is partnered, that has no unique honest partner.
pub fn impersonation_win(world: &World) -> bool {
    world.server_log().iter().filter(|s| s.handle.j > 0 && s.accepted).any(|s| {
        if !registration_partnered(world, s) {
            return false;
        }
        let partners: Vec<&TokenRecord> = world.token_log().iter().filter(|t| partnered(t, s)).collect();
        partners.is_empty()
            || partners
                .iter()
                .any(|t| world.server_log().iter().any(|other| other.handle != s.handle && partnered(t, other)))
    })
}

/// Attribute unforgeability: an accepting authentication instance, whose
/// registration is partnered, that is unpartnered or partnered with a token
/// whose attributes fail the policy, and whose challenge was never
/// requested through the mediator and whose mediator sessions never had an
/// honest chip answer through `MedResp`.
pub fn attribute_forgery_win(world: &World) -> bool {
    let relayed = world.relayed_challenges();
    world.server_log().iter().filter(|s| s.handle.j > 0 && s.accepted).any(|s| {
        if !registration_partnered(world, s) || world.med_req_log().iter().any(|c| c == &s.c) || relayed.contains(&s.c)
        {
            return false;
        }
        let policy = world.policy(s.handle.party);
        let partners: Vec<&TokenRecord> = world.token_log().iter().filter(|t| partnered(t, s)).collect();
        partners.is_empty() || partners.iter().any(|t| !policy.satisfied_by(world.attributes(t.handle.party)))
    })
}

fn unlinkability_conditions(world: &World, st: &UnlState, level: UnlLevel) -> bool {
    let origins: BTreeSet<String> = [st.left, st.right].iter().map(|&s| world.server(s).id_s.clone()).collect();
    let relevant = |t: &&TokenRecord| st.t.contains(&t.handle.party) && origins.contains(&t.id_s);
    // Instance freshness.
    let fresh = !world
        .token_log()
        .iter()
        .any(|t| !t.via_lr && (0..2).any(|k| t.handle.party == st.t[k] && t.handle.i == st.i[k]));
    let collect = |via_lr: bool, flow: Flow| -> BTreeSet<CredentialId> {
        world
            .token_log()
            .iter()
            .filter(relevant)
            .filter(|t| t.via_lr == via_lr && t.handle.flow() == flow)
            .map(|t| t.cid)
            .collect()
    };
    let reg_ch = collect(false, Flow::Register);
    let auth_ch = collect(false, Flow::Authenticate);
    let reg_lr = collect(true, Flow::Register);
    let auth_lr = collect(true, Flow::Authenticate);
    let union = |a: &BTreeSet<CredentialId>, b: &BTreeSet<CredentialId>| -> BTreeSet<CredentialId> { a | b };
    let meets = |a: &BTreeSet<CredentialId>, b: &BTreeSet<CredentialId>| a.intersection(b).next().is_some();
    let separated = match level {
        UnlLevel::Weak => !meets(&union(&reg_ch, &auth_ch), &union(&reg_lr, &auth_lr)),
        UnlLevel::Medium => !meets(&union(&reg_ch, &auth_ch), &auth_lr) && !meets(&union(&reg_lr, &auth_lr), &auth_ch),
        UnlLevel::Strong => !meets(&reg_ch, &auth_lr) && !meets(&reg_lr, &auth_ch),
    };
    fresh && separated
}
