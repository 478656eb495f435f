//! Reports, exit codes and the benchmark behind the `fidoac` binary.

use std::time::Instant;

use fidoac::eid::{Attributes, DataGroup1, Date};
use fidoac::fido::{Flow, FlowVerdict};
use fidoac::flow::{run_flow, Deployment, FlowError, FlowOutcome, Holder, Stage, StageTimings};
use fidoac::nizk::{zk_prove, zk_setup, zk_verify, NizkError, Policy, Statement, Witness, DEFAULT_SEED};
use fidoac::primitives::{random_bytes, HashProfile};
use rand::{CryptoRng, RngCore};
use serde::Serialize;

pub const EXIT_ACCEPTED: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_ATTESTATION_REFUSED: i32 = 2;
pub const EXIT_PROOF_FAILURE: i32 = 3;
pub const EXIT_FIDO_FAILURE: i32 = 4;

/// Exit code for the outcome of one flow.
pub fn exit_code(result: &Result<FlowOutcome, FlowError>) -> i32 {
    match result {
        Ok(_) => EXIT_ACCEPTED,
        Err(FlowError::AttestationRefused) => EXIT_ATTESTATION_REFUSED,
        Err(FlowError::Client(Stage::EidRead | Stage::Liveliness, _)) => EXIT_ATTESTATION_REFUSED,
        Err(FlowError::Client(_, _)) => EXIT_PROOF_FAILURE,
        Err(FlowError::Rejected(v)) if v.fido => EXIT_PROOF_FAILURE,
        Err(FlowError::Rejected(_)) | Err(FlowError::Fido(_, _)) => EXIT_FIDO_FAILURE,
    }
}

/// `none`, `age_over:<years>:<YYYYMMDD>` or the JSON form.
pub fn parse_policy(s: &str) -> Result<Policy, NizkError> {
    if s.trim_start().starts_with('{') {
        Policy::from_json(s)
    } else {
        Policy::from_canonical(s)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowReport {
    pub flow: Flow,
    pub accepted: bool,
    pub exit_code: i32,
    /// Stage that stopped the run.
    pub stage: Option<&'static str>,
    pub error: Option<String>,
    pub verdict: Option<FlowVerdict>,
    pub timings_ms: StageTimings,
    pub wall_ms: f64,
}

impl FlowReport {
    pub fn new(flow: Flow, result: &Result<FlowOutcome, FlowError>, wall_ms: f64) -> Self {
        let code = exit_code(result);
        match result {
            Ok(o) => FlowReport {
                flow,
                accepted: true,
                exit_code: code,
                stage: None,
                error: None,
                verdict: Some(o.verdict),
                timings_ms: o.timings,
                wall_ms,
            },
            Err(e) => FlowReport {
                flow,
                accepted: false,
                exit_code: code,
                stage: Some(e.stage().tag()),
                error: Some(e.to_string()),
                verdict: match e {
                    FlowError::Rejected(v) => Some(*v),
                    _ => None,
                },
                timings_ms: StageTimings::default(),
                wall_ms,
            },
        }
    }

    pub fn render(&self) -> String {
        let mut out = format!("{:?}: {}\n", self.flow, if self.accepted { "accepted" } else { "rejected" });
        if let Some(stage) = self.stage {
            out.push_str(&format!("  stage: {stage}\n"));
        }
        if let Some(e) = &self.error {
            out.push_str(&format!("  error: {e}\n"));
        }
        if let Some(v) = &self.verdict {
            out.push_str(&format!(
                "  fido={} b_M={} b_zkp={} b_challenge={} key_attestation={}\n",
                v.fido, v.ac.b_m, v.ac.b_zkp, v.ac.b_challenge, v.ac.key_attestation
            ));
        }
        if self.accepted {
            let t = &self.timings_ms;
            for (name, ms) in [
                ("eid_read", t.eid_read),
                ("liveliness", t.liveliness),
                ("prove", t.prove),
                ("fido_sign", t.fido_sign),
                ("verify", t.verify),
            ] {
                out.push_str(&format!("  {name:<11}{ms:>10.2} ms\n"));
            }
        }
        out.push_str(&format!("  {:<11}{:>10.2} ms\n", "wall", self.wall_ms));
        out
    }
}

/// Registration, then authentication if asked, for one holder at one
/// relying party. Only the requested flow is reported.
pub fn run_report<R: RngCore + CryptoRng>(
    dep: &Deployment,
    holder: &mut Holder,
    origin: &str,
    policy: &Policy,
    tau: u32,
    flow: Flow,
    rng: &mut R,
) -> Result<FlowReport, NizkError> {
    let mut rp = dep.relying_party(origin, policy, tau)?;
    let account = "holder";
    if flow == Flow::Authenticate {
        let start = Instant::now();
        let reg = run_flow(holder, &dep.mediator, &mut rp, account, Flow::Register, rng);
        if reg.is_err() {
            return Ok(FlowReport::new(Flow::Register, &reg, start.elapsed().as_secs_f64() * 1000.0));
        }
    }
    let start = Instant::now();
    let result = run_flow(holder, &dep.mediator, &mut rp, account, flow, rng);
    Ok(FlowReport::new(flow, &result, start.elapsed().as_secs_f64() * 1000.0))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub stddev: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return Stat::default();
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        Stat { mean, stddev: var.sqrt() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub profile: HashProfile,
    pub tau: u32,
    pub iterations: usize,
    /// Stage rows in flow order.
    pub stages: Vec<(&'static str, Stat)>,
    pub zk_prove: Stat,
    pub zk_verify: Stat,
    pub proof_bytes: usize,
}

impl BenchReport {
    /// Verification is cheaper than proving. Vacuous for an empty run.
    pub fn ordering_holds(&self) -> bool {
        self.iterations == 0 || self.zk_verify.mean < self.zk_prove.mean
    }

    pub fn render(&self) -> String {
        let mut out = format!("profile={} tau={} iterations={}\n", self.profile, self.tau, self.iterations);
        if self.iterations == 0 {
            return out;
        }
        for (name, s) in self.stages.iter().chain([("zk_prove", self.zk_prove), ("zk_verify", self.zk_verify)].iter()) {
            out.push_str(&format!("  {name:<11}{:>10.2} ms  ± {:>8.2}\n", s.mean, s.stddev));
        }
        out.push_str(&format!("  proof size {} bytes\n", self.proof_bytes));
        out
    }
}

/// `iterations` accepted registrations of an adult holder, plus isolated
/// proving and verification timings.
pub fn bench<R: RngCore + CryptoRng>(
    profile: HashProfile,
    tau: u32,
    iterations: usize,
    rng: &mut R,
) -> Result<BenchReport, String> {
    let policy = Policy::age_over(18, Date::parse("20230101").expect("valid date"));
    let mut report = BenchReport {
        profile,
        tau,
        iterations,
        stages: Vec::new(),
        zk_prove: Stat::default(),
        zk_verify: Stat::default(),
        proof_bytes: 0,
    };
    if iterations == 0 {
        return Ok(report);
    }
    let dep = Deployment::new(profile, rng);
    let att = Attributes::new("BENCH BERTA", "900101", "310101", "DEU", "F");
    let mut holder = dep.holder(&att, rng).map_err(|e| e.to_string())?;
    let mut rp = dep.relying_party("https://bench.example", &policy, tau).map_err(|e| e.to_string())?;
    let crs = zk_setup(&policy, profile, tau, DEFAULT_SEED).map_err(|e| e.to_string())?;
    let mut rows: [Vec<f64>; 5] = Default::default();
    let (mut prove, mut verify) = (Vec::new(), Vec::new());
    for k in 0..iterations {
        let out = run_flow(&mut holder, &dep.mediator, &mut rp, &format!("bench-{k}"), Flow::Register, rng)
            .map_err(|e| e.to_string())?;
        let t = out.timings;
        for (row, v) in rows.iter_mut().zip([t.eid_read, t.liveliness, t.prove, t.fido_sign, t.verify]) {
            row.push(v);
        }
        let dg1 = DataGroup1::encode(holder.chip.attributes()).map_err(|e| e.to_string())?;
        let nonce: [u8; 16] = random_bytes(rng);
        let stmt = Statement {
            m: fidoac::nizk::salted_digest(profile, dg1.as_bytes(), &nonce),
            policy: policy.clone(),
            profile,
        };
        let wit = Witness { dg1, nonce };
        let start = Instant::now();
        let proof = zk_prove(&crs, &stmt, &wit, rng).map_err(|e| e.to_string())?;
        prove.push(start.elapsed().as_secs_f64() * 1000.0);
        let start = Instant::now();
        let ok = zk_verify(&crs, &stmt, &proof);
        verify.push(start.elapsed().as_secs_f64() * 1000.0);
        if !ok {
            return Err("benchmark proof failed to verify".into());
        }
        report.proof_bytes = proof.size();
    }
    let names = ["eid_read", "liveliness", "prove", "fido_sign", "verify"];
    report.stages = names.into_iter().zip(rows.iter().map(|r| Stat::of(r))).collect();
    report.zk_prove = Stat::of(&prove);
    report.zk_verify = Stat::of(&verify);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats() {
        assert_eq!(Stat::of(&[]), Stat::default());
        let s = Stat::of(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert_eq!(s.mean, 5.0);
        assert!((s.stddev - 2.138).abs() < 1e-3);
    }

    #[test]
    fn policy_forms() {
        assert_eq!(parse_policy("none").unwrap(), Policy::None);
        let p = parse_policy("age_over:18:20230101").unwrap();
        assert_eq!(parse_policy(r#"{"kind":"age_over","years":18,"ref_date":"20230101"}"#).unwrap(), p);
        assert!(parse_policy("nationality:DEU").is_err());
    }
}
