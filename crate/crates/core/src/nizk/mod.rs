//! Non-interactive zero-knowledge proofs for the disclosure relation.
//!
//! The statement is a salted digest `m` plus a policy; the witness is DG1
//! and the salt. A proof shows `m = H(H(dg1) || nonce)` and that DG1
//! satisfies the policy, without revealing either.
//!
//! The backend is MPC-in-the-head with three parties and two opened views
//! per repetition, so a cheating prover survives one repetition with
//! probability at most 2/3 ([`SOUNDNESS_ERROR`]). See [`mpc`] for the
//! protocol and [`crs`] for the Fiat–Shamir transform and the simulator
//! trapdoor.

pub mod adversary;
pub mod circuit;
pub mod crs;
pub mod gadgets;
pub mod mpc;
pub mod policy;
pub mod relation;

use curve25519_dalek::constants::RISTRETTO_BASEPOINT_POINT;
use curve25519_dalek::Scalar;
use rand::{CryptoRng, RngCore};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

pub use crs::{default_tau, Crs, Trapdoor, DEFAULT_SEED, DEFAULT_TAU, TEST_TAU};
pub use policy::Policy;
pub use relation::{salted_digest, NONCE_LEN};

use crate::eid::DataGroup1;
use crate::primitives::{encode, Decoder, Digest32, HashProfile};
use circuit::bits_to_bytes;
use mpc::{packed_len, padding_is_zero, RepOpening, RepTranscript, Tamper, LANES, SEED_LEN};

/// Per-repetition soundness error of the backend.
pub const SOUNDNESS_ERROR: f64 = 2.0 / 3.0;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NizkError {
    #[error("unsupported policy: {0}")]
    UnsupportedPolicy(String),
    #[error("malformed policy: {0}")]
    BadPolicy(String),
    #[error("repetition count must be at least 1")]
    BadTau,
    #[error("witness does not satisfy the relation")]
    NotAWitness,
    #[error("no simulation trapdoor for this CRS")]
    NoTrapdoor,
    #[error("CRS was generated for a different policy or profile")]
    CrsMismatch,
    #[error("malformed {0}")]
    Malformed(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Statement {
    pub m: Digest32,
    pub policy: Policy,
    pub profile: HashProfile,
}

impl Statement {
    pub fn canonical(&self) -> Vec<u8> {
        encode(&[b"fidoac/statement", self.m.as_ref(), &self.policy.canonical(), self.profile.tag().as_bytes()])
    }
}

#[derive(Clone)]
pub struct Witness {
    pub dg1: DataGroup1,
    pub nonce: [u8; NONCE_LEN],
}

impl std::fmt::Debug for Witness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Witness(<redacted>)")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Proof {
    tau: u32,
    r: [u8; 32],
    reps: Vec<RepOpening>,
}

const PROOF_TAG: &[u8] = b"fidoac/zk-proof/v1";

impl Proof {
    pub fn tau(&self) -> u32 {
        self.tau
    }

    pub fn openings(&self) -> &[RepOpening] {
        &self.reps
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = encode(&[PROOF_TAG, &self.tau.to_be_bytes(), &self.r]);
        for rep in &self.reps {
            out.extend(encode(&[
                &[rep.e],
                &rep.seed_e,
                &rep.seed_e1,
                rep.x2.as_deref().unwrap_or(&[]),
                &rep.view_e1,
                &rep.commit_e2,
                &rep.y_e,
                &rep.y_e1,
            ]));
        }
        out
    }

    /// Structural parse. Lengths that depend on the circuit are checked by
    /// the verifier.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NizkError> {
        let bad = |_| NizkError::Malformed("proof");
        let mut d = Decoder::new(bytes);
        if d.field().map_err(bad)? != PROOF_TAG {
            return Err(NizkError::Malformed("proof tag"));
        }
        let tau = d.u32().map_err(bad)?;
        let r = d.array().map_err(bad)?;
        let mut reps = Vec::with_capacity((tau as usize).min(4096));
        for _ in 0..tau {
            let [e] = d.array::<1>().map_err(bad)?;
            let seed_e = d.array::<SEED_LEN>().map_err(bad)?;
            let seed_e1 = d.array::<SEED_LEN>().map_err(bad)?;
            let x2 = d.field().map_err(bad)?;
            let view_e1 = d.field().map_err(bad)?.to_vec();
            let commit_e2 = d.array().map_err(bad)?;
            let y_e = d.field().map_err(bad)?.to_vec();
            let y_e1 = d.field().map_err(bad)?.to_vec();
            if e > 2 || (e == 0) != x2.is_empty() {
                return Err(NizkError::Malformed("proof opening"));
            }
            let x2 = (e != 0).then(|| x2.to_vec());
            reps.push(RepOpening { e, seed_e, seed_e1, x2, view_e1, commit_e2, y_e, y_e1 });
        }
        d.finish().map_err(bad)?;
        Ok(Proof { tau, r, reps })
    }

    pub fn size(&self) -> usize {
        self.to_bytes().len()
    }
}

impl serde::Serialize for Proof {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        crate::wire::b64::serialize(&self.to_bytes(), s)
    }
}

impl<'de> serde::Deserialize<'de> for Proof {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let bytes: Vec<u8> = crate::wire::b64::deserialize(d)?;
        Proof::from_bytes(&bytes).map_err(serde::de::Error::custom)
    }
}

/// Transparent setup; see [`Crs::setup`].
pub fn zk_setup(policy: &Policy, profile: HashProfile, tau: u32, seed: &[u8]) -> Result<Crs, NizkError> {
    Crs::setup(policy, profile, tau, seed)
}

fn crs_matches(crs: &Crs, stmt: &Statement) -> bool {
    crs.policy() == &stmt.policy && crs.profile() == stmt.profile
}

fn public_output(stmt: &Statement) -> Vec<u8> {
    let mut y = relation::expected_outputs(stmt);
    y.resize(packed_len(y.len()) * 8, false);
    bits_to_bytes(&y)
}

fn fs_digest(crs: &Crs, stmt: &Statement, transcripts: &[RepTranscript]) -> Digest32 {
    let mut h = Sha256::new();
    h.update(encode(&[b"fidoac/fs", crs.id().as_ref(), &stmt.canonical()]));
    for t in transcripts {
        t.absorb(&mut h);
    }
    Digest32(h.finalize().into())
}

/// Proves `stmt` from `wit`. Refuses when the witness does not satisfy the
/// relation.
pub fn zk_prove<R: RngCore + CryptoRng>(
    crs: &Crs,
    stmt: &Statement,
    wit: &Witness,
    rng: &mut R,
) -> Result<Proof, NizkError> {
    if !crs_matches(crs, stmt) {
        return Err(NizkError::CrsMismatch);
    }
    let inputs = relation::witness_bits(wit);
    if crs.circuit().eval(&inputs) != relation::expected_outputs(stmt) {
        return Err(NizkError::NotAWitness);
    }
    Ok(prove_unchecked(crs, stmt, &inputs, |_, _| Tamper::default(), rng))
}

/// Runs the prover without checking the relation. `tamper(first_rep, n)`
/// supplies deviations per batch; honest callers pass the default.
pub(crate) fn prove_unchecked<R, F>(crs: &Crs, stmt: &Statement, inputs: &[bool], tamper: F, rng: &mut R) -> Proof
where
    R: RngCore + CryptoRng,
    F: Fn(usize, usize) -> Tamper,
{
    let tau = crs.tau() as usize;
    let seeds = mpc::fresh_seeds(tau, rng);
    let mut batches = Vec::new();
    for (i, chunk) in seeds.chunks(LANES).enumerate() {
        let first = i * LANES;
        batches.push(mpc::prove_batch(crs.circuit(), inputs, chunk.to_vec(), &tamper(first, chunk.len())));
    }
    let transcripts: Vec<RepTranscript> = batches.iter().flat_map(|b| b.transcripts.iter().cloned()).collect();
    let t = crs::transcript_scalar(&fs_digest(crs, stmt, &transcripts));
    let r = crs::random_scalar(rng);
    let p = crs::chameleon(crs, &t, &r);
    let trits = crs::challenge_trits(&p, tau);

    let mut reps = Vec::with_capacity(tau);
    for (i, &e) in trits.iter().enumerate() {
        let b = &batches[i / LANES];
        let k = i % LANES;
        let e = e as usize;
        reps.push(RepOpening {
            e: e as u8,
            seed_e: b.seeds[k][e],
            seed_e1: b.seeds[k][(e + 1) % 3],
            x2: (e != 0).then(|| b.x2[k].clone()),
            view_e1: b.views[k][(e + 1) % 3].clone(),
            commit_e2: b.transcripts[k].c[(e + 2) % 3],
            y_e: b.transcripts[k].y[e].clone(),
            y_e1: b.transcripts[k].y[(e + 1) % 3].clone(),
        });
    }
    Proof { tau: tau as u32, r: r.to_bytes(), reps }
}

/// Checks a proof. Never panics on adversarial input; any malformation is a
/// rejection.
pub fn zk_verify(crs: &Crs, stmt: &Statement, proof: &Proof) -> bool {
    if !crs_matches(crs, stmt) || proof.tau != crs.tau() || proof.reps.len() != crs.tau() as usize {
        return false;
    }
    let circuit = crs.circuit();
    let x2_len = circuit.n_inputs() / 8;
    let n_and = circuit.counts().and;
    let view_len = packed_len(n_and);
    let y_len = packed_len(circuit.outputs().len());
    for rep in &proof.reps {
        let x2_ok = match (&rep.x2, rep.e) {
            (None, 0) => true,
            (Some(x), 1 | 2) => x.len() == x2_len,
            _ => false,
        };
        if !x2_ok
            || rep.view_e1.len() != view_len
            || !padding_is_zero(&rep.view_e1, n_and)
            || rep.y_e.len() != y_len
            || rep.y_e1.len() != y_len
        {
            return false;
        }
    }
    let Some(r) = Option::<Scalar>::from(Scalar::from_canonical_bytes(proof.r)) else {
        return false;
    };
    let y_pub = public_output(stmt);
    let mut transcripts = Vec::with_capacity(proof.reps.len());
    for (rep, replayed) in proof.reps.iter().zip(replay(crs, &proof.reps)) {
        if replayed.y_e != rep.y_e || replayed.y_e1 != rep.y_e1 {
            return false;
        }
        transcripts.push(mpc::transcript_from_replay(rep, replayed, &y_pub));
    }
    let t = crs::transcript_scalar(&fs_digest(crs, stmt, &transcripts));
    let p = crs::chameleon(crs, &t, &r);
    let trits = crs::challenge_trits(&p, proof.reps.len());
    trits.iter().zip(&proof.reps).all(|(t, rep)| *t == rep.e)
}

fn replay(crs: &Crs, reps: &[RepOpening]) -> Vec<mpc::Replayed> {
    let mut out = Vec::with_capacity(reps.len());
    for chunk in reps.chunks(LANES) {
        let refs: Vec<&RepOpening> = chunk.iter().collect();
        out.extend(mpc::replay_batch(crs.circuit(), &refs));
    }
    out
}

/// Zero-knowledge simulator: produces an accepting proof for any statement
/// without a witness, given the CRS trapdoor.
pub fn zk_simulate<R: RngCore + CryptoRng>(
    crs: &Crs,
    stmt: &Statement,
    trapdoor: Option<&Trapdoor>,
    rng: &mut R,
) -> Result<Proof, NizkError> {
    let td = trapdoor.filter(|td| crs.holds_trapdoor(td)).ok_or(NizkError::NoTrapdoor)?;
    if !crs_matches(crs, stmt) {
        return Err(NizkError::CrsMismatch);
    }
    let circuit = crs.circuit();
    let n_and = circuit.counts().and;
    let tau = crs.tau() as usize;

    let u = crs::random_scalar(rng);
    let p = (u * RISTRETTO_BASEPOINT_POINT).compress();
    let trits = crs::challenge_trits(&p, tau);
    let mut reps: Vec<RepOpening> = trits
        .iter()
        .map(|&e| {
            let mut view = vec![0u8; packed_len(n_and)];
            rng.fill_bytes(&mut view);
            if n_and % 8 != 0 {
                let last = view.len() - 1;
                view[last] &= !(0xffu8 >> (n_and % 8));
            }
            let x2 = (e != 0).then(|| {
                let mut x = vec![0u8; circuit.n_inputs() / 8];
                rng.fill_bytes(&mut x);
                x
            });
            let mut seeds = [[0u8; SEED_LEN]; 2];
            rng.fill_bytes(&mut seeds[0]);
            rng.fill_bytes(&mut seeds[1]);
            let mut commit_e2 = [0u8; 32];
            rng.fill_bytes(&mut commit_e2);
            RepOpening {
                e,
                seed_e: seeds[0],
                seed_e1: seeds[1],
                x2,
                view_e1: view,
                commit_e2,
                y_e: vec![],
                y_e1: vec![],
            }
        })
        .collect();
    let y_pub = public_output(stmt);
    let replayed = replay(crs, &reps);
    let mut transcripts = Vec::with_capacity(tau);
    for (rep, r) in reps.iter_mut().zip(replayed) {
        rep.y_e = r.y_e.clone();
        rep.y_e1 = r.y_e1.clone();
        transcripts.push(mpc::transcript_from_replay(rep, r, &y_pub));
    }
    let t = crs::transcript_scalar(&fs_digest(crs, stmt, &transcripts));
    let r = (u - t) * td.0.invert();
    Ok(Proof { tau: tau as u32, r: r.to_bytes(), reps })
}
