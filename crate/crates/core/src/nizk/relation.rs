//! The disclosure relation as a circuit.
//!
//! Public: the salted digest `m`, the policy and the hash profile.
//! Private: DG1 (88 bytes) and the 16-byte nonce.
//!
//! Outputs are the 256 bits of `H(H(dg1) || nonce)` followed, for
//! `age_over`, by one predicate bit. The proof asserts the outputs equal
//! `m || 1`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use super::circuit::{bytes_to_bits, Bit, Builder, Circuit};
use super::gadgets::{and_all, le_const, sha256};
use super::policy::Policy;
use super::{NizkError, Statement, Witness};
use crate::eid::{BIRTH_DATE_OFFSET, DG1_LEN};
use crate::primitives::HashProfile;

pub const NONCE_LEN: usize = 16;
pub const INPUT_BITS: usize = (DG1_LEN + NONCE_LEN) * 8;

/// Packs a decimal number into BCD, one nibble per digit.
pub fn to_bcd(mut v: u32) -> u64 {
    let mut out = 0u64;
    let mut shift = 0;
    while v > 0 {
        out |= ((v % 10) as u64) << shift;
        v /= 10;
        shift += 4;
    }
    out
}

pub fn build_circuit(policy: &Policy, profile: HashProfile) -> Result<Circuit, NizkError> {
    policy.check()?;
    let rounds = profile.rounds();
    let mut b = Builder::new(INPUT_BITS as u32);
    let dg1: Vec<Bit> = (0..DG1_LEN as u32 * 8).map(|i| b.input(i)).collect();
    let nonce: Vec<Bit> = (DG1_LEN as u32 * 8..INPUT_BITS as u32).map(|i| b.input(i)).collect();

    let h1 = sha256(&mut b, &dg1, rounds);
    let salted: Vec<Bit> = h1.into_iter().chain(nonce).collect();
    let mut outputs = sha256(&mut b, &salted, rounds);

    if let Policy::AgeOver { ref_date, .. } = policy {
        let latest = policy.latest_birth().expect("checked policy");
        let digit = |i: usize| &dg1[(BIRTH_DATE_OFFSET + i) * 8..(BIRTH_DATE_OFFSET + i + 1) * 8];

        // Every byte must be an ASCII digit: high nibble 0011, low nibble <= 9.
        let mut valid = Vec::with_capacity(6);
        for i in 0..6 {
            let d = digit(i);
            let n7 = b.not(d[0]);
            let n6 = b.not(d[1]);
            let low_ok = le_const(&mut b, &d[4..8], 9);
            let hi = and_all(&mut b, &[n7, n6, d[2], d[3]]);
            valid.push(b.and(hi, low_ok));
        }
        let digits_valid = and_all(&mut b, &valid);

        let low = |i: usize| digit(i)[4..8].to_vec();
        let yy: Vec<Bit> = [low(0), low(1)].concat();
        let recent = le_const(&mut b, &yy, to_bcd(ref_date.year % 100));
        let century: Vec<Bit> = (0..8)
            .rev()
            .map(|bit| {
                let (hi, lo) = ((0x20u8 >> bit) & 1 == 1, (0x19u8 >> bit) & 1 == 1);
                b.mux(recent, Bit::constant(hi), Bit::constant(lo))
            })
            .collect();
        let birth: Vec<Bit> = [century, yy, low(2), low(3), low(4), low(5)].concat();
        let le = le_const(&mut b, &birth, to_bcd(latest.as_u32()));
        outputs.push(b.and(digits_valid, le));
    }
    Ok(b.finish(outputs))
}

/// Cached circuit for `(policy, profile)`.
pub fn circuit_for(policy: &Policy, profile: HashProfile) -> Result<Arc<Circuit>, NizkError> {
    type Cache = Mutex<HashMap<(Policy, HashProfile), Arc<Circuit>>>;
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(c) = cache.lock().expect("circuit cache").get(&(policy.clone(), profile)) {
        return Ok(c.clone());
    }
    let c = Arc::new(build_circuit(policy, profile)?);
    cache.lock().expect("circuit cache").insert((policy.clone(), profile), c.clone());
    Ok(c)
}

pub fn witness_bits(wit: &Witness) -> Vec<bool> {
    let mut bytes = wit.dg1.as_bytes().to_vec();
    bytes.extend_from_slice(&wit.nonce);
    bytes_to_bits(&bytes)
}

/// The output vector the proof must hit.
pub fn expected_outputs(stmt: &Statement) -> Vec<bool> {
    let mut y = bytes_to_bits(stmt.m.as_bytes());
    if matches!(stmt.policy, Policy::AgeOver { .. }) {
        y.push(true);
    }
    y
}

/// Salted digest computed natively: `H(H(dg1) || nonce)` under `profile`.
pub fn salted_digest(profile: HashProfile, dg1: &[u8], nonce: &[u8; NONCE_LEN]) -> crate::primitives::Digest32 {
    let h1 = profile.digest(dg1);
    let mut buf = h1.0.to_vec();
    buf.extend_from_slice(nonce);
    profile.digest(&buf)
}
