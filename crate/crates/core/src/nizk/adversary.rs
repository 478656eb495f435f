//! A cheating prover for soundness experiments.
//!
//! Given a non-witness it runs the honest protocol and then corrupts one
//! party per repetition so that the output shares reconstruct to the public
//! output:
//!
//! * If the only wrong output is the policy predicate and that output is an
//!   AND gate, it flips the corrupted party's share of that gate. The view
//!   of the corrupted party is then inconsistent only with its own
//!   recomputation, which the verifier performs iff that party is `e`. The
//!   proof survives with probability 2/3 per repetition.
//! * Otherwise it flips the corrupted party's output shares without
//!   touching any view. The verifier notices iff that party is one of the
//!   two opened ones, so the proof survives with probability 1/3.
//!
//! The challenge is not ground: one proof is one attempt.

use rand::{CryptoRng, Rng, RngCore};

use super::circuit::{Bit, Gate};
use super::mpc::Tamper;
use super::{crs_matches, prove_unchecked, relation, Crs, NizkError, Proof, Statement, Witness};

/// What the cheater can do with this witness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheatStrategy {
    /// Flip one party's share of the final predicate AND gate.
    PredicateAnd { and_index: usize },
    /// Flip one party's output shares.
    OutputShares,
}

impl CheatStrategy {
    /// Analytical probability that one repetition survives verification.
    pub fn per_repetition_success(&self) -> f64 {
        match self {
            CheatStrategy::PredicateAnd { .. } => 2.0 / 3.0,
            CheatStrategy::OutputShares => 1.0 / 3.0,
        }
    }

    /// Acceptance probability for a whole proof with `tau` repetitions.
    pub fn acceptance(&self, tau: u32) -> f64 {
        self.per_repetition_success().powi(tau as i32)
    }
}

pub fn strategy_for(crs: &Crs, stmt: &Statement, wit: &Witness) -> Option<CheatStrategy> {
    let circuit = crs.circuit();
    let got = circuit.eval(&relation::witness_bits(wit));
    let want = relation::expected_outputs(stmt);
    let wrong: Vec<usize> = (0..want.len()).filter(|&i| got[i] != want[i]).collect();
    if wrong.is_empty() {
        return None;
    }
    if let [only] = wrong[..] {
        if only == want.len() - 1 {
            if let Bit::Wire(w) = circuit.outputs()[only] {
                let gate = w as usize - circuit.n_inputs();
                if matches!(circuit.gates()[gate], Gate::And(..)) {
                    let and_index = circuit.gates()[..gate].iter().filter(|g| matches!(g, Gate::And(..))).count();
                    return Some(CheatStrategy::PredicateAnd { and_index });
                }
            }
        }
    }
    Some(CheatStrategy::OutputShares)
}

/// Produces a proof for `stmt` from a witness that does not satisfy it.
/// Returns the strategy used alongside the proof.
pub fn cheating_prove<R: RngCore + CryptoRng>(
    crs: &Crs,
    stmt: &Statement,
    wit: &Witness,
    rng: &mut R,
) -> Result<(Proof, CheatStrategy), NizkError> {
    if !crs_matches(crs, stmt) {
        return Err(NizkError::CrsMismatch);
    }
    let strategy = strategy_for(crs, stmt, wit).ok_or(NizkError::Malformed("witness is valid; nothing to cheat"))?;
    let inputs = relation::witness_bits(wit);
    let got = crs.circuit().eval(&inputs);
    let wrong: Vec<usize> = relation::expected_outputs(stmt)
        .iter()
        .zip(&got)
        .enumerate()
        .filter(|(_, (a, b))| a != b)
        .map(|(i, _)| i)
        .collect();

    let tau = crs.tau() as usize;
    let corrupted: Vec<usize> = (0..tau).map(|_| rng.gen_range(0..3)).collect();
    let tamper = |first: usize, n: usize| {
        let mut masks = [0u64; 3];
        for lane in 0..n {
            masks[corrupted[first + lane]] |= 1 << lane;
        }
        match strategy {
            CheatStrategy::PredicateAnd { and_index } => Tamper { and_gate: Some((and_index, masks)), outputs: vec![] },
            CheatStrategy::OutputShares => {
                Tamper { and_gate: None, outputs: wrong.iter().map(|&i| (i, masks)).collect() }
            }
        }
    };
    Ok((prove_unchecked(crs, stmt, &inputs, tamper, rng), strategy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eid::Date;
    use crate::nizk::tests::fixture;
    use crate::nizk::{salted_digest, zk_setup, zk_verify, Policy, DEFAULT_SEED};
    use crate::primitives::HashProfile;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn strategies_are_classified() {
        let policy = Policy::age_over(18, Date::parse("20230101").unwrap());
        let crs = zk_setup(&policy, HashProfile::Test, 1, DEFAULT_SEED).unwrap();
        let (young, nonce) = fixture("100101");
        let stmt = Statement {
            m: salted_digest(HashProfile::Test, young.as_bytes(), &nonce),
            policy: policy.clone(),
            profile: HashProfile::Test,
        };
        let wit = Witness { dg1: young.clone(), nonce };
        assert!(matches!(strategy_for(&crs, &stmt, &wit), Some(CheatStrategy::PredicateAnd { .. })));
        let wrong_nonce = Witness { dg1: young, nonce: [0; 16] };
        assert_eq!(strategy_for(&crs, &stmt, &wrong_nonce), Some(CheatStrategy::OutputShares));
    }

    #[test]
    fn single_repetition_cheat_rate_is_plausible() {
        let policy = Policy::age_over(18, Date::parse("20230101").unwrap());
        let crs = zk_setup(&policy, HashProfile::Test, 1, DEFAULT_SEED).unwrap();
        let (young, nonce) = fixture("100101");
        let stmt = Statement {
            m: salted_digest(HashProfile::Test, young.as_bytes(), &nonce),
            policy,
            profile: HashProfile::Test,
        };
        let wit = Witness { dg1: young, nonce };
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let trials = 300;
        let accepted = (0..trials)
            .filter(|_| {
                let (p, _) = cheating_prove(&crs, &stmt, &wit, &mut rng).unwrap();
                zk_verify(&crs, &stmt, &p)
            })
            .count();
        let rate = accepted as f64 / trials as f64;
        assert!((rate - 2.0 / 3.0).abs() < 0.1, "rate {rate}");
    }
}
