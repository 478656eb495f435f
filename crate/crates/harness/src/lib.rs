//! Security experiments for FIDO-AC, driven by JSON adversary scripts.
//!
//! A [`World`] holds the oracles. A [`Script`] is a sequence of oracle
//! queries and forgeries; [`run_script`] executes one and reports a
//! [`Verdict`].

pub mod attacks;
pub mod experiment;
pub mod script;
pub mod view;
pub mod world;

pub use experiment::{run_script, ChallengeSpec, ExperimentKind, Script, SetupSpec, UnlLevel, Verdict};
pub use script::{AttributeSpec, Forge, GuessRule, Step, Value};
pub use world::{Handle, OracleError, World};
