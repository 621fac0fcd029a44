//! Device-independent lower bounds on the entropy of communication in
//! prepare-and-measure scenarios.

pub mod cone;
pub mod entropic;
pub mod entropy;
pub mod entropy_lp;
pub mod error;
pub mod lp;
pub mod polytope;
pub mod quantum;
pub mod rational;
pub mod scenario;
pub mod strategies;
pub mod witness;

pub use entropy::{binary_entropy, shannon_entropy, Distribution};
pub use error::{Error, Result};
pub use rational::Rational;
pub use scenario::{validate_behavior, Behavior, Scenario, Violation};
pub use strategies::{
    behavior_from_mixture, enumerate_strategies, message_marginal, zero_entropy_example, DeterministicStrategy,
    EnumerationOptions, StrategyMixture,
};
pub use witness::{make_in, make_r4, LinearWitness};
pub use quantum::{
    ensemble_entropy, max_witness_given_entropy, optimal_witness_value, quantum_entropy_curve, QuantumEnsemble,
    QuantumOptions,
};
