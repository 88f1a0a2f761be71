//! Bilevel programs with a linear lower level, solved under a belief over
//! the follower's optimal reactions.
//!
//! The leader evaluates a decision `x` by the expected value of its
//! objective over the argmin face `S(x)` of the follower LP, sampled
//! uniformly (the neutral belief) or reweighted by a density. Faces of
//! dimension at most two also have an exact quadrature path in [`oracle`].

pub mod belief;
pub mod builtin;
pub mod devolve;
pub mod error;
pub mod expr;
pub mod lp;
pub mod oracle;
pub mod polytope;
pub mod problem;
pub mod reaction;

pub use belief::{expected_value, BeliefSpec, MCEstimate};
pub use builtin::{builtin, BUILTIN_NAMES};
pub use devolve::{de_minimize, fixed_seed_stream, DEConfig, SolveReport};
pub use error::{Error, Result};
pub use expr::Expression;
pub use lp::{solve_lp, HPolytope, LpResult};
pub use oracle::{exact_expectation, explicit_phi_n_example22};
pub use polytope::{sample_uniform, FaceDescription};
pub use problem::{parse_problem, BilevelProblem, Objective};
pub use reaction::{argmin_face, domain_contains, LinearLowerLevel};
