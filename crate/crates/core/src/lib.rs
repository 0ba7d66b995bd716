//! Resource analysis for a first-order purely functional language.
//!
//! The pipeline: parse `.rml` source, elaborate into share-let normal form,
//! infer base types, and then run any of the analyses on the core form:
//!
//! - [`eval`] — big-step evaluation under a parametric cost model, tracking
//!   net consumption and the high-water resource mark.
//! - [`infer`] — linear constraint generation from the resource typing rules
//!   in three modes (upper / constant / lower bounds), solved by the exact
//!   rational LP solver in [`lp`].
//! - [`security`] — resource-aware noninterference checking against a
//!   security lattice, delegating constancy subgoals to [`infer`].
//! - [`leakage`] — quantification of resource side-channel leakage, both by
//!   exhaustive enumeration and from inferred bound differences.
//! - [`repair`] — elaboration of `consume` sinks so a leaky program becomes
//!   provably constant-resource.

pub mod cost;
pub mod enumerate;
pub mod eval;
pub mod infer;
pub mod leakage;
pub mod lexer;
pub mod lp;
pub mod normalize;
pub mod parser;
pub mod potential;
pub mod rational;
pub mod repair;
pub mod report;
pub mod security;
pub mod syntax;
pub mod typecheck;
pub mod value;

pub use cost::CostModel;
pub use eval::{evaluate, EvalOutcome};
pub use infer::Mode;
pub use potential::AnnSig;
pub use rational::Q;
pub use syntax::{BaseType, Program};
pub use value::Value;
