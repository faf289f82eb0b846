//! Memory-augmented multi-agent code generation and repair.
//!
//! A problem flows through a Planner, a Code Writer and a sandboxed test
//! executor; failures are repaired with help from a Mentor that retrieves past
//! fixes by error-message similarity and maintains per-error-type fixing
//! suggestions. The evaluation module turns run logs into pass@k tables,
//! McNemar significance and error-transition statistics.

pub mod agents;
pub mod backend;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod evaluation;
pub mod executor;
pub mod knowledge;
pub mod pipeline;

pub use executor::{ErrorType, ExecutionResult, SandboxConfig};
