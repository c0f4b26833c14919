//! Draft-and-judge token sampling over pluggable next-token probability sources.
//!
//! A draft role, conditioned on one preference prefix, proposes a window of
//! tokens; a judge role, conditioned on another prefix, accepts each proposal
//! with probability `min(1, p/q)` and resamples the first rejected position from
//! the residual `norm(max(0, p - q))`. Emitted tokens are therefore distributed
//! exactly as the judge's own autoregressive samples, and the [`oracle`] module
//! checks that claim by closed-form enumeration in exact rational arithmetic.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the HTTP backend
//! and the command line live in the `judged-decode` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod dist;
mod error;
pub mod judge;
pub mod kernel;
pub mod oracle;
pub mod seed;
pub mod source;
pub mod spec_decode;

pub use dist::{DistError, Distribution, ExactDistribution, SparseDistribution, TokenId};
pub use error::Error;
pub use judge::{
    generate, generate_timed, judgment_step, lambda_sweep, Clock, GenerationResult, JudgeConfig, NoClock, SweepRow,
};
pub use kernel::{accept_count, DraftMode, ResidualRule, SamplingOptions, StepTrace, TopKScope};
pub use source::{
    build_prefixed_context, NGramModel, PreferenceAssignment, PreferenceDescription, PrefixTemplate, PrefixedSource,
    ProbabilitySource, RoleSchedule, Side, TableModel,
};
pub use spec_decode::{autoregressive_generate, spec_decode_generate, spec_decode_step, SpecDecodeConfig};
