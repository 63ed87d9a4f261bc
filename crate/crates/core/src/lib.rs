//! Self-supervised code/documentation back-translation.
//!
//! Code is turned into documentation (stage 1), the documentation is gated for
//! structure and turned back into code (stage 2), and the similarity between the
//! original and the reconstruction drives policy-gradient updates for both
//! directions. Everything in this crate is `no_std` + `alloc`; IO, HTTP and the
//! command line live in the `backtrans` companion crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod backend;
pub mod buffer;
pub mod docgate;
pub mod lex;
pub mod multiset;
pub mod optim;
pub mod prompt;
pub mod rollout;
pub mod similarity;
pub mod toyworld;

pub use backend::{Backend, BackendError, GenRequest, GenResponse, MockBackend, RequestFormat};
pub use buffer::{BufferEntry, BufferError, Direction, ReplayBuffer, StatsScope};
pub use docgate::{gate, DocVerdict, GatedDoc};
pub use lex::{
    canonicalize, control_fingerprint, tokenize, CodeSnippet, LanguageId, Token, TokenKind,
};
pub use optim::{ToyPolicy, UpdateBatch, UpdateItem};
pub use rollout::{run_rollout, RolloutConfig, RolloutGroup};
pub use similarity::{similarity, SimilarityScore, SimilarityWeights};
pub use toyworld::{run_toy_training, StepMetrics, ToyConfig, ToyTask, ToyTrainer};
