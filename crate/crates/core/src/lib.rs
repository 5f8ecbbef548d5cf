//! Lifelong knowledge-graph embedding over growing snapshot sequences.
//!
//! The crate covers the full pipeline:
//!
//! - [`kg`] — vocabulary interning, snapshot bookkeeping, and the on-disk
//!   dataset layout.
//! - [`builder`] — entity-, relation-, fact-, and hybrid-growth dataset
//!   construction from a base triple file.
//! - [`transe`] — the translational base model: scoring, negative sampling,
//!   margin loss with analytic gradients, and a sparse adaptive optimizer.
//! - [`lkge`] — the lifelong components: masked reconstruction loss,
//!   embedding transfer for unseen items, and count-based regularization.
//! - [`runner`] — lifelong training over a snapshot sequence under a chosen
//!   continual strategy, with early stopping and checkpointing.
//! - [`eval`] — link-prediction ranking, MRR/Hits@k, and forward/backward
//!   transfer aggregation.
//! - [`synth`] — a seeded generator of toy KGs with translational structure,
//!   used by the test suites and handy for trying the pipeline end to end.

pub mod builder;
pub mod error;
pub mod eval;
pub mod kg;
pub mod lkge;
pub mod runner;
pub mod synth;
pub mod transe;

pub use error::{Error, Result};
