//! Direct acoustics-to-word speech recognition trained with CTC, plus a joint
//! word-character "spell and recognize" model, built from scratch at desk
//! scale.
//!
//! The pieces, bottom up:
//!
//! - [`alphabet`]: word vocabulary, character sets, joint alphabet and
//!   spell-then-recognize targets.
//! - [`ctc`]: CTC loss with exact gradients and a brute-force oracle.
//! - [`network`]: stacked bidirectional LSTM with output projection,
//!   backpropagation through time, checkpoints and warm-start.
//! - [`pipeline`]: feature transforms, curriculum ordering, padded batching
//!   and a synthetic corpus generator.
//! - [`trainer`]: Nesterov momentum SGD, learning-rate schedule and the
//!   epoch loop.
//! - [`decoder`]: greedy peak-picking and the three spell-and-recognize
//!   decodes.
//! - [`eval`]: WER, OOV rate and the ablation runner.
//! - [`cli`]: the `a2w` command line.

pub mod alphabet;
pub mod cli;
pub mod ctc;
pub mod decoder;
pub mod error;
pub mod eval;
pub mod network;
pub mod pipeline;
pub mod seed;
pub mod trainer;

pub use error::{Error, Result};
