//! Joint localization and repair of variable-misuse bugs.
//!
//! The crate is organised as a pipeline:
//!
//! * [`frontend`] lexes a small Python subset and finds variables, uses and
//!   repair slots in top-level functions;
//! * [`datagen`] turns functions into buggy, bug-free and hole-ified
//!   training examples with location and repair targets;
//! * [`tensor`] is a small reverse-mode autodiff engine with Adam;
//! * [`model`] is the two-headed pointer network over an LSTM encoder;
//! * [`train`] runs seeded mini-batch training with checkpoints;
//! * [`eval`] holds joint and enumerative prediction, the accuracy metrics
//!   and the slot-placement noise experiment.

pub mod datagen;
pub mod eval;
pub mod frontend;
pub mod model;
pub mod tensor;
pub mod train;

pub use datagen::{Dataset, Example, HoleExample, Vocab};
pub use eval::{Metrics, Prediction, Verdict};
pub use frontend::{FunctionSource, Slot, Token, TokenKind};
pub use model::{MaskMode, ModelConfig, ModelParams, RepLossMode};
pub use tensor::Tensor;
pub use train::{Checkpoint, ModelKind, TrainConfig};
