//! Alphabet-set multipliers (ASM) and multiplier-less neurons (MAN) for
//! fixed-point feed-forward networks.
//!
//! Weights are split into a sign, a 3-bit top group and 4-bit quartets; each
//! group is produced by selecting a pre-computed odd multiple of the input
//! (an "alphabet") and shifting it. Networks are trained in floating point,
//! projected onto the values a chosen alphabet set can produce, retrained,
//! and evaluated bit-exactly in integer arithmetic.
//!
//! The training side is generic over [`scalar::Scalar`]; the aliases below
//! fix the precision for the common cases.

pub mod asm;
pub mod config;
pub mod constraint;
pub mod cost;
pub mod data;
pub mod error;
pub mod fixedpoint;
pub mod nn;
pub mod scalar;
pub mod train;

pub use asm::AlphabetSet;
pub use constraint::ConstraintConfig;
pub use data::Dataset;
pub use error::{Error, Result};
pub use fixedpoint::{FixedPointValue, QFormat};
pub use nn::{Backend, Engine, NetworkModel};
pub use train::TrainConfig;

/// Double-precision training network.
pub type Mlp = train::FloatMlp<f64>;
/// Single-precision training network.
pub type MlpF32 = train::FloatMlp<f32>;
pub type Checkpoint = train::Checkpoint<f64>;
pub type CheckpointF32 = train::Checkpoint<f32>;
pub type FloatTraining = train::FloatTraining<f64>;
pub type FloatTrainingF32 = train::FloatTraining<f32>;
