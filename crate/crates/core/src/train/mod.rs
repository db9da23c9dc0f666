//! Real-valued training and constrained retraining.
//!
//! Training runs on a generic real type; everything it emits is an integer
//! [`NetworkModel`](crate::nn::NetworkModel). The alphabet ladder retrains
//! from one float checkpoint per rung and accepts the first set that keeps
//! accuracy within the quality constraint.

mod loops;
mod methodology;
mod mlp;

use std::io::Write;

use rand_chacha::ChaCha8Rng;

use crate::asm::WeightLayout;
use crate::error::{Error, Result};
use crate::fixedpoint::QFormat;

pub use loops::{
    model_accuracy, project_only, retrain_constrained, train_float, FloatTraining, RetrainOutcome,
};
pub use methodology::{
    check_quality, layer_configs, methodology_loop, mixed_layer_assign, mixed_layer_assign_with,
    run_ladder, LadderRun, Methodology, MethodologyReport, QualityGate, RungResult,
};
pub use mlp::{mean_loss, FloatLayer, FloatMlp, Loss, RealData};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// Layer sizes, input first.
    pub topology: Vec<usize>,
    pub weight_bits: u32,
    pub learning_rate: f64,
    pub retrain_learning_rate: f64,
    /// Epoch cap for unconstrained training.
    pub epochs: usize,
    /// Epoch cap for each constrained retraining.
    pub retrain_epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub saturation_patience: usize,
    /// Smallest accuracy gain (as a fraction) that resets the patience count.
    pub min_improvement: f64,
    pub loss: Loss,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            topology: vec![64, 32, 2],
            weight_bits: 8,
            learning_rate: 2.0,
            retrain_learning_rate: 0.5,
            epochs: 100,
            retrain_epochs: 40,
            batch_size: 16,
            seed: 42,
            saturation_patience: 5,
            min_improvement: 0.001,
            loss: Loss::Mse,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.topology.len() < 2 || self.topology.contains(&0) {
            return Err(Error::Precondition(format!(
                "topology {:?} needs at least two non-zero layer sizes",
                self.topology
            )));
        }
        WeightLayout::new(self.weight_bits)?;
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::Precondition(format!(
                "bad learning rate {}",
                self.learning_rate
            )));
        }
        if !(self.retrain_learning_rate >= 0.0 && self.retrain_learning_rate <= self.learning_rate)
        {
            return Err(Error::Precondition(format!(
                "retrain learning rate {} must lie in [0, {}]",
                self.retrain_learning_rate, self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Precondition("batch size must be positive".into()));
        }
        if self.saturation_patience == 0 {
            return Err(Error::Precondition(
                "saturation patience must be positive".into(),
            ));
        }
        if !(self.min_improvement.is_finite() && self.min_improvement >= 0.0) {
            return Err(Error::Precondition(format!(
                "bad min improvement {}",
                self.min_improvement
            )));
        }
        Ok(())
    }

    pub fn weight_format(&self) -> Result<QFormat> {
        QFormat::weight(self.weight_bits)
    }
}

/// Restore point taken after unconstrained training.
#[derive(Clone, Debug)]
pub struct Checkpoint<S> {
    pub mlp: FloatMlp<S>,
    /// Shuffle stream position at the snapshot; plain SGD keeps no other
    /// optimizer state.
    pub rng: ChaCha8Rng,
    pub epoch: usize,
    pub weight_format: QFormat,
    /// `J`: integer-engine test accuracy of the quantized, unconstrained weights.
    pub baseline: f64,
    pub float_accuracy: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_acc: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingLog {
    pub rows: Vec<LogRow>,
}

impl TrainingLog {
    /// `epoch,train_loss,test_acc`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epoch", "train_loss", "test_acc"])?;
        for r in &self.rows {
            w.write_record([
                r.epoch.to_string(),
                format!("{:.6}", r.train_loss),
                format!("{:.6}", r.test_acc),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
