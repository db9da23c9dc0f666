use std::io::Write;

use crate::asm::AlphabetSet;
use crate::constraint::ConstraintConfig;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::NetworkModel;
use crate::scalar::Scalar;
use crate::train::loops::{
    retrain_constrained, train_float, uniform_configs, FloatTraining, RetrainOutcome,
};
use crate::train::{Checkpoint, TrainConfig};

/// `K >= J * Q`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QualityGate {
    pub baseline: f64,
    pub candidate: f64,
    pub quality: f64,
}

impl QualityGate {
    pub fn required(&self) -> f64 {
        self.baseline * self.quality
    }

    pub fn passes(&self) -> bool {
        self.candidate >= self.required()
    }
}

pub fn check_quality(quality: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&quality) {
        return Err(Error::Precondition(format!(
            "quality constraint {quality} outside [0, 1]"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct RungResult {
    pub rung: usize,
    pub alphabets: AlphabetSet,
    pub accuracy: f64,
    pub projected_accuracy: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MethodologyReport {
    /// `J`: quantized, unconstrained test accuracy of the checkpoint.
    pub baseline: f64,
    pub float_baseline: f64,
    pub quality: f64,
    pub rungs: Vec<RungResult>,
}

impl MethodologyReport {
    pub fn required(&self) -> f64 {
        self.baseline * self.quality
    }

    pub fn accepted(&self) -> Option<&RungResult> {
        self.rungs.iter().find(|r| r.passed)
    }

    /// `rung,alphabets,K,pass`, one row per attempted rung.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["rung", "alphabets", "K", "pass"])?;
        for r in &self.rungs {
            w.write_record([
                r.rung.to_string(),
                r.alphabets.label(),
                format!("{:.6}", r.accuracy),
                if r.passed { "pass" } else { "fail" }.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Every rung tried, plus the model of the accepted one.
#[derive(Clone, Debug)]
pub struct LadderRun {
    pub report: MethodologyReport,
    pub accepted: Option<RetrainOutcome>,
}

impl LadderRun {
    /// The accepted model, or `QualityUnreachable` with the best `K` seen.
    pub fn into_result(self) -> Result<(NetworkModel, MethodologyReport)> {
        match self.accepted {
            Some(outcome) => Ok((outcome.model, self.report)),
            None => Err(Error::QualityUnreachable {
                best: self
                    .report
                    .rungs
                    .iter()
                    .map(|r| r.accuracy)
                    .fold(0.0, f64::max),
                required: self.report.required(),
            }),
        }
    }
}

/// Walks `ladder` from the first rung, restoring `checkpoint` before each
/// attempt, and stops at the first rung whose retrained accuracy passes the
/// gate against the checkpoint's quantized baseline.
pub fn run_ladder<S: Scalar>(
    checkpoint: &Checkpoint<S>,
    ladder: &[AlphabetSet],
    quality: f64,
    cfg: &TrainConfig,
    train: &Dataset,
    test: &Dataset,
) -> Result<LadderRun> {
    check_quality(quality)?;
    if ladder.is_empty() {
        return Err(Error::Precondition("alphabet ladder is empty".into()));
    }
    let mut report = MethodologyReport {
        baseline: checkpoint.baseline,
        float_baseline: checkpoint.float_accuracy,
        quality,
        rungs: Vec::new(),
    };
    let layers = checkpoint.mlp.layers.len();
    for (rung, alphabets) in ladder.iter().enumerate() {
        let configs = uniform_configs(layers, checkpoint.weight_format, alphabets)?;
        let outcome = retrain_constrained(checkpoint, &configs, cfg, train, test)?;
        let gate = QualityGate {
            baseline: checkpoint.baseline,
            candidate: outcome.accuracy,
            quality,
        };
        report.rungs.push(RungResult {
            rung,
            alphabets: alphabets.clone(),
            accuracy: outcome.accuracy,
            projected_accuracy: outcome.projected_accuracy,
            passed: gate.passes(),
        });
        if gate.passes() {
            return Ok(LadderRun {
                report,
                accepted: Some(outcome),
            });
        }
    }
    Ok(LadderRun {
        report,
        accepted: None,
    })
}

/// Full methodology run: float baseline, then the alphabet ladder.
#[derive(Clone, Debug)]
pub struct Methodology<S> {
    pub baseline: FloatTraining<S>,
    pub model: NetworkModel,
    pub report: MethodologyReport,
}

pub fn methodology_loop<S: Scalar>(
    train: &Dataset,
    test: &Dataset,
    quality: f64,
    ladder: &[AlphabetSet],
    cfg: &TrainConfig,
) -> Result<Methodology<S>> {
    check_quality(quality)?;
    let baseline = train_float::<S>(cfg, train, test)?;
    let (model, report) =
        run_ladder(&baseline.checkpoint, ladder, quality, cfg, train, test)?.into_result()?;
    Ok(Methodology {
        baseline,
        model,
        report,
    })
}

/// Cheap head layers on `{1}`, richer sets on the last layers: with the
/// default tail `[{1,3}, {1,3,5,7}]` a 5-layer net gets
/// `[{1},{1},{1},{1,3},{1,3,5,7}]` and a 2-layer net `[{1},{1,3,5,7}]`.
pub fn mixed_layer_assign(layers: usize) -> Result<Vec<AlphabetSet>> {
    mixed_layer_assign_with(
        layers,
        &AlphabetSet::one(),
        &[AlphabetSet::two(), AlphabetSet::four()],
    )
}

/// The last `min(layers - 1, tail.len())` entries of `tail` go to the final
/// layers; everything before them gets `head`.
pub fn mixed_layer_assign_with(
    layers: usize,
    head: &AlphabetSet,
    tail: &[AlphabetSet],
) -> Result<Vec<AlphabetSet>> {
    if layers < 2 {
        return Err(Error::Precondition(format!(
            "mixed assignment needs at least 2 layers, got {layers}"
        )));
    }
    let n_tail = tail.len().min(layers - 1);
    let mut out = vec![head.clone(); layers - n_tail];
    out.extend_from_slice(&tail[tail.len() - n_tail..]);
    Ok(out)
}

/// Per-layer constraint configs for explicit alphabet sets.
pub fn layer_configs(weight_bits: u32, sets: &[AlphabetSet]) -> Result<Vec<ConstraintConfig>> {
    sets.iter()
        .map(|a| ConstraintConfig::new(weight_bits, a.clone()))
        .collect()
}
