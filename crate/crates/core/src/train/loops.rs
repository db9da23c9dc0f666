use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::constraint::{ConstraintConfig, ConstraintTable};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::fixedpoint::QFormat;
use crate::nn::{Engine, NetworkModel};
use crate::scalar::Scalar;
use crate::train::mlp::{check_tables, mean_loss, sgd_step, FloatMlp, RealData, Workspace};
use crate::train::{Checkpoint, LogRow, TrainConfig, TrainingLog};

/// Integer-engine accuracy of a model, each layer on its own hardware.
pub fn model_accuracy(model: &NetworkModel, data: &Dataset) -> Result<f64> {
    Ok(Engine::configured(model)?.evaluate(data)?.accuracy())
}

/// Tracks "near saturation": no gain of at least `min_delta` over the best
/// accuracy seen for `patience` consecutive epochs.
struct Saturation {
    best: f64,
    stale: usize,
    patience: usize,
    min_delta: f64,
}

impl Saturation {
    fn new(initial: f64, patience: usize, min_delta: f64) -> Self {
        Saturation {
            best: initial,
            stale: 0,
            patience,
            min_delta,
        }
    }

    fn observe(&mut self, acc: f64) -> bool {
        if acc >= self.best + self.min_delta {
            self.best = acc;
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        self.stale >= self.patience
    }
}

fn check_data(cfg: &TrainConfig, train: &Dataset, test: &Dataset) -> Result<()> {
    if train.is_empty() || test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for d in [train, test] {
        if d.dim() != cfg.topology[0] {
            return Err(Error::DimensionMismatch {
                expected: cfg.topology[0],
                found: d.dim(),
            });
        }
    }
    let out = *cfg.topology.last().expect("validated topology");
    let classes = train.num_classes().max(test.num_classes());
    if out != 1 && out < classes {
        return Err(Error::Precondition(format!(
            "{out} output units cannot encode {classes} classes"
        )));
    }
    if out == 1 && train.labels().iter().chain(test.labels()).any(|&l| l > 1) {
        return Err(Error::Precondition(
            "a single output unit needs binary labels".into(),
        ));
    }
    Ok(())
}

/// Result of unconstrained training.
#[derive(Clone, Debug)]
pub struct FloatTraining<S> {
    pub checkpoint: Checkpoint<S>,
    pub log: TrainingLog,
}

/// Plain backpropagation until the test accuracy saturates or the epoch cap
/// is hit. The best epoch (by real-valued test accuracy, epoch 0 included)
/// becomes the checkpoint, and `J` is its quantized accuracy.
pub fn train_float<S: Scalar>(
    cfg: &TrainConfig,
    train: &Dataset,
    test: &Dataset,
) -> Result<FloatTraining<S>> {
    cfg.validate()?;
    check_data(cfg, train, test)?;
    let format = cfg.weight_format()?;
    let train_r = RealData::<S>::new(train);
    let test_r = RealData::<S>::new(test);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = FloatMlp::<S>::random(&cfg.topology, &mut rng)?;
    let lr = S::lit(cfg.learning_rate);

    let initial_acc = net.accuracy(&test_r);
    let mut log = TrainingLog::default();
    log.rows.push(LogRow {
        epoch: 0,
        train_loss: mean_loss(&net, &train_r, cfg.loss).to_f64_lossy(),
        test_acc: initial_acc,
    });
    let mut best = (initial_acc, 0, net.clone(), rng.clone());
    let mut sat = Saturation::new(initial_acc, cfg.saturation_patience, cfg.min_improvement);
    let mut order: Vec<usize> = (0..train_r.len()).collect();
    let mut ws = Workspace::new(&net);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = S::zero();
        for batch in order.chunks(cfg.batch_size) {
            total = total + sgd_step(None, &mut net, &train_r, batch, lr, cfg.loss, &mut ws);
        }
        let train_loss = (total / S::lit(order.len() as f64)).to_f64_lossy();
        if !train_loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        let acc = net.accuracy(&test_r);
        log.rows.push(LogRow {
            epoch,
            train_loss,
            test_acc: acc,
        });
        if acc > best.0 {
            best = (acc, epoch, net.clone(), rng.clone());
        }
        if sat.observe(acc) {
            break;
        }
    }

    let (float_accuracy, epoch, mlp, rng) = best;
    let quantized = mlp.quantize(format)?;
    let baseline = model_accuracy(&quantized, test)?;
    Ok(FloatTraining {
        checkpoint: Checkpoint {
            mlp,
            rng,
            epoch,
            weight_format: format,
            baseline,
            float_accuracy,
        },
        log,
    })
}

/// Constrained model produced by retraining.
#[derive(Clone, Debug)]
pub struct RetrainOutcome {
    pub model: NetworkModel,
    /// Test accuracy `K` of `model` on the integer engine.
    pub accuracy: f64,
    /// Accuracy of the checkpoint projected without any retraining.
    pub projected_accuracy: f64,
    pub best_epoch: usize,
    pub log: TrainingLog,
}

fn tables_for(configs: &[ConstraintConfig]) -> Vec<ConstraintTable> {
    configs.iter().cloned().map(ConstraintTable::new).collect()
}

/// Projects the checkpoint onto `configs` with no retraining.
pub fn project_only<S: Scalar>(
    checkpoint: &Checkpoint<S>,
    configs: &[ConstraintConfig],
    test: &Dataset,
) -> Result<(NetworkModel, f64)> {
    let tables = tables_for(configs);
    let model = checkpoint
        .mlp
        .constrained_model(checkpoint.weight_format, &tables)?;
    let acc = model_accuracy(&model, test)?;
    Ok((model, acc))
}

/// Straight-through retraining: every minibatch runs forward and backward
/// through the quantized, constrained copy of the real shadow weights, and
/// the gradient is applied to the shadow weights. Shadow weights are
/// clamped to the representable weight range. Accuracy is measured on the
/// integer engine after each epoch; the best epoch, including the projected
/// checkpoint itself, is emitted.
pub fn retrain_constrained<S: Scalar>(
    checkpoint: &Checkpoint<S>,
    configs: &[ConstraintConfig],
    cfg: &TrainConfig,
    train: &Dataset,
    test: &Dataset,
) -> Result<RetrainOutcome> {
    cfg.validate()?;
    check_data(cfg, train, test)?;
    if checkpoint.mlp.topology() != cfg.topology {
        return Err(Error::Precondition(format!(
            "checkpoint topology {:?} differs from configured {:?}",
            checkpoint.mlp.topology(),
            cfg.topology
        )));
    }
    let format = checkpoint.weight_format;
    let tables = tables_for(configs);
    check_tables(&checkpoint.mlp, format, &tables)?;
    let train_r = RealData::<S>::new(train);
    let mut rng = checkpoint.rng.clone();
    let mut shadow = checkpoint.mlp.clone();
    let mut projected = shadow.clone();
    let lr = S::lit(cfg.retrain_learning_rate);
    let lo = S::lit(f64::from(format.min_raw())) * format.lsb::<S>();
    let hi = S::lit(f64::from(format.max_raw())) * format.lsb::<S>();

    let start = shadow.constrained_model(format, &tables)?;
    let projected_accuracy = model_accuracy(&start, test)?;
    shadow.project_into(format, &tables, &mut projected);
    let mut log = TrainingLog::default();
    log.rows.push(LogRow {
        epoch: 0,
        train_loss: mean_loss(&projected, &train_r, cfg.loss).to_f64_lossy(),
        test_acc: projected_accuracy,
    });
    let mut best = (projected_accuracy, 0, start);
    let mut sat = Saturation::new(
        projected_accuracy,
        cfg.saturation_patience,
        cfg.min_improvement,
    );
    let mut order: Vec<usize> = (0..train_r.len()).collect();
    let mut ws = Workspace::new(&shadow);

    for epoch in 1..=cfg.retrain_epochs {
        order.shuffle(&mut rng);
        let mut total = S::zero();
        for batch in order.chunks(cfg.batch_size) {
            shadow.project_into(format, &tables, &mut projected);
            total = total
                + sgd_step(
                    Some(&projected),
                    &mut shadow,
                    &train_r,
                    batch,
                    lr,
                    cfg.loss,
                    &mut ws,
                );
            shadow.clamp_all(lo, hi);
        }
        let train_loss = (total / S::lit(order.len() as f64)).to_f64_lossy();
        if !train_loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        let model = shadow.constrained_model(format, &tables)?;
        let acc = model_accuracy(&model, test)?;
        log.rows.push(LogRow {
            epoch,
            train_loss,
            test_acc: acc,
        });
        if acc > best.0 {
            best = (acc, epoch, model);
        }
        if sat.observe(acc) {
            break;
        }
    }

    let (accuracy, best_epoch, model) = best;
    Ok(RetrainOutcome {
        model,
        accuracy,
        projected_accuracy,
        best_epoch,
        log,
    })
}

/// Uniform per-layer configs for one alphabet set.
pub(crate) fn uniform_configs(
    layers: usize,
    format: QFormat,
    alphabets: &crate::asm::AlphabetSet,
) -> Result<Vec<ConstraintConfig>> {
    (0..layers)
        .map(|_| ConstraintConfig::new(format.total_bits(), alphabets.clone()))
        .collect()
}
