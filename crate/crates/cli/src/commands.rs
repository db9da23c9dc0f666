use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use asmnn::config::{parse_alphabet_list, parse_topology, DatasetSpec, ExperimentConfig};
use asmnn::cost::{count_ops, mixed_cost, write_comparison_csv, CostWeights};
use asmnn::data::{Dataset, SynthKind};
use asmnn::nn::{load_model, save_model};
use asmnn::train::{
    layer_configs, project_only, retrain_constrained, run_ladder, train_float, Loss,
};
use asmnn::{AlphabetSet, Backend, Engine, FloatTraining, NetworkModel};

use crate::inspect;
use crate::UsageError;

#[derive(Debug, Parser)]
#[command(
    name = "asmnn",
    version,
    about = "Alphabet-set multiplier neural network experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train an unconstrained network and save its quantized model.
    Train(ExperimentArgs),
    /// Train, then retrain under per-layer alphabet constraints.
    Retrain(ExperimentArgs),
    /// Run the full train / constrain / retrain / gate / escalate loop.
    Methodology(ExperimentArgs),
    /// Evaluate a saved model on the test split.
    Eval(EvalArgs),
    /// Accuracy of the float, quantized and every ladder rung side by side.
    Compare(ExperimentArgs),
    /// Operation counts and proxy energy/area per backend.
    Cost(CostArgs),
    /// Project a saved model onto alphabet sets.
    Constrain(ConstrainArgs),
    /// Show how one weight decomposes into alphabet terms.
    InspectWeight(InspectArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Experiment config file (`key = value` with `[sections]`).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed for data generation, initialisation and shuffling.
    #[arg(long)]
    pub seed: Option<u64>,
    /// face-like | blobs | xor | mnist.
    #[arg(long)]
    pub dataset: Option<String>,
    /// Directory with the four MNIST IDX files.
    #[arg(long)]
    pub mnist_dir: Option<PathBuf>,
    /// Synthetic sample count, or IDX sample limit.
    #[arg(long)]
    pub train_samples: Option<usize>,
    #[arg(long)]
    pub test_samples: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Layer sizes, e.g. 784,64,10.
    #[arg(long)]
    pub topology: Option<String>,
    /// Weight word size (multiple of 4, 4..=16).
    #[arg(long)]
    pub bits: Option<u32>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub retrain_epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub retrain_lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// mse | cross-entropy.
    #[arg(long)]
    pub loss: Option<String>,
    /// Quality constraint Q in [0, 1].
    #[arg(long)]
    pub quality: Option<f64>,
    /// Alphabet ladder, e.g. "1; 1,3; 1,3,5,7; full".
    #[arg(long)]
    pub ladder: Option<String>,
    /// Per-layer alphabet sets, e.g. "1; 1,3,5,7", or one set for all layers.
    #[arg(long)]
    pub alphabets: Option<String>,
    /// Assign {1} to head layers and richer sets to the last two.
    #[arg(long, conflicts_with = "alphabets")]
    pub mixed: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub model: PathBuf,
    /// configured | exact | man | asm-<set>.
    #[arg(long, default_value = "configured")]
    pub backend: String,
}

#[derive(Debug, Args)]
pub struct CostArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Unit cost file (`primitive = energy, area`).
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Also cost the mixed per-layer assignment.
    #[arg(long)]
    pub mixed: bool,
    /// Number of tail layers for the mixed-cost share.
    #[arg(long, default_value_t = 2)]
    pub tail: usize,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ConstrainArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Per-layer sets separated by `;`, or one set for every layer.
    #[arg(long)]
    pub alphabets: String,
    /// Output model path.
    #[arg(long, default_value = "out/constrained.model")]
    pub output: PathBuf,
    /// Distortion report path.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// Raw weight integer.
    #[arg(allow_hyphen_values = true)]
    pub weight: i32,
    #[arg(long, default_value_t = 8)]
    pub bits: u32,
    #[arg(long, default_value = "1,3,5,7")]
    pub alphabets: String,
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn usage_err<E: std::fmt::Display>(e: E) -> anyhow::Error {
    usage(e.to_string())
}

fn preset_topology(kind: &str) -> Option<Vec<usize>> {
    Some(match kind {
        "face-like" | "face" | "facelike" => vec![64, 32, 2],
        "blobs" => vec![16, 16, 4],
        "xor" => vec![2, 4, 1],
        "mnist" => vec![784, 64, 10],
        _ => return None,
    })
}

impl DataArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| usage(format!("reading config {}: {e}", p.display())))?;
                ExperimentConfig::parse(&text)
                    .map_err(|e| usage(format!("config {}: {e}", p.display())))?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
            cfg.train.seed = s;
        }
        if let Some(name) = &self.dataset {
            if name == "mnist" {
                let dir = self
                    .mnist_dir
                    .clone()
                    .unwrap_or_else(|| PathBuf::from("data/mnist"));
                cfg.dataset = DatasetSpec::mnist_dir(&dir, 0, 0);
            } else {
                let kind: SynthKind = name.parse().map_err(usage_err)?;
                let (train_samples, test_samples) = match cfg.dataset {
                    DatasetSpec::Synth {
                        train_samples,
                        test_samples,
                        ..
                    } => (train_samples, test_samples),
                    DatasetSpec::Idx { .. } => (2000, 500),
                };
                cfg.dataset = DatasetSpec::Synth {
                    kind,
                    train_samples,
                    test_samples,
                };
            }
            if let Some(t) = preset_topology(name) {
                cfg.train.topology = t;
            }
        } else if let Some(dir) = &self.mnist_dir {
            cfg.dataset = DatasetSpec::mnist_dir(dir, 0, 0);
        }
        match &mut cfg.dataset {
            DatasetSpec::Synth {
                train_samples,
                test_samples,
                ..
            } => {
                *train_samples = self.train_samples.unwrap_or(*train_samples);
                *test_samples = self.test_samples.unwrap_or(*test_samples);
            }
            DatasetSpec::Idx {
                train_limit,
                test_limit,
                ..
            } => {
                *train_limit = self.train_samples.unwrap_or(*train_limit);
                *test_limit = self.test_samples.unwrap_or(*test_limit);
            }
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        Ok(cfg)
    }
}

impl ExperimentArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = self.data.config()?;
        let t = &mut cfg.train;
        if let Some(s) = &self.topology {
            t.topology = parse_topology(s).map_err(usage_err)?;
        }
        if let Some(b) = self.bits {
            t.weight_bits = b;
        }
        t.epochs = self.epochs.unwrap_or(t.epochs);
        t.retrain_epochs = self.retrain_epochs.unwrap_or(t.retrain_epochs);
        t.learning_rate = self.lr.unwrap_or(t.learning_rate);
        t.retrain_learning_rate = self.retrain_lr.unwrap_or(t.retrain_learning_rate);
        t.batch_size = self.batch_size.unwrap_or(t.batch_size);
        t.saturation_patience = self.patience.unwrap_or(t.saturation_patience);
        if let Some(l) = &self.loss {
            t.loss = l.parse::<Loss>().map_err(usage_err)?;
        }
        if let Some(q) = self.quality {
            cfg.quality = q;
        }
        if let Some(l) = &self.ladder {
            cfg.ladder = parse_alphabet_list(l).map_err(usage_err)?;
        }
        let layers = cfg.train.topology.len().saturating_sub(1);
        if self.mixed {
            cfg.layer_alphabets =
                Some(asmnn::train::mixed_layer_assign(layers).map_err(usage_err)?);
        } else if let Some(a) = &self.alphabets {
            cfg.layer_alphabets = Some(expand_sets(a, layers).map_err(usage_err)?);
        }
        cfg.validate().map_err(usage_err)?;
        Ok(cfg)
    }
}

/// One set broadcasts to every layer; otherwise one set per layer.
fn expand_sets(spec: &str, layers: usize) -> asmnn::Result<Vec<AlphabetSet>> {
    let sets = parse_alphabet_list(spec)?;
    if sets.len() == 1 {
        Ok(vec![sets[0].clone(); layers])
    } else {
        Ok(sets)
    }
}

fn load_data(cfg: &ExperimentConfig) -> Result<(Dataset, Dataset)> {
    cfg.dataset.load(cfg.seed).context("loading dataset")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = create(path)?;
    f.write_all(text.as_bytes())?;
    f.flush()?;
    Ok(())
}

fn save(model: &NetworkModel, path: &Path) -> Result<()> {
    create(path)?;
    save_model(model, path).with_context(|| format!("writing {}", path.display()))
}

fn baseline(cfg: &ExperimentConfig, train: &Dataset, test: &Dataset) -> Result<FloatTraining> {
    let t = train_float::<f64>(&cfg.train, train, test).context("training")?;
    let log = cfg.output_dir.join("train_log.csv");
    t.log.write_csv(create(&log)?)?;
    save(
        &t.checkpoint.mlp.quantize(t.checkpoint.weight_format)?,
        &cfg.output_dir.join("baseline.model"),
    )?;
    Ok(t)
}

fn pct(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(a) => cmd_train(&a.config()?),
        Command::Retrain(a) => cmd_retrain(&a.config()?),
        Command::Methodology(a) => cmd_methodology(&a.config()?),
        Command::Compare(a) => cmd_compare(&a.config()?),
        Command::Eval(a) => cmd_eval(&a),
        Command::Cost(a) => cmd_cost(&a),
        Command::Constrain(a) => cmd_constrain(&a),
        Command::InspectWeight(a) => {
            let set: AlphabetSet = a.alphabets.parse().map_err(usage_err)?;
            print!(
                "{}",
                inspect::trace(a.weight, a.bits, &set).map_err(usage_err)?
            );
            Ok(())
        }
    }
}

fn cmd_train(cfg: &ExperimentConfig) -> Result<()> {
    let (train, test) = load_data(cfg)?;
    let t = baseline(cfg, &train, &test)?;
    let summary = format!(
        "topology {:?}, {}-bit weights, seed {}\nbest epoch {}\nfloat accuracy {}\nquantized accuracy J {}\n",
        cfg.train.topology,
        cfg.train.weight_bits,
        cfg.seed,
        t.checkpoint.epoch,
        pct(t.checkpoint.float_accuracy),
        pct(t.checkpoint.baseline)
    );
    write_text(&cfg.output_dir.join("train_summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

fn cmd_retrain(cfg: &ExperimentConfig) -> Result<()> {
    let layers = cfg.train.topology.len() - 1;
    let sets = cfg
        .layer_alphabets
        .clone()
        .unwrap_or_else(|| vec![AlphabetSet::one(); layers]);
    let configs = layer_configs(cfg.train.weight_bits, &sets)?;
    let (train, test) = load_data(cfg)?;
    let t = baseline(cfg, &train, &test)?;
    let r = retrain_constrained(&t.checkpoint, &configs, &cfg.train, &train, &test)
        .context("retraining")?;
    r.log
        .write_csv(create(&cfg.output_dir.join("retrain_log.csv"))?)?;
    save(&r.model, &cfg.output_dir.join("retrained.model"))?;
    let labels: Vec<String> = sets.iter().map(ToString::to_string).collect();
    let summary = format!(
        "alphabets per layer: {}\nquantized baseline J {}\nprojected without retraining {}\nretrained K {} (epoch {})\n",
        labels.join(" "),
        pct(t.checkpoint.baseline),
        pct(r.projected_accuracy),
        pct(r.accuracy),
        r.best_epoch
    );
    write_text(&cfg.output_dir.join("retrain_summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

fn cmd_methodology(cfg: &ExperimentConfig) -> Result<()> {
    let (train, test) = load_data(cfg)?;
    let t = baseline(cfg, &train, &test)?;
    let run = run_ladder(
        &t.checkpoint,
        &cfg.ladder,
        cfg.quality,
        &cfg.train,
        &train,
        &test,
    )?;
    run.report
        .write_csv(create(&cfg.output_dir.join("methodology.csv"))?)?;
    let mut summary = format!(
        "float accuracy {}\nquantized baseline J {}\nquality Q {} -> required K >= {}\n",
        pct(run.report.float_baseline),
        pct(run.report.baseline),
        cfg.quality,
        pct(run.report.required())
    );
    for r in &run.report.rungs {
        summary.push_str(&format!(
            "rung {} {}: projected {}, K {} {}\n",
            r.rung,
            r.alphabets,
            pct(r.projected_accuracy),
            pct(r.accuracy),
            if r.passed { "pass" } else { "fail" }
        ));
    }
    if let Some(outcome) = &run.accepted {
        save(&outcome.model, &cfg.output_dir.join("final.model"))?;
        outcome
            .log
            .write_csv(create(&cfg.output_dir.join("retrain_log.csv"))?)?;
        summary.push_str("accepted\n");
    } else {
        summary.push_str("no rung passed the quality gate\n");
    }
    write_text(&cfg.output_dir.join("methodology_summary.txt"), &summary)?;
    print!("{summary}");
    run.into_result()?;
    Ok(())
}

fn cmd_compare(cfg: &ExperimentConfig) -> Result<()> {
    let (train, test) = load_data(cfg)?;
    let t = baseline(cfg, &train, &test)?;
    let layers = cfg.train.topology.len() - 1;
    let path = cfg.output_dir.join("compare.csv");
    let mut w = create(&path)?;
    writeln!(w, "arithmetic,projected_accuracy,retrained_accuracy")?;
    writeln!(w, "float,{0:.6},{0:.6}", t.checkpoint.float_accuracy)?;
    writeln!(w, "exact,{0:.6},{0:.6}", t.checkpoint.baseline)?;
    println!(
        "float {}  exact {}",
        pct(t.checkpoint.float_accuracy),
        pct(t.checkpoint.baseline)
    );
    for set in &cfg.ladder {
        let configs = layer_configs(cfg.train.weight_bits, &vec![set.clone(); layers])?;
        let (_, projected) = project_only(&t.checkpoint, &configs, &test)?;
        let r = retrain_constrained(&t.checkpoint, &configs, &cfg.train, &train, &test)?;
        writeln!(w, "{},{:.6},{:.6}", set.label(), projected, r.accuracy)?;
        println!(
            "{set}: projected {}  retrained {}",
            pct(projected),
            pct(r.accuracy)
        );
    }
    w.flush()?;
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let cfg = a.data.config()?;
    let model = load_model(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let (_, test) = load_data(&cfg)?;
    let engine = match a.backend.as_str() {
        "configured" => Engine::configured(&model)?,
        b => Engine::uniform(&model, b.parse::<Backend>().map_err(usage_err)?)?,
    };
    let eval = engine.evaluate(&test)?;
    let mut w = create(&cfg.output_dir.join("eval.csv"))?;
    writeln!(w, "model,backend,samples,correct,accuracy")?;
    writeln!(
        w,
        "{},{},{},{},{:.6}",
        a.model.display(),
        a.backend,
        eval.total(),
        eval.correct(),
        eval.accuracy()
    )?;
    w.flush()?;
    println!(
        "{} on {}: {} ({} / {})",
        a.model.display(),
        a.backend,
        pct(eval.accuracy()),
        eval.correct(),
        eval.total()
    );
    Ok(())
}

fn projected_for(model: &NetworkModel, backend: &Backend) -> Result<NetworkModel> {
    let set = match backend {
        Backend::Exact => return Ok(model.clone()),
        Backend::Man => AlphabetSet::one(),
        Backend::Asm(a) => a.clone(),
    };
    Ok(model.constrained(&vec![set; model.layers.len()])?.0)
}

fn cmd_cost(a: &CostArgs) -> Result<()> {
    let weights = match &a.weights {
        Some(p) => {
            CostWeights::load(p).map_err(|e| usage(format!("cost weights {}: {e}", p.display())))?
        }
        None => CostWeights::default(),
    };
    let model = load_model(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let n = model.layers.len();
    let mut reports = Vec::new();
    for backend in [
        Backend::Man,
        Backend::Asm(AlphabetSet::two()),
        Backend::Asm(AlphabetSet::four()),
        Backend::Exact,
    ] {
        let m = projected_for(&model, &backend)?;
        let r = count_ops(&m, &vec![backend.clone(); n], &weights)?;
        r.write_csv(create(&a.out.join(format!("cost_{backend}.csv")))?)?;
        reports.push(r);
    }
    if a.mixed {
        let sets = asmnn::train::mixed_layer_assign(n).map_err(usage_err)?;
        let (m, _) = model.constrained(&sets)?;
        let backends: Vec<Backend> = sets
            .iter()
            .map(|s| Backend::for_layer(&asmnn::nn::LayerArithmetic::Alphabets(s.clone())))
            .collect();
        let r = count_ops(&m, &backends, &weights)?;
        r.write_csv(create(&a.out.join("cost_mixed.csv"))?)?;
        let mc = mixed_cost(&m, &backends, &weights, a.tail)?;
        println!(
            "mixed: tail {} layers hold {} of multiplies, {} of energy",
            mc.tail_layers,
            pct(mc.tail_share),
            pct(mc.tail_energy_share)
        );
        reports.push(r);
    }
    write_comparison_csv(&reports, create(&a.out.join("cost_summary.csv"))?)?;
    for r in &reports {
        println!(
            "{:<14} energy {:.4}  area {:.4}",
            r.backend_label(),
            r.relative_energy,
            r.relative_area
        );
    }
    Ok(())
}

fn cmd_constrain(a: &ConstrainArgs) -> Result<()> {
    let model = load_model(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let sets = expand_sets(&a.alphabets, model.layers.len()).map_err(usage_err)?;
    if sets.len() != model.layers.len() {
        return Err(usage(format!(
            "{} alphabet sets for {} layers",
            sets.len(),
            model.layers.len()
        )));
    }
    let (constrained, report) = model.constrained(&sets)?;
    save(&constrained, &a.output)?;
    let report_path = a
        .report
        .clone()
        .unwrap_or_else(|| a.output.with_extension("distortion.csv"));
    report.write_csv(create(&report_path)?)?;
    let (count, modified, max_err, mean_err) = report.total();
    println!(
        "modified {modified} of {count} parameters, max |error| {max_err} LSB, mean {mean_err:.4} LSB"
    );
    Ok(())
}
