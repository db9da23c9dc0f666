//! Experiment configuration: flat `key = value` lines grouped under
//! `[section]` headers, `#` comments.
//!
//! ```text
//! seed = 42
//!
//! [dataset]
//! source = synth          # or idx
//! kind = face-like
//! train_samples = 2000
//! test_samples = 500
//!
//! [train]
//! topology = 64,32,2
//! weight_bits = 8
//! learning_rate = 2.0
//!
//! [methodology]
//! quality = 0.97
//! ladder = 1; 1,3; 1,3,5,7; full
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::asm::AlphabetSet;
use crate::data::{load_idx, synth_dataset, Dataset, SynthKind};
use crate::error::{Error, Result};
use crate::train::TrainConfig;

#[derive(Clone, Debug, PartialEq)]
pub enum DatasetSpec {
    Synth {
        kind: SynthKind,
        train_samples: usize,
        test_samples: usize,
    },
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
        /// `0` keeps everything.
        train_limit: usize,
        test_limit: usize,
    },
}

impl DatasetSpec {
    /// Train and test splits. Synthetic test data uses `seed + 1`.
    pub fn load(&self, seed: u64) -> Result<(Dataset, Dataset)> {
        match self {
            DatasetSpec::Synth {
                kind,
                train_samples,
                test_samples,
            } => Ok((
                synth_dataset(*kind, *train_samples, seed)?,
                synth_dataset(*kind, *test_samples, seed.wrapping_add(1))?,
            )),
            DatasetSpec::Idx {
                train_images,
                train_labels,
                test_images,
                test_labels,
                train_limit,
                test_limit,
            } => Ok((
                load_idx(train_images, train_labels, *train_limit)?,
                load_idx(test_images, test_labels, *test_limit)?,
            )),
        }
    }

    /// An IDX spec for the four standard MNIST file names inside `dir`.
    pub fn mnist_dir(dir: &Path, train_limit: usize, test_limit: usize) -> Self {
        DatasetSpec::Idx {
            train_images: dir.join("train-images-idx3-ubyte"),
            train_labels: dir.join("train-labels-idx1-ubyte"),
            test_images: dir.join("t10k-images-idx3-ubyte"),
            test_labels: dir.join("t10k-labels-idx1-ubyte"),
            train_limit,
            test_limit,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub dataset: DatasetSpec,
    pub train: TrainConfig,
    pub quality: f64,
    pub ladder: Vec<AlphabetSet>,
    /// Explicit per-layer sets for `retrain` and `constrain`.
    pub layer_alphabets: Option<Vec<AlphabetSet>>,
    pub cost_weights: Option<PathBuf>,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 42,
            dataset: DatasetSpec::Synth {
                kind: SynthKind::FaceLike,
                train_samples: 2000,
                test_samples: 500,
            },
            train: TrainConfig::default(),
            quality: 0.97,
            ladder: AlphabetSet::ladder(),
            layer_alphabets: None,
            cost_weights: None,
            output_dir: PathBuf::from("out"),
        }
    }
}

/// `1; 1,3; full` style list of alphabet sets.
pub fn parse_alphabet_list(s: &str) -> Result<Vec<AlphabetSet>> {
    let sets = s
        .split(';')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::parse)
        .collect::<Result<Vec<AlphabetSet>>>()?;
    if sets.is_empty() {
        return Err(Error::InvalidAlphabetSet("empty alphabet list".into()));
    }
    Ok(sets)
}

pub fn parse_topology(s: &str) -> Result<Vec<usize>> {
    s.split([',', '-', 'x'])
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::Precondition(format!("bad topology entry {t:?}")))
        })
        .collect()
}

struct Entry {
    line: usize,
    value: String,
}

type Sections = BTreeMap<String, BTreeMap<String, Entry>>;

fn split_sections(text: &str) -> Result<Sections> {
    let mut sections: Sections = BTreeMap::new();
    let mut current = String::new();
    sections.entry(current.clone()).or_default();
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| Error::parse(n, format!("unterminated section header {line:?}")))?;
            current = name.trim().to_string();
            sections.entry(current.clone()).or_default();
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(n, format!("expected `key = value`, found {line:?}")))?;
        let key = k.trim().to_string();
        let section = sections.entry(current.clone()).or_default();
        if section.contains_key(&key) {
            return Err(Error::parse(n, format!("duplicate key {key:?}")));
        }
        section.insert(
            key,
            Entry {
                line: n,
                value: v.trim().to_string(),
            },
        );
    }
    Ok(sections)
}

struct Reader {
    sections: Sections,
}

impl Reader {
    fn take(&mut self, section: &str, key: &str) -> Option<Entry> {
        self.sections.get_mut(section)?.remove(key)
    }

    fn parse<T: std::str::FromStr>(&mut self, section: &str, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.take(section, key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse()
                .map(Some)
                .map_err(|err| Error::parse(e.line, format!("{key}: {err}"))),
        }
    }

    fn with<T>(
        &mut self,
        section: &str,
        key: &str,
        f: impl FnOnce(&str) -> Result<T>,
    ) -> Result<Option<T>> {
        match self.take(section, key) {
            None => Ok(None),
            Some(e) => f(&e.value)
                .map(Some)
                .map_err(|err| Error::parse(e.line, format!("{key}: {err}"))),
        }
    }

    fn leftovers(&self) -> Result<()> {
        for (name, keys) in &self.sections {
            if let Some((k, e)) = keys.iter().next() {
                let where_ = if name.is_empty() {
                    String::new()
                } else {
                    format!(" in [{name}]")
                };
                return Err(Error::parse(e.line, format!("unknown key {k:?}{where_}")));
            }
        }
        Ok(())
    }
}

impl ExperimentConfig {
    /// Parses and validates. Paths are taken relative to the process, not
    /// the file.
    pub fn parse(text: &str) -> Result<Self> {
        let mut r = Reader {
            sections: split_sections(text)?,
        };
        let mut cfg = ExperimentConfig::default();
        if let Some(s) = r.parse("", "seed")? {
            cfg.seed = s;
        }

        let source: String = r
            .parse("dataset", "source")?
            .unwrap_or_else(|| "synth".into());
        cfg.dataset = match source.as_str() {
            "synth" => DatasetSpec::Synth {
                kind: r.parse("dataset", "kind")?.unwrap_or(SynthKind::FaceLike),
                train_samples: r.parse("dataset", "train_samples")?.unwrap_or(2000),
                test_samples: r.parse("dataset", "test_samples")?.unwrap_or(500),
            },
            "idx" | "mnist" => {
                let train_limit = r.parse("dataset", "train_limit")?.unwrap_or(0);
                let test_limit = r.parse("dataset", "test_limit")?.unwrap_or(0);
                let base = match r.parse::<PathBuf>("dataset", "dir")? {
                    Some(dir) => DatasetSpec::mnist_dir(&dir, train_limit, test_limit),
                    None => {
                        DatasetSpec::mnist_dir(Path::new("data/mnist"), train_limit, test_limit)
                    }
                };
                let DatasetSpec::Idx {
                    mut train_images,
                    mut train_labels,
                    mut test_images,
                    mut test_labels,
                    ..
                } = base
                else {
                    unreachable!()
                };
                for (key, slot) in [
                    ("train_images", &mut train_images),
                    ("train_labels", &mut train_labels),
                    ("test_images", &mut test_images),
                    ("test_labels", &mut test_labels),
                ] {
                    if let Some(p) = r.parse::<PathBuf>("dataset", key)? {
                        *slot = p;
                    }
                }
                DatasetSpec::Idx {
                    train_images,
                    train_labels,
                    test_images,
                    test_labels,
                    train_limit,
                    test_limit,
                }
            }
            other => {
                return Err(Error::Precondition(format!(
                    "unknown dataset source {other:?}"
                )))
            }
        };

        let t = &mut cfg.train;
        t.seed = cfg.seed;
        if let Some(v) = r.with("train", "topology", parse_topology)? {
            t.topology = v;
        }
        macro_rules! field {
            ($key:literal, $slot:expr) => {
                if let Some(v) = r.parse("train", $key)? {
                    $slot = v;
                }
            };
        }
        field!("weight_bits", t.weight_bits);
        field!("learning_rate", t.learning_rate);
        field!("retrain_learning_rate", t.retrain_learning_rate);
        field!("epochs", t.epochs);
        field!("retrain_epochs", t.retrain_epochs);
        field!("batch_size", t.batch_size);
        field!("saturation_patience", t.saturation_patience);
        field!("min_improvement", t.min_improvement);
        field!("loss", t.loss);

        if let Some(q) = r.parse("methodology", "quality")? {
            cfg.quality = q;
        }
        if let Some(l) = r.with("methodology", "ladder", parse_alphabet_list)? {
            cfg.ladder = l;
        }
        cfg.layer_alphabets = r.with("methodology", "alphabets", parse_alphabet_list)?;
        cfg.cost_weights = r.parse("cost", "weights")?;
        if let Some(d) = r.parse("output", "dir")? {
            cfg.output_dir = d;
        }
        r.leftovers()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        crate::train::check_quality(self.quality)?;
        if self.ladder.is_empty() {
            return Err(Error::Precondition("alphabet ladder is empty".into()));
        }
        if let Some(sets) = &self.layer_alphabets {
            let layers = self.train.topology.len() - 1;
            if sets.len() != layers {
                return Err(Error::Precondition(format!(
                    "{} per-layer alphabet sets for {layers} layers",
                    sets.len()
                )));
            }
        }
        if let DatasetSpec::Synth {
            train_samples,
            test_samples,
            ..
        } = self.dataset
        {
            if train_samples == 0 || test_samples == 0 {
                return Err(Error::EmptyDataset);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_file() {
        let text = "\
seed = 7
[dataset]
source = synth
kind = blobs
train_samples = 300
test_samples = 100   # trailing comment
[train]
topology = 16,8,4
learning_rate = 1.5
retrain_learning_rate = 0.5
loss = cross-entropy
[methodology]
quality = 0.95
ladder = 1; 1,3,5,7
alphabets = 1; {1,3}
[cost]
weights = costs.txt
[output]
dir = results
";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.train.seed, 7);
        assert_eq!(
            c.dataset,
            DatasetSpec::Synth {
                kind: SynthKind::Blobs,
                train_samples: 300,
                test_samples: 100
            }
        );
        assert_eq!(c.train.topology, vec![16, 8, 4]);
        assert_eq!(c.train.loss, crate::train::Loss::CrossEntropy);
        assert_eq!(c.ladder, vec![AlphabetSet::one(), AlphabetSet::four()]);
        assert_eq!(
            c.layer_alphabets,
            Some(vec![AlphabetSet::one(), AlphabetSet::two()])
        );
        assert_eq!(c.cost_weights, Some(PathBuf::from("costs.txt")));
        assert_eq!(c.output_dir, PathBuf::from("results"));
        let (train, test) = c.dataset.load(c.seed).unwrap();
        assert_eq!((train.len(), test.len()), (300, 100));
        assert_ne!(train.input(0), test.input(0));
    }

    #[test]
    fn empty_file_is_default() {
        assert_eq!(
            ExperimentConfig::parse("").unwrap(),
            ExperimentConfig::default()
        );
    }

    #[test]
    fn idx_paths() {
        let c = ExperimentConfig::parse(
            "[dataset]\nsource = idx\ndir = /m\ntrain_limit = 10\ntest_labels = /x/l\n",
        )
        .unwrap();
        match c.dataset {
            DatasetSpec::Idx {
                train_images,
                test_labels,
                train_limit,
                test_limit,
                ..
            } => {
                assert_eq!(train_images, PathBuf::from("/m/train-images-idx3-ubyte"));
                assert_eq!(test_labels, PathBuf::from("/x/l"));
                assert_eq!((train_limit, test_limit), (10, 0));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = |t: &str| ExperimentConfig::parse(t).unwrap_err();
        assert!(matches!(
            err("[train]\nlearning_rate = fast\n"),
            Error::Parse { line: 2, .. }
        ));
        assert!(matches!(
            err("\n\n[train]\nbogus = 1\n"),
            Error::Parse { line: 4, .. }
        ));
        assert!(matches!(
            err("seed = 1\nseed = 2\n"),
            Error::Parse { line: 2, .. }
        ));
        assert!(matches!(err("[train\n"), Error::Parse { line: 1, .. }));
        assert!(matches!(err("just words\n"), Error::Parse { line: 1, .. }));
        assert!(matches!(
            err("[methodology]\nladder = 1,2\n"),
            Error::Parse { line: 2, .. }
        ));
        // Semantically invalid after parsing.
        assert!(err("[methodology]\nquality = 1.5\n")
            .to_string()
            .contains("quality"));
        assert!(ExperimentConfig::parse("[methodology]\nalphabets = 1; 1; 1\n").is_err());
        assert!(ExperimentConfig::parse("[dataset]\nsource = web\n").is_err());
    }

    #[test]
    fn lists() {
        assert_eq!(parse_topology("784-64-10").unwrap(), vec![784, 64, 10]);
        assert!(parse_topology("4,,2").is_err());
        assert_eq!(
            parse_alphabet_list("full").unwrap(),
            vec![AlphabetSet::full()]
        );
        assert!(parse_alphabet_list(" ; ").is_err());
    }
}
