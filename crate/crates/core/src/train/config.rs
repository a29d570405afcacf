use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Encoder {
    /// Bidirectional GRU over sequential edges only.
    Bigru,
    /// Bidirectional GRU with chain-membership indicators appended to the
    /// inputs.
    Onehot,
    /// Split sequential and coreference states.
    Mage,
    /// One state tied across sequential and coreference edges.
    MageShared,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Head {
    Classify,
    Extractive,
}

macro_rules! kebab_enum {
    ($ty:ty, $($name:literal => $v:expr),+) => {
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($v),)+
                    _ => Err(Error::Config(format!("unknown {} `{s}`", stringify!($ty).to_lowercase()))),
                }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let name = match self { $(x if *x == $v => $name,)+ _ => unreachable!() };
                f.write_str(name)
            }
        }
    };
}

kebab_enum!(Encoder, "bigru" => Encoder::Bigru, "onehot" => Encoder::Onehot, "mage" => Encoder::Mage, "mage-shared" => Encoder::MageShared);
kebab_enum!(Head, "classify" => Head::Classify, "extractive" => Head::Extractive);

/// Where the stories come from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum DataSource {
    /// bAbi-format files; the task number comes from the training file name
    /// unless given.
    Files { train: PathBuf, test: PathBuf, task: Option<u8> },
    /// Generated stories: the training file from `seed`, the test file
    /// from `seed + 1`.
    Synthetic {
        task: u8,
        seed: u64,
        stories: usize,
        statements_min: usize,
        statements_max: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct TrainConfig {
    pub encoder: Encoder,
    pub head: Head,
    pub d_emb: usize,
    pub seq_dim: usize,
    pub coref_dim: usize,
    pub layers: usize,
    pub lr: f64,
    pub clip: f64,
    /// Upper bound on epochs.
    pub epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub data: DataSource,
    /// Fraction of training stories (taken from the end) held out.
    pub valid_fraction: f64,
    /// Let question mentions join the coreference chains.
    pub link_question: bool,
    /// Put the story and question in a random order per example instead of
    /// story first.
    pub permute: bool,
    /// Cap on the one-hot chain indicator width.
    pub m_max: usize,
    pub interpolate_with_memory: bool,
    /// Use the stacked update when the layout allows it.
    pub fast_path: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            encoder: Encoder::Mage,
            head: Head::Classify,
            d_emb: 64,
            seq_dim: 48,
            coref_dim: 16,
            layers: 1,
            lr: 1e-3,
            clip: 5.0,
            epochs: 200,
            patience: 20,
            batch_size: 1,
            seed: 1,
            data: DataSource::Synthetic {
                task: 1,
                seed: 1000,
                stories: 200,
                statements_min: 2,
                statements_max: 2,
            },
            valid_fraction: 0.1,
            link_question: true,
            permute: false,
            m_max: 10,
            interpolate_with_memory: false,
            fast_path: true,
        }
    }
}

impl TrainConfig {
    /// Defaults for `encoder` at a total per-direction width of 64: the
    /// split encoders use 48 + 16, the others a single 64-wide state.
    pub fn for_encoder(encoder: Encoder) -> Self {
        let (seq_dim, coref_dim) = match encoder {
            Encoder::Mage => (48, 16),
            _ => (64, 0),
        };
        TrainConfig {
            encoder,
            seq_dim,
            coref_dim,
            ..Self::default()
        }
    }

    /// Per-direction recurrent width.
    pub fn state_width(&self) -> usize {
        self.seq_dim + self.coref_dim
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.d_emb == 0 || self.seq_dim == 0 || self.layers == 0 {
            return bad("d-emb, seq-dim and layers must be positive");
        }
        match self.encoder {
            Encoder::Mage if self.coref_dim == 0 => return bad("mage needs a positive coref-dim"),
            Encoder::Bigru | Encoder::Onehot if self.coref_dim != 0 => {
                return bad("coref-dim applies to the mage encoders only")
            }
            _ => {}
        }
        if self.batch_size != 1 {
            return bad("only batch-size 1 is supported");
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) || !(self.clip > 0.0) {
            return bad("lr must be non-negative and clip positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if !(0.0..1.0).contains(&self.valid_fraction) || self.valid_fraction == 0.0 {
            return bad("valid-fraction must lie in (0, 1)");
        }
        if let DataSource::Synthetic {
            statements_min,
            statements_max,
            stories,
            ..
        } = self.data
        {
            if statements_min == 0 || statements_min > statements_max || stories < 2 {
                return bad("synthetic data needs 1 <= statements-min <= statements-max and 2+ stories");
            }
        }
        Ok(())
    }

    /// Applies one `key=value` setting; keys are the kebab-case field names
    /// plus the data keys `train-file`, `test-file`, `task`, `synth-task`,
    /// `data-seed`, `stories`, `statements-min` and `statements-max`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("bad value `{v}` for `{key}`")))
        }
        match key {
            "encoder" => self.encoder = value.parse()?,
            "head" => self.head = value.parse()?,
            "d-emb" => self.d_emb = parse(key, value)?,
            "seq-dim" => self.seq_dim = parse(key, value)?,
            "coref-dim" => self.coref_dim = parse(key, value)?,
            "layers" => self.layers = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "clip" => self.clip = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "patience" => self.patience = parse(key, value)?,
            "batch-size" => self.batch_size = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "valid-fraction" => self.valid_fraction = parse(key, value)?,
            "link-question" => self.link_question = parse(key, value)?,
            "permute" => self.permute = parse(key, value)?,
            "m-max" => self.m_max = parse(key, value)?,
            "interpolate-with-memory" => self.interpolate_with_memory = parse(key, value)?,
            "fast-path" => self.fast_path = parse(key, value)?,
            "train-file" | "test-file" | "task" => {
                let (mut train, mut test, mut task) = match &self.data {
                    DataSource::Files { train, test, task } => (train.clone(), test.clone(), *task),
                    DataSource::Synthetic { .. } => (PathBuf::new(), PathBuf::new(), None),
                };
                match key {
                    "train-file" => train = value.into(),
                    "test-file" => test = value.into(),
                    _ => task = Some(parse(key, value)?),
                }
                self.data = DataSource::Files { train, test, task };
            }
            "synth-task" | "data-seed" | "stories" | "statements-min" | "statements-max" => {
                let DataSource::Synthetic {
                    task,
                    seed,
                    stories,
                    statements_min,
                    statements_max,
                } = &mut self.data
                else {
                    return Err(Error::Config(format!("`{key}` needs synthetic data")));
                };
                match key {
                    "synth-task" => {
                        *task = parse(key, value)?;
                        let default = if *task == 2 { (2, 5) } else { (2, 2) };
                        (*statements_min, *statements_max) = default;
                    }
                    "data-seed" => *seed = parse(key, value)?,
                    "stories" => *stories = parse(key, value)?,
                    "statements-min" => *statements_min = parse(key, value)?,
                    _ => *statements_max = parse(key, value)?,
                }
            }
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies a `key=value` file. Blank lines and `#` comments are skipped.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        self.apply_str(&text)
    }

    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", i + 1)))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_value_file() {
        let mut c = TrainConfig::default();
        c.apply_str("# comment\nencoder = bigru\ncoref-dim=0\nseq-dim=64\nsynth-task=2\nlr=0.01\n")
            .unwrap();
        assert_eq!(c.encoder, Encoder::Bigru);
        assert_eq!(c.state_width(), 64);
        assert!(matches!(c.data, DataSource::Synthetic { task: 2, statements_max: 5, .. }));
        c.validate().unwrap();
        assert!(c.apply_str("nope=1").is_err());
        assert!(c.apply_str("lr").is_err());
    }

    #[test]
    fn capacity_matched_defaults() {
        for e in [Encoder::Bigru, Encoder::Onehot, Encoder::Mage, Encoder::MageShared] {
            let c = TrainConfig::for_encoder(e);
            assert_eq!(c.state_width(), 64);
            c.validate().unwrap();
        }
    }

    #[test]
    fn rejects_bad_dims() {
        let mut c = TrainConfig::for_encoder(Encoder::Mage);
        c.coref_dim = 0;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::for_encoder(Encoder::Bigru);
        c.coref_dim = 4;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::default();
        c.batch_size = 4;
        assert!(c.validate().is_err());
    }

    #[test]
    fn names_round_trip() {
        for e in [Encoder::Bigru, Encoder::Onehot, Encoder::Mage, Encoder::MageShared] {
            assert_eq!(e.to_string().parse::<Encoder>().unwrap(), e);
        }
    }
}
