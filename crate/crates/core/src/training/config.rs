use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kv::KvMap;
use crate::models::{BaselineConfig, BaselineKind, EncoderConfig};
use crate::tokenization::{Strategy, TokenizerSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Transformer,
    TextCnn,
    BiLstm,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Transformer => "transformer",
            ModelKind::TextCnn => "text_cnn",
            ModelKind::BiLstm => "bilstm",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "transformer" => Ok(ModelKind::Transformer),
            "text_cnn" => Ok(ModelKind::TextCnn),
            "bilstm" => Ok(ModelKind::BiLstm),
            other => Err(Error::Config(format!(
                "unknown model {other:?}; expected transformer, text_cnn or bilstm"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamSettings {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamSettings {
    fn default() -> Self {
        AdamSettings {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Everything that determines a training run besides the data.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Label shown in results tables.
    pub name: String,
    pub model: ModelKind,
    pub tokenizer: TokenizerSpec,
    pub lexicon: Option<PathBuf>,
    /// word2vec text file for the baselines; synthetic vectors when absent.
    pub embeddings: Option<PathBuf>,
    pub embedding_dim: usize,
    pub vectors_seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub layers: usize,
    pub hidden: usize,
    pub heads: usize,
    pub ffn: usize,
    pub dropout: f64,
    pub head_dropout: f64,
    pub windows: Vec<usize>,
    pub maps_per_window: usize,
    pub lstm_hidden: usize,
    pub baseline_dropout: f64,
    pub adam: AdamSettings,
    /// Global gradient norm cap; 0 disables clipping.
    pub clip_norm: f64,
    /// Share of the training split held out when no validation split is given.
    pub valid_fraction: f64,
}

pub const CONFIG_KEYS: [&str; 28] = [
    "name",
    "model",
    "tokenizer",
    "vocab_size",
    "max_len",
    "lexicon",
    "embeddings",
    "embedding_dim",
    "vectors_seed",
    "epochs",
    "learning_rate",
    "batch_size",
    "seed",
    "layers",
    "hidden",
    "heads",
    "ffn",
    "dropout",
    "head_dropout",
    "windows",
    "maps_per_window",
    "lstm_hidden",
    "baseline_dropout",
    "adam_beta1",
    "adam_beta2",
    "adam_eps",
    "clip_norm",
    "valid_fraction",
];

impl ExperimentConfig {
    /// Desk-scale defaults for `model`.
    pub fn new(model: ModelKind) -> Self {
        ExperimentConfig {
            name: model.as_str().to_string(),
            model,
            tokenizer: TokenizerSpec {
                strategy: match model {
                    ModelKind::Transformer => Strategy::Subword,
                    _ => Strategy::Whitespace,
                },
                vocab_size: 512,
                max_len: 32,
            },
            lexicon: None,
            embeddings: None,
            embedding_dim: 48,
            vectors_seed: 0,
            epochs: 5,
            learning_rate: match model {
                ModelKind::Transformer => 3e-4,
                _ => 3e-3,
            },
            batch_size: 32,
            seed: 42,
            layers: 4,
            hidden: 32,
            heads: 4,
            ffn: 128,
            dropout: 0.1,
            head_dropout: 0.1,
            windows: vec![3, 4, 5],
            maps_per_window: 100,
            lstm_hidden: 32,
            baseline_dropout: 0.5,
            adam: AdamSettings::default(),
            clip_norm: 1.0,
            valid_fraction: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.valid_fraction) {
            return Err(Error::Config(format!(
                "valid_fraction must lie in [0, 1), got {}",
                self.valid_fraction
            )));
        }
        if !(self.clip_norm >= 0.0) {
            return Err(Error::Config(format!("clip_norm must be non-negative, got {}", self.clip_norm)));
        }
        let a = self.adam;
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || !(a.eps > 0.0) {
            return Err(Error::Config(format!("invalid Adam settings {a:?}")));
        }
        if !(0.0..1.0).contains(&self.head_dropout) {
            return Err(Error::Config(format!("head_dropout must lie in [0, 1), got {}", self.head_dropout)));
        }
        self.tokenizer.validate()?;
        match self.model {
            ModelKind::Transformer => {
                if self.layers < 4 {
                    return Err(Error::Config(format!(
                        "the CLS-concatenation head needs at least 4 layers, got {}",
                        self.layers
                    )));
                }
                self.encoder_config(self.tokenizer.vocab_size).validate()
            }
            ModelKind::TextCnn | ModelKind::BiLstm => self.baseline_config(self.embedding_dim).validate(),
        }
    }

    pub fn encoder_config(&self, vocab_size: usize) -> EncoderConfig {
        EncoderConfig {
            num_layers: self.layers,
            hidden_size: self.hidden,
            num_heads: self.heads,
            ffn_size: self.ffn,
            max_positions: self.tokenizer.max_len,
            vocab_size,
            dropout: self.dropout,
        }
    }

    pub fn baseline_config(&self, embedding_dim: usize) -> BaselineConfig {
        BaselineConfig {
            kind: match self.model {
                ModelKind::BiLstm => BaselineKind::BiLstm,
                _ => BaselineKind::TextCnn,
            },
            embedding_dim,
            windows: self.windows.clone(),
            maps_per_window: self.maps_per_window,
            lstm_hidden: self.lstm_hidden,
            dropout: self.baseline_dropout,
        }
    }

    /// Builds a config from `model` defaults overridden by `kv`. Relative
    /// paths resolve against the directory of the kv file. Keys outside the
    /// config vocabulary are rejected unless listed in `extra`.
    pub fn from_kv(kv: &KvMap, extra: &[&str]) -> Result<Self> {
        for k in kv.keys() {
            if !CONFIG_KEYS.contains(&k) && !extra.contains(&k) {
                return Err(Error::Config(format!("{}: unknown key {k:?}", kv.path().display())));
            }
        }
        let mut c = ExperimentConfig::new(kv.require("model")?.parse()?);
        let base = kv.path().parent().unwrap_or(Path::new(""));
        c.apply(|k| kv.get(k).map(str::to_string), base)?;
        c.validate()?;
        Ok(c)
    }

    /// Overrides fields from string values, e.g. one row of a sweep grid.
    pub fn with_overrides(&self, pairs: &[(String, String)]) -> Result<Self> {
        for (k, _) in pairs {
            if !CONFIG_KEYS.contains(&k.as_str()) {
                return Err(Error::Config(format!("unknown config key {k:?} in override")));
            }
        }
        let lookup = |k: &str| pairs.iter().find(|(a, _)| a == k).map(|(_, v)| v.clone());
        let mut c = self.clone();
        if let Some(m) = lookup("model") {
            let model: ModelKind = m.parse()?;
            if model != c.model {
                let mut fresh = ExperimentConfig::new(model);
                fresh.seed = c.seed;
                c = fresh;
            }
        }
        c.apply(lookup, Path::new(""))?;
        c.validate()?;
        Ok(c)
    }

    fn apply(&mut self, get: impl Fn(&str) -> Option<String>, base: &Path) -> Result<()> {
        fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.trim()
                .parse()
                .map_err(|_| Error::Config(format!("cannot parse {key} = {v:?}")))
        }
        let path = |v: String| {
            let p = PathBuf::from(v);
            if p.is_relative() {
                base.join(p)
            } else {
                p
            }
        };
        if let Some(v) = get("name") {
            self.name = v;
        }
        if let Some(v) = get("tokenizer") {
            self.tokenizer.strategy = v.parse()?;
        }
        macro_rules! set {
            ($($key:literal => $field:expr),* $(,)?) => {
                $(if let Some(v) = get($key) { $field = parse($key, &v)?; })*
            };
        }
        set! {
            "vocab_size" => self.tokenizer.vocab_size,
            "max_len" => self.tokenizer.max_len,
            "embedding_dim" => self.embedding_dim,
            "vectors_seed" => self.vectors_seed,
            "epochs" => self.epochs,
            "learning_rate" => self.learning_rate,
            "batch_size" => self.batch_size,
            "seed" => self.seed,
            "layers" => self.layers,
            "hidden" => self.hidden,
            "heads" => self.heads,
            "ffn" => self.ffn,
            "dropout" => self.dropout,
            "head_dropout" => self.head_dropout,
            "maps_per_window" => self.maps_per_window,
            "lstm_hidden" => self.lstm_hidden,
            "baseline_dropout" => self.baseline_dropout,
            "adam_beta1" => self.adam.beta1,
            "adam_beta2" => self.adam.beta2,
            "adam_eps" => self.adam.eps,
            "clip_norm" => self.clip_norm,
            "valid_fraction" => self.valid_fraction,
        }
        if let Some(v) = get("windows") {
            self.windows = v
                .split(',')
                .map(|w| parse("windows", w))
                .collect::<Result<_>>()?;
        }
        if let Some(v) = get("lexicon") {
            self.lexicon = Some(path(v));
        }
        if let Some(v) = get("embeddings") {
            self.embeddings = Some(path(v));
        }
        Ok(())
    }

    /// `(key, value)` pairs in a fixed order; parsing them back gives the same config.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let mut v: Vec<(&str, String)> = vec![
            ("name", self.name.clone()),
            ("model", self.model.to_string()),
            ("tokenizer", self.tokenizer.strategy.to_string()),
            ("vocab_size", self.tokenizer.vocab_size.to_string()),
            ("max_len", self.tokenizer.max_len.to_string()),
        ];
        if let Some(p) = &self.lexicon {
            v.push(("lexicon", p.display().to_string()));
        }
        if let Some(p) = &self.embeddings {
            v.push(("embeddings", p.display().to_string()));
        }
        v.extend([
            ("embedding_dim", self.embedding_dim.to_string()),
            ("vectors_seed", self.vectors_seed.to_string()),
            ("epochs", self.epochs.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("seed", self.seed.to_string()),
            ("layers", self.layers.to_string()),
            ("hidden", self.hidden.to_string()),
            ("heads", self.heads.to_string()),
            ("ffn", self.ffn.to_string()),
            ("dropout", self.dropout.to_string()),
            ("head_dropout", self.head_dropout.to_string()),
            (
                "windows",
                self.windows.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(","),
            ),
            ("maps_per_window", self.maps_per_window.to_string()),
            ("lstm_hidden", self.lstm_hidden.to_string()),
            ("baseline_dropout", self.baseline_dropout.to_string()),
            ("adam_beta1", self.adam.beta1.to_string()),
            ("adam_beta2", self.adam.beta2.to_string()),
            ("adam_eps", self.adam.eps.to_string()),
            ("clip_norm", self.clip_norm.to_string()),
            ("valid_fraction", self.valid_fraction.to_string()),
        ]);
        v.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    pub fn to_kv(&self) -> String {
        self.to_pairs()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_echo_round_trips() {
        let mut c = ExperimentConfig::new(ModelKind::TextCnn);
        c.learning_rate = 2e-5;
        c.windows = vec![2, 3];
        c.embeddings = Some(PathBuf::from("/data/vec.txt"));
        let kv = crate::kv::parse(&c.to_kv(), Path::new("/cfg/run.cfg")).unwrap();
        assert_eq!(ExperimentConfig::from_kv(&kv, &[]).unwrap(), c);
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let kv = crate::kv::parse("model = bilstm\nlexicon = lex.txt\n", Path::new("/cfg/a.cfg")).unwrap();
        let c = ExperimentConfig::from_kv(&kv, &[]).unwrap();
        assert_eq!(c.lexicon, Some(PathBuf::from("/cfg/lex.txt")));
    }

    #[test]
    fn invalid_values_are_rejected() {
        let bad = [
            "model = transformer\nepochs = 0\n",
            "model = transformer\nbatch_size = 0\n",
            "model = transformer\nlearning_rate = -1\n",
            "model = transformer\nhidden = 30\n",
            "model = transformer\nlayers = 3\n",
            "model = rnn\n",
            "model = transformer\nmystery = 1\n",
        ];
        for text in bad {
            let kv = crate::kv::parse(text, Path::new("c.cfg")).unwrap();
            assert!(ExperimentConfig::from_kv(&kv, &[]).is_err(), "{text}");
        }
    }

    #[test]
    fn overrides_apply_in_place() {
        let c = ExperimentConfig::new(ModelKind::Transformer);
        let o = c
            .with_overrides(&[
                ("name".into(), "PhoBERT".into()),
                ("epochs".into(), "7".into()),
                ("learning_rate".into(), "2e-5".into()),
            ])
            .unwrap();
        assert_eq!((o.name.as_str(), o.epochs, o.learning_rate), ("PhoBERT", 7, 2e-5));
        assert_eq!(o.hidden, c.hidden);
    }
}
