//! Classifiers: the transformer encoder with the CLS-concatenation head, and
//! the TextCNN and BiLSTM baselines over static word vectors.
//!
//! All models run in `f64` with hand-written backward passes. Gradients are
//! accumulated into a value of the model's own type (see [`Parameters`]).

mod bilstm;
pub mod checkpoint;
mod encoder;
mod head;
mod ops;
mod params;
mod text_cnn;

pub use bilstm::{BiLstm, LstmDirection};
pub use encoder::{cls_concat, Encoder, EncoderConfig, EncoderLayer, EncoderOutput};
pub use head::{ClsConcatHead, HeadOutput};
pub use ops::{cross_entropy, softmax2};
pub use params::{zeros_like, Parameters, Slab};
pub use text_cnn::TextCnn;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tokenization::TokenizedExample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineKind {
    TextCnn,
    BiLstm,
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaselineKind::TextCnn => "text_cnn",
            BaselineKind::BiLstm => "bilstm",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    pub kind: BaselineKind,
    pub embedding_dim: usize,
    /// TextCNN window sizes.
    pub windows: Vec<usize>,
    pub maps_per_window: usize,
    /// BiLSTM hidden units per direction.
    pub lstm_hidden: usize,
    pub dropout: f64,
}

impl BaselineConfig {
    pub fn text_cnn(embedding_dim: usize) -> Self {
        BaselineConfig {
            kind: BaselineKind::TextCnn,
            embedding_dim,
            windows: vec![3, 4, 5],
            maps_per_window: 100,
            lstm_hidden: 128,
            dropout: 0.5,
        }
    }

    pub fn bilstm(embedding_dim: usize) -> Self {
        BaselineConfig {
            kind: BaselineKind::BiLstm,
            ..Self::text_cnn(embedding_dim)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.embedding_dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout must lie in [0, 1), got {}", self.dropout)));
        }
        match self.kind {
            BaselineKind::TextCnn => {
                if self.windows.is_empty() || self.windows.contains(&0) {
                    return Err(Error::Config(format!(
                        "TextCNN needs at least one window and every window >= 1, got {:?}",
                        self.windows
                    )));
                }
                if self.maps_per_window == 0 {
                    return Err(Error::Config("maps_per_window must be positive".into()));
                }
            }
            BaselineKind::BiLstm => {
                if self.lstm_hidden == 0 {
                    return Err(Error::Config("lstm_hidden must be positive".into()));
                }
            }
        }
        Ok(())
    }
}

impl FromStr for BaselineKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text_cnn" => Ok(BaselineKind::TextCnn),
            "bilstm" => Ok(BaselineKind::BiLstm),
            other => Err(Error::Config(format!("unknown baseline kind {other:?}"))),
        }
    }
}

/// Embedded token sequence for the baselines; mask marks real tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineInput {
    pub matrix: Array2<f64>,
    pub mask: Vec<u8>,
}

/// A two-class model that can be trained by the generic loop in `training`.
pub trait Classifier: Parameters + Clone + Send + Sync {
    type Input: Send + Sync;

    /// Inference logits, dropout disabled.
    fn logits(&self, input: &Self::Input) -> Result<[f64; 2]>;

    /// Adds the gradient of `-log p(label | input)` into `grads` and returns
    /// the loss. Dropout is active iff `rng` is given.
    fn accumulate_gradient(
        &self,
        input: &Self::Input,
        label: usize,
        rng: Option<&mut Rng>,
        grads: &mut Self,
    ) -> Result<f64>;

    fn loss(&self, input: &Self::Input, label: usize) -> Result<f64> {
        Ok(cross_entropy(self.logits(input)?, label).0)
    }

    /// Probability of class 1.
    fn positive_probability(&self, input: &Self::Input) -> Result<f64> {
        Ok(softmax2(self.logits(input)?)[1])
    }
}

/// Encoder plus CLS-concatenation head.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformerClassifier {
    pub encoder: Encoder,
    pub head: ClsConcatHead,
}

impl TransformerClassifier {
    pub fn new(config: EncoderConfig, head_dropout: f64, rng: &mut Rng) -> Result<Self> {
        if config.num_layers < 4 {
            return Err(Error::Config(format!(
                "the CLS-concatenation head needs at least 4 encoder layers, got {}",
                config.num_layers
            )));
        }
        let encoder = Encoder::new(config, rng)?;
        let head = ClsConcatHead::new(config.hidden_size, head_dropout, rng);
        Ok(TransformerClassifier { encoder, head })
    }

    /// Real-token prefix of a right-padded example. PAD positions cannot
    /// influence position 0, so the classifier skips them.
    fn trimmed<'a>(&self, ex: &'a TokenizedExample) -> Result<(&'a [usize], &'a [u8])> {
        self.encoder.check_input(&ex.token_ids, &ex.attention_mask)?;
        let n = ex.real_len();
        if ex.attention_mask[..n].iter().all(|&m| m == 1) {
            Ok((&ex.token_ids[..n], &ex.attention_mask[..n]))
        } else {
            Ok((&ex.token_ids, &ex.attention_mask))
        }
    }
}

impl Classifier for TransformerClassifier {
    type Input = TokenizedExample;

    fn logits(&self, input: &TokenizedExample) -> Result<[f64; 2]> {
        let (ids, mask) = self.trimmed(input)?;
        let (out, _) = self.encoder.run(ids, mask, None);
        let features = cls_concat(&out)?;
        Ok(self.head.forward(&features)?.logits)
    }

    fn accumulate_gradient(
        &self,
        input: &TokenizedExample,
        label: usize,
        mut rng: Option<&mut Rng>,
        grads: &mut Self,
    ) -> Result<f64> {
        let (ids, mask) = self.trimmed(input)?;
        let (out, enc_cache) = self.encoder.run(ids, mask, rng.as_deref_mut());
        let features = cls_concat(&out)?;
        let (logits, head_cache) = self.head.run(&features, rng);
        let (loss, dlogits) = cross_entropy(logits, label);
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("non-finite loss {loss}")));
        }
        let dfeat = self.head.backward(&head_cache, dlogits, &mut grads.head);

        let l = out.num_layers();
        let (t, h) = out.hidden_states[0].dim();
        let mut d_states: Vec<Option<Array2<f64>>> = vec![None; l + 1];
        for (k, layer) in (l - 3..=l).enumerate() {
            let mut d = Array2::zeros((t, h));
            d.row_mut(0).assign(&dfeat.slice(ndarray::s![k * h..(k + 1) * h]));
            d_states[layer] = Some(d);
        }
        self.encoder.backward(&enc_cache, &d_states, &mut grads.encoder);
        Ok(loss)
    }
}

impl Parameters for TransformerClassifier {
    fn tensors(&self) -> Vec<(String, &dyn Slab)> {
        let mut v: Vec<(String, &dyn Slab)> = self
            .encoder
            .tensors()
            .into_iter()
            .map(|(n, t)| (format!("encoder.{n}"), t))
            .collect();
        v.extend(self.head.tensors().into_iter().map(|(n, t)| (format!("head.{n}"), t)));
        v
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut dyn Slab)> {
        let mut v: Vec<(String, &mut dyn Slab)> = self
            .encoder
            .tensors_mut()
            .into_iter()
            .map(|(n, t)| (format!("encoder.{n}"), t))
            .collect();
        v.extend(self.head.tensors_mut().into_iter().map(|(n, t)| (format!("head.{n}"), t)));
        v
    }
}

/// The head alone, over precomputed concatenated CLS features.
impl Classifier for ClsConcatHead {
    type Input = Array1<f64>;

    fn logits(&self, input: &Array1<f64>) -> Result<[f64; 2]> {
        Ok(self.forward(input)?.logits)
    }

    fn accumulate_gradient(
        &self,
        input: &Array1<f64>,
        label: usize,
        rng: Option<&mut Rng>,
        grads: &mut Self,
    ) -> Result<f64> {
        self.forward(input)?;
        let (logits, cache) = self.run(input, rng);
        let (loss, d) = cross_entropy(logits, label);
        self.backward(&cache, d, grads);
        Ok(loss)
    }
}

impl Classifier for TextCnn {
    type Input = BaselineInput;

    fn logits(&self, input: &BaselineInput) -> Result<[f64; 2]> {
        self.forward(&input.matrix)
    }

    fn accumulate_gradient(
        &self,
        input: &BaselineInput,
        label: usize,
        rng: Option<&mut Rng>,
        grads: &mut Self,
    ) -> Result<f64> {
        if input.matrix.ncols() != self.config.embedding_dim {
            return Err(Error::Input("embedding width mismatch".into()));
        }
        let (logits, cache) = self.run(&input.matrix, rng);
        let (loss, d) = cross_entropy(logits, label);
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("non-finite loss {loss}")));
        }
        self.backward(&cache, d, grads);
        Ok(loss)
    }
}

impl Classifier for BiLstm {
    type Input = BaselineInput;

    fn logits(&self, input: &BaselineInput) -> Result<[f64; 2]> {
        self.forward(&input.matrix, &input.mask)
    }

    fn accumulate_gradient(
        &self,
        input: &BaselineInput,
        label: usize,
        rng: Option<&mut Rng>,
        grads: &mut Self,
    ) -> Result<f64> {
        if input.matrix.ncols() != self.config.embedding_dim {
            return Err(Error::Input("embedding width mismatch".into()));
        }
        let (logits, cache) = self.run(&input.matrix, &input.mask, rng);
        let (loss, d) = cross_entropy(logits, label);
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("non-finite loss {loss}")));
        }
        self.backward(&cache, d, grads);
        Ok(loss)
    }
}
