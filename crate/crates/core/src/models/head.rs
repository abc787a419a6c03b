use ndarray::{Array1, Array2, Axis};

use super::ops::{apply_mask, dropout_mask, glorot, linear, linear_backward, softmax2};
use super::params::{Parameters, Slab};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// MLP over the concatenated CLS vectors: `4H -> H (tanh) -> 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClsConcatHead {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub dropout: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadOutput {
    pub logits: [f64; 2],
    /// Index 1 is the unreliable class.
    pub probs: [f64; 2],
}

pub(crate) struct HeadCache {
    x: Array2<f64>,
    hidden: Array2<f64>,
    drop: Option<Array2<f64>>,
}

impl ClsConcatHead {
    pub fn new(hidden_size: usize, dropout: f64, rng: &mut Rng) -> Self {
        ClsConcatHead {
            w1: glorot(4 * hidden_size, hidden_size, rng),
            b1: Array1::zeros(hidden_size),
            w2: glorot(hidden_size, 2, rng),
            b2: Array1::zeros(2),
            dropout,
        }
    }

    pub fn zeros(hidden_size: usize) -> Self {
        ClsConcatHead {
            w1: Array2::zeros((4 * hidden_size, hidden_size)),
            b1: Array1::zeros(hidden_size),
            w2: Array2::zeros((hidden_size, 2)),
            b2: Array1::zeros(2),
            dropout: 0.1,
        }
    }

    pub fn input_width(&self) -> usize {
        self.w1.nrows()
    }

    pub fn forward(&self, features: &Array1<f64>) -> Result<HeadOutput> {
        if features.len() != self.input_width() {
            return Err(Error::Input(format!(
                "head expects {} features, got {}",
                self.input_width(),
                features.len()
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite value in head features".into()));
        }
        let (logits, _) = self.run(features, None);
        Ok(HeadOutput {
            logits,
            probs: softmax2(logits),
        })
    }

    pub(crate) fn run(&self, features: &Array1<f64>, rng: Option<&mut Rng>) -> ([f64; 2], HeadCache) {
        let x = features.view().insert_axis(Axis(0)).to_owned();
        let mut hidden = linear(&x.view(), &self.w1, &self.b1).mapv(f64::tanh);
        let pre_drop = hidden.clone();
        let drop = dropout_mask(hidden.dim(), self.dropout, rng);
        apply_mask(&mut hidden, &drop);
        let out = linear(&hidden.view(), &self.w2, &self.b2);
        let cache = HeadCache {
            x,
            hidden: pre_drop,
            drop,
        };
        ([out[[0, 0]], out[[0, 1]]], cache)
    }

    pub(crate) fn backward(&self, cache: &HeadCache, dlogits: [f64; 2], grads: &mut ClsConcatHead) -> Array1<f64> {
        let dout = Array2::from_shape_vec((1, 2), dlogits.to_vec()).expect("1x2");
        let mut dropped = cache.hidden.clone();
        apply_mask(&mut dropped, &cache.drop);
        let mut dh = linear_backward(&dropped.view(), &self.w2, &dout, &mut grads.w2, &mut grads.b2);
        apply_mask(&mut dh, &cache.drop);
        dh.zip_mut_with(&cache.hidden, |d, h| *d *= 1.0 - h * h);
        let dx = linear_backward(&cache.x.view(), &self.w1, &dh, &mut grads.w1, &mut grads.b1);
        dx.index_axis_move(Axis(0), 0)
    }
}

impl Parameters for ClsConcatHead {
    fn tensors(&self) -> Vec<(String, &dyn Slab)> {
        vec![
            ("w1".into(), &self.w1),
            ("b1".into(), &self.b1),
            ("w2".into(), &self.w2),
            ("b2".into(), &self.b2),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut dyn Slab)> {
        vec![
            ("w1".into(), &mut self.w1),
            ("b1".into(), &mut self.b1),
            ("w2".into(), &mut self.w2),
            ("b2".into(), &mut self.b2),
        ]
    }
}
