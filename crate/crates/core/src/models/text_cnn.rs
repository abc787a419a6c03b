//! Convolutional sentence classifier: one bank of 1-D filters per window
//! size over the embedded sequence, ReLU, max-over-time pooling, dropout and
//! a linear layer to two logits.

use ndarray::{Array1, Array2, Axis};

use super::ops::{apply_mask, dropout_mask, linear, linear_backward, uniform_matrix};
use super::params::{Parameters, Slab};
use super::BaselineConfig;
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct TextCnn {
    pub config: BaselineConfig,
    /// One `(window * dim) x maps` filter bank per window size.
    pub filters: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub out_w: Array2<f64>,
    pub out_b: Array1<f64>,
}

struct WindowCache {
    cols: Array2<f64>,
    pre: Array2<f64>,
    argmax: Vec<usize>,
}

pub(crate) struct TextCnnCache {
    windows: Vec<WindowCache>,
    pooled: Array2<f64>,
    drop: Option<Array2<f64>>,
}

/// Rows `p..p+window` of the (zero-padded) sequence, flattened per position.
fn unfold(matrix: &Array2<f64>, window: usize, padded_len: usize) -> Array2<f64> {
    let (t, d) = matrix.dim();
    let positions = padded_len - window + 1;
    let mut cols = Array2::zeros((positions, window * d));
    for p in 0..positions {
        for j in 0..window {
            if p + j < t {
                cols.row_mut(p)
                    .slice_mut(ndarray::s![j * d..(j + 1) * d])
                    .assign(&matrix.row(p + j));
            }
        }
    }
    cols
}

impl TextCnn {
    pub fn new(config: BaselineConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let d = config.embedding_dim;
        let m = config.maps_per_window;
        let filters = config
            .windows
            .iter()
            .map(|&w| uniform_matrix(w * d, m, 1.0 / ((w * d) as f64).sqrt(), rng))
            .collect();
        let biases = config.windows.iter().map(|_| Array1::zeros(m)).collect();
        let feat = m * config.windows.len();
        let out_w = uniform_matrix(feat, 2, 1.0 / (feat as f64).sqrt(), rng);
        Ok(TextCnn {
            filters,
            biases,
            out_w,
            out_b: Array1::zeros(2),
            config,
        })
    }

    pub fn forward(&self, matrix: &Array2<f64>) -> Result<[f64; 2]> {
        if matrix.ncols() != self.config.embedding_dim {
            return Err(Error::Input(format!(
                "embedded sequence has width {}, model expects {}",
                matrix.ncols(),
                self.config.embedding_dim
            )));
        }
        Ok(self.run(matrix, None).0)
    }

    pub(crate) fn run(&self, matrix: &Array2<f64>, rng: Option<&mut Rng>) -> ([f64; 2], TextCnnCache) {
        let max_w = self.config.windows.iter().copied().max().unwrap_or(1);
        let padded_len = matrix.nrows().max(max_w);
        let m = self.config.maps_per_window;
        let mut pooled = Array2::zeros((1, m * self.config.windows.len()));
        let mut windows = Vec::with_capacity(self.filters.len());
        for (wi, (&w, (filt, bias))) in self
            .config
            .windows
            .iter()
            .zip(self.filters.iter().zip(&self.biases))
            .enumerate()
        {
            let cols = unfold(matrix, w, padded_len);
            let pre = linear(&cols.view(), filt, bias);
            let mut argmax = vec![0; m];
            for (k, col) in pre.columns().into_iter().enumerate() {
                let (best, val) = col
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |acc, (p, &v)| if v > acc.1 { (p, v) } else { acc });
                argmax[k] = best;
                pooled[[0, wi * m + k]] = val.max(0.0);
            }
            windows.push(WindowCache { cols, pre, argmax });
        }
        let drop = dropout_mask(pooled.dim(), self.config.dropout, rng);
        let mut feats = pooled.clone();
        apply_mask(&mut feats, &drop);
        let out = linear(&feats.view(), &self.out_w, &self.out_b);
        (
            [out[[0, 0]], out[[0, 1]]],
            TextCnnCache {
                windows,
                pooled,
                drop,
            },
        )
    }

    pub(crate) fn backward(&self, cache: &TextCnnCache, dlogits: [f64; 2], grads: &mut TextCnn) {
        let dout = Array2::from_shape_vec((1, 2), dlogits.to_vec()).expect("1x2");
        let mut feats = cache.pooled.clone();
        apply_mask(&mut feats, &cache.drop);
        let mut dpool = linear_backward(&feats.view(), &self.out_w, &dout, &mut grads.out_w, &mut grads.out_b);
        apply_mask(&mut dpool, &cache.drop);
        let m = self.config.maps_per_window;
        for (wi, wc) in cache.windows.iter().enumerate() {
            let mut dpre = Array2::zeros(wc.pre.dim());
            for (k, &p) in wc.argmax.iter().enumerate() {
                // ReLU after the max: gradient flows only through a positive maximum
                if wc.pre[[p, k]] > 0.0 {
                    dpre[[p, k]] = dpool[[0, wi * m + k]];
                }
            }
            let g = &mut *grads;
            ndarray::linalg::general_mat_mul(1.0, &wc.cols.t(), &dpre, 1.0, &mut g.filters[wi]);
            g.biases[wi] += &dpre.sum_axis(Axis(0));
        }
    }
}

impl Parameters for TextCnn {
    fn tensors(&self) -> Vec<(String, &dyn Slab)> {
        let mut v: Vec<(String, &dyn Slab)> = Vec::new();
        for (i, (f, b)) in self.filters.iter().zip(&self.biases).enumerate() {
            let w = self.config.windows[i];
            v.push((format!("conv.{i}.w{w}.filters"), f));
            v.push((format!("conv.{i}.w{w}.bias"), b));
        }
        v.push(("out.w".into(), &self.out_w));
        v.push(("out.b".into(), &self.out_b));
        v
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut dyn Slab)> {
        let windows = self.config.windows.clone();
        let mut v: Vec<(String, &mut dyn Slab)> = Vec::new();
        for (i, (f, b)) in self.filters.iter_mut().zip(self.biases.iter_mut()).enumerate() {
            let w = windows[i];
            v.push((format!("conv.{i}.w{w}.filters"), f));
            v.push((format!("conv.{i}.w{w}.bias"), b));
        }
        v.push(("out.w".into(), &mut self.out_w));
        v.push(("out.b".into(), &mut self.out_b));
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::BaselineKind;
    use crate::rng;

    fn cfg(windows: Vec<usize>, maps: usize, dim: usize) -> BaselineConfig {
        BaselineConfig {
            kind: BaselineKind::TextCnn,
            embedding_dim: dim,
            windows,
            maps_per_window: maps,
            lstm_hidden: 4,
            dropout: 0.5,
        }
    }

    #[test]
    fn zero_input_and_bias_give_zero_logits() {
        let mut r = rng::stream(1, rng::domain::INIT, 0);
        let model = TextCnn::new(cfg(vec![3, 4, 5], 10, 4), &mut r).unwrap();
        assert_eq!(model.forward(&Array2::zeros((12, 4))).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn single_window_single_map_picks_filter_response() {
        // hand computation: filter [0.5, -1, 2] on one-hot rows; row 2 is e_2 -> response 2.0
        let mut r = rng::stream(1, rng::domain::INIT, 0);
        let mut model = TextCnn::new(cfg(vec![1], 1, 3), &mut r).unwrap();
        model.filters[0] = ndarray::array![[0.5], [-1.0], [2.0]];
        model.out_w = ndarray::array![[0.0, 1.0]];
        let mut x = Array2::zeros((4, 3));
        x[[0, 1]] = 1.0; // response -1
        x[[2, 2]] = 1.0; // response 2
        let (logits, cache) = model.run(&x, None);
        assert_eq!(cache.pooled[[0, 0]], 2.0);
        assert_eq!(logits, [0.0, 2.0]);
    }

    #[test]
    fn short_sequences_are_zero_padded() {
        let mut r = rng::stream(2, rng::domain::INIT, 0);
        let model = TextCnn::new(cfg(vec![3, 5], 4, 2), &mut r).unwrap();
        let x = ndarray::array![[1.0, -1.0], [0.5, 0.25]];
        let padded = {
            let mut p = Array2::zeros((5, 2));
            p.slice_mut(ndarray::s![0..2, ..]).assign(&x);
            p
        };
        assert_eq!(model.forward(&x).unwrap(), model.forward(&padded).unwrap());
    }

    #[test]
    fn permuting_zero_tail_rows_keeps_logits() {
        let mut r = rng::stream(3, rng::domain::INIT, 0);
        let model = TextCnn::new(cfg(vec![2, 3], 5, 3), &mut r).unwrap();
        let mut x = Array2::zeros((10, 3));
        for i in 0..4 {
            for j in 0..3 {
                x[[i, j]] = ((i * 3 + j) as f64).cos();
            }
        }
        let base = model.forward(&x).unwrap();
        let mut y = x.clone();
        // swap two PAD rows
        let r7 = y.row(7).to_owned();
        let r9 = y.row(9).to_owned();
        y.row_mut(7).assign(&r9);
        y.row_mut(9).assign(&r7);
        assert_eq!(model.forward(&y).unwrap(), base);
    }

    #[test]
    fn rejects_wrong_width() {
        let mut r = rng::stream(3, rng::domain::INIT, 0);
        let model = TextCnn::new(cfg(vec![2], 2, 3), &mut r).unwrap();
        assert!(matches!(model.forward(&Array2::zeros((4, 5))), Err(Error::Input(_))));
        assert!(TextCnn::new(cfg(vec![], 2, 3), &mut r).is_err());
        assert!(TextCnn::new(cfg(vec![0], 2, 3), &mut r).is_err());
    }
}
