//! Bidirectional LSTM classifier over the real (mask 1) positions.
//!
//! The representation is the forward state after the last real token
//! concatenated with the backward state after the first one.

use ndarray::{s, Array1, Array2, Axis};

use super::ops::{apply_mask, dropout_mask, linear, linear_backward, outer_add, sigmoid, uniform_matrix};
use super::params::{Parameters, Slab};
use super::BaselineConfig;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Gate layout along the `4 * hidden` axis: input, forget, cell, output.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmDirection {
    pub wx: Array2<f64>,
    pub wh: Array2<f64>,
    pub b: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiLstm {
    pub config: BaselineConfig,
    pub forward_dir: LstmDirection,
    pub backward_dir: LstmDirection,
    pub out_w: Array2<f64>,
    pub out_b: Array1<f64>,
}

struct Step {
    x: Array1<f64>,
    h_prev: Array1<f64>,
    c_prev: Array1<f64>,
    i: Array1<f64>,
    f: Array1<f64>,
    g: Array1<f64>,
    o: Array1<f64>,
    c: Array1<f64>,
}

pub(crate) struct BiLstmCache {
    fwd: Vec<Step>,
    bwd: Vec<Step>,
    features: Array2<f64>,
    drop: Option<Array2<f64>>,
}

impl LstmDirection {
    fn new(dim: usize, hidden: usize, rng: &mut Rng) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        LstmDirection {
            wx: uniform_matrix(dim, 4 * hidden, bound, rng),
            wh: uniform_matrix(hidden, 4 * hidden, bound, rng),
            b: Array1::zeros(4 * hidden),
        }
    }

    fn run(&self, matrix: &Array2<f64>, order: &[usize]) -> (Array1<f64>, Vec<Step>) {
        let hd = self.wh.nrows();
        let mut h = Array1::zeros(hd);
        let mut c = Array1::zeros(hd);
        let mut steps = Vec::with_capacity(order.len());
        for &t in order {
            let x = matrix.row(t).to_owned();
            let z = x.dot(&self.wx) + h.dot(&self.wh) + &self.b;
            let i = z.slice(s![0..hd]).mapv(sigmoid);
            let f = z.slice(s![hd..2 * hd]).mapv(sigmoid);
            let g = z.slice(s![2 * hd..3 * hd]).mapv(f64::tanh);
            let o = z.slice(s![3 * hd..4 * hd]).mapv(sigmoid);
            let c_new = &f * &c + &i * &g;
            let h_new = &o * &c_new.mapv(f64::tanh);
            steps.push(Step {
                x,
                h_prev: h,
                c_prev: c,
                i,
                f,
                g,
                o,
                c: c_new.clone(),
            });
            h = h_new;
            c = c_new;
        }
        (h, steps)
    }

    fn backward(&self, steps: &[Step], dh_final: Array1<f64>, grads: &mut LstmDirection) {
        let hd = self.wh.nrows();
        let mut dh = dh_final;
        let mut dc = Array1::<f64>::zeros(hd);
        for st in steps.iter().rev() {
            let tc = st.c.mapv(f64::tanh);
            let d_o = &dh * &tc;
            dc = dc + &dh * &st.o * &tc.mapv(|v| 1.0 - v * v);
            let d_i = &dc * &st.g;
            let d_g = &dc * &st.i;
            let d_f = &dc * &st.c_prev;
            let mut dz = Array1::zeros(4 * hd);
            dz.slice_mut(s![0..hd]).assign(&(&d_i * &st.i.mapv(|v| v * (1.0 - v))));
            dz.slice_mut(s![hd..2 * hd]).assign(&(&d_f * &st.f.mapv(|v| v * (1.0 - v))));
            dz.slice_mut(s![2 * hd..3 * hd]).assign(&(&d_g * &st.g.mapv(|v| 1.0 - v * v)));
            dz.slice_mut(s![3 * hd..4 * hd]).assign(&(&d_o * &st.o.mapv(|v| v * (1.0 - v))));
            outer_add(&st.x.view(), &dz.view(), &mut grads.wx);
            outer_add(&st.h_prev.view(), &dz.view(), &mut grads.wh);
            grads.b += &dz;
            dh = self.wh.dot(&dz);
            dc = &dc * &st.f;
        }
    }
}

impl BiLstm {
    pub fn new(config: BaselineConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let d = config.embedding_dim;
        let hd = config.lstm_hidden;
        Ok(BiLstm {
            forward_dir: LstmDirection::new(d, hd, rng),
            backward_dir: LstmDirection::new(d, hd, rng),
            out_w: uniform_matrix(2 * hd, 2, 1.0 / ((2 * hd) as f64).sqrt(), rng),
            out_b: Array1::zeros(2),
            config,
        })
    }

    pub fn forward(&self, matrix: &Array2<f64>, mask: &[u8]) -> Result<[f64; 2]> {
        if matrix.ncols() != self.config.embedding_dim {
            return Err(Error::Input(format!(
                "embedded sequence has width {}, model expects {}",
                matrix.ncols(),
                self.config.embedding_dim
            )));
        }
        if mask.len() > matrix.nrows() {
            return Err(Error::Input(format!(
                "mask length {} exceeds sequence length {}",
                mask.len(),
                matrix.nrows()
            )));
        }
        Ok(self.run(matrix, mask, None).0)
    }

    pub(crate) fn run(&self, matrix: &Array2<f64>, mask: &[u8], rng: Option<&mut Rng>) -> ([f64; 2], BiLstmCache) {
        let order: Vec<usize> = mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m == 1)
            .map(|(i, _)| i)
            .collect();
        let reversed: Vec<usize> = order.iter().rev().copied().collect();
        let (hf, fwd) = self.forward_dir.run(matrix, &order);
        let (hb, bwd) = self.backward_dir.run(matrix, &reversed);
        let features = ndarray::concatenate(Axis(0), &[hf.view(), hb.view()])
            .expect("same rank")
            .insert_axis(Axis(0));
        let drop = dropout_mask(features.dim(), self.config.dropout, rng);
        let mut dropped = features.clone();
        apply_mask(&mut dropped, &drop);
        let out = linear(&dropped.view(), &self.out_w, &self.out_b);
        (
            [out[[0, 0]], out[[0, 1]]],
            BiLstmCache {
                fwd,
                bwd,
                features,
                drop,
            },
        )
    }

    pub(crate) fn backward(&self, cache: &BiLstmCache, dlogits: [f64; 2], grads: &mut BiLstm) {
        let dout = Array2::from_shape_vec((1, 2), dlogits.to_vec()).expect("1x2");
        let mut dropped = cache.features.clone();
        apply_mask(&mut dropped, &cache.drop);
        let mut dfeat = linear_backward(&dropped.view(), &self.out_w, &dout, &mut grads.out_w, &mut grads.out_b);
        apply_mask(&mut dfeat, &cache.drop);
        let hd = self.config.lstm_hidden;
        let dfeat = dfeat.index_axis_move(Axis(0), 0);
        self.forward_dir
            .backward(&cache.fwd, dfeat.slice(s![0..hd]).to_owned(), &mut grads.forward_dir);
        self.backward_dir
            .backward(&cache.bwd, dfeat.slice(s![hd..2 * hd]).to_owned(), &mut grads.backward_dir);
    }
}

impl Parameters for BiLstm {
    fn tensors(&self) -> Vec<(String, &dyn Slab)> {
        vec![
            ("forward.wx".into(), &self.forward_dir.wx),
            ("forward.wh".into(), &self.forward_dir.wh),
            ("forward.b".into(), &self.forward_dir.b),
            ("backward.wx".into(), &self.backward_dir.wx),
            ("backward.wh".into(), &self.backward_dir.wh),
            ("backward.b".into(), &self.backward_dir.b),
            ("out.w".into(), &self.out_w),
            ("out.b".into(), &self.out_b),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut dyn Slab)> {
        vec![
            ("forward.wx".into(), &mut self.forward_dir.wx),
            ("forward.wh".into(), &mut self.forward_dir.wh),
            ("forward.b".into(), &mut self.forward_dir.b),
            ("backward.wx".into(), &mut self.backward_dir.wx),
            ("backward.wh".into(), &mut self.backward_dir.wh),
            ("backward.b".into(), &mut self.backward_dir.b),
            ("out.w".into(), &mut self.out_w),
            ("out.b".into(), &mut self.out_b),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{params::zeros_like, BaselineKind};
    use crate::rng;

    fn model(seed: u64) -> BiLstm {
        let cfg = BaselineConfig {
            kind: BaselineKind::BiLstm,
            embedding_dim: 3,
            windows: vec![3],
            maps_per_window: 1,
            lstm_hidden: 5,
            dropout: 0.5,
        };
        BiLstm::new(cfg, &mut rng::stream(seed, rng::domain::INIT, 0)).unwrap()
    }

    fn seq(t: usize) -> Array2<f64> {
        Array2::from_shape_fn((t, 3), |(i, j)| ((i * 3 + j) as f64 * 0.7).sin())
    }

    #[test]
    fn zero_parameters_give_zero_logits() {
        let m = zeros_like(&model(1));
        assert_eq!(m.forward(&seq(6), &[1, 1, 1, 0, 0, 0]).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn length_one_runs_both_directions_on_the_same_step() {
        let m = model(2);
        let (_, cache) = m.run(&seq(4), &[1, 0, 0, 0], None);
        assert_eq!(cache.fwd.len(), 1);
        assert_eq!(cache.bwd.len(), 1);
        assert_eq!(cache.fwd[0].x, cache.bwd[0].x);
    }

    #[test]
    fn pad_region_values_are_ignored() {
        let m = model(3);
        let mask = [1, 1, 1, 1, 0, 0, 0];
        let a = seq(7);
        let mut b = a.clone();
        b.slice_mut(s![4.., ..]).fill(42.0);
        assert_eq!(m.forward(&a, &mask).unwrap(), m.forward(&b, &mask).unwrap());
    }

    #[test]
    fn empty_mask_uses_zero_state() {
        let m = model(4);
        let logits = m.forward(&seq(3), &[0, 0, 0]).unwrap();
        assert_eq!(logits, [m.out_b[0], m.out_b[1]]);
    }
}
