//! Dense building blocks with explicit backward passes.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::rng::Rng;

pub const LN_EPS: f64 = 1e-12;

/// `x w + b` for row-major activations `x: n x in`, `w: in x out`.
pub fn linear(x: &ArrayView2<f64>, w: &Array2<f64>, b: &Array1<f64>) -> Array2<f64> {
    let mut y = x.dot(w);
    y += b;
    y
}

/// Accumulates parameter gradients of [`linear`] and returns `dL/dx`.
pub fn linear_backward(
    x: &ArrayView2<f64>,
    w: &Array2<f64>,
    dy: &Array2<f64>,
    gw: &mut Array2<f64>,
    gb: &mut Array1<f64>,
) -> Array2<f64> {
    ndarray::linalg::general_mat_mul(1.0, &x.t(), dy, 1.0, gw);
    *gb += &dy.sum_axis(Axis(0));
    dy.dot(&w.t())
}

/// `gw += x^T dy` for a single row.
pub fn outer_add(x: &ArrayView1<f64>, dy: &ArrayView1<f64>, gw: &mut Array2<f64>) {
    for (xi, mut row) in x.iter().zip(gw.rows_mut()) {
        if *xi != 0.0 {
            row.scaled_add(*xi, dy);
        }
    }
}

pub struct LayerNormCache {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
}

/// Row-wise layer normalization with gain and bias.
pub fn layer_norm(x: &Array2<f64>, gain: &Array1<f64>, bias: &Array1<f64>) -> (Array2<f64>, LayerNormCache) {
    let h = x.ncols() as f64;
    let mut xhat = x.clone();
    let mut inv_std = Array1::zeros(x.nrows());
    for (mut row, is) in xhat.rows_mut().into_iter().zip(inv_std.iter_mut()) {
        let mean = row.sum() / h;
        row -= mean;
        let var = row.iter().map(|v| v * v).sum::<f64>() / h;
        *is = 1.0 / (var + LN_EPS).sqrt();
        row *= *is;
    }
    let y = &xhat * gain + bias;
    (y, LayerNormCache { xhat, inv_std })
}

pub fn layer_norm_backward(
    cache: &LayerNormCache,
    gain: &Array1<f64>,
    dy: &Array2<f64>,
    g_gain: &mut Array1<f64>,
    g_bias: &mut Array1<f64>,
) -> Array2<f64> {
    *g_gain += &(dy * &cache.xhat).sum_axis(Axis(0));
    *g_bias += &dy.sum_axis(Axis(0));
    let h = dy.ncols() as f64;
    let mut dx = dy * gain;
    for ((mut row, xh), is) in dx
        .rows_mut()
        .into_iter()
        .zip(cache.xhat.rows())
        .zip(cache.inv_std.iter())
    {
        let mean_d = row.sum() / h;
        let mean_dx = row.iter().zip(xh.iter()).map(|(a, b)| a * b).sum::<f64>() / h;
        row.zip_mut_with(&xh, |d, x| *d = (*d - mean_d - x * mean_dx) * is);
    }
    dx
}

const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
const GELU_C: f64 = 0.044_715;

/// GELU, tanh approximation.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (SQRT_2_OVER_PI * (x + GELU_C * x * x * x)).tanh())
}

pub fn gelu_grad(x: f64) -> f64 {
    let u = SQRT_2_OVER_PI * (x + GELU_C * x * x * x);
    let t = u.tanh();
    let du = SQRT_2_OVER_PI * (1.0 + 3.0 * GELU_C * x * x);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Two-class softmax computed from the logit difference, so the pair sums
/// to one up to a single rounding.
pub fn softmax2(logits: [f64; 2]) -> [f64; 2] {
    let p1 = sigmoid(logits[1] - logits[0]);
    [1.0 - p1, p1]
}

/// `-log p(label)` and its gradient with respect to the logits.
pub fn cross_entropy(logits: [f64; 2], label: usize) -> (f64, [f64; 2]) {
    let d = logits[1] - logits[0];
    // -log sigmoid(+-d), stable for large |d|
    let z = if label == 1 { -d } else { d };
    let loss = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
    let p = softmax2(logits);
    let mut g = p;
    g[label] -= 1.0;
    (loss, g)
}

/// Inverted dropout mask (`0` or `1/(1-rate)`), or all ones when disabled.
pub fn dropout_mask(shape: (usize, usize), rate: f64, rng: Option<&mut Rng>) -> Option<Array2<f64>> {
    let rng = rng?;
    if rate <= 0.0 {
        return None;
    }
    let keep = 1.0 - rate;
    let scale = 1.0 / keep;
    Some(Array2::from_shape_fn(shape, |_| {
        if rng.gen::<f64>() < keep {
            scale
        } else {
            0.0
        }
    }))
}

pub fn apply_mask(x: &mut Array2<f64>, mask: &Option<Array2<f64>>) {
    if let Some(m) = mask {
        *x *= m;
    }
}

pub fn normal_matrix(rows: usize, cols: usize, std: f64, rng: &mut Rng) -> Array2<f64> {
    let d = Normal::new(0.0, std).expect("finite std");
    Array2::from_shape_fn((rows, cols), |_| d.sample(rng))
}

/// Glorot-normal weights for a dense `fan_in x fan_out` map.
pub fn glorot(fan_in: usize, fan_out: usize, rng: &mut Rng) -> Array2<f64> {
    normal_matrix(fan_in, fan_out, (2.0 / (fan_in + fan_out) as f64).sqrt(), rng)
}

pub fn uniform_matrix(rows: usize, cols: usize, bound: f64, rng: &mut Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-bound..=bound))
}
