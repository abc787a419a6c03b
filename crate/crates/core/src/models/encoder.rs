//! BERT-style post-norm transformer encoder exposing every layer's output.

use ndarray::{s, Array1, Array2, Axis};

use super::ops::{
    apply_mask, dropout_mask, gelu, gelu_grad, glorot, layer_norm, layer_norm_backward, linear,
    linear_backward, normal_matrix, LayerNormCache,
};
use super::params::{Parameters, Slab};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tokenization::TokenizedExample;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncoderConfig {
    pub num_layers: usize,
    pub hidden_size: usize,
    pub num_heads: usize,
    pub ffn_size: usize,
    pub max_positions: usize,
    pub vocab_size: usize,
    /// Applied to the embedding output and to each sublayer output while training.
    pub dropout: f64,
}

impl EncoderConfig {
    /// Full-size reference point: 12 layers, 768 wide, 12 heads.
    pub fn base(vocab_size: usize) -> Self {
        EncoderConfig {
            num_layers: 12,
            hidden_size: 768,
            num_heads: 12,
            ffn_size: 3072,
            max_positions: 512,
            vocab_size,
            dropout: 0.1,
        }
    }

    /// Desk-scale default: 4 layers, 32 wide, 4 heads.
    pub fn desk(vocab_size: usize, max_positions: usize) -> Self {
        EncoderConfig {
            num_layers: 4,
            hidden_size: 32,
            num_heads: 4,
            ffn_size: 128,
            max_positions,
            vocab_size,
            dropout: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_heads == 0 || self.hidden_size % self.num_heads != 0 {
            return Err(Error::Config(format!(
                "hidden_size {} is not divisible by num_heads {}",
                self.hidden_size, self.num_heads
            )));
        }
        if self.hidden_size == 0 || self.ffn_size == 0 || self.max_positions == 0 || self.vocab_size == 0 {
            return Err(Error::Config("encoder dimensions must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout must lie in [0, 1), got {}", self.dropout)));
        }
        Ok(())
    }
}

/// Hidden states of every layer: `hidden_states[0]` is the embedding output,
/// `hidden_states[l]` the output of transformer layer `l`. Each is `T x H`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderOutput {
    pub hidden_states: Vec<Array2<f64>>,
}

impl EncoderOutput {
    /// Number of transformer layers (excluding the embedding layer).
    pub fn num_layers(&self) -> usize {
        self.hidden_states.len().saturating_sub(1)
    }

    /// `(L + 1, T, H)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        let (t, h) = self.hidden_states.first().map_or((0, 0), |a| a.dim());
        (self.hidden_states.len(), t, h)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLayer {
    pub wq: Array2<f64>,
    pub bq: Array1<f64>,
    pub wk: Array2<f64>,
    pub bk: Array1<f64>,
    pub wv: Array2<f64>,
    pub bv: Array1<f64>,
    pub wo: Array2<f64>,
    pub bo: Array1<f64>,
    pub ln1_gain: Array1<f64>,
    pub ln1_bias: Array1<f64>,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub ln2_gain: Array1<f64>,
    pub ln2_bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    pub config: EncoderConfig,
    pub token_embedding: Array2<f64>,
    pub position_embedding: Array2<f64>,
    pub emb_ln_gain: Array1<f64>,
    pub emb_ln_bias: Array1<f64>,
    pub layers: Vec<EncoderLayer>,
}

struct LayerCache {
    x: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    probs: Vec<Array2<f64>>,
    ctx: Array2<f64>,
    drop_attn: Option<Array2<f64>>,
    ln1: LayerNormCache,
    y1: Array2<f64>,
    f1: Array2<f64>,
    act: Array2<f64>,
    drop_ffn: Option<Array2<f64>>,
    ln2: LayerNormCache,
}

pub(crate) struct EncoderCache {
    ids: Vec<usize>,
    emb_ln: LayerNormCache,
    emb_drop: Option<Array2<f64>>,
    layers: Vec<LayerCache>,
}

/// Masked multi-head scaled dot-product attention. Keys with mask 0 get
/// weight exactly zero; a row with no visible key attends to nothing.
fn attention(
    q: &Array2<f64>,
    k: &Array2<f64>,
    v: &Array2<f64>,
    mask: &[u8],
    heads: usize,
) -> (Array2<f64>, Vec<Array2<f64>>) {
    let (t, h) = q.dim();
    let d = h / heads;
    let scale = 1.0 / (d as f64).sqrt();
    let mut ctx = Array2::zeros((t, h));
    let mut probs = Vec::with_capacity(heads);
    for head in 0..heads {
        let cols = s![.., head * d..(head + 1) * d];
        let mut p = q.slice(cols).dot(&k.slice(cols).t());
        for mut row in p.rows_mut() {
            let max = row
                .iter()
                .zip(mask)
                .filter(|(_, &m)| m == 1)
                .map(|(v, _)| *v * scale)
                .fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for (v, &m) in row.iter_mut().zip(mask) {
                *v = if m == 1 { (*v * scale - max).exp() } else { 0.0 };
                total += *v;
            }
            if total > 0.0 {
                row /= total;
            }
        }
        ctx.slice_mut(cols).assign(&p.dot(&v.slice(cols)));
        probs.push(p);
    }
    (ctx, probs)
}

impl EncoderLayer {
    fn new(config: &EncoderConfig, rng: &mut Rng) -> Self {
        let h = config.hidden_size;
        let f = config.ffn_size;
        EncoderLayer {
            wq: glorot(h, h, rng),
            bq: Array1::zeros(h),
            wk: glorot(h, h, rng),
            bk: Array1::zeros(h),
            wv: glorot(h, h, rng),
            bv: Array1::zeros(h),
            wo: glorot(h, h, rng),
            bo: Array1::zeros(h),
            ln1_gain: Array1::ones(h),
            ln1_bias: Array1::zeros(h),
            w1: glorot(h, f, rng),
            b1: Array1::zeros(f),
            w2: glorot(f, h, rng),
            b2: Array1::zeros(h),
            ln2_gain: Array1::ones(h),
            ln2_bias: Array1::zeros(h),
        }
    }

    fn forward(
        &self,
        x: Array2<f64>,
        mask: &[u8],
        heads: usize,
        dropout: f64,
        mut rng: Option<&mut Rng>,
    ) -> (Array2<f64>, LayerCache) {
        let xv = x.view();
        let q = linear(&xv, &self.wq, &self.bq);
        let k = linear(&xv, &self.wk, &self.bk);
        let v = linear(&xv, &self.wv, &self.bv);
        let (ctx, probs) = attention(&q, &k, &v, mask, heads);
        let mut a = linear(&ctx.view(), &self.wo, &self.bo);
        let drop_attn = dropout_mask(a.dim(), dropout, rng.as_deref_mut());
        apply_mask(&mut a, &drop_attn);
        let (y1, ln1) = layer_norm(&(&x + &a), &self.ln1_gain, &self.ln1_bias);

        let f1 = linear(&y1.view(), &self.w1, &self.b1);
        let act = f1.mapv(gelu);
        let mut f2 = linear(&act.view(), &self.w2, &self.b2);
        let drop_ffn = dropout_mask(f2.dim(), dropout, rng.as_deref_mut());
        apply_mask(&mut f2, &drop_ffn);
        let (out, ln2) = layer_norm(&(&y1 + &f2), &self.ln2_gain, &self.ln2_bias);
        let cache = LayerCache {
            x,
            q,
            k,
            v,
            probs,
            ctx,
            drop_attn,
            ln1,
            y1,
            f1,
            act,
            drop_ffn,
            ln2,
        };
        (out, cache)
    }

    fn backward(&self, c: &LayerCache, dout: &Array2<f64>, heads: usize, g: &mut EncoderLayer) -> Array2<f64> {
        let dr2 = layer_norm_backward(&c.ln2, &self.ln2_gain, dout, &mut g.ln2_gain, &mut g.ln2_bias);
        let mut dy1 = dr2.clone();
        let mut df2 = dr2;
        apply_mask(&mut df2, &c.drop_ffn);
        let mut dact = linear_backward(&c.act.view(), &self.w2, &df2, &mut g.w2, &mut g.b2);
        dact.zip_mut_with(&c.f1, |d, f| *d *= gelu_grad(*f));
        dy1 += &linear_backward(&c.y1.view(), &self.w1, &dact, &mut g.w1, &mut g.b1);

        let dr1 = layer_norm_backward(&c.ln1, &self.ln1_gain, &dy1, &mut g.ln1_gain, &mut g.ln1_bias);
        let mut dx = dr1.clone();
        let mut da = dr1;
        apply_mask(&mut da, &c.drop_attn);
        let dctx = linear_backward(&c.ctx.view(), &self.wo, &da, &mut g.wo, &mut g.bo);

        let (t, h) = c.q.dim();
        let d = h / heads;
        let scale = 1.0 / (d as f64).sqrt();
        let mut dq = Array2::zeros((t, h));
        let mut dk = Array2::zeros((t, h));
        let mut dv = Array2::zeros((t, h));
        for (head, p) in c.probs.iter().enumerate() {
            let cols = s![.., head * d..(head + 1) * d];
            let dctx_h = dctx.slice(cols);
            let dp = dctx_h.dot(&c.v.slice(cols).t());
            dv.slice_mut(cols).assign(&p.t().dot(&dctx_h));
            let mut ds = dp;
            for (mut drow, prow) in ds.rows_mut().into_iter().zip(p.rows()) {
                let dot: f64 = drow.iter().zip(prow.iter()).map(|(a, b)| a * b).sum();
                drow.zip_mut_with(&prow, |dv, pv| *dv = pv * (*dv - dot) * scale);
            }
            dq.slice_mut(cols).assign(&ds.dot(&c.k.slice(cols)));
            dk.slice_mut(cols).assign(&ds.t().dot(&c.q.slice(cols)));
        }
        let xv = c.x.view();
        dx += &linear_backward(&xv, &self.wq, &dq, &mut g.wq, &mut g.bq);
        dx += &linear_backward(&xv, &self.wk, &dk, &mut g.wk, &mut g.bk);
        dx += &linear_backward(&xv, &self.wv, &dv, &mut g.wv, &mut g.bv);
        dx
    }
}

impl Encoder {
    pub fn new(config: EncoderConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let h = config.hidden_size;
        Ok(Encoder {
            token_embedding: normal_matrix(config.vocab_size, h, 0.02, rng),
            position_embedding: normal_matrix(config.max_positions, h, 0.02, rng),
            emb_ln_gain: Array1::ones(h),
            emb_ln_bias: Array1::zeros(h),
            layers: (0..config.num_layers).map(|_| EncoderLayer::new(&config, rng)).collect(),
            config,
        })
    }

    pub(crate) fn check_input(&self, ids: &[usize], mask: &[u8]) -> Result<()> {
        if ids.len() != mask.len() {
            return Err(Error::Input(format!(
                "{} token ids but {} mask entries",
                ids.len(),
                mask.len()
            )));
        }
        if ids.len() > self.config.max_positions {
            return Err(Error::Input(format!(
                "sequence length {} exceeds max_positions {}",
                ids.len(),
                self.config.max_positions
            )));
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= self.config.vocab_size) {
            return Err(Error::Input(format!(
                "token id {bad} out of range for vocabulary of {}",
                self.config.vocab_size
            )));
        }
        Ok(())
    }

    /// Inference pass (no dropout) over the full padded sequence.
    pub fn forward(&self, example: &TokenizedExample) -> Result<EncoderOutput> {
        self.check_input(&example.token_ids, &example.attention_mask)?;
        Ok(self.run(&example.token_ids, &example.attention_mask, None).0)
    }

    pub(crate) fn run(
        &self,
        ids: &[usize],
        mask: &[u8],
        mut rng: Option<&mut Rng>,
    ) -> (EncoderOutput, EncoderCache) {
        let t = ids.len();
        let h = self.config.hidden_size;
        let mut e = Array2::zeros((t, h));
        for (i, (&id, mut row)) in ids.iter().zip(e.rows_mut()).enumerate() {
            row.assign(&self.token_embedding.row(id));
            row += &self.position_embedding.row(i);
        }
        let (mut x, emb_ln) = layer_norm(&e, &self.emb_ln_gain, &self.emb_ln_bias);
        let emb_drop = dropout_mask(x.dim(), self.config.dropout, rng.as_deref_mut());
        apply_mask(&mut x, &emb_drop);

        let mut hidden_states = Vec::with_capacity(self.layers.len() + 1);
        let mut caches = Vec::with_capacity(self.layers.len());
        hidden_states.push(x.clone());
        for layer in &self.layers {
            let (out, cache) = layer.forward(
                x,
                mask,
                self.config.num_heads,
                self.config.dropout,
                rng.as_deref_mut(),
            );
            hidden_states.push(out.clone());
            caches.push(cache);
            x = out;
        }
        let cache = EncoderCache {
            ids: ids.to_vec(),
            emb_ln,
            emb_drop,
            layers: caches,
        };
        (EncoderOutput { hidden_states }, cache)
    }

    /// Backpropagates gradients given for any subset of hidden states
    /// (`d_states[l]` matches `hidden_states[l]`; `None` means zero).
    pub(crate) fn backward(&self, cache: &EncoderCache, d_states: &[Option<Array2<f64>>], grads: &mut Encoder) {
        let t = cache.ids.len();
        let h = self.config.hidden_size;
        let nl = self.layers.len();
        let mut d = d_states[nl].clone().unwrap_or_else(|| Array2::zeros((t, h)));
        for l in (0..nl).rev() {
            d = self.layers[l].backward(&cache.layers[l], &d, self.config.num_heads, &mut grads.layers[l]);
            if let Some(extra) = &d_states[l] {
                d += extra;
            }
        }
        apply_mask(&mut d, &cache.emb_drop);
        let de = layer_norm_backward(
            &cache.emb_ln,
            &self.emb_ln_gain,
            &d,
            &mut grads.emb_ln_gain,
            &mut grads.emb_ln_bias,
        );
        for (i, (&id, row)) in cache.ids.iter().zip(de.rows()).enumerate() {
            let mut tr = grads.token_embedding.row_mut(id);
            tr += &row;
            let mut pr = grads.position_embedding.row_mut(i);
            pr += &row;
        }
    }
}

/// Concatenates the position-0 vectors of the top four layers, ordered
/// `L-3, L-2, L-1, L`.
pub fn cls_concat(output: &EncoderOutput) -> Result<Array1<f64>> {
    let l = output.num_layers();
    if l < 4 {
        return Err(Error::Config(format!(
            "CLS concatenation needs at least 4 encoder layers, got {l}"
        )));
    }
    let views: Vec<_> = output.hidden_states[l - 3..=l]
        .iter()
        .map(|hs| hs.row(0))
        .collect();
    Ok(ndarray::concatenate(Axis(0), &views).expect("equal widths"))
}

impl Parameters for Encoder {
    fn tensors(&self) -> Vec<(String, &dyn Slab)> {
        let mut v: Vec<(String, &dyn Slab)> = vec![
            ("embeddings.token".into(), &self.token_embedding),
            ("embeddings.position".into(), &self.position_embedding),
            ("embeddings.ln.gain".into(), &self.emb_ln_gain),
            ("embeddings.ln.bias".into(), &self.emb_ln_bias),
        ];
        for (i, l) in self.layers.iter().enumerate() {
            let p = |n: &str| format!("layer.{i}.{n}");
            v.extend([
                (p("wq"), &l.wq as &dyn Slab),
                (p("bq"), &l.bq),
                (p("wk"), &l.wk),
                (p("bk"), &l.bk),
                (p("wv"), &l.wv),
                (p("bv"), &l.bv),
                (p("wo"), &l.wo),
                (p("bo"), &l.bo),
                (p("ln1.gain"), &l.ln1_gain),
                (p("ln1.bias"), &l.ln1_bias),
                (p("w1"), &l.w1),
                (p("b1"), &l.b1),
                (p("w2"), &l.w2),
                (p("b2"), &l.b2),
                (p("ln2.gain"), &l.ln2_gain),
                (p("ln2.bias"), &l.ln2_bias),
            ]);
        }
        v
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut dyn Slab)> {
        let mut v: Vec<(String, &mut dyn Slab)> = vec![
            ("embeddings.token".into(), &mut self.token_embedding),
            ("embeddings.position".into(), &mut self.position_embedding),
            ("embeddings.ln.gain".into(), &mut self.emb_ln_gain),
            ("embeddings.ln.bias".into(), &mut self.emb_ln_bias),
        ];
        for (i, l) in self.layers.iter_mut().enumerate() {
            let p = |n: &str| format!("layer.{i}.{n}");
            v.extend([
                (p("wq"), &mut l.wq as &mut dyn Slab),
                (p("bq"), &mut l.bq),
                (p("wk"), &mut l.wk),
                (p("bk"), &mut l.bk),
                (p("wv"), &mut l.wv),
                (p("bv"), &mut l.bv),
                (p("wo"), &mut l.wo),
                (p("bo"), &mut l.bo),
                (p("ln1.gain"), &mut l.ln1_gain),
                (p("ln1.bias"), &mut l.ln1_bias),
                (p("w1"), &mut l.w1),
                (p("b1"), &mut l.b1),
                (p("w2"), &mut l.w2),
                (p("b2"), &mut l.b2),
                (p("ln2.gain"), &mut l.ln2_gain),
                (p("ln2.bias"), &mut l.ln2_bias),
            ]);
        }
        v
    }
}
