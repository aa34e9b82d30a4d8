//! A small pre-norm transformer encoder with a 3-way classification head,
//! plus the reverse pass needed to train it.
//!
//! Each sequence is processed on its own (no padding, no masks), so a
//! score never depends on what else is in the batch.

use ndarray::{s, Array1, Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub hidden: usize,
    pub heads: usize,
    pub ff: usize,
    pub layers: usize,
    pub max_positions: usize,
}

impl EncoderConfig {
    pub fn head_dim(&self) -> usize {
        self.hidden / self.heads
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.vocab_size < 5 || self.hidden == 0 || self.heads == 0 || self.ff == 0 || self.layers == 0 {
            return Err(format!("degenerate encoder dimensions: {self:?}"));
        }
        if !self.hidden.is_multiple_of(self.heads) {
            return Err(format!(
                "hidden size {} not divisible by {} heads",
                self.hidden, self.heads
            ));
        }
        Ok(())
    }
}

/// Weights of one encoder block. Vectors are stored as `1 x n` matrices so
/// every tensor in the model has the same type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub ln1_g: Array2<f64>,
    pub ln1_b: Array2<f64>,
    pub wq: Array2<f64>,
    pub bq: Array2<f64>,
    pub wk: Array2<f64>,
    pub bk: Array2<f64>,
    pub wv: Array2<f64>,
    pub bv: Array2<f64>,
    pub wo: Array2<f64>,
    pub bo: Array2<f64>,
    pub ln2_g: Array2<f64>,
    pub ln2_b: Array2<f64>,
    pub w1: Array2<f64>,
    pub b1: Array2<f64>,
    pub w2: Array2<f64>,
    pub b2: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub tok_emb: Array2<f64>,
    pub pos_emb: Array2<f64>,
    pub seg_emb: Array2<f64>,
    pub layers: Vec<LayerParams>,
    pub lnf_g: Array2<f64>,
    pub lnf_b: Array2<f64>,
    pub cls_w: Array2<f64>,
    pub cls_b: Array2<f64>,
}

fn normal(rows: usize, cols: usize, std: f64, rng: &mut impl Rng) -> Array2<f64> {
    let dist = Normal::new(0.0, std).expect("std is positive");
    Array2::from_shape_simple_fn((rows, cols), || dist.sample(rng))
}

fn zeros(cols: usize) -> Array2<f64> {
    Array2::zeros((1, cols))
}

fn ones(cols: usize) -> Array2<f64> {
    Array2::ones((1, cols))
}

impl LayerParams {
    fn init(cfg: &EncoderConfig, rng: &mut impl Rng) -> Self {
        let d = cfg.hidden;
        let f = cfg.ff;
        let sd = (1.0 / d as f64).sqrt();
        let sf = (1.0 / f as f64).sqrt();
        Self {
            ln1_g: ones(d),
            ln1_b: zeros(d),
            wq: normal(d, d, sd, rng),
            bq: zeros(d),
            wk: normal(d, d, sd, rng),
            bk: zeros(d),
            wv: normal(d, d, sd, rng),
            bv: zeros(d),
            wo: normal(d, d, sd, rng),
            bo: zeros(d),
            ln2_g: ones(d),
            ln2_b: zeros(d),
            w1: normal(d, f, sd, rng),
            b1: zeros(f),
            w2: normal(f, d, sf, rng),
            b2: zeros(d),
        }
    }

    fn tensors(&self) -> [&Array2<f64>; 16] {
        [
            &self.ln1_g,
            &self.ln1_b,
            &self.wq,
            &self.bq,
            &self.wk,
            &self.bk,
            &self.wv,
            &self.bv,
            &self.wo,
            &self.bo,
            &self.ln2_g,
            &self.ln2_b,
            &self.w1,
            &self.b1,
            &self.w2,
            &self.b2,
        ]
    }

    fn tensors_mut(&mut self) -> [&mut Array2<f64>; 16] {
        [
            &mut self.ln1_g,
            &mut self.ln1_b,
            &mut self.wq,
            &mut self.bq,
            &mut self.wk,
            &mut self.bk,
            &mut self.wv,
            &mut self.bv,
            &mut self.wo,
            &mut self.bo,
            &mut self.ln2_g,
            &mut self.ln2_b,
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
        ]
    }
}

impl EncoderParams {
    pub fn init(cfg: &EncoderConfig, rng: &mut impl Rng) -> Self {
        let d = cfg.hidden;
        Self {
            tok_emb: normal(cfg.vocab_size, d, 0.1, rng),
            pos_emb: normal(cfg.max_positions, d, 0.1, rng),
            seg_emb: normal(2, d, 0.1, rng),
            layers: (0..cfg.layers).map(|_| LayerParams::init(cfg, rng)).collect(),
            lnf_g: ones(d),
            lnf_b: zeros(d),
            cls_w: normal(d, 3, 0.02, rng),
            cls_b: zeros(3),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut out = self.clone();
        for t in out.tensors_mut() {
            t.fill(0.0);
        }
        out
    }

    /// Every tensor in a fixed order shared with [`Self::tensors_mut`].
    pub fn tensors(&self) -> Vec<&Array2<f64>> {
        let mut out = vec![&self.tok_emb, &self.pos_emb, &self.seg_emb];
        for layer in &self.layers {
            out.extend(layer.tensors());
        }
        out.extend([&self.lnf_g, &self.lnf_b, &self.cls_w, &self.cls_b]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut out = vec![&mut self.tok_emb, &mut self.pos_emb, &mut self.seg_emb];
        for layer in &mut self.layers {
            out.extend(layer.tensors_mut());
        }
        out.extend([&mut self.lnf_g, &mut self.lnf_b, &mut self.cls_w, &mut self.cls_b]);
        out
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &EncoderParams, scale: f64) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.scaled_add(scale, b);
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .map(|t| t.iter().map(|x| x * x).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    pub fn shape_matches(&self, cfg: &EncoderConfig) -> bool {
        let (d, f) = (cfg.hidden, cfg.ff);
        let mut expected = vec![(cfg.vocab_size, d), (cfg.max_positions, d), (2, d)];
        for _ in 0..cfg.layers {
            expected.extend([
                (1, d),
                (1, d),
                (d, d),
                (1, d),
                (d, d),
                (1, d),
                (d, d),
                (1, d),
                (d, d),
                (1, d),
                (1, d),
                (1, d),
                (d, f),
                (1, f),
                (f, d),
                (1, d),
            ]);
        }
        expected.extend([(1, d), (1, d), (d, 3), (1, 3)]);
        self.layers.len() == cfg.layers && self.tensors().iter().map(|t| t.dim()).eq(expected)
    }
}

struct LnCache {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
}

fn layer_norm(x: &Array2<f64>, g: &Array2<f64>, b: &Array2<f64>) -> (Array2<f64>, LnCache) {
    let d = x.ncols() as f64;
    let mean = x.sum_axis(Axis(1)) / d;
    let centered = x - &mean.view().insert_axis(Axis(1));
    let var = centered.mapv(|v| v * v).sum_axis(Axis(1)) / d;
    let inv_std = var.mapv(|v| 1.0 / (v + LN_EPS).sqrt());
    let xhat = centered * inv_std.view().insert_axis(Axis(1));
    let y = &xhat * g + b;
    (y, LnCache { xhat, inv_std })
}

fn layer_norm_backward(
    dy: &Array2<f64>,
    cache: &LnCache,
    g: &Array2<f64>,
    dg: &mut Array2<f64>,
    db: &mut Array2<f64>,
) -> Array2<f64> {
    let d = dy.ncols() as f64;
    *dg += &(dy * &cache.xhat).sum_axis(Axis(0)).insert_axis(Axis(0));
    *db += &dy.sum_axis(Axis(0)).insert_axis(Axis(0));
    let dxhat = dy * g;
    let sum_dxhat = dxhat.sum_axis(Axis(1)).insert_axis(Axis(1));
    let sum_dxhat_xhat = (&dxhat * &cache.xhat).sum_axis(Axis(1)).insert_axis(Axis(1));
    let scale = cache.inv_std.view().insert_axis(Axis(1)).mapv(|s| s / d);
    (dxhat * d - sum_dxhat - &cache.xhat * &sum_dxhat_xhat) * scale
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)

fn gelu(u: f64) -> f64 {
    0.5 * u * (1.0 + (GELU_C * (u + 0.044715 * u * u * u)).tanh())
}

fn gelu_grad(u: f64) -> f64 {
    let t = (GELU_C * (u + 0.044715 * u * u * u)).tanh();
    0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * u * u)
}

fn softmax_rows(x: &mut Array2<f64>) {
    for mut row in x.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let total = row.sum();
        row /= total;
    }
}

fn row_sums(x: &Array2<f64>) -> Array2<f64> {
    x.sum_axis(Axis(0)).insert_axis(Axis(0))
}

struct LayerCache {
    ln1: LnCache,
    h: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    /// Attention probabilities per head, `seq x seq`.
    attn: Vec<Array2<f64>>,
    ctx: Array2<f64>,
    ln2: LnCache,
    h2: Array2<f64>,
    u: Array2<f64>,
    act: Array2<f64>,
}

/// Everything the reverse pass needs from one forward pass.
pub struct ForwardCache {
    ids: Vec<u32>,
    types: Vec<u32>,
    layers: Vec<LayerCache>,
    final_ln: LnCache,
    pooled: Array2<f64>,
}

impl ForwardCache {
    /// Attention probabilities as `[layer][head]` square matrices.
    pub fn attention(&self) -> Vec<Vec<Array2<f64>>> {
        self.layers.iter().map(|l| l.attn.clone()).collect()
    }
}

impl EncoderParams {
    /// Forward pass over one sequence. Returns the classifier logits in
    /// entailment, neutral, contradiction order.
    pub fn forward(&self, cfg: &EncoderConfig, ids: &[u32], types: &[u32]) -> ([f64; 3], ForwardCache) {
        let t = ids.len();
        assert!(t <= cfg.max_positions, "sequence longer than the position table");
        let mut x = Array2::zeros((t, cfg.hidden));
        for (i, (&id, &ty)) in ids.iter().zip(types).enumerate() {
            let mut row = x.row_mut(i);
            row += &self.tok_emb.row(id as usize);
            row += &self.pos_emb.row(i);
            row += &self.seg_emb.row(ty as usize);
        }

        let dh = cfg.head_dim();
        let scale = 1.0 / (dh as f64).sqrt();
        let mut caches = Vec::with_capacity(self.layers.len());
        for p in &self.layers {
            let (h, ln1) = layer_norm(&x, &p.ln1_g, &p.ln1_b);
            let q = h.dot(&p.wq) + &p.bq;
            let k = h.dot(&p.wk) + &p.bk;
            let v = h.dot(&p.wv) + &p.bv;
            let mut ctx = Array2::zeros((t, cfg.hidden));
            let mut attn = Vec::with_capacity(cfg.heads);
            for head in 0..cfg.heads {
                let cols = s![.., head * dh..(head + 1) * dh];
                let mut a = q.slice(cols).dot(&k.slice(cols).t()) * scale;
                softmax_rows(&mut a);
                ctx.slice_mut(cols).assign(&a.dot(&v.slice(cols)));
                attn.push(a);
            }
            x = x + ctx.dot(&p.wo) + &p.bo;

            let (h2, ln2) = layer_norm(&x, &p.ln2_g, &p.ln2_b);
            let u = h2.dot(&p.w1) + &p.b1;
            let act = u.mapv(gelu);
            x = x + act.dot(&p.w2) + &p.b2;
            caches.push(LayerCache {
                ln1,
                h,
                q,
                k,
                v,
                attn,
                ctx,
                ln2,
                h2,
                u,
                act,
            });
        }

        let (z, final_ln) = layer_norm(&x, &self.lnf_g, &self.lnf_b);
        let pooled = z.slice(s![0..1, ..]).to_owned();
        let logits = pooled.dot(&self.cls_w) + &self.cls_b;
        let cache = ForwardCache {
            ids: ids.to_vec(),
            types: types.to_vec(),
            layers: caches,
            final_ln,
            pooled,
        };
        ([logits[[0, 0]], logits[[0, 1]], logits[[0, 2]]], cache)
    }

    /// Accumulates into `grads` the gradient of a loss whose derivative with
    /// respect to the logits is `dlogits`.
    pub fn backward(&self, cfg: &EncoderConfig, cache: &ForwardCache, dlogits: [f64; 3], grads: &mut EncoderParams) {
        let t = cache.ids.len();
        let dlog = Array2::from_shape_vec((1, 3), dlogits.to_vec()).expect("1x3");
        grads.cls_w += &cache.pooled.t().dot(&dlog);
        grads.cls_b += &dlog;
        let mut dz = Array2::zeros((t, cfg.hidden));
        dz.slice_mut(s![0..1, ..]).assign(&dlog.dot(&self.cls_w.t()));
        let mut dx = layer_norm_backward(&dz, &cache.final_ln, &self.lnf_g, &mut grads.lnf_g, &mut grads.lnf_b);

        let dh = cfg.head_dim();
        let scale = 1.0 / (dh as f64).sqrt();
        for ((p, c), g) in self.layers.iter().zip(&cache.layers).zip(grads.layers.iter_mut()).rev() {
            // feed-forward branch
            g.w2 += &c.act.t().dot(&dx);
            g.b2 += &row_sums(&dx);
            let dact = dx.dot(&p.w2.t());
            let du = dact * &c.u.mapv(gelu_grad);
            g.w1 += &c.h2.t().dot(&du);
            g.b1 += &row_sums(&du);
            let dh2 = du.dot(&p.w1.t());
            dx += &layer_norm_backward(&dh2, &c.ln2, &p.ln2_g, &mut g.ln2_g, &mut g.ln2_b);

            // attention branch
            g.wo += &c.ctx.t().dot(&dx);
            g.bo += &row_sums(&dx);
            let dctx = dx.dot(&p.wo.t());
            let mut dq = Array2::zeros((t, cfg.hidden));
            let mut dk = Array2::zeros((t, cfg.hidden));
            let mut dv = Array2::zeros((t, cfg.hidden));
            for (head, a) in c.attn.iter().enumerate() {
                let cols = s![.., head * dh..(head + 1) * dh];
                let dctx_h = dctx.slice(cols);
                let da = dctx_h.dot(&c.v.slice(cols).t());
                dv.slice_mut(cols).assign(&a.t().dot(&dctx_h));
                let inner = (&da * a).sum_axis(Axis(1)).insert_axis(Axis(1));
                let ds = (da - inner) * a * scale;
                dq.slice_mut(cols).assign(&ds.dot(&c.k.slice(cols)));
                dk.slice_mut(cols).assign(&ds.t().dot(&c.q.slice(cols)));
            }
            g.wq += &c.h.t().dot(&dq);
            g.bq += &row_sums(&dq);
            g.wk += &c.h.t().dot(&dk);
            g.bk += &row_sums(&dk);
            g.wv += &c.h.t().dot(&dv);
            g.bv += &row_sums(&dv);
            let dh_in = dq.dot(&p.wq.t()) + dk.dot(&p.wk.t()) + dv.dot(&p.wv.t());
            dx += &layer_norm_backward(&dh_in, &c.ln1, &p.ln1_g, &mut g.ln1_g, &mut g.ln1_b);
        }

        for (i, (&id, &ty)) in cache.ids.iter().zip(&cache.types).enumerate() {
            let row = dx.row(i);
            let mut r = grads.tok_emb.row_mut(id as usize);
            r += &row;
            let mut r = grads.pos_emb.row_mut(i);
            r += &row;
            let mut r = grads.seg_emb.row_mut(ty as usize);
            r += &row;
        }
    }
}

/// Cross-entropy of `label` under softmax(`logits`) and its gradient with
/// respect to the logits.
pub fn cross_entropy(logits: [f64; 3], label: usize) -> (f64, [f64; 3]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps = logits.map(|z| (z - max).exp());
    let total: f64 = exps.iter().sum();
    let probs = exps.map(|e| e / total);
    let loss = -(logits[label] - max - total.ln());
    let mut grad = probs;
    grad[label] -= 1.0;
    (loss, grad)
}
