//! The trainable risk model: per-segment token encoders, an MLP head over the
//! pooled representation, weighted binary cross-entropy with full
//! backpropagation (embedding rows included), adaptive-moment updates, early
//! stopping on validation AUC, a per-segment majority-vote mode, and
//! finite-difference gradient verification.
//!
//! Each segment encoder is `tanh(W · meanpool(Emb[tokens]) + b)` with
//! independent parameters per segment, so every segment keeps its own latent
//! space. The pooled mode concatenates the segment embeddings (plus the
//! standardized temporal vector when enabled) and feeds one MLP; the vote mode
//! trains one single-segment model per segment and combines them by majority
//! vote at 0.5.

use crate::bureau::SegmentType;
use crate::lexicon::TokenSequence;
use crate::seeds::substream;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_EMBED_DIM: usize = 32;
pub const PROB_CLAMP: f64 = 1e-7;
pub const TEMPORAL_DIM: usize = crate::temporal::RECORD_VECTOR_LEN;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Pooled,
    PerSegmentVote,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub hidden: (usize, usize),
    pub temporal: bool,
    pub mode: Mode,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            embed_dim: DEFAULT_EMBED_DIM,
            hidden: (64, 32),
            temporal: false,
            mode: Mode::Pooled,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("token id {token} out of range for vocabulary of {vocab_size}")]
    TokenOutOfRange { token: u32, vocab_size: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("{split} split needs both classes present")]
    DegenerateLabels { split: &'static str },
}

/// Dense row-major matrix; vectors use a single column.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    fn uniform(rng: &mut impl Rng, rows: usize, cols: usize, bound: f64) -> Self {
        let data = (0..rows * cols)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        Tensor { rows, cols, data }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn zero_like(&self) -> Self {
        Tensor::zeros(self.rows, self.cols)
    }
}

/// One segment's encoder: token embedding table, projection and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentEncoder {
    pub embedding: Tensor, // vocab_size x d
    pub proj: Tensor,      // d x d
    pub bias: Tensor,      // d x 1
}

/// Two hidden layers and a scalar output unit, all tanh-activated.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub w1: Tensor, // h1 x input
    pub b1: Tensor, // h1 x 1
    pub w2: Tensor, // h2 x h1
    pub b2: Tensor, // h2 x 1
    pub w_out: Tensor, // 1 x h2
    pub b_out: Tensor, // 1 x 1
}

/// All trainable tensors of one model (the pooled model, or one arm of the
/// vote ensemble when `segments` holds a single segment).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub segments: Vec<SegmentType>,
    pub encoders: Vec<SegmentEncoder>,
    pub head: Mlp,
    pub vocab_size: usize,
}

impl ModelParams {
    pub fn head_input_dim(&self) -> usize {
        self.segments.len() * self.config.embed_dim
            + if self.config.temporal { TEMPORAL_DIM } else { 0 }
    }

    /// All tensors in a fixed order; gradients and optimizer state mirror it.
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for enc in &self.encoders {
            out.push(&enc.embedding);
            out.push(&enc.proj);
            out.push(&enc.bias);
        }
        out.extend([
            &self.head.w1,
            &self.head.b1,
            &self.head.w2,
            &self.head.b2,
            &self.head.w_out,
            &self.head.b_out,
        ]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = Vec::new();
        for enc in &mut self.encoders {
            out.push(&mut enc.embedding);
            out.push(&mut enc.proj);
            out.push(&mut enc.bias);
        }
        out.extend([
            &mut self.head.w1,
            &mut self.head.b1,
            &mut self.head.w2,
            &mut self.head.b2,
            &mut self.head.w_out,
            &mut self.head.b_out,
        ]);
        out
    }

    pub fn tensor_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for seg in &self.segments {
            let s = seg.code().to_ascii_lowercase();
            out.push(format!("embedding_{s}"));
            out.push(format!("proj_{s}"));
            out.push(format!("bias_{s}"));
        }
        for name in ["head_w1", "head_b1", "head_w2", "head_b2", "head_w_out", "head_b_out"] {
            out.push(name.to_string());
        }
        out
    }

    /// Same shapes, all zeros. Used for gradients and optimizer moments.
    pub fn zero_clone(&self) -> ModelParams {
        let mut clone = self.clone();
        for t in clone.tensors_mut() {
            *t = t.zero_like();
        }
        clone
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.data.iter().all(|x| x.is_finite()))
    }
}

/// Seeded initialization: every tensor uniform in +-1/sqrt(fan-in).
pub fn init_params(
    config: ModelConfig,
    segments: Vec<SegmentType>,
    vocab_size: usize,
    seed: u64,
) -> ModelParams {
    let d = config.embed_dim;
    let mut rng = substream(seed, "init");
    let encoders = segments
        .iter()
        .map(|_| {
            let bound = 1.0 / (d as f64).sqrt();
            SegmentEncoder {
                embedding: Tensor::uniform(&mut rng, vocab_size, d, bound),
                proj: Tensor::uniform(&mut rng, d, d, bound),
                bias: Tensor::uniform(&mut rng, d, 1, bound),
            }
        })
        .collect::<Vec<_>>();
    let input_dim = segments.len() * d + if config.temporal { TEMPORAL_DIM } else { 0 };
    let (h1, h2) = config.hidden;
    let head = Mlp {
        w1: Tensor::uniform(&mut rng, h1, input_dim, 1.0 / (input_dim as f64).sqrt()),
        b1: Tensor::uniform(&mut rng, h1, 1, 1.0 / (input_dim as f64).sqrt()),
        w2: Tensor::uniform(&mut rng, h2, h1, 1.0 / (h1 as f64).sqrt()),
        b2: Tensor::uniform(&mut rng, h2, 1, 1.0 / (h1 as f64).sqrt()),
        w_out: Tensor::uniform(&mut rng, 1, h2, 1.0 / (h2 as f64).sqrt()),
        b_out: Tensor::uniform(&mut rng, 1, 1, 1.0 / (h2 as f64).sqrt()),
    };
    ModelParams {
        config,
        segments,
        encoders,
        head,
        vocab_size,
    }
}

/// Sparse mean-pooled bag of tokens: (token id, weight), weights sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentBag(pub Vec<(u32, f64)>);

impl SegmentBag {
    pub fn from_tokens(tokens: &TokenSequence) -> Self {
        let mut counts: std::collections::BTreeMap<u32, usize> = std::collections::BTreeMap::new();
        for &t in &tokens.tokens {
            *counts.entry(t).or_insert(0) += 1;
        }
        let total = tokens.tokens.len().max(1) as f64;
        SegmentBag(
            counts
                .into_iter()
                .map(|(t, c)| (t, c as f64 / total))
                .collect(),
        )
    }
}

/// One featurized example as the model consumes it. `bags` holds all three
/// segments in TR, IN, CL order; single-segment models index into it.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInput {
    pub bags: [SegmentBag; 3],
    pub temporal: [f64; TEMPORAL_DIM],
    pub label: bool,
}

fn segment_index(segment: SegmentType) -> usize {
    match segment {
        SegmentType::Tr => 0,
        SegmentType::In => 1,
        SegmentType::Cl => 2,
    }
}

fn matvec(w: &Tensor, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(w.cols, x.len());
    debug_assert_eq!(w.rows, out.len());
    for (r, o) in out.iter_mut().enumerate() {
        let row = w.row(r);
        let mut acc = 0.0;
        for (a, b) in row.iter().zip(x.iter()) {
            acc += a * b;
        }
        *o = acc;
    }
}

/// out += transpose(W) . dy
fn matvec_transpose_add(w: &Tensor, dy: &[f64], out: &mut [f64]) {
    debug_assert_eq!(w.rows, dy.len());
    debug_assert_eq!(w.cols, out.len());
    for (r, &d) in dy.iter().enumerate() {
        let row = w.row(r);
        for (o, &a) in out.iter_mut().zip(row.iter()) {
            *o += a * d;
        }
    }
}

/// grad += dy (outer) x
fn outer_add(grad: &mut Tensor, dy: &[f64], x: &[f64]) {
    debug_assert_eq!(grad.rows, dy.len());
    debug_assert_eq!(grad.cols, x.len());
    for (r, &d) in dy.iter().enumerate() {
        let row = &mut grad.data[r * grad.cols..(r + 1) * grad.cols];
        for (g, &xi) in row.iter_mut().zip(x.iter()) {
            *g += d * xi;
        }
    }
}

fn add_scaled(out: &mut [f64], x: &[f64], s: f64) {
    for (o, &xi) in out.iter_mut().zip(x.iter()) {
        *o += xi * s;
    }
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

struct ForwardCache {
    means: Vec<Vec<f64>>,
    embeds: Vec<Vec<f64>>,
    input: Vec<f64>,
    h1: Vec<f64>,
    h2: Vec<f64>,
    prob: f64,
    clamped: bool,
}

fn forward_cached(
    example: &ModelInput,
    params: &ModelParams,
    clamp: f64,
) -> Result<ForwardCache, ModelError> {
    let d = params.config.embed_dim;
    let mut means = Vec::with_capacity(params.segments.len());
    let mut embeds = Vec::with_capacity(params.segments.len());
    let mut input = Vec::with_capacity(params.head_input_dim());

    for (enc, &segment) in params.encoders.iter().zip(&params.segments) {
        let bag = &example.bags[segment_index(segment)];
        let mut mean = vec![0.0; d];
        for &(token, weight) in &bag.0 {
            if token as usize >= params.vocab_size {
                return Err(ModelError::TokenOutOfRange {
                    token,
                    vocab_size: params.vocab_size,
                });
            }
            add_scaled(&mut mean, enc.embedding.row(token as usize), weight);
        }
        let mut act = vec![0.0; d];
        matvec(&enc.proj, &mean, &mut act);
        for (a, b) in act.iter_mut().zip(enc.bias.data.iter()) {
            *a = (*a + b).tanh();
        }
        input.extend_from_slice(&act);
        means.push(mean);
        embeds.push(act);
    }
    if params.config.temporal {
        input.extend_from_slice(&example.temporal);
    }
    if input.len() != params.head.w1.cols {
        return Err(ModelError::ShapeMismatch(format!(
            "head expects input of {}, got {}",
            params.head.w1.cols,
            input.len()
        )));
    }

    let mut h1 = vec![0.0; params.head.w1.rows];
    matvec(&params.head.w1, &input, &mut h1);
    for (h, b) in h1.iter_mut().zip(params.head.b1.data.iter()) {
        *h = (*h + b).tanh();
    }
    let mut h2 = vec![0.0; params.head.w2.rows];
    matvec(&params.head.w2, &h1, &mut h2);
    for (h, b) in h2.iter_mut().zip(params.head.b2.data.iter()) {
        *h = (*h + b).tanh();
    }
    let mut logit = params.head.b_out.data[0];
    for (w, h) in params.head.w_out.row(0).iter().zip(h2.iter()) {
        logit += w * h;
    }
    let raw = logistic(logit);
    let prob = raw.clamp(clamp, 1.0 - clamp);
    Ok(ForwardCache {
        means,
        embeds,
        input,
        h1,
        h2,
        prob,
        clamped: raw != prob,
    })
}

/// Encode one segment's tokens: `tanh(W . meanpool(Emb[tokens]) + b)`.
pub fn encode_segment(
    tokens: &TokenSequence,
    segment: SegmentType,
    params: &ModelParams,
) -> Result<Vec<f64>, ModelError> {
    let position = params
        .segments
        .iter()
        .position(|&s| s == segment)
        .ok_or_else(|| ModelError::ShapeMismatch(format!("model has no {segment} encoder")))?;
    let enc = &params.encoders[position];
    let d = params.config.embed_dim;
    let bag = SegmentBag::from_tokens(tokens);
    let mut mean = vec![0.0; d];
    for &(token, weight) in &bag.0 {
        if token as usize >= params.vocab_size {
            return Err(ModelError::TokenOutOfRange {
                token,
                vocab_size: params.vocab_size,
            });
        }
        add_scaled(&mut mean, enc.embedding.row(token as usize), weight);
    }
    let mut out = vec![0.0; d];
    matvec(&enc.proj, &mean, &mut out);
    for (o, b) in out.iter_mut().zip(enc.bias.data.iter()) {
        *o = (*o + b).tanh();
    }
    Ok(out)
}

/// Predicted default probability, clamped into [eps, 1-eps].
pub fn forward(example: &ModelInput, params: &ModelParams) -> Result<f64, ModelError> {
    forward_cached(example, params, PROB_CLAMP).map(|c| c.prob)
}

/// Class weights of the weighted binary cross-entropy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub positive: f64,
    pub negative: f64,
}

impl LossWeights {
    /// Default weighting: positives weighted by the train-set class ratio.
    pub fn from_labels(labels: impl Iterator<Item = bool>) -> Self {
        let mut pos = 0usize;
        let mut neg = 0usize;
        for y in labels {
            if y {
                pos += 1;
            } else {
                neg += 1;
            }
        }
        LossWeights {
            positive: if pos > 0 { neg as f64 / pos as f64 } else { 1.0 },
            negative: 1.0,
        }
    }
}

/// Mean weighted binary cross-entropy over the batch and its gradients with
/// respect to every tensor (embedding rows included).
pub fn loss(
    batch: &[ModelInput],
    params: &ModelParams,
    weights: LossWeights,
    clamp: f64,
) -> Result<(f64, ModelParams), ModelError> {
    assert!(!batch.is_empty(), "loss needs a non-empty batch");
    let mut grads = params.zero_clone();
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    let d = params.config.embed_dim;

    for example in batch {
        let cache = forward_cached(example, params, clamp)?;
        let y = if example.label { 1.0 } else { 0.0 };
        let p = cache.prob;
        total -= scale * (weights.positive * y * p.ln() + weights.negative * (1.0 - y) * (1.0 - p).ln());

        // d(loss)/d(logit); zero when the clamp is active (the clamp has zero slope)
        let dz = if cache.clamped {
            0.0
        } else {
            scale * (weights.positive * y * (p - 1.0) + weights.negative * (1.0 - y) * p)
        };
        if dz == 0.0 {
            continue;
        }

        // output unit
        outer_add(&mut grads.head.w_out, &[dz], &cache.h2);
        grads.head.b_out.data[0] += dz;
        let mut dh2 = vec![0.0; cache.h2.len()];
        matvec_transpose_add(&params.head.w_out, &[dz], &mut dh2);

        // second hidden layer
        let dz2: Vec<f64> = dh2
            .iter()
            .zip(cache.h2.iter())
            .map(|(&g, &h)| g * (1.0 - h * h))
            .collect();
        outer_add(&mut grads.head.w2, &dz2, &cache.h1);
        for (g, &v) in grads.head.b2.data.iter_mut().zip(dz2.iter()) {
            *g += v;
        }
        let mut dh1 = vec![0.0; cache.h1.len()];
        matvec_transpose_add(&params.head.w2, &dz2, &mut dh1);

        // first hidden layer
        let dz1: Vec<f64> = dh1
            .iter()
            .zip(cache.h1.iter())
            .map(|(&g, &h)| g * (1.0 - h * h))
            .collect();
        outer_add(&mut grads.head.w1, &dz1, &cache.input);
        for (g, &v) in grads.head.b1.data.iter_mut().zip(dz1.iter()) {
            *g += v;
        }
        let mut dinput = vec![0.0; cache.input.len()];
        matvec_transpose_add(&params.head.w1, &dz1, &mut dinput);

        // through each segment encoder (the temporal tail has no parameters)
        for (s, (enc, &segment)) in params.encoders.iter().zip(&params.segments).enumerate() {
            let de = &dinput[s * d..(s + 1) * d];
            let da: Vec<f64> = de
                .iter()
                .zip(cache.embeds[s].iter())
                .map(|(&g, &e)| g * (1.0 - e * e))
                .collect();
            let genc = &mut grads.encoders[s];
            outer_add(&mut genc.proj, &da, &cache.means[s]);
            for (g, &v) in genc.bias.data.iter_mut().zip(da.iter()) {
                *g += v;
            }
            let mut dmean = vec![0.0; d];
            matvec_transpose_add(&enc.proj, &da, &mut dmean);
            let bag = &example.bags[segment_index(segment)];
            for &(token, weight) in &bag.0 {
                let row_start = token as usize * d;
                let row = &mut genc.embedding.data[row_start..row_start + d];
                add_scaled(row, &dmean, weight);
            }
        }
    }

    if !total.is_finite() {
        return Err(ModelError::NonFiniteLoss { epoch: 0, batch: 0 });
    }
    Ok((total, grads))
}

/// Adaptive-moment optimizer state and constants.
#[derive(Debug, Clone)]
struct Adam {
    m: ModelParams,
    v: ModelParams,
    step: usize,
    beta1: f64,
    beta2: f64,
    eps: f64,
    learning_rate: f64,
}

impl Adam {
    fn new(params: &ModelParams, cfg: &TrainConfig) -> Self {
        Adam {
            m: params.zero_clone(),
            v: params.zero_clone(),
            step: 0,
            beta1: cfg.adam_beta1,
            beta2: cfg.adam_beta2,
            eps: cfg.adam_epsilon,
            learning_rate: cfg.learning_rate,
        }
    }

    fn update(&mut self, params: &mut ModelParams, grads: &ModelParams) {
        self.step += 1;
        let bias1 = 1.0 - self.beta1.powi(self.step as i32);
        let bias2 = 1.0 - self.beta2.powi(self.step as i32);
        let mut m_tensors = self.m.tensors_mut();
        let mut v_tensors = self.v.tensors_mut();
        let mut p_tensors = params.tensors_mut();
        let g_tensors = grads.tensors();
        for i in 0..g_tensors.len() {
            let m = &mut m_tensors[i].data;
            let v = &mut v_tensors[i].data;
            let p = &mut p_tensors[i].data;
            let g = &g_tensors[i].data;
            for j in 0..g.len() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g[j];
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g[j] * g[j];
                let m_hat = m[j] / bias1;
                let v_hat = v[j] / bias2;
                p[j] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation AUC improvement above `min_improvement`
    /// before training halts.
    pub patience: usize,
    pub min_improvement: f64,
    /// Positive-class loss weight; `None` derives it from the train labels.
    pub pos_weight: Option<f64>,
    pub prob_clamp: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            batch_size: 128,
            max_epochs: 50,
            patience: 5,
            min_improvement: 1e-4,
            pos_weight: None,
            prob_clamp: PROB_CLAMP,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_auc: f64,
}

/// Score a slice of examples with the pooled forward pass.
pub fn score_all(examples: &[ModelInput], params: &ModelParams) -> Result<Vec<f64>, ModelError> {
    examples.iter().map(|e| forward(e, params)).collect()
}

fn check_both_classes(examples: &[ModelInput], split: &'static str) -> Result<(), ModelError> {
    let pos = examples.iter().filter(|e| e.label).count();
    if pos == 0 || pos == examples.len() {
        return Err(ModelError::DegenerateLabels { split });
    }
    Ok(())
}

/// Mini-batch training from an explicit starting point, with early stopping
/// on validation AUC. Returns the parameters of the best validation epoch.
pub fn train_from(
    mut params: ModelParams,
    train: &[ModelInput],
    validation: &[ModelInput],
    cfg: &TrainConfig,
) -> Result<(ModelParams, Vec<EpochLog>), ModelError> {
    check_both_classes(train, "train")?;
    check_both_classes(validation, "validation")?;

    let weights = LossWeights {
        positive: cfg
            .pos_weight
            .unwrap_or_else(|| LossWeights::from_labels(train.iter().map(|e| e.label)).positive),
        negative: 1.0,
    };

    let mut adam = Adam::new(&params, cfg);
    let mut shuffle_rng = substream(cfg.seed, "shuffle");
    let mut order: Vec<usize> = (0..train.len()).collect();

    let mut best_params = params.clone();
    let mut best_auc = f64::NEG_INFINITY;
    let mut stall = 0usize;
    let mut log = Vec::new();

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for (batch_index, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<ModelInput> = chunk.iter().map(|&i| train[i].clone()).collect();
            let (value, grads) = loss(&batch, &params, weights, cfg.prob_clamp)
                .map_err(|e| match e {
                    ModelError::NonFiniteLoss { .. } => ModelError::NonFiniteLoss {
                        epoch,
                        batch: batch_index,
                    },
                    other => other,
                })?;
            adam.update(&mut params, &grads);
            epoch_loss += value;
            batches += 1;
        }
        if !params.all_finite() {
            return Err(ModelError::NonFiniteLoss { epoch, batch: 0 });
        }

        let scores = score_all(validation, &params)?;
        let labels: Vec<bool> = validation.iter().map(|e| e.label).collect();
        let val_auc = crate::metrics::auc(&scores, &labels)
            .map_err(|_| ModelError::DegenerateLabels { split: "validation" })?;
        log.push(EpochLog {
            epoch,
            train_loss: epoch_loss / batches.max(1) as f64,
            validation_auc: val_auc,
        });

        if val_auc > best_auc + cfg.min_improvement {
            best_auc = val_auc;
            best_params = params.clone();
            stall = 0;
        } else {
            stall += 1;
            if stall >= cfg.patience {
                break;
            }
        }
    }

    Ok((best_params, log))
}

/// Initialize and train one model.
pub fn train(
    config: ModelConfig,
    segments: Vec<SegmentType>,
    vocab_size: usize,
    train_set: &[ModelInput],
    validation: &[ModelInput],
    cfg: &TrainConfig,
) -> Result<(ModelParams, Vec<EpochLog>), ModelError> {
    let params = init_params(config, segments, vocab_size, cfg.seed);
    train_from(params, train_set, validation, cfg)
}

/// Majority vote over three single-segment models: vote is 1 when at least
/// two probabilities reach 0.5; the ranking score is the mean probability.
pub fn predict_vote(
    example: &ModelInput,
    parts: &[ModelParams],
) -> Result<(bool, f64), ModelError> {
    if parts.len() != 3 {
        return Err(ModelError::ShapeMismatch(format!(
            "vote needs 3 single-segment models, got {}",
            parts.len()
        )));
    }
    let mut votes = 0usize;
    let mut sum = 0.0;
    for part in parts {
        let p = forward(example, part)?;
        if p >= 0.5 {
            votes += 1;
        }
        sum += p;
    }
    Ok((votes >= 2, sum / 3.0))
}

/// Central finite difference of the batch loss for one parameter coordinate.
pub fn numerical_gradient(
    params: &ModelParams,
    batch: &[ModelInput],
    weights: LossWeights,
    clamp: f64,
    tensor_index: usize,
    element: usize,
    step: f64,
) -> Result<f64, ModelError> {
    let mut plus = params.clone();
    plus.tensors_mut()[tensor_index].data[element] += step;
    let (loss_plus, _) = loss(batch, &plus, weights, clamp)?;
    let mut minus = params.clone();
    minus.tensors_mut()[tensor_index].data[element] -= step;
    let (loss_minus, _) = loss(batch, &minus, weights, clamp)?;
    Ok((loss_plus - loss_minus) / (2.0 * step))
}

/// Relative disagreement between an analytic and a numeric gradient value.
/// Coordinates where both sides are within 1e-8 of zero count as agreement.
pub fn relative_gradient_error(analytic: f64, numeric: f64) -> f64 {
    let magnitude = analytic.abs().max(numeric.abs());
    if magnitude <= 1e-8 {
        0.0
    } else {
        (analytic - numeric).abs() / magnitude
    }
}

pub const GRADCHECK_STEP: f64 = 1e-5;

/// Compare analytic gradients against central finite differences on randomly
/// chosen parameters spread across every tensor; returns the max relative
/// error observed.
pub fn gradcheck(
    params: &ModelParams,
    batch: &[ModelInput],
    weights: LossWeights,
    n_samples: usize,
    seed: u64,
) -> Result<f64, ModelError> {
    let (_, grads) = loss(batch, params, weights, PROB_CLAMP)?;
    let tensor_lens: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
    let per_tensor = (n_samples / tensor_lens.len()).max(2);

    let mut rng = substream(seed, "gradcheck");
    let mut worst: f64 = 0.0;
    for (tensor_index, &len) in tensor_lens.iter().enumerate() {
        for _ in 0..per_tensor.min(len) {
            let element = rng.gen_range(0..len);
            let analytic = grads.tensors()[tensor_index].data[element];
            let numeric = numerical_gradient(
                params,
                batch,
                weights,
                PROB_CLAMP,
                tensor_index,
                element,
                GRADCHECK_STEP,
            )?;
            worst = worst.max(relative_gradient_error(analytic, numeric));
        }
    }
    Ok(worst)
}
