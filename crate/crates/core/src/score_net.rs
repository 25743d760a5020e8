//! Denoising score matching from scratch: linear DDPM noise schedule, a
//! fully connected denoiser with exact backpropagation, Adam, full-batch
//! training and the denoiser-to-score conversion.
//!
//! The network predicts the injected noise `ε` from
//! `x' = √ᾱ_t x + √(1 − ᾱ_t) ε` and the level `t`, which enters as one extra
//! input coordinate `t / 1000`.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::score_fields::ScoreField;
use crate::seeding;

pub const NUM_LEVELS: usize = 1000;
/// Noise level at which the denoiser is converted to a score.
pub const SCORE_LEVEL: usize = 10;

/// `β_t` and `ᾱ_t = Π_{t' ≤ t} (1 − β_{t'})` for `t = 1..=1000`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

impl NoiseSchedule {
    /// `β_t` for `1 ≤ t ≤ 1000`.
    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    /// `ᾱ_t` for `1 ≤ t ≤ 1000`.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bars[t - 1]
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }
}

/// Linear schedule `β_t = (1001 − t)/1000 · 1e-4 + (t − 1)/1000 · 1e-2`.
pub fn build_schedule() -> NoiseSchedule {
    let betas: Vec<f64> = (1..=NUM_LEVELS)
        .map(|t| {
            let t = t as f64;
            (1001.0 - t) / 1000.0 * 1e-4 + (t - 1.0) / 1000.0 * 1e-2
        })
        .collect();
    let mut acc = 1.0;
    let alpha_bars = betas
        .iter()
        .map(|b| {
            acc *= 1.0 - b;
            acc
        })
        .collect();
    NoiseSchedule { betas, alpha_bars }
}

fn check_level(t: usize) -> Result<()> {
    if (1..=NUM_LEVELS).contains(&t) {
        Ok(())
    } else {
        Err(LabError::InvalidInput(format!("noise level must lie in 1..=1000, got {t}")))
    }
}

/// `n_distinct` target draws, each repeated `duplication` times
/// (row `k` is draw `k / duplication`).
pub fn make_training_set(
    target: &crate::score_fields::Target,
    n_distinct: usize,
    duplication: usize,
    seed: u64,
) -> Result<Array2<f64>> {
    if n_distinct == 0 || duplication == 0 {
        return Err(LabError::InvalidInput("training set sizes must be positive".into()));
    }
    let draws = crate::score_fields::sample_target(target, n_distinct, seed)?;
    let d = target.dim();
    let mut data = Array2::zeros((n_distinct * duplication, d));
    for (k, mut row) in data.rows_mut().into_iter().enumerate() {
        row.assign(&ArrayView1::from(&draws[k / duplication][..]));
    }
    Ok(data)
}

// ---------------------------------------------------------------------------
// Model

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// SiLU activation `z σ(z)`.
#[inline]
fn silu(z: f64) -> f64 {
    z * sigmoid(z)
}

#[inline]
fn silu_grad(z: f64) -> f64 {
    let s = sigmoid(z);
    s * (1.0 + z * (1.0 - s))
}

/// Fully connected denoiser. Parameters live in one flat vector, layer by
/// layer: the `in × out` weight matrix (row-major) followed by the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserModel {
    widths: Vec<usize>,
    params: Vec<f64>,
}

struct LayerCache {
    input: Array2<f64>,
    pre: Vec<Array2<f64>>,
    post: Vec<Array2<f64>>,
    output: Array2<f64>,
}

impl DenoiserModel {
    pub const HIDDEN_LAYERS: usize = 3;

    fn widths_for(data_dim: usize, hidden_width: usize) -> Vec<usize> {
        let mut w = vec![data_dim + 1];
        w.extend(std::iter::repeat(hidden_width).take(Self::HIDDEN_LAYERS));
        w.push(data_dim);
        w
    }

    /// Fan-in scaled uniform initialization `U(−1/√fan_in, 1/√fan_in)` for
    /// weights and biases.
    pub fn new(data_dim: usize, hidden_width: usize, seed: u64) -> Result<Self> {
        if data_dim == 0 || hidden_width == 0 {
            return Err(LabError::InvalidInput("model widths must be positive".into()));
        }
        let widths = Self::widths_for(data_dim, hidden_width);
        let mut rng = seeding::stream(seed, "denoiser-init", 0);
        let mut params = Vec::with_capacity(Self::param_count_for(&widths));
        for w in widths.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for _ in 0..(w[0] * w[1] + w[1]) {
                params.push(rng.gen_range(-bound..bound));
            }
        }
        Ok(Self { widths, params })
    }

    pub fn zeros(data_dim: usize, hidden_width: usize) -> Self {
        let widths = Self::widths_for(data_dim, hidden_width);
        let params = vec![0.0; Self::param_count_for(&widths)];
        Self { widths, params }
    }

    pub fn from_parts(widths: Vec<usize>, params: Vec<f64>) -> Result<Self> {
        if widths.len() < 2 || widths.iter().any(|w| *w == 0) || widths[0] != widths[widths.len() - 1] + 1 {
            return Err(LabError::InvalidInput(format!("invalid layer widths {widths:?}")));
        }
        if params.len() != Self::param_count_for(&widths) {
            return Err(LabError::InvalidInput(format!(
                "expected {} parameters, got {}",
                Self::param_count_for(&widths),
                params.len()
            )));
        }
        Ok(Self { widths, params })
    }

    fn param_count_for(widths: &[usize]) -> usize {
        widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn data_dim(&self) -> usize {
        *self.widths.last().expect("widths are non-empty")
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn layer_offsets(&self) -> Vec<(usize, usize, usize)> {
        let mut off = 0;
        self.widths
            .windows(2)
            .map(|w| {
                let start = off;
                off += w[0] * w[1] + w[1];
                (start, w[0], w[1])
            })
            .collect()
    }

    fn layer(&self, start: usize, fan_in: usize, fan_out: usize) -> (ArrayView2<'_, f64>, ArrayView1<'_, f64>) {
        let w = ArrayView2::from_shape((fan_in, fan_out), &self.params[start..start + fan_in * fan_out])
            .expect("layer shape matches parameter slice");
        let b = ArrayView1::from(&self.params[start + fan_in * fan_out..start + fan_in * fan_out + fan_out]);
        (w, b)
    }

    fn check_params(&self) -> Result<()> {
        if self.params.iter().all(|p| p.is_finite()) {
            Ok(())
        } else {
            Err(LabError::InvalidInput("model has non-finite parameters".into()))
        }
    }

    fn build_input(&self, xs: ArrayView2<'_, f64>, t: usize) -> Array2<f64> {
        let (n, d) = xs.dim();
        let mut input = Array2::zeros((n, d + 1));
        input.slice_mut(s![.., ..d]).assign(&xs);
        input.column_mut(d).fill(t as f64 / NUM_LEVELS as f64);
        input
    }

    fn forward_cached(&self, xs: ArrayView2<'_, f64>, t: usize) -> LayerCache {
        let input = self.build_input(xs, t);
        let layers = self.layer_offsets();
        let mut pre = Vec::with_capacity(layers.len() - 1);
        let mut post: Vec<Array2<f64>> = Vec::with_capacity(layers.len() - 1);
        for (k, &(start, fi, fo)) in layers.iter().enumerate() {
            let (w, b) = self.layer(start, fi, fo);
            let h = if k == 0 { &input } else { &post[k - 1] };
            let mut z = h.dot(&w);
            z += &b;
            if k + 1 == layers.len() {
                return LayerCache {
                    input,
                    pre,
                    post,
                    output: z,
                };
            }
            let a = z.mapv(silu);
            pre.push(z);
            post.push(a);
        }
        unreachable!("a model has at least one layer")
    }

    /// Batched forward pass: `xs` is `n × d`, the result is `n × d`.
    pub fn forward_batch(&self, xs: ArrayView2<'_, f64>, t: usize) -> Result<Array2<f64>> {
        check_level(t)?;
        self.check_params()?;
        if xs.ncols() != self.data_dim() {
            return Err(LabError::DimensionMismatch {
                expected: self.data_dim(),
                got: xs.ncols(),
            });
        }
        Ok(self.forward_cached(xs, t).output)
    }
}

/// Forward pass for a single point.
pub fn mlp_forward(model: &DenoiserModel, x: &[f64], t: usize) -> Result<Vec<f64>> {
    let xs = ArrayView2::from_shape((1, x.len()), x).map_err(|e| LabError::InvalidInput(e.to_string()))?;
    Ok(model.forward_batch(xs, t)?.into_raw_vec_and_offset().0)
}

/// Mean squared error between the network output on
/// `√ᾱ_t x + √(1 − ᾱ_t) ε` and `ε`, averaged over all batch entries, with
/// its exact gradient in the model's flat parameter layout.
pub fn loss_and_grad(
    model: &DenoiserModel,
    schedule: &NoiseSchedule,
    batch: ArrayView2<'_, f64>,
    t: usize,
    noise: ArrayView2<'_, f64>,
) -> Result<(f64, Vec<f64>)> {
    check_level(t)?;
    if batch.dim() != noise.dim() || batch.ncols() != model.data_dim() || batch.nrows() == 0 {
        return Err(LabError::InvalidInput("batch and noise shapes must agree with the model".into()));
    }
    let ab = schedule.alpha_bar(t);
    let noised = &batch * ab.sqrt() + &noise * (1.0 - ab).sqrt();
    let cache = model.forward_cached(noised.view(), t);
    let resid = &cache.output - &noise;
    let count = resid.len() as f64;
    let loss = resid.iter().map(|r| r * r).sum::<f64>() / count;

    let layers = model.layer_offsets();
    let mut grads = vec![0.0; model.params.len()];
    let mut delta = resid * (2.0 / count);
    for k in (0..layers.len()).rev() {
        let (start, fi, fo) = layers[k];
        let h = if k == 0 { &cache.input } else { &cache.post[k - 1] };
        let gw = h.t().dot(&delta);
        let gb = delta.sum_axis(Axis(0));
        // Logical (row-major) order; `dot` may hand back a column-major array.
        for (g, v) in grads[start..start + fi * fo].iter_mut().zip(gw.iter()) {
            *g = *v;
        }
        for (g, v) in grads[start + fi * fo..start + fi * fo + fo].iter_mut().zip(gb.iter()) {
            *g = *v;
        }
        if k > 0 {
            let (w, _) = model.layer(start, fi, fo);
            let mut back = delta.dot(&w.t());
            back.zip_mut_with(&cache.pre[k - 1], |g, z| *g *= silu_grad(*z));
            delta = back;
        }
    }
    Ok((loss, grads))
}

// ---------------------------------------------------------------------------
// Adam

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
        }
    }
}

/// One bias-corrected Adam update; `step_index` counts from 1.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, lr: f64, step_index: u64) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first_moment.len() {
        return Err(LabError::InvalidInput("adam shapes disagree".into()));
    }
    if step_index == 0 {
        return Err(LabError::InvalidInput("adam step index counts from 1".into()));
    }
    let c1 = 1.0 - ADAM_BETA1.powi(step_index as i32);
    let c2 = 1.0 - ADAM_BETA2.powi(step_index as i32);
    for (((p, g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(&mut state.first_moment)
        .zip(&mut state.second_moment)
    {
        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Training

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub hidden_width: usize,
    /// Levels are drawn uniformly from `1..=max_level`.
    pub max_level: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30_000,
            learning_rate: 1e-3,
            hidden_width: 256,
            max_level: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossRecord {
    pub epoch: usize,
    pub t_drawn: usize,
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: DenoiserModel,
    pub loss_trace: Vec<LossRecord>,
}

/// Full-batch training: each epoch draws one level `t`, fresh noise for
/// every row and takes one Adam step. `epochs = 0` returns the initialized
/// model.
pub fn train(dataset: ArrayView2<'_, f64>, schedule: &NoiseSchedule, config: &TrainConfig) -> Result<TrainOutcome> {
    train_with_progress(dataset, schedule, config, |_| {})
}

pub fn train_with_progress<P: FnMut(&LossRecord)>(
    dataset: ArrayView2<'_, f64>,
    schedule: &NoiseSchedule,
    config: &TrainConfig,
    mut progress: P,
) -> Result<TrainOutcome> {
    if !(config.learning_rate > 0.0) {
        return Err(LabError::InvalidInput("learning rate must be positive".into()));
    }
    check_level(config.max_level)?;
    let (n, d) = dataset.dim();
    if n == 0 || d == 0 {
        return Err(LabError::InvalidInput("training set is empty".into()));
    }
    let mut model = DenoiserModel::new(d, config.hidden_width, config.seed)?;
    let mut state = AdamState::new(model.params.len());
    let mut rng = seeding::stream(config.seed, "denoiser-train", 0);
    let mut noise = Array2::<f64>::zeros((n, d));
    let mut trace = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let t = rng.gen_range(1..=config.max_level);
        noise.mapv_inplace(|_| rng.sample(StandardNormal));
        let (loss, grads) = loss_and_grad(&model, schedule, dataset, t, noise.view())?;
        if !loss.is_finite() {
            return Err(LabError::TrainingDiverged { epoch, loss });
        }
        adam_step(&mut model.params, &grads, &mut state, config.learning_rate, epoch as u64)?;
        let rec = LossRecord { epoch, t_drawn: t, loss };
        progress(&rec);
        trace.push(rec);
    }
    Ok(TrainOutcome {
        model,
        loss_trace: trace,
    })
}

// ---------------------------------------------------------------------------
// Learned score

/// `x ↦ −model(x, 10) / √(1 − ᾱ_10)`.
#[derive(Debug, Clone)]
pub struct LearnedScore {
    model: DenoiserModel,
    scale: f64,
}

impl LearnedScore {
    pub fn new(model: DenoiserModel, schedule: &NoiseSchedule) -> Result<Self> {
        model.check_params()?;
        let scale = 1.0 / (1.0 - schedule.alpha_bar(SCORE_LEVEL)).sqrt();
        Ok(Self { model, scale })
    }

    pub fn model(&self) -> &DenoiserModel {
        &self.model
    }
}

impl ScoreField for LearnedScore {
    fn dim(&self) -> usize {
        self.model.data_dim()
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        self.eval_batch(x, out);
    }

    fn eval_batch(&self, xs: &[f64], out: &mut [f64]) {
        let d = self.dim();
        let view = ArrayView2::from_shape((xs.len() / d, d), xs).expect("batch is a whole number of points");
        let y = self.model.forward_cached(view, SCORE_LEVEL).output;
        for (o, v) in out.iter_mut().zip(y.iter()) {
            *o = -self.scale * v;
        }
    }
}

pub fn learned_score(model: &DenoiserModel, schedule: &NoiseSchedule, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != model.data_dim() {
        return Err(LabError::DimensionMismatch {
            expected: model.data_dim(),
            got: x.len(),
        });
    }
    let y = mlp_forward(model, x, SCORE_LEVEL)?;
    let scale = 1.0 / (1.0 - schedule.alpha_bar(SCORE_LEVEL)).sqrt();
    Ok(y.into_iter().map(|v| -scale * v).collect())
}

// ---------------------------------------------------------------------------
// Checkpoints and loss traces

const CHECKPOINT_MAGIC: &str = "langevin-lab-denoiser v1";

/// Plain-text checkpoint: a magic line, a `widths ...` line, then for each
/// layer the weight rows (one input unit per line) followed by the bias line.
pub fn save_checkpoint(model: &DenoiserModel, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{CHECKPOINT_MAGIC}")?;
    let widths: Vec<String> = model.widths.iter().map(ToString::to_string).collect();
    writeln!(out, "widths {}", widths.join(" "))?;
    let mut line = String::new();
    for (start, fi, fo) in model.layer_offsets() {
        let (w, b) = model.layer(start, fi, fo);
        for row in w.rows() {
            line.clear();
            join_floats(&mut line, row);
            writeln!(out, "{line}")?;
        }
        line.clear();
        join_floats(&mut line, b);
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

fn join_floats(buf: &mut String, values: ArrayView1<'_, f64>) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            buf.push(' ');
        }
        let _ = write!(buf, "{v:?}");
    }
}

pub fn load_checkpoint(path: &Path) -> Result<DenoiserModel> {
    let bad = |msg: &str| LabError::InvalidInput(format!("{}: {msg}", path.display()));
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut lines = file.lines();
    let magic = lines.next().transpose()?.ok_or_else(|| bad("empty checkpoint"))?;
    if magic.trim() != CHECKPOINT_MAGIC {
        return Err(bad("unrecognized checkpoint header"));
    }
    let widths_line = lines.next().transpose()?.ok_or_else(|| bad("missing widths line"))?;
    let widths: Vec<usize> = widths_line
        .strip_prefix("widths ")
        .ok_or_else(|| bad("missing widths line"))?
        .split_whitespace()
        .map(|w| w.parse().map_err(|_| bad("bad width")))
        .collect::<Result<_>>()?;
    let mut params = Vec::new();
    for line in lines {
        for tok in line?.split_whitespace() {
            params.push(tok.parse::<f64>().map_err(|_| bad("bad parameter value"))?);
        }
    }
    DenoiserModel::from_parts(widths, params)
}

pub fn write_loss_trace_csv(path: &Path, trace: &[LossRecord]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "epoch,t_drawn,loss")?;
    for r in trace {
        writeln!(out, "{},{},{:?}", r.epoch, r.t_drawn, r.loss)?;
    }
    out.flush()?;
    Ok(())
}

/// Unique rows of a dataset (exact comparison), in first-seen order.
pub fn unique_rows(data: ArrayView2<'_, f64>) -> Vec<Array1<f64>> {
    let mut seen: Vec<Array1<f64>> = Vec::new();
    for row in data.rows() {
        if !seen.iter().any(|r| r == row) {
            seen.push(row.to_owned());
        }
    }
    seen
}
