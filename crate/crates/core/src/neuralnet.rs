//! Minimal dense network engine in `f64`.
//!
//! A network is an optional *branch* stack applied to the main input, an
//! optional side input concatenated in front of the branch output, and a
//! *trunk* stack producing the prediction:
//!
//! ```text
//! main ──► branch ──┐
//!                   ├─ concat[side, branch] ──► trunk ──► output
//! side ─────────────┘
//! ```
//!
//! With no side input and an empty branch this is a plain MLP. Each layer is
//! affine, then its activation, then (in training) inverted dropout.

use std::io::{Read, Write};

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Linear,
}

impl Activation {
    fn apply(self, z: &mut Array2<f64>) {
        match self {
            Activation::Relu => z.mapv_inplace(|v| v.max(0.0)),
            Activation::Tanh => z.mapv_inplace(f64::tanh),
            Activation::Linear => {}
        }
    }

    /// Multiplies `grad` by the derivative, expressed through the activation output.
    fn backprop(self, grad: &mut Array2<f64>, out: &Array2<f64>) {
        match self {
            Activation::Relu => Zip::from(grad).and(out).for_each(|g, &a| {
                if a <= 0.0 {
                    *g = 0.0;
                }
            }),
            Activation::Tanh => Zip::from(grad).and(out).for_each(|g, &a| *g *= 1.0 - a * a),
            Activation::Linear => {}
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    /// Applied after the activation; 0 disables.
    pub dropout_p: f64,
}

impl LayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation, dropout_p: f64) -> Self {
        Self {
            in_dim,
            out_dim,
            activation,
            dropout_p,
        }
    }

    pub fn param_count(&self) -> usize {
        self.in_dim * self.out_dim + self.out_dim
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub branch: Vec<LayerSpec>,
    /// Width of the side input concatenated before the trunk; 0 for none.
    pub side_dim: usize,
    pub trunk: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn mlp(layers: Vec<LayerSpec>) -> Self {
        Self {
            branch: Vec::new(),
            side_dim: 0,
            trunk: layers,
        }
    }

    pub fn layers(&self) -> impl Iterator<Item = &LayerSpec> {
        self.branch.iter().chain(&self.trunk)
    }

    pub fn param_count(&self) -> usize {
        self.layers().map(LayerSpec::param_count).sum()
    }

    /// Width of the main input.
    pub fn input_dim(&self) -> usize {
        match self.branch.first() {
            Some(l) => l.in_dim,
            None => self.trunk.first().map_or(0, |l| l.in_dim.saturating_sub(self.side_dim)),
        }
    }

    pub fn output_dim(&self) -> usize {
        self.trunk.last().map_or(0, |l| l.out_dim)
    }

    fn code_dim(&self) -> usize {
        self.branch.last().map_or(self.input_dim(), |l| l.out_dim)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trunk.is_empty() {
            return Err(Error::Shape("network needs at least one trunk layer".into()));
        }
        for (i, l) in self.layers().enumerate() {
            if l.in_dim == 0 || l.out_dim == 0 {
                return Err(Error::Shape(format!("layer {i} has a zero dimension")));
            }
            if !(0.0..1.0).contains(&l.dropout_p) {
                return Err(Error::Shape(format!("layer {i} dropout must be in [0, 1)")));
            }
        }
        let chain = |stack: &[LayerSpec]| stack.windows(2).all(|w| w[0].out_dim == w[1].in_dim);
        if !chain(&self.branch) || !chain(&self.trunk) {
            return Err(Error::Shape("consecutive layer widths do not match".into()));
        }
        if self.trunk[0].in_dim != self.side_dim + self.code_dim() || self.input_dim() == 0 {
            return Err(Error::Shape(format!(
                "trunk input {} != side {} + branch output {}",
                self.trunk[0].in_dim,
                self.side_dim,
                self.code_dim()
            )));
        }
        Ok(())
    }
}

/// Weight (`in x out`) and bias of one affine layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn zeros(spec: &LayerSpec) -> Self {
        Self {
            weight: Array2::zeros((spec.in_dim, spec.out_dim)),
            bias: Array1::zeros(spec.out_dim),
        }
    }

    /// Uniform Glorot weights, zero bias.
    fn glorot(spec: &LayerSpec, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (spec.in_dim + spec.out_dim) as f64).sqrt();
        Self {
            weight: Array2::from_shape_simple_fn((spec.in_dim, spec.out_dim), || {
                rng.random_range(-limit..=limit)
            }),
            bias: Array1::zeros(spec.out_dim),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub t: u64,
    pub m: Vec<Dense>,
    pub v: Vec<Dense>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub spec: NetworkSpec,
    /// Branch layers first, then trunk layers.
    pub layers: Vec<Dense>,
    pub adam: AdamState,
    version: u64,
}

impl NetworkState {
    pub fn init(spec: NetworkSpec, rng: &mut impl Rng) -> Result<Self> {
        spec.validate()?;
        let layers = spec.layers().map(|l| Dense::glorot(l, rng)).collect();
        Ok(Self::with_layers(spec, layers))
    }

    pub fn zeros(spec: NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let layers = spec.layers().map(Dense::zeros).collect();
        Ok(Self::with_layers(spec, layers))
    }

    fn with_layers(spec: NetworkSpec, layers: Vec<Dense>) -> Self {
        let zeros: Vec<Dense> = spec.layers().map(Dense::zeros).collect();
        Self {
            spec,
            layers,
            adam: AdamState {
                t: 0,
                m: zeros.clone(),
                v: zeros,
            },
            version: 0,
        }
    }

    /// Marks cached forward passes as stale after parameters change.
    pub fn touch(&mut self) {
        self.version += 1;
    }

    fn layer_specs(&self) -> Vec<LayerSpec> {
        self.spec.layers().copied().collect()
    }
}

/// Network input batch: rows are samples.
#[derive(Debug, Clone, Copy)]
pub struct NetInput<'a> {
    pub main: ArrayView2<'a, f64>,
    pub side: Option<ArrayView2<'a, f64>>,
}

impl<'a> NetInput<'a> {
    pub fn new(main: ArrayView2<'a, f64>, side: Option<ArrayView2<'a, f64>>) -> Self {
        Self { main, side }
    }

    fn batch(&self) -> usize {
        self.main.nrows()
    }
}

pub enum Mode<'a> {
    Eval,
    Train(&'a mut dyn RngCore),
    /// Training forward with caller-supplied dropout scale masks, one per layer.
    FixedMasks(&'a [Option<Array2<f64>>]),
}

#[derive(Debug, Clone)]
struct LayerCache {
    input: Array2<f64>,
    /// Activation output before dropout.
    act: Array2<f64>,
    mask: Option<Array2<f64>>,
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    version: u64,
    batch: usize,
    layers: Vec<LayerCache>,
}

impl ForwardCache {
    /// Dropout scale masks used by each layer (`None` where dropout was off).
    pub fn masks(&self) -> Vec<Option<Array2<f64>>> {
        self.layers.iter().map(|l| l.mask.clone()).collect()
    }
}

fn check_input(spec: &NetworkSpec, input: &NetInput<'_>) -> Result<()> {
    if input.main.ncols() != spec.input_dim() {
        return Err(Error::Shape(format!(
            "main input width {} != {}",
            input.main.ncols(),
            spec.input_dim()
        )));
    }
    match (spec.side_dim, input.side) {
        (0, None) => Ok(()),
        (0, Some(_)) => Err(Error::Shape("network takes no side input".into())),
        (d, None) => Err(Error::Shape(format!("missing side input of width {d}"))),
        (d, Some(side)) if side.ncols() != d || side.nrows() != input.batch() => Err(Error::Shape(
            format!("side input is {:?}, expected ({}, {d})", side.dim(), input.batch()),
        )),
        _ => Ok(()),
    }
}

fn affine(x: &ArrayView2<'_, f64>, p: &Dense) -> Array2<f64> {
    let mut z = x.dot(&p.weight);
    z += &p.bias;
    z
}

fn draw_mask(rows: usize, cols: usize, p: f64, rng: &mut dyn RngCore) -> Array2<f64> {
    let keep = 1.0 - p;
    let scale = 1.0 / keep;
    Array2::from_shape_simple_fn((rows, cols), || {
        if rng.random::<f64>() < keep {
            scale
        } else {
            0.0
        }
    })
}

/// Runs the network; the cache is only populated outside [`Mode::Eval`].
pub fn forward(
    state: &NetworkState,
    input: NetInput<'_>,
    mut mode: Mode<'_>,
) -> Result<(Array2<f64>, ForwardCache)> {
    check_input(&state.spec, &input)?;
    let specs = state.layer_specs();
    if let Mode::FixedMasks(masks) = &mode {
        if masks.len() != specs.len() {
            return Err(Error::Shape(format!(
                "{} masks for {} layers",
                masks.len(),
                specs.len()
            )));
        }
    }
    let training = !matches!(mode, Mode::Eval);
    let batch = input.batch();
    let n_branch = state.spec.branch.len();
    let mut caches = Vec::with_capacity(if training { specs.len() } else { 0 });
    let mut x = input.main.to_owned();
    for (i, (spec, params)) in specs.iter().zip(&state.layers).enumerate() {
        if i == n_branch {
            if let Some(side) = input.side {
                x = concatenate(Axis(1), &[side, x.view()])
                    .map_err(|e| Error::Shape(e.to_string()))?;
            }
        }
        let mut act = affine(&x.view(), params);
        spec.activation.apply(&mut act);
        let mask = match &mut mode {
            Mode::Eval => None,
            Mode::Train(rng) if spec.dropout_p > 0.0 => {
                Some(draw_mask(batch, spec.out_dim, spec.dropout_p, *rng))
            }
            Mode::Train(_) => None,
            Mode::FixedMasks(masks) => masks[i].clone(),
        };
        let (out, kept_act) = match &mask {
            Some(m) => {
                if m.dim() != act.dim() {
                    return Err(Error::Shape(format!("mask {i} has shape {:?}", m.dim())));
                }
                (&act * m, Some(act))
            }
            None if training => (act.clone(), Some(act)),
            None => (act, None),
        };
        if let Some(act) = kept_act {
            caches.push(LayerCache {
                input: x,
                act,
                mask,
            });
        }
        x = out;
    }
    Ok((
        x,
        ForwardCache {
            version: state.version,
            batch,
            layers: caches,
        },
    ))
}

/// Eval-mode forward without a cache.
pub fn predict(state: &NetworkState, input: NetInput<'_>) -> Result<Array2<f64>> {
    forward(state, input, Mode::Eval).map(|(out, _)| out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
    pub main_input: Option<Array2<f64>>,
    pub side_input: Option<Array2<f64>>,
}

/// Reverse-mode pass through the network recorded in `cache`.
pub fn backward(
    state: &NetworkState,
    cache: &ForwardCache,
    upstream: ArrayView2<'_, f64>,
) -> Result<Gradients> {
    backward_impl(state, cache, upstream, true)
}

fn backward_impl(
    state: &NetworkState,
    cache: &ForwardCache,
    upstream: ArrayView2<'_, f64>,
    input_grads: bool,
) -> Result<Gradients> {
    let specs = state.layer_specs();
    if cache.version != state.version {
        return Err(Error::StaleCache("parameters changed since the forward pass".into()));
    }
    if cache.layers.len() != specs.len() {
        return Err(Error::StaleCache("cache comes from an eval-mode or foreign pass".into()));
    }
    if upstream.dim() != (cache.batch, state.spec.output_dim()) {
        return Err(Error::Shape(format!(
            "upstream gradient {:?}, expected ({}, {})",
            upstream.dim(),
            cache.batch,
            state.spec.output_dim()
        )));
    }
    let n_branch = state.spec.branch.len();
    let side_dim = state.spec.side_dim;
    let mut grads: Vec<Option<Dense>> = vec![None; specs.len()];
    let mut side_input = None;
    let mut g = upstream.to_owned();
    for i in (0..specs.len()).rev() {
        let lc = &cache.layers[i];
        if let Some(mask) = &lc.mask {
            g *= mask;
        }
        specs[i].activation.backprop(&mut g, &lc.act);
        let weight = lc.input.t().dot(&g);
        let bias = g.sum_axis(Axis(0));
        let need_dx = i > 0 || input_grads;
        let next = if need_dx {
            let dx = g.dot(&state.layers[i].weight.t());
            if i == n_branch && side_dim > 0 {
                if input_grads {
                    side_input = Some(dx.slice(s![.., ..side_dim]).to_owned());
                }
                Some(dx.slice(s![.., side_dim..]).to_owned())
            } else {
                Some(dx)
            }
        } else {
            None
        };
        grads[i] = Some(Dense { weight, bias });
        match next {
            Some(dx) => g = dx,
            None => break,
        }
    }
    Ok(Gradients {
        layers: grads.into_iter().map(|g| g.expect("every layer visited")).collect(),
        main_input: input_grads.then_some(g),
        side_input,
    })
}

/// Mean squared error over all entries and its gradient.
pub fn mse_loss(pred: ArrayView2<'_, f64>, target: ArrayView2<'_, f64>) -> Result<(f64, Array2<f64>)> {
    if pred.dim() != target.dim() {
        return Err(Error::Shape(format!(
            "prediction {:?} vs target {:?}",
            pred.dim(),
            target.dim()
        )));
    }
    let n = pred.len().max(1) as f64;
    let diff = &pred - &target;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;
    Ok((loss, diff * (2.0 / n)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub rng_seed: u64,
    /// Per-epoch multiplicative learning-rate decay; 1 keeps `lr` constant.
    pub lr_decay: f64,
}

impl Default for Hyper {
    fn default() -> Self {
        Self {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 128,
            max_epochs: 100,
            patience: 10,
            rng_seed: 0,
            lr_decay: 1.0,
        }
    }
}

impl Hyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(Error::Config("lr must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("betas must be in [0, 1)".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::Config("lr_decay must be in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Adam update of one tensor at (1-based) step `t`.
pub fn adam_update(
    theta: &mut [f64],
    grad: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    t: u64,
    hyper: &Hyper,
) {
    let (b1, b2) = (hyper.beta1, hyper.beta2);
    let c1 = 1.0 - b1.powi(t as i32);
    let c2 = 1.0 - b2.powi(t as i32);
    for (((p, &g), m), v) in theta.iter_mut().zip(grad).zip(m.iter_mut()).zip(v.iter_mut()) {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= hyper.lr * m_hat / (v_hat.sqrt() + hyper.epsilon);
    }
}

fn slice_of(a: &Array2<f64>) -> &[f64] {
    a.as_slice().expect("standard layout")
}

pub fn adam_step(state: &mut NetworkState, grads: &Gradients, hyper: &Hyper) -> Result<()> {
    if grads.layers.len() != state.layers.len() {
        return Err(Error::Shape("gradient layer count mismatch".into()));
    }
    for (layer, (g, p)) in grads.layers.iter().zip(&state.layers).enumerate() {
        if g.weight.dim() != p.weight.dim() || g.bias.dim() != p.bias.dim() {
            return Err(Error::Shape(format!("gradient shape mismatch in layer {layer}")));
        }
        if let Some(index) = slice_of(&g.weight).iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient {
                layer,
                tensor: "weight",
                index,
            });
        }
        if let Some(index) = g.bias.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient {
                layer,
                tensor: "bias",
                index,
            });
        }
    }
    state.adam.t += 1;
    let t = state.adam.t;
    let AdamState { m, v, .. } = &mut state.adam;
    for (i, p) in state.layers.iter_mut().enumerate() {
        let g = &grads.layers[i];
        adam_update(
            p.weight.as_slice_mut().expect("standard layout"),
            slice_of(&g.weight),
            m[i].weight.as_slice_mut().expect("standard layout"),
            v[i].weight.as_slice_mut().expect("standard layout"),
            t,
            hyper,
        );
        adam_update(
            p.bias.as_slice_mut().expect("standard layout"),
            g.bias.as_slice().expect("standard layout"),
            m[i].bias.as_slice_mut().expect("standard layout"),
            v[i].bias.as_slice_mut().expect("standard layout"),
            t,
            hyper,
        );
    }
    state.touch();
    Ok(())
}

/// Inputs and regression targets, one row per sample.
#[derive(Debug, Clone)]
pub struct TrainSet {
    pub main: Array2<f64>,
    pub side: Option<Array2<f64>>,
    pub target: Array2<f64>,
}

impl TrainSet {
    pub fn len(&self) -> usize {
        self.main.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input(&self) -> NetInput<'_> {
        NetInput::new(self.main.view(), self.side.as_ref().map(|s| s.view()))
    }

    fn check(&self, spec: &NetworkSpec) -> Result<()> {
        check_input(spec, &self.input())?;
        if self.target.dim() != (self.len(), spec.output_dim()) {
            return Err(Error::Shape(format!(
                "targets {:?}, expected ({}, {})",
                self.target.dim(),
                self.len(),
                spec.output_dim()
            )));
        }
        Ok(())
    }

    fn select(&self, rows: &[usize]) -> TrainSet {
        TrainSet {
            main: self.main.select(Axis(0), rows),
            side: self.side.as_ref().map(|s| s.select(Axis(0), rows)),
            target: self.target.select(Axis(0), rows),
        }
    }
}

/// Eval-mode MSE over a whole set, in chunks.
pub fn evaluate_loss(state: &NetworkState, data: &TrainSet) -> Result<f64> {
    const CHUNK: usize = 1024;
    let mut sum = 0.0;
    let mut start = 0;
    while start < data.len() {
        let end = (start + CHUNK).min(data.len());
        let input = NetInput::new(
            data.main.slice(s![start..end, ..]),
            data.side.as_ref().map(|s| s.slice(s![start..end, ..])),
        );
        let pred = predict(state, input)?;
        let (loss, _) = mse_loss(pred.view(), data.target.slice(s![start..end, ..]))?;
        sum += loss * (end - start) as f64;
        start = end;
    }
    Ok(sum / data.len().max(1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation loss.
    pub state: NetworkState,
    pub history: Vec<EpochLoss>,
    pub best_epoch: usize,
}

pub fn train(spec: NetworkSpec, train_set: &TrainSet, val_set: &TrainSet, hyper: &Hyper) -> Result<TrainOutcome> {
    train_with(spec, train_set, val_set, hyper, |_| {})
}

/// Mini-batch Adam training with early stopping on validation loss.
///
/// An empty validation set falls back to the training loss. Initialization
/// and shuffling/dropout draw from separate streams of `hyper.rng_seed`.
pub fn train_with(
    spec: NetworkSpec,
    train_set: &TrainSet,
    val_set: &TrainSet,
    hyper: &Hyper,
    mut on_epoch: impl FnMut(&EpochLoss),
) -> Result<TrainOutcome> {
    hyper.validate()?;
    spec.validate()?;
    if train_set.is_empty() {
        return Err(Error::Empty("training set"));
    }
    train_set.check(&spec)?;
    if !val_set.is_empty() {
        val_set.check(&spec)?;
    }

    let mut init_rng = ChaCha8Rng::seed_from_u64(hyper.rng_seed);
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.rng_seed);
    rng.set_stream(1);
    let mut state = NetworkState::init(spec, &mut init_rng)?;

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history: Vec<EpochLoss> = Vec::new();
    let mut best = (f64::INFINITY, state.clone(), 0usize);
    let mut stale_epochs = 0;
    for epoch in 1..=hyper.max_epochs.max(1) {
        let epoch_hyper = Hyper {
            lr: hyper.lr * hyper.lr_decay.powi(epoch as i32 - 1),
            ..*hyper
        };
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for rows in order.chunks(hyper.batch_size) {
            let batch = train_set.select(rows);
            let (pred, cache) = forward(&state, batch.input(), Mode::Train(&mut rng))?;
            let (loss, grad) = mse_loss(pred.view(), batch.target.view())?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, history });
            }
            loss_sum += loss * rows.len() as f64;
            let grads = backward_impl(&state, &cache, grad.view(), false)?;
            adam_step(&mut state, &grads, &epoch_hyper)?;
        }
        let train_loss = loss_sum / train_set.len() as f64;
        let val_loss = if val_set.is_empty() {
            train_loss
        } else {
            evaluate_loss(&state, val_set)?
        };
        if !val_loss.is_finite() {
            return Err(Error::Diverged { epoch, history });
        }
        let record = EpochLoss {
            epoch,
            train_loss,
            val_loss,
        };
        on_epoch(&record);
        history.push(record);
        if val_loss < best.0 {
            best = (val_loss, state.clone(), epoch);
            stale_epochs = 0;
        } else {
            stale_epochs += 1;
        }
        if stale_epochs >= hyper.patience {
            break;
        }
    }
    Ok(TrainOutcome {
        state: best.1,
        history,
        best_epoch: best.2,
    })
}

const MAGIC: &[u8; 8] = b"BEVNET01";
const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ContainerHeader {
    format_version: u32,
    spec: NetworkSpec,
    adam_t: u64,
    metadata: serde_json::Value,
    tensors: Vec<TensorEntry>,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

fn tensor_list(state: &NetworkState) -> Vec<(String, Vec<usize>, Vec<f64>)> {
    let mut out = Vec::new();
    let groups = [("param", &state.layers), ("adam_m", &state.adam.m), ("adam_v", &state.adam.v)];
    for (prefix, layers) in groups {
        for (i, d) in layers.iter().enumerate() {
            out.push((
                format!("{prefix}.{i}.weight"),
                d.weight.shape().to_vec(),
                d.weight.iter().copied().collect(),
            ));
            out.push((format!("{prefix}.{i}.bias"), vec![d.bias.len()], d.bias.to_vec()));
        }
    }
    out
}

/// Writes a network container.
///
/// Layout: the 8-byte magic `BEVNET01`, a little-endian `u32` header length,
/// a JSON header (format version, layer specs, Adam step, free-form metadata
/// and the ordered tensor list with shapes), then every tensor as row-major
/// little-endian `f64`: for each layer the parameters, then Adam first
/// moments, then Adam second moments.
pub fn write_container(mut w: impl Write, state: &NetworkState, metadata: &serde_json::Value) -> Result<()> {
    let tensors = tensor_list(state);
    let header = ContainerHeader {
        format_version: FORMAT_VERSION,
        spec: state.spec.clone(),
        adam_t: state.adam.t,
        metadata: metadata.clone(),
        tensors: tensors
            .iter()
            .map(|(name, shape, _)| TensorEntry {
                name: name.clone(),
                shape: shape.clone(),
            })
            .collect(),
    };
    let header = serde_json::to_vec(&header)?;
    w.write_all(MAGIC)?;
    w.write_all(&(header.len() as u32).to_le_bytes())?;
    w.write_all(&header)?;
    let mut buf = Vec::new();
    for (_, _, data) in &tensors {
        buf.clear();
        buf.extend(data.iter().flat_map(|v| v.to_le_bytes()));
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

pub fn is_container(bytes: &[u8]) -> bool {
    bytes.starts_with(MAGIC)
}

pub fn read_container(mut r: impl Read) -> Result<(NetworkState, serde_json::Value)> {
    let bad = |m: String| Error::Model(format!("network container: {m}"));
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("bad magic".into()));
    }
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let mut header = vec![0u8; u32::from_le_bytes(len) as usize];
    r.read_exact(&mut header)?;
    let header: ContainerHeader = serde_json::from_slice(&header)?;
    if header.format_version != FORMAT_VERSION {
        return Err(bad(format!("unsupported version {}", header.format_version)));
    }
    let mut state = NetworkState::zeros(header.spec)?;
    state.adam.t = header.adam_t;
    let expected = tensor_list(&state);
    if expected.len() != header.tensors.len() {
        return Err(bad("tensor count does not match the layer specs".into()));
    }
    let mut values = Vec::with_capacity(expected.len());
    for ((name, shape, _), entry) in expected.iter().zip(&header.tensors) {
        if *name != entry.name || *shape != entry.shape {
            return Err(bad(format!("unexpected tensor {} {:?}", entry.name, entry.shape)));
        }
        let n: usize = shape.iter().product();
        let mut raw = vec![0u8; n * 8];
        r.read_exact(&mut raw)?;
        values.push(
            raw.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect::<Vec<f64>>(),
        );
    }
    let mut it = values.into_iter();
    let n_layers = state.layers.len();
    for group in 0..3 {
        for i in 0..n_layers {
            let target = match group {
                0 => &mut state.layers[i],
                1 => &mut state.adam.m[i],
                _ => &mut state.adam.v[i],
            };
            let w = it.next().expect("counted");
            let b = it.next().expect("counted");
            target.weight = Array2::from_shape_vec(target.weight.dim(), w)
                .map_err(|e| bad(e.to_string()))?;
            target.bias = Array1::from(b);
        }
    }
    Ok((state, header.metadata))
}
