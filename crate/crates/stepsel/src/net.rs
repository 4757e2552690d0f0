//! Feed-forward step-selection network with optional categorical embeddings.
//!
//! The network scores each candidate step in a stratum; training minimizes
//! the mean per-stratum softmax negative log-likelihood (plus optional L1/L2
//! penalties) with exact reverse-mode gradients written out by hand. No
//! tensor library: parameters live in one flat `Vec<f64>` with a layout
//! descriptor, which keeps the optimizer, serialization, and the finite
//! difference gradient check trivial.
//!
//! Embeddings attach a learned vector to a categorical identity (the focal
//! individual or the opponent). Two wirings are supported: the vector is
//! appended to the covariates before the first dense layer (default), or it
//! drives a multiplicative per-feature gate `x * (1 + M e)`.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{strata_views, StepRecord, StrataDataset, StratumView};
use crate::stats::log_sum_exp;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid architecture: {0}")]
    InvalidArch(String),
    #[error("record has {got} covariates but the network expects {expected}")]
    FeatureMismatch { expected: usize, got: usize },
    #[error("{target} id {id} is outside the embedding vocabulary of size {vocab}")]
    IdOutOfVocab { target: &'static str, id: usize, vocab: usize },
    #[error("record is missing the {0} id required by the embedding layer")]
    MissingId(&'static str),
    #[error("records passed to score_candidates span more than one stratum")]
    MixedStratum,
    #[error("network has no embedding layer")]
    NoEmbedding,
    #[error("case index {case} out of range for {n} candidates")]
    CaseOutOfRange { case: usize, n: usize },
    #[error("epsilon must lie in (0, 1e-3], got {0}")]
    InvalidEpsilon(f64),
    #[error("training diverged: loss became non-finite at epoch {epoch}; try a smaller learning rate than {lr}")]
    NonFiniteLoss { epoch: usize, lr: f64 },
    #[error("dataset error: {0}")]
    Data(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Selu,
    Tanh,
}

const SELU_LAMBDA: f64 = 1.0507009873554805;
const SELU_ALPHA: f64 = 1.6732632423543772;

impl Activation {
    #[inline]
    fn eval(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::Selu => {
                if x > 0.0 {
                    SELU_LAMBDA * x
                } else {
                    SELU_LAMBDA * SELU_ALPHA * (x.exp() - 1.0)
                }
            }
            Activation::Tanh => x.tanh(),
        }
    }

    #[inline]
    fn grad(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Selu => {
                if x > 0.0 {
                    SELU_LAMBDA
                } else {
                    SELU_LAMBDA * SELU_ALPHA * x.exp()
                }
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingTarget {
    Individual,
    Opponent,
}

impl EmbeddingTarget {
    fn label(self) -> &'static str {
        match self {
            EmbeddingTarget::Individual => "individual",
            EmbeddingTarget::Opponent => "opponent",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingWiring {
    /// Embedding vector appended to the covariates before the first layer.
    ConcatToInput,
    /// Covariates gated elementwise by `1 + M e` with a learned matrix M.
    PerFeatureModulation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingSpec {
    pub vocab_size: usize,
    pub dim: usize,
    pub target: EmbeddingTarget,
    pub wiring: EmbeddingWiring,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchSpec {
    pub n_features: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    #[serde(default)]
    pub embeddings: Option<EmbeddingSpec>,
    #[serde(default)]
    pub dropout_rate: f64,
    #[serde(default)]
    pub l2: f64,
    #[serde(default)]
    pub l1: f64,
}

impl ArchSpec {
    /// Plain multilayer perceptron over the covariates.
    pub fn mlp(n_features: usize, hidden: Vec<usize>) -> Self {
        ArchSpec {
            n_features,
            hidden,
            activation: Activation::Relu,
            embeddings: None,
            dropout_rate: 0.0,
            l2: 0.0,
            l1: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if self.n_features == 0 {
            return Err(NetError::InvalidArch("n_features must be >= 1".into()));
        }
        if self.hidden.iter().any(|&w| w == 0) {
            return Err(NetError::InvalidArch("hidden layer widths must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(NetError::InvalidArch(format!(
                "dropout_rate must lie in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        if self.l2 < 0.0 || self.l1 < 0.0 {
            return Err(NetError::InvalidArch("l1/l2 penalties must be >= 0".into()));
        }
        if let Some(e) = &self.embeddings {
            if e.vocab_size == 0 || e.dim == 0 {
                return Err(NetError::InvalidArch("embedding vocab and dim must be >= 1".into()));
            }
        }
        Ok(())
    }
}

/// Offsets of one dense layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy)]
struct LayerShape {
    n_in: usize,
    n_out: usize,
    w_off: usize,
    b_off: usize,
}

/// Resolved parameter layout for an architecture.
#[derive(Debug, Clone)]
struct Layout {
    input_dim: usize,
    layers: Vec<LayerShape>,
    /// (vocab, dim, offset) of the embedding table.
    emb: Option<(usize, usize, usize)>,
    /// Offset of the n_features x dim modulation matrix.
    modulation: Option<usize>,
    n_params: usize,
}

impl Layout {
    fn of(arch: &ArchSpec) -> Layout {
        let concat_dim = match &arch.embeddings {
            Some(e) if e.wiring == EmbeddingWiring::ConcatToInput => e.dim,
            _ => 0,
        };
        let input_dim = arch.n_features + concat_dim;
        let mut dims = vec![input_dim];
        dims.extend(arch.hidden.iter().copied());
        dims.push(1);
        let mut layers = Vec::with_capacity(dims.len() - 1);
        let mut off = 0;
        for w in dims.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            layers.push(LayerShape { n_in, n_out, w_off: off, b_off: off + n_in * n_out });
            off += n_in * n_out + n_out;
        }
        let emb = arch.embeddings.as_ref().map(|e| {
            let o = off;
            off += e.vocab_size * e.dim;
            (e.vocab_size, e.dim, o)
        });
        let modulation = match &arch.embeddings {
            Some(e) if e.wiring == EmbeddingWiring::PerFeatureModulation => {
                let o = off;
                off += arch.n_features * e.dim;
                Some(o)
            }
            _ => None,
        };
        Layout { input_dim, layers, emb, modulation, n_params: off }
    }
}

/// A step-selection network: architecture plus flat parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsfNetwork {
    pub arch: ArchSpec,
    params: Vec<f64>,
    pub trained: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_strata: usize,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    #[serde(default)]
    pub early_stop_patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 150,
            learning_rate: 0.01,
            batch_strata: 64,
            optimizer: OptimizerKind::Adam,
            seed: 0,
            early_stop_patience: None,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), NetError> {
        if self.epochs < 1 {
            return Err(NetError::InvalidArch("epochs must be >= 1".into()));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(NetError::InvalidArch("learning_rate must be finite and >= 0".into()));
        }
        if self.batch_strata < 1 {
            return Err(NetError::InvalidArch("batch_strata must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-epoch mean conditional NLL observed during the training pass, plus an
/// optional validation series when early stopping is enabled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitTrace {
    pub train_nll: Vec<f64>,
    pub val_nll: Option<Vec<f64>>,
    pub warnings: Vec<String>,
}

/// Initializes a network deterministically from a seed.
///
/// Dense weights use He-uniform bounds for relu and Glorot-uniform for
/// tanh/selu; biases start at zero, embeddings at N(0, 0.1), and the
/// modulation matrix (if any) at zero so the gate starts as the identity.
pub fn build_network(arch: &ArchSpec, seed: u64) -> Result<SsfNetwork, NetError> {
    arch.validate()?;
    let layout = Layout::of(arch);
    let mut params = vec![0.0; layout.n_params];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for layer in &layout.layers {
        let limit = match arch.activation {
            Activation::Relu => (6.0 / layer.n_in as f64).sqrt(),
            Activation::Selu | Activation::Tanh => {
                (6.0 / (layer.n_in + layer.n_out) as f64).sqrt()
            }
        };
        for w in &mut params[layer.w_off..layer.w_off + layer.n_in * layer.n_out] {
            *w = rng.gen_range(-limit..limit);
        }
    }
    if let Some((vocab, dim, off)) = layout.emb {
        let normal = rand_distr::Normal::new(0.0, 0.1).expect("valid normal");
        for w in &mut params[off..off + vocab * dim] {
            *w = rand_distr::Distribution::sample(&normal, &mut rng);
        }
    }
    Ok(SsfNetwork { arch: arch.clone(), params, trained: false })
}

impl SsfNetwork {
    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Replaces the affine coefficients of a `hidden=[]` network; used by
    /// tests and by the GLM-equivalence checks.
    pub fn set_params(&mut self, params: Vec<f64>) -> Result<(), NetError> {
        if params.len() != self.params.len() {
            return Err(NetError::InvalidArch(format!(
                "expected {} parameters, got {}",
                self.params.len(),
                params.len()
            )));
        }
        self.params = params;
        Ok(())
    }

    fn layout(&self) -> Layout {
        Layout::of(&self.arch)
    }

    /// Embedding id for a record under this architecture, if the layer exists.
    fn embedding_id(&self, individual_id: Option<usize>, opponent_id: Option<usize>) -> Result<Option<usize>, NetError> {
        match &self.arch.embeddings {
            None => Ok(None),
            Some(e) => {
                let id = match e.target {
                    EmbeddingTarget::Individual => individual_id,
                    EmbeddingTarget::Opponent => opponent_id,
                };
                let id = id.ok_or(NetError::MissingId(e.target.label()))?;
                if id >= e.vocab_size {
                    return Err(NetError::IdOutOfVocab { target: e.target.label(), id, vocab: e.vocab_size });
                }
                Ok(Some(id))
            }
        }
    }

    /// Deterministic (inference-mode) score for one covariate row.
    pub fn score_row(
        &self,
        covariates: &[f64],
        individual_id: Option<usize>,
        opponent_id: Option<usize>,
    ) -> Result<f64, NetError> {
        if covariates.len() != self.arch.n_features {
            return Err(NetError::FeatureMismatch { expected: self.arch.n_features, got: covariates.len() });
        }
        let id = self.embedding_id(individual_id, opponent_id)?;
        let layout = self.layout();
        let mut eval = Evaluator::new(&layout, self.arch.activation);
        Ok(eval.forward(&self.params, covariates, id, None))
    }

    /// Row of the embedding table for `id`.
    pub fn embedding_lookup(&self, id: usize) -> Result<Vec<f64>, NetError> {
        let layout = self.layout();
        let (vocab, dim, off) = layout.emb.ok_or(NetError::NoEmbedding)?;
        let e = self.arch.embeddings.as_ref().expect("layout implies spec");
        if id >= vocab {
            return Err(NetError::IdOutOfVocab { target: e.target.label(), id, vocab });
        }
        Ok(self.params[off + id * dim..off + (id + 1) * dim].to_vec())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network is serializable")
    }

    pub fn from_json(text: &str) -> Result<SsfNetwork, NetError> {
        let net: SsfNetwork =
            serde_json::from_str(text).map_err(|e| NetError::InvalidArch(format!("bad model JSON: {e}")))?;
        net.arch.validate()?;
        let expected = Layout::of(&net.arch).n_params;
        if net.params.len() != expected {
            return Err(NetError::InvalidArch(format!(
                "parameter vector has length {}, architecture requires {}",
                net.params.len(),
                expected
            )));
        }
        Ok(net)
    }
}

/// Scores every candidate of one stratum in record order.
pub fn score_candidates(net: &SsfNetwork, records: &[StepRecord]) -> Result<Vec<f64>, NetError> {
    if records.is_empty() {
        return Ok(Vec::new());
    }
    let sid = records[0].stratum_id;
    if records.iter().any(|r| r.stratum_id != sid) {
        return Err(NetError::MixedStratum);
    }
    records
        .iter()
        .map(|r| net.score_row(&r.covariates, r.individual_id, r.opponent_id))
        .collect()
}

/// Conditional softmax negative log-likelihood of one stratum.
pub fn stratum_nll(scores: &[f64], case_index: usize) -> Result<f64, NetError> {
    if case_index >= scores.len() {
        return Err(NetError::CaseOutOfRange { case: case_index, n: scores.len() });
    }
    Ok(log_sum_exp(scores) - scores[case_index])
}

// --- forward / backward core ------------------------------------------------

/// Scratch buffers for forward and backward passes over one candidate.
struct Evaluator<'a> {
    layout: &'a Layout,
    activation: Activation,
    input: Vec<f64>,
    /// Pre-activations per layer (the output layer's single unit last).
    pre: Vec<Vec<f64>>,
    /// Post-activations per layer; `act[l]` feeds layer l+1.
    act: Vec<Vec<f64>>,
    /// Inverted-dropout masks per hidden layer (training only).
    masks: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
}

impl<'a> Evaluator<'a> {
    fn new(layout: &'a Layout, activation: Activation) -> Self {
        let pre: Vec<Vec<f64>> = layout.layers.iter().map(|l| vec![0.0; l.n_out]).collect();
        let act = pre.clone();
        let masks = pre.clone();
        let delta = pre.clone();
        Evaluator { layout, activation, input: vec![0.0; layout.input_dim], pre, act, masks, delta }
    }

    /// Assembles the network input from covariates and the embedding row.
    fn assemble(&mut self, params: &[f64], covariates: &[f64], id: Option<usize>) {
        let n = covariates.len();
        match (self.layout.emb, self.layout.modulation, id) {
            (Some((_, dim, off)), None, Some(id)) => {
                self.input[..n].copy_from_slice(covariates);
                self.input[n..n + dim].copy_from_slice(&params[off + id * dim..off + (id + 1) * dim]);
            }
            (Some((_, dim, eoff)), Some(moff), Some(id)) => {
                let e = &params[eoff + id * dim..eoff + (id + 1) * dim];
                for i in 0..n {
                    let mrow = &params[moff + i * dim..moff + (i + 1) * dim];
                    let mut gate = 1.0;
                    for j in 0..dim {
                        gate += mrow[j] * e[j];
                    }
                    self.input[i] = covariates[i] * gate;
                }
            }
            _ => self.input[..n].copy_from_slice(covariates),
        }
    }

    /// Forward pass; with `dropout` set, draws inverted-dropout masks for the
    /// hidden layers and stores them for the matching backward pass.
    fn forward(
        &mut self,
        params: &[f64],
        covariates: &[f64],
        id: Option<usize>,
        dropout: Option<(&mut ChaCha8Rng, f64)>,
    ) -> f64 {
        self.assemble(params, covariates, id);
        let n_layers = self.layout.layers.len();
        let mut drop = dropout;
        for l in 0..n_layers {
            let shape = self.layout.layers[l];
            // Borrow the input of this layer without aliasing the output.
            let (input_slice, pre_l): (&[f64], &mut [f64]) = if l == 0 {
                (&self.input, &mut self.pre[l])
            } else {
                let (before, rest) = self.act.split_at_mut(l);
                let _ = rest;
                (&before[l - 1], &mut self.pre[l])
            };
            for o in 0..shape.n_out {
                let row = &params[shape.w_off + o * shape.n_in..shape.w_off + (o + 1) * shape.n_in];
                let mut acc = params[shape.b_off + o];
                for i in 0..shape.n_in {
                    acc += row[i] * input_slice[i];
                }
                pre_l[o] = acc;
            }
            let is_output = l == n_layers - 1;
            if is_output {
                self.act[l][0] = self.pre[l][0];
            } else {
                for o in 0..shape.n_out {
                    self.act[l][o] = self.activation.eval(self.pre[l][o]);
                }
                if let Some((rng, rate)) = drop.as_mut() {
                    if *rate > 0.0 {
                        let keep = 1.0 - *rate;
                        for o in 0..shape.n_out {
                            let m = if rng.gen_range(0.0..1.0) < keep { 1.0 / keep } else { 0.0 };
                            self.masks[l][o] = m;
                            self.act[l][o] *= m;
                        }
                    } else {
                        self.masks[l].fill(1.0);
                    }
                } else {
                    self.masks[l].fill(1.0);
                }
            }
        }
        self.act[n_layers - 1][0]
    }

    /// Accumulates d(loss)/d(params) into `grad` for a cached forward pass,
    /// where `dscore` is d(loss)/d(score of this candidate).
    fn backward(
        &mut self,
        params: &[f64],
        grad: &mut [f64],
        covariates: &[f64],
        id: Option<usize>,
        dscore: f64,
    ) {
        let n_layers = self.layout.layers.len();
        self.delta[n_layers - 1][0] = dscore;
        for l in (0..n_layers).rev() {
            let shape = self.layout.layers[l];
            // Gradients of weights and biases.
            for o in 0..shape.n_out {
                let d = self.delta[l][o];
                if d == 0.0 {
                    continue;
                }
                grad[shape.b_off + o] += d;
                let grow = &mut grad[shape.w_off + o * shape.n_in..shape.w_off + (o + 1) * shape.n_in];
                if l == 0 {
                    for i in 0..shape.n_in {
                        grow[i] += d * self.input[i];
                    }
                } else {
                    let a = &self.act[l - 1];
                    for i in 0..shape.n_in {
                        grow[i] += d * a[i];
                    }
                }
            }
            // Delta of the layer below.
            if l > 0 {
                let below = self.layout.layers[l - 1];
                let (dbelow, dcur) = {
                    let (a, b) = self.delta.split_at_mut(l);
                    (&mut a[l - 1], &b[0])
                };
                for i in 0..below.n_out {
                    let mut acc = 0.0;
                    for o in 0..shape.n_out {
                        acc += dcur[o] * params[shape.w_off + o * shape.n_in + i];
                    }
                    // Chain through dropout mask and activation derivative.
                    dbelow[i] = acc * self.masks[l - 1][i] * self.activation.grad(self.pre[l - 1][i]);
                }
            } else {
                // Gradient with respect to the assembled input, for embeddings.
                match (self.layout.emb, self.layout.modulation, id) {
                    (Some((_, dim, eoff)), None, Some(id)) => {
                        let n = covariates.len();
                        for j in 0..dim {
                            let mut acc = 0.0;
                            for o in 0..shape.n_out {
                                acc += self.delta[0][o] * params[shape.w_off + o * shape.n_in + n + j];
                            }
                            grad[eoff + id * dim + j] += acc;
                        }
                    }
                    (Some((_, dim, eoff)), Some(moff), Some(id)) => {
                        let n = covariates.len();
                        let e = &params[eoff + id * dim..eoff + (id + 1) * dim];
                        for i in 0..n {
                            let mut dinput = 0.0;
                            for o in 0..shape.n_out {
                                dinput += self.delta[0][o] * params[shape.w_off + o * shape.n_in + i];
                            }
                            let dgate = dinput * covariates[i];
                            for j in 0..dim {
                                grad[moff + i * dim + j] += dgate * e[j];
                                grad[eoff + id * dim + j] += dgate * params[moff + i * dim + j];
                            }
                        }
                    }
                    _ => {}
                }
            }
        }
    }
}

// --- training ----------------------------------------------------------------

/// One stratum flattened for the training loop.
struct CompactStratum {
    /// Row-major covariates, one row per candidate.
    cov: Vec<f64>,
    ids: Vec<Option<usize>>,
    case: usize,
    k: usize,
}

fn compact(
    net: &SsfNetwork,
    data: &StrataDataset,
    views: &[StratumView],
) -> Result<Vec<CompactStratum>, NetError> {
    let n_features = net.arch.n_features;
    views
        .iter()
        .map(|v| {
            let k = v.record_idxs.len();
            let mut cov = Vec::with_capacity(k * n_features);
            let mut ids = Vec::with_capacity(k);
            for &ri in &v.record_idxs {
                let r = &data.records[ri];
                if r.covariates.len() != n_features {
                    return Err(NetError::FeatureMismatch { expected: n_features, got: r.covariates.len() });
                }
                cov.extend_from_slice(&r.covariates);
                ids.push(net.embedding_id(r.individual_id, r.opponent_id)?);
            }
            Ok(CompactStratum { cov, ids, case: v.case_pos, k })
        })
        .collect()
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

/// Mean stratum NLL over a set of strata at fixed parameters (no dropout).
fn mean_nll(
    layout: &Layout,
    activation: Activation,
    n_features: usize,
    params: &[f64],
    strata: &[CompactStratum],
    idxs: &[usize],
) -> f64 {
    if idxs.is_empty() {
        return 0.0;
    }
    let mut eval = Evaluator::new(layout, activation);
    let mut total = 0.0;
    let mut scores = Vec::new();
    for &si in idxs {
        let s = &strata[si];
        scores.clear();
        for c in 0..s.k {
            let cov = &s.cov[c * n_features..(c + 1) * n_features];
            scores.push(eval.forward(params, cov, s.ids[c], None));
        }
        total += log_sum_exp(&scores) - scores[s.case];
    }
    total / idxs.len() as f64
}

/// Trains a copy of the network under the conditional-softmax likelihood.
///
/// The loss is `mean_strata NLL + l2*||theta||^2 + l1*||theta||_1`; strata are
/// shuffled each epoch with the config seed and consumed in minibatches. The
/// returned trace holds the running training NLL per epoch (computed during
/// the pass, before each update).
pub fn train(
    net: &SsfNetwork,
    data: &StrataDataset,
    cfg: &TrainConfig,
) -> Result<(SsfNetwork, FitTrace), NetError> {
    cfg.validate()?;
    net.arch.validate()?;
    let mut warnings = Vec::new();
    if !data.centered {
        warnings.push("dataset is not centered; centering covariates is recommended before training".to_string());
    }
    let views = strata_views(data).map_err(|e| NetError::Data(e.to_string()))?;
    let strata = compact(net, data, &views)?;
    let n_strata = strata.len();
    let layout = net.layout();
    let activation = net.arch.activation;
    let n_features = net.arch.n_features;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n_strata).collect();

    // Optional validation split for early stopping: a seeded 10% of strata.
    let (train_idx, val_idx): (Vec<usize>, Vec<usize>) = if cfg.early_stop_patience.is_some() {
        let mut shuffled = order.clone();
        shuffled.shuffle(&mut rng);
        let n_val = (n_strata / 10).max(1).min(n_strata - 1);
        let val = shuffled[..n_val].to_vec();
        let tr = shuffled[n_val..].to_vec();
        (tr, val)
    } else {
        (order.clone(), Vec::new())
    };
    order = train_idx;

    let mut params = net.params.clone();
    let mut grad = vec![0.0; params.len()];
    let mut adam = AdamState { m: vec![0.0; params.len()], v: vec![0.0; params.len()], t: 0 };

    let mut train_trace = Vec::with_capacity(cfg.epochs);
    let mut val_trace: Option<Vec<f64>> = cfg.early_stop_patience.map(|_| Vec::new());
    let mut best_val = f64::INFINITY;
    let mut best_params: Option<Vec<f64>> = None;
    let mut since_best = 0usize;

    let batch = cfg.batch_strata.min(order.len().max(1));
    // One cached forward pass per candidate, so backward can run after the
    // whole stratum's softmax is known. Arenas are reused across strata.
    let max_k = strata.iter().map(|s| s.k).max().unwrap_or(0);
    let mut arenas: Vec<Evaluator> = (0..max_k).map(|_| Evaluator::new(&layout, activation)).collect();
    let mut scores = Vec::new();

    'epochs: for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_nll_sum = 0.0;
        let mut epoch_count = 0usize;
        for chunk in order.chunks(batch) {
            grad.fill(0.0);
            let mut batch_nll = 0.0;
            let inv_batch = 1.0 / chunk.len() as f64;
            for &si in chunk {
                let s = &strata[si];
                scores.clear();
                for c in 0..s.k {
                    let cov = &s.cov[c * n_features..(c + 1) * n_features];
                    let sc = if net.arch.dropout_rate > 0.0 {
                        arenas[c].forward(&params, cov, s.ids[c], Some((&mut rng, net.arch.dropout_rate)))
                    } else {
                        arenas[c].forward(&params, cov, s.ids[c], None)
                    };
                    scores.push(sc);
                }
                let lse = log_sum_exp(&scores);
                batch_nll += lse - scores[s.case];
                for c in 0..s.k {
                    let p = (scores[c] - lse).exp();
                    let dscore = (p - if c == s.case { 1.0 } else { 0.0 }) * inv_batch;
                    let cov = &s.cov[c * n_features..(c + 1) * n_features];
                    arenas[c].backward(&params, &mut grad, cov, s.ids[c], dscore);
                }
            }
            let batch_mean = batch_nll * inv_batch;
            if !batch_mean.is_finite() {
                return Err(NetError::NonFiniteLoss { epoch, lr: cfg.learning_rate });
            }
            epoch_nll_sum += batch_nll;
            epoch_count += chunk.len();

            // Penalty gradients on the full objective.
            if net.arch.l2 > 0.0 || net.arch.l1 > 0.0 {
                for (g, p) in grad.iter_mut().zip(&params) {
                    *g += 2.0 * net.arch.l2 * p + net.arch.l1 * p.signum();
                }
            }

            match cfg.optimizer {
                OptimizerKind::Sgd => {
                    for (p, g) in params.iter_mut().zip(&grad) {
                        *p -= cfg.learning_rate * g;
                    }
                }
                OptimizerKind::Adam => {
                    adam.t += 1;
                    let b1: f64 = 0.9;
                    let b2: f64 = 0.999;
                    let eps = 1e-8;
                    let bc1 = 1.0 - b1.powi(adam.t as i32);
                    let bc2 = 1.0 - b2.powi(adam.t as i32);
                    for i in 0..params.len() {
                        adam.m[i] = b1 * adam.m[i] + (1.0 - b1) * grad[i];
                        adam.v[i] = b2 * adam.v[i] + (1.0 - b2) * grad[i] * grad[i];
                        let mh = adam.m[i] / bc1;
                        let vh = adam.v[i] / bc2;
                        params[i] -= cfg.learning_rate * mh / (vh.sqrt() + eps);
                    }
                }
            }
        }
        let epoch_mean = if epoch_count > 0 { epoch_nll_sum / epoch_count as f64 } else { 0.0 };
        if !epoch_mean.is_finite() {
            return Err(NetError::NonFiniteLoss { epoch, lr: cfg.learning_rate });
        }
        train_trace.push(epoch_mean);

        if let Some(patience) = cfg.early_stop_patience {
            let v = mean_nll(&layout, activation, n_features, &params, &strata, &val_idx);
            val_trace.as_mut().expect("validation trace allocated").push(v);
            if v + 1e-12 < best_val {
                best_val = v;
                best_params = Some(params.clone());
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= patience {
                    break 'epochs;
                }
            }
        }
    }

    if let Some(best) = best_params {
        params = best;
    }
    let mut out = net.clone();
    out.params = params;
    out.trained = true;
    Ok((out, FitTrace { train_nll: train_trace, val_nll: val_trace, warnings }))
}

/// Compares the analytic gradient of one stratum's NLL against central finite
/// differences over every parameter; returns the maximum relative error
/// `|ga - gfd| / max(1e-4, |ga| + |gfd|)` (dropout disabled).
pub fn gradient_check(
    net: &SsfNetwork,
    data: &StrataDataset,
    view: &StratumView,
    epsilon: f64,
) -> Result<f64, NetError> {
    if !(epsilon > 0.0 && epsilon <= 1e-3) {
        return Err(NetError::InvalidEpsilon(epsilon));
    }
    let layout = net.layout();
    let records: Vec<StepRecord> = view.record_idxs.iter().map(|&ri| data.records[ri].clone()).collect();
    let n_features = net.arch.n_features;
    let ids: Vec<Option<usize>> = records
        .iter()
        .map(|r| net.embedding_id(r.individual_id, r.opponent_id))
        .collect::<Result<_, _>>()?;

    // Analytic gradient.
    let mut eval = Evaluator::new(&layout, net.arch.activation);
    let mut arenas: Vec<Evaluator> = Vec::new();
    let mut scores = Vec::new();
    for (r, id) in records.iter().zip(&ids) {
        if r.covariates.len() != n_features {
            return Err(NetError::FeatureMismatch { expected: n_features, got: r.covariates.len() });
        }
        let mut a = Evaluator::new(&layout, net.arch.activation);
        scores.push(a.forward(&net.params, &r.covariates, *id, None));
        arenas.push(a);
    }
    let lse = log_sum_exp(&scores);
    let mut grad = vec![0.0; net.params.len()];
    for (c, (r, id)) in records.iter().zip(&ids).enumerate() {
        let p = (scores[c] - lse).exp();
        let dscore = p - if c == view.case_pos { 1.0 } else { 0.0 };
        arenas[c].backward(&net.params, &mut grad, &r.covariates, *id, dscore);
    }

    // Finite differences.
    let nll_at = |params: &[f64], eval: &mut Evaluator| -> f64 {
        let mut scores = Vec::with_capacity(records.len());
        for (r, id) in records.iter().zip(&ids) {
            scores.push(eval.forward(params, &r.covariates, *id, None));
        }
        log_sum_exp(&scores) - scores[view.case_pos]
    };
    let mut params = net.params.clone();
    let mut max_rel = 0.0_f64;
    for i in 0..params.len() {
        let orig = params[i];
        params[i] = orig + epsilon;
        let up = nll_at(&params, &mut eval);
        params[i] = orig - epsilon;
        let down = nll_at(&params, &mut eval);
        params[i] = orig;
        let fd = (up - down) / (2.0 * epsilon);
        let rel = (grad[i] - fd).abs() / (grad[i].abs() + fd.abs()).max(1e-4);
        max_rel = max_rel.max(rel);
    }
    Ok(max_rel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{strata_views, StrataDataset};
    use crate::sim::{simulate_selection, SelectionSpec};

    fn tiny_dataset(n_strata: usize, n_controls: usize, n_features: usize, seed: u64) -> StrataDataset {
        let spec = SelectionSpec::linear(vec![1.0; n_features], n_strata, n_controls);
        simulate_selection(&spec, seed).unwrap()
    }

    #[test]
    fn parameter_count_matches_shapes() {
        let arch = ArchSpec::mlp(9, vec![32, 32]);
        let net = build_network(&arch, 0).unwrap();
        assert_eq!(net.n_params(), 9 * 32 + 32 + 32 * 32 + 32 + 32 + 1);
        assert_eq!(net.n_params(), 1409);
    }

    #[test]
    fn same_seed_same_weights() {
        let arch = ArchSpec::mlp(3, vec![8, 4]);
        let a = build_network(&arch, 7).unwrap();
        let b = build_network(&arch, 7).unwrap();
        assert_eq!(a, b);
        let c = build_network(&arch, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn empty_hidden_is_affine() {
        let arch = ArchSpec::mlp(2, vec![]);
        let mut net = build_network(&arch, 0).unwrap();
        net.set_params(vec![1.0, -1.0, 0.0]).unwrap(); // w = (1, -1), b = 0
        let s = net.score_row(&[2.0, 3.0], None, None).unwrap();
        assert!((s - (-1.0)).abs() < 1e-15);
        // Affine in the features: scaling inputs scales the score.
        let s2 = net.score_row(&[4.0, 6.0], None, None).unwrap();
        assert!((s2 - (-2.0)).abs() < 1e-15);
    }

    #[test]
    fn zero_network_scores_zero() {
        let arch = ArchSpec::mlp(3, vec![5]);
        let mut net = build_network(&arch, 1).unwrap();
        net.set_params(vec![0.0; net.n_params()]).unwrap();
        let s = net.score_row(&[0.3, -0.4, 0.9], None, None).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn forward_matches_independent_reimplementation() {
        // Plain nested-loop reimplementation of the forward pass.
        let arch = ArchSpec { activation: Activation::Tanh, ..ArchSpec::mlp(4, vec![6, 3]) };
        let net = build_network(&arch, 42).unwrap();
        let p = net.params();
        let dims = [4usize, 6, 3, 1];
        let reference = |x: &[f64]| -> f64 {
            let mut input = x.to_vec();
            let mut off = 0;
            for l in 0..3 {
                let (n_in, n_out) = (dims[l], dims[l + 1]);
                let w = &p[off..off + n_in * n_out];
                let b = &p[off + n_in * n_out..off + n_in * n_out + n_out];
                off += n_in * n_out + n_out;
                let mut out = vec![0.0; n_out];
                for o in 0..n_out {
                    let mut acc = b[o];
                    for i in 0..n_in {
                        acc += w[o * n_in + i] * input[i];
                    }
                    out[o] = if l < 2 { acc.tanh() } else { acc };
                }
                input = out;
            }
            input[0]
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..6 {
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let got = net.score_row(&x, None, None).unwrap();
            let want = reference(&x);
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn stratum_nll_matches_hand_values() {
        assert!((stratum_nll(&[1.0, 1.0, 1.0, 1.0], 2).unwrap() - 4.0_f64.ln()).abs() < 1e-12);
        assert!((stratum_nll(&[0.0, 0.0, 0.0, 0.0], 0).unwrap() - 1.3862943611198906).abs() < 1e-12);
        let nll = stratum_nll(&[10.0, 0.0], 0).unwrap();
        assert!((nll - (1.0 + (-10.0_f64).exp()).ln()).abs() < 1e-15);
        assert!((nll - 4.54e-5).abs() < 1e-7);
        let nll2 = stratum_nll(&[0.0, 10.0], 0).unwrap();
        assert!((nll2 - 10.0000454).abs() < 1e-6);
        assert!(stratum_nll(&[0.0], 1).is_err());
    }

    #[test]
    fn stratum_nll_is_shift_invariant() {
        let scores = [0.3, -1.0, 2.0, 0.0];
        let shifted: Vec<f64> = scores.iter().map(|s| s + 123.456).collect();
        let a = stratum_nll(&scores, 1).unwrap();
        let b = stratum_nll(&shifted, 1).unwrap();
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn gradient_check_passes_across_architecture_matrix() {
        let d = tiny_dataset(4, 5, 3, 9);
        let views = strata_views(&d).unwrap();
        let archs = vec![
            ArchSpec::mlp(3, vec![]),
            ArchSpec::mlp(3, vec![8]),
            ArchSpec { activation: Activation::Tanh, ..ArchSpec::mlp(3, vec![8, 4]) },
            ArchSpec { activation: Activation::Selu, ..ArchSpec::mlp(3, vec![8, 4]) },
        ];
        for arch in archs {
            let net = build_network(&arch, 11).unwrap();
            let err = gradient_check(&net, &d, &views[0], 1e-5).unwrap();
            assert!(err < 1e-5, "arch {:?}: max rel err {err}", arch.hidden);
        }
    }

    #[test]
    fn gradient_check_with_embeddings_both_wirings() {
        let mut d = tiny_dataset(4, 5, 3, 10);
        for r in &mut d.records {
            r.individual_id = Some((r.stratum_id % 3) as usize);
        }
        let d = StrataDataset::new(d.records, d.feature_names);
        let views = strata_views(&d).unwrap();
        for wiring in [EmbeddingWiring::ConcatToInput, EmbeddingWiring::PerFeatureModulation] {
            let arch = ArchSpec {
                embeddings: Some(EmbeddingSpec {
                    vocab_size: 3,
                    dim: 2,
                    target: EmbeddingTarget::Individual,
                    wiring,
                }),
                ..ArchSpec::mlp(3, vec![6])
            };
            let mut net = build_network(&arch, 12).unwrap();
            // Perturb the modulation matrix away from zero so its gradient path is exercised.
            let mut p = net.params().to_vec();
            for v in p.iter_mut() {
                if *v == 0.0 {
                    *v = 0.05;
                }
            }
            net.set_params(p).unwrap();
            let err = gradient_check(&net, &d, &views[1], 1e-5).unwrap();
            assert!(err < 1e-5, "wiring {wiring:?}: max rel err {err}");
        }
    }

    #[test]
    fn gradient_check_at_zero_weights() {
        // All-zero weights tie every score; the finite-difference and analytic
        // gradients must still agree (first-layer bias gradients are zero
        // because downstream weights vanish).
        let d = tiny_dataset(2, 4, 2, 13);
        let views = strata_views(&d).unwrap();
        let arch = ArchSpec::mlp(2, vec![4]);
        let mut net = build_network(&arch, 14).unwrap();
        net.set_params(vec![0.0; net.n_params()]).unwrap();
        let err = gradient_check(&net, &d, &views[0], 1e-5).unwrap();
        assert!(err < 1e-5, "max rel err {err}");
    }

    #[test]
    fn gradient_check_rejects_bad_epsilon() {
        let d = tiny_dataset(2, 3, 2, 15);
        let views = strata_views(&d).unwrap();
        let net = build_network(&ArchSpec::mlp(2, vec![4]), 16).unwrap();
        assert!(matches!(gradient_check(&net, &d, &views[0], 0.0), Err(NetError::InvalidEpsilon(_))));
        assert!(matches!(gradient_check(&net, &d, &views[0], 0.01), Err(NetError::InvalidEpsilon(_))));
    }

    #[test]
    fn score_candidates_validates_inputs() {
        let d = tiny_dataset(2, 3, 2, 17);
        let net = build_network(&ArchSpec::mlp(2, vec![4]), 18).unwrap();
        let views = strata_views(&d).unwrap();
        let recs: Vec<StepRecord> = views[0].record_idxs.iter().map(|&i| d.records[i].clone()).collect();
        let scores = score_candidates(&net, &recs).unwrap();
        assert_eq!(scores.len(), 4);
        assert!(scores.iter().all(|s| s.is_finite()));
        // Mixed strata rejected.
        let mixed: Vec<StepRecord> = d.records[0..5].to_vec();
        assert!(matches!(score_candidates(&net, &mixed), Err(NetError::MixedStratum)));
        // Feature mismatch rejected.
        let net3 = build_network(&ArchSpec::mlp(3, vec![4]), 19).unwrap();
        assert!(matches!(score_candidates(&net3, &recs), Err(NetError::FeatureMismatch { .. })));
    }

    #[test]
    fn embedding_lookup_semantics() {
        let arch = ArchSpec {
            embeddings: Some(EmbeddingSpec {
                vocab_size: 5,
                dim: 2,
                target: EmbeddingTarget::Individual,
                wiring: EmbeddingWiring::ConcatToInput,
            }),
            ..ArchSpec::mlp(2, vec![4])
        };
        let net = build_network(&arch, 20).unwrap();
        let a = net.embedding_lookup(0).unwrap();
        let b = net.embedding_lookup(1).unwrap();
        assert_eq!(a.len(), 2);
        assert_ne!(a, b);
        // Rows match the flat tail of the parameter vector.
        let emb_off = net.n_params() - 5 * 2;
        assert_eq!(&net.params()[emb_off..emb_off + 2], a.as_slice());
        assert!(matches!(net.embedding_lookup(5), Err(NetError::IdOutOfVocab { .. })));
        let plain = build_network(&ArchSpec::mlp(2, vec![4]), 21).unwrap();
        assert!(matches!(plain.embedding_lookup(0), Err(NetError::NoEmbedding)));
    }

    #[test]
    fn id_out_of_vocab_is_rejected_when_scoring() {
        let arch = ArchSpec {
            embeddings: Some(EmbeddingSpec {
                vocab_size: 2,
                dim: 2,
                target: EmbeddingTarget::Individual,
                wiring: EmbeddingWiring::ConcatToInput,
            }),
            ..ArchSpec::mlp(2, vec![])
        };
        let net = build_network(&arch, 22).unwrap();
        assert!(matches!(net.score_row(&[0.0, 0.0], Some(7), None), Err(NetError::IdOutOfVocab { .. })));
        assert!(matches!(net.score_row(&[0.0, 0.0], None, None), Err(NetError::MissingId(_))));
    }

    #[test]
    fn zero_learning_rate_leaves_weights_unchanged() {
        let d = tiny_dataset(20, 4, 2, 23);
        let net = build_network(&ArchSpec::mlp(2, vec![6]), 24).unwrap();
        let cfg = TrainConfig { epochs: 5, learning_rate: 0.0, ..TrainConfig::default() };
        let (trained, trace) = train(&net, &d, &cfg).unwrap();
        assert_eq!(trained.params(), net.params());
        assert!(trained.trained);
        assert_eq!(trace.train_nll.len(), 5);
        for w in trace.train_nll.windows(2) {
            assert!((w[0] - w[1]).abs() < 1e-12, "trace not flat: {:?}", trace.train_nll);
        }
    }

    #[test]
    fn training_reduces_loss_well_below_zero_network() {
        // The zero network scores every candidate equally, so its NLL is
        // log(k) exactly. A strong linear effect leaves ample headroom below
        // that baseline (the conditional entropy at beta=4 with one control
        // is ~28% below log 2); training must capture most of it.
        let spec = SelectionSpec::linear(vec![4.0], 1000, 1);
        let d = simulate_selection(&spec, 25).unwrap();
        let net = build_network(&ArchSpec::mlp(1, vec![32, 32]), 26).unwrap();
        let cfg = TrainConfig { epochs: 60, ..TrainConfig::default() };
        let (_, trace) = train(&net, &d, &cfg).unwrap();
        let zero_nll = (2.0_f64).ln();
        let last = *trace.train_nll.last().unwrap();
        assert!(last < 0.8 * zero_nll, "final NLL {last} vs zero-network {zero_nll}");
    }

    #[test]
    fn full_batch_small_lr_is_monotone_early() {
        let d = tiny_dataset(50, 4, 2, 27);
        let net = build_network(&ArchSpec::mlp(2, vec![8]), 28).unwrap();
        let cfg = TrainConfig {
            epochs: 12,
            learning_rate: 1e-4,
            batch_strata: usize::MAX,
            optimizer: OptimizerKind::Sgd,
            seed: 3,
            early_stop_patience: None,
        };
        let (_, trace) = train(&net, &d, &cfg).unwrap();
        for w in trace.train_nll[..10].windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "loss increased: {:?}", &trace.train_nll[..10]);
        }
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let d = tiny_dataset(30, 4, 2, 29);
        let net = build_network(&ArchSpec::mlp(2, vec![6]), 30).unwrap();
        let cfg = TrainConfig { epochs: 8, ..TrainConfig::default() };
        let (a, ta) = train(&net, &d, &cfg).unwrap();
        let (b, tb) = train(&net, &d, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
    }

    #[test]
    fn dropout_training_runs_and_inference_is_deterministic() {
        let d = tiny_dataset(30, 4, 2, 31);
        let arch = ArchSpec { dropout_rate: 0.3, ..ArchSpec::mlp(2, vec![8]) };
        let net = build_network(&arch, 32).unwrap();
        let cfg = TrainConfig { epochs: 5, ..TrainConfig::default() };
        let (trained, _) = train(&net, &d, &cfg).unwrap();
        let s1 = trained.score_row(&[0.1, -0.2], None, None).unwrap();
        let s2 = trained.score_row(&[0.1, -0.2], None, None).unwrap();
        assert_eq!(s1, s2);
    }

    #[test]
    fn early_stopping_truncates_trace() {
        let d = tiny_dataset(60, 4, 1, 33);
        let net = build_network(&ArchSpec::mlp(1, vec![4]), 34).unwrap();
        let cfg = TrainConfig {
            epochs: 200,
            early_stop_patience: Some(3),
            ..TrainConfig::default()
        };
        let (_, trace) = train(&net, &d, &cfg).unwrap();
        assert!(trace.train_nll.len() <= 200);
        let val = trace.val_nll.expect("validation trace present");
        assert_eq!(val.len(), trace.train_nll.len());
    }

    #[test]
    fn uncentered_data_warns() {
        let spec = SelectionSpec::linear(vec![0.5], 10, 3);
        let centered = simulate_selection(&spec, 35).unwrap();
        let uncentered = crate::data::invert_centering(&centered).unwrap();
        let net = build_network(&ArchSpec::mlp(1, vec![4]), 36).unwrap();
        let cfg = TrainConfig { epochs: 1, ..TrainConfig::default() };
        let (_, trace) = train(&net, &uncentered, &cfg).unwrap();
        assert!(!trace.warnings.is_empty());
        let (_, trace2) = train(&net, &centered, &cfg).unwrap();
        assert!(trace2.warnings.is_empty());
    }

    #[test]
    fn model_json_round_trip() {
        let arch = ArchSpec {
            embeddings: Some(EmbeddingSpec {
                vocab_size: 4,
                dim: 2,
                target: EmbeddingTarget::Opponent,
                wiring: EmbeddingWiring::ConcatToInput,
            }),
            ..ArchSpec::mlp(3, vec![5])
        };
        let net = build_network(&arch, 37).unwrap();
        let json = net.to_json();
        let back = SsfNetwork::from_json(&json).unwrap();
        assert_eq!(net, back);
        assert!(SsfNetwork::from_json("{\"bogus\": 1}").is_err());
    }

    #[test]
    fn softmax_of_scores_sums_to_one_per_stratum() {
        let d = tiny_dataset(10, 6, 3, 38);
        let net = build_network(&ArchSpec::mlp(3, vec![8, 8]), 39).unwrap();
        for v in strata_views(&d).unwrap() {
            let recs: Vec<StepRecord> = v.record_idxs.iter().map(|&i| d.records[i].clone()).collect();
            let scores = score_candidates(&net, &recs).unwrap();
            let p = crate::stats::softmax(&scores);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;
}
