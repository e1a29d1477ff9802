//! The trainable sampling policy: a strategy-embedding table plus a
//! one-hidden-layer tanh MLP with an 8-way softmax head over the strategy
//! set (including the zero option).
//!
//! Per-edge decision input is `Concat(e(c_j), Mean(e(s_already)), Mean(e(c_context)))`
//! where the middle block averages the embedding rows of the strategies
//! already chosen for the target node (zero vector when none). Gradients of
//! the chosen log-probability are analytic, including the chain rule through
//! the middle-block mean back into the embedding table, so the whole
//! REINFORCE update needs no autodiff framework. All arithmetic is f64.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{vec_add_scaled, vec_sq_norm, Mat};
use crate::skeleton::Strategy;

pub const CHECKPOINT_VERSION: &str = "automr-ckpt-v1";

/// Layer sizes. `out` is fixed to the strategy count (8).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyDims {
    pub d_c: usize,
    pub d_s: usize,
    #[serde(rename = "h")]
    pub hidden: usize,
    pub out: usize,
}

impl PolicyDims {
    pub fn new(d_c: usize, d_s: usize, hidden: usize) -> Self {
        Self {
            d_c,
            d_s,
            hidden,
            out: Strategy::COUNT,
        }
    }

    /// MLP input width: 2*d_c + d_s.
    pub fn input_dim(&self) -> usize {
        2 * self.d_c + self.d_s
    }

    pub fn check(&self) -> Result<()> {
        if self.d_c == 0 || self.d_s == 0 || self.hidden == 0 {
            return Err(Error::InvalidDims(format!(
                "all dims must be positive, got d_c={} d_s={} h={}",
                self.d_c, self.d_s, self.hidden
            )));
        }
        if self.out != Strategy::COUNT {
            return Err(Error::InvalidDims(format!(
                "out must be {}, got {}",
                Strategy::COUNT,
                self.out
            )));
        }
        Ok(())
    }
}

impl Default for PolicyDims {
    fn default() -> Self {
        // d_c matches the mock backend; real backends override it.
        Self::new(64, 32, 256)
    }
}

/// The sole trainable state: embedding table and MLP weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParameters {
    pub dims: PolicyDims,
    /// One row per strategy label, Zero included.
    pub strategy_embeddings: Mat,
    pub w1: Mat,
    pub b1: Vec<f64>,
    pub w2: Mat,
    pub b2: Vec<f64>,
}

impl PolicyParameters {
    /// Weights uniform in +-sqrt(6/(rows+cols)) per matrix, biases zero.
    /// Fill order (embeddings, w1, w2, each row-major) is fixed so a seed
    /// fully determines the result.
    pub fn init(dims: PolicyDims, seed: u64) -> Result<Self> {
        dims.check()?;
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut xavier = |rows: usize, cols: usize| -> Mat {
            let bound = (6.0 / (rows + cols) as f64).sqrt();
            let mut m = Mat::zeros(rows, cols);
            for v in m.data_mut() {
                *v = rng.gen_range(-bound..bound);
            }
            m
        };
        let strategy_embeddings = xavier(Strategy::COUNT, dims.d_s);
        let w1 = xavier(dims.hidden, dims.input_dim());
        let w2 = xavier(Strategy::COUNT, dims.hidden);
        Ok(Self {
            dims,
            strategy_embeddings,
            w1,
            b1: vec![0.0; dims.hidden],
            w2,
            b2: vec![0.0; Strategy::COUNT],
        })
    }

    /// All-zero parameters: the induced policy is exactly uniform (1/8).
    pub fn zeros(dims: PolicyDims) -> Result<Self> {
        dims.check()?;
        Ok(Self {
            dims,
            strategy_embeddings: Mat::zeros(Strategy::COUNT, dims.d_s),
            w1: Mat::zeros(dims.hidden, dims.input_dim()),
            b1: vec![0.0; dims.hidden],
            w2: Mat::zeros(Strategy::COUNT, dims.hidden),
            b2: vec![0.0; Strategy::COUNT],
        })
    }

    pub fn is_finite(&self) -> bool {
        self.strategy_embeddings.is_finite()
            && self.w1.is_finite()
            && self.w2.is_finite()
            && self.b1.iter().all(|v| v.is_finite())
            && self.b2.iter().all(|v| v.is_finite())
    }

    fn check_shapes(&self) -> Result<()> {
        self.dims.check()?;
        let expect = |name: &str, got: (usize, usize), want: (usize, usize)| -> Result<()> {
            if got != want {
                return Err(Error::CheckpointMalformed(format!(
                    "{name} has shape {}x{}, expected {}x{}",
                    got.0, got.1, want.0, want.1
                )));
            }
            Ok(())
        };
        expect(
            "strategy_embeddings",
            (self.strategy_embeddings.rows(), self.strategy_embeddings.cols()),
            (Strategy::COUNT, self.dims.d_s),
        )?;
        expect(
            "W1",
            (self.w1.rows(), self.w1.cols()),
            (self.dims.hidden, self.dims.input_dim()),
        )?;
        expect(
            "W2",
            (self.w2.rows(), self.w2.cols()),
            (Strategy::COUNT, self.dims.hidden),
        )?;
        if self.b1.len() != self.dims.hidden {
            return Err(Error::CheckpointMalformed(format!(
                "b1 has length {}, expected {}",
                self.b1.len(),
                self.dims.hidden
            )));
        }
        if self.b2.len() != Strategy::COUNT {
            return Err(Error::CheckpointMalformed(format!(
                "b2 has length {}, expected {}",
                self.b2.len(),
                Strategy::COUNT
            )));
        }
        Ok(())
    }

    /// New snapshot `self + scale * step`; existing readers are unaffected.
    pub fn apply_step(&self, step: &PolicyGradient, scale: f64) -> PolicyParameters {
        let mut next = self.clone();
        next.strategy_embeddings
            .add_scaled(&step.strategy_embeddings, scale);
        next.w1.add_scaled(&step.w1, scale);
        vec_add_scaled(&mut next.b1, &step.b1, scale);
        next.w2.add_scaled(&step.w2, scale);
        vec_add_scaled(&mut next.b2, &step.b2, scale);
        next
    }
}

/// MLP input for one edge decision, plus the strategies whose embedding rows
/// were averaged into the middle block (needed for the gradient chain rule).
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionFeatures {
    pub input: Vec<f64>,
    pub mean_strategies: Vec<Strategy>,
}

/// Softmax output over the eight labels.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyDistribution {
    pub logits: [f64; Strategy::COUNT],
    pub probs: [f64; Strategy::COUNT],
}

impl StrategyDistribution {
    pub fn prob(&self, strategy: Strategy) -> f64 {
        self.probs[strategy.index()]
    }

    pub fn log_prob(&self, strategy: Strategy) -> f64 {
        self.probs[strategy.index()].ln()
    }

    /// Inverse-CDF sample in label order; consumes one uniform draw.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Strategy {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for strategy in Strategy::ALL {
            acc += self.probs[strategy.index()];
            if u < acc {
                return strategy;
            }
        }
        Strategy::Zero
    }

    /// Highest-probability label; ties break toward the lower index.
    pub fn argmax(&self) -> Strategy {
        let mut best = Strategy::Next;
        let mut best_p = self.probs[0];
        for strategy in Strategy::ALL {
            if self.probs[strategy.index()] > best_p {
                best_p = self.probs[strategy.index()];
                best = strategy;
            }
        }
        best
    }
}

/// Builds the decision input `Concat(e(c_j), Mean(e(s_chosen)), Mean(e(c_context)))`.
/// `chosen` may be empty (middle block is the zero vector) and may include
/// Zero outcomes; `context_embs` must be nonempty (it always holds the source).
pub fn encode_decision_input(
    params: &PolicyParameters,
    c_j_emb: &[f64],
    chosen: &[Strategy],
    context_embs: &[Vec<f64>],
) -> Result<DecisionFeatures> {
    let d_c = params.dims.d_c;
    let d_s = params.dims.d_s;
    if c_j_emb.len() != d_c {
        return Err(Error::DimensionMismatch {
            expected: d_c,
            found: c_j_emb.len(),
            context: "predecessor content embedding".into(),
        });
    }
    if context_embs.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: 0,
            context: "context embeddings must be nonempty".into(),
        });
    }
    for (i, e) in context_embs.iter().enumerate() {
        if e.len() != d_c {
            return Err(Error::DimensionMismatch {
                expected: d_c,
                found: e.len(),
                context: format!("context embedding {i}"),
            });
        }
    }

    let mut input = Vec::with_capacity(params.dims.input_dim());
    input.extend_from_slice(c_j_emb);

    let mut middle = vec![0.0; d_s];
    if !chosen.is_empty() {
        let inv = 1.0 / chosen.len() as f64;
        for s in chosen {
            let row = params.strategy_embeddings.row(s.index());
            for (m, r) in middle.iter_mut().zip(row) {
                *m += inv * r;
            }
        }
    }
    input.extend_from_slice(&middle);

    let inv = 1.0 / context_embs.len() as f64;
    let mut ctx_mean = vec![0.0; d_c];
    for e in context_embs {
        for (m, v) in ctx_mean.iter_mut().zip(e) {
            *m += inv * v;
        }
    }
    input.extend_from_slice(&ctx_mean);

    Ok(DecisionFeatures {
        input,
        mean_strategies: chosen.to_vec(),
    })
}

struct ForwardPass {
    hidden: Vec<f64>,
    dist: StrategyDistribution,
}

fn forward_pass(params: &PolicyParameters, features: &DecisionFeatures) -> Result<ForwardPass> {
    if features.input.len() != params.dims.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: params.dims.input_dim(),
            found: features.input.len(),
            context: "decision features".into(),
        });
    }
    let mut pre = params.w1.matvec(&features.input);
    for (z, b) in pre.iter_mut().zip(&params.b1) {
        *z += b;
    }
    let hidden: Vec<f64> = pre.iter().map(|z| z.tanh()).collect();
    let mut logits_v = params.w2.matvec(&hidden);
    for (z, b) in logits_v.iter_mut().zip(&params.b2) {
        *z += b;
    }
    let mut logits = [0.0; Strategy::COUNT];
    logits.copy_from_slice(&logits_v);
    if logits.iter().any(|z| !z.is_finite()) {
        return Err(Error::NonFinite("policy logits".into()));
    }
    // Max-subtracted softmax keeps the exponentials in range.
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut probs = [0.0; Strategy::COUNT];
    let mut total = 0.0;
    for (p, z) in probs.iter_mut().zip(&logits) {
        *p = (z - max).exp();
        total += *p;
    }
    for p in &mut probs {
        *p /= total;
    }
    Ok(ForwardPass {
        hidden,
        dist: StrategyDistribution { logits, probs },
    })
}

/// Distribution over the eight labels for one decision.
pub fn forward(params: &PolicyParameters, features: &DecisionFeatures) -> Result<StrategyDistribution> {
    Ok(forward_pass(params, features)?.dist)
}

/// Gradient container shaped like [`PolicyParameters`].
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGradient {
    pub strategy_embeddings: Mat,
    pub w1: Mat,
    pub b1: Vec<f64>,
    pub w2: Mat,
    pub b2: Vec<f64>,
}

impl PolicyGradient {
    pub fn zeros(dims: PolicyDims) -> Self {
        Self {
            strategy_embeddings: Mat::zeros(Strategy::COUNT, dims.d_s),
            w1: Mat::zeros(dims.hidden, dims.input_dim()),
            b1: vec![0.0; dims.hidden],
            w2: Mat::zeros(Strategy::COUNT, dims.hidden),
            b2: vec![0.0; Strategy::COUNT],
        }
    }

    pub fn add_scaled(&mut self, other: &PolicyGradient, k: f64) {
        self.strategy_embeddings
            .add_scaled(&other.strategy_embeddings, k);
        self.w1.add_scaled(&other.w1, k);
        vec_add_scaled(&mut self.b1, &other.b1, k);
        self.w2.add_scaled(&other.w2, k);
        vec_add_scaled(&mut self.b2, &other.b2, k);
    }

    pub fn scale(&mut self, k: f64) {
        self.strategy_embeddings.scale(k);
        self.w1.scale(k);
        for v in &mut self.b1 {
            *v *= k;
        }
        self.w2.scale(k);
        for v in &mut self.b2 {
            *v *= k;
        }
    }

    /// Global L2 norm over every block.
    pub fn l2_norm(&self) -> f64 {
        (self.strategy_embeddings.sq_norm()
            + self.w1.sq_norm()
            + vec_sq_norm(&self.b1)
            + self.w2.sq_norm()
            + vec_sq_norm(&self.b2))
        .sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.strategy_embeddings.data().iter().all(|&v| v == 0.0)
            && self.w1.data().iter().all(|&v| v == 0.0)
            && self.b1.iter().all(|&v| v == 0.0)
            && self.w2.data().iter().all(|&v| v == 0.0)
            && self.b2.iter().all(|&v| v == 0.0)
    }
}

/// Adds `weight * d log p(chosen | features) / d theta` into `acc` and
/// returns the log-probability. The middle feature block is a mean of
/// embedding rows, so those rows receive `weight/m` of the block gradient.
pub fn accumulate_logprob_grad(
    params: &PolicyParameters,
    features: &DecisionFeatures,
    chosen: Strategy,
    weight: f64,
    acc: &mut PolicyGradient,
) -> Result<f64> {
    let pass = forward_pass(params, features)?;
    let log_prob = pass.dist.log_prob(chosen);

    // d log p / d logits = onehot(chosen) - probs
    let mut dlogits = [0.0; Strategy::COUNT];
    for (d, p) in dlogits.iter_mut().zip(&pass.dist.probs) {
        *d = -p;
    }
    dlogits[chosen.index()] += 1.0;

    vec_add_scaled(&mut acc.b2, &dlogits, weight);
    acc.w2.add_outer_scaled(&dlogits, &pass.hidden, weight);

    // back through tanh
    let dhidden = params.w2.matvec_transpose(&dlogits);
    let dpre: Vec<f64> = dhidden
        .iter()
        .zip(&pass.hidden)
        .map(|(dh, a)| dh * (1.0 - a * a))
        .collect();

    vec_add_scaled(&mut acc.b1, &dpre, weight);
    acc.w1.add_outer_scaled(&dpre, &features.input, weight);

    if !features.mean_strategies.is_empty() {
        let dinput = params.w1.matvec_transpose(&dpre);
        let d_c = params.dims.d_c;
        let d_s = params.dims.d_s;
        let block = &dinput[d_c..d_c + d_s];
        let share = weight / features.mean_strategies.len() as f64;
        for s in &features.mean_strategies {
            let base = s.index();
            for (c, g) in block.iter().enumerate() {
                let cur = acc.strategy_embeddings.get(base, c);
                acc.strategy_embeddings.set(base, c, cur + share * g);
            }
        }
    }
    Ok(log_prob)
}

/// Log-probability of `chosen` and its exact gradient w.r.t. every parameter.
pub fn logprob_and_grad(
    params: &PolicyParameters,
    features: &DecisionFeatures,
    chosen: Strategy,
) -> Result<(f64, PolicyGradient)> {
    let mut grad = PolicyGradient::zeros(params.dims);
    let log_prob = accumulate_logprob_grad(params, features, chosen, 1.0, &mut grad)?;
    Ok((log_prob, grad))
}

/// Outcome of a finite-difference gradient check.
#[derive(Debug, Clone, Copy)]
pub struct GradCheckReport {
    pub coords_checked: usize,
    pub max_relative_error: f64,
}

/// Compares the analytic gradient against central finite differences on
/// randomly drawn coordinates from every parameter block. The numeric side
/// re-runs the full pipeline including feature encoding, so perturbations of
/// the embedding table flow through the middle feature block.
pub fn gradient_check(dims: PolicyDims, seed: u64, coords_per_block: usize) -> Result<GradCheckReport> {
    let params = PolicyParameters::init(dims, seed)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1));

    let mut random_unit = |dim: usize| -> Vec<f64> {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = vec_sq_norm(&v).sqrt().max(1e-12);
        v.into_iter().map(|x| x / norm).collect()
    };
    let c_j = random_unit(dims.d_c);
    let context = vec![random_unit(dims.d_c), random_unit(dims.d_c)];
    let mean_members = vec![Strategy::Next, Strategy::Zero, Strategy::Recall];
    let chosen = Strategy::Explore;

    let eval = |p: &PolicyParameters| -> Result<f64> {
        let features = encode_decision_input(p, &c_j, &mean_members, &context)?;
        Ok(forward(p, &features)?.log_prob(chosen))
    };
    let features = encode_decision_input(&params, &c_j, &mean_members, &context)?;
    let (_, grad) = logprob_and_grad(&params, &features, chosen)?;

    let h = 1e-5;
    let mut coords_checked = 0;
    let mut max_relative_error = 0.0f64;
    for block in 0..5 {
        for _ in 0..coords_per_block {
            let mut plus = params.clone();
            let mut minus = params.clone();
            let analytic = match block {
                0 => {
                    let r = rng.gen_range(0..Strategy::COUNT);
                    let c = rng.gen_range(0..dims.d_s);
                    plus.strategy_embeddings.set(r, c, plus.strategy_embeddings.get(r, c) + h);
                    minus.strategy_embeddings.set(r, c, minus.strategy_embeddings.get(r, c) - h);
                    grad.strategy_embeddings.get(r, c)
                }
                1 => {
                    let r = rng.gen_range(0..dims.hidden);
                    let c = rng.gen_range(0..dims.input_dim());
                    plus.w1.set(r, c, plus.w1.get(r, c) + h);
                    minus.w1.set(r, c, minus.w1.get(r, c) - h);
                    grad.w1.get(r, c)
                }
                2 => {
                    let r = rng.gen_range(0..dims.hidden);
                    plus.b1[r] += h;
                    minus.b1[r] -= h;
                    grad.b1[r]
                }
                3 => {
                    let r = rng.gen_range(0..Strategy::COUNT);
                    let c = rng.gen_range(0..dims.hidden);
                    plus.w2.set(r, c, plus.w2.get(r, c) + h);
                    minus.w2.set(r, c, minus.w2.get(r, c) - h);
                    grad.w2.get(r, c)
                }
                _ => {
                    let r = rng.gen_range(0..Strategy::COUNT);
                    plus.b2[r] += h;
                    minus.b2[r] -= h;
                    grad.b2[r]
                }
            };
            let numeric = (eval(&plus)? - eval(&minus)?) / (2.0 * h);
            let denom = analytic.abs().max(numeric.abs()).max(1e-8);
            max_relative_error = max_relative_error.max((analytic - numeric).abs() / denom);
            coords_checked += 1;
        }
    }
    Ok(GradCheckReport {
        coords_checked,
        max_relative_error,
    })
}

#[derive(Serialize, Deserialize)]
struct CheckpointDoc {
    version: String,
    dims: PolicyDims,
    strategy_embeddings: Mat,
    #[serde(rename = "W1")]
    w1: Mat,
    b1: Vec<f64>,
    #[serde(rename = "W2")]
    w2: Mat,
    b2: Vec<f64>,
}

/// JSON checkpoint; finite f64 values survive the round trip bit-exactly.
pub fn serialize_checkpoint(params: &PolicyParameters) -> Vec<u8> {
    let doc = CheckpointDoc {
        version: CHECKPOINT_VERSION.to_string(),
        dims: params.dims,
        strategy_embeddings: params.strategy_embeddings.clone(),
        w1: params.w1.clone(),
        b1: params.b1.clone(),
        w2: params.w2.clone(),
        b2: params.b2.clone(),
    };
    serde_json::to_vec_pretty(&doc).expect("checkpoint serialization cannot fail")
}

pub fn deserialize_checkpoint(bytes: &[u8]) -> Result<PolicyParameters> {
    let value: serde_json::Value = match serde_json::from_slice(bytes) {
        Ok(v) => v,
        Err(e) if e.is_eof() => return Err(Error::CheckpointTruncated),
        Err(e) => return Err(Error::CheckpointMalformed(e.to_string())),
    };
    let found = value
        .get("version")
        .and_then(|v| v.as_str())
        .ok_or_else(|| Error::CheckpointMalformed("missing version tag".into()))?;
    if found != CHECKPOINT_VERSION {
        return Err(Error::CheckpointVersion {
            expected: CHECKPOINT_VERSION.to_string(),
            found: found.to_string(),
        });
    }
    let doc: CheckpointDoc =
        serde_json::from_value(value).map_err(|e| Error::CheckpointMalformed(e.to_string()))?;
    let params = PolicyParameters {
        dims: doc.dims,
        strategy_embeddings: doc.strategy_embeddings,
        w1: doc.w1,
        b1: doc.b1,
        w2: doc.w2,
        b2: doc.b2,
    };
    params.check_shapes()?;
    if !params.is_finite() {
        return Err(Error::CheckpointMalformed("non-finite parameter".into()));
    }
    Ok(params)
}
