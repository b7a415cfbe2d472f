//! GCN layer stacks with an optional entropy-ascent term.
//!
//! All variants share the same skeleton: an affine input projection onto the
//! hidden width, `depth` graph layers, and an affine output projection to the
//! logits. A graph layer computes `phi = relu(A_hat X W + b)` with the
//! Kipf-Welling normalized adjacency `A_hat = D~^{-1/2}(A+I)D~^{-1/2}` and
//! then, depending on the variant:
//!
//! - basic:    `X' = [X +] phi`
//! - entropic: `X' = [X +] phi + lambda * T * grad S(X)`
//! - pairnorm: `X' = PairNorm([X +] phi)`
//!
//! The bracketed residual is controlled by [`ModelSpec::residual`]. The
//! entropy gradient is evaluated on a detached copy of the layer input: it is
//! added in the forward pass but treated as a per-layer constant by
//! [`backward`], so no parameter gradients flow through it. Gradients still
//! flow through the residual and `phi` paths.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::kernel;
use crate::matrix::Matrix;

/// Scale constant used by the PairNorm variant.
pub const PAIRNORM_SCALE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Basic,
    Entropic,
    PairNorm,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Variant::Basic => write!(f, "basic"),
            Variant::Entropic => write!(f, "entropic"),
            Variant::PairNorm => write!(f, "pairnorm"),
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Variant> {
        match s {
            "basic" => Ok(Variant::Basic),
            "entropic" => Ok(Variant::Entropic),
            "pairnorm" => Ok(Variant::PairNorm),
            other => Err(Error::InvalidSpec(format!(
                "unknown variant {other:?}, expected basic|entropic|pairnorm"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    /// Number of graph layers between the two projections.
    pub depth: usize,
    pub in_dim: usize,
    pub hidden_dim: usize,
    pub out_dim: usize,
    pub variant: Variant,
    /// Entropy step weight; must be 0 for non-entropic variants.
    pub lambda: f64,
    pub temperature: f64,
    pub residual: bool,
    pub seed: u64,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::InvalidSpec("depth must be >= 1".into()));
        }
        if self.in_dim == 0 || self.hidden_dim == 0 || self.out_dim == 0 {
            return Err(Error::InvalidSpec("widths must be >= 1".into()));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::NonpositiveTemperature(self.temperature));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::InvalidSpec(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if self.variant != Variant::Entropic && self.lambda != 0.0 {
            return Err(Error::InvalidSpec(format!(
                "lambda must be 0 for the {} variant",
                self.variant
            )));
        }
        Ok(())
    }
}

/// One affine stage: `x * weight + bias`, weight is `in x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(fan_in: usize, fan_out: usize) -> Dense {
        Dense {
            weight: Matrix::zeros(fan_in, fan_out),
            bias: vec![0.0; fan_out],
        }
    }

    fn glorot(fan_in: usize, fan_out: usize, rng: &mut ChaCha20Rng) -> Dense {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound);
        let data = (0..fan_in * fan_out).map(|_| dist.sample(rng)).collect();
        Dense {
            weight: Matrix::from_vec(fan_in, fan_out, data).expect("shape is consistent"),
            bias: vec![0.0; fan_out],
        }
    }

    fn apply(&self, x: &Matrix) -> Result<Matrix> {
        let mut out = x.matmul(&self.weight)?;
        for i in 0..out.rows() {
            for (o, &b) in out.row_mut(i).iter_mut().zip(&self.bias) {
                *o += b;
            }
        }
        Ok(out)
    }
}

/// All trainable parameters of a model. The same struct carries parameter
/// gradients, which share its shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub input: Dense,
    pub hidden: Vec<Dense>,
    pub output: Dense,
}

impl Params {
    pub fn zeros_like(spec: &ModelSpec) -> Params {
        Params {
            input: Dense::zeros(spec.in_dim, spec.hidden_dim),
            hidden: (0..spec.depth)
                .map(|_| Dense::zeros(spec.hidden_dim, spec.hidden_dim))
                .collect(),
            output: Dense::zeros(spec.hidden_dim, spec.out_dim),
        }
    }

    fn stages(&self) -> impl Iterator<Item = &Dense> {
        std::iter::once(&self.input)
            .chain(self.hidden.iter())
            .chain(std::iter::once(&self.output))
    }

    fn stages_mut(&mut self) -> impl Iterator<Item = &mut Dense> {
        std::iter::once(&mut self.input)
            .chain(self.hidden.iter_mut())
            .chain(std::iter::once(&mut self.output))
    }

    /// All parameters in a fixed order (weights row-major, then bias, per
    /// stage). The optimizer and the finite-difference harness both rely on
    /// this ordering.
    pub fn flatten(&self) -> Vec<f64> {
        let mut flat = Vec::new();
        for stage in self.stages() {
            flat.extend_from_slice(stage.weight.as_slice());
            flat.extend_from_slice(&stage.bias);
        }
        flat
    }

    pub fn assign_from_flat(&mut self, flat: &[f64]) -> Result<()> {
        let mut idx = 0;
        for stage in self.stages_mut() {
            let w = stage.weight.as_mut_slice();
            let b = &mut stage.bias;
            if idx + w.len() + b.len() > flat.len() {
                return Err(Error::DimensionMismatch(
                    "flat parameter vector too short".into(),
                ));
            }
            w.copy_from_slice(&flat[idx..idx + w.len()]);
            idx += w.len();
            let blen = b.len();
            b.copy_from_slice(&flat[idx..idx + blen]);
            idx += blen;
        }
        if idx != flat.len() {
            return Err(Error::DimensionMismatch(
                "flat parameter vector too long".into(),
            ));
        }
        Ok(())
    }
}

/// Glorot-uniform weights, zero biases, deterministic in `spec.seed`.
pub fn init_params(spec: &ModelSpec) -> Result<Params> {
    spec.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    Ok(Params {
        input: Dense::glorot(spec.in_dim, spec.hidden_dim, &mut rng),
        hidden: (0..spec.depth)
            .map(|_| Dense::glorot(spec.hidden_dim, spec.hidden_dim, &mut rng))
            .collect(),
        output: Dense::glorot(spec.hidden_dim, spec.out_dim, &mut rng),
    })
}

/// `A_hat * X` with `A_hat = D~^{-1/2}(A+I)D~^{-1/2}`, self-loops added.
pub fn gcn_aggregate(g: &Graph, x: &Matrix) -> Result<Matrix> {
    if x.rows() != g.node_count() {
        return Err(Error::DimensionMismatch(format!(
            "embedding has {} rows but graph has {} nodes",
            x.rows(),
            g.node_count()
        )));
    }
    let inv_sqrt: Vec<f64> = (0..g.node_count())
        .map(|i| 1.0 / ((g.neighbors(i).len() + 1) as f64).sqrt())
        .collect();
    let mut out = Matrix::zeros(x.rows(), x.cols());
    for i in 0..g.node_count() {
        let di = inv_sqrt[i];
        let out_row = out.row_mut(i);
        // self-loop
        for (o, &v) in out_row.iter_mut().zip(x.row(i)) {
            *o += di * di * v;
        }
    }
    for i in 0..g.node_count() {
        let di = inv_sqrt[i];
        for &j in g.neighbors(i) {
            let w = di * inv_sqrt[j];
            let xj = x.row(j);
            let out_row = out.row_mut(i);
            for (o, &v) in out_row.iter_mut().zip(xj) {
                *o += w * v;
            }
        }
    }
    Ok(out)
}

/// Center columns, then rescale so the mean squared row norm equals `s^2`.
/// The zero matrix (and any matrix that centers to zero) maps to zero.
pub fn pairnorm(x: &Matrix, s: f64) -> Matrix {
    let (out, _) = pairnorm_with_cache(x, s);
    out
}

#[derive(Debug, Clone)]
pub(crate) struct PairNormCache {
    /// Column-centered input.
    centered: Matrix,
    /// Root mean squared row norm of the centered input; 0 marks the
    /// degenerate branch.
    rms: f64,
}

fn pairnorm_with_cache(x: &Matrix, s: f64) -> (Matrix, PairNormCache) {
    let means = x.column_means();
    let mut centered = x.clone();
    for i in 0..centered.rows() {
        for (v, &m) in centered.row_mut(i).iter_mut().zip(&means) {
            *v -= m;
        }
    }
    let msn = centered.mean_sq_row_norm();
    if msn == 0.0 {
        let out = Matrix::zeros(x.rows(), x.cols());
        return (out, PairNormCache { centered, rms: 0.0 });
    }
    let rms = msn.sqrt();
    let out = centered.map(|v| s * v / rms);
    (out, PairNormCache { centered, rms })
}

fn pairnorm_backward(cache: &PairNormCache, s: f64, grad_out: &Matrix) -> Matrix {
    if cache.rms == 0.0 {
        return Matrix::zeros(grad_out.rows(), grad_out.cols());
    }
    let n = grad_out.rows() as f64;
    let r = cache.rms;
    let alpha = s / r;
    let dot: f64 = grad_out
        .as_slice()
        .iter()
        .zip(cache.centered.as_slice())
        .map(|(g, c)| g * c)
        .sum();
    let mut grad_centered = Matrix::zeros(grad_out.rows(), grad_out.cols());
    for ((o, &g), &c) in grad_centered
        .as_mut_slice()
        .iter_mut()
        .zip(grad_out.as_slice())
        .zip(cache.centered.as_slice())
    {
        *o = alpha * g - alpha / (n * r * r) * dot * c;
    }
    // backward through column centering
    let means = grad_centered.column_means();
    for i in 0..grad_centered.rows() {
        for (v, &m) in grad_centered.row_mut(i).iter_mut().zip(&means) {
            *v -= m;
        }
    }
    grad_centered
}

/// Everything [`backward`] needs from one graph layer's forward pass.
#[derive(Debug, Clone)]
pub struct LayerCache {
    input: Matrix,
    aggregated: Matrix,
    preactivation: Matrix,
    pairnorm: Option<PairNormCache>,
    /// `lambda * T * grad S(input)` for the entropic variant; exposed so the
    /// frozen-term FD harness can replay the forward with these held fixed.
    pub entropy_term: Option<Matrix>,
}

/// One graph layer. Returns the new embedding and the backward cache.
pub fn layer_forward(
    spec: &ModelSpec,
    layer: &Dense,
    g: &Graph,
    x: &Matrix,
) -> Result<(Matrix, LayerCache)> {
    let aggregated = gcn_aggregate(g, x)?;
    let preactivation = layer.apply(&aggregated)?;
    let phi = preactivation.map(|v| v.max(0.0));
    let mut base = if spec.residual {
        x.add_scaled(&phi, 1.0)?
    } else {
        phi
    };
    let mut pairnorm_cache = None;
    let mut entropy_term = None;
    match spec.variant {
        Variant::Basic => {}
        Variant::Entropic => {
            let grad = kernel::entropy_gradient(g, x, spec.temperature)?;
            let term = grad.map(|v| spec.lambda * spec.temperature * v);
            base.add_scaled_in_place(&term, 1.0)?;
            entropy_term = Some(term);
        }
        Variant::PairNorm => {
            let (normed, cache) = pairnorm_with_cache(&base, PAIRNORM_SCALE);
            base = normed;
            pairnorm_cache = Some(cache);
        }
    }
    if !base.is_finite() {
        return Err(Error::NonFinite("graph layer activations overflowed".into()));
    }
    Ok((
        base,
        LayerCache {
            input: x.clone(),
            aggregated,
            preactivation,
            pairnorm: pairnorm_cache,
            entropy_term,
        },
    ))
}

/// Per-layer scalars recorded during a forward pass, including the embedding
/// entering the first graph layer. All vectors have length `depth + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTrace {
    pub energy: Vec<f64>,
    pub entropy: Vec<f64>,
    pub mean_norm: Vec<f64>,
}

impl LayerTrace {
    fn record(&mut self, g: &Graph, x: &Matrix, t: f64) -> Result<()> {
        let energies = kernel::node_energies(g, x)?;
        self.energy.push(kernel::total_energy(&energies)?);
        self.entropy.push(kernel::boltzmann_state(energies, t)?.entropy);
        self.mean_norm.push(x.mean_row_norm());
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    x0: Matrix,
    layers: Vec<LayerCache>,
    hidden_output: Matrix,
}

impl ForwardCache {
    pub fn layers(&self) -> &[LayerCache] {
        &self.layers
    }
}

/// Full forward pass: input projection, `depth` graph layers, output
/// projection. The trace records energy/entropy/mean norm after the input
/// projection and after every graph layer.
pub fn forward(
    spec: &ModelSpec,
    params: &Params,
    g: &Graph,
    x0: &Matrix,
) -> Result<(Matrix, LayerTrace)> {
    let (logits, trace, _) = forward_with_cache(spec, params, g, x0)?;
    Ok((logits, trace))
}

pub fn forward_with_cache(
    spec: &ModelSpec,
    params: &Params,
    g: &Graph,
    x0: &Matrix,
) -> Result<(Matrix, LayerTrace, ForwardCache)> {
    spec.validate()?;
    if x0.rows() != g.node_count() || x0.cols() != spec.in_dim {
        return Err(Error::DimensionMismatch(format!(
            "input is {}x{}, expected {}x{}",
            x0.rows(),
            x0.cols(),
            g.node_count(),
            spec.in_dim
        )));
    }
    let mut trace = LayerTrace {
        energy: Vec::with_capacity(spec.depth + 1),
        entropy: Vec::with_capacity(spec.depth + 1),
        mean_norm: Vec::with_capacity(spec.depth + 1),
    };
    let mut x = params.input.apply(x0)?;
    trace.record(g, &x, spec.temperature)?;
    let mut layers = Vec::with_capacity(spec.depth);
    for layer in &params.hidden {
        let (next, cache) = layer_forward(spec, layer, g, &x)?;
        trace.record(g, &next, spec.temperature)?;
        layers.push(cache);
        x = next;
    }
    let hidden_output = x.clone();
    let logits = params.output.apply(&x)?;
    if !logits.is_finite() {
        return Err(Error::NonFinite("logits overflowed".into()));
    }
    Ok((
        logits,
        trace,
        ForwardCache {
            x0: x0.clone(),
            layers,
            hidden_output,
        },
    ))
}

/// Forward pass with the per-layer entropy terms pinned to caller-supplied
/// matrices instead of being recomputed.
///
/// This is the detachment contract made executable: the analytic [`backward`]
/// treats each entropy term as an additive constant, so its gradients must
/// match finite differences of *this* objective with the terms frozen at the
/// unperturbed forward's values.
pub fn forward_frozen_entropy(
    spec: &ModelSpec,
    params: &Params,
    g: &Graph,
    x0: &Matrix,
    frozen_terms: &[Matrix],
) -> Result<Matrix> {
    spec.validate()?;
    if frozen_terms.len() != spec.depth {
        return Err(Error::DimensionMismatch(format!(
            "expected {} frozen terms, got {}",
            spec.depth,
            frozen_terms.len()
        )));
    }
    let mut x = params.input.apply(x0)?;
    for (layer, term) in params.hidden.iter().zip(frozen_terms) {
        let aggregated = gcn_aggregate(g, &x)?;
        let phi = layer.apply(&aggregated)?.map(|v| v.max(0.0));
        let mut base = if spec.residual {
            x.add_scaled(&phi, 1.0)?
        } else {
            phi
        };
        base.add_scaled_in_place(term, 1.0)?;
        if spec.variant == Variant::PairNorm {
            base = pairnorm(&base, PAIRNORM_SCALE);
        }
        x = base;
    }
    params.output.apply(&x)
}

fn dense_backward(
    stage_input: &Matrix,
    stage: &Dense,
    grad_out: &Matrix,
) -> Result<(Dense, Matrix)> {
    let grad = Dense {
        weight: stage_input.transpose_matmul(grad_out)?,
        bias: grad_out.column_sums(),
    };
    let grad_in = grad_out.matmul_transpose(&stage.weight)?;
    Ok((grad, grad_in))
}

/// Manual backward pass. Returns parameter gradients with the same shapes as
/// `params`. The entropic term contributes nothing (see module docs).
pub fn backward(
    spec: &ModelSpec,
    params: &Params,
    g: &Graph,
    cache: &ForwardCache,
    grad_logits: &Matrix,
) -> Result<Params> {
    if cache.layers.len() != spec.depth || params.hidden.len() != spec.depth {
        return Err(Error::StaleCache(format!(
            "cache has {} layers, params {}, spec depth {}",
            cache.layers.len(),
            params.hidden.len(),
            spec.depth
        )));
    }
    if grad_logits.rows() != cache.hidden_output.rows()
        || grad_logits.cols() != spec.out_dim
    {
        return Err(Error::StaleCache(format!(
            "grad_logits is {}x{}, expected {}x{}",
            grad_logits.rows(),
            grad_logits.cols(),
            cache.hidden_output.rows(),
            spec.out_dim
        )));
    }
    let mut grads = Params::zeros_like(spec);

    let (grad_output_stage, mut grad_x) =
        dense_backward(&cache.hidden_output, &params.output, grad_logits)?;
    grads.output = grad_output_stage;

    for (k, (layer, layer_cache)) in params
        .hidden
        .iter()
        .zip(&cache.layers)
        .enumerate()
        .rev()
    {
        if layer_cache.input.cols() != spec.hidden_dim {
            return Err(Error::StaleCache(format!(
                "layer {k} cache width {} does not match hidden dim {}",
                layer_cache.input.cols(),
                spec.hidden_dim
            )));
        }
        // PairNorm wraps the residual+phi sum; undo it first.
        let grad_base = match (&spec.variant, &layer_cache.pairnorm) {
            (Variant::PairNorm, Some(pn)) => pairnorm_backward(pn, PAIRNORM_SCALE, &grad_x),
            (Variant::PairNorm, None) => {
                return Err(Error::StaleCache(format!(
                    "layer {k} cache is missing pairnorm state"
                )))
            }
            _ => grad_x.clone(),
        };
        // relu mask on the preactivation
        let mut grad_pre = grad_base.clone();
        for (gp, &z) in grad_pre
            .as_mut_slice()
            .iter_mut()
            .zip(layer_cache.preactivation.as_slice())
        {
            if z <= 0.0 {
                *gp = 0.0;
            }
        }
        let (stage_grad, grad_aggregated) =
            dense_backward(&layer_cache.aggregated, layer, &grad_pre)?;
        grads.hidden[k] = stage_grad;
        // A_hat is symmetric, so its backward is another aggregation.
        let mut grad_in = gcn_aggregate(g, &grad_aggregated)?;
        if spec.residual {
            grad_in.add_scaled_in_place(&grad_base, 1.0)?;
        }
        grad_x = grad_in;
    }

    let (grad_input_stage, _) = dense_backward(&cache.x0, &params.input, &grad_x)?;
    grads.input = grad_input_stage;
    Ok(grads)
}
