//! Dual-path multilayer perceptron.
//!
//! The network is a stack of hidden blocks, each `linear -> normalization ->
//! rectifier`, followed by a linear classifier head. Every hidden block owns a
//! single [`MixtureState`] and a single [`AffineParams`], and **both**
//! normalization paths run through them:
//!
//! * the compound path ([`forward_cbn`]) normalizes activations against every
//!   mixture component and blends by posterior responsibility;
//! * the split path ([`forward_sbn`]) routes each sample to the component for
//!   its label group and normalizes with that component's statistics alone.
//!
//! Linear weights, affine parameters, and mixture statistics are therefore
//! shared across the two paths; [`backward_dual`] accumulates both paths'
//! gradients into the same parameter buffers.
//!
//! Gradients intentionally do not flow through posterior responsibilities or
//! through the running statistics; [`forward_cbn_with_posteriors`] exposes the
//! matching pinned-posterior forward so finite differences can probe exactly
//! the derivative the backward pass computes.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::ClassPartition;
use crate::error::{Error, Result};
use crate::mixture::{init_mixture, MixtureState};
use crate::norm::{
    cbn_backward, cbn_forward, cbn_forward_with_posteriors, sbn_backward, sbn_forward,
    AffineParams, CbnCache, Mode, SbnCache,
};
use crate::numerics::{matmul, Matrix, Rng};

/// Normalization flavor for the hidden blocks.
///
/// `Plain` is the single-statistic special case: it forces one mixture
/// component per block, which makes the compound path algebraically identical
/// to ordinary batch normalization and leaves the split path untouched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    /// One component per block (ordinary batch normalization).
    Plain,
    /// `m` components per block with posterior-weighted blending.
    Compound,
}

/// Architecture description: enough to build or re-build a model skeleton.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    /// Feature dimension of the input batch.
    pub input_dim: usize,
    /// Width of each hidden block, outermost first. Must be non-empty.
    pub hidden: Vec<usize>,
    /// Normalization flavor shared by all hidden blocks.
    pub norm: NormKind,
    /// Mixture components per hidden block (must be 1 when `norm` is `Plain`).
    pub m: usize,
    /// Number of output classes.
    pub k: usize,
    /// Half-width of the uniform jitter applied to initial component means.
    pub mixture_jitter: f64,
}

impl NetworkSpec {
    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::Config("input_dim must be at least 1".into()));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::Config(
                "hidden widths must be non-empty and positive".into(),
            ));
        }
        if self.k < 2 {
            return Err(Error::Config("need at least 2 classes".into()));
        }
        if self.m == 0 {
            return Err(Error::Config("need at least 1 mixture component".into()));
        }
        if self.norm == NormKind::Plain && self.m != 1 {
            return Err(Error::Config(format!(
                "plain normalization requires m = 1, got m = {}",
                self.m
            )));
        }
        if !self.mixture_jitter.is_finite() || self.mixture_jitter < 0.0 {
            return Err(Error::Config("mixture_jitter must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Fully-connected layer with accumulated gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearLayer {
    /// `out_dim x in_dim` weight matrix.
    pub weight: Matrix,
    /// Per-output bias.
    pub bias: Vec<f64>,
    /// Gradient accumulator matching `weight`.
    pub grad_weight: Matrix,
    /// Gradient accumulator matching `bias`.
    pub grad_bias: Vec<f64>,
}

impl LinearLayer {
    /// Rectifier-friendly random init: `N(0, 2/in_dim)` weights, zero biases.
    fn new(out_dim: usize, in_dim: usize, rng: &mut Rng) -> Self {
        let scale = (2.0 / in_dim as f64).sqrt();
        let mut weight = Matrix::zeros(out_dim, in_dim);
        for v in weight.as_mut_slice() {
            *v = rng.normal() * scale;
        }
        LinearLayer {
            weight,
            bias: vec![0.0; out_dim],
            grad_weight: Matrix::zeros(out_dim, in_dim),
            grad_bias: vec![0.0; out_dim],
        }
    }

    /// `weight * x + bias`, column-per-sample.
    fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let mut y = matmul(&self.weight, x)?;
        for o in 0..y.rows() {
            let b = self.bias[o];
            for v in y.row_mut(o) {
                *v += b;
            }
        }
        Ok(y)
    }

    fn zero_grads(&mut self) {
        self.grad_weight.as_mut_slice().fill(0.0);
        self.grad_bias.fill(0.0);
    }
}

/// Normalization state shared by the compound and split paths of one block.
#[derive(Debug, Clone, PartialEq)]
pub struct NormSite {
    /// Mixture statistics (priors, means, variances).
    pub state: MixtureState,
    /// Per-component scale/shift parameters.
    pub affine: AffineParams,
}

/// The dual-path network.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPathModel {
    /// Architecture this model was built from.
    pub spec: NetworkSpec,
    /// Hidden blocks: a linear layer feeding a shared normalization site.
    pub blocks: Vec<(LinearLayer, NormSite)>,
    /// Classifier head mapping the last hidden width to `k` logits.
    pub head: LinearLayer,
    /// Number of optimizer steps applied so far.
    pub step: u64,
}

/// Cache of one hidden block's forward pass, consumed by the backward pass.
#[derive(Debug)]
pub struct BlockCache {
    /// Input to the block's linear layer.
    pub x_in: Matrix,
    /// Normalization-layer cache for the path that produced it.
    pub norm: NormCache,
    /// Normalization output (pre-rectifier), used for the rectifier mask.
    pub y_norm: Matrix,
}

/// Which normalization path a block cache came from.
#[derive(Debug)]
pub enum NormCache {
    /// Posterior-blended path.
    Compound(CbnCache),
    /// Label-routed path.
    Split(SbnCache),
}

/// All per-block caches of one training-mode forward pass.
#[derive(Debug)]
pub struct ForwardCaches {
    /// One cache per hidden block, outermost first.
    pub blocks: Vec<BlockCache>,
    /// Input to the classifier head.
    pub head_in: Matrix,
}

impl DualPathModel {
    /// Build a freshly initialized model. Linear weights are seeded from
    /// per-layer splits of `rng`; mixture means get uniform jitter of
    /// half-width `spec.mixture_jitter`.
    pub fn new(spec: NetworkSpec, rng: &mut Rng) -> Result<Self> {
        spec.validate()?;
        let mut blocks = Vec::with_capacity(spec.hidden.len());
        let mut in_dim = spec.input_dim;
        for (i, &width) in spec.hidden.iter().enumerate() {
            let mut layer_rng = rng.split(&format!("init/block{i}/linear"));
            let linear = LinearLayer::new(width, in_dim, &mut layer_rng);
            let mut mix_rng = rng.split(&format!("init/block{i}/mixture"));
            let state = init_mixture(spec.m, width, &mut mix_rng, spec.mixture_jitter);
            let affine = AffineParams::new(spec.m, width);
            blocks.push((linear, NormSite { state, affine }));
            in_dim = width;
        }
        let mut head_rng = rng.split("init/head");
        let head = LinearLayer::new(spec.k, in_dim, &mut head_rng);
        Ok(DualPathModel {
            spec,
            blocks,
            head,
            step: 0,
        })
    }

    /// Overwrite the statistics hyperparameters of every normalization site.
    pub fn set_statistics_config(&mut self, eps: f64, lambda_c: f64, lambda_s: f64) {
        for (_, site) in &mut self.blocks {
            site.state.eps = eps;
            site.state.lambda_c = lambda_c;
            site.state.lambda_s = lambda_s;
        }
    }

    /// Clear every accumulated gradient (linear and affine).
    pub fn zero_grads(&mut self) {
        for (linear, site) in &mut self.blocks {
            linear.zero_grads();
            site.affine.zero_grads();
        }
        self.head.zero_grads();
    }

    /// Total starvation events recorded across all normalization sites.
    pub fn starvation_events(&self) -> u64 {
        self.blocks
            .iter()
            .map(|(_, site)| site.state.starvation_events)
            .sum()
    }

    fn check_input(&self, op: &'static str, x: &Matrix) -> Result<()> {
        if x.rows() != self.spec.input_dim {
            return Err(Error::ShapeMismatch {
                op,
                expected: format!("{} input rows", self.spec.input_dim),
                got: format!("{}x{}", x.rows(), x.cols()),
            });
        }
        if x.cols() == 0 {
            return Err(Error::EmptyBatch { op });
        }
        Ok(())
    }
}

fn relu(m: &Matrix) -> Matrix {
    m.map(|v| if v > 0.0 { v } else { 0.0 })
}

/// Forward pass through the posterior-blended path.
///
/// `x` is `input_dim x batch`. Returns logits as `batch x k` (one row per
/// sample) plus, in training mode, the caches the backward pass needs. In
/// training mode every block also folds the batch into its running mixture
/// statistics; evaluation mode leaves the model untouched.
pub fn forward_cbn(
    model: &mut DualPathModel,
    x: &Matrix,
    mode: Mode,
) -> Result<(Matrix, Option<ForwardCaches>)> {
    model.check_input("forward_cbn", x)?;
    let mut caches = match mode {
        Mode::Train => Some(ForwardCaches {
            blocks: Vec::with_capacity(model.blocks.len()),
            head_in: Matrix::zeros(0, 0),
        }),
        Mode::Eval => None,
    };
    let mut h = x.clone();
    for (linear, site) in &mut model.blocks {
        let a = linear.forward(&h)?;
        let (y, cache) = cbn_forward(&a, &mut site.state, &site.affine, mode)?;
        let next = relu(&y);
        match &mut caches {
            Some(c) => {
                let x_in = std::mem::replace(&mut h, next);
                c.blocks.push(BlockCache {
                    x_in,
                    norm: NormCache::Compound(cache.expect("training cache")),
                    y_norm: y,
                });
            }
            None => h = next,
        }
    }
    let logits = model.head.forward(&h)?.transpose();
    if let Some(c) = &mut caches {
        c.head_in = h;
    }
    Ok((logits, caches))
}

/// Pure forward through the posterior-blended path with pinned posteriors.
///
/// `pinned[i]` is the `batch x m` responsibility matrix to use at block `i`
/// instead of recomputing posteriors from the activations. This is the exact
/// function the backward pass differentiates (posteriors are treated as
/// constants), so finite-difference probes of input or parameter gradients
/// must difference this forward, not [`forward_cbn`].
pub fn forward_cbn_with_posteriors(
    model: &DualPathModel,
    x: &Matrix,
    pinned: &[Matrix],
) -> Result<Matrix> {
    model.check_input("forward_cbn_with_posteriors", x)?;
    if pinned.len() != model.blocks.len() {
        return Err(Error::ShapeMismatch {
            op: "forward_cbn_with_posteriors",
            expected: format!("{} pinned posterior matrices", model.blocks.len()),
            got: format!("{}", pinned.len()),
        });
    }
    let mut h = x.clone();
    for ((linear, site), w) in model.blocks.iter().zip(pinned) {
        let a = linear.forward(&h)?;
        let y = cbn_forward_with_posteriors(&a, &site.state, &site.affine, w)?;
        h = relu(&y);
    }
    Ok(model.head.forward(&h)?.transpose())
}

/// Training-mode forward through the label-routed path.
///
/// Each sample is normalized by the mixture component assigned to its label's
/// group, and every block folds per-group batch moments into that component's
/// statistics. Labels are 1-based. Always returns caches; this path exists
/// only during training.
pub fn forward_sbn(
    model: &mut DualPathModel,
    x: &Matrix,
    labels: &[usize],
    partition: &ClassPartition,
) -> Result<(Matrix, ForwardCaches)> {
    let (logits, caches) = sbn_path(model, x, labels, partition, Mode::Train)?;
    Ok((logits, caches.expect("training cache")))
}

/// Evaluation-mode forward through the label-routed path: normalizes with the
/// current statistics but updates nothing and returns no caches. Used by
/// finite-difference probes, where the routing (fixed by labels) needs no
/// pinning.
pub fn forward_sbn_eval(
    model: &mut DualPathModel,
    x: &Matrix,
    labels: &[usize],
    partition: &ClassPartition,
) -> Result<Matrix> {
    let (logits, _) = sbn_path(model, x, labels, partition, Mode::Eval)?;
    Ok(logits)
}

fn sbn_path(
    model: &mut DualPathModel,
    x: &Matrix,
    labels: &[usize],
    partition: &ClassPartition,
    mode: Mode,
) -> Result<(Matrix, Option<ForwardCaches>)> {
    model.check_input("forward_sbn", x)?;
    if partition.num_groups() > model.spec.m {
        return Err(Error::Config(format!(
            "partition has {} groups but blocks have {} mixture components",
            partition.num_groups(),
            model.spec.m
        )));
    }
    let mut caches = match mode {
        Mode::Train => Some(ForwardCaches {
            blocks: Vec::with_capacity(model.blocks.len()),
            head_in: Matrix::zeros(0, 0),
        }),
        Mode::Eval => None,
    };
    let mut h = x.clone();
    for (linear, site) in &mut model.blocks {
        let a = linear.forward(&h)?;
        let (y, cache) = sbn_forward(&a, labels, partition, &mut site.state, &site.affine, mode)?;
        let next = relu(&y);
        match &mut caches {
            Some(c) => {
                let x_in = std::mem::replace(&mut h, next);
                c.blocks.push(BlockCache {
                    x_in,
                    norm: NormCache::Split(cache.expect("training cache")),
                    y_norm: y,
                });
            }
            None => h = next,
        }
    }
    let logits = model.head.forward(&h)?.transpose();
    if let Some(c) = &mut caches {
        c.head_in = h;
    }
    Ok((logits, caches))
}

/// Evaluation-mode logits from the posterior-blended path (`batch x k`).
pub fn predict(model: &mut DualPathModel, x: &Matrix) -> Result<Matrix> {
    let (logits, _) = forward_cbn(model, x, Mode::Eval)?;
    Ok(logits)
}

/// Accumulate parameter gradients from one or both paths.
///
/// `grad_c` is the loss gradient on the compound-path logits (`batch x k`)
/// with `caches_c` from the matching [`forward_cbn`] call; `split` optionally
/// carries the same pair for the label-routed path. Gradients add into the
/// model's accumulators — shared linear weights and shared affine parameters
/// receive the sum of both paths' contributions. Call
/// [`DualPathModel::zero_grads`] first for a fresh batch.
pub fn backward_dual(
    model: &mut DualPathModel,
    grad_c: &Matrix,
    caches_c: ForwardCaches,
    split: Option<(&Matrix, ForwardCaches)>,
) -> Result<()> {
    backward_path(model, grad_c, caches_c)?;
    if let Some((grad_s, caches_s)) = split {
        backward_path(model, grad_s, caches_s)?;
    }
    Ok(())
}

fn backward_path(
    model: &mut DualPathModel,
    grad_logits: &Matrix,
    mut caches: ForwardCaches,
) -> Result<()> {
    let batch = caches.head_in.cols();
    if grad_logits.rows() != batch || grad_logits.cols() != model.spec.k {
        return Err(Error::ShapeMismatch {
            op: "backward_dual",
            expected: format!("{}x{} logit gradient", batch, model.spec.k),
            got: format!("{}x{}", grad_logits.rows(), grad_logits.cols()),
        });
    }
    if caches.blocks.len() != model.blocks.len() {
        return Err(Error::ShapeMismatch {
            op: "backward_dual",
            expected: format!("{} block caches", model.blocks.len()),
            got: format!("{}", caches.blocks.len()),
        });
    }
    // Head: grad_W += g * h^T, grad_b += row sums, grad_h = W^T * g.
    let grad_out = grad_logits.transpose();
    accumulate_linear_grads(&mut model.head, &grad_out, &caches.head_in)?;
    let mut grad_h = matmul(&model.head.weight.transpose(), &grad_out)?;
    for idx in (0..model.blocks.len()).rev() {
        let cache = caches.blocks.pop().expect("cache per block");
        // Rectifier backward: pass gradient only where the forward was positive.
        if grad_h.shape() != cache.y_norm.shape() {
            return Err(Error::ShapeMismatch {
                op: "backward_dual",
                expected: format!("{}x{} block gradient", cache.y_norm.rows(), cache.y_norm.cols()),
                got: format!("{}x{}", grad_h.rows(), grad_h.cols()),
            });
        }
        let mut grad_y = grad_h;
        for (g, y) in grad_y.as_mut_slice().iter_mut().zip(cache.y_norm.as_slice()) {
            if *y <= 0.0 {
                *g = 0.0;
            }
        }
        let (linear, site) = &mut model.blocks[idx];
        let grad_a = match cache.norm {
            NormCache::Compound(c) => cbn_backward(&grad_y, c, &mut site.affine)?,
            NormCache::Split(s) => sbn_backward(&grad_y, s, &mut site.affine)?,
        };
        accumulate_linear_grads(linear, &grad_a, &cache.x_in)?;
        if idx > 0 {
            grad_h = matmul(&linear.weight.transpose(), &grad_a)?;
        } else {
            grad_h = Matrix::zeros(0, 0);
        }
    }
    let _ = grad_h;
    Ok(())
}

fn accumulate_linear_grads(layer: &mut LinearLayer, grad_out: &Matrix, x_in: &Matrix) -> Result<()> {
    layer.grad_weight.add_assign(&matmul(grad_out, &x_in.transpose())?);
    for o in 0..grad_out.rows() {
        let mut s = 0.0;
        for &g in grad_out.row(o) {
            s += g;
        }
        layer.grad_bias[o] += s;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

const CKPT_MAGIC: &[u8; 8] = b"CBNCKPT\0";
const CKPT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct BlockMeta {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointManifest {
    spec: NetworkSpec,
    step: u64,
    mixtures: Vec<MixtureState>,
    blocks: Vec<BlockMeta>,
}

fn expected_block_metas(spec: &NetworkSpec) -> Vec<BlockMeta> {
    let mut metas = Vec::new();
    let mut in_dim = spec.input_dim;
    for (i, &width) in spec.hidden.iter().enumerate() {
        metas.push(BlockMeta {
            name: format!("block{i}/weight"),
            rows: width,
            cols: in_dim,
        });
        metas.push(BlockMeta {
            name: format!("block{i}/bias"),
            rows: 1,
            cols: width,
        });
        metas.push(BlockMeta {
            name: format!("block{i}/gamma"),
            rows: spec.m,
            cols: width,
        });
        metas.push(BlockMeta {
            name: format!("block{i}/beta"),
            rows: spec.m,
            cols: width,
        });
        in_dim = width;
    }
    metas.push(BlockMeta {
        name: "head/weight".into(),
        rows: spec.k,
        cols: in_dim,
    });
    metas.push(BlockMeta {
        name: "head/bias".into(),
        rows: 1,
        cols: spec.k,
    });
    metas
}

fn push_f64s(buf: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

/// Serialize a model to `path`: a short binary header, a JSON manifest
/// (architecture, step count, per-site mixture statistics), then contiguous
/// little-endian `f64` blocks for every named parameter tensor. Gradient
/// accumulators are not persisted.
pub fn save_checkpoint(model: &DualPathModel, path: &Path) -> Result<()> {
    let manifest = CheckpointManifest {
        spec: model.spec.clone(),
        step: model.step,
        mixtures: model
            .blocks
            .iter()
            .map(|(_, site)| site.state.clone())
            .collect(),
        blocks: expected_block_metas(&model.spec),
    };
    let manifest_json = serde_json::to_vec(&manifest)?;
    let mut buf = Vec::new();
    buf.extend_from_slice(CKPT_MAGIC);
    buf.extend_from_slice(&CKPT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(manifest_json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&manifest_json);
    for (linear, site) in &model.blocks {
        push_f64s(&mut buf, linear.weight.as_slice());
        push_f64s(&mut buf, &linear.bias);
        push_f64s(&mut buf, site.affine.gamma.as_slice());
        push_f64s(&mut buf, site.affine.beta.as_slice());
    }
    push_f64s(&mut buf, model.head.weight.as_slice());
    push_f64s(&mut buf, &model.head.bias);
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

fn take_f64s(data: &[u8], cursor: &mut usize, n: usize) -> Result<Vec<f64>> {
    let bytes = n * 8;
    if *cursor + bytes > data.len() {
        return Err(Error::Malformed("checkpoint parameter data truncated".into()));
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let start = *cursor + i * 8;
        let mut b = [0u8; 8];
        b.copy_from_slice(&data[start..start + 8]);
        out.push(f64::from_le_bytes(b));
    }
    *cursor += bytes;
    Ok(out)
}

/// Load a model saved by [`save_checkpoint`]. Validates the header, the
/// manifest's consistency with its own architecture description, and the
/// exact byte length of the parameter payload. Gradients come back zeroed.
pub fn load_checkpoint(path: &Path) -> Result<DualPathModel> {
    let data = fs::read(path)?;
    if data.len() < 20 || &data[..8] != CKPT_MAGIC {
        return Err(Error::Malformed("not a model checkpoint".into()));
    }
    let version = u32::from_le_bytes(data[8..12].try_into().unwrap());
    if version != CKPT_VERSION {
        return Err(Error::Malformed(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let manifest_len = u64::from_le_bytes(data[12..20].try_into().unwrap()) as usize;
    if data.len() < 20 + manifest_len {
        return Err(Error::Malformed("checkpoint manifest truncated".into()));
    }
    let manifest: CheckpointManifest = serde_json::from_slice(&data[20..20 + manifest_len])?;
    manifest.spec.validate()?;
    let expected = expected_block_metas(&manifest.spec);
    if manifest.blocks.len() != expected.len()
        || manifest
            .blocks
            .iter()
            .zip(&expected)
            .any(|(a, b)| a.name != b.name || a.rows != b.rows || a.cols != b.cols)
    {
        return Err(Error::Malformed(
            "checkpoint block table does not match its architecture".into(),
        ));
    }
    if manifest.mixtures.len() != manifest.spec.hidden.len() {
        return Err(Error::Malformed(
            "checkpoint mixture count does not match its architecture".into(),
        ));
    }
    for (state, &width) in manifest.mixtures.iter().zip(&manifest.spec.hidden) {
        state.validate()?;
        if state.num_components() != manifest.spec.m || state.dim() != width {
            return Err(Error::Malformed(
                "checkpoint mixture shape does not match its architecture".into(),
            ));
        }
    }
    let mut cursor = 20 + manifest_len;
    let mut blocks = Vec::with_capacity(manifest.spec.hidden.len());
    let mut in_dim = manifest.spec.input_dim;
    for (i, &width) in manifest.spec.hidden.iter().enumerate() {
        let weight =
            Matrix::from_vec(width, in_dim, take_f64s(&data, &mut cursor, width * in_dim)?)?;
        let bias = take_f64s(&data, &mut cursor, width)?;
        let m = manifest.spec.m;
        let gamma = Matrix::from_vec(m, width, take_f64s(&data, &mut cursor, m * width)?)?;
        let beta = Matrix::from_vec(m, width, take_f64s(&data, &mut cursor, m * width)?)?;
        let mut affine = AffineParams::new(m, width);
        affine.gamma = gamma;
        affine.beta = beta;
        blocks.push((
            LinearLayer {
                grad_weight: Matrix::zeros(width, in_dim),
                grad_bias: vec![0.0; width],
                weight,
                bias,
            },
            NormSite {
                state: manifest.mixtures[i].clone(),
                affine,
            },
        ));
        in_dim = width;
    }
    let k = manifest.spec.k;
    let head_weight = Matrix::from_vec(k, in_dim, take_f64s(&data, &mut cursor, k * in_dim)?)?;
    let head_bias = take_f64s(&data, &mut cursor, k)?;
    if cursor != data.len() {
        return Err(Error::Malformed(format!(
            "checkpoint has {} trailing bytes",
            data.len() - cursor
        )));
    }
    Ok(DualPathModel {
        head: LinearLayer {
            grad_weight: Matrix::zeros(k, in_dim),
            grad_bias: vec![0.0; k],
            weight: head_weight,
            bias: head_bias,
        },
        spec: manifest.spec,
        blocks,
        step: manifest.step,
    })
}
