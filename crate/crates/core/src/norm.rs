//! Normalization layers over a shared mixture state: the single-component
//! baseline, the posterior-weighted compound form, and the label-routed
//! split form. Forward passes in training mode normalize against the
//! PRE-update running statistics and only then fold the batch into the
//! state; because no gradient flows through statistics, the hand-derived
//! backward passes here are exact, not approximations.
//!
//! Posterior weights are likewise treated as constants in backward
//! (stop-gradient through the responsibility computation). This is a
//! documented limitation, not a toggle.

use crate::data::ClassPartition;
use crate::error::{Error, Result};
use crate::mixture::{em_temporary_stats, responsibilities, MixtureState};
use crate::numerics::{colwise_mean_var, for_each_row_mut, Matrix};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Per-component scale/bias pairs with their gradient accumulators.
/// `gamma` and `beta` are `M x D`; gradients are zeroed between optimizer
/// steps by the training loop.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineParams {
    pub gamma: Matrix,
    pub beta: Matrix,
    pub grad_gamma: Matrix,
    pub grad_beta: Matrix,
}

impl AffineParams {
    pub fn new(m: usize, d: usize) -> Self {
        AffineParams {
            gamma: Matrix::filled(m, d, 1.0),
            beta: Matrix::zeros(m, d),
            grad_gamma: Matrix::zeros(m, d),
            grad_beta: Matrix::zeros(m, d),
        }
    }

    pub fn num_components(&self) -> usize {
        self.gamma.rows()
    }

    pub fn dim(&self) -> usize {
        self.gamma.cols()
    }

    pub fn zero_grads(&mut self) {
        self.grad_gamma.as_mut_slice().fill(0.0);
        self.grad_beta.as_mut_slice().fill(0.0);
    }
}

/// Snapshot kept by a training-mode baseline forward.
#[derive(Debug, Clone)]
pub struct BnCache {
    pub x_hat: Matrix,
    pub inv_std: Vec<f64>,
}

/// Snapshot kept by a training-mode compound forward: the input, every
/// per-component standardization, the posterior weights, and the pre-update
/// inverse standard deviations the backward pass needs.
#[derive(Debug, Clone)]
pub struct CbnCache {
    pub x: Matrix,
    pub x_hat: Vec<Matrix>,
    pub w: Matrix,
    pub inv_std: Vec<Vec<f64>>,
}

/// Snapshot kept by a training-mode split forward: per-point group routing
/// plus the standardization under each point's own component.
#[derive(Debug, Clone)]
pub struct SbnCache {
    pub x: Matrix,
    pub x_hat: Matrix,
    pub groups: Vec<usize>,
    pub inv_std: Vec<Vec<f64>>,
}

fn check_affine(op: &'static str, state: &MixtureState, affine: &AffineParams) -> Result<()> {
    if affine.num_components() != state.num_components() || affine.dim() != state.dim() {
        return Err(Error::ShapeMismatch {
            op,
            expected: format!("affine {}x{}", state.num_components(), state.dim()),
            got: format!("affine {}x{}", affine.num_components(), affine.dim()),
        });
    }
    Ok(())
}

fn check_input(op: &'static str, state: &MixtureState, x: &Matrix) -> Result<()> {
    if x.rows() != state.dim() {
        return Err(Error::ShapeMismatch {
            op,
            expected: format!("{} feature channels", state.dim()),
            got: format!("{}", x.rows()),
        });
    }
    Ok(())
}

fn snapshot_inv_std(state: &MixtureState) -> Vec<Vec<f64>> {
    state
        .var
        .iter()
        .map(|row| row.iter().map(|&v| 1.0 / (v + state.eps).sqrt()).collect())
        .collect()
}

/// Baseline single-component normalization: `y = γ(σ²+ε)^{-1/2}(x-μ) + β`
/// against running statistics. Training mode then blends the batch's plain
/// per-channel moments into the state; the forward output itself always
/// reads the pre-update values.
pub fn bn_forward(
    x: &Matrix,
    state: &mut MixtureState,
    affine: &AffineParams,
    mode: Mode,
) -> Result<(Matrix, Option<BnCache>)> {
    if state.num_components() != 1 {
        return Err(Error::ShapeMismatch {
            op: "bn_forward",
            expected: "a single-component state".into(),
            got: format!("{} components", state.num_components()),
        });
    }
    check_input("bn_forward", state, x)?;
    check_affine("bn_forward", state, affine)?;
    let d = state.dim();
    let inv_std: Vec<f64> = (0..d)
        .map(|ch| 1.0 / (state.var[0][ch] + state.eps).sqrt())
        .collect();

    let mut x_hat = x.clone();
    for_each_row_mut(&mut x_hat, |ch, row| {
        let mu = state.mu[0][ch];
        let iv = inv_std[ch];
        for v in row {
            *v = (*v - mu) * iv;
        }
    });
    let mut y = x_hat.clone();
    for_each_row_mut(&mut y, |ch, row| {
        let g = affine.gamma.get(0, ch);
        let b = affine.beta.get(0, ch);
        for v in row {
            *v = g * *v + b;
        }
    });

    if mode == Mode::Eval {
        return Ok((y, None));
    }
    let (mean, var) = colwise_mean_var(x)?;
    let lambda = state.lambda_c;
    for ch in 0..d {
        state.mu[0][ch] = lambda * state.mu[0][ch] + (1.0 - lambda) * mean[ch];
        state.var[0][ch] = lambda * state.var[0][ch] + (1.0 - lambda) * var[ch];
    }
    Ok((y, Some(BnCache { x_hat, inv_std })))
}

/// Compound normalization: standardize against every component, weight each
/// component's affine output by the posterior responsibility, and sum:
/// `y_i = Σ_j w_ij (γ_j x̂_i^(j) + β_j)`. Training mode then runs the
/// weighted-moment EM step and blends it into the state.
pub fn cbn_forward(
    x: &Matrix,
    state: &mut MixtureState,
    affine: &AffineParams,
    mode: Mode,
) -> Result<(Matrix, Option<CbnCache>)> {
    check_input("cbn_forward", state, x)?;
    check_affine("cbn_forward", state, affine)?;
    let inv_std = snapshot_inv_std(state);
    let x_hat = standardize_all(x, state, &inv_std);
    let w = responsibilities(x, state)?;
    let y = aggregate(&x_hat, &w, affine);

    if mode == Mode::Eval {
        return Ok((y, None));
    }
    let temp = em_temporary_stats(x, &w)?;
    state.accumulate_em(&temp, state.lambda_c);
    Ok((
        y,
        Some(CbnCache {
            x: x.clone(),
            x_hat,
            w,
            inv_std,
        }),
    ))
}

/// The compound output under externally supplied posterior weights: the
/// differentiable-path function whose exact gradient [`cbn_backward`]
/// computes. Gradient checks difference THIS forward when perturbing inputs,
/// because the layer's backward deliberately holds posteriors constant.
/// Pure: no statistic update, no cache.
pub fn cbn_forward_with_posteriors(
    x: &Matrix,
    state: &MixtureState,
    affine: &AffineParams,
    w: &Matrix,
) -> Result<Matrix> {
    check_input("cbn_forward", state, x)?;
    check_affine("cbn_forward", state, affine)?;
    if w.rows() != x.cols() || w.cols() != state.num_components() {
        return Err(Error::ShapeMismatch {
            op: "cbn_forward_with_posteriors",
            expected: format!("posteriors {}x{}", x.cols(), state.num_components()),
            got: format!("{}x{}", w.rows(), w.cols()),
        });
    }
    let inv_std = snapshot_inv_std(state);
    let x_hat = standardize_all(x, state, &inv_std);
    Ok(aggregate(&x_hat, w, affine))
}

fn standardize_all(x: &Matrix, state: &MixtureState, inv_std: &[Vec<f64>]) -> Vec<Matrix> {
    (0..state.num_components())
        .map(|j| {
            let mut h = x.clone();
            for_each_row_mut(&mut h, |ch, row| {
                let mu = state.mu[j][ch];
                let iv = inv_std[j][ch];
                for v in row {
                    *v = (*v - mu) * iv;
                }
            });
            h
        })
        .collect()
}

fn aggregate(x_hat: &[Matrix], w: &Matrix, affine: &AffineParams) -> Matrix {
    let m = x_hat.len();
    let (d, n) = x_hat[0].shape();
    let mut y = Matrix::zeros(d, n);
    for_each_row_mut(&mut y, |ch, row| {
        for (i, out) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for j in 0..m {
                acc += w.get(i, j)
                    * (affine.gamma.get(j, ch) * x_hat[j].get(ch, i) + affine.beta.get(j, ch));
            }
            *out = acc;
        }
    });
    y
}

/// Backward pass of [`cbn_forward`] with responsibilities and statistics
/// held constant:
/// `grad_x_i = Σ_j w_ij γ_j (σ²_j+ε)^{-1/2} ⊙ grad_y_i`,
/// `grad_γ_j += Σ_i w_ij grad_y_i ⊙ x̂_i^(j)`, `grad_β_j += Σ_i w_ij grad_y_i`.
pub fn cbn_backward(grad_y: &Matrix, cache: CbnCache, affine: &mut AffineParams) -> Result<Matrix> {
    if grad_y.shape() != cache.x.shape() {
        return Err(Error::ShapeMismatch {
            op: "cbn_backward",
            expected: format!("output gradient {}x{}", cache.x.rows(), cache.x.cols()),
            got: format!("{}x{}", grad_y.rows(), grad_y.cols()),
        });
    }
    let m = cache.w.cols();
    if affine.num_components() != m || affine.dim() != cache.x.rows() {
        return Err(Error::ShapeMismatch {
            op: "cbn_backward",
            expected: format!("affine {m}x{}", cache.x.rows()),
            got: format!("affine {}x{}", affine.num_components(), affine.dim()),
        });
    }
    let n = cache.x.cols();

    let mut grad_x = grad_y.clone();
    {
        let w = &cache.w;
        let inv_std = &cache.inv_std;
        let gamma = &affine.gamma;
        for_each_row_mut(&mut grad_x, |ch, row| {
            for (i, v) in row.iter_mut().enumerate() {
                let mut scale = 0.0;
                for j in 0..m {
                    scale += w.get(i, j) * gamma.get(j, ch) * inv_std[j][ch];
                }
                *v *= scale;
            }
        });
    }

    let d = cache.x.rows();
    let accumulate = |(j, (g_row, b_row)): (usize, (&mut [f64], &mut [f64]))| {
        for ch in 0..d {
            let hat = cache.x_hat[j].row(ch);
            let grad = grad_y.row(ch);
            let mut g_acc = 0.0;
            let mut b_acc = 0.0;
            for i in 0..n {
                let wg = cache.w.get(i, j) * grad[i];
                g_acc += wg * hat[i];
                b_acc += wg;
            }
            g_row[ch] += g_acc;
            b_row[ch] += b_acc;
        }
    };
    #[cfg(feature = "parallel")]
    affine
        .grad_gamma
        .as_mut_slice()
        .par_chunks_mut(d)
        .zip(affine.grad_beta.as_mut_slice().par_chunks_mut(d))
        .enumerate()
        .for_each(accumulate);
    #[cfg(not(feature = "parallel"))]
    affine
        .grad_gamma
        .as_mut_slice()
        .chunks_mut(d)
        .zip(affine.grad_beta.as_mut_slice().chunks_mut(d))
        .enumerate()
        .for_each(accumulate);

    Ok(grad_x)
}

/// Split normalization: each point is standardized by the single component
/// its label's group owns, `y_i = γ_{s_i}(σ²_{s_i}+ε)^{-1/2}(x_i-μ_{s_i}) + β_{s_i}`.
/// Training mode then blends each group's plain biased moments into that
/// group's component (priors untouched); groups absent from the batch are
/// skipped. Evaluation never routes through this layer in the full model,
/// but eval mode is still honored: normalize only, no update, no cache.
pub fn sbn_forward(
    x: &Matrix,
    labels: &[usize],
    partition: &ClassPartition,
    state: &mut MixtureState,
    affine: &AffineParams,
    mode: Mode,
) -> Result<(Matrix, Option<SbnCache>)> {
    check_input("sbn_forward", state, x)?;
    check_affine("sbn_forward", state, affine)?;
    if labels.len() != x.cols() {
        return Err(Error::ShapeMismatch {
            op: "sbn_forward",
            expected: format!("{} labels", x.cols()),
            got: format!("{}", labels.len()),
        });
    }
    if partition.num_groups() != state.num_components() {
        return Err(Error::ShapeMismatch {
            op: "sbn_forward",
            expected: format!("{} label groups", state.num_components()),
            got: format!("{}", partition.num_groups()),
        });
    }
    let groups = labels
        .iter()
        .map(|&label| partition.group_of(label))
        .collect::<Result<Vec<usize>>>()?;
    let inv_std = snapshot_inv_std(state);
    let n = x.cols();

    let mut x_hat = x.clone();
    {
        let groups = &groups;
        let inv_std = &inv_std;
        for_each_row_mut(&mut x_hat, |ch, row| {
            for (i, v) in row.iter_mut().enumerate() {
                let j = groups[i];
                *v = (*v - state.mu[j][ch]) * inv_std[j][ch];
            }
        });
    }
    let mut y = x_hat.clone();
    {
        let groups = &groups;
        for_each_row_mut(&mut y, |ch, row| {
            for (i, v) in row.iter_mut().enumerate() {
                let j = groups[i];
                *v = affine.gamma.get(j, ch) * *v + affine.beta.get(j, ch);
            }
        });
    }

    if mode == Mode::Eval {
        return Ok((y, None));
    }

    // Per-group biased moments over the group's own points, folded into the
    // group's component in ascending group order.
    let d = state.dim();
    let lambda_s = state.lambda_s;
    for j in 0..state.num_components() {
        let members: Vec<usize> = (0..n).filter(|&i| groups[i] == j).collect();
        if members.is_empty() {
            continue;
        }
        let count = members.len() as f64;
        let mut mu_s = vec![0.0; d];
        let mut var_s = vec![0.0; d];
        for ch in 0..d {
            let feats = x.row(ch);
            let mut acc = 0.0;
            for &i in &members {
                acc += feats[i];
            }
            let mean = acc / count;
            let mut sq = 0.0;
            for &i in &members {
                let dev = feats[i] - mean;
                sq += dev * dev;
            }
            mu_s[ch] = mean;
            var_s[ch] = sq / count;
        }
        state.accumulate_split(j, &mu_s, &var_s, lambda_s);
    }

    Ok((
        y,
        Some(SbnCache {
            x: x.clone(),
            x_hat,
            groups,
            inv_std,
        }),
    ))
}

/// Backward pass of [`sbn_forward`]: the compound formulas with the
/// posterior replaced by the one-hot group indicator.
pub fn sbn_backward(grad_y: &Matrix, cache: SbnCache, affine: &mut AffineParams) -> Result<Matrix> {
    if grad_y.shape() != cache.x.shape() {
        return Err(Error::ShapeMismatch {
            op: "sbn_backward",
            expected: format!("output gradient {}x{}", cache.x.rows(), cache.x.cols()),
            got: format!("{}x{}", grad_y.rows(), grad_y.cols()),
        });
    }
    let d = cache.x.rows();
    let n = cache.x.cols();

    let mut grad_x = grad_y.clone();
    {
        let groups = &cache.groups;
        let inv_std = &cache.inv_std;
        let gamma = &affine.gamma;
        for_each_row_mut(&mut grad_x, |ch, row| {
            for (i, v) in row.iter_mut().enumerate() {
                let j = groups[i];
                *v *= gamma.get(j, ch) * inv_std[j][ch];
            }
        });
    }

    for i in 0..n {
        let j = cache.groups[i];
        for ch in 0..d {
            let g = grad_y.get(ch, i);
            let cur = affine.grad_gamma.get(j, ch);
            affine.grad_gamma.set(j, ch, cur + g * cache.x_hat.get(ch, i));
            let cur = affine.grad_beta.get(j, ch);
            affine.grad_beta.set(j, ch, cur + g);
        }
    }

    Ok(grad_x)
}
