//! Dual-path training loop: per batch, a weak and a strong distortion of the
//! same samples each run through both normalization paths (order: weak
//! blended, weak routed, strong blended, strong routed, so running statistics
//! fold in all four views), a prior-corrected classification loss scores the
//! strong blended logits, a cross-view consistency loss couples the two
//! strong outputs to the opposite path's detached weak outputs, and a single
//! backward pass accumulates both paths' gradients into the shared
//! parameters before an SGD step on a cosine learning-rate schedule.
//!
//! An optional second stage freezes everything but the classifier head
//! (running statistics keep updating) and can switch to class-balanced
//! resampling and/or inverse-frequency loss weights. Without the two-stage
//! split, those options apply to the whole run.
//!
//! Determinism contract: every random decision derives from the run seed via
//! position-independent labeled splits — `epoch{e}/shuffle`,
//! `epoch{e}/resample`, `epoch{e}/batch{b}/weak`, `epoch{e}/batch{b}/strong`
//! (`e` and `b` 0-based) — so two runs with the same config and dataset
//! produce bit-identical records, and a reference loop can reproduce the
//! exact draw sequence.

use serde::{Deserialize, Serialize};

use crate::data::{augment, subgroup_masks, AugmentPolicy, ClassPartition, Dataset, Strength};
use crate::error::{Error, Result};
use crate::losses::{balanced_softmax_ce, cosine_consistency, ClassCounts};
use crate::model::{
    backward_dual, forward_cbn, forward_sbn, predict, DualPathModel, NetworkSpec, NormKind,
};
use crate::norm::Mode;
use crate::numerics::{Matrix, Rng};

/// Half-cosine interpolation from `lr_max` (step 0) down to `lr_min`
/// (step = `total_steps`).
pub fn cosine_lr(step: u64, total_steps: u64, lr_max: f64, lr_min: f64) -> f64 {
    if total_steps == 0 {
        return lr_max;
    }
    let frac = step as f64 / total_steps as f64;
    lr_min + 0.5 * (lr_max - lr_min) * (1.0 + (std::f64::consts::PI * frac).cos())
}

/// Everything a training run depends on besides the dataset itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Total epochs (both stages combined when `decouple` is set).
    pub epochs: usize,
    /// Minibatch size; clamped to the dataset size with a warning.
    pub batch_size: usize,
    /// Peak learning rate (cosine schedule start).
    pub lr: f64,
    /// Final learning rate (cosine schedule end).
    pub lr_min: f64,
    /// SGD momentum coefficient (0 disables the velocity buffer).
    pub sgd_momentum: f64,
    /// Nesterov lookahead on top of momentum.
    pub nesterov: bool,
    /// L2 penalty added to gradients as `wd * parameter`.
    pub weight_decay: f64,
    /// Statistics blending momentum for plain (single-component) blocks.
    pub lambda: f64,
    /// Statistics blending momentum for posterior-weighted updates.
    pub lambda_c: f64,
    /// Statistics blending momentum for label-routed updates.
    pub lambda_s: f64,
    /// Variance floor inside every normalization.
    pub eps: f64,
    /// Mixture components per hidden block.
    pub m: usize,
    /// Normalization flavor (`plain` forces `m = 1`).
    pub norm: NormKind,
    /// Whether the label-routed path runs at all.
    pub sbn: bool,
    /// Hidden block widths.
    pub hidden: Vec<usize>,
    /// Half-width of the uniform jitter on initial component means.
    pub mixture_jitter: f64,
    /// Weight on the classification loss.
    pub w_cls: f64,
    /// Weight on the cross-view consistency loss.
    pub w_sim: f64,
    /// Also apply the classification loss to the routed path's strong logits.
    pub sbn_cls_loss: bool,
    /// Root seed for shuffling, sampling, and augmentation.
    pub seed: u64,
    /// Run a second, classifier-only stage at the end.
    pub decouple: bool,
    /// Fraction of `epochs` spent in the classifier-only stage.
    pub decouple_fraction: f64,
    /// Class-balanced resampling (uniform class, then uniform instance).
    pub resample: bool,
    /// Inverse-frequency weighting of the classification loss.
    pub reweight: bool,
    /// Distortion magnitudes for the weak/strong views.
    pub augment: AugmentPolicy,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 128,
            lr: 0.05,
            lr_min: 0.0,
            sgd_momentum: 0.0,
            nesterov: false,
            weight_decay: 0.0,
            lambda: 0.1,
            lambda_c: 0.1,
            lambda_s: 0.1,
            eps: 1e-5,
            m: 4,
            norm: NormKind::Compound,
            sbn: true,
            hidden: vec![32],
            mixture_jitter: 0.25,
            w_cls: 1.0,
            w_sim: 1.0,
            sbn_cls_loss: false,
            seed: 0,
            decouple: false,
            decouple_fraction: 0.2,
            resample: false,
            reweight: false,
            augment: AugmentPolicy::default(),
        }
    }
}

impl TrainConfig {
    /// Reject configurations that cannot be trained as stated.
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        for (name, v) in [
            ("lr", self.lr),
            ("lr_min", self.lr_min),
            ("sgd_momentum", self.sgd_momentum),
            ("weight_decay", self.weight_decay),
            ("w_cls", self.w_cls),
            ("w_sim", self.w_sim),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!("{name} must be finite and >= 0")));
            }
        }
        if self.lr_min > self.lr {
            return Err(Error::Config("lr_min must not exceed lr".into()));
        }
        if self.sgd_momentum >= 1.0 {
            return Err(Error::Config("sgd_momentum must be below 1".into()));
        }
        for (name, v) in [
            ("lambda", self.lambda),
            ("lambda_c", self.lambda_c),
            ("lambda_s", self.lambda_s),
        ] {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1]")));
            }
        }
        if !self.eps.is_finite() || self.eps <= 0.0 {
            return Err(Error::Config("eps must be finite and positive".into()));
        }
        if self.m == 0 {
            return Err(Error::Config("m must be at least 1".into()));
        }
        if self.norm == NormKind::Plain && self.m != 1 {
            return Err(Error::Config("plain normalization requires m = 1".into()));
        }
        if !self.sbn && self.w_sim != 0.0 {
            return Err(Error::Config(
                "the consistency loss requires the label-routed path; set w_sim = 0 or enable it"
                    .into(),
            ));
        }
        if self.sbn_cls_loss && !self.sbn {
            return Err(Error::Config(
                "sbn_cls_loss needs the label-routed path enabled".into(),
            ));
        }
        if !self.decouple_fraction.is_finite() || !(0.0..=1.0).contains(&self.decouple_fraction) {
            return Err(Error::Config("decouple_fraction must lie in [0, 1]".into()));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::Config(
                "hidden widths must be non-empty and positive".into(),
            ));
        }
        if !self.mixture_jitter.is_finite() || self.mixture_jitter < 0.0 {
            return Err(Error::Config("mixture_jitter must be finite and >= 0".into()));
        }
        Ok(())
    }

    /// The architecture this config trains on a `d`-dimensional, `k`-class
    /// dataset.
    pub fn network_spec(&self, d: usize, k: usize) -> NetworkSpec {
        NetworkSpec {
            input_dim: d,
            hidden: self.hidden.clone(),
            norm: self.norm,
            m: self.m,
            k,
            mixture_jitter: self.mixture_jitter,
        }
    }

    /// Statistics momentum for posterior-weighted updates: plain blocks use
    /// the single-statistic momentum knob.
    pub fn effective_lambda_c(&self) -> f64 {
        match self.norm {
            NormKind::Plain => self.lambda,
            NormKind::Compound => self.lambda_c,
        }
    }

    /// Epochs assigned to the classifier-only stage under `decouple_fraction`.
    pub fn finetune_epochs(&self) -> usize {
        ((self.decouple_fraction * self.epochs as f64).round() as usize).min(self.epochs)
    }
}

/// One epoch's record: losses averaged over the epoch's training samples,
/// held-out accuracies in percent, the learning rate at the epoch's first
/// step, and the cumulative starvation-event count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// 1-based epoch index.
    pub epoch: usize,
    /// Mean classification loss over the epoch's training samples.
    pub cls_loss: f64,
    /// Mean consistency loss over the epoch's training samples (0 when the
    /// consistency loss is inactive).
    pub sim_loss: f64,
    /// Overall top-1 accuracy (percent) on the held-out split.
    pub top1: f64,
    /// Top-1 accuracy (percent) over classes with many training samples.
    pub many: Option<f64>,
    /// Top-1 accuracy (percent) over classes with a medium sample count.
    pub medium: Option<f64>,
    /// Top-1 accuracy (percent) over classes with few training samples.
    pub few: Option<f64>,
    /// Learning rate at the first step of the epoch.
    pub lr: f64,
    /// Starvation events accumulated since training started.
    pub starvation_events: u64,
}

/// Accuracy summary in percent; a subgroup is `None` when the evaluation set
/// contains no samples of its classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub top1: f64,
    pub many: Option<f64>,
    pub medium: Option<f64>,
    pub few: Option<f64>,
}

/// Normalized inverse-frequency class weights: `w_c ∝ 1/n_c`, summing to 1.
/// Classes with zero training samples get weight 0.
pub fn inverse_frequency_weights(counts: &[usize]) -> Vec<f64> {
    let inv: Vec<f64> = counts
        .iter()
        .map(|&n| if n == 0 { 0.0 } else { 1.0 / n as f64 })
        .collect();
    let total: f64 = inv.iter().sum();
    inv.iter().map(|v| v / total).collect()
}

/// Draw `n` training indices class-balanced: uniform over classes with at
/// least one instance, then uniform over that class's instances.
pub fn class_balanced_indices(per_class: &[Vec<usize>], n: usize, rng: &mut Rng) -> Vec<usize> {
    let nonempty: Vec<&Vec<usize>> = per_class.iter().filter(|c| !c.is_empty()).collect();
    assert!(!nonempty.is_empty(), "no instances to sample");
    (0..n)
        .map(|_| {
            let class = nonempty[rng.index(nonempty.len())];
            class[rng.index(class.len())]
        })
        .collect()
}

fn gather_columns(x: &Matrix, idx: &[usize]) -> Matrix {
    let mut out = Matrix::zeros(x.rows(), idx.len());
    for (j, &src) in idx.iter().enumerate() {
        for r in 0..x.rows() {
            out.set(r, j, x.get(r, src));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Stage {
    Representation,
    ClassifierOnly,
}

/// Drives a training run one epoch at a time so callers can stream records
/// and write checkpoints between epochs. [`train_run`] and
/// [`decoupled_finetune`] are the two packaged plans.
pub struct Trainer<'d> {
    data: &'d Dataset,
    config: TrainConfig,
    partition: ClassPartition,
    counts: ClassCounts,
    train_counts: Vec<usize>,
    class_weights: Vec<f64>,
    per_class_indices: Vec<Vec<usize>>,
    batch: usize,
    steps_per_epoch: u64,
    total_steps: u64,
    rep_epochs: usize,
    total_epochs: usize,
    next_epoch: usize,
    root: Rng,
    velocity: Option<Vec<Vec<f64>>>,
    warnings: Vec<String>,
}

impl<'d> Trainer<'d> {
    /// Plan a run over `data`. `partition` maps labels to routing groups and
    /// must agree with the model the epochs will be fed.
    pub fn new(data: &'d Dataset, partition: ClassPartition, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let n = data.train_y.len();
        if n == 0 {
            return Err(Error::EmptyBatch { op: "train" });
        }
        let mut warnings = Vec::new();
        let batch = if config.batch_size > n {
            warnings.push(format!(
                "batch size {} exceeds the {} training samples; using {}",
                config.batch_size, n, n
            ));
            n
        } else {
            config.batch_size
        };
        let train_counts = data.train_counts();
        let counts = ClassCounts::new(&train_counts)?;
        let class_weights = inverse_frequency_weights(&train_counts);
        let mut per_class_indices = vec![Vec::new(); data.k];
        for (i, &label) in data.train_y.iter().enumerate() {
            per_class_indices[label - 1].push(i);
        }
        let steps_per_epoch = n.div_ceil(batch) as u64;
        let rep_epochs = if config.decouple {
            config.epochs - config.finetune_epochs()
        } else {
            config.epochs
        };
        let root = Rng::new(config.seed);
        Ok(Trainer {
            data,
            partition,
            counts,
            train_counts,
            class_weights,
            per_class_indices,
            batch,
            steps_per_epoch,
            total_steps: config.epochs as u64 * steps_per_epoch,
            rep_epochs,
            total_epochs: config.epochs,
            next_epoch: 0,
            root,
            velocity: None,
            warnings,
            config,
        })
    }

    /// Advisories produced while planning (currently: batch-size clamping).
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Epochs this plan will run in total.
    pub fn total_epochs(&self) -> usize {
        self.total_epochs
    }

    /// Restrict the plan to the classifier-only stage: `finetune_epochs()`
    /// head-only epochs with a cosine arc spanning exactly those steps.
    fn classifier_stage_only(&mut self) {
        let ft = self.config.finetune_epochs();
        self.rep_epochs = 0;
        self.total_epochs = ft;
        self.total_steps = ft as u64 * self.steps_per_epoch;
    }

    /// Run the next planned epoch. Returns `None` once the plan is done.
    pub fn next_epoch(&mut self, model: &mut DualPathModel) -> Result<Option<RunRecord>> {
        if self.next_epoch >= self.total_epochs {
            return Ok(None);
        }
        let epoch = self.next_epoch;
        self.next_epoch += 1;
        let stage = if epoch < self.rep_epochs {
            Stage::Representation
        } else {
            Stage::ClassifierOnly
        };
        let record = self.run_epoch(model, epoch, stage)?;
        Ok(Some(record))
    }

    fn run_epoch(
        &mut self,
        model: &mut DualPathModel,
        epoch: usize,
        stage: Stage,
    ) -> Result<RunRecord> {
        let data = self.data;
        let n = data.train_y.len();
        let k = model.spec.k;
        let head_only = stage == Stage::ClassifierOnly;
        // Without the two-stage split, resampling/reweighting cover the whole
        // run; with it, they are classifier-stage options.
        let stage_options_active = if self.config.decouple { head_only } else { true };
        let use_resample = self.config.resample && stage_options_active;
        let use_reweight = self.config.reweight && stage_options_active;
        let sim_active = self.config.sbn && self.config.w_sim != 0.0;

        let indices: Vec<usize> = if use_resample {
            let mut rng = self.root.split(&format!("epoch{epoch}/resample"));
            class_balanced_indices(&self.per_class_indices, n, &mut rng)
        } else {
            let mut idx: Vec<usize> = (0..n).collect();
            let mut rng = self.root.split(&format!("epoch{epoch}/shuffle"));
            rng.shuffle(&mut idx);
            idx
        };

        let lr_first = cosine_lr(model.step, self.total_steps, self.config.lr, self.config.lr_min);
        let mut cls_sum = 0.0;
        let mut sim_sum = 0.0;
        let mut start = 0;
        let mut batch_idx = 0usize;
        while start < n {
            let end = (start + self.batch).min(n);
            let idx = &indices[start..end];
            let bsz = idx.len();
            let y: Vec<usize> = idx.iter().map(|&i| data.train_y[i]).collect();
            let x_raw = gather_columns(&data.train_x, idx);
            let mut weak_rng = self.root.split(&format!("epoch{epoch}/batch{batch_idx}/weak"));
            let weak = augment(&x_raw, &self.config.augment, Strength::Weak, &mut weak_rng);
            let mut strong_rng = self
                .root
                .split(&format!("epoch{epoch}/batch{batch_idx}/strong"));
            let strong = augment(&x_raw, &self.config.augment, Strength::Strong, &mut strong_rng);

            let lr = cosine_lr(model.step, self.total_steps, self.config.lr, self.config.lr_min);

            // Forward all four views in the statistics-update order: weak
            // before strong, blended before routed. Weak caches are dropped —
            // no gradient ever flows through the weak views.
            let (oc_weak, _) = forward_cbn(model, &weak, Mode::Train)?;
            let os_weak = if self.config.sbn {
                Some(forward_sbn(model, &weak, &y, &self.partition)?.0)
            } else {
                None
            };
            let (oc_strg, caches_c) = forward_cbn(model, &strong, Mode::Train)?;
            let caches_c = caches_c.expect("training caches");
            let strong_split = if self.config.sbn {
                Some(forward_sbn(model, &strong, &y, &self.partition)?)
            } else {
                None
            };

            // Per-sample classification weights: uniform mean, or a weighted
            // mean under normalized inverse-frequency class weights.
            let u: Vec<f64> = if use_reweight {
                let raw: Vec<f64> = y.iter().map(|&l| self.class_weights[l - 1]).collect();
                let total: f64 = raw.iter().sum();
                raw.iter().map(|w| w / total).collect()
            } else {
                vec![1.0 / bsz as f64; bsz]
            };

            let mut grad_c = Matrix::zeros(bsz, k);
            let mut grad_s = Matrix::zeros(bsz, k);
            let mut batch_cls = 0.0;
            for i in 0..bsz {
                let (loss, grad) = balanced_softmax_ce(oc_strg.row(i), &self.counts, y[i])?;
                batch_cls += u[i] * loss;
                let scale = self.config.w_cls * u[i];
                for j in 0..k {
                    grad_c.set(i, j, grad_c.get(i, j) + scale * grad[j]);
                }
                if self.config.sbn_cls_loss {
                    let os = strong_split.as_ref().expect("routed path on").0.row(i);
                    let (loss_s, grad_split) = balanced_softmax_ce(os, &self.counts, y[i])?;
                    batch_cls += u[i] * loss_s;
                    for j in 0..k {
                        grad_s.set(i, j, grad_s.get(i, j) + scale * grad_split[j]);
                    }
                }
            }
            let mut batch_sim = 0.0;
            if sim_active {
                let os_weak = os_weak.as_ref().expect("routed path on");
                let os_strg = &strong_split.as_ref().expect("routed path on").0;
                let inv_b = 1.0 / bsz as f64;
                let scale = self.config.w_sim * inv_b;
                for i in 0..bsz {
                    let (loss, grad_blend, grad_route) = cosine_consistency(
                        oc_strg.row(i),
                        os_weak.row(i),
                        os_strg.row(i),
                        oc_weak.row(i),
                    )?;
                    batch_sim += inv_b * loss;
                    for j in 0..k {
                        grad_c.set(i, j, grad_c.get(i, j) + scale * grad_blend[j]);
                        grad_s.set(i, j, grad_s.get(i, j) + scale * grad_route[j]);
                    }
                }
            }
            let total_loss = self.config.w_cls * batch_cls + self.config.w_sim * batch_sim;
            if !total_loss.is_finite() {
                return Err(Error::NonFinite {
                    what: "training loss".into(),
                });
            }
            cls_sum += batch_cls * bsz as f64;
            sim_sum += batch_sim * bsz as f64;

            model.zero_grads();
            match strong_split {
                Some((_, caches_s)) => {
                    backward_dual(model, &grad_c, caches_c, Some((&grad_s, caches_s)))?
                }
                None => backward_dual(model, &grad_c, caches_c, None)?,
            }
            if !grads_finite(model) {
                return Err(Error::NonFinite {
                    what: "parameter gradients".into(),
                });
            }
            self.sgd_step(model, lr, head_only);
            model.step += 1;
            start = end;
            batch_idx += 1;
        }

        let metrics = evaluate(model, &data.test_x, &data.test_y, &self.train_counts)?;
        Ok(RunRecord {
            epoch: epoch + 1,
            cls_loss: cls_sum / n as f64,
            sim_loss: sim_sum / n as f64,
            top1: metrics.top1,
            many: metrics.many,
            medium: metrics.medium,
            few: metrics.few,
            lr: lr_first,
            starvation_events: model.starvation_events(),
        })
    }

    fn sgd_step(&mut self, model: &mut DualPathModel, lr: f64, head_only: bool) {
        let momentum = self.config.sgd_momentum;
        let wd = self.config.weight_decay;
        let nesterov = self.config.nesterov;
        if momentum > 0.0 && self.velocity.is_none() {
            let mut v = Vec::new();
            for (linear, site) in &model.blocks {
                v.push(vec![0.0; linear.weight.as_slice().len()]);
                v.push(vec![0.0; linear.bias.len()]);
                v.push(vec![0.0; site.affine.gamma.as_slice().len()]);
                v.push(vec![0.0; site.affine.beta.as_slice().len()]);
            }
            v.push(vec![0.0; model.head.weight.as_slice().len()]);
            v.push(vec![0.0; model.head.bias.len()]);
            self.velocity = Some(v);
        }
        let mut slot = 0usize;
        for (linear, site) in &mut model.blocks {
            step_tensor(
                linear.weight.as_mut_slice(),
                linear.grad_weight.as_slice(),
                self.velocity.as_mut().map(|v| &mut v[slot]),
                lr, momentum, wd, nesterov, head_only,
            );
            step_tensor(
                &mut linear.bias,
                &linear.grad_bias,
                self.velocity.as_mut().map(|v| &mut v[slot + 1]),
                lr, momentum, wd, nesterov, head_only,
            );
            step_tensor(
                site.affine.gamma.as_mut_slice(),
                site.affine.grad_gamma.as_slice(),
                self.velocity.as_mut().map(|v| &mut v[slot + 2]),
                lr, momentum, wd, nesterov, head_only,
            );
            step_tensor(
                site.affine.beta.as_mut_slice(),
                site.affine.grad_beta.as_slice(),
                self.velocity.as_mut().map(|v| &mut v[slot + 3]),
                lr, momentum, wd, nesterov, head_only,
            );
            slot += 4;
        }
        step_tensor(
            model.head.weight.as_mut_slice(),
            model.head.grad_weight.as_slice(),
            self.velocity.as_mut().map(|v| &mut v[slot]),
            lr, momentum, wd, nesterov, false,
        );
        step_tensor(
            &mut model.head.bias,
            &model.head.grad_bias,
            self.velocity.as_mut().map(|v| &mut v[slot + 1]),
            lr, momentum, wd, nesterov, false,
        );
    }
}

#[allow(clippy::too_many_arguments)]
fn step_tensor(
    params: &mut [f64],
    grads: &[f64],
    velocity: Option<&mut Vec<f64>>,
    lr: f64,
    momentum: f64,
    wd: f64,
    nesterov: bool,
    frozen: bool,
) {
    if frozen {
        return;
    }
    match velocity {
        Some(vel) => {
            for ((p, &g), v) in params.iter_mut().zip(grads).zip(vel.iter_mut()) {
                let grad = g + wd * *p;
                *v = momentum * *v + grad;
                let eff = if nesterov { grad + momentum * *v } else { *v };
                *p -= lr * eff;
            }
        }
        None => {
            for (p, &g) in params.iter_mut().zip(grads) {
                *p -= lr * (g + wd * *p);
            }
        }
    }
}

fn grads_finite(model: &DualPathModel) -> bool {
    let finite = |s: &[f64]| s.iter().all(|v| v.is_finite());
    model.blocks.iter().all(|(linear, site)| {
        finite(linear.grad_weight.as_slice())
            && finite(&linear.grad_bias)
            && finite(site.affine.grad_gamma.as_slice())
            && finite(site.affine.grad_beta.as_slice())
    }) && finite(model.head.grad_weight.as_slice())
        && finite(&model.head.grad_bias)
}

/// Build the model a run starts from: parameters drawn from the labeled
/// child streams of `Rng::new(config.seed)` (`init/block{i}/linear`,
/// `init/block{i}/mixture`, `init/head`), then the statistics knobs applied.
/// Every entry point uses this one recipe so runs are reproducible from the
/// config alone.
pub fn build_model(config: &TrainConfig, d: usize, k: usize) -> Result<DualPathModel> {
    let mut rng = Rng::new(config.seed);
    let mut model = DualPathModel::new(config.network_spec(d, k), &mut rng)?;
    model.set_statistics_config(config.eps, config.effective_lambda_c(), config.lambda_s);
    Ok(model)
}

/// Run the full plan described by `config`: the representation stage, then —
/// when `decouple` is set — the classifier-only stage, under one cosine arc.
/// Returns one record per epoch. Planning advisories go to standard error.
pub fn train_run(
    model: &mut DualPathModel,
    data: &Dataset,
    partition: ClassPartition,
    config: TrainConfig,
) -> Result<Vec<RunRecord>> {
    let mut trainer = Trainer::new(data, partition, config)?;
    for w in trainer.warnings() {
        eprintln!("warning: {w}");
    }
    let mut records = Vec::with_capacity(trainer.total_epochs());
    while let Some(record) = trainer.next_epoch(model)? {
        records.push(record);
    }
    Ok(records)
}

/// Run only the classifier-only stage on an already-trained model:
/// `finetune_epochs()` epochs with every parameter except the classifier
/// head frozen (statistics keep updating), honoring the resample/reweight
/// flags. A zero fraction runs nothing and leaves the model untouched.
pub fn decoupled_finetune(
    model: &mut DualPathModel,
    data: &Dataset,
    partition: ClassPartition,
    config: TrainConfig,
) -> Result<Vec<RunRecord>> {
    let mut trainer = Trainer::new(data, partition, config)?;
    trainer.classifier_stage_only();
    for w in trainer.warnings() {
        eprintln!("warning: {w}");
    }
    let mut records = Vec::with_capacity(trainer.total_epochs());
    while let Some(record) = trainer.next_epoch(model)? {
        records.push(record);
    }
    Ok(records)
}

/// Evaluate `model` on a labeled feature set: top-1 accuracy in percent,
/// plus per-subgroup accuracies under the shot-frequency masks derived from
/// `train_counts`. Prediction runs in fixed chunks with an in-order merge,
/// so the result is deterministic.
pub fn evaluate(
    model: &mut DualPathModel,
    x: &Matrix,
    y: &[usize],
    train_counts: &[usize],
) -> Result<Metrics> {
    if x.cols() != y.len() {
        return Err(Error::ShapeMismatch {
            op: "evaluate",
            expected: format!("{} labels", x.cols()),
            got: format!("{}", y.len()),
        });
    }
    if y.is_empty() {
        return Err(Error::EmptyBatch { op: "evaluate" });
    }
    let k = train_counts.len();
    let mut correct_per_class = vec![0usize; k];
    let mut total_per_class = vec![0usize; k];
    const CHUNK: usize = 512;
    let mut start = 0;
    while start < y.len() {
        let end = (start + CHUNK).min(y.len());
        let idx: Vec<usize> = (start..end).collect();
        let chunk = gather_columns(x, &idx);
        let logits = predict(model, &chunk)?;
        for (row, &label) in (0..end - start).zip(&y[start..end]) {
            if label == 0 || label > k {
                return Err(Error::UnknownLabel {
                    label,
                    num_classes: k,
                });
            }
            let o = logits.row(row);
            let mut best = 0usize;
            for j in 1..o.len() {
                if o[j] > o[best] {
                    best = j;
                }
            }
            total_per_class[label - 1] += 1;
            if best + 1 == label {
                correct_per_class[label - 1] += 1;
            }
        }
        start = end;
    }
    let masks = subgroup_masks(train_counts);
    let acc_over = |labels: &[usize]| -> Option<f64> {
        let total: usize = labels.iter().map(|&l| total_per_class[l - 1]).sum();
        if total == 0 {
            return None;
        }
        let correct: usize = labels.iter().map(|&l| correct_per_class[l - 1]).sum();
        Some(100.0 * correct as f64 / total as f64)
    };
    let total: usize = total_per_class.iter().sum();
    let correct: usize = correct_per_class.iter().sum();
    Ok(Metrics {
        top1: 100.0 * correct as f64 / total as f64,
        many: acc_over(&masks.many),
        medium: acc_over(&masks.medium),
        few: acc_over(&masks.few),
    })
}
