//! Training configuration assembly: defaults, then a flat key-value config
//! file, then command-line flags, then the `CNL_SEED` environment variable —
//! each layer overriding the one before it, field by field.

use crate::args::TrainArgs;
use cbn_core::{NormKind, TrainConfig};

/// One layer of optional settings. `None` means "this layer doesn't say".
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub lr: Option<f64>,
    pub lr_min: Option<f64>,
    pub sgd_momentum: Option<f64>,
    pub nesterov: Option<bool>,
    pub weight_decay: Option<f64>,
    pub lambda: Option<f64>,
    pub lambda_c: Option<f64>,
    pub lambda_s: Option<f64>,
    pub momentum_on_new: Option<bool>,
    pub eps: Option<f64>,
    pub m: Option<usize>,
    pub norm: Option<NormKind>,
    pub sbn: Option<bool>,
    pub hidden: Option<Vec<usize>>,
    pub mixture_jitter: Option<f64>,
    pub w_cls: Option<f64>,
    pub w_sim: Option<f64>,
    pub sbn_cls_loss: Option<bool>,
    pub seed: Option<u64>,
    pub decouple: Option<bool>,
    pub decouple_fraction: Option<f64>,
    pub resample: Option<bool>,
    pub reweight: Option<bool>,
    pub checkpoint_interval: Option<usize>,
    pub augment_weak_noise: Option<f64>,
    pub augment_weak_scale: Option<f64>,
    pub augment_strong_noise: Option<f64>,
    pub augment_strong_scale: Option<f64>,
    pub augment_strong_dropout: Option<f64>,
}

fn parse_bool(value: &str) -> Result<bool, String> {
    match value {
        "true" | "on" | "1" => Ok(true),
        "false" | "off" | "0" => Ok(false),
        other => Err(format!("expected a boolean (true/false/on/off), got {other:?}")),
    }
}

fn parse_norm(value: &str) -> Result<NormKind, String> {
    match value {
        "bn" => Ok(NormKind::Plain),
        "cbn" => Ok(NormKind::Compound),
        other => Err(format!("expected \"bn\" or \"cbn\", got {other:?}")),
    }
}

pub fn parse_hidden(value: &str) -> Result<Vec<usize>, String> {
    let widths: Result<Vec<usize>, _> = value
        .split(',')
        .map(|part| part.trim().parse::<usize>())
        .collect();
    match widths {
        Ok(w) if !w.is_empty() && w.iter().all(|&x| x > 0) => Ok(w),
        _ => Err(format!(
            "expected a comma list of positive widths (e.g. \"32,32\"), got {value:?}"
        )),
    }
}

fn parse_num<T: std::str::FromStr>(value: &str, what: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("expected {what}, got {value:?}"))
}

impl Overrides {
    /// Parse a flat `key = value` config file. Blank lines and lines starting
    /// with `#` are skipped; unknown keys and malformed values are errors so
    /// typos never pass silently.
    pub fn parse_file(text: &str) -> Result<Overrides, String> {
        let mut over = Overrides::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key = value", lineno + 1))?;
            let key = key.trim();
            let value = value.trim();
            over.set(key, value)
                .map_err(|e| format!("line {}: {key}: {e}", lineno + 1))?;
        }
        Ok(over)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "epochs" => self.epochs = Some(parse_num(value, "an epoch count")?),
            "batch_size" => self.batch_size = Some(parse_num(value, "a batch size")?),
            "lr" => self.lr = Some(parse_num(value, "a learning rate")?),
            "lr_min" => self.lr_min = Some(parse_num(value, "a learning rate")?),
            "sgd_momentum" => self.sgd_momentum = Some(parse_num(value, "a momentum")?),
            "nesterov" => self.nesterov = Some(parse_bool(value)?),
            "weight_decay" => self.weight_decay = Some(parse_num(value, "a weight decay")?),
            "lambda" => self.lambda = Some(parse_num(value, "a blend weight")?),
            "lambda_c" => self.lambda_c = Some(parse_num(value, "a blend weight")?),
            "lambda_s" => self.lambda_s = Some(parse_num(value, "a blend weight")?),
            "momentum_on_new" => self.momentum_on_new = Some(parse_bool(value)?),
            "eps" => self.eps = Some(parse_num(value, "a variance floor")?),
            "m" => self.m = Some(parse_num(value, "a component count")?),
            "norm" => self.norm = Some(parse_norm(value)?),
            "sbn" => self.sbn = Some(parse_bool(value)?),
            "hidden" => self.hidden = Some(parse_hidden(value)?),
            "mixture_jitter" => self.mixture_jitter = Some(parse_num(value, "a jitter scale")?),
            "w_cls" => self.w_cls = Some(parse_num(value, "a loss weight")?),
            "w_sim" => self.w_sim = Some(parse_num(value, "a loss weight")?),
            "sbn_cls_loss" => self.sbn_cls_loss = Some(parse_bool(value)?),
            "seed" => self.seed = Some(parse_num(value, "a seed")?),
            "decouple" => self.decouple = Some(parse_bool(value)?),
            "decouple_fraction" => {
                self.decouple_fraction = Some(parse_num(value, "a fraction")?)
            }
            "resample" => self.resample = Some(parse_bool(value)?),
            "reweight" => self.reweight = Some(parse_bool(value)?),
            "checkpoint_interval" => {
                self.checkpoint_interval = Some(parse_num(value, "an epoch interval")?)
            }
            "augment_weak_noise" => {
                self.augment_weak_noise = Some(parse_num(value, "a noise scale")?)
            }
            "augment_weak_scale" => {
                self.augment_weak_scale = Some(parse_num(value, "a jitter scale")?)
            }
            "augment_strong_noise" => {
                self.augment_strong_noise = Some(parse_num(value, "a noise scale")?)
            }
            "augment_strong_scale" => {
                self.augment_strong_scale = Some(parse_num(value, "a jitter scale")?)
            }
            "augment_strong_dropout" => {
                self.augment_strong_dropout = Some(parse_num(value, "a dropout fraction")?)
            }
            other => return Err(format!("unknown config key {other:?}")),
        }
        Ok(())
    }

    /// The flag layer. Switch-style flags (`--decouple`, `--resample`,
    /// `--reweight`) only assert `true`; leaving them off defers to the
    /// config file.
    pub fn from_flags(args: &TrainArgs) -> Result<Overrides, String> {
        Ok(Overrides {
            epochs: args.epochs,
            batch_size: args.batch_size,
            lr: args.lr,
            m: args.m,
            norm: args.norm.as_deref().map(parse_norm).transpose()?,
            sbn: args.sbn.as_deref().map(parse_bool).transpose()?,
            hidden: args.hidden.as_deref().map(parse_hidden).transpose()?,
            w_cls: args.w_cls,
            w_sim: args.w_sim,
            seed: args.seed,
            decouple: args.decouple.then_some(true),
            decouple_fraction: args.decouple_fraction,
            resample: args.resample.then_some(true),
            reweight: args.reweight.then_some(true),
            checkpoint_interval: args.checkpoint_interval,
            ..Overrides::default()
        })
    }

    /// Layer `self` over `base`: any field this layer sets wins.
    pub fn over(self, base: Overrides) -> Overrides {
        macro_rules! pick {
            ($field:ident) => {
                self.$field.or(base.$field)
            };
        }
        Overrides {
            epochs: pick!(epochs),
            batch_size: pick!(batch_size),
            lr: pick!(lr),
            lr_min: pick!(lr_min),
            sgd_momentum: pick!(sgd_momentum),
            nesterov: pick!(nesterov),
            weight_decay: pick!(weight_decay),
            lambda: pick!(lambda),
            lambda_c: pick!(lambda_c),
            lambda_s: pick!(lambda_s),
            momentum_on_new: pick!(momentum_on_new),
            eps: pick!(eps),
            m: pick!(m),
            norm: pick!(norm),
            sbn: pick!(sbn),
            hidden: pick!(hidden),
            mixture_jitter: pick!(mixture_jitter),
            w_cls: pick!(w_cls),
            w_sim: pick!(w_sim),
            sbn_cls_loss: pick!(sbn_cls_loss),
            seed: pick!(seed),
            decouple: pick!(decouple),
            decouple_fraction: pick!(decouple_fraction),
            resample: pick!(resample),
            reweight: pick!(reweight),
            checkpoint_interval: pick!(checkpoint_interval),
            augment_weak_noise: pick!(augment_weak_noise),
            augment_weak_scale: pick!(augment_weak_scale),
            augment_strong_noise: pick!(augment_strong_noise),
            augment_strong_scale: pick!(augment_strong_scale),
            augment_strong_dropout: pick!(augment_strong_dropout),
        }
    }
}

/// The fully merged, validated result of all layers.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: TrainConfig,
    /// Epochs between periodic checkpoints; 0 disables them.
    pub checkpoint_interval: usize,
}

/// Apply the merged overrides to the defaults, reconcile dependent settings,
/// apply the seed override from the environment, and validate.
///
/// Reconciliation rules:
/// - Plain normalization runs exactly one component. An explicit `m != 1`
///   alongside it is a contradiction (error); an inherited default is
///   quietly coerced to 1.
/// - With the routed path off, the consistency loss has nothing to couple:
///   an explicit nonzero `w_sim` (or `sbn_cls_loss`) is a contradiction;
///   inherited defaults are coerced off.
/// - `momentum_on_new = true` flips the blending convention: the configured
///   weights apply to the fresh batch statistics instead of the running ones.
pub fn resolve(merged: Overrides, env_seed: Option<&str>) -> Result<Resolved, String> {
    let mut c = TrainConfig::default();
    if let Some(v) = merged.epochs {
        c.epochs = v;
    }
    if let Some(v) = merged.batch_size {
        c.batch_size = v;
    }
    if let Some(v) = merged.lr {
        c.lr = v;
    }
    if let Some(v) = merged.lr_min {
        c.lr_min = v;
    }
    if let Some(v) = merged.sgd_momentum {
        c.sgd_momentum = v;
    }
    if let Some(v) = merged.nesterov {
        c.nesterov = v;
    }
    if let Some(v) = merged.weight_decay {
        c.weight_decay = v;
    }
    if let Some(v) = merged.lambda {
        c.lambda = v;
    }
    if let Some(v) = merged.lambda_c {
        c.lambda_c = v;
    }
    if let Some(v) = merged.lambda_s {
        c.lambda_s = v;
    }
    if let Some(v) = merged.eps {
        c.eps = v;
    }
    if let Some(v) = merged.m {
        c.m = v;
    }
    if let Some(v) = merged.norm {
        c.norm = v;
    }
    if let Some(v) = merged.sbn {
        c.sbn = v;
    }
    if let Some(v) = merged.hidden.clone() {
        c.hidden = v;
    }
    if let Some(v) = merged.mixture_jitter {
        c.mixture_jitter = v;
    }
    if let Some(v) = merged.w_cls {
        c.w_cls = v;
    }
    if let Some(v) = merged.w_sim {
        c.w_sim = v;
    }
    if let Some(v) = merged.sbn_cls_loss {
        c.sbn_cls_loss = v;
    }
    if let Some(v) = merged.seed {
        c.seed = v;
    }
    if let Some(v) = merged.decouple {
        c.decouple = v;
    }
    if let Some(v) = merged.decouple_fraction {
        c.decouple_fraction = v;
    }
    if let Some(v) = merged.resample {
        c.resample = v;
    }
    if let Some(v) = merged.reweight {
        c.reweight = v;
    }
    if let Some(v) = merged.augment_weak_noise {
        c.augment.weak_noise = v;
    }
    if let Some(v) = merged.augment_weak_scale {
        c.augment.weak_scale = v;
    }
    if let Some(v) = merged.augment_strong_noise {
        c.augment.strong_noise = v;
    }
    if let Some(v) = merged.augment_strong_scale {
        c.augment.strong_scale = v;
    }
    if let Some(v) = merged.augment_strong_dropout {
        c.augment.strong_dropout = v;
    }

    if merged.momentum_on_new == Some(true) {
        c.lambda = 1.0 - c.lambda;
        c.lambda_c = 1.0 - c.lambda_c;
        c.lambda_s = 1.0 - c.lambda_s;
    }

    if c.norm == NormKind::Plain {
        match merged.m {
            Some(m) if m != 1 => {
                return Err(format!(
                    "plain normalization runs a single component; got m = {m} — pass m = 1 or norm = cbn"
                ));
            }
            _ => c.m = 1,
        }
    }
    if !c.sbn {
        match merged.w_sim {
            Some(w) if w != 0.0 => {
                return Err(format!(
                    "the consistency loss needs the routed path; got w_sim = {w} with sbn off"
                ));
            }
            _ => c.w_sim = 0.0,
        }
        match merged.sbn_cls_loss {
            Some(true) => {
                return Err("sbn_cls_loss needs the routed path; enable sbn".to_string());
            }
            _ => c.sbn_cls_loss = false,
        }
    }

    if let Some(raw) = env_seed {
        c.seed = raw
            .trim()
            .parse()
            .map_err(|_| format!("CNL_SEED must be an unsigned integer, got {raw:?}"))?;
    }

    c.validate().map_err(|e| e.to_string())?;
    Ok(Resolved {
        config: c,
        checkpoint_interval: merged.checkpoint_interval.unwrap_or(10),
    })
}
