//! Gaussian-mixture running statistics driven by moving-average EM.
//!
//! A batch is scored against M diagonal Gaussians (log domain, max-subtracted
//! softmax over components); the posterior weights produce temporary weighted
//! moments which are folded into the running state by exponential blending.
//! A label-routed path feeds per-group plain moments into the same state one
//! component at a time.
//!
//! `lambda_c` / `lambda_s` weight the OLD value: `new = λ·old + (1−λ)·batch`,
//! so the default 0.1 puts 90% of each update on the fresh batch.

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};
use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// A component whose batch responsibility mass falls below this is skipped
/// for the step (its mean/variance carry forward) instead of dividing by ~0.
pub const STARVATION_EPS: f64 = 1e-12;

/// Running mixture statistics shared by the normalization layers.
///
/// `mu[j]` / `var[j]` are per-channel vectors of one component; `eps` floors
/// every variance read. The struct is a single-writer accumulator: training
/// forwards mutate it, eval forwards only read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureState {
    pub tau: Vec<f64>,
    pub mu: Vec<Vec<f64>>,
    pub var: Vec<Vec<f64>>,
    pub eps: f64,
    pub lambda_c: f64,
    pub lambda_s: f64,
    /// Count of component updates skipped for want of responsibility mass.
    #[serde(skip)]
    pub starvation_events: u64,
}

impl MixtureState {
    pub fn num_components(&self) -> usize {
        self.tau.len()
    }

    pub fn dim(&self) -> usize {
        self.mu.first().map_or(0, |row| row.len())
    }

    /// Structural and numeric invariants; run after deserializing.
    pub fn validate(&self) -> Result<()> {
        let m = self.num_components();
        let d = self.dim();
        if m == 0 {
            return Err(Error::Malformed("mixture has no components".into()));
        }
        if self.mu.len() != m || self.var.len() != m {
            return Err(Error::Malformed(format!(
                "mixture shape: {} priors, {} means, {} variances",
                m,
                self.mu.len(),
                self.var.len()
            )));
        }
        for j in 0..m {
            if self.mu[j].len() != d || self.var[j].len() != d {
                return Err(Error::Malformed(format!(
                    "mixture component {j} has inconsistent dimension"
                )));
            }
            if self.var[j].iter().any(|&v| !v.is_finite() || v < 0.0) {
                return Err(Error::Malformed(format!(
                    "mixture component {j} has a negative or non-finite variance"
                )));
            }
            if !self.tau[j].is_finite() || self.tau[j] < 0.0 {
                return Err(Error::Malformed(format!(
                    "mixture component {j} has a negative or non-finite prior"
                )));
            }
            if self.mu[j].iter().any(|&v| !v.is_finite()) {
                return Err(Error::Malformed(format!(
                    "mixture component {j} has a non-finite mean"
                )));
            }
        }
        let tau_sum: f64 = self.tau.iter().sum();
        if (tau_sum - 1.0).abs() > 1e-9 {
            return Err(Error::Malformed(format!(
                "mixture priors sum to {tau_sum}, expected 1"
            )));
        }
        if !(self.eps > 0.0) || !(0.0..=1.0).contains(&self.lambda_c) || !(0.0..=1.0).contains(&self.lambda_s) {
            return Err(Error::Malformed(
                "mixture eps must be positive and blend weights must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    /// Fold batch EM temporaries into the running state.
    ///
    /// Priors blend for every component — including starved ones, whose
    /// near-zero batch mass is what keeps the prior sum at exactly 1 —
    /// while starved means/variances carry forward unchanged.
    pub fn accumulate_em(&mut self, temp: &EmStats, lambda_c: f64) {
        let m = self.num_components();
        let d = self.dim();
        assert_eq!(temp.tau_hat.len(), m, "component count mismatch");
        assert!((0.0..=1.0).contains(&lambda_c), "blend weight out of range");
        for j in 0..m {
            self.tau[j] = lambda_c * self.tau[j] + (1.0 - lambda_c) * temp.tau_hat[j];
            if !temp.active[j] {
                self.starvation_events += 1;
                continue;
            }
            assert_eq!(temp.mu_hat[j].len(), d, "dimension mismatch");
            for ch in 0..d {
                self.mu[j][ch] = lambda_c * self.mu[j][ch] + (1.0 - lambda_c) * temp.mu_hat[j][ch];
                self.var[j][ch] = lambda_c * self.var[j][ch] + (1.0 - lambda_c) * temp.var_hat[j][ch];
            }
        }
    }

    /// Fold one group's plain moments into component `j` (0-based).
    /// Priors are untouched; only the targeted mean/variance move.
    pub fn accumulate_split(&mut self, j: usize, mu_s: &[f64], var_s: &[f64], lambda_s: f64) {
        let d = self.dim();
        assert!(j < self.num_components(), "component index out of range");
        assert_eq!(mu_s.len(), d, "dimension mismatch");
        assert_eq!(var_s.len(), d, "dimension mismatch");
        assert!((0.0..=1.0).contains(&lambda_s), "blend weight out of range");
        for ch in 0..d {
            self.mu[j][ch] = lambda_s * self.mu[j][ch] + (1.0 - lambda_s) * mu_s[ch];
            self.var[j][ch] = lambda_s * self.var[j][ch] + (1.0 - lambda_s) * var_s[ch];
        }
    }
}

/// Fresh state: uniform priors, unit variances, means drawn i.i.d. uniform
/// in `[-mean_jitter, +mean_jitter]` per channel (exactly zero when the
/// jitter is zero). A small jitter breaks the symmetry that would otherwise
/// pin identical components together forever.
pub fn init_mixture(m: usize, d: usize, rng: &mut Rng, mean_jitter: f64) -> MixtureState {
    assert!(m >= 1 && d >= 1, "mixture needs at least one component and channel");
    assert!(mean_jitter >= 0.0, "mean jitter must be non-negative");
    let mu = (0..m)
        .map(|_| (0..d).map(|_| rng.uniform_in(-mean_jitter, mean_jitter)).collect())
        .collect();
    MixtureState {
        tau: vec![1.0 / m as f64; m],
        mu,
        var: vec![vec![1.0; d]; m],
        eps: 1e-5,
        lambda_c: 0.1,
        lambda_s: 0.1,
        starvation_events: 0,
    }
}

/// Log density of a diagonal Gaussian with `eps`-floored variances:
/// `-1/2 Σ_d [(x_d-μ_d)²/(σ²_d+ε) + ln(2π(σ²_d+ε))]`.
pub fn log_pdf(x: &[f64], mu: &[f64], var: &[f64], eps: f64) -> Result<f64> {
    if x.len() != mu.len() || x.len() != var.len() {
        return Err(Error::ShapeMismatch {
            op: "log_pdf",
            expected: format!("three vectors of length {}", x.len()),
            got: format!("lengths {}, {}, {}", x.len(), mu.len(), var.len()),
        });
    }
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    let mut acc = 0.0;
    for d in 0..x.len() {
        let v = var[d] + eps;
        if !x[d].is_finite() || !mu[d].is_finite() || !v.is_finite() || v <= 0.0 {
            return Err(Error::NonFinite {
                what: format!("log_pdf input at channel {d}"),
            });
        }
        let dev = x[d] - mu[d];
        acc += dev * dev / v + ln_2pi + v.ln();
    }
    Ok(-0.5 * acc)
}

/// Posterior weight of every point under every component: an `N x M` matrix
/// whose row `i` is `softmax_j(ln τ_j + ln f_j(x_i))`, computed with
/// per-point max-subtraction. `x` is `D x N`.
pub fn responsibilities(x: &Matrix, state: &MixtureState) -> Result<Matrix> {
    resp_impl(x, state, true)
}

/// Sequential twin of [`responsibilities`] for bench comparison.
pub fn responsibilities_seq(x: &Matrix, state: &MixtureState) -> Result<Matrix> {
    resp_impl(x, state, false)
}

fn resp_impl(x: &Matrix, state: &MixtureState, parallel: bool) -> Result<Matrix> {
    let d = state.dim();
    let m = state.num_components();
    if x.rows() != d {
        return Err(Error::ShapeMismatch {
            op: "responsibilities",
            expected: format!("{d} feature channels"),
            got: format!("{}", x.rows()),
        });
    }
    if state.tau.iter().any(|&t| t < 0.0) || !state.tau.iter().any(|&t| t > 0.0) {
        return Err(Error::DegeneratePrior);
    }
    let n = x.cols();
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    // Per-component log prior + log normalization, and inverse variances,
    // hoisted out of the per-point loop.
    let mut log_base = vec![0.0; m];
    let mut inv_var = vec![vec![0.0; d]; m];
    for j in 0..m {
        let mut log_norm = 0.0;
        for ch in 0..d {
            let v = state.var[j][ch] + state.eps;
            log_norm += ln_2pi + v.ln();
            inv_var[j][ch] = 1.0 / v;
        }
        log_base[j] = state.tau[j].ln() - 0.5 * log_norm;
    }

    let mut out = Matrix::zeros(n, m);
    let job = |(i, row): (usize, &mut [f64])| {
        for (j, slot) in row.iter_mut().enumerate() {
            let mu_j = &state.mu[j];
            let iv_j = &inv_var[j];
            let mut quad = 0.0;
            for ch in 0..d {
                let dev = x.get(ch, i) - mu_j[ch];
                quad += dev * dev * iv_j[ch];
            }
            *slot = log_base[j] - 0.5 * quad;
        }
        let peak = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for slot in row.iter_mut() {
            *slot = (*slot - peak).exp();
            total += *slot;
        }
        for slot in row.iter_mut() {
            *slot /= total;
        }
    };
    #[cfg(feature = "parallel")]
    if parallel {
        out.as_mut_slice().par_chunks_mut(m).enumerate().for_each(job);
    } else {
        out.as_mut_slice().chunks_mut(m).enumerate().for_each(job);
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = parallel;
        out.as_mut_slice().chunks_mut(m).enumerate().for_each(job);
    }
    if !out.is_finite() {
        return Err(Error::NonFinite {
            what: "responsibility weights".into(),
        });
    }
    Ok(out)
}

/// Batch EM temporaries: responsibility-weighted prior/mean/variance per
/// component. `active[j]` is false when component `j` received less than
/// [`STARVATION_EPS`] total mass; its moment rows are placeholders that
/// `accumulate_em` skips.
#[derive(Debug, Clone, PartialEq)]
pub struct EmStats {
    pub tau_hat: Vec<f64>,
    pub mu_hat: Vec<Vec<f64>>,
    pub var_hat: Vec<Vec<f64>>,
    pub active: Vec<bool>,
}

/// Weighted-moment step of EM: `τ̂_j = (1/N) Σ_i w_ij`,
/// `μ̂_j = Σ_i w_ij x_i / Σ_i w_ij`, `σ̂²_j = Σ_i w_ij (x_i-μ̂_j)² / Σ_i w_ij`.
/// `x` is `D x N`, `w` is `N x M`.
pub fn em_temporary_stats(x: &Matrix, w: &Matrix) -> Result<EmStats> {
    em_impl(x, w, true)
}

/// Sequential twin of [`em_temporary_stats`] for bench comparison.
pub fn em_temporary_stats_seq(x: &Matrix, w: &Matrix) -> Result<EmStats> {
    em_impl(x, w, false)
}

fn em_impl(x: &Matrix, w: &Matrix, parallel: bool) -> Result<EmStats> {
    let n = x.cols();
    if n == 0 {
        return Err(Error::EmptyBatch {
            op: "em_temporary_stats",
        });
    }
    if w.rows() != n {
        return Err(Error::ShapeMismatch {
            op: "em_temporary_stats",
            expected: format!("{n} responsibility rows"),
            got: format!("{}", w.rows()),
        });
    }
    let m = w.cols();
    let per_component = |j: usize| -> (f64, Vec<f64>, Vec<f64>, bool) {
        let d = x.rows();
        let mut mass = 0.0;
        for i in 0..n {
            mass += w.get(i, j);
        }
        let tau_hat = mass / n as f64;
        if mass < STARVATION_EPS {
            return (tau_hat, vec![0.0; d], vec![0.0; d], false);
        }
        let mut mu = vec![0.0; d];
        let mut var = vec![0.0; d];
        for ch in 0..d {
            let feats = x.row(ch);
            let mut acc = 0.0;
            for i in 0..n {
                acc += w.get(i, j) * feats[i];
            }
            mu[ch] = acc / mass;
        }
        for ch in 0..d {
            let feats = x.row(ch);
            let center = mu[ch];
            let mut acc = 0.0;
            for i in 0..n {
                let dev = feats[i] - center;
                acc += w.get(i, j) * dev * dev;
            }
            var[ch] = acc / mass;
        }
        (tau_hat, mu, var, true)
    };

    #[cfg(feature = "parallel")]
    let parts: Vec<_> = if parallel {
        (0..m).into_par_iter().map(per_component).collect()
    } else {
        (0..m).map(per_component).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<_> = {
        let _ = parallel;
        (0..m).map(per_component).collect()
    };

    let mut stats = EmStats {
        tau_hat: Vec::with_capacity(m),
        mu_hat: Vec::with_capacity(m),
        var_hat: Vec::with_capacity(m),
        active: Vec::with_capacity(m),
    };
    for (tau_hat, mu, var, active) in parts {
        stats.tau_hat.push(tau_hat);
        stats.mu_hat.push(mu);
        stats.var_hat.push(var);
        stats.active.push(active);
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::colwise_mean_var;

    fn random_batch(rng: &mut Rng, d: usize, n: usize) -> Matrix {
        let data = (0..d * n).map(|_| rng.normal()).collect();
        Matrix::from_vec(d, n, data).unwrap()
    }

    fn jittered_state(m: usize, d: usize, seed: u64) -> MixtureState {
        let mut rng = Rng::new(seed);
        init_mixture(m, d, &mut rng, 0.5)
    }

    #[test]
    fn init_single_component_is_plain_start() {
        let mut rng = Rng::new(1);
        let state = init_mixture(1, 3, &mut rng, 0.0);
        assert_eq!(state.tau, vec![1.0]);
        assert_eq!(state.mu, vec![vec![0.0; 3]]);
        assert_eq!(state.var, vec![vec![1.0; 3]]);
        state.validate().unwrap();
    }

    #[test]
    fn init_zero_jitter_gives_identical_components() {
        let mut rng = Rng::new(2);
        let state = init_mixture(4, 8, &mut rng, 0.0);
        for j in 0..4 {
            assert_eq!(state.tau[j], 0.25);
            assert_eq!(state.mu[j], vec![0.0; 8]);
            assert_eq!(state.var[j], vec![1.0; 8]);
        }
    }

    #[test]
    fn init_jitter_replays_seeded_stream() {
        let mut rng_a = Rng::new(42);
        let mut rng_b = Rng::new(42);
        let a = init_mixture(4, 3, &mut rng_a, 0.1);
        let b = init_mixture(4, 3, &mut rng_b, 0.1);
        assert_eq!(a, b);
        let flat: Vec<f64> = a.mu.iter().flatten().copied().collect();
        assert!(flat.iter().all(|v| v.abs() <= 0.1));
        assert!(flat.iter().any(|v| *v != 0.0));
    }

    #[test]
    fn log_pdf_standard_normal_at_origin() {
        let v = log_pdf(&[0.0], &[0.0], &[1.0], 0.0).unwrap();
        assert!((v - (-0.9189385332046727)).abs() < 1e-12);
    }

    #[test]
    fn log_pdf_two_channels_at_mean() {
        let v = log_pdf(&[0.3, -0.7], &[0.3, -0.7], &[1.0, 1.0], 0.0).unwrap();
        assert!((v - (-1.8378770664093453)).abs() < 1e-12);
    }

    #[test]
    fn log_pdf_matches_direct_evaluation() {
        let v = log_pdf(&[1.0, 2.0], &[0.0, 0.0], &[1.0, 4.0], 0.0).unwrap();
        let pi = std::f64::consts::PI;
        let want = -0.5 * ((1.0 / 1.0 + (2.0 * pi).ln()) + (4.0 / 4.0 + (8.0 * pi).ln()));
        assert!((v - want).abs() < 1e-12, "{v} vs {want}");
    }

    #[test]
    fn log_pdf_rejects_non_finite_input() {
        let err = log_pdf(&[f64::NAN], &[0.0], &[1.0], 0.0).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }

    #[test]
    fn log_pdf_rejects_length_mismatch() {
        let err = log_pdf(&[0.0, 1.0], &[0.0], &[1.0], 0.0).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch { .. }));
    }

    #[test]
    fn responsibilities_single_component_are_all_one() {
        let mut rng = Rng::new(3);
        let x = random_batch(&mut rng, 4, 9);
        let state = jittered_state(1, 4, 30);
        let w = responsibilities(&x, &state).unwrap();
        assert!(w.as_slice().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn responsibilities_identical_components_split_evenly() {
        let mut rng = Rng::new(4);
        let x = random_batch(&mut rng, 3, 7);
        let mut init_rng = Rng::new(0);
        let state = init_mixture(2, 3, &mut init_rng, 0.0);
        let w = responsibilities(&x, &state).unwrap();
        assert!(w.as_slice().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn responsibilities_match_direct_two_component_evaluation() {
        let state = MixtureState {
            tau: vec![0.5, 0.5],
            mu: vec![vec![-1.0], vec![1.0]],
            var: vec![vec![1.0], vec![1.0]],
            eps: 0.0,
            lambda_c: 0.1,
            lambda_s: 0.1,
            starvation_events: 0,
        };
        let x = Matrix::from_rows(&[&[0.0, 2.0]]).unwrap();
        let w = responsibilities(&x, &state).unwrap();
        assert!((w.get(0, 0) - 0.5).abs() < 1e-12);
        assert!((w.get(0, 1) - 0.5).abs() < 1e-12);
        // Direct posterior at x = 2 under equal priors and unit variances.
        let f = |x: f64, mu: f64| (-0.5 * (x - mu) * (x - mu)).exp();
        let want0 = f(2.0, -1.0) / (f(2.0, -1.0) + f(2.0, 1.0));
        assert!((w.get(1, 0) - want0).abs() < 1e-12);
        assert!((w.get(1, 1) - (1.0 - want0)).abs() < 1e-12);
    }

    #[test]
    fn responsibilities_rows_are_distributions() {
        let mut rng = Rng::new(5);
        let x = random_batch(&mut rng, 6, 40);
        let state = jittered_state(4, 6, 50);
        let w = responsibilities(&x, &state).unwrap();
        for i in 0..40 {
            let row = w.row(i);
            assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "row {i} sums to {sum}");
        }
    }

    #[test]
    fn responsibilities_unchanged_by_common_prior_rescale() {
        let mut rng = Rng::new(6);
        let x = random_batch(&mut rng, 4, 25);
        let state = jittered_state(3, 4, 60);
        let mut scaled = state.clone();
        for t in &mut scaled.tau {
            *t *= 3.7;
        }
        let a = responsibilities(&x, &state).unwrap();
        let b = responsibilities(&x, &scaled).unwrap();
        assert!(a.max_abs_diff(&b) <= 1e-12);
    }

    #[test]
    fn responsibilities_all_zero_priors_error() {
        let mut state = jittered_state(2, 3, 70);
        state.tau = vec![0.0, 0.0];
        let x = Matrix::zeros(3, 4);
        assert!(matches!(
            responsibilities(&x, &state),
            Err(Error::DegeneratePrior)
        ));
    }

    #[test]
    fn responsibilities_dimension_mismatch_errors() {
        let state = jittered_state(2, 3, 80);
        let x = Matrix::zeros(5, 4);
        assert!(matches!(
            responsibilities(&x, &state),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn responsibilities_parallel_sequential_bitwise() {
        let mut rng = Rng::new(7);
        let x = random_batch(&mut rng, 8, 64);
        let state = jittered_state(4, 8, 90);
        let a = responsibilities(&x, &state).unwrap();
        let b = responsibilities_seq(&x, &state).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn em_stats_single_component_equals_plain_moments() {
        let mut rng = Rng::new(8);
        let x = random_batch(&mut rng, 3, 20);
        let w = Matrix::filled(20, 1, 1.0);
        let stats = em_temporary_stats(&x, &w).unwrap();
        let (mean, var) = colwise_mean_var(&x).unwrap();
        assert_eq!(stats.tau_hat, vec![1.0]);
        assert_eq!(stats.mu_hat[0], mean);
        assert_eq!(stats.var_hat[0], var);
    }

    #[test]
    fn em_stats_one_hot_split_matches_per_half_moments() {
        let mut rng = Rng::new(9);
        let x = random_batch(&mut rng, 2, 6);
        let mut w = Matrix::zeros(6, 2);
        for i in 0..6 {
            w.set(i, usize::from(i >= 3), 1.0);
        }
        let stats = em_temporary_stats(&x, &w).unwrap();

        let first = Matrix::from_vec(2, 3, x.row(0)[..3].iter().chain(&x.row(1)[..3]).copied().collect()).unwrap();
        let second = Matrix::from_vec(2, 3, x.row(0)[3..].iter().chain(&x.row(1)[3..]).copied().collect()).unwrap();
        let (mean_a, var_a) = colwise_mean_var(&first).unwrap();
        let (mean_b, var_b) = colwise_mean_var(&second).unwrap();

        assert!((stats.tau_hat[0] - 0.5).abs() < 1e-15);
        assert!((stats.tau_hat[1] - 0.5).abs() < 1e-15);
        for ch in 0..2 {
            assert!((stats.mu_hat[0][ch] - mean_a[ch]).abs() < 1e-12);
            assert!((stats.var_hat[0][ch] - var_a[ch]).abs() < 1e-12);
            assert!((stats.mu_hat[1][ch] - mean_b[ch]).abs() < 1e-12);
            assert!((stats.var_hat[1][ch] - var_b[ch]).abs() < 1e-12);
        }
    }

    #[test]
    fn em_stats_match_weighted_moment_oracle() {
        let x = Matrix::from_rows(&[&[1.0, -2.0, 0.5, 3.0], &[0.0, 1.0, -1.0, 2.0]]).unwrap();
        let w = Matrix::from_rows(&[
            &[0.9, 0.1],
            &[0.3, 0.7],
            &[0.5, 0.5],
            &[0.2, 0.8],
        ])
        .unwrap();
        let stats = em_temporary_stats(&x, &w).unwrap();

        // Independent weighted-moment evaluation, point-major accumulation
        // (the implementation accumulates channel-major).
        for j in 0..2 {
            let mass: f64 = (0..4).map(|i| w.get(i, j)).sum();
            assert!((stats.tau_hat[j] - mass / 4.0).abs() < 1e-12);
            for ch in 0..2 {
                let mean: f64 = (0..4).map(|i| w.get(i, j) * x.get(ch, i)).sum::<f64>() / mass;
                let var: f64 = (0..4)
                    .map(|i| {
                        let dev = x.get(ch, i) - mean;
                        w.get(i, j) * dev * dev
                    })
                    .sum::<f64>()
                    / mass;
                assert!((stats.mu_hat[j][ch] - mean).abs() < 1e-12);
                assert!((stats.var_hat[j][ch] - var).abs() < 1e-12);
            }
        }
        let total: f64 = stats.tau_hat.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn em_stats_flag_starved_component() {
        let mut rng = Rng::new(10);
        let x = random_batch(&mut rng, 2, 5);
        let mut w = Matrix::zeros(5, 2);
        for i in 0..5 {
            w.set(i, 0, 1.0);
        }
        let stats = em_temporary_stats(&x, &w).unwrap();
        assert!(stats.active[0]);
        assert!(!stats.active[1]);
        assert_eq!(stats.tau_hat[1], 0.0);
        let total: f64 = stats.tau_hat.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn em_stats_uniform_weights_recover_global_mean() {
        let mut rng = Rng::new(11);
        let x = random_batch(&mut rng, 3, 30);
        let w = Matrix::filled(30, 4, 0.25);
        let stats = em_temporary_stats(&x, &w).unwrap();
        let (mean, _) = colwise_mean_var(&x).unwrap();
        for j in 0..4 {
            for ch in 0..3 {
                assert!((stats.mu_hat[j][ch] - mean[ch]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn em_stats_parallel_sequential_bitwise() {
        let mut rng = Rng::new(12);
        let x = random_batch(&mut rng, 5, 33);
        let state = jittered_state(4, 5, 120);
        let w = responsibilities(&x, &state).unwrap();
        let a = em_temporary_stats(&x, &w).unwrap();
        let b = em_temporary_stats_seq(&x, &w).unwrap();
        assert_eq!(a, b);
    }

    fn two_component_state() -> MixtureState {
        MixtureState {
            tau: vec![0.5, 0.5],
            mu: vec![vec![0.0, 0.0], vec![1.0, 1.0]],
            var: vec![vec![1.0, 1.0], vec![2.0, 2.0]],
            eps: 1e-5,
            lambda_c: 0.1,
            lambda_s: 0.1,
            starvation_events: 0,
        }
    }

    fn plain_temporaries() -> EmStats {
        EmStats {
            tau_hat: vec![0.7, 0.3],
            mu_hat: vec![vec![1.0, -1.0], vec![2.0, 0.5]],
            var_hat: vec![vec![0.5, 0.5], vec![1.5, 1.5]],
            active: vec![true, true],
        }
    }

    #[test]
    fn accumulate_em_lambda_one_keeps_state() {
        let mut state = two_component_state();
        let before = state.clone();
        state.accumulate_em(&plain_temporaries(), 1.0);
        assert_eq!(state, before);
    }

    #[test]
    fn accumulate_em_lambda_zero_replaces_state() {
        let mut state = two_component_state();
        let temp = plain_temporaries();
        state.accumulate_em(&temp, 0.0);
        assert_eq!(state.tau, temp.tau_hat);
        assert_eq!(state.mu, temp.mu_hat);
        assert_eq!(state.var, temp.var_hat);
    }

    #[test]
    fn accumulate_em_single_step_blend_arithmetic() {
        let mut state = two_component_state();
        let mut temp = plain_temporaries();
        temp.tau_hat = vec![0.7, 0.3];
        state.accumulate_em(&temp, 0.1);
        // 0.1 * 0.5 + 0.9 * 0.7
        assert!((state.tau[0] - 0.68).abs() < 1e-15);
    }

    #[test]
    fn accumulate_em_starved_component_carries_and_counts() {
        let mut state = two_component_state();
        let temp = EmStats {
            tau_hat: vec![1.0, 0.0],
            mu_hat: vec![vec![1.0, 1.0], vec![0.0, 0.0]],
            var_hat: vec![vec![1.0, 1.0], vec![0.0, 0.0]],
            active: vec![true, false],
        };
        state.accumulate_em(&temp, 0.1);
        assert_eq!(state.mu[1], vec![1.0, 1.0]);
        assert_eq!(state.var[1], vec![2.0, 2.0]);
        assert!((state.tau[1] - 0.05).abs() < 1e-15);
        assert_eq!(state.starvation_events, 1);
        let total: f64 = state.tau.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn accumulate_split_touches_only_target_component() {
        let mut state = two_component_state();
        state.accumulate_split(1, &[1.0, 1.0], &[3.0, 3.0], 0.1);
        assert_eq!(state.tau, vec![0.5, 0.5]);
        assert_eq!(state.mu[0], vec![0.0, 0.0]);
        for ch in 0..2 {
            assert!((state.mu[1][ch] - (0.1 * 1.0 + 0.9 * 1.0)).abs() < 1e-15);
            assert!((state.var[1][ch] - (0.1 * 2.0 + 0.9 * 3.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn accumulate_split_endpoints() {
        let mut keep = two_component_state();
        let before = keep.clone();
        keep.accumulate_split(0, &[9.0, 9.0], &[9.0, 9.0], 1.0);
        assert_eq!(keep, before);

        let mut replace = two_component_state();
        replace.accumulate_split(0, &[9.0, 9.0], &[4.0, 4.0], 0.0);
        assert_eq!(replace.mu[0], vec![9.0, 9.0]);
        assert_eq!(replace.var[0], vec![4.0, 4.0]);
    }

    #[test]
    fn prior_sum_and_variance_stay_valid_over_many_em_steps() {
        let mut rng = Rng::new(13);
        let mut state = jittered_state(4, 3, 130);
        for _ in 0..1000 {
            let x = random_batch(&mut rng, 3, 16);
            let w = responsibilities(&x, &state).unwrap();
            let temp = em_temporary_stats(&x, &w).unwrap();
            state.accumulate_em(&temp, 0.1);
        }
        let total: f64 = state.tau.iter().sum();
        assert!((total - 1.0).abs() < 1e-9, "prior sum drifted to {total}");
        assert!(state
            .var
            .iter()
            .flatten()
            .all(|&v| v.is_finite() && v >= 0.0));
        state.validate().unwrap();
    }

    #[test]
    fn serde_fragment_has_exact_key_set() {
        let state = two_component_state();
        let json = serde_json::to_value(&state).unwrap();
        let obj = json.as_object().unwrap();
        let mut keys: Vec<&str> = obj.keys().map(|k| k.as_str()).collect();
        keys.sort_unstable();
        assert_eq!(keys, ["eps", "lambda_c", "lambda_s", "mu", "tau", "var"]);
        let back: MixtureState = serde_json::from_value(json).unwrap();
        assert_eq!(back, state);
    }
}
