//! Training losses with hand-derived gradients: prior-corrected softmax
//! cross-entropy for long-tailed label frequencies, and a stop-gradient
//! cosine consistency loss between two prediction branches.
//!
//! Both return explicit gradients; there is no autodiff tape anywhere in
//! this crate.

use crate::error::{Error, Result};

/// Per-class training-sample counts with their logarithms precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassCounts {
    counts: Vec<usize>,
    log_counts: Vec<f64>,
}

impl ClassCounts {
    pub fn new(counts: &[usize]) -> Result<Self> {
        if counts.len() < 2 {
            return Err(Error::Config(
                "class counts need at least two classes".into(),
            ));
        }
        if counts.iter().any(|&n| n == 0) {
            return Err(Error::Config(
                "every class needs at least one training sample".into(),
            ));
        }
        Ok(ClassCounts {
            log_counts: counts.iter().map(|&n| (n as f64).ln()).collect(),
            counts: counts.to_vec(),
        })
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }
}

/// Softmax cross-entropy with per-class logit offsets `ln n_i` compensating
/// the label-frequency prior: `loss = -ln(n_y e^{o_y} / Σ_i n_i e^{o_i})`,
/// evaluated as a stable log-sum-exp over `o_i + ln n_i`. The gradient is
/// `softmax(o + ln n) - onehot(y)`. `y` is a 1-based class label.
pub fn balanced_softmax_ce(
    o: &[f64],
    counts: &ClassCounts,
    y: usize,
) -> Result<(f64, Vec<f64>)> {
    let k = counts.k();
    if o.len() != k {
        return Err(Error::ShapeMismatch {
            op: "balanced_softmax_ce",
            expected: format!("{k} logits"),
            got: format!("{}", o.len()),
        });
    }
    if y == 0 || y > k {
        return Err(Error::UnknownLabel {
            label: y,
            num_classes: k,
        });
    }
    if o.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "classification logits".into(),
        });
    }
    let shifted: Vec<f64> = o
        .iter()
        .zip(&counts.log_counts)
        .map(|(&logit, &log_n)| logit + log_n)
        .collect();
    let peak = shifted.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = shifted.iter().map(|&z| (z - peak).exp()).sum();
    let lse = peak + total.ln();
    let loss = lse - shifted[y - 1];
    let mut grad: Vec<f64> = shifted.iter().map(|&z| (z - peak).exp() / total).collect();
    grad[y - 1] -= 1.0;
    Ok((loss, grad))
}

fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cosine similarity and the gradient of `-S(a, b)` with respect to `a`
/// alone (`b` is a constant): `grad_a = (S·â - b̂) / ‖a‖`.
fn neg_cosine_grad(a: &[f64], b: &[f64]) -> Result<(f64, Vec<f64>)> {
    let na = l2_norm(a);
    let nb = l2_norm(b);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm("consistency-loss logits"));
    }
    let sim = dot(a, b) / (na * nb);
    let grad = a
        .iter()
        .zip(b)
        .map(|(&ai, &bi)| (sim * ai / na - bi / nb) / na)
        .collect();
    Ok((sim, grad))
}

/// Symmetric stop-gradient consistency loss between two branches:
/// `L = -S(oc_strg, os_weak) - S(os_strg, oc_weak)` with `S` the cosine
/// similarity. The weak-branch arguments are detached constants: gradients
/// are returned only for the two strong-branch inputs, and nothing flows to
/// the weak ones by construction.
pub fn cosine_consistency(
    oc_strg: &[f64],
    os_weak_detached: &[f64],
    os_strg: &[f64],
    oc_weak_detached: &[f64],
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let k = oc_strg.len();
    for (name, v) in [
        ("first strong", oc_strg),
        ("first detached", os_weak_detached),
        ("second strong", os_strg),
        ("second detached", oc_weak_detached),
    ] {
        if v.len() != k {
            return Err(Error::ShapeMismatch {
                op: "cosine_consistency",
                expected: format!("{k} logits"),
                got: format!("{} in {name} argument", v.len()),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                what: format!("{name} consistency-loss argument"),
            });
        }
    }
    let (sim_c, grad_oc) = neg_cosine_grad(oc_strg, os_weak_detached)?;
    let (sim_s, grad_os) = neg_cosine_grad(os_strg, oc_weak_detached)?;
    Ok((-sim_c - sim_s, grad_oc, grad_os))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    #[test]
    fn uniform_counts_reduce_to_plain_cross_entropy() {
        let counts = ClassCounts::new(&[5, 5]).unwrap();
        let (loss, _) = balanced_softmax_ce(&[0.0, 0.0], &counts, 1).unwrap();
        assert!((loss - 2.0f64.ln()).abs() < 1e-12);

        // Random logits: must equal standard softmax CE exactly up to float noise.
        let mut rng = Rng::new(40);
        let uniform = ClassCounts::new(&[7, 7, 7, 7]).unwrap();
        for _ in 0..20 {
            let o: Vec<f64> = (0..4).map(|_| rng.normal() * 3.0).collect();
            let y = 1 + rng.index(4);
            let (loss, _) = balanced_softmax_ce(&o, &uniform, y).unwrap();
            let peak = o.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = peak + o.iter().map(|&v| (v - peak).exp()).sum::<f64>().ln();
            let plain = lse - o[y - 1];
            assert!((loss - plain).abs() < 1e-12);
        }
    }

    #[test]
    fn skewed_counts_shift_the_loss() {
        let counts = ClassCounts::new(&[1, 3]).unwrap();
        let (loss, _) = balanced_softmax_ce(&[0.0, 0.0], &counts, 1).unwrap();
        assert!((loss - 4.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn matches_direct_evaluation_oracle() {
        let counts = ClassCounts::new(&[100, 10, 1]).unwrap();
        let o = [1.0, -0.5, 0.2];
        let (loss, grad) = balanced_softmax_ce(&o, &counts, 3).unwrap();

        // Direct evaluation without the max-shift: exp(o_i) * n_i ratios.
        let weighted: Vec<f64> = o
            .iter()
            .zip([100.0, 10.0, 1.0])
            .map(|(&logit, n)| n * logit.exp())
            .collect();
        let total: f64 = weighted.iter().sum();
        let want_loss = -(weighted[2] / total).ln();
        assert!((loss - want_loss).abs() < 1e-12, "{loss} vs {want_loss}");
        for i in 0..3 {
            let want = weighted[i] / total - f64::from(i == 2);
            assert!((grad[i] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_is_shift_invariant() {
        let counts = ClassCounts::new(&[50, 5, 2, 1]).unwrap();
        let o = [0.3, -1.2, 2.0, 0.0];
        let shifted: Vec<f64> = o.iter().map(|v| v + 123.456).collect();
        let (a, _) = balanced_softmax_ce(&o, &counts, 2).unwrap();
        let (b, _) = balanced_softmax_ce(&shifted, &counts, 2).unwrap();
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn gradient_sums_to_zero() {
        let counts = ClassCounts::new(&[100, 10, 1]).unwrap();
        let mut rng = Rng::new(41);
        for _ in 0..10 {
            let o: Vec<f64> = (0..3).map(|_| rng.normal() * 2.0).collect();
            let (_, grad) = balanced_softmax_ce(&o, &counts, 1 + rng.index(3)).unwrap();
            let total: f64 = grad.iter().sum();
            assert!(total.abs() < 1e-10);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let counts = ClassCounts::new(&[40, 12, 3, 1]).unwrap();
        let mut rng = Rng::new(42);
        let o: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
        let y = 2;
        let (_, grad) = balanced_softmax_ce(&o, &counts, y).unwrap();
        let h = 1e-6;
        for i in 0..4 {
            let mut plus = o.clone();
            plus[i] += h;
            let mut minus = o.clone();
            minus[i] -= h;
            let (lp, _) = balanced_softmax_ce(&plus, &counts, y).unwrap();
            let (lm, _) = balanced_softmax_ce(&minus, &counts, y).unwrap();
            let fd = (lp - lm) / (2.0 * h);
            assert!((grad[i] - fd).abs() < 1e-7, "entry {i}: {} vs {fd}", grad[i]);
        }
    }

    #[test]
    fn rejects_bad_labels_and_nonfinite_logits() {
        let counts = ClassCounts::new(&[3, 3]).unwrap();
        assert!(matches!(
            balanced_softmax_ce(&[0.0, 0.0], &counts, 0),
            Err(Error::UnknownLabel { .. })
        ));
        assert!(matches!(
            balanced_softmax_ce(&[0.0, 0.0], &counts, 3),
            Err(Error::UnknownLabel { .. })
        ));
        assert!(matches!(
            balanced_softmax_ce(&[f64::INFINITY, 0.0], &counts, 1),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn rejects_degenerate_count_vectors() {
        assert!(ClassCounts::new(&[5]).is_err());
        assert!(ClassCounts::new(&[5, 0]).is_err());
    }

    #[test]
    fn aligned_branches_reach_the_loss_floor() {
        let v = [1.0, -2.0, 0.5];
        let (loss, g_c, g_s) = cosine_consistency(&v, &v, &v, &v).unwrap();
        assert!((loss - (-2.0)).abs() < 1e-12);
        assert!(g_c.iter().all(|g| g.abs() < 1e-12));
        assert!(g_s.iter().all(|g| g.abs() < 1e-12));
    }

    #[test]
    fn orthogonal_branches_give_zero_loss() {
        let a = [1.0, 0.0];
        let b = [0.0, 3.0];
        let (loss, _, _) = cosine_consistency(&a, &b, &b, &a).unwrap();
        assert!(loss.abs() < 1e-12);
    }

    #[test]
    fn strong_gradients_match_finite_differences() {
        let mut rng = Rng::new(43);
        let draw = |rng: &mut Rng| -> Vec<f64> { (0..3).map(|_| rng.normal()).collect() };
        let oc_s = draw(&mut rng);
        let os_w = draw(&mut rng);
        let os_s = draw(&mut rng);
        let oc_w = draw(&mut rng);
        let (_, g_c, g_s) = cosine_consistency(&oc_s, &os_w, &os_s, &oc_w).unwrap();
        let h = 1e-6;
        for i in 0..3 {
            let mut plus = oc_s.clone();
            plus[i] += h;
            let mut minus = oc_s.clone();
            minus[i] -= h;
            let (lp, _, _) = cosine_consistency(&plus, &os_w, &os_s, &oc_w).unwrap();
            let (lm, _, _) = cosine_consistency(&minus, &os_w, &os_s, &oc_w).unwrap();
            let fd = (lp - lm) / (2.0 * h);
            assert!((g_c[i] - fd).abs() < 1e-7);

            let mut plus = os_s.clone();
            plus[i] += h;
            let mut minus = os_s.clone();
            minus[i] -= h;
            let (lp, _, _) = cosine_consistency(&oc_s, &os_w, &plus, &oc_w).unwrap();
            let (lm, _, _) = cosine_consistency(&oc_s, &os_w, &minus, &oc_w).unwrap();
            let fd = (lp - lm) / (2.0 * h);
            assert!((g_s[i] - fd).abs() < 1e-7);
        }
    }

    #[test]
    fn loss_is_scale_invariant_and_bounded() {
        let mut rng = Rng::new(44);
        for _ in 0..25 {
            let draw = |rng: &mut Rng| -> Vec<f64> { (0..4).map(|_| rng.normal()).collect() };
            let oc_s = draw(&mut rng);
            let os_w = draw(&mut rng);
            let os_s = draw(&mut rng);
            let oc_w = draw(&mut rng);
            let (loss, _, _) = cosine_consistency(&oc_s, &os_w, &os_s, &oc_w).unwrap();
            assert!((-2.0..=2.0).contains(&loss));

            let scaled: Vec<f64> = oc_s.iter().map(|v| v * 3.2).collect();
            let (loss_scaled, _, _) = cosine_consistency(&scaled, &os_w, &os_s, &oc_w).unwrap();
            assert!((loss - loss_scaled).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_norm_vector_is_an_error() {
        let v = [1.0, 2.0];
        let z = [0.0, 0.0];
        assert!(matches!(
            cosine_consistency(&z, &v, &v, &v),
            Err(Error::ZeroNorm(_))
        ));
        assert!(matches!(
            cosine_consistency(&v, &v, &v, &z),
            Err(Error::ZeroNorm(_))
        ));
    }
}
