//! Streams samples from a known two-component mixture through the full
//! responsibility -> weighted-moment -> blend loop and checks the running
//! state converges to the planted parameters.

use cbn_core::mixture::{em_temporary_stats, init_mixture, responsibilities};
use cbn_core::numerics::{Matrix, Rng};

const PLANTED_MEANS: [[f64; 2]; 2] = [[-2.0, -2.0], [2.0, 2.0]];

fn sample_batch(rng: &mut Rng, n: usize) -> Matrix {
    let mut x = Matrix::zeros(2, n);
    for i in 0..n {
        let comp = usize::from(rng.uniform() < 0.5);
        for ch in 0..2 {
            x.set(ch, i, PLANTED_MEANS[comp][ch] + rng.normal());
        }
    }
    x
}

#[test]
fn planted_two_component_mixture_is_recovered() {
    let mut rng = Rng::new(2024);
    let mut state = init_mixture(2, 2, &mut rng, 0.5);

    for _ in 0..200 {
        let x = sample_batch(&mut rng, 256);
        let w = responsibilities(&x, &state).unwrap();
        let temp = em_temporary_stats(&x, &w).unwrap();
        state.accumulate_em(&temp, 0.9);
    }

    state.validate().unwrap();

    // Best assignment of learned components to planted ones.
    let assignments = [[0usize, 1], [1, 0]];
    let coord_err = |perm: &[usize; 2]| -> f64 {
        let mut worst = 0.0f64;
        for (learned, &planted) in perm.iter().enumerate() {
            for ch in 0..2 {
                worst = worst.max((state.mu[learned][ch] - PLANTED_MEANS[planted][ch]).abs());
            }
        }
        worst
    };
    let (best, err) = assignments
        .iter()
        .map(|perm| (perm, coord_err(perm)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();

    assert!(
        err < 0.15,
        "worst per-coordinate mean error {err:.4}; learned means {:?}",
        state.mu
    );
    for (learned, &_planted) in best.iter().enumerate() {
        assert!(
            (state.tau[learned] - 0.5).abs() < 0.05,
            "prior {learned} is {:.4}, expected 0.5 +/- 0.05",
            state.tau[learned]
        );
        for ch in 0..2 {
            let v = state.var[learned][ch];
            assert!((v - 1.0).abs() < 0.3, "variance drifted to {v:.4}");
        }
    }
}
