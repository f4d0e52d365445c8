//! Scratch diagnostic: what geometry does the mixture learn? Not part of the library.

use cbn_core::data::{longtail_counts, partition_classes, synth_clusters};
use cbn_core::mixture::responsibilities;
use cbn_core::model::NormKind;
use cbn_core::numerics::Matrix;
use cbn_core::train::{build_model, train_run, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let m: usize = args.first().map(|s| s.parse().unwrap()).unwrap_or(4);
    let seed: u64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(1);
    let w_sim: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(0.4);
    let lambda: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(0.9);

    let k = 10;
    let d = 16;
    let counts = longtail_counts(k, 500, 100.0);
    let data = synth_clusters(k, d, &counts, 3.0, 100 + seed);

    let config = TrainConfig {
        epochs: 45,
        batch_size: 64,
        lr: 0.05,
        hidden: vec![32],
        m,
        norm: NormKind::Compound,
        sbn: true,
        w_sim,
        mixture_jitter: 0.25,
        lambda,
        lambda_c: lambda,
        lambda_s: lambda,
        seed,
        ..TrainConfig::default()
    };
    let mut model = build_model(&config, d, k).unwrap();
    let partition = partition_classes(k, m).unwrap();
    let records = train_run(&mut model, &data, partition, config).unwrap();
    let last = records.last().unwrap();
    println!(
        "m={m} seed={seed}: overall {:.2} many {:.2} med {:.2} few {:.2}",
        last.top1,
        last.many.unwrap(),
        last.medium.unwrap(),
        last.few.unwrap()
    );

    let site = &model.blocks[0].1;
    let state = &site.state;
    println!("priors: {:?}", state.tau.iter().map(|t| (t * 1000.0).round() / 1000.0).collect::<Vec<_>>());
    // Component separation in units of pooled std, per pair.
    for a in 0..m {
        for b in (a + 1)..m {
            let mut dist2 = 0.0;
            let mut pool = 0.0;
            for c in 0..state.dim() {
                let diff = state.mu[a][c] - state.mu[b][c];
                dist2 += diff * diff;
                pool += 0.5 * (state.var[a][c] + state.var[b][c]);
            }
            println!(
                "  components {a}-{b}: |mu_a-mu_b| = {:.3}, pooled std = {:.3}, ratio {:.3}",
                dist2.sqrt(),
                (pool / state.dim() as f64).sqrt(),
                dist2.sqrt() / (pool / state.dim() as f64).sqrt().max(1e-12)
            );
        }
    }
    // Variance spread per component (mean channel variance).
    for j in 0..m {
        let mv = state.var[j].iter().sum::<f64>() / state.dim() as f64;
        let mn = state.mu[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        println!("  component {j}: |mu| = {mn:.3}, mean var = {mv:.3}");
    }

    // Eval responsibilities per class: push test features through the first
    // linear layer, ask the mixture, average per class.
    let lin = &model.blocks[0].0;
    let n = data.test_x.cols();
    let mut h = Matrix::zeros(lin.weight.rows(), n);
    for i in 0..n {
        for r in 0..lin.weight.rows() {
            let mut acc = lin.bias[r];
            for c in 0..d {
                acc += lin.weight.get(r, c) * data.test_x.get(c, i);
            }
            h.set(r, i, acc);
        }
    }
    let w = responsibilities(&h, state).unwrap();
    for class in 1..=k {
        let idx: Vec<usize> = (0..n).filter(|&i| data.test_y[i] == class).collect();
        let mut mean = vec![0.0; m];
        for &i in &idx {
            for j in 0..m {
                mean[j] += w.get(i, j) / idx.len() as f64;
            }
        }
        println!(
            "class {class:>2} (n_train {:>3}): mean responsibilities {:?}",
            counts[class - 1],
            mean.iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>()
        );
    }
}
