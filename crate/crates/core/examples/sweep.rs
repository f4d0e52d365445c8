//! Scratch harness for choosing benchmark constants. Not part of the library.

use cbn_core::data::{longtail_counts, partition_classes, synth_clusters};
use cbn_core::model::NormKind;
use cbn_core::train::{build_model, train_run, TrainConfig};

#[derive(Clone, Copy)]
struct Arm {
    name: &'static str,
    norm: NormKind,
    m: usize,
    sbn: bool,
    w_sim: f64,
}

const ARMS: [Arm; 6] = [
    Arm { name: "baseline", norm: NormKind::Plain, m: 1, sbn: false, w_sim: 0.0 },
    Arm { name: "full-m1", norm: NormKind::Compound, m: 1, sbn: true, w_sim: 1.0 },
    Arm { name: "full-m2", norm: NormKind::Compound, m: 2, sbn: true, w_sim: 1.0 },
    Arm { name: "full-m4", norm: NormKind::Compound, m: 4, sbn: true, w_sim: 1.0 },
    Arm { name: "cbn4", norm: NormKind::Compound, m: 4, sbn: false, w_sim: 0.0 },
    Arm { name: "sbn4", norm: NormKind::Compound, m: 4, sbn: true, w_sim: 0.0 },
];

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let sep: f64 = args.first().map(|s| s.parse().unwrap()).unwrap_or(3.0);
    let epochs: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(40);
    let lr: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(0.05);
    let bsz: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(64);
    let hidden: Vec<usize> = args
        .get(4)
        .map(|s| s.split(',').map(|t| t.parse().unwrap()).collect())
        .unwrap_or_else(|| vec![32]);
    let w_sim_full: f64 = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(1.0);
    let jitter: f64 = args.get(6).map(|s| s.parse().unwrap()).unwrap_or(0.25);
    let lambda: f64 = args.get(7).map(|s| s.parse().unwrap()).unwrap_or(0.1);
    let sbn_cls: bool = args.get(8).map(|s| s.parse().unwrap()).unwrap_or(false);
    let lambda_s: f64 = args.get(9).map(|s| s.parse().unwrap()).unwrap_or(lambda);
    let strong_noise: f64 = args.get(10).map(|s| s.parse().unwrap()).unwrap_or(0.2);
    let strong_dropout: f64 = args.get(11).map(|s| s.parse().unwrap()).unwrap_or(0.1);
    let trace: bool = args.get(12).map(|s| s.parse().unwrap()).unwrap_or(false);
    let wd: f64 = args.get(13).map(|s| s.parse().unwrap()).unwrap_or(0.0);
    let momentum: f64 = args.get(14).map(|s| s.parse().unwrap()).unwrap_or(0.0);
    let resample: bool = args.get(15).map(|s| s.parse().unwrap()).unwrap_or(false);
    let lambda_c: f64 = args.get(16).map(|s| s.parse().unwrap()).unwrap_or(lambda);
    let decouple: bool = args.get(17).map(|s| s.parse().unwrap()).unwrap_or(false);
    let decouple_fraction: f64 = args.get(18).map(|s| s.parse().unwrap()).unwrap_or(0.2);
    let eps: f64 = args.get(19).map(|s| s.parse().unwrap()).unwrap_or(1e-5);
    let seed_base: u64 = args.get(20).map(|s| s.parse().unwrap()).unwrap_or(100);
    let cfg_seed_base: u64 = args.get(21).map(|s| s.parse().unwrap()).unwrap_or(0);

    let k = 10;
    let d = 16;
    let counts = longtail_counts(k, 500, 100.0);
    println!(
        "sep={sep} epochs={epochs} lr={lr} bsz={bsz} hidden={hidden:?} w_sim={w_sim_full} jitter={jitter}"
    );
    println!("counts={counts:?}");

    let seeds: Vec<u64> = (1..=5).collect();
    // results[arm][seed] = (overall, few)
    let mut overall = vec![vec![0.0; seeds.len()]; ARMS.len()];
    let mut few = vec![vec![0.0; seeds.len()]; ARMS.len()];
    let mut many = vec![vec![0.0; seeds.len()]; ARMS.len()];
    let mut medium = vec![vec![0.0; seeds.len()]; ARMS.len()];

    for (si, &seed) in seeds.iter().enumerate() {
        let data = synth_clusters(k, d, &counts, sep, seed_base + seed);
        for (ai, arm) in ARMS.iter().enumerate() {
            let mut config = TrainConfig {
                epochs,
                batch_size: bsz,
                lr,
                hidden: hidden.clone(),
                m: arm.m,
                norm: arm.norm,
                sbn: arm.sbn,
                w_sim: if arm.w_sim > 0.0 { w_sim_full } else { 0.0 },
                mixture_jitter: jitter,
                lambda,
                lambda_c,
                lambda_s,
                sbn_cls_loss: sbn_cls && arm.sbn,
                weight_decay: wd,
                sgd_momentum: momentum,
                resample,
                decouple,
                decouple_fraction,
                eps,
                seed: cfg_seed_base + seed,
                ..TrainConfig::default()
            };
            config.augment.strong_noise = strong_noise;
            config.augment.strong_dropout = strong_dropout;
            if !arm.sbn {
                config.w_sim = 0.0;
            }
            let start = std::time::Instant::now();
            let mut model = build_model(&config, d, k).unwrap();
            let partition = partition_classes(k, arm.m).unwrap();
            let records = train_run(&mut model, &data, partition, config).unwrap();
            if trace && seed <= 2 {
                for r in records.iter().filter(|r| r.epoch % 5 == 0) {
                    println!(
                        "    trace seed {seed} {:<8} ep {:>3} overall {:6.2} few {:6.2} med {:6.2}",
                        arm.name,
                        r.epoch,
                        r.top1,
                        r.few.unwrap(),
                        r.medium.unwrap()
                    );
                }
            }
            let last = records.last().unwrap();
            overall[ai][si] = last.top1;
            few[ai][si] = last.few.unwrap();
            many[ai][si] = last.many.unwrap();
            medium[ai][si] = last.medium.unwrap();
            println!(
                "  seed {seed} {:<8} overall {:6.2} few {:6.2} many {:6.2} med {:6.2}  ({:.2?})",
                arm.name,
                last.top1,
                last.few.unwrap(),
                last.many.unwrap(),
                last.medium.unwrap(),
                start.elapsed()
            );
        }
    }

    println!("\n== means over {} seeds ==", seeds.len());
    for (ai, arm) in ARMS.iter().enumerate() {
        let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        println!(
            "{:<8} overall {:6.2}  many {:6.2}  med {:6.2}  few {:6.2}  (few per seed: {:?})",
            arm.name,
            avg(&overall[ai]),
            avg(&many[ai]),
            avg(&medium[ai]),
            avg(&few[ai]),
            few[ai].iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>()
        );
    }

    let mean = |v: &Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
    let base_overall = mean(&overall[0]);
    let base_few = mean(&few[0]);
    let full_overall = mean(&overall[3]);
    let full_few = mean(&few[3]);
    println!("\nC6 baseline overall in [60,85]: {} ({base_overall:.2})", (60.0..=85.0).contains(&base_overall));
    println!("C6 full-m4 few > baseline few: {} ({full_few:.2} vs {base_few:.2})", full_few > base_few);
    println!(
        "C6 full-m4 overall >= baseline overall - 1: {} ({full_overall:.2} vs {base_overall:.2})",
        full_overall >= base_overall - 1.0
    );
    for ai in [2usize, 3] {
        let wins = (0..seeds.len()).filter(|&s| few[ai][s] > few[1][s]).count();
        println!("C7 {} beats full-m1 few-shot in {wins}/5 seeds (need >=4)", ARMS[ai].name);
    }
}
