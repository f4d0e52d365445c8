//! Synthetic long-tailed classification data and its supporting structure:
//! exponential imbalance profiles, label-group partitioning for the routed
//! normalizer, Gaussian cluster generation, weak/strong augmentation, and
//! the many/medium/few shot masks used in evaluation.
//!
//! Class labels are 1-based everywhere in this module's public surface.

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};
use serde::{Deserialize, Serialize};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

/// Balanced test-set size per class emitted by [`synth_clusters`].
pub const TEST_PER_CLASS: usize = 50;

const MAGIC: [u8; 8] = *b"CBNDSET\0";
const FORMAT_VERSION: u32 = 1;

/// Exponentially decaying per-class sample counts:
/// `n_i = round(n_max * rho^(-(i-1)/(K-1)))`, clamped to at least 1, so the
/// head class holds `n_max` samples and the tail roughly `n_max / rho`.
pub fn longtail_counts(k: usize, n_max: usize, rho: f64) -> Vec<usize> {
    assert!(k >= 2, "need at least two classes");
    assert!(rho >= 1.0, "imbalance ratio must be at least 1");
    assert!(n_max >= 1, "head class needs at least one sample");
    (0..k)
        .map(|i| {
            let exponent = -(i as f64) / (k - 1) as f64;
            let n = (n_max as f64) * rho.powf(exponent);
            (n.round() as usize).max(1)
        })
        .collect()
}

/// Labels `1..=K` split into `M` contiguous serial-number blocks whose sizes
/// differ by at most one (the first `K mod M` blocks take the extra label).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassPartition {
    groups: Vec<Vec<usize>>,
    group_of_label: Vec<usize>,
}

impl ClassPartition {
    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn num_classes(&self) -> usize {
        self.group_of_label.len()
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    /// Group index (0-based) that owns a 1-based class label.
    pub fn group_of(&self, label: usize) -> Result<usize> {
        if label == 0 || label > self.group_of_label.len() {
            return Err(Error::UnknownLabel {
                label,
                num_classes: self.group_of_label.len(),
            });
        }
        Ok(self.group_of_label[label - 1])
    }
}

pub fn partition_classes(k: usize, m: usize) -> Result<ClassPartition> {
    if m == 0 || m > k {
        return Err(Error::Config(format!(
            "cannot split {k} classes into {m} groups"
        )));
    }
    let base = k / m;
    let extra = k % m;
    let mut groups = Vec::with_capacity(m);
    let mut group_of_label = vec![0; k];
    let mut next = 1;
    for j in 0..m {
        let size = base + usize::from(j < extra);
        let members: Vec<usize> = (next..next + size).collect();
        for &label in &members {
            group_of_label[label - 1] = j;
        }
        next += size;
        groups.push(members);
    }
    Ok(ClassPartition {
        groups,
        group_of_label,
    })
}

/// An immutable generated dataset: a long-tailed train split and a balanced
/// test split. Features are `D x N` (one point per column); labels are
/// 1-based and aligned with feature columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub k: usize,
    pub d: usize,
    pub seed: u64,
    pub train_x: Matrix,
    pub train_y: Vec<usize>,
    pub test_x: Matrix,
    pub test_y: Vec<usize>,
}

impl Dataset {
    /// Per-class sample counts of the train split.
    pub fn train_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.k];
        for &label in &self.train_y {
            counts[label - 1] += 1;
        }
        counts
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 || self.d == 0 {
            return Err(Error::Malformed(format!(
                "dataset needs K >= 2 and D >= 1, got K={} D={}",
                self.k, self.d
            )));
        }
        let check_split = |x: &Matrix, y: &[usize], name: &str| -> Result<()> {
            if x.rows() != self.d || x.cols() != y.len() {
                return Err(Error::Malformed(format!(
                    "{name} split shape {}x{} does not match {} labels",
                    x.rows(),
                    x.cols(),
                    y.len()
                )));
            }
            if !x.is_finite() {
                return Err(Error::Malformed(format!(
                    "{name} split contains non-finite features"
                )));
            }
            if y.iter().any(|&l| l == 0 || l > self.k) {
                return Err(Error::Malformed(format!(
                    "{name} split has labels outside 1..={}",
                    self.k
                )));
            }
            Ok(())
        };
        check_split(&self.train_x, &self.train_y, "train")?;
        check_split(&self.test_x, &self.test_y, "test")
    }

    /// Binary container: fixed header, then all features as little-endian
    /// 64-bit floats (train then test, point-major), then all labels as
    /// little-endian 32-bit integers in the same order. Byte-identical for
    /// identical content — nothing time- or environment-dependent is stored.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        self.validate()?;
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        w.write_all(&MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.k as u32).to_le_bytes())?;
        w.write_all(&(self.d as u32).to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        for count in self.train_counts() {
            w.write_all(&(count as u32).to_le_bytes())?;
        }
        w.write_all(&((self.test_y.len() / self.k) as u32).to_le_bytes())?;
        let write_points = |w: &mut BufWriter<std::fs::File>, x: &Matrix| -> Result<()> {
            for i in 0..x.cols() {
                for ch in 0..x.rows() {
                    w.write_all(&x.get(ch, i).to_le_bytes())?;
                }
            }
            Ok(())
        };
        write_points(&mut w, &self.train_x)?;
        write_points(&mut w, &self.test_x)?;
        for &label in self.train_y.iter().chain(&self.test_y) {
            w.write_all(&(label as u32).to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Dataset> {
        let mut r = BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)
            .map_err(|_| Error::Malformed("dataset file too short for header".into()))?;
        if magic != MAGIC {
            return Err(Error::Malformed("not a dataset container".into()));
        }
        let version = read_u32(&mut r)?;
        if version != FORMAT_VERSION {
            return Err(Error::Malformed(format!(
                "unsupported dataset container version {version}"
            )));
        }
        let k = read_u32(&mut r)? as usize;
        let d = read_u32(&mut r)? as usize;
        let seed = read_u64(&mut r)?;
        if k < 2 || k > 1_000_000 || d == 0 || d > 1_000_000 {
            return Err(Error::Malformed(format!(
                "implausible dataset header: K={k} D={d}"
            )));
        }
        let mut counts = Vec::with_capacity(k);
        for _ in 0..k {
            counts.push(read_u32(&mut r)? as usize);
        }
        let test_per_class = read_u32(&mut r)? as usize;
        let n_train: usize = counts.iter().sum();
        let n_test = test_per_class * k;

        let read_points = |r: &mut BufReader<std::fs::File>, n: usize| -> Result<Matrix> {
            let mut x = Matrix::zeros(d, n);
            for i in 0..n {
                for ch in 0..d {
                    x.set(ch, i, read_f64(r)?);
                }
            }
            Ok(x)
        };
        let train_x = read_points(&mut r, n_train)?;
        let test_x = read_points(&mut r, n_test)?;
        let mut labels = Vec::with_capacity(n_train + n_test);
        for _ in 0..n_train + n_test {
            labels.push(read_u32(&mut r)? as usize);
        }
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(Error::Malformed("dataset container has trailing bytes".into()));
        }
        let test_y = labels.split_off(n_train);
        let ds = Dataset {
            k,
            d,
            seed,
            train_x,
            train_y: labels,
            test_x,
            test_y,
        };
        ds.validate()?;
        if ds.train_counts() != counts {
            return Err(Error::Malformed(
                "dataset labels disagree with header counts".into(),
            ));
        }
        Ok(ds)
    }

    /// RFC-4180 CSV of up to `max_rows` points (train first, then test)
    /// for eyeballing a generated file.
    pub fn csv_preview(&self, max_rows: usize) -> String {
        let mut out = String::from("split,label");
        for ch in 0..self.d {
            out.push_str(&format!(",f{ch}"));
        }
        out.push_str("\r\n");
        let mut remaining = max_rows;
        for (split, x, y) in [
            ("train", &self.train_x, &self.train_y),
            ("test", &self.test_x, &self.test_y),
        ] {
            for i in 0..y.len() {
                if remaining == 0 {
                    return out;
                }
                out.push_str(&format!("{split},{}", y[i]));
                for ch in 0..self.d {
                    out.push_str(&format!(",{}", x.get(ch, i)));
                }
                out.push_str("\r\n");
                remaining -= 1;
            }
        }
        out
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|_| Error::Malformed("dataset file truncated".into()))?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)
        .map_err(|_| Error::Malformed("dataset file truncated".into()))?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)
        .map_err(|_| Error::Malformed("dataset file truncated".into()))?;
    Ok(f64::from_le_bytes(b))
}

/// Gaussian clusters with a long-tailed train split and a balanced test
/// split of [`TEST_PER_CLASS`] points per class. Class means sit on a
/// seeded random direction of the unit sphere scaled by `separation`;
/// samples add unit-variance isotropic noise.
pub fn synth_clusters(
    k: usize,
    d: usize,
    counts: &[usize],
    separation: f64,
    seed: u64,
) -> Dataset {
    assert_eq!(counts.len(), k, "one count per class");
    assert!(separation > 0.0, "separation must be positive");
    let root = Rng::new(seed);

    let mut mean_rng = root.split("class-means");
    let means: Vec<Vec<f64>> = (0..k)
        .map(|_| {
            let v: Vec<f64> = (0..d).map(|_| mean_rng.normal()).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            v.iter().map(|x| separation * x / norm).collect()
        })
        .collect();

    let fill_split = |rng: &mut Rng, per_class: &dyn Fn(usize) -> usize| {
        let total: usize = (0..k).map(per_class).sum();
        let mut x = Matrix::zeros(d, total);
        let mut y = Vec::with_capacity(total);
        let mut col = 0;
        for class in 0..k {
            for _ in 0..per_class(class) {
                for ch in 0..d {
                    x.set(ch, col, means[class][ch] + rng.normal());
                }
                y.push(class + 1);
                col += 1;
            }
        }
        (x, y)
    };

    let mut train_rng = root.split("train-points");
    let (train_x, train_y) = fill_split(&mut train_rng, &|class| counts[class]);
    let mut test_rng = root.split("test-points");
    let (test_x, test_y) = fill_split(&mut test_rng, &|_| TEST_PER_CLASS);

    Dataset {
        k,
        d,
        seed,
        train_x,
        train_y,
        test_x,
        test_y,
    }
}

/// Distortion magnitudes for the two augmentation strengths. The strong
/// family must dominate the weak one for the dual-path asymmetry to exist.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentPolicy {
    pub weak_noise: f64,
    pub weak_scale: f64,
    pub strong_noise: f64,
    pub strong_scale: f64,
    pub strong_dropout: f64,
}

impl Default for AugmentPolicy {
    fn default() -> Self {
        AugmentPolicy {
            weak_noise: 0.05,
            weak_scale: 0.05,
            strong_noise: 0.2,
            strong_scale: 0.2,
            strong_dropout: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strength {
    Weak,
    Strong,
}

/// Distort a feature batch: per-entry scale jitter in `(1±s)`, additive
/// Gaussian noise of standard deviation `σ`, and (strong only) zeroing each
/// entry with probability `p`. Draw order is entry-major and fixed, so a
/// given `(rng state, shape)` always produces the same distortion.
pub fn augment(x: &Matrix, policy: &AugmentPolicy, strength: Strength, rng: &mut Rng) -> Matrix {
    let (noise, scale, dropout) = match strength {
        Strength::Weak => (policy.weak_noise, policy.weak_scale, 0.0),
        Strength::Strong => (
            policy.strong_noise,
            policy.strong_scale,
            policy.strong_dropout,
        ),
    };
    let mut out = x.clone();
    for v in out.as_mut_slice() {
        let jitter = rng.uniform_in(-scale, scale);
        let z = rng.normal();
        *v = *v * (1.0 + jitter) + noise * z;
        if dropout > 0.0 && rng.uniform() < dropout {
            *v = 0.0;
        }
    }
    out
}

/// Shot-frequency class subgroups: many (> 100 train samples),
/// medium (20..=100), few (< 20). Labels are 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubgroupMasks {
    pub many: Vec<usize>,
    pub medium: Vec<usize>,
    pub few: Vec<usize>,
}

pub fn subgroup_masks(counts: &[usize]) -> SubgroupMasks {
    let mut masks = SubgroupMasks {
        many: Vec::new(),
        medium: Vec::new(),
        few: Vec::new(),
    };
    for (idx, &n) in counts.iter().enumerate() {
        let label = idx + 1;
        if n > 100 {
            masks.many.push(label);
        } else if n >= 20 {
            masks.medium.push(label);
        } else {
            masks.few.push(label);
        }
    }
    masks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_balanced_when_ratio_is_one() {
        assert_eq!(longtail_counts(5, 40, 1.0), vec![40; 5]);
    }

    #[test]
    fn counts_two_class_extreme_ratio() {
        assert_eq!(longtail_counts(2, 100, 100.0), vec![100, 1]);
    }

    #[test]
    fn counts_match_direct_formula() {
        let counts = longtail_counts(10, 500, 10.0);
        for (i, &n) in counts.iter().enumerate() {
            let want = (500.0 * 10f64.powf(-(i as f64) / 9.0)).round() as usize;
            assert_eq!(n, want.max(1), "class {}", i + 1);
        }
        assert_eq!(counts[0], 500);
        assert_eq!(counts[9], 50);
    }

    #[test]
    fn counts_non_increasing_and_clamped() {
        for &(k, n_max, rho) in &[(10usize, 500usize, 100.0f64), (37, 12, 50.0), (100, 3, 1000.0)] {
            let counts = longtail_counts(k, n_max, rho);
            assert_eq!(counts[0], n_max);
            assert!(counts.windows(2).all(|w| w[0] >= w[1]), "{counts:?}");
            assert!(counts.iter().all(|&n| n >= 1));
        }
    }

    #[test]
    fn partition_single_group_holds_everything() {
        let p = partition_classes(10, 1).unwrap();
        assert_eq!(p.groups(), &[(1..=10).collect::<Vec<_>>()]);
    }

    #[test]
    fn partition_even_split() {
        let p = partition_classes(10, 2).unwrap();
        assert_eq!(p.groups()[0], (1..=5).collect::<Vec<_>>());
        assert_eq!(p.groups()[1], (6..=10).collect::<Vec<_>>());
    }

    #[test]
    fn partition_uneven_split_front_loads_extras() {
        let p = partition_classes(10, 4).unwrap();
        let sizes: Vec<usize> = p.groups().iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![3, 3, 2, 2]);
        // Disjoint, contiguous, and covering 1..=10.
        let flat: Vec<usize> = p.groups().iter().flatten().copied().collect();
        assert_eq!(flat, (1..=10).collect::<Vec<_>>());
        assert_eq!(p.group_of(1).unwrap(), 0);
        assert_eq!(p.group_of(6).unwrap(), 1);
        assert_eq!(p.group_of(7).unwrap(), 2);
        assert_eq!(p.group_of(10).unwrap(), 3);
    }

    #[test]
    fn partition_rejects_bad_group_counts() {
        assert!(matches!(partition_classes(3, 4), Err(Error::Config(_))));
        assert!(matches!(partition_classes(3, 0), Err(Error::Config(_))));
    }

    #[test]
    fn partition_rejects_unknown_labels() {
        let p = partition_classes(5, 2).unwrap();
        assert!(matches!(p.group_of(0), Err(Error::UnknownLabel { .. })));
        assert!(matches!(p.group_of(6), Err(Error::UnknownLabel { .. })));
    }

    #[test]
    fn synth_counts_match_request_and_test_is_balanced() {
        let counts = longtail_counts(6, 30, 10.0);
        let ds = synth_clusters(6, 4, &counts, 3.0, 9);
        ds.validate().unwrap();
        assert_eq!(ds.train_counts(), counts);
        let mut test_counts = vec![0usize; 6];
        for &label in &ds.test_y {
            test_counts[label - 1] += 1;
        }
        assert_eq!(test_counts, vec![TEST_PER_CLASS; 6]);
    }

    #[test]
    fn synth_single_sample_classes() {
        let ds = synth_clusters(3, 2, &[1, 1, 1], 2.0, 4);
        assert_eq!(ds.train_y.len(), 3);
        assert_eq!(ds.train_y, vec![1, 2, 3]);
    }

    #[test]
    fn synth_replay_is_bit_identical() {
        let counts = vec![8, 5, 3];
        let a = synth_clusters(3, 5, &counts, 2.5, 77);
        let b = synth_clusters(3, 5, &counts, 2.5, 77);
        assert_eq!(a, b);
        let c = synth_clusters(3, 5, &counts, 2.5, 78);
        assert_ne!(a, c);
    }

    #[test]
    fn synth_wide_separation_solved_by_nearest_centroid() {
        let counts = vec![20, 12, 7, 4];
        let ds = synth_clusters(4, 6, &counts, 50.0, 11);
        // Centroids from the train split, classification of the test split.
        let mut centroids = vec![vec![0.0; ds.d]; ds.k];
        let mut per_class = vec![0usize; ds.k];
        for (i, &label) in ds.train_y.iter().enumerate() {
            per_class[label - 1] += 1;
            for ch in 0..ds.d {
                centroids[label - 1][ch] += ds.train_x.get(ch, i);
            }
        }
        for (c, &n) in centroids.iter_mut().zip(&per_class) {
            for v in c {
                *v /= n as f64;
            }
        }
        let mut correct = 0;
        for (i, &label) in ds.test_y.iter().enumerate() {
            let best = (0..ds.k)
                .min_by(|&a, &b| {
                    let dist = |c: usize| -> f64 {
                        (0..ds.d)
                            .map(|ch| {
                                let dev = ds.test_x.get(ch, i) - centroids[c][ch];
                                dev * dev
                            })
                            .sum()
                    };
                    dist(a).total_cmp(&dist(b))
                })
                .unwrap();
            correct += usize::from(best + 1 == label);
        }
        assert_eq!(correct, ds.test_y.len());
    }

    #[test]
    fn augment_zero_magnitudes_are_identity() {
        let policy = AugmentPolicy {
            weak_noise: 0.0,
            weak_scale: 0.0,
            strong_noise: 0.0,
            strong_scale: 0.0,
            strong_dropout: 0.0,
        };
        let mut rng = Rng::new(5);
        let x = Matrix::from_rows(&[&[1.0, -2.0], &[0.5, 3.0]]).unwrap();
        assert_eq!(augment(&x, &policy, Strength::Weak, &mut rng), x);
        assert_eq!(augment(&x, &policy, Strength::Strong, &mut rng), x);
    }

    #[test]
    fn augment_full_dropout_zeroes_everything() {
        let policy = AugmentPolicy {
            strong_dropout: 1.0,
            ..AugmentPolicy::default()
        };
        let mut rng = Rng::new(6);
        let x = Matrix::filled(3, 4, 2.0);
        let out = augment(&x, &policy, Strength::Strong, &mut rng);
        assert!(out.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn augment_strong_carries_more_energy_than_weak() {
        let policy = AugmentPolicy::default();
        let x = Matrix::filled(8, 1, 1.0);
        let mut energy = |strength: Strength, seed: u64| -> f64 {
            let mut rng = Rng::new(seed);
            let mut total = 0.0;
            for _ in 0..10_000 {
                let out = augment(&x, &policy, strength, &mut rng);
                total += out.max_abs_diff(&x).powi(2);
            }
            total
        };
        let weak = energy(Strength::Weak, 21);
        let strong = energy(Strength::Strong, 21);
        assert!(
            strong > 2.0 * weak,
            "strong energy {strong} should dominate weak {weak}"
        );
    }

    #[test]
    fn augment_replays_deterministically() {
        let policy = AugmentPolicy::default();
        let x = Matrix::from_rows(&[&[0.1, 0.2, 0.3]]).unwrap();
        let a = augment(&x, &policy, Strength::Strong, &mut Rng::new(9));
        let b = augment(&x, &policy, Strength::Strong, &mut Rng::new(9));
        assert_eq!(a, b);
    }

    #[test]
    fn subgroup_thresholds_follow_shot_bands() {
        let masks = subgroup_masks(&[150, 100, 20, 19, 101, 1]);
        assert_eq!(masks.many, vec![1, 5]);
        assert_eq!(masks.medium, vec![2, 3]);
        assert_eq!(masks.few, vec![4, 6]);
    }

    #[test]
    fn subgroups_partition_the_class_set() {
        let counts = longtail_counts(10, 500, 100.0);
        let masks = subgroup_masks(&counts);
        let mut all: Vec<usize> = masks
            .many
            .iter()
            .chain(&masks.medium)
            .chain(&masks.few)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (1..=10).collect::<Vec<_>>());
        assert!(!masks.many.is_empty() && !masks.medium.is_empty() && !masks.few.is_empty());
    }

    #[test]
    fn binary_container_round_trips() {
        let counts = longtail_counts(4, 25, 5.0);
        let ds = synth_clusters(4, 3, &counts, 2.0, 31);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.dat");
        ds.write_binary(&path).unwrap();
        let back = Dataset::read_binary(&path).unwrap();
        assert_eq!(back, ds);

        let again = dir.path().join("toy2.dat");
        ds.write_binary(&again).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
    }

    #[test]
    fn binary_container_rejects_corruption() {
        let ds = synth_clusters(3, 2, &[4, 2, 1], 2.0, 8);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.dat");
        ds.write_binary(&path).unwrap();

        let bytes = std::fs::read(&path).unwrap();
        let truncated = dir.path().join("short.dat");
        std::fs::write(&truncated, &bytes[..bytes.len() - 5]).unwrap();
        assert!(matches!(
            Dataset::read_binary(&truncated),
            Err(Error::Malformed(_))
        ));

        let mut wrong = bytes.clone();
        wrong[0] ^= 0xff;
        let bad_magic = dir.path().join("magic.dat");
        std::fs::write(&bad_magic, &wrong).unwrap();
        assert!(matches!(
            Dataset::read_binary(&bad_magic),
            Err(Error::Malformed(_))
        ));
    }

    #[test]
    fn csv_preview_is_crlf_with_header() {
        let ds = synth_clusters(3, 2, &[2, 1, 1], 2.0, 8);
        let csv = ds.csv_preview(3);
        let lines: Vec<&str> = csv.split("\r\n").filter(|l| !l.is_empty()).collect();
        assert_eq!(lines[0], "split,label,f0,f1");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("train,1,"));
    }
}
