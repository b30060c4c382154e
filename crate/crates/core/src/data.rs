//! Datasets and their distribution across devices.
//!
//! Provides a synthetic Gaussian-blob generator (a desk-scale stand-in for
//! image benchmarks) plus the two partitioning schemes used in experiments:
//! IID equal slices and label-skewed shards where each device only sees a
//! couple of classes.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::Batch;
use crate::rng;

#[cfg(not(feature = "std"))]
use crate::fmath::F64Ext;

/// Which side of the train/test split a handle holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Split {
    Train,
    Test,
}

/// An in-memory dataset: row-major features in `[0, 1]` and class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetHandle {
    pub name: String,
    /// `num_samples × input_dim`, row-major.
    pub features: Vec<f32>,
    pub labels: Vec<usize>,
    pub input_dim: usize,
    pub num_classes: usize,
    pub split: Split,
}

impl DatasetHandle {
    pub fn num_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Feature row of one sample.
    pub fn row(&self, sample: usize) -> &[f32] {
        let d = self.input_dim;
        &self.features[sample * d..(sample + 1) * d]
    }

    /// Copies the given samples into a batch (rows in `indices` order).
    pub fn batch(&self, indices: &[usize]) -> Batch {
        let mut features = Vec::with_capacity(indices.len() * self.input_dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Batch {
            features,
            labels,
            input_dim: self.input_dim,
        }
    }
}

/// Synthetic isotropic Gaussian clusters around random unit-norm centers,
/// split 6:1 into (train, test).
///
/// Features are mapped affinely into `[0, 1]` (pixel-style scaling):
/// `x = clamp(0.5 + 0.25·(center + spread·g))`. Each class contributes
/// exactly `samples_per_class` samples across the two splits; smaller
/// `spread` makes the classes more separable.
pub fn make_blobs(
    num_classes: usize,
    samples_per_class: usize,
    input_dim: usize,
    spread: f64,
    seed: u64,
) -> (DatasetHandle, DatasetHandle) {
    assert!(num_classes > 0 && samples_per_class > 0 && input_dim > 0);
    let mut center_rng = rng::stream(seed, "blob-centers", 0);
    let mut centers = Vec::with_capacity(num_classes);
    for _ in 0..num_classes {
        let mut c: Vec<f64> = (0..input_dim).map(|_| rng::normal(&mut center_rng)).collect();
        let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        for v in &mut c {
            *v /= norm;
        }
        centers.push(c);
    }

    let test_per_class = samples_per_class / 7;
    let train_per_class = samples_per_class - test_per_class;

    let make = |split: Split, count: usize, domain: &str| {
        let mut features = Vec::with_capacity(num_classes * count * input_dim);
        let mut labels = Vec::with_capacity(num_classes * count);
        for (class, center) in centers.iter().enumerate() {
            let mut sample_rng = rng::stream(seed, domain, class as u64);
            for _ in 0..count {
                for &c in center {
                    let z = c + spread * rng::normal(&mut sample_rng);
                    features.push((0.5 + 0.25 * z).clamp(0.0, 1.0) as f32);
                }
                labels.push(class);
            }
        }
        DatasetHandle {
            name: String::from("blobs"),
            features,
            labels,
            input_dim,
            num_classes,
            split,
        }
    };

    let train = make(Split::Train, train_per_class, "blob-train");
    let test = make(Split::Test, test_per_class, "blob-test");
    (train, test)
}

/// A class-pool exhaustion event during non-IID sharding: the device had to
/// add `class` to its shard to fill its quota.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Redraw {
    pub device: usize,
    pub class: usize,
}

/// Per-device sample assignments. Index lists are disjoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub assignments: Vec<Vec<usize>>,
    /// Class redraws that occurred while building a non-IID partition
    /// (empty for IID).
    pub redraws: Vec<Redraw>,
}

impl Partition {
    /// Sample count of one device.
    pub fn n_k(&self, device: usize) -> usize {
        self.assignments[device].len()
    }

    /// Total number of assigned samples.
    pub fn total_assigned(&self) -> usize {
        self.assignments.iter().map(Vec::len).sum()
    }
}

/// IID partition: a seeded shuffle cut into contiguous slices, the remainder
/// distributed one extra sample per device starting from device 0.
pub fn partition_iid(data: &DatasetHandle, num_devices: usize, seed: u64) -> Result<Partition> {
    let n = data.num_samples();
    if num_devices == 0 || n < num_devices {
        return Err(Error::Partition(alloc::format!(
            "cannot split {n} samples across {num_devices} devices"
        )));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut rng::stream(seed, "partition-iid", 0));

    let base = n / num_devices;
    let remainder = n % num_devices;
    let mut assignments = Vec::with_capacity(num_devices);
    let mut cursor = 0;
    for device in 0..num_devices {
        let size = base + usize::from(device < remainder);
        assignments.push(indices[cursor..cursor + size].to_vec());
        cursor += size;
    }
    Ok(Partition {
        assignments,
        redraws: Vec::new(),
    })
}

/// Label-skewed partition: each device draws `classes_per_device` distinct
/// classes and fills its quota of `⌊n/N⌋` samples uniformly without
/// replacement from the shared pools of those classes.
///
/// If a device's chosen pools run dry mid-quota, a fresh class with remaining
/// samples is drawn and the event recorded in [`Partition::redraws`].
pub fn partition_noniid_shards(
    data: &DatasetHandle,
    num_devices: usize,
    classes_per_device: usize,
    seed: u64,
) -> Result<Partition> {
    let n = data.num_samples();
    if num_devices == 0 {
        return Err(Error::Partition(String::from("no devices")));
    }
    if classes_per_device == 0 || classes_per_device > data.num_classes {
        return Err(Error::Partition(alloc::format!(
            "classes_per_device {classes_per_device} out of range for {} classes",
            data.num_classes
        )));
    }
    let quota = n / num_devices;
    if quota == 0 {
        return Err(Error::Partition(alloc::format!(
            "quota of {n}/{num_devices} samples per device is zero"
        )));
    }

    // Shared per-class pools, each pre-shuffled so popping from the back is a
    // uniform draw without replacement.
    let mut pools: Vec<Vec<usize>> = vec![Vec::new(); data.num_classes];
    for (i, &label) in data.labels.iter().enumerate() {
        pools[label].push(i);
    }
    for (class, pool) in pools.iter_mut().enumerate() {
        pool.shuffle(&mut rng::stream(seed, "noniid-pool", class as u64));
    }

    let mut choice_rng = rng::stream(seed, "noniid-classes", 0);
    let mut assignments = Vec::with_capacity(num_devices);
    let mut redraws = Vec::new();

    for device in 0..num_devices {
        let mut chosen: Vec<usize> = Vec::with_capacity(classes_per_device);
        while chosen.len() < classes_per_device {
            let class = choice_rng.gen_range(0..data.num_classes);
            if !chosen.contains(&class) {
                chosen.push(class);
            }
        }

        let mut samples = Vec::with_capacity(quota);
        while samples.len() < quota {
            let available: usize = chosen.iter().map(|&c| pools[c].len()).sum();
            if available == 0 {
                let replacement = pick_nonempty_class(&pools, &chosen, &mut choice_rng)
                    .ok_or_else(|| {
                        Error::Partition(alloc::format!(
                            "device {device} cannot fill quota {quota}: all pools exhausted"
                        ))
                    })?;
                redraws.push(Redraw {
                    device,
                    class: replacement,
                });
                chosen.push(replacement);
                continue;
            }
            // Uniform over the union of the chosen pools.
            let mut pick = choice_rng.gen_range(0..available);
            for &c in &chosen {
                if pick < pools[c].len() {
                    samples.push(pools[c].pop().expect("non-empty by construction"));
                    break;
                }
                pick -= pools[c].len();
            }
        }
        assignments.push(samples);
    }

    Ok(Partition {
        assignments,
        redraws,
    })
}

fn pick_nonempty_class(
    pools: &[Vec<usize>],
    exclude: &[usize],
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Option<usize> {
    let candidates: Vec<usize> = (0..pools.len())
        .filter(|c| !pools[*c].is_empty() && !exclude.contains(c))
        .collect();
    let fallback: Vec<usize> = (0..pools.len()).filter(|c| !pools[*c].is_empty()).collect();
    let set = if candidates.is_empty() { fallback } else { candidates };
    if set.is_empty() {
        None
    } else {
        Some(set[rng.gen_range(0..set.len())])
    }
}
