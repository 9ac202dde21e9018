use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, DatasetShard};
use crate::error::{Error, Result};
use crate::seed::{rng_for, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionMode {
    Iid,
    NonIid,
}

impl FromStr for PartitionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iid" => Ok(PartitionMode::Iid),
            "non-iid" | "non_iid" | "noniid" => Ok(PartitionMode::NonIid),
            other => Err(Error::arg(format!("unknown partition mode `{other}`"))),
        }
    }
}

impl fmt::Display for PartitionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PartitionMode::Iid => "iid",
            PartitionMode::NonIid => "non-iid",
        })
    }
}

/// Splits `items` into `parts` contiguous chunks whose sizes differ by at
/// most one; the larger chunks come first.
fn split_even(items: &[usize], parts: usize) -> Vec<Vec<usize>> {
    let base = items.len() / parts;
    let extra = items.len() % parts;
    let mut out = Vec::with_capacity(parts);
    let mut start = 0;
    for k in 0..parts {
        let len = base + usize::from(k < extra);
        out.push(items[start..start + len].to_vec());
        start += len;
    }
    out
}

/// Assigns every sample of `dataset` to exactly one of `devices` shards.
///
/// `Iid` shuffles and cuts into near-equal pieces. `NonIid` sorts by label,
/// cuts into `2 * devices` contiguous pieces and hands each device two of
/// them at random, so a device sees only a few classes.
pub fn partition(
    dataset: &Dataset,
    devices: usize,
    mode: PartitionMode,
    seed: u64,
) -> Result<Vec<DatasetShard>> {
    if devices == 0 {
        return Err(Error::arg("number of devices must be positive"));
    }
    if devices > dataset.len() {
        return Err(Error::arg(format!(
            "{devices} devices but only {} samples",
            dataset.len()
        )));
    }
    let mut rng = rng_for(seed, Stream::Partition, &[]);
    let shards = match mode {
        PartitionMode::Iid => {
            let mut order: Vec<usize> = (0..dataset.len()).collect();
            order.shuffle(&mut rng);
            split_even(&order, devices)
        }
        PartitionMode::NonIid => {
            let mut order: Vec<usize> = (0..dataset.len()).collect();
            order.sort_by_key(|&i| dataset.label(i));
            let pieces = split_even(&order, 2 * devices);
            let mut assignment: Vec<usize> = (0..2 * devices).collect();
            assignment.shuffle(&mut rng);
            assignment
                .chunks(2)
                .map(|pair| pair.iter().flat_map(|&p| pieces[p].iter().copied()).collect())
                .collect()
        }
    };
    Ok(shards
        .into_iter()
        .enumerate()
        .map(|(owner, sample_indices)| DatasetShard {
            owner,
            sample_indices,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn labelled(labels: Vec<usize>, classes: usize) -> Dataset {
        let n = labels.len();
        Dataset::new(vec![0.0; n], labels, 1, classes).unwrap()
    }

    fn assert_disjoint_cover(shards: &[DatasetShard], n: usize) {
        let mut seen = vec![false; n];
        for s in shards {
            for &i in &s.sample_indices {
                assert!(!seen[i], "index {i} assigned twice");
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&b| b));
    }

    #[test]
    fn iid_equal_split() {
        let ds = labelled((0..100).map(|i| i % 10).collect(), 10);
        let shards = partition(&ds, 4, PartitionMode::Iid, 3).unwrap();
        let sizes: Vec<usize> = shards.iter().map(DatasetShard::len).collect();
        assert_eq!(sizes, vec![25, 25, 25, 25]);
        assert_disjoint_cover(&shards, 100);
    }

    #[test]
    fn non_iid_limits_labels_per_device() {
        // MNIST-like label counts (roughly 1000 each, uneven).
        let mut labels = Vec::new();
        for c in 0..10 {
            labels.extend(std::iter::repeat_n(c, 950 + 13 * c));
        }
        let ds = labelled(labels, 10);
        let shards = partition(&ds, 31, PartitionMode::NonIid, 9).unwrap();
        assert_eq!(shards.len(), 31);
        assert_disjoint_cover(&shards, ds.len());
        for s in &shards {
            let classes: BTreeSet<usize> = s.sample_indices.iter().map(|&i| ds.label(i)).collect();
            assert!(classes.len() <= 4, "device {} sees {:?}", s.owner, classes);
        }
    }

    #[test]
    fn single_device_gets_everything() {
        let ds = labelled((0..37).map(|i| i % 3).collect(), 3);
        for mode in [PartitionMode::Iid, PartitionMode::NonIid] {
            let shards = partition(&ds, 1, mode, 0).unwrap();
            assert_eq!(shards.len(), 1);
            let mut idx = shards[0].sample_indices.clone();
            idx.sort_unstable();
            assert_eq!(idx, (0..37).collect::<Vec<_>>());
        }
    }

    #[test]
    fn zero_devices_is_argument_error() {
        let ds = labelled(vec![0, 1], 2);
        assert!(matches!(
            partition(&ds, 0, PartitionMode::Iid, 0),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn deterministic_given_seed() {
        let ds = labelled((0..200).map(|i| i % 7).collect(), 7);
        for mode in [PartitionMode::Iid, PartitionMode::NonIid] {
            assert_eq!(
                partition(&ds, 6, mode, 42).unwrap(),
                partition(&ds, 6, mode, 42).unwrap()
            );
        }
    }
}
