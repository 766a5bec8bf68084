//! Non-iid partitioning by dominant class.
//!
//! Every client gets an equal share of the training set. A `sigma_d`
//! fraction of each share comes from the client's dominant class
//! (`client_id mod n_classes`); the rest is spread evenly over the other
//! classes. `sigma_d = 0` is the iid case: shares are spread evenly over all
//! classes and no class is dominant.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub indices: Vec<usize>,
    pub dominant_class: Option<usize>,
}

/// Splits `total` as evenly as possible over `classes`, handing the
/// remainder out in rotation starting at `offset`.
fn spread(total: usize, classes: &[usize], offset: usize, need: &mut [usize]) {
    let k = classes.len();
    for (t, &c) in classes.iter().enumerate() {
        let rotated = (t + k - offset % k) % k;
        need[c] += total / k + usize::from(rotated < total % k);
    }
}

pub fn partition_noniid<R: Rng + ?Sized>(
    labels: &[usize],
    n_classes: usize,
    n_clients: usize,
    sigma_d: f64,
    rng: &mut R,
) -> Result<Vec<Partition>> {
    if n_clients == 0 || n_classes < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least one client and two classes (got {n_clients}, {n_classes})"
        )));
    }
    if !(0.0..=1.0).contains(&sigma_d) {
        return Err(Error::InvalidInput(format!("sigma_d must be in [0, 1], got {sigma_d}")));
    }
    if labels.len() < n_clients * n_classes {
        return Err(Error::InsufficientData(format!(
            "{} samples for {n_clients} clients x {n_classes} classes; need at least {}",
            labels.len(),
            n_clients * n_classes
        )));
    }
    let mut pools: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &y) in labels.iter().enumerate() {
        if y >= n_classes {
            return Err(Error::InvalidInput(format!("label {y} out of range")));
        }
        pools[y].push(i);
    }
    for pool in &mut pools {
        pool.shuffle(rng);
    }

    let size = labels.len() / n_clients;
    let iid = sigma_d == 0.0;
    let mut needs = vec![vec![0usize; n_classes]; n_clients];
    let mut dominant = vec![None; n_clients];
    for (i, need) in needs.iter_mut().enumerate() {
        if iid {
            let all: Vec<usize> = (0..n_classes).collect();
            spread(size, &all, i, need);
        } else {
            let dom = i % n_classes;
            dominant[i] = Some(dom);
            let d = (sigma_d * size as f64).round() as usize;
            need[dom] = d;
            let others: Vec<usize> = (1..n_classes).map(|t| (dom + t) % n_classes).collect();
            spread(size - d, &others, i / n_classes, need);
        }
    }

    // Dominant shares are exact, so they must be fully covered.
    let mut dom_demand = vec![0usize; n_classes];
    for (i, d) in dominant.iter().enumerate() {
        if let Some(c) = d {
            dom_demand[*c] += needs[i][*c];
        }
    }
    let short: Vec<String> = (0..n_classes)
        .filter(|&c| dom_demand[c] > pools[c].len())
        .map(|c| format!("class {c} needs {} but has {}", dom_demand[c], pools[c].len()))
        .collect();
    if !short.is_empty() {
        return Err(Error::InsufficientData(short.join("; ")));
    }

    let mut out: Vec<Vec<usize>> = vec![Vec::with_capacity(size); n_clients];
    for (i, d) in dominant.iter().enumerate() {
        if let Some(c) = *d {
            let take = needs[i][c];
            let at = pools[c].len() - take;
            out[i].extend(pools[c].drain(at..));
        }
    }
    for i in 0..n_clients {
        let mut shortfall = 0;
        for c in 0..n_classes {
            if Some(c) == dominant[i] {
                continue;
            }
            let take = needs[i][c].min(pools[c].len());
            shortfall += needs[i][c] - take;
            let at = pools[c].len() - take;
            out[i].extend(pools[c].drain(at..));
        }
        // Rounding in the rotation can overdraw a class by a few samples;
        // make them up from the fullest remaining non-dominant classes.
        while shortfall > 0 {
            let c = (0..n_classes)
                .filter(|&c| Some(c) != dominant[i] && !pools[c].is_empty())
                .max_by(|&a, &b| pools[a].len().cmp(&pools[b].len()).then(b.cmp(&a)))
                .ok_or_else(|| {
                    Error::InsufficientData(format!(
                        "client {i} needs {size} samples but only {} remain outside its dominant class",
                        out[i].len()
                    ))
                })?;
            out[i].push(pools[c].pop().unwrap());
            shortfall -= 1;
        }
    }

    Ok(out
        .into_iter()
        .zip(dominant)
        .map(|(mut indices, dominant_class)| {
            indices.shuffle(rng);
            Partition {
                indices,
                dominant_class,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use std::collections::HashSet;

    fn balanced(n: usize, classes: usize) -> Vec<usize> {
        (0..n).map(|i| i % classes).collect()
    }

    fn counts(labels: &[usize], p: &Partition, classes: usize) -> Vec<usize> {
        let mut c = vec![0; classes];
        for &i in &p.indices {
            c[labels[i]] += 1;
        }
        c
    }

    fn rng() -> crate::rng::SimRng {
        stream(3, Purpose::Partition, 0, 0)
    }

    #[test]
    fn dominant_fraction_within_one_sample() {
        let labels = balanced(20_000, 10);
        for sigma in [0.2, 0.5, 0.8] {
            let parts = partition_noniid(&labels, 10, 20, sigma, &mut rng()).unwrap();
            for (i, p) in parts.iter().enumerate() {
                assert_eq!(p.indices.len(), 1000);
                assert_eq!(p.dominant_class, Some(i % 10));
                let c = counts(&labels, p, 10);
                assert!((c[i % 10] as f64 - sigma * 1000.0).abs() <= 1.0, "sigma {sigma}: {c:?}");
            }
        }
    }

    #[test]
    fn partitions_are_disjoint() {
        let labels = balanced(2_000, 10);
        let parts = partition_noniid(&labels, 10, 7, 0.5, &mut rng()).unwrap();
        let mut seen = HashSet::new();
        for p in &parts {
            for &i in &p.indices {
                assert!(seen.insert(i));
            }
        }
    }

    #[test]
    fn sigma_one_gives_single_class_clients() {
        let labels = balanced(20_000, 10);
        let parts = partition_noniid(&labels, 10, 20, 1.0, &mut rng()).unwrap();
        for (i, p) in parts.iter().enumerate() {
            let c = counts(&labels, p, 10);
            assert_eq!(c[i % 10], 1000);
            assert_eq!(c.iter().sum::<usize>(), 1000);
        }
    }

    #[test]
    fn sigma_zero_is_class_uniform() {
        let labels = balanced(20_000, 10);
        let parts = partition_noniid(&labels, 10, 20, 0.0, &mut rng()).unwrap();
        // Chi-square critical value for 9 degrees of freedom at the 0.01 level.
        let critical = 21.666;
        for p in &parts {
            assert_eq!(p.dominant_class, None);
            let c = counts(&labels, p, 10);
            let expected = 100.0;
            let chi2: f64 = c.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
            assert!(chi2 < critical, "{c:?}");
        }
    }

    #[test]
    fn insufficient_data_reports_counts() {
        // 90% of the data is class 0, so class 1's dominant clients starve.
        let labels: Vec<usize> = (0..200).map(|i| usize::from(i % 10 == 0)).collect();
        let e = partition_noniid(&labels, 2, 4, 0.9, &mut rng()).unwrap_err();
        let msg = e.to_string();
        assert!(matches!(e, Error::InsufficientData(_)));
        assert!(msg.contains("class 1 needs 90 but has 20"), "{msg}");
        assert!(partition_noniid(&labels[..5], 2, 4, 0.5, &mut rng()).is_err());
    }

    #[test]
    fn deterministic_for_a_seed() {
        let labels = balanced(1_000, 10);
        let a = partition_noniid(&labels, 10, 5, 0.5, &mut rng()).unwrap();
        let b = partition_noniid(&labels, 10, 5, 0.5, &mut rng()).unwrap();
        assert_eq!(a, b);
    }
}
