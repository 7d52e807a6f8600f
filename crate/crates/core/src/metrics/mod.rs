//! Clustering accuracy under the best one-to-one cluster→class mapping,
//! with mean and standard deviation over repeated runs.

mod assignment;

use serde::Serialize;

use crate::dataset::compensated_sum;
use crate::error::{Error, Result};

pub use assignment::{lexicographic_optimal_assignment, max_weight_assignment};

/// Cluster × class counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Contingency {
    pub counts: Vec<Vec<u64>>,
    pub n: u64,
}

impl Contingency {
    pub fn new(clusters: &[usize], classes: &[usize]) -> Result<Self> {
        if clusters.len() != classes.len() {
            return Err(Error::LengthMismatch {
                expected: classes.len(),
                found: clusters.len(),
            });
        }
        if clusters.is_empty() {
            return Err(Error::param("cannot score an empty labeling"));
        }
        let k = clusters.iter().max().unwrap() + 1;
        let c = classes.iter().max().unwrap() + 1;
        let mut counts = vec![vec![0u64; c]; k];
        for (&a, &b) in clusters.iter().zip(classes) {
            counts[a][b] += 1;
        }
        Ok(Self {
            counts,
            n: clusters.len() as u64,
        })
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let width = counts.first().map_or(0, Vec::len);
        if counts.iter().any(|r| r.len() != width) {
            return Err(Error::param("contingency rows differ in length"));
        }
        let n = counts.iter().flatten().sum();
        if n == 0 {
            return Err(Error::param("contingency is empty"));
        }
        Ok(Self { counts, n })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Accuracy {
    pub ac: f64,
    pub correct: u64,
    /// Class matched to each cluster; `None` for clusters left unmatched
    /// when there are more clusters than classes.
    pub mapping: Vec<Option<usize>>,
}

/// Best injective cluster→class mapping of a contingency table, padded to
/// square with zeros. Ties pick the lexicographically smallest mapping.
pub fn accuracy_from_contingency(t: &Contingency) -> Accuracy {
    let k = t.counts.len();
    let c = t.counts.first().map_or(0, Vec::len);
    let s = k.max(c);
    let w: Vec<Vec<i64>> = (0..s)
        .map(|i| {
            (0..s)
                .map(|j| {
                    if i < k && j < c {
                        t.counts[i][j] as i64
                    } else {
                        0
                    }
                })
                .collect()
        })
        .collect();
    let assign = lexicographic_optimal_assignment(&w);
    let mapping: Vec<Option<usize>> = assign[..k].iter().map(|&j| (j < c).then_some(j)).collect();
    let correct: u64 = mapping
        .iter()
        .enumerate()
        .filter_map(|(i, m)| m.map(|j| t.counts[i][j]))
        .sum();
    Accuracy {
        ac: correct as f64 / t.n as f64,
        correct,
        mapping,
    }
}

pub fn accuracy(clusters: &[usize], classes: &[usize]) -> Result<Accuracy> {
    Ok(accuracy_from_contingency(&Contingency::new(
        clusters, classes,
    )?))
}

pub fn mean_accuracy(acs: &[f64]) -> Result<f64> {
    if acs.is_empty() {
        return Err(Error::param("no accuracies to average"));
    }
    Ok(compensated_sum(acs.iter().copied()) / acs.len() as f64)
}

/// Population standard deviation (divisor T).
pub fn accuracy_sd(acs: &[f64]) -> Result<f64> {
    let mean = mean_accuracy(acs)?;
    if acs.iter().all(|&a| a == acs[0]) {
        return Ok(0.0);
    }
    let var = acs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / acs.len() as f64;
    Ok(var.sqrt())
}
