//! Consensus by hypergraph partitioning: every cluster of every run is a
//! hyperedge over the objects it contains, and the consensus is a balanced
//! k-way partition that cuts as few hyperedges as possible.
//!
//! Objects with identical label rows share every hyperedge, so they are
//! merged into one weighted, splittable vertex. Vertices are ordered by
//! label row, which makes every tie-break independent of object order.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::kmcmd::Partition;

use super::partitioner::{partition, Hypergraph, PartitionConfig};
use super::LabelMatrix;

/// Objects grouped by label row, in ascending label-row order.
pub(crate) fn label_groups(lm: &LabelMatrix) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut groups: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for i in 0..lm.n() {
        let row: Vec<usize> = lm.runs().iter().map(|r| r.labels()[i]).collect();
        groups.entry(row).or_default().push(i);
    }
    groups.into_iter().collect()
}

pub fn hgpa(lm: &LabelMatrix, k: usize, cfg: &PartitionConfig) -> Result<Partition> {
    let n = lm.n();
    if k == 0 || k > n {
        return Err(Error::param(format!(
            "cannot form {k} clusters from {n} objects"
        )));
    }
    let groups = label_groups(lm);
    let weights: Vec<u64> = groups.iter().map(|(_, rows)| rows.len() as u64).collect();
    let mut edges = Vec::new();
    for (r, run) in lm.runs().iter().enumerate() {
        let mut members = vec![Vec::new(); run.k()];
        for (g, (row, _)) in groups.iter().enumerate() {
            members[row[r]].push(g);
        }
        edges.extend(members.into_iter().filter(|m| !m.is_empty()));
    }
    let edge_weight = vec![1.0; edges.len()];
    let h = Hypergraph::new(weights, edges, edge_weight)?;
    let parts = partition(&h, k, true, cfg)?;

    let mut labels = vec![0usize; n];
    for (g, (_, rows)) in groups.iter().enumerate() {
        let mut rows = rows.iter();
        for p in 0..k {
            for &i in rows.by_ref().take(parts.count(g, p) as usize) {
                labels[i] = p;
            }
        }
    }
    Partition::new(labels, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consensus::partitioner::balance_bounds;

    fn cfg() -> PartitionConfig {
        PartitionConfig::default()
    }

    #[test]
    fn unanimous_runs() {
        let p = vec![0, 0, 1, 1, 2, 2, 1, 0, 2];
        let lm = LabelMatrix::new(vec![p.clone(); 4]).unwrap();
        let out = hgpa(&lm, 3, &cfg()).unwrap();
        assert_eq!(crate::consensus::nmi(out.labels(), &p).unwrap(), 1.0);
    }

    #[test]
    fn singletons_forced_by_balance() {
        let lm = LabelMatrix::new(vec![vec![0, 0, 1, 1], vec![0, 1, 1, 1]]).unwrap();
        let out = hgpa(&lm, 4, &cfg()).unwrap();
        let mut l = out.labels().to_vec();
        l.sort();
        assert_eq!(l, vec![0, 1, 2, 3]);
    }

    /// Four runs agree on {0..4} vs {4..8}; one of them flips object 3.
    #[test]
    fn majority_split() {
        let base = vec![0, 0, 0, 0, 1, 1, 1, 1];
        let mut flipped = base.clone();
        flipped[3] = 1;
        let lm = LabelMatrix::new(vec![base.clone(), base.clone(), base.clone(), flipped]).unwrap();
        let out = hgpa(&lm, 2, &cfg()).unwrap();
        assert_eq!(crate::consensus::nmi(out.labels(), &base).unwrap(), 1.0);

        // Oracle: the base split has the minimal cut over all balanced splits.
        let (lo, hi) = balance_bounds(8, 2, 1.2);
        let cut_of = |mask: u32| -> usize {
            let mut cut = 0;
            for run in lm.runs() {
                for c in 0..run.k() {
                    let sides: Vec<u32> = (0..8)
                        .filter(|&i| run.labels()[i] == c)
                        .map(|i| (mask >> i) & 1)
                        .collect();
                    if sides.iter().any(|&s| s != sides[0]) {
                        cut += 1;
                    }
                }
            }
            cut
        };
        let best = (0u32..256)
            .filter(|m| {
                (lo..=hi).contains(&(m.count_ones() as u64))
                    && (lo..=hi).contains(&(8 - m.count_ones() as u64))
            })
            .map(cut_of)
            .min()
            .unwrap();
        let mask: u32 = out
            .labels()
            .iter()
            .enumerate()
            .map(|(i, &l)| (l as u32) << i)
            .sum();
        assert_eq!(cut_of(mask), best);
    }

    #[test]
    fn rejects_too_many_clusters() {
        let lm = LabelMatrix::new(vec![vec![0, 1]]).unwrap();
        assert!(hgpa(&lm, 3, &cfg()).is_err());
    }
}
