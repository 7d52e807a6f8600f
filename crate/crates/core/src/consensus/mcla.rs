//! Consensus by meta-clustering: clusters of all runs become vertices of a
//! graph weighted by the Jaccard similarity of their member sets, the graph
//! is split into k balanced meta-clusters, and each object joins the
//! meta-cluster whose member clusters contain it most often.

use crate::error::{Error, Result};
use crate::kmcmd::Partition;

use super::partitioner::{partition, Hypergraph, PartitionConfig};
use super::LabelMatrix;

/// Jaccard similarity between every pair of clusters, indexed by the
/// position of `(run, cluster)` in run-major order.
pub fn jaccard_matrix(lm: &LabelMatrix) -> Vec<Vec<f64>> {
    let offsets = lm.offsets();
    let total = *offsets.last().unwrap();
    let sizes: Vec<u64> = lm
        .runs()
        .iter()
        .flat_map(|r| r.sizes().into_iter().map(|s| s as u64))
        .collect();
    let mut sim = vec![vec![0.0; total]; total];
    let runs = lm.runs();
    for r in 0..runs.len() {
        for s in r + 1..runs.len() {
            let (kr, ks) = (runs[r].k(), runs[s].k());
            let mut inter = vec![0u64; kr * ks];
            for (&a, &b) in runs[r].labels().iter().zip(runs[s].labels()) {
                inter[a * ks + b] += 1;
            }
            for a in 0..kr {
                for b in 0..ks {
                    let both = inter[a * ks + b];
                    if both == 0 {
                        continue;
                    }
                    let (i, j) = (offsets[r] + a, offsets[s] + b);
                    let union = sizes[i] + sizes[j] - both;
                    let v = both as f64 / union as f64;
                    sim[i][j] = v;
                    sim[j][i] = v;
                }
            }
        }
    }
    sim
}

pub fn mcla(lm: &LabelMatrix, k: usize, cfg: &PartitionConfig) -> Result<Partition> {
    let n = lm.n();
    if k == 0 || k > n {
        return Err(Error::param(format!(
            "cannot form {k} clusters from {n} objects"
        )));
    }
    let offsets = lm.offsets();
    let total = *offsets.last().unwrap();
    if total < k {
        return Err(Error::param(format!(
            "meta-clustering needs at least {k} input clusters, found {total}"
        )));
    }
    let sim = jaccard_matrix(lm);
    let mut edges = Vec::new();
    let mut weights = Vec::new();
    for (i, row) in sim.iter().enumerate() {
        for (j, &w) in row.iter().enumerate().skip(i + 1) {
            if w > 0.0 {
                edges.push(vec![i, j]);
                weights.push(w);
            }
        }
    }
    let h = Hypergraph::new(vec![1; total], edges, weights)?;
    let parts = partition(&h, k, false, cfg)?;
    let meta: Vec<usize> = (0..total)
        .map(|v| (0..k).find(|&p| parts.count(v, p) > 0).unwrap())
        .collect();
    let mut meta_size = vec![0usize; k];
    for &q in &meta {
        meta_size[q] += 1;
    }

    // assoc[i * k + q]: share of meta-cluster q's clusters that contain i.
    let mut assoc = vec![0.0f64; n * k];
    for (r, run) in lm.runs().iter().enumerate() {
        for (i, &l) in run.labels().iter().enumerate() {
            assoc[i * k + meta[offsets[r] + l]] += 1.0;
        }
    }
    for i in 0..n {
        for q in 0..k {
            if meta_size[q] > 0 {
                assoc[i * k + q] /= meta_size[q] as f64;
            }
        }
    }
    let mut labels: Vec<usize> = (0..n)
        .map(|i| {
            let row = &assoc[i * k..(i + 1) * k];
            let mut best = 0;
            for q in 1..k {
                if row[q] > row[best] {
                    best = q;
                }
            }
            best
        })
        .collect();

    // Refill empty meta-clusters with the object most associated with them,
    // taken from a cluster that keeps at least one member.
    loop {
        let mut sizes = vec![0usize; k];
        for &l in &labels {
            sizes[l] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            break;
        };
        let mut best: Option<usize> = None;
        for i in 0..n {
            if sizes[labels[i]] < 2 {
                continue;
            }
            if best.is_none_or(|b| assoc[i * k + empty] > assoc[b * k + empty]) {
                best = Some(i);
            }
        }
        labels[best.expect("k <= n")] = empty;
    }
    Partition::new(labels, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consensus::nmi;

    #[test]
    fn jaccard_values() {
        let lm = LabelMatrix::new(vec![vec![0, 0, 1, 1], vec![0, 0, 0, 1]]).unwrap();
        let s = jaccard_matrix(&lm);
        assert_eq!(s[0][2], 2.0 / 3.0);
        assert_eq!(s[1][2], 1.0 / 4.0);
        assert_eq!(s[1][3], 1.0 / 2.0);
        assert_eq!(s[0][1], 0.0);
        assert_eq!(s[2][2], 0.0);
    }

    #[test]
    fn unanimous_and_relabeled() {
        let p = vec![0, 1, 1, 0, 2, 2, 2];
        let lm = LabelMatrix::new(vec![p.clone(); 3]).unwrap();
        let out = mcla(&lm, 3, &PartitionConfig::default()).unwrap();
        assert_eq!(nmi(out.labels(), &p).unwrap(), 1.0);

        let q = vec![1, 1, 0, 0, 0, 1];
        let r = vec![0, 0, 1, 1, 1, 0];
        let lm = LabelMatrix::new(vec![q.clone(), r]).unwrap();
        let out = mcla(&lm, 2, &PartitionConfig::default()).unwrap();
        assert_eq!(nmi(out.labels(), &q).unwrap(), 1.0);
    }

    /// Three runs on six objects; the third moves object 2 across.
    /// Jaccard: A0~B0~C0 pairs are 1, 1, 3/4; A1~C1 is 3/4. Object 2 is in
    /// clusters {A0, B0, C1} and associates 2/3 with meta-cluster {A0, B0, C0}.
    #[test]
    fn dissenting_run() {
        let a = vec![0, 0, 0, 1, 1, 1];
        let mut c = a.clone();
        c[2] = 1;
        let lm = LabelMatrix::new(vec![a.clone(), a.clone(), c]).unwrap();
        let out = mcla(&lm, 2, &PartitionConfig::default()).unwrap();
        assert_eq!(nmi(out.labels(), &a).unwrap(), 1.0);
    }

    #[test]
    fn too_few_input_clusters() {
        let lm = LabelMatrix::new(vec![vec![0, 0, 0]]).unwrap();
        assert!(matches!(
            mcla(&lm, 2, &PartitionConfig::default()),
            Err(Error::Parameter(_))
        ));
    }
}
