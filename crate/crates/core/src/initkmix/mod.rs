//! Deterministic initial partitions for mixed-data clustering.
//!
//! Every attribute seeds one clustering run. A numeric attribute is cut into
//! k ranges of equal standard-normal mass after z-scoring; a categorical
//! attribute groups rows by value. Each seed is refined by KMCMD and the
//! refined labelings are merged by consensus into one k-cluster partition.

mod normal;

use rayon::prelude::*;
use serde::Serialize;

use crate::codist::DistanceModel;
use crate::consensus::{combine, ConsensusMethod, LabelMatrix, PartitionConfig};
use crate::dataset::{compensated_sum, Dataset};
use crate::error::{Error, Result};
use crate::kmcmd::{iterate, KmcmdConfig, KmcmdResult, Partition};

pub use normal::{std_normal_cdf, std_normal_quantile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttributeRun {
    pub attribute: String,
    pub kind: SeedKind,
    /// Index among the attributes of the same kind.
    pub index: usize,
    pub seed_partition: Partition,
    pub result: KmcmdResult,
    /// Set when the seed puts every row in one cluster.
    pub single_cluster: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedAttribute {
    pub attribute: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitOutcome {
    pub runs: Vec<AttributeRun>,
    pub skipped: Vec<SkippedAttribute>,
    pub consensus: Partition,
    pub chosen_method: ConsensusMethod,
    pub hgpa_anmi: f64,
    pub mcla_anmi: Option<f64>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InitConfig {
    pub kmcmd: KmcmdConfig,
    pub partition: PartitionConfig,
}

/// Interior boundaries `Φ⁻¹(j/k)` for `j = 1..k`.
pub fn quantile_boundaries(k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::param("cluster count must be positive"));
    }
    (1..k)
        .map(|j| std_normal_quantile(j as f64 / k as f64))
        .collect()
}

/// Equal-mass ranges of the z-scored column; `None` when the column is
/// constant. A value on a boundary goes to the upper range.
pub fn numeric_seed_partition(ds: &Dataset, t: usize, k: usize) -> Result<Option<Partition>> {
    let col = ds.numeric_column(t);
    let n = col.len() as f64;
    let mean = compensated_sum(col.iter().copied()) / n;
    let var = compensated_sum(col.iter().map(|v| (v - mean) * (v - mean))) / n;
    let sd = var.sqrt();
    if sd == 0.0 {
        return Ok(None);
    }
    let bounds = quantile_boundaries(k)?;
    let labels = col
        .iter()
        .map(|&v| {
            let z = (v - mean) / sd;
            bounds.partition_point(|&b| b <= z)
        })
        .collect();
    Partition::new(labels, k).map(Some)
}

/// One cluster per value of categorical column `t`, numbered by value code.
pub fn categorical_seed_partition(ds: &Dataset, t: usize) -> Partition {
    let labels = ds
        .categorical_column(t)
        .iter()
        .map(|&c| c as usize)
        .collect();
    Partition::new(labels, ds.cardinality(t)).expect("codes are below the cardinality")
}

enum Seed {
    Run(AttributeRun),
    Skip(SkippedAttribute),
}

/// Seed and refine one run per attribute (numeric attributes first), then
/// merge the runs into `k` clusters.
pub fn run_initkmix(
    ds: &Dataset,
    model: &DistanceModel,
    k: usize,
    cfg: &InitConfig,
) -> Result<InitOutcome> {
    if k < 2 {
        return Err(Error::param(format!(
            "initialization needs k >= 2, got {k}"
        )));
    }
    if k > ds.n() {
        return Err(Error::param(format!(
            "k = {k} exceeds the number of rows {}",
            ds.n()
        )));
    }
    let attrs: Vec<(SeedKind, usize)> = (0..ds.numeric_count())
        .map(|t| (SeedKind::Numeric, t))
        .chain((0..ds.categorical_count()).map(|t| (SeedKind::Categorical, t)))
        .collect();
    let seeds: Vec<Result<Seed>> = attrs
        .par_iter()
        .map(|&(kind, t)| {
            let (name, seed) = match kind {
                SeedKind::Numeric => {
                    let name = ds.numeric_name(t).to_string();
                    match numeric_seed_partition(ds, t, k)? {
                        Some(p) => (name, p),
                        None => {
                            return Ok(Seed::Skip(SkippedAttribute {
                                attribute: name,
                                reason: "zero standard deviation".into(),
                            }))
                        }
                    }
                }
                SeedKind::Categorical => (
                    ds.categorical_name(t).to_string(),
                    categorical_seed_partition(ds, t),
                ),
            };
            let result = iterate(ds, model, &seed, &cfg.kmcmd)?;
            Ok(Seed::Run(AttributeRun {
                attribute: name,
                kind,
                index: t,
                single_cluster: seed.k() == 1,
                seed_partition: seed,
                result,
            }))
        })
        .collect();
    let mut runs = Vec::new();
    let mut skipped = Vec::new();
    for s in seeds {
        match s? {
            Seed::Run(r) => runs.push(r),
            Seed::Skip(s) => skipped.push(s),
        }
    }
    for s in &skipped {
        log::warn!("attribute `{}` skipped: {}", s.attribute, s.reason);
    }
    for r in &runs {
        log::debug!(
            "attribute `{}`: {} sweeps, cost {:.6}, converged {}",
            r.attribute,
            r.result.iterations,
            r.result.cost,
            r.result.converged
        );
    }
    if runs.is_empty() {
        return Err(Error::NoUsableAttribute);
    }
    let mut notes: Vec<String> = runs
        .iter()
        .filter(|r| r.single_cluster)
        .map(|r| {
            format!(
                "attribute `{}` has a single value; its run is constant",
                r.attribute
            )
        })
        .collect();
    let lm =
        LabelMatrix::from_partitions(runs.iter().map(|r| r.result.partition.clone()).collect())?;
    let outcome = combine(&lm, k, &cfg.partition)?;
    notes.extend(outcome.notes);
    Ok(InitOutcome {
        runs,
        skipped,
        consensus: outcome.partition,
        chosen_method: outcome.chosen,
        hgpa_anmi: outcome.hgpa_anmi,
        mcla_anmi: outcome.mcla_anmi,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codist::build_model;
    use crate::consensus::nmi;
    use crate::dataset::{normalize, Normalization};

    fn numeric(values: Vec<f64>) -> Dataset {
        Dataset::from_columns(vec![("x".into(), values)], vec![], None).unwrap()
    }

    #[test]
    fn two_way_split_at_mean() {
        let p = numeric_seed_partition(&numeric(vec![-1.0, 0.0, 1.0]), 0, 2)
            .unwrap()
            .unwrap();
        assert_eq!(p.labels(), &[0, 1, 1]);
        let p = numeric_seed_partition(&numeric(vec![3.0, 1.0, 2.5, 0.0]), 0, 2)
            .unwrap()
            .unwrap();
        assert_eq!(p.labels(), &[1, 0, 1, 0]);
    }

    #[test]
    fn three_way_boundaries() {
        let b = quantile_boundaries(3).unwrap();
        assert!((b[0] + 0.430_727_3).abs() < 1e-7);
        assert!((b[1] - 0.430_727_3).abs() < 1e-7);
        // Population sd of [-1, 0, 1, 0] is sqrt(1/2); z-scores ±1.414, 0.
        let p = numeric_seed_partition(&numeric(vec![-1.0, 0.0, 1.0, 0.0]), 0, 3)
            .unwrap()
            .unwrap();
        assert_eq!(p.labels(), &[0, 1, 2, 1]);
    }

    #[test]
    fn constant_column_is_skipped() {
        assert!(numeric_seed_partition(&numeric(vec![2.0; 5]), 0, 2)
            .unwrap()
            .is_none());
    }

    #[test]
    fn categorical_seeds() {
        let ds = Dataset::from_columns(
            vec![],
            vec![
                (
                    "a".into(),
                    ["y", "n", "y"].iter().map(|s| s.to_string()).collect(),
                ),
                (
                    "b".into(),
                    ["z", "z", "z"].iter().map(|s| s.to_string()).collect(),
                ),
            ],
            None,
        )
        .unwrap();
        let p = categorical_seed_partition(&ds, 0);
        assert_eq!((p.labels(), p.k()), (&[1, 0, 1][..], 2));
        assert_eq!(categorical_seed_partition(&ds, 1).k(), 1);
    }

    #[test]
    fn unanimous_attributes_give_their_partition() {
        let truth = ["p", "p", "p", "q", "q", "q", "p", "q"];
        let col: Vec<String> = truth.iter().map(|s| s.to_string()).collect();
        let ds = Dataset::from_columns(
            vec![("x".into(), vec![0.0, 0.1, 0.05, 5.0, 5.1, 5.05, 0.02, 5.2])],
            vec![("a".into(), col.clone()), ("b".into(), col)],
            None,
        )
        .unwrap();
        let ds = normalize(&ds, Normalization::MinMax);
        let model = build_model(&ds, 4).unwrap();
        let out = run_initkmix(&ds, &model, 2, &InitConfig::default()).unwrap();
        assert_eq!(out.runs.len(), 3);
        assert_eq!(out.runs[0].kind, SeedKind::Numeric);
        let expected: Vec<usize> = truth.iter().map(|&s| usize::from(s == "q")).collect();
        assert_eq!(nmi(out.consensus.labels(), &expected).unwrap(), 1.0);
        assert_eq!(
            out,
            run_initkmix(&ds, &model, 2, &InitConfig::default()).unwrap()
        );
    }

    #[test]
    fn no_usable_attribute() {
        let ds = Dataset::from_columns(
            vec![("x".into(), vec![1.0; 4]), ("y".into(), vec![2.0; 4])],
            vec![],
            None,
        )
        .unwrap();
        let model = build_model(&normalize(&ds, Normalization::MinMax), 4).unwrap();
        assert!(matches!(
            run_initkmix(&ds, &model, 2, &InitConfig::default()),
            Err(Error::NoUsableAttribute)
        ));
    }
}
