//! Cluster-ensemble consensus: combine several labelings of the same
//! objects into one k-cluster partition.

mod hgpa;
mod mcla;
mod nmi;
pub mod partitioner;

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kmcmd::Partition;

pub use hgpa::hgpa;
pub use mcla::{jaccard_matrix, mcla};
pub use nmi::{anmi, nmi};
pub use partitioner::PartitionConfig;

/// Labelings of the same n objects, one per run, each with dense labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMatrix {
    runs: Vec<Partition>,
    n: usize,
}

impl LabelMatrix {
    /// Build from raw label vectors. Labels of each run are renumbered
    /// densely in ascending order of the original values.
    pub fn new(runs: Vec<Vec<usize>>) -> Result<Self> {
        let n = runs
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::param("label matrix has no runs"))?;
        if n == 0 {
            return Err(Error::param("label matrix has no objects"));
        }
        let mut parts = Vec::with_capacity(runs.len());
        for run in runs {
            if run.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    found: run.len(),
                });
            }
            let mut values = run.clone();
            values.sort_unstable();
            values.dedup();
            let labels = run
                .iter()
                .map(|v| values.binary_search(v).unwrap())
                .collect();
            parts.push(Partition::new(labels, values.len())?);
        }
        Ok(Self { runs: parts, n })
    }

    pub fn from_partitions(runs: Vec<Partition>) -> Result<Self> {
        Self::new(runs.into_iter().map(Partition::into_labels).collect())
    }

    /// Read a CSV with one column per run and one row per object. A first
    /// line that does not parse as integers is taken as a header.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text)
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut columns: Vec<Vec<usize>> = Vec::new();
        for (idx, record) in reader.records().enumerate() {
            let row = idx + 1;
            let record = record.map_err(|e| Error::Csv {
                row,
                message: e.to_string(),
            })?;
            if record.len() == 1 && record[0].is_empty() {
                continue;
            }
            let parsed: std::result::Result<Vec<usize>, _> =
                record.iter().map(str::parse).collect();
            let values = match parsed {
                Ok(v) => v,
                Err(_) if idx == 0 => continue,
                Err(_) => {
                    let bad = record
                        .iter()
                        .find(|f| f.parse::<usize>().is_err())
                        .unwrap_or("");
                    return Err(Error::Csv {
                        row,
                        message: format!("`{bad}` is not a label"),
                    });
                }
            };
            if columns.is_empty() {
                columns = vec![Vec::new(); values.len()];
            }
            if values.len() != columns.len() {
                return Err(Error::MalformedRow {
                    row,
                    expected: columns.len(),
                    found: values.len(),
                });
            }
            for (c, v) in columns.iter_mut().zip(values) {
                c.push(v);
            }
        }
        if columns.is_empty() {
            return Err(Error::Schema("label matrix file has no rows".into()));
        }
        Self::new(columns)
    }

    pub fn runs(&self) -> &[Partition] {
        &self.runs
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of clusters over all runs.
    pub fn cluster_total(&self) -> usize {
        self.runs.iter().map(Partition::k).sum()
    }

    /// Start index of each run's clusters in run-major order, plus the total.
    pub(crate) fn offsets(&self) -> Vec<usize> {
        let mut offsets = vec![0];
        for r in &self.runs {
            offsets.push(offsets.last().unwrap() + r.k());
        }
        offsets
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConsensusMethod {
    Hgpa,
    Mcla,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsensusOutcome {
    pub partition: Partition,
    pub chosen: ConsensusMethod,
    pub hgpa_anmi: f64,
    /// `None` when meta-clustering was not possible.
    pub mcla_anmi: Option<f64>,
    pub notes: Vec<String>,
}

/// Run both consensus methods and keep the one with the higher ANMI
/// against the input runs; ties go to hypergraph partitioning.
pub fn combine(lm: &LabelMatrix, k: usize, cfg: &PartitionConfig) -> Result<ConsensusOutcome> {
    let (h, m) = rayon::join(
        || hgpa(lm, k, cfg),
        || {
            if lm.cluster_total() < k {
                None
            } else {
                Some(mcla(lm, k, cfg))
            }
        },
    );
    let h = h?;
    let hgpa_anmi = anmi(h.labels(), lm)?;
    let mut notes = Vec::new();
    let (m, mcla_anmi) = match m {
        Some(m) => {
            let m = m?;
            let score = anmi(m.labels(), lm)?;
            (Some(m), Some(score))
        }
        None => {
            notes.push(format!(
                "meta-clustering skipped: {} input clusters for k = {k}",
                lm.cluster_total()
            ));
            (None, None)
        }
    };
    for n in &notes {
        log::info!("{n}");
    }
    let (partition, chosen) = match (m, mcla_anmi) {
        (Some(m), Some(s)) if s > hgpa_anmi => (m, ConsensusMethod::Mcla),
        (Some(_), Some(s)) if s == hgpa_anmi => {
            let note = format!("ANMI tie at {s}; keeping hypergraph partitioning");
            log::info!("{note}");
            notes.push(note);
            (h, ConsensusMethod::Hgpa)
        }
        _ => (h, ConsensusMethod::Hgpa),
    };
    Ok(ConsensusOutcome {
        partition,
        chosen,
        hgpa_anmi,
        mcla_anmi,
        notes,
    })
}
