//! End-to-end runs: preprocessing, the initKmix pipeline, the random
//! baseline, per-attribute analysis and multi-dataset experiments.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::codist::{build_model, DistanceModel};
use crate::consensus::{ConsensusMethod, PartitionConfig};
use crate::dataset::{load_csv, normalize, Dataset, Normalization, Provenance, SchemaManifest};
use crate::error::{Error, Result};
use crate::initkmix::{run_initkmix, InitConfig, InitOutcome, SeedKind};
use crate::kmcmd::{iterate, KmcmdConfig, KmcmdResult, NumericWeighting, Partition};
use crate::metrics::{accuracy, accuracy_sd, mean_accuracy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Initkmix,
    Random,
}

/// Knobs shared by every command.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub k: Option<usize>,
    pub bins: Option<usize>,
    pub max_iterations: usize,
    pub balance: f64,
    pub normalization: Normalization,
    pub weighting: NumericWeighting,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            k: None,
            bins: None,
            max_iterations: 100,
            balance: 1.2,
            normalization: Normalization::MinMax,
            weighting: NumericWeighting::Squared,
        }
    }
}

impl PipelineConfig {
    fn kmcmd(&self) -> KmcmdConfig {
        KmcmdConfig {
            max_iterations: self.max_iterations,
            weighting: self.weighting,
        }
    }

    fn init(&self) -> InitConfig {
        InitConfig {
            kmcmd: self.kmcmd(),
            partition: PartitionConfig {
                balance: self.balance,
                ..PartitionConfig::default()
            },
        }
    }
}

/// A normalized dataset with its distance model and resolved k.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub name: String,
    pub ds: Dataset,
    pub model: DistanceModel,
    pub k: usize,
    pub bins: usize,
    pub config: PipelineConfig,
}

/// k from the explicit value, else the schema hint, else the class count.
pub fn resolve_k(explicit: Option<usize>, ds: &Dataset) -> Result<usize> {
    let k = explicit
        .or(ds.schema().k_hint())
        .or_else(|| (ds.class_count() > 0).then_some(ds.class_count()))
        .ok_or_else(|| {
            Error::param("no k given and the schema has neither a k hint nor a label column")
        })?;
    if k == 0 || k > ds.n() {
        return Err(Error::param(format!("k = {k} is not in [1, {}]", ds.n())));
    }
    Ok(k)
}

pub fn prepare(
    name: impl Into<String>,
    raw: &Dataset,
    config: &PipelineConfig,
) -> Result<Prepared> {
    if config.balance.is_nan() || config.balance < 1.0 {
        return Err(Error::param(format!(
            "balance must be at least 1, got {}",
            config.balance
        )));
    }
    if config.max_iterations == 0 {
        return Err(Error::param("max-iter must be positive"));
    }
    let k = resolve_k(config.k, raw)?;
    let bins = config.bins.unwrap_or(k.max(4));
    let ds = normalize(raw, config.normalization);
    let model = build_model(&ds, bins)?;
    Ok(Prepared {
        name: name.into(),
        ds,
        model,
        k,
        bins,
        config: *config,
    })
}

/// Load `data` bound to the schema manifest at `schema` and prepare it.
pub fn load_prepared(data: &Path, schema: &Path, config: &PipelineConfig) -> Result<Prepared> {
    let manifest = SchemaManifest::load(schema)?;
    let raw = load_csv(data, &manifest.schema, &manifest.missing)?;
    let name = data
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    prepare(name, &raw, config)
}

/// Reproducible per-run random streams derived from one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeededRng {
    pub seed: u64,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    /// Independent generator for run `index`.
    pub fn for_run(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }

    /// Every row assigned uniformly at random to one of `k` clusters.
    pub fn random_partition(&self, index: u64, n: usize, k: usize) -> Result<Partition> {
        let mut rng = self.for_run(index);
        Partition::new((0..n).map(|_| rng.random_range(0..k)).collect(), k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub ac: Option<f64>,
    pub mapping: Option<Vec<Option<usize>>>,
    pub iterations: usize,
    pub converged: bool,
    pub cost: f64,
    pub repairs: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitSummary {
    pub chosen_method: ConsensusMethod,
    pub hgpa_anmi: f64,
    pub mcla_anmi: Option<f64>,
    pub attribute_runs: usize,
    pub skipped: Vec<String>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub dataset: String,
    pub n: usize,
    pub numeric_attributes: usize,
    pub categorical_attributes: usize,
    pub provenance: Provenance,
    pub method: Method,
    pub k: usize,
    pub bins: usize,
    pub seed: Option<u64>,
    pub runs: Vec<RunRecord>,
    pub mean_ac: Option<f64>,
    pub sd: Option<f64>,
    pub init: Option<InitSummary>,
    pub total_seconds: f64,
}

fn record(prep: &Prepared, result: &KmcmdResult, seconds: f64) -> Result<RunRecord> {
    let scored = match prep.ds.ground_truth() {
        Some(truth) => Some(accuracy(result.partition.labels(), truth)?),
        None => None,
    };
    Ok(RunRecord {
        ac: scored.as_ref().map(|a| a.ac),
        mapping: scored.map(|a| a.mapping),
        iterations: result.iterations,
        converged: result.converged,
        cost: result.cost,
        repairs: result.repairs,
        seconds,
    })
}

/// The full deterministic pipeline: initial partition, then KMCMD from it.
pub fn initkmix_pipeline(prep: &Prepared) -> Result<(InitOutcome, KmcmdResult)> {
    let init = run_initkmix(&prep.ds, &prep.model, prep.k, &prep.config.init())?;
    let result = iterate(&prep.ds, &prep.model, &init.consensus, &prep.config.kmcmd())?;
    Ok((init, result))
}

/// Labels of every run together with the report.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterOutput {
    pub report: RunReport,
    pub labels: Vec<Vec<usize>>,
}

pub fn cluster(
    prep: &Prepared,
    method: Method,
    seed: u64,
    repeats: usize,
) -> Result<ClusterOutput> {
    if repeats == 0 {
        return Err(Error::param("repeats must be positive"));
    }
    let started = Instant::now();
    let mut init_summary = None;
    let runs: Vec<(KmcmdResult, RunRecord)> = match method {
        Method::Initkmix => {
            let mut out = Vec::with_capacity(repeats);
            for _ in 0..repeats {
                let t = Instant::now();
                let (init, result) = initkmix_pipeline(prep)?;
                let rec = record(prep, &result, t.elapsed().as_secs_f64())?;
                init_summary.get_or_insert_with(|| InitSummary {
                    chosen_method: init.chosen_method,
                    hgpa_anmi: init.hgpa_anmi,
                    mcla_anmi: init.mcla_anmi,
                    attribute_runs: init.runs.len(),
                    skipped: init
                        .skipped
                        .iter()
                        .map(|s| format!("{}: {}", s.attribute, s.reason))
                        .collect(),
                    notes: init.notes.clone(),
                });
                out.push((result, rec));
            }
            if out.iter().any(|(r, _)| r.partition != out[0].0.partition) {
                return Err(Error::Model("repeated initKmix runs disagree".into()));
            }
            out
        }
        Method::Random => {
            let rng = SeededRng::new(seed);
            (0..repeats)
                .into_par_iter()
                .map(|r| {
                    let t = Instant::now();
                    let init = rng.random_partition(r as u64, prep.ds.n(), prep.k)?;
                    let result = iterate(&prep.ds, &prep.model, &init, &prep.config.kmcmd())?;
                    let rec = record(prep, &result, t.elapsed().as_secs_f64())?;
                    Ok((result, rec))
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    let acs: Option<Vec<f64>> = runs.iter().map(|(_, r)| r.ac).collect();
    let (mean_ac, sd) = match &acs {
        Some(a) => (Some(mean_accuracy(a)?), Some(accuracy_sd(a)?)),
        None => (None, None),
    };
    if method == Method::Initkmix && sd.is_some_and(|s| s != 0.0) {
        return Err(Error::Model(
            "initKmix accuracy varies across repeats".into(),
        ));
    }
    let report = RunReport {
        dataset: prep.name.clone(),
        n: prep.ds.n(),
        numeric_attributes: prep.ds.numeric_count(),
        categorical_attributes: prep.ds.categorical_count(),
        provenance: prep.ds.provenance().clone(),
        method,
        k: prep.k,
        bins: prep.bins,
        seed: (method == Method::Random).then_some(seed),
        runs: runs.iter().map(|(_, r)| r.clone()).collect(),
        mean_ac,
        sd,
        init: init_summary,
        total_seconds: started.elapsed().as_secs_f64(),
    };
    let labels = runs
        .into_iter()
        .map(|(r, _)| r.partition.into_labels())
        .collect();
    Ok(ClusterOutput { report, labels })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttributeRow {
    pub attribute: String,
    pub kind: SeedKind,
    pub seed_clusters: usize,
    /// Numeric attributes, and categorical ones with exactly k values.
    pub qualifies: bool,
    pub ac: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerAttributeReport {
    pub dataset: String,
    pub k: usize,
    pub rows: Vec<AttributeRow>,
    pub skipped: Vec<String>,
    pub final_ac: f64,
    pub chosen_method: ConsensusMethod,
}

impl PerAttributeReport {
    pub fn qualifying(&self) -> impl Iterator<Item = &AttributeRow> {
        self.rows.iter().filter(|r| r.qualifies)
    }

    /// CSV with one row per attribute and a closing `final` row.
    pub fn to_csv(&self, qualifying_only: bool) -> String {
        let mut out = String::from("attribute,kind,seed_clusters,qualifies,ac\n");
        for r in self.rows.iter().filter(|r| !qualifying_only || r.qualifies) {
            let kind = match r.kind {
                SeedKind::Numeric => "numeric",
                SeedKind::Categorical => "categorical",
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{:.6}",
                r.attribute, kind, r.seed_clusters, r.qualifies, r.ac
            );
        }
        let _ = writeln!(out, "final,consensus,{},true,{:.6}", self.k, self.final_ac);
        out
    }
}

pub fn per_attribute(prep: &Prepared) -> Result<PerAttributeReport> {
    let truth = prep
        .ds
        .ground_truth()
        .ok_or_else(|| Error::Schema("per-attribute analysis needs a label column".into()))?;
    let (init, result) = initkmix_pipeline(prep)?;
    let rows = init
        .runs
        .iter()
        .map(|r| {
            Ok(AttributeRow {
                attribute: r.attribute.clone(),
                kind: r.kind,
                seed_clusters: r.seed_partition.k(),
                qualifies: r.kind == SeedKind::Numeric || r.seed_partition.k() == prep.k,
                ac: accuracy(r.result.partition.labels(), truth)?.ac,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PerAttributeReport {
        dataset: prep.name.clone(),
        k: prep.k,
        rows,
        skipped: init.skipped.iter().map(|s| s.attribute.clone()).collect(),
        final_ac: accuracy(result.partition.labels(), truth)?.ac,
        chosen_method: init.chosen_method,
    })
}

/// One dataset listed in an experiment manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub name: String,
    pub data: PathBuf,
    pub schema: PathBuf,
}

/// Read a manifest CSV with header `name,data,schema`; relative paths are
/// resolved against the manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Csv {
            row: 1,
            message: e.to_string(),
        })?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("manifest lacks a `{name}` column")))
    };
    let (ci, di, si) = (col("name")?, col("data")?, col("schema")?);
    let mut entries = Vec::new();
    for (idx, rec) in reader.records().enumerate() {
        let row = idx + 2;
        let rec = rec.map_err(|e| Error::Csv {
            row,
            message: e.to_string(),
        })?;
        if rec.len() != headers.len() {
            return Err(Error::MalformedRow {
                row,
                expected: headers.len(),
                found: rec.len(),
            });
        }
        entries.push(ManifestEntry {
            name: rec[ci].to_string(),
            data: base.join(&rec[di]),
            schema: base.join(&rec[si]),
        });
    }
    Ok(entries)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRow {
    pub name: String,
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub initkmix_ac: Option<f64>,
    pub random_mean_ac: Option<f64>,
    pub random_sd: Option<f64>,
    pub chosen_method: Option<ConsensusMethod>,
    pub seconds: f64,
    pub error: Option<String>,
}

fn experiment_row(
    entry: &ManifestEntry,
    config: &PipelineConfig,
    seed: u64,
    repeats: usize,
) -> ExperimentRow {
    let started = Instant::now();
    let run = || -> Result<ExperimentRow> {
        let mut prep = load_prepared(&entry.data, &entry.schema, config)?;
        prep.name = entry.name.clone();
        let init = cluster(&prep, Method::Initkmix, seed, 1)?;
        let random = cluster(&prep, Method::Random, seed, repeats)?;
        Ok(ExperimentRow {
            name: entry.name.clone(),
            n: Some(prep.ds.n()),
            k: Some(prep.k),
            initkmix_ac: init.report.mean_ac,
            random_mean_ac: random.report.mean_ac,
            random_sd: random.report.sd,
            chosen_method: init.report.init.map(|i| i.chosen_method),
            seconds: 0.0,
            error: None,
        })
    };
    let mut row = run().unwrap_or_else(|e| ExperimentRow {
        name: entry.name.clone(),
        n: None,
        k: None,
        initkmix_ac: None,
        random_mean_ac: None,
        random_sd: None,
        chosen_method: None,
        seconds: 0.0,
        error: Some(e.to_string()),
    });
    row.seconds = started.elapsed().as_secs_f64();
    row
}

/// Run every manifest entry; a failing entry is reported in its row and the
/// others continue. Rows come back in manifest order.
pub fn experiment(
    entries: &[ManifestEntry],
    config: &PipelineConfig,
    seed: u64,
    repeats: usize,
) -> Vec<ExperimentRow> {
    entries
        .par_iter()
        .map(|e| experiment_row(e, config, seed, repeats))
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"))
}

pub fn experiment_csv(rows: &[ExperimentRow]) -> String {
    let mut out =
        String::from("dataset,n,k,initkmix_ac,random_mean_ac,random_sd,consensus,seconds,error\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{:.3},{}",
            r.name,
            r.n.map_or(String::new(), |v| v.to_string()),
            r.k.map_or(String::new(), |v| v.to_string()),
            r.initkmix_ac.map_or(String::new(), |v| format!("{v:.6}")),
            r.random_mean_ac
                .map_or(String::new(), |v| format!("{v:.6}")),
            r.random_sd.map_or(String::new(), |v| format!("{v:.6}")),
            r.chosen_method.map_or("", |m| match m {
                ConsensusMethod::Hgpa => "hgpa",
                ConsensusMethod::Mcla => "mcla",
            }),
            r.seconds,
            r.error.as_deref().unwrap_or("").replace(',', ";"),
        );
    }
    out
}

pub fn experiment_table(rows: &[ExperimentRow]) -> String {
    let mut out = format!(
        "{:<20} {:>7} {:>3} {:>10} {:>12} {:>8}\n",
        "dataset", "n", "k", "initKmix", "random mean", "SD"
    );
    for r in rows {
        if let Some(e) = &r.error {
            let _ = writeln!(out, "{:<20} error: {e}", r.name);
            continue;
        }
        let _ = writeln!(
            out,
            "{:<20} {:>7} {:>3} {:>10} {:>12} {:>8}",
            r.name,
            r.n.unwrap_or(0),
            r.k.unwrap_or(0),
            opt(r.initkmix_ac),
            opt(r.random_mean_ac),
            opt(r.random_sd),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset {
        let cats = ["a", "a", "a", "b", "b", "b", "a", "b", "a", "b"];
        let other = ["x", "x", "y", "z", "z", "z", "x", "z", "x", "y"];
        Dataset::from_columns(
            vec![(
                "v".into(),
                vec![0.1, 0.2, 0.15, 3.0, 3.2, 2.9, 0.3, 3.1, 0.05, 2.8],
            )],
            vec![
                ("c".into(), cats.iter().map(|s| s.to_string()).collect()),
                ("d".into(), other.iter().map(|s| s.to_string()).collect()),
            ],
            Some(cats.iter().map(|s| s.to_string()).collect()),
        )
        .unwrap()
    }

    #[test]
    fn seeded_streams_are_reproducible_and_distinct() {
        let r = SeededRng::new(42);
        assert_eq!(
            r.random_partition(3, 50, 4).unwrap(),
            r.random_partition(3, 50, 4).unwrap()
        );
        assert_ne!(
            r.random_partition(3, 50, 4).unwrap(),
            r.random_partition(4, 50, 4).unwrap()
        );
        assert_ne!(
            r.random_partition(3, 50, 4).unwrap(),
            SeededRng::new(43).random_partition(3, 50, 4).unwrap()
        );
    }

    #[test]
    fn k_resolution() {
        let ds = toy();
        assert_eq!(resolve_k(None, &ds).unwrap(), 2);
        assert_eq!(resolve_k(Some(3), &ds).unwrap(), 3);
        assert!(resolve_k(Some(11), &ds).is_err());
    }

    #[test]
    fn initkmix_ignores_seed_and_is_stable() {
        let prep = prepare("toy", &toy(), &PipelineConfig::default()).unwrap();
        let a = cluster(&prep, Method::Initkmix, 1, 3).unwrap();
        let b = cluster(&prep, Method::Initkmix, 99, 1).unwrap();
        assert_eq!(a.labels[0], b.labels[0]);
        assert_eq!(a.report.sd, Some(0.0));
        assert_eq!(a.report.mean_ac, Some(1.0));
        assert_eq!(a.report.seed, None);
    }

    #[test]
    fn random_baseline_is_reproducible() {
        let prep = prepare("toy", &toy(), &PipelineConfig::default()).unwrap();
        let a = cluster(&prep, Method::Random, 5, 8).unwrap();
        let b = cluster(&prep, Method::Random, 5, 8).unwrap();
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.report.mean_ac, b.report.mean_ac);
        assert_eq!(a.report.runs.len(), 8);
    }

    #[test]
    fn per_attribute_rows() {
        let prep = prepare("toy", &toy(), &PipelineConfig::default()).unwrap();
        let rep = per_attribute(&prep).unwrap();
        assert_eq!(rep.rows.len(), 3);
        assert_eq!(rep.qualifying().count(), 2);
        let csv = rep.to_csv(true);
        assert_eq!(csv.lines().count(), 1 + 2 + 1);
    }

    #[test]
    fn empty_manifest_gives_empty_table() {
        let rows = experiment(&[], &PipelineConfig::default(), 0, 5);
        assert!(rows.is_empty());
        assert_eq!(experiment_csv(&rows).lines().count(), 1);
    }

    #[test]
    fn failing_entry_is_reported() {
        let entry = ManifestEntry {
            name: "missing".into(),
            data: PathBuf::from("/nonexistent/data.csv"),
            schema: PathBuf::from("/nonexistent/schema.toml"),
        };
        let rows = experiment(&[entry], &PipelineConfig::default(), 0, 2);
        assert!(rows[0].error.is_some());
        assert!(experiment_table(&rows).contains("error"));
    }
}
