//! Command-line interface.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::consensus::{combine, LabelMatrix, PartitionConfig};
use crate::dataset::Normalization;
use crate::harness::{
    cluster, experiment, experiment_csv, experiment_table, initkmix_pipeline, load_prepared,
    per_attribute, read_manifest, Method, PipelineConfig,
};
use crate::kmcmd::NumericWeighting;
use crate::metrics::accuracy;
use crate::{Error, Result};

#[derive(Parser)]
#[command(
    name = "initkmix",
    version,
    about = "Clustering of mixed numeric/categorical data with deterministic initialization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster a dataset and write one label file per run.
    Cluster {
        data: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "initkmix")]
        method: MethodArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Runs to perform (default: 50 for random, 1 for initkmix).
        #[arg(long)]
        repeats: Option<usize>,
    },
    /// Compute only the initial partition and the per-attribute runs.
    Init {
        data: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Also write value distances and numeric weights as JSON.
        #[arg(long)]
        dump_model: bool,
    },
    /// Merge a label matrix (one column per run) into k clusters.
    Combine {
        labels: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 1.2)]
        balance: f64,
        #[arg(long, env = "INITKMIX_OUT_DIR", default_value = ".")]
        out_dir: PathBuf,
    },
    /// Score a label file against ground truth.
    Eval {
        labels: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
    /// Accuracy of every single-attribute run next to the final result.
    PerAttribute {
        data: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run every dataset of a manifest (CSV: name,data,schema).
    Experiment {
        manifest: PathBuf,
        #[command(flatten)]
        tuning: Tuning,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        repeats: usize,
        #[arg(long, env = "INITKMIX_OUT_DIR", default_value = ".")]
        out_dir: PathBuf,
    },
}

#[derive(Args)]
struct Tuning {
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    #[arg(long, default_value_t = 1.2)]
    balance: f64,
    #[arg(long, value_enum, default_value = "min-max")]
    normalization: NormalizationArg,
    #[arg(long, value_enum, default_value = "squared")]
    weighting: WeightingArg,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    k: Option<usize>,
    #[command(flatten)]
    tuning: Tuning,
    #[arg(long, env = "INITKMIX_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Initkmix,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormalizationArg {
    MinMax,
    ZScore,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightingArg {
    Squared,
    Linear,
}

impl Tuning {
    fn config(&self, k: Option<usize>) -> PipelineConfig {
        PipelineConfig {
            k,
            bins: self.bins,
            max_iterations: self.max_iter,
            balance: self.balance,
            normalization: match self.normalization {
                NormalizationArg::MinMax => Normalization::MinMax,
                NormalizationArg::ZScore => Normalization::ZScore,
            },
            weighting: match self.weighting {
                WeightingArg::Squared => NumericWeighting::Squared,
                WeightingArg::Linear => NumericWeighting::Linear,
            },
        }
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn label_text(labels: &[usize]) -> String {
    let mut s = String::with_capacity(labels.len() * 2);
    for l in labels {
        s.push_str(&l.to_string());
        s.push('\n');
    }
    s
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

/// One entry per non-empty line, trimmed.
fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Cluster {
            data,
            common,
            method,
            seed,
            repeats,
        } => {
            let prep = load_prepared(&data, &common.schema, &common.tuning.config(common.k))?;
            let (method, default_repeats, tag) = match method {
                MethodArg::Initkmix => (Method::Initkmix, 1, "initkmix"),
                MethodArg::Random => (Method::Random, 50, "random"),
            };
            let repeats = repeats.unwrap_or(default_repeats);
            let out = cluster(&prep, method, seed, repeats)?;
            ensure_dir(&common.out_dir)?;
            for (r, labels) in out.labels.iter().enumerate() {
                let file = if out.labels.len() == 1 {
                    format!("{}_{tag}.labels", prep.name)
                } else {
                    format!("{}_{tag}_run{:03}.labels", prep.name, r + 1)
                };
                write(&common.out_dir.join(file), &label_text(labels))?;
            }
            write_json(
                &common
                    .out_dir
                    .join(format!("{}_{tag}_report.json", prep.name)),
                &out.report,
            )?;
            match (out.report.mean_ac, out.report.sd) {
                (Some(m), Some(sd)) => println!(
                    "{} {tag} k={} runs={} AC={m:.4} SD={sd:.4}",
                    prep.name, prep.k, repeats
                ),
                _ => println!("{} {tag} k={} runs={}", prep.name, prep.k, repeats),
            }
        }
        Command::Init {
            data,
            common,
            dump_model,
        } => {
            let prep = load_prepared(&data, &common.schema, &common.tuning.config(common.k))?;
            let (init, _) = initkmix_pipeline(&prep)?;
            ensure_dir(&common.out_dir)?;
            write(
                &common.out_dir.join(format!("{}_init.labels", prep.name)),
                &label_text(init.consensus.labels()),
            )?;
            let mut runs_csv = init
                .runs
                .iter()
                .map(|r| r.attribute.as_str())
                .collect::<Vec<_>>()
                .join(",");
            runs_csv.push('\n');
            for i in 0..prep.ds.n() {
                let row: Vec<String> = init
                    .runs
                    .iter()
                    .map(|r| r.result.partition.labels()[i].to_string())
                    .collect();
                runs_csv.push_str(&row.join(","));
                runs_csv.push('\n');
            }
            write(
                &common.out_dir.join(format!("{}_init_runs.csv", prep.name)),
                &runs_csv,
            )?;
            #[derive(Serialize)]
            struct InitReport<'a> {
                dataset: &'a str,
                k: usize,
                chosen_method: crate::consensus::ConsensusMethod,
                hgpa_anmi: f64,
                mcla_anmi: Option<f64>,
                attributes: Vec<&'a str>,
                skipped: &'a [crate::initkmix::SkippedAttribute],
                notes: &'a [String],
            }
            write_json(
                &common
                    .out_dir
                    .join(format!("{}_init_report.json", prep.name)),
                &InitReport {
                    dataset: &prep.name,
                    k: prep.k,
                    chosen_method: init.chosen_method,
                    hgpa_anmi: init.hgpa_anmi,
                    mcla_anmi: init.mcla_anmi,
                    attributes: init.runs.iter().map(|r| r.attribute.as_str()).collect(),
                    skipped: &init.skipped,
                    notes: &init.notes,
                },
            )?;
            if dump_model {
                write_json(
                    &common.out_dir.join(format!("{}_model.json", prep.name)),
                    &prep.model,
                )?;
            }
            println!(
                "{} k={} consensus={:?} hgpa_anmi={:.4} mcla_anmi={}",
                prep.name,
                prep.k,
                init.chosen_method,
                init.hgpa_anmi,
                init.mcla_anmi.map_or("-".into(), |v| format!("{v:.4}"))
            );
        }
        Command::Combine {
            labels,
            k,
            balance,
            out_dir,
        } => {
            let lm = LabelMatrix::read_csv(&labels)?;
            if balance.is_nan() || balance < 1.0 {
                return Err(Error::Parameter(format!(
                    "balance must be at least 1, got {balance}"
                )));
            }
            let cfg = PartitionConfig {
                balance,
                ..PartitionConfig::default()
            };
            let out = combine(&lm, k, &cfg)?;
            ensure_dir(&out_dir)?;
            let stem = labels
                .file_stem()
                .map_or("labels".into(), |s| s.to_string_lossy().into_owned());
            write(
                &out_dir.join(format!("{stem}_consensus.labels")),
                &label_text(out.partition.labels()),
            )?;
            write_json(&out_dir.join(format!("{stem}_consensus.json")), &out)?;
            println!("consensus={:?} hgpa_anmi={:.4}", out.chosen, out.hgpa_anmi);
        }
        Command::Eval { labels, truth } => {
            let clusters = read_lines(&labels)?
                .iter()
                .enumerate()
                .map(|(i, l)| {
                    l.parse::<usize>().map_err(|_| Error::Csv {
                        row: i + 1,
                        message: format!("`{l}` is not a label"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let names = read_lines(&truth)?;
            let mut book = names.clone();
            book.sort();
            book.dedup();
            let classes: Vec<usize> = names
                .iter()
                .map(|n| book.binary_search(n).unwrap())
                .collect();
            let acc = accuracy(&clusters, &classes)?;
            #[derive(Serialize)]
            struct Eval<'a> {
                ac: f64,
                correct: u64,
                n: usize,
                mapping: Vec<Option<&'a str>>,
            }
            let report = Eval {
                ac: acc.ac,
                correct: acc.correct,
                n: clusters.len(),
                mapping: acc
                    .mapping
                    .iter()
                    .map(|m| m.map(|c| book[c].as_str()))
                    .collect(),
            };
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::PerAttribute { data, common } => {
            let prep = load_prepared(&data, &common.schema, &common.tuning.config(common.k))?;
            let rep = per_attribute(&prep)?;
            ensure_dir(&common.out_dir)?;
            write(
                &common
                    .out_dir
                    .join(format!("{}_per_attribute_all.csv", prep.name)),
                &rep.to_csv(false),
            )?;
            write(
                &common
                    .out_dir
                    .join(format!("{}_per_attribute_qualifying.csv", prep.name)),
                &rep.to_csv(true),
            )?;
            write_json(
                &common
                    .out_dir
                    .join(format!("{}_per_attribute.json", prep.name)),
                &rep,
            )?;
            print!("{}", rep.to_csv(false));
        }
        Command::Experiment {
            manifest,
            tuning,
            seed,
            repeats,
            out_dir,
        } => {
            if repeats == 0 {
                return Err(Error::Parameter("repeats must be positive".into()));
            }
            let entries = read_manifest(&manifest)?;
            let rows = experiment(&entries, &tuning.config(None), seed, repeats);
            ensure_dir(&out_dir)?;
            let stem = manifest
                .file_stem()
                .map_or("experiment".into(), |s| s.to_string_lossy().into_owned());
            write(
                &out_dir.join(format!("{stem}_results.csv")),
                &experiment_csv(&rows),
            )?;
            let table = experiment_table(&rows);
            write(&out_dir.join(format!("{stem}_results.txt")), &table)?;
            print!("{table}");
        }
    }
    Ok(())
}

/// Parse `args` (program name first), run the command and return the
/// process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 4 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
