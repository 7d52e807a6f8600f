//! Mixed numeric/categorical tables: schema binding, CSV loading,
//! missing-value handling, normalization and equal-width discretization.
//!
//! Categorical values are stored as small integer codes. Codes are assigned
//! by sorting the distinct value names lexicographically, so the code book of
//! a column does not depend on the order of the rows in the file.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    /// Ground-truth class column; never used for clustering.
    Label,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

impl ColumnSpec {
    pub fn new(name: impl Into<String>, kind: ColumnKind) -> Self {
        Self {
            name: name.into(),
            kind,
        }
    }
}

/// What to do with a categorical cell equal to the missing token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CategoricalMissing {
    /// The token becomes a category of its own.
    #[default]
    Category,
    /// Replace with the most frequent observed value (lexicographically
    /// smallest on ties).
    Mode,
}

/// Missing numeric cells are always replaced by the column mean of the
/// observed values, before normalization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissingPolicy {
    pub token: String,
    pub categorical: CategoricalMissing,
}

impl Default for MissingPolicy {
    fn default() -> Self {
        Self {
            token: "?".to_string(),
            categorical: CategoricalMissing::Category,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Schema {
    columns: Vec<ColumnSpec>,
    k_hint: Option<usize>,
    has_header: bool,
}

impl Schema {
    pub fn new(columns: Vec<ColumnSpec>) -> Result<Self> {
        if !columns.iter().any(|c| c.kind != ColumnKind::Label) {
            return Err(Error::Schema(
                "at least one non-label column is required".into(),
            ));
        }
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column name `{}`", c.name)));
            }
        }
        if columns
            .iter()
            .filter(|c| c.kind == ColumnKind::Label)
            .count()
            > 1
        {
            return Err(Error::Schema("more than one label column".into()));
        }
        Ok(Self {
            columns,
            k_hint: None,
            has_header: false,
        })
    }

    pub fn with_k_hint(mut self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Schema("k must be positive".into()));
        }
        self.k_hint = Some(k);
        Ok(self)
    }

    pub fn with_header(mut self, has_header: bool) -> Self {
        self.has_header = has_header;
        self
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn k_hint(&self) -> Option<usize> {
        self.k_hint
    }

    pub fn has_header(&self) -> bool {
        self.has_header
    }

    pub fn numeric_count(&self) -> usize {
        self.count(ColumnKind::Numeric)
    }

    pub fn categorical_count(&self) -> usize {
        self.count(ColumnKind::Categorical)
    }

    /// Number of clustering attributes, numeric plus categorical.
    pub fn attribute_count(&self) -> usize {
        self.numeric_count() + self.categorical_count()
    }

    fn count(&self, kind: ColumnKind) -> usize {
        self.columns.iter().filter(|c| c.kind == kind).count()
    }
}

/// On-disk schema manifest (TOML).
///
/// ```toml
/// k = 2
/// header = true
/// missing = "?"
/// categorical_missing = "category"
/// columns = [
///     { name = "party", kind = "label" },
///     { name = "crime", kind = "categorical" },
/// ]
/// ```
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestFile {
    k: Option<usize>,
    #[serde(default)]
    header: bool,
    missing: Option<String>,
    #[serde(default)]
    categorical_missing: CategoricalMissing,
    columns: Vec<ColumnSpec>,
}

/// A parsed schema manifest.
#[derive(Debug, Clone)]
pub struct SchemaManifest {
    pub schema: Schema,
    pub missing: MissingPolicy,
}

impl SchemaManifest {
    pub fn parse(text: &str) -> Result<Self> {
        let file: ManifestFile =
            toml::from_str(text).map_err(|e| Error::Schema(e.message().to_string()))?;
        let mut schema = Schema::new(file.columns)?.with_header(file.header);
        if let Some(k) = file.k {
            schema = schema.with_k_hint(k)?;
        }
        let missing = MissingPolicy {
            token: file.missing.unwrap_or_else(|| "?".to_string()),
            categorical: file.categorical_missing,
        };
        Ok(Self { schema, missing })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Scale every numeric column onto [0, 1].
    #[default]
    MinMax,
    /// Subtract the mean and divide by the population standard deviation.
    ZScore,
}

/// Affine map applied to one numeric column: `x' = (x - offset) / scale`,
/// expressed relative to the values as loaded.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnScaling {
    pub column: String,
    pub offset: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImputedColumn {
    pub column: String,
    pub cells: usize,
    /// Replacement value (numeric mean, or the mode for categorical columns).
    pub value: String,
}

/// Record of the preprocessing applied to a dataset.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Provenance {
    pub source: Option<String>,
    pub missing_policy: Option<MissingPolicy>,
    pub imputed: Vec<ImputedColumn>,
    /// Categorical columns in which the missing token became its own value.
    pub missing_as_category: Vec<ImputedColumn>,
    pub normalization: Option<Normalization>,
    pub scaling: Vec<ColumnScaling>,
}

/// A mixed dataset with columns stored attribute-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Schema,
    numeric_names: Vec<String>,
    categorical_names: Vec<String>,
    numeric: Vec<Vec<f64>>,
    categorical: Vec<Vec<u32>>,
    value_names: Vec<Vec<String>>,
    ground_truth: Option<Vec<usize>>,
    class_names: Vec<String>,
    n: usize,
    provenance: Provenance,
}

/// Sorted distinct values and the code of every cell.
fn encode(values: &[&str]) -> (Vec<String>, Vec<u32>) {
    let book: BTreeSet<&str> = values.iter().copied().collect();
    let index: BTreeMap<&str, u32> = book
        .iter()
        .enumerate()
        .map(|(i, v)| (*v, i as u32))
        .collect();
    let codes = values.iter().map(|v| index[v]).collect();
    (book.into_iter().map(str::to_string).collect(), codes)
}

impl Dataset {
    /// Assemble a dataset from in-memory columns. Column order in the
    /// resulting schema is numeric columns, categorical columns, then the
    /// label column.
    pub fn from_columns(
        numeric: Vec<(String, Vec<f64>)>,
        categorical: Vec<(String, Vec<String>)>,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        let n = numeric
            .first()
            .map(|c| c.1.len())
            .or_else(|| categorical.first().map(|c| c.1.len()))
            .ok_or_else(|| Error::Schema("dataset has no attributes".into()))?;
        let mut specs = Vec::new();
        for (name, col) in &numeric {
            if col.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    found: col.len(),
                });
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::param(format!(
                    "column `{name}` has non-finite values"
                )));
            }
            specs.push(ColumnSpec::new(name.clone(), ColumnKind::Numeric));
        }
        for (name, col) in &categorical {
            if col.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    found: col.len(),
                });
            }
            specs.push(ColumnSpec::new(name.clone(), ColumnKind::Categorical));
        }
        if labels.is_some() {
            specs.push(ColumnSpec::new("class", ColumnKind::Label));
        }
        let schema = Schema::new(specs)?;

        let mut categorical_names = Vec::new();
        let mut codes = Vec::new();
        let mut value_names = Vec::new();
        for (name, col) in categorical {
            let refs: Vec<&str> = col.iter().map(String::as_str).collect();
            let (book, c) = encode(&refs);
            categorical_names.push(name);
            codes.push(c);
            value_names.push(book);
        }
        let (class_names, ground_truth) = match labels {
            Some(l) => {
                if l.len() != n {
                    return Err(Error::LengthMismatch {
                        expected: n,
                        found: l.len(),
                    });
                }
                let refs: Vec<&str> = l.iter().map(String::as_str).collect();
                let (book, c) = encode(&refs);
                (book, Some(c.into_iter().map(|x| x as usize).collect()))
            }
            None => (Vec::new(), None),
        };
        let (numeric_names, numeric) = numeric.into_iter().unzip();
        Ok(Self {
            schema,
            numeric_names,
            categorical_names,
            numeric,
            categorical: codes,
            value_names,
            ground_truth,
            class_names,
            n,
            provenance: Provenance::default(),
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    /// Number of rows.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn numeric_count(&self) -> usize {
        self.numeric.len()
    }

    pub fn categorical_count(&self) -> usize {
        self.categorical.len()
    }

    pub fn attribute_count(&self) -> usize {
        self.numeric.len() + self.categorical.len()
    }

    pub fn numeric_column(&self, t: usize) -> &[f64] {
        &self.numeric[t]
    }

    pub fn categorical_column(&self, t: usize) -> &[u32] {
        &self.categorical[t]
    }

    pub fn numeric_name(&self, t: usize) -> &str {
        &self.numeric_names[t]
    }

    pub fn categorical_name(&self, t: usize) -> &str {
        &self.categorical_names[t]
    }

    /// Distinct-value count X of a categorical column.
    pub fn cardinality(&self, t: usize) -> usize {
        self.value_names[t].len()
    }

    pub fn value_names(&self, t: usize) -> &[String] {
        &self.value_names[t]
    }

    pub fn ground_truth(&self) -> Option<&[usize]> {
        self.ground_truth.as_deref()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn normalization(&self) -> Option<Normalization> {
        self.provenance.normalization
    }

    /// Dataset with row `i` of the result taken from row `order[i]` of `self`.
    pub fn permute_rows(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                found: order.len(),
            });
        }
        let mut seen = vec![false; self.n];
        for &i in order {
            if i >= self.n || std::mem::replace(&mut seen[i], true) {
                return Err(Error::param("row order is not a permutation"));
            }
        }
        let mut out = self.clone();
        for (dst, src) in out.numeric.iter_mut().zip(&self.numeric) {
            *dst = order.iter().map(|&i| src[i]).collect();
        }
        for (dst, src) in out.categorical.iter_mut().zip(&self.categorical) {
            *dst = order.iter().map(|&i| src[i]).collect();
        }
        if let Some(truth) = &self.ground_truth {
            out.ground_truth = Some(order.iter().map(|&i| truth[i]).collect());
        }
        Ok(out)
    }
}

/// Load a delimited text file bound to `schema`.
pub fn load_csv(
    path: impl AsRef<Path>,
    schema: &Schema,
    missing: &MissingPolicy,
) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut ds = parse_csv(&text, schema, missing)?;
    ds.provenance.source = Some(path.display().to_string());
    Ok(ds)
}

/// Parse CSV text bound to `schema`. Row numbers in errors are 1-based
/// line numbers, counting the header.
pub fn parse_csv(text: &str, schema: &Schema, missing: &MissingPolicy) -> Result<Dataset> {
    let width = schema.columns.len();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut cells: Vec<Vec<String>> = vec![Vec::new(); width];
    let mut header_seen = !schema.has_header;
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(|e| Error::Csv {
            row,
            message: e.to_string(),
        })?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != width {
            return Err(Error::MalformedRow {
                row,
                expected: width,
                found: record.len(),
            });
        }
        if !header_seen {
            header_seen = true;
            for (spec, name) in schema.columns.iter().zip(record.iter()) {
                if spec.name != name {
                    return Err(Error::Schema(format!(
                        "header column `{name}` does not match schema column `{}`",
                        spec.name
                    )));
                }
            }
            continue;
        }
        for (col, value) in cells.iter_mut().zip(record.iter()) {
            col.push(value.to_string());
        }
    }
    let n = cells.first().map_or(0, Vec::len);
    if n == 0 {
        return Err(Error::Schema("file contains no data rows".into()));
    }
    let first_data_row = if schema.has_header { 2 } else { 1 };

    let mut ds = Dataset {
        schema: schema.clone(),
        numeric_names: Vec::new(),
        categorical_names: Vec::new(),
        numeric: Vec::new(),
        categorical: Vec::new(),
        value_names: Vec::new(),
        ground_truth: None,
        class_names: Vec::new(),
        n,
        provenance: Provenance {
            missing_policy: Some(missing.clone()),
            ..Provenance::default()
        },
    };

    for (spec, col) in schema.columns.iter().zip(cells) {
        match spec.kind {
            ColumnKind::Numeric => {
                let mut values = Vec::with_capacity(n);
                let mut absent = Vec::new();
                for (i, raw) in col.iter().enumerate() {
                    if *raw == missing.token {
                        absent.push(i);
                        values.push(0.0);
                        continue;
                    }
                    match raw.parse::<f64>() {
                        Ok(v) if v.is_finite() => values.push(v),
                        _ => {
                            return Err(Error::NumericParse {
                                row: first_data_row + i,
                                column: spec.name.clone(),
                                value: raw.clone(),
                            })
                        }
                    }
                }
                if !absent.is_empty() {
                    let present = n - absent.len();
                    if present == 0 {
                        return Err(Error::Schema(format!(
                            "numeric column `{}` has no observed values",
                            spec.name
                        )));
                    }
                    let absent_set: HashSet<usize> = absent.iter().copied().collect();
                    let mean = values
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| !absent_set.contains(i))
                        .map(|(_, v)| *v)
                        .sum::<f64>()
                        / present as f64;
                    for &i in &absent {
                        values[i] = mean;
                    }
                    ds.provenance.imputed.push(ImputedColumn {
                        column: spec.name.clone(),
                        cells: absent.len(),
                        value: mean.to_string(),
                    });
                }
                ds.numeric_names.push(spec.name.clone());
                ds.numeric.push(values);
            }
            ColumnKind::Categorical => {
                let missing_cells = col.iter().filter(|v| **v == missing.token).count();
                let mut refs: Vec<&str> = col.iter().map(String::as_str).collect();
                if missing_cells > 0 {
                    match missing.categorical {
                        CategoricalMissing::Category => {
                            ds.provenance.missing_as_category.push(ImputedColumn {
                                column: spec.name.clone(),
                                cells: missing_cells,
                                value: missing.token.clone(),
                            });
                        }
                        CategoricalMissing::Mode => {
                            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
                            for v in refs.iter().filter(|v| **v != missing.token) {
                                *counts.entry(v).or_default() += 1;
                            }
                            // BTreeMap iterates in ascending order; keep the first maximum.
                            let mode = counts
                                .iter()
                                .fold(None::<(&str, usize)>, |best, (v, c)| match best {
                                    Some((_, bc)) if bc >= *c => best,
                                    _ => Some((v, *c)),
                                })
                                .map(|(v, _)| v)
                                .ok_or_else(|| {
                                    Error::Schema(format!(
                                        "categorical column `{}` has no observed values",
                                        spec.name
                                    ))
                                })?;
                            for v in refs.iter_mut() {
                                if *v == missing.token {
                                    *v = mode;
                                }
                            }
                            ds.provenance.imputed.push(ImputedColumn {
                                column: spec.name.clone(),
                                cells: missing_cells,
                                value: mode.to_string(),
                            });
                        }
                    }
                }
                let (book, codes) = encode(&refs);
                ds.categorical_names.push(spec.name.clone());
                ds.categorical.push(codes);
                ds.value_names.push(book);
            }
            ColumnKind::Label => {
                let refs: Vec<&str> = col.iter().map(String::as_str).collect();
                let (book, codes) = encode(&refs);
                ds.class_names = book;
                ds.ground_truth = Some(codes.into_iter().map(|c| c as usize).collect());
            }
        }
    }
    Ok(ds)
}

/// Rescale every numeric column. Min-max maps onto [0, 1] (constant
/// columns become all zeros); z-score centers and divides by the
/// population standard deviation (constant columns become all zeros).
pub fn normalize(ds: &Dataset, method: Normalization) -> Dataset {
    let mut out = ds.clone();
    let mut scaling = Vec::with_capacity(ds.numeric.len());
    for (t, col) in out.numeric.iter_mut().enumerate() {
        let (offset, scale) = match method {
            Normalization::MinMax => {
                let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi - lo)
            }
            Normalization::ZScore => {
                let (mean, sd) = mean_sd(col);
                (mean, sd)
            }
        };
        for v in col.iter_mut() {
            *v = if scale > 0.0 {
                (*v - offset) / scale
            } else {
                0.0
            };
        }
        // Compose with any earlier scaling so the record stays relative to
        // the loaded values.
        let (prev_offset, prev_scale) = ds
            .provenance
            .scaling
            .get(t)
            .map_or((0.0, 1.0), |s| (s.offset, s.scale));
        scaling.push(ColumnScaling {
            column: ds.numeric_names[t].clone(),
            offset: prev_offset + prev_scale * offset,
            scale: if scale > 0.0 { prev_scale * scale } else { 0.0 },
        });
    }
    out.provenance.normalization = Some(method);
    out.provenance.scaling = scaling;
    out
}

/// Neumaier-compensated sum; keeps sums stable under row reordering.
pub(crate) fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = compensated_sum(values.iter().copied()) / n;
    let var = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean))) / n;
    (mean, var.sqrt())
}

/// Equal-width binning of one numeric column.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinnedColumn {
    /// `bins + 1` ascending edges from the lower to the upper bound.
    pub edges: Vec<f64>,
    pub bins: usize,
    /// Compacted bin code per row; empty bins are dropped from the alphabet.
    pub codes: Vec<u32>,
    /// Number of non-empty bins.
    pub cardinality: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Discretization {
    pub columns: Vec<BinnedColumn>,
}

/// Bin every numeric column into `bins` equal-width intervals. The range
/// is [0, 1] for min-max normalized data and the observed range otherwise.
pub fn discretize(ds: &Dataset, bins: usize) -> Result<Discretization> {
    if bins < 2 {
        return Err(Error::param(format!(
            "bin count must be at least 2, got {bins}"
        )));
    }
    let columns = ds
        .numeric
        .iter()
        .map(|col| {
            let (lo, hi) = match ds.normalization() {
                Some(Normalization::MinMax) => (0.0, 1.0),
                _ => (
                    col.iter().copied().fold(f64::INFINITY, f64::min),
                    col.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                ),
            };
            bin_column(col, lo, hi, bins)
        })
        .collect();
    Ok(Discretization { columns })
}

fn bin_column(col: &[f64], lo: f64, hi: f64, bins: usize) -> BinnedColumn {
    let width = hi - lo;
    let raw: Vec<usize> = col
        .iter()
        .map(|&v| {
            if width <= 0.0 {
                return 0;
            }
            let b = ((v - lo) / width * bins as f64).floor();
            (b.max(0.0) as usize).min(bins - 1)
        })
        .collect();
    let mut used = vec![false; bins];
    for &b in &raw {
        used[b] = true;
    }
    let mut remap = vec![u32::MAX; bins];
    let mut next = 0u32;
    for (b, u) in used.iter().enumerate() {
        if *u {
            remap[b] = next;
            next += 1;
        }
    }
    let edges = (0..=bins)
        .map(|i| {
            if width > 0.0 {
                lo + width * i as f64 / bins as f64
            } else {
                lo + i as f64
            }
        })
        .collect();
    BinnedColumn {
        edges,
        bins,
        codes: raw.iter().map(|&b| remap[b]).collect(),
        cardinality: next as usize,
    }
}
