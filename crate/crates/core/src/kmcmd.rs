//! K-means style clustering of mixed data with frequency-based centers.
//!
//! A center holds the mean of every numeric attribute and the relative
//! frequency of every value of every categorical attribute. The distance of
//! a row to a center is
//!
//! `Σ_t (w_t (x_t - μ_t))² + Σ_t Ω_t(x_t, c)²`, with
//! `Ω_t(x, c) = Σ_v freq_t[v] · δ_t(v, x)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::codist::DistanceModel;
use crate::dataset::{compensated_sum, Dataset};
use crate::error::{Error, Result};

/// Cluster labels in `[0, k)` for every row.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Partition {
    labels: Vec<usize>,
    k: usize,
}

impl Partition {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::param("cluster count must be positive"));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::param(format!(
                "label {bad} out of range for k = {k}"
            )));
        }
        Ok(Self { labels, k })
    }

    /// Partition with `k` equal to one more than the largest label.
    pub fn from_labels(labels: Vec<usize>) -> Result<Self> {
        let k = labels.iter().max().map_or(0, |m| m + 1);
        Self::new(labels, k)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<usize> {
        self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// True when no cluster is empty.
    pub fn is_complete(&self) -> bool {
        self.sizes().iter().all(|&s| s > 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterCenter {
    pub numeric_means: Vec<f64>,
    pub cat_freqs: Vec<Vec<f64>>,
}

/// How a numeric weight enters the distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NumericWeighting {
    /// `(w · Δ)²`
    #[default]
    Squared,
    /// `w · Δ²`
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct KmcmdConfig {
    pub max_iterations: usize,
    pub weighting: NumericWeighting,
}

impl Default for KmcmdConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            weighting: NumericWeighting::Squared,
        }
    }
}

/// Total cost under the centers of one sweep, before and after reassignment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepCost {
    pub before: f64,
    pub after: f64,
    pub moved: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KmcmdResult {
    pub partition: Partition,
    pub centers: Vec<ClusterCenter>,
    pub iterations: usize,
    pub converged: bool,
    pub cost: f64,
    pub sweeps: Vec<SweepCost>,
    /// Points moved into empty clusters.
    pub repairs: usize,
}

/// Per-cluster numeric means and categorical value frequencies.
pub fn compute_centers(ds: &Dataset, part: &Partition) -> Result<Vec<ClusterCenter>> {
    if part.n() != ds.n() {
        return Err(Error::LengthMismatch {
            expected: ds.n(),
            found: part.n(),
        });
    }
    let sizes = part.sizes();
    if let Some(empty) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::Model(format!("cluster {empty} is empty")));
    }
    let k = part.k();
    let labels = part.labels();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    let centers = members
        .iter()
        .map(|rows| {
            let size = rows.len() as f64;
            let numeric_means = (0..ds.numeric_count())
                .map(|t| {
                    let col = ds.numeric_column(t);
                    compensated_sum(rows.iter().map(|&i| col[i])) / size
                })
                .collect();
            let cat_freqs = (0..ds.categorical_count())
                .map(|t| {
                    let col = ds.categorical_column(t);
                    let mut counts = vec![0usize; ds.cardinality(t)];
                    for &i in rows {
                        counts[col[i] as usize] += 1;
                    }
                    counts.into_iter().map(|c| c as f64 / size).collect()
                })
                .collect();
            ClusterCenter {
                numeric_means,
                cat_freqs,
            }
        })
        .collect();
    Ok(centers)
}

fn omega(model: &DistanceModel, t: usize, freqs: &[f64], x: usize) -> f64 {
    let m = &model.delta[t];
    freqs.iter().enumerate().map(|(v, f)| f * m.get(v, x)).sum()
}

fn numeric_term(w: f64, diff: f64, weighting: NumericWeighting) -> f64 {
    match weighting {
        NumericWeighting::Squared => (w * diff) * (w * diff),
        NumericWeighting::Linear => w * diff * diff,
    }
}

/// Distance of row `row` to center `c`.
pub fn point_center_distance(
    ds: &Dataset,
    model: &DistanceModel,
    row: usize,
    c: &ClusterCenter,
    weighting: NumericWeighting,
) -> f64 {
    let mut d = 0.0;
    for t in 0..ds.numeric_count() {
        let diff = ds.numeric_column(t)[row] - c.numeric_means[t];
        d += numeric_term(model.weights[t], diff, weighting);
    }
    for t in 0..ds.categorical_count() {
        let o = omega(
            model,
            t,
            &c.cat_freqs[t],
            ds.categorical_column(t)[row] as usize,
        );
        d += o * o;
    }
    d
}

/// Row-major copies of the data plus per-center Ω² lookup tables, so one
/// row-to-center distance costs O(m).
struct Workspace<'a> {
    n: usize,
    mr: usize,
    mc: usize,
    numeric: Vec<f64>,
    codes: Vec<usize>,
    /// Offset of each categorical attribute inside a center's Ω² table.
    offsets: Vec<usize>,
    table_len: usize,
    model: &'a DistanceModel,
    weighting: NumericWeighting,
}

struct CenterTables {
    means: Vec<f64>,
    omega_sq: Vec<f64>,
}

impl<'a> Workspace<'a> {
    fn new(ds: &Dataset, model: &'a DistanceModel, weighting: NumericWeighting) -> Result<Self> {
        let (n, mr, mc) = (ds.n(), ds.numeric_count(), ds.categorical_count());
        if model.weights.len() != mr || model.delta.len() != mc {
            return Err(Error::Model(
                "distance model does not match the dataset".into(),
            ));
        }
        let mut numeric = vec![0.0; n * mr];
        for t in 0..mr {
            for (i, &v) in ds.numeric_column(t).iter().enumerate() {
                numeric[i * mr + t] = v;
            }
        }
        let mut codes = vec![0usize; n * mc];
        let mut offsets = Vec::with_capacity(mc);
        let mut table_len = 0;
        for t in 0..mc {
            if model.delta[t].size() != ds.cardinality(t) {
                return Err(Error::Model(
                    "distance model does not match the dataset".into(),
                ));
            }
            for (i, &v) in ds.categorical_column(t).iter().enumerate() {
                codes[i * mc + t] = table_len + v as usize;
            }
            offsets.push(table_len);
            table_len += ds.cardinality(t);
        }
        Ok(Self {
            n,
            mr,
            mc,
            numeric,
            codes,
            offsets,
            table_len,
            model,
            weighting,
        })
    }

    fn tables(&self, centers: &[ClusterCenter]) -> Vec<CenterTables> {
        centers
            .iter()
            .map(|c| {
                let mut omega_sq = vec![0.0; self.table_len];
                for t in 0..self.mc {
                    let freqs = &c.cat_freqs[t];
                    let base = self.offsets[t];
                    for x in 0..freqs.len() {
                        let o = omega(self.model, t, freqs, x);
                        omega_sq[base + x] = o * o;
                    }
                }
                CenterTables {
                    means: c.numeric_means.clone(),
                    omega_sq,
                }
            })
            .collect()
    }

    fn distance(&self, row: usize, c: &CenterTables) -> f64 {
        let mut d = 0.0;
        let xs = &self.numeric[row * self.mr..(row + 1) * self.mr];
        for (t, (&x, &mu)) in xs.iter().zip(&c.means).enumerate() {
            d += numeric_term(self.model.weights[t], x - mu, self.weighting);
        }
        for &slot in &self.codes[row * self.mc..(row + 1) * self.mc] {
            d += c.omega_sq[slot];
        }
        d
    }

    /// Nearest center (lowest index on ties) and its distance.
    fn nearest(&self, row: usize, tables: &[CenterTables]) -> (usize, f64) {
        let mut best = (0, self.distance(row, &tables[0]));
        for (j, c) in tables.iter().enumerate().skip(1) {
            let d = self.distance(row, c);
            if d < best.1 {
                best = (j, d);
            }
        }
        best
    }

    fn cost(&self, labels: &[usize], tables: &[CenterTables]) -> f64 {
        let per_row: Vec<f64> = (0..self.n)
            .into_par_iter()
            .map(|i| self.distance(i, &tables[labels[i]]))
            .collect();
        per_row.iter().sum()
    }
}

/// Centers of the non-empty clusters; empty clusters get `None`.
fn partial_centers(ds: &Dataset, labels: &[usize], k: usize) -> Vec<Option<ClusterCenter>> {
    let mut present = vec![false; k];
    for &l in labels {
        present[l] = true;
    }
    let mut remap = vec![usize::MAX; k];
    let mut next = 0;
    for j in 0..k {
        if present[j] {
            remap[j] = next;
            next += 1;
        }
    }
    let compact: Vec<usize> = labels.iter().map(|&l| remap[l]).collect();
    let part = Partition {
        labels: compact,
        k: next,
    };
    let mut centers = compute_centers(ds, &part)
        .expect("compacted partition has no empty cluster")
        .into_iter();
    (0..k)
        .map(|j| if present[j] { centers.next() } else { None })
        .collect()
}

/// Refill every empty cluster, lowest index first, with the point farthest
/// from its own center among clusters holding more than one point. Returns
/// the number of points moved.
fn repair_empty(ds: &Dataset, ws: &Workspace, labels: &mut [usize], k: usize) -> usize {
    let mut moved = 0;
    loop {
        let mut sizes = vec![0usize; k];
        for &l in labels.iter() {
            sizes[l] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return moved;
        };
        let centers = partial_centers(ds, labels, k);
        let tables: Vec<Option<CenterTables>> = centers
            .iter()
            .map(|c| {
                c.as_ref()
                    .map(|c| ws.tables(std::slice::from_ref(c)).pop().unwrap())
            })
            .collect();
        let mut best: Option<(usize, f64)> = None;
        for (i, &l) in labels.iter().enumerate() {
            if sizes[l] < 2 {
                continue;
            }
            let d = ws.distance(i, tables[l].as_ref().unwrap());
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        let (row, _) = best.expect("k <= n guarantees a donor cluster");
        labels[row] = empty;
        moved += 1;
    }
}

/// Batch Lloyd iteration from `init` until no point changes cluster or
/// `max_iterations` sweeps have run.
pub fn iterate(
    ds: &Dataset,
    model: &DistanceModel,
    init: &Partition,
    config: &KmcmdConfig,
) -> Result<KmcmdResult> {
    let (n, k) = (ds.n(), init.k());
    if init.n() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: init.n(),
        });
    }
    if k > n {
        return Err(Error::param(format!(
            "k = {k} exceeds the number of rows {n}"
        )));
    }
    if config.max_iterations == 0 {
        return Err(Error::param("max_iterations must be positive"));
    }
    let ws = Workspace::new(ds, model, config.weighting)?;
    let mut labels = init.labels.clone();
    let mut repairs = repair_empty(ds, &ws, &mut labels, k);

    let mut sweeps = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut centers = compute_centers(
        ds,
        &Partition {
            labels: labels.clone(),
            k,
        },
    )?;
    while iterations < config.max_iterations {
        iterations += 1;
        let tables = ws.tables(&centers);
        let assigned: Vec<(usize, f64, f64)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let (j, d) = ws.nearest(i, &tables);
                (j, d, ws.distance(i, &tables[labels[i]]))
            })
            .collect();
        let before: f64 = assigned.iter().map(|a| a.2).sum();
        let after: f64 = assigned.iter().map(|a| a.1).sum();
        let mut moved = 0;
        for (l, a) in labels.iter_mut().zip(&assigned) {
            if *l != a.0 {
                *l = a.0;
                moved += 1;
            }
        }
        sweeps.push(SweepCost {
            before,
            after,
            moved,
        });
        if moved == 0 {
            converged = true;
            break;
        }
        repairs += repair_empty(ds, &ws, &mut labels, k);
        centers = compute_centers(
            ds,
            &Partition {
                labels: labels.clone(),
                k,
            },
        )?;
    }
    let tables = ws.tables(&centers);
    let cost = ws.cost(&labels, &tables);
    Ok(KmcmdResult {
        partition: Partition { labels, k },
        centers,
        iterations,
        converged,
        cost,
        sweeps,
        repairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codist::build_model;
    use crate::dataset::{normalize, Normalization};
    use proptest::prelude::*;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn mixed(nums: Vec<f64>, cats: &[&str]) -> (Dataset, DistanceModel) {
        let ds = Dataset::from_columns(
            vec![("x".into(), nums)],
            vec![("c".into(), strings(cats))],
            None,
        )
        .unwrap();
        let ds = normalize(&ds, Normalization::MinMax);
        let model = build_model(&ds, 4).unwrap();
        (ds, model)
    }

    #[test]
    fn centers_are_means_and_frequencies() {
        let (ds, _) = mixed(vec![0.0, 1.0, 2.0, 4.0], &["a", "a", "b", "b"]);
        let part = Partition::new(vec![0, 0, 0, 1], 2).unwrap();
        let c = compute_centers(&ds, &part).unwrap();
        assert!((c[0].numeric_means[0] - 0.25).abs() < 1e-15);
        assert_eq!(c[0].cat_freqs[0], vec![2.0 / 3.0, 1.0 / 3.0]);
        assert_eq!(c[1].numeric_means, vec![1.0]);
        assert_eq!(c[1].cat_freqs[0], vec![0.0, 1.0]);

        let dup = Partition::new(vec![0, 1, 1, 1], 2).unwrap();
        let single = compute_centers(&ds, &dup).unwrap();
        assert_eq!(single[0].numeric_means, vec![0.0]);
        assert_eq!(single[0].cat_freqs[0], vec![1.0, 0.0]);

        let empty = Partition::new(vec![0, 0, 0, 0], 2).unwrap();
        assert!(compute_centers(&ds, &empty).is_err());
    }

    #[test]
    fn distance_examples() {
        let ds = Dataset::from_columns(
            vec![],
            vec![
                ("A".into(), strings(&["a", "a", "a", "b"])),
                ("B".into(), strings(&["x", "x", "y", "y"])),
            ],
            None,
        )
        .unwrap();
        let model = build_model(&ds, 4).unwrap();
        let half = ClusterCenter {
            numeric_means: vec![],
            cat_freqs: vec![vec![0.5, 0.5], vec![1.0, 0.0]],
        };
        // Row 0 is (a, x): Ω_A = 0.5 · δ(b, a) = 1/3; Ω_B = 0.
        let d = point_center_distance(&ds, &model, 0, &half, NumericWeighting::Squared);
        assert!((d - 1.0 / 9.0).abs() < 1e-15);

        let own = ClusterCenter {
            numeric_means: vec![],
            cat_freqs: vec![vec![1.0, 0.0], vec![1.0, 0.0]],
        };
        assert_eq!(
            point_center_distance(&ds, &model, 0, &own, NumericWeighting::Squared),
            0.0
        );

        let (ds, model) = mixed(vec![0.0, 1.0, 2.0, 3.0], &["a", "a", "b", "b"]);
        let c = ClusterCenter {
            numeric_means: vec![ds.numeric_column(0)[2]],
            cat_freqs: vec![vec![0.0, 1.0]],
        };
        assert_eq!(
            point_center_distance(&ds, &model, 2, &c, NumericWeighting::Squared),
            0.0
        );
    }

    #[test]
    fn weighting_variants() {
        assert_eq!(numeric_term(0.5, 2.0, NumericWeighting::Squared), 1.0);
        assert_eq!(numeric_term(0.5, 2.0, NumericWeighting::Linear), 2.0);
    }

    #[test]
    fn fixed_point_converges_in_one_sweep() {
        let (ds, model) = mixed(vec![0.0, 0.1, 5.0, 5.1], &["a", "a", "b", "b"]);
        let init = Partition::new(vec![0, 0, 1, 1], 2).unwrap();
        let r = iterate(&ds, &model, &init, &KmcmdConfig::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
        assert_eq!(r.partition, init);
    }

    #[test]
    fn single_cluster() {
        let (ds, model) = mixed(vec![0.0, 1.0, 3.0], &["a", "b", "b"]);
        let r = iterate(
            &ds,
            &model,
            &Partition::new(vec![0; 3], 1).unwrap(),
            &KmcmdConfig::default(),
        )
        .unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.partition.labels(), &[0, 0, 0]);
    }

    #[test]
    fn parameter_errors() {
        let (ds, model) = mixed(vec![0.0, 1.0], &["a", "b"]);
        let r = iterate(
            &ds,
            &model,
            &Partition::new(vec![0, 1], 3).unwrap(),
            &KmcmdConfig::default(),
        );
        assert!(matches!(r, Err(Error::Parameter(_))));
        assert!(Partition::new(vec![0, 3], 2).is_err());
        let r = iterate(
            &ds,
            &model,
            &Partition::new(vec![0, 0, 1], 2).unwrap(),
            &KmcmdConfig::default(),
        );
        assert!(matches!(r, Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn empty_clusters_are_refilled() {
        let (ds, model) = mixed(vec![0.0, 0.2, 0.4, 9.0, 10.0], &["a", "a", "a", "b", "b"]);
        let r = iterate(
            &ds,
            &model,
            &Partition::new(vec![0; 5], 2).unwrap(),
            &KmcmdConfig::default(),
        )
        .unwrap();
        assert!(r.partition.is_complete());
        assert!(r.repairs >= 1);
        assert_eq!(r.partition.labels(), &[0, 0, 0, 1, 1]);
    }

    /// Two blobs far apart: from any split with both clusters non-empty the
    /// iteration ends at the blob partition, and every point is then nearer
    /// its own center than the other.
    #[test]
    fn separated_blobs() {
        let nums = vec![0.0, 0.05, 0.1, 0.08, 10.0, 10.02, 10.1, 9.95];
        let (ds, model) = mixed(nums, &["a", "a", "a", "a", "b", "b", "b", "b"]);
        for mask in 1u32..255 {
            let labels: Vec<usize> = (0..8).map(|i| ((mask >> i) & 1) as usize).collect();
            let init = Partition::new(labels, 2).unwrap();
            let r = iterate(&ds, &model, &init, &KmcmdConfig::default()).unwrap();
            let l = r.partition.labels();
            assert!(l[..4].iter().all(|&x| x == l[0]) && l[4..].iter().all(|&x| x == l[4]));
            assert_ne!(l[0], l[4]);
            for i in 0..8 {
                let own = point_center_distance(
                    &ds,
                    &model,
                    i,
                    &r.centers[l[i]],
                    NumericWeighting::Squared,
                );
                let other = point_center_distance(
                    &ds,
                    &model,
                    i,
                    &r.centers[1 - l[i]],
                    NumericWeighting::Squared,
                );
                assert!(own <= other);
            }
        }
    }

    fn mixed_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<u32>, Vec<u32>, Vec<usize>, usize)>
    {
        (4usize..40, 2usize..5).prop_flat_map(|(n, k)| {
            (
                proptest::collection::vec(-5.0f64..5.0, n),
                proptest::collection::vec(0u32..4, n),
                proptest::collection::vec(0u32..3, n),
                proptest::collection::vec(0usize..k, n),
                Just(k),
            )
        })
    }

    proptest! {
        #[test]
        fn sweeps_never_increase_cost((nums, c1, c2, init, k) in mixed_strategy()) {
            let ds = Dataset::from_columns(
                vec![("x".into(), nums)],
                vec![
                    ("a".into(), c1.iter().map(|v| v.to_string()).collect()),
                    ("b".into(), c2.iter().map(|v| v.to_string()).collect()),
                ],
                None,
            ).unwrap();
            let ds = normalize(&ds, Normalization::MinMax);
            let model = build_model(&ds, 4).unwrap();
            let init = Partition::new(init, k).unwrap();
            let r = iterate(&ds, &model, &init, &KmcmdConfig::default()).unwrap();
            prop_assert!(r.partition.is_complete());
            prop_assert!(r.iterations <= 100);
            for s in &r.sweeps {
                prop_assert!(s.after <= s.before + 1e-9 * s.before.abs().max(1.0));
            }
            if r.converged {
                prop_assert_eq!(r.sweeps.last().unwrap().moved, 0);
            }
            let again = iterate(&ds, &model, &init, &KmcmdConfig::default()).unwrap();
            prop_assert_eq!(r, again);
        }

        #[test]
        fn fast_distance_matches_direct((nums, c1, c2, init, k) in mixed_strategy()) {
            let ds = Dataset::from_columns(
                vec![("x".into(), nums)],
                vec![
                    ("a".into(), c1.iter().map(|v| v.to_string()).collect()),
                    ("b".into(), c2.iter().map(|v| v.to_string()).collect()),
                ],
                None,
            ).unwrap();
            let ds = normalize(&ds, Normalization::MinMax);
            let model = build_model(&ds, 4).unwrap();
            let ws = Workspace::new(&ds, &model, NumericWeighting::Squared).unwrap();
            let init = Partition::new(init, k).unwrap();
            let centers: Vec<ClusterCenter> = partial_centers(&ds, init.labels(), k).into_iter().flatten().collect();
            let tables = ws.tables(&centers);
            for i in 0..ds.n() {
                for (c, t) in centers.iter().zip(&tables) {
                    let direct = point_center_distance(&ds, &model, i, c, NumericWeighting::Squared);
                    prop_assert!((direct - ws.distance(i, t)).abs() < 1e-12);
                }
            }
        }
    }
}
