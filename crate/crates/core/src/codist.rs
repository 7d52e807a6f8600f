//! Data-driven distances between categorical values and significance
//! weights for numeric attributes.
//!
//! The distance between two values α and β of one attribute, with respect
//! to another attribute, is the best separation any subset w of the other
//! attribute's values achieves: `max_w p(w|α) + p(~w|β) - 1`. The maximum is
//! reached by putting every value with `p(v|α) >= p(v|β)` into w, which
//! gives the closed form `Σ_v max(p(v|α), p(v|β)) - 1`.

use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{discretize, Dataset, Discretization};
use crate::error::{Error, Result};

/// A column that can act as a distance target or as context: a categorical
/// attribute, or a numeric attribute through its binned codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AttrRef {
    Categorical(usize),
    Binned(usize),
}

fn column<'a>(ds: &'a Dataset, disc: &'a Discretization, a: AttrRef) -> (&'a [u32], usize) {
    match a {
        AttrRef::Categorical(t) => (ds.categorical_column(t), ds.cardinality(t)),
        AttrRef::Binned(t) => {
            let c = &disc.columns[t];
            (&c.codes, c.cardinality)
        }
    }
}

fn all_attrs(ds: &Dataset) -> impl Iterator<Item = AttrRef> {
    (0..ds.categorical_count())
        .map(AttrRef::Categorical)
        .chain((0..ds.numeric_count()).map(AttrRef::Binned))
}

/// Row counts of `target` values (rows) against `context` values (columns).
struct Contingency {
    cols: usize,
    counts: Vec<u64>,
    support: Vec<u64>,
}

impl Contingency {
    fn new(target: &[u32], xt: usize, context: &[u32], xc: usize) -> Self {
        let mut counts = vec![0u64; xt * xc];
        let mut support = vec![0u64; xt];
        for (&a, &b) in target.iter().zip(context) {
            counts[a as usize * xc + b as usize] += 1;
            support[a as usize] += 1;
        }
        Self {
            cols: xc,
            counts,
            support,
        }
    }

    /// Closed-form separation of `a` and `b`; `None` if either has no rows.
    fn separation(&self, a: usize, b: usize) -> Option<f64> {
        let (na, nb) = (self.support[a], self.support[b]);
        if na == 0 || nb == 0 {
            return None;
        }
        let ra = &self.counts[a * self.cols..(a + 1) * self.cols];
        let rb = &self.counts[b * self.cols..(b + 1) * self.cols];
        let (na, nb) = (na as f64, nb as f64);
        let sum: f64 = ra
            .iter()
            .zip(rb)
            .map(|(&ca, &cb)| (ca as f64 / na).max(cb as f64 / nb))
            .sum();
        Some((sum - 1.0).clamp(0.0, 1.0))
    }
}

/// Distance between values `a` and `b` of `attr_i` with respect to `attr_j`.
/// Values with no rows get distance 0.
pub fn delta_wrt(
    ds: &Dataset,
    disc: &Discretization,
    attr_i: AttrRef,
    a: u32,
    b: u32,
    attr_j: AttrRef,
) -> Result<f64> {
    if attr_i == attr_j {
        return Err(Error::Model(
            "context attribute equals target attribute".into(),
        ));
    }
    let (ti, xi) = column(ds, disc, attr_i);
    let (tj, xj) = column(ds, disc, attr_j);
    check_codes(a, b, xi)?;
    if a == b {
        return Ok(0.0);
    }
    let table = Contingency::new(ti, xi, tj, xj);
    Ok(table.separation(a as usize, b as usize).unwrap_or(0.0))
}

/// Mean of [`delta_wrt`] over every other attribute (categorical and binned
/// numeric).
pub fn delta(ds: &Dataset, disc: &Discretization, attr_i: AttrRef, a: u32, b: u32) -> Result<f64> {
    require_context(ds)?;
    let (_, xi) = column(ds, disc, attr_i);
    check_codes(a, b, xi)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for attr_j in all_attrs(ds).filter(|&j| j != attr_i) {
        sum += delta_wrt(ds, disc, attr_i, a, b, attr_j)?;
        count += 1;
    }
    Ok(sum / count as f64)
}

/// Mean δ over all unordered pairs of non-empty bins of numeric column `t`.
pub fn numeric_weight(ds: &Dataset, disc: &Discretization, t: usize) -> Result<f64> {
    require_context(ds)?;
    let matrix = delta_matrix(ds, disc, AttrRef::Binned(t));
    Ok(matrix.mean_off_diagonal())
}

fn check_codes(a: u32, b: u32, x: usize) -> Result<()> {
    if a as usize >= x || b as usize >= x {
        return Err(Error::param(format!(
            "value code out of range for alphabet of size {x}"
        )));
    }
    Ok(())
}

fn require_context(ds: &Dataset) -> Result<()> {
    if ds.attribute_count() < 2 {
        return Err(Error::Model(
            "value distances need at least two attributes".into(),
        ));
    }
    Ok(())
}

/// Symmetric value-distance matrix of one attribute, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaMatrix {
    size: usize,
    values: Vec<f64>,
    /// Codes that never occur; their rows and columns are zero.
    zero_support: Vec<u32>,
}

impl DeltaMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.size + b]
    }

    pub fn row(&self, a: usize) -> &[f64] {
        &self.values[a * self.size..(a + 1) * self.size]
    }

    pub fn zero_support(&self) -> &[u32] {
        &self.zero_support
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.size).map(|a| self.row(a).to_vec()).collect()
    }

    fn mean_off_diagonal(&self) -> f64 {
        let x = self.size;
        if x < 2 {
            return 0.0;
        }
        let mut sum = 0.0;
        for a in 0..x {
            for b in a + 1..x {
                sum += self.get(a, b);
            }
        }
        sum / (x * (x - 1) / 2) as f64
    }
}

fn delta_matrix(ds: &Dataset, disc: &Discretization, target: AttrRef) -> DeltaMatrix {
    let (codes, x) = column(ds, disc, target);
    let tables: Vec<Contingency> = all_attrs(ds)
        .filter(|&j| j != target)
        .map(|j| {
            let (cj, xj) = column(ds, disc, j);
            Contingency::new(codes, x, cj, xj)
        })
        .collect();
    let m = tables.len() as f64;
    let mut values = vec![0.0; x * x];
    let zero_support: Vec<u32> = match tables.first() {
        Some(t) => (0..x)
            .filter(|&a| t.support[a] == 0)
            .map(|a| a as u32)
            .collect(),
        None => Vec::new(),
    };
    for a in 0..x {
        for b in a + 1..x {
            let mut sum = 0.0;
            for table in &tables {
                sum += table.separation(a, b).unwrap_or(0.0);
            }
            let d = if m > 0.0 { sum / m } else { 0.0 };
            values[a * x + b] = d;
            values[b * x + a] = d;
        }
    }
    DeltaMatrix {
        size: x,
        values,
        zero_support,
    }
}

/// Everything the clustering distance needs from the data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceModel {
    /// One matrix per categorical attribute.
    pub delta: Vec<DeltaMatrix>,
    /// One weight per numeric attribute.
    pub weights: Vec<f64>,
    pub discretization: Discretization,
}

impl DistanceModel {
    /// Value codes that never occur, as `(categorical attribute, code)`.
    pub fn zero_support(&self) -> Vec<(usize, u32)> {
        self.delta
            .iter()
            .enumerate()
            .flat_map(|(t, m)| m.zero_support.iter().map(move |&c| (t, c)))
            .collect()
    }
}

/// Discretize numeric columns into `bins` intervals and build the model.
pub fn build_model(ds: &Dataset, bins: usize) -> Result<DistanceModel> {
    let disc = discretize(ds, bins)?;
    build_model_with(ds, disc)
}

pub fn build_model_with(ds: &Dataset, disc: Discretization) -> Result<DistanceModel> {
    require_context(ds)?;
    if disc.columns.len() != ds.numeric_count() {
        return Err(Error::LengthMismatch {
            expected: ds.numeric_count(),
            found: disc.columns.len(),
        });
    }
    let delta = (0..ds.categorical_count())
        .into_par_iter()
        .map(|t| delta_matrix(ds, &disc, AttrRef::Categorical(t)))
        .collect();
    let weights = (0..ds.numeric_count())
        .into_par_iter()
        .map(|t| delta_matrix(ds, &disc, AttrRef::Binned(t)).mean_off_diagonal())
        .collect();
    Ok(DistanceModel {
        delta,
        weights,
        discretization: disc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{normalize, Normalization};
    use proptest::prelude::*;

    fn cat_ds(cols: &[&[&str]]) -> Dataset {
        let categorical = cols
            .iter()
            .enumerate()
            .map(|(i, c)| (format!("c{i}"), c.iter().map(|s| s.to_string()).collect()))
            .collect();
        Dataset::from_columns(vec![], categorical, None).unwrap()
    }

    fn empty_disc() -> Discretization {
        Discretization { columns: vec![] }
    }

    /// Exhaustive search over every subset of the context alphabet.
    fn subset_oracle(target: &[u32], context: &[u32], xc: usize, a: u32, b: u32) -> f64 {
        let na = target.iter().filter(|&&v| v == a).count() as f64;
        let nb = target.iter().filter(|&&v| v == b).count() as f64;
        if na == 0.0 || nb == 0.0 {
            return 0.0;
        }
        let mut best = f64::NEG_INFINITY;
        for mask in 0u32..(1 << xc) {
            let mut in_a = 0.0;
            let mut out_b = 0.0;
            for (&t, &c) in target.iter().zip(context) {
                let inside = mask & (1 << c) != 0;
                if t == a && inside {
                    in_a += 1.0;
                }
                if t == b && !inside {
                    out_b += 1.0;
                }
            }
            best = best.max(in_a / na + out_b / nb - 1.0);
        }
        best
    }

    #[test]
    fn four_row_example() {
        let ds = cat_ds(&[&["a", "a", "a", "b"], &["x", "x", "y", "y"]]);
        let disc = empty_disc();
        let d = delta_wrt(
            &ds,
            &disc,
            AttrRef::Categorical(0),
            0,
            1,
            AttrRef::Categorical(1),
        )
        .unwrap();
        let oracle = subset_oracle(ds.categorical_column(0), ds.categorical_column(1), 2, 0, 1);
        assert!((d - oracle).abs() < 1e-15);
        assert!((d - 2.0 / 3.0).abs() < 1e-15);
        assert!(
            (delta(&ds, &disc, AttrRef::Categorical(0), 0, 1).unwrap() - 2.0 / 3.0).abs() < 1e-15
        );
        assert_eq!(
            delta(&ds, &disc, AttrRef::Categorical(0), 1, 0).unwrap(),
            delta(&ds, &disc, AttrRef::Categorical(0), 0, 1).unwrap()
        );
        assert_eq!(
            delta(&ds, &disc, AttrRef::Categorical(0), 1, 1).unwrap(),
            0.0
        );

        let model = build_model(&ds, 4).unwrap();
        let m = model.delta[0].to_rows();
        assert_eq!(m[0][0], 0.0);
        assert!((m[0][1] - 2.0 / 3.0).abs() < 1e-15 && m[0][1] == m[1][0]);
    }

    #[test]
    fn identical_and_disjoint_conditionals() {
        let ds = cat_ds(&[&["a", "b", "a", "b"], &["x", "x", "y", "y"]]);
        let disc = empty_disc();
        assert_eq!(
            delta_wrt(
                &ds,
                &disc,
                AttrRef::Categorical(0),
                0,
                1,
                AttrRef::Categorical(1)
            )
            .unwrap(),
            0.0
        );
        let ds = cat_ds(&[&["a", "a", "b", "b"], &["x", "x", "y", "z"]]);
        assert_eq!(
            delta_wrt(
                &ds,
                &disc,
                AttrRef::Categorical(0),
                0,
                1,
                AttrRef::Categorical(1)
            )
            .unwrap(),
            1.0
        );
    }

    #[test]
    fn single_attribute_is_a_model_error() {
        let ds = cat_ds(&[&["a", "b"]]);
        assert!(matches!(build_model(&ds, 4), Err(Error::Model(_))));
        assert!(matches!(
            delta(&ds, &empty_disc(), AttrRef::Categorical(0), 0, 1),
            Err(Error::Model(_))
        ));
    }

    #[test]
    fn numeric_weights() {
        // Constant column: one bin, no pairs.
        let ds = Dataset::from_columns(
            vec![("x".into(), vec![2.0; 4])],
            vec![(
                "c".into(),
                ["a", "b", "a", "b"].iter().map(|s| s.to_string()).collect(),
            )],
            None,
        )
        .unwrap();
        let ds = normalize(&ds, Normalization::MinMax);
        assert_eq!(build_model(&ds, 4).unwrap().weights, vec![0.0]);

        // Two bins perfectly predicted by the categorical column.
        let ds = Dataset::from_columns(
            vec![("x".into(), vec![0.0, 0.0, 1.0, 1.0])],
            vec![(
                "c".into(),
                ["a", "a", "b", "b"].iter().map(|s| s.to_string()).collect(),
            )],
            None,
        )
        .unwrap();
        let ds = normalize(&ds, Normalization::MinMax);
        let model = build_model(&ds, 4).unwrap();
        assert_eq!(model.weights, vec![1.0]);
        assert_eq!(numeric_weight(&ds, &model.discretization, 0).unwrap(), 1.0);
        assert_eq!(model.delta.len(), 1);
        assert_eq!(model.delta[0].get(0, 1), 1.0);
    }

    #[test]
    fn weight_is_mean_of_bin_pairs() {
        // Conditionals over (p, q, r, s):
        //   bin 0: (0.2, 0.2, 0.2, 0.4)
        //   bin 1: (0.4, 0.2, 0.2, 0.2)
        //   bin 2: (0.8, 0.0, 0.0, 0.2)
        let bins: Vec<f64> = [vec![0.0; 5], vec![0.5; 5], vec![1.0; 5]].concat();
        let ctx = [
            "p", "q", "r", "s", "s", // bin 0
            "p", "p", "q", "r", "s", // bin 1
            "p", "p", "p", "p", "s", // bin 2
        ];
        let ds = Dataset::from_columns(
            vec![("x".into(), bins)],
            vec![("c".into(), ctx.iter().map(|s| s.to_string()).collect())],
            None,
        )
        .unwrap();
        let ds = normalize(&ds, Normalization::MinMax);
        let model = build_model(&ds, 3).unwrap();
        let disc = &model.discretization;
        let mut pairs = Vec::new();
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            let o = subset_oracle(&disc.columns[0].codes, ds.categorical_column(0), 4, a, b);
            pairs.push(o);
        }
        let expected = pairs.iter().sum::<f64>() / 3.0;
        assert!((model.weights[0] - expected).abs() < 1e-12);
        let mut sorted = pairs.clone();
        sorted.sort_by(f64::total_cmp);
        assert!((sorted[0] - 0.2).abs() < 1e-12);
        assert!((sorted[1] - 0.4).abs() < 1e-12);
        assert!((sorted[2] - 0.6).abs() < 1e-12);
        assert!((model.weights[0] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn mixed_structure() {
        let ds = Dataset::from_columns(
            vec![("x".into(), vec![0.0, 0.3, 0.6, 1.0])],
            vec![(
                "c".into(),
                ["a", "a", "b", "b"].iter().map(|s| s.to_string()).collect(),
            )],
            None,
        )
        .unwrap();
        let model = build_model(&normalize(&ds, Normalization::MinMax), 4).unwrap();
        assert_eq!(model.delta.len(), 1);
        assert_eq!(model.weights.len(), 1);
    }

    fn dataset_strategy() -> impl Strategy<Value = (Vec<Vec<u32>>, Vec<usize>)> {
        (2usize..=4, 1usize..=50).prop_flat_map(|(m, n)| {
            proptest::collection::vec(1usize..=12, m).prop_flat_map(move |alphabets| {
                let cols: Vec<_> = alphabets
                    .iter()
                    .map(|&x| proptest::collection::vec(0u32..x as u32, n))
                    .collect();
                (cols, Just(alphabets))
            })
        })
    }

    fn to_dataset(cols: &[Vec<u32>]) -> Dataset {
        let categorical = cols
            .iter()
            .enumerate()
            .map(|(i, c)| {
                (
                    format!("c{i}"),
                    c.iter().map(|v| format!("v{v:02}")).collect(),
                )
            })
            .collect();
        Dataset::from_columns(vec![], categorical, None).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn closed_form_matches_subset_search((cols, _) in dataset_strategy()) {
            let ds = to_dataset(&cols);
            let disc = empty_disc();
            for i in 0..ds.categorical_count() {
                for j in 0..ds.categorical_count() {
                    if i == j { continue; }
                    let xi = ds.cardinality(i) as u32;
                    let xj = ds.cardinality(j);
                    for a in 0..xi {
                        for b in 0..xi {
                            let got = delta_wrt(&ds, &disc, AttrRef::Categorical(i), a, b, AttrRef::Categorical(j)).unwrap();
                            let want = if a == b { 0.0 } else {
                                subset_oracle(ds.categorical_column(i), ds.categorical_column(j), xj, a, b)
                            };
                            prop_assert!((got - want).abs() <= 1e-12, "{got} vs {want}");
                        }
                    }
                }
            }
        }

        #[test]
        fn model_matrices_are_valid((cols, _) in dataset_strategy()) {
            let ds = to_dataset(&cols);
            let model = build_model(&ds, 4).unwrap();
            for m in &model.delta {
                for a in 0..m.size() {
                    prop_assert_eq!(m.get(a, a), 0.0);
                    for b in 0..m.size() {
                        prop_assert_eq!(m.get(a, b), m.get(b, a));
                        prop_assert!((0.0..=1.0).contains(&m.get(a, b)));
                    }
                }
            }
        }

        #[test]
        fn model_ignores_row_order(
            (cols, _) in dataset_strategy(),
            nums in proptest::collection::vec(0.0f64..10.0, 50),
            seed in any::<u64>(),
        ) {
            let n = cols[0].len();
            let categorical = cols.iter().enumerate()
                .map(|(i, c)| (format!("c{i}"), c.iter().map(|v| v.to_string()).collect()))
                .collect();
            let ds = Dataset::from_columns(vec![("x".into(), nums[..n].to_vec())], categorical, None).unwrap();
            let ds = normalize(&ds, Normalization::MinMax);
            let mut order: Vec<usize> = (0..n).collect();
            let mut s = seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                order.swap(i, (s >> 33) as usize % (i + 1));
            }
            let permuted = ds.permute_rows(&order).unwrap();
            let a = build_model(&ds, 4).unwrap();
            let b = build_model(&permuted, 4).unwrap();
            prop_assert_eq!(a.weights, b.weights);
            prop_assert_eq!(a.delta, b.delta);
        }
    }
}
