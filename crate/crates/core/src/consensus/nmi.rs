//! Normalized mutual information between two labelings.

use std::collections::HashMap;

use crate::error::{Error, Result};

use super::LabelMatrix;

fn sizes(labels: &[usize]) -> HashMap<usize, u64> {
    let mut m = HashMap::new();
    for &l in labels {
        *m.entry(l).or_insert(0u64) += 1;
    }
    m
}

/// Entropy of a list of cluster sizes, summed in sorted order so the result
/// does not depend on how clusters are numbered.
fn entropy(n: f64, mut counts: Vec<u64>) -> f64 {
    counts.sort_unstable();
    counts
        .iter()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Mutual information normalized by the geometric mean of the two entropies.
///
/// When either labeling has a single cluster the value is 1 if both do and
/// 0 otherwise.
pub fn nmi(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::param("cannot compare empty labelings"));
    }
    let sa = sizes(a);
    let sb = sizes(b);
    let mut cells: HashMap<(usize, usize), u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *cells.entry((x, y)).or_insert(0) += 1;
    }
    if sa.len() == 1 || sb.len() == 1 {
        return Ok(if sa.len() == 1 && sb.len() == 1 {
            1.0
        } else {
            0.0
        });
    }
    // A bijective contingency means the labelings are the same set partition.
    if cells.len() == sa.len() && cells.len() == sb.len() {
        return Ok(1.0);
    }
    let n = a.len() as f64;
    let mut terms: Vec<(u64, u64, u64)> = cells
        .iter()
        .map(|(&(x, y), &c)| {
            let (ca, cb) = (sa[&x], sb[&y]);
            (c, ca.min(cb), ca.max(cb))
        })
        .collect();
    // Sorting on (count, smaller margin, larger margin) keeps the sum
    // independent of both label numbering and argument order.
    terms.sort_unstable();
    let mi: f64 = terms
        .iter()
        .map(|&(c, ca, cb)| {
            let c = c as f64;
            (c / n) * (c * n / (ca as f64 * cb as f64)).ln()
        })
        .sum();
    let ha = entropy(n, sa.into_values().collect());
    let hb = entropy(n, sb.into_values().collect());
    Ok((mi / (ha * hb).sqrt()).clamp(0.0, 1.0))
}

/// Mean NMI of `candidate` against every run.
pub fn anmi(candidate: &[usize], lm: &LabelMatrix) -> Result<f64> {
    if lm.runs().is_empty() {
        return Err(Error::param("label matrix has no runs"));
    }
    let mut sum = 0.0;
    for run in lm.runs() {
        sum += nmi(candidate, run.labels())?;
    }
    Ok(sum / lm.runs().len() as f64)
}
