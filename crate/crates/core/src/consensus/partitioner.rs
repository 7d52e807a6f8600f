//! Deterministic balanced k-way hypergraph partitioning.
//!
//! Vertices carry integer weights. A hyperedge is cut when its pins lie in
//! more than one part, and the objective is the total weight of cut edges.
//! Every part's weight must stay within bounds derived from a balance
//! factor. When vertices are splittable, a vertex of weight w stands for w
//! interchangeable unit vertices and may be spread over several parts.
//!
//! The solver grows parts greedily from seed vertices, then refines with
//! Fiduccia-Mattheyses passes: each pass moves every vertex at most once,
//! always taking the best feasible move even when it worsens the cut, and
//! finally rolls back to the best prefix of moves. Several starts are tried
//! and the lowest cut wins. All ties go to the lowest vertex, part and start
//! index, so callers control tie-breaking through vertex order.
//!
//! Instances small enough to enumerate are solved exactly instead.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Hypergraph {
    vertex_weight: Vec<u64>,
    edges: Vec<Vec<usize>>,
    edge_weight: Vec<f64>,
    incidence: Vec<Vec<usize>>,
}

impl Hypergraph {
    pub fn new(
        vertex_weight: Vec<u64>,
        edges: Vec<Vec<usize>>,
        edge_weight: Vec<f64>,
    ) -> Result<Self> {
        if edges.len() != edge_weight.len() {
            return Err(Error::LengthMismatch {
                expected: edges.len(),
                found: edge_weight.len(),
            });
        }
        let v = vertex_weight.len();
        let mut incidence = vec![Vec::new(); v];
        for (e, pins) in edges.iter().enumerate() {
            for &p in pins {
                if p >= v {
                    return Err(Error::param(format!(
                        "edge {e} references missing vertex {p}"
                    )));
                }
                incidence[p].push(e);
            }
        }
        if edge_weight.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::param("edge weights must be finite and non-negative"));
        }
        Ok(Self {
            vertex_weight,
            edges,
            edge_weight,
            incidence,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_weight.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn total_weight(&self) -> u64 {
        self.vertex_weight.iter().sum()
    }

    pub fn vertex_weight(&self, v: usize) -> u64 {
        self.vertex_weight[v]
    }

    pub fn edge(&self, e: usize) -> &[usize] {
        &self.edges[e]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionConfig {
    /// Largest allowed ratio between a part's weight and the average.
    pub balance: f64,
    /// Refinement passes per start.
    pub passes: usize,
    /// Number of greedy starts.
    pub starts: usize,
    /// Moves without improvement after which a pass stops early.
    pub patience: usize,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self {
            balance: 1.2,
            passes: 3,
            starts: 4,
            patience: 64,
        }
    }
}

/// Inclusive part-weight bounds for total weight `total` split `k` ways.
pub fn balance_bounds(total: u64, k: usize, balance: f64) -> (u64, u64) {
    let avg = total as f64 / k as f64;
    let k64 = k as u64;
    let upper = ((balance * avg + 1e-9).floor() as u64).max(total.div_ceil(k64));
    let lower = ((avg / balance - 1e-9).ceil() as u64).min(total / k64);
    (lower, upper)
}

/// Weight of every vertex in every part (`counts[v * k + p]`).
#[derive(Debug, Clone, PartialEq)]
pub struct HyperPartition {
    pub k: usize,
    pub counts: Vec<u64>,
    pub cut: f64,
}

impl HyperPartition {
    pub fn count(&self, v: usize, p: usize) -> u64 {
        self.counts[v * self.k + p]
    }

    pub fn part_weights(&self) -> Vec<u64> {
        let mut w = vec![0; self.k];
        for (i, c) in self.counts.iter().enumerate() {
            w[i % self.k] += c;
        }
        w
    }
}

/// Cut weight of an arbitrary assignment.
pub fn cut_weight(h: &Hypergraph, k: usize, counts: &[u64]) -> f64 {
    let mut cut = 0.0;
    for (e, pins) in h.edges.iter().enumerate() {
        let parts = (0..k)
            .filter(|&p| pins.iter().any(|&v| counts[v * k + p] > 0))
            .count();
        if parts >= 2 {
            cut += h.edge_weight[e];
        }
    }
    cut
}

/// Gain ordered by `total_cmp` so it can live in a heap.
#[derive(Clone, Copy)]
struct Key(f64);

impl PartialEq for Key {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

struct State<'a> {
    h: &'a Hypergraph,
    k: usize,
    lower: u64,
    upper: u64,
    splittable: bool,
    counts: Vec<u64>,
    pins_in: Vec<u64>,
    spans: Vec<usize>,
    part_w: Vec<u64>,
    cut: f64,
}

#[derive(Clone, Copy)]
struct Move {
    v: usize,
    from: usize,
    to: usize,
    amount: u64,
    gain: f64,
}

impl<'a> State<'a> {
    fn new(
        h: &'a Hypergraph,
        k: usize,
        lower: u64,
        upper: u64,
        splittable: bool,
        counts: Vec<u64>,
    ) -> Self {
        let e = h.edge_count();
        let mut pins_in = vec![0u64; e * k];
        for (ei, pins) in h.edges.iter().enumerate() {
            for &v in pins {
                for p in 0..k {
                    pins_in[ei * k + p] += counts[v * k + p];
                }
            }
        }
        let spans: Vec<usize> = (0..e)
            .map(|ei| (0..k).filter(|&p| pins_in[ei * k + p] > 0).count())
            .collect();
        let mut part_w = vec![0u64; k];
        for (i, c) in counts.iter().enumerate() {
            part_w[i % k] += c;
        }
        let cut = spans
            .iter()
            .zip(&h.edge_weight)
            .filter(|(s, _)| **s >= 2)
            .map(|(_, w)| w)
            .sum();
        Self {
            h,
            k,
            lower,
            upper,
            splittable,
            counts,
            pins_in,
            spans,
            part_w,
            cut,
        }
    }

    fn gain(&self, v: usize, from: usize, to: usize, amount: u64) -> f64 {
        let k = self.k;
        let mut gain = 0.0;
        for &e in &self.h.incidence[v] {
            let span = self.spans[e];
            let after = span - usize::from(self.pins_in[e * k + from] == amount)
                + usize::from(self.pins_in[e * k + to] == 0);
            match (span >= 2, after >= 2) {
                (true, false) => gain += self.h.edge_weight[e],
                (false, true) => gain -= self.h.edge_weight[e],
                _ => {}
            }
        }
        gain
    }

    /// Largest amount of `v` that can go from `from` to `to` within bounds.
    fn feasible_amount(&self, v: usize, from: usize, to: usize) -> Option<u64> {
        let have = self.counts[v * self.k + from];
        let out = self.part_w[from].saturating_sub(self.lower);
        let room = self.upper.saturating_sub(self.part_w[to]);
        let full = have <= out && have <= room;
        if full {
            return Some(have);
        }
        if !self.splittable {
            return None;
        }
        let amount = have.min(out).min(room);
        (amount > 0).then_some(amount)
    }

    fn apply(&mut self, m: &Move) {
        let k = self.k;
        self.counts[m.v * k + m.from] -= m.amount;
        self.counts[m.v * k + m.to] += m.amount;
        self.part_w[m.from] -= m.amount;
        self.part_w[m.to] += m.amount;
        for &e in &self.h.incidence[m.v] {
            let was_from = self.pins_in[e * k + m.from];
            let was_to = self.pins_in[e * k + m.to];
            self.pins_in[e * k + m.from] = was_from - m.amount;
            self.pins_in[e * k + m.to] = was_to + m.amount;
            if was_from == m.amount {
                self.spans[e] -= 1;
            }
            if was_to == 0 {
                self.spans[e] += 1;
            }
        }
        self.cut -= m.gain;
    }

    fn undo(&mut self, m: &Move) {
        let back = Move {
            v: m.v,
            from: m.to,
            to: m.from,
            amount: m.amount,
            gain: -m.gain,
        };
        self.apply(&back);
    }

    fn best_move(&self, locked: &[bool]) -> Option<Move> {
        let k = self.k;
        let mut best: Option<Move> = None;
        for v in 0..self.h.vertex_count() {
            if locked[v] {
                continue;
            }
            for from in 0..k {
                if self.counts[v * k + from] == 0 {
                    continue;
                }
                for to in 0..k {
                    if to == from {
                        continue;
                    }
                    let Some(amount) = self.feasible_amount(v, from, to) else {
                        continue;
                    };
                    let gain = self.gain(v, from, to, amount);
                    if best.is_none_or(|b| gain > b.gain) {
                        best = Some(Move {
                            v,
                            from,
                            to,
                            amount,
                            gain,
                        });
                    }
                }
            }
        }
        best
    }

    /// One refinement pass; returns true if the cut improved.
    fn pass(&mut self, patience: usize) -> bool {
        let start_cut = self.cut;
        let mut locked = vec![false; self.h.vertex_count()];
        let mut moves: Vec<Move> = Vec::new();
        let mut best_cut = self.cut;
        let mut best_len = 0;
        while let Some(m) = self.best_move(&locked) {
            self.apply(&m);
            locked[m.v] = true;
            moves.push(m);
            if self.cut < best_cut - 1e-9 {
                best_cut = self.cut;
                best_len = moves.len();
            } else if moves.len() - best_len > patience {
                break;
            }
        }
        while moves.len() > best_len {
            let m = moves.pop().unwrap();
            self.undo(&m);
        }
        self.cut < start_cut - 1e-9
    }
}

/// Greedy growth: parts 0..k-1 are grown one at a time from a seed vertex by
/// repeatedly absorbing the vertex sharing the most edge weight with the
/// part; the last part takes whatever remains.
fn grow(h: &Hypergraph, k: usize, upper: u64, splittable: bool, start: usize) -> Vec<u64> {
    let nv = h.vertex_count();
    let total = h.total_weight();
    let mut remaining: Vec<u64> = h.vertex_weight.clone();
    let mut counts = vec![0u64; nv * k];
    // Edge weight each vertex shares with parts already built.
    let mut prior = vec![0.0f64; nv];
    let mut by_weight: Vec<usize> = (0..nv).collect();
    by_weight.sort_by_key(|&v| (Reverse(h.vertex_weight[v]), v));

    for p in 0..k.saturating_sub(1) {
        let target = total / k as u64 + u64::from((p as u64) < total % k as u64);
        let mut affinity = vec![0.0f64; nv];
        let mut present = vec![false; h.edge_count()];
        let mut heap: BinaryHeap<(Key, Reverse<usize>)> = BinaryHeap::new();
        let seed = if p == 0 {
            by_weight.get(start % nv.max(1)).copied()
        } else {
            by_weight
                .iter()
                .copied()
                .filter(|&v| remaining[v] > 0)
                .min_by(|&a, &b| prior[a].total_cmp(&prior[b]))
        };
        let Some(seed) = seed else { break };
        heap.push((Key(f64::INFINITY), Reverse(seed)));
        for v in 0..nv {
            if v != seed && remaining[v] > 0 {
                heap.push((Key(0.0), Reverse(v)));
            }
        }
        let mut weight = 0u64;
        while weight < target {
            let Some((Key(a), Reverse(v))) = heap.pop() else {
                break;
            };
            if remaining[v] == 0 || (v != seed && a != affinity[v]) {
                continue;
            }
            let want = target - weight;
            let take = if remaining[v] <= want {
                remaining[v]
            } else if splittable {
                want
            } else if weight + remaining[v] <= upper {
                remaining[v]
            } else {
                continue;
            };
            remaining[v] -= take;
            counts[v * k + p] += take;
            weight += take;
            for &e in &h.incidence[v] {
                if std::mem::replace(&mut present[e], true) {
                    continue;
                }
                let w = h.edge_weight[e];
                for &u in &h.edges[e] {
                    prior[u] += w;
                    if remaining[u] > 0 && u != v {
                        affinity[u] += w;
                        heap.push((Key(affinity[u]), Reverse(u)));
                    }
                }
            }
        }
    }
    for v in 0..nv {
        counts[v * k + k - 1] += remaining[v];
    }
    counts
}

/// Partition `h` into `k` parts.
/// Largest number of per-vertex choice combinations solved by enumeration.
const EXACT_LIMIT: f64 = (1u64 << 18) as f64;

struct Exhaustive<'a> {
    h: &'a Hypergraph,
    k: usize,
    lower: u64,
    upper: u64,
    splittable: bool,
    /// Part holding every pin so far, `k` once the edge is cut, `usize::MAX` if unseen.
    edge_state: Vec<usize>,
    load: Vec<u64>,
    pool: u64,
    /// Vertices in search order: heaviest first, then by index.
    order: Vec<usize>,
    /// Part of each vertex, `k` for a vertex spread over several parts.
    choice: Vec<usize>,
    best_cut: f64,
    best: Option<Vec<usize>>,
}

impl Exhaustive<'_> {
    fn feasible(&self) -> bool {
        let need: u64 = self
            .load
            .iter()
            .map(|&l| self.lower.saturating_sub(l))
            .sum();
        let room: u64 = self.load.iter().map(|&l| self.upper - l).sum();
        need <= self.pool && self.pool <= room
    }

    fn search(&mut self, depth: usize, cut: f64) {
        if cut >= self.best_cut {
            return;
        }
        if depth == self.order.len() {
            if self.feasible() {
                self.best_cut = cut;
                self.best = Some(self.choice.clone());
            }
            return;
        }
        let v = self.order[depth];
        let w = self.h.vertex_weight[v];
        let options = if self.splittable && w >= 2 {
            self.k + 1
        } else {
            self.k
        };
        for p in 0..options {
            if p < self.k && self.load[p] + w > self.upper {
                continue;
            }
            let saved: Vec<usize> = self.h.incidence[v]
                .iter()
                .map(|&e| self.edge_state[e])
                .collect();
            let mut added = 0.0;
            for &e in &self.h.incidence[v] {
                let s = self.edge_state[e];
                let next = if p == self.k || (s != usize::MAX && s != p) {
                    self.k
                } else {
                    p
                };
                if next == self.k && s != self.k {
                    added += self.h.edge_weight[e];
                }
                self.edge_state[e] = next;
            }
            if p < self.k {
                self.load[p] += w;
            } else {
                self.pool += w;
            }
            self.choice[v] = p;
            self.search(depth + 1, cut + added);
            if p < self.k {
                self.load[p] -= w;
            } else {
                self.pool -= w;
            }
            for (&e, s) in self.h.incidence[v].iter().zip(saved) {
                self.edge_state[e] = s;
            }
        }
    }

    /// Turn the best choice vector into counts, spreading split vertices
    /// first over parts below the lower bound, then up to the upper bound.
    fn counts(&self, choice: &[usize]) -> Vec<u64> {
        let k = self.k;
        let mut load = vec![0u64; k];
        let mut counts = vec![0u64; self.h.vertex_count() * k];
        for (v, &p) in choice.iter().enumerate() {
            if p < k {
                counts[v * k + p] = self.h.vertex_weight[v];
                load[p] += self.h.vertex_weight[v];
            }
        }
        let mut pool: u64 = choice
            .iter()
            .enumerate()
            .filter(|&(_, &p)| p == k)
            .map(|(v, _)| self.h.vertex_weight[v])
            .sum();
        let mut quota = vec![0u64; k];
        for p in 0..k {
            let q = self.lower.saturating_sub(load[p]).min(pool);
            quota[p] += q;
            pool -= q;
        }
        for p in 0..k {
            let q = (self.upper - load[p] - quota[p]).min(pool);
            quota[p] += q;
            pool -= q;
        }
        let mut p = 0;
        for (v, &c) in choice.iter().enumerate() {
            if c != k {
                continue;
            }
            let mut left = self.h.vertex_weight[v];
            while left > 0 {
                while quota[p] == 0 {
                    p += 1;
                }
                let take = left.min(quota[p]);
                counts[v * k + p] += take;
                quota[p] -= take;
                left -= take;
            }
        }
        counts
    }
}

/// Optimal partition by enumeration when the search space is small.
fn exact(h: &Hypergraph, k: usize, lower: u64, upper: u64, splittable: bool) -> Option<Vec<u64>> {
    let space: f64 = (0..h.vertex_count())
        .map(|v| if splittable && h.vertex_weight[v] >= 2 { k + 1 } else { k } as f64)
        .product();
    if space > EXACT_LIMIT {
        return None;
    }
    let mut order: Vec<usize> = (0..h.vertex_count()).collect();
    order.sort_by_key(|&v| Reverse(h.vertex_weight[v]));
    let mut s = Exhaustive {
        h,
        k,
        lower,
        upper,
        splittable,
        edge_state: vec![usize::MAX; h.edge_count()],
        load: vec![0; k],
        pool: 0,
        order,
        choice: vec![0; h.vertex_count()],
        best_cut: f64::INFINITY,
        best: None,
    };
    s.search(0, 0.0);
    let choice = s.best.take()?;
    Some(s.counts(&choice))
}

pub fn partition(
    h: &Hypergraph,
    k: usize,
    splittable: bool,
    cfg: &PartitionConfig,
) -> Result<HyperPartition> {
    if k == 0 {
        return Err(Error::param("part count must be positive"));
    }
    if cfg.balance.is_nan() || cfg.balance < 1.0 {
        return Err(Error::param(format!(
            "balance factor must be at least 1, got {}",
            cfg.balance
        )));
    }
    let total = h.total_weight();
    if total < k as u64 {
        return Err(Error::param(format!(
            "cannot split weight {total} into {k} non-empty parts"
        )));
    }
    let (lower, upper) = balance_bounds(total, k, cfg.balance);
    if let Some(counts) = exact(h, k, lower, upper, splittable) {
        return Ok(HyperPartition {
            k,
            cut: cut_weight(h, k, &counts),
            counts,
        });
    }
    let starts = cfg.starts.max(1).min(h.vertex_count().max(1));
    let mut best: Option<State> = None;
    for start in 0..starts {
        let counts = grow(h, k, upper, splittable, start);
        let mut state = State::new(h, k, lower, upper, splittable, counts);
        for _ in 0..cfg.passes {
            if !state.pass(cfg.patience) {
                break;
            }
        }
        let balanced = state.part_w.iter().all(|&w| w >= lower && w <= upper);
        let better = match &best {
            None => true,
            Some(b) => {
                let b_balanced = b.part_w.iter().all(|&w| w >= lower && w <= upper);
                (balanced && !b_balanced) || (balanced == b_balanced && state.cut < b.cut - 1e-9)
            }
        };
        if better {
            best = Some(state);
        }
    }
    let best = best.expect("at least one start");
    Ok(HyperPartition {
        k,
        cut: best.cut,
        counts: best.counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds() {
        assert_eq!(balance_bounds(10, 2, 1.2), (5, 6));
        assert_eq!(balance_bounds(1000, 2, 1.2), (417, 600));
        assert_eq!(balance_bounds(4, 4, 1.2), (1, 1));
        assert_eq!(balance_bounds(5, 2, 1.2), (2, 3));
        assert_eq!(balance_bounds(100, 3, 1.2), (28, 40));
    }

    #[test]
    fn two_cliques() {
        // Vertices 0..4 and 4..8 joined by many edges, one bridge.
        let mut edges = Vec::new();
        for half in [0usize, 4] {
            for a in 0..4 {
                for b in a + 1..4 {
                    edges.push(vec![half + a, half + b]);
                }
            }
        }
        edges.push(vec![3, 4]);
        let w = vec![1.0; edges.len()];
        let h = Hypergraph::new(vec![1; 8], edges, w).unwrap();
        let p = partition(&h, 2, false, &PartitionConfig::default()).unwrap();
        assert_eq!(p.cut, 1.0);
        assert_eq!(p.cut, cut_weight(&h, 2, &p.counts));
        assert_eq!(p.part_weights(), vec![4, 4]);
    }

    #[test]
    fn heavy_vertex_is_split_for_balance() {
        let h = Hypergraph::new(
            vec![7, 1, 1, 1],
            vec![vec![0, 1], vec![2, 3]],
            vec![1.0, 1.0],
        )
        .unwrap();
        let p = partition(&h, 2, true, &PartitionConfig::default()).unwrap();
        let w = p.part_weights();
        assert!(w.iter().all(|&x| (5..=6).contains(&x)), "{w:?}");
        assert_eq!(p.cut, cut_weight(&h, 2, &p.counts));
    }
}
