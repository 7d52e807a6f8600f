//! Maximum-weight perfect matching on a square integer matrix
//! (Hungarian method with row/column potentials).

/// Column assigned to each row, maximizing the total of `w[row][col]`.
pub fn max_weight_assignment(w: &[Vec<i64>]) -> Vec<usize> {
    let n = w.len();
    if n == 0 {
        return Vec::new();
    }
    let top = w.iter().flatten().copied().max().unwrap_or(0);
    // Minimize top - w with 1-based potentials; column 0 is a sentinel.
    let cost = |i: usize, j: usize| top - w[i - 1][j - 1];
    let inf = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut rows = vec![0usize; n];
    for j in 1..=n {
        rows[p[j] - 1] = j - 1;
    }
    rows
}

fn value(w: &[Vec<i64>], assign: &[usize]) -> i64 {
    assign.iter().enumerate().map(|(i, &j)| w[i][j]).sum()
}

/// Best total over the rows and columns not yet fixed.
fn residual_optimum(w: &[Vec<i64>], free_rows: &[usize], free_cols: &[usize]) -> i64 {
    let sub: Vec<Vec<i64>> = free_rows
        .iter()
        .map(|&i| free_cols.iter().map(|&j| w[i][j]).collect())
        .collect();
    let a = max_weight_assignment(&sub);
    value(&sub, &a)
}

/// Among all optimal assignments, the one whose column sequence (row 0
/// first) is lexicographically smallest.
pub fn lexicographic_optimal_assignment(w: &[Vec<i64>]) -> Vec<usize> {
    let n = w.len();
    let best = value(w, &max_weight_assignment(w));
    let mut fixed = Vec::with_capacity(n);
    let mut fixed_total = 0i64;
    let mut free_cols: Vec<usize> = (0..n).collect();
    for i in 0..n {
        let free_rows: Vec<usize> = (i + 1..n).collect();
        let chosen = free_cols
            .iter()
            .position(|&j| {
                let rest: Vec<usize> = free_cols.iter().copied().filter(|&c| c != j).collect();
                fixed_total + w[i][j] + residual_optimum(w, &free_rows, &rest) == best
            })
            .expect("some column completes an optimal assignment");
        let j = free_cols.remove(chosen);
        fixed_total += w[i][j];
        fixed.push(j);
    }
    fixed
}
