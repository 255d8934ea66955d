//! Maximum-weight one-to-one assignment (Hungarian method, O(n^3)).

/// Best assignment of rows to columns of a rectangular weight matrix.
///
/// Returns, for every row, the matched column (or `None` when the row is
/// left unmatched because there are more rows than columns). Every row has
/// the same number of columns. Weights must be finite.
pub fn max_weight_assignment(weights: &[Vec<f64>]) -> Vec<Option<usize>> {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return vec![None; rows];
    }
    let n = rows.max(cols);
    // minimise negated weight on the zero-padded square matrix
    let cost = |i: usize, j: usize| -> f64 {
        if i < rows && j < cols {
            -weights[i][j]
        } else {
            0.0
        }
    };

    // potentials and matching are 1-based; index 0 is the virtual start
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
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

    let mut out = vec![None; rows];
    for (j, &i) in p.iter().enumerate().skip(1) {
        if i >= 1 && i <= rows && j <= cols {
            out[i - 1] = Some(j - 1);
        }
    }
    out
}

/// Total weight of an assignment, summed in row order.
pub fn assignment_mass(weights: &[Vec<f64>], assignment: &[Option<usize>]) -> f64 {
    assignment
        .iter()
        .enumerate()
        .filter_map(|(i, j)| j.map(|j| weights[i][j]))
        .sum()
}

/// Exhaustive maximum over all injective row/column matchings, summed in
/// row order. Only for small matrices.
pub fn brute_force_max(weights: &[Vec<f64>]) -> f64 {
    fn go(weights: &[Vec<f64>], row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
        if row == weights.len() {
            if acc > *best {
                *best = acc;
            }
            return;
        }
        let rows_left = weights.len() - row;
        let free = used.iter().filter(|u| !**u).count();
        // a row may stay unmatched only when columns run short
        if rows_left > free {
            go(weights, row + 1, used, acc, best);
        }
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                go(weights, row + 1, used, acc + weights[row][j], best);
                used[j] = false;
            }
        }
    }
    let cols = weights.first().map_or(0, Vec::len);
    let mut best = 0.0;
    go(weights, 0, &mut vec![false; cols], 0.0, &mut best);
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_example() {
        let m = vec![vec![0.9, 0.2], vec![0.3, 0.8]];
        let a = max_weight_assignment(&m);
        assert_eq!(a, vec![Some(0), Some(1)]);
        assert!((assignment_mass(&m, &a) - 1.7).abs() < 1e-12);
    }

    #[test]
    fn rectangular_matrices() {
        let wide = vec![vec![0.1, 0.7, 0.3]];
        assert_eq!(max_weight_assignment(&wide), vec![Some(1)]);
        let tall = vec![vec![0.1], vec![0.7], vec![0.3]];
        assert_eq!(max_weight_assignment(&tall), vec![None, Some(0), None]);
        assert_eq!(brute_force_max(&tall), 0.7);
    }

    #[test]
    fn prefers_global_optimum_over_greedy() {
        // greedy takes 0.9 then 0.1; optimum is 0.8 + 0.8
        let m = vec![vec![0.9, 0.8], vec![0.8, 0.1]];
        let a = max_weight_assignment(&m);
        assert!((assignment_mass(&m, &a) - 1.6).abs() < 1e-12);
    }
}
