//! Exact minimum-cost bipartite assignment with a cost ceiling.
//!
//! [`solve`] takes a rectangular cost matrix and a `gate`: entries with
//! cost above the gate are ineligible. Among all matchings of maximum
//! cardinality over eligible entries it returns one of minimum total cost,
//! and among equal-cost optima the lexicographically smallest match list.
//! The result is therefore a pure function of the inputs, which keeps
//! every downstream consumer replayable.
//!
//! The core solver is the O(n^3) shortest-augmenting-path method on a
//! padded square matrix. Padding gives every row and column a dummy
//! partner priced so that dropping an eligible match is never worth it,
//! which yields maximum cardinality and cost optimality in one solve.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssignmentError {
    #[error("cost matrix is ragged: row {row} has {len} columns, expected {expected}")]
    Ragged { row: usize, len: usize, expected: usize },
    #[error("cost at ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
}

/// Outcome of one assignment solve. `matches` is sorted by row index,
/// `unmatched_rows` and `unmatched_cols` ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub matches: Vec<(usize, usize)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
}

impl Assignment {
    /// Total cost of the matched pairs, summed in row order.
    pub fn total_cost(&self, cost: &[Vec<f64>]) -> f64 {
        self.matches.iter().map(|&(r, c)| cost[r][c]).sum()
    }
}

/// Solves the gated assignment problem described in the module docs.
///
/// `gate` is a cost ceiling: an entry is eligible iff `cost[r][c] <= gate`.
/// Pass `f64::INFINITY` to make every entry eligible. Matrices with zero
/// rows or zero columns are valid and produce an empty match list.
pub fn solve(cost: &[Vec<f64>], gate: f64) -> Result<Assignment, AssignmentError> {
    let nrows = cost.len();
    let ncols = cost.first().map_or(0, Vec::len);
    for (row, r) in cost.iter().enumerate() {
        if r.len() != ncols {
            return Err(AssignmentError::Ragged { row, len: r.len(), expected: ncols });
        }
        for (col, &v) in r.iter().enumerate() {
            if !v.is_finite() {
                return Err(AssignmentError::NonFinite { row, col });
            }
        }
    }

    let all_rows: Vec<usize> = (0..nrows).collect();
    let all_cols: Vec<usize> = (0..ncols).collect();
    let base = gated_optimum(cost, gate, &all_rows, &all_cols);

    // Lexicographic refinement: fix rows in ascending order, choosing for
    // each the smallest column that still completes to a global optimum.
    // `witness` is one known-optimal completion of the current prefix; a
    // candidate equal to the witness column needs no verification solve.
    let mut witness = base.matches;
    let mut need = base.cardinality;
    let mut budget = base.total;
    let mut used = vec![false; ncols];
    let mut matches: Vec<(usize, usize)> = Vec::with_capacity(need);

    for r in 0..nrows {
        if need == 0 {
            break;
        }
        let witness_col = witness.iter().find(|&&(wr, _)| wr == r).map(|&(_, wc)| wc);
        let tail_rows: Vec<usize> = (r + 1..nrows).collect();
        let mut chosen = None;
        for j in 0..ncols {
            if used[j] || !eligible(cost[r][j], gate) {
                continue;
            }
            if witness_col == Some(j) {
                witness.retain(|&(wr, _)| wr != r);
                chosen = Some(j);
                break;
            }
            let free_cols: Vec<usize> =
                (0..ncols).filter(|&jj| !used[jj] && jj != j).collect();
            let sub = gated_optimum(cost, gate, &tail_rows, &free_cols);
            // With exactly representable costs this comparison is exact;
            // the tolerance only matters for near-tied continuous inputs.
            let fits = sub.cardinality + 1 == need
                && (cost[r][j] + sub.total - budget).abs() <= 1e-9 * (1.0 + budget.abs());
            if fits {
                witness = sub.matches;
                chosen = Some(j);
                break;
            }
        }
        if let Some(j) = chosen {
            used[j] = true;
            budget -= cost[r][j];
            need -= 1;
            matches.push((r, j));
        }
        // No eligible column completes to an optimum: every optimal
        // completion of the prefix leaves row r unmatched.
    }

    let matched_rows: Vec<usize> = matches.iter().map(|&(r, _)| r).collect();
    let unmatched_rows = (0..nrows).filter(|r| !matched_rows.contains(r)).collect();
    let unmatched_cols = (0..ncols).filter(|j| !used[*j]).collect();
    Ok(Assignment { matches, unmatched_rows, unmatched_cols })
}

fn eligible(cost: f64, gate: f64) -> bool {
    cost <= gate
}

struct GatedOptimum {
    cardinality: usize,
    total: f64,
    /// Matches in original indices, ascending row.
    matches: Vec<(usize, usize)>,
}

/// Maximum-cardinality, then minimum-cost matching over the eligible
/// entries of the `rows` x `cols` submatrix.
fn gated_optimum(cost: &[Vec<f64>], gate: f64, rows: &[usize], cols: &[usize]) -> GatedOptimum {
    let r = rows.len();
    let c = cols.len();
    if r == 0 || c == 0 {
        return GatedOptimum { cardinality: 0, total: 0.0, matches: Vec::new() };
    }

    // Safe big-M levels: `unmatch` beats any eligible-cost difference, and
    // `forbid` beats any matching that touches an ineligible entry.
    let mut abs_sum = 0.0;
    for &i in rows {
        for &j in cols {
            if eligible(cost[i][j], gate) {
                abs_sum += cost[i][j].abs();
            }
        }
    }
    let n = r + c;
    let unmatch = abs_sum + 1.0;
    let forbid = 2.0 * n as f64 * unmatch + 1.0;

    let mut padded = vec![vec![0.0f64; n]; n];
    for (ri, &i) in rows.iter().enumerate() {
        for (ci, &j) in cols.iter().enumerate() {
            padded[ri][ci] = if eligible(cost[i][j], gate) { cost[i][j] } else { forbid };
        }
        for ci in c..n {
            padded[ri][ci] = unmatch;
        }
    }
    for row in padded.iter_mut().take(n).skip(r) {
        for cell in row.iter_mut().take(c) {
            *cell = unmatch;
        }
    }

    let row_to_col = square_min_assignment(&padded);
    let mut matches = Vec::new();
    for (ri, &i) in rows.iter().enumerate() {
        let ci = row_to_col[ri];
        if ci < c && eligible(cost[i][cols[ci]], gate) {
            matches.push((i, cols[ci]));
        }
    }
    let total = matches.iter().map(|&(i, j)| cost[i][j]).sum();
    GatedOptimum { cardinality: matches.len(), total, matches }
}

/// Classic Hungarian method with row/column potentials on a square matrix.
/// Returns the column assigned to each row. Indices are 1-based internally
/// so column 0 can serve as the virtual start of each augmenting path.
fn square_min_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
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
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
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

    let mut row_to_col = vec![usize::MAX; n];
    for j in 1..=n {
        if p[j] != 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    /// Exhaustive reference: enumerate every partial matching and keep the
    /// best by (cardinality desc, total asc, match list lex asc).
    pub(crate) fn brute_force(cost: &[Vec<f64>], gate: f64) -> (usize, f64, Vec<(usize, usize)>) {
        let nrows = cost.len();
        let ncols = cost.first().map_or(0, Vec::len);
        let mut best: Option<(usize, f64, Vec<(usize, usize)>)> = None;
        let mut used = vec![false; ncols];
        let mut current: Vec<(usize, usize)> = Vec::new();

        fn rec(
            cost: &[Vec<f64>],
            gate: f64,
            r: usize,
            nrows: usize,
            ncols: usize,
            used: &mut Vec<bool>,
            current: &mut Vec<(usize, usize)>,
            total: f64,
            best: &mut Option<(usize, f64, Vec<(usize, usize)>)>,
        ) {
            if r == nrows {
                let candidate = (current.len(), total, current.clone());
                let better = match best {
                    None => true,
                    Some((bc, bt, bm)) => {
                        candidate.0 > *bc
                            || (candidate.0 == *bc && candidate.1 < *bt)
                            || (candidate.0 == *bc && candidate.1 == *bt && candidate.2 < *bm)
                    }
                };
                if better {
                    *best = Some(candidate);
                }
                return;
            }
            rec(cost, gate, r + 1, nrows, ncols, used, current, total, best);
            for j in 0..ncols {
                if !used[j] && cost[r][j] <= gate {
                    used[j] = true;
                    current.push((r, j));
                    rec(cost, gate, r + 1, nrows, ncols, used, current, total + cost[r][j], best);
                    current.pop();
                    used[j] = false;
                }
            }
        }

        rec(cost, gate, 0, nrows, ncols, &mut used, &mut current, 0.0, &mut best);
        best.unwrap_or((0, 0.0, Vec::new()))
    }

    /// Random cost on a dyadic grid so every sum is exact in f64 and the
    /// oracle comparison can demand bitwise equality.
    pub(crate) fn dyadic_cost(rng: &mut StdRng, rows: usize, cols: usize) -> Vec<Vec<f64>> {
        (0..rows)
            .map(|_| (0..cols).map(|_| rng.gen_range(0..=256) as f64 / 64.0).collect())
            .collect()
    }

    #[test]
    fn two_by_two_prefers_cross_assignment() {
        let cost = vec![vec![4.0, 1.0], vec![2.0, 3.0]];
        let a = solve(&cost, f64::INFINITY).unwrap();
        assert_eq!(a.matches, vec![(0, 1), (1, 0)]);
        assert_eq!(a.total_cost(&cost), 3.0);
        assert!(a.unmatched_rows.is_empty());
        assert!(a.unmatched_cols.is_empty());
    }

    #[test]
    fn gate_excludes_expensive_entries() {
        let cost = vec![vec![0.2, 0.9], vec![0.9, 0.25]];
        let a = solve(&cost, 0.5).unwrap();
        assert_eq!(a.matches, vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn gate_above_everything_yields_empty_matching() {
        let cost = vec![vec![0.9, 0.8], vec![0.7, 0.95]];
        let a = solve(&cost, 0.5).unwrap();
        assert!(a.matches.is_empty());
        assert_eq!(a.unmatched_rows, vec![0, 1]);
        assert_eq!(a.unmatched_cols, vec![0, 1]);
    }

    #[test]
    fn gate_boundary_is_inclusive() {
        let cost = vec![vec![0.5]];
        let a = solve(&cost, 0.5).unwrap();
        assert_eq!(a.matches, vec![(0, 0)]);
    }

    #[test]
    fn rectangular_single_row_picks_cheapest_column() {
        let cost = vec![vec![0.5, 0.4, 0.3]];
        let a = solve(&cost, f64::INFINITY).unwrap();
        assert_eq!(a.matches, vec![(0, 2)]);
        assert_eq!(a.unmatched_cols, vec![0, 1]);
    }

    #[test]
    fn empty_inputs_are_valid() {
        let a = solve(&[], f64::INFINITY).unwrap();
        assert!(a.matches.is_empty());
        let cost: Vec<Vec<f64>> = vec![vec![], vec![]];
        let a = solve(&cost, f64::INFINITY).unwrap();
        assert!(a.matches.is_empty());
        assert_eq!(a.unmatched_rows, vec![0, 1]);
        assert!(a.unmatched_cols.is_empty());
    }

    #[test]
    fn ragged_and_nan_inputs_are_rejected() {
        let ragged = vec![vec![1.0, 2.0], vec![1.0]];
        assert_eq!(
            solve(&ragged, f64::INFINITY),
            Err(AssignmentError::Ragged { row: 1, len: 1, expected: 2 })
        );
        let nan = vec![vec![1.0, f64::NAN]];
        assert_eq!(
            solve(&nan, f64::INFINITY),
            Err(AssignmentError::NonFinite { row: 0, col: 1 })
        );
    }

    #[test]
    fn uniform_ties_break_lexicographically() {
        let cost = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let a = solve(&cost, f64::INFINITY).unwrap();
        assert_eq!(a.matches, vec![(0, 0), (1, 1)]);

        // One column shared by two identical rows: the smaller row wins it.
        let cost = vec![vec![1.0], vec![1.0]];
        let a = solve(&cost, f64::INFINITY).unwrap();
        assert_eq!(a.matches, vec![(0, 0)]);
        assert_eq!(a.unmatched_rows, vec![1]);
    }

    #[test]
    fn matches_agree_with_brute_force_on_random_matrices() {
        let mut rng = StdRng::seed_from_u64(42);
        for case in 0..200 {
            let rows = rng.gen_range(0..=6);
            let cols = rng.gen_range(0..=6);
            let cost = dyadic_cost(&mut rng, rows, cols);
            let gate = if case % 3 == 0 { f64::INFINITY } else { rng.gen_range(0.5..4.0) };
            let a = solve(&cost, gate).unwrap();
            let (card, total, lex_matches) = brute_force(&cost, gate);
            assert_eq!(a.matches.len(), card, "cardinality mismatch on case {case}");
            assert_eq!(a.total_cost(&cost), total, "total mismatch on case {case}");
            assert_eq!(a.matches, lex_matches, "lex tie-break mismatch on case {case}");
            for &(r, c) in &a.matches {
                assert!(cost[r][c] <= gate);
            }
        }
    }

    #[test]
    fn row_permutation_permutes_matches() {
        // Continuous random costs: ties have measure zero, so the optimum
        // is unique and must follow the row relabeling.
        let mut rng = StdRng::seed_from_u64(9001);
        for _ in 0..50 {
            let n = rng.gen_range(2..=5);
            let cost: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| rng.gen_range(0.0..1.0)).collect())
                .collect();
            let a = solve(&cost, f64::INFINITY).unwrap();

            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                let j = rng.gen_range(0..=i);
                perm.swap(i, j);
            }
            let permuted: Vec<Vec<f64>> = perm.iter().map(|&i| cost[i].clone()).collect();
            let b = solve(&permuted, f64::INFINITY).unwrap();

            let mut expected: Vec<(usize, usize)> = a
                .matches
                .iter()
                .map(|&(r, c)| (perm.iter().position(|&p| p == r).unwrap(), c))
                .collect();
            expected.sort_unstable();
            assert_eq!(b.matches, expected);
        }
    }

    #[test]
    fn solve_is_deterministic() {
        let mut rng = StdRng::seed_from_u64(3);
        let cost = dyadic_cost(&mut rng, 5, 4);
        let a = solve(&cost, 2.0).unwrap();
        let b = solve(&cost, 2.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn output_indices_are_sorted_and_complete() {
        let mut rng = StdRng::seed_from_u64(17);
        for _ in 0..50 {
            let rows = rng.gen_range(1..=6);
            let cols = rng.gen_range(1..=6);
            let cost = dyadic_cost(&mut rng, rows, cols);
            let a = solve(&cost, 2.5).unwrap();
            let mut sorted = a.matches.clone();
            sorted.sort_unstable();
            assert_eq!(a.matches, sorted);
            let mut seen_rows: Vec<usize> = a.matches.iter().map(|&(r, _)| r).collect();
            seen_rows.extend(&a.unmatched_rows);
            seen_rows.sort_unstable();
            assert_eq!(seen_rows, (0..rows).collect::<Vec<_>>());
            let mut seen_cols: Vec<usize> = a.matches.iter().map(|&(_, c)| c).collect();
            seen_cols.extend(&a.unmatched_cols);
            seen_cols.sort_unstable();
            assert_eq!(seen_cols, (0..cols).collect::<Vec<_>>());
        }
    }
}
