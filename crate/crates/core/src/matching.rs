//! Bipartite assignment: minimum/maximum weight perfect matching and
//! maximum weight partial matching with forbidden (absent) edges.
//!
//! Everything funnels into one square solver, the Hungarian method with
//! potentials (`O(n^3)`). Absent edges are skipped rather than priced with a
//! sentinel. After the optimum is found, the solution is moved to the
//! lexicographically smallest optimal assignment by walking alternating
//! cycles in the subgraph of tight (zero reduced cost) edges, so equal
//! inputs always give equal matchings.

use crate::error::{Error, Result};
use std::collections::BTreeMap;

/// Reduced-cost zero test, relative to the largest absolute weight.
const TIGHT_EPS: f64 = 1e-12;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BipartiteGraph {
    n_left: usize,
    n_right: usize,
    edges: BTreeMap<(usize, usize), f64>,
}

impl BipartiteGraph {
    pub fn new(n_left: usize, n_right: usize) -> Self {
        BipartiteGraph {
            n_left,
            n_right,
            edges: BTreeMap::new(),
        }
    }

    /// Dense constructor; `None` marks a forbidden edge.
    pub fn from_matrix(rows: &[Vec<Option<f64>>], n_right: usize) -> Self {
        let mut g = BipartiteGraph::new(rows.len(), n_right);
        for (l, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n_right, "ragged weight matrix");
            for (r, w) in row.iter().enumerate() {
                if let Some(w) = *w {
                    g.add_edge(l, r, w);
                }
            }
        }
        g
    }

    /// Inserts or replaces an edge.
    ///
    /// Panics on out-of-range nodes or a non-finite weight.
    pub fn add_edge(&mut self, left: usize, right: usize, weight: f64) {
        assert!(
            left < self.n_left && right < self.n_right,
            "edge ({left},{right}) out of range"
        );
        assert!(weight.is_finite(), "edge weights must be finite");
        self.edges.insert((left, right), weight);
    }

    pub fn n_left(&self) -> usize {
        self.n_left
    }

    pub fn n_right(&self) -> usize {
        self.n_right
    }

    pub fn weight(&self, left: usize, right: usize) -> Option<f64> {
        self.edges.get(&(left, right)).copied()
    }

    pub fn edges(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.edges.iter().map(|(&k, &w)| (k, w))
    }

    pub fn negated(&self) -> BipartiteGraph {
        BipartiteGraph {
            n_left: self.n_left,
            n_right: self.n_right,
            edges: self.edges.iter().map(|(&k, &w)| (k, -w)).collect(),
        }
    }

    fn matching_from(&self, mut pairs: Vec<(usize, usize)>) -> Matching {
        pairs.sort_unstable();
        let total = pairs
            .iter()
            .map(|&(l, r)| self.weight(l, r).expect("matched edge exists"))
            .sum();
        Matching { pairs, total }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Matching {
    /// `(left, right)` pairs sorted by left node.
    pub pairs: Vec<(usize, usize)>,
    pub total: f64,
}

impl Matching {
    pub fn right_of(&self, left: usize) -> Option<usize> {
        self.pairs.iter().find(|(l, _)| *l == left).map(|&(_, r)| r)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

pub fn min_weight_perfect_matching(g: &BipartiteGraph) -> Result<Matching> {
    if g.n_left != g.n_right {
        return Err(Error::NoPerfectMatching);
    }
    let n = g.n_left;
    let mut cost = vec![vec![None; n]; n];
    for ((l, r), w) in g.edges() {
        cost[l][r] = Some(w);
    }
    let assignment = assign_square(&cost).ok_or(Error::NoPerfectMatching)?;
    Ok(g.matching_from(assignment.into_iter().enumerate().collect()))
}

pub fn max_weight_perfect_matching(g: &BipartiteGraph) -> Result<Matching> {
    let m = min_weight_perfect_matching(&g.negated())?;
    Ok(g.matching_from(m.pairs))
}

/// Maximum weight matching, not necessarily perfect. Edges with weight
/// `<= 0` never improve the total and are never used.
pub fn max_weight_matching(g: &BipartiteGraph) -> Matching {
    let (nl, nr) = (g.n_left, g.n_right);
    let n = nl + nr;
    // Rows: left nodes, then one slack row per right node.
    // Columns: right nodes, then one slack column per left node.
    let mut cost = vec![vec![None; n]; n];
    for ((l, r), w) in g.edges() {
        if w > 0.0 {
            cost[l][r] = Some(-w);
        }
    }
    for l in 0..nl {
        cost[l][nr + l] = Some(0.0);
    }
    for r in 0..nr {
        cost[nl + r][r] = Some(0.0);
        for l in 0..nl {
            cost[nl + r][nr + l] = Some(0.0);
        }
    }
    let assignment = assign_square(&cost).expect("slack edges make the square problem feasible");
    let pairs = assignment
        .into_iter()
        .take(nl)
        .enumerate()
        .filter(|&(_, c)| c < nr)
        .collect();
    g.matching_from(pairs)
}

/// Optimal perfect matching on the sponsored block (`sense` chooses min or
/// max) together with an optimal partial matching on the organic block.
pub fn constrained_perfect_then_partial(
    sponsored: &BipartiteGraph,
    organic: &BipartiteGraph,
    sense: Sense,
) -> Result<(Matching, Matching)> {
    let perfect = match sense {
        Sense::Minimize => min_weight_perfect_matching(sponsored)?,
        Sense::Maximize => max_weight_perfect_matching(sponsored)?,
    };
    Ok((perfect, max_weight_matching(organic)))
}

/// Minimum cost perfect assignment on a square matrix, returning the column
/// of each row, or `None` when no perfect assignment exists.
fn assign_square(cost: &[Vec<Option<f64>>]) -> Option<Vec<usize>> {
    let n = cost.len();
    if n == 0 {
        return Some(Vec::new());
    }
    // 1-based arrays; index 0 is the virtual root column.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                if let Some(c) = cost[i0 - 1][j - 1] {
                    let cur = c - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            if j1 == 0 {
                return None;
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut col_of_row = vec![0usize; n];
    let mut row_of_col = vec![0usize; n];
    for j in 1..=n {
        col_of_row[row_of[j] - 1] = j - 1;
        row_of_col[j - 1] = row_of[j] - 1;
    }

    let scale = cost
        .iter()
        .flatten()
        .flatten()
        .fold(1.0f64, |m, c| m.max(c.abs()));
    let eps = TIGHT_EPS * scale;
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| match cost[i][j] {
                    Some(c) => col_of_row[i] == j || c - u[i + 1] - v[j + 1] <= eps,
                    None => false,
                })
                .collect()
        })
        .collect();

    lexicographic_refine(&adj, &mut col_of_row, &mut row_of_col);
    Some(col_of_row)
}

/// Rewrites a perfect matching of the tight graph `adj` into the
/// lexicographically smallest one (by column of row 0, then row 1, ...).
fn lexicographic_refine(adj: &[Vec<usize>], col_of_row: &mut [usize], row_of_col: &mut [usize]) {
    let n = adj.len();
    for i in 0..n {
        for &j in &adj[i] {
            if j >= col_of_row[i] {
                break;
            }
            if row_of_col[j] < i {
                continue;
            }
            let target = col_of_row[i];
            let displaced = row_of_col[j];
            let mut visited = vec![false; n];
            visited[j] = true;
            if reroute(
                adj,
                displaced,
                target,
                i,
                &mut visited,
                col_of_row,
                row_of_col,
            ) {
                col_of_row[i] = j;
                row_of_col[j] = i;
                break;
            }
        }
    }
}

/// Alternating-path search moving `row` onto some column so that `target`
/// ends up reassigned; rows below `frozen` keep their columns.
fn reroute(
    adj: &[Vec<usize>],
    row: usize,
    target: usize,
    frozen: usize,
    visited: &mut [bool],
    col_of_row: &mut [usize],
    row_of_col: &mut [usize],
) -> bool {
    for &x in &adj[row] {
        if visited[x] || row_of_col[x] < frozen {
            continue;
        }
        visited[x] = true;
        let ok = x == target
            || reroute(
                adj,
                row_of_col[x],
                target,
                frozen,
                visited,
                col_of_row,
                row_of_col,
            );
        if ok {
            col_of_row[row] = x;
            row_of_col[x] = row;
            return true;
        }
    }
    false
}
