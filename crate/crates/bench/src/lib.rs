//! Fixtures shared by the criterion benches.

use assort_core::generator::{generate, ConstraintRecipe, GeneratorConfig, ValidPattern};
use assort_core::matching::BipartiteGraph;
use assort_core::Instance;

/// A generated instance with `n_organic` organic products, `n_sponsored`
/// sponsored ones and `k` slots.
pub fn instance(
    n_organic: usize,
    n_sponsored: usize,
    k: usize,
    constraint: ConstraintRecipe,
) -> Instance {
    generate(&GeneratorConfig {
        seed: 17,
        n_organic,
        n_sponsored,
        k,
        revenue_range: [1.0, 20.0],
        weight_range: [0.05, 2.0],
        position_decay: 0.9,
        w0: 1.0,
        valid_pattern: ValidPattern::Random,
        constraint,
    })
    .expect("bench config is valid")
}

pub fn knapsack() -> ConstraintRecipe {
    ConstraintRecipe::Knapsack {
        cost_range: [0.5, 1.5],
        capacity_fraction: 0.3,
    }
}

pub fn partition() -> ConstraintRecipe {
    ConstraintRecipe::Partition { groups: 4, cap: 2 }
}

/// Dense `n x n` graph with deterministic pseudo-random weights.
pub fn dense_graph(n: usize) -> BipartiteGraph {
    let mut g = BipartiteGraph::new(n, n);
    let mut x: u64 = 0x9e37_79b9_7f4a_7c15;
    for i in 0..n {
        for j in 0..n {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            g.add_edge(i, j, (x % 10_000) as f64 / 100.0);
        }
    }
    g
}
