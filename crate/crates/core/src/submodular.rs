//! Maximization of the truncated surrogate `min{h(U), r}` under "at most one
//! element per organic slot" plus one more downward-closed constraint.
//!
//! The default maximizer is lazy greedy over the intersection of all
//! constraints. With two partition matroids (slots, product groups) greedy
//! is a 1/3-approximation; with the slot matroid alone it is 1/2. For the
//! knapsack case the result is the best of gain greedy, gain-per-cost greedy
//! and the best single element, with 1/3 reported as the guarantee.

use crate::error::{Error, Result};
use crate::model::{ConstraintFamily, PositionId, ProductId};
use crate::surrogate::{Element, ElementSet, EvalState, SurrogateEvaluator, SurrogateObjective};
use serde::Serialize;
use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

/// Largest ground set [`brute_force_maximize`] will enumerate.
pub const BRUTE_FORCE_LIMIT: usize = 20;

/// The constraint on top of the per-slot cap.
#[derive(Clone, Debug, PartialEq)]
pub enum SecondConstraint {
    None,
    /// Every element pays the cost of its product.
    Knapsack {
        cost: BTreeMap<ProductId, f64>,
        capacity: f64,
    },
    /// Every element counts against the cap of its product's group.
    PartitionMatroid {
        group_of: BTreeMap<ProductId, usize>,
        caps: Vec<usize>,
    },
    /// At most `max` elements.
    Cardinality {
        max: usize,
    },
    /// The products of the set must fit inside one of the listed sets.
    Explicit {
        sets: Vec<BTreeSet<ProductId>>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeasibilitySystem {
    pub second: SecondConstraint,
}

impl FeasibilitySystem {
    pub fn slots_only() -> Self {
        FeasibilitySystem {
            second: SecondConstraint::None,
        }
    }

    /// Element-level system induced by an organic product family.
    pub fn from_family(family: &ConstraintFamily) -> Self {
        let second = match family {
            ConstraintFamily::Unconstrained => SecondConstraint::None,
            ConstraintFamily::Knapsack { cost, capacity } => SecondConstraint::Knapsack {
                cost: cost.clone(),
                capacity: *capacity,
            },
            ConstraintFamily::PartitionMatroid { groups, caps } => {
                SecondConstraint::PartitionMatroid {
                    group_of: groups
                        .iter()
                        .enumerate()
                        .flat_map(|(q, g)| g.iter().map(move |&i| (i, q)))
                        .collect(),
                    caps: caps.clone(),
                }
            }
            ConstraintFamily::Cardinality { max } => SecondConstraint::Cardinality { max: *max },
            ConstraintFamily::Explicit { sets } => {
                SecondConstraint::Explicit { sets: sets.clone() }
            }
        };
        FeasibilitySystem { second }
    }

    /// Worst-case ratio of [`maximize`] on this system, valid when the
    /// objective is monotone submodular.
    pub fn guarantee(&self) -> f64 {
        match self.second {
            // A cardinality cap truncates the slot matroid, which stays a matroid.
            // Explicit sets are solved one set at a time over the slot matroid.
            SecondConstraint::None
            | SecondConstraint::Cardinality { .. }
            | SecondConstraint::Explicit { .. } => 0.5,
            SecondConstraint::Knapsack { .. } | SecondConstraint::PartitionMatroid { .. } => {
                1.0 / 3.0
            }
        }
    }

    pub fn is_feasible(&self, elements: &[Element]) -> bool {
        let mut t = Tracker::new(self);
        elements.iter().all(|e| {
            let ok = t.can_add(e);
            t.add(e);
            ok
        })
    }
}

/// Incremental feasibility bookkeeping for a growing element set.
#[derive(Clone, Debug)]
struct Tracker<'a> {
    sys: &'a FeasibilitySystem,
    slots: BTreeSet<PositionId>,
    spent: f64,
    counts: Vec<usize>,
    products: BTreeSet<ProductId>,
}

impl<'a> Tracker<'a> {
    fn new(sys: &'a FeasibilitySystem) -> Self {
        let groups = match &sys.second {
            SecondConstraint::PartitionMatroid { caps, .. } => caps.len(),
            _ => 0,
        };
        Tracker {
            sys,
            slots: BTreeSet::new(),
            spent: 0.0,
            counts: vec![0; groups],
            products: BTreeSet::new(),
        }
    }

    fn can_add(&self, e: &Element) -> bool {
        if self.slots.contains(&e.position) {
            return false;
        }
        match &self.sys.second {
            SecondConstraint::None => true,
            SecondConstraint::Knapsack { cost, capacity } => {
                self.spent + cost.get(&e.product).copied().unwrap_or(0.0) <= *capacity
            }
            SecondConstraint::PartitionMatroid { group_of, caps } => {
                matches!(group_of.get(&e.product), Some(&q) if q < caps.len() && self.counts[q] < caps[q])
            }
            SecondConstraint::Cardinality { max } => self.slots.len() < *max,
            SecondConstraint::Explicit { sets } => sets
                .iter()
                .any(|s| s.contains(&e.product) && self.products.iter().all(|p| s.contains(p))),
        }
    }

    fn add(&mut self, e: &Element) {
        self.slots.insert(e.position);
        self.products.insert(e.product);
        match &self.sys.second {
            SecondConstraint::Knapsack { cost, .. } => {
                self.spent += cost.get(&e.product).copied().unwrap_or(0.0)
            }
            SecondConstraint::PartitionMatroid { group_of, .. } => {
                if let Some(&q) = group_of.get(&e.product) {
                    self.counts[q] += 1;
                }
            }
            _ => {}
        }
    }

    fn cost(&self, e: &Element) -> f64 {
        match &self.sys.second {
            SecondConstraint::Knapsack { cost, .. } => cost.get(&e.product).copied().unwrap_or(0.0),
            _ => 0.0,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Greedy,
    DensityGreedy,
    BestSingleton,
    LocalSearch,
    Brute,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaximizerResult {
    pub chosen: ElementSet,
    pub value: f64,
    pub guarantee_beta: f64,
    pub method: Method,
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct MaximizeOptions {
    /// Polish the two-matroid greedy solution with swap local search.
    pub local_search: bool,
    /// Relative improvement a local-search move must achieve.
    pub epsilon: f64,
}

impl Default for MaximizeOptions {
    fn default() -> Self {
        MaximizeOptions {
            local_search: false,
            epsilon: 0.01,
        }
    }
}

pub fn maximize(
    ground: &ElementSet,
    obj: &SurrogateObjective,
    sys: &FeasibilitySystem,
) -> MaximizerResult {
    maximize_with(ground, obj, sys, &MaximizeOptions::default())
}

pub fn maximize_with(
    ground: &ElementSet,
    obj: &SurrogateObjective,
    sys: &FeasibilitySystem,
    opts: &MaximizeOptions,
) -> MaximizerResult {
    let beta = sys.guarantee();
    let finish =
        |ev: &SurrogateEvaluator, members: Vec<usize>, value: f64, method| MaximizerResult {
            chosen: ground.sibling(members.iter().map(|&m| *ev.element(m)).collect()),
            value,
            guarantee_beta: beta,
            method,
        };

    if let SecondConstraint::Explicit { sets } = &sys.second {
        // Each listed set leaves only the slot matroid; OPT lives in one of them.
        let slots = FeasibilitySystem::slots_only();
        let mut best: Option<MaximizerResult> = None;
        for s in sets {
            let sub = ground.filter(|e| s.contains(&e.product));
            let r = maximize_with(&sub, obj, &slots, opts);
            if best.as_ref().is_none_or(|b| r.value > b.value) {
                best = Some(r);
            }
        }
        let mut out = best.unwrap_or_else(|| MaximizerResult {
            chosen: ground.sibling(Vec::new()),
            value: 0.0,
            guarantee_beta: beta,
            method: Method::Greedy,
        });
        out.guarantee_beta = beta;
        return out;
    }

    let ev = SurrogateEvaluator::new(ground, obj);
    let (members, trajectory) = lazy_greedy(&ev, sys, Rule::Gain);
    let value = trajectory.last().copied().unwrap_or(0.0);
    let mut best = (members, value, Method::Greedy);

    match &sys.second {
        SecondConstraint::Knapsack { .. } => {
            let (m, t) = lazy_greedy(&ev, sys, Rule::Density);
            let v = t.last().copied().unwrap_or(0.0);
            if v > best.1 {
                best = (m, v, Method::DensityGreedy);
            }
            if let Some((idx, v)) = best_singleton(&ev, sys) {
                if v > best.1 {
                    best = (vec![idx], v, Method::BestSingleton);
                }
            }
        }
        SecondConstraint::PartitionMatroid { .. } | SecondConstraint::Cardinality { .. }
            if opts.local_search =>
        {
            let (m, v) = local_search(&ev, sys, best.0.clone(), opts.epsilon);
            if v > best.1 {
                best = (m, v, Method::LocalSearch);
            }
        }
        _ => {}
    }
    finish(&ev, best.0, best.1, best.2)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
enum Rule {
    Gain,
    Density,
}

#[derive(Debug)]
struct Candidate {
    score: f64,
    idx: usize,
    stamp: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    // Max-heap on score; lower ground index (lower (product, slot)) wins ties.
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| Reverse(self.idx).cmp(&Reverse(other.idx)))
    }
}

fn score(rule: Rule, gain: f64, cost: f64) -> f64 {
    match rule {
        Rule::Gain => gain,
        Rule::Density if cost > 0.0 => gain / cost,
        Rule::Density if gain > 0.0 => f64::INFINITY,
        Rule::Density => gain,
    }
}

/// Lazy greedy. Returns the chosen ground indices in insertion order and the
/// objective value after each insertion.
fn lazy_greedy(
    ev: &SurrogateEvaluator,
    sys: &FeasibilitySystem,
    rule: Rule,
) -> (Vec<usize>, Vec<f64>) {
    let mut tracker = Tracker::new(sys);
    let mut state = ev.empty_state();
    let mut current = ev.value(&state);
    let mut chosen = Vec::new();
    let mut trajectory = Vec::new();
    let mut heap: BinaryHeap<Candidate> = (0..ev.len())
        .filter(|&i| tracker.can_add(ev.element(i)))
        .map(|idx| Candidate {
            score: score(
                rule,
                ev.value_with(&state, idx) - current,
                tracker.cost(ev.element(idx)),
            ),
            idx,
            stamp: 0,
        })
        .collect();

    while let Some(top) = heap.pop() {
        let e = ev.element(top.idx);
        if !tracker.can_add(e) {
            continue;
        }
        if top.stamp != chosen.len() {
            let gain = ev.value_with(&state, top.idx) - current;
            heap.push(Candidate {
                score: score(rule, gain, tracker.cost(e)),
                idx: top.idx,
                stamp: chosen.len(),
            });
            continue;
        }
        if top.score <= 0.0 {
            break;
        }
        tracker.add(e);
        ev.add(&mut state, top.idx);
        current = ev.value(&state);
        chosen.push(top.idx);
        trajectory.push(current);
    }
    (chosen, trajectory)
}

/// Value trajectory of plain (gain) greedy, exposed for tests.
pub fn greedy_trajectory(
    ground: &ElementSet,
    obj: &SurrogateObjective,
    sys: &FeasibilitySystem,
) -> Vec<f64> {
    lazy_greedy(&SurrogateEvaluator::new(ground, obj), sys, Rule::Gain).1
}

fn best_singleton(ev: &SurrogateEvaluator, sys: &FeasibilitySystem) -> Option<(usize, f64)> {
    let tracker = Tracker::new(sys);
    let empty = ev.empty_state();
    let mut best: Option<(usize, f64)> = None;
    for idx in 0..ev.len() {
        if !tracker.can_add(ev.element(idx)) {
            continue;
        }
        let v = ev.value_with(&empty, idx);
        if v > 0.0 && best.is_none_or(|(_, b)| v > b) {
            best = Some((idx, v));
        }
    }
    best
}

fn feasible_members(ev: &SurrogateEvaluator, sys: &FeasibilitySystem, members: &[usize]) -> bool {
    let elements: Vec<Element> = members.iter().map(|&m| *ev.element(m)).collect();
    sys.is_feasible(&elements)
}

/// Add-one / drop-up-to-two swap local search, accepting a move only when it
/// improves the value by a factor of more than `1 + epsilon`.
fn local_search(
    ev: &SurrogateEvaluator,
    sys: &FeasibilitySystem,
    mut members: Vec<usize>,
    epsilon: f64,
) -> (Vec<usize>, f64) {
    let mut current = ev.value(&ev.state_of(&members));
    'outer: loop {
        for add in 0..ev.len() {
            if members.contains(&add) {
                continue;
            }
            let n = members.len();
            let mut drops: Vec<Vec<usize>> = vec![vec![]];
            drops.extend((0..n).map(|a| vec![a]));
            drops.extend((0..n).flat_map(|a| (a + 1..n).map(move |b| vec![a, b])));
            for drop in drops {
                let mut next: Vec<usize> = members
                    .iter()
                    .enumerate()
                    .filter(|(pos, _)| !drop.contains(pos))
                    .map(|(_, &m)| m)
                    .collect();
                next.push(add);
                if !feasible_members(ev, sys, &next) {
                    continue;
                }
                let v = ev.value(&ev.state_of(&next));
                if v > current * (1.0 + epsilon) && v > current {
                    members = next;
                    current = v;
                    continue 'outer;
                }
            }
        }
        return (members, current);
    }
}

/// Exact maximum by enumerating feasible subsets (depth-first, pruning
/// infeasible branches).
pub fn brute_force_maximize(
    ground: &ElementSet,
    obj: &SurrogateObjective,
    sys: &FeasibilitySystem,
) -> Result<MaximizerResult> {
    if ground.len() > BRUTE_FORCE_LIMIT {
        return Err(Error::GroundSetTooLarge {
            size: ground.len(),
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    struct Search<'a> {
        ev: &'a SurrogateEvaluator,
        best: (Vec<usize>, f64),
        members: Vec<usize>,
    }
    fn rec(s: &mut Search<'_>, idx: usize, tracker: &Tracker<'_>, state: &EvalState) {
        if idx == s.ev.len() {
            let v = s.ev.value(state);
            if v > s.best.1 {
                s.best = (s.members.clone(), v);
            }
            return;
        }
        let e = s.ev.element(idx);
        if tracker.can_add(e) {
            let mut t = tracker.clone();
            t.add(e);
            let mut st = state.clone();
            s.ev.add(&mut st, idx);
            s.members.push(idx);
            rec(s, idx + 1, &t, &st);
            s.members.pop();
        }
        rec(s, idx + 1, tracker, state);
    }

    let ev = SurrogateEvaluator::new(ground, obj);
    let mut search = Search {
        ev: &ev,
        best: (Vec::new(), 0.0),
        members: Vec::new(),
    };
    rec(&mut search, 0, &Tracker::new(sys), &ev.empty_state());
    let (members, value) = search.best;
    Ok(MaximizerResult {
        chosen: ground.sibling(members.iter().map(|&m| *ev.element(m)).collect()),
        value,
        guarantee_beta: 1.0,
        method: Method::Brute,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::surrogate_value;
    use proptest::prelude::*;

    fn el(p: usize, t: usize, r: f64, w: f64) -> Element {
        Element {
            product: ProductId(p),
            position: PositionId(t),
            revenue: r,
            weight: w,
        }
    }

    const OBJ: SurrogateObjective = SurrogateObjective { r_threshold: 100.0 };

    #[test]
    fn empty_ground() {
        let g = ElementSet::empty(1.0);
        let r = maximize(&g, &OBJ, &FeasibilitySystem::slots_only());
        assert!(r.chosen.is_empty());
        assert_eq!(r.value, 0.0);
        let b = brute_force_maximize(&g, &OBJ, &FeasibilitySystem::slots_only()).unwrap();
        assert_eq!(b.value, 0.0);
    }

    #[test]
    fn single_element_taken_iff_positive_gain() {
        let g = ElementSet::new(vec![el(0, 1, 4.0, 1.0)], 1.0);
        let r = maximize(&g, &OBJ, &FeasibilitySystem::slots_only());
        assert_eq!(r.chosen.len(), 1);
        assert_eq!(r.value, 2.0);
        let g = ElementSet::new(vec![el(0, 1, 4.0, 0.0)], 1.0);
        assert!(maximize(&g, &OBJ, &FeasibilitySystem::slots_only())
            .chosen
            .is_empty());
    }

    #[test]
    fn brute_force_guard() {
        let g = ElementSet::new((0..21).map(|i| el(i, 1, 1.0, 1.0)).collect(), 1.0);
        assert_eq!(
            brute_force_maximize(&g, &OBJ, &FeasibilitySystem::slots_only()),
            Err(Error::GroundSetTooLarge {
                size: 21,
                limit: 20
            })
        );
    }

    #[test]
    fn knapsack_feasibility_pays_per_element() {
        let sys = FeasibilitySystem::from_family(&ConstraintFamily::Knapsack {
            cost: [(ProductId(0), 2.0)].into_iter().collect(),
            capacity: 3.0,
        });
        assert!(sys.is_feasible(&[el(0, 1, 1.0, 1.0)]));
        assert!(!sys.is_feasible(&[el(0, 1, 1.0, 1.0), el(0, 2, 1.0, 1.0)]));
        assert!(!sys.is_feasible(&[el(0, 1, 1.0, 1.0), el(1, 1, 1.0, 1.0)]));
    }

    #[derive(Clone, Debug)]
    struct Case {
        ground: ElementSet,
        sys: FeasibilitySystem,
        obj: SurrogateObjective,
    }

    fn case_strategy() -> impl Strategy<Value = Case> {
        (
            2usize..=5,
            1usize..=3,
            prop::collection::vec(0.5f64..10.0, 5),
            prop::collection::vec(0.0f64..3.0, 15),
            prop::collection::vec(0.0f64..3.0, 5),
            0.2f64..3.0,
            0u8..4,
        )
            .prop_map(
                |(n_products, n_slots, revenues, weights, costs, w0, kind)| {
                    let elements: Vec<Element> = (0..n_products)
                        .flat_map(|p| (0..n_slots).map(move |t| (p, t)))
                        .map(|(p, t)| el(p, t + 1, revenues[p], weights[p * 3 + t]))
                        .collect();
                    let ground = ElementSet::new(elements, w0);
                    let r_min = revenues[..n_products]
                        .iter()
                        .copied()
                        .fold(f64::INFINITY, f64::min);
                    let family = match kind {
                        0 => ConstraintFamily::Unconstrained,
                        1 => ConstraintFamily::Knapsack {
                            cost: (0..n_products).map(|p| (ProductId(p), costs[p])).collect(),
                            capacity: 3.0,
                        },
                        2 => ConstraintFamily::PartitionMatroid {
                            groups: vec![
                                (0..n_products).step_by(2).map(ProductId).collect(),
                                (1..n_products).step_by(2).map(ProductId).collect(),
                            ],
                            caps: vec![1, 1],
                        },
                        _ => ConstraintFamily::Explicit {
                            sets: vec![
                                [ProductId(0), ProductId(1)].into_iter().collect(),
                                (1..n_products).map(ProductId).collect(),
                            ],
                        },
                    };
                    Case {
                        ground,
                        sys: FeasibilitySystem::from_family(&family),
                        obj: SurrogateObjective { r_threshold: r_min },
                    }
                },
            )
    }

    proptest! {
        #[test]
        fn ratio_and_feasibility(c in case_strategy()) {
            let opt = brute_force_maximize(&c.ground, &c.obj, &c.sys).unwrap();
            for opts in [MaximizeOptions::default(), MaximizeOptions { local_search: true, epsilon: 0.01 }] {
                let r = maximize_with(&c.ground, &c.obj, &c.sys, &opts);
                prop_assert!(c.sys.is_feasible(r.chosen.elements()));
                prop_assert!((r.value - surrogate_value(&r.chosen, &c.obj)).abs() <= 1e-12);
                prop_assert!(r.value >= r.guarantee_beta * opt.value - 1e-9);
                prop_assert!(opt.value >= r.value - 1e-12);
            }
            prop_assert!(c.sys.is_feasible(opt.chosen.elements()));
        }

        #[test]
        fn greedy_values_never_decrease(c in case_strategy()) {
            let t = greedy_trajectory(&c.ground, &c.obj, &c.sys);
            prop_assert!(t.windows(2).all(|w| w[1] >= w[0]));
        }

        #[test]
        fn deterministic(c in case_strategy()) {
            prop_assert_eq!(maximize(&c.ground, &c.obj, &c.sys), maximize(&c.ground, &c.obj, &c.sys));
        }
    }
}
