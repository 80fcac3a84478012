//! Set-function view of the organic subproblem.
//!
//! An [`Element`] `(i, t)` means "organic product `i` at organic slot `t`".
//! For a set `U` of elements:
//!
//! * `omega(U, i)` is the best weight of product `i` over its slots in `U`;
//! * `l(U) = sum r_i omega(U,i) / (w0' + sum omega(U,j))` is the MNL revenue
//!   of showing every product of `U` at its best slot;
//! * `h(U) = max_{X subset of U} l(X)`.
//!
//! Some maximizer of `l` over subsets of `U` is always a revenue threshold
//! set `{(i,t) in U | r_i >= tau}`, so `h` is computed by scanning the
//! distinct revenues in decreasing order instead of enumerating subsets.
//! Truncating at a revenue floor, `min{h(U), r}` is monotone and submodular
//! whenever every element of the ground set has revenue at least `r`.

use crate::error::{Error, Result};
use crate::model::{Instance, PositionId, ProductId};
use std::cmp::Ordering;

#[derive(Copy, Clone, Debug)]
pub struct Element {
    pub product: ProductId,
    pub position: PositionId,
    pub revenue: f64,
    pub weight: f64,
}

impl Element {
    pub fn key(&self) -> (ProductId, PositionId) {
        (self.product, self.position)
    }
}

impl PartialEq for Element {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Element {}

impl PartialOrd for Element {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Element {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

/// A set of elements together with the outside weight `w0'` used to value
/// it. Elements are kept sorted by `(product, position)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ElementSet {
    elements: Vec<Element>,
    w0_prime: f64,
}

impl ElementSet {
    /// Panics if `w0_prime` is not positive and finite.
    pub fn new(mut elements: Vec<Element>, w0_prime: f64) -> Self {
        assert!(
            w0_prime.is_finite() && w0_prime > 0.0,
            "w0' must be positive"
        );
        elements.sort();
        elements.dedup();
        ElementSet { elements, w0_prime }
    }

    pub fn empty(w0_prime: f64) -> Self {
        ElementSet::new(Vec::new(), w0_prime)
    }

    /// Every `(i, t)` with `i` organic, `t` an organic slot and
    /// `r_i >= min_revenue`.
    pub fn ground(inst: &Instance, w0_prime: f64, min_revenue: f64) -> Self {
        let positions = inst.organic_positions();
        let elements = inst
            .organic()
            .into_iter()
            .filter(|&i| inst.revenue(i) >= min_revenue)
            .flat_map(|i| {
                positions.iter().map(move |&t| Element {
                    product: i,
                    position: t,
                    revenue: inst.revenue(i),
                    weight: inst.weight(i, t),
                })
            })
            .collect();
        ElementSet::new(elements, w0_prime)
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn w0_prime(&self) -> f64 {
        self.w0_prime
    }

    pub fn contains(&self, e: &Element) -> bool {
        self.elements.binary_search(e).is_ok()
    }

    /// Products with at least one element in the set, ascending.
    pub fn products(&self) -> Vec<ProductId> {
        let mut p: Vec<ProductId> = self.elements.iter().map(|e| e.product).collect();
        p.dedup();
        p
    }

    pub fn with(&self, e: Element) -> ElementSet {
        let mut elements = self.elements.clone();
        elements.push(e);
        ElementSet::new(elements, self.w0_prime)
    }

    /// Same outside weight, different elements.
    pub fn sibling(&self, elements: Vec<Element>) -> ElementSet {
        ElementSet::new(elements, self.w0_prime)
    }

    pub fn filter(&self, keep: impl FnMut(&&Element) -> bool) -> ElementSet {
        self.sibling(self.elements.iter().filter(keep).copied().collect())
    }

    /// `(product, revenue, omega)` per product, in product order.
    fn product_weights(&self) -> Vec<(ProductId, f64, f64)> {
        let mut out: Vec<(ProductId, f64, f64)> = Vec::new();
        for e in &self.elements {
            match out.last_mut() {
                Some(last) if last.0 == e.product => last.2 = last.2.max(e.weight),
                _ => out.push((e.product, e.revenue, e.weight)),
            }
        }
        out
    }
}

/// `omega(U, i)`: best weight of product `i` among its elements in `U`.
pub fn effective_weight(u: &ElementSet, product: ProductId) -> Result<f64> {
    u.elements
        .iter()
        .filter(|e| e.product == product)
        .map(|e| e.weight)
        .reduce(f64::max)
        .ok_or(Error::ProductNotInSet(product))
}

/// `l(U)`; zero on the empty set.
pub fn set_utility(u: &ElementSet) -> f64 {
    let (num, den) = u
        .product_weights()
        .iter()
        .fold((0.0, u.w0_prime), |(n, d), &(_, r, w)| (n + r * w, d + w));
    num / den
}

/// Best value of `l` over prefixes of `products` (sorted by decreasing
/// revenue) cut only between distinct revenues. Returns the threshold of
/// the best prefix (`+inf` for the empty one) and its value. Among equal
/// values the smallest prefix wins.
fn threshold_scan(products: &[(f64, f64)], w0_prime: f64) -> (f64, f64) {
    let mut best = (f64::INFINITY, 0.0);
    let (mut num, mut den) = (0.0, w0_prime);
    for (idx, &(r, w)) in products.iter().enumerate() {
        num += r * w;
        den += w;
        let group_ends = products.get(idx + 1).is_none_or(|next| next.0 != r);
        if group_ends {
            let l = num / den;
            if l > best.1 {
                best = (r, l);
            }
        }
    }
    best
}

/// `h(U)` together with a maximizing revenue-threshold subset `X`.
pub fn best_subset(u: &ElementSet) -> (ElementSet, f64) {
    let mut products: Vec<(f64, f64)> = u
        .product_weights()
        .iter()
        .map(|&(_, r, w)| (r, w))
        .collect();
    products.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (threshold, l_star) = threshold_scan(&products, u.w0_prime);
    (u.filter(|e| e.revenue >= threshold), l_star)
}

/// `h(U)` without materializing the maximizer.
pub fn h_value(u: &ElementSet) -> f64 {
    best_subset(u).1
}

/// Revenue floor `r` of the truncated objective `min{h(U), r}`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct SurrogateObjective {
    pub r_threshold: f64,
}

pub fn surrogate_value(u: &ElementSet, obj: &SurrogateObjective) -> f64 {
    h_value(u).min(obj.r_threshold)
}

/// Incremental evaluator of `min{h(U), r}` for subsets of a fixed ground
/// set. Products are ranked by revenue once, so each evaluation is a single
/// linear scan.
#[derive(Clone, Debug)]
pub(crate) struct SurrogateEvaluator {
    /// Ground elements, in ground order.
    elements: Vec<Element>,
    /// Rank (by decreasing revenue) of each element's product.
    rank_of: Vec<usize>,
    revenue_by_rank: Vec<f64>,
    w0_prime: f64,
    threshold: f64,
}

#[derive(Clone, Debug)]
pub(crate) struct EvalState {
    omega: Vec<f64>,
}

impl SurrogateEvaluator {
    pub fn new(ground: &ElementSet, obj: &SurrogateObjective) -> Self {
        let mut products: Vec<(ProductId, f64)> = ground
            .product_weights()
            .iter()
            .map(|&(p, r, _)| (p, r))
            .collect();
        products.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let rank_of = ground
            .elements
            .iter()
            .map(|e| products.iter().position(|(p, _)| *p == e.product).unwrap())
            .collect();
        SurrogateEvaluator {
            elements: ground.elements.clone(),
            rank_of,
            revenue_by_rank: products.iter().map(|p| p.1).collect(),
            w0_prime: ground.w0_prime,
            threshold: obj.r_threshold,
        }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn element(&self, idx: usize) -> &Element {
        &self.elements[idx]
    }

    pub fn empty_state(&self) -> EvalState {
        EvalState {
            omega: vec![0.0; self.revenue_by_rank.len()],
        }
    }

    pub fn add(&self, state: &mut EvalState, idx: usize) {
        let r = self.rank_of[idx];
        state.omega[r] = state.omega[r].max(self.elements[idx].weight);
    }

    pub fn state_of(&self, members: &[usize]) -> EvalState {
        let mut s = self.empty_state();
        for &m in members {
            self.add(&mut s, m);
        }
        s
    }

    fn h(&self, omega: &[f64]) -> f64 {
        let products: Vec<(f64, f64)> = self
            .revenue_by_rank
            .iter()
            .zip(omega)
            .map(|(&r, &w)| (r, w))
            .collect();
        threshold_scan(&products, self.w0_prime).1
    }

    pub fn value(&self, state: &EvalState) -> f64 {
        self.h(&state.omega).min(self.threshold)
    }

    /// Value of `state + element idx`.
    pub fn value_with(&self, state: &EvalState, idx: usize) -> f64 {
        let r = self.rank_of[idx];
        let w = self.elements[idx].weight;
        if w <= state.omega[r] {
            return self.value(state);
        }
        let mut omega = state.omega.clone();
        omega[r] = w;
        self.h(&omega).min(self.threshold)
    }
}
