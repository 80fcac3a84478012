//! Domain types for sponsored-product assortment planning and the MNL
//! revenue evaluation shared by every solver and oracle.
//!
//! Positions are numbered `1..=k`. Each position is either organic or
//! reserved; each product is either organic or sponsored. A sponsored
//! product must sit in one of its valid reserved positions, organic products
//! may only sit in organic positions, and organic positions may stay empty.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Absolute tolerance for revenue comparisons.
pub const REVENUE_TOL: f64 = 1e-9;

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProductId(pub usize);

impl fmt::Display for ProductId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// A display slot, 1-based.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PositionId(pub usize);

impl fmt::Display for PositionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "slot {}", self.0)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProductKind {
    Organic,
    Sponsored,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PositionKind {
    Organic,
    Reserved,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Product {
    pub name: String,
    pub kind: ProductKind,
    pub revenue: f64,
}

/// Downward-closed family of admissible organic product sets.
#[derive(Clone, Debug, PartialEq)]
pub enum ConstraintFamily {
    Unconstrained,
    Knapsack {
        cost: BTreeMap<ProductId, f64>,
        capacity: f64,
    },
    /// `groups` partitions the organic products; at most `caps[q]` products
    /// may be taken from `groups[q]`.
    PartitionMatroid {
        groups: Vec<Vec<ProductId>>,
        caps: Vec<usize>,
    },
    Cardinality {
        max: usize,
    },
    /// A set is admissible iff it is contained in one of the listed sets.
    Explicit {
        sets: Vec<BTreeSet<ProductId>>,
    },
}

impl ConstraintFamily {
    /// Knapsack cost of a product; products without a listed cost are free.
    pub fn cost(&self, id: ProductId) -> f64 {
        match self {
            ConstraintFamily::Knapsack { cost, .. } => cost.get(&id).copied().unwrap_or(0.0),
            _ => 0.0,
        }
    }

    pub fn admits(&self, set: &[ProductId]) -> bool {
        let distinct: BTreeSet<ProductId> = set.iter().copied().collect();
        match self {
            ConstraintFamily::Unconstrained => true,
            ConstraintFamily::Knapsack { capacity, .. } => {
                distinct.iter().map(|&i| self.cost(i)).sum::<f64>() <= *capacity
            }
            ConstraintFamily::PartitionMatroid { groups, caps } => groups
                .iter()
                .zip(caps)
                .all(|(g, &cap)| g.iter().filter(|i| distinct.contains(i)).count() <= cap),
            ConstraintFamily::Cardinality { max } => distinct.len() <= *max,
            ConstraintFamily::Explicit { sets } => {
                distinct.is_empty() || sets.iter().any(|s| distinct.is_subset(s))
            }
        }
    }

    /// Checks downward closedness by enumerating every subset of `ground`.
    /// Only meant for small grounds (at most 20 products).
    pub fn is_downward_closed_on(&self, ground: &[ProductId]) -> bool {
        assert!(ground.len() <= 20, "enumeration guard");
        let n = ground.len();
        let subset = |mask: u32| -> Vec<ProductId> {
            (0..n)
                .filter(|b| mask >> b & 1 == 1)
                .map(|b| ground[b])
                .collect()
        };
        for mask in 0u32..(1 << n) {
            if !self.admits(&subset(mask)) {
                continue;
            }
            for b in 0..n {
                if mask >> b & 1 == 1 && !self.admits(&subset(mask & !(1 << b))) {
                    return false;
                }
            }
        }
        true
    }
}

/// A problem instance. Immutable once built; see [`InstanceBuilder`].
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    products: Vec<Product>,
    positions: Vec<PositionKind>,
    /// Dense `products.len() x k`, row-major by product.
    weights: Vec<f64>,
    w0: f64,
    valid: Vec<Vec<PositionId>>,
    constraint: ConstraintFamily,
}

impl Instance {
    pub fn k(&self) -> usize {
        self.positions.len()
    }

    pub fn w0(&self) -> f64 {
        self.w0
    }

    pub fn num_products(&self) -> usize {
        self.products.len()
    }

    pub fn product(&self, id: ProductId) -> &Product {
        &self.products[id.0]
    }

    pub fn products(&self) -> impl Iterator<Item = (ProductId, &Product)> + '_ {
        self.products
            .iter()
            .enumerate()
            .map(|(i, p)| (ProductId(i), p))
    }

    pub fn product_id(&self, name: &str) -> Option<ProductId> {
        self.products
            .iter()
            .position(|p| p.name == name)
            .map(ProductId)
    }

    pub fn name(&self, id: ProductId) -> &str {
        &self.products[id.0].name
    }

    pub fn kind(&self, id: ProductId) -> ProductKind {
        self.products[id.0].kind
    }

    pub fn revenue(&self, id: ProductId) -> f64 {
        self.products[id.0].revenue
    }

    /// `w(i, t)`; zero for pairs never given a weight.
    pub fn weight(&self, id: ProductId, pos: PositionId) -> f64 {
        self.weights[id.0 * self.k() + pos.0 - 1]
    }

    pub fn organic(&self) -> Vec<ProductId> {
        self.of_kind(ProductKind::Organic)
    }

    pub fn sponsored(&self) -> Vec<ProductId> {
        self.of_kind(ProductKind::Sponsored)
    }

    fn of_kind(&self, kind: ProductKind) -> Vec<ProductId> {
        self.products()
            .filter(|(_, p)| p.kind == kind)
            .map(|(id, _)| id)
            .collect()
    }

    pub fn position_kind(&self, pos: PositionId) -> PositionKind {
        self.positions[pos.0 - 1]
    }

    pub fn position_kinds(&self) -> &[PositionKind] {
        &self.positions
    }

    pub fn organic_positions(&self) -> Vec<PositionId> {
        self.positions_of(PositionKind::Organic)
    }

    pub fn reserved_positions(&self) -> Vec<PositionId> {
        self.positions_of(PositionKind::Reserved)
    }

    fn positions_of(&self, kind: PositionKind) -> Vec<PositionId> {
        (1..=self.k())
            .map(PositionId)
            .filter(|&t| self.position_kind(t) == kind)
            .collect()
    }

    /// `R_i` for a sponsored product; empty for organic ones.
    pub fn valid_positions(&self, id: ProductId) -> &[PositionId] {
        &self.valid[id.0]
    }

    pub fn constraint(&self) -> &ConstraintFamily {
        &self.constraint
    }

    /// Same instance with every organic product removed. Product ids are
    /// renumbered; names are kept.
    pub fn without_organics(&self) -> Instance {
        let mut b = InstanceBuilder::new(self.w0);
        b.positions(&self.positions);
        for (id, p) in self.products() {
            if p.kind == ProductKind::Sponsored {
                let slots: Vec<usize> = self.valid[id.0].iter().map(|t| t.0).collect();
                let new = b.sponsored(&p.name, p.revenue, &slots);
                for t in 1..=self.k() {
                    b.weight(new, t, self.weight(id, PositionId(t)));
                }
            }
        }
        b.build().expect("subinstance of a valid instance is valid")
    }

    /// Copy with all revenues multiplied by `factor`.
    pub fn scale_revenues(&self, factor: f64) -> Instance {
        let mut out = self.clone();
        for p in &mut out.products {
            p.revenue *= factor;
        }
        out
    }

    /// Copy with a different organic constraint family.
    pub fn with_constraint(&self, constraint: ConstraintFamily) -> Result<Instance> {
        let mut out = self.clone();
        out.constraint = constraint;
        validate_constraint(&out)?;
        Ok(out)
    }
}

/// Incremental construction of an [`Instance`]; `build` validates every
/// model invariant and reports the offending key.
#[derive(Clone, Debug)]
pub struct InstanceBuilder {
    w0: f64,
    positions: Vec<PositionKind>,
    products: Vec<Product>,
    valid: Vec<Vec<usize>>,
    weights: Vec<(ProductId, usize, f64)>,
    constraint: ConstraintFamily,
}

impl InstanceBuilder {
    pub fn new(w0: f64) -> Self {
        InstanceBuilder {
            w0,
            positions: Vec::new(),
            products: Vec::new(),
            valid: Vec::new(),
            weights: Vec::new(),
            constraint: ConstraintFamily::Unconstrained,
        }
    }

    /// Sets the kinds of slots `1..=kinds.len()`.
    pub fn positions(&mut self, kinds: &[PositionKind]) -> &mut Self {
        self.positions = kinds.to_vec();
        self
    }

    pub fn organic(&mut self, name: &str, revenue: f64) -> ProductId {
        self.push(name, ProductKind::Organic, revenue, Vec::new())
    }

    pub fn sponsored(&mut self, name: &str, revenue: f64, valid_slots: &[usize]) -> ProductId {
        self.push(name, ProductKind::Sponsored, revenue, valid_slots.to_vec())
    }

    fn push(
        &mut self,
        name: &str,
        kind: ProductKind,
        revenue: f64,
        valid: Vec<usize>,
    ) -> ProductId {
        self.products.push(Product {
            name: name.to_string(),
            kind,
            revenue,
        });
        self.valid.push(valid);
        ProductId(self.products.len() - 1)
    }

    pub fn set_valid_slots(&mut self, id: ProductId, slots: &[usize]) -> &mut Self {
        self.valid[id.0] = slots.to_vec();
        self
    }

    pub fn weight(&mut self, id: ProductId, slot: usize, w: f64) -> &mut Self {
        self.weights.push((id, slot, w));
        self
    }

    /// Weights of one product for slots `1..=row.len()`.
    pub fn weight_row(&mut self, id: ProductId, row: &[f64]) -> &mut Self {
        for (t, &w) in row.iter().enumerate() {
            self.weights.push((id, t + 1, w));
        }
        self
    }

    pub fn constraint(&mut self, c: ConstraintFamily) -> &mut Self {
        self.constraint = c;
        self
    }

    pub fn id(&self, name: &str) -> Option<ProductId> {
        self.products
            .iter()
            .position(|p| p.name == name)
            .map(ProductId)
    }

    pub fn build(&self) -> Result<Instance> {
        if !(self.w0.is_finite() && self.w0 > 0.0) {
            return Err(Error::validation(
                "w0",
                format!("must be positive and finite, got {}", self.w0),
            ));
        }
        let k = self.positions.len();
        let mut names = BTreeSet::new();
        for p in &self.products {
            if !names.insert(p.name.as_str()) {
                return Err(Error::validation(
                    format!("products.{}", p.name),
                    "duplicate product id",
                ));
            }
            if !(p.revenue.is_finite() && p.revenue >= 0.0) {
                return Err(Error::validation(
                    format!("products.{}.revenue", p.name),
                    format!("must be finite and nonnegative, got {}", p.revenue),
                ));
            }
        }

        let mut weights = vec![0.0; self.products.len() * k];
        for &(id, slot, w) in &self.weights {
            let name = self
                .products
                .get(id.0)
                .map(|p| p.name.clone())
                .ok_or_else(|| Error::validation("weights", format!("unknown product {id}")))?;
            if slot == 0 || slot > k {
                return Err(Error::validation(
                    format!("weights.{name}.{slot}"),
                    format!("slot outside 1..={k}"),
                ));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::validation(
                    format!("weights.{name}.{slot}"),
                    format!("weight must be finite and nonnegative, got {w}"),
                ));
            }
            weights[id.0 * k + slot - 1] = w;
        }

        let n_sponsored = self
            .products
            .iter()
            .filter(|p| p.kind == ProductKind::Sponsored)
            .count();
        let n_reserved = self
            .positions
            .iter()
            .filter(|&&p| p == PositionKind::Reserved)
            .count();
        if n_sponsored != n_reserved {
            return Err(Error::validation(
                "positions",
                format!("{n_sponsored} sponsored products but {n_reserved} reserved positions; counts must match"),
            ));
        }

        let mut valid = Vec::with_capacity(self.products.len());
        for (p, slots) in self.products.iter().zip(&self.valid) {
            let key = format!("valid_positions.{}", p.name);
            match p.kind {
                ProductKind::Organic => {
                    if !slots.is_empty() {
                        return Err(Error::validation(
                            key,
                            "organic products have no valid reserved positions",
                        ));
                    }
                    valid.push(Vec::new());
                }
                ProductKind::Sponsored => {
                    if slots.is_empty() {
                        return Err(Error::validation(
                            key,
                            "sponsored product needs a nonempty valid position set",
                        ));
                    }
                    let mut set = BTreeSet::new();
                    for &s in slots {
                        if s == 0 || s > k {
                            return Err(Error::validation(
                                key,
                                format!("references slot {s} not in positions"),
                            ));
                        }
                        if self.positions[s - 1] != PositionKind::Reserved {
                            return Err(Error::validation(
                                key,
                                format!("references slot {s} which is not reserved"),
                            ));
                        }
                        set.insert(PositionId(s));
                    }
                    valid.push(set.into_iter().collect());
                }
            }
        }

        let inst = Instance {
            products: self.products.clone(),
            positions: self.positions.clone(),
            weights,
            w0: self.w0,
            valid,
            constraint: self.constraint.clone(),
        };
        validate_constraint(&inst)?;
        Ok(inst)
    }
}

fn validate_constraint(inst: &Instance) -> Result<()> {
    let check_organic = |id: ProductId, key: &str| -> Result<()> {
        if id.0 >= inst.num_products() || inst.kind(id) != ProductKind::Organic {
            return Err(Error::validation(
                key,
                format!("{id} is not an organic product"),
            ));
        }
        Ok(())
    };
    match &inst.constraint {
        ConstraintFamily::Unconstrained | ConstraintFamily::Cardinality { .. } => {}
        ConstraintFamily::Knapsack { cost, capacity } => {
            if !(capacity.is_finite() && *capacity >= 0.0) {
                return Err(Error::validation(
                    "constraint.capacity",
                    "must be finite and nonnegative",
                ));
            }
            for (&id, &c) in cost {
                check_organic(id, "constraint.cost")?;
                if !(c.is_finite() && c >= 0.0) {
                    return Err(Error::validation(
                        format!("products.{}.cost", inst.name(id)),
                        "must be finite and nonnegative",
                    ));
                }
            }
        }
        ConstraintFamily::PartitionMatroid { groups, caps } => {
            if groups.len() != caps.len() {
                return Err(Error::validation(
                    "constraint.groups",
                    "every group needs a cap",
                ));
            }
            let mut seen = BTreeSet::new();
            for g in groups {
                for &id in g {
                    check_organic(id, "constraint.groups")?;
                    if !seen.insert(id) {
                        return Err(Error::validation(
                            "constraint.groups",
                            format!("product {} appears in two groups", inst.name(id)),
                        ));
                    }
                }
            }
            if let Some(missing) = inst.organic().into_iter().find(|i| !seen.contains(i)) {
                return Err(Error::validation(
                    "constraint.groups",
                    format!("organic product {} is in no group", inst.name(missing)),
                ));
            }
        }
        ConstraintFamily::Explicit { sets } => {
            for s in sets {
                for &id in s {
                    check_organic(id, "constraint.sets")?;
                }
            }
        }
    }
    Ok(())
}

/// A partial assignment of products to positions, kept as sorted
/// `(position, product)` pairs. Duplicates are representable so that
/// [`check_feasible`] can report them.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Placement {
    pairs: Vec<(PositionId, ProductId)>,
}

impl Placement {
    pub fn empty() -> Self {
        Placement::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (PositionId, ProductId)>) -> Self {
        let mut pairs: Vec<_> = pairs.into_iter().collect();
        pairs.sort();
        Placement { pairs }
    }

    pub fn pairs(&self) -> &[(PositionId, ProductId)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn position_of(&self, id: ProductId) -> Option<PositionId> {
        self.pairs.iter().find(|(_, p)| *p == id).map(|(t, _)| *t)
    }

    pub fn product_at(&self, pos: PositionId) -> Option<ProductId> {
        self.pairs.iter().find(|(t, _)| *t == pos).map(|(_, p)| *p)
    }

    pub fn products(&self) -> impl Iterator<Item = ProductId> + '_ {
        self.pairs.iter().map(|(_, p)| *p)
    }

    /// Union of two placements (no conflict checking).
    pub fn merge(&self, other: &Placement) -> Placement {
        Placement::from_pairs(self.pairs.iter().chain(&other.pairs).copied())
    }

    /// The pairs whose product satisfies `keep`.
    pub fn filter(&self, mut keep: impl FnMut(ProductId) -> bool) -> Placement {
        Placement {
            pairs: self
                .pairs
                .iter()
                .copied()
                .filter(|&(_, p)| keep(p))
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    UnknownProduct {
        product: ProductId,
    },
    PositionOutOfRange {
        position: PositionId,
    },
    DuplicateProduct {
        product: ProductId,
    },
    DuplicatePosition {
        position: PositionId,
    },
    SponsoredUnplaced {
        product: ProductId,
    },
    SponsoredOutsideValid {
        product: ProductId,
        position: PositionId,
    },
    OrganicAtReserved {
        product: ProductId,
        position: PositionId,
    },
    OrganicConstraint,
}

impl Violation {
    /// Structural violations break the placement itself; the remaining two
    /// (missing sponsored product, organic family) only make it infeasible.
    pub fn is_structural(&self) -> bool {
        !matches!(
            self,
            Violation::SponsoredUnplaced { .. } | Violation::OrganicConstraint
        )
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownProduct { product } => write!(f, "unknown product {product}"),
            Violation::PositionOutOfRange { position } => write!(f, "{position} out of range"),
            Violation::DuplicateProduct { product } => write!(f, "product {product} placed twice"),
            Violation::DuplicatePosition { position } => write!(f, "{position} holds two products"),
            Violation::SponsoredUnplaced { product } => {
                write!(f, "sponsored product unplaced: {product}")
            }
            Violation::SponsoredOutsideValid { product, position } => {
                write!(
                    f,
                    "sponsored product {product} at {position} outside its valid positions"
                )
            }
            Violation::OrganicAtReserved { product, position } => {
                write!(f, "organic product {product} at reserved {position}")
            }
            Violation::OrganicConstraint => write!(f, "organic constraint violated"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Feasibility {
    pub violations: Vec<Violation>,
}

impl Feasibility {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

fn structural_violations(inst: &Instance, pl: &Placement) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen_products = BTreeSet::new();
    let mut seen_positions = BTreeSet::new();
    for &(t, i) in pl.pairs() {
        if i.0 >= inst.num_products() {
            out.push(Violation::UnknownProduct { product: i });
            continue;
        }
        if t.0 == 0 || t.0 > inst.k() {
            out.push(Violation::PositionOutOfRange { position: t });
            continue;
        }
        if !seen_products.insert(i) {
            out.push(Violation::DuplicateProduct { product: i });
        }
        if !seen_positions.insert(t) {
            out.push(Violation::DuplicatePosition { position: t });
        }
        match inst.kind(i) {
            ProductKind::Sponsored => {
                if !inst.valid_positions(i).contains(&t) {
                    out.push(Violation::SponsoredOutsideValid {
                        product: i,
                        position: t,
                    });
                }
            }
            ProductKind::Organic => {
                if inst.position_kind(t) != PositionKind::Organic {
                    out.push(Violation::OrganicAtReserved {
                        product: i,
                        position: t,
                    });
                }
            }
        }
    }
    out
}

/// Lists every reason `pl` is not a feasible placement for `inst`,
/// including the organic constraint family.
pub fn check_feasible(inst: &Instance, pl: &Placement) -> Feasibility {
    let mut violations = structural_violations(inst, pl);
    for s in inst.sponsored() {
        if pl.position_of(s).is_none() {
            violations.push(Violation::SponsoredUnplaced { product: s });
        }
    }
    let organic: Vec<ProductId> = pl
        .products()
        .filter(|i| i.0 < inst.num_products() && inst.kind(*i) == ProductKind::Organic)
        .collect();
    if !inst.constraint().admits(&organic) {
        violations.push(Violation::OrganicConstraint);
    }
    Feasibility { violations }
}

fn ensure_structurally_valid(inst: &Instance, pl: &Placement) -> Result<()> {
    let v = structural_violations(inst, pl);
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidPlacement(v))
    }
}

/// Total displayed weight `sum_j w(j, pl^-1(j))`.
pub fn total_weight(inst: &Instance, pl: &Placement) -> f64 {
    pl.pairs().iter().map(|&(t, i)| inst.weight(i, t)).sum()
}

/// MNL revenue of `pl` against an arbitrary outside-option weight. No
/// validation; callers guarantee a structurally valid placement.
pub fn revenue_with_outside(inst: &Instance, pl: &Placement, outside: f64) -> f64 {
    let (num, den) = pl.pairs().iter().fold((0.0, outside), |(n, d), &(t, i)| {
        let w = inst.weight(i, t);
        (n + inst.revenue(i) * w, d + w)
    });
    num / den
}

/// Sponsored and organic shares of the revenue of `pl`; they sum to
/// [`expected_revenue`].
pub fn revenue_parts(inst: &Instance, pl: &Placement) -> Result<(f64, f64)> {
    ensure_structurally_valid(inst, pl)?;
    let den = inst.w0() + total_weight(inst, pl);
    let mut sponsored = 0.0;
    let mut organic = 0.0;
    for &(t, i) in pl.pairs() {
        let term = inst.revenue(i) * inst.weight(i, t) / den;
        match inst.kind(i) {
            ProductKind::Sponsored => sponsored += term,
            ProductKind::Organic => organic += term,
        }
    }
    Ok((sponsored, organic))
}

/// MNL purchase probability of a placed product.
pub fn choice_probability(inst: &Instance, pl: &Placement, id: ProductId) -> Result<f64> {
    let pos = pl.position_of(id).ok_or(Error::ProductNotPlaced(id))?;
    ensure_structurally_valid(inst, pl)?;
    Ok(inst.weight(id, pos) / (inst.w0() + total_weight(inst, pl)))
}

/// Probability that the consumer buys nothing.
pub fn no_purchase_probability(inst: &Instance, pl: &Placement) -> f64 {
    inst.w0() / (inst.w0() + total_weight(inst, pl))
}

/// Expected revenue `sum_i r_i * theta_i(pl)`; zero for the empty placement.
pub fn expected_revenue(inst: &Instance, pl: &Placement) -> Result<f64> {
    ensure_structurally_valid(inst, pl)?;
    Ok(revenue_with_outside(inst, pl, inst.w0()))
}
