//! Exhaustive enumerators used as ground truth on small instances.
//!
//! Every oracle refuses to run past its [`OracleBudget`] instead of
//! truncating the search. Revenues are evaluated with the same functions
//! from [`crate::model`] the solvers use.

use crate::error::{Error, Result};
use crate::model::{
    revenue_parts, revenue_with_outside, ConstraintFamily, Instance, Placement, PositionId,
    ProductId,
};
use crate::submodular::{brute_force_maximize, FeasibilitySystem, MaximizerResult};
use crate::surrogate::{ElementSet, SurrogateObjective};
use serde::{Deserialize, Serialize};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleBudget {
    /// Limit on `|O| + |S|`.
    pub max_products: usize,
    /// Limit on `k`.
    pub max_positions: usize,
    /// Limit on the ground set size for subset enumeration.
    pub max_elements: usize,
}

impl Default for OracleBudget {
    fn default() -> Self {
        OracleBudget {
            max_products: 7,
            max_positions: 6,
            max_elements: 20,
        }
    }
}

impl OracleBudget {
    pub fn admits(&self, inst: &Instance) -> bool {
        self.check(inst).is_ok()
    }

    fn check(&self, inst: &Instance) -> Result<()> {
        if inst.num_products() > self.max_products {
            return Err(Error::BudgetExceeded {
                what: "products",
                size: inst.num_products(),
                limit: self.max_products,
            });
        }
        if inst.k() > self.max_positions {
            return Err(Error::BudgetExceeded {
                what: "positions",
                size: inst.k(),
                limit: self.max_positions,
            });
        }
        Ok(())
    }
}

/// Calls `visit` on every perfect assignment of sponsored products into
/// their valid positions, in a fixed order.
pub fn for_each_sponsored_assignment(inst: &Instance, mut visit: impl FnMut(&Placement)) {
    fn rec(
        inst: &Instance,
        sponsored: &[ProductId],
        used: &mut Vec<PositionId>,
        pairs: &mut Vec<(PositionId, ProductId)>,
        visit: &mut dyn FnMut(&Placement),
    ) {
        let Some((&s, rest)) = sponsored.split_first() else {
            visit(&Placement::from_pairs(pairs.iter().copied()));
            return;
        };
        for &t in inst.valid_positions(s) {
            if used.contains(&t) {
                continue;
            }
            used.push(t);
            pairs.push((t, s));
            rec(inst, rest, used, pairs, visit);
            pairs.pop();
            used.pop();
        }
    }
    rec(
        inst,
        &inst.sponsored(),
        &mut Vec::new(),
        &mut Vec::new(),
        &mut visit,
    );
}

/// Calls `visit` on every partial injection of organic products into
/// organic positions (the empty one included), in a fixed order.
pub fn for_each_organic_placement(inst: &Instance, mut visit: impl FnMut(&Placement)) {
    fn rec(
        organic: &[ProductId],
        positions: &[PositionId],
        used: &mut Vec<bool>,
        pairs: &mut Vec<(PositionId, ProductId)>,
        visit: &mut dyn FnMut(&Placement),
    ) {
        let Some((&i, rest)) = organic.split_first() else {
            visit(&Placement::from_pairs(pairs.iter().copied()));
            return;
        };
        rec(rest, positions, used, pairs, visit);
        for (slot, &t) in positions.iter().enumerate() {
            if used[slot] {
                continue;
            }
            used[slot] = true;
            pairs.push((t, i));
            rec(rest, positions, used, pairs, visit);
            pairs.pop();
            used[slot] = false;
        }
    }
    let positions = inst.organic_positions();
    rec(
        &inst.organic(),
        &positions,
        &mut vec![false; positions.len()],
        &mut Vec::new(),
        &mut visit,
    );
}

pub fn count_sponsored_assignments(inst: &Instance) -> usize {
    let mut n = 0;
    for_each_sponsored_assignment(inst, |_| n += 1);
    n
}

pub fn count_organic_placements(inst: &Instance) -> usize {
    let mut n = 0;
    for_each_organic_placement(inst, |_| n += 1);
    n
}

fn organic_products(inst: &Instance, pl: &Placement) -> Vec<ProductId> {
    pl.products()
        .filter(|&i| inst.organic().contains(&i))
        .collect()
}

fn best_combined(inst: &Instance, family: &ConstraintFamily) -> Result<(Placement, f64)> {
    let mut organics = Vec::new();
    for_each_organic_placement(inst, |pl| {
        if family.admits(&organic_products(inst, pl)) {
            organics.push(pl.clone());
        }
    });
    let mut best: Option<(Placement, f64)> = None;
    for_each_sponsored_assignment(inst, |sp| {
        for org in &organics {
            let pl = sp.merge(org);
            let rev = revenue_with_outside(inst, &pl, inst.w0());
            if best.as_ref().is_none_or(|(_, b)| rev > *b) {
                best = Some((pl, rev));
            }
        }
    });
    best.ok_or(Error::InfeasibleSponsoredAssignment)
}

/// Exact optimum of the unconstrained problem: the organic family is
/// ignored.
pub fn oracle_p0(inst: &Instance, budget: &OracleBudget) -> Result<(Placement, f64)> {
    budget.check(inst)?;
    best_combined(inst, &ConstraintFamily::Unconstrained)
}

#[derive(Clone, Debug, PartialEq)]
pub struct P2Optimum {
    pub placement: Placement,
    pub revenue: f64,
    /// Revenue share of sponsored products at the optimum.
    pub part_sponsored: f64,
    /// Revenue share of organic products at the optimum.
    pub part_organic: f64,
}

/// Exact optimum with the organic family enforced, plus the split of its
/// revenue into sponsored and organic shares.
pub fn oracle_p2(inst: &Instance, budget: &OracleBudget) -> Result<P2Optimum> {
    budget.check(inst)?;
    let (placement, revenue) = best_combined(inst, inst.constraint())?;
    let (part_sponsored, part_organic) = revenue_parts(inst, &placement)?;
    Ok(P2Optimum {
        placement,
        revenue,
        part_sponsored,
        part_organic,
    })
}

/// Best organic-only placement in the family, valued with the outside
/// weight `w0_prime` in place of `w0`.
pub fn oracle_p5(
    inst: &Instance,
    w0_prime: f64,
    budget: &OracleBudget,
) -> Result<(Placement, f64)> {
    budget.check(inst)?;
    let mut best = (Placement::empty(), 0.0);
    for_each_organic_placement(inst, |pl| {
        if !inst.constraint().admits(&organic_products(inst, pl)) {
            return;
        }
        let v = revenue_with_outside(inst, pl, w0_prime);
        if v > best.1 {
            best = (pl.clone(), v);
        }
    });
    Ok(best)
}

/// Exact maximum of `min{h(U), r}` over feasible subsets of `ground`.
pub fn oracle_p6(
    ground: &ElementSet,
    obj: &SurrogateObjective,
    sys: &FeasibilitySystem,
    budget: &OracleBudget,
) -> Result<MaximizerResult> {
    if ground.len() > budget.max_elements {
        return Err(Error::BudgetExceeded {
            what: "elements",
            size: ground.len(),
            limit: budget.max_elements,
        });
    }
    brute_force_maximize(ground, obj, sys)
}
