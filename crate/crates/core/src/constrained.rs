//! Approximation for the problem with a downward-closed family on the
//! organic products.
//!
//! Two candidates are built and the better one is returned:
//!
//! * **candidate I** shows sponsored products only, placed optimally;
//! * **candidate II** places sponsored products to minimize their total
//!   weight, folds that weight into the outside option `w0'`, and then picks
//!   organic products by maximizing the truncated surrogate over the
//!   `(product, slot)` ground set.
//!
//! If the organic step is a `beta`-approximation, the better candidate is
//! within `beta / (beta + 1)` of the optimum.
//!
//! The truncation floor of the surrogate is the smallest revenue in an
//! optimal organic assortment, which is unknown; every distinct organic
//! revenue is tried and the best resulting assortment kept.

use crate::error::{Error, Result};
use crate::exact::solve_sponsored_only;
use crate::matching::{min_weight_perfect_matching, BipartiteGraph};
use crate::model::{
    expected_revenue, revenue_with_outside, Instance, Placement, PositionId, ProductId,
};
use crate::submodular::{maximize_with, FeasibilitySystem, MaximizeOptions, Method};
use crate::surrogate::{best_subset, ElementSet, SurrogateObjective};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub enum CandidateRole {
    #[serde(rename = "candidate_I")]
    SponsoredOnly,
    #[serde(rename = "candidate_II")]
    MinWeightPlusOrganic,
}

/// Diagnostics of the organic step of candidate II.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrganicStep {
    #[serde(skip)]
    pub placement: Placement,
    /// Revenue of the organic placement against `w0_prime`.
    pub value: f64,
    pub w0_prime: f64,
    /// Winning revenue floor; `None` when no organic product is shown.
    pub guess: Option<f64>,
    pub surrogate_value: f64,
    pub method: Option<Method>,
    pub guarantee_beta: f64,
    pub guesses_tried: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CandidateReport {
    #[serde(skip)]
    pub placement: Placement,
    pub revenue: f64,
    pub role: CandidateRole,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub organic_step: Option<OrganicStep>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CombinedReport {
    pub best: CandidateReport,
    pub both: Vec<CandidateReport>,
    /// Guarantee of the organic step used to state the end-to-end bound.
    pub beta_used: f64,
}

impl CombinedReport {
    /// `beta / (beta + 1)`.
    pub fn guaranteed_ratio(&self) -> f64 {
        self.beta_used / (self.beta_used + 1.0)
    }
}

pub fn candidate_one(inst: &Instance) -> Result<CandidateReport> {
    let (placement, revenue) = solve_sponsored_only(inst)?;
    Ok(CandidateReport {
        placement,
        revenue,
        role: CandidateRole::SponsoredOnly,
        organic_step: None,
    })
}

/// Perfect assignment of sponsored products to valid slots with the least
/// total weight, and that weight.
pub fn min_weight_sponsored(inst: &Instance) -> Result<(Placement, f64)> {
    let sponsored = inst.sponsored();
    let reserved = inst.reserved_positions();
    let mut g = BipartiteGraph::new(sponsored.len(), reserved.len());
    for (l, &s) in sponsored.iter().enumerate() {
        for (r, &t) in reserved.iter().enumerate() {
            if inst.valid_positions(s).contains(&t) {
                g.add_edge(l, r, inst.weight(s, t));
            }
        }
    }
    let m = min_weight_perfect_matching(&g).map_err(|_| Error::InfeasibleSponsoredAssignment)?;
    let placement =
        Placement::from_pairs(m.pairs.iter().map(|&(l, r)| (reserved[r], sponsored[l])));
    Ok((placement, m.total))
}

/// Places each product of `chosen` at its heaviest slot in `chosen`
/// (lowest slot on ties).
fn place_at_best_slots(chosen: &ElementSet) -> Placement {
    let mut best: Vec<(ProductId, PositionId, f64)> = Vec::new();
    for e in chosen.elements() {
        match best.last_mut() {
            Some(b) if b.0 == e.product => {
                if e.weight > b.2 {
                    *b = (e.product, e.position, e.weight);
                }
            }
            _ => best.push((e.product, e.position, e.weight)),
        }
    }
    Placement::from_pairs(best.into_iter().map(|(p, t, _)| (t, p)))
}

/// Approximate best organic placement against outside weight `w0_prime`,
/// within the instance's organic family.
pub fn organic_step(inst: &Instance, w0_prime: f64, opts: &MaximizeOptions) -> OrganicStep {
    let sys = FeasibilitySystem::from_family(inst.constraint());
    let mut guesses: Vec<f64> = inst.organic().iter().map(|&i| inst.revenue(i)).collect();
    guesses.sort_by(|a, b| b.total_cmp(a));
    guesses.dedup();

    let outcomes: Vec<OrganicStep> = guesses
        .par_iter()
        .map(|&r| {
            let ground = ElementSet::ground(inst, w0_prime, r);
            let obj = SurrogateObjective { r_threshold: r };
            let res = maximize_with(&ground, &obj, &sys, opts);
            let (v, _) = best_subset(&res.chosen);
            let placement = place_at_best_slots(&v);
            OrganicStep {
                value: revenue_with_outside(inst, &placement, w0_prime),
                placement,
                w0_prime,
                guess: Some(r),
                surrogate_value: res.value,
                method: Some(res.method),
                guarantee_beta: res.guarantee_beta,
                guesses_tried: guesses.len(),
            }
        })
        .collect();

    // Guesses are in decreasing order, so strict improvement keeps the
    // larger guess on ties.
    let mut best = OrganicStep {
        placement: Placement::empty(),
        value: 0.0,
        w0_prime,
        guess: None,
        surrogate_value: 0.0,
        method: None,
        guarantee_beta: sys.guarantee(),
        guesses_tried: guesses.len(),
    };
    for o in outcomes {
        if best.guess.is_none() || o.value > best.value {
            best = o;
        }
    }
    best
}

pub fn candidate_two(inst: &Instance) -> Result<CandidateReport> {
    candidate_two_with(inst, &MaximizeOptions::default())
}

pub fn candidate_two_with(inst: &Instance, opts: &MaximizeOptions) -> Result<CandidateReport> {
    let (sponsored, total) = min_weight_sponsored(inst)?;
    let step = organic_step(inst, inst.w0() + total, opts);
    let placement = sponsored.merge(&step.placement);
    let revenue = expected_revenue(inst, &placement)?;
    Ok(CandidateReport {
        placement,
        revenue,
        role: CandidateRole::MinWeightPlusOrganic,
        organic_step: Some(step),
    })
}

pub fn solve_constrained(inst: &Instance) -> Result<CombinedReport> {
    solve_constrained_with(inst, &MaximizeOptions::default())
}

pub fn solve_constrained_with(inst: &Instance, opts: &MaximizeOptions) -> Result<CombinedReport> {
    let one = candidate_one(inst)?;
    let two = candidate_two_with(inst, opts)?;
    let beta_used = FeasibilitySystem::from_family(inst.constraint()).guarantee();
    let best = if two.revenue > one.revenue {
        two.clone()
    } else {
        one.clone()
    };
    Ok(CombinedReport {
        best,
        both: vec![one, two],
        beta_used,
    })
}
