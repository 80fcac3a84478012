//! Exact solver for the unconstrained problem.
//!
//! The objective `N(x) / D(x)` with `N = sum r_i w(i,t) x_it` and
//! `D = w0 + sum w(i,t) x_it` is maximized with Dinkelbach's parametric
//! method: for a guess `lambda`, maximize `N(x) - lambda D(x)` over the
//! assignment polytope, then move `lambda` to the revenue of the maximizer.
//! The linearized problem splits into two independent blocks:
//!
//! * sponsored products onto reserved slots, a *perfect* matching over the
//!   valid edges (every sponsored product must be shown, so negative edge
//!   values are still taken);
//! * organic products onto organic slots, an optional matching that only
//!   keeps profitable edges.

use crate::error::{Error, Result};
use crate::matching::{max_weight_matching, max_weight_perfect_matching, BipartiteGraph};
use crate::model::{expected_revenue, Instance, Placement};
use serde::Serialize;

/// Convergence tolerance on the linearized optimum.
pub const INNER_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DinkelbachStep {
    pub lambda: f64,
    pub inner_value: f64,
    #[serde(skip)]
    pub placement: Placement,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct DinkelbachTrace {
    pub iterations: Vec<DinkelbachStep>,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExactSolution {
    pub placement: Placement,
    pub revenue: f64,
    pub trace: DinkelbachTrace,
}

/// Maximizes `sum (r_i - lambda) w(i,t) x_it - lambda * w0` over feasible
/// placements. Returns the maximizer and the maximum.
pub fn inner_parametric_step(inst: &Instance, lambda: f64) -> Result<(Placement, f64)> {
    inner(inst, lambda, true)
}

fn inner(inst: &Instance, lambda: f64, with_organics: bool) -> Result<(Placement, f64)> {
    let sponsored = inst.sponsored();
    let reserved = inst.reserved_positions();
    let mut gs = BipartiteGraph::new(sponsored.len(), reserved.len());
    for (l, &s) in sponsored.iter().enumerate() {
        for (r, &t) in reserved.iter().enumerate() {
            if inst.valid_positions(s).contains(&t) {
                gs.add_edge(l, r, (inst.revenue(s) - lambda) * inst.weight(s, t));
            }
        }
    }
    let sm = max_weight_perfect_matching(&gs).map_err(|_| Error::InfeasibleSponsoredAssignment)?;
    let mut pairs: Vec<_> = sm
        .pairs
        .iter()
        .map(|&(l, r)| (reserved[r], sponsored[l]))
        .collect();
    let mut value = sm.total;

    if with_organics {
        let organic = inst.organic();
        let positions = inst.organic_positions();
        let mut go = BipartiteGraph::new(organic.len(), positions.len());
        for (l, &i) in organic.iter().enumerate() {
            for (r, &t) in positions.iter().enumerate() {
                go.add_edge(l, r, (inst.revenue(i) - lambda) * inst.weight(i, t));
            }
        }
        let om = max_weight_matching(&go);
        pairs.extend(om.pairs.iter().map(|&(l, r)| (positions[r], organic[l])));
        value += om.total;
    }

    Ok((Placement::from_pairs(pairs), value - lambda * inst.w0()))
}

pub fn solve_exact(inst: &Instance) -> Result<ExactSolution> {
    solve_exact_with_tolerance(inst, INNER_TOL)
}

pub fn solve_exact_with_tolerance(inst: &Instance, tol: f64) -> Result<ExactSolution> {
    dinkelbach(inst, tol, true)
}

/// Best placement that shows sponsored products only.
pub fn solve_sponsored_only(inst: &Instance) -> Result<(Placement, f64)> {
    let sol = dinkelbach(inst, INNER_TOL, false)?;
    Ok((sol.placement, sol.revenue))
}

fn dinkelbach(inst: &Instance, tol: f64, with_organics: bool) -> Result<ExactSolution> {
    let n = inst.sponsored().len()
        + if with_organics {
            inst.organic().len()
        } else {
            0
        };
    let cap = (10 * n * inst.k()).max(1);
    let mut trace = DinkelbachTrace::default();
    let mut best: Option<(Placement, f64)> = None;
    let mut lambda = 0.0;
    for _ in 0..cap {
        let (pl, value) = inner(inst, lambda, with_organics)?;
        let rev = expected_revenue(inst, &pl)?;
        trace.iterations.push(DinkelbachStep {
            lambda,
            inner_value: value,
            placement: pl.clone(),
        });
        if best.as_ref().is_none_or(|(_, b)| rev > *b) {
            best = Some((pl, rev));
        }
        // A positive inner value implies rev > lambda; if rounding says
        // otherwise the iteration has reached its numerical fixed point.
        if value <= tol || rev <= lambda {
            trace.converged = true;
            let (placement, revenue) = best.expect("at least one iteration ran");
            return Ok(ExactSolution {
                placement,
                revenue,
                trace,
            });
        }
        lambda = rev;
    }
    Err(Error::ConvergenceFailure { iterations: cap })
}
