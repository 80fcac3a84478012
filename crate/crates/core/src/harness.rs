//! Benchmark harness: generates instances, runs the solvers, and compares
//! them with the oracles whenever the instance fits the oracle budget.
//!
//! Trials run in parallel and are keyed by index; the report carries no
//! timestamp, so equal inputs give byte-identical JSON.

use crate::constrained::solve_constrained_with;
use crate::error::Result;
use crate::exact::solve_exact_with_tolerance;
use crate::generator::{generate_stream, GeneratorConfig};
use crate::model::{expected_revenue, Instance};
use crate::oracle::{oracle_p0, oracle_p2, oracle_p5, OracleBudget};
use crate::submodular::MaximizeOptions;
use rayon::prelude::*;
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchOptions {
    pub trials: usize,
    pub budget: OracleBudget,
    pub tolerance: f64,
    pub maximize: MaximizeOptions,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            trials: 50,
            budget: OracleBudget::default(),
            tolerance: crate::exact::INNER_TOL,
            maximize: MaximizeOptions::default(),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialStatus {
    Certified,
    Uncertified,
    Error,
}

/// Oracle comparison of one trial; absent for uncertified trials.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub oracle_p0: f64,
    pub oracle_p2: f64,
    pub part_sponsored: f64,
    pub part_organic: f64,
    /// Optimum of the organic subproblem against the candidate's `w0'`.
    pub oracle_p5: f64,
    /// Achieved share of `oracle_p5` by the organic step; 1 when either
    /// `oracle_p5` or the organic share of the optimum is 0.
    pub beta_inst: f64,
    /// Constrained revenue over `oracle_p2`.
    pub approx_ratio: f64,
    /// `beta_inst / (beta_inst + 1)`.
    pub approx_bound: f64,
    pub bound_holds: bool,
    pub exact_matches_oracle: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialReport {
    pub index: usize,
    pub status: TrialStatus,
    pub n_organic: usize,
    pub n_sponsored: usize,
    pub k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_revenue: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub candidate_one: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub candidate_two: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constrained_revenue: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub organic_step_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_impl: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Certificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<serde_json::Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Quantiles {
    pub min: f64,
    pub p10: f64,
    pub median: f64,
    pub p90: f64,
    pub max: f64,
}

impl Quantiles {
    /// Nearest-rank quantiles; `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Quantiles> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let at = |q: f64| v[((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1];
        Some(Quantiles {
            min: v[0],
            p10: at(0.1),
            median: at(0.5),
            p90: at(0.9),
            max: v[v.len() - 1],
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub trials: usize,
    pub certified: usize,
    pub uncertified: usize,
    pub errors: usize,
    pub bound_violations: usize,
    pub exact_mismatches: usize,
    pub approx_ratio: Option<Quantiles>,
    pub beta_inst: Option<Quantiles>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub config: GeneratorConfig,
    pub options: BenchOptions,
    pub summary: Summary,
    pub trials: Vec<TrialReport>,
}

const CHECK_TOL: f64 = 1e-9;

pub fn run_bench(cfg: &GeneratorConfig, opts: &BenchOptions) -> Result<BenchReport> {
    cfg.validate()?;
    let trials: Vec<TrialReport> = (0..opts.trials)
        .into_par_iter()
        .map(|index| -> Result<TrialReport> {
            let inst = generate_stream(cfg, index as u64)?;
            Ok(run_trial(index, &inst, opts))
        })
        .collect::<Result<_>>()?;

    let ratios: Vec<f64> = trials
        .iter()
        .filter_map(|t| t.certificate.as_ref().map(|c| c.approx_ratio))
        .collect();
    let betas: Vec<f64> = trials
        .iter()
        .filter_map(|t| t.certificate.as_ref().map(|c| c.beta_inst))
        .collect();
    let count = |s: TrialStatus| trials.iter().filter(|t| t.status == s).count();
    let summary = Summary {
        trials: trials.len(),
        certified: count(TrialStatus::Certified),
        uncertified: count(TrialStatus::Uncertified),
        errors: count(TrialStatus::Error),
        bound_violations: trials
            .iter()
            .filter(|t| t.certificate.as_ref().is_some_and(|c| !c.bound_holds))
            .count(),
        exact_mismatches: trials
            .iter()
            .filter(|t| {
                t.certificate
                    .as_ref()
                    .is_some_and(|c| !c.exact_matches_oracle)
            })
            .count(),
        approx_ratio: Quantiles::of(&ratios),
        beta_inst: Quantiles::of(&betas),
    };
    Ok(BenchReport {
        config: cfg.clone(),
        options: opts.clone(),
        summary,
        trials,
    })
}

/// Runs every solver on `inst` and, within budget, every oracle.
pub fn run_trial(index: usize, inst: &Instance, opts: &BenchOptions) -> TrialReport {
    let mut report = TrialReport {
        index,
        status: TrialStatus::Uncertified,
        n_organic: inst.organic().len(),
        n_sponsored: inst.sponsored().len(),
        k: inst.k(),
        exact_revenue: None,
        candidate_one: None,
        candidate_two: None,
        constrained_revenue: None,
        organic_step_value: None,
        beta_impl: None,
        certificate: None,
        error: None,
    };
    if let Err(e) = fill_trial(&mut report, inst, opts) {
        report.status = TrialStatus::Error;
        report.error = Some(crate::io::error_json(&e)["error"].clone());
    }
    report
}

fn fill_trial(report: &mut TrialReport, inst: &Instance, opts: &BenchOptions) -> Result<()> {
    let unconstrained = inst.with_constraint(crate::model::ConstraintFamily::Unconstrained)?;
    let exact = solve_exact_with_tolerance(&unconstrained, opts.tolerance)?;
    report.exact_revenue = Some(exact.revenue);

    let combined = solve_constrained_with(inst, &opts.maximize)?;
    let step = combined.both[1]
        .organic_step
        .as_ref()
        .expect("candidate II carries its organic step");
    report.candidate_one = Some(combined.both[0].revenue);
    report.candidate_two = Some(combined.both[1].revenue);
    report.constrained_revenue = Some(combined.best.revenue);
    report.organic_step_value = Some(step.value);
    report.beta_impl = Some(combined.beta_used);

    if !opts.budget.admits(inst) {
        return Ok(());
    }
    let (_, p0) = oracle_p0(inst, &opts.budget)?;
    let p2 = oracle_p2(inst, &opts.budget)?;
    let (_, p5) = oracle_p5(inst, step.w0_prime, &opts.budget)?;
    let beta_inst = if p5 <= 0.0 || p2.part_organic <= 0.0 {
        1.0
    } else {
        step.value / p5
    };
    let ratio = if p2.revenue <= 0.0 {
        1.0
    } else {
        combined.best.revenue / p2.revenue
    };
    let bound = beta_inst / (beta_inst + 1.0);
    debug_assert!(
        (expected_revenue(inst, &combined.best.placement)? - combined.best.revenue).abs()
            <= CHECK_TOL
    );
    report.certificate = Some(Certificate {
        oracle_p0: p0,
        oracle_p2: p2.revenue,
        part_sponsored: p2.part_sponsored,
        part_organic: p2.part_organic,
        oracle_p5: p5,
        beta_inst,
        approx_ratio: ratio,
        approx_bound: bound,
        bound_holds: combined.best.revenue >= bound * p2.revenue - CHECK_TOL,
        exact_matches_oracle: (exact.revenue - p0).abs() <= CHECK_TOL,
    });
    report.status = TrialStatus::Certified;
    Ok(())
}
