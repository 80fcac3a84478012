//! Seeded random instances.
//!
//! Weights follow `w(i, t) = base_i * decay^(t - 1)`. Reserved slots are a
//! random subset of size `n_sponsored`, and every valid-position pattern
//! contains a random bijection of sponsored products onto reserved slots, so
//! generated instances always admit a feasible placement.

use crate::error::{Error, Result};
use crate::model::{ConstraintFamily, Instance, InstanceBuilder, PositionKind, ProductId};
use rand::seq::{index::sample, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValidPattern {
    /// Every reserved slot.
    Full,
    /// Exactly the slot given by the hidden bijection.
    Singleton,
    /// The bijection slot plus each other reserved slot with probability 1/2.
    Random,
    /// One of the three above, drawn per product.
    #[default]
    Mixed,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ConstraintRecipe {
    #[default]
    None,
    /// Costs drawn from `cost_range`; capacity is `capacity_fraction` of the
    /// total organic cost.
    Knapsack {
        cost_range: [f64; 2],
        capacity_fraction: f64,
    },
    /// Organic products dealt round-robin into `groups` groups after a
    /// shuffle, each capped at `cap`.
    Partition {
        groups: usize,
        cap: usize,
    },
    Cardinality {
        max: usize,
    },
    /// Knapsack or partition with the given settings, drawn per instance.
    Mixed {
        knapsack_fraction: f64,
        groups: usize,
        cap: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub n_organic: usize,
    pub n_sponsored: usize,
    pub k: usize,
    pub revenue_range: [f64; 2],
    pub weight_range: [f64; 2],
    pub position_decay: f64,
    #[serde(default = "default_w0")]
    pub w0: f64,
    #[serde(default)]
    pub valid_pattern: ValidPattern,
    #[serde(default)]
    pub constraint: ConstraintRecipe,
}

fn default_w0() -> f64 {
    1.0
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            seed: 0,
            n_organic: 3,
            n_sponsored: 2,
            k: 4,
            revenue_range: [1.0, 10.0],
            weight_range: [0.1, 2.0],
            position_decay: 0.8,
            w0: 1.0,
            valid_pattern: ValidPattern::Mixed,
            constraint: ConstraintRecipe::None,
        }
    }
}

fn check_range(name: &str, r: [f64; 2], min: f64) -> Result<()> {
    if !(r[0].is_finite() && r[1].is_finite() && min <= r[0] && r[0] <= r[1]) {
        return Err(Error::Config(format!(
            "{name} must satisfy {min} <= lo <= hi, got [{}, {}]",
            r[0], r[1]
        )));
    }
    Ok(())
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be positive".into()));
        }
        if self.n_sponsored > self.k {
            return Err(Error::Config(format!(
                "n_sponsored = {} exceeds k = {}",
                self.n_sponsored, self.k
            )));
        }
        check_range("revenue_range", self.revenue_range, 0.0)?;
        check_range("weight_range", self.weight_range, 0.0)?;
        if !(self.position_decay > 0.0 && self.position_decay <= 1.0) {
            return Err(Error::Config(format!(
                "position_decay must lie in (0, 1], got {}",
                self.position_decay
            )));
        }
        if !(self.w0.is_finite() && self.w0 > 0.0) {
            return Err(Error::Config(format!(
                "w0 must be positive, got {}",
                self.w0
            )));
        }
        match &self.constraint {
            ConstraintRecipe::Knapsack {
                cost_range,
                capacity_fraction,
            } => {
                check_range("constraint.cost_range", *cost_range, 0.0)?;
                check_fraction(*capacity_fraction)?;
            }
            ConstraintRecipe::Partition { groups, .. } => check_groups(*groups)?,
            ConstraintRecipe::Mixed {
                knapsack_fraction,
                groups,
                ..
            } => {
                check_fraction(*knapsack_fraction)?;
                check_groups(*groups)?;
            }
            ConstraintRecipe::None | ConstraintRecipe::Cardinality { .. } => {}
        }
        Ok(())
    }
}

fn check_fraction(f: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&f) {
        return Err(Error::Config(format!(
            "fraction must lie in [0, 1], got {f}"
        )));
    }
    Ok(())
}

fn check_groups(groups: usize) -> Result<()> {
    if groups == 0 {
        return Err(Error::Config("partition needs at least one group".into()));
    }
    Ok(())
}

pub fn generate(cfg: &GeneratorConfig) -> Result<Instance> {
    generate_stream(cfg, 0)
}

/// Instance number `stream` of the sequence seeded by `cfg.seed`. Streams
/// are independent, so trials can be generated in any order.
pub fn generate_stream(cfg: &GeneratorConfig, stream: u64) -> Result<Instance> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);

    let reserved: BTreeSet<usize> = sample(&mut rng, cfg.k, cfg.n_sponsored)
        .into_iter()
        .map(|t| t + 1)
        .collect();
    let kinds: Vec<PositionKind> = (1..=cfg.k)
        .map(|t| {
            if reserved.contains(&t) {
                PositionKind::Reserved
            } else {
                PositionKind::Organic
            }
        })
        .collect();
    let reserved: Vec<usize> = reserved.into_iter().collect();

    let mut b = InstanceBuilder::new(cfg.w0);
    b.positions(&kinds);
    let [rlo, rhi] = cfg.revenue_range;
    let [wlo, whi] = cfg.weight_range;
    let organic: Vec<ProductId> = (0..cfg.n_organic)
        .map(|i| b.organic(&format!("o{i}"), rng.gen_range(rlo..=rhi)))
        .collect();

    let mut bijection = reserved.clone();
    bijection.shuffle(&mut rng);
    for (j, &own) in bijection.iter().enumerate() {
        let revenue = rng.gen_range(rlo..=rhi);
        let pattern = match cfg.valid_pattern {
            ValidPattern::Mixed => *[
                ValidPattern::Full,
                ValidPattern::Singleton,
                ValidPattern::Random,
            ]
            .choose(&mut rng)
            .expect("nonempty"),
            p => p,
        };
        let slots: Vec<usize> = match pattern {
            ValidPattern::Full => reserved.clone(),
            ValidPattern::Singleton => vec![own],
            _ => reserved
                .iter()
                .copied()
                .filter(|&t| t == own || rng.gen_bool(0.5))
                .collect(),
        };
        b.sponsored(&format!("s{j}"), revenue, &slots);
    }

    let n = cfg.n_organic + cfg.n_sponsored;
    for i in 0..n {
        let base = rng.gen_range(wlo..=whi);
        let row: Vec<f64> = (0..cfg.k)
            .map(|t| base * cfg.position_decay.powi(t as i32))
            .collect();
        b.weight_row(ProductId(i), &row);
    }

    b.constraint(constraint(&cfg.constraint, &organic, &mut rng));
    b.build()
}

fn constraint(
    recipe: &ConstraintRecipe,
    organic: &[ProductId],
    rng: &mut ChaCha8Rng,
) -> ConstraintFamily {
    match recipe {
        ConstraintRecipe::None => ConstraintFamily::Unconstrained,
        ConstraintRecipe::Knapsack {
            cost_range: [lo, hi],
            capacity_fraction,
        } => {
            let cost: std::collections::BTreeMap<ProductId, f64> = organic
                .iter()
                .map(|&i| (i, rng.gen_range(*lo..=*hi)))
                .collect();
            let total: f64 = cost.values().sum();
            ConstraintFamily::Knapsack {
                cost,
                capacity: capacity_fraction * total,
            }
        }
        ConstraintRecipe::Partition { groups, cap } => {
            let mut shuffled = organic.to_vec();
            shuffled.shuffle(rng);
            let mut gs = vec![Vec::new(); *groups];
            for (n, i) in shuffled.into_iter().enumerate() {
                gs[n % groups].push(i);
            }
            for g in &mut gs {
                g.sort();
            }
            ConstraintFamily::PartitionMatroid {
                groups: gs,
                caps: vec![*cap; *groups],
            }
        }
        ConstraintRecipe::Cardinality { max } => ConstraintFamily::Cardinality { max: *max },
        ConstraintRecipe::Mixed {
            knapsack_fraction,
            groups,
            cap,
        } => {
            let sub = if rng.gen_bool(0.5) {
                ConstraintRecipe::Knapsack {
                    cost_range: [0.5, 1.5],
                    capacity_fraction: *knapsack_fraction,
                }
            } else {
                ConstraintRecipe::Partition {
                    groups: *groups,
                    cap: *cap,
                }
            };
            constraint(&sub, organic, rng)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::instance_to_json;
    use crate::model::{PositionId, ProductKind};
    use crate::oracle::count_sponsored_assignments;

    #[test]
    fn same_seed_same_instance() {
        let cfg = GeneratorConfig {
            seed: 42,
            ..GeneratorConfig::default()
        };
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(instance_to_json(&a), instance_to_json(&b));
        let c = generate(&GeneratorConfig {
            seed: 43,
            ..cfg.clone()
        })
        .unwrap();
        assert_ne!(a, c);
        assert_ne!(generate_stream(&cfg, 1).unwrap(), a);
    }

    #[test]
    fn pure_organic() {
        let cfg = GeneratorConfig {
            n_sponsored: 0,
            ..GeneratorConfig::default()
        };
        let inst = generate(&cfg).unwrap();
        assert!(inst.sponsored().is_empty());
        assert!(inst.reserved_positions().is_empty());
        assert_eq!(inst.organic().len(), cfg.n_organic);
    }

    #[test]
    fn unit_decay_is_position_independent() {
        let cfg = GeneratorConfig {
            position_decay: 1.0,
            ..GeneratorConfig::default()
        };
        let inst = generate(&cfg).unwrap();
        for (id, _) in inst.products() {
            let w1 = inst.weight(id, PositionId(1));
            assert!((1..=inst.k()).all(|t| inst.weight(id, PositionId(t)) == w1));
        }
    }

    #[test]
    fn always_feasible() {
        for seed in 0..200 {
            for pattern in [
                ValidPattern::Full,
                ValidPattern::Singleton,
                ValidPattern::Random,
                ValidPattern::Mixed,
            ] {
                let cfg = GeneratorConfig {
                    seed,
                    n_sponsored: 3,
                    k: 5,
                    valid_pattern: pattern,
                    ..GeneratorConfig::default()
                };
                let inst = generate(&cfg).unwrap();
                assert!(count_sponsored_assignments(&inst) >= 1);
                if pattern == ValidPattern::Singleton {
                    assert!(inst
                        .sponsored()
                        .iter()
                        .all(|&s| inst.valid_positions(s).len() == 1));
                }
            }
        }
    }

    #[test]
    fn constraint_recipes() {
        let base = GeneratorConfig {
            n_organic: 5,
            ..GeneratorConfig::default()
        };
        let inst = generate(&GeneratorConfig {
            constraint: ConstraintRecipe::Partition { groups: 2, cap: 1 },
            ..base.clone()
        })
        .unwrap();
        match inst.constraint() {
            ConstraintFamily::PartitionMatroid { groups, caps } => {
                assert_eq!(groups.iter().map(Vec::len).sum::<usize>(), 5);
                assert_eq!(caps, &vec![1, 1]);
            }
            other => panic!("{other:?}"),
        }
        let inst = generate(&GeneratorConfig {
            constraint: ConstraintRecipe::Knapsack {
                cost_range: [1.0, 1.0],
                capacity_fraction: 0.4,
            },
            ..base.clone()
        })
        .unwrap();
        assert!(inst.constraint().admits(&inst.organic()[..2]));
        assert!(!inst.constraint().admits(&inst.organic()[..3]));
        assert!(inst
            .products()
            .all(|(_, p)| p.kind != ProductKind::Sponsored || p.revenue >= 1.0));
    }

    #[test]
    fn bad_configs() {
        for cfg in [
            GeneratorConfig {
                k: 0,
                n_sponsored: 0,
                ..Default::default()
            },
            GeneratorConfig {
                n_sponsored: 5,
                k: 4,
                ..Default::default()
            },
            GeneratorConfig {
                position_decay: 0.0,
                ..Default::default()
            },
            GeneratorConfig {
                revenue_range: [3.0, 1.0],
                ..Default::default()
            },
            GeneratorConfig {
                w0: 0.0,
                ..Default::default()
            },
            GeneratorConfig {
                constraint: ConstraintRecipe::Partition { groups: 0, cap: 1 },
                ..Default::default()
            },
        ] {
            assert_eq!(generate(&cfg).unwrap_err().kind(), "config_error");
        }
    }
}
