//! JSON instance and placement files.
//!
//! Product ids in files are strings; they become [`ProductId`]s in file
//! order. Weights are sparse and absent pairs are 0. Errors name the
//! offending key, e.g. `valid_positions.s1` or `weights[3].slot`.

use crate::error::{Error, Result};
use crate::model::{
    ConstraintFamily, Instance, InstanceBuilder, Placement, PositionId, PositionKind, ProductId,
    ProductKind,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub products: Vec<ProductEntry>,
    pub positions: Vec<PositionEntry>,
    #[serde(default)]
    pub weights: Vec<WeightEntry>,
    pub w0: f64,
    #[serde(default)]
    pub valid_positions: BTreeMap<String, Vec<usize>>,
    #[serde(default)]
    pub constraint: ConstraintEntry,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductEntry {
    pub id: String,
    pub kind: ProductKind,
    pub revenue: f64,
    /// Knapsack cost; only meaningful with a knapsack constraint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PositionEntry {
    pub slot: usize,
    pub kind: PositionKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightEntry {
    pub product: String,
    pub slot: usize,
    pub w: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ConstraintEntry {
    #[default]
    None,
    Knapsack {
        capacity: f64,
    },
    Partition {
        groups: Vec<GroupEntry>,
    },
    Cardinality {
        max: usize,
    },
    Explicit {
        sets: Vec<Vec<String>>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupEntry {
    pub products: Vec<String>,
    pub cap: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementFile {
    pub placement: Vec<PlacementEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementEntry {
    pub slot: usize,
    pub product: String,
}

/// Deserializes `text`, reporting the JSON path of the first error.
pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

pub fn parse_instance(text: &str) -> Result<Instance> {
    instance_from_file(&from_json::<InstanceFile>(text)?)
}

pub fn instance_from_file(file: &InstanceFile) -> Result<Instance> {
    let k = file.positions.len();
    let mut kinds: Vec<Option<PositionKind>> = vec![None; k];
    for (n, p) in file.positions.iter().enumerate() {
        if p.slot == 0 || p.slot > k {
            return Err(Error::validation(
                format!("positions[{n}].slot"),
                format!("slot {} outside 1..={k}", p.slot),
            ));
        }
        if kinds[p.slot - 1].replace(p.kind).is_some() {
            return Err(Error::validation(
                format!("positions[{n}].slot"),
                format!("slot {} listed twice", p.slot),
            ));
        }
    }
    let kinds: Vec<PositionKind> = kinds
        .into_iter()
        .map(|k| k.expect("all slots seen"))
        .collect();

    let mut b = InstanceBuilder::new(file.w0);
    b.positions(&kinds);
    let mut ids = BTreeMap::new();
    for p in &file.products {
        let id = match p.kind {
            ProductKind::Organic => b.organic(&p.id, p.revenue),
            ProductKind::Sponsored => b.sponsored(&p.id, p.revenue, &[]),
        };
        if ids.insert(p.id.as_str(), id).is_some() {
            return Err(Error::validation(
                format!("products.{}", p.id),
                "duplicate product id",
            ));
        }
    }
    let lookup = |name: &str, key: String| -> Result<ProductId> {
        ids.get(name)
            .copied()
            .ok_or_else(|| Error::validation(key, format!("unknown product `{name}`")))
    };

    let mut seen = BTreeSet::new();
    for (n, w) in file.weights.iter().enumerate() {
        let id = lookup(&w.product, format!("weights[{n}].product"))?;
        if !seen.insert((id, w.slot)) {
            return Err(Error::validation(
                format!("weights[{n}]"),
                format!("duplicate weight for `{}` at slot {}", w.product, w.slot),
            ));
        }
        b.weight(id, w.slot, w.w);
    }

    for (name, slots) in &file.valid_positions {
        let id = lookup(name, format!("valid_positions.{name}"))?;
        b.set_valid_slots(id, slots);
    }

    let mut cost = BTreeMap::new();
    for p in &file.products {
        if let Some(c) = p.cost {
            if !matches!(file.constraint, ConstraintEntry::Knapsack { .. }) {
                return Err(Error::validation(
                    format!("products.{}.cost", p.id),
                    "cost given but the constraint is not a knapsack",
                ));
            }
            cost.insert(ids[p.id.as_str()], c);
        }
    }
    let constraint = match &file.constraint {
        ConstraintEntry::None => ConstraintFamily::Unconstrained,
        ConstraintEntry::Knapsack { capacity } => ConstraintFamily::Knapsack {
            cost,
            capacity: *capacity,
        },
        ConstraintEntry::Partition { groups } => {
            let mut gs = Vec::with_capacity(groups.len());
            for (q, g) in groups.iter().enumerate() {
                let members = g
                    .products
                    .iter()
                    .map(|name| lookup(name, format!("constraint.groups[{q}].products")))
                    .collect::<Result<Vec<_>>>()?;
                gs.push(members);
            }
            ConstraintFamily::PartitionMatroid {
                groups: gs,
                caps: groups.iter().map(|g| g.cap).collect(),
            }
        }
        ConstraintEntry::Cardinality { max } => ConstraintFamily::Cardinality { max: *max },
        ConstraintEntry::Explicit { sets } => {
            let mut out = Vec::with_capacity(sets.len());
            for (q, s) in sets.iter().enumerate() {
                let members = s
                    .iter()
                    .map(|name| lookup(name, format!("constraint.sets[{q}]")))
                    .collect::<Result<BTreeSet<_>>>()?;
                out.push(members);
            }
            ConstraintFamily::Explicit { sets: out }
        }
    };
    b.constraint(constraint);
    b.build()
}

pub fn instance_to_file(inst: &Instance) -> InstanceFile {
    let name = |id: ProductId| inst.name(id).to_string();
    let products = inst
        .products()
        .map(|(id, p)| ProductEntry {
            id: p.name.clone(),
            kind: p.kind,
            revenue: p.revenue,
            cost: match inst.constraint() {
                ConstraintFamily::Knapsack { cost, .. } => cost.get(&id).copied(),
                _ => None,
            },
        })
        .collect();
    let positions = inst
        .position_kinds()
        .iter()
        .enumerate()
        .map(|(t, &kind)| PositionEntry { slot: t + 1, kind })
        .collect();
    let mut weights = Vec::new();
    for (id, _) in inst.products() {
        for t in 1..=inst.k() {
            let w = inst.weight(id, PositionId(t));
            if w != 0.0 {
                weights.push(WeightEntry {
                    product: name(id),
                    slot: t,
                    w,
                });
            }
        }
    }
    let valid_positions = inst
        .sponsored()
        .into_iter()
        .map(|s| {
            (
                name(s),
                inst.valid_positions(s).iter().map(|t| t.0).collect(),
            )
        })
        .collect();
    let constraint = match inst.constraint() {
        ConstraintFamily::Unconstrained => ConstraintEntry::None,
        ConstraintFamily::Knapsack { capacity, .. } => ConstraintEntry::Knapsack {
            capacity: *capacity,
        },
        ConstraintFamily::PartitionMatroid { groups, caps } => ConstraintEntry::Partition {
            groups: groups
                .iter()
                .zip(caps)
                .map(|(g, &cap)| GroupEntry {
                    products: g.iter().map(|&i| name(i)).collect(),
                    cap,
                })
                .collect(),
        },
        ConstraintFamily::Cardinality { max } => ConstraintEntry::Cardinality { max: *max },
        ConstraintFamily::Explicit { sets } => ConstraintEntry::Explicit {
            sets: sets
                .iter()
                .map(|s| s.iter().map(|&i| name(i)).collect())
                .collect(),
        },
    };
    InstanceFile {
        products,
        positions,
        weights,
        w0: inst.w0(),
        valid_positions,
        constraint,
    }
}

/// Pretty-printed JSON for `inst`.
pub fn instance_to_json(inst: &Instance) -> String {
    serde_json::to_string_pretty(&instance_to_file(inst)).expect("instance files always serialize")
}

pub fn placement_entries(inst: &Instance, pl: &Placement) -> Vec<PlacementEntry> {
    pl.pairs()
        .iter()
        .map(|&(t, i)| PlacementEntry {
            slot: t.0,
            product: if i.0 < inst.num_products() {
                inst.name(i).to_string()
            } else {
                i.to_string()
            },
        })
        .collect()
}

/// Reads a placement file. Slots are not range-checked here so that
/// [`crate::check_feasible`] can report them; unknown product names are
/// errors since they have no id.
pub fn parse_placement(inst: &Instance, text: &str) -> Result<Placement> {
    let file: PlacementFile = from_json(text)?;
    let mut pairs = Vec::with_capacity(file.placement.len());
    for (n, e) in file.placement.iter().enumerate() {
        let id = inst.product_id(&e.product).ok_or_else(|| {
            Error::validation(
                format!("placement[{n}].product"),
                format!("unknown product `{}`", e.product),
            )
        })?;
        pairs.push((PositionId(e.slot), id));
    }
    Ok(Placement::from_pairs(pairs))
}

pub fn placement_to_json(inst: &Instance, pl: &Placement) -> String {
    let file = PlacementFile {
        placement: placement_entries(inst, pl),
    };
    serde_json::to_string_pretty(&file).expect("placement files always serialize")
}

/// A violation as JSON with product ids replaced by their names, plus a
/// human-readable `message`.
pub fn violation_json(inst: &Instance, v: &crate::model::Violation) -> serde_json::Value {
    let mut value = serde_json::to_value(v).expect("violations serialize");
    let mut message = v.to_string();
    if let Some(id) = value.get("product").and_then(|p| p.as_u64()) {
        let id = ProductId(id as usize);
        if id.0 < inst.num_products() {
            value["product"] = serde_json::json!(inst.name(id));
            message = message.replace(&id.to_string(), &format!("`{}`", inst.name(id)));
        }
    }
    value["message"] = serde_json::json!(message);
    value
}

/// Machine-readable form of an error: `{"error": {"kind", "message", ...}}`.
pub fn error_json(err: &Error) -> serde_json::Value {
    let mut body = serde_json::json!({
        "kind": err.kind(),
        "message": err.to_string(),
    });
    let extra = match err {
        Error::Parse { path, .. } => serde_json::json!({ "path": path }),
        Error::Validation { key, reason } => serde_json::json!({ "key": key, "reason": reason }),
        Error::InvalidPlacement(v) => serde_json::json!({ "violations": v }),
        Error::ConvergenceFailure { iterations } => serde_json::json!({ "iterations": iterations }),
        Error::BudgetExceeded { what, size, limit } => {
            serde_json::json!({ "what": what, "size": size, "limit": limit })
        }
        Error::GroundSetTooLarge { size, limit } => {
            serde_json::json!({ "size": size, "limit": limit })
        }
        _ => serde_json::json!({}),
    };
    if let (Some(b), serde_json::Value::Object(e)) = (body.as_object_mut(), extra) {
        b.extend(e);
    }
    serde_json::json!({ "error": body })
}
