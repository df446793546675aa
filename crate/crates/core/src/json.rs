//! JSON document format for structures.
//!
//! ```json
//! { "universe": 3,
//!   "spec": { "ordered_arities": [3], "max_arity": 3, "allow_point_order": true },
//!   "relations": { "1": { "classes": [[[0],[1]],[[2]]] },
//!                  "2": { "classes": [[[0,1],[0,2],[1,2]]] },
//!                  "3": { "classes": [[[0,1,2]]], "order": [0] } },
//!   "point_order": [0, 1, 2] }
//! ```
//!
//! The position of a class in `classes` is its identifier. Decoding accepts
//! classes in any order and relabels canonically.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ClassSpec, FinStructure};
use crate::subset;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureDoc {
    pub universe: usize,
    pub spec: ClassSpec,
    #[serde(default)]
    pub relations: BTreeMap<String, RelationDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point_order: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationDoc {
    pub classes: Vec<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<Vec<u32>>,
}

impl From<&FinStructure> for StructureDoc {
    fn from(s: &FinStructure) -> Self {
        let relations = (1..=s.tracked_arities())
            .map(|n| {
                let doc = RelationDoc { classes: s.members(n), order: s.class_order(n).map(<[u32]>::to_vec) };
                (n.to_string(), doc)
            })
            .collect();
        StructureDoc { universe: s.size(), spec: s.spec().clone(), relations, point_order: s.point_order().map(<[usize]>::to_vec) }
    }
}

impl StructureDoc {
    pub fn into_structure(self) -> Result<FinStructure> {
        let err = |msg: String| Err(Error::Decode(msg));
        let m = self.universe;
        let spec = self.spec;
        let mut by_arity = BTreeMap::new();
        for (key, rel) in self.relations {
            let Ok(n) = key.parse::<usize>() else {
                return err(format!("relation key {key:?} is not an arity"));
            };
            if n == 0 {
                return err("arity 0 is not a relation".into());
            }
            if n > m {
                return err(format!("arity {n} exceeds universe size {m}"));
            }
            if n > spec.max_arity() {
                return err(format!("arity {n} exceeds max_arity {}", spec.max_arity()));
            }
            by_arity.insert(n, rel);
        }
        let tracked = spec.tracked(m);
        let mut labels = Vec::with_capacity(tracked);
        let mut orders = BTreeMap::new();
        for n in 1..=tracked {
            let Some(rel) = by_arity.remove(&n) else {
                return err(format!("arity {n}: relation missing, partition not total"));
            };
            let total = subset::count(m, n);
            let mut lab = vec![u32::MAX; total];
            for (c, class) in rel.classes.iter().enumerate() {
                if class.is_empty() {
                    return err(format!("arity {n}: class {c} has no members"));
                }
                for s in class {
                    if s.len() != n {
                        return err(format!("arity {n}: subset {s:?} has the wrong size"));
                    }
                    if s.windows(2).any(|w| w[0] >= w[1]) {
                        return err(format!("arity {n}: subset {s:?} is not strictly increasing"));
                    }
                    if s[n - 1] >= m {
                        return err(format!("arity {n}: subset {s:?} leaves the universe"));
                    }
                    let r = subset::rank(s);
                    if lab[r] != u32::MAX {
                        return err(format!("arity {n}: subset {s:?} listed twice"));
                    }
                    lab[r] = c as u32;
                }
            }
            if let Some(r) = lab.iter().position(|&l| l == u32::MAX) {
                return err(format!("arity {n}: subset {:?} belongs to no class, partition not total", subset::unrank(r, n)));
            }
            match (spec.is_ordered(n), rel.order) {
                (true, Some(o)) => {
                    orders.insert(n, o);
                }
                (true, None) => return err(format!("arity {n}: ordered arity without an order")),
                (false, Some(_)) => return err(format!("arity {n}: order given for an unordered arity")),
                (false, None) => {}
            }
            labels.push(lab);
        }
        FinStructure::from_labels(spec, m, labels, orders, self.point_order).map_err(|e| match e {
            Error::Input(msg) => Error::Decode(msg),
            other => other,
        })
    }
}

pub fn encode(s: &FinStructure) -> Vec<u8> {
    let mut out = serde_json::to_vec(&StructureDoc::from(s)).expect("structure serializes");
    out.push(b'\n');
    out
}

/// Decodes a document; if `spec` is given the document's spec must equal it.
pub fn decode(bytes: &[u8], spec: Option<&ClassSpec>) -> Result<FinStructure> {
    let doc: StructureDoc = serde_json::from_slice(bytes).map_err(|e| Error::Decode(e.to_string()))?;
    if let Some(spec) = spec {
        if &doc.spec != spec {
            return Err(Error::Decode("document spec differs from the expected class spec".into()));
        }
    }
    doc.into_structure()
}
