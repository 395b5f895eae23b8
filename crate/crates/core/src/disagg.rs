//! Expansion of an aggregate PE matrix to a finer one.
//!
//! Each parent food group is split into children. Child own-PEs are
//! strengthened by the disaggregation scalar, and cross-PEs are spread over
//! children in proportion to their within-group expenditure shares so that,
//! for every child row, the elasticities over any parent group's children add
//! up to the parent-level elasticity for that pair of groups.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::demand::{Basket, PeMatrix};
use crate::error::{Error, Result};

pub const SHARE_TOLERANCE: f64 = 1e-9;

/// Per-subgroup strengthening of own-PEs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisaggScalar {
    pub value: f64,
    pub sd: f64,
}

impl Default for DisaggScalar {
    fn default() -> Self {
        Self {
            value: 0.025,
            sd: 0.0125,
        }
    }
}

impl DisaggScalar {
    pub fn fixed(value: f64) -> Self {
        Self { value, sd: 0.0 }
    }

    /// Sampled values can fall below zero; the scalar itself cannot.
    pub fn clamped(value: f64) -> f64 {
        value.max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParentGroup {
    pub parent_id: String,
    pub children: Vec<String>,
    /// Within-group expenditure shares, aligned with `children`.
    pub shares: Vec<f64>,
}

/// Assignment of child foods to parent groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMapping {
    groups: Vec<ParentGroup>,
}

/// One row of a mapping file.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub child_id: String,
    pub parent_id: String,
    pub share: Option<f64>,
}

impl GroupMapping {
    pub fn new(groups: Vec<ParentGroup>) -> Result<Self> {
        let mut seen_children = HashSet::new();
        let mut seen_parents = HashSet::new();
        for g in &groups {
            if !seen_parents.insert(g.parent_id.as_str()) {
                return Err(Error::invalid(format!("parent `{}` listed twice", g.parent_id)));
            }
            if g.children.is_empty() {
                return Err(Error::invalid(format!("parent `{}` has no children", g.parent_id)));
            }
            if g.children.len() != g.shares.len() {
                return Err(Error::DimensionMismatch(format!(
                    "parent `{}`: {} children, {} shares",
                    g.parent_id,
                    g.children.len(),
                    g.shares.len()
                )));
            }
            check_shares(&g.parent_id, &g.shares)?;
            for c in &g.children {
                if !seen_children.insert(c.as_str()) {
                    return Err(Error::invalid(format!(
                        "child `{c}` belongs to more than one parent"
                    )));
                }
            }
        }
        Ok(Self { groups })
    }

    /// Every parent maps to itself with share 1.
    pub fn identity(ids: &[String]) -> Self {
        Self {
            groups: ids
                .iter()
                .map(|id| ParentGroup {
                    parent_id: id.clone(),
                    children: vec![id.clone()],
                    shares: vec![1.0],
                })
                .collect(),
        }
    }

    /// Groups foods by `group_id`, with shares from baseline expenditure.
    pub fn from_basket_groups(basket: &Basket) -> Result<Self> {
        let rows: Vec<Assignment> = basket
            .items()
            .iter()
            .map(|f| Assignment {
                child_id: f.id.clone(),
                parent_id: f.group_id.clone(),
                share: None,
            })
            .collect();
        Self::from_assignments(&rows, Some(basket))
    }

    /// Builds a mapping from file rows. A parent's shares must be either all
    /// given or all absent; absent shares come from `basket` expenditure.
    pub fn from_assignments(rows: &[Assignment], basket: Option<&Basket>) -> Result<Self> {
        let mut order: Vec<String> = Vec::new();
        let mut members: HashMap<String, Vec<&Assignment>> = HashMap::new();
        for r in rows {
            if !members.contains_key(&r.parent_id) {
                order.push(r.parent_id.clone());
            }
            members.entry(r.parent_id.clone()).or_default().push(r);
        }
        let mut groups = Vec::with_capacity(order.len());
        for parent in order {
            let kids = &members[&parent];
            let children: Vec<String> = kids.iter().map(|r| r.child_id.clone()).collect();
            let given = kids.iter().filter(|r| r.share.is_some()).count();
            let shares = if given == kids.len() {
                kids.iter().map(|r| r.share.unwrap_or_default()).collect()
            } else if given == 0 {
                let basket = basket.ok_or_else(|| {
                    Error::invalid(format!(
                        "parent `{parent}` has no shares and no basket to derive them from"
                    ))
                })?;
                expenditure_shares(basket, &children)?
            } else {
                return Err(Error::InvalidShares {
                    group: parent,
                    reason: "shares given for some children but not others".into(),
                });
            };
            groups.push(ParentGroup {
                parent_id: parent,
                children,
                shares,
            });
        }
        Self::new(groups)
    }

    pub fn groups(&self) -> &[ParentGroup] {
        &self.groups
    }

    pub fn group(&self, parent_id: &str) -> Option<&ParentGroup> {
        self.groups.iter().find(|g| g.parent_id == parent_id)
    }

    pub fn child_count(&self) -> usize {
        self.groups.iter().map(|g| g.children.len()).sum()
    }
}

fn expenditure_shares(basket: &Basket, children: &[String]) -> Result<Vec<f64>> {
    let spend: Vec<f64> = children
        .iter()
        .map(|c| {
            basket
                .index_of(c)
                .map(|k| basket.items()[k].expenditure())
                .ok_or_else(|| Error::invalid(format!("child `{c}` is not a known food")))
        })
        .collect::<Result<_>>()?;
    let total: f64 = spend.iter().sum();
    if total > 0.0 {
        Ok(spend.iter().map(|s| s / total).collect())
    } else {
        // No baseline spending in the group: split evenly.
        Ok(vec![1.0 / children.len() as f64; children.len()])
    }
}

fn check_shares(group: &str, shares: &[f64]) -> Result<()> {
    if shares.iter().any(|s| !(s.is_finite() && (0.0..=1.0).contains(s))) {
        return Err(Error::InvalidShares {
            group: group.into(),
            reason: "each share must lie in [0, 1]".into(),
        });
    }
    let sum: f64 = shares.iter().sum();
    if (sum - 1.0).abs() > SHARE_TOLERANCE {
        return Err(Error::InvalidShares {
            group: group.into(),
            reason: format!("shares sum to {sum}"),
        });
    }
    Ok(())
}

/// Strengthened own-PE of each of `n_children` children: `parent (1 + n s)`.
pub fn child_own_pe(parent_own: f64, n_children: usize, s: f64) -> Result<f64> {
    if parent_own > 0.0 {
        return Err(Error::PositiveOwnPe {
            index: 0,
            value: parent_own,
        });
    }
    if n_children == 0 {
        return Err(Error::invalid("a group needs at least one child"));
    }
    if !(s >= 0.0) {
        return Err(Error::invalid(format!("disaggregation scalar {s} is negative")));
    }
    Ok(parent_own * (1.0 + n_children as f64 * s))
}

/// Square block for the children of one group. Row `i` holds the child own-PE
/// on the diagonal and `share_j / (1 - share_i) * (|own_i| - |parent|)` in
/// column `j`, so each row sums to the parent own-PE.
pub fn within_group_cross_pes(
    child_owns: &[f64],
    parent_own: f64,
    shares: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let m = shares.len();
    if child_owns.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "{} child own-PEs for {} shares",
            child_owns.len(),
            m
        )));
    }
    check_shares("within-group block", shares)?;
    if m == 1 {
        return Ok(vec![vec![parent_own]]);
    }
    let mut block = vec![vec![0.0; m]; m];
    for i in 0..m {
        if shares[i] >= 1.0 {
            return Err(Error::DegenerateShare(format!("child {i}")));
        }
        let excess = child_owns[i].abs() - parent_own.abs();
        if excess < 0.0 {
            return Err(Error::invalid(format!(
                "child own-PE {} weaker than parent {}",
                child_owns[i], parent_own
            )));
        }
        let rest = 1.0 - shares[i];
        for j in 0..m {
            block[i][j] = if i == j {
                child_owns[i]
            } else {
                shares[j] / rest * excess
            };
        }
    }
    Ok(block)
}

/// `m_a x m_b` block with every row equal to `parent_cross * shares_b`.
pub fn cross_group_block(parent_cross: f64, shares_b: &[f64], m_a: usize) -> Result<Vec<Vec<f64>>> {
    check_shares("cross-group block", shares_b)?;
    let row: Vec<f64> = shares_b.iter().map(|w| parent_cross * w).collect();
    Ok(vec![row; m_a])
}

/// Expands `parent` over `mapping` with scalar `s`. Children are ordered by
/// parent (in parent-matrix order), then by their order in the mapping.
pub fn expand_matrix(parent: &PeMatrix, mapping: &GroupMapping, s: f64) -> Result<PeMatrix> {
    parent.ensure_square()?;
    let groups: Vec<&ParentGroup> = parent
        .food_ids
        .iter()
        .map(|id| mapping.group(id).ok_or_else(|| Error::MappingGap(id.clone())))
        .collect::<Result<_>>()?;
    if mapping.groups().len() != parent.dim() {
        let extra = mapping
            .groups()
            .iter()
            .find(|g| parent.index_of(&g.parent_id).is_none())
            .map(|g| g.parent_id.clone())
            .unwrap_or_default();
        return Err(Error::DimensionMismatch(format!(
            "mapping parent `{extra}` is not in the PE matrix"
        )));
    }

    let offsets: Vec<usize> = groups
        .iter()
        .scan(0, |acc, g| {
            let start = *acc;
            *acc += g.children.len();
            Some(start)
        })
        .collect();
    let m = mapping.child_count();
    let mut values = vec![vec![0.0; m]; m];

    for (a, ga) in groups.iter().enumerate() {
        for (b, gb) in groups.iter().enumerate() {
            let e = parent.get(a, b);
            let block = if a == b {
                let n = ga.children.len();
                let own = if n == 1 {
                    e
                } else {
                    child_own_pe(e, n, s).map_err(|err| match err {
                        Error::PositiveOwnPe { value, .. } => Error::PositiveOwnPe { index: a, value },
                        other => other,
                    })?
                };
                within_group_cross_pes(&vec![own; n], e, &ga.shares)?
            } else {
                cross_group_block(e, &gb.shares, ga.children.len())?
            };
            for (r, row) in block.iter().enumerate() {
                values[offsets[a] + r][offsets[b]..offsets[b] + row.len()].copy_from_slice(row);
            }
        }
    }

    let food_ids = groups
        .iter()
        .flat_map(|g| g.children.iter().cloned())
        .collect();
    Ok(PeMatrix::new(food_ids, values))
}

/// Largest deviation between a child-row block sum and its parent entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AddingUpAudit {
    pub rows_checked: usize,
    pub blocks_checked: usize,
    pub max_abs_residual: f64,
}

pub fn audit_adding_up(
    parent: &PeMatrix,
    mapping: &GroupMapping,
    child: &PeMatrix,
) -> Result<AddingUpAudit> {
    let mut audit = AddingUpAudit {
        rows_checked: 0,
        blocks_checked: 0,
        max_abs_residual: 0.0,
    };
    for (a, pa) in parent.food_ids.iter().enumerate() {
        let ga = mapping.group(pa).ok_or_else(|| Error::MappingGap(pa.clone()))?;
        for ci in &ga.children {
            let i = child
                .index_of(ci)
                .ok_or_else(|| Error::MappingGap(ci.clone()))?;
            audit.rows_checked += 1;
            for (b, pb) in parent.food_ids.iter().enumerate() {
                let gb = mapping.group(pb).ok_or_else(|| Error::MappingGap(pb.clone()))?;
                let mut sum = 0.0;
                for cj in &gb.children {
                    let j = child
                        .index_of(cj)
                        .ok_or_else(|| Error::MappingGap(cj.clone()))?;
                    sum += child.get(i, j);
                }
                audit.blocks_checked += 1;
                audit.max_abs_residual = audit.max_abs_residual.max((sum - parent.get(a, b)).abs());
            }
        }
    }
    Ok(audit)
}
