use serde::{Deserialize, Serialize};

use crate::distributions::relative_means_clamped;
use crate::error::{Error, Result};

/// One tier as written in a configuration file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TierSpec {
    pub name: String,
    /// `None` for the top tier, otherwise the node being disaggregated.
    pub parent: Option<String>,
    /// Ordered children; the last one absorbs the floor remainder.
    pub children: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tier {
    pub name: String,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Index of the first relative-mean slot of this tier.
    pub first_slot: usize,
}

impl Tier {
    /// Number of relative means (`k - 1`).
    pub fn n_slots(&self) -> usize {
        self.children.len() - 1
    }
}

/// Tree of fuel categories, modelled tier by tier with nested GDMs.
///
/// Within-tier order matters: relative mean `j` is the share of category `j`
/// among households not using categories `0..j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FuelHierarchy {
    nodes: Vec<String>,
    tiers: Vec<Tier>,
    parent: Vec<Option<usize>>,
    tier_of: Vec<usize>,
    child_tier: Vec<Option<usize>>,
    slot_node: Vec<usize>,
    slot_tier: Vec<usize>,
}

impl Default for FuelHierarchy {
    fn default() -> Self {
        Self::from_specs(&default_tiers()).expect("built-in hierarchy is valid")
    }
}

/// Top: solid, kerosene, gas, electricity, others; mid (within solid): biomass,
/// charcoal, coal; lower (within biomass): wood, cropwaste, dung.
pub fn default_tiers() -> Vec<TierSpec> {
    let tier = |name: &str, parent: Option<&str>, children: &[&str]| TierSpec {
        name: name.to_string(),
        parent: parent.map(str::to_string),
        children: children.iter().map(|s| s.to_string()).collect(),
    };
    vec![
        tier(
            "top",
            None,
            &["solid", "kerosene", "gas", "electricity", "others"],
        ),
        tier("mid", Some("solid"), &["biomass", "charcoal", "coal"]),
        tier("lower", Some("biomass"), &["wood", "cropwaste", "dung"]),
    ]
}

impl FuelHierarchy {
    pub fn from_specs(specs: &[TierSpec]) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::Config("hierarchy needs at least one tier".into()));
        }
        let mut nodes: Vec<String> = Vec::new();
        let mut parent = Vec::new();
        let mut tier_of = Vec::new();
        let mut child_tier: Vec<Option<usize>> = Vec::new();
        let mut tiers = Vec::new();
        let mut slot_node = Vec::new();
        let mut slot_tier = Vec::new();
        for (t, spec) in specs.iter().enumerate() {
            if spec.children.len() < 2 {
                return Err(Error::Config(format!(
                    "tier `{}` needs at least two children",
                    spec.name
                )));
            }
            let parent_idx = match (&spec.parent, t) {
                (None, 0) => None,
                (None, _) => {
                    return Err(Error::Config(format!(
                        "only the first tier may lack a parent (`{}`)",
                        spec.name
                    )))
                }
                (Some(p), 0) => {
                    return Err(Error::Config(format!(
                        "the first tier cannot have a parent (`{p}`)"
                    )))
                }
                (Some(p), _) => {
                    let idx = nodes.iter().position(|n| n == p).ok_or_else(|| {
                        Error::Config(format!(
                            "parent `{p}` of tier `{}` is not defined earlier",
                            spec.name
                        ))
                    })?;
                    if child_tier[idx].is_some() {
                        return Err(Error::Config(format!("node `{p}` is disaggregated twice")));
                    }
                    child_tier[idx] = Some(t);
                    Some(idx)
                }
            };
            let first_slot = slot_node.len();
            let mut children = Vec::with_capacity(spec.children.len());
            for (pos, name) in spec.children.iter().enumerate() {
                if nodes.contains(name) {
                    return Err(Error::Config(format!("node `{name}` appears twice")));
                }
                let idx = nodes.len();
                nodes.push(name.clone());
                parent.push(parent_idx);
                tier_of.push(t);
                child_tier.push(None);
                if pos + 1 < spec.children.len() {
                    slot_node.push(idx);
                    slot_tier.push(t);
                }
                children.push(idx);
            }
            tiers.push(Tier {
                name: spec.name.clone(),
                parent: parent_idx,
                children,
                first_slot,
            });
        }
        Ok(Self {
            nodes,
            tiers,
            parent,
            tier_of,
            child_tier,
            slot_node,
            slot_tier,
        })
    }

    pub fn specs(&self) -> Vec<TierSpec> {
        self.tiers
            .iter()
            .map(|t| TierSpec {
                name: t.name.clone(),
                parent: t.parent.map(|p| self.nodes[p].clone()),
                children: t.children.iter().map(|&c| self.nodes[c].clone()).collect(),
            })
            .collect()
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == name)
    }

    pub fn tiers(&self) -> &[Tier] {
        &self.tiers
    }

    /// Parent node, `None` for top-tier nodes.
    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parent[node]
    }

    /// Tier in which `node` appears as a child.
    pub fn tier_of(&self, node: usize) -> usize {
        self.tier_of[node]
    }

    /// Tier disaggregating `node`, if any.
    pub fn child_tier(&self, node: usize) -> Option<usize> {
        self.child_tier[node]
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        self.child_tier[node].is_none()
    }

    /// Number of relative means over all tiers.
    pub fn n_slots(&self) -> usize {
        self.slot_node.len()
    }

    pub fn slot_node(&self, slot: usize) -> usize {
        self.slot_node[slot]
    }

    pub fn slot_tier(&self, slot: usize) -> usize {
        self.slot_tier[slot]
    }

    pub fn slot_name(&self, slot: usize) -> &str {
        &self.nodes[self.slot_node[slot]]
    }

    /// Whether `node` lies strictly below `ancestor`.
    pub fn is_descendant(&self, node: usize, ancestor: usize) -> bool {
        let mut cur = self.parent[node];
        while let Some(p) = cur {
            if p == ancestor {
                return true;
            }
            cur = self.parent[p];
        }
        false
    }

    /// Nodes of the subtree below `node` (excluding `node`).
    pub fn descendants(&self, node: usize) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&n| self.is_descendant(n, node))
            .collect()
    }

    /// Marginal mean of every node given one relative mean per slot.
    pub fn node_means(&self, nu: &[f64], out: &mut [f64]) {
        for tier in &self.tiers {
            let parent_mean = tier.parent.map_or(1.0, |p| out[p]);
            let mut remaining = parent_mean;
            let k = tier.children.len();
            for (pos, &child) in tier.children.iter().enumerate() {
                if pos + 1 == k {
                    out[child] = remaining;
                } else {
                    let v = nu[tier.first_slot + pos];
                    out[child] = remaining * v;
                    remaining *= 1.0 - v;
                }
            }
        }
    }

    /// Relative means per slot from node marginal means, tier by tier.
    pub fn relative_means(&self, means: &[f64], out: &mut [f64]) {
        let mut buf = Vec::new();
        for tier in &self.tiers {
            buf.clear();
            buf.extend(tier.children.iter().map(|&c| means[c]));
            relative_means_clamped(
                &buf,
                &mut out[tier.first_slot..tier.first_slot + tier.n_slots()],
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_shape() {
        let h = FuelHierarchy::default();
        assert_eq!(h.n_nodes(), 11);
        assert_eq!(h.n_slots(), 8);
        assert_eq!(h.tiers().len(), 3);
        assert_eq!(h.slot_name(0), "solid");
        assert_eq!(h.slot_name(4), "biomass");
        assert_eq!(h.slot_name(7), "cropwaste");
        let others = h.node_index("others").unwrap();
        assert_eq!(*h.tiers()[0].children.last().unwrap(), others);
        let wood = h.node_index("wood").unwrap();
        assert!(h.is_descendant(wood, h.node_index("solid").unwrap()));
        assert_eq!(h.specs(), default_tiers());
    }

    #[test]
    fn rejects_malformed_trees() {
        let mut specs = default_tiers();
        specs[1].parent = Some("missing".into());
        assert!(FuelHierarchy::from_specs(&specs).is_err());
        let mut specs = default_tiers();
        specs[2].children[0] = "coal".into();
        assert!(FuelHierarchy::from_specs(&specs).is_err());
        let mut specs = default_tiers();
        specs[0].parent = Some("solid".into());
        assert!(FuelHierarchy::from_specs(&specs).is_err());
    }

    #[test]
    fn node_means_nest_and_invert() {
        let h = FuelHierarchy::default();
        let nu = [0.4, 0.2, 0.6, 0.5, 0.7, 0.3, 0.5, 0.4];
        let mut means = vec![0.0; 11];
        h.node_means(&nu, &mut means);
        for tier in h.tiers() {
            let parent = tier.parent.map_or(1.0, |p| means[p]);
            let sum: f64 = tier.children.iter().map(|&c| means[c]).sum();
            assert!((sum - parent).abs() < 1e-12);
        }
        let mut back = [0.0; 8];
        h.relative_means(&means, &mut back);
        for (a, b) in back.iter().zip(&nu) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
