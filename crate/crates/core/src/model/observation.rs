use super::FuelHierarchy;
use crate::data::Area;
use crate::error::{Error, Result};

/// Latent leaves sharing the same nearest observed ancestor.
///
/// Moving counts between members keeps every observed node total fixed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatentGroup {
    /// Nearest observed ancestor; `None` is the survey total.
    pub anchor: Option<usize>,
    pub leaves: Vec<usize>,
    pub total: u64,
}

/// One survey x area record in count form, ready for the likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct CountObservation {
    pub survey: usize,
    pub country: usize,
    pub year: i32,
    /// Row of the fit-period spline basis.
    pub time: usize,
    pub area: Area,
    pub total: u64,
    pub observed: Vec<bool>,
    /// Node counts with latent nodes at their initial imputation; nodes
    /// below an inactive tier are zero and never read.
    pub initial: Vec<u64>,
    /// Tiers contributing likelihood terms. A tier with nothing reported
    /// anywhere below its parent is marginalised out analytically.
    pub active_tiers: Vec<bool>,
    /// Groups with at least two members; singletons are fixed by the totals.
    pub groups: Vec<LatentGroup>,
}

impl CountObservation {
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        hierarchy: &FuelHierarchy,
        counts: &[Option<u64>],
        total: u64,
        survey: usize,
        country: usize,
        year: i32,
        time: usize,
        area: Area,
        index: usize,
    ) -> Result<Self> {
        let n_nodes = hierarchy.n_nodes();
        let observed: Vec<bool> = counts.iter().map(Option::is_some).collect();
        let observed_below: Vec<bool> = (0..n_nodes)
            .map(|n| hierarchy.descendants(n).iter().any(|&d| observed[d]))
            .collect();
        let active_tiers: Vec<bool> = hierarchy
            .tiers()
            .iter()
            .map(|t| match t.parent {
                None => observed.iter().any(|&o| o),
                Some(p) => observed_below[p],
            })
            .collect();

        let anchor_of = |node: usize| {
            let mut cur = hierarchy.parent(node);
            while let Some(p) = cur {
                if observed[p] {
                    return Some(p);
                }
                cur = hierarchy.parent(p);
            }
            None
        };

        let effective_leaf = |n: usize| {
            active_tiers[hierarchy.tier_of(n)]
                && hierarchy.child_tier(n).is_none_or(|t| !active_tiers[t])
        };

        let mut anchors: Vec<Option<usize>> = vec![None];
        anchors.extend((0..n_nodes).filter(|&n| observed[n]).map(Some));

        let mut initial = vec![0u64; n_nodes];
        let mut groups = Vec::new();
        for anchor in anchors {
            let anchor_total = anchor.map_or(total, |a| counts[a].unwrap_or(0));
            let mut claimed = 0u64;
            let mut leaves = Vec::new();
            for n in 0..n_nodes {
                if !active_tiers[hierarchy.tier_of(n)] || anchor_of(n) != anchor {
                    continue;
                }
                if let Some(v) = counts[n] {
                    claimed += v;
                    initial[n] = v;
                } else if effective_leaf(n) {
                    leaves.push(n);
                }
            }
            let rest =
                anchor_total
                    .checked_sub(claimed)
                    .ok_or_else(|| Error::InconsistentCounts {
                        observation: index,
                        message: format!(
                            "reported counts {claimed} exceed the enclosing total {anchor_total}{}",
                            anchor.map_or(String::new(), |a| format!(
                                " of `{}`",
                                hierarchy.nodes()[a]
                            ))
                        ),
                    })?;
            if leaves.is_empty() {
                let expands = match anchor {
                    None => active_tiers[0],
                    Some(a) => hierarchy.child_tier(a).is_some_and(|t| active_tiers[t]),
                };
                if rest != 0 && expands {
                    return Err(Error::InconsistentCounts {
                        observation: index,
                        message: format!(
                            "{rest} counts unaccounted for under a fully reported node"
                        ),
                    });
                }
                continue;
            }
            let share = rest / leaves.len() as u64;
            for &leaf in &leaves {
                initial[leaf] = share;
            }
            initial[*leaves.last().expect("non-empty")] += rest - share * leaves.len() as u64;
            if leaves.len() > 1 {
                groups.push(LatentGroup {
                    anchor,
                    leaves,
                    total: rest,
                });
            }
        }

        // latent internal nodes take the sum of their children
        for (t, tier) in hierarchy.tiers().iter().enumerate().rev() {
            if let Some(p) = tier.parent {
                if active_tiers[t] && !observed[p] {
                    initial[p] = tier.children.iter().map(|&c| initial[c]).sum();
                }
            }
        }

        Ok(Self {
            survey,
            country,
            year,
            time,
            area,
            total,
            observed,
            initial,
            active_tiers,
            groups,
        })
    }

    /// Observed proportion of `node`, if reported.
    pub fn observed_proportion(&self, node: usize) -> Option<f64> {
        self.observed[node].then(|| self.initial[node] as f64 / self.total as f64)
    }
}

/// Moves `m` counts from leaf `from` to leaf `to`, updating latent ancestors
/// up to (not including) `anchor`.
pub fn transfer(
    counts: &mut [u64],
    hierarchy: &FuelHierarchy,
    from: usize,
    to: usize,
    m: u64,
    anchor: Option<usize>,
) {
    let mut cur = Some(from);
    while cur.is_some() && cur != anchor {
        let n = cur.expect("checked");
        counts[n] -= m;
        cur = hierarchy.parent(n);
    }
    let mut cur = Some(to);
    while cur.is_some() && cur != anchor {
        let n = cur.expect("checked");
        counts[n] += m;
        cur = hierarchy.parent(n);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn build(h: &FuelHierarchy, values: &[(&str, u64)]) -> Result<CountObservation> {
        let mut counts = vec![None; h.n_nodes()];
        for (name, v) in values {
            counts[h.node_index(name).unwrap()] = Some(*v);
        }
        CountObservation::build(h, &counts, 1000, 0, 0, 2000, 0, Area::Urban, 0)
    }

    fn tier_sums_hold(h: &FuelHierarchy, o: &CountObservation, counts: &[u64]) {
        for (t, tier) in h.tiers().iter().enumerate() {
            if !o.active_tiers[t] {
                continue;
            }
            let parent = tier.parent.map_or(o.total, |p| counts[p]);
            assert_eq!(
                tier.children.iter().map(|&c| counts[c]).sum::<u64>(),
                parent,
                "tier {}",
                tier.name
            );
        }
    }

    #[test]
    fn top_only_marginalises_lower_tiers() {
        let h = FuelHierarchy::default();
        let o = build(
            &h,
            &[
                ("solid", 500),
                ("kerosene", 100),
                ("gas", 200),
                ("electricity", 150),
                ("others", 50),
            ],
        )
        .unwrap();
        assert_eq!(o.active_tiers, vec![true, false, false]);
        assert!(o.groups.is_empty());
        tier_sums_hold(&h, &o, &o.initial);
    }

    #[test]
    fn partial_mid_creates_group_under_solid() {
        let h = FuelHierarchy::default();
        let o = build(
            &h,
            &[
                ("solid", 500),
                ("kerosene", 100),
                ("gas", 200),
                ("wood", 300),
            ],
        )
        .unwrap();
        assert_eq!(o.active_tiers, vec![true, true, true]);
        let names = |g: &LatentGroup| {
            g.leaves
                .iter()
                .map(|&l| h.nodes()[l].clone())
                .collect::<Vec<_>>()
        };
        assert_eq!(o.groups.len(), 2);
        assert_eq!(names(&o.groups[0]), vec!["electricity", "others"]);
        assert_eq!(o.groups[0].total, 200);
        assert_eq!(
            names(&o.groups[1]),
            vec!["charcoal", "coal", "cropwaste", "dung"]
        );
        assert_eq!(o.groups[1].total, 200);
        tier_sums_hold(&h, &o, &o.initial);

        let mut counts = o.initial.clone();
        let g = &o.groups[1];
        transfer(&mut counts, &h, g.leaves[3], g.leaves[0], 30, g.anchor);
        tier_sums_hold(&h, &o, &counts);
        assert_eq!(counts[h.node_index("solid").unwrap()], 500);
    }

    #[test]
    fn overfull_children_are_rejected() {
        let h = FuelHierarchy::default();
        assert!(matches!(
            build(&h, &[("solid", 300), ("wood", 200), ("charcoal", 200)]),
            Err(Error::InconsistentCounts { .. })
        ));
    }
}
