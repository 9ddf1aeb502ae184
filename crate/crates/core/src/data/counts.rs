use super::survey::SurveyObservation;
use crate::distributions::CountVector;
use crate::model::FuelHierarchy;

/// Artificial sample size used when respondent totals are unknown.
pub const DEFAULT_TOTAL: u64 = 100_000;

/// Largest `v` with `v / n <= x`, evaluated in floating point.
///
/// Equivalent to `floor(n * x)` except that proportions written as `v / n`
/// always map back to `v` (plain `floor` can land one below after rounding).
pub fn floor_count(x: f64, n: u64) -> u64 {
    if !(x > 0.0) {
        return 0;
    }
    let nf = n as f64;
    let mut v = ((x * nf).floor() as u64).min(n);
    while v < n && ((v + 1) as f64) / nf <= x {
        v += 1;
    }
    while v > 0 && (v as f64) / nf > x {
        v -= 1;
    }
    v
}

/// Floors every category except the last, which absorbs the remainder.
pub fn to_counts(proportions: &[f64], n: u64) -> CountVector {
    assert!(
        !proportions.is_empty(),
        "to_counts needs at least one category"
    );
    let k = proportions.len();
    let mut v: Vec<u64> = proportions[..k - 1]
        .iter()
        .map(|&x| floor_count(x, n))
        .collect();
    trim_excess(&mut v, n);
    let used: u64 = v.iter().sum();
    v.push(n - used);
    CountVector::new(v)
}

/// Removes any excess over `limit` from the largest entries.
fn trim_excess(v: &mut [u64], limit: u64) {
    let mut sum: u64 = v.iter().sum();
    while sum > limit {
        let (i, _) = v
            .iter()
            .enumerate()
            .max_by_key(|(_, &x)| x)
            .expect("non-empty when sum > 0");
        let cut = (sum - limit).min(v[i]);
        v[i] -= cut;
        sum -= cut;
    }
}

/// Converts one record's proportions into per-node counts out of `n`.
///
/// Non-response mass is renormalised away first. Missing parents whose
/// children are all reported are filled in bottom-up; counts are then
/// floored top-down and, when a tier is fully reported under a known parent,
/// the last child takes the remainder. `None` marks a latent node.
pub fn node_counts(obs: &SurveyObservation, hierarchy: &FuelHierarchy, n: u64) -> Vec<Option<u64>> {
    let scale = match obs.nonresponse {
        Some(r) if r < 1.0 => 1.0 / (1.0 - r),
        _ => 1.0,
    };
    let mut x: Vec<Option<f64>> = obs
        .proportions
        .iter()
        .map(|p| p.map(|v| (v * scale).min(1.0)))
        .collect();

    for tier in hierarchy.tiers().iter().rev() {
        if let Some(p) = tier.parent {
            if x[p].is_none() && tier.children.iter().all(|&c| x[c].is_some()) {
                let sum: f64 = tier.children.iter().map(|&c| x[c].unwrap_or(0.0)).sum();
                x[p] = Some(sum.min(1.0));
            }
        }
    }

    let mut counts: Vec<Option<u64>> = vec![None; hierarchy.n_nodes()];
    for tier in hierarchy.tiers() {
        let parent_count = match tier.parent {
            None => Some(n),
            Some(p) => counts[p],
        };
        let present: Vec<usize> = tier
            .children
            .iter()
            .copied()
            .filter(|&c| x[c].is_some())
            .collect();
        let mut values: Vec<u64> = present
            .iter()
            .map(|&c| floor_count(x[c].unwrap_or(0.0), n))
            .collect();
        if let Some(total) = parent_count {
            if present.len() == tier.children.len() {
                let k = values.len();
                trim_excess(&mut values[..k - 1], total);
                let used: u64 = values[..k - 1].iter().sum();
                values[k - 1] = total - used;
            } else {
                trim_excess(&mut values, total);
            }
        }
        for (&c, v) in present.iter().zip(values) {
            counts[c] = Some(v);
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Area;
    use proptest::prelude::*;

    #[test]
    fn floor_then_remainder_examples() {
        assert_eq!(
            to_counts(&[0.333, 0.333, 0.334], 1000).counts(),
            &[333, 333, 334]
        );
        assert_eq!(to_counts(&[0.5, 0.5], 3).counts(), &[1, 2]);
    }

    #[test]
    fn ratios_round_trip() {
        let n = DEFAULT_TOTAL;
        for v in (0..=n).step_by(37) {
            assert_eq!(floor_count(v as f64 / n as f64, n), v);
        }
    }

    #[test]
    fn full_tree_conversion() {
        let h = FuelHierarchy::default();
        let mut obs = SurveyObservation::new("s", "A", 2000, Area::Urban, h.n_nodes());
        let set = |obs: &mut SurveyObservation, name: &str, v: f64| {
            obs.proportions[h.node_index(name).unwrap()] = Some(v)
        };
        set(&mut obs, "wood", 0.3);
        set(&mut obs, "cropwaste", 0.1);
        set(&mut obs, "dung", 0.05);
        set(&mut obs, "charcoal", 0.1);
        set(&mut obs, "coal", 0.05);
        set(&mut obs, "kerosene", 0.1);
        set(&mut obs, "gas", 0.2);
        set(&mut obs, "electricity", 0.05);
        set(&mut obs, "others", 0.05);
        let c = node_counts(&obs, &h, 1000);
        let get = |name: &str| c[h.node_index(name).unwrap()].unwrap();
        assert_eq!(get("biomass"), 450);
        assert_eq!(get("solid"), 600);
        for tier in h.tiers() {
            let parent = tier.parent.map_or(1000, |p| c[p].unwrap());
            assert_eq!(
                tier.children.iter().map(|&ch| c[ch].unwrap()).sum::<u64>(),
                parent
            );
        }
    }

    #[test]
    fn nonresponse_is_renormalised() {
        let h = FuelHierarchy::default();
        let mut obs = SurveyObservation::new("s", "A", 2000, Area::Rural, h.n_nodes());
        obs.proportions[h.node_index("solid").unwrap()] = Some(0.45);
        obs.proportions[h.node_index("gas").unwrap()] = Some(0.45);
        obs.nonresponse = Some(0.1);
        let c = node_counts(&obs, &h, 1000);
        assert_eq!(c[h.node_index("solid").unwrap()], Some(500));
        assert_eq!(c[h.node_index("gas").unwrap()], Some(500));
        assert_eq!(c[h.node_index("kerosene").unwrap()], None);
    }

    proptest! {
        #[test]
        fn floor_counts_are_exact(raw in prop::collection::vec(0.0f64..1.0, 2..7), n in 1u64..200_000) {
            let s: f64 = raw.iter().sum::<f64>() + 1e-3;
            let x: Vec<f64> = raw.iter().map(|v| v / s).collect();
            let cv = to_counts(&x, n);
            prop_assert_eq!(cv.total(), n);
            for (xi, &vi) in x.iter().zip(cv.counts()).take(x.len() - 1) {
                let gap = n as f64 * xi - vi as f64;
                prop_assert!(gap > -1e-9 * n as f64 && gap < 1.0);
            }
        }
    }
}
