use std::fmt;

use serde::{Deserialize, Serialize};

use super::survey::SurveyObservation;
use crate::model::FuelHierarchy;

/// Default ceiling on the unlisted / no-cooking / non-response share.
pub const DEFAULT_NONRESPONSE_THRESHOLD: f64 = 0.15;
pub const UNSUITABLE_FLAG: &str = "unsuitable";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExclusionRule {
    /// Only the solid-fuel aggregate (or nothing at all) was reported.
    AggregateOnly,
    /// Too much unlisted-fuel / no-cooking / non-response mass.
    ExcessNonResponse,
    /// Flagged as unsuitable for modelling.
    FlaggedUnsuitable,
}

impl ExclusionRule {
    pub fn id(self) -> &'static str {
        match self {
            ExclusionRule::AggregateOnly => "a",
            ExclusionRule::ExcessNonResponse => "b",
            ExclusionRule::FlaggedUnsuitable => "c",
        }
    }
}

impl fmt::Display for ExclusionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = match self {
            ExclusionRule::AggregateOnly => "only the solid-fuel aggregate reported",
            ExclusionRule::ExcessNonResponse => {
                "unlisted/no-cooking/non-response share above threshold"
            }
            ExclusionRule::FlaggedUnsuitable => "flagged unsuitable for modelling",
        };
        write!(f, "({}) {text}", self.id())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Exclusion {
    pub record: SurveyObservation,
    pub rule: ExclusionRule,
}

/// Applies the survey selection rules, keeping the input order of retained records.
///
/// A node counts as an aggregate for rule (a) when it sits in the top tier and
/// has its own child tier (`solid` in the default hierarchy); the top tier's
/// remainder category is not an individual fuel either.
pub fn select_surveys(
    records: Vec<SurveyObservation>,
    hierarchy: &FuelHierarchy,
    threshold: f64,
) -> (Vec<SurveyObservation>, Vec<Exclusion>) {
    let top = &hierarchy.tiers()[0];
    let remainder = *top.children.last().expect("tiers have children");
    let individual: Vec<bool> = (0..hierarchy.n_nodes())
        .map(|n| {
            let top_aggregate = hierarchy.tier_of(n) == 0 && !hierarchy.is_leaf(n);
            !top_aggregate && n != remainder
        })
        .collect();

    let mut kept = Vec::new();
    let mut excluded = Vec::new();
    for record in records {
        let rule = if !record.reported_nodes().any(|n| individual[n]) {
            Some(ExclusionRule::AggregateOnly)
        } else if record.nonresponse.is_some_and(|x| x > threshold) {
            Some(ExclusionRule::ExcessNonResponse)
        } else if record
            .flags
            .iter()
            .any(|f| f.eq_ignore_ascii_case(UNSUITABLE_FLAG))
        {
            Some(ExclusionRule::FlaggedUnsuitable)
        } else {
            None
        };
        match rule {
            Some(rule) => excluded.push(Exclusion { record, rule }),
            None => kept.push(record),
        }
    }
    (kept, excluded)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Area;

    fn record(h: &FuelHierarchy, values: &[(&str, f64)]) -> SurveyObservation {
        let mut r = SurveyObservation::new("s", "AAA", 2000, Area::Urban, h.n_nodes());
        for (name, v) in values {
            r.proportions[h.node_index(name).unwrap()] = Some(*v);
        }
        r
    }

    #[test]
    fn solid_only_is_excluded_by_rule_a() {
        let h = FuelHierarchy::default();
        let (kept, excluded) = select_surveys(vec![record(&h, &[("solid", 0.6)])], &h, 0.15);
        assert!(kept.is_empty());
        assert_eq!(excluded[0].rule, ExclusionRule::AggregateOnly);
        assert_eq!(excluded[0].rule.id(), "a");
    }

    #[test]
    fn nonresponse_threshold_boundary() {
        let h = FuelHierarchy::default();
        let mut high = record(&h, &[("wood", 0.4)]);
        high.nonresponse = Some(0.16);
        let mut low = record(&h, &[("wood", 0.4)]);
        low.nonresponse = Some(0.149);
        let (kept, excluded) =
            select_surveys(vec![high, low.clone()], &h, DEFAULT_NONRESPONSE_THRESHOLD);
        assert_eq!(kept, vec![low]);
        assert_eq!(excluded[0].rule, ExclusionRule::ExcessNonResponse);
    }

    #[test]
    fn unsuitable_flag_excludes() {
        let h = FuelHierarchy::default();
        let mut r = record(&h, &[("wood", 0.4), ("solid", 0.5)]);
        r.flags.insert("Unsuitable".into());
        let (kept, excluded) = select_surveys(vec![r], &h, 0.15);
        assert!(kept.is_empty());
        assert_eq!(excluded[0].rule, ExclusionRule::FlaggedUnsuitable);
    }

    #[test]
    fn idempotent_and_order_preserving() {
        let h = FuelHierarchy::default();
        let records: Vec<_> = (0..20)
            .map(|i| {
                let mut r = record(&h, &[("kerosene", 0.1)]);
                r.survey_id = format!("s{i}");
                if i % 3 == 0 {
                    r.proportions = vec![None; h.n_nodes()];
                }
                if i % 5 == 0 {
                    r.nonresponse = Some(0.5);
                }
                r
            })
            .collect();
        let (kept, _) = select_surveys(records, &h, 0.15);
        let (again, excluded) = select_surveys(kept.clone(), &h, 0.15);
        assert_eq!(again, kept);
        assert!(excluded.is_empty());
        let ids: Vec<usize> = kept
            .iter()
            .map(|r| r.survey_id[1..].parse().unwrap())
            .collect();
        assert!(ids.windows(2).all(|w| w[0] < w[1]));
    }
}
