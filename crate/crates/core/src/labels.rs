//! Adaptation of four-state affective severities to a binary engagement
//! target, label distributions, and seeded undersampling.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::AffectiveLabels;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabelError {
    #[error("no clips labeled {0}; cannot balance")]
    EmptyClass(AdaptedLabel),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AdaptedLabel {
    Disengaged,
    Engaged,
    NotDetermined,
}

impl AdaptedLabel {
    /// `0` for Disengaged, `1` for Engaged.
    pub fn as_binary(self) -> Option<u8> {
        match self {
            AdaptedLabel::Disengaged => Some(0),
            AdaptedLabel::Engaged => Some(1),
            AdaptedLabel::NotDetermined => None,
        }
    }

    /// Code written to adapted-label CSV files.
    pub fn code(self) -> &'static str {
        match self {
            AdaptedLabel::Disengaged => "0",
            AdaptedLabel::Engaged => "1",
            AdaptedLabel::NotDetermined => "None",
        }
    }
}

impl fmt::Display for AdaptedLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AdaptedLabel::Disengaged => "Disengaged",
            AdaptedLabel::Engaged => "Engaged",
            AdaptedLabel::NotDetermined => "NotDetermined",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyId {
    Engagement,
    Confusion,
    Frustration,
    EngagementBoredom,
    EngagementConfusion,
    EngagementFrustration,
    ConfusionFrustration,
    ConfusionFrustrationEngagement,
}

impl PolicyId {
    pub const ALL: [PolicyId; 8] = [
        PolicyId::Engagement,
        PolicyId::Confusion,
        PolicyId::Frustration,
        PolicyId::EngagementBoredom,
        PolicyId::EngagementConfusion,
        PolicyId::EngagementFrustration,
        PolicyId::ConfusionFrustration,
        PolicyId::ConfusionFrustrationEngagement,
    ];

    /// Command-line name.
    pub const fn name(self) -> &'static str {
        match self {
            PolicyId::Engagement => "engagement",
            PolicyId::Confusion => "confusion",
            PolicyId::Frustration => "frustration",
            PolicyId::EngagementBoredom => "engagement_boredom",
            PolicyId::EngagementConfusion => "engagement_confusion",
            PolicyId::EngagementFrustration => "engagement_frustration",
            PolicyId::ConfusionFrustration => "confusion_frustration",
            PolicyId::ConfusionFrustrationEngagement => "confusion_frustration_engagement",
        }
    }

    /// Affective states combined by the policy, as shown in tables.
    pub const fn title(self) -> &'static str {
        match self {
            PolicyId::Engagement => "Engagement",
            PolicyId::Confusion => "Confusion",
            PolicyId::Frustration => "Frustration",
            PolicyId::EngagementBoredom => "Engagement; Boredom",
            PolicyId::EngagementConfusion => "Engagement; Confusion",
            PolicyId::EngagementFrustration => "Engagement; Frustration",
            PolicyId::ConfusionFrustration => "Confusion; Frustration",
            PolicyId::ConfusionFrustrationEngagement => "Confusion; Frustration; Engagement",
        }
    }

    fn rules(self) -> &'static [Rule] {
        match self {
            PolicyId::Engagement => ENGAGEMENT,
            PolicyId::Confusion => CONFUSION,
            PolicyId::Frustration => FRUSTRATION,
            PolicyId::EngagementBoredom => ENGAGEMENT_BOREDOM,
            PolicyId::EngagementConfusion => ENGAGEMENT_CONFUSION,
            PolicyId::EngagementFrustration => ENGAGEMENT_FRUSTRATION,
            PolicyId::ConfusionFrustration => CONFUSION_FRUSTRATION,
            PolicyId::ConfusionFrustrationEngagement => CONFUSION_FRUSTRATION_ENGAGEMENT,
        }
    }
}

impl fmt::Display for PolicyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyId::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown policy '{s}'"))
    }
}

struct Rule {
    applies: fn(&AffectiveLabels) -> bool,
    label: AdaptedLabel,
}

const fn rule(applies: fn(&AffectiveLabels) -> bool, label: AdaptedLabel) -> Rule {
    Rule { applies, label }
}

use AdaptedLabel::{Disengaged as D, Engaged as E};

const ENGAGEMENT: &[Rule] = &[rule(|l| l.engagement() <= 1, D), rule(|l| l.engagement() >= 2, E)];

const CONFUSION: &[Rule] = &[rule(|l| l.confusion() == 0, D), rule(|l| l.confusion() >= 1, E)];

const FRUSTRATION: &[Rule] = &[rule(|l| l.frustration() == 0, D), rule(|l| l.frustration() >= 1, E)];

const ENGAGEMENT_BOREDOM: &[Rule] = &[
    rule(|l| l.engagement() == 0, D),
    rule(|l| l.engagement() == 3, E),
    rule(|l| l.boredom() >= 2, D),
];

const ENGAGEMENT_CONFUSION: &[Rule] = &[
    rule(|l| l.engagement() == 0, D),
    rule(|l| l.engagement() == 3, E),
    rule(|l| matches!(l.confusion(), 0 | 3) && l.engagement() == 1, D),
    rule(|_| true, E),
];

const ENGAGEMENT_FRUSTRATION: &[Rule] = &[
    rule(|l| l.engagement() == 0, D),
    rule(|l| l.engagement() == 3, E),
    rule(|l| matches!(l.frustration(), 0 | 3) && l.engagement() == 1, D),
    rule(|_| true, E),
];

const CONFUSION_FRUSTRATION: &[Rule] = &[
    rule(|l| l.frustration() == 0 && l.confusion() == 0, D),
    rule(|l| l.frustration() >= 1 || l.confusion() >= 1, E),
];

const CONFUSION_FRUSTRATION_ENGAGEMENT: &[Rule] = &[
    rule(|l| l.engagement() == 0, D),
    rule(|l| l.engagement() == 3, E),
    rule(|l| (l.frustration() == 3 || l.confusion() == 3) && l.engagement() == 1, D),
    rule(|l| (l.frustration() == 0 || l.confusion() == 0) && l.engagement() == 1, D),
    rule(|_| true, E),
];

/// First matching rule of the policy wins; no match means NotDetermined.
pub fn apply_policy(labels: &AffectiveLabels, policy: PolicyId) -> AdaptedLabel {
    policy
        .rules()
        .iter()
        .find(|r| (r.applies)(labels))
        .map_or(AdaptedLabel::NotDetermined, |r| r.label)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelDistribution {
    pub policy: PolicyId,
    pub count_engaged: usize,
    pub count_disengaged: usize,
    pub count_not_determined: usize,
}

impl LabelDistribution {
    /// Size of the undersampled, class-balanced set.
    pub fn balanced_total(&self) -> usize {
        2 * self.count_engaged.min(self.count_disengaged)
    }

    pub fn total(&self) -> usize {
        self.count_engaged + self.count_disengaged + self.count_not_determined
    }
}

/// Render distributions with the columns: policy, label '1', label '0',
/// not determined, balanced total.
pub fn render_distribution_table(rows: &[LabelDistribution]) -> String {
    let mut out = format!(
        "{:<36} {:>9} {:>9} {:>14} {:>9}\n",
        "Affective State", "label '1'", "label '0'", "Not determined", "total"
    );
    for d in rows {
        out.push_str(&format!(
            "{:<36} {:>9} {:>9} {:>14} {:>9}\n",
            d.policy.title(),
            d.count_engaged,
            d.count_disengaged,
            d.count_not_determined,
            d.balanced_total()
        ));
    }
    out
}

pub fn adapt_dataset(
    labels: &BTreeMap<String, AffectiveLabels>,
    policy: PolicyId,
) -> (BTreeMap<String, AdaptedLabel>, LabelDistribution) {
    let mut dist = LabelDistribution {
        policy,
        count_engaged: 0,
        count_disengaged: 0,
        count_not_determined: 0,
    };
    let adapted = labels
        .iter()
        .map(|(id, l)| {
            let a = apply_policy(l, policy);
            match a {
                AdaptedLabel::Engaged => dist.count_engaged += 1,
                AdaptedLabel::Disengaged => dist.count_disengaged += 1,
                AdaptedLabel::NotDetermined => dist.count_not_determined += 1,
            }
            (id.clone(), a)
        })
        .collect();
    (adapted, dist)
}

/// Write `ClipID,AdaptedLabel` rows.
pub fn write_adapted_labels<W: Write>(adapted: &BTreeMap<String, AdaptedLabel>, out: W) -> csv::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["ClipID", "AdaptedLabel"])?;
    for (id, label) in adapted {
        writer.write_record([id.as_str(), label.code()])?;
    }
    writer.flush()?;
    Ok(())
}

/// Undersample the majority class down to the minority size.
///
/// NotDetermined clips are excluded. All minority clips are kept; the majority
/// subset is drawn without replacement from a generator seeded with `seed`.
/// The result is sorted by clip id and then shuffled with the same generator.
pub fn balance_undersample(adapted: &BTreeMap<String, AdaptedLabel>, seed: u64) -> Result<Vec<String>, LabelError> {
    let class = |want: AdaptedLabel| -> Vec<&String> {
        adapted.iter().filter(|(_, l)| **l == want).map(|(id, _)| id).collect()
    };
    let disengaged = class(AdaptedLabel::Disengaged);
    let engaged = class(AdaptedLabel::Engaged);
    if disengaged.is_empty() {
        return Err(LabelError::EmptyClass(AdaptedLabel::Disengaged));
    }
    if engaged.is_empty() {
        return Err(LabelError::EmptyClass(AdaptedLabel::Engaged));
    }
    let (minority, majority) = if disengaged.len() <= engaged.len() {
        (disengaged, engaged)
    } else {
        (engaged, disengaged)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<String> = minority.iter().map(|s| (*s).clone()).collect();
    picked.extend(
        index::sample(&mut rng, majority.len(), minority.len())
            .into_iter()
            .map(|i| majority[i].clone()),
    );
    picked.sort();
    picked.shuffle(&mut rng);
    Ok(picked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn sev(b: u8, e: u8, c: u8, f: u8) -> AffectiveLabels {
        AffectiveLabels::new(b, e, c, f).unwrap()
    }

    #[test]
    fn worked_examples() {
        assert_eq!(apply_policy(&sev(0, 3, 0, 0), PolicyId::Engagement), E);
        assert_eq!(apply_policy(&sev(0, 1, 0, 0), PolicyId::EngagementConfusion), D);
        assert_eq!(apply_policy(&sev(1, 2, 0, 0), PolicyId::EngagementBoredom), AdaptedLabel::NotDetermined);
        assert_eq!(apply_policy(&sev(0, 1, 0, 0), PolicyId::ConfusionFrustration), D);
        assert_eq!(apply_policy(&sev(0, 1, 2, 0), PolicyId::EngagementConfusion), E);
    }

    #[test]
    fn engagement_boredom_resolves_by_order() {
        // E==3 is checked before boredom.
        assert_eq!(apply_policy(&sev(3, 3, 0, 0), PolicyId::EngagementBoredom), E);
        assert_eq!(apply_policy(&sev(2, 1, 0, 0), PolicyId::EngagementBoredom), D);
        assert_eq!(apply_policy(&sev(3, 0, 0, 0), PolicyId::EngagementBoredom), D);
    }

    #[test]
    fn engagement_is_monotone_in_severity() {
        let got: Vec<u8> = (0..4)
            .map(|e| apply_policy(&sev(0, e, 0, 0), PolicyId::Engagement).as_binary().unwrap())
            .collect();
        assert_eq!(got, [0, 0, 1, 1]);
    }

    #[test]
    fn only_engagement_boredom_is_partial() {
        for policy in PolicyId::ALL {
            let undetermined = AffectiveLabels::all_tuples()
                .filter(|l| apply_policy(l, policy) == AdaptedLabel::NotDetermined)
                .count();
            if policy == PolicyId::EngagementBoredom {
                // E in {1,2} and B in {0,1}: 2 * 2 * 4 * 4
                assert_eq!(undetermined, 64);
            } else {
                assert_eq!(undetermined, 0, "{policy}");
            }
        }
    }

    #[test]
    fn policy_names_round_trip() {
        for p in PolicyId::ALL {
            assert_eq!(p.name().parse::<PolicyId>().unwrap(), p);
        }
        assert!("engagement;confusion".parse::<PolicyId>().is_err());
    }

    fn adapted_of(d: usize, e: usize) -> BTreeMap<String, AdaptedLabel> {
        let mut m = BTreeMap::new();
        for i in 0..d {
            m.insert(format!("d{i:05}"), D);
        }
        for i in 0..e {
            m.insert(format!("e{i:05}"), E);
        }
        m
    }

    #[test]
    fn balance_keeps_minority_and_equalizes() {
        let adapted = adapted_of(516, 8409);
        let out = balance_undersample(&adapted, 11).unwrap();
        assert_eq!(out.len(), 1032);
        let ds = out.iter().filter(|id| adapted[*id] == D).count();
        assert_eq!(ds, 516);
        assert_eq!(out.iter().collect::<BTreeSet<_>>().len(), 1032);
        assert_eq!(out, balance_undersample(&adapted, 11).unwrap());
        assert_ne!(out, balance_undersample(&adapted, 12).unwrap());
    }

    #[test]
    fn balanced_input_is_retained() {
        let adapted = adapted_of(5, 5);
        let mut out = balance_undersample(&adapted, 3).unwrap();
        out.sort();
        assert_eq!(out, adapted.keys().cloned().collect::<Vec<_>>());
    }

    #[test]
    fn not_determined_is_excluded_and_empty_class_errors() {
        let mut adapted = adapted_of(2, 3);
        adapted.insert("n".into(), AdaptedLabel::NotDetermined);
        let out = balance_undersample(&adapted, 0).unwrap();
        assert_eq!(out.len(), 4);
        assert!(!out.contains(&"n".to_string()));
        assert_eq!(
            balance_undersample(&adapted_of(0, 3), 0),
            Err(LabelError::EmptyClass(AdaptedLabel::Disengaged))
        );
        assert_eq!(
            balance_undersample(&adapted_of(3, 0), 0),
            Err(LabelError::EmptyClass(AdaptedLabel::Engaged))
        );
    }

    #[test]
    fn distribution_counts_and_rendering() {
        let labels: BTreeMap<String, AffectiveLabels> = [
            ("a".to_string(), sev(0, 0, 0, 0)),
            ("b".to_string(), sev(0, 2, 0, 0)),
            ("c".to_string(), sev(0, 3, 0, 0)),
        ]
        .into();
        let (adapted, dist) = adapt_dataset(&labels, PolicyId::Engagement);
        assert_eq!((dist.count_engaged, dist.count_disengaged, dist.count_not_determined), (2, 1, 0));
        assert_eq!(dist.balanced_total(), 2);
        assert_eq!(adapted["a"], D);
        let table = render_distribution_table(&[dist]);
        assert!(table.lines().nth(1).unwrap().starts_with("Engagement"));
        let mut buf = Vec::new();
        write_adapted_labels(&adapted, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "ClipID,AdaptedLabel\na,0\nb,1\nc,1\n");
    }
}
