//! Agree / Discard / Missing verdicts with per-instance rejection, deciding
//! which detections of a capture are transmitted.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mask::FeatureClass;

/// Instances of one capture grouped by class; indices into each list are the
/// instance indices verdicts refer to.
pub type Detections<T> = BTreeMap<FeatureClass, Vec<T>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Agree,
    Discard,
    Missing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassVerdict {
    pub class: FeatureClass,
    pub verdict: Verdict,
    #[serde(default)]
    pub rejected_instances: BTreeSet<usize>,
}

impl ClassVerdict {
    pub fn new(class: FeatureClass, verdict: Verdict) -> Self {
        Self {
            class,
            verdict,
            rejected_instances: BTreeSet::new(),
        }
    }

    pub fn rejecting(mut self, indices: impl IntoIterator<Item = usize>) -> Self {
        self.rejected_instances.extend(indices);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VettingRecord {
    pub capture_id: String,
    pub verdicts: Vec<ClassVerdict>,
    pub completed: bool,
    /// A rejected width still transmits the sidewalk node, without its width tag.
    #[serde(default = "yes")]
    pub width_accepted: bool,
}

fn yes() -> bool {
    true
}

impl VettingRecord {
    pub fn verdict_for(&self, class: FeatureClass) -> Option<&ClassVerdict> {
        self.verdicts.iter().find(|v| v.class == class)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VettedCapture<T> {
    /// Accepted instances in class order, then instance order.
    pub accepted: Vec<(FeatureClass, T)>,
    pub missing_flags: BTreeSet<FeatureClass>,
    pub width_accepted: bool,
}

impl<T> VettedCapture<T> {
    pub fn instances(&self) -> impl Iterator<Item = &T> {
        self.accepted.iter().map(|(_, t)| t)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VettingError {
    #[error("vetting record for capture {0} is not marked completed")]
    NotCompleted(String),
    #[error("detected class {0} has no verdict")]
    IncompleteVetting(FeatureClass),
    #[error("class {0} has more than one verdict")]
    DuplicateVerdict(FeatureClass),
    #[error("class {class} has no instance {index}")]
    UnknownInstance { class: FeatureClass, index: usize },
    #[error("class {0} is discarded but lists rejected instances")]
    DiscardWithOverrides(FeatureClass),
}

/// AGREE for every detected class, nothing rejected.
pub fn default_record<T>(
    capture_id: impl Into<String>,
    detections: &Detections<T>,
) -> VettingRecord {
    VettingRecord {
        capture_id: capture_id.into(),
        verdicts: detections
            .iter()
            .filter(|(_, v)| !v.is_empty())
            .map(|(&c, _)| ClassVerdict::new(c, Verdict::Agree))
            .collect(),
        completed: true,
        width_accepted: true,
    }
}

/// Checks a record against the detections without applying it.
pub fn validate_record<T>(
    detections: &Detections<T>,
    record: &VettingRecord,
) -> Result<(), VettingError> {
    if !record.completed {
        return Err(VettingError::NotCompleted(record.capture_id.clone()));
    }
    let mut seen = BTreeSet::new();
    for v in &record.verdicts {
        if !seen.insert(v.class) {
            return Err(VettingError::DuplicateVerdict(v.class));
        }
        if v.verdict == Verdict::Discard && !v.rejected_instances.is_empty() {
            return Err(VettingError::DiscardWithOverrides(v.class));
        }
        let n = detections.get(&v.class).map_or(0, Vec::len);
        if let Some(&index) = v.rejected_instances.iter().find(|&&i| i >= n) {
            return Err(VettingError::UnknownInstance {
                class: v.class,
                index,
            });
        }
    }
    if let Some((&class, _)) = detections
        .iter()
        .find(|(c, inst)| !inst.is_empty() && !seen.contains(*c))
    {
        return Err(VettingError::IncompleteVetting(class));
    }
    Ok(())
}

/// Applies a completed record. MISSING accepts like AGREE and also flags the
/// class; it may name a class with no detections.
pub fn apply_vetting<T: Clone>(
    detections: &Detections<T>,
    record: &VettingRecord,
) -> Result<VettedCapture<T>, VettingError> {
    validate_record(detections, record)?;
    let mut accepted = Vec::new();
    let mut missing_flags = BTreeSet::new();
    for (&class, instances) in detections {
        let Some(v) = record.verdict_for(class) else {
            continue; // only reachable for empty lists
        };
        if v.verdict == Verdict::Discard {
            continue;
        }
        accepted.extend(
            instances
                .iter()
                .enumerate()
                .filter(|(i, _)| !v.rejected_instances.contains(i))
                .map(|(_, t)| (class, t.clone())),
        );
    }
    for v in &record.verdicts {
        if v.verdict == Verdict::Missing {
            missing_flags.insert(v.class);
        }
    }
    Ok(VettedCapture {
        accepted,
        missing_flags,
        width_accepted: record.width_accepted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::FeatureClass::*;
    use proptest::prelude::*;

    fn detections() -> Detections<&'static str> {
        let mut d = Detections::new();
        d.insert(Pole, vec!["p1", "p2", "p3"]);
        d.insert(TrafficSign, vec!["s1"]);
        d
    }

    fn record(verdicts: Vec<ClassVerdict>) -> VettingRecord {
        VettingRecord {
            capture_id: "c".into(),
            verdicts,
            completed: true,
            width_accepted: true,
        }
    }

    #[test]
    fn default_accepts_everything() {
        let d = detections();
        let r = default_record("c", &d);
        assert_eq!(r.verdicts.len(), 2);
        assert!(r.verdicts.iter().all(|v| v.verdict == Verdict::Agree));
        let out = apply_vetting(&d, &r).unwrap();
        assert_eq!(
            out.instances().copied().collect::<Vec<_>>(),
            ["s1", "p1", "p2", "p3"]
        );
        assert!(out.missing_flags.is_empty());
    }

    #[test]
    fn empty_detections_give_empty_completed_record() {
        let d: Detections<u8> = Detections::new();
        let r = default_record("c", &d);
        assert!(r.completed && r.verdicts.is_empty());
        assert!(apply_vetting(&d, &r).unwrap().accepted.is_empty());
    }

    #[test]
    fn per_instance_rejection() {
        let r = record(vec![
            ClassVerdict::new(Pole, Verdict::Agree).rejecting([1]),
            ClassVerdict::new(TrafficSign, Verdict::Agree),
        ]);
        let out = apply_vetting(&detections(), &r).unwrap();
        assert_eq!(
            out.instances().copied().collect::<Vec<_>>(),
            ["s1", "p1", "p3"]
        );
    }

    #[test]
    fn discard_drops_class_and_refuses_overrides() {
        let r = record(vec![
            ClassVerdict::new(Pole, Verdict::Agree),
            ClassVerdict::new(TrafficSign, Verdict::Discard),
        ]);
        let out = apply_vetting(&detections(), &r).unwrap();
        assert!(out.accepted.iter().all(|(c, _)| *c == Pole));
        let bad = record(vec![
            ClassVerdict::new(Pole, Verdict::Agree),
            ClassVerdict::new(TrafficSign, Verdict::Discard).rejecting([0]),
        ]);
        assert_eq!(
            apply_vetting(&detections(), &bad),
            Err(VettingError::DiscardWithOverrides(TrafficSign))
        );
    }

    #[test]
    fn missing_accepts_and_flags() {
        let r = record(vec![
            ClassVerdict::new(Pole, Verdict::Missing).rejecting([0]),
            ClassVerdict::new(TrafficSign, Verdict::Agree),
            ClassVerdict::new(TrafficLight, Verdict::Missing),
        ]);
        let out = apply_vetting(&detections(), &r).unwrap();
        assert_eq!(out.instances().count(), 3);
        assert_eq!(out.missing_flags, BTreeSet::from([Pole, TrafficLight]));
    }

    #[test]
    fn incomplete_stale_and_unfinished_records_fail() {
        let r = record(vec![ClassVerdict::new(Pole, Verdict::Agree)]);
        assert_eq!(
            apply_vetting(&detections(), &r),
            Err(VettingError::IncompleteVetting(TrafficSign))
        );
        let stale = record(vec![
            ClassVerdict::new(Pole, Verdict::Agree).rejecting([3]),
            ClassVerdict::new(TrafficSign, Verdict::Agree),
        ]);
        assert_eq!(
            apply_vetting(&detections(), &stale),
            Err(VettingError::UnknownInstance {
                class: Pole,
                index: 3
            })
        );
        let mut draft = default_record("c", &detections());
        draft.completed = false;
        assert!(matches!(
            apply_vetting(&detections(), &draft),
            Err(VettingError::NotCompleted(_))
        ));
    }

    #[test]
    fn wire_format() {
        let v: ClassVerdict =
            serde_json::from_str(r#"{"class":"pole","verdict":"AGREE","rejected_instances":[2]}"#)
                .unwrap();
        assert_eq!(v, ClassVerdict::new(Pole, Verdict::Agree).rejecting([2]));
        assert!(
            serde_json::from_str::<ClassVerdict>(r#"{"class":"pole","verdict":"MAYBE"}"#).is_err()
        );
    }

    fn arb_case() -> impl Strategy<Value = (Detections<u32>, VettingRecord)> {
        prop::collection::vec(0usize..5, 5).prop_flat_map(|counts| {
            let mut d = Detections::new();
            let mut id = 0u32;
            for (c, n) in FeatureClass::MAPPABLE.iter().zip(&counts) {
                d.insert(
                    *c,
                    (0..*n)
                        .map(|_| {
                            id += 1;
                            id
                        })
                        .collect(),
                );
            }
            let verdicts: Vec<_> = FeatureClass::MAPPABLE
                .iter()
                .zip(counts.clone())
                .map(|(&c, n)| {
                    (
                        prop::sample::select(vec![
                            Verdict::Agree,
                            Verdict::Discard,
                            Verdict::Missing,
                        ]),
                        prop::collection::btree_set(0..n.max(1), 0..=n),
                    )
                        .prop_map(move |(v, rej)| ClassVerdict {
                            class: c,
                            verdict: v,
                            rejected_instances: if v == Verdict::Discard || n == 0 {
                                BTreeSet::new()
                            } else {
                                rej
                            },
                        })
                })
                .collect();
            (Just(d), verdicts).prop_map(|(d, v)| (d, record_of(v)))
        })
    }

    fn record_of(verdicts: Vec<ClassVerdict>) -> VettingRecord {
        VettingRecord {
            capture_id: "p".into(),
            verdicts,
            completed: true,
            width_accepted: true,
        }
    }

    proptest! {
        #[test]
        fn restrictive_and_discard_dominates((d, r) in arb_case()) {
            let out = apply_vetting(&d, &r).unwrap();
            for (class, id) in &out.accepted {
                prop_assert!(d[class].contains(id));
                prop_assert_ne!(r.verdict_for(*class).unwrap().verdict, Verdict::Discard);
            }
            let all: Detections<u32> = d.clone();
            let identity = apply_vetting(&all, &default_record("p", &all)).unwrap();
            let flat: Vec<u32> = all.values().flatten().copied().collect();
            prop_assert_eq!(identity.instances().copied().collect::<Vec<_>>(), flat);
            prop_assert!(identity.missing_flags.is_empty());
        }
    }
}
