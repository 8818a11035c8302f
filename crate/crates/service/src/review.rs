//! Capture review queue: submitted detections wait here until their owner
//! posts a completed vetting record. One reviewer token at a time holds a
//! capture's lock; locks lapse after the configured TTL.

use std::collections::BTreeMap;
use std::time::{Duration, SystemTime};

use thiserror::Error;

use gm_core::contribution::{nodes_for_capture, PendingNode};
use gm_core::osw::{ChangesetId, NodeId};
use gm_core::vetting::{apply_vetting, default_record, VettingError, VettingRecord};

use crate::api::{outline, ClassSummary, ReviewDetail, ReviewQueueItem, ReviewSubmission};
use crate::auth::unix_seconds;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReviewError {
    #[error("no capture `{0}` awaits review")]
    UnknownCapture(String),
    #[error("capture `{0}` belongs to another user")]
    NotOwner(String),
    #[error("capture `{0}` is locked by another reviewer")]
    Locked(String),
    #[error("capture `{0}` was already reviewed")]
    AlreadyReviewed(String),
    #[error("capture `{0}` was already submitted with different content")]
    DuplicateCapture(String),
    #[error("record names capture `{found}` but the request is for `{expected}`")]
    CaptureMismatch { expected: String, found: String },
    #[error("instance listed under {0} has a different class")]
    ClassMismatch(gm_core::mask::FeatureClass),
    #[error(transparent)]
    Vetting(#[from] VettingError),
}

struct Lock {
    token: String,
    expires: SystemTime,
}

struct Item {
    submission: ReviewSubmission,
    owner: String,
    draft: VettingRecord,
    lock: Option<Lock>,
    staged: Option<Vec<NodeId>>,
}

impl Item {
    fn held_by_other(&self, token: &str, now: SystemTime) -> bool {
        self.lock
            .as_ref()
            .is_some_and(|l| l.token != token && l.expires > now)
    }

    fn summary(&self, now: SystemTime) -> ReviewQueueItem {
        let s = &self.submission;
        ReviewQueueItem {
            capture_id: s.capture_id.clone(),
            workspace_id: s.workspace_id.clone(),
            changeset_id: s.changeset_id,
            timestamp: s.timestamp,
            classes: s
                .detections
                .iter()
                .map(|(&class, v)| ClassSummary {
                    class,
                    count: v.len(),
                    outlines: v.iter().map(|i| outline(&i.shape)).collect(),
                })
                .collect(),
            draft: self.draft.clone(),
            locked: self.lock.as_ref().is_some_and(|l| l.expires > now),
        }
    }
}

/// What a verdict turns into: nodes to stage in the capture's changeset.
#[derive(Debug, Clone, PartialEq)]
pub struct Staging {
    pub workspace_id: String,
    pub changeset_id: ChangesetId,
    pub nodes: Vec<PendingNode>,
}

pub struct ReviewQueue {
    items: BTreeMap<String, Item>,
    lock_ttl: Duration,
}

impl ReviewQueue {
    pub fn new(lock_ttl: Duration) -> Self {
        Self {
            items: BTreeMap::new(),
            lock_ttl,
        }
    }

    /// Queues a capture. Resubmitting identical content is a no-op and
    /// returns `false`.
    pub fn submit(
        &mut self,
        owner: &str,
        submission: ReviewSubmission,
    ) -> Result<bool, ReviewError> {
        for (&class, list) in &submission.detections {
            if list.iter().any(|i| i.class != class) {
                return Err(ReviewError::ClassMismatch(class));
            }
        }
        if let Some(existing) = self.items.get(&submission.capture_id) {
            return if existing.owner == owner && existing.submission == submission {
                Ok(false)
            } else {
                Err(ReviewError::DuplicateCapture(submission.capture_id))
            };
        }
        let draft = default_record(submission.capture_id.clone(), &submission.detections);
        self.items.insert(
            submission.capture_id.clone(),
            Item {
                submission,
                owner: owner.to_string(),
                draft,
                lock: None,
                staged: None,
            },
        );
        Ok(true)
    }

    /// Captures of `owner` still awaiting a verdict, by capture id.
    pub fn pending(
        &self,
        owner: &str,
        workspace_id: Option<&str>,
        now: SystemTime,
    ) -> Vec<ReviewQueueItem> {
        self.items
            .values()
            .filter(|i| i.owner == owner && i.staged.is_none())
            .filter(|i| workspace_id.is_none_or(|w| i.submission.workspace_id == w))
            .map(|i| i.summary(now))
            .collect()
    }

    fn pending_item(&mut self, capture_id: &str, owner: &str) -> Result<&mut Item, ReviewError> {
        let item = self
            .items
            .get_mut(capture_id)
            .ok_or_else(|| ReviewError::UnknownCapture(capture_id.to_string()))?;
        if item.owner != owner {
            return Err(ReviewError::NotOwner(capture_id.to_string()));
        }
        if item.staged.is_some() {
            return Err(ReviewError::AlreadyReviewed(capture_id.to_string()));
        }
        Ok(item)
    }

    /// Detail view; takes or renews the caller's lock.
    pub fn open(
        &mut self,
        capture_id: &str,
        owner: &str,
        token: &str,
        now: SystemTime,
    ) -> Result<ReviewDetail, ReviewError> {
        let ttl = self.lock_ttl;
        let item = self.pending_item(capture_id, owner)?;
        let item = Self::take_lock(item, token, now, ttl)?;
        let s = &item.submission;
        Ok(ReviewDetail {
            capture_id: s.capture_id.clone(),
            workspace_id: s.workspace_id.clone(),
            changeset_id: s.changeset_id,
            timestamp: s.timestamp,
            detections: s.detections.clone(),
            draft: item.draft.clone(),
            lock_expires_at: unix_seconds(now + ttl),
        })
    }

    /// Stores a possibly partial record; instance indices must exist.
    pub fn save_draft(
        &mut self,
        capture_id: &str,
        owner: &str,
        token: &str,
        record: VettingRecord,
        now: SystemTime,
    ) -> Result<(), ReviewError> {
        check_capture(capture_id, &record)?;
        let ttl = self.lock_ttl;
        let item = self.pending_item(capture_id, owner)?;
        let item = Self::take_lock(item, token, now, ttl)?;
        for v in &record.verdicts {
            let n = item.submission.detections.get(&v.class).map_or(0, Vec::len);
            if let Some(&index) = v.rejected_instances.iter().find(|&&i| i >= n) {
                return Err(VettingError::UnknownInstance {
                    class: v.class,
                    index,
                }
                .into());
            }
        }
        item.draft = record;
        Ok(())
    }

    fn take_lock<'a>(
        item: &'a mut Item,
        token: &str,
        now: SystemTime,
        ttl: Duration,
    ) -> Result<&'a mut Item, ReviewError> {
        if item.held_by_other(token, now) {
            return Err(ReviewError::Locked(item.submission.capture_id.clone()));
        }
        item.lock = Some(Lock {
            token: token.to_string(),
            expires: now + ttl,
        });
        Ok(item)
    }

    /// Validates a completed record and returns the nodes it stages, without
    /// marking the capture reviewed.
    pub fn prepare_verdict(
        &mut self,
        capture_id: &str,
        owner: &str,
        token: &str,
        record: &VettingRecord,
        now: SystemTime,
    ) -> Result<Staging, ReviewError> {
        check_capture(capture_id, record)?;
        let ttl = self.lock_ttl;
        let item = self.pending_item(capture_id, owner)?;
        let item = Self::take_lock(item, token, now, ttl)?;
        let vetted = apply_vetting(&item.submission.detections, record)?;
        Ok(Staging {
            workspace_id: item.submission.workspace_id.clone(),
            changeset_id: item.submission.changeset_id,
            nodes: nodes_for_capture(&vetted),
        })
    }

    /// Records the staged nodes; the capture leaves the queue.
    pub fn finish(&mut self, capture_id: &str, record: VettingRecord, staged: Vec<NodeId>) {
        if let Some(item) = self.items.get_mut(capture_id) {
            item.draft = record;
            item.lock = None;
            item.staged = Some(staged);
        }
    }

    pub fn staged(&self, capture_id: &str) -> Option<&[NodeId]> {
        self.items.get(capture_id)?.staged.as_deref()
    }
}

fn check_capture(capture_id: &str, record: &VettingRecord) -> Result<(), ReviewError> {
    if record.capture_id != capture_id {
        return Err(ReviewError::CaptureMismatch {
            expected: capture_id.to_string(),
            found: record.capture_id.clone(),
        });
    }
    Ok(())
}
