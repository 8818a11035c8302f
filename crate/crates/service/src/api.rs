//! Request and response documents. Request bodies reject unknown fields, so
//! nothing beyond the named sparse attributes can be sent.

use serde::{Deserialize, Serialize};

use gm_core::geo::GeoPoint;
use gm_core::mask::FeatureClass;
use gm_core::osw::{ChangesetId, NewNode, NodeId, Tags, WayId};
use gm_core::pipeline::{FeatureInstance, InstanceShape};
use gm_core::vetting::{Detections, VettingRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoginRequest {
    pub user_id: String,
    pub secret: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserToken {
    pub user_id: String,
    pub token: String,
    /// Unix seconds.
    pub expires_at: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangesetOpened {
    pub changeset_id: ChangesetId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDocument {
    pub location: GeoPoint,
    pub class: FeatureClass,
    #[serde(default)]
    pub tags: Tags,
    pub timestamp: f64,
    /// Retries carrying the same key within a changeset return the first node.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub client_key: Option<String>,
}

impl NodeDocument {
    pub fn new(node: NewNode, client_key: Option<String>) -> Self {
        Self {
            location: node.location,
            class: node.class,
            tags: node.tags,
            timestamp: node.timestamp,
            client_key,
        }
    }

    pub fn into_parts(self) -> (NewNode, Option<String>) {
        (
            NewNode {
                location: self.location,
                class: self.class,
                tags: self.tags,
                timestamp: self.timestamp,
            },
            self.client_key,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeCreated {
    pub node_id: NodeId,
    /// True when the client key had already been used.
    pub replayed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangesetClosed {
    pub changeset_id: ChangesetId,
    pub way_id: Option<WayId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub workspaces: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReviewSubmission {
    pub workspace_id: String,
    pub changeset_id: ChangesetId,
    pub capture_id: String,
    pub timestamp: f64,
    pub detections: Detections<FeatureInstance>,
}

/// Vector outline of one instance: contour polygon or trapezoid corners.
pub type Outline = Vec<(f64, f64)>;

pub fn outline(shape: &InstanceShape) -> Outline {
    match shape {
        InstanceShape::Contour { points, .. } => points
            .iter()
            .map(|&(u, v)| (f64::from(u), f64::from(v)))
            .collect(),
        InstanceShape::Trapezoid(t) => t
            .corners()
            .iter()
            .map(|&(u, v)| (f64::from(u), f64::from(v)))
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub class: FeatureClass,
    pub count: usize,
    pub outlines: Vec<Outline>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewQueueItem {
    pub capture_id: String,
    pub workspace_id: String,
    pub changeset_id: ChangesetId,
    pub timestamp: f64,
    pub classes: Vec<ClassSummary>,
    pub draft: VettingRecord,
    pub locked: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewDetail {
    pub capture_id: String,
    pub workspace_id: String,
    pub changeset_id: ChangesetId,
    pub timestamp: f64,
    pub detections: Detections<FeatureInstance>,
    pub draft: VettingRecord,
    /// Unix seconds until which the caller holds the review lock.
    pub lock_expires_at: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictAccepted {
    pub capture_id: String,
    pub staged_node_ids: Vec<NodeId>,
}
