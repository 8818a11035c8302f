//! Turning vetted detections into the node documents uploaded to a workspace.

use serde::{Deserialize, Serialize};

use crate::mask::FeatureClass;
use crate::osw::{format_width, missing_tag, NewNode, Tags, CAPTURE_TAG, WIDTH_TAG};
use crate::pipeline::FeatureInstance;
use crate::vetting::VettedCapture;

/// A node together with the key that makes its upload idempotent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingNode {
    pub client_key: String,
    pub node: NewNode,
}

/// One node per accepted instance, in acceptance order. Every node carries the
/// capture id and the capture's MISSING flags; the sidewalk node carries the
/// width only when the reviewer accepted it.
pub fn nodes_for_capture(vetted: &VettedCapture<FeatureInstance>) -> Vec<PendingNode> {
    vetted
        .instances()
        .map(|inst| {
            let mut tags = Tags::new();
            tags.insert(CAPTURE_TAG.into(), inst.capture_id.to_string());
            for &class in &vetted.missing_flags {
                tags.insert(missing_tag(class), "yes".into());
            }
            if inst.class == FeatureClass::Sidewalk && vetted.width_accepted {
                if let Some(w) = inst.width_m {
                    tags.insert(WIDTH_TAG.into(), format_width(w));
                }
            }
            PendingNode {
                client_key: inst.instance_id.clone(),
                node: NewNode {
                    location: inst.location,
                    class: inst.class,
                    tags,
                    timestamp: inst.timestamp,
                },
            }
        })
        .collect()
}
