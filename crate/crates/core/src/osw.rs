//! OpenSidewalks-style workspace: point nodes, sidewalk ways and the
//! changesets grouping them, with GeoJSON export and import.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::geo::GeoPoint;
use crate::mask::FeatureClass;

pub type NodeId = u64;
pub type WayId = u64;
pub type ChangesetId = u64;
pub type Tags = BTreeMap<String, String>;

/// Property keys the GeoJSON encoding uses itself; tags may not shadow them.
pub const RESERVED_KEYS: [&str; 7] = [
    "kind",
    "id",
    "class",
    "changeset_id",
    "user_id",
    "timestamp",
    "node_refs",
];

pub const WIDTH_TAG: &str = "width";
pub const CAPTURE_TAG: &str = "capture_id";

/// Tag key marking that a reviewer saw more `class` objects than were detected.
pub fn missing_tag(class: FeatureClass) -> String {
    format!("missing:{}", class.name())
}

/// Width in meters as tagged: two decimals.
pub fn format_width(width_m: f64) -> String {
    format!("{width_m:.2}")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OswError {
    #[error("user is not authenticated")]
    Unauthenticated,
    #[error("changeset {0} does not exist")]
    UnknownChangeset(ChangesetId),
    #[error("changeset {0} is closed")]
    ChangesetClosed(ChangesetId),
    #[error("changeset {0} is already closed")]
    AlreadyClosed(ChangesetId),
    #[error("changeset {0} belongs to another user")]
    NotOwner(ChangesetId),
    #[error("node id {0} already exists")]
    DuplicateNodeId(NodeId),
    #[error("way {way} references missing node {node}")]
    DanglingReference { way: WayId, node: NodeId },
    #[error("invalid tag: {0}")]
    InvalidTag(String),
    #[error("malformed workspace document: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OswNode {
    pub id: NodeId,
    pub location: GeoPoint,
    pub class: FeatureClass,
    pub tags: Tags,
    pub changeset_id: ChangesetId,
    pub user_id: String,
    /// Capture time, seconds; orders sidewalk nodes along the way.
    pub timestamp: f64,
}

/// A node before the workspace assigns its id and changeset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewNode {
    pub location: GeoPoint,
    pub class: FeatureClass,
    #[serde(default)]
    pub tags: Tags,
    pub timestamp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OswWay {
    pub id: WayId,
    pub node_refs: Vec<NodeId>,
    pub tags: Tags,
    pub changeset_id: ChangesetId,
    pub user_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ChangesetState {
    Open,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Changeset {
    pub id: ChangesetId,
    pub user_id: String,
    pub state: ChangesetState,
    pub created_at: f64,
    pub closed_at: Option<f64>,
    pub node_ids: Vec<NodeId>,
    pub way_ids: Vec<WayId>,
}

/// All nodes, ways and changesets of one workspace, with id allocation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Workspace {
    nodes: BTreeMap<NodeId, OswNode>,
    ways: BTreeMap<WayId, OswWay>,
    changesets: BTreeMap<ChangesetId, Changeset>,
    next_node: NodeId,
    next_way: WayId,
    next_changeset: ChangesetId,
}

fn validate_tags(tags: &Tags) -> Result<(), OswError> {
    for (k, v) in tags {
        if k.is_empty() || RESERVED_KEYS.contains(&k.as_str()) {
            return Err(OswError::InvalidTag(format!(
                "key `{k}` is reserved or empty"
            )));
        }
        if v.is_empty() {
            return Err(OswError::InvalidTag(format!(
                "key `{k}` has an empty value"
            )));
        }
    }
    Ok(())
}

impl Workspace {
    pub fn new() -> Self {
        Self {
            next_node: 1,
            next_way: 1,
            next_changeset: 1,
            ..Self::default()
        }
    }

    pub fn nodes(&self) -> &BTreeMap<NodeId, OswNode> {
        &self.nodes
    }

    pub fn ways(&self) -> &BTreeMap<WayId, OswWay> {
        &self.ways
    }

    pub fn changesets(&self) -> &BTreeMap<ChangesetId, Changeset> {
        &self.changesets
    }

    pub fn changeset(&self, id: ChangesetId) -> Option<&Changeset> {
        self.changesets.get(&id)
    }

    pub fn open_changeset(&mut self, user_id: &str, now: f64) -> Result<ChangesetId, OswError> {
        if user_id.trim().is_empty() {
            return Err(OswError::Unauthenticated);
        }
        let id = self.next_changeset.max(1);
        self.next_changeset = id + 1;
        self.changesets.insert(
            id,
            Changeset {
                id,
                user_id: user_id.to_string(),
                state: ChangesetState::Open,
                created_at: now,
                closed_at: None,
                node_ids: Vec::new(),
                way_ids: Vec::new(),
            },
        );
        Ok(id)
    }

    fn open_owned(&self, cs: ChangesetId, user_id: &str) -> Result<&Changeset, OswError> {
        let c = self
            .changesets
            .get(&cs)
            .ok_or(OswError::UnknownChangeset(cs))?;
        if c.user_id != user_id {
            return Err(OswError::NotOwner(cs));
        }
        Ok(c)
    }

    /// Adds a node under a server-issued id.
    pub fn add_node(
        &mut self,
        cs: ChangesetId,
        user_id: &str,
        node: NewNode,
    ) -> Result<NodeId, OswError> {
        let id = self.next_node.max(1);
        self.insert_node(
            cs,
            OswNode {
                id,
                location: node.location,
                class: node.class,
                tags: node.tags,
                changeset_id: cs,
                user_id: user_id.to_string(),
                timestamp: node.timestamp,
            },
        )
    }

    /// Adds a node with a caller-chosen id. `changeset_id` is overwritten with `cs`.
    pub fn insert_node(&mut self, cs: ChangesetId, mut node: OswNode) -> Result<NodeId, OswError> {
        let c = self.open_owned(cs, &node.user_id)?;
        if c.state != ChangesetState::Open {
            return Err(OswError::ChangesetClosed(cs));
        }
        if self.nodes.contains_key(&node.id) {
            return Err(OswError::DuplicateNodeId(node.id));
        }
        if !node.timestamp.is_finite() {
            return Err(OswError::InvalidTag("timestamp must be finite".into()));
        }
        validate_tags(&node.tags)?;
        node.changeset_id = cs;
        let id = node.id;
        self.next_node = self.next_node.max(id + 1);
        self.nodes.insert(id, node);
        self.changesets
            .get_mut(&cs)
            .expect("checked above")
            .node_ids
            .push(id);
        Ok(id)
    }

    /// Closes the changeset. With two or more sidewalk nodes, first links them
    /// into one way in capture order and returns its id.
    pub fn close_changeset(
        &mut self,
        cs: ChangesetId,
        user_id: &str,
        now: f64,
    ) -> Result<Option<WayId>, OswError> {
        let c = self.open_owned(cs, user_id)?;
        if c.state == ChangesetState::Closed {
            return Err(OswError::AlreadyClosed(cs));
        }
        let mut sidewalk: Vec<&OswNode> = c
            .node_ids
            .iter()
            .map(|id| &self.nodes[id])
            .filter(|n| n.class == FeatureClass::Sidewalk)
            .collect();
        sidewalk.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp).then(a.id.cmp(&b.id)));
        let refs: Vec<NodeId> = sidewalk.iter().map(|n| n.id).collect();

        let way = if refs.len() >= 2 {
            let id = self.next_way.max(1);
            self.next_way = id + 1;
            let tags = Tags::from([
                ("highway".to_string(), "footway".to_string()),
                ("footway".to_string(), "sidewalk".to_string()),
            ]);
            self.ways.insert(
                id,
                OswWay {
                    id,
                    node_refs: refs,
                    tags,
                    changeset_id: cs,
                    user_id: user_id.to_string(),
                },
            );
            Some(id)
        } else {
            None
        };
        let c = self.changesets.get_mut(&cs).expect("checked above");
        c.way_ids.extend(way);
        c.state = ChangesetState::Closed;
        c.closed_at = Some(now);
        Ok(way)
    }

    /// Every structural invariant the store must maintain; returns the first violation.
    pub fn check_integrity(&self) -> Result<(), String> {
        for (id, n) in &self.nodes {
            if *id != n.id || *id >= self.next_node {
                return Err(format!("node {id} key/id or allocator mismatch"));
            }
            let c = self
                .changesets
                .get(&n.changeset_id)
                .ok_or(format!("node {id} has no changeset"))?;
            if !c.node_ids.contains(id) || c.user_id != n.user_id {
                return Err(format!("node {id} not recorded by its changeset"));
            }
        }
        for (id, c) in &self.changesets {
            if *id != c.id || *id >= self.next_changeset {
                return Err(format!("changeset {id} key/id or allocator mismatch"));
            }
            if c.way_ids.len() > 1 {
                return Err(format!("changeset {id} has {} ways", c.way_ids.len()));
            }
            if c.state == ChangesetState::Open && (!c.way_ids.is_empty() || c.closed_at.is_some()) {
                return Err(format!("open changeset {id} already finalized"));
            }
            for nid in &c.node_ids {
                if self.nodes.get(nid).map(|n| n.changeset_id) != Some(*id) {
                    return Err(format!("changeset {id} lists foreign node {nid}"));
                }
            }
            let sidewalk = c
                .node_ids
                .iter()
                .filter(|n| self.nodes[n].class == FeatureClass::Sidewalk)
                .count();
            let expect_way = c.state == ChangesetState::Closed && sidewalk >= 2;
            if expect_way != (c.way_ids.len() == 1) {
                return Err(format!("changeset {id} way count disagrees with its nodes"));
            }
        }
        for (id, w) in &self.ways {
            if *id != w.id || *id >= self.next_way {
                return Err(format!("way {id} key/id or allocator mismatch"));
            }
            if w.node_refs.len() < 2 {
                return Err(format!("way {id} has fewer than 2 nodes"));
            }
            let c = self
                .changesets
                .get(&w.changeset_id)
                .ok_or(format!("way {id} has no changeset"))?;
            if !c.way_ids.contains(id) {
                return Err(format!("way {id} not recorded by its changeset"));
            }
            let mut last: Option<&OswNode> = None;
            for r in &w.node_refs {
                let n = self
                    .nodes
                    .get(r)
                    .ok_or(format!("way {id} dangles at {r}"))?;
                if n.class != FeatureClass::Sidewalk || n.changeset_id != w.changeset_id {
                    return Err(format!("way {id} references unrelated node {r}"));
                }
                if let Some(p) = last {
                    if p.timestamp > n.timestamp {
                        return Err(format!("way {id} is out of capture order"));
                    }
                }
                last = Some(n);
            }
        }
        Ok(())
    }

    /// GeoJSON export of the current nodes and ways.
    pub fn to_geojson(&self) -> Result<Value, OswError> {
        serialize_workspace(&self.nodes, &self.ways)
    }
}

fn properties(kind: &str, id: u64, tags: &Tags) -> Map<String, Value> {
    let mut p = Map::new();
    for (k, v) in tags {
        p.insert(k.clone(), Value::String(v.clone()));
    }
    p.insert("kind".into(), json!(kind));
    p.insert("id".into(), json!(id));
    p
}

/// FeatureCollection of point features (nodes, by id) followed by LineString
/// features (ways, by id). Tags are flattened into the properties.
pub fn serialize_workspace(
    nodes: &BTreeMap<NodeId, OswNode>,
    ways: &BTreeMap<WayId, OswWay>,
) -> Result<Value, OswError> {
    let mut features = Vec::with_capacity(nodes.len() + ways.len());
    for n in nodes.values() {
        let mut p = properties("node", n.id, &n.tags);
        p.insert("class".into(), json!(n.class));
        p.insert("changeset_id".into(), json!(n.changeset_id));
        p.insert("user_id".into(), json!(n.user_id));
        p.insert("timestamp".into(), json!(n.timestamp));
        features.push(json!({
            "type": "Feature",
            "geometry": {
                "type": "Point",
                "coordinates": [n.location.longitude(), n.location.latitude()],
            },
            "properties": p,
        }));
    }
    for w in ways.values() {
        let mut coords = Vec::with_capacity(w.node_refs.len());
        for r in &w.node_refs {
            let n = nodes.get(r).ok_or(OswError::DanglingReference {
                way: w.id,
                node: *r,
            })?;
            coords.push(json!([n.location.longitude(), n.location.latitude()]));
        }
        let mut p = properties("way", w.id, &w.tags);
        p.insert("class".into(), json!(FeatureClass::Sidewalk));
        p.insert("changeset_id".into(), json!(w.changeset_id));
        p.insert("user_id".into(), json!(w.user_id));
        p.insert("node_refs".into(), json!(w.node_refs));
        features.push(json!({
            "type": "Feature",
            "geometry": { "type": "LineString", "coordinates": coords },
            "properties": p,
        }));
    }
    Ok(json!({ "type": "FeatureCollection", "features": features }))
}

/// Compact, byte-stable encoding of [`serialize_workspace`].
pub fn serialize_workspace_string(
    nodes: &BTreeMap<NodeId, OswNode>,
    ways: &BTreeMap<WayId, OswWay>,
) -> Result<String, OswError> {
    Ok(serialize_workspace(nodes, ways)?.to_string())
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParsedWorkspace {
    pub nodes: BTreeMap<NodeId, OswNode>,
    pub ways: BTreeMap<WayId, OswWay>,
}

fn malformed(msg: impl Into<String>) -> OswError {
    OswError::Malformed(msg.into())
}

fn take_u64(p: &mut Map<String, Value>, key: &str) -> Result<u64, OswError> {
    p.remove(key)
        .and_then(|v| v.as_u64())
        .ok_or_else(|| malformed(format!("missing integer `{key}`")))
}

fn take_string(p: &mut Map<String, Value>, key: &str) -> Result<String, OswError> {
    match p.remove(key) {
        Some(Value::String(s)) => Ok(s),
        _ => Err(malformed(format!("missing string `{key}`"))),
    }
}

fn rest_as_tags(p: Map<String, Value>) -> Result<Tags, OswError> {
    p.into_iter()
        .map(|(k, v)| match v {
            Value::String(s) => Ok((k, s)),
            other => Err(malformed(format!("tag `{k}` is not a string: {other}"))),
        })
        .collect()
}

fn point_of(v: &Value) -> Result<GeoPoint, OswError> {
    let c = v
        .as_array()
        .filter(|c| c.len() == 2)
        .ok_or_else(|| malformed("coordinate is not [lon, lat]"))?;
    let lon = c[0].as_f64().ok_or_else(|| malformed("longitude"))?;
    let lat = c[1].as_f64().ok_or_else(|| malformed("latitude"))?;
    GeoPoint::new(lat, lon).map_err(|e| malformed(e.to_string()))
}

/// Inverse of [`serialize_workspace`].
pub fn parse_workspace(doc: &Value) -> Result<ParsedWorkspace, OswError> {
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(malformed("not a FeatureCollection"));
    }
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| malformed("missing features"))?;
    let mut out = ParsedWorkspace::default();
    for f in features {
        let geometry = f
            .get("geometry")
            .ok_or_else(|| malformed("missing geometry"))?;
        let mut p = f
            .get("properties")
            .and_then(Value::as_object)
            .cloned()
            .ok_or_else(|| malformed("missing properties"))?;
        let kind = take_string(&mut p, "kind")?;
        let id = take_u64(&mut p, "id")?;
        let class: FeatureClass = take_string(&mut p, "class")?
            .parse()
            .map_err(|e: crate::mask::UnknownClass| malformed(e.to_string()))?;
        let changeset_id = take_u64(&mut p, "changeset_id")?;
        let user_id = take_string(&mut p, "user_id")?;
        let coords = geometry
            .get("coordinates")
            .ok_or_else(|| malformed("coordinates"))?;
        match kind.as_str() {
            "node" => {
                let timestamp = p
                    .remove("timestamp")
                    .and_then(|v| v.as_f64())
                    .ok_or_else(|| malformed("missing timestamp"))?;
                let node = OswNode {
                    id,
                    location: point_of(coords)?,
                    class,
                    tags: rest_as_tags(p)?,
                    changeset_id,
                    user_id,
                    timestamp,
                };
                if out.nodes.insert(id, node).is_some() {
                    return Err(OswError::DuplicateNodeId(id));
                }
            }
            "way" => {
                let node_refs: Vec<NodeId> = p
                    .remove("node_refs")
                    .and_then(|v| serde_json::from_value(v).ok())
                    .ok_or_else(|| malformed("missing node_refs"))?;
                let coords = coords
                    .as_array()
                    .ok_or_else(|| malformed("way coordinates"))?;
                if coords.len() != node_refs.len() {
                    return Err(malformed(format!("way {id} geometry/ref length differ")));
                }
                out.ways.insert(
                    id,
                    OswWay {
                        id,
                        node_refs,
                        tags: rest_as_tags(p)?,
                        changeset_id,
                        user_id,
                    },
                );
            }
            other => return Err(malformed(format!("unknown feature kind `{other}`"))),
        }
    }
    for w in out.ways.values() {
        if let Some(&node) = w.node_refs.iter().find(|r| !out.nodes.contains_key(r)) {
            return Err(OswError::DanglingReference { way: w.id, node });
        }
    }
    Ok(out)
}

pub fn parse_workspace_str(s: &str) -> Result<ParsedWorkspace, OswError> {
    let v: Value = serde_json::from_str(s).map_err(|e| malformed(e.to_string()))?;
    parse_workspace(&v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::FeatureClass::*;
    use proptest::prelude::*;

    fn node(lat: f64, class: FeatureClass, ts: f64) -> NewNode {
        NewNode {
            location: GeoPoint::new(lat, -122.3).unwrap(),
            class,
            tags: Tags::new(),
            timestamp: ts,
        }
    }

    #[test]
    fn open_assigns_fresh_ids() {
        let mut ws = Workspace::new();
        let a = ws.open_changeset("ana", 0.0).unwrap();
        let b = ws.open_changeset("ana", 0.0).unwrap();
        assert_ne!(a, b);
        let cs = ws.changeset(a).unwrap();
        assert_eq!(cs.state, ChangesetState::Open);
        assert!(cs.node_ids.is_empty() && cs.way_ids.is_empty());
        assert_eq!(ws.open_changeset(" ", 0.0), Err(OswError::Unauthenticated));
    }

    #[test]
    fn node_lifecycle() {
        let mut ws = Workspace::new();
        let cs = ws.open_changeset("ana", 0.0).unwrap();
        let id = ws.add_node(cs, "ana", node(47.0, Pole, 1.0)).unwrap();
        assert_eq!(ws.changeset(cs).unwrap().node_ids, vec![id]);
        assert_eq!(ws.nodes()[&id].changeset_id, cs);
        let dup = OswNode {
            id,
            location: GeoPoint::new(47.0, 0.0).unwrap(),
            class: Pole,
            tags: Tags::new(),
            changeset_id: 0,
            user_id: "ana".into(),
            timestamp: 2.0,
        };
        assert_eq!(ws.insert_node(cs, dup), Err(OswError::DuplicateNodeId(id)));
        assert_eq!(
            ws.add_node(cs, "bob", node(47.0, Pole, 1.0)),
            Err(OswError::NotOwner(cs))
        );
        ws.close_changeset(cs, "ana", 5.0).unwrap();
        assert_eq!(
            ws.add_node(cs, "ana", node(47.0, Pole, 1.0)),
            Err(OswError::ChangesetClosed(cs))
        );
        assert_eq!(
            ws.close_changeset(cs, "ana", 6.0),
            Err(OswError::AlreadyClosed(cs))
        );
        assert_eq!(
            ws.add_node(99, "ana", node(47.0, Pole, 1.0)),
            Err(OswError::UnknownChangeset(99))
        );
        ws.check_integrity().unwrap();
    }

    #[test]
    fn reserved_tags_rejected() {
        let mut ws = Workspace::new();
        let cs = ws.open_changeset("ana", 0.0).unwrap();
        let mut n = node(47.0, Pole, 1.0);
        n.tags.insert("class".into(), "x".into());
        assert!(matches!(
            ws.add_node(cs, "ana", n),
            Err(OswError::InvalidTag(_))
        ));
    }

    #[test]
    fn way_follows_capture_order() {
        let mut ws = Workspace::new();
        let cs = ws.open_changeset("ana", 0.0).unwrap();
        // uploaded out of order; timestamps define the capture sequence
        let n2 = ws
            .add_node(cs, "ana", node(47.0002, Sidewalk, 2.0))
            .unwrap();
        let n1 = ws
            .add_node(cs, "ana", node(47.0001, Sidewalk, 1.0))
            .unwrap();
        ws.add_node(cs, "ana", node(47.0001, Pole, 1.5)).unwrap();
        let n3 = ws
            .add_node(cs, "ana", node(47.0003, Sidewalk, 3.0))
            .unwrap();
        let way = ws.close_changeset(cs, "ana", 9.0).unwrap().unwrap();
        assert_eq!(ws.ways()[&way].node_refs, vec![n1, n2, n3]);
        assert_eq!(ws.ways()[&way].tags["footway"], "sidewalk");
        assert_eq!(ws.changeset(cs).unwrap().closed_at, Some(9.0));
        ws.check_integrity().unwrap();
    }

    #[test]
    fn no_way_without_two_sidewalk_nodes() {
        let mut ws = Workspace::new();
        let cs = ws.open_changeset("ana", 0.0).unwrap();
        ws.add_node(cs, "ana", node(47.0, Sidewalk, 1.0)).unwrap();
        ws.add_node(cs, "ana", node(47.0, Pole, 2.0)).unwrap();
        assert_eq!(ws.close_changeset(cs, "ana", 3.0).unwrap(), None);
        let empty = ws.open_changeset("ana", 0.0).unwrap();
        assert_eq!(ws.close_changeset(empty, "ana", 3.0).unwrap(), None);
        ws.check_integrity().unwrap();
    }

    #[test]
    fn changesets_are_isolated() {
        let mut ws = Workspace::new();
        let a = ws.open_changeset("ana", 0.0).unwrap();
        let b = ws.open_changeset("ana", 0.0).unwrap();
        ws.add_node(a, "ana", node(47.0, Sidewalk, 1.0)).unwrap();
        ws.add_node(a, "ana", node(47.1, Sidewalk, 2.0)).unwrap();
        let before = ws.changeset(b).unwrap().clone();
        ws.close_changeset(a, "ana", 3.0).unwrap();
        assert_eq!(ws.changeset(b).unwrap(), &before);
    }

    #[test]
    fn empty_export() {
        let ws = Workspace::new();
        let doc = ws.to_geojson().unwrap();
        assert_eq!(doc, json!({"type": "FeatureCollection", "features": []}));
        assert_eq!(parse_workspace(&doc).unwrap(), ParsedWorkspace::default());
    }

    #[test]
    fn two_nodes_and_a_way() {
        let mut ws = Workspace::new();
        let cs = ws.open_changeset("ana", 0.0).unwrap();
        let mut a = node(47.61, Sidewalk, 1.0);
        a.tags.insert(WIDTH_TAG.into(), format_width(2.004));
        let a = ws.add_node(cs, "ana", a).unwrap();
        let b = ws.add_node(cs, "ana", node(47.62, Sidewalk, 2.0)).unwrap();
        ws.close_changeset(cs, "ana", 3.0).unwrap();
        let doc = ws.to_geojson().unwrap();
        let features = doc["features"].as_array().unwrap();
        assert_eq!(features.len(), 3);
        assert_eq!(features[0]["properties"]["width"], "2.00");
        assert_eq!(features[0]["properties"]["class"], "sidewalk");
        assert_eq!(features[0]["properties"]["changeset_id"], cs);
        let line = features[2]["geometry"]["coordinates"].as_array().unwrap();
        for (i, id) in [a, b].iter().enumerate() {
            let n = &ws.nodes()[id];
            assert_eq!(
                line[i],
                json!([n.location.longitude(), n.location.latitude()])
            );
        }
        let back = parse_workspace(&doc).unwrap();
        assert_eq!(&back.nodes, ws.nodes());
        assert_eq!(&back.ways, ws.ways());
    }

    #[test]
    fn dangling_reference() {
        let mut ways = BTreeMap::new();
        ways.insert(
            1,
            OswWay {
                id: 1,
                node_refs: vec![4, 5],
                tags: Tags::new(),
                changeset_id: 1,
                user_id: "ana".into(),
            },
        );
        assert_eq!(
            serialize_workspace(&BTreeMap::new(), &ways),
            Err(OswError::DanglingReference { way: 1, node: 4 })
        );
    }

    /// Every (state, operation) pair; only OPEN accepts edits.
    #[test]
    fn exhaustive_transitions() {
        for state in [ChangesetState::Open, ChangesetState::Closed] {
            for op in 0..2 {
                let mut ws = Workspace::new();
                let cs = ws.open_changeset("ana", 0.0).unwrap();
                if state == ChangesetState::Closed {
                    ws.close_changeset(cs, "ana", 1.0).unwrap();
                }
                let before = ws.clone();
                let r = match op {
                    0 => ws.add_node(cs, "ana", node(47.0, Pole, 1.0)).map(|_| ()),
                    _ => ws.close_changeset(cs, "ana", 2.0).map(|_| ()),
                };
                match (state, op) {
                    (ChangesetState::Open, _) => assert!(r.is_ok()),
                    (ChangesetState::Closed, 0) => {
                        assert_eq!(r, Err(OswError::ChangesetClosed(cs)));
                        assert_eq!(ws, before);
                    }
                    (ChangesetState::Closed, _) => {
                        assert_eq!(r, Err(OswError::AlreadyClosed(cs)));
                        assert_eq!(ws, before);
                    }
                }
                ws.check_integrity().unwrap();
            }
        }
    }

    proptest! {
        #[test]
        fn geojson_round_trip(
            pts in prop::collection::vec((-89.9f64..89.9, -179.9f64..180.0, 0usize..6, 0.0f64..1e6), 0..12),
            width in 0.5f64..4.0,
        ) {
            let mut ws = Workspace::new();
            let cs = ws.open_changeset("ana", 0.0).unwrap();
            for (lat, lon, c, ts) in pts {
                let class = FeatureClass::MAPPABLE[c % 5];
                let mut tags = Tags::new();
                if class == Sidewalk {
                    tags.insert(WIDTH_TAG.into(), format_width(width));
                }
                tags.insert(CAPTURE_TAG.into(), format!("{ts}"));
                let n = NewNode { location: GeoPoint::new(lat, lon).unwrap(), class, tags, timestamp: ts };
                ws.add_node(cs, "ana", n).unwrap();
            }
            ws.close_changeset(cs, "ana", 1.0).unwrap();
            ws.check_integrity().unwrap();
            let s = serialize_workspace_string(ws.nodes(), ws.ways()).unwrap();
            let back = parse_workspace_str(&s).unwrap();
            prop_assert_eq!(&back.nodes, ws.nodes());
            prop_assert_eq!(&back.ways, ws.ways());
            prop_assert_eq!(serialize_workspace_string(&back.nodes, &back.ways).unwrap(), s);
        }
    }
}
