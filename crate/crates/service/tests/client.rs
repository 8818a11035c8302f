mod common;

use std::sync::Arc;

use gm_core::geo::GeoPoint;
use gm_core::mask::FeatureClass;
use gm_core::osw::{parse_workspace_str, Tags};
use gm_service::api::NodeDocument;
use gm_service::{router, serve, AppState, WorkspaceClient};

async fn spawn() -> String {
    let state = Arc::new(AppState::new(&common::config()).unwrap());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(serve(listener, router(state, None)));
    format!("http://{addr}")
}

fn doc(t: f64, key: &str) -> NodeDocument {
    NodeDocument {
        location: GeoPoint::new(47.6 + t * 1e-6, -122.3).unwrap(),
        class: FeatureClass::Sidewalk,
        tags: Tags::from([("width".to_string(), "2.00".to_string())]),
        timestamp: t,
        client_key: Some(key.to_string()),
    }
}

#[tokio::test]
async fn client_round_trip_over_tcp() {
    let base = spawn().await;
    let mut c = WorkspaceClient::new(&base).unwrap();
    assert_eq!(c.health().await.unwrap().status, "ok");
    assert!(c.open_changeset("demo").await.is_err());
    let bad = c.login("ana", "nope").await.unwrap_err();
    assert_eq!(bad.status(), Some(401));
    assert!(!bad.is_environmental());
    c.login("ana", "pw-a").await.unwrap();

    let cs = c.open_changeset("demo").await.unwrap();
    let a = c.add_node("demo", cs, &doc(0.0, "a")).await.unwrap();
    let b = c.add_node("demo", cs, &doc(1.0, "b")).await.unwrap();
    let again = c.add_node("demo", cs, &doc(0.0, "a")).await.unwrap();
    assert_eq!(a.node_id, again.node_id);
    assert!(again.replayed);
    let closed = c.close_changeset("demo", cs).await.unwrap();
    assert_eq!(closed.way_id, Some(1));
    let err = c.close_changeset("demo", cs).await.unwrap_err();
    assert_eq!(err.status(), Some(409));
    assert_eq!(c.changeset("demo", cs).await.unwrap().way_ids, vec![1]);

    let export = c.export("demo").await.unwrap();
    let ws = parse_workspace_str(&export).unwrap();
    assert_eq!(ws.ways[&1].node_refs, vec![a.node_id, b.node_id]);
    assert_eq!(export, c.export("demo").await.unwrap());
}

#[tokio::test]
async fn unreachable_server_is_environmental() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let c = WorkspaceClient::new(&format!("http://{addr}")).unwrap();
    let err = c.health().await.unwrap_err();
    assert!(err.is_environmental(), "{err}");
}
