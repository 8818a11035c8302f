use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use gm_core::contribution::{nodes_for_capture, PendingNode};
use gm_core::exec::Exec;
use gm_core::mask::FeatureClass;
use gm_core::osw::{ChangesetId, WayId};
use gm_core::pipeline::{process_session, CaptureResult};
use gm_core::session::read_session;
use gm_core::vetting::{apply_vetting, default_record, VettingRecord};
use gm_service::api::NodeDocument;
use gm_service::WorkspaceClient;

use crate::args::ReplayArgs;
use crate::failure::{from_client, Failure, ResultExt};
use crate::settings::Settings;
use crate::vet;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ReplaySummary {
    pub captures: usize,
    pub detected: usize,
    pub item_errors: usize,
    pub accepted: usize,
    pub uploaded: usize,
    pub changeset_id: Option<ChangesetId>,
    pub way_id: Option<WayId>,
}

pub fn parse_classes(names: &[String]) -> Result<BTreeSet<FeatureClass>, Failure> {
    let mut set = BTreeSet::new();
    for n in names.iter().map(|n| n.trim()).filter(|n| !n.is_empty()) {
        let c: FeatureClass = n
            .parse()
            .map_err(|_| Failure::input(format!("unknown class `{n}`")))?;
        if !c.is_mappable() {
            return Err(Failure::input(format!("class `{n}` cannot be mapped")));
        }
        set.insert(c);
    }
    if set.is_empty() {
        return Err(Failure::input("--classes names no class"));
    }
    Ok(set)
}

fn records(
    args: &ReplayArgs,
    results: &[CaptureResult],
    input: &mut dyn BufRead,
    out: &mut dyn Write,
) -> Result<Vec<VettingRecord>, Failure> {
    if let Some(path) = &args.vet_file {
        return vet::records_from_file(results, vet::load_vet_file(path)?);
    }
    if args.interactive {
        return results
            .iter()
            .map(|r| {
                if r.instance_count() == 0 {
                    Ok(default_record(r.capture_id.to_string(), &r.detections))
                } else {
                    vet::interactive_record(r, input, out)
                }
            })
            .collect();
    }
    Ok(results
        .iter()
        .map(|r| default_record(r.capture_id.to_string(), &r.detections))
        .collect())
}

async fn upload(
    server: &str,
    workspace: &str,
    user: &str,
    secret: &str,
    nodes: Vec<PendingNode>,
) -> Result<(ChangesetId, Option<WayId>, usize), Failure> {
    let mut c =
        WorkspaceClient::new(server).map_err(|e| from_client(e, "cannot build HTTP client"))?;
    c.login(user, secret)
        .await
        .map_err(|e| from_client(e, &format!("login to {server} failed")))?;
    let cs = c
        .open_changeset(workspace)
        .await
        .map_err(|e| from_client(e, "cannot open changeset"))?;
    let mut uploaded = 0;
    for p in nodes {
        let key = p.client_key.clone();
        c.add_node(
            workspace,
            cs,
            &NodeDocument::new(p.node, Some(p.client_key)),
        )
        .await
        .map_err(|e| from_client(e, &format!("upload of {key} failed")))?;
        uploaded += 1;
    }
    let closed = c
        .close_changeset(workspace, cs)
        .await
        .map_err(|e| from_client(e, &format!("cannot close changeset {cs}")))?;
    Ok((cs, closed.way_id, uploaded))
}

pub fn run(
    args: &ReplayArgs,
    settings: &Settings,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
) -> Result<ReplaySummary, Failure> {
    let mut session = read_session(&args.session)
        .input(&format!("cannot read session {}", args.session.display()))?;
    if let Some(names) = &args.classes {
        session.class_selection = parse_classes(names)?;
    }
    let results = process_session(&session, &settings.pipeline, Exec::default())
        .input("cannot process session")?;
    let records = records(args, &results, input, out)?;

    let mut summary = ReplaySummary {
        captures: results.len(),
        ..ReplaySummary::default()
    };
    let mut pending = Vec::new();
    for (r, rec) in results.iter().zip(&records) {
        summary.detected += r.instance_count();
        summary.item_errors += r.errors.len();
        let vetted = apply_vetting(&r.detections, rec).input(&format!(
            "invalid vetting record for capture {}",
            r.capture_id
        ))?;
        pending.extend(nodes_for_capture(&vetted));
    }
    summary.accepted = pending.len();
    let w = |out: &mut dyn Write, s: String| writeln!(out, "{s}").environment("stdout");
    w(out, format!("captures processed: {}", summary.captures))?;
    w(
        out,
        format!(
            "instances detected: {} (item errors: {})",
            summary.detected, summary.item_errors
        ),
    )?;
    w(out, format!("nodes accepted: {}", summary.accepted))?;

    if args.dry_run {
        w(out, "dry run: nothing uploaded".into())?;
        return Ok(summary);
    }
    if pending.is_empty() {
        w(out, "nothing to upload".into())?;
        return Ok(summary);
    }
    let server = args.server.as_deref().unwrap_or(&settings.replay.server);
    let workspace = args
        .workspace
        .as_deref()
        .unwrap_or(&settings.replay.workspace);
    let user = args.user.as_deref().unwrap_or(&settings.replay.user);
    let secret = args.secret.as_deref().unwrap_or(&settings.replay.secret);
    let rt = tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .environment("cannot start runtime")?;
    let (cs, way, uploaded) = rt.block_on(upload(server, workspace, user, secret, pending))?;
    summary.changeset_id = Some(cs);
    summary.way_id = way;
    summary.uploaded = uploaded;
    let way = way.map_or("no way".to_string(), |id| format!("way {id}"));
    w(
        out,
        format!("changeset {cs} on {workspace}: uploaded {uploaded} nodes, {way}"),
    )?;
    Ok(summary)
}
