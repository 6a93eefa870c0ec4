mod common;

use std::sync::Arc;

use common::*;
use prewrite_core::{CanvasDocument, Event};
use serde_json::json;

#[tokio::test]
async fn snapshot_then_event_then_reply() {
    let svc = start_quiet().await;
    let mut ws = connect(svc.addr).await;
    let snap = recv(&mut ws).await.unwrap();
    assert_eq!(snap["type"], "snapshot");
    let seq = snap["seq"].as_u64().unwrap();
    assert!(snap["document"]["tasks"].as_array().unwrap().len() >= 6);
    assert_eq!(snap["config"]["scheduler"]["tick_seconds"], 3600.0);

    send(&mut ws, 1, "add_node", json!({ "kind": "keyword", "text": "travel", "position": { "x": 10, "y": 20 } })).await;
    let ev = recv(&mut ws).await.unwrap();
    assert_eq!(ev["type"], "event");
    assert_eq!(ev["event"]["seq"].as_u64().unwrap(), seq + 1);
    assert_eq!(ev["event"]["event"]["type"], "node_added");
    assert_eq!(ev["event"]["event"]["node"]["text"], "travel");
    let reply = recv(&mut ws).await.unwrap();
    assert_eq!(reply, json!({ "type": "reply", "client_seq": 1, "ok": true, "result": { "node_id": "n7" } }));
    svc.stop().await.unwrap();
}

#[tokio::test]
async fn bad_commands_get_error_replies() {
    let svc = start_quiet().await;
    let mut ws = connect(svc.addr).await;
    recv(&mut ws).await.unwrap();
    send(&mut ws, 4, "teleport", json!({})).await;
    let r = recv(&mut ws).await.unwrap();
    assert_eq!(r["client_seq"], 4);
    assert_eq!(r["ok"], false);
    assert!(r["error"].as_str().unwrap().starts_with("bad command"));

    let (events, r) = call(&mut ws, 5, "delete_node", json!({ "node_id": "n99" })).await;
    assert!(events.is_empty());
    assert_eq!(r["ok"], false);
    svc.stop().await.unwrap();
}

#[tokio::test]
async fn two_clients_see_identical_streams() {
    let svc = start_quiet().await;
    let mut a = connect(svc.addr).await;
    let mut b = connect(svc.addr).await;
    let sa = recv(&mut a).await.unwrap();
    let sb = recv(&mut b).await.unwrap();
    assert_eq!(sa, sb);

    let mut from_a = Vec::new();
    let steps = [
        ("add_node", json!({ "kind": "keyword", "text": "rain", "position": { "x": 0, "y": 0 } })),
        ("add_node", json!({ "kind": "concept", "text": "weather", "position": { "x": 300, "y": 0 } })),
        ("connect", json!({ "from": "n7", "to": "n8", "directed": true })),
        ("move_node", json!({ "node_id": "n7", "position": { "x": 5, "y": 5 } })),
        ("move_cursor", json!({ "position": { "x": 1, "y": 1 } })),
        ("add_section", json!({ "title": "Sky", "rect": { "x": -50, "y": -50, "width": 600, "height": 300 } })),
    ];
    for (i, (cmd, args)) in steps.into_iter().enumerate() {
        let (events, reply) = call(&mut a, i as u64, cmd, args).await;
        assert_eq!(reply["ok"], true, "{cmd}: {reply}");
        // Each of these commands changes exactly one thing.
        assert_eq!(events.len(), 1, "{cmd}");
        from_a.extend(events);
    }
    let mut from_b = Vec::new();
    while from_b.len() < from_a.len() {
        let m = recv(&mut b).await.unwrap();
        assert_eq!(m["type"], "event");
        from_b.push(m["event"].clone());
    }
    assert_eq!(from_a, from_b);
    svc.stop().await.unwrap();
}

#[tokio::test]
async fn failing_provider_is_reported_and_service_stays_up() {
    let svc = start_with(Arc::new(Failing), config(3600.0, None)).await;
    let task = keyword_task(&CanvasDocument::with_defaults(T0));
    let mut ws = connect(svc.addr).await;
    recv(&mut ws).await.unwrap();
    call(&mut ws, 1, "add_node", json!({ "kind": "keyword", "text": "ocean", "position": { "x": 0, "y": 0 } })).await;
    let (_, r) = call(&mut ws, 2, "set_initiative", json!({ "task_id": task, "mode": "reactive", "scope": { "scope": "global" } })).await;
    assert_eq!(r["ok"], true, "{r}");
    let (mut seen, r) = call(&mut ws, 3, "request_reactive", json!({ "anchor": "n7", "task_id": task })).await;
    assert_eq!(r["ok"], true, "{r}");
    let rejected = wait_for(&mut ws, &mut seen, |e| e["event"]["type"] == "result_rejected").await;
    assert!(rejected["event"]["reason"].as_str().unwrap().contains("connection refused"));

    let (events, r) = call(&mut ws, 4, "regenerate", json!({ "node_id": "n7", "feedback": "be_brief" })).await;
    assert_eq!(r["ok"], false);
    assert!(events.is_empty());

    let (events, r) = call(&mut ws, 5, "add_node", json!({ "kind": "keyword", "text": "still here", "position": { "x": 9, "y": 9 } })).await;
    assert_eq!(r["ok"], true);
    assert_eq!(events.len(), 1);
    svc.stop().await.unwrap();
}

#[tokio::test]
async fn live_stream_replays_to_the_saved_document() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("doc.json");
    let svc = start_with(Arc::new(prewrite_core::llm::MockProvider::new(3)), config(0.2, Some(path.clone()))).await;
    let task = keyword_task(&CanvasDocument::with_defaults(T0));
    let mut ws = connect(svc.addr).await;
    let snap = recv(&mut ws).await.unwrap();
    let mut doc: CanvasDocument = serde_json::from_value(snap["document"].clone()).unwrap();
    let mut events: Vec<serde_json::Value> = Vec::new();

    let (ev, _) = call(&mut ws, 1, "add_node", json!({ "kind": "keyword", "text": "travel", "position": { "x": 0, "y": 0 } })).await;
    events.extend(ev);
    // Wait for this task's curtain on the new node, then open and accept.
    wait_for(&mut ws, &mut events, |e| {
        e["event"]["type"] == "curtain_shown" && e["event"]["anchor"] == "n7" && e["event"]["task_id"] == task
    })
    .await;
    let (ev, r) = call(&mut ws, 2, "expand", json!({ "anchor": "n7", "task_id": task })).await;
    events.extend(ev);
    assert_eq!(r["ok"], true, "{r}");
    let first = r["result"]["candidates"][0].clone();
    let (ev, r) = call(&mut ws, 3, "accept", json!({ "node_id": first })).await;
    assert_eq!(r["ok"], true, "{r}");
    assert_eq!(ev.last().unwrap()["event"]["type"], "accepted");
    events.extend(ev);

    let stopping = tokio::spawn(svc.stop());
    while let Some(m) = recv(&mut ws).await {
        if m["type"] == "event" {
            events.push(m["event"].clone());
        }
    }
    stopping.await.unwrap().unwrap();

    for e in &events {
        let e: Event = serde_json::from_value(e.clone()).unwrap();
        doc.push_replayed(&e).unwrap();
    }
    let saved = prewrite_core::persist::load(&path).unwrap();
    assert_eq!(prewrite_core::persist::to_json(&doc), prewrite_core::persist::to_json(&saved));
}

#[tokio::test]
async fn delegated_task_can_be_confirmed() {
    let svc = start_quiet().await;
    let mut ws = connect(svc.addr).await;
    recv(&mut ws).await.unwrap();
    let (events, r) = call(&mut ws, 1, "delegate_task", json!({ "name_hint": "Improve" })).await;
    assert!(events.is_empty(), "delegation proposes without storing");
    assert_eq!(r["ok"], true, "{r}");
    let spec = r["result"].clone();
    assert_eq!(spec["name"], "Improve");
    assert!(spec["prompts"][0]["template"].as_str().unwrap().contains("[placeholder]"));
    let (events, r) = call(&mut ws, 2, "confirm_task", json!({ "task": spec })).await;
    assert_eq!(r["ok"], true, "{r}");
    assert_eq!(events.len(), 1);
    assert_eq!(events[0]["event"]["type"], "task_added");
    svc.stop().await.unwrap();
}

fn note(seen: &mut Vec<serde_json::Value>, events: &[serde_json::Value]) {
    seen.extend_from_slice(events);
}

async fn census_call(
    ws: &mut Ws,
    seq: &mut u64,
    seen: &mut Vec<serde_json::Value>,
    cmd: &str,
    args: serde_json::Value,
) {
    *seq += 1;
    let (events, r) = call(ws, *seq, cmd, args).await;
    assert_eq!(r["ok"], true, "{cmd}: {r}");
    note(seen, &events);
}

/// Every user-driven state change is reachable by a command. Curtains and
/// unread markers come from the scheduler and are covered by the live test.
#[tokio::test]
async fn command_census_covers_every_user_event() {
    let svc = start_quiet().await;
    let mut ws = connect(svc.addr).await;
    let snap = recv(&mut ws).await.unwrap();
    let doc: CanvasDocument = serde_json::from_value(snap["document"].clone()).unwrap();
    let task = keyword_task(&doc);
    let mut seen = Vec::new();
    let mut seq = 0;
    let steps = vec![
        ("add_node", json!({ "kind": "keyword", "text": "lantern", "position": { "x": 0, "y": 0 } })),
        ("add_node", json!({ "kind": "keyword", "text": "moth", "position": { "x": 600, "y": 0 } })),
        ("move_node", json!({ "node_id": "n8", "position": { "x": 650, "y": 10 } })),
        ("resize_node", json!({ "node_id": "n8", "size": { "width": 150, "height": 60 } })),
        ("connect", json!({ "from": "n7", "to": "n8" })),
        ("disconnect", json!({ "edge_id": "e9" })),
        ("add_section", json!({ "title": "Night", "rect": { "x": -10, "y": -10, "width": 100, "height": 100 } })),
        ("delete_section", json!({ "section_id": "s10" })),
        ("move_cursor", json!({ "position": { "x": 3, "y": 4 } })),
        ("select_prompt", json!({ "task_id": task, "index": 0 })),
        ("set_initiative", json!({ "task_id": task, "mode": "reactive", "scope": { "scope": "global" } })),
        ("request_reactive", json!({ "anchor": "n7", "task_id": task })),
    ];
    for (cmd, args) in steps {
        census_call(&mut ws, &mut seq, &mut seen, cmd, args).await;
    }
    let mut renamed = doc.tasks()[0].clone();
    renamed.name = format!("{} again", renamed.name);
    census_call(&mut ws, &mut seq, &mut seen, "update_task", json!({ "task": renamed })).await;

    let is_ours = |e: &serde_json::Value| {
        e["event"]["type"] == "expanded" && e["event"]["anchor"] == "n7" && e["event"]["task_id"] == task
    };
    let expanded = wait_for(&mut ws, &mut seen, is_ours).await;
    let nodes: Vec<String> =
        expanded["event"]["nodes"].as_array().unwrap().iter().map(|n| n["id"].as_str().unwrap().to_string()).collect();
    assert!(nodes.len() >= 2, "{expanded}");

    let steps = vec![
        ("accept", json!({ "node_id": nodes[0] })),
        ("regenerate", json!({ "node_id": nodes[1], "feedback": "be_creative" })),
        ("explain", json!({ "node_id": nodes[1] })),
        ("discard", json!({ "node_id": nodes[1] })),
        ("click_label", json!({ "anchor": "n7", "task_id": task })),
        ("set_visibility", json!({ "task_id": task, "visible": false })),
        ("set_visibility", json!({ "task_id": task, "visible": true })),
        ("update_text", json!({ "node_id": "n8", "text": "moths" })),
        ("delete_node", json!({ "node_id": "n8" })),
        ("header", json!({ "anchor": "n7" })),
        ("preview", json!({ "anchor": "n7" })),
        ("delete_task", json!({ "task_id": task })),
    ];
    for (cmd, args) in steps {
        census_call(&mut ws, &mut seq, &mut seen, cmd, args).await;
    }
    svc.stop().await.unwrap();

    let required = [
        "node_added", "text_confirmed", "node_moved", "node_resized", "node_deleted", "edge_added", "edge_removed",
        "section_added", "section_deleted", "cursor_moved", "task_updated", "task_deleted", "prompt_selected",
        "initiative_set", "visibility_set", "dispatch", "expanded", "collapsed", "accepted", "discarded",
        "regenerated", "explained",
    ];
    let kinds: std::collections::BTreeSet<&str> = seen.iter().filter_map(|e| e["event"]["type"].as_str()).collect();
    let missing: Vec<_> = required.iter().filter(|k| !kinds.contains(**k)).collect();
    assert!(missing.is_empty(), "no command produced {missing:?}");
}
