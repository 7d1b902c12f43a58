mod common;

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;

use common::{bid_for, read_outputs, spawn_nwpd, versioned_policy};
use hwv::nwpd::{load_store, FetchError, NwpdClient, PolicyStore};
use hwv::policy::PolicyDocument;
use hwv::runner::{cmd_run, PolicySourceArg, Preset, RunManifest};

fn raw_put(url: &str, body: &str) -> (u16, serde_json::Value) {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .http_status_as_error(false)
        .build()
        .into();
    let mut resp = agent
        .put(url)
        .header("Content-Type", "application/json")
        .send(body)
        .unwrap();
    let status = resp.status().as_u16();
    let text = resp.body_mut().read_to_string().unwrap();
    (status, serde_json::from_str(&text).unwrap())
}

#[test]
fn empty_database_returns_404() {
    let dir = tempfile::tempdir().unwrap();
    let (_store, server) = spawn_nwpd(&dir.path().join("store.json"));
    let client = NwpdClient::new(&server.url());
    assert_eq!(client.fetch_policy(), Err(FetchError::NoPolicy));
}

#[test]
fn put_then_get_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let (_store, server) = spawn_nwpd(&dir.path().join("store.json"));
    let client = NwpdClient::new(&format!("http://{}", server.addr()));
    let doc = Preset::find("constrained").unwrap().policy();
    assert_eq!(client.put_policy(&doc).unwrap(), 1);
    assert_eq!(client.fetch_policy().unwrap(), doc);
}

#[test]
fn versions_must_increase() {
    let dir = tempfile::tempdir().unwrap();
    let (store, server) = spawn_nwpd(&dir.path().join("store.json"));
    let client = NwpdClient::new(&server.url());
    client.put_policy(&versioned_policy(3)).unwrap();
    for stale in [1, 3] {
        assert!(matches!(client.put_policy(&versioned_policy(stale)), Err(FetchError::Stale(_))));
    }
    let (status, body) = raw_put(&server.url(), &String::from_utf8(versioned_policy(2).to_json_bytes()).unwrap());
    assert_eq!(status, 409);
    assert_eq!(body["current"], 3);
    assert_eq!(client.put_policy(&versioned_policy(4)).unwrap(), 4);
    assert_eq!(store.current_version(), Some(4));
}

#[test]
fn invalid_documents_get_field_errors() {
    let dir = tempfile::tempdir().unwrap();
    let (store, server) = spawn_nwpd(&dir.path().join("store.json"));
    let (status, body) = raw_put(&server.url(), "{ not json");
    assert_eq!(status, 400);
    assert_eq!(body["error"], "malformed policy");

    let mut doc = versioned_policy(1);
    doc.slices[1].bid = Some(-1.0);
    let (status, body) = raw_put(&server.url(), &String::from_utf8(doc.to_json_bytes()).unwrap());
    assert_eq!(status, 400);
    let fields: Vec<&str> = body["fields"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["field"].as_str().unwrap())
        .collect();
    assert!(fields.iter().any(|f| f.contains("bid")), "{body}");
    assert_eq!(store.current_version(), None);
}

#[test]
fn readers_see_whole_documents_during_writes() {
    let dir = tempfile::tempdir().unwrap();
    let (_store, server) = spawn_nwpd(&dir.path().join("store.json"));
    let url = server.url();
    NwpdClient::new(&url).put_policy(&versioned_policy(1)).unwrap();

    let done = Arc::new(AtomicBool::new(false));
    let readers: Vec<_> = (0..100)
        .map(|_| {
            let (url, done) = (url.clone(), done.clone());
            thread::spawn(move || {
                let client = NwpdClient::new(&url);
                let mut last = 0;
                let mut reads = 0;
                while !done.load(Ordering::Relaxed) || reads == 0 {
                    let doc = client.fetch_policy().expect("reader got a valid document");
                    assert_eq!(doc.slices[0].bid, Some(bid_for(doc.version)), "blended document");
                    assert!(doc.version >= last, "version went backwards");
                    last = doc.version;
                    reads += 1;
                }
                reads
            })
        })
        .collect();
    let writer = NwpdClient::new(&url);
    for v in 2..=40 {
        writer.put_policy(&versioned_policy(v)).unwrap();
    }
    done.store(true, Ordering::Relaxed);
    for r in readers {
        assert!(r.join().unwrap() > 0);
    }
    assert_eq!(writer.fetch_policy().unwrap().version, 40);
}

#[test]
fn store_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("store.json");
    let doc = versioned_policy(7);
    let served = {
        let (_store, server) = spawn_nwpd(&path);
        let client = NwpdClient::new(&server.url());
        client.put_policy(&doc).unwrap();
        client.fetch_bytes().unwrap()
    };
    assert_eq!(load_store(&path).unwrap(), doc);
    let reopened = PolicyStore::open(&path).unwrap();
    assert_eq!(reopened.get().unwrap().bytes, served);
    let (_store, server) = spawn_nwpd(&path);
    assert_eq!(NwpdClient::new(&server.url()).fetch_bytes().unwrap(), served);
    let parsed: PolicyDocument = serde_json::from_slice(&served).unwrap();
    assert_eq!(parsed, doc);
}

#[test]
fn run_from_url_matches_run_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let preset = Preset::find("priced").unwrap();
    let policy_file = dir.path().join("priced.policy.json");
    std::fs::write(&policy_file, preset.policy_json()).unwrap();
    let (_store, server) = spawn_nwpd(&dir.path().join("store.json"));
    NwpdClient::new(&server.url()).put_policy(&preset.policy()).unwrap();

    let manifest = |policy, out: &str| RunManifest {
        preset: Some("priced".into()),
        policy: Some(policy),
        out: dir.path().join(out),
        ..Default::default()
    };
    cmd_run(&manifest(PolicySourceArg::File(policy_file.clone()), "file")).unwrap();
    cmd_run(&manifest(PolicySourceArg::Url(server.url()), "url")).unwrap();
    assert_eq!(read_outputs(&dir.path().join("file")), read_outputs(&dir.path().join("url")));
}

#[test]
fn unreachable_database_is_reported() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let client = NwpdClient::new(&format!("http://{addr}"));
    assert!(matches!(client.fetch_policy(), Err(FetchError::Unreachable(_))));
}
