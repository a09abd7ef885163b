use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use metaharvest_core::record::MetadataRecord;
use metaharvest_core::store::Catalog;
use metaharvest_core::synth::{dc_corpus, eagles};
use metaharvest_server::{Service, ServiceConfig};
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_metaharvest"));
    c.env_remove("METAHARVEST_CONFIG").env("RUST_LOG", "off");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(rel)
}

/// Writes a service config into `dir` and returns its path.
fn write_config(dir: &Path, bind: &str, sources: &str) -> PathBuf {
    let path = dir.join("service.toml");
    let text = format!(
        "bind = \"{bind}\"\nrepository_name = \"CLI Test\"\nbase_url = \"http://localhost\"\n\n[paths]\nstore = \"store\"\nstate = \"state\"\n{sources}"
    );
    std::fs::write(&path, text).unwrap();
    path
}

fn source_block(id: &str, url: &str) -> String {
    format!("\n[[sources]]\nsource_id = \"{id}\"\nkind = \"oai-pmh\"\nlocation = \"{url}\"\n")
}

#[test]
fn crosswalk_prints_the_unified_record() {
    let xml = fixture("fgdc/soil_respiration.xml");
    let out = run(&["crosswalk", xml.to_str().unwrap(), "--source", "golden"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let got: MetadataRecord = serde_json::from_slice(&out.stdout).unwrap();
    let want: MetadataRecord =
        serde_json::from_str(&std::fs::read_to_string(fixture("fgdc/soil_respiration.expected.json")).unwrap()).unwrap();
    assert_eq!(got, want);
    assert_eq!(stdout_json(&out)["raw_document_available"], true);

    let eml = run(&["crosswalk", fixture("eml/grassland_biomass.xml").to_str().unwrap()]);
    assert_eq!(eml.status.code(), Some(0));
    assert!(stdout_json(&eml)["identifier"].as_str().unwrap().starts_with("local:"));
}

#[test]
fn crosswalk_rejects_bad_documents() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = dir.path().join("unknown.xml");
    std::fs::write(&unknown, "<recipe><title>Soup</title></recipe>").unwrap();
    let out = run(&["crosswalk", unknown.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("UnknownSchema"), "{}", stderr(&out));
    let broken = dir.path().join("broken.xml");
    std::fs::write(&broken, "<metadata><idinfo>").unwrap();
    let out = run(&["crosswalk", broken.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("MalformedXml"));
    assert_eq!(run(&["crosswalk", "/no/such/file.xml"]).status.code(), Some(2));
}

#[test]
fn search_the_local_store() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "127.0.0.1:0", "");
    let cfg = config.to_str().unwrap();

    let out = run(&["search", "eagles", "--config", cfg]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("0 results"));

    Catalog::open(dir.path().join("store")).unwrap().apply_batch(eagles("demo")).unwrap();
    let out = run(&["search", "title:eagles", "--json", "--config", cfg]);
    let v = stdout_json(&out);
    assert_eq!(v["total"], 1);
    assert_eq!(v["hits"][0]["id"], "demo:album");
    let out = bin().args(["search", "eagles", "--json", "--bbox", "-130,35,-100,50"]).env("METAHARVEST_CONFIG", cfg).output().unwrap();
    let v = stdout_json(&out);
    assert_eq!(v["total"], 1);
    assert_eq!(v["hits"][0]["id"], "demo:survey");

    let out = run(&["search", "title:(eagles", "--config", cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("position"), "{}", stderr(&out));
    let out = run(&["search", "eagles", "--bbox", "181,0,10,10", "--config", cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("CoordinateOutOfRange"));
    assert_eq!(run(&["search", "eagles"]).status.code(), Some(2));
}

#[test]
fn federation_figures() {
    let dir = tempfile::tempdir().unwrap();
    let stats = dir.path().join("stats.json");
    std::fs::write(&stats, r#"[{"uptime":0.99,"latency":120},{"uptime":0.99,"latency":80},{"uptime":0.99,"latency":300}]"#).unwrap();
    let out = run(&["federation", stats.to_str().unwrap(), "--json", "--trials", "200000", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["composite_uptime"], 0.970299);
    assert_eq!(v["federated_latency_ms"], 300.0);
    assert!((v["simulated_uptime"].as_f64().unwrap() - 0.970299).abs() < 0.002);

    let out = run(&["federation", stats.to_str().unwrap(), "--processing", "25"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("federated latency: 325 ms"));

    std::fs::write(&stats, "[]").unwrap();
    assert_eq!(run(&["federation", stats.to_str().unwrap()]).status.code(), Some(2));
    std::fs::write(&stats, r#"[{"uptime":1.5,"latency":1}]"#).unwrap();
    let out = run(&["federation", stats.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("uptime"));
}

#[tokio::test(flavor = "multi_thread")]
async fn harvest_from_a_live_provider() {
    let provider_dir = tempfile::tempdir().unwrap();
    let mut provider_config = ServiceConfig::new("Provider", "http://localhost", provider_dir.path());
    provider_config.bind = "127.0.0.1:0".parse().unwrap();
    let provider = Service::bind(provider_config).await.unwrap();
    provider.state().catalog.apply_batch(dc_corpus(25, 31, "p")).unwrap();
    let addr = provider.local_addr().unwrap();
    let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(provider.run(async {
        let _ = stopped.await;
    }));

    let dir = tempfile::tempdir().unwrap();
    let sources = source_block("prov", &format!("http://{addr}/oai")) + &source_block("down", "http://127.0.0.1:1/oai");
    let config = write_config(dir.path(), "127.0.0.1:0", &sources);
    let cfg = config.to_str().unwrap().to_string();

    let c = cfg.clone();
    let out = tokio::task::spawn_blocking(move || run(&["harvest", "--source", "prov", "--full", "--config", &c])).await.unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report = stdout_json(&out);
    assert_eq!(report["added"], 25);
    assert_eq!(report["success"], true);

    let c = cfg.clone();
    let out = tokio::task::spawn_blocking(move || run(&["harvest", "--source", "prov", "--config", &c])).await.unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["mode"], "incremental");

    let c = cfg.clone();
    let out = tokio::task::spawn_blocking(move || run(&["harvest", "--source", "nope", "--config", &c])).await.unwrap();
    assert_eq!(out.status.code(), Some(2));

    let c = cfg.clone();
    let out = tokio::task::spawn_blocking(move || run(&["harvest", "--source", "down", "--full", "--config", &c])).await.unwrap();
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    assert_eq!(stdout_json(&out)["success"], false);
    let store = Catalog::open(dir.path().join("store")).unwrap();
    assert_eq!(store.live_count(), 25);
    assert!(store.view().iter().all(|s| s.record.source_id == "prov"));

    stop.send(()).unwrap();
    server.await.unwrap().unwrap();
}

fn http_get(addr: &str, path: &str) -> String {
    let mut stream = TcpStream::connect(addr).unwrap();
    write!(stream, "GET {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").unwrap();
    let mut response = String::new();
    stream.read_to_string(&mut response).unwrap();
    response
}

#[test]
fn serve_lifecycle() {
    assert_eq!(run(&["serve", "--config", "/no/such/config.toml"]).status.code(), Some(2));
    assert_eq!(run(&["serve"]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let occupied = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let busy = write_config(dir.path(), &occupied.local_addr().unwrap().to_string(), "");
    let out = run(&["serve", "--config", busy.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    drop(occupied);

    let config = write_config(dir.path(), "127.0.0.1:0", "");
    let mut child = bin().args(["serve", "--config", config.to_str().unwrap()]).stderr(Stdio::piped()).spawn().unwrap();
    let mut lines = BufReader::new(child.stderr.take().unwrap()).lines();
    let addr = loop {
        let line = lines.next().expect("server exited early").unwrap();
        if let Some(rest) = line.strip_prefix("listening on http://") {
            break rest.trim().to_string();
        }
    };
    let health = http_get(&addr, "/healthz");
    assert!(health.starts_with("HTTP/1.1 200"), "{health}");
    assert!(health.contains("\"record_count\":0"));

    Command::new("kill").args(["-INT", &child.id().to_string()]).status().unwrap();
    let status = child.wait().unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(dir.path().join("store").join(metaharvest_core::store::SNAPSHOT_FILE).exists());
}
