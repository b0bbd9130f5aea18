#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, OnceLock};

use rankcf::server::spawn_local;
use rankcf::service::{CorpusConfig, RankerBinding};
use rankcf::{Service, ServiceConfig};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn config() -> ServiceConfig {
    let entry = |name: &str, file: &str| CorpusConfig {
        name: name.into(),
        path: fixture(file),
        ranker: RankerBinding::Builtin,
        embedding_endpoint: None,
    };
    ServiceConfig {
        corpora: vec![entry("covid", "covid.jsonl"), entry("five", "five.jsonl")],
        ..ServiceConfig::default()
    }
}

pub fn service() -> Service {
    Service::from_config(&config()).expect("fixture corpora load")
}

/// One fixture server per test binary.
pub fn server() -> SocketAddr {
    static ADDR: OnceLock<SocketAddr> = OnceLock::new();
    *ADDR.get_or_init(|| spawn_local(Arc::new(service())).expect("bind local server"))
}

pub fn base_url(addr: SocketAddr) -> String {
    format!("http://{addr}")
}

pub fn post(addr: SocketAddr, path: &str, body: &str) -> (u16, String) {
    let resp = reqwest::blocking::Client::new()
        .post(format!("http://{addr}{path}"))
        .header("content-type", "application/json")
        .body(body.to_owned())
        .send()
        .expect("request");
    (resp.status().as_u16(), resp.text().expect("body"))
}

pub fn get(addr: SocketAddr, path: &str) -> (u16, String) {
    let resp = reqwest::blocking::get(format!("http://{addr}{path}")).expect("request");
    (resp.status().as_u16(), resp.text().expect("body"))
}
