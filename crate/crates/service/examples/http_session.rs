//! Starts the service on an ephemeral port, creates a session on a built-in
//! cohort, submits an A/B run and polls until the report is ready.

use std::error::Error;
use std::time::Duration;

use fts_service::{router, AppState, Catalog, ServiceConfig};
use serde_json::{json, Value};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};

async fn call(addr: &str, method: &str, path: &str, body: Option<Value>) -> Result<(u16, Value), Box<dyn Error>> {
    let body = body.map(|b| b.to_string()).unwrap_or_default();
    let mut stream = TcpStream::connect(addr).await?;
    let request = format!(
        "{method} {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{body}",
        body.len()
    );
    stream.write_all(request.as_bytes()).await?;
    let mut raw = String::new();
    stream.read_to_string(&mut raw).await?;
    let (head, payload) = raw.split_once("\r\n\r\n").ok_or("malformed response")?;
    let status = head.get(9..12).ok_or("malformed status line")?.parse()?;
    Ok((status, serde_json::from_str(payload)?))
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn Error>> {
    let state = AppState::new(Catalog::builtin(), &ServiceConfig::default());
    let listener = TcpListener::bind("127.0.0.1:0").await?;
    let addr = listener.local_addr()?.to_string();
    tokio::spawn(async move { axum::serve(listener, router(state)).await });
    println!("service on http://{addr}");

    let (_, cohorts) = call(&addr, "GET", "/api/cohorts", None).await?;
    for c in cohorts["cohorts"].as_array().into_iter().flatten() {
        println!("cohort {:<26} {} candidates", c["name"].as_str().unwrap_or("?"), c["size"]);
    }

    let (status, created) = call(&addr, "POST", "/api/sessions", Some(json!({ "cohort": "synthetic-reasoning-gap" }))).await?;
    let id = created["session_id"].as_str().ok_or("no session id")?.to_string();
    println!("{status} created session {id}");

    let run = json!({
        "weights_a": { "memory": 0, "information_processing_speed": 0, "reasoning": 1, "attention": 0, "behavioral_restraint": 0 },
        "weights_b": { "memory": 0, "information_processing_speed": 0, "reasoning": 0, "attention": 1, "behavioral_restraint": 0 },
        "master_seed": 42
    });
    let (status, _) = call(&addr, "POST", &format!("/api/sessions/{id}/run"), Some(run)).await?;
    println!("{status} run submitted");

    let report = loop {
        let (status, body) = call(&addr, "GET", &format!("/api/sessions/{id}/results"), None).await?;
        match status {
            200 => break body,
            202 => {
                println!("  running: {}", body["progress"]);
                tokio::time::sleep(Duration::from_millis(200)).await;
            }
            _ => return Err(format!("run failed: {body}").into()),
        }
    };

    let deltas = &report["report"]["deltas"]["groups"]["country"];
    for d in deltas.as_array().into_iter().flatten() {
        println!("{:<6} selection rate delta {}", d["group"].as_str().unwrap_or("?"), d["selection_rate"]);
    }
    Ok(())
}
