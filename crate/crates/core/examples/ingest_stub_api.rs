// Pulls labeled snippets from a paginated JSON API. A tiny in-process
// server stands in for the real endpoint.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;

use textshift::corpus::LabelSet;
use textshift::ingest::{fetch_all, write_records, IngestConfig, SystemClock};

/// Answers `?q=..&start=..&limit=..` with up to 7 snippets per keyword.
fn serve() -> std::io::Result<String> {
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;
    std::thread::spawn(move || {
        for mut stream in listener.incoming().flatten() {
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request = String::new();
            reader.read_line(&mut request).unwrap();
            let mut header = String::new();
            while reader.read_line(&mut header).unwrap() > 2 {
                header.clear();
            }
            let query = request.split_whitespace().nth(1).and_then(|t| t.split_once('?')).map(|(_, q)| q).unwrap_or("");
            let param = |k: &str| {
                query.split('&').find_map(|kv| kv.strip_prefix(k).and_then(|v| v.strip_prefix('='))).unwrap_or("0").to_string()
            };
            let (start, limit): (usize, usize) = (param("start").parse().unwrap(), param("limit").parse().unwrap());
            let keyword = param("q").replace('+', " ").replace("%2F", "/");
            let results: Vec<_> = (start..(start + limit).min(7))
                .map(|i| serde_json::json!({ "snippet": format!("{keyword} opening number {i}") }))
                .collect();
            let body = serde_json::json!({ "results": results }).to_string();
            let _ = write!(
                stream,
                "HTTP/1.1 200 OK\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
        }
    });
    Ok(format!("http://{addr}/jobs"))
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let config = IngestConfig {
        base_url: serve()?,
        per_request_limit: 3,
        min_interval_ms: 20,
        ..IngestConfig::default()
    };
    let labels = LabelSet::new(["Healthcare", "Sales"])?;
    let records = fetch_all(&config, &labels, &SystemClock::default())?;
    for r in &records {
        println!("{:<11} {}", r.label, r.text);
    }
    assert_eq!(records.len(), 14);

    let dir = tempfile::tempdir()?;
    write_records(&records, dir.path().join("snippets.jsonl"))?;
    Ok(())
}

fn main() {
    run_example().unwrap();
}
