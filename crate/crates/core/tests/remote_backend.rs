use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use agentbank::llm::{ChatBackend, ChatRequest, LlmError, RemoteBackend, RemoteConfig, RetryPolicy};

struct Captured {
    path: String,
    auth: Option<String>,
    body: serde_json::Value,
}

/// Minimal HTTP/1.1 server answering with the scripted statuses in order.
fn stub_server(statuses: Vec<u16>) -> (String, Arc<Mutex<Vec<Captured>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let seen = Arc::new(Mutex::new(Vec::new()));
    let seen2 = seen.clone();
    thread::spawn(move || {
        for status in statuses {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            let mut content_length = 0;
            let mut auth = None;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    content_length = v.trim().parse().unwrap();
                }
                if lower.starts_with("authorization:") {
                    auth = Some(line["authorization:".len()..].trim().to_string());
                }
            }
            let mut body = vec![0; content_length];
            reader.read_exact(&mut body).unwrap();
            seen2.lock().unwrap().push(Captured {
                path: request_line.split_whitespace().nth(1).unwrap().to_string(),
                auth,
                body: serde_json::from_slice(&body).unwrap(),
            });
            let payload = if status == 200 {
                r#"{"choices":[{"message":{"role":"assistant","content":"Response: Yes"}}]}"#
            } else {
                r#"{"error":"slow down"}"#
            };
            let reason = if status == 200 { "OK" } else { "Too Many Requests" };
            write!(
                stream,
                "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
                payload.len()
            )
            .unwrap();
        }
    });
    (format!("http://{addr}"), seen)
}

fn config(base: String, attempts: u32) -> RemoteConfig {
    RemoteConfig {
        base_url: base,
        api_key: Some("sk-test".into()),
        model: "test-model".into(),
        retry: RetryPolicy { max_attempts: attempts, base_delay_ms: 5, jitter: false },
        timeout_secs: 5,
        rate_limit: Some((10, 100.0)),
    }
}

#[test]
fn retries_through_rate_limiting() {
    let (base, seen) = stub_server(vec![429, 429, 200]);
    let backend = RemoteBackend::new(config(base, 5)).unwrap();
    let out = backend.complete(&ChatRequest::user("predict:p1:q1", "hello")).unwrap();
    assert_eq!(out, "Response: Yes");

    let log = backend.call_log().records();
    assert_eq!(log.len(), 3);
    assert_eq!(log.iter().map(|r| r.outcome.as_str()).collect::<Vec<_>>(), ["http 429", "http 429", "ok"]);
    assert!(log.iter().all(|r| r.tag == "predict:p1:q1" && r.prompt_hash.len() == 16));

    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 3);
    assert_eq!(seen[0].path, "/v1/chat/completions");
    assert_eq!(seen[0].auth.as_deref(), Some("Bearer sk-test"));
    assert_eq!(seen[0].body["model"], "test-model");
    assert_eq!(seen[0].body["messages"][0]["role"], "user");
    assert_eq!(seen[0].body["messages"][0]["content"], "hello");
    assert_eq!(seen[0].body["temperature"], 0.0);
}

#[test]
fn exhausted_retries_are_transport_errors() {
    let (base, _) = stub_server(vec![503, 503, 503]);
    let backend = RemoteBackend::new(config(base, 3)).unwrap();
    let err = backend.complete(&ChatRequest::user("t", "hello")).unwrap_err();
    assert!(matches!(err, LlmError::Transport { attempts: 3, .. }), "{err}");
    assert_eq!(backend.call_log().len(), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let (base, _) = stub_server(vec![401]);
    let backend = RemoteBackend::new(config(base, 5)).unwrap();
    let err = backend.complete(&ChatRequest::user("t", "hello")).unwrap_err();
    assert!(matches!(err, LlmError::Transport { attempts: 1, .. }));
}

#[test]
fn unreachable_endpoint_fails_after_cap() {
    // bind then drop to get a port nobody listens on
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let backend = RemoteBackend::new(config(format!("http://127.0.0.1:{port}"), 2)).unwrap();
    let err = backend.complete(&ChatRequest::user("t", "hello")).unwrap_err();
    assert!(matches!(err, LlmError::Transport { attempts: 2, .. }), "{err}");
}
