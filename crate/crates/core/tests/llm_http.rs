use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use procmon_core::llmclient::{BackendConfig, BackendKind, ChatRequest, LlmClient, LlmError};

/// Serves the given (status, body) responses in order, one per connection,
/// and records the request bodies.
fn serve(responses: Vec<(u16, &'static str)>) -> (String, Arc<Mutex<Vec<String>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    thread::spawn(move || {
        for (status, body) in responses {
            let Ok((mut stream, _)) = listener.accept() else { return };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            let mut auth = String::new();
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line.trim().is_empty() {
                    break;
                }
                let lower = line.to_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if lower.starts_with("authorization:") {
                    auth = line.trim().to_string();
                }
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            log.lock().unwrap().push(format!("{auth}\n{}", String::from_utf8_lossy(&buf)));
            let reply = format!(
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(reply.as_bytes()).unwrap();
        }
    });
    (url, seen)
}

fn client(url: &str, retries: u32) -> LlmClient {
    let mut cfg = BackendConfig::new(BackendKind::HttpChat {
        base_url: url.to_string(),
        model: "test-model".into(),
        embedding_model: None,
        api_key_env: "PROCMON_TEST_KEY".into(),
    });
    cfg.max_retries = retries;
    cfg.backoff_ms = 1;
    cfg.timeout_secs = 5;
    LlmClient::new(cfg).unwrap()
}

const OK: &str = r#"{"choices":[{"message":{"content":"I am at line 1."}}],"usage":{"prompt_tokens":12,"completion_tokens":5}}"#;

#[test]
fn retries_server_errors_then_succeeds() {
    std::env::set_var("PROCMON_TEST_KEY", "sk-secret");
    let (url, seen) = serve(vec![(500, "{}"), (429, "{}"), (200, OK)]);
    let r = client(&url, 3).chat(&ChatRequest::new("sys", "where are you?")).unwrap();
    assert_eq!(r.text, "I am at line 1.");
    assert_eq!(r.attempts, 3);
    assert_eq!(r.prompt_tokens, Some(12));
    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 3);
    assert!(seen[2].contains("Bearer sk-secret"));
    assert!(seen[2].contains("\"temperature\":1e-7"));
    assert!(seen[2].contains("test-model"));
}

#[test]
fn gives_up_after_the_retry_budget() {
    let (url, _) = serve(vec![(503, "{}"), (503, "{}")]);
    let e = client(&url, 1).chat(&ChatRequest::new("s", "q")).unwrap_err();
    assert!(matches!(e, LlmError::RetriesExhausted { attempts: 2, last_status: Some(503), .. }), "{e}");
}

#[test]
fn client_errors_are_not_retried() {
    let (url, seen) = serve(vec![(400, r#"{"error":"bad"}"#), (200, OK)]);
    let e = client(&url, 3).chat(&ChatRequest::new("s", "q")).unwrap_err();
    assert!(matches!(e, LlmError::Status { status: 400, .. }), "{e}");
    assert_eq!(seen.lock().unwrap().len(), 1);
    let (url, _) = serve(vec![(401, "{}")]);
    assert!(matches!(client(&url, 3).chat(&ChatRequest::new("s", "q")), Err(LlmError::Auth(_))));
}

#[test]
fn malformed_responses_are_reported() {
    let (url, _) = serve(vec![(200, r#"{"choices":[]}"#)]);
    assert!(matches!(
        client(&url, 0).chat(&ChatRequest::new("s", "q")),
        Err(LlmError::Malformed { .. })
    ));
}
