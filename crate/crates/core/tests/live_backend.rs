//! The HTTP backend against a local stub server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use designcoder::image::RgbaImage;
use designcoder::llm::{
    bindings, Decoding, LiveBackend, LlmBackend, LlmError, LlmRequest, PromptTemplate, RecordingBackend, RetryPolicy,
    TemplateName, TranscriptStore,
};

struct Seen {
    authorization: String,
    body: serde_json::Value,
}

/// Serves one canned `(status, body)` per connection and records each request.
fn stub(answers: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<Seen>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    std::thread::spawn(move || {
        for (status, body) in answers {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let (mut len, mut authorization) = (0, String::new());
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if lower.starts_with("authorization:") {
                    authorization = line["authorization:".len()..].trim().to_string();
                }
                if line == "\r\n" {
                    break;
                }
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            log.lock().unwrap().push(Seen { authorization, body: serde_json::from_slice(&buf).unwrap() });
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (url, seen)
}

fn completion(text: &str) -> String {
    serde_json::json!({
        "choices": [{"message": {"role": "assistant", "content": text}}],
        "usage": {"prompt_tokens": 12, "completion_tokens": 3}
    })
    .to_string()
}

fn request() -> LlmRequest {
    PromptTemplate::builtin(TemplateName::Analysis)
        .render(
            &bindings([("component", "Card (merged_Card)".to_string())]),
            vec![Arc::new(RgbaImage::new(2, 2)), Arc::new(RgbaImage::new(3, 3))],
            Decoding::default(),
        )
        .unwrap()
}

fn backend(url: &str) -> LiveBackend {
    LiveBackend::new(url, "vision-model", "sk-test", 2)
        .with_retry(RetryPolicy { attempts: 3, base_delay: Duration::from_millis(5) })
}

#[test]
fn server_errors_are_retried_until_success() {
    let (url, seen) = stub(vec![
        (500, "{}".into()),
        (503, "{}".into()),
        (200, completion(r#"{"verdict":"ok","suggestion":""}"#)),
    ]);
    let response = backend(&url).complete(&request()).unwrap();
    assert_eq!(response.text, r#"{"verdict":"ok","suggestion":""}"#);
    assert_eq!(response.usage.prompt_tokens, 12);
    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 3);
    let first = &seen[0];
    assert_eq!(first.authorization, "Bearer sk-test");
    assert_eq!(first.body["model"], "vision-model");
    assert_eq!(first.body["temperature"], 0.0);
    let content = first.body["messages"][1]["content"].as_array().unwrap();
    assert_eq!(content.len(), 3, "text plus two images");
    assert!(content[1]["image_url"]["url"].as_str().unwrap().starts_with("data:image/png;base64,"));
}

#[test]
fn exhausted_retries_report_the_attempt_count() {
    let (url, _) = stub(vec![(500, "a".into()), (500, "b".into()), (500, "c".into())]);
    match backend(&url).complete(&request()) {
        Err(LlmError::Transport { attempts, message }) => {
            assert_eq!(attempts, 3);
            assert!(message.contains("500"), "{message}");
        }
        other => panic!("expected transport error, got {other:?}"),
    }
}

#[test]
fn auth_and_client_errors_are_not_retried() {
    let (url, seen) = stub(vec![(401, "bad key".into())]);
    assert!(matches!(backend(&url).complete(&request()), Err(LlmError::Auth(m)) if m.contains("401")));
    assert_eq!(seen.lock().unwrap().len(), 1);
    let (url, _) = stub(vec![(400, "nope".into())]);
    assert!(matches!(
        backend(&url).complete(&request()),
        Err(LlmError::Transport { attempts: 1, .. })
    ));
}

#[test]
fn recording_a_live_exchange_makes_it_replayable() {
    let (url, _) = stub(vec![(200, completion("hello"))]);
    let store = Arc::new(TranscriptStore::new());
    let recorder = RecordingBackend::new(Arc::new(backend(&url)), store.clone());
    let req = request();
    assert_eq!(recorder.complete(&req).unwrap().text, "hello");
    let reloaded = TranscriptStore::parse(&store.to_jsonl()).unwrap();
    assert_eq!(reloaded.replay(&req).unwrap().text, "hello");
}
