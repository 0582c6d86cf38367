use nanoop::transport::{reply_text, request_body, AnyTransport, MockTransport};
use nanoop_core::llm::{Message, Request, Role, Transport, TransportError};
use serde_json::json;

fn req(sample: usize, attempt: usize, messages: &[Message]) -> Request<'_> {
    Request { model: "m", temperature: 0.7, messages, sample, attempt }
}

fn script(files: &[(&str, &str)]) -> tempfile::TempDir {
    let d = tempfile::tempdir().unwrap();
    for (n, t) in files {
        std::fs::write(d.path().join(n), t).unwrap();
    }
    d
}

#[test]
fn mock_replays_by_sample_and_attempt() {
    let d = script(&[("0-0.txt", "first"), ("0-2.txt", "third"), ("1-0.txt", "other")]);
    let t = MockTransport::new(d.path()).unwrap();
    assert_eq!(t.complete(&req(0, 0, &[])).unwrap(), "first");
    assert_eq!(t.complete(&req(0, 1, &[])).unwrap(), "first", "falls back to the latest earlier attempt");
    assert_eq!(t.complete(&req(0, 2, &[])).unwrap(), "third");
    assert_eq!(t.complete(&req(0, 5, &[])).unwrap(), "third");
    assert_eq!(t.complete(&req(1, 0, &[])).unwrap(), "other");
    assert!(t.complete(&req(2, 0, &[])).unwrap_err().0.contains("sample 2"));
}

#[test]
fn error_file_fails_only_the_first_call() {
    let d = script(&[("0-0.err", "503 busy\n"), ("0-0.txt", "ok")]);
    let t = MockTransport::new(d.path()).unwrap();
    assert_eq!(t.complete(&req(0, 0, &[])), Err(TransportError("503 busy".into())));
    assert_eq!(t.complete(&req(0, 0, &[])).unwrap(), "ok");
}

#[test]
fn transport_specs() {
    let d = script(&[]);
    let base = d.path().parent().unwrap();
    let name = d.path().file_name().unwrap().to_str().unwrap();
    assert!(matches!(AnyTransport::parse(&format!("mock:{name}"), base), Ok(AnyTransport::Mock(_))));
    assert!(AnyTransport::parse("mock:does-not-exist", base).unwrap_err().contains("does-not-exist"));
    assert!(matches!(AnyTransport::parse("http://127.0.0.1:9/v1", base), Ok(AnyTransport::Http(_))));
    assert!(matches!(AnyTransport::parse("https://example.invalid/v1", base), Ok(AnyTransport::Http(_))));
    assert!(AnyTransport::parse("ftp://x", base).unwrap_err().contains("ftp://x"));
}

#[test]
fn request_and_reply_bodies() {
    let msgs = [
        Message { role: Role::System, content: "rules".into() },
        Message { role: Role::User, content: "write rori".into() },
    ];
    let body = request_body(&req(3, 1, &msgs));
    assert_eq!(
        body,
        json!({"model": "m", "temperature": 0.7, "messages": [
            {"role": "system", "content": "rules"}, {"role": "user", "content": "write rori"}]})
    );
    assert_eq!(reply_text(&json!({"choices": [{"message": {"content": "def f(): pass"}}]})).as_deref(), Some("def f(): pass"));
    assert_eq!(reply_text(&json!({"content": "x"})).as_deref(), Some("x"));
    assert_eq!(reply_text(&json!({"choices": []})), None);
}

#[test]
fn unreachable_endpoint_is_a_transport_error() {
    let t = AnyTransport::parse("http://127.0.0.1:9/v1/chat", std::path::Path::new(".")).unwrap();
    let msgs = [Message { role: Role::User, content: "hi".into() }];
    assert!(t.complete(&req(0, 0, &msgs)).is_err());
}
