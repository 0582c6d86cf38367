#![allow(dead_code)]

use std::path::PathBuf;

pub fn demo() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/demo")
}

pub fn manifest() -> PathBuf {
    demo().join("nanoop.toml")
}

/// Runs the command line against the demo project.
pub fn cli(args: &[&str]) -> (i32, String, String) {
    let m = manifest();
    let mut argv: Vec<String> = vec!["nanoop".into(), "--project".into(), m.display().to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = nanoop::cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

pub fn cli_json(args: &[&str]) -> (i32, serde_json::Value) {
    let mut a = vec!["--json"];
    a.extend_from_slice(args);
    let (code, out, err) = cli(&a);
    let v = serde_json::from_str(&out).unwrap_or_else(|e| panic!("{e}\nstdout: {out}\nstderr: {err}"));
    (code, v)
}
