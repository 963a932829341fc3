use std::process::Command;

fn relaycast(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_relaycast")).args(args).output().unwrap()
}

#[test]
fn generate_prints_channel_csv() {
    let out = relaycast(&["--seed", "4", "generate", "--destinations", "3"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("link,i,j,re,im"));
    // R = 4 source-relay, 4·3 relay-destination and 3 direct links.
    assert_eq!(text.lines().count(), 1 + 4 + 12 + 3);
}

#[test]
fn solve_reports_record_and_weights() {
    let out = relaycast(&["--seed", "2", "solve", "--method", "R2-CCCP", "--destinations", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["record"]["method"], "R2-CCCP");
    assert_eq!(v["weights"]["w_re"].as_array().unwrap().len(), 10);
    let dsd = relaycast(&["solve", "--method", "DSD"]);
    let v: serde_json::Value = serde_json::from_slice(&dsd.stdout).unwrap();
    assert!(v["weights"].is_null());
}

#[test]
fn bad_config_exits_with_a_field_message() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "name = \"x\"\n[cccp]\nn_starts = \"ten\"\n").unwrap();
    let out = relaycast(&["--config", path.to_str().unwrap(), "sweep"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("n_starts"), "{err}");
}

#[test]
fn unknown_method_is_rejected() {
    let out = relaycast(&["solve", "--method", "R3-CCCP"]);
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().contains("R2-CCCP"));
}
