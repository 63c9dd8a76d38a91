//! Exit codes and the one-line error contract.

mod common;

use std::fs;

fn stderr_line(out: &std::process::Output) -> String {
    let s = String::from_utf8(out.stderr.clone()).unwrap();
    assert_eq!(s.lines().count(), 1, "stderr: {s}");
    s.trim_end().to_string()
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for args in [
        vec!["select", "--records", "r", "--pattern", "combined", "--out", "o"],
        vec!["select", "--unknown-flag"],
        vec!["capture", "--model", "m", "--dataset", "missing", "--out", "o"],
        vec!["baseline-loglik", "--records", "r", "--model", "m", "--out", "o"],
        vec!["synth", "model", "--rig", "plant-mlp-neuron", "--out", "o"],
    ] {
        let out = common::truthv(d, None, &args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(stderr_line(&out).starts_with("error[usage]: "), "{args:?}");
    }
    let out = common::truthv(d, Some("zero"), &["analyze", "curve", "--records", "r", "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runtime_errors_carry_a_category() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("bad.txt"), "{\"dataset\":\"x\",\"probes\":[]}\nnot json\n").unwrap();
    let out = common::truthv(d, None, &["analyze", "curve", "--records", "bad.txt", "--out", "o"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_line(&out).starts_with("error[format]: "));

    fs::write(
        d.join("spec.json"),
        r#"{"planted_probes":[],"noise_probe_count":4,"n_items":10,"m_candidates":3,"seed":1}"#,
    )
    .unwrap();
    common::ok(&common::truthv(d, None, &["synth", "records", "--spec", "spec.json", "--out", "s"]));
    let out = common::truthv(
        d,
        None,
        &["select", "--records", "s/records.txt", "--pattern", "argmax", "--budget-n", "11", "--out", "sel"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_line(&out).starts_with("error[input]: "));
    let out = common::truthv(
        d,
        None,
        &["analyze", "overlap", "--records", "s/records.txt", "--probe", "mlp_key:9:9", "--out", "o"],
    );
    assert!(stderr_line(&out).starts_with("error[selection]: "));
}

#[test]
fn outputs_may_not_overwrite_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("spec.json"),
        r#"{"planted_probes":[],"noise_probe_count":4,"n_items":10,"m_candidates":3,"seed":1}"#,
    )
    .unwrap();
    common::ok(&common::truthv(d, None, &["synth", "records", "--spec", "spec.json", "--out", "s"]));
    let before = fs::read(d.join("s/records.txt")).unwrap();
    let out = common::truthv(d, None, &["analyze", "curve", "--records", "s/records.txt", "--out", "s/records.txt"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(fs::read(d.join("s/records.txt")).unwrap(), before);
}

#[test]
fn evaluate_prints_four_decimals_and_writes_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("spec.json"),
        r#"{"planted_probes":[{"kind":"mlp_key","layer":0,"index":0,"pattern":"argmax","reliability":0.5}],
            "noise_probe_count":20,"n_items":64,"m_candidates":2,"seed":3}"#,
    )
    .unwrap();
    common::ok(&common::truthv(d, None, &["synth", "records", "--spec", "spec.json", "--out", "s"]));
    common::ok(&common::truthv(d, None, &["select", "--records", "s/records.txt", "--pattern", "argmax", "--out", "sel"]));
    let stdout = common::ok(&common::truthv(
        d,
        None,
        &["evaluate", "--records", "s/records.txt", "--selection", "sel", "--dataset", "s/dataset", "--out", "ev"],
    ));
    let acc = stdout.trim().strip_prefix("accuracy: ").unwrap();
    assert_eq!(acc.split('.').nth(1).unwrap().len(), 4);
    let preds = fs::read_to_string(d.join("ev.predictions.jsonl")).unwrap();
    assert_eq!(preds.lines().count(), 64);
}
