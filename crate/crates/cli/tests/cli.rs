use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mlsn(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mlsn"))
        .args(args)
        .current_dir(cwd)
        .env_remove("MLSN_OUT_DIR")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn case_study(dir: &Path) {
    let o = mlsn(&["generate", "--preset", "case-study", "--out-dir", "in"], dir);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn help_documents_formats() {
    let tmp = tempfile::tempdir().unwrap();
    let o = mlsn(&["--help"], tmp.path());
    let text = stdout(&o);
    assert!(text.contains("objects.csv     id,level,parent_id,created_at,creator_id"));
    assert!(text.contains("activities.csv  user_id,object_id,activity_type,timestamp"));
    let o = mlsn(&["pipeline", "--help"], tmp.path());
    assert!(stdout(&o).contains("windowed_edges.tsv"));
}

#[test]
fn validate_clean_input() {
    let tmp = tempfile::tempdir().unwrap();
    case_study(tmp.path());
    let o = mlsn(&["validate", "--input-dir", "in", "--out-dir", "rep"], tmp.path());
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("valid"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("rep/validation_report.json")).unwrap()).unwrap();
    assert!(report["violations"].as_array().unwrap().is_empty());
}

#[test]
fn validate_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    case_study(tmp.path());
    let objects = tmp.path().join("in/objects.csv");
    let original = fs::read_to_string(&objects).unwrap();

    fs::write(&objects, original.replace("1.2,topic,1,5,C", "1.2,topic,1,5,")).unwrap();
    let o = mlsn(&["validate", "--input-dir", "in"], tmp.path());
    assert_eq!(code(&o), 4);
    assert!(stdout(&o).contains("MissingCreator"));

    fs::write(&objects, original.clone() + "x,topic,y,1,A\ny,post,x,1,A\n").unwrap();
    assert_eq!(code(&mlsn(&["validate", "--input-dir", "in"], tmp.path())), 5);

    fs::write(&objects, "id,level\n1,forum\n").unwrap();
    assert_eq!(code(&mlsn(&["validate", "--input-dir", "in"], tmp.path())), 3);

    assert_eq!(code(&mlsn(&["validate", "--input-dir", "missing"], tmp.path())), 3);
    assert_eq!(code(&mlsn(&["validate"], tmp.path())), 2);
}

#[test]
fn generate_is_deterministic_and_seed_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let params = r#"{
        "seed": 1, "users": 50, "active_users": 20,
        "levels": [
            {"label": "forum", "count": {"kind": "fixed", "per_parent": 2}},
            {"label": "topic", "count": {"kind": "range", "min": 1, "max": 4}},
            {"label": "post", "count": {"kind": "total", "total": 40}}
        ],
        "activities": [
            {"activity": "Is Creator", "level": "forum", "mode": "creator"},
            {"activity": "Is Author", "level": "post", "mode": "creator"},
            {"activity": "Is Reader", "level": "post", "mode": "random", "rate": 0.5, "max_per_object": 3}
        ],
        "start": 0, "end": 1000
    }"#;
    fs::write(tmp.path().join("p.json"), params).unwrap();
    for dir in ["a", "b"] {
        let o = mlsn(&["generate", "--params", "p.json", "--seed", "7", "--out-dir", dir], tmp.path());
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).contains("post: 40"));
    }
    mlsn(&["generate", "--params", "p.json", "--out-dir", "c"], tmp.path());
    let read = |d: &str| fs::read(tmp.path().join(d).join("activities.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));

    fs::write(tmp.path().join("bad.json"), "{\"seed\": 1}").unwrap();
    assert_eq!(code(&mlsn(&["generate", "--params", "bad.json", "--out-dir", "d"], tmp.path())), 2);
}

#[test]
fn pipeline_flags_override_config() {
    let tmp = tempfile::tempdir().unwrap();
    case_study(tmp.path());
    fs::write(
        tmp.path().join("run.json"),
        r#"{"input_dir": "in", "out_dir": "from-config", "end_levels": ["post"], "model": "multigraph"}"#,
    )
    .unwrap();
    let o = mlsn(
        &["pipeline", "--config", "run.json", "--end-level", "forum", "--layer", "Is Moderator,Is Commentator", "--out-dir", "out"],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = tmp.path().join("out");
    assert!(!tmp.path().join("from-config").exists());
    assert!(out.join("1-forum/edges/multigraph.tsv").is_file());
    assert!(!out.join("3-post").exists());
    let edges = fs::read_to_string(out.join("1-forum/edges/multigraph.tsv")).unwrap();
    assert!(edges.contains("A\tD\t"));
}

#[test]
fn pipeline_uses_env_out_dir_and_windows() {
    let tmp = tempfile::tempdir().unwrap();
    case_study(tmp.path());
    let o = Command::new(env!("CARGO_BIN_EXE_mlsn"))
        .args(["pipeline", "--input-dir", "in", "--end-level", "2", "--periods", "3"])
        .current_dir(tmp.path())
        .env("MLSN_OUT_DIR", "env-out")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(tmp.path().join("env-out/2-topic/windowed_edges.tsv").is_file());
}

#[test]
fn pipeline_error_codes() {
    let tmp = tempfile::tempdir().unwrap();
    case_study(tmp.path());
    assert_eq!(code(&mlsn(&["pipeline", "--input-dir", "in"], tmp.path())), 2);
    let o = mlsn(&["pipeline", "--input-dir", "in", "--out-dir", "o", "--end-level", "galaxy"], tmp.path());
    assert_eq!(code(&o), 2);
    let o = mlsn(&["pipeline", "--input-dir", "in", "--out-dir", "o", "--layer", "Is Creator"], tmp.path());
    assert_eq!(code(&o), 2);
    let o = mlsn(
        &["pipeline", "--input-dir", "in", "--out-dir", "o", "--window-length", "1", "--window-step", "5"],
        tmp.path(),
    );
    assert_eq!(code(&o), 6);
    assert!(String::from_utf8_lossy(&o.stderr).contains("layers: "));
    fs::write(tmp.path().join("in/schema.json"), "{").unwrap();
    assert_eq!(code(&mlsn(&["pipeline", "--input-dir", "in", "--out-dir", "o"], tmp.path())), 3);
}
