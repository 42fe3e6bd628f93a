use std::fs;

use mlsn::layers::read_edge_list;
use mlsn::pipeline::{run_pipeline, ModelChoice, Phase, PipelineConfig, WindowConfig};
use mlsn::report::read_plot_data;
use mlsn::synth::case_study_dataset;

fn config(tmp: &std::path::Path) -> PipelineConfig {
    let input = tmp.join("in");
    case_study_dataset().write_dir(&input).unwrap();
    PipelineConfig {
        input_dir: Some(input),
        out_dir: Some(tmp.join("out")),
        ..Default::default()
    }
}

#[test]
fn forum_level_edges_contain_moderator_to_commentator() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = config(tmp.path());
    c.end_levels = vec!["forum".into()];
    c.layers = Some(vec![("Is Moderator".into(), "Is Commentator".into())]);
    let summary = run_pipeline(&c).unwrap();
    assert_eq!(summary.levels.len(), 1);
    let edges = tmp.path().join("out/1-forum/edges");
    let listing = fs::read_to_string(edges.join("layers.tsv")).unwrap();
    assert!(listing.contains("PTF Is Commentator - TF Is Moderator"));
    let rows = read_edge_list(fs::read(edges.join("001.tsv")).unwrap().as_slice()).unwrap();
    assert!(rows
        .iter()
        .any(|r| r.from == "A" && r.to == "D" && r.layer == "TF Is Moderator -> PTF Is Commentator"));
}

#[test]
fn three_levels_three_directories_and_plot_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let summary = run_pipeline(&config(tmp.path())).unwrap();
    let out = tmp.path().join("out");
    let dirs: Vec<String> = summary
        .levels
        .iter()
        .map(|l| l.dir.file_name().unwrap().to_string_lossy().to_string())
        .collect();
    assert_eq!(dirs, ["1-forum", "2-topic", "3-post"]);
    let plot = read_plot_data(fs::File::open(out.join("plot_data.csv")).unwrap()).unwrap();
    assert_eq!(plot.len(), summary.levels.iter().map(|l| l.layers).sum::<usize>());
    assert!(fs::read_to_string(out.join("1-forum/flattening.txt")).unwrap().contains("end level: forum"));
}

#[test]
fn multigraph_and_windows() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = config(tmp.path());
    c.model = ModelChoice::Multigraph;
    c.end_levels = vec!["2".into()];
    c.windows = Some(WindowConfig { length: Some(10), step: Some(5), ..Default::default() });
    run_pipeline(&c).unwrap();
    let dir = tmp.path().join("out/2-topic");
    assert!(dir.join("edges/multigraph.tsv").is_file());
    let w = fs::read_to_string(dir.join("windowed_edges.tsv")).unwrap();
    assert!(w.starts_with("from_user\tto_user\tstrength\tlayer\n"));
}

#[test]
fn phase_tagged_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = config(tmp.path());
    c.windows = Some(WindowConfig { length: Some(1), step: Some(5), ..Default::default() });
    let err = run_pipeline(&c).unwrap_err();
    assert_eq!(err.phase, Phase::Layers);
    assert!(err.to_string().starts_with("layers: "));

    let mut c = config(tmp.path());
    fs::write(c.input_dir.as_ref().unwrap().join("schema.json"), "{").unwrap();
    assert_eq!(run_pipeline(&c).unwrap_err().phase, Phase::Parse);

    c.out_dir = None;
    assert_eq!(run_pipeline(&c).unwrap_err().phase, Phase::Config);
}

#[test]
fn inputs_are_not_modified() {
    let tmp = tempfile::tempdir().unwrap();
    let c = config(tmp.path());
    let dir = c.input_dir.clone().unwrap();
    let before: Vec<Vec<u8>> = ["users.csv", "objects.csv", "activities.csv", "schema.json"]
        .iter()
        .map(|f| fs::read(dir.join(f)).unwrap())
        .collect();
    run_pipeline(&c).unwrap();
    let after: Vec<Vec<u8>> = ["users.csv", "objects.csv", "activities.csv", "schema.json"]
        .iter()
        .map(|f| fs::read(dir.join(f)).unwrap())
        .collect();
    assert_eq!(before, after);
}
