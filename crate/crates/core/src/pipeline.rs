//! End-to-end run: load, flatten to each end level, extract layers, report.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flatten::{check_initials, flatten, Naming};
use crate::ingest::{load, InputPaths, LoadError, Loaded};
use crate::layers::{
    build_sn, windowed_edges, write_edge_list, EdgeRow, LayerKey, LayerSelection, RoleIndex, SnModel,
    SocialNetwork, TimeWindowSpec, WindowMode,
};
use crate::model::{Level, PreSocialNetwork};
use crate::report::{
    activity_inventory, cross_level_ratios, cross_level_text, flattening_stats, layer_stats, plot_rows, text_table,
    write_cross_level_csv, write_plot_data, LayerStats,
};

/// Stage of the pipeline an error came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Config,
    Parse,
    Hierarchy,
    Inference,
    Flatten,
    Layers,
    Report,
    Output,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Phase::Config => "config",
            Phase::Parse => "parse",
            Phase::Hierarchy => "hierarchy",
            Phase::Inference => "inference",
            Phase::Flatten => "flatten",
            Phase::Layers => "layers",
            Phase::Report => "report",
            Phase::Output => "output",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
#[error("{phase}: {message}")]
pub struct PipelineError {
    pub phase: Phase,
    pub message: String,
}

impl PipelineError {
    fn new(phase: Phase, e: impl fmt::Display) -> Self {
        PipelineError { phase, message: e.to_string() }
    }
}

fn at<E: fmt::Display>(phase: Phase) -> impl Fn(E) -> PipelineError {
    move |e| PipelineError::new(phase, e)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NamingMode {
    #[default]
    Initials,
    FullLabels,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelChoice {
    #[default]
    Ngraph,
    Multigraph,
}

/// Either `periods` or both `length` and `step`, in timestamp units.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periods: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<i64>,
    /// Oldest window first; defaults to linearly increasing weights.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl WindowConfig {
    pub fn to_spec(&self) -> Result<TimeWindowSpec, PipelineError> {
        let mode = match (self.periods, self.length, self.step) {
            (Some(k), None, None) => WindowMode::EqualPeriods { k },
            (None, Some(l), Some(s)) => WindowMode::Sliding {
                length: Ratio::from_integer(l),
                step: Ratio::from_integer(s),
            },
            _ => {
                return Err(PipelineError::new(
                    Phase::Config,
                    "windows need either 'periods' or both 'length' and 'step'",
                ))
            }
        };
        Ok(TimeWindowSpec { mode, weights: self.weights.clone() })
    }
}

/// Everything a pipeline run needs. Loaded from JSON; command-line flags
/// overwrite individual fields.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Directory holding `users.csv`, `objects.csv`, `activities.csv` and
    /// `schema.json`; individual paths below take precedence.
    #[serde(default)]
    pub input_dir: Option<PathBuf>,
    #[serde(default)]
    pub users: Option<PathBuf>,
    #[serde(default)]
    pub objects: Option<PathBuf>,
    #[serde(default)]
    pub activities: Option<PathBuf>,
    #[serde(default)]
    pub schema: Option<PathBuf>,
    /// Level labels or 1-based indices; empty means every level.
    #[serde(default)]
    pub end_levels: Vec<String>,
    /// Role pairs to extract; absent means all layers.
    #[serde(default)]
    pub layers: Option<Vec<(String, String)>>,
    #[serde(default)]
    pub model: ModelChoice,
    #[serde(default)]
    pub naming: NamingMode,
    /// Separator between level labels in full-labels naming.
    #[serde(default)]
    pub separator: Option<String>,
    #[serde(default)]
    pub windows: Option<WindowConfig>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(text).map_err(at(Phase::Config))
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|e| PipelineError::new(Phase::Config, format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn input_paths(&self) -> Result<InputPaths, PipelineError> {
        let base = self.input_dir.as_ref().map(InputPaths::in_dir);
        let pick = |own: &Option<PathBuf>, from_dir: Option<&PathBuf>, what: &str| {
            own.clone()
                .or_else(|| from_dir.cloned())
                .ok_or_else(|| PipelineError::new(Phase::Config, format!("no {what} file given")))
        };
        Ok(InputPaths {
            users: pick(&self.users, base.as_ref().map(|b| &b.users), "users")?,
            objects: pick(&self.objects, base.as_ref().map(|b| &b.objects), "objects")?,
            activities: pick(&self.activities, base.as_ref().map(|b| &b.activities), "activities")?,
            schema: pick(&self.schema, base.as_ref().map(|b| &b.schema), "schema")?,
        })
    }

    pub fn naming(&self) -> Naming {
        match self.naming {
            NamingMode::Initials => Naming::Initials,
            NamingMode::FullLabels => Naming::FullLabels {
                separator: self.separator.clone().unwrap_or_else(|| ">".to_string()),
            },
        }
    }

    pub fn selection(&self) -> LayerSelection {
        match &self.layers {
            None => LayerSelection::All,
            Some(pairs) => LayerSelection::Pairs(pairs.clone()),
        }
    }

    pub fn sn_model(&self) -> SnModel {
        match self.model {
            ModelChoice::Ngraph => SnModel::NGraph,
            ModelChoice::Multigraph => SnModel::MultiGraph,
        }
    }

    /// Resolves end levels against the schema, shallowest first.
    pub fn resolve_end_levels(&self, net: &PreSocialNetwork) -> Result<Vec<Level>, PipelineError> {
        let schema = net.schema();
        if self.end_levels.is_empty() {
            return Ok(schema.levels().collect());
        }
        let mut out = Vec::new();
        for name in &self.end_levels {
            let level = schema
                .level_of(name)
                .or_else(|| name.parse::<u16>().ok().and_then(Level::new).filter(|l| schema.contains(*l)))
                .ok_or_else(|| PipelineError::new(Phase::Config, format!("unknown end level '{name}'")))?;
            out.push(level);
        }
        out.sort();
        out.dedup();
        Ok(out)
    }
}

/// Directory name used for one end level, e.g. `2-topic_group`.
pub fn level_dir_name(net: &PreSocialNetwork, level: Level) -> String {
    let label: String = net
        .schema()
        .label(level)
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect();
    format!("{}-{label}", level.index())
}

/// What a run produced, for callers that print a summary.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub rejected: usize,
    pub inferred: usize,
    pub levels: Vec<LevelSummary>,
}

#[derive(Debug, Clone)]
pub struct LevelSummary {
    pub level: String,
    pub dir: PathBuf,
    pub activities: usize,
    pub layers: usize,
    pub edges: usize,
    pub stats: LayerStats,
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), PipelineError> {
    fs::write(path, contents).map_err(|e| PipelineError::new(Phase::Output, format!("{}: {e}", path.display())))
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<(), crate::report::ReportError>) -> Result<Vec<u8>, PipelineError> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(at(Phase::Report))?;
    Ok(buf)
}

/// Loads the input files and runs every configured end level.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunSummary, PipelineError> {
    let paths = config.input_paths()?;
    let out_dir = config
        .out_dir
        .clone()
        .ok_or_else(|| PipelineError::new(Phase::Config, "no output directory given"))?;
    let loaded = load(&paths).map_err(|e| match e {
        LoadError::Parse(e) => PipelineError::new(Phase::Parse, e),
        LoadError::Inference(e) => PipelineError::new(Phase::Inference, e),
        LoadError::Hierarchy(e) => PipelineError::new(Phase::Hierarchy, e),
    })?;
    run_loaded(config, &loaded, &out_dir)
}

/// Runs the flatten, extract and report stages on an already loaded network.
pub fn run_loaded(config: &PipelineConfig, loaded: &Loaded, out_dir: &Path) -> Result<RunSummary, PipelineError> {
    let net = &loaded.network;
    let naming = config.naming();
    if naming == Naming::Initials {
        check_initials(net.schema()).map_err(at(Phase::Config))?;
    }
    let levels = config.resolve_end_levels(net)?;
    let windows = config.windows.as_ref().map(WindowConfig::to_spec).transpose()?;
    fs::create_dir_all(out_dir).map_err(|e| PipelineError::new(Phase::Output, format!("{}: {e}", out_dir.display())))?;

    write(&out_dir.join("cleansing_report.json"), {
        let mut json = loaded.cleansing.to_json();
        json["inferred_activities"] = loaded.inferred.into();
        serde_json::to_string_pretty(&json).expect("report serializes") + "\n"
    })?;
    let diagnostics: String = loaded.diagnostics.iter().map(|d| format!("{d}\n")).collect();
    write(&out_dir.join("diagnostics.txt"), diagnostics)?;
    let inventory = activity_inventory(net);
    write(&out_dir.join("inventory.txt"), inventory.to_text())?;
    write(&out_dir.join("inventory.csv"), csv_bytes(|b| inventory.write_csv(b))?)?;

    let results: Vec<Result<LevelSummary, PipelineError>> = std::thread::scope(|s| {
        let handles: Vec<_> = levels
            .iter()
            .map(|level| {
                let (naming, windows) = (&naming, windows.as_ref());
                s.spawn(move || run_level(config, net, *level, naming, windows, out_dir))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("end-level worker panicked"))
            .collect()
    });
    let summaries: Vec<LevelSummary> = results.into_iter().collect::<Result<_, _>>()?;

    let stats: Vec<LayerStats> = summaries.iter().map(|s| s.stats.clone()).collect();
    write(&out_dir.join("plot_data.csv"), csv_bytes(|b| write_plot_data(b, &plot_rows(&stats)))?)?;
    let labels: Vec<&str> = stats.iter().map(|s| s.end_level.as_str()).collect();
    let cross = cross_level_ratios(&stats);
    write(&out_dir.join("cross_level.txt"), cross_level_text(&labels, &cross))?;
    write(&out_dir.join("cross_level.csv"), csv_bytes(|b| write_cross_level_csv(b, &labels, &cross))?)?;

    Ok(RunSummary {
        out_dir: out_dir.to_path_buf(),
        rejected: loaded.cleansing.rejections.len(),
        inferred: loaded.inferred,
        levels: summaries,
    })
}

fn edge_rows<'a>(edges: impl Iterator<Item = &'a crate::layers::Edge>) -> Vec<EdgeRow> {
    edges.map(EdgeRow::from_edge).collect()
}

fn edge_file(rows: &[EdgeRow]) -> Result<Vec<u8>, PipelineError> {
    let mut buf = Vec::new();
    write_edge_list(&mut buf, rows).map_err(at(Phase::Output))?;
    Ok(buf)
}

fn fpsn_summary(flat: &PreSocialNetwork, index: &RoleIndex, level: Level) -> String {
    let rows: Vec<Vec<String>> = index
        .roles()
        .map(|role| {
            let activities = flat
                .activities()
                .iter()
                .filter(|a| index.role_path(role) == Some(&a.role))
                .count();
            let users = flat
                .users()
                .filter(|u| index.objects_of(&u.id, role).is_some())
                .count();
            vec![role.to_string(), activities.to_string(), users.to_string()]
        })
        .collect();
    let mut out = format!(
        "end level: {}\nobjects: {}\nactivities: {}\n\n",
        flat.schema().label(level),
        flat.hierarchy().at_level(level).len(),
        flat.activities().len()
    );
    out += &text_table(&["role", "activities", "users"], &rows);
    out
}

fn run_level(
    config: &PipelineConfig,
    net: &PreSocialNetwork,
    level: Level,
    naming: &Naming,
    windows: Option<&TimeWindowSpec>,
    out_dir: &Path,
) -> Result<LevelSummary, PipelineError> {
    let label = net.schema().label(level).to_string();
    let dir = out_dir.join(level_dir_name(net, level));
    fs::create_dir_all(dir.join("edges")).map_err(|e| PipelineError::new(Phase::Output, format!("{}: {e}", dir.display())))?;

    let flat = flatten(net, level).map_err(at(Phase::Flatten))?;
    let index = RoleIndex::new(&flat, naming).map_err(at(Phase::Layers))?;
    write(&dir.join("fpsn_summary.txt"), fpsn_summary(&flat, &index, level))?;

    let fstats = flattening_stats(net, &flat).map_err(at(Phase::Report))?;
    write(&dir.join("flattening.txt"), fstats.to_text())?;
    write(&dir.join("flattening.csv"), csv_bytes(|b| fstats.write_csv(b))?)?;

    let sn = build_sn(&index, &config.selection(), config.sn_model()).map_err(at(Phase::Layers))?;
    let baseline = net.restricted_to_level(level);
    let baseline_index = RoleIndex::new(&baseline, naming).map_err(at(Phase::Layers))?;
    let baseline_sn = build_sn(&baseline_index, &LayerSelection::All, SnModel::NGraph).map_err(at(Phase::Layers))?;
    let lstats = layer_stats(&label, &sn, &index, &baseline_sn, &baseline_index);
    write(&dir.join("layers.txt"), lstats.to_text())?;
    write(&dir.join("layers.csv"), csv_bytes(|b| lstats.write_csv(b))?)?;

    let layers: Vec<LayerKey> = sn.layers().into_iter().cloned().collect();
    match &sn {
        SocialNetwork::NGraph(graphs) => {
            let mut listing = String::from("file\tlayer\tedges\n");
            for (i, g) in graphs.iter().enumerate() {
                let name = format!("{:03}.tsv", i + 1);
                write(&dir.join("edges").join(&name), edge_file(&edge_rows(g.edges.iter()))?)?;
                listing += &format!("{name}\t{}\t{}\n", g.key, g.edges.len());
            }
            write(&dir.join("edges").join("layers.tsv"), listing)?;
        }
        SocialNetwork::MultiGraph { edges, .. } => {
            write(&dir.join("edges").join("multigraph.tsv"), edge_file(&edge_rows(edges.iter()))?)?;
        }
    }

    if let Some(spec) = windows {
        let weighted = windowed_edges(&flat, naming, &layers, spec).map_err(at(Phase::Layers))?;
        let mut out = String::from("from_user\tto_user\tstrength\tlayer\n");
        for e in weighted {
            out += &format!("{}\t{}\t{}\t{} -> {}\n", e.from, e.to, e.strength, e.from_role, e.to_role);
        }
        write(&dir.join("windowed_edges.tsv"), out)?;
    }

    Ok(LevelSummary {
        level: label,
        dir,
        activities: flat.activities().len(),
        layers: layers.len(),
        edges: sn.edges().count(),
        stats: lstats,
    })
}
