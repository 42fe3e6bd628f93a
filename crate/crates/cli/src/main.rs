use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mlsn::ingest::{cleanse, objects_per_level, parse_files, validate_dataset, Dataset, InputPaths};
use mlsn::pipeline::{run_pipeline, ModelChoice, NamingMode, Phase, PipelineConfig, WindowConfig};
use mlsn::synth::{case_study_dataset, forum_scale_params, generate, GenParams};

const FORMATS: &str = "\
Input files (UTF-8 CSV with a header row; extra columns are ignored):
  users.csv       id,label
  objects.csv     id,level,parent_id,created_at,creator_id
                  level is a label from schema.json; parent_id is empty for top-level objects
  activities.csv  user_id,object_id,activity_type,timestamp
  schema.json     {\"levels\": [\"forum\", \"topic\", \"post\"],
                   \"activities\": {\"Is Author\": \"post\", ...},
                   \"abbreviations\": {\"topic group\": \"G\"},        (optional)
                   \"observation\": {\"start\": 0, \"end\": 100},      (optional)
                   \"inference\": {\"creation\": [...], \"subscription\": [...]}}  (optional)
Timestamps are integers (for example Unix seconds).

Exit codes: 0 success, 1 output error, 2 usage or configuration error,
3 parse error, 4 records rejected by cleansing, 5 hierarchy violations,
6 failure in a later pipeline phase.";

const PIPELINE_OUTPUTS: &str = "\
Outputs, in the output directory:
  cleansing_report.json, diagnostics.txt, inventory.{txt,csv},
  plot_data.csv (end_level,layer,count,is_new), cross_level.{txt,csv}
  <index>-<level>/fpsn_summary.txt, flattening.{txt,csv}, layers.{txt,csv}
  <index>-<level>/edges/NNN.tsv and layers.tsv (ngraph) or multigraph.tsv
  <index>-<level>/windowed_edges.tsv (when windows are configured)
Edge files are tab-separated: from_user, to_user, strength, support, layer.";

#[derive(Parser)]
#[command(name = "mlsn", version, about = "Extract multi-layered social networks from hierarchical activity data")]
#[command(after_help = FORMATS)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, cleanse and validate input files
    #[command(after_help = FORMATS)]
    Validate {
        #[command(flatten)]
        inputs: InputArgs,
        /// Directory for validation_report.json
        #[arg(long, env = "MLSN_OUT_DIR")]
        out_dir: Option<PathBuf>,
    },
    /// Write a synthetic dataset
    Generate(GenerateArgs),
    /// Flatten, extract layers and write reports
    #[command(after_help = PIPELINE_OUTPUTS)]
    Pipeline(PipelineArgs),
}

#[derive(Args, Clone, Default)]
struct InputArgs {
    /// Directory containing users.csv, objects.csv, activities.csv and schema.json
    #[arg(long)]
    input_dir: Option<PathBuf>,
    #[arg(long)]
    users: Option<PathBuf>,
    #[arg(long)]
    objects: Option<PathBuf>,
    #[arg(long)]
    activities: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// 1 forum, 692 topic groups, 2,336 topics, 13,272 posts, 49 comments
    ForumScale,
    /// The five-user forum used in the guide
    CaseStudy,
}

#[derive(Args)]
#[group(id = "source", required = true, args = ["params", "preset"])]
struct GenerateArgs {
    /// Generator parameters as JSON
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Overrides the seed in the parameters
    #[arg(long)]
    seed: Option<u64>,
    /// Directory to write the dataset into
    #[arg(long, env = "MLSN_OUT_DIR")]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Ngraph,
    Multigraph,
}

#[derive(Clone, Copy, ValueEnum)]
enum NamingArg {
    Initials,
    FullLabels,
}

#[derive(Args)]
struct PipelineArgs {
    /// JSON pipeline configuration; flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    inputs: InputArgs,
    /// End level label or 1-based index; repeatable. Default: every level
    #[arg(long = "end-level")]
    end_levels: Vec<String>,
    /// Layer as two comma-separated roles, e.g. "Is Moderator,Is Commentator"; repeatable. Default: all
    #[arg(long = "layer")]
    layers: Vec<String>,
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    #[arg(long, value_enum)]
    naming: Option<NamingArg>,
    /// Separator between level labels with --naming full-labels
    #[arg(long)]
    separator: Option<String>,
    /// Split the observation range into this many equal windows
    #[arg(long, conflicts_with_all = ["window_length", "window_step"])]
    periods: Option<u32>,
    /// Sliding window length, in timestamp units
    #[arg(long, requires = "window_step")]
    window_length: Option<i64>,
    /// Sliding window step, in timestamp units
    #[arg(long, requires = "window_length")]
    window_step: Option<i64>,
    /// Comma-separated window weights, oldest first
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    #[arg(long, env = "MLSN_OUT_DIR")]
    out_dir: Option<PathBuf>,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }
}

fn phase_code(phase: Phase) -> u8 {
    match phase {
        Phase::Config => 2,
        Phase::Parse => 3,
        Phase::Hierarchy => 5,
        Phase::Output => 1,
        Phase::Inference | Phase::Flatten | Phase::Layers | Phase::Report => 6,
    }
}

fn input_paths(args: &InputArgs) -> Result<InputPaths, Failure> {
    let config = PipelineConfig {
        input_dir: args.input_dir.clone(),
        users: args.users.clone(),
        objects: args.objects.clone(),
        activities: args.activities.clone(),
        schema: args.schema.clone(),
        ..Default::default()
    };
    config.input_paths().map_err(|e| Failure::new(2, e.to_string()))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Failure::new(1, format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| Failure::new(1, format!("{}: {e}", path.display())))
}

fn validate(inputs: &InputArgs, out_dir: Option<&Path>) -> Result<(), Failure> {
    let paths = input_paths(inputs)?;
    let (schema, raw, diagnostics) = parse_files(&paths).map_err(|e| Failure::new(3, e.to_string()))?;
    let (clean, report) = cleanse(&raw, &schema);
    let data = Dataset::from_records(&clean, &schema).map_err(|e| Failure::new(3, e.to_string()))?;
    let hierarchy = validate_dataset(&data);

    println!(
        "users: {}  objects: {}/{}  activities: {}/{} accepted",
        report.accepted.users,
        report.accepted.objects,
        report.total.objects,
        report.accepted.activities,
        report.total.activities
    );
    for d in &diagnostics {
        println!("warning: {d}");
    }
    for (rule, n) in report.by_rule() {
        println!("rejected by {rule:?}: {n}");
    }
    for r in &report.rejections {
        let what = r.id.as_deref().map(|id| format!(" ({id})")).unwrap_or_default();
        let cascade = r.cascaded_from.as_deref().map(|c| format!(", removed with {c}")).unwrap_or_default();
        println!("  {} line {}{what}: {:?}{cascade}", r.kind, r.line, r.rule);
    }
    for v in &hierarchy.violations {
        println!("violation: {v}");
    }

    if let Some(dir) = out_dir {
        let json = serde_json::json!({
            "cleansing": report.to_json(),
            "diagnostics": diagnostics.iter().map(|d| d.to_string()).collect::<Vec<_>>(),
            "violations": hierarchy.violations.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
        });
        let path = dir.join("validation_report.json");
        write_file(&path, serde_json::to_string_pretty(&json).expect("report serializes") + "\n")?;
        println!("report: {}", path.display());
    }

    if !hierarchy.is_valid() {
        return Err(Failure::new(5, format!("{} hierarchy violation(s)", hierarchy.violations.len())));
    }
    if !report.is_clean() {
        return Err(Failure::new(4, format!("{} record(s) rejected", report.rejections.len())));
    }
    println!("valid");
    Ok(())
}

fn generate_cmd(args: &GenerateArgs) -> Result<(), Failure> {
    let data = match (&args.params, args.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::new(2, format!("{}: {e}", path.display())))?;
            let mut params = GenParams::from_json(&text).map_err(|e| Failure::new(2, e.to_string()))?;
            if let Some(seed) = args.seed {
                params.seed = seed;
            }
            generate(&params).map_err(|e| Failure::new(2, e.to_string()))?
        }
        (None, Some(Preset::ForumScale)) => {
            generate(&forum_scale_params(args.seed.unwrap_or(1))).map_err(|e| Failure::new(2, e.to_string()))?
        }
        (None, Some(Preset::CaseStudy)) => case_study_dataset(),
        (None, None) => return Err(Failure::new(2, "one of --params or --preset is required")),
    };
    let paths = data.write_dir(&args.out_dir).map_err(|e| Failure::new(1, e.to_string()))?;
    let per_level = objects_per_level(&data);
    for level in data.schema.levels.levels() {
        let label = data.schema.levels.label(level);
        println!("{label}: {}", per_level.get(label).copied().unwrap_or(0));
    }
    println!("users: {}  activities: {}", data.users.len(), data.activities.len());
    println!("wrote {}", paths.users.parent().unwrap_or(Path::new(".")).display());
    Ok(())
}

fn pipeline_config(args: &PipelineArgs) -> Result<PipelineConfig, Failure> {
    let mut c = match &args.config {
        Some(path) => PipelineConfig::load(path).map_err(|e| Failure::new(2, e.to_string()))?,
        None => PipelineConfig::default(),
    };
    let i = &args.inputs;
    if i.input_dir.is_some() {
        c.input_dir = i.input_dir.clone();
    }
    for (slot, flag) in [
        (&mut c.users, &i.users),
        (&mut c.objects, &i.objects),
        (&mut c.activities, &i.activities),
        (&mut c.schema, &i.schema),
        (&mut c.out_dir, &args.out_dir),
    ] {
        if flag.is_some() {
            *slot = flag.clone();
        }
    }
    if !args.end_levels.is_empty() {
        c.end_levels = args.end_levels.clone();
    }
    if !args.layers.is_empty() {
        let mut pairs = Vec::new();
        for l in &args.layers {
            let (a, b) = l
                .split_once(',')
                .ok_or_else(|| Failure::new(2, format!("--layer '{l}': expected two roles separated by a comma")))?;
            pairs.push((a.trim().to_string(), b.trim().to_string()));
        }
        c.layers = Some(pairs);
    }
    if let Some(m) = args.model {
        c.model = match m {
            ModelArg::Ngraph => ModelChoice::Ngraph,
            ModelArg::Multigraph => ModelChoice::Multigraph,
        };
    }
    if let Some(n) = args.naming {
        c.naming = match n {
            NamingArg::Initials => NamingMode::Initials,
            NamingArg::FullLabels => NamingMode::FullLabels,
        };
    }
    if args.separator.is_some() {
        c.separator = args.separator.clone();
    }
    if args.periods.is_some() || args.window_length.is_some() {
        c.windows = Some(WindowConfig {
            periods: args.periods,
            length: args.window_length,
            step: args.window_step,
            weights: args.weights.clone(),
        });
    } else if let Some(w) = &args.weights {
        match c.windows.as_mut() {
            Some(windows) => windows.weights = Some(w.clone()),
            None => return Err(Failure::new(2, "--weights needs --periods or a sliding window")),
        }
    }
    Ok(c)
}

fn pipeline_cmd(args: &PipelineArgs) -> Result<(), Failure> {
    let config = pipeline_config(args)?;
    let summary = run_pipeline(&config).map_err(|e| Failure::new(phase_code(e.phase), e.to_string()))?;
    if summary.rejected > 0 {
        println!("cleansing removed {} record(s); see cleansing_report.json", summary.rejected);
    }
    if summary.inferred > 0 {
        println!("inferred {} activities", summary.inferred);
    }
    for l in &summary.levels {
        let new = l
            .stats
            .new_percent()
            .map_or_else(|| "-".to_string(), |p| format!("{p:.2}%"));
        println!(
            "{}: {} activities, {} layers, {} edges, new relationships {new} -> {}",
            l.level,
            l.activities,
            l.layers,
            l.edges,
            l.dir.display()
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate { inputs, out_dir } => validate(inputs, out_dir.as_deref()),
        Command::Generate(args) => generate_cmd(args),
        Command::Pipeline(args) => pipeline_cmd(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
