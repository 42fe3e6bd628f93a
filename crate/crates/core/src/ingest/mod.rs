//! Reading activity logs and assembling the hierarchical pre-social network.
//!
//! A dataset is four files:
//!
//! | file             | columns                                       |
//! |------------------|-----------------------------------------------|
//! | `users.csv`      | `id,label`                                    |
//! | `objects.csv`    | `id,level,parent_id,created_at,creator_id`    |
//! | `activities.csv` | `user_id,object_id,activity_type,timestamp`   |
//! | `schema.json`    | level labels, activity type → level, options  |
//!
//! Loading runs [`parse_input`], [`cleanse`], [`infer_activities`] and
//! [`build_hpsn`] in that order; [`load`] does all four.

mod cleanse;
mod infer;

pub use cleanse::{cleanse, CleansingReport, KindCounts, Rejection, Rule};
pub use infer::{infer_activities, CreationRule, InferenceError, InferenceRules, SubscriptionRule};

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    Activity, Level, LevelSchema, ModelError, ObjectNode, PreSocialNetwork, SchemaError, TimeRange,
    Timestamp, User, ValidationReport,
};

pub const USERS_HEADER: [&str; 2] = ["id", "label"];
pub const OBJECTS_HEADER: [&str; 5] = ["id", "level", "parent_id", "created_at", "creator_id"];
pub const ACTIVITIES_HEADER: [&str; 4] = ["user_id", "object_id", "activity_type", "timestamp"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{kind} file: unreadable header: {message}")]
    UnreadableHeader { kind: RecordKind, message: String },
    #[error("{kind} file: header lacks required column '{column}'")]
    MissingColumn { kind: RecordKind, column: String },
    #[error("schema: {0}")]
    SchemaJson(#[from] serde_json::Error),
    #[error("schema: {0}")]
    Schema(#[from] SchemaError),
    #[error("schema: activity type '{activity}' refers to unknown level '{level}'")]
    SchemaActivityLevel { activity: String, level: String },
    #[error("schema: observation range ends before it starts")]
    SchemaObservation,
    #[error("schema: {0}")]
    SchemaInference(String),
    #[error("{kind} line {line}: {message}")]
    Conversion { kind: RecordKind, line: u64, message: String },
    #[error("hierarchy violations:\n{0}")]
    Hierarchy(ValidationReport),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl From<ModelError> for IngestError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Invalid(report) => IngestError::Hierarchy(report),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    User,
    Object,
    Activity,
}

impl std::fmt::Display for RecordKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RecordKind::User => "users",
            RecordKind::Object => "objects",
            RecordKind::Activity => "activities",
        })
    }
}

/// One input line as read, before typing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRecord {
    pub kind: RecordKind,
    /// 1-based line in the source file (the header is line 1).
    pub line: u64,
    pub fields: BTreeMap<String, String>,
}

impl RawRecord {
    pub fn field(&self, name: &str) -> &str {
        self.fields.get(name).map(String::as_str).unwrap_or("")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawDataset {
    pub users: Vec<RawRecord>,
    pub objects: Vec<RawRecord>,
    pub activities: Vec<RawRecord>,
}

/// Non-fatal problems found while parsing. The affected line is skipped
/// unless noted otherwise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "problem")]
pub enum Diagnostic {
    /// Header column that is not part of the format; ignored.
    UnexpectedColumn { kind: RecordKind, column: String },
    MalformedRow { kind: RecordKind, line: u64, message: String },
    MissingField { kind: RecordKind, line: u64, field: String },
    UnknownLevel { line: u64, label: String },
    /// A later line reuses an id. Object lines that name a different parent
    /// are kept so validation can report the conflict.
    DuplicateId { kind: RecordKind, line: u64, id: String, first_line: u64, kept: bool },
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Diagnostic::UnexpectedColumn { kind, column } => {
                write!(f, "{kind}: ignoring unexpected column '{column}'")
            }
            Diagnostic::MalformedRow { kind, line, message } => write!(f, "{kind} line {line}: {message}"),
            Diagnostic::MissingField { kind, line, field } => {
                write!(f, "{kind} line {line}: missing field '{field}'")
            }
            Diagnostic::UnknownLevel { line, label } => write!(f, "objects line {line}: unknown level '{label}'"),
            Diagnostic::DuplicateId { kind, line, id, first_line, kept } => write!(
                f,
                "{kind} line {line}: id '{id}' already declared on line {first_line}{}",
                if *kept { " (kept: different parent)" } else { "" }
            ),
        }
    }
}

/// Level labels, activity placement, and optional dataset-wide settings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSchema {
    pub levels: LevelSchema,
    /// Level every activity type is performed on.
    pub activity_levels: BTreeMap<String, Level>,
    pub observation: Option<TimeRange>,
    pub inference: InferenceRules,
}

#[derive(Serialize, Deserialize)]
struct ObservationJson {
    start: Timestamp,
    end: Timestamp,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemaJson {
    levels: Vec<String>,
    activities: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    abbreviations: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    observation: Option<ObservationJson>,
    #[serde(default, skip_serializing_if = "InferenceRules::is_empty")]
    inference: InferenceRules,
}

impl DatasetSchema {
    pub fn new(levels: LevelSchema, activities: &[(&str, &str)]) -> Result<Self, IngestError> {
        let mut activity_levels = BTreeMap::new();
        for (activity, label) in activities {
            let level = levels.level_of(label).ok_or_else(|| IngestError::SchemaActivityLevel {
                activity: activity.to_string(),
                level: label.to_string(),
            })?;
            activity_levels.insert(activity.to_string(), level);
        }
        Ok(DatasetSchema {
            levels,
            activity_levels,
            observation: None,
            inference: InferenceRules::default(),
        })
    }

    pub fn from_json(text: &str) -> Result<Self, IngestError> {
        let raw: SchemaJson = serde_json::from_str(text)?;
        let levels = LevelSchema::new(raw.levels)?.with_abbreviations(&raw.abbreviations)?;
        let pairs: Vec<(&str, &str)> = raw
            .activities
            .iter()
            .map(|(a, l)| (a.as_str(), l.as_str()))
            .collect();
        let mut schema = DatasetSchema::new(levels, &pairs)?;
        if let Some(o) = raw.observation {
            if o.end < o.start {
                return Err(IngestError::SchemaObservation);
            }
            schema.observation = Some(TimeRange::new(o.start, o.end));
        }
        raw.inference.check(&schema)?;
        schema.inference = raw.inference;
        Ok(schema)
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let raw = SchemaJson {
            levels: self.levels.labels().to_vec(),
            activities: self
                .activity_levels
                .iter()
                .map(|(a, l)| (a.clone(), self.levels.label(*l).to_string()))
                .collect(),
            abbreviations: self.levels.abbreviation_overrides(),
            observation: self.observation.map(|r| ObservationJson { start: r.start, end: r.end }),
            inference: self.inference.clone(),
        };
        serde_json::to_string_pretty(&raw).expect("schema serializes") + "\n"
    }
}

/// Locations of the four input files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputPaths {
    pub users: PathBuf,
    pub objects: PathBuf,
    pub activities: PathBuf,
    pub schema: PathBuf,
}

impl InputPaths {
    /// The conventional file names inside `dir`.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        InputPaths {
            users: dir.join("users.csv"),
            objects: dir.join("objects.csv"),
            activities: dir.join("activities.csv"),
            schema: dir.join("schema.json"),
        }
    }
}

fn read_table<R: Read>(
    kind: RecordKind,
    reader: R,
    required: &[&str],
    diagnostics: &mut Vec<Diagnostic>,
) -> Result<Vec<RawRecord>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = match rdr.headers() {
        Ok(h) => h.clone(),
        Err(e) => return Err(IngestError::UnreadableHeader { kind, message: e.to_string() }),
    };
    let names: Vec<String> = headers.iter().map(|h| h.trim().to_string()).collect();
    if names.iter().all(|n| n.is_empty()) {
        return Err(IngestError::UnreadableHeader { kind, message: "empty header".into() });
    }
    for col in required {
        if !names.iter().any(|n| n == col) {
            return Err(IngestError::MissingColumn { kind, column: col.to_string() });
        }
    }
    for n in &names {
        if !required.contains(&n.as_str()) {
            diagnostics.push(Diagnostic::UnexpectedColumn { kind, column: n.clone() });
        }
    }

    let mut out = Vec::new();
    for result in rdr.records() {
        let record = match result {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                diagnostics.push(Diagnostic::MalformedRow { kind, line, message: e.to_string() });
                continue;
            }
        };
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let mut fields = BTreeMap::new();
        for (name, value) in names.iter().zip(record.iter()) {
            if required.contains(&name.as_str()) {
                fields.insert(name.clone(), value.trim().to_string());
            }
        }
        if let Some(missing) = required.iter().find(|c| !fields.contains_key(**c)) {
            diagnostics.push(Diagnostic::MissingField { kind, line, field: missing.to_string() });
            continue;
        }
        out.push(RawRecord { kind, line, fields });
    }
    Ok(out)
}

/// Reads the three CSV tables. Row-level problems become diagnostics; only
/// an unusable header is fatal.
pub fn parse_input<U: Read, O: Read, A: Read>(
    users: U,
    objects: O,
    activities: A,
    schema: &DatasetSchema,
) -> Result<(RawDataset, Vec<Diagnostic>), IngestError> {
    let mut diags = Vec::new();

    let mut user_lines: BTreeMap<String, u64> = BTreeMap::new();
    let mut users_out = Vec::new();
    for r in read_table(RecordKind::User, users, &USERS_HEADER, &mut diags)? {
        let id = r.field("id").to_string();
        if id.is_empty() {
            diags.push(Diagnostic::MissingField { kind: r.kind, line: r.line, field: "id".into() });
            continue;
        }
        if let Some(first) = user_lines.get(&id) {
            diags.push(Diagnostic::DuplicateId { kind: r.kind, line: r.line, id, first_line: *first, kept: false });
            continue;
        }
        user_lines.insert(id, r.line);
        users_out.push(r);
    }

    let mut object_first: BTreeMap<String, (u64, String)> = BTreeMap::new();
    let mut objects_out = Vec::new();
    for r in read_table(RecordKind::Object, objects, &OBJECTS_HEADER, &mut diags)? {
        let id = r.field("id").to_string();
        if id.is_empty() {
            diags.push(Diagnostic::MissingField { kind: r.kind, line: r.line, field: "id".into() });
            continue;
        }
        let label = r.field("level");
        if schema.levels.level_of(label).is_none() {
            diags.push(Diagnostic::UnknownLevel { line: r.line, label: label.to_string() });
            continue;
        }
        let parent = r.field("parent_id").to_string();
        if let Some((first, first_parent)) = object_first.get(&id) {
            let kept = *first_parent != parent;
            diags.push(Diagnostic::DuplicateId { kind: r.kind, line: r.line, id, first_line: *first, kept });
            if kept {
                objects_out.push(r);
            }
            continue;
        }
        object_first.insert(id, (r.line, parent));
        objects_out.push(r);
    }

    let activities_out = read_table(RecordKind::Activity, activities, &ACTIVITIES_HEADER, &mut diags)?;

    Ok((
        RawDataset {
            users: users_out,
            objects: objects_out,
            activities: activities_out,
        },
        diags,
    ))
}

fn open(path: &Path) -> Result<File, IngestError> {
    File::open(path).map_err(|source| IngestError::Io { path: path.to_path_buf(), source })
}

/// [`parse_input`] over files on disk. The schema is loaded from `paths.schema`.
pub fn parse_files(paths: &InputPaths) -> Result<(DatasetSchema, RawDataset, Vec<Diagnostic>), IngestError> {
    let schema = DatasetSchema::load(&paths.schema)?;
    let (raw, diags) = parse_input(
        open(&paths.users)?,
        open(&paths.objects)?,
        open(&paths.activities)?,
        &schema,
    )?;
    Ok((schema, raw, diags))
}

/// Typed users, objects and explicit activities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub schema: DatasetSchema,
    pub users: Vec<User>,
    pub objects: Vec<ObjectNode>,
    pub activities: Vec<Activity>,
}

fn parse_timestamp(kind: RecordKind, line: u64, field: &str, value: &str) -> Result<Timestamp, IngestError> {
    value.parse().map_err(|_| IngestError::Conversion {
        kind,
        line,
        message: format!("{field} '{value}' is not an integer timestamp"),
    })
}

impl Dataset {
    /// Types cleansed records. Records that would not survive [`cleanse`]
    /// produce an error.
    pub fn from_records(raw: &RawDataset, schema: &DatasetSchema) -> Result<Self, IngestError> {
        let users = raw
            .users
            .iter()
            .map(|r| User::new(r.field("id"), r.field("label")))
            .collect();
        let mut objects = Vec::with_capacity(raw.objects.len());
        for r in &raw.objects {
            let level = schema.levels.level_of(r.field("level")).ok_or_else(|| IngestError::Conversion {
                kind: r.kind,
                line: r.line,
                message: format!("unknown level '{}'", r.field("level")),
            })?;
            let creator = r.field("creator_id");
            if creator.is_empty() {
                return Err(IngestError::Conversion { kind: r.kind, line: r.line, message: "empty creator".into() });
            }
            let parent = r.field("parent_id");
            objects.push(ObjectNode {
                id: r.field("id").into(),
                level,
                parent: (!parent.is_empty()).then(|| parent.into()),
                created_at: parse_timestamp(r.kind, r.line, "created_at", r.field("created_at"))?,
                creator: creator.into(),
            });
        }
        let levels: BTreeMap<&str, Level> = objects.iter().map(|o| (o.id.as_str(), o.level)).collect();
        let mut activities = Vec::with_capacity(raw.activities.len());
        for r in &raw.activities {
            let ty = r.field("activity_type");
            let conv = |message: String| IngestError::Conversion { kind: r.kind, line: r.line, message };
            let level = *schema
                .activity_levels
                .get(ty)
                .ok_or_else(|| conv(format!("unknown activity type '{ty}'")))?;
            let object = r.field("object_id");
            if levels.get(object).is_some_and(|l| *l != level) {
                return Err(conv(format!("activity '{ty}' cannot target object '{object}'")));
            }
            let ts = parse_timestamp(r.kind, r.line, "timestamp", r.field("timestamp"))?;
            activities.push(Activity::new(r.field("user_id"), object, ty, level, ts));
        }
        Ok(Dataset {
            schema: schema.clone(),
            users,
            objects,
            activities,
        })
    }

    /// The hierarchical network's users, objects and original explicit
    /// activities, e.g. for writing to disk.
    pub fn from_network(net: &PreSocialNetwork, schema: DatasetSchema) -> Self {
        Dataset {
            schema,
            users: net.users().cloned().collect(),
            objects: net.hierarchy().iter().cloned().collect(),
            activities: net
                .activities()
                .iter()
                .filter(|a| !a.inferred && a.role.path.len() == 1)
                .cloned()
                .collect(),
        }
    }

    /// Writes the three tables as CSV.
    pub fn write_csv<U: Write, O: Write, A: Write>(&self, users: U, objects: O, activities: A) -> Result<(), IngestError> {
        let mut w = csv::Writer::from_writer(users);
        w.write_record(USERS_HEADER)?;
        for u in &self.users {
            w.write_record([u.id.as_str(), u.label.as_str()])?;
        }
        w.flush().map_err(csv::Error::from)?;

        let mut w = csv::Writer::from_writer(objects);
        w.write_record(OBJECTS_HEADER)?;
        for o in &self.objects {
            let created = o.created_at.to_string();
            w.write_record([
                o.id.as_str(),
                self.schema.levels.label(o.level),
                o.parent.as_ref().map(|p| p.as_str()).unwrap_or(""),
                created.as_str(),
                o.creator.as_str(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;

        let mut w = csv::Writer::from_writer(activities);
        w.write_record(ACTIVITIES_HEADER)?;
        for a in &self.activities {
            let ts = a.timestamp.to_string();
            w.write_record([a.user.as_str(), a.object.as_str(), a.activity_type(), ts.as_str()])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Writes `users.csv`, `objects.csv`, `activities.csv` and `schema.json`
    /// into `dir`, creating it if needed.
    pub fn write_dir(&self, dir: &Path) -> Result<InputPaths, IngestError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| IngestError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let paths = InputPaths::in_dir(dir);
        let create = |p: &Path| File::create(p).map_err(io(p)).map(std::io::BufWriter::new);
        self.write_csv(create(&paths.users)?, create(&paths.objects)?, create(&paths.activities)?)?;
        std::fs::write(&paths.schema, self.schema.to_json()).map_err(io(&paths.schema))?;
        Ok(paths)
    }
}

/// Assembles the validated hierarchical network from typed records and the
/// activities added by inference. Activity multiplicity is preserved.
pub fn build_hpsn(data: Dataset, inferred: Vec<Activity>) -> Result<PreSocialNetwork, IngestError> {
    let mut activities = data.activities;
    activities.extend(inferred);
    Ok(PreSocialNetwork::hierarchical(
        data.schema.levels,
        data.users,
        data.objects,
        activities,
        data.schema.observation,
    )?)
}

/// Result of [`load`].
#[derive(Debug, Clone)]
pub struct Loaded {
    pub network: PreSocialNetwork,
    pub schema: DatasetSchema,
    pub diagnostics: Vec<Diagnostic>,
    pub cleansing: CleansingReport,
    pub inferred: usize,
}

/// Where loading stopped, for callers that map phases to exit codes.
#[derive(Debug, Error)]
pub enum LoadError {
    #[error("parse: {0}")]
    Parse(IngestError),
    #[error("inference: {0}")]
    Inference(IngestError),
    #[error("hierarchy: {0}")]
    Hierarchy(IngestError),
}

/// Parses, cleanses, infers and builds in one go.
pub fn load(paths: &InputPaths) -> Result<Loaded, LoadError> {
    let (schema, raw, diagnostics) = parse_files(paths).map_err(LoadError::Parse)?;
    let (clean, cleansing) = cleanse(&raw, &schema);
    let data = Dataset::from_records(&clean, &schema).map_err(LoadError::Parse)?;
    let hierarchy = validate_dataset(&data);
    if !hierarchy.is_valid() {
        return Err(LoadError::Hierarchy(IngestError::Hierarchy(hierarchy)));
    }
    let inferred = infer_activities(&data).map_err(|e| LoadError::Inference(e.into()))?;
    let n = inferred.len();
    let network = build_hpsn(data, inferred).map_err(LoadError::Hierarchy)?;
    Ok(Loaded { network, schema, diagnostics, cleansing, inferred: n })
}

/// Hierarchy and activity validation of a typed dataset.
pub fn validate_dataset(data: &Dataset) -> ValidationReport {
    crate::model::validate_parts(
        &data.schema.levels,
        &data.users,
        &data.objects,
        &data.activities,
        crate::model::NetworkKind::Hierarchical,
        data.schema.observation,
    )
}

/// Counts objects per level label.
pub fn objects_per_level(data: &Dataset) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for o in &data.objects {
        *out.entry(data.schema.levels.label(o.level).to_string()).or_default() += 1;
    }
    out
}

/// Distinct users with at least one activity.
pub fn active_users(activities: &[Activity]) -> BTreeSet<&str> {
    activities.iter().map(|a| a.user.as_str()).collect()
}
