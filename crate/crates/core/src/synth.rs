//! Seeded synthetic forum-shaped datasets, and the small five-user forum used
//! throughout the tests and the guide.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Dataset, DatasetSchema, IngestError, InferenceRules, InputPaths};
use crate::model::{
    Activity, Level, LevelSchema, ObjectId, ObjectNode, PreSocialNetwork, TimeRange, Timestamp, User,
};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

/// How many objects to create on a level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CountSpec {
    /// Exactly `per_parent` children under every parent (or that many roots).
    Fixed { per_parent: u64 },
    /// Uniform in `min..=max` per parent.
    Range { min: u64, max: u64 },
    /// Exactly `total` objects on the level, spread over the parents. Every
    /// parent gets one before any gets a second, when there are enough.
    Total { total: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSpec {
    pub label: String,
    pub count: CountSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ActivityMode {
    /// The object's creator, at creation time.
    Creator,
    /// With probability `rate` an object receives the activity from
    /// 1..=`max_per_object` distinct users drawn uniformly.
    Random { rate: f64, max_per_object: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivitySpec {
    pub activity: String,
    pub level: String,
    #[serde(flatten)]
    pub mode: ActivityMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub seed: u64,
    /// Registered users.
    pub users: u64,
    /// Creators and performers are drawn from the first `active_users`
    /// users; defaults to all of them.
    #[serde(default)]
    pub active_users: Option<u64>,
    pub levels: Vec<LevelSpec>,
    #[serde(default)]
    pub abbreviations: BTreeMap<String, String>,
    pub activities: Vec<ActivitySpec>,
    pub start: Timestamp,
    pub end: Timestamp,
    #[serde(default)]
    pub inference: InferenceRules,
}

impl GenParams {
    pub fn from_json(text: &str) -> Result<Self, SynthError> {
        serde_json::from_str(text).map_err(|e| SynthError::Params(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("params serialize") + "\n"
    }

    fn schema(&self) -> Result<DatasetSchema, SynthError> {
        let levels = LevelSchema::new(self.levels.iter().map(|l| l.label.clone()))
            .and_then(|s| s.with_abbreviations(&self.abbreviations))
            .map_err(|e| SynthError::Params(e.to_string()))?;
        let pairs: Vec<(&str, &str)> = self
            .activities
            .iter()
            .map(|a| (a.activity.as_str(), a.level.as_str()))
            .collect();
        let mut schema = DatasetSchema::new(levels, &pairs)?;
        schema.observation = Some(TimeRange::new(self.start, self.end));
        schema.inference = self.inference.clone();
        Ok(schema)
    }

    fn check(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Params(m));
        if self.end < self.start {
            return bad("end precedes start".into());
        }
        if self.active_users.is_some_and(|a| a > self.users) {
            return bad("active_users exceeds users".into());
        }
        for l in &self.levels {
            if let CountSpec::Range { min, max } = l.count {
                if min > max {
                    return bad(format!("level '{}': min > max", l.label));
                }
            }
        }
        let mut seen = BTreeMap::new();
        for a in &self.activities {
            if let Some(prev) = seen.insert(&a.activity, &a.level) {
                if prev != &a.level {
                    return bad(format!("activity '{}' placed on two levels", a.activity));
                }
            }
            if let ActivityMode::Random { rate, max_per_object } = a.mode {
                if !(0.0..=1.0).contains(&rate) {
                    return bad(format!("activity '{}': rate {rate} outside [0, 1]", a.activity));
                }
                if max_per_object == 0 {
                    return bad(format!("activity '{}': max_per_object must be positive", a.activity));
                }
            }
        }
        Ok(())
    }
}

fn counts_for(rng: &mut ChaCha8Rng, spec: &CountSpec, parents: usize) -> Vec<u64> {
    match *spec {
        CountSpec::Fixed { per_parent } => vec![per_parent; parents],
        CountSpec::Range { min, max } => (0..parents).map(|_| rng.gen_range(min..=max)).collect(),
        CountSpec::Total { total } => {
            let mut counts = vec![0u64; parents];
            if parents == 0 {
                return counts;
            }
            let mut left = total;
            if total >= parents as u64 {
                counts.iter_mut().for_each(|c| *c = 1);
                left -= parents as u64;
            }
            for _ in 0..left {
                counts[rng.gen_range(0..parents)] += 1;
            }
            counts
        }
    }
}

/// Generates a dataset that satisfies every hierarchy and cleansing rule.
///
/// Objects need a creator, so zero users yields no objects and no
/// activities.
pub fn generate(params: &GenParams) -> Result<Dataset, SynthError> {
    params.check()?;
    let schema = params.schema()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let users: Vec<User> = (1..=params.users)
        .map(|i| User::new(format!("u{i}"), format!("user {i}")))
        .collect();
    let pool = params.active_users.unwrap_or(params.users) as usize;
    if pool == 0 {
        return Ok(Dataset { schema, users, objects: Vec::new(), activities: Vec::new() });
    }

    let mut objects: Vec<ObjectNode> = Vec::new();
    let mut previous: Vec<usize> = Vec::new();
    for (depth, spec) in params.levels.iter().enumerate() {
        let level = Level::new(depth as u16 + 1).expect("non-zero");
        let mut current = Vec::new();
        if depth == 0 {
            let n = counts_for(&mut rng, &spec.count, 1)[0];
            for i in 1..=n {
                let created_at = rng.gen_range(params.start..=params.end);
                current.push(objects.len());
                objects.push(ObjectNode {
                    id: ObjectId::new(i.to_string()),
                    level,
                    parent: None,
                    created_at,
                    creator: users[rng.gen_range(0..pool)].id.clone(),
                });
            }
        } else {
            let counts = counts_for(&mut rng, &spec.count, previous.len());
            for (p, n) in previous.iter().zip(counts) {
                let (pid, pcreated) = (objects[*p].id.clone(), objects[*p].created_at);
                for j in 1..=n {
                    let created_at = rng.gen_range(pcreated..=params.end);
                    current.push(objects.len());
                    objects.push(ObjectNode {
                        id: ObjectId::new(format!("{pid}.{j}")),
                        level,
                        parent: Some(pid.clone()),
                        created_at,
                        creator: users[rng.gen_range(0..pool)].id.clone(),
                    });
                }
            }
        }
        previous = current;
    }

    let mut activities = Vec::new();
    for spec in &params.activities {
        let level = schema.activity_levels[&spec.activity];
        for o in objects.iter().filter(|o| o.level == level) {
            match spec.mode {
                ActivityMode::Creator => {
                    activities.push(Activity::new(o.creator.clone(), o.id.clone(), &spec.activity, level, o.created_at));
                }
                ActivityMode::Random { rate, max_per_object } => {
                    if !rng.gen_bool(rate) {
                        continue;
                    }
                    let k = rng.gen_range(1..=max_per_object as usize).min(pool);
                    for u in sample(&mut rng, pool, k).into_vec() {
                        let t = rng.gen_range(o.created_at..=params.end);
                        activities.push(Activity::new(users[u].id.clone(), o.id.clone(), &spec.activity, level, t));
                    }
                }
            }
        }
    }

    Ok(Dataset { schema, users, objects, activities })
}

/// Generates and writes the dataset files into `dir`.
pub fn generate_to_dir(params: &GenParams, dir: &Path) -> Result<InputPaths, SynthError> {
    Ok(generate(params)?.write_dir(dir)?)
}

/// Parameters shaped like a mid-size forum: 1 forum, 692 topic groups,
/// 2,336 topics, 13,272 posts and 49 comments; 4,404 of 104,625 users active.
pub fn forum_scale_params(seed: u64) -> GenParams {
    let level = |label: &str, total| LevelSpec { label: label.into(), count: CountSpec::Total { total } };
    let creator = |activity: &str, level: &str| ActivitySpec {
        activity: activity.into(),
        level: level.into(),
        mode: ActivityMode::Creator,
    };
    GenParams {
        seed,
        users: 104_625,
        active_users: Some(4_404),
        levels: vec![
            level("forum", 1),
            level("topic group", 692),
            level("topic", 2_336),
            level("post", 13_272),
            level("comment", 49),
        ],
        abbreviations: [("topic group".to_string(), "G".to_string())].into(),
        activities: vec![
            creator("forum creation activity", "forum"),
            creator("topic group addition", "topic group"),
            creator("topic addition", "topic"),
            ActivitySpec {
                activity: "topic member subscribing".into(),
                level: "topic".into(),
                mode: ActivityMode::Random { rate: 1.0, max_per_object: 4 },
            },
            creator("post authoring", "post"),
            creator("post commenting", "comment"),
        ],
        start: 1_219_276_800, // 2008-08-21
        end: 1_262_908_800,   // 2010-01-08
        inference: InferenceRules::default(),
    }
}

/// Schema of the five-user forum: `forum > topic > post`.
pub fn case_study_schema() -> DatasetSchema {
    let mut s = DatasetSchema::new(
        LevelSchema::new(["forum", "topic", "post"]).expect("valid labels"),
        &[
            ("Is Creator", "forum"),
            ("Is Moderator", "topic"),
            ("Is Author", "post"),
            ("Is Commentator", "post"),
        ],
    )
    .expect("valid schema");
    s.observation = Some(TimeRange::new(1, 30));
    s
}

/// The five-user forum as a dataset.
///
/// Users A–E; forums 1 (created by A) and 2 (by C); topics 1.1 and 1.2
/// moderated by A and C, topics 2.1 and 2.2 moderated by E; posts 1.1.1 (B),
/// 1.1.2 (D), 1.2.1 (A), 2.1.1 (A), 2.2.1 (D), 2.2.2 (C); B comments on
/// 2.1.1 and D on 1.2.1, 2.1.1 and 2.2.2. Timestamps follow object
/// numbering; comments come after all posts.
pub fn case_study_dataset() -> Dataset {
    let schema = case_study_schema();
    let users = ["A", "B", "C", "D", "E"]
        .iter()
        .map(|u| User::new(*u, format!("User {u}")))
        .collect();
    let table: [(&str, u16, Option<&str>, &str); 12] = [
        ("1", 1, None, "A"),
        ("1.1", 2, Some("1"), "A"),
        ("1.1.1", 3, Some("1.1"), "B"),
        ("1.1.2", 3, Some("1.1"), "D"),
        ("1.2", 2, Some("1"), "C"),
        ("1.2.1", 3, Some("1.2"), "A"),
        ("2", 1, None, "C"),
        ("2.1", 2, Some("2"), "E"),
        ("2.1.1", 3, Some("2.1"), "A"),
        ("2.2", 2, Some("2"), "E"),
        ("2.2.1", 3, Some("2.2"), "D"),
        ("2.2.2", 3, Some("2.2"), "C"),
    ];
    let mut objects = Vec::new();
    let mut activities = Vec::new();
    for (t, (id, level, parent, creator)) in table.iter().enumerate() {
        let level = Level::new(*level).expect("non-zero");
        let created_at = t as Timestamp + 1;
        objects.push(ObjectNode {
            id: (*id).into(),
            level,
            parent: parent.map(Into::into),
            created_at,
            creator: (*creator).into(),
        });
        let role = match level.index() {
            1 => "Is Creator",
            2 => "Is Moderator",
            _ => "Is Author",
        };
        activities.push(Activity::new(*creator, *id, role, level, created_at));
    }
    let post = Level::new(3).expect("non-zero");
    for (t, (user, id)) in [("B", "2.1.1"), ("D", "1.2.1"), ("D", "2.1.1"), ("D", "2.2.2")]
        .iter()
        .enumerate()
    {
        activities.push(Activity::new(*user, *id, "Is Commentator", post, 20 + t as Timestamp));
    }
    Dataset { schema, users, objects, activities }
}

/// The five-user forum as a validated hierarchical network.
pub fn case_study_fixture() -> PreSocialNetwork {
    let d = case_study_dataset();
    PreSocialNetwork::hierarchical(d.schema.levels, d.users, d.objects, d.activities, d.schema.observation)
        .expect("fixture is valid")
}
