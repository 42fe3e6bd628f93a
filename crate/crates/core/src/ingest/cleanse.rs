use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{DatasetSchema, RawDataset, RawRecord, RecordKind};
use crate::model::Timestamp;

/// Cleansing rule a record violated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Rule {
    MissingCreationDate,
    MissingCreator,
    /// A user, object, parent or activity type that does not exist.
    UnknownReference,
    BadTimestamp,
    /// Activity type placed on an object of the wrong level.
    LevelMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rejection {
    pub kind: RecordKind,
    pub line: u64,
    pub id: Option<String>,
    pub rule: Rule,
    /// Set when the record was removed because an ancestor object (or the
    /// object an activity targets) was removed; `rule` is the ancestor's rule.
    pub cascaded_from: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct KindCounts {
    pub users: usize,
    pub objects: usize,
    pub activities: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CleansingReport {
    pub total: KindCounts,
    pub accepted: KindCounts,
    pub rejections: Vec<Rejection>,
}

impl CleansingReport {
    pub fn is_clean(&self) -> bool {
        self.rejections.is_empty()
    }

    pub fn by_rule(&self) -> BTreeMap<Rule, usize> {
        let mut out = BTreeMap::new();
        for r in &self.rejections {
            *out.entry(r.rule).or_default() += 1;
        }
        out
    }

    pub fn cascaded(&self) -> usize {
        self.rejections.iter().filter(|r| r.cascaded_from.is_some()).count()
    }

    /// JSON with per-rule counts followed by every rejection.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "total": self.total,
            "accepted": self.accepted,
            "rejected_by_rule": self.by_rule().into_iter()
                .map(|(r, n)| (format!("{r:?}"), n))
                .collect::<BTreeMap<_, _>>(),
            "cascaded": self.cascaded(),
            "rejections": self.rejections,
        })
    }
}

fn parse_ts(value: &str) -> Option<Timestamp> {
    value.parse().ok()
}

/// Removes records that break the data-quality rules.
///
/// Objects need a creation date and a known creator; removing an object also
/// removes its whole subtree and every activity on it. Activities need known
/// references, a matching object level and a timestamp inside the declared
/// observation range. Parent cycles are left for hierarchy validation.
pub fn cleanse(raw: &RawDataset, schema: &DatasetSchema) -> (RawDataset, CleansingReport) {
    let users: BTreeSet<&str> = raw.users.iter().map(|r| r.field("id")).collect();

    // id -> (parent, level label) from the first declaration
    let mut declared: BTreeMap<&str, (&str, &str)> = BTreeMap::new();
    for r in &raw.objects {
        declared.entry(r.field("id")).or_insert((r.field("parent_id"), r.field("level")));
    }

    let mut direct: BTreeMap<&str, Rule> = BTreeMap::new();
    for r in &raw.objects {
        let created = r.field("created_at");
        let creator = r.field("creator_id");
        let parent = r.field("parent_id");
        let rule = if created.is_empty() {
            Some(Rule::MissingCreationDate)
        } else if parse_ts(created).is_none() {
            Some(Rule::BadTimestamp)
        } else if creator.is_empty() {
            Some(Rule::MissingCreator)
        } else if !users.contains(creator) || (!parent.is_empty() && !declared.contains_key(parent)) {
            Some(Rule::UnknownReference)
        } else {
            None
        };
        if let Some(rule) = rule {
            direct.entry(r.field("id")).or_insert(rule);
        }
    }

    // Spread removal down the hierarchy: an id goes when any row declaring
    // it names a removed parent. The value is (rule, removed root).
    let mut removed: BTreeMap<&str, (Rule, Option<&str>)> =
        direct.iter().map(|(id, rule)| (*id, (*rule, None))).collect();
    loop {
        let mut changed = false;
        for r in &raw.objects {
            let (id, parent) = (r.field("id"), r.field("parent_id"));
            if removed.contains_key(id) || parent.is_empty() {
                continue;
            }
            if let Some((rule, root)) = removed.get(parent).copied() {
                removed.insert(id, (rule, Some(root.unwrap_or(parent))));
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let mut rejections = Vec::new();
    let mut objects = Vec::new();
    for r in &raw.objects {
        let id = r.field("id");
        match removed.get(id) {
            Some((rule, root)) => rejections.push(reject(r, Some(id), *rule, *root)),
            None => objects.push(r.clone()),
        }
    }

    let mut activities = Vec::new();
    for r in &raw.activities {
        let user = r.field("user_id");
        let object = r.field("object_id");
        let ty = r.field("activity_type");
        let ts = r.field("timestamp");
        let verdict = if !users.contains(user) || !declared.contains_key(object) || !schema.activity_levels.contains_key(ty) {
            Some((Rule::UnknownReference, None))
        } else if let Some((rule, root)) = removed.get(object) {
            Some((*rule, Some(root.unwrap_or(object))))
        } else if schema.levels.level_of(declared[object].1) != schema.activity_levels.get(ty).copied() {
            Some((Rule::LevelMismatch, None))
        } else {
            match parse_ts(ts) {
                None => Some((Rule::BadTimestamp, None)),
                Some(t) if schema.observation.is_some_and(|o| !o.contains(t)) => Some((Rule::BadTimestamp, None)),
                Some(_) => None,
            }
        };
        match verdict {
            Some((rule, root)) => rejections.push(reject(r, None, rule, root)),
            None => activities.push(r.clone()),
        }
    }

    let report = CleansingReport {
        total: KindCounts {
            users: raw.users.len(),
            objects: raw.objects.len(),
            activities: raw.activities.len(),
        },
        accepted: KindCounts {
            users: raw.users.len(),
            objects: objects.len(),
            activities: activities.len(),
        },
        rejections,
    };
    (
        RawDataset {
            users: raw.users.clone(),
            objects,
            activities,
        },
        report,
    )
}

fn reject(r: &RawRecord, id: Option<&str>, rule: Rule, root: Option<&str>) -> Rejection {
    Rejection {
        kind: r.kind,
        line: r.line,
        id: id.map(str::to_string),
        rule,
        cascaded_from: root.map(str::to_string),
    }
}
