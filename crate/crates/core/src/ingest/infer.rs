use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Dataset, DatasetSchema, IngestError};
use crate::model::{Activity, Level, ObjectId, Timestamp, UserId};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InferenceError {
    #[error("cannot pick the first '{activity}' under object {parent}: users {users:?} tie on object {object} at {timestamp}")]
    TieOnTimestamp {
        parent: ObjectId,
        activity: String,
        object: ObjectId,
        timestamp: Timestamp,
        users: Vec<UserId>,
    },
}

/// The user behind the earliest `first_child_activity` among an object's
/// children is taken to have performed `activity` on the object itself.
///
/// With `post authoring` as the child activity this makes the author of a
/// topic's first post its creator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreationRule {
    pub activity: String,
    pub first_child_activity: String,
}

/// Every user who performed `child_activity` on a child of an object is
/// taken to have performed `activity` on the object, timestamped at their
/// first such child activity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubscriptionRule {
    pub activity: String,
    pub child_activity: String,
}

/// Inference rules, applied in order: creation rules first (each sees what
/// earlier rules added), then subscription rules.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferenceRules {
    #[serde(default)]
    pub creation: Vec<CreationRule>,
    #[serde(default)]
    pub subscription: Vec<SubscriptionRule>,
}

impl InferenceRules {
    pub fn is_empty(&self) -> bool {
        self.creation.is_empty() && self.subscription.is_empty()
    }

    pub(super) fn check(&self, schema: &DatasetSchema) -> Result<(), IngestError> {
        let pairs = self
            .creation
            .iter()
            .map(|r| (&r.activity, &r.first_child_activity))
            .chain(self.subscription.iter().map(|r| (&r.activity, &r.child_activity)));
        for (parent, child) in pairs {
            let level = |a: &String| {
                schema
                    .activity_levels
                    .get(a)
                    .copied()
                    .ok_or_else(|| IngestError::SchemaInference(format!("unknown activity type '{a}'")))
            };
            let (p, c) = (level(parent)?, level(child)?);
            if c.index() != p.index() + 1 {
                return Err(IngestError::SchemaInference(format!(
                    "'{child}' must sit one level below '{parent}'"
                )));
            }
        }
        Ok(())
    }
}

fn inferred(user: &UserId, object: &ObjectId, activity: &str, level: Level, timestamp: Timestamp) -> Activity {
    let mut a = Activity::new(user.clone(), object.clone(), activity, level, timestamp);
    a.inferred = true;
    a
}

/// Activities implied by the dataset's inference rules and absent from it.
///
/// "First" means smallest `(timestamp, object id)`. Two different users on
/// the same earliest object at the same time is an error.
pub fn infer_activities(data: &Dataset) -> Result<Vec<Activity>, InferenceError> {
    let rules = &data.schema.inference;
    if rules.is_empty() {
        return Ok(Vec::new());
    }
    let parent_of: BTreeMap<&ObjectId, &ObjectId> = data
        .objects
        .iter()
        .filter_map(|o| o.parent.as_ref().map(|p| (&o.id, p)))
        .collect();
    let level_of = |a: &str| data.schema.activity_levels[a];

    let mut added: Vec<Activity> = Vec::new();
    for rule in &rules.creation {
        let level = level_of(&rule.activity);
        let done: BTreeSet<&ObjectId> = data
            .activities
            .iter()
            .chain(&added)
            .filter(|a| a.activity_type() == rule.activity)
            .map(|a| &a.object)
            .collect();
        let mut by_parent: BTreeMap<&ObjectId, Vec<&Activity>> = BTreeMap::new();
        for a in data.activities.iter().chain(&added) {
            if a.activity_type() != rule.first_child_activity {
                continue;
            }
            if let Some(p) = parent_of.get(&a.object) {
                by_parent.entry(p).or_default().push(a);
            }
        }
        let mut new = Vec::new();
        for (parent, children) in by_parent {
            if done.contains(parent) {
                continue;
            }
            let first = children
                .iter()
                .min_by(|x, y| (x.timestamp, &x.object).cmp(&(y.timestamp, &y.object)))
                .expect("group is non-empty");
            let users: BTreeSet<&UserId> = children
                .iter()
                .filter(|a| a.timestamp == first.timestamp && a.object == first.object)
                .map(|a| &a.user)
                .collect();
            if users.len() > 1 {
                return Err(InferenceError::TieOnTimestamp {
                    parent: parent.clone(),
                    activity: rule.first_child_activity.clone(),
                    object: first.object.clone(),
                    timestamp: first.timestamp,
                    users: users.into_iter().cloned().collect(),
                });
            }
            new.push(inferred(&first.user, parent, &rule.activity, level, first.timestamp));
        }
        added.extend(new);
    }

    for rule in &rules.subscription {
        let level = level_of(&rule.activity);
        let done: BTreeSet<(&UserId, &ObjectId)> = data
            .activities
            .iter()
            .chain(&added)
            .filter(|a| a.activity_type() == rule.activity)
            .map(|a| (&a.user, &a.object))
            .collect();
        let mut first: BTreeMap<(&UserId, &ObjectId), Timestamp> = BTreeMap::new();
        for a in data.activities.iter().chain(&added) {
            if a.activity_type() != rule.child_activity {
                continue;
            }
            let Some(p) = parent_of.get(&a.object) else { continue };
            first
                .entry((&a.user, p))
                .and_modify(|t| *t = (*t).min(a.timestamp))
                .or_insert(a.timestamp);
        }
        let new: Vec<Activity> = first
            .into_iter()
            .filter(|(key, _)| !done.contains(key))
            .map(|((user, object), t)| inferred(user, object, &rule.activity, level, t))
            .collect();
        added.extend(new);
    }
    Ok(added)
}
