//! Users, hierarchically organized objects, activities and pre-social networks.
//!
//! A [`PreSocialNetwork`] is either hierarchical (activities may target any
//! level of the object tree) or flat (every activity targets an object on a
//! single end level). Networks are validated on construction and immutable
//! afterwards; the flattening and extraction stages build new values.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Integer seconds since a fixed epoch.
pub type Timestamp = i64;

/// Position of a level in a [`LevelSchema`]. Level 1 is the top of the hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Level(u16);

impl Level {
    pub const TOP: Level = Level(1);

    /// Returns `None` for index 0.
    pub fn new(index: u16) -> Option<Level> {
        (index >= 1).then_some(Level(index))
    }

    pub fn index(self) -> u16 {
        self.0
    }

    /// The level directly above, if any.
    pub fn up(self) -> Option<Level> {
        Level::new(self.0 - 1)
    }

    pub fn down(self) -> Level {
        Level(self.0 + 1)
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SchemaError {
    #[error("a schema needs at least one level")]
    Empty,
    #[error("level label at position {0} is empty")]
    EmptyLabel(usize),
    #[error("level label '{0}' appears more than once")]
    DuplicateLabel(String),
    #[error("abbreviation given for unknown level '{0}'")]
    UnknownLevel(String),
    #[error("abbreviation for level '{0}' is empty")]
    EmptyAbbreviation(String),
    #[error("too many levels ({0})")]
    TooDeep(usize),
}

/// Ordered level labels, top first, plus the short form of each label used
/// when rendering role paths as initials.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelSchema {
    labels: Vec<String>,
    abbreviations: Vec<String>,
}

impl LevelSchema {
    pub fn new<I, S>(labels: I) -> Result<Self, SchemaError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(SchemaError::Empty);
        }
        if labels.len() >= u16::MAX as usize {
            return Err(SchemaError::TooDeep(labels.len()));
        }
        let mut seen = BTreeSet::new();
        for (i, label) in labels.iter().enumerate() {
            if label.trim().is_empty() {
                return Err(SchemaError::EmptyLabel(i));
            }
            if !seen.insert(label.as_str()) {
                return Err(SchemaError::DuplicateLabel(label.clone()));
            }
        }
        let abbreviations = labels.iter().map(|l| default_abbreviation(l)).collect();
        Ok(LevelSchema {
            labels,
            abbreviations,
        })
    }

    /// Overrides the initials of selected levels, e.g. `"topic group" -> "G"`
    /// when two labels start with the same letter.
    pub fn with_abbreviations(
        mut self,
        overrides: &BTreeMap<String, String>,
    ) -> Result<Self, SchemaError> {
        for (label, abbrev) in overrides {
            let level = self
                .level_of(label)
                .ok_or_else(|| SchemaError::UnknownLevel(label.clone()))?;
            if abbrev.trim().is_empty() {
                return Err(SchemaError::EmptyAbbreviation(label.clone()));
            }
            self.abbreviations[level.0 as usize - 1] = abbrev.clone();
        }
        Ok(self)
    }

    /// Number of levels.
    pub fn depth(&self) -> u16 {
        self.labels.len() as u16
    }

    pub fn bottom(&self) -> Level {
        Level(self.depth())
    }

    pub fn contains(&self, level: Level) -> bool {
        level.0 <= self.depth()
    }

    pub fn levels(&self) -> impl DoubleEndedIterator<Item = Level> + '_ {
        (1..=self.depth()).map(Level)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// # Panics
    ///
    /// If `level` is not part of this schema.
    pub fn label(&self, level: Level) -> &str {
        &self.labels[level.0 as usize - 1]
    }

    pub fn abbreviation(&self, level: Level) -> &str {
        &self.abbreviations[level.0 as usize - 1]
    }

    /// Abbreviations that differ from the default first-letter initials.
    pub fn abbreviation_overrides(&self) -> BTreeMap<String, String> {
        self.labels
            .iter()
            .zip(&self.abbreviations)
            .filter(|(l, a)| default_abbreviation(l) != **a)
            .map(|(l, a)| (l.clone(), a.clone()))
            .collect()
    }

    pub fn level_of(&self, label: &str) -> Option<Level> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| Level(i as u16 + 1))
    }
}

fn default_abbreviation(label: &str) -> String {
    label
        .trim()
        .chars()
        .next()
        .map(|c| c.to_uppercase().collect())
        .unwrap_or_default()
}

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(Arc<str>);

        impl $name {
            pub fn new(id: impl AsRef<str>) -> Self {
                $name(Arc::from(id.as_ref()))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name::new(s)
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                $name(Arc::from(s))
            }
        }
    };
}

id_type!(
    /// Opaque user identifier.
    UserId
);
id_type!(
    /// Opaque object identifier.
    ObjectId
);

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct User {
    pub id: UserId,
    pub label: String,
}

impl User {
    pub fn new(id: impl Into<UserId>, label: impl Into<String>) -> Self {
        User {
            id: id.into(),
            label: label.into(),
        }
    }
}

/// One object of the hierarchy (forum, topic, post, ...).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ObjectNode {
    pub id: ObjectId,
    pub level: Level,
    /// Absent exactly for level-1 objects.
    pub parent: Option<ObjectId>,
    pub created_at: Timestamp,
    pub creator: UserId,
}

/// The kind of activity a user performed plus the levels it has travelled
/// through during flattening, origin first.
///
/// An activity that was never moved has a single-element path: the level of
/// the object it was performed on.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RolePath {
    pub base: Arc<str>,
    pub path: Vec<Level>,
}

impl RolePath {
    pub fn new(base: impl AsRef<str>, origin: Level) -> Self {
        RolePath {
            base: Arc::from(base.as_ref()),
            path: vec![origin],
        }
    }

    pub fn origin(&self) -> Level {
        self.path[0]
    }

    /// The level the role currently points at.
    pub fn current(&self) -> Level {
        *self.path.last().expect("role paths are never empty")
    }

    /// Returns a copy with `level` appended.
    pub fn extended(&self, level: Level) -> RolePath {
        let mut path = Vec::with_capacity(self.path.len() + 1);
        path.extend_from_slice(&self.path);
        path.push(level);
        RolePath {
            base: Arc::clone(&self.base),
            path,
        }
    }

    /// Non-empty, adjacent steps, one direction only.
    pub fn is_well_formed(&self, schema: &LevelSchema) -> bool {
        if self.path.is_empty() || !self.path.iter().all(|l| schema.contains(*l)) {
            return false;
        }
        let steps: Vec<i32> = self
            .path
            .windows(2)
            .map(|w| w[1].0 as i32 - w[0].0 as i32)
            .collect();
        steps.iter().all(|s| *s == 1) || steps.iter().all(|s| *s == -1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Provenance {
    Original,
    /// Produced by flattening; `origin` is the object the activity was
    /// performed on in the hierarchical network.
    Moved { origin: ObjectId },
}

/// One (user, object, role, timestamp) record.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Activity {
    pub object: ObjectId,
    pub user: UserId,
    pub role: RolePath,
    pub timestamp: Timestamp,
    pub provenance: Provenance,
    /// Added by activity inference rather than read from the log.
    pub inferred: bool,
}

impl Activity {
    pub fn new(
        user: impl Into<UserId>,
        object: impl Into<ObjectId>,
        activity_type: &str,
        level: Level,
        timestamp: Timestamp,
    ) -> Self {
        Activity {
            object: object.into(),
            user: user.into(),
            role: RolePath::new(activity_type, level),
            timestamp,
            provenance: Provenance::Original,
            inferred: false,
        }
    }

    pub fn activity_type(&self) -> &str {
        &self.role.base
    }

    /// Object the activity was performed on before any flattening.
    pub fn origin_object(&self) -> &ObjectId {
        match &self.provenance {
            Provenance::Original => &self.object,
            Provenance::Moved { origin } => origin,
        }
    }
}

/// Inclusive `[start, end]` range of timestamps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeRange {
    pub start: Timestamp,
    pub end: Timestamp,
}

impl TimeRange {
    pub fn new(start: Timestamp, end: Timestamp) -> Self {
        TimeRange { start, end }
    }

    pub fn contains(&self, t: Timestamp) -> bool {
        self.start <= t && t <= self.end
    }

    pub fn len(&self) -> i64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetworkKind {
    Hierarchical,
    Flat { end_level: Level },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HierarchyError {
    #[error("unknown object '{0}'")]
    UnknownObject(ObjectId),
    #[error("object '{object}' has no parent although it sits on level {level}")]
    MissingParent { object: ObjectId, level: Level },
    #[error("target level {target} is not strictly {direction} object level {level}")]
    InvalidTarget {
        level: Level,
        target: Level,
        direction: &'static str,
    },
}

/// Violations found by [`validate_parts`]. Activities are referenced by their
/// position in the input slice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    CycleDetected { object: ObjectId },
    LevelSkip { object: ObjectId, level: Level, parent: ObjectId, parent_level: Level },
    MultipleParents { object: ObjectId, parents: Vec<Option<ObjectId>> },
    OrphanNonRoot { object: ObjectId, level: Level, parent: Option<ObjectId> },
    DuplicateObject { object: ObjectId },
    UnknownLevel { object: ObjectId, level: Level },
    DuplicateUser { user: UserId },
    UnknownCreator { object: ObjectId, creator: UserId },
    UnknownActivityUser { activity: usize, user: UserId },
    UnknownActivityObject { activity: usize, object: ObjectId },
    MalformedRolePath { activity: usize },
    RoleLevelMismatch { activity: usize, object: ObjectId, object_level: Level, role_level: Level },
    OffEndLevel { activity: usize, object: ObjectId, level: Level, end_level: Level },
    OutsideObservation { activity: usize, timestamp: Timestamp },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            CycleDetected { object } => write!(f, "CycleDetected: object {object} is its own ancestor"),
            LevelSkip { object, level, parent, parent_level } => write!(
                f,
                "LevelSkip: object {object} on level {level} has parent {parent} on level {parent_level}"
            ),
            MultipleParents { object, parents } => {
                let ps: Vec<String> = parents
                    .iter()
                    .map(|p| p.as_ref().map_or("<none>".to_string(), |p| p.to_string()))
                    .collect();
                write!(f, "MultipleParents: object {object} declared with parents {}", ps.join(", "))
            }
            OrphanNonRoot { object, level, parent } => match parent {
                Some(p) => write!(f, "OrphanNonRoot: object {object} on level {level} has unknown parent {p}"),
                None => write!(f, "OrphanNonRoot: object {object} on level {level} has no parent"),
            },
            DuplicateObject { object } => write!(f, "DuplicateObject: object {object} declared twice"),
            UnknownLevel { object, level } => write!(f, "UnknownLevel: object {object} has level {level}"),
            DuplicateUser { user } => write!(f, "DuplicateUser: user {user} declared twice"),
            UnknownCreator { object, creator } => {
                write!(f, "UnknownCreator: object {object} created by unknown user {creator}")
            }
            UnknownActivityUser { activity, user } => {
                write!(f, "UnknownActivityUser: activity #{activity} by unknown user {user}")
            }
            UnknownActivityObject { activity, object } => {
                write!(f, "UnknownActivityObject: activity #{activity} on unknown object {object}")
            }
            MalformedRolePath { activity } => write!(f, "MalformedRolePath: activity #{activity}"),
            RoleLevelMismatch { activity, object, object_level, role_level } => write!(
                f,
                "RoleLevelMismatch: activity #{activity} points at level {role_level} but object {object} is on level {object_level}"
            ),
            OffEndLevel { activity, object, level, end_level } => write!(
                f,
                "OffEndLevel: activity #{activity} on object {object} (level {level}) in a network flat at level {end_level}"
            ),
            OutsideObservation { activity, timestamp } => {
                write!(f, "OutsideObservation: activity #{activity} at {timestamp}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "no violations");
        }
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid network:\n{0}")]
    Invalid(ValidationReport),
}

/// Checks the tree invariants of an object list and, optionally, the
/// activities placed on it.
///
/// The object slice may contain repeated ids; these are reported rather
/// than silently merged.
pub fn validate_parts(
    schema: &LevelSchema,
    users: &[User],
    objects: &[ObjectNode],
    activities: &[Activity],
    kind: NetworkKind,
    observation: Option<TimeRange>,
) -> ValidationReport {
    let mut violations = Vec::new();

    let mut user_ids = BTreeSet::new();
    for u in users {
        if !user_ids.insert(&u.id) {
            violations.push(Violation::DuplicateUser { user: u.id.clone() });
        }
    }

    let mut by_id: BTreeMap<&ObjectId, Vec<&ObjectNode>> = BTreeMap::new();
    for o in objects {
        by_id.entry(&o.id).or_default().push(o);
    }
    let mut first: BTreeMap<&ObjectId, &ObjectNode> = BTreeMap::new();
    for (id, decls) in &by_id {
        let parents: BTreeSet<Option<&ObjectId>> = decls.iter().map(|o| o.parent.as_ref()).collect();
        if parents.len() > 1 {
            violations.push(Violation::MultipleParents {
                object: (*id).clone(),
                parents: parents.into_iter().map(|p| p.cloned()).collect(),
            });
        } else if decls.len() > 1 {
            violations.push(Violation::DuplicateObject { object: (*id).clone() });
        }
        first.insert(id, decls[0]);
    }

    // Objects that lie on a parent cycle. Walk each chain once, colouring nodes.
    let mut on_cycle: BTreeSet<&ObjectId> = BTreeSet::new();
    let mut settled: BTreeSet<&ObjectId> = BTreeSet::new();
    for start in first.keys() {
        let mut trail: Vec<&ObjectId> = Vec::new();
        let mut cursor = Some(*start);
        while let Some(id) = cursor {
            if settled.contains(id) {
                break;
            }
            if let Some(pos) = trail.iter().position(|t| *t == id) {
                on_cycle.extend(trail[pos..].iter().copied());
                break;
            }
            trail.push(id);
            cursor = first.get(id).and_then(|o| o.parent.as_ref());
        }
        settled.extend(trail);
    }

    for (id, o) in &first {
        if on_cycle.contains(id) {
            violations.push(Violation::CycleDetected { object: (*id).clone() });
            continue;
        }
        if !schema.contains(o.level) {
            violations.push(Violation::UnknownLevel { object: o.id.clone(), level: o.level });
            continue;
        }
        if !user_ids.contains(&o.creator) {
            violations.push(Violation::UnknownCreator {
                object: o.id.clone(),
                creator: o.creator.clone(),
            });
        }
        match &o.parent {
            None if o.level != Level::TOP => violations.push(Violation::OrphanNonRoot {
                object: o.id.clone(),
                level: o.level,
                parent: None,
            }),
            None => {}
            Some(pid) => match first.get(pid) {
                None => violations.push(Violation::OrphanNonRoot {
                    object: o.id.clone(),
                    level: o.level,
                    parent: Some(pid.clone()),
                }),
                Some(p) if p.level.0 + 1 != o.level.0 => violations.push(Violation::LevelSkip {
                    object: o.id.clone(),
                    level: o.level,
                    parent: pid.clone(),
                    parent_level: p.level,
                }),
                Some(_) => {}
            },
        }
    }

    for (i, a) in activities.iter().enumerate() {
        if !user_ids.contains(&a.user) {
            violations.push(Violation::UnknownActivityUser { activity: i, user: a.user.clone() });
        }
        if !a.role.is_well_formed(schema) {
            violations.push(Violation::MalformedRolePath { activity: i });
        }
        match first.get(&a.object) {
            None => violations.push(Violation::UnknownActivityObject {
                activity: i,
                object: a.object.clone(),
            }),
            Some(o) => {
                if a.role.path.last() != Some(&o.level) {
                    violations.push(Violation::RoleLevelMismatch {
                        activity: i,
                        object: o.id.clone(),
                        object_level: o.level,
                        role_level: a.role.path.last().copied().unwrap_or(Level::TOP),
                    });
                }
                if let NetworkKind::Flat { end_level } = kind {
                    if o.level != end_level {
                        violations.push(Violation::OffEndLevel {
                            activity: i,
                            object: o.id.clone(),
                            level: o.level,
                            end_level,
                        });
                    }
                }
            }
        }
        if let Some(range) = observation {
            if !range.contains(a.timestamp) {
                violations.push(Violation::OutsideObservation { activity: i, timestamp: a.timestamp });
            }
        }
    }

    ValidationReport { violations }
}

/// Validated object tree with a child index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hierarchy {
    objects: BTreeMap<ObjectId, ObjectNode>,
    children: BTreeMap<ObjectId, Vec<ObjectId>>,
    by_level: Vec<Vec<ObjectId>>,
}

impl Hierarchy {
    fn from_valid(depth: u16, objects: Vec<ObjectNode>) -> Self {
        let mut children: BTreeMap<ObjectId, Vec<ObjectId>> = BTreeMap::new();
        let mut by_level = vec![Vec::new(); depth as usize];
        let mut map = BTreeMap::new();
        for o in objects {
            if let Some(p) = &o.parent {
                children.entry(p.clone()).or_default().push(o.id.clone());
            }
            by_level[o.level.0 as usize - 1].push(o.id.clone());
            map.insert(o.id.clone(), o);
        }
        for c in children.values_mut() {
            c.sort();
        }
        for l in &mut by_level {
            l.sort();
        }
        Hierarchy {
            objects: map,
            children,
            by_level,
        }
    }

    pub fn get(&self, id: &ObjectId) -> Option<&ObjectNode> {
        self.objects.get(id)
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    /// All objects ordered by id.
    pub fn iter(&self) -> impl Iterator<Item = &ObjectNode> {
        self.objects.values()
    }

    /// Ids of the objects on `level`, sorted.
    pub fn at_level(&self, level: Level) -> &[ObjectId] {
        self.by_level
            .get(level.0 as usize - 1)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Direct children, sorted by id.
    pub fn children(&self, id: &ObjectId) -> &[ObjectId] {
        self.children.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    fn node(&self, id: &ObjectId) -> Result<&ObjectNode, HierarchyError> {
        self.objects
            .get(id)
            .ok_or_else(|| HierarchyError::UnknownObject(id.clone()))
    }

    pub fn parent(&self, id: &ObjectId) -> Result<&ObjectNode, HierarchyError> {
        let node = self.node(id)?;
        let pid = node.parent.as_ref().ok_or_else(|| HierarchyError::MissingParent {
            object: id.clone(),
            level: node.level,
        })?;
        self.objects.get(pid).ok_or_else(|| HierarchyError::MissingParent {
            object: id.clone(),
            level: node.level,
        })
    }

    /// The unique ancestor of `id` on level `target`, which must lie strictly
    /// above the object.
    pub fn ancestor_at_level(
        &self,
        id: &ObjectId,
        target: Level,
    ) -> Result<&ObjectNode, HierarchyError> {
        let mut node = self.node(id)?;
        if target >= node.level {
            return Err(HierarchyError::InvalidTarget {
                level: node.level,
                target,
                direction: "above",
            });
        }
        while node.level > target {
            node = self.parent(&node.id)?;
        }
        Ok(node)
    }

    /// Every object on level `target` inside the subtree of `id`, in
    /// depth-first order. Empty when a branch ends early.
    pub fn descendants_at_level(
        &self,
        id: &ObjectId,
        target: Level,
    ) -> Result<Vec<&ObjectNode>, HierarchyError> {
        let node = self.node(id)?;
        if target <= node.level {
            return Err(HierarchyError::InvalidTarget {
                level: node.level,
                target,
                direction: "below",
            });
        }
        let mut frontier = vec![node];
        for _ in node.level.0..target.0 {
            frontier = frontier
                .iter()
                .flat_map(|n| self.children(&n.id))
                .map(|c| &self.objects[c])
                .collect();
        }
        Ok(frontier)
    }

    /// Number of level-`target` descendants for every object strictly above
    /// `target`. Objects without such descendants are absent.
    pub fn descendant_counts(&self, target: Level) -> BTreeMap<&ObjectId, u64> {
        let mut counts: BTreeMap<&ObjectId, u64> = BTreeMap::new();
        for id in self.at_level(target) {
            let mut node = &self.objects[id];
            while let Some(pid) = &node.parent {
                let Some(parent) = self.objects.get(pid) else { break };
                *counts.entry(&parent.id).or_default() += 1;
                node = parent;
            }
        }
        counts
    }
}

/// Users, objects and the activities linking them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreSocialNetwork {
    schema: Arc<LevelSchema>,
    users: Arc<BTreeMap<UserId, User>>,
    hierarchy: Arc<Hierarchy>,
    activities: Vec<Activity>,
    kind: NetworkKind,
    observation: Option<TimeRange>,
}

impl PreSocialNetwork {
    /// Builds and validates a hierarchical network.
    ///
    /// `observation` is the declared observation period; when given, every
    /// activity timestamp must fall inside it.
    pub fn hierarchical(
        schema: LevelSchema,
        users: Vec<User>,
        objects: Vec<ObjectNode>,
        activities: Vec<Activity>,
        observation: Option<TimeRange>,
    ) -> Result<Self, ModelError> {
        Self::build(schema, users, objects, activities, NetworkKind::Hierarchical, observation)
    }

    pub fn build(
        schema: LevelSchema,
        users: Vec<User>,
        objects: Vec<ObjectNode>,
        activities: Vec<Activity>,
        kind: NetworkKind,
        observation: Option<TimeRange>,
    ) -> Result<Self, ModelError> {
        let report = validate_parts(&schema, &users, &objects, &activities, kind, observation);
        if let NetworkKind::Flat { end_level } = kind {
            if !schema.contains(end_level) {
                return Err(ModelError::Invalid(report));
            }
        }
        if !report.is_valid() {
            return Err(ModelError::Invalid(report));
        }
        let hierarchy = Hierarchy::from_valid(schema.depth(), objects);
        Ok(PreSocialNetwork {
            schema: Arc::new(schema),
            users: Arc::new(users.into_iter().map(|u| (u.id.clone(), u)).collect()),
            hierarchy: Arc::new(hierarchy),
            activities,
            kind,
            observation,
        })
    }

    /// Same users and objects, different activities. Used by the flattening
    /// stage, which preserves the invariants by construction.
    pub(crate) fn with_activities(&self, activities: Vec<Activity>, kind: NetworkKind) -> Self {
        PreSocialNetwork {
            schema: Arc::clone(&self.schema),
            users: Arc::clone(&self.users),
            hierarchy: Arc::clone(&self.hierarchy),
            activities,
            kind,
            observation: self.observation,
        }
    }

    /// Re-runs validation over the stored parts.
    pub fn validate(&self) -> ValidationReport {
        let users: Vec<User> = self.users.values().cloned().collect();
        let objects: Vec<ObjectNode> = self.hierarchy.iter().cloned().collect();
        validate_parts(&self.schema, &users, &objects, &self.activities, self.kind, self.observation)
    }

    pub fn schema(&self) -> &LevelSchema {
        &self.schema
    }

    pub fn kind(&self) -> NetworkKind {
        self.kind
    }

    pub fn users(&self) -> impl Iterator<Item = &User> {
        self.users.values()
    }

    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    pub fn user(&self, id: &UserId) -> Option<&User> {
        self.users.get(id)
    }

    pub fn hierarchy(&self) -> &Hierarchy {
        &self.hierarchy
    }

    pub fn object(&self, id: &ObjectId) -> Option<&ObjectNode> {
        self.hierarchy.get(id)
    }

    pub fn activities(&self) -> &[Activity] {
        &self.activities
    }

    /// Declared observation period.
    pub fn declared_observation(&self) -> Option<TimeRange> {
        self.observation
    }

    /// Declared observation period, or the span of activity timestamps when
    /// none was declared.
    pub fn observation(&self) -> TimeRange {
        if let Some(r) = self.observation {
            return r;
        }
        let mut ts = self.activities.iter().map(|a| a.timestamp);
        match ts.next() {
            None => TimeRange::new(0, 0),
            Some(t) => {
                let (lo, hi) = ts.fold((t, t), |(lo, hi), t| (lo.min(t), hi.max(t)));
                TimeRange::new(lo, hi)
            }
        }
    }

    /// Level of the object an activity targets.
    pub fn activity_level(&self, activity: &Activity) -> Level {
        self.hierarchy.objects[&activity.object].level
    }

    /// Levels that currently carry at least one activity.
    pub fn levels_with_activities(&self) -> BTreeSet<Level> {
        self.activities.iter().map(|a| self.activity_level(a)).collect()
    }

    pub fn ancestor_at_level(
        &self,
        id: &ObjectId,
        target: Level,
    ) -> Result<&ObjectNode, HierarchyError> {
        self.hierarchy.ancestor_at_level(id, target)
    }

    pub fn descendants_at_level(
        &self,
        id: &ObjectId,
        target: Level,
    ) -> Result<Vec<&ObjectNode>, HierarchyError> {
        self.hierarchy.descendants_at_level(id, target)
    }

    /// Flat view of the hierarchical activities that already sit on `level`,
    /// without any flattening. Serves as the "no flattening" baseline.
    pub fn restricted_to_level(&self, level: Level) -> PreSocialNetwork {
        let activities = self
            .activities
            .iter()
            .filter(|a| self.activity_level(a) == level)
            .cloned()
            .collect();
        self.with_activities(activities, NetworkKind::Flat { end_level: level })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> LevelSchema {
        LevelSchema::new(["forum", "topic", "post"]).unwrap()
    }

    fn obj(id: &str, level: u16, parent: Option<&str>) -> ObjectNode {
        ObjectNode {
            id: id.into(),
            level: Level::new(level).unwrap(),
            parent: parent.map(ObjectId::from),
            created_at: 0,
            creator: "u".into(),
        }
    }

    fn users() -> Vec<User> {
        vec![User::new("u", "u")]
    }

    #[test]
    fn schema_rejects_duplicates_and_empty() {
        assert_eq!(LevelSchema::new(Vec::<String>::new()), Err(SchemaError::Empty));
        assert_eq!(
            LevelSchema::new(["a", "a"]),
            Err(SchemaError::DuplicateLabel("a".into()))
        );
        assert_eq!(LevelSchema::new(["a", " "]), Err(SchemaError::EmptyLabel(1)));
    }

    #[test]
    fn schema_numbering_starts_at_top() {
        let s = schema();
        assert_eq!(s.level_of("forum"), Some(Level::TOP));
        assert_eq!(s.level_of("post").map(Level::index), Some(3));
        assert_eq!(s.abbreviation(s.bottom()), "P");
        let s = s
            .with_abbreviations(&[("topic".to_string(), "Tp".to_string())].into())
            .unwrap();
        assert_eq!(s.abbreviation(Level::new(2).unwrap()), "Tp");
        assert_eq!(s.abbreviation_overrides().len(), 1);
    }

    #[test]
    fn self_parent_is_a_cycle() {
        let objects = vec![obj("1", 1, None), obj("x", 2, Some("x"))];
        let r = validate_parts(&schema(), &users(), &objects, &[], NetworkKind::Hierarchical, None);
        assert_eq!(r.violations, vec![Violation::CycleDetected { object: "x".into() }]);
    }

    #[test]
    fn longer_cycle_reports_every_member() {
        let objects = vec![obj("a", 2, Some("b")), obj("b", 3, Some("a")), obj("c", 3, Some("a"))];
        let r = validate_parts(&schema(), &users(), &objects, &[], NetworkKind::Hierarchical, None);
        let cyc: Vec<_> = r
            .violations
            .iter()
            .filter(|v| matches!(v, Violation::CycleDetected { .. }))
            .collect();
        assert_eq!(cyc.len(), 2);
    }

    #[test]
    fn level_skip_and_orphans() {
        let objects = vec![
            obj("1", 1, None),
            obj("1.1.1", 3, Some("1")),
            obj("lost", 2, None),
            obj("ghost", 2, Some("nope")),
        ];
        let r = validate_parts(&schema(), &users(), &objects, &[], NetworkKind::Hierarchical, None);
        assert!(r.violations.iter().any(|v| matches!(v, Violation::LevelSkip { object, .. } if object.as_str() == "1.1.1")));
        assert!(r.violations.iter().any(|v| matches!(v, Violation::OrphanNonRoot { object, parent: None, .. } if object.as_str() == "lost")));
        assert!(r.violations.iter().any(|v| matches!(v, Violation::OrphanNonRoot { parent: Some(_), .. })));
    }

    #[test]
    fn two_parents_rejected() {
        let objects = vec![
            obj("1", 1, None),
            obj("2", 1, None),
            obj("t", 2, Some("1")),
            obj("t", 2, Some("2")),
        ];
        let r = validate_parts(&schema(), &users(), &objects, &[], NetworkKind::Hierarchical, None);
        assert!(matches!(r.violations[..], [Violation::MultipleParents { .. }]));
    }

    #[test]
    fn flat_network_rejects_other_levels() {
        let objects = vec![obj("1", 1, None), obj("1.1", 2, Some("1"))];
        let acts = vec![Activity::new("u", "1.1", "x", Level::new(2).unwrap(), 0)];
        let flat = NetworkKind::Flat { end_level: Level::TOP };
        let r = validate_parts(&schema(), &users(), &objects, &acts, flat, None);
        assert!(matches!(r.violations[..], [Violation::OffEndLevel { .. }]));
    }

    #[test]
    fn ancestor_and_descendants() {
        let objects = vec![
            obj("1", 1, None),
            obj("1.1", 2, Some("1")),
            obj("1.2", 2, Some("1")),
            obj("1.1.1", 3, Some("1.1")),
            obj("1.1.2", 3, Some("1.1")),
        ];
        let net = PreSocialNetwork::hierarchical(schema(), users(), objects, vec![], None).unwrap();
        let l = |i| Level::new(i).unwrap();
        assert_eq!(net.ancestor_at_level(&"1.1.2".into(), l(1)).unwrap().id.as_str(), "1");
        assert!(matches!(
            net.ancestor_at_level(&"1.1".into(), l(2)),
            Err(HierarchyError::InvalidTarget { .. })
        ));
        let d: Vec<_> = net
            .descendants_at_level(&"1".into(), l(3))
            .unwrap()
            .iter()
            .map(|o| o.id.as_str().to_string())
            .collect();
        assert_eq!(d, ["1.1.1", "1.1.2"]);
        assert!(net.descendants_at_level(&"1.2".into(), l(3)).unwrap().is_empty());
        let counts = net.hierarchy().descendant_counts(l(3));
        assert_eq!(counts[&ObjectId::from("1")], 2);
        assert!(!counts.contains_key(&ObjectId::from("1.2")));
    }

    #[test]
    fn role_path_shape() {
        let s = schema();
        let l = |i| Level::new(i).unwrap();
        let up = RolePath::new("Is Author", l(3)).extended(l(2)).extended(l(1));
        assert!(up.is_well_formed(&s));
        let zigzag = RolePath::new("x", l(2)).extended(l(1)).extended(l(2));
        assert!(!zigzag.is_well_formed(&s));
        let skip = RolePath::new("x", l(3)).extended(l(1));
        assert!(!skip.is_well_formed(&s));
    }
}
