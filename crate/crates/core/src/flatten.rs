//! Turning a hierarchical pre-social network into a flat one.
//!
//! Activities below the end level are lifted to their parent one level at a
//! time; activities above it are copied onto every child, again one level at
//! a time. Each step appends the level it moved to onto the activity's
//! [`RolePath`], so a post authorship lifted to a forum reads `PTF Is Author`.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::model::{
    Activity, HierarchyError, Level, LevelSchema, NetworkKind, PreSocialNetwork, Provenance,
    RolePath,
};

#[derive(Debug, Error)]
pub enum FlattenError {
    #[error("end level {level} is not part of a {depth}-level schema")]
    UnknownEndLevel { level: Level, depth: u16 },
    #[error("network is already flat")]
    AlreadyFlat,
    #[error("cannot lift from level {0}: it is the top level")]
    LiftFromTop(Level),
    #[error("cannot push from level {0}: it is the bottom level")]
    PushFromBottom(Level),
    #[error("cannot step from level {from}: level {other} still carries activities")]
    OutOfOrder { from: Level, other: Level },
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
}

/// Which levels get lifted and which get pushed for a given end level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlattenPlan {
    pub end_level: Level,
    /// Levels below the end level, deepest first.
    pub lift_levels: Vec<Level>,
    /// Levels above the end level, top first.
    pub push_levels: Vec<Level>,
}

impl FlattenPlan {
    pub fn new(schema: &LevelSchema, end_level: Level) -> Result<Self, FlattenError> {
        if !schema.contains(end_level) {
            return Err(FlattenError::UnknownEndLevel {
                level: end_level,
                depth: schema.depth(),
            });
        }
        let lift_levels = schema.levels().filter(|l| *l > end_level).rev().collect();
        let push_levels = schema.levels().filter(|l| *l < end_level).collect();
        Ok(FlattenPlan {
            end_level,
            lift_levels,
            push_levels,
        })
    }
}

fn moved(activity: &Activity) -> Provenance {
    Provenance::Moved {
        origin: activity.origin_object().clone(),
    }
}

fn ensure_hierarchical(net: &PreSocialNetwork) -> Result<(), FlattenError> {
    match net.kind() {
        NetworkKind::Hierarchical => Ok(()),
        NetworkKind::Flat { .. } => Err(FlattenError::AlreadyFlat),
    }
}

/// Moves every activity on `from_level` to the parent object.
///
/// `from_level` must be the deepest level that still carries activities.
/// The activity count is unchanged.
pub fn lift_step(net: &PreSocialNetwork, from_level: Level) -> Result<PreSocialNetwork, FlattenError> {
    ensure_hierarchical(net)?;
    let target = from_level.up().ok_or(FlattenError::LiftFromTop(from_level))?;
    if let Some(other) = net.levels_with_activities().into_iter().find(|l| *l > from_level) {
        return Err(FlattenError::OutOfOrder { from: from_level, other });
    }
    let hierarchy = net.hierarchy();
    let mut out = Vec::with_capacity(net.activities().len());
    for a in net.activities() {
        if net.activity_level(a) != from_level {
            out.push(a.clone());
            continue;
        }
        let parent = hierarchy.parent(&a.object)?;
        out.push(Activity {
            object: parent.id.clone(),
            user: a.user.clone(),
            role: a.role.extended(target),
            timestamp: a.timestamp,
            provenance: moved(a),
            inferred: a.inferred,
        });
    }
    Ok(net.with_activities(out, NetworkKind::Hierarchical))
}

/// Replaces every activity on `from_level` by one copy per child object.
///
/// `from_level` must be the highest level that still carries activities.
/// Activities on childless objects disappear.
pub fn push_step(net: &PreSocialNetwork, from_level: Level) -> Result<PreSocialNetwork, FlattenError> {
    ensure_hierarchical(net)?;
    if from_level >= net.schema().bottom() {
        return Err(FlattenError::PushFromBottom(from_level));
    }
    let target = from_level.down();
    if let Some(other) = net.levels_with_activities().into_iter().find(|l| *l < from_level) {
        return Err(FlattenError::OutOfOrder { from: from_level, other });
    }
    let hierarchy = net.hierarchy();
    let mut out = Vec::with_capacity(net.activities().len());
    for a in net.activities() {
        if net.activity_level(a) != from_level {
            out.push(a.clone());
            continue;
        }
        let role = a.role.extended(target);
        for child in hierarchy.children(&a.object) {
            out.push(Activity {
                object: child.clone(),
                user: a.user.clone(),
                role: role.clone(),
                timestamp: a.timestamp,
                provenance: moved(a),
                inferred: a.inferred,
            });
        }
    }
    Ok(net.with_activities(out, NetworkKind::Hierarchical))
}

/// Flattens `net` onto `end_level`: lifts from the bottom up, then pushes
/// from the top down. Activities are returned in canonical (sorted) order.
pub fn flatten(net: &PreSocialNetwork, end_level: Level) -> Result<PreSocialNetwork, FlattenError> {
    ensure_hierarchical(net)?;
    let plan = FlattenPlan::new(net.schema(), end_level)?;
    let mut current = net.clone();
    for level in &plan.lift_levels {
        current = lift_step(&current, *level)?;
    }
    for level in &plan.push_levels {
        current = push_step(&current, *level)?;
    }
    let mut activities = current.activities().to_vec();
    activities.sort();
    Ok(net.with_activities(activities, NetworkKind::Flat { end_level }))
}

/// How role paths are turned into names.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Naming {
    /// Level initials origin-to-destination, then the base role: `PTF Is Author`.
    #[default]
    Initials,
    /// Full level labels joined by `separator`, then the base role.
    FullLabels { separator: String },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RenderError {
    #[error("levels '{0}' and '{1}' share the initials '{2}'")]
    AmbiguousInitials(String, String, String),
    #[error("role path refers to level {0} outside the schema")]
    UnknownLevel(Level),
}

/// Fails when two levels of the schema share an abbreviation, which would
/// make initials-mode names ambiguous.
pub fn check_initials(schema: &LevelSchema) -> Result<(), RenderError> {
    let mut seen: Vec<(&str, &str)> = Vec::new();
    for level in schema.levels() {
        let abbrev = schema.abbreviation(level);
        if let Some((other, _)) = seen.iter().find(|(_, a)| *a == abbrev) {
            return Err(RenderError::AmbiguousInitials(
                other.to_string(),
                schema.label(level).to_string(),
                abbrev.to_string(),
            ));
        }
        seen.push((schema.label(level), abbrev));
    }
    Ok(())
}

/// Renders a role path, e.g. `[post, topic, forum]` + `Is Author` gives
/// `PTF Is Author` in initials mode.
pub fn render_role(path: &RolePath, schema: &LevelSchema, naming: &Naming) -> Result<String, RenderError> {
    if let Some(bad) = path.path.iter().find(|l| !schema.contains(**l)) {
        return Err(RenderError::UnknownLevel(*bad));
    }
    let prefix = match naming {
        Naming::Initials => {
            check_initials(schema)?;
            path.path.iter().map(|l| schema.abbreviation(*l)).collect::<String>()
        }
        Naming::FullLabels { separator } => path
            .path
            .iter()
            .map(|l| schema.label(*l))
            .collect::<Vec<_>>()
            .join(separator),
    };
    Ok(format!("{prefix} {}", path.base))
}

/// Distinct rendered roles present in a network.
pub fn role_inventory(net: &PreSocialNetwork, naming: &Naming) -> Result<BTreeSet<String>, RenderError> {
    net.activities()
        .iter()
        .map(|a| render_role(&a.role, net.schema(), naming))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ObjectNode, User};

    fn l(i: u16) -> Level {
        Level::new(i).unwrap()
    }

    fn schema() -> LevelSchema {
        LevelSchema::new(["Y", "V", "Z"]).unwrap()
    }

    fn obj(id: &str, level: u16, parent: Option<&str>) -> ObjectNode {
        ObjectNode {
            id: id.into(),
            level: l(level),
            parent: parent.map(Into::into),
            created_at: 0,
            creator: "a".into(),
        }
    }

    /// Y1 -> V1 -> {Z1, Z2}; Y2 -> V2 -> Z3; Y2 -> V3 (no children)
    fn net(activities: Vec<Activity>) -> PreSocialNetwork {
        let objects = vec![
            obj("Y1", 1, None),
            obj("Y2", 1, None),
            obj("V1", 2, Some("Y1")),
            obj("V2", 2, Some("Y2")),
            obj("V3", 2, Some("Y2")),
            obj("Z1", 3, Some("V1")),
            obj("Z2", 3, Some("V1")),
            obj("Z3", 3, Some("V2")),
        ];
        let users = ["a", "b", "c"].iter().map(|u| User::new(*u, *u)).collect();
        PreSocialNetwork::hierarchical(schema(), users, objects, activities, None).unwrap()
    }

    fn names(net: &PreSocialNetwork) -> Vec<(String, String, String)> {
        let mut v: Vec<_> = net
            .activities()
            .iter()
            .map(|a| {
                (
                    a.user.to_string(),
                    a.object.to_string(),
                    render_role(&a.role, net.schema(), &Naming::Initials).unwrap(),
                )
            })
            .collect();
        v.sort();
        v
    }

    #[test]
    fn lift_renames_and_records_origin() {
        let n = net(vec![Activity::new("a", "Z1", "Role", l(3), 5)]);
        let lifted = lift_step(&n, l(3)).unwrap();
        assert_eq!(names(&lifted), [("a".into(), "V1".into(), "ZV Role".into())]);
        assert_eq!(
            lifted.activities()[0].provenance,
            Provenance::Moved { origin: "Z1".into() }
        );
        let twice = lift_step(&lifted, l(2)).unwrap();
        assert_eq!(names(&twice), [("a".into(), "Y1".into(), "ZVY Role".into())]);
        assert_eq!(twice.activities()[0].origin_object().as_str(), "Z1");
    }

    #[test]
    fn lift_of_empty_level_is_identity() {
        let n = net(vec![Activity::new("c", "Y2", "Role", l(1), 0)]);
        assert_eq!(lift_step(&n, l(3)).unwrap(), n);
    }

    #[test]
    fn lift_keeps_multiplicity() {
        let n = net(vec![
            Activity::new("a", "Z1", "Role", l(3), 0),
            Activity::new("b", "Z2", "Role", l(3), 0),
            Activity::new("a", "Z2", "Role", l(3), 0),
        ]);
        let lifted = lift_step(&n, l(3)).unwrap();
        assert_eq!(lifted.activities().len(), 3);
        assert!(lifted.activities().iter().all(|a| a.object.as_str() == "V1"));
    }

    #[test]
    fn lift_out_of_order_is_rejected() {
        let n = net(vec![Activity::new("a", "Z1", "Role", l(3), 0)]);
        assert!(matches!(lift_step(&n, l(2)), Err(FlattenError::OutOfOrder { .. })));
        assert!(matches!(lift_step(&n, l(1)), Err(FlattenError::LiftFromTop(_))));
    }

    #[test]
    fn push_copies_to_children() {
        let n = net(vec![Activity::new("b", "V2", "Role", l(2), 0)]);
        let pushed = push_step(&n, l(2)).unwrap();
        assert_eq!(names(&pushed), [("b".into(), "Z3".into(), "VZ Role".into())]);
    }

    #[test]
    fn push_to_childless_vanishes() {
        let n = net(vec![Activity::new("b", "V3", "Role", l(2), 0)]);
        assert!(push_step(&n, l(2)).unwrap().activities().is_empty());
        assert!(matches!(push_step(&n, l(3)), Err(FlattenError::PushFromBottom(_))));
    }

    #[test]
    fn full_push_multiplies() {
        let n = net(vec![Activity::new("c", "Y1", "Role", l(1), 0)]);
        let flat = flatten(&n, l(3)).unwrap();
        assert_eq!(
            names(&flat),
            [
                ("c".into(), "Z1".into(), "YVZ Role".into()),
                ("c".into(), "Z2".into(), "YVZ Role".into()),
            ]
        );
        assert_eq!(flat.kind(), NetworkKind::Flat { end_level: l(3) });
    }

    #[test]
    fn mixed_flatten_to_middle_level() {
        let n = net(vec![
            Activity::new("a", "Z1", "Role", l(3), 0),
            Activity::new("c", "Y2", "Role", l(1), 0),
            Activity::new("b", "V1", "Role", l(2), 0),
        ]);
        let flat = flatten(&n, l(2)).unwrap();
        assert_eq!(
            names(&flat),
            [
                ("a".into(), "V1".into(), "ZV Role".into()),
                ("b".into(), "V1".into(), "V Role".into()),
                ("c".into(), "V2".into(), "YV Role".into()),
                ("c".into(), "V3".into(), "YV Role".into()),
            ]
        );
    }

    #[test]
    fn lifts_and_pushes_commute() {
        let n = net(vec![
            Activity::new("a", "Z1", "Role", l(3), 1),
            Activity::new("a", "Z3", "Other", l(3), 2),
            Activity::new("c", "Y2", "Role", l(1), 3),
            Activity::new("b", "Y1", "Role", l(1), 4),
        ]);
        let lift_first = push_step(&lift_step(&n, l(3)).unwrap(), l(1)).unwrap();
        let push_first = lift_step(&push_step(&n, l(1)).unwrap(), l(3)).unwrap();
        let mut a = lift_first.activities().to_vec();
        let mut b = push_first.activities().to_vec();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn flatten_flat_network_fails() {
        let n = net(vec![]);
        let flat = flatten(&n, l(1)).unwrap();
        assert!(matches!(flatten(&flat, l(1)), Err(FlattenError::AlreadyFlat)));
        assert!(matches!(
            flatten(&n, Level::new(4).unwrap()),
            Err(FlattenError::UnknownEndLevel { .. })
        ));
    }

    #[test]
    fn plan_splits_levels() {
        let s = LevelSchema::new(["a", "b", "c", "d"]).unwrap();
        let p = FlattenPlan::new(&s, l(2)).unwrap();
        assert_eq!(p.lift_levels, [l(4), l(3)]);
        assert_eq!(p.push_levels, [l(1)]);
    }

    #[test]
    fn render_modes() {
        let s = LevelSchema::new(["forum", "topic", "post"]).unwrap();
        let p = RolePath::new("Is Author", l(3)).extended(l(2)).extended(l(1));
        assert_eq!(render_role(&p, &s, &Naming::Initials).unwrap(), "PTF Is Author");
        assert_eq!(
            render_role(&RolePath::new("Is Creator", l(1)), &s, &Naming::Initials).unwrap(),
            "F Is Creator"
        );
        let full = Naming::FullLabels { separator: ">".into() };
        assert_eq!(render_role(&p, &s, &full).unwrap(), "post>topic>forum Is Author");
    }

    #[test]
    fn ambiguous_initials() {
        let s = LevelSchema::new(["forum", "topic group", "topic"]).unwrap();
        let p = RolePath::new("x", l(1));
        assert!(matches!(
            render_role(&p, &s, &Naming::Initials),
            Err(RenderError::AmbiguousInitials(..))
        ));
        let full = Naming::FullLabels { separator: "/".into() };
        assert_eq!(render_role(&p, &s, &full).unwrap(), "forum x");
        let s = s
            .with_abbreviations(&[("topic group".to_string(), "G".to_string())].into())
            .unwrap();
        assert_eq!(
            render_role(&RolePath::new("x", l(3)).extended(l(2)), &s, &Naming::Initials).unwrap(),
            "TG x"
        );
    }
}
