//! Random hierarchical networks and brute-force oracles shared by the
//! integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use mlsn::model::{Activity, Level, LevelSchema, ObjectNode, PreSocialNetwork, RolePath, User};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const LABELS: [&str; 5] = ["alpha", "beta", "gamma", "delta", "epsilon"];

pub fn level(i: u16) -> Level {
    Level::new(i).unwrap()
}

/// A valid hierarchical network with at most 5 levels, 200 objects and
/// 1,000 activities. Every level has the activity types `a<i>` and `b<i>`.
pub fn random_network(seed: u64) -> PreSocialNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let depth = rng.gen_range(1..=5u16);
    let schema = LevelSchema::new(LABELS[..depth as usize].iter().copied()).unwrap();
    let n_users = rng.gen_range(1..=12);
    let users: Vec<User> = (0..n_users).map(|i| User::new(format!("u{i}"), format!("user {i}"))).collect();
    let max_objects = rng.gen_range(1..=200usize);

    let mut objects: Vec<ObjectNode> = Vec::new();
    let mut by_level: Vec<Vec<usize>> = vec![Vec::new(); depth as usize];
    let roots = rng.gen_range(1..=4usize).min(max_objects);
    for i in 0..roots {
        by_level[0].push(objects.len());
        objects.push(ObjectNode {
            id: format!("r{i}").into(),
            level: level(1),
            parent: None,
            created_at: rng.gen_range(0..100),
            creator: users[rng.gen_range(0..users.len())].id.clone(),
        });
    }
    while objects.len() < max_objects && depth > 1 {
        // pick a parent on any non-bottom level; some objects stay childless
        let l = rng.gen_range(0..depth as usize - 1);
        if by_level[l].is_empty() {
            continue;
        }
        let p = by_level[l][rng.gen_range(0..by_level[l].len())];
        let pid = objects[p].id.clone();
        let id = format!("{pid}.{}", objects.len());
        by_level[l + 1].push(objects.len());
        objects.push(ObjectNode {
            id: id.into(),
            level: level(l as u16 + 2),
            parent: Some(pid),
            created_at: rng.gen_range(0..100),
            creator: users[rng.gen_range(0..users.len())].id.clone(),
        });
    }

    let n_activities = rng.gen_range(0..=1000usize);
    let mut activities = Vec::with_capacity(n_activities);
    for _ in 0..n_activities {
        let o = &objects[rng.gen_range(0..objects.len())];
        let ty = format!("{}{}", if rng.gen_bool(0.5) { "a" } else { "b" }, o.level.index());
        let user = users[rng.gen_range(0..users.len())].id.clone();
        activities.push(Activity::new(user, o.id.clone(), &ty, o.level, rng.gen_range(0..1000)));
    }
    PreSocialNetwork::hierarchical(schema, users, objects, activities, None).unwrap()
}

/// (user, object, role path) triples, one per activity.
pub type Triple = (String, String, Vec<u16>, String);

pub fn triples(net: &PreSocialNetwork) -> Vec<Triple> {
    let mut out: Vec<Triple> = net
        .activities()
        .iter()
        .map(|a| {
            (
                a.user.to_string(),
                a.object.to_string(),
                a.role.path.iter().map(|l| l.index()).collect(),
                a.role.base.to_string(),
            )
        })
        .collect();
    out.sort();
    out
}

fn parents(net: &PreSocialNetwork) -> BTreeMap<String, Option<String>> {
    net.hierarchy()
        .iter()
        .map(|o| (o.id.to_string(), o.parent.as_ref().map(|p| p.to_string())))
        .collect()
}

fn ancestors(parents: &BTreeMap<String, Option<String>>, id: &str) -> Vec<String> {
    let mut out = vec![id.to_string()];
    let mut cur = id.to_string();
    while let Some(Some(p)) = parents.get(&cur) {
        out.push(p.clone());
        cur = p.clone();
    }
    out
}

/// Flattening by membership: an activity on `o` lands on every end-level
/// object that is `o`, an ancestor of `o`, or a descendant of `o`.
pub fn closure_oracle(net: &PreSocialNetwork, end: Level) -> Vec<Triple> {
    let parents = parents(net);
    let end_objects: Vec<&ObjectNode> = net.hierarchy().iter().filter(|o| o.level == end).collect();
    let mut out = Vec::new();
    for a in net.activities() {
        let origin = a.role.origin().index();
        let path: Vec<u16> = if origin >= end.index() {
            (end.index()..=origin).rev().collect()
        } else {
            (origin..=end.index()).collect()
        };
        for e in &end_objects {
            let related = if origin >= end.index() {
                ancestors(&parents, a.object.as_str()).contains(&e.id.to_string())
            } else {
                ancestors(&parents, e.id.as_str()).contains(&a.object.to_string())
            };
            if related {
                out.push((a.user.to_string(), e.id.to_string(), path.clone(), a.role.base.to_string()));
            }
        }
    }
    out.sort();
    out
}

/// Predicted activity count after flattening to `end`, computed by walking
/// every end-level object's ancestor chain.
pub fn predicted_count(net: &PreSocialNetwork, end: Level) -> usize {
    let parents = parents(net);
    let mut below: BTreeMap<String, usize> = BTreeMap::new();
    for o in net.hierarchy().iter().filter(|o| o.level == end) {
        for anc in ancestors(&parents, o.id.as_str()) {
            *below.entry(anc).or_default() += 1;
        }
    }
    net.activities()
        .iter()
        .map(|a| {
            if a.role.origin() < end {
                below.get(a.object.as_str()).copied().unwrap_or(0)
            } else {
                1
            }
        })
        .sum()
}

fn objects_with(net: &PreSocialNetwork, user: &str, role: &RolePath) -> BTreeSet<String> {
    net.activities()
        .iter()
        .filter(|a| a.user.as_str() == user && &a.role == role)
        .map(|a| a.object.to_string())
        .collect()
}

/// `(shared, total)` for equal roles by scanning the activity list.
pub fn oracle_equal(net: &PreSocialNetwork, x: &str, y: &str, role: &RolePath) -> Option<(u64, u64)> {
    let xs = objects_with(net, x, role);
    let ys = objects_with(net, y, role);
    let shared = xs.intersection(&ys).count() as u64;
    (x != y && shared > 0).then_some((shared, xs.len() as u64))
}

/// `(shared, total)` for different roles by scanning the activity list.
pub fn oracle_diff(net: &PreSocialNetwork, x: &str, y: &str, ra: &RolePath, rb: &RolePath) -> Option<(u64, u64)> {
    if x == y {
        return None;
    }
    let xs = objects_with(net, x, ra);
    let mut shared = 0;
    let mut total = 0;
    for o in &xs {
        let performers: BTreeSet<&str> = net
            .activities()
            .iter()
            .filter(|a| a.object.as_str() == o && &a.role == rb)
            .map(|a| a.user.as_str())
            .collect();
        if performers.contains(y) {
            shared += 1;
        }
        if performers.iter().any(|u| *u != x) {
            total += 1;
        }
    }
    (shared > 0).then_some((shared, total))
}

/// The same network with the activity at `index` recorded twice.
pub fn with_duplicate(net: &PreSocialNetwork, index: usize) -> PreSocialNetwork {
    let mut activities = net.activities().to_vec();
    activities.push(activities[index].clone());
    PreSocialNetwork::hierarchical(
        net.schema().clone(),
        net.users().cloned().collect(),
        net.hierarchy().iter().cloned().collect(),
        activities,
        net.declared_observation(),
    )
    .unwrap()
}
