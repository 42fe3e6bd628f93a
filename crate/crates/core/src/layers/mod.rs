//! Social network layers and relationship strengths.
//!
//! A layer is induced by a pair of roles. With equal roles `a` the strength
//! from `x` to `y` is
//!
//! ```text
//! s(x→y) = |objects where x and y both did a| / |objects where x did a|
//! ```
//!
//! With different roles `a ≠ b` it is
//!
//! ```text
//! s(x→y) = |objects where x did a and y did b|
//!        / |objects where x did a and some other user did b|
//! ```
//!
//! Both numerators and denominators count distinct objects, so repeating an
//! activity record changes nothing.

mod windows;

pub use windows::{
    linear_weights, make_windows, windowed_edges, windowed_strength, TimeWindowSpec, Window,
    WindowError, WindowMode,
};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, Write};

use serde::Serialize;
use thiserror::Error;

use crate::flatten::{render_role, Naming, RenderError};
use crate::model::{Activity, NetworkKind, ObjectId, PreSocialNetwork, RolePath, UserId};

#[derive(Debug, Error)]
pub enum LayerError {
    #[error("social networks are extracted from flat networks only")]
    NotFlat,
    #[error("no layers selected")]
    EmptySelection,
    #[error("unknown layer '{0}'")]
    UnknownLayer(String),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error("edge list line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum LayerKind {
    EqualRoles,
    DifferentRoles,
}

/// Names a layer by its role pair. For different roles the pair is stored in
/// lexicographic order; direction lives on the edges.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct LayerKey {
    pub role_a: String,
    pub role_b: String,
    pub kind: LayerKind,
}

impl LayerKey {
    pub fn equal(role: impl Into<String>) -> Self {
        let role = role.into();
        LayerKey {
            role_a: role.clone(),
            role_b: role,
            kind: LayerKind::EqualRoles,
        }
    }

    /// Canonical key for a role pair; falls back to [`LayerKey::equal`] when
    /// both roles match.
    pub fn pair(a: impl Into<String>, b: impl Into<String>) -> Self {
        let (a, b) = (a.into(), b.into());
        if a == b {
            return LayerKey::equal(a);
        }
        let (role_a, role_b) = if a < b { (a, b) } else { (b, a) };
        LayerKey {
            role_a,
            role_b,
            kind: LayerKind::DifferentRoles,
        }
    }

    pub fn name(&self) -> String {
        format!("{} - {}", self.role_a, self.role_b)
    }
}

impl fmt::Display for LayerKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} - {}", self.role_a, self.role_b)
    }
}

/// Exact strength `shared / total`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Strength {
    pub shared: u64,
    pub total: u64,
}

impl Strength {
    pub fn value(self) -> f64 {
        self.shared as f64 / self.total as f64
    }
}

impl fmt::Display for Strength {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.shared, self.total)
    }
}

/// Directed edge of a layer. `from_role` is the role `from` played on the
/// shared objects.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub from: UserId,
    pub to: UserId,
    pub from_role: String,
    pub to_role: String,
    pub strength: Strength,
    pub layer: LayerKey,
}

impl Edge {
    /// Number of shared distinct objects.
    pub fn support(&self) -> u64 {
        self.strength.shared
    }

    /// Layer label with direction, `from_role -> to_role`.
    pub fn directed_label(&self) -> String {
        format!("{} -> {}", self.from_role, self.to_role)
    }
}

#[derive(Debug, Default, Clone)]
struct RoleEntry {
    path: Option<RolePath>,
    by_user: BTreeMap<UserId, BTreeSet<ObjectId>>,
    by_object: BTreeMap<ObjectId, BTreeSet<UserId>>,
}

/// Who did what on which object in a flat network, keyed by rendered role.
#[derive(Debug, Clone, Default)]
pub struct RoleIndex {
    roles: BTreeMap<String, RoleEntry>,
}

impl RoleIndex {
    /// Indexes every activity of a flat network.
    pub fn new(net: &PreSocialNetwork, naming: &Naming) -> Result<Self, LayerError> {
        Self::filtered(net, naming, |_| true)
    }

    /// Indexes the activities accepted by `keep`.
    pub fn filtered(
        net: &PreSocialNetwork,
        naming: &Naming,
        keep: impl Fn(&Activity) -> bool,
    ) -> Result<Self, LayerError> {
        if !matches!(net.kind(), NetworkKind::Flat { .. }) {
            return Err(LayerError::NotFlat);
        }
        let mut names: HashMap<&RolePath, String> = HashMap::new();
        let mut roles: BTreeMap<String, RoleEntry> = BTreeMap::new();
        for a in net.activities().iter().filter(|a| keep(a)) {
            let name = match names.get(&a.role) {
                Some(n) => n.clone(),
                None => {
                    let n = render_role(&a.role, net.schema(), naming)?;
                    names.insert(&a.role, n.clone());
                    n
                }
            };
            let entry = roles.entry(name).or_default();
            entry.path.get_or_insert_with(|| a.role.clone());
            entry.by_user.entry(a.user.clone()).or_default().insert(a.object.clone());
            entry.by_object.entry(a.object.clone()).or_default().insert(a.user.clone());
        }
        Ok(RoleIndex { roles })
    }

    /// Rendered role names, sorted.
    pub fn roles(&self) -> impl Iterator<Item = &str> {
        self.roles.keys().map(String::as_str)
    }

    pub fn role_path(&self, role: &str) -> Option<&RolePath> {
        self.roles.get(role).and_then(|e| e.path.as_ref())
    }

    /// Distinct objects on which `user` performed `role`.
    pub fn objects_of(&self, user: &UserId, role: &str) -> Option<&BTreeSet<ObjectId>> {
        self.roles.get(role).and_then(|e| e.by_user.get(user))
    }

    fn performers(&self, role: &str, object: &ObjectId) -> Option<&BTreeSet<UserId>> {
        self.roles.get(role).and_then(|e| e.by_object.get(object))
    }

    /// Strength from `x` to `y` in the equal-role layer of `role`; `None` when
    /// they share no object.
    pub fn strength_equal(&self, x: &UserId, y: &UserId, role: &str) -> Option<Strength> {
        if x == y {
            return None;
        }
        let xs = self.objects_of(x, role)?;
        let ys = self.objects_of(y, role)?;
        let shared = xs.intersection(ys).count() as u64;
        (shared > 0).then_some(Strength {
            shared,
            total: xs.len() as u64,
        })
    }

    /// Strength from `x` (doing `role_x`) to `y` (doing `role_y`); `None`
    /// when `y` did `role_y` on none of `x`'s `role_x` objects.
    pub fn strength_diff(&self, x: &UserId, y: &UserId, role_x: &str, role_y: &str) -> Option<Strength> {
        if x == y || role_x == role_y {
            return None;
        }
        let xs = self.objects_of(x, role_x)?;
        let mut shared = 0;
        let mut total = 0;
        for o in xs {
            let Some(others) = self.performers(role_y, o) else { continue };
            if others.contains(y) {
                shared += 1;
            }
            if others.iter().any(|u| u != x) {
                total += 1;
            }
        }
        (shared > 0).then_some(Strength { shared, total })
    }

    /// Every layer with at least one potential edge.
    pub fn enumerate_layers(&self) -> BTreeSet<LayerKey> {
        let mut keys = BTreeSet::new();
        let names: Vec<&String> = self.roles.keys().collect();
        for (i, a) in names.iter().enumerate() {
            let ea = &self.roles[*a];
            if ea.by_object.values().any(|users| users.len() >= 2) {
                keys.insert(LayerKey::equal(a.as_str()));
            }
            for b in &names[i + 1..] {
                let eb = &self.roles[*b];
                let meets = ea.by_object.iter().any(|(o, ua)| {
                    eb.by_object
                        .get(o)
                        .is_some_and(|ub| ua.union(ub).nth(1).is_some())
                });
                if meets {
                    keys.insert(LayerKey::pair(a.as_str(), b.as_str()));
                }
            }
        }
        keys
    }

    fn equal_edges(&self, key: &LayerKey) -> Vec<Edge> {
        let Some(entry) = self.roles.get(&key.role_a) else { return Vec::new() };
        let mut shared: HashMap<(&UserId, &UserId), u64> = HashMap::new();
        for users in entry.by_object.values() {
            for x in users {
                for y in users {
                    if x != y {
                        *shared.entry((x, y)).or_default() += 1;
                    }
                }
            }
        }
        let mut edges: Vec<Edge> = shared
            .into_iter()
            .map(|((x, y), n)| Edge {
                from: x.clone(),
                to: y.clone(),
                from_role: key.role_a.clone(),
                to_role: key.role_a.clone(),
                strength: Strength {
                    shared: n,
                    total: entry.by_user[x].len() as u64,
                },
                layer: key.clone(),
            })
            .collect();
        edges.sort_by(|p, q| (&p.from, &p.to).cmp(&(&q.from, &q.to)));
        edges
    }

    fn different_edges(&self, key: &LayerKey) -> Vec<Edge> {
        let mut edges = self.directed_edges(key, &key.role_a, &key.role_b);
        edges.extend(self.directed_edges(key, &key.role_b, &key.role_a));
        edges.sort_by(|p, q| {
            (&p.from, &p.to, &p.from_role).cmp(&(&q.from, &q.to, &q.from_role))
        });
        edges
    }

    /// Edges from performers of `role_x` to performers of `role_y`.
    fn directed_edges(&self, key: &LayerKey, role_x: &str, role_y: &str) -> Vec<Edge> {
        let (Some(ex), Some(ey)) = (self.roles.get(role_x), self.roles.get(role_y)) else {
            return Vec::new();
        };
        let mut shared: HashMap<(&UserId, &UserId), u64> = HashMap::new();
        let mut totals: HashMap<&UserId, u64> = HashMap::new();
        for (o, xs) in &ex.by_object {
            let Some(ys) = ey.by_object.get(o) else { continue };
            for x in xs {
                let mut any_other = false;
                for y in ys {
                    if x != y {
                        any_other = true;
                        *shared.entry((x, y)).or_default() += 1;
                    }
                }
                if any_other {
                    *totals.entry(x).or_default() += 1;
                }
            }
        }
        shared
            .into_iter()
            .map(|((x, y), n)| Edge {
                from: x.clone(),
                to: y.clone(),
                from_role: role_x.to_string(),
                to_role: role_y.to_string(),
                strength: Strength {
                    shared: n,
                    total: totals[x],
                },
                layer: key.clone(),
            })
            .collect()
    }

    /// All positive-strength edges of one layer, sorted by (from, to, from_role).
    pub fn layer_edges(&self, key: &LayerKey) -> Vec<Edge> {
        match key.kind {
            LayerKind::EqualRoles => self.equal_edges(key),
            LayerKind::DifferentRoles => self.different_edges(key),
        }
    }
}

/// Layers to extract.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerSelection {
    All,
    /// Role pairs. Each pair matches a layer whose rendered roles or whose
    /// base activity types equal it, in either order.
    Pairs(Vec<(String, String)>),
}

impl LayerSelection {
    fn resolve(&self, index: &RoleIndex) -> Result<Vec<LayerKey>, LayerError> {
        let available = index.enumerate_layers();
        match self {
            LayerSelection::All => Ok(available.into_iter().collect()),
            LayerSelection::Pairs(pairs) if pairs.is_empty() => Err(LayerError::EmptySelection),
            LayerSelection::Pairs(pairs) => {
                let base = |role: &str| index.role_path(role).map(|p| p.base.to_string());
                let mut out = BTreeSet::new();
                for (a, b) in pairs {
                    let wanted = LayerKey::pair(a.as_str(), b.as_str());
                    let found = available.iter().find(|k| {
                        **k == wanted || {
                            let (ba, bb) = (base(&k.role_a), base(&k.role_b));
                            matches!((ba, bb), (Some(ba), Some(bb))
                                if LayerKey::pair(ba.as_str(), bb.as_str()) == wanted)
                        }
                    });
                    match found {
                        Some(k) => {
                            out.insert(k.clone());
                        }
                        None => return Err(LayerError::UnknownLayer(wanted.name())),
                    }
                }
                Ok(out.into_iter().collect())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SnModel {
    /// One graph per layer.
    #[default]
    NGraph,
    /// One graph, edges labelled by layer.
    MultiGraph,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerGraph {
    pub key: LayerKey,
    pub edges: Vec<Edge>,
}

/// Multi-layered social network in either representation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SocialNetwork {
    NGraph(Vec<LayerGraph>),
    MultiGraph { layers: Vec<LayerKey>, edges: Vec<Edge> },
}

impl SocialNetwork {
    pub fn model(&self) -> SnModel {
        match self {
            SocialNetwork::NGraph(_) => SnModel::NGraph,
            SocialNetwork::MultiGraph { .. } => SnModel::MultiGraph,
        }
    }

    pub fn layers(&self) -> Vec<&LayerKey> {
        match self {
            SocialNetwork::NGraph(gs) => gs.iter().map(|g| &g.key).collect(),
            SocialNetwork::MultiGraph { layers, .. } => layers.iter().collect(),
        }
    }

    pub fn edges(&self) -> Box<dyn Iterator<Item = &Edge> + '_> {
        match self {
            SocialNetwork::NGraph(gs) => Box::new(gs.iter().flat_map(|g| g.edges.iter())),
            SocialNetwork::MultiGraph { edges, .. } => Box::new(edges.iter()),
        }
    }

    pub fn layer_edges(&self, key: &LayerKey) -> Vec<&Edge> {
        self.edges().filter(|e| &e.layer == key).collect()
    }

    pub fn into_multigraph(self) -> SocialNetwork {
        match self {
            SocialNetwork::NGraph(gs) => {
                let layers = gs.iter().map(|g| g.key.clone()).collect();
                let edges = gs.into_iter().flat_map(|g| g.edges).collect();
                SocialNetwork::MultiGraph { layers, edges }
            }
            m => m,
        }
    }

    pub fn into_ngraph(self) -> SocialNetwork {
        match self {
            SocialNetwork::MultiGraph { layers, edges } => {
                let mut graphs: Vec<LayerGraph> = layers
                    .into_iter()
                    .map(|key| LayerGraph { key, edges: Vec::new() })
                    .collect();
                let pos: HashMap<LayerKey, usize> = graphs
                    .iter()
                    .enumerate()
                    .map(|(i, g)| (g.key.clone(), i))
                    .collect();
                for e in edges {
                    let i = pos[&e.layer];
                    graphs[i].edges.push(e);
                }
                SocialNetwork::NGraph(graphs)
            }
            n => n,
        }
    }
}

/// Builds the social network of the selected layers.
pub fn build_sn(index: &RoleIndex, selection: &LayerSelection, model: SnModel) -> Result<SocialNetwork, LayerError> {
    let keys = selection.resolve(index)?;
    let graphs: Vec<LayerGraph> = keys
        .into_iter()
        .map(|key| LayerGraph {
            edges: index.layer_edges(&key),
            key,
        })
        .collect();
    let sn = SocialNetwork::NGraph(graphs);
    Ok(match model {
        SnModel::NGraph => sn,
        SnModel::MultiGraph => sn.into_multigraph(),
    })
}

pub const EDGE_LIST_HEADER: &str = "from_user\tto_user\tstrength\tsupport\tlayer";

/// One parsed edge-list row.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRow {
    pub from: String,
    pub to: String,
    pub strength: f64,
    pub support: u64,
    pub layer: String,
}

impl EdgeRow {
    pub fn from_edge(edge: &Edge) -> Self {
        EdgeRow {
            from: edge.from.to_string(),
            to: edge.to.to_string(),
            strength: edge.strength.value(),
            support: edge.support(),
            layer: edge.directed_label(),
        }
    }
}

/// Writes rows sorted by (layer, from, to). Strengths use the shortest
/// decimal form that parses back to the same `f64`.
pub fn write_edge_list<W: Write>(mut w: W, rows: &[EdgeRow]) -> std::io::Result<()> {
    let mut sorted: Vec<&EdgeRow> = rows.iter().collect();
    sorted.sort_by(|a, b| (&a.layer, &a.from, &a.to).cmp(&(&b.layer, &b.from, &b.to)));
    writeln!(w, "{EDGE_LIST_HEADER}")?;
    for r in sorted {
        writeln!(w, "{}\t{}\t{}\t{}\t{}", r.from, r.to, r.strength, r.support, r.layer)?;
    }
    Ok(())
}

pub fn read_edge_list<R: BufRead>(r: R) -> Result<Vec<EdgeRow>, LayerError> {
    let mut rows = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line != EDGE_LIST_HEADER {
                return Err(LayerError::Parse { line: 1, message: format!("unexpected header '{line}'") });
            }
            continue;
        }
        let parse_err = |message: String| LayerError::Parse { line: i + 1, message };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 5 {
            return Err(parse_err(format!("expected 5 columns, found {}", cols.len())));
        }
        rows.push(EdgeRow {
            from: cols[0].to_string(),
            to: cols[1].to_string(),
            strength: cols[2].parse().map_err(|e| parse_err(format!("strength: {e}")))?,
            support: cols[3].parse().map_err(|e| parse_err(format!("support: {e}")))?,
            layer: cols[4].to_string(),
        });
    }
    Ok(rows)
}
