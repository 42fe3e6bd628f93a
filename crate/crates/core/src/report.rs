//! Tables describing a dataset, a flattening run and the resulting layers.
//!
//! Every table renders both as aligned text and as CSV.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::layers::{LayerKey, LayerKind, RoleIndex, SocialNetwork};
use crate::model::{Level, NetworkKind, PreSocialNetwork, UserId};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("expected a hierarchical network before flattening")]
    NotHierarchical,
    #[error("expected a flat network after flattening")]
    NotFlat,
    #[error("'{activity}': expected {expected} activities after flattening, found {found}")]
    CountMismatch { activity: String, expected: u64, found: u64 },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Left-aligned text table with a header rule.
pub fn text_table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(headers.to_vec());
    out += &line(widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(String::as_str).collect());
    for row in rows {
        out += &line(row.iter().map(String::as_str).collect());
    }
    out
}

fn write_csv_rows<W: Write>(w: W, headers: &[&str], rows: &[Vec<String>]) -> Result<(), ReportError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(headers)?;
    for row in rows {
        out.write_record(row)?;
    }
    out.flush()?;
    Ok(())
}

fn percent(part: usize, whole: usize) -> Option<f64> {
    (whole > 0).then(|| 100.0 * part as f64 / whole as f64)
}

fn fmt_percent(p: Option<f64>) -> String {
    p.map_or_else(|| "-".to_string(), |p| format!("{p:.2}%"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InventoryRow {
    pub activity: String,
    /// Label of the level the activity type belongs to.
    pub level: String,
    pub count: u64,
    pub explicit: u64,
    pub inferred: u64,
    /// Distinct users with at least one such activity.
    pub users: usize,
}

/// Activities per type, with user coverage.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActivityInventory {
    pub rows: Vec<InventoryRow>,
    pub registered_users: usize,
    /// Users with at least one activity of any type.
    pub active_users: usize,
}

impl ActivityInventory {
    /// Share of active users among registered users, in percent.
    pub fn active_share(&self) -> Option<f64> {
        percent(self.active_users, self.registered_users)
    }

    /// Share of active users that performed the row's activity, in percent.
    pub fn user_share(&self, row: &InventoryRow) -> Option<f64> {
        percent(row.users, self.active_users)
    }

    pub fn total(&self) -> u64 {
        self.rows.iter().map(|r| r.count).sum()
    }

    const HEADERS: [&'static str; 7] = ["activity", "level", "count", "explicit", "inferred", "users", "user_share"];

    fn cells(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    r.activity.clone(),
                    r.level.clone(),
                    r.count.to_string(),
                    r.explicit.to_string(),
                    r.inferred.to_string(),
                    r.users.to_string(),
                    fmt_percent(self.user_share(r)),
                ]
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = text_table(&Self::HEADERS, &self.cells());
        out += &format!(
            "\nactivities: {}\nregistered users: {}\nactive users: {} ({})\n",
            self.total(),
            self.registered_users,
            self.active_users,
            fmt_percent(self.active_share()),
        );
        out
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), ReportError> {
        write_csv_rows(w, &Self::HEADERS, &self.cells())
    }
}

/// Counts activities per base type, ordered by level then type.
pub fn activity_inventory(net: &PreSocialNetwork) -> ActivityInventory {
    let mut rows: BTreeMap<(Level, &str), (InventoryRow, BTreeSet<&UserId>)> = BTreeMap::new();
    let mut active: BTreeSet<&UserId> = BTreeSet::new();
    for a in net.activities() {
        let origin = a.role.origin();
        let (row, users) = rows.entry((origin, a.activity_type())).or_insert_with(|| {
            (
                InventoryRow {
                    activity: a.activity_type().to_string(),
                    level: net.schema().label(origin).to_string(),
                    count: 0,
                    explicit: 0,
                    inferred: 0,
                    users: 0,
                },
                BTreeSet::new(),
            )
        });
        row.count += 1;
        if a.inferred {
            row.inferred += 1;
        } else {
            row.explicit += 1;
        }
        users.insert(&a.user);
        active.insert(&a.user);
    }
    ActivityInventory {
        rows: rows
            .into_values()
            .map(|(mut row, users)| {
                row.users = users.len();
                row
            })
            .collect(),
        registered_users: net.user_count(),
        active_users: active.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FlatteningRow {
    pub activity: String,
    pub level: String,
    pub before: u64,
    pub after: u64,
    /// The type was pushed down, so its activities were copied.
    pub created: bool,
    /// Activities that disappeared because their object has no descendant
    /// on the end level.
    pub vanished: u64,
}

/// Activity counts before and after flattening to one end level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FlatteningStats {
    pub end_level: String,
    pub rows: Vec<FlatteningRow>,
}

impl FlatteningStats {
    pub fn total_before(&self) -> u64 {
        self.rows.iter().map(|r| r.before).sum()
    }

    pub fn total_after(&self) -> u64 {
        self.rows.iter().map(|r| r.after).sum()
    }

    const HEADERS: [&'static str; 6] = ["activity", "level", "before", "after", "created", "vanished"];

    fn cells(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    r.activity.clone(),
                    r.level.clone(),
                    r.before.to_string(),
                    r.after.to_string(),
                    if r.created { "+" } else { "" }.to_string(),
                    r.vanished.to_string(),
                ]
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("end level: {}\n\n", self.end_level);
        out += &text_table(&Self::HEADERS, &self.cells());
        out += &format!("\ntotal: {} -> {}\n", self.total_before(), self.total_after());
        out
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), ReportError> {
        write_csv_rows(w, &Self::HEADERS, &self.cells())
    }
}

/// Compares a hierarchical network with its flattening.
///
/// Lifted types must keep their count; a pushed activity must turn into one
/// copy per end-level descendant of its object. Any other outcome is an
/// error.
pub fn flattening_stats(before: &PreSocialNetwork, after: &PreSocialNetwork) -> Result<FlatteningStats, ReportError> {
    if before.kind() != NetworkKind::Hierarchical {
        return Err(ReportError::NotHierarchical);
    }
    let NetworkKind::Flat { end_level } = after.kind() else {
        return Err(ReportError::NotFlat);
    };
    let descendants = before.hierarchy().descendant_counts(end_level);
    let mut rows: BTreeMap<(Level, &str), (FlatteningRow, u64)> = BTreeMap::new();
    for a in before.activities() {
        let origin = a.role.origin();
        let (row, expected) = rows.entry((origin, a.activity_type())).or_insert_with(|| {
            (
                FlatteningRow {
                    activity: a.activity_type().to_string(),
                    level: before.schema().label(origin).to_string(),
                    before: 0,
                    after: 0,
                    created: origin < end_level,
                    vanished: 0,
                },
                0,
            )
        });
        row.before += 1;
        if origin < end_level {
            let n = descendants.get(&a.object).copied().unwrap_or(0);
            *expected += n;
            if n == 0 {
                row.vanished += 1;
            }
        } else {
            *expected += 1;
        }
    }
    let mut found: BTreeMap<(Level, &str), u64> = BTreeMap::new();
    for a in after.activities() {
        *found.entry((a.role.origin(), a.activity_type())).or_default() += 1;
    }
    for (key, n) in &found {
        if !rows.contains_key(key) {
            return Err(ReportError::CountMismatch { activity: key.1.to_string(), expected: 0, found: *n });
        }
    }
    let mut out = Vec::new();
    for (key, (mut row, expected)) in rows {
        row.after = found.get(&key).copied().unwrap_or(0);
        if row.after != expected {
            return Err(ReportError::CountMismatch { activity: row.activity, expected, found: row.after });
        }
        out.push(row);
    }
    Ok(FlatteningStats {
        end_level: before.schema().label(end_level).to_string(),
        rows: out,
    })
}

/// Layer key expressed in base activity types, which is how layers are
/// matched across end levels and against the baseline.
pub fn base_key(index: &RoleIndex, key: &LayerKey) -> LayerKey {
    let base = |role: &str| index.role_path(role).map_or_else(|| role.to_string(), |p| p.base.to_string());
    LayerKey::pair(base(&key.role_a), base(&key.role_b))
}

/// One directed relationship between users, identified by base types.
type Relationship = (UserId, UserId, String, String);

fn relationships(sn: &SocialNetwork, index: &RoleIndex) -> BTreeMap<LayerKey, BTreeSet<Relationship>> {
    let base = |role: &str| index.role_path(role).map_or_else(|| role.to_string(), |p| p.base.to_string());
    let mut out: BTreeMap<LayerKey, BTreeSet<Relationship>> = BTreeMap::new();
    for key in sn.layers() {
        out.entry(base_key(index, key)).or_default();
    }
    for e in sn.edges() {
        out.entry(base_key(index, &e.layer)).or_default().insert((
            e.from.clone(),
            e.to.clone(),
            base(&e.from_role),
            base(&e.to_role),
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LayerRow {
    pub layer: LayerKey,
    /// The layer in base activity types.
    pub base: LayerKey,
    /// Distinct ordered user pairs with a positive strength.
    pub relationships: usize,
    /// Pairs absent from the baseline.
    pub new: usize,
    pub moved: usize,
    /// No baseline layer has the same base types.
    pub new_layer: bool,
}

/// Relationship counts per layer for one end level, split into new
/// relationships (found only thanks to flattening) and moved ones (already
/// present without flattening).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LayerStats {
    pub end_level: String,
    pub rows: Vec<LayerRow>,
}

impl LayerStats {
    pub fn relationships(&self) -> usize {
        self.rows.iter().map(|r| r.relationships).sum()
    }

    pub fn new_relationships(&self) -> usize {
        self.rows.iter().map(|r| r.new).sum()
    }

    /// Percentage of new relationships over all layers; `None` without any
    /// relationship.
    pub fn new_percent(&self) -> Option<f64> {
        percent(self.new_relationships(), self.relationships())
    }

    pub fn moved_percent(&self) -> Option<f64> {
        percent(self.relationships() - self.new_relationships(), self.relationships())
    }

    const HEADERS: [&'static str; 6] = ["layer", "base", "relationships", "new", "moved", "layer_status"];

    fn cells(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    r.layer.name(),
                    r.base.name(),
                    r.relationships.to_string(),
                    r.new.to_string(),
                    r.moved.to_string(),
                    if r.new_layer { "new" } else { "moved" }.to_string(),
                ]
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("end level: {}\n\n", self.end_level);
        out += &text_table(&Self::HEADERS, &self.cells());
        out += &format!(
            "\nrelationships: {}\nnew: {} ({})\nmoved: {} ({})\n",
            self.relationships(),
            self.new_relationships(),
            fmt_percent(self.new_percent()),
            self.relationships() - self.new_relationships(),
            fmt_percent(self.moved_percent()),
        );
        out
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), ReportError> {
        write_csv_rows(w, &Self::HEADERS, &self.cells())
    }
}

/// A user pair linked in one layer, and whether the link exists only
/// because of flattening.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct RelationshipStatus {
    pub layer: LayerKey,
    pub from: UserId,
    pub to: UserId,
    pub new: bool,
}

/// Classifies every ordered user pair of each layer of `flat` against the
/// baseline built from the activities already on the end level.
///
/// A pair is moved when the baseline links it with the same base activity
/// types; otherwise it is new.
pub fn classify_relationships(
    flat: &SocialNetwork,
    flat_index: &RoleIndex,
    baseline: &SocialNetwork,
    baseline_index: &RoleIndex,
) -> Vec<RelationshipStatus> {
    let old = relationships(baseline, baseline_index);
    let old_all: BTreeSet<&Relationship> = old.values().flatten().collect();
    let mut out = Vec::new();
    for key in flat.layers() {
        let mut pairs: BTreeMap<(UserId, UserId), bool> = BTreeMap::new();
        for r in relationships_of(flat, flat_index, key) {
            let moved = old_all.contains(&r);
            *pairs.entry((r.0, r.1)).or_insert(false) |= moved;
        }
        out.extend(pairs.into_iter().map(|((from, to), moved)| RelationshipStatus {
            layer: key.clone(),
            from,
            to,
            new: !moved,
        }));
    }
    out
}

/// Per-layer relationship counts for one end level; see
/// [`classify_relationships`].
pub fn layer_stats(
    end_level: &str,
    flat: &SocialNetwork,
    flat_index: &RoleIndex,
    baseline: &SocialNetwork,
    baseline_index: &RoleIndex,
) -> LayerStats {
    let old_layers: BTreeSet<LayerKey> = relationships(baseline, baseline_index).into_keys().collect();
    let statuses = classify_relationships(flat, flat_index, baseline, baseline_index);
    let rows = flat
        .layers()
        .into_iter()
        .map(|key| {
            let base = base_key(flat_index, key);
            let of_layer = statuses.iter().filter(|s| &s.layer == key);
            let (mut new, mut moved) = (0, 0);
            for s in of_layer {
                if s.new {
                    new += 1;
                } else {
                    moved += 1;
                }
            }
            LayerRow {
                layer: key.clone(),
                relationships: new + moved,
                new,
                moved,
                new_layer: !old_layers.contains(&base),
                base,
            }
        })
        .collect();
    LayerStats {
        end_level: end_level.to_string(),
        rows,
    }
}

fn relationships_of(sn: &SocialNetwork, index: &RoleIndex, key: &LayerKey) -> BTreeSet<Relationship> {
    let base = |role: &str| index.role_path(role).map_or_else(|| role.to_string(), |p| p.base.to_string());
    sn.layer_edges(key)
        .into_iter()
        .map(|e| (e.from.clone(), e.to.clone(), base(&e.from_role), base(&e.to_role)))
        .collect()
}

/// Relationship counts of one base layer across end levels, with the ratio
/// of each level's count to the previous level's.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossLevelRow {
    pub base: LayerKey,
    pub counts: Vec<Option<usize>>,
    pub ratios: Vec<Option<f64>>,
}

/// Lines up layer stats of several end levels (shallowest first) by base
/// layer.
pub fn cross_level_ratios(stats: &[LayerStats]) -> Vec<CrossLevelRow> {
    let mut table: BTreeMap<LayerKey, Vec<Option<usize>>> = BTreeMap::new();
    for (i, s) in stats.iter().enumerate() {
        for r in &s.rows {
            table.entry(r.base.clone()).or_insert_with(|| vec![None; stats.len()])[i] = Some(r.relationships);
        }
    }
    table
        .into_iter()
        .map(|(base, counts)| {
            let ratios = counts
                .windows(2)
                .map(|w| match (w[0], w[1]) {
                    (Some(a), Some(b)) if a > 0 => Some(b as f64 / a as f64),
                    _ => None,
                })
                .collect();
            CrossLevelRow { base, counts, ratios }
        })
        .collect()
}

fn cross_level_cells(levels: &[&str], rows: &[CrossLevelRow]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut headers = vec!["layer".to_string(), "kind".to_string()];
    headers.extend(levels.iter().map(|l| l.to_string()));
    headers.extend(levels.windows(2).map(|w| format!("{} / {}", w[1], w[0])));
    let cells = rows
        .iter()
        .map(|r| {
            let mut row = vec![
                r.base.name(),
                match r.base.kind {
                    LayerKind::EqualRoles => "equal",
                    LayerKind::DifferentRoles => "different",
                }
                .to_string(),
            ];
            row.extend(r.counts.iter().map(|c| c.map_or_else(String::new, |c| c.to_string())));
            row.extend(r.ratios.iter().map(|x| x.map_or_else(String::new, |x| format!("{x:.4}"))));
            row
        })
        .collect();
    (headers, cells)
}

pub fn cross_level_text(levels: &[&str], rows: &[CrossLevelRow]) -> String {
    let (headers, cells) = cross_level_cells(levels, rows);
    text_table(&headers.iter().map(String::as_str).collect::<Vec<_>>(), &cells)
}

pub fn write_cross_level_csv<W: Write>(w: W, levels: &[&str], rows: &[CrossLevelRow]) -> Result<(), ReportError> {
    let (headers, cells) = cross_level_cells(levels, rows);
    write_csv_rows(w, &headers.iter().map(String::as_str).collect::<Vec<_>>(), &cells)
}

/// Long-format plot row: relationships within one layer at one end level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlotRow {
    pub end_level: String,
    pub layer: String,
    pub count: usize,
    pub is_new: bool,
}

pub fn plot_rows(stats: &[LayerStats]) -> Vec<PlotRow> {
    stats
        .iter()
        .flat_map(|s| {
            s.rows.iter().map(|r| PlotRow {
                end_level: s.end_level.clone(),
                layer: r.layer.name(),
                count: r.relationships,
                is_new: r.new_layer,
            })
        })
        .collect()
}

/// Writes `end_level,layer,count,is_new` rows.
pub fn write_plot_data<W: Write>(w: W, rows: &[PlotRow]) -> Result<(), ReportError> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    if rows.is_empty() {
        out.write_record(["end_level", "layer", "count", "is_new"])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_plot_data<R: Read>(r: R) -> Result<Vec<PlotRow>, ReportError> {
    csv::Reader::from_reader(r)
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(Into::into)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flatten::{flatten, Naming};
    use crate::layers::{build_sn, LayerSelection, SnModel};
    use crate::synth::case_study_fixture;

    fn lvl(i: u16) -> Level {
        Level::new(i).unwrap()
    }

    fn stats_at(end: u16) -> LayerStats {
        let net = case_study_fixture();
        let flat = flatten(&net, lvl(end)).unwrap();
        let base = net.restricted_to_level(lvl(end));
        let (fi, bi) = (RoleIndex::new(&flat, &Naming::Initials).unwrap(), RoleIndex::new(&base, &Naming::Initials).unwrap());
        let fsn = build_sn(&fi, &LayerSelection::All, SnModel::NGraph).unwrap();
        let bsn = build_sn(&bi, &LayerSelection::All, SnModel::NGraph).unwrap();
        layer_stats(net.schema().label(lvl(end)), &fsn, &fi, &bsn, &bi)
    }

    #[test]
    fn fixture_inventory() {
        let inv = activity_inventory(&case_study_fixture());
        let authoring = inv.rows.iter().find(|r| r.activity == "Is Author").unwrap();
        assert_eq!((authoring.count, authoring.users), (6, 4));
        assert_eq!(inv.active_users, 5);
        assert_eq!(inv.total(), 16);
        assert!(inv.to_text().contains("Is Commentator"));
    }

    #[test]
    fn empty_inventory() {
        let net = case_study_fixture();
        let empty = net.restricted_to_level(lvl(1)).restricted_to_level(lvl(2));
        let inv = activity_inventory(&empty);
        assert!(inv.rows.is_empty());
        assert_eq!(inv.active_share(), Some(0.0));
    }

    #[test]
    fn forum_flattening_conserves() {
        let net = case_study_fixture();
        let stats = flattening_stats(&net, &flatten(&net, lvl(1)).unwrap()).unwrap();
        assert!(stats.rows.iter().all(|r| r.before == r.after && !r.created));
    }

    #[test]
    fn post_flattening_multiplies_creation() {
        let net = case_study_fixture();
        let stats = flattening_stats(&net, &flatten(&net, lvl(3)).unwrap()).unwrap();
        let creator = stats.rows.iter().find(|r| r.activity == "Is Creator").unwrap();
        assert_eq!((creator.before, creator.after, creator.created), (2, 6, true));
        let moderator = stats.rows.iter().find(|r| r.activity == "Is Moderator").unwrap();
        assert_eq!((moderator.before, moderator.after), (4, 6));
    }

    #[test]
    fn mismatched_networks_rejected() {
        let net = case_study_fixture();
        let other = flatten(&net, lvl(2)).unwrap();
        assert!(matches!(
            flattening_stats(&net, &net.restricted_to_level(lvl(1))),
            Err(ReportError::CountMismatch { .. })
        ));
        assert!(matches!(flattening_stats(&other, &other), Err(ReportError::NotHierarchical)));
    }

    #[test]
    fn forum_level_relationships_are_all_new() {
        let stats = stats_at(1);
        assert_eq!(stats.new_percent(), Some(100.0));
        for r in &stats.rows {
            assert_eq!(r.new + r.moved, r.relationships);
        }
    }

    #[test]
    fn post_level_authoring_is_moved() {
        let stats = stats_at(3);
        let row = stats
            .rows
            .iter()
            .find(|r| r.base == LayerKey::pair("Is Author", "Is Commentator"))
            .unwrap();
        assert!(!row.new_layer);
        assert_eq!(row.new, 0);
        let p = stats.new_percent().unwrap();
        assert!((0.0..=100.0).contains(&p));
    }

    #[test]
    fn cross_level_lines_up_base_layers() {
        let all = [stats_at(1), stats_at(2), stats_at(3)];
        let rows = cross_level_ratios(&all);
        let author = rows.iter().find(|r| r.base == LayerKey::equal("Is Author"));
        assert!(author.is_some_and(|r| r.counts.len() == 3 && r.ratios.len() == 2));
        let text = cross_level_text(&["forum", "topic", "post"], &rows);
        assert!(text.contains("topic / forum"));
    }

    #[test]
    fn plot_data_round_trip() {
        let all = [stats_at(1), stats_at(2), stats_at(3)];
        let rows = plot_rows(&all);
        assert_eq!(rows.len(), all.iter().map(|s| s.rows.len()).sum::<usize>());
        let mut buf = Vec::new();
        write_plot_data(&mut buf, &rows).unwrap();
        assert!(buf.starts_with(b"end_level,layer,count,is_new\n"));
        assert_eq!(read_plot_data(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn text_table_aligns() {
        let t = text_table(&["a", "bb"], &[vec!["xxx".into(), "y".into()]]);
        assert_eq!(t, "a    bb\n---  --\nxxx  y\n");
    }
}
