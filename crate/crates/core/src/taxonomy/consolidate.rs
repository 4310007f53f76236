use std::collections::{BTreeMap, BTreeSet};
use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{AttributeEntry, CandidateKind, Taxonomy, TaxonomyError};
use crate::corpus::Artifact;

/// Lowercase alphanumerics only: "Wi-Fi", "WiFi" and "wifi" share a key.
pub fn normalize_key(s: &str) -> String {
    s.chars().filter(|c| c.is_alphanumeric()).flat_map(char::to_lowercase).collect()
}

/// Distinct raw candidate strings per kind, pooled over all batches.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub attributes: BTreeSet<String>,
    pub features: BTreeSet<String>,
}

impl CandidateSet {
    pub fn add(&mut self, kind: CandidateKind, names: impl IntoIterator<Item = String>) {
        let set = match kind {
            CandidateKind::Attribute => &mut self.attributes,
            CandidateKind::Feature => &mut self.features,
        };
        set.extend(names.into_iter().map(|n| n.trim().to_string()).filter(|n| !n.is_empty()));
    }

    fn of(&self, kind: CandidateKind) -> &BTreeSet<String> {
        match kind {
            CandidateKind::Attribute => &self.attributes,
            CandidateKind::Feature => &self.features,
        }
    }

    pub fn len(&self) -> usize {
        self.attributes.len() + self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Artifact for CandidateSet {
    const KIND: &'static str = "candidate_set";
}

/// Raw spellings merged under one canonical name. The canonical name is
/// itself a member.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeGroup {
    pub canonical: String,
    pub kind: CandidateKind,
    #[serde(default)]
    pub members: BTreeSet<String>,
    /// For features: the attributes the feature is listed under.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attach_to: Vec<String>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discarded {
    pub kind: CandidateKind,
    pub candidate: String,
    pub note: String,
}

/// Human-authored consolidation decisions. Group order fixes the order of
/// attributes and of features within an attribute.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeMap {
    pub groups: Vec<MergeGroup>,
    #[serde(default)]
    pub discarded: Vec<Discarded>,
}

impl Artifact for MergeMap {
    const KIND: &'static str = "merge_map";
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "resolution", rename_all = "snake_case")]
pub enum Resolution {
    Merged { canonical: String },
    Discarded { note: String },
    Unmapped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub kind: CandidateKind,
    pub candidate: String,
    #[serde(flatten)]
    pub resolution: Resolution,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Consolidated {
    pub taxonomy: Taxonomy,
    pub trace: Vec<TraceEntry>,
}

impl Consolidated {
    pub fn unmapped(&self) -> impl Iterator<Item = &TraceEntry> {
        self.trace.iter().filter(|t| t.resolution == Resolution::Unmapped)
    }

    /// Raw candidates resolved to each canonical name.
    pub fn group_sizes(&self) -> BTreeMap<(CandidateKind, String), usize> {
        let mut out = BTreeMap::new();
        for t in &self.trace {
            if let Resolution::Merged { canonical } = &t.resolution {
                *out.entry((t.kind, canonical.clone())).or_default() += 1;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorksheetRow {
    pub group: usize,
    pub kind: CandidateKind,
    pub candidate: String,
    pub canonical: String,
    pub attach_to: String,
    pub note: String,
}

/// Candidates grouped by spelling similarity, for a human to fill in the
/// canonical and attach-to columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Worksheet {
    pub rows: Vec<WorksheetRow>,
}

pub enum Consolidation {
    Taxonomy(Consolidated),
    Worksheet(Worksheet),
}

#[derive(Debug, Error)]
pub enum ConsolidateError {
    #[error("merge map is not a partition: {}", .0.join("; "))]
    Partition(Vec<String>),
    #[error("feature `{feature}` attached to unknown attribute `{attribute}`")]
    UnknownAttachment { feature: String, attribute: String },
    #[error("feature group `{0}` has no attach_to entry")]
    Unattached(String),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error("worksheet: {0}")]
    Worksheet(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn index(map: &MergeMap) -> Result<BTreeMap<(CandidateKind, String), Resolution>, ConsolidateError> {
    let mut idx: BTreeMap<(CandidateKind, String), (String, Resolution)> = BTreeMap::new();
    let mut collisions = Vec::new();
    let mut claim = |kind, raw: &str, res: Resolution, owner: String| {
        let key = (kind, normalize_key(raw));
        match idx.get(&key) {
            Some((prev, prev_res)) if *prev_res != res => collisions.push(format!(
                "`{raw}` claimed by both {prev} and {owner}"
            )),
            Some(_) => {}
            None => {
                idx.insert(key, (owner, res));
            }
        }
    };
    for g in &map.groups {
        let res = Resolution::Merged { canonical: g.canonical.clone() };
        let owner = format!("`{}`", g.canonical);
        claim(g.kind, &g.canonical, res.clone(), owner.clone());
        for m in &g.members {
            claim(g.kind, m, res.clone(), owner.clone());
        }
    }
    for d in &map.discarded {
        claim(d.kind, &d.candidate, Resolution::Discarded { note: d.note.clone() }, "the discard list".into());
    }
    if collisions.is_empty() {
        Ok(idx.into_iter().map(|(k, (_, r))| (k, r)).collect())
    } else {
        Err(ConsolidateError::Partition(collisions))
    }
}

/// Applies a merge map to the pooled candidates. Without a map, returns a
/// worksheet instead of a taxonomy.
pub fn consolidate(
    candidates: &CandidateSet,
    merge_map: Option<&MergeMap>,
) -> Result<Consolidation, ConsolidateError> {
    let Some(map) = merge_map.filter(|m| !m.groups.is_empty()) else {
        return Ok(Consolidation::Worksheet(worksheet(candidates)));
    };
    let idx = index(map)?;

    let mut trace = Vec::new();
    for kind in [CandidateKind::Attribute, CandidateKind::Feature] {
        for c in candidates.of(kind) {
            let resolution = idx
                .get(&(kind, normalize_key(c)))
                .cloned()
                .unwrap_or(Resolution::Unmapped);
            trace.push(TraceEntry { kind, candidate: c.clone(), resolution });
        }
    }

    let mut attributes: Vec<AttributeEntry> = map
        .groups
        .iter()
        .filter(|g| g.kind == CandidateKind::Attribute)
        .map(|g| AttributeEntry::new(g.canonical.clone(), Vec::<String>::new()))
        .collect();
    for g in map.groups.iter().filter(|g| g.kind == CandidateKind::Feature) {
        if g.attach_to.is_empty() {
            return Err(ConsolidateError::Unattached(g.canonical.clone()));
        }
        for a in &g.attach_to {
            let entry = attributes.iter_mut().find(|e| e.name == *a).ok_or_else(|| {
                ConsolidateError::UnknownAttachment { feature: g.canonical.clone(), attribute: a.clone() }
            })?;
            entry.features.push(g.canonical.clone());
        }
    }
    let taxonomy = Taxonomy::new(attributes)?;
    Ok(Consolidation::Taxonomy(Consolidated { taxonomy, trace }))
}

fn words(s: &str) -> BTreeSet<String> {
    s.split(|c: char| !c.is_alphanumeric())
        .map(str::to_lowercase)
        .filter(|w| !w.is_empty() && !matches!(w.as_str(), "and" | "of" | "the" | "a"))
        .collect()
}

fn similar(a: &str, b: &str) -> bool {
    if normalize_key(a) == normalize_key(b) {
        return true;
    }
    let (wa, wb) = (words(a), words(b));
    let inter = wa.intersection(&wb).count();
    let union = wa.union(&wb).count();
    union > 0 && inter * 2 >= union
}

fn worksheet(candidates: &CandidateSet) -> Worksheet {
    let mut rows = Vec::new();
    let mut group = 0;
    for kind in [CandidateKind::Attribute, CandidateKind::Feature] {
        let items: Vec<&String> = candidates.of(kind).iter().collect();
        let mut parent: Vec<usize> = (0..items.len()).collect();
        fn find(p: &mut [usize], i: usize) -> usize {
            let mut r = i;
            while p[r] != r {
                r = p[r];
            }
            p[i] = r;
            r
        }
        for i in 0..items.len() {
            for j in i + 1..items.len() {
                if similar(items[i], items[j]) {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
        let mut groups: BTreeMap<usize, Vec<&String>> = BTreeMap::new();
        for (i, item) in items.iter().enumerate() {
            let root = find(&mut parent, i);
            groups.entry(root).or_default().push(*item);
        }
        for members in groups.values() {
            group += 1;
            for m in members {
                rows.push(WorksheetRow {
                    group,
                    kind,
                    candidate: (*m).clone(),
                    canonical: members[0].clone(),
                    attach_to: String::new(),
                    note: String::new(),
                });
            }
        }
    }
    Worksheet { rows }
}

impl Worksheet {
    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<(), ConsolidateError> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rows {
            out.serialize(r).map_err(|e| ConsolidateError::Worksheet(e.to_string()))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: io::Read>(r: R) -> Result<Self, ConsolidateError> {
        let mut rd = csv::Reader::from_reader(r);
        let rows = rd
            .deserialize()
            .collect::<Result<Vec<WorksheetRow>, _>>()
            .map_err(|e| ConsolidateError::Worksheet(e.to_string()))?;
        Ok(Self { rows })
    }

    /// Reads back an edited worksheet. Rows with an empty canonical column
    /// are discarded with their note; `attach_to` lists attributes separated
    /// by `|`. Groups keep the order of their first row.
    pub fn to_merge_map(&self) -> MergeMap {
        let mut map = MergeMap::default();
        for r in &self.rows {
            let canonical = r.canonical.trim();
            if canonical.is_empty() {
                map.discarded.push(Discarded {
                    kind: r.kind,
                    candidate: r.candidate.clone(),
                    note: r.note.clone(),
                });
                continue;
            }
            let attach: Vec<String> = r
                .attach_to
                .split('|')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect();
            let pos = map.groups.iter().position(|g| g.kind == r.kind && g.canonical == canonical);
            let g = match pos {
                Some(i) => &mut map.groups[i],
                None => {
                    map.groups.push(MergeGroup {
                        canonical: canonical.to_string(),
                        kind: r.kind,
                        members: BTreeSet::new(),
                        attach_to: Vec::new(),
                        note: String::new(),
                    });
                    map.groups.last_mut().expect("just pushed")
                }
            };
            g.members.insert(r.candidate.clone());
            for a in attach {
                if !g.attach_to.contains(&a) {
                    g.attach_to.push(a);
                }
            }
            if !r.note.is_empty() && g.note.is_empty() {
                g.note = r.note.clone();
            }
        }
        map
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(attrs: &[&str], feats: &[&str]) -> CandidateSet {
        let mut s = CandidateSet::default();
        s.add(CandidateKind::Attribute, attrs.iter().map(|x| x.to_string()));
        s.add(CandidateKind::Feature, feats.iter().map(|x| x.to_string()));
        s
    }

    fn group(kind: CandidateKind, canonical: &str, members: &[&str], attach: &[&str]) -> MergeGroup {
        MergeGroup {
            canonical: canonical.into(),
            kind,
            members: members.iter().map(|s| s.to_string()).collect(),
            attach_to: attach.iter().map(|s| s.to_string()).collect(),
            note: String::new(),
        }
    }

    fn wifi_map() -> MergeMap {
        MergeMap {
            groups: vec![
                group(CandidateKind::Attribute, "Digital Services & Technology", &["Technology"], &[]),
                group(
                    CandidateKind::Feature,
                    "Wifi Connectivity & Power Outlets",
                    &["wifi", "outlets"],
                    &["Digital Services & Technology"],
                ),
            ],
            discarded: vec![Discarded {
                kind: CandidateKind::Feature,
                candidate: "Barista named Joe".into(),
                note: "not a store feature".into(),
            }],
        }
    }

    fn taxonomy_of(c: Consolidation) -> Consolidated {
        match c {
            Consolidation::Taxonomy(t) => t,
            Consolidation::Worksheet(_) => panic!("expected taxonomy"),
        }
    }

    #[test]
    fn spelling_variants_merge() {
        let cands = set(&["Technology"], &["WiFi", "Wi-Fi", "wifi", "Barista named Joe"]);
        let out = taxonomy_of(consolidate(&cands, Some(&wifi_map())).unwrap());
        assert_eq!(
            out.taxonomy.features_of("Digital Services & Technology").unwrap(),
            ["Wifi Connectivity & Power Outlets"]
        );
        let sizes = out.group_sizes();
        assert_eq!(sizes[&(CandidateKind::Feature, "Wifi Connectivity & Power Outlets".into())], 3);
        let merged: usize = sizes.values().sum();
        let discarded = out
            .trace
            .iter()
            .filter(|t| matches!(t.resolution, Resolution::Discarded { .. }))
            .count();
        assert_eq!(cands.len(), merged + discarded);
        assert_eq!(out.unmapped().count(), 0);
    }

    #[test]
    fn unmapped_reported() {
        let cands = set(&["Technology"], &["wifi", "Music"]);
        let out = taxonomy_of(consolidate(&cands, Some(&wifi_map())).unwrap());
        let un: Vec<_> = out.unmapped().map(|t| t.candidate.as_str()).collect();
        assert_eq!(un, ["Music"]);
    }

    #[test]
    fn no_map_gives_worksheet() {
        let cands = set(&[], &["WiFi", "Wi-Fi", "Free wifi", "Parking"]);
        let Consolidation::Worksheet(ws) = consolidate(&cands, None).unwrap() else {
            panic!("expected worksheet");
        };
        let wifi_groups: BTreeSet<usize> =
            ws.rows.iter().filter(|r| r.candidate.to_lowercase().contains("wi")).map(|r| r.group).collect();
        assert_eq!(wifi_groups.len(), 1);
        let parking = ws.rows.iter().find(|r| r.candidate == "Parking").unwrap();
        assert!(!wifi_groups.contains(&parking.group));
        assert!(matches!(consolidate(&cands, Some(&MergeMap::default())), Ok(Consolidation::Worksheet(_))));
    }

    #[test]
    fn collision_is_partition_error() {
        let mut map = wifi_map();
        map.groups.push(group(CandidateKind::Feature, "Internet", &["Wi-Fi"], &["Digital Services & Technology"]));
        match consolidate(&set(&[], &[]), Some(&map)) {
            Err(ConsolidateError::Partition(c)) => assert!(c[0].contains("Wi-Fi")),
            _ => panic!("expected partition error"),
        }
    }

    #[test]
    fn idempotent() {
        let cands = set(&["Technology"], &["WiFi", "wifi"]);
        let once = taxonomy_of(consolidate(&cands, Some(&wifi_map())).unwrap()).taxonomy;
        let mut again_c = CandidateSet::default();
        again_c.add(CandidateKind::Attribute, once.attribute_names().map(str::to_string));
        again_c.add(CandidateKind::Feature, once.attributes().iter().flat_map(|a| a.features.clone()));
        let twice = taxonomy_of(consolidate(&again_c, Some(&wifi_map())).unwrap());
        assert_eq!(twice.taxonomy, once);
        assert_eq!(twice.unmapped().count(), 0);
    }

    #[test]
    fn worksheet_round_trip_to_merge_map() {
        let cands = set(&["Technology"], &["WiFi", "Wi-Fi", "junk"]);
        let Consolidation::Worksheet(mut ws) = consolidate(&cands, None).unwrap() else { panic!() };
        for r in &mut ws.rows {
            match r.candidate.as_str() {
                "Technology" => r.canonical = "Digital Services & Technology".into(),
                "junk" => {
                    r.canonical.clear();
                    r.note = "noise".into();
                }
                _ => {
                    r.canonical = "Wifi Connectivity & Power Outlets".into();
                    r.attach_to = "Digital Services & Technology".into();
                }
            }
        }
        let mut buf = Vec::new();
        ws.write_csv(&mut buf).unwrap();
        let map = Worksheet::read_csv(buf.as_slice()).unwrap().to_merge_map();
        assert_eq!(map.discarded.len(), 1);
        let out = taxonomy_of(consolidate(&cands, Some(&map)).unwrap());
        assert_eq!(out.taxonomy.len(), 1);
        assert_eq!(out.unmapped().count(), 0);
    }
}
