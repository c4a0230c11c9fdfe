//! Knowledge-base snapshot: entities keyed by machine id, their typed
//! relations and the domain merge map.
//!
//! Snapshot files start with a `#kbsnap v1` header. `#merge SRC DST` lines
//! declare domain merges; every other non-blank line is one JSON entity record.
//! A zero-byte file is an empty snapshot.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SNAPSHOT_HEADER: &str = "#kbsnap v1";
const MERGE_DIRECTIVE: &str = "#merge";

/// `/domain/type` or `/domain/type/property`.
///
/// The derived ordering compares segment by segment, which agrees with the
/// ordering of the serialized strings because `/` sorts below every allowed
/// segment character.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TypePath {
    domain: String,
    type_name: String,
    property: Option<String>,
}

fn valid_segment(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

impl TypePath {
    pub fn new(domain: &str, type_name: &str) -> Result<Self> {
        Self::build(domain, type_name, None)
    }

    pub fn with_property(domain: &str, type_name: &str, property: &str) -> Result<Self> {
        Self::build(domain, type_name, Some(property))
    }

    fn build(domain: &str, type_name: &str, property: Option<&str>) -> Result<Self> {
        let shown = match property {
            Some(p) => format!("/{domain}/{type_name}/{p}"),
            None => format!("/{domain}/{type_name}"),
        };
        let all_valid = valid_segment(domain)
            && valid_segment(type_name)
            && property.is_none_or(valid_segment);
        if !all_valid {
            return Err(Error::TypePath {
                path: shown,
                reason: "segments must be non-empty lowercase ASCII, digits or underscore",
            });
        }
        Ok(TypePath {
            domain: domain.to_owned(),
            type_name: type_name.to_owned(),
            property: property.map(str::to_owned),
        })
    }

    pub fn domain(&self) -> &str {
        &self.domain
    }

    pub fn type_name(&self) -> &str {
        &self.type_name
    }

    pub fn property(&self) -> Option<&str> {
        self.property.as_deref()
    }

    /// The `/domain/type` prefix of a property path.
    pub fn type_prefix(&self) -> TypePath {
        TypePath { domain: self.domain.clone(), type_name: self.type_name.clone(), property: None }
    }

    /// True when `self` (a property path) lives under the `/domain/type` of `ty`.
    pub fn is_under(&self, ty: &TypePath) -> bool {
        self.domain == ty.domain && self.type_name == ty.type_name
    }

    fn merged(&self, map: &BTreeMap<String, String>) -> TypePath {
        match map.get(&self.domain) {
            Some(dst) => TypePath { domain: dst.clone(), ..self.clone() },
            None => self.clone(),
        }
    }
}

impl fmt::Display for TypePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "/{}/{}", self.domain, self.type_name)?;
        if let Some(p) = &self.property {
            write!(f, "/{p}")?;
        }
        Ok(())
    }
}

impl FromStr for TypePath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let rest = s.strip_prefix('/').ok_or(Error::TypePath {
            path: s.to_owned(),
            reason: "must start with '/'",
        })?;
        let segments: Vec<&str> = rest.split('/').collect();
        match segments.as_slice() {
            [d, t] => TypePath::new(d, t),
            [d, t, p] => TypePath::with_property(d, t, p),
            _ => Err(Error::TypePath { path: s.to_owned(), reason: "expected 2 or 3 segments" }),
        }
    }
}

impl TryFrom<String> for TypePath {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<TypePath> for String {
    fn from(t: TypePath) -> String {
        t.to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RelationTarget {
    Entity(String),
    Literal(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationEdge {
    pub predicate: TypePath,
    pub target: RelationTarget,
}

impl RelationEdge {
    pub fn target_mid(&self) -> Option<&str> {
        match &self.target {
            RelationTarget::Entity(m) => Some(m),
            RelationTarget::Literal(_) => None,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RelationRecord {
    predicate: TypePath,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    target_mid: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    literal: Option<String>,
}

impl TryFrom<RelationRecord> for RelationEdge {
    type Error = String;

    fn try_from(r: RelationRecord) -> Result<Self, String> {
        if r.predicate.property.is_none() {
            return Err(format!("relation predicate {} has no property segment", r.predicate));
        }
        let target = match (r.target_mid, r.literal) {
            (Some(m), None) => RelationTarget::Entity(m),
            (None, Some(l)) => RelationTarget::Literal(l),
            _ => return Err("relation needs exactly one of target_mid and literal".to_owned()),
        };
        Ok(RelationEdge { predicate: r.predicate, target })
    }
}

impl From<&RelationEdge> for RelationRecord {
    fn from(e: &RelationEdge) -> Self {
        let (target_mid, literal) = match &e.target {
            RelationTarget::Entity(m) => (Some(m.clone()), None),
            RelationTarget::Literal(l) => (None, Some(l.clone())),
        };
        RelationRecord { predicate: e.predicate.clone(), target_mid, literal }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EntityRecord {
    pub mid: String,
    pub language: String,
    pub canonical_name: String,
    pub aliases: Vec<String>,
    pub types: Vec<TypePath>,
    pub relations: Vec<RelationEdge>,
    pub description: Option<String>,
    pub article_key: Option<String>,
}

impl EntityRecord {
    /// Canonical name followed by aliases.
    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.canonical_name.as_str()).chain(self.aliases.iter().map(String::as_str))
    }

    /// Distinct mid-valued relation targets, in first-seen order.
    pub fn target_mids(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.relations
            .iter()
            .filter_map(RelationEdge::target_mid)
            .filter(|m| seen.insert(*m))
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
struct EntityLine {
    mid: String,
    lang: String,
    name: String,
    #[serde(default)]
    aliases: Vec<String>,
    #[serde(default)]
    types: Vec<TypePath>,
    #[serde(default)]
    relations: Vec<RelationRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    article_key: Option<String>,
}

impl TryFrom<EntityLine> for EntityRecord {
    type Error = String;

    fn try_from(l: EntityLine) -> Result<Self, String> {
        if l.mid.is_empty() {
            return Err("empty mid".into());
        }
        if l.lang.len() != 2 || !l.lang.bytes().all(|b| b.is_ascii_lowercase()) {
            return Err(format!("language must be a 2-letter code, got {:?}", l.lang));
        }
        if l.name.is_empty() {
            return Err(format!("{}: empty canonical name", l.mid));
        }
        let mut seen = HashSet::new();
        for a in &l.aliases {
            if *a == l.name {
                return Err(format!("{}: alias repeats the canonical name", l.mid));
            }
            if !seen.insert(a) {
                return Err(format!("{}: duplicate alias {a:?}", l.mid));
            }
        }
        if let Some(t) = l.types.iter().find(|t| t.property.is_some()) {
            return Err(format!("{}: declared type {t} carries a property", l.mid));
        }
        let relations =
            l.relations.into_iter().map(RelationEdge::try_from).collect::<Result<Vec<_>, _>>()?;
        Ok(EntityRecord {
            mid: l.mid,
            language: l.lang,
            canonical_name: l.name,
            aliases: l.aliases,
            types: l.types,
            relations,
            description: l.description,
            article_key: l.article_key,
        })
    }
}

impl From<&EntityRecord> for EntityLine {
    fn from(e: &EntityRecord) -> Self {
        EntityLine {
            mid: e.mid.clone(),
            lang: e.language.clone(),
            name: e.canonical_name.clone(),
            aliases: e.aliases.clone(),
            types: e.types.clone(),
            relations: e.relations.iter().map(RelationRecord::from).collect(),
            description: e.description.clone(),
            article_key: e.article_key.clone(),
        }
    }
}

/// Immutable in-memory snapshot. Domain merges are already applied to every
/// type path it holds.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct KnowledgeSnapshot {
    entities: BTreeMap<String, EntityRecord>,
    domain_merge_map: BTreeMap<String, String>,
}

impl KnowledgeSnapshot {
    pub fn new(
        entities: impl IntoIterator<Item = EntityRecord>,
        domain_merge_map: BTreeMap<String, String>,
    ) -> Result<Self> {
        if let Some(src) = domain_merge_map.values().find(|d| domain_merge_map.contains_key(*d)) {
            return Err(Error::CyclicMerge(src.clone()));
        }
        let mut map = BTreeMap::new();
        for e in entities {
            if map.contains_key(&e.mid) {
                return Err(Error::DuplicateMid(e.mid));
            }
            map.insert(e.mid.clone(), e);
        }
        let mut snap = KnowledgeSnapshot { entities: map, domain_merge_map };
        snap.apply_domain_merges();
        Ok(snap)
    }

    pub fn parse_str(input: &str) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        match lines.next() {
            None => return Ok(Self::default()),
            Some((_, h)) if h.trim_end() == SNAPSHOT_HEADER => {}
            Some(_) => return Err(Error::format(1, format!("missing {SNAPSHOT_HEADER:?} header"))),
        }
        let mut merges = BTreeMap::new();
        let mut entities: Vec<EntityRecord> = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in lines {
            let lineno = i + 1;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix(MERGE_DIRECTIVE) {
                let parts: Vec<&str> = rest.split_whitespace().collect();
                let [src, dst] = parts.as_slice() else {
                    return Err(Error::format(lineno, "merge directive needs SRC and DST"));
                };
                if !valid_segment(src) || !valid_segment(dst) {
                    return Err(Error::format(lineno, "merge domains must be valid segments"));
                }
                if merges.insert(src.to_string(), dst.to_string()).is_some() {
                    return Err(Error::format(lineno, format!("domain {src} merged twice")));
                }
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let raw: EntityLine =
                serde_json::from_str(line).map_err(|e| Error::format(lineno, e.to_string()))?;
            let rec = EntityRecord::try_from(raw).map_err(|m| Error::format(lineno, m))?;
            if !seen.insert(rec.mid.clone()) {
                return Err(Error::DuplicateMid(rec.mid));
            }
            entities.push(rec);
        }
        Self::new(entities, merges)
    }

    pub fn parse_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_str(&text)
    }

    /// Serialize back to the line format: header, merge directives, then one
    /// record per entity in mid order.
    pub fn to_snapshot_string(&self) -> String {
        let mut out = String::from(SNAPSHOT_HEADER);
        out.push('\n');
        for (src, dst) in &self.domain_merge_map {
            out.push_str(&format!("{MERGE_DIRECTIVE} {src} {dst}\n"));
        }
        for e in self.entities.values() {
            let line = serde_json::to_string(&EntityLine::from(e)).expect("entity serializes");
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    /// Rewrite every type path through the merge map. Idempotent because the
    /// map is acyclic.
    pub fn apply_domain_merges(&mut self) {
        if self.domain_merge_map.is_empty() {
            return;
        }
        let map = &self.domain_merge_map;
        for e in self.entities.values_mut() {
            let mut types: Vec<TypePath> = Vec::with_capacity(e.types.len());
            for t in e.types.iter().map(|t| t.merged(map)) {
                if !types.contains(&t) {
                    types.push(t);
                }
            }
            e.types = types;
            for r in &mut e.relations {
                r.predicate = r.predicate.merged(map);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn get(&self, mid: &str) -> Option<&EntityRecord> {
        self.entities.get(mid)
    }

    pub fn entity(&self, mid: &str) -> Result<&EntityRecord> {
        self.get(mid).ok_or_else(|| Error::UnknownMid(mid.to_owned()))
    }

    /// Entities in mid order.
    pub fn entities(&self) -> impl Iterator<Item = &EntityRecord> {
        self.entities.values()
    }

    pub fn domain_merge_map(&self) -> &BTreeMap<String, String> {
        &self.domain_merge_map
    }

    /// Number of mid-valued relation targets that name no entity in the snapshot.
    pub fn dangling_targets(&self) -> usize {
        self.entities
            .values()
            .flat_map(|e| e.relations.iter())
            .filter_map(RelationEdge::target_mid)
            .filter(|m| !self.entities.contains_key(*m))
            .count()
    }

    pub fn first_order_relations(&self, mid: &str) -> Result<&[RelationEdge]> {
        Ok(&self.entity(mid)?.relations)
    }

    /// Entities exactly two mid-valued hops away from `mid`, excluding `mid`
    /// itself and its direct targets, paired with their resolved types and
    /// sorted by mid. Dangling and untyped entities are left out.
    pub fn second_order_entities(&self, mid: &str) -> Result<Vec<(String, TypePath)>> {
        let start = self.entity(mid)?;
        let first: BTreeSet<&str> = start.target_mids().into_iter().collect();
        let mut reached = BTreeSet::new();
        for f in &first {
            let Some(fe) = self.get(f) else { continue };
            for t in fe.target_mids() {
                if t != mid && !first.contains(t) && self.entities.contains_key(t) {
                    reached.insert(t);
                }
            }
        }
        let mut out = Vec::with_capacity(reached.len());
        for m in reached {
            match crate::gazetteer::resolve_entity_type(self, m) {
                Ok(t) => out.push((m.to_owned(), t)),
                Err(Error::Unresolvable(_)) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const MINIKB: &str = include_str!("../tests/fixtures/minikb.jsonl");

    fn tp(s: &str) -> TypePath {
        s.parse().unwrap()
    }

    #[test]
    fn type_path_round_trips() {
        let t = tp("/film/film/directed_by");
        assert_eq!(t.domain(), "film");
        assert_eq!(t.property(), Some("directed_by"));
        assert_eq!(t.to_string(), "/film/film/directed_by");
        assert!(t.is_under(&tp("/film/film")));
        assert_eq!(t.type_prefix(), tp("/film/film"));
    }

    #[test]
    fn type_path_rejects_bad_segments() {
        for bad in ["film/film", "/Film/film", "/film", "/film//x", "/a/b/c/d", "/a-b/c", "/"] {
            assert!(bad.parse::<TypePath>().is_err(), "{bad}");
        }
    }

    #[test]
    fn minikb_loads() {
        let snap = KnowledgeSnapshot::parse_str(MINIKB).unwrap();
        assert_eq!(snap.len(), 7);
        assert_eq!(snap.dangling_targets(), 0);
        assert_eq!(snap.domain_merge_map().len(), 3);
        assert!(snap.domain_merge_map().values().all(|d| d == "sports"));
    }

    #[test]
    fn empty_input_is_empty_snapshot() {
        assert!(KnowledgeSnapshot::parse_str("").unwrap().is_empty());
        assert!(KnowledgeSnapshot::parse_str("#kbsnap v1\n").unwrap().is_empty());
    }

    #[test]
    fn missing_header_is_rejected() {
        let err = KnowledgeSnapshot::parse_str("{\"mid\":\"m.1\"}\n").unwrap_err();
        assert!(matches!(err, Error::Format { line: 1, .. }));
    }

    #[test]
    fn duplicate_mid_is_named() {
        let rec = r#"{"mid":"m.001","lang":"tr","name":"A","types":["/a/a"]}"#;
        let input = format!("{SNAPSHOT_HEADER}\n{rec}\n{rec}\n");
        match KnowledgeSnapshot::parse_str(&input) {
            Err(Error::DuplicateMid(m)) => assert_eq!(m, "m.001"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let input = format!("{SNAPSHOT_HEADER}\n\n{{not json\n");
        match KnowledgeSnapshot::parse_str(&input) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let both = r#"{"mid":"m","lang":"tr","name":"A","relations":[{"predicate":"/a/a/p","target_mid":"x","literal":"y"}]}"#;
        assert!(KnowledgeSnapshot::parse_str(&format!("{SNAPSHOT_HEADER}\n{both}\n")).is_err());
        let bare = r#"{"mid":"m","lang":"tr","name":"A","relations":[{"predicate":"/a/a","literal":"y"}]}"#;
        assert!(KnowledgeSnapshot::parse_str(&format!("{SNAPSHOT_HEADER}\n{bare}\n")).is_err());
        let alias = r#"{"mid":"m","lang":"tr","name":"A","aliases":["A"]}"#;
        assert!(KnowledgeSnapshot::parse_str(&format!("{SNAPSHOT_HEADER}\n{alias}\n")).is_err());
    }

    #[test]
    fn cyclic_merge_is_rejected() {
        let input = format!("{SNAPSHOT_HEADER}\n#merge a b\n#merge b c\n");
        assert!(matches!(KnowledgeSnapshot::parse_str(&input), Err(Error::CyclicMerge(_))));
        let selfmap = format!("{SNAPSHOT_HEADER}\n#merge a a\n");
        assert!(matches!(KnowledgeSnapshot::parse_str(&selfmap), Err(Error::CyclicMerge(_))));
    }

    #[test]
    fn merges_rewrite_types_and_predicates() {
        let rec = r#"{"mid":"m.1","lang":"tr","name":"X","types":["/cricket/team","/sports/team"],"relations":[{"predicate":"/cricket/team/coach","literal":"Y"}]}"#;
        let mut snap =
            KnowledgeSnapshot::parse_str(&format!("{SNAPSHOT_HEADER}\n#merge cricket sports\n{rec}\n"))
                .unwrap();
        let e = snap.get("m.1").unwrap();
        assert_eq!(e.types, vec![tp("/sports/team")]);
        assert_eq!(e.relations[0].predicate, tp("/sports/team/coach"));
        let before = snap.clone();
        snap.apply_domain_merges();
        assert_eq!(snap, before);
    }

    #[test]
    fn titanic_first_order_relations_in_input_order() {
        let snap = KnowledgeSnapshot::parse_str(MINIKB).unwrap();
        let rels = snap.first_order_relations("m.001").unwrap();
        let shown: Vec<_> = rels
            .iter()
            .map(|r| match &r.target {
                RelationTarget::Entity(m) => format!("{}→{m}", r.predicate.property().unwrap()),
                RelationTarget::Literal(l) => format!("{}→{l:?}", r.predicate.property().unwrap()),
            })
            .collect();
        assert_eq!(shown, ["directed_by→m.010", "release_year→\"1997\"", "awards_won→m.020"]);
        assert!(snap.first_order_relations("m.011").unwrap().is_empty());
        assert!(matches!(snap.first_order_relations("m.999"), Err(Error::UnknownMid(_))));
    }

    #[test]
    fn titanic_second_order_reaches_kapuskasing() {
        let snap = KnowledgeSnapshot::parse_str(MINIKB).unwrap();
        assert_eq!(
            snap.second_order_entities("m.001").unwrap(),
            vec![("m.011".to_owned(), tp("/location/citytown"))]
        );
        // literal-only relations
        assert!(snap.second_order_entities("m.003").unwrap().is_empty());
        assert!(snap.second_order_entities("m.999").is_err());
    }

    #[test]
    fn two_hop_targets_already_at_one_hop_are_excluded() {
        let recs = [
            r#"{"mid":"a","lang":"tr","name":"A","types":["/x/x"],"relations":[{"predicate":"/x/x/p","target_mid":"b"},{"predicate":"/x/x/q","target_mid":"c"}]}"#,
            r#"{"mid":"b","lang":"tr","name":"B","types":["/x/x"],"relations":[{"predicate":"/x/x/p","target_mid":"c"},{"predicate":"/x/x/p","target_mid":"a"}]}"#,
            r#"{"mid":"c","lang":"tr","name":"C","types":["/x/x"]}"#,
        ];
        let snap =
            KnowledgeSnapshot::parse_str(&format!("{SNAPSHOT_HEADER}\n{}\n", recs.join("\n"))).unwrap();
        assert!(snap.second_order_entities("a").unwrap().is_empty());
    }

    #[test]
    fn second_order_is_disjoint_from_first_order_on_minikb() {
        let snap = KnowledgeSnapshot::parse_str(MINIKB).unwrap();
        for e in snap.entities() {
            let first: HashSet<&str> = e.target_mids().into_iter().collect();
            for (m, _) in snap.second_order_entities(&e.mid).unwrap() {
                assert_ne!(m, e.mid);
                assert!(!first.contains(m.as_str()));
            }
        }
    }

    #[test]
    fn snapshot_round_trips() {
        let snap = KnowledgeSnapshot::parse_str(MINIKB).unwrap();
        let again = KnowledgeSnapshot::parse_str(&snap.to_snapshot_string()).unwrap();
        assert_eq!(snap, again);
    }
}
