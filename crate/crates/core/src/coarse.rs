//! Fine-grained to coarse-grained label mapping.
//!
//! Mapping file: one `TYPE LABEL` record per line (an arrow `->` or `→` may
//! sit between the two), `!drop DOMAIN` to eliminate a domain, `#` comments.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::corpus::{spans, write_span, AnnotatedCorpus, Tag};
use crate::error::{Error, Result};
use crate::kb::TypePath;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CoarseLabel {
    Person,
    Organization,
    Location,
    Misc,
    Outside,
}

impl CoarseLabel {
    /// The four entity labels, in report order.
    pub const ENTITIES: [CoarseLabel; 4] =
        [CoarseLabel::Person, CoarseLabel::Organization, CoarseLabel::Location, CoarseLabel::Misc];

    pub fn as_str(self) -> &'static str {
        match self {
            CoarseLabel::Person => "PERSON",
            CoarseLabel::Organization => "ORGANIZATION",
            CoarseLabel::Location => "LOCATION",
            CoarseLabel::Misc => "MISC",
            CoarseLabel::Outside => "O",
        }
    }

    pub fn is_entity(self) -> bool {
        self != CoarseLabel::Outside
    }
}

impl fmt::Display for CoarseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CoarseLabel {
    type Err = Error;

    /// Accepts the full names and the short forms `PER`, `ORG`, `LOC`.
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "PERSON" | "PER" => CoarseLabel::Person,
            "ORGANIZATION" | "ORG" => CoarseLabel::Organization,
            "LOCATION" | "LOC" => CoarseLabel::Location,
            "MISC" => CoarseLabel::Misc,
            "O" => CoarseLabel::Outside,
            _ => return Err(Error::UnknownLabel(s.to_owned())),
        })
    }
}

impl serde::Serialize for CoarseLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> serde::Deserialize<'de> for CoarseLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TypeMappingTable {
    mapping: BTreeMap<TypePath, CoarseLabel>,
    dropped: BTreeSet<String>,
}

impl TypeMappingTable {
    pub fn new(
        mapping: impl IntoIterator<Item = (TypePath, CoarseLabel)>,
        dropped: impl IntoIterator<Item = String>,
    ) -> Result<Self> {
        let mut t = TypeMappingTable { dropped: dropped.into_iter().collect(), ..Default::default() };
        for (ty, label) in mapping {
            if t.mapping.insert(ty.clone(), label).is_some() {
                return Err(Error::DuplicateMapping(ty.to_string()));
            }
        }
        Ok(t)
    }

    /// Built-in policy: people to PERSON, location to LOCATION, organization,
    /// education and sports teams to ORGANIZATION, everything else not in
    /// `dropped` to MISC.
    pub fn default_for<'t>(
        types: impl IntoIterator<Item = &'t TypePath>,
        dropped: impl IntoIterator<Item = String>,
    ) -> Self {
        let dropped: BTreeSet<String> = dropped.into_iter().collect();
        let mapping = types
            .into_iter()
            .filter(|t| !dropped.contains(t.domain()))
            .map(|t| {
                let label = match (t.domain(), t.type_name()) {
                    ("people", _) => CoarseLabel::Person,
                    ("location", _) => CoarseLabel::Location,
                    ("organization" | "education", _) | ("sports", "sports_team") => {
                        CoarseLabel::Organization
                    }
                    _ => CoarseLabel::Misc,
                };
                (t.clone(), label)
            })
            .collect();
        TypeMappingTable { mapping, dropped }
    }

    pub fn parse_str(input: &str) -> Result<Self> {
        let mut mapping = Vec::new();
        let mut dropped = Vec::new();
        let mut seen = BTreeSet::new();
        for (i, line) in input.lines().enumerate() {
            let lineno = i + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().filter(|f| !matches!(*f, "->" | "→")).collect();
            if fields[0] == "!drop" {
                let [_, domain] = fields[..] else {
                    return Err(Error::format(lineno, "expected `!drop DOMAIN`"));
                };
                dropped.push(domain.to_owned());
                continue;
            }
            let [ty, label] = fields[..] else {
                return Err(Error::format(lineno, "expected `TYPE LABEL`"));
            };
            let ty: TypePath = ty.parse()?;
            let label: CoarseLabel = label.parse()?;
            if !seen.insert(ty.clone()) {
                return Err(Error::DuplicateMapping(ty.to_string()));
            }
            mapping.push((ty, label));
        }
        Self::new(mapping, dropped)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_str(&text)
    }

    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }

    pub fn get(&self, ty: &TypePath) -> Option<CoarseLabel> {
        self.mapping.get(ty).copied()
    }

    pub fn dropped(&self) -> &BTreeSet<String> {
        &self.dropped
    }

    pub fn is_dropped(&self, domain: &str) -> bool {
        self.dropped.contains(domain)
    }

    /// Label for a serialized fine type; `O` for types in eliminated domains.
    pub fn label_for(&self, fine: &str) -> Result<CoarseLabel> {
        let uncovered = || Error::UncoveredType(fine.to_owned());
        let ty: TypePath = fine.parse().map_err(|_| uncovered())?;
        match self.get(&ty) {
            Some(l) => Ok(l),
            None if self.is_dropped(ty.domain()) => Ok(CoarseLabel::Outside),
            None => Err(uncovered()),
        }
    }
}

impl fmt::Display for TypeMappingTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (t, l) in &self.mapping {
            writeln!(f, "{t} {l}")?;
        }
        for d in &self.dropped {
            writeln!(f, "!drop {d}")?;
        }
        Ok(())
    }
}

/// Tokens per coarse entity label.
pub type LabelCounts = BTreeMap<CoarseLabel, usize>;

/// Rewrite fine tags as coarse ones. Sentences whose domain is eliminated are
/// removed; spans mapped to `O` vanish entirely.
pub fn to_coarse(corpus: &AnnotatedCorpus, table: &TypeMappingTable) -> Result<(AnnotatedCorpus, LabelCounts)> {
    let mut counts: LabelCounts = CoarseLabel::ENTITIES.iter().map(|l| (*l, 0)).collect();
    let mut out = AnnotatedCorpus { sentences: Vec::new(), meta: corpus.meta.clone() };
    for s in &corpus.sentences {
        if s.domain.as_deref().is_some_and(|d| table.is_dropped(d)) {
            continue;
        }
        let mut tags = vec![Tag::Outside; s.tags.len()];
        for sp in spans(&s.tags) {
            let label = table.label_for(sp.label)?;
            if label.is_entity() {
                write_span(&mut tags, sp.start, sp.end, label.as_str());
                *counts.entry(label).or_default() += sp.len();
            }
        }
        out.sentences.push(crate::corpus::AnnotatedSentence { tags, ..s.clone() });
    }
    out.meta.insert("tags".to_owned(), "coarse".to_owned());
    Ok((out, counts))
}
