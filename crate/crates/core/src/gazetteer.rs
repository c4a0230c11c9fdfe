//! One resolved type per entity plus a tokenized surface-form index.

use std::collections::{BTreeMap, HashSet};

use crate::error::{Error, Result};
use crate::kb::{KnowledgeSnapshot, TypePath};
use crate::text::tokenize;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GazetteerEntry {
    pub mid: String,
    pub resolved_type: TypePath,
    /// Canonical name first, then aliases; each surface is a token sequence.
    pub surfaces: Vec<Vec<String>>,
}

impl GazetteerEntry {
    pub fn domain(&self) -> &str {
        self.resolved_type.domain()
    }
}

#[derive(Clone, Debug, Default)]
pub struct Gazetteer {
    entries: BTreeMap<String, GazetteerEntry>,
    surface_index: BTreeMap<Vec<String>, Vec<String>>,
    skipped: usize,
}

/// Pick the declared type that explains most of the entity's first-order
/// relations.
///
/// Candidates are ranked by the number of relation predicates under their
/// `/domain/type`; ties go to the larger count of relations in the
/// candidate's domain over first- and second-order edges, then to the
/// lexicographically smallest path. Neither step depends on list order.
pub fn resolve_entity_type(snapshot: &KnowledgeSnapshot, mid: &str) -> Result<TypePath> {
    let entity = snapshot.entity(mid)?;
    let second_hop: Vec<_> = entity
        .target_mids()
        .into_iter()
        .filter(|m| *m != mid)
        .filter_map(|m| snapshot.get(m))
        .flat_map(|e| e.relations.iter())
        .collect();

    entity
        .types
        .iter()
        .map(|ty| {
            let primary = entity.relations.iter().filter(|r| r.predicate.is_under(ty)).count();
            let in_domain = entity
                .relations
                .iter()
                .chain(second_hop.iter().copied())
                .filter(|r| r.predicate.domain() == ty.domain())
                .count();
            (primary, in_domain, ty)
        })
        .max_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then_with(|| b.2.cmp(a.2)))
        .map(|(_, _, ty)| ty.clone())
        .ok_or_else(|| Error::Unresolvable(mid.to_owned()))
}

impl Gazetteer {
    /// Resolve every entity and index its surfaces. Entities without types are
    /// skipped and counted.
    pub fn build(snapshot: &KnowledgeSnapshot) -> Result<Self> {
        let mut gz = Gazetteer::default();
        for e in snapshot.entities() {
            let resolved_type = match resolve_entity_type(snapshot, &e.mid) {
                Ok(t) => t,
                Err(Error::Unresolvable(_)) => {
                    gz.skipped += 1;
                    continue;
                }
                Err(err) => return Err(err),
            };
            let mut surfaces: Vec<Vec<String>> = Vec::new();
            for s in e.surfaces() {
                let toks: Vec<String> = tokenize(s).into_iter().map(|t| t.text).collect();
                if !toks.is_empty() && !surfaces.contains(&toks) {
                    surfaces.push(toks);
                }
            }
            if surfaces.is_empty() {
                gz.skipped += 1;
                continue;
            }
            for s in &surfaces {
                let mids = gz.surface_index.entry(s.clone()).or_default();
                if !mids.contains(&e.mid) {
                    mids.push(e.mid.clone());
                }
            }
            gz.entries
                .insert(e.mid.clone(), GazetteerEntry { mid: e.mid.clone(), resolved_type, surfaces });
        }
        Ok(gz)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entities left out for having no declared type or no usable surface.
    pub fn skipped(&self) -> usize {
        self.skipped
    }

    pub fn get(&self, mid: &str) -> Option<&GazetteerEntry> {
        self.entries.get(mid)
    }

    /// Entries in mid order.
    pub fn entries(&self) -> impl Iterator<Item = &GazetteerEntry> {
        self.entries.values()
    }

    /// Every mid sharing the tokenized surface.
    pub fn lookup<S: AsRef<str>>(&self, surface: &[S]) -> &[String] {
        let key: Vec<String> = surface.iter().map(|s| s.as_ref().to_owned()).collect();
        self.surface_index.get(&key).map_or(&[], Vec::as_slice)
    }

    pub fn surface_index(&self) -> &BTreeMap<Vec<String>, Vec<String>> {
        &self.surface_index
    }

    /// Inspection dump: `mid TAB type TAB surface...`, surfaces space-joined.
    pub fn export(&self) -> String {
        let mut out = String::new();
        for e in self.entries.values() {
            out.push_str(&e.mid);
            out.push('\t');
            out.push_str(&e.resolved_type.to_string());
            for s in &e.surfaces {
                out.push('\t');
                out.push_str(&s.join(" "));
            }
            out.push('\n');
        }
        out
    }

    /// Distinct resolved types over all entries.
    pub fn resolved_types(&self) -> HashSet<&TypePath> {
        self.entries.values().map(|e| &e.resolved_type).collect()
    }
}
