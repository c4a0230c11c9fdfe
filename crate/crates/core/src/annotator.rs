//! Relation-crawling annotation of articles.
//!
//! For a candidate entity (CPN) the annotator finds its text, tags the
//! entity itself and its first-order neighbours, then fills the remaining
//! untagged tokens with second-order neighbours. Every sentence with at
//! least one tag is labelled with the domain that owns most of its spans.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::corpus::{write_span, AnnotatedCorpus, AnnotatedSentence, Tag};
use crate::error::{Error, Result};
use crate::gazetteer::{resolve_entity_type, Gazetteer};
use crate::kb::{KnowledgeSnapshot, TypePath};
use crate::matcher::{MatchAutomaton, SurfaceOwner};
use crate::text::{detect_language, sentences_of, CaseFolding, Dump, DEFAULT_LANGUAGE_THRESHOLD};

/// Key prefix for sentences taken from an entity description.
pub const DESCRIPTION_PREFIX: &str = "description:";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnnotatorConfig {
    pub language_threshold: f64,
    pub case_folding: CaseFolding,
    /// Worker threads; 0 lets the pool decide.
    pub jobs: usize,
}

impl Default for AnnotatorConfig {
    fn default() -> Self {
        AnnotatorConfig {
            language_threshold: DEFAULT_LANGUAGE_THRESHOLD,
            case_folding: CaseFolding::Sensitive,
            jobs: 0,
        }
    }
}

impl AnnotatorConfig {
    /// Settings that change the output, in a stable textual form.
    pub fn canonical(&self) -> String {
        format!(
            "lang_threshold={}\ncase_fold={}\n",
            self.language_threshold,
            self.case_folding == CaseFolding::Turkish
        )
    }

    pub fn hash(&self) -> String {
        hash16(self.canonical().as_bytes())
    }
}

/// First 16 hex digits of the SHA-256 of `bytes`.
pub fn hash16(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SkipReason {
    /// No article, linked document or description.
    NoText,
    /// Text scored below the language threshold.
    Language,
    /// The entity has no declared types.
    Untyped,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CpnOutcome {
    Annotated(Vec<AnnotatedSentence>),
    Skipped(SkipReason),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AnnotationReport {
    pub candidates: usize,
    pub annotated: usize,
    pub skipped: BTreeMap<String, usize>,
    /// Sentences produced before merging duplicates.
    pub raw_sentences: usize,
    pub sentences: usize,
}

pub struct Annotator<'a> {
    snapshot: &'a KnowledgeSnapshot,
    dump: &'a Dump,
    gazetteer: Gazetteer,
    resolved: BTreeMap<String, TypePath>,
    config: AnnotatorConfig,
}

impl<'a> Annotator<'a> {
    pub fn new(snapshot: &'a KnowledgeSnapshot, dump: &'a Dump, config: AnnotatorConfig) -> Result<Self> {
        if !(0.0..=1.0).contains(&config.language_threshold) {
            return Err(Error::Invalid(format!(
                "language threshold {} outside [0, 1]",
                config.language_threshold
            )));
        }
        let gazetteer = Gazetteer::build(snapshot)?;
        let mut resolved = BTreeMap::new();
        for e in snapshot.entities() {
            match resolve_entity_type(snapshot, &e.mid) {
                Ok(t) => {
                    resolved.insert(e.mid.clone(), t);
                }
                Err(Error::Unresolvable(_)) => {}
                Err(err) => return Err(err),
            }
        }
        Ok(Annotator { snapshot, dump, gazetteer, resolved, config })
    }

    pub fn gazetteer(&self) -> &Gazetteer {
        &self.gazetteer
    }

    pub fn resolved_type(&self, mid: &str) -> Option<&TypePath> {
        self.resolved.get(mid)
    }

    /// Text for `cpn`: its article, else a document linked to it, else its
    /// description. Returns `(doc_key, text)`.
    fn text_of(&self, cpn: &str) -> Result<Option<(String, &'a str)>> {
        let e = self.snapshot.entity(cpn)?;
        let doc = e
            .article_key
            .as_deref()
            .and_then(|k| self.dump.get(k))
            .or_else(|| self.dump.by_mid(cpn));
        if let Some(d) = doc {
            return Ok(Some((d.article_key.clone(), d.raw_text.as_str())));
        }
        Ok(e.description.as_deref().map(|t| (format!("{DESCRIPTION_PREFIX}{cpn}"), t)))
    }

    fn automaton<'m>(&self, mids: impl IntoIterator<Item = &'m str>) -> Result<MatchAutomaton> {
        let pairs = mids.into_iter().filter_map(|m| self.gazetteer.get(m)).flat_map(|e| {
            e.surfaces.iter().map(|s| (s.clone(), e.mid.clone(), e.resolved_type.clone()))
        });
        MatchAutomaton::build_with(pairs, self.config.case_folding)
    }

    /// Annotate the text of one candidate entity.
    pub fn annotate_cpn(&self, cpn: &str) -> Result<CpnOutcome> {
        let Some(cpn_type) = self.resolved.get(cpn) else {
            self.snapshot.entity(cpn)?;
            return Ok(CpnOutcome::Skipped(SkipReason::Untyped));
        };
        let Some((doc_key, text)) = self.text_of(cpn)? else {
            return Ok(CpnOutcome::Skipped(SkipReason::NoText));
        };
        let score = match detect_language(text) {
            Ok(s) => s,
            Err(Error::EmptyText) => return Ok(CpnOutcome::Skipped(SkipReason::NoText)),
            Err(e) => return Err(e),
        };
        if score < self.config.language_threshold {
            return Ok(CpnOutcome::Skipped(SkipReason::Language));
        }

        let mut priority: HashMap<&str, u8> = HashMap::new();
        priority.insert(cpn, 0);
        let first_order: Vec<&str> = self
            .snapshot
            .entity(cpn)?
            .target_mids()
            .into_iter()
            .filter(|m| self.resolved.contains_key(*m))
            .collect();
        for m in &first_order {
            priority.entry(m).or_insert(1);
        }
        let second_order = self.snapshot.second_order_entities(cpn)?;
        for (m, _) in &second_order {
            priority.entry(m.as_str()).or_insert(2);
        }

        let first_ac = self.automaton(std::iter::once(cpn).chain(first_order.iter().copied()))?;
        let all_ac = self.automaton(
            std::iter::once(cpn)
                .chain(first_order.iter().copied())
                .chain(second_order.iter().map(|(m, _)| m.as_str())),
        )?;
        let pick = |owners: &[SurfaceOwner]| -> TypePath {
            owners
                .iter()
                .min_by_key(|o| (priority.get(o.mid.as_str()).copied().unwrap_or(u8::MAX), &o.mid))
                .map(|o| o.entity_type.clone())
                .expect("matches carry at least one owner")
        };

        let mut out = Vec::new();
        for sentence in sentences_of(&doc_key, text) {
            let texts: Vec<&str> = sentence.tokens.iter().map(|t| t.text.as_str()).collect();
            let mut tags = vec![Tag::Outside; texts.len()];

            let allowed: Vec<bool> = sentence.tokens.iter().map(|t| !t.is_punct).collect();
            for (start, end, ty) in scan(&first_ac, &texts, &allowed, &pick) {
                write_span(&mut tags, start, end, &ty.to_string());
            }
            let allowed: Vec<bool> =
                sentence.tokens.iter().zip(&tags).map(|(t, g)| !t.is_punct && g.is_outside()).collect();
            for (start, end, ty) in scan(&all_ac, &texts, &allowed, &pick) {
                write_span(&mut tags, start, end, &ty.to_string());
            }

            let Some(domain) = sentence_domain(&tags, cpn_type.domain()) else { continue };
            out.push(AnnotatedSentence { sentence, tags, domain: Some(domain) });
        }
        Ok(CpnOutcome::Annotated(out))
    }

    /// Annotate every typed entity and merge sentences reached from several
    /// candidates, keeping the version with the most tagged tokens (earliest
    /// candidate on ties). Output is ordered by document key and sentence
    /// index.
    pub fn annotate_corpus(&self) -> Result<(AnnotatedCorpus, AnnotationReport)> {
        let cpns: Vec<&str> = self.snapshot.entities().map(|e| e.mid.as_str()).collect();
        let run = || cpns.par_iter().map(|c| self.annotate_cpn(c)).collect::<Result<Vec<_>>>();
        let outcomes = if self.config.jobs == 0 {
            run()?
        } else {
            rayon::ThreadPoolBuilder::new()
                .num_threads(self.config.jobs)
                .build()
                .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?
                .install(run)?
        };

        let mut report = AnnotationReport { candidates: cpns.len(), ..Default::default() };
        let mut best: BTreeMap<(String, usize), (usize, AnnotatedSentence)> = BTreeMap::new();
        for outcome in outcomes {
            let sentences = match outcome {
                CpnOutcome::Skipped(reason) => {
                    *report.skipped.entry(format!("{reason:?}").to_lowercase()).or_default() += 1;
                    continue;
                }
                CpnOutcome::Annotated(s) => s,
            };
            report.annotated += 1;
            report.raw_sentences += sentences.len();
            for s in sentences {
                let key = (s.sentence.doc_key.clone(), s.sentence.index);
                let tagged = s.tagged_tokens();
                match best.get(&key) {
                    Some((t, _)) if *t >= tagged => {}
                    _ => {
                        best.insert(key, (tagged, s));
                    }
                }
            }
        }
        report.sentences = best.len();
        let corpus = AnnotatedCorpus::new(best.into_values().map(|(_, s)| s).collect())
            .with_meta("config", self.config.hash());
        Ok((corpus, report))
    }
}

/// Greedy matches inside maximal runs of allowed positions, as
/// `(start, end, type)`.
fn scan(
    ac: &MatchAutomaton,
    texts: &[&str],
    allowed: &[bool],
    pick: &impl Fn(&[SurfaceOwner]) -> TypePath,
) -> Vec<(usize, usize, TypePath)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < texts.len() {
        if !allowed[i] {
            i += 1;
            continue;
        }
        let mut j = i;
        while j < texts.len() && allowed[j] {
            j += 1;
        }
        for m in ac.find_iter(&texts[i..j]) {
            out.push((i + m.start, i + m.end(), pick(m.owners)));
        }
        i = j;
    }
    out
}

/// Domain owning most spans; ties prefer the candidate's domain, then the
/// smallest name. `None` when nothing is tagged.
fn sentence_domain(tags: &[Tag], cpn_domain: &str) -> Option<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for t in tags {
        if let Tag::Begin(label) = t {
            let domain = label.split('/').nth(1).unwrap_or(label);
            *counts.entry(domain).or_default() += 1;
        }
    }
    let top = *counts.values().max()?;
    if counts.get(cpn_domain) == Some(&top) {
        return Some(cpn_domain.to_owned());
    }
    counts.into_iter().find(|(_, c)| *c == top).map(|(d, _)| d.to_owned())
}
