//! Descriptive corpus statistics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::corpus::AnnotatedCorpus;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NamedCount {
    pub name: String,
    pub count: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub struct CoarseTokens {
    pub person: usize,
    pub organization: usize,
    pub location: usize,
    pub misc: usize,
}

impl CoarseTokens {
    pub fn total(&self) -> usize {
        self.person + self.organization + self.location + self.misc
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct StatsReport {
    pub sentences: usize,
    /// Sentences per domain; an unlabelled sentence counts under `""`.
    pub domains: BTreeMap<String, usize>,
    pub largest_domain: Option<NamedCount>,
    pub smallest_domain: Option<NamedCount>,
    pub tokens_with_punct: usize,
    pub tokens_without_punct: usize,
    pub tagged_tokens: usize,
    /// Distinct labels, IOB prefix ignored.
    pub unique_types: usize,
    pub domain_unique_types: BTreeMap<String, usize>,
    pub largest_unique_domain: Option<NamedCount>,
    pub smallest_unique_domain: Option<NamedCount>,
    /// Only for corpora tagged with coarse labels.
    pub coarse_tokens: Option<CoarseTokens>,
}

/// Largest (or smallest) entry; ties go to the first name.
fn extreme(m: &BTreeMap<String, usize>, largest: bool) -> Option<NamedCount> {
    let mut it = m.iter();
    let mut best = it.next()?;
    for e in it {
        if (largest && e.1 > best.1) || (!largest && e.1 < best.1) {
            best = e;
        }
    }
    Some(NamedCount { name: best.0.clone(), count: *best.1 })
}

/// Statistics for `corpus`; coarse counts are reported when its meta marks
/// it as coarse-tagged.
pub fn compute_stats(corpus: &AnnotatedCorpus) -> StatsReport {
    let coarse = corpus.meta.get("tags").is_some_and(|t| t == "coarse");
    let mut r = StatsReport { sentences: corpus.len(), ..Default::default() };
    let mut types = BTreeSet::new();
    let mut domain_types: BTreeMap<String, BTreeSet<&str>> = BTreeMap::new();
    let mut ct = CoarseTokens::default();
    for s in &corpus.sentences {
        let d = s.domain.clone().unwrap_or_default();
        *r.domains.entry(d.clone()).or_default() += 1;
        let dt = domain_types.entry(d).or_default();
        for (tok, tag) in s.tokens().iter().zip(&s.tags) {
            r.tokens_with_punct += 1;
            if !tok.is_punct {
                r.tokens_without_punct += 1;
            }
            let Some(label) = tag.label() else { continue };
            r.tagged_tokens += 1;
            types.insert(label);
            dt.insert(label);
            match label {
                "PERSON" => ct.person += 1,
                "ORGANIZATION" => ct.organization += 1,
                "LOCATION" => ct.location += 1,
                "MISC" => ct.misc += 1,
                _ => {}
            }
        }
    }
    r.unique_types = types.len();
    r.domain_unique_types = domain_types.into_iter().map(|(d, t)| (d, t.len())).collect();
    r.largest_domain = extreme(&r.domains, true);
    r.smallest_domain = extreme(&r.domains, false);
    r.largest_unique_domain = extreme(&r.domain_unique_types, true);
    r.smallest_unique_domain = extreme(&r.domain_unique_types, false);
    r.coarse_tokens = coarse.then_some(ct);
    r
}

impl StatsReport {
    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

impl fmt::Display for StatsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let nc = |c: &Option<NamedCount>| match c {
            Some(c) => format!("{} ({})", if c.name.is_empty() { "-" } else { &c.name }, c.count),
            None => "-".to_owned(),
        };
        writeln!(f, "{:<36}{:>12}", "Number of sentences", self.sentences)?;
        writeln!(f, "{:<36}{:>12}", "Number of domains", self.domains.len())?;
        writeln!(f, "{:<36}{:>12}", "Domain with most sentences", nc(&self.largest_domain))?;
        writeln!(f, "{:<36}{:>12}", "Domain with fewest sentences", nc(&self.smallest_domain))?;
        writeln!(f, "{:<36}{:>12}", "Tokens (with punctuation)", self.tokens_with_punct)?;
        writeln!(f, "{:<36}{:>12}", "Tokens (without punctuation)", self.tokens_without_punct)?;
        writeln!(f, "{:<36}{:>12}", "Tagged tokens", self.tagged_tokens)?;
        writeln!(f, "{:<36}{:>12}", "Unique entity types", self.unique_types)?;
        writeln!(f, "{:<36}{:>12}", "Domain with most unique types", nc(&self.largest_unique_domain))?;
        writeln!(f, "{:<36}{:>12}", "Domain with fewest unique types", nc(&self.smallest_unique_domain))?;
        if let Some(c) = &self.coarse_tokens {
            writeln!(f, "Tokens per entity label")?;
            for (name, n) in [
                ("PERSON", c.person),
                ("ORGANIZATION", c.organization),
                ("LOCATION", c.location),
                ("MISC", c.misc),
            ] {
                writeln!(f, "  {name:<34}{n:>12}")?;
            }
        }
        Ok(())
    }
}
