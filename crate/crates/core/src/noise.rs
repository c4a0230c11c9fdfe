//! Majority-vote re-typing of surface forms.
//!
//! Every span with the same token sequence is relabelled with the type it
//! carries most often across the corpus (domain-independent) or within its
//! sentence domain (domain-dependent). Ties go to the type covering more
//! tokens, then to the smallest type name. Span boundaries, tokens, domains
//! and sentence count never change.

use std::collections::{BTreeMap, HashMap};

use crate::corpus::{spans, write_span, AnnotatedCorpus};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NoiseMode {
    DomainIndependent,
    DomainDependent,
}

impl NoiseMode {
    pub fn tag(self) -> &'static str {
        match self {
            NoiseMode::DomainIndependent => "di",
            NoiseMode::DomainDependent => "dd",
        }
    }
}

impl std::str::FromStr for NoiseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "di" => Ok(NoiseMode::DomainIndependent),
            "dd" => Ok(NoiseMode::DomainDependent),
            _ => Err(Error::Invalid(format!("noise mode must be di or dd, got {s:?}"))),
        }
    }
}

type VoteKey = (Vec<String>, Option<String>);

pub fn reduce_domain_independent(corpus: &AnnotatedCorpus) -> Result<AnnotatedCorpus> {
    reduce(corpus, NoiseMode::DomainIndependent)
}

/// Fails with [`Error::MissingDomain`] if any sentence has no domain.
pub fn reduce_domain_dependent(corpus: &AnnotatedCorpus) -> Result<AnnotatedCorpus> {
    reduce(corpus, NoiseMode::DomainDependent)
}

pub fn reduce(corpus: &AnnotatedCorpus, mode: NoiseMode) -> Result<AnnotatedCorpus> {
    let key_of = |tokens: &[&str], domain: &Option<String>| -> VoteKey {
        let surface = tokens.iter().map(|t| (*t).to_owned()).collect();
        match mode {
            NoiseMode::DomainIndependent => (surface, None),
            NoiseMode::DomainDependent => (surface, domain.clone()),
        }
    };

    // label -> (occurrences, covered tokens)
    let mut votes: HashMap<VoteKey, BTreeMap<String, (usize, usize)>> = HashMap::new();
    for (i, s) in corpus.sentences.iter().enumerate() {
        if mode == NoiseMode::DomainDependent && s.domain.is_none() {
            return Err(Error::MissingDomain(i));
        }
        let texts = s.token_texts();
        for sp in s.spans() {
            let v = votes.entry(key_of(&texts[sp.start..sp.end], &s.domain)).or_default();
            let c = v.entry(sp.label.to_owned()).or_default();
            c.0 += 1;
            c.1 += sp.len();
        }
    }
    let modal: HashMap<VoteKey, String> = votes
        .into_iter()
        .map(|(k, v)| {
            // BTreeMap order makes the first maximum the smallest name.
            let best = v
                .into_iter()
                .reduce(|a, b| if b.1 > a.1 { b } else { a })
                .map(|(label, _)| label)
                .expect("every vote key has a label");
            (k, best)
        })
        .collect();

    let mut out = corpus.clone();
    for s in &mut out.sentences {
        let texts: Vec<String> = s.token_texts().into_iter().map(str::to_owned).collect();
        let texts: Vec<&str> = texts.iter().map(String::as_str).collect();
        let found: Vec<(usize, usize)> = spans(&s.tags).iter().map(|sp| (sp.start, sp.end)).collect();
        for (a, b) in found {
            let label = &modal[&key_of(&texts[a..b], &s.domain)];
            write_span(&mut s.tags, a, b, label);
        }
    }
    out.meta.insert("noise".to_owned(), mode.tag().to_owned());
    Ok(out)
}
