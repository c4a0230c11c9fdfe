//! Annotated sentences, IOB tags and the corpus file formats.
//!
//! The corpus file starts with `#twnertc v1`, followed by optional
//! `#meta key=value` lines (sorted by key), then one sentence per line:
//! `domain TAB tokens TAB tags`, tokens and tags space-joined.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::text::{tokens_from_texts, Sentence, Token};

pub const CORPUS_HEADER: &str = "#twnertc v1";
const META_PREFIX: &str = "#meta ";

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tag {
    Outside,
    Begin(String),
    Inside(String),
}

impl Tag {
    /// The label without its IOB prefix; `None` for `O`.
    pub fn label(&self) -> Option<&str> {
        match self {
            Tag::Outside => None,
            Tag::Begin(l) | Tag::Inside(l) => Some(l),
        }
    }

    pub fn is_outside(&self) -> bool {
        matches!(self, Tag::Outside)
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tag::Outside => f.write_str("O"),
            Tag::Begin(l) => write!(f, "B-{l}"),
            Tag::Inside(l) => write!(f, "I-{l}"),
        }
    }
}

impl FromStr for Tag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "O" => Ok(Tag::Outside),
            _ => match s.split_at_checked(2) {
                Some(("B-", l)) if !l.is_empty() => Ok(Tag::Begin(l.to_owned())),
                Some(("I-", l)) if !l.is_empty() => Ok(Tag::Inside(l.to_owned())),
                _ => Err(Error::Invalid(format!("bad IOB tag {s:?}"))),
            },
        }
    }
}

/// A maximal entity span `[start, end)` with its label.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Span<'a> {
    pub start: usize,
    pub end: usize,
    pub label: &'a str,
}

impl Span<'_> {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

/// Entity spans of a valid IOB sequence.
pub fn spans(tags: &[Tag]) -> Vec<Span<'_>> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < tags.len() {
        if let Tag::Begin(label) = &tags[i] {
            let mut j = i + 1;
            while matches!(tags.get(j), Some(Tag::Inside(l)) if l == label) {
                j += 1;
            }
            out.push(Span { start: i, end: j, label });
            i = j;
        } else {
            i += 1;
        }
    }
    out
}

/// Index of the first `I-` that does not continue a span of the same label.
pub fn first_iob_violation(tags: &[Tag]) -> Option<usize> {
    let mut prev: Option<&str> = None;
    for (i, t) in tags.iter().enumerate() {
        match t {
            Tag::Outside => prev = None,
            Tag::Begin(l) => prev = Some(l),
            Tag::Inside(l) => {
                if prev != Some(l.as_str()) {
                    return Some(i);
                }
            }
        }
    }
    None
}

/// Write `label` over `[start, end)` as `B-label I-label...`.
pub fn write_span(tags: &mut [Tag], start: usize, end: usize, label: &str) {
    for (k, t) in tags[start..end].iter_mut().enumerate() {
        *t = if k == 0 { Tag::Begin(label.to_owned()) } else { Tag::Inside(label.to_owned()) };
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnnotatedSentence {
    pub sentence: Sentence,
    pub tags: Vec<Tag>,
    pub domain: Option<String>,
}

impl AnnotatedSentence {
    pub fn new(sentence: Sentence, tags: Vec<Tag>, domain: Option<String>) -> Result<Self> {
        if sentence.tokens.len() != tags.len() {
            return Err(Error::LengthMismatch { left: sentence.tokens.len(), right: tags.len() });
        }
        if let Some(i) = first_iob_violation(&tags) {
            return Err(Error::InvalidIob(i));
        }
        Ok(AnnotatedSentence { sentence, tags, domain })
    }

    /// All-`O` annotation of a sentence.
    pub fn untagged(sentence: Sentence) -> Self {
        let tags = vec![Tag::Outside; sentence.tokens.len()];
        AnnotatedSentence { sentence, tags, domain: None }
    }

    pub fn tokens(&self) -> &[Token] {
        &self.sentence.tokens
    }

    pub fn token_texts(&self) -> Vec<&str> {
        self.sentence.tokens.iter().map(|t| t.text.as_str()).collect()
    }

    pub fn spans(&self) -> Vec<Span<'_>> {
        spans(&self.tags)
    }

    pub fn tagged_tokens(&self) -> usize {
        self.tags.iter().filter(|t| !t.is_outside()).count()
    }

    pub fn to_line(&self) -> String {
        let tags: Vec<String> = self.tags.iter().map(Tag::to_string).collect();
        format!("{}\t{}\t{}", self.domain.as_deref().unwrap_or(""), self.token_texts().join(" "), tags.join(" "))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AnnotatedCorpus {
    pub sentences: Vec<AnnotatedSentence>,
    /// Provenance: snapshot id, pipeline config hash, noise mode, tag set.
    pub meta: BTreeMap<String, String>,
}

impl AnnotatedCorpus {
    pub fn new(sentences: Vec<AnnotatedSentence>) -> Self {
        AnnotatedCorpus { sentences, meta: BTreeMap::new() }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<String>) -> Self {
        self.meta.insert(key.to_owned(), value.into());
        self
    }

    pub fn to_tsv(&self) -> String {
        let mut out = format!("{CORPUS_HEADER}\n");
        for (k, v) in &self.meta {
            out.push_str(&format!("{META_PREFIX}{k}={v}\n"));
        }
        for s in &self.sentences {
            out.push_str(&s.to_line());
            out.push('\n');
        }
        out
    }

    /// CoNLL-style layout: `# domain:` comment, one `token TAB tag` per line,
    /// blank line between sentences.
    pub fn to_conll(&self) -> String {
        let mut out = String::new();
        for s in &self.sentences {
            out.push_str(&format!("# domain: {}\n", s.domain.as_deref().unwrap_or("")));
            for (tok, tag) in s.tokens().iter().zip(&s.tags) {
                out.push_str(&format!("{}\t{tag}\n", tok.text));
            }
            out.push('\n');
        }
        out
    }

    pub fn parse_str(input: &str) -> Result<Self> {
        let mut corpus = AnnotatedCorpus::default();
        let mut lines = input.lines().enumerate();
        match lines.next() {
            None => return Ok(corpus),
            Some((_, h)) if h.trim_end() == CORPUS_HEADER => {}
            Some(_) => return Err(Error::format(1, format!("missing {CORPUS_HEADER:?} header"))),
        }
        for (i, line) in lines {
            let lineno = i + 1;
            let line = line.trim_end_matches('\r');
            if let Some(kv) = line.strip_prefix(META_PREFIX) {
                let (k, v) = kv.split_once('=').ok_or_else(|| Error::format(lineno, "meta needs key=value"))?;
                corpus.meta.insert(k.to_owned(), v.to_owned());
                continue;
            }
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let sentence = parse_line(line, corpus.sentences.len()).map_err(|e| match e {
                Error::Format { message, .. } => Error::format(lineno, message),
                other => Error::format(lineno, other.to_string()),
            })?;
            corpus.sentences.push(sentence);
        }
        Ok(corpus)
    }

    pub fn parse_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_str(&text)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }
}

/// Parse one `domain TAB tokens TAB tags` row; extra columns are returned for
/// formats that extend the corpus layout.
pub(crate) fn parse_row(line: &str, index: usize) -> Result<(AnnotatedSentence, Vec<&str>)> {
    let mut cols = line.split('\t');
    let (Some(domain), Some(toks), Some(tags)) = (cols.next(), cols.next(), cols.next()) else {
        return Err(Error::format(0, "expected domain, tokens and tags columns"));
    };
    let extra: Vec<&str> = cols.collect();
    let toks: Vec<&str> = toks.split(' ').filter(|t| !t.is_empty()).collect();
    if toks.is_empty() {
        return Err(Error::format(0, "sentence without tokens"));
    }
    let tags = tags
        .split(' ')
        .filter(|t| !t.is_empty())
        .map(Tag::from_str)
        .collect::<Result<Vec<_>>>()?;
    let sentence = Sentence { doc_key: String::new(), index, tokens: tokens_from_texts(&toks) };
    let domain = (!domain.is_empty()).then(|| domain.to_owned());
    Ok((AnnotatedSentence::new(sentence, tags, domain)?, extra))
}

fn parse_line(line: &str, index: usize) -> Result<AnnotatedSentence> {
    let (s, extra) = parse_row(line, index)?;
    if !extra.is_empty() {
        return Err(Error::format(0, "expected exactly three columns"));
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tags(s: &str) -> Vec<Tag> {
        s.split(' ').map(|t| t.parse().unwrap()).collect()
    }

    #[test]
    fn tag_round_trip() {
        for s in ["O", "B-/film/film", "I-PERSON"] {
            assert_eq!(s.parse::<Tag>().unwrap().to_string(), s);
        }
        for bad in ["", "B-", "X-foo", "b-x"] {
            assert!(bad.parse::<Tag>().is_err(), "{bad}");
        }
    }

    #[test]
    fn spans_and_violations() {
        let t = tags("B-A I-A O B-B B-B I-B O");
        let s: Vec<_> = spans(&t).iter().map(|s| (s.start, s.end, s.label)).collect();
        assert_eq!(s, [(0, 2, "A"), (3, 4, "B"), (4, 6, "B")]);
        assert_eq!(first_iob_violation(&t), None);
        assert_eq!(first_iob_violation(&tags("O I-A")), Some(1));
        assert_eq!(first_iob_violation(&tags("B-A I-B")), Some(1));
    }

    #[test]
    fn corpus_round_trip() {
        let input = "#twnertc v1\n#meta noise=di\nfilm\tTitanic , James Cameron\tB-/film/film O B-/people/person I-/people/person\n\tkelime\tO\n";
        let c = AnnotatedCorpus::parse_str(input).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.meta["noise"], "di");
        assert!(c.sentences[0].tokens()[1].is_punct);
        assert_eq!(c.sentences[1].domain, None);
        assert_eq!(c.to_tsv(), input);
    }

    #[test]
    fn corpus_rejects_bad_rows() {
        let bad = [
            "#twnertc v1\nfilm\ta b\tO\n",
            "#twnertc v1\nfilm\ta\tI-X\n",
            "#twnertc v1\nfilm\ta\n",
            "#twnertc v1\nfilm\ta\tO\textra\n",
            "no header\n",
        ];
        for b in bad {
            assert!(AnnotatedCorpus::parse_str(b).is_err(), "{b:?}");
        }
        match AnnotatedCorpus::parse_str("#twnertc v1\nfilm\ta\tO\nfilm\ta b\tO\n") {
            Err(Error::Format { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        assert!(AnnotatedCorpus::parse_str("").unwrap().is_empty());
    }

    #[test]
    fn conll_layout() {
        let c = AnnotatedCorpus::parse_str("#twnertc v1\nfilm\tTitanic .\tB-MISC O\n").unwrap();
        assert_eq!(c.to_conll(), "# domain: film\nTitanic\tB-MISC\n.\tO\n\n");
    }
}
