//! Article dump reading, language filtering, sentence splitting and
//! tokenization.
//!
//! Dump files start with `#wikidump v1`; each further line is
//! `article_key TAB title TAB mid TAB text` with an empty mid column for
//! unlinked articles and `\n`, `\t`, `\\` escapes inside the text.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const DUMP_HEADER: &str = "#wikidump v1";

/// Documents scoring below this are treated as non-Turkish and dropped.
pub const DEFAULT_LANGUAGE_THRESHOLD: f64 = 0.5;

const TURKISH_STOPWORDS: &[&str] = &[
    "ve", "bir", "bu", "da", "de", "ne", "için", "çok", "ile", "gibi", "daha", "en", "o", "ki",
    "mi", "mı", "mu", "mü", "ama", "veya", "ya", "şu", "her", "olan", "olarak", "kadar", "sonra",
    "ancak", "hem", "ise", "diye", "değil", "ayrıca", "hiç", "tüm", "bütün", "göre", "az", "biz",
    "ben", "sen", "siz", "onlar", "şey", "nasıl", "neden", "niye", "çünkü", "yani", "eğer", "bazı",
    "hep", "iki", "var", "yok", "aynı", "önce", "üzere", "bile", "artık", "yine", "tarafından",
];

const ENGLISH_STOPWORDS: &[&str] = &[
    "the", "a", "an", "and", "or", "of", "to", "in", "on", "at", "is", "are", "was", "were", "be",
    "been", "it", "this", "that", "with", "for", "as", "by", "from", "over", "one", "most", "not",
    "but", "he", "she", "they", "his", "her", "its", "which", "who", "has", "have", "had", "will",
    "would",
];

const TURKISH_LETTERS: &[char] = &['ç', 'ğ', 'ı', 'İ', 'ö', 'ş', 'ü', 'Ç', 'Ğ', 'Ö', 'Ş', 'Ü'];

/// Weight of the stopword evidence; the remainder goes to letter evidence.
const STOPWORD_WEIGHT: f64 = 0.6;
/// Share of Turkish-specific letters at which letter evidence saturates.
const LETTER_SATURATION: f64 = 0.05;

/// Words whose trailing period never ends a sentence.
pub const ABBREVIATIONS: &[&str] = &[
    "Dr.", "Prof.", "Doç.", "Yrd.", "Av.", "Müh.", "Öğr.", "Gör.", "vb.", "vs.", "yy.", "bkz.",
    "Bkz.", "örn.", "Örn.", "St.", "Sn.", "No.", "Alb.", "Gen.", "Org.", "Cad.", "Sok.", "Mah.",
    "Apt.", "Mr.", "Mrs.", "Ms.", "Jr.", "vd.", "age.", "s.", "c.",
];

const TERMINATORS: &[char] = &['.', '!', '?', '…'];
const APOSTROPHES: &[char] = &['\'', '’'];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Document {
    pub article_key: String,
    pub title: String,
    pub mid: Option<String>,
    pub raw_text: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    /// Byte offsets into the sentence string.
    pub start: usize,
    pub end: usize,
    pub is_punct: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sentence {
    pub doc_key: String,
    pub index: usize,
    pub tokens: Vec<Token>,
}

/// Case handling for surface matching.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum CaseFolding {
    #[default]
    Sensitive,
    /// Lowercase with the Turkish dotted/dotless `i` rules.
    Turkish,
}

impl CaseFolding {
    pub fn apply<'a>(self, s: &'a str) -> std::borrow::Cow<'a, str> {
        match self {
            CaseFolding::Sensitive => s.into(),
            CaseFolding::Turkish => turkish_lowercase(s).into(),
        }
    }
}

/// Lowercase mapping `İ→i` and `I→ı`, never `I→i`.
pub fn turkish_lowercase(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            'İ' => out.push('i'),
            'I' => out.push('ı'),
            c => out.extend(c.to_lowercase()),
        }
    }
    out
}

/// Turkishness score in `[0, 1]`.
///
/// Mixes the Turkish share of recognised stopwords (0.5 when none are found)
/// with the rate of Turkish-specific letters among all letters, saturating
/// at 5%.
pub fn detect_language(text: &str) -> Result<f64> {
    if text.trim().is_empty() {
        return Err(Error::EmptyText);
    }
    let mut tr = 0usize;
    let mut en = 0usize;
    for word in text.split(|c: char| !c.is_alphabetic()).filter(|w| !w.is_empty()) {
        let w = turkish_lowercase(word);
        if TURKISH_STOPWORDS.contains(&w.as_str()) {
            tr += 1;
        }
        if ENGLISH_STOPWORDS.contains(&w.as_str()) {
            en += 1;
        }
    }
    let stop = if tr + en > 0 { tr as f64 / (tr + en) as f64 } else { 0.5 };
    let letters = text.chars().filter(|c| c.is_alphabetic()).count();
    let special = text.chars().filter(|c| TURKISH_LETTERS.contains(c)).count();
    let chars = if letters == 0 {
        0.0
    } else {
        ((special as f64 / letters as f64) / LETTER_SATURATION).min(1.0)
    };
    Ok(STOPWORD_WEIGHT * stop + (1.0 - STOPWORD_WEIGHT) * chars)
}

fn split_paragraphs(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut iter = text.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        if c != '\n' {
            continue;
        }
        let rest = &text[i + 1..];
        let gap = rest.len() - rest.trim_start_matches([' ', '\t', '\r']).len();
        if rest[gap..].starts_with('\n') {
            out.push(&text[start..i]);
            start = i + 1 + gap + 1;
            while iter.peek().is_some_and(|(j, _)| *j < start) {
                iter.next();
            }
        }
    }
    out.push(&text[start..]);
    out
}

fn suppresses_split(para: &str, dot: usize) -> bool {
    let word_start = para[..dot].rfind(char::is_whitespace).map_or(0, |i| {
        i + para[i..].chars().next().map_or(1, char::len_utf8)
    });
    let word = &para[word_start..=dot];
    if ABBREVIATIONS.contains(&word) {
        return true;
    }
    let mut chars = word.chars();
    matches!((chars.next(), chars.next(), chars.next()), (Some(c), Some('.'), None) if c.is_uppercase())
}

/// Rule-based sentence splitter.
///
/// Splits after `.`, `!`, `?` or `…` (the last of a run) when whitespace and
/// then an uppercase letter or digit follow, unless the period closes a known
/// abbreviation or a single-letter initial. Blank lines always split.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for para in split_paragraphs(text) {
        let chars: Vec<(usize, char)> = para.char_indices().collect();
        let mut start = 0usize;
        let mut i = 0usize;
        while i < chars.len() {
            let (pos, c) = chars[i];
            let run_continues = chars.get(i + 1).is_some_and(|(_, n)| TERMINATORS.contains(n));
            if TERMINATORS.contains(&c) && !run_continues {
                let mut k = i + 1;
                while k < chars.len() && chars[k].1.is_whitespace() {
                    k += 1;
                }
                let next_ok = chars
                    .get(k)
                    .is_some_and(|(_, n)| n.is_uppercase() || n.is_ascii_digit());
                if k > i + 1 && next_ok && !(c == '.' && suppresses_split(para, pos)) {
                    let end = pos + c.len_utf8();
                    let piece = para[start..end].trim();
                    if !piece.is_empty() {
                        out.push(piece.to_owned());
                    }
                    start = chars[k].0;
                    i = k;
                    continue;
                }
            }
            i += 1;
        }
        let piece = para[start..].trim();
        if !piece.is_empty() {
            out.push(piece.to_owned());
        }
    }
    out
}

/// True for tokens without any letter or digit.
pub fn is_punct_token(text: &str) -> bool {
    !text.chars().any(char::is_alphanumeric)
}

/// Whitespace tokenizer that splits punctuation into single-character tokens,
/// keeps decimal numbers whole and splits Turkish suffixes at the apostrophe
/// (`Ankara'da` → `Ankara`, `'da`).
pub fn tokenize(sentence: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut cur: Option<usize> = None;
    let chars: Vec<(usize, char)> = sentence.char_indices().collect();
    let push_word = |tokens: &mut Vec<Token>, from: usize, to: usize| {
        tokens.push(Token { text: sentence[from..to].to_owned(), start: from, end: to, is_punct: false });
    };
    for (i, &(pos, c)) in chars.iter().enumerate() {
        let next = chars.get(i + 1).map(|&(_, n)| n);
        if c.is_whitespace() {
            if let Some(s) = cur.take() {
                push_word(&mut tokens, s, pos);
            }
        } else if c.is_alphanumeric() {
            cur.get_or_insert(pos);
        } else if APOSTROPHES.contains(&c) && next.is_some_and(char::is_alphabetic) {
            if let Some(s) = cur.take() {
                push_word(&mut tokens, s, pos);
            }
            cur = Some(pos);
        } else if (c == '.' || c == ',')
            && cur.is_some()
            && i > 0
            && chars[i - 1].1.is_ascii_digit()
            && next.is_some_and(|n| n.is_ascii_digit())
        {
            // decimal or thousands separator stays inside the number
        } else {
            if let Some(s) = cur.take() {
                push_word(&mut tokens, s, pos);
            }
            let end = pos + c.len_utf8();
            tokens.push(Token { text: c.to_string(), start: pos, end, is_punct: true });
        }
    }
    if let Some(s) = cur {
        push_word(&mut tokens, s, sentence.len());
    }
    tokens
}

/// Rebuild tokens for already-tokenized text, as read back from a corpus
/// file: offsets assume single-space joins.
pub fn tokens_from_texts<S: AsRef<str>>(texts: &[S]) -> Vec<Token> {
    let mut pos = 0;
    texts
        .iter()
        .map(|t| {
            let t = t.as_ref();
            let tok = Token {
                text: t.to_owned(),
                start: pos,
                end: pos + t.len(),
                is_punct: is_punct_token(t),
            };
            pos += t.len() + 1;
            tok
        })
        .collect()
}

/// Split and tokenize a document into sentences keyed by `doc_key`.
pub fn sentences_of(doc_key: &str, text: &str) -> Vec<Sentence> {
    split_sentences(text)
        .iter()
        .enumerate()
        .map(|(index, s)| Sentence { doc_key: doc_key.to_owned(), index, tokens: tokenize(s) })
        .filter(|s| !s.tokens.is_empty())
        .collect()
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('t') => out.push('\t'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('\n', "\\n").replace('\t', "\\t")
}

/// Articles indexed by key, with a secondary index by linked mid.
#[derive(Clone, Debug, Default)]
pub struct Dump {
    docs: BTreeMap<String, Document>,
    by_mid: HashMap<String, String>,
}

impl Dump {
    pub fn new(docs: impl IntoIterator<Item = Document>) -> Result<Self> {
        let mut dump = Dump::default();
        for d in docs {
            if dump.docs.contains_key(&d.article_key) {
                return Err(Error::Invalid(format!("duplicate article key {:?}", d.article_key)));
            }
            if let Some(m) = &d.mid {
                dump.by_mid.entry(m.clone()).or_insert_with(|| d.article_key.clone());
            }
            dump.docs.insert(d.article_key.clone(), d);
        }
        Ok(dump)
    }

    pub fn parse_str(input: &str) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        match lines.next() {
            None => return Ok(Dump::default()),
            Some((_, h)) if h.trim_end() == DUMP_HEADER => {}
            Some(_) => return Err(Error::format(1, format!("missing {DUMP_HEADER:?} header"))),
        }
        let mut docs = Vec::new();
        let mut keys = std::collections::HashSet::new();
        for (i, line) in lines {
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.splitn(4, '\t').collect();
            let [key, title, mid, text] = cols.as_slice() else {
                return Err(Error::format(i + 1, "expected 4 tab-separated columns"));
            };
            if key.is_empty() {
                return Err(Error::format(i + 1, "empty article key"));
            }
            if !keys.insert(key.to_string()) {
                return Err(Error::format(i + 1, format!("duplicate article key {key:?}")));
            }
            docs.push(Document {
                article_key: key.to_string(),
                title: title.to_string(),
                mid: (!mid.is_empty()).then(|| mid.to_string()),
                raw_text: unescape(text),
            });
        }
        Dump::new(docs)
    }

    pub fn parse_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_str(&text)
    }

    pub fn to_dump_string(&self) -> String {
        let mut out = format!("{DUMP_HEADER}\n");
        for d in self.docs.values() {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                d.article_key,
                d.title,
                d.mid.as_deref().unwrap_or(""),
                escape(&d.raw_text)
            ));
        }
        out
    }

    pub fn get(&self, article_key: &str) -> Option<&Document> {
        self.docs.get(article_key)
    }

    /// First article (by key) linked to `mid`.
    pub fn by_mid(&self, mid: &str) -> Option<&Document> {
        self.by_mid.get(mid).and_then(|k| self.docs.get(k))
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn documents(&self) -> impl Iterator<Item = &Document> {
        self.docs.values()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn texts(s: &str) -> Vec<String> {
        tokenize(s).into_iter().map(|t| t.text).collect()
    }

    #[test]
    fn tokenizes_oracle_examples() {
        assert_eq!(
            texts("Titanic, James Cameron tarafından yönetildi."),
            ["Titanic", ",", "James", "Cameron", "tarafından", "yönetildi", "."]
        );
        assert_eq!(texts("Ankara'da yaşıyor."), ["Ankara", "'da", "yaşıyor", "."]);
        assert_eq!(texts("kelime"), ["kelime"]);
        assert_eq!(
            texts("Fiyat 3.5 lira, yani 1.000 kuruş değil!"),
            ["Fiyat", "3.5", "lira", ",", "yani", "1.000", "kuruş", "değil", "!"]
        );
    }

    #[test]
    fn punct_flags_and_offsets() {
        let s = "Ankara’da, dün.";
        let toks = tokenize(s);
        let flags: Vec<bool> = toks.iter().map(|t| t.is_punct).collect();
        assert_eq!(flags, [false, false, true, false, true]);
        for t in &toks {
            assert_eq!(&s[t.start..t.end], t.text);
        }
        assert!(tokenize("").is_empty());
        assert_eq!(texts("'"), ["'"]);
    }

    #[test]
    fn splits_oracle_examples() {
        assert_eq!(
            split_sentences("Ankara başkenttir. Nüfusu büyüktür."),
            ["Ankara başkenttir.", "Nüfusu büyüktür."]
        );
        assert_eq!(split_sentences("Dr. Ahmet geldi."), ["Dr. Ahmet geldi."]);
        assert!(split_sentences("").is_empty());
        assert_eq!(
            split_sentences("J. R. R. Tolkien yazdı. Kitap 1954'te çıktı."),
            ["J. R. R. Tolkien yazdı.", "Kitap 1954'te çıktı."]
        );
        assert_eq!(split_sentences("Gerçekten mi?! Evet."), ["Gerçekten mi?!", "Evet."]);
        assert_eq!(
            split_sentences("Birinci paragraf\n\nikinci paragraf"),
            ["Birinci paragraf", "ikinci paragraf"]
        );
    }

    #[test]
    fn lowercase_continuation_does_not_split() {
        assert_eq!(split_sentences("Saat 3. sırada geldi."), ["Saat 3. sırada geldi."]);
        assert_eq!(split_sentences("Bitti.Sonra"), ["Bitti.Sonra"]);
        assert_eq!(split_sentences("  \n \n\n  "), Vec::<String>::new());
    }

    #[test]
    fn language_scores_match_oracle() {
        assert_eq!(detect_language("the quick brown fox jumps over the lazy dog").unwrap(), 0.0);
        assert_eq!(detect_language("ve bir bu da ne için çok").unwrap(), 1.0);
        assert!((detect_language("Titanic").unwrap() - 0.3).abs() < 1e-12);
        assert!(matches!(detect_language(""), Err(Error::EmptyText)));
        assert!(matches!(detect_language(" \n"), Err(Error::EmptyText)));
    }

    #[test]
    fn turkish_folding() {
        assert_eq!(turkish_lowercase("İSTANBUL IRMAK"), "istanbul ırmak");
        assert_eq!(CaseFolding::Sensitive.apply("Irmak"), "Irmak");
    }

    #[test]
    fn dump_round_trip_and_escapes() {
        let input = "#wikidump v1\nA\tTitle A\tm.1\tbir\\niki\\tüç \\\\ son\nB\tTitle B\t\tmetin\n";
        let dump = Dump::parse_str(input).unwrap();
        assert_eq!(dump.get("A").unwrap().raw_text, "bir\niki\tüç \\ son");
        assert_eq!(dump.by_mid("m.1").unwrap().article_key, "A");
        assert!(dump.get("B").unwrap().mid.is_none());
        assert_eq!(dump.to_dump_string(), input);
        assert!(Dump::parse_str("").unwrap().is_empty());
        assert!(Dump::parse_str("#wikidump v1\nonly\ttwo\n").is_err());
        assert!(Dump::parse_str("#wikidump v1\nA\tt\t\tx\nA\tt\t\ty\n").is_err());
    }

    proptest! {
        #[test]
        fn tokens_cover_every_non_space_char(s in "[a-zA-ZçğıİöşüÇĞÖŞÜ0-9 .,'’!?()\\-]{0,40}") {
            let toks = tokenize(&s);
            let mut covered = vec![false; s.len()];
            let mut last_end = 0;
            for t in &toks {
                prop_assert!(t.start < t.end);
                prop_assert!(t.start >= last_end);
                last_end = t.end;
                prop_assert_eq!(&s[t.start..t.end], t.text.as_str());
                for c in covered.iter_mut().take(t.end).skip(t.start) {
                    *c = true;
                }
            }
            for (i, c) in s.char_indices() {
                prop_assert_eq!(covered[i], !c.is_whitespace());
            }
        }

        #[test]
        fn tokenize_is_idempotent_on_joined_output(s in "[a-zA-Zçğış0-9 .,'!?]{0,40}") {
            let once = texts(&s);
            let twice = texts(&once.join(" "));
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn split_never_yields_empty(s in "[a-zA-Z0-9 .!?…\n]{0,60}") {
            for piece in split_sentences(&s) {
                prop_assert!(!piece.trim().is_empty());
            }
        }

        #[test]
        fn language_score_in_unit_interval(s in "\\PC{1,60}") {
            if let Ok(v) = detect_language(&s) {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
