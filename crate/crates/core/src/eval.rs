//! Agreement merging and scoring of automatic annotations against ground
//! truth.
//!
//! All scores are computed on tokens with IOB prefixes stripped, so only the
//! entity type is compared. Every metric is generic over [`Scalar`]; use
//! `f64` for reports and [`crate::Rational`] for exact checks.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::ops::{Add, AddAssign};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coarse::CoarseLabel;
use crate::corpus::{parse_row, AnnotatedCorpus, AnnotatedSentence, CORPUS_HEADER};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Entity type of a tag with its `B-`/`I-` prefix removed; `None` for `O`.
pub fn strip_iob(tag: &str) -> Option<&str> {
    match tag {
        "O" | "" => None,
        t => Some(t.strip_prefix("B-").or_else(|| t.strip_prefix("I-")).unwrap_or(t)),
    }
}

fn check_len(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::LengthMismatch { left: a, right: b })
    }
}

fn corpus_tags(c: &AnnotatedCorpus) -> Vec<Vec<String>> {
    c.sentences.iter().map(|s| s.tags.iter().map(ToString::to_string).collect()).collect()
}

/// Flatten two corpora into aligned tag sequences.
fn aligned_tags(auto: &AnnotatedCorpus, gt: &AnnotatedCorpus) -> Result<(Vec<String>, Vec<String>)> {
    check_len(auto.len(), gt.len())?;
    let (a, g) = (corpus_tags(auto), corpus_tags(gt));
    for (x, y) in a.iter().zip(&g) {
        check_len(x.len(), y.len())?;
    }
    Ok((a.concat(), g.concat()))
}

// ---------------------------------------------------------------- judgments

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Replacement label for a coarse unit.
    Label(CoarseLabel),
    /// Types or domains from most to least relevant.
    Ranking(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SpanKey {
    pub sentence: String,
    pub span: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub annotator: String,
    #[serde(flatten)]
    pub key: SpanKey,
    pub verdict: Verdict,
}

/// Outcome of merging the votes on one span.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Merged<L> {
    pub label: L,
    /// Votes for the most popular choice.
    pub agreement: usize,
    pub votes: usize,
    /// False when no choice reached the quorum and the automatic label stayed.
    pub merged: bool,
}

/// Quorum vote: a label chosen by at least `quorum` annotators replaces the
/// automatic one. Two labels tied at the top count as no agreement.
pub fn merge_votes<L: Ord + Clone>(auto: &L, votes: &[L], quorum: usize) -> Merged<L> {
    let mut counts: BTreeMap<&L, usize> = BTreeMap::new();
    for v in votes {
        *counts.entry(v).or_default() += 1;
    }
    let top = counts.values().copied().max().unwrap_or(0);
    let leaders: Vec<&L> = counts.iter().filter(|(_, c)| **c == top).map(|(l, _)| *l).collect();
    let merged = quorum > 0 && top >= quorum && leaders.len() == 1;
    Merged {
        label: if merged { leaders[0].clone() } else { auto.clone() },
        agreement: top,
        votes: votes.len(),
        merged,
    }
}

/// Effective verdicts: the last judgment of each annotator on each span.
pub fn effective_judgments(judgments: &[Judgment]) -> BTreeMap<SpanKey, Vec<(&str, &Verdict)>> {
    let mut latest: BTreeMap<(&SpanKey, &str), (usize, &Verdict)> = BTreeMap::new();
    for (i, j) in judgments.iter().enumerate() {
        latest.insert((&j.key, j.annotator.as_str()), (i, &j.verdict));
    }
    let mut out: BTreeMap<SpanKey, Vec<(usize, &str, &Verdict)>> = BTreeMap::new();
    for ((k, a), (i, v)) in latest {
        out.entry(k.clone()).or_default().push((i, a, v));
    }
    out.into_iter()
        .map(|(k, mut vs)| {
            vs.sort_by_key(|(i, _, _)| *i);
            (k, vs.into_iter().map(|(_, a, v)| (a, v)).collect())
        })
        .collect()
}

/// Merge coarse judgments span by span. Spans without votes keep their
/// automatic label.
pub fn merge_judgments(
    judgments: &[Judgment],
    auto: &BTreeMap<SpanKey, CoarseLabel>,
    quorum: usize,
) -> Result<BTreeMap<SpanKey, Merged<CoarseLabel>>> {
    if quorum == 0 {
        return Err(Error::Invalid("quorum must be at least 1".into()));
    }
    let eff = effective_judgments(judgments);
    for k in eff.keys() {
        if !auto.contains_key(k) {
            return Err(Error::UnknownSpan { sentence: k.sentence.clone(), span: k.span });
        }
    }
    let mut out = BTreeMap::new();
    for (k, a) in auto {
        let votes = eff
            .get(k)
            .map(|vs| {
                vs.iter()
                    .map(|(_, v)| match v {
                        Verdict::Label(l) => Ok(*l),
                        Verdict::Ranking(_) => Err(Error::InvalidVerdict("ranking on a coarse span".into())),
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .transpose()?
            .unwrap_or_default();
        out.insert(k.clone(), merge_votes(a, &votes, quorum));
    }
    Ok(out)
}

/// Combine annotator rankings by mean rank. An item an annotator did not
/// rank counts as one past the end of that annotator's list; ties keep the
/// order in which items were first seen. At most `limit` items are kept.
pub fn merge_rankings(rankings: &[Vec<String>], limit: usize) -> Vec<String> {
    let mut first_seen: Vec<&str> = Vec::new();
    for r in rankings {
        for t in r {
            if !first_seen.contains(&t.as_str()) {
                first_seen.push(t);
            }
        }
    }
    // Every item is scored over the same annotators, so rank sums order
    // exactly like means.
    let mut scored: Vec<(usize, usize, &str)> = first_seen
        .iter()
        .enumerate()
        .map(|(order, t)| {
            let sum = rankings
                .iter()
                .map(|r| r.iter().position(|x| x == t).map_or(r.len() + 1, |p| p + 1))
                .sum();
            (sum, order, *t)
        })
        .collect();
    scored.sort();
    scored.into_iter().take(limit).map(|(_, _, t)| t.to_owned()).collect()
}

// ---------------------------------------------------------------- accounting

/// Token-level comparison of an automatic annotation with ground truth.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct DiffAccounting {
    /// `O` in the annotation, a type in ground truth.
    pub added: usize,
    /// A type in the annotation, `O` in ground truth.
    pub removed: usize,
    pub changed: usize,
    pub same: usize,
    pub auto_total: usize,
    pub gt_total: usize,
}

impl DiffAccounting {
    /// `auto_total = removed + changed + same` and
    /// `gt_total = added + changed + same`.
    pub fn identities_hold(&self) -> bool {
        self.auto_total == self.removed + self.changed + self.same
            && self.gt_total == self.added + self.changed + self.same
    }

    /// Ratios that could be read as "matching ratio without `O` and added
    /// types".
    pub fn matching_ratios<S: Scalar>(&self) -> MatchingRatios<S> {
        MatchingRatios {
            same_over_kept: S::ratio(self.same, self.same + self.changed),
            same_over_auto: S::ratio(self.same, self.auto_total),
            same_over_gt: S::ratio(self.same, self.gt_total),
        }
    }
}

impl Add for DiffAccounting {
    type Output = Self;

    fn add(mut self, o: Self) -> Self {
        self += o;
        self
    }
}

impl AddAssign for DiffAccounting {
    fn add_assign(&mut self, o: Self) {
        self.added += o.added;
        self.removed += o.removed;
        self.changed += o.changed;
        self.same += o.same;
        self.auto_total += o.auto_total;
        self.gt_total += o.gt_total;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MatchingRatios<S> {
    /// `same / (same + changed)`.
    pub same_over_kept: S,
    pub same_over_auto: S,
    pub same_over_gt: S,
}

pub fn diff_annotations<T: AsRef<str>>(auto: &[T], gt: &[T]) -> Result<DiffAccounting> {
    check_len(auto.len(), gt.len())?;
    let mut d = DiffAccounting::default();
    for (a, g) in auto.iter().zip(gt) {
        match (strip_iob(a.as_ref()), strip_iob(g.as_ref())) {
            (None, None) => {}
            (None, Some(_)) => d.added += 1,
            (Some(_), None) => d.removed += 1,
            (Some(x), Some(y)) if x == y => d.same += 1,
            (Some(_), Some(_)) => d.changed += 1,
        }
        d.auto_total += usize::from(strip_iob(a.as_ref()).is_some());
        d.gt_total += usize::from(strip_iob(g.as_ref()).is_some());
    }
    Ok(d)
}

pub fn diff_corpora(auto: &AnnotatedCorpus, gt: &AnnotatedCorpus) -> Result<DiffAccounting> {
    let (a, g) = aligned_tags(auto, gt)?;
    diff_annotations(&a, &g)
}

// ---------------------------------------------------------------- P/R/F1

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Prf<S> {
    pub precision: S,
    pub recall: S,
    pub f1: S,
}

impl<S: Scalar> Prf<S> {
    pub fn new(precision: S, recall: S) -> Self {
        Prf { precision, recall, f1: S::f1(precision, recall) }
    }

    pub fn from_counts(correct: usize, predicted: usize, gold: usize) -> Self {
        Self::new(S::ratio(correct, predicted), S::ratio(correct, gold))
    }

    pub fn to_f64(&self) -> Prf<f64> {
        Prf { precision: self.precision.to_f64(), recall: self.recall.to_f64(), f1: self.f1.to_f64() }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Unweighted mean of the per-label scores.
    #[default]
    Macro,
    /// Scores over pooled counts.
    Micro,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct LabelCounts {
    pub correct: usize,
    pub predicted: usize,
    pub gold: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LabelScores<S> {
    pub per_label: BTreeMap<String, Prf<S>>,
    pub counts: BTreeMap<String, LabelCounts>,
    pub averaging: Averaging,
    pub average: Prf<S>,
}

impl<S: Scalar> LabelScores<S> {
    pub fn to_f64(&self) -> LabelScores<f64> {
        LabelScores {
            per_label: self.per_label.iter().map(|(k, v)| (k.clone(), v.to_f64())).collect(),
            counts: self.counts.clone(),
            averaging: self.averaging,
            average: self.average.to_f64(),
        }
    }
}

/// Token-level per-label precision, recall and F1. `O` is never a label;
/// labels absent from both sides do not appear and do not enter the average.
pub fn coarse_prf<S: Scalar, T: AsRef<str>>(pred: &[T], gold: &[T], averaging: Averaging) -> Result<LabelScores<S>> {
    check_len(pred.len(), gold.len())?;
    let mut counts: BTreeMap<String, LabelCounts> = BTreeMap::new();
    for (p, g) in pred.iter().zip(gold) {
        let (p, g) = (strip_iob(p.as_ref()), strip_iob(g.as_ref()));
        if let Some(p) = p {
            counts.entry(p.to_owned()).or_default().predicted += 1;
        }
        if let Some(g) = g {
            counts.entry(g.to_owned()).or_default().gold += 1;
            if p == Some(g) {
                counts.entry(g.to_owned()).or_default().correct += 1;
            }
        }
    }
    let per_label: BTreeMap<String, Prf<S>> =
        counts.iter().map(|(l, c)| (l.clone(), Prf::from_counts(c.correct, c.predicted, c.gold))).collect();
    let average = match averaging {
        Averaging::Macro => Prf {
            precision: S::mean(per_label.values().map(|p| p.precision)),
            recall: S::mean(per_label.values().map(|p| p.recall)),
            f1: S::mean(per_label.values().map(|p| p.f1)),
        },
        Averaging::Micro => {
            let total = counts.values().fold(LabelCounts::default(), |a, c| LabelCounts {
                correct: a.correct + c.correct,
                predicted: a.predicted + c.predicted,
                gold: a.gold + c.gold,
            });
            Prf::from_counts(total.correct, total.predicted, total.gold)
        }
    };
    Ok(LabelScores { per_label, counts, averaging, average })
}

pub fn coarse_prf_corpora<S: Scalar>(
    auto: &AnnotatedCorpus,
    gt: &AnnotatedCorpus,
    averaging: Averaging,
) -> Result<LabelScores<S>> {
    let (a, g) = aligned_tags(auto, gt)?;
    coarse_prf(&a, &g, averaging)
}

// ---------------------------------------------------------------- typing F1

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TypingScores<S> {
    pub strict: Prf<S>,
    pub loose_macro: Prf<S>,
    pub loose_micro: Prf<S>,
}

impl<S: Scalar> TypingScores<S> {
    /// `(strict, loose macro, loose micro)` F1.
    pub fn f1s(&self) -> (S, S, S) {
        (self.strict.f1, self.loose_macro.f1, self.loose_micro.f1)
    }

    pub fn to_f64(&self) -> TypingScores<f64> {
        TypingScores {
            strict: self.strict.to_f64(),
            loose_macro: self.loose_macro.to_f64(),
            loose_micro: self.loose_micro.to_f64(),
        }
    }
}

/// Strict, loose-macro and loose-micro scores for entity typing.
///
/// Precision terms range over entities with a non-empty prediction, recall
/// terms over all entities. Every gold set must be non-empty.
pub fn fine_grained_f1<S: Scalar, T: Ord>(pred: &[BTreeSet<T>], gold: &[BTreeSet<T>]) -> Result<TypingScores<S>> {
    check_len(pred.len(), gold.len())?;
    if let Some(i) = gold.iter().position(BTreeSet::is_empty) {
        return Err(Error::Invalid(format!("entity {i} has an empty gold type set")));
    }
    let n = gold.len();
    let predicted = pred.iter().filter(|p| !p.is_empty()).count();
    let exact = pred.iter().zip(gold).filter(|(p, g)| p == g).count();

    let mut p_sum = S::zero();
    let mut r_sum = S::zero();
    let (mut inter, mut pred_total, mut gold_total) = (0, 0, 0);
    for (p, g) in pred.iter().zip(gold) {
        let i = p.intersection(g).count();
        if !p.is_empty() {
            p_sum = p_sum + S::ratio(i, p.len());
        }
        r_sum = r_sum + S::ratio(i, g.len());
        inter += i;
        pred_total += p.len();
        gold_total += g.len();
    }
    let over = |sum: S, count: usize| if count == 0 { S::zero() } else { sum / S::from_count(count) };
    Ok(TypingScores {
        strict: Prf::from_counts(exact, predicted, n),
        loose_macro: Prf::new(over(p_sum, predicted), over(r_sum, n)),
        loose_micro: Prf::from_counts(inter, pred_total, gold_total),
    })
}

// ---------------------------------------------------------------- top-k

pub const DEFAULT_KS: [usize; 3] = [1, 3, 5];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TopK<S> {
    pub items: usize,
    pub rates: BTreeMap<usize, S>,
}

impl<S: Scalar> TopK<S> {
    pub fn rate(&self, k: usize) -> Option<S> {
        self.rates.get(&k).copied()
    }

    /// Rates never decrease as `k` grows.
    pub fn is_monotone(&self) -> bool {
        self.rates.values().zip(self.rates.values().skip(1)).all(|(a, b)| a <= b)
    }

    pub fn to_f64(&self) -> TopK<f64> {
        TopK { items: self.items, rates: self.rates.iter().map(|(k, v)| (*k, v.to_f64())).collect() }
    }
}

/// Fraction of items whose reference is among the first `k` ranked entries.
pub fn topk_agreement<S: Scalar, T: PartialEq>(ranked: &[Vec<T>], reference: &[T], ks: &[usize]) -> Result<TopK<S>> {
    check_len(ranked.len(), reference.len())?;
    if let Some(k) = ks.iter().find(|k| **k == 0) {
        return Err(Error::Invalid(format!("k must be at least 1, got {k}")));
    }
    if let Some(i) = ranked.iter().position(Vec::is_empty) {
        return Err(Error::Invalid(format!("item {i} has an empty ranking")));
    }
    let positions: Vec<Option<usize>> =
        ranked.iter().zip(reference).map(|(r, x)| r.iter().position(|y| y == x)).collect();
    let rates = ks
        .iter()
        .map(|&k| {
            let hits = positions.iter().filter(|p| p.is_some_and(|p| p < k)).count();
            (k, S::ratio(hits, ranked.len()))
        })
        .collect();
    Ok(TopK { items: ranked.len(), rates })
}

// ---------------------------------------------------------------- ground truth

pub const GROUND_TRUTH_HEADER: &str = "#twnertc-gt v1";

/// One sentence of ground truth: the reference tags plus, per judged unit,
/// the reference choices (one label, or a ranked list) and the number of
/// annotators agreeing with the first choice.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundTruthRow {
    pub sentence: AnnotatedSentence,
    pub refs: Vec<Vec<String>>,
    pub agreement: Vec<usize>,
}

/// Ground-truth file: the corpus layout with two extra columns, `refs`
/// (space-separated units, choices joined by `|`) and `agreement`
/// (space-separated counts).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GroundTruth {
    pub rows: Vec<GroundTruthRow>,
    pub meta: BTreeMap<String, String>,
}

impl GroundTruth {
    pub fn corpus(&self) -> AnnotatedCorpus {
        AnnotatedCorpus {
            sentences: self.rows.iter().map(|r| r.sentence.clone()).collect(),
            meta: self.meta.clone(),
        }
    }

    pub fn to_tsv(&self) -> String {
        let mut out = format!("{GROUND_TRUTH_HEADER}\n");
        for (k, v) in &self.meta {
            out.push_str(&format!("#meta {k}={v}\n"));
        }
        for r in &self.rows {
            let refs: Vec<String> = r.refs.iter().map(|c| c.join("|")).collect();
            let agr: Vec<String> = r.agreement.iter().map(ToString::to_string).collect();
            out.push_str(&format!("{}\t{}\t{}\n", r.sentence.to_line(), refs.join(" "), agr.join(" ")));
        }
        out
    }

    pub fn parse_str(input: &str) -> Result<Self> {
        let mut gt = GroundTruth::default();
        let mut lines = input.lines().enumerate();
        match lines.next() {
            None => return Ok(gt),
            Some((_, h)) if h.trim_end() == GROUND_TRUTH_HEADER || h.trim_end() == CORPUS_HEADER => {}
            Some(_) => return Err(Error::format(1, format!("missing {GROUND_TRUTH_HEADER:?} header"))),
        }
        for (i, line) in lines {
            let lineno = i + 1;
            let line = line.trim_end_matches('\r');
            if let Some(kv) = line.strip_prefix("#meta ") {
                let (k, v) = kv.split_once('=').ok_or_else(|| Error::format(lineno, "meta needs key=value"))?;
                gt.meta.insert(k.to_owned(), v.to_owned());
                continue;
            }
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (sentence, extra) = parse_row(line, gt.rows.len()).map_err(|e| Error::format(lineno, e.to_string()))?;
            let (refs, agreement) = match extra[..] {
                [] => (Vec::new(), Vec::new()),
                [refs, agr] => {
                    let refs: Vec<Vec<String>> = refs
                        .split(' ')
                        .filter(|s| !s.is_empty())
                        .map(|u| u.split('|').map(str::to_owned).collect())
                        .collect();
                    let agr = agr
                        .split(' ')
                        .filter(|s| !s.is_empty())
                        .map(|n| n.parse::<usize>().map_err(|_| Error::format(lineno, "bad agreement count")))
                        .collect::<Result<Vec<_>>>()?;
                    if refs.len() != agr.len() {
                        return Err(Error::format(lineno, "refs and agreement differ in length"));
                    }
                    (refs, agr)
                }
                _ => return Err(Error::format(lineno, "expected 3 or 5 columns")),
            };
            gt.rows.push(GroundTruthRow { sentence, refs, agreement });
        }
        Ok(gt)
    }

    pub fn parse_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_str(&text)
    }
}

/// Per-span predicted type sets keyed by `(sentence index, span index)`,
/// read from `sentence TAB span TAB type1|type2|...` lines.
pub fn parse_prediction_sidecar(input: &str) -> Result<HashMap<(usize, usize), BTreeSet<String>>> {
    let mut out = HashMap::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || Error::format(i + 1, "expected `sentence TAB span TAB type|type...`");
        let mut cols = line.split('\t');
        let (Some(s), Some(sp), Some(ts), None) = (cols.next(), cols.next(), cols.next(), cols.next()) else {
            return Err(bad());
        };
        let key = (s.parse().map_err(|_| bad())?, sp.parse().map_err(|_| bad())?);
        out.insert(key, ts.split('|').filter(|t| !t.is_empty()).map(str::to_owned).collect());
    }
    Ok(out)
}

/// Typing scores of an automatic fine corpus against ranked ground truth.
/// The gold set of a span is the first reference choice; the predicted set
/// comes from `predictions` when present, else the span's own type.
pub fn fine_eval_against<S: Scalar>(
    auto: &AnnotatedCorpus,
    gt: &GroundTruth,
    predictions: Option<&HashMap<(usize, usize), BTreeSet<String>>>,
) -> Result<(TypingScores<S>, TopK<S>)> {
    check_len(auto.len(), gt.rows.len())?;
    let (mut pred, mut gold, mut ranked, mut reference) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (si, (s, row)) in auto.sentences.iter().zip(&gt.rows).enumerate() {
        let spans = s.spans();
        if row.refs.is_empty() && !spans.is_empty() {
            return Err(Error::Invalid(format!("ground-truth row {si} has no ranked references")));
        }
        check_len(spans.len(), row.refs.len())?;
        for (k, (sp, refs)) in spans.iter().zip(&row.refs).enumerate() {
            let Some(top) = refs.first() else {
                return Err(Error::Invalid(format!("sentence {si} span {k} has no reference")));
            };
            gold.push(BTreeSet::from([top.clone()]));
            pred.push(match predictions.and_then(|p| p.get(&(si, k))) {
                Some(set) => set.clone(),
                None => BTreeSet::from([sp.label.to_owned()]),
            });
            ranked.push(refs.clone());
            reference.push(sp.label.to_owned());
        }
    }
    Ok((fine_grained_f1(&pred, &gold)?, topk_agreement(&ranked, &reference, &DEFAULT_KS)?))
}

/// Agreement of sentence domains with ranked reference domains.
pub fn domain_topk<S: Scalar>(auto: &AnnotatedCorpus, gt: &GroundTruth) -> Result<TopK<S>> {
    check_len(auto.len(), gt.rows.len())?;
    let mut ranked = Vec::new();
    let mut reference = Vec::new();
    for (i, (s, row)) in auto.sentences.iter().zip(&gt.rows).enumerate() {
        let r = row.refs.first().cloned().ok_or_else(|| Error::Invalid(format!("sentence {i} has no reference")))?;
        ranked.push(r);
        reference.push(s.domain.clone().ok_or(Error::MissingDomain(i))?);
    }
    topk_agreement(&ranked, &reference, &DEFAULT_KS)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diff: Option<DiffAccounting>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matching_ratios: Option<MatchingRatios<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<LabelScores<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub typing: Option<TypingScores<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub topk: Option<TopK<f64>>,
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(d) = &self.diff {
            writeln!(f, "{:<28}{:>8}", "Annotated entities", d.auto_total)?;
            writeln!(f, "{:<28}{:>8}", "Ground-truth entities", d.gt_total)?;
            writeln!(f, "{:<28}{:>8}", "Added", d.added)?;
            writeln!(f, "{:<28}{:>8}", "Removed", d.removed)?;
            writeln!(f, "{:<28}{:>8}", "Changed", d.changed)?;
            writeln!(f, "{:<28}{:>8}", "Same", d.same)?;
        }
        if let Some(m) = &self.matching_ratios {
            writeln!(f, "{:<28}{:>8.3}", "same/(same+changed)", m.same_over_kept)?;
            writeln!(f, "{:<28}{:>8.3}", "same/auto", m.same_over_auto)?;
            writeln!(f, "{:<28}{:>8.3}", "same/gt", m.same_over_gt)?;
        }
        if let Some(l) = &self.labels {
            writeln!(f, "{:<16}{:>10}{:>10}{:>10}", "", "Precision", "Recall", "F1")?;
            for (name, p) in &l.per_label {
                writeln!(f, "{name:<16}{:>10.3}{:>10.3}{:>10.3}", p.precision, p.recall, p.f1)?;
            }
            let a = &l.average;
            writeln!(f, "{:<16}{:>10.3}{:>10.3}{:>10.3}", "Average", a.precision, a.recall, a.f1)?;
        }
        if let Some(t) = &self.typing {
            writeln!(f, "{:>10}{:>10}{:>10}", "Strict", "L.Macro", "L.Micro")?;
            writeln!(f, "{:>10.3}{:>10.3}{:>10.3}", t.strict.f1, t.loose_macro.f1, t.loose_micro.f1)?;
        }
        if let Some(k) = &self.topk {
            for (k, r) in &k.rates {
                writeln!(f, "Top-{k:<4}{:>8.1}%", r * 100.0)?;
            }
        }
        Ok(())
    }
}
