//! State behind the human review service.
//!
//! Every corpus sentence becomes one task. A task holds judgment units: for
//! coarse review, each entity span plus each untagged word (so annotators can
//! add missing entities); for fine review, each entity span with up to five
//! candidate types; for domain review, the whole sentence with candidate
//! domains. Submissions are appended to a newline-delimited JSON log before
//! they touch memory, and replaying the log rebuilds the state.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::coarse::CoarseLabel;
use crate::corpus::{spans, write_span, AnnotatedCorpus, Tag};
use crate::error::{Error, Result};
use crate::eval::{merge_rankings, merge_votes, GroundTruth, GroundTruthRow, Verdict};

/// Most candidates (and ranked entries) per unit.
pub const MAX_CANDIDATES: usize = 5;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    #[default]
    Coarse,
    FineRank,
    DomainRank,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Coarse => "coarse",
            TaskKind::FineRank => "fine_rank",
            TaskKind::DomainRank => "domain_rank",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coarse" => Ok(TaskKind::Coarse),
            "fine_rank" | "fine" => Ok(TaskKind::FineRank),
            "domain_rank" | "domain" => Ok(TaskKind::DomainRank),
            _ => Err(Error::Invalid(format!("unknown task kind {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Unit {
    pub start: usize,
    pub end: usize,
    /// Current label, type or domain; `O` for an untagged word.
    pub current: String,
    /// Ranking choices; empty for coarse units.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub task_id: u64,
    pub kind: TaskKind,
    pub domain: Option<String>,
    pub tokens: Vec<String>,
    pub tags: Vec<String>,
    pub units: Vec<Unit>,
    /// Label choices offered for every coarse unit.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub choices: Vec<String>,
}

/// `task_id TAB unit_index TAB type1|type2|...` lines.
pub fn parse_candidates(input: &str) -> Result<HashMap<(u64, usize), Vec<String>>> {
    let mut out = HashMap::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |m: &str| Error::format(i + 1, m.to_owned());
        let cols: Vec<&str> = line.split('\t').collect();
        let [task, unit, list] = cols[..] else {
            return Err(bad("expected `task_id TAB unit TAB type|type...`"));
        };
        let key = (
            task.parse().map_err(|_| bad("bad task id"))?,
            unit.parse().map_err(|_| bad("bad unit index"))?,
        );
        let mut cands: Vec<String> = Vec::new();
        for c in list.split('|').filter(|c| !c.is_empty()) {
            if !cands.iter().any(|x| x == c) {
                cands.push(c.to_owned());
            }
        }
        if cands.is_empty() || cands.len() > MAX_CANDIDATES {
            return Err(bad("a unit needs 1 to 5 candidates"));
        }
        if out.insert(key, cands).is_some() {
            return Err(bad("duplicate candidate line"));
        }
    }
    Ok(out)
}

/// Build one task per sentence; task ids start at 1.
pub fn build_tasks(
    corpus: &AnnotatedCorpus,
    kind: TaskKind,
    candidates: &HashMap<(u64, usize), Vec<String>>,
) -> Result<Vec<Task>> {
    let mut tasks = Vec::with_capacity(corpus.len());
    for (i, s) in corpus.sentences.iter().enumerate() {
        let task_id = i as u64 + 1;
        let mut units = Vec::new();
        match kind {
            TaskKind::Coarse => {
                let sp = spans(&s.tags);
                for sp in &sp {
                    sp.label.parse::<CoarseLabel>().map_err(|_| {
                        Error::Invalid(format!("task {task_id}: {} is not a coarse label", sp.label))
                    })?;
                }
                let mut k = 0;
                for (t, tok) in s.tokens().iter().enumerate() {
                    if let Some(span) = sp.get(k).filter(|x| x.start == t) {
                        units.push(Unit {
                            start: span.start,
                            end: span.end,
                            current: span.label.to_owned(),
                            candidates: Vec::new(),
                        });
                        k += 1;
                    } else if s.tags[t].is_outside() && !tok.is_punct {
                        units.push(Unit { start: t, end: t + 1, current: "O".into(), candidates: Vec::new() });
                    }
                }
            }
            TaskKind::FineRank => {
                for (u, sp) in spans(&s.tags).into_iter().enumerate() {
                    let cands =
                        candidates.get(&(task_id, u)).cloned().unwrap_or_else(|| vec![sp.label.to_owned()]);
                    units.push(Unit { start: sp.start, end: sp.end, current: sp.label.to_owned(), candidates: cands });
                }
            }
            TaskKind::DomainRank => {
                let domain = s.domain.clone().ok_or(Error::MissingDomain(i))?;
                let cands = candidates.get(&(task_id, 0)).cloned().unwrap_or_else(|| vec![domain.clone()]);
                units.push(Unit { start: 0, end: s.tags.len(), current: domain, candidates: cands });
            }
        }
        tasks.push(Task {
            task_id,
            kind,
            domain: s.domain.clone(),
            tokens: s.token_texts().into_iter().map(str::to_owned).collect(),
            tags: s.tags.iter().map(Tag::to_string).collect(),
            units,
            choices: if kind == TaskKind::Coarse {
                ["PERSON", "ORGANIZATION", "LOCATION", "MISC", "O"].map(String::from).to_vec()
            } else {
                Vec::new()
            },
        });
    }
    Ok(tasks)
}

/// One submitted task review: a verdict per unit, in unit order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Submission {
    pub annotator: String,
    pub task_id: u64,
    pub verdicts: Vec<Verdict>,
}

/// A log line.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogRecord {
    pub seq: u64,
    pub received_ms: u64,
    #[serde(flatten)]
    pub submission: Submission,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Receipt {
    pub seq: u64,
    pub task_id: u64,
    pub annotator: String,
    /// True when this submission replaced an earlier one by the same
    /// annotator.
    pub replaced: bool,
}

/// Append-only judgment log with one JSON record per line.
#[derive(Debug)]
pub struct JudgmentLog {
    path: PathBuf,
    file: File,
}

impl JudgmentLog {
    /// Open (or create) a log and return its records. A final line without
    /// a newline that does not parse is a torn write: it is cut off.
    pub fn open(path: impl AsRef<Path>) -> Result<(Self, Vec<LogRecord>)> {
        let path = path.as_ref().to_path_buf();
        let text = match fs::read(&path) {
            Ok(b) => String::from_utf8_lossy(&b).into_owned(),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(Error::io(&path, e)),
        };
        let mut records = Vec::new();
        let mut good = 0usize;
        let mut rest = text.as_str();
        let mut lineno = 0;
        while !rest.is_empty() {
            lineno += 1;
            let (line, complete) = match rest.find('\n') {
                Some(i) => (&rest[..i], true),
                None => (rest, false),
            };
            let consumed = line.len() + usize::from(complete);
            if !line.trim().is_empty() {
                match serde_json::from_str::<LogRecord>(line) {
                    Ok(r) => records.push(r),
                    Err(_) if !complete => break,
                    Err(e) => return Err(Error::format(lineno, format!("bad log record: {e}"))),
                }
            }
            if !complete {
                // A parseable final record missing its newline is kept; the
                // newline is restored below.
                good += consumed;
                break;
            }
            good += consumed;
            rest = &rest[consumed..];
        }
        let mut file = OpenOptions::new().create(true).append(true).open(&path).map_err(|e| Error::io(&path, e))?;
        if good < text.len() {
            file.set_len(good as u64).map_err(|e| Error::io(&path, e))?;
        }
        if good > 0 && !text[..good].ends_with('\n') {
            file.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
        }
        file.sync_data().map_err(|e| Error::io(&path, e))?;
        Ok((JudgmentLog { path, file }, records))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Write one record and flush it to disk.
    pub fn append(&mut self, r: &LogRecord) -> Result<()> {
        let mut line = serde_json::to_string(r).map_err(|e| Error::Invalid(e.to_string()))?;
        line.push('\n');
        self.file.write_all(line.as_bytes()).map_err(|e| Error::io(&self.path, e))?;
        self.file.sync_data().map_err(|e| Error::io(&self.path, e))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Progress {
    pub kind: TaskKind,
    pub tasks: usize,
    /// Records in the log, replacements included.
    pub submissions: u64,
    /// Tasks judged per annotator.
    pub annotators: BTreeMap<String, usize>,
    /// Tasks judged by at least one annotator.
    pub judged_tasks: usize,
}

#[derive(Debug)]
pub struct Adjudication {
    tasks: Vec<Task>,
    index: HashMap<u64, usize>,
    kind: TaskKind,
    registry: Option<BTreeSet<String>>,
    /// Latest verdicts per (annotator, task).
    effective: BTreeMap<(String, u64), Vec<Verdict>>,
    submissions: u64,
    log: Option<JudgmentLog>,
}

impl Adjudication {
    /// In-memory state; `registry` limits who may judge (`None` accepts any
    /// non-empty id).
    pub fn new(tasks: Vec<Task>, registry: Option<BTreeSet<String>>) -> Result<Self> {
        let kind = tasks.first().map(|t| t.kind).unwrap_or_default();
        let mut index = HashMap::new();
        for (i, t) in tasks.iter().enumerate() {
            if t.kind != kind {
                return Err(Error::Invalid("tasks of mixed kinds".into()));
            }
            if index.insert(t.task_id, i).is_some() {
                return Err(Error::Invalid(format!("duplicate task id {}", t.task_id)));
            }
        }
        Ok(Adjudication { tasks, index, kind, registry, effective: BTreeMap::new(), submissions: 0, log: None })
    }

    /// State backed by a log file: existing records are replayed first.
    pub fn with_log(tasks: Vec<Task>, registry: Option<BTreeSet<String>>, path: impl AsRef<Path>) -> Result<Self> {
        let mut state = Self::new(tasks, registry)?;
        let (log, records) = JudgmentLog::open(path)?;
        for r in records {
            state.validate(&r.submission)?;
            state.apply(r.submission);
            state.submissions = state.submissions.max(r.seq);
        }
        state.log = Some(log);
        Ok(state)
    }

    pub fn kind(&self) -> TaskKind {
        self.kind
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn task(&self, id: u64) -> Result<&Task> {
        self.index.get(&id).map(|i| &self.tasks[*i]).ok_or(Error::UnknownTask(id))
    }

    fn check_annotator(&self, a: &str) -> Result<()> {
        let known = match &self.registry {
            Some(r) => r.contains(a),
            None => !a.trim().is_empty(),
        };
        if known {
            Ok(())
        } else {
            Err(Error::UnknownAnnotator(a.to_owned()))
        }
    }

    /// Lowest-id task `annotator` has not judged yet.
    pub fn next_task(&self, annotator: &str) -> Result<Option<&Task>> {
        self.check_annotator(annotator)?;
        let mut ids: Vec<u64> = self.index.keys().copied().collect();
        ids.sort_unstable();
        Ok(ids
            .into_iter()
            .find(|id| !self.effective.contains_key(&(annotator.to_owned(), *id)))
            .map(|id| &self.tasks[self.index[&id]]))
    }

    fn validate(&self, s: &Submission) -> Result<()> {
        self.check_annotator(&s.annotator)?;
        let task = self.task(s.task_id)?;
        if s.verdicts.len() != task.units.len() {
            return Err(Error::InvalidVerdict(format!(
                "task {} has {} units, got {} verdicts",
                task.task_id,
                task.units.len(),
                s.verdicts.len()
            )));
        }
        for (i, (v, u)) in s.verdicts.iter().zip(&task.units).enumerate() {
            match (task.kind, v) {
                (TaskKind::Coarse, Verdict::Label(_)) => {}
                (TaskKind::Coarse, Verdict::Ranking(_)) => {
                    return Err(Error::InvalidVerdict(format!("unit {i}: coarse units take a label")));
                }
                (_, Verdict::Label(_)) => {
                    return Err(Error::InvalidVerdict(format!("unit {i}: ranking expected")));
                }
                (_, Verdict::Ranking(r)) => check_ranking(r, &u.candidates)
                    .map_err(|m| Error::InvalidVerdict(format!("unit {i}: {m}")))?,
            }
        }
        Ok(())
    }

    fn apply(&mut self, s: Submission) -> bool {
        self.submissions += 1;
        self.effective.insert((s.annotator, s.task_id), s.verdicts).is_some()
    }

    /// Validate, log, then apply. A repeated (annotator, task) submission
    /// replaces the earlier verdicts.
    pub fn submit(&mut self, s: Submission) -> Result<Receipt> {
        self.validate(&s)?;
        let seq = self.submissions + 1;
        if let Some(log) = &mut self.log {
            let received_ms = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64);
            log.append(&LogRecord { seq, received_ms, submission: s.clone() })?;
        }
        let (task_id, annotator) = (s.task_id, s.annotator.clone());
        let replaced = self.apply(s);
        Ok(Receipt { seq, task_id, annotator, replaced })
    }

    /// Effective verdicts of one annotator on one task.
    pub fn verdicts(&self, annotator: &str, task_id: u64) -> Option<&[Verdict]> {
        self.effective.get(&(annotator.to_owned(), task_id)).map(Vec::as_slice)
    }

    /// All effective verdicts, keyed by (annotator, task).
    pub fn effective(&self) -> &BTreeMap<(String, u64), Vec<Verdict>> {
        &self.effective
    }

    pub fn progress(&self) -> Progress {
        let mut annotators: BTreeMap<String, usize> = self.registry.iter().flatten().map(|a| (a.clone(), 0)).collect();
        let mut judged = BTreeSet::new();
        for (a, t) in self.effective.keys() {
            *annotators.entry(a.clone()).or_default() += 1;
            judged.insert(*t);
        }
        Progress {
            kind: self.kind,
            tasks: self.tasks.len(),
            submissions: self.submissions,
            annotators,
            judged_tasks: judged.len(),
        }
    }

    /// Merge effective verdicts into ground truth.
    ///
    /// Coarse units take the label at least `quorum` annotators agree on,
    /// else keep their label. Ranked units take the mean-rank merge when at
    /// least `quorum` annotators ranked them, else keep the current value
    /// followed by its candidates.
    pub fn export(&self, quorum: usize) -> Result<GroundTruth> {
        if quorum == 0 {
            return Err(Error::Invalid("quorum must be at least 1".into()));
        }
        let mut by_task: BTreeMap<u64, Vec<&Vec<Verdict>>> = BTreeMap::new();
        for ((_, t), v) in &self.effective {
            by_task.entry(*t).or_default().push(v);
        }
        let mut rows = Vec::with_capacity(self.tasks.len());
        let mut ordered: Vec<&Task> = self.tasks.iter().collect();
        ordered.sort_by_key(|t| t.task_id);
        for task in ordered {
            let submissions = by_task.get(&task.task_id).map(Vec::as_slice).unwrap_or(&[]);
            let mut tags: Vec<Tag> = task.tags.iter().map(|t| t.parse()).collect::<Result<_>>()?;
            let mut refs = Vec::with_capacity(task.units.len());
            let mut agreement = Vec::with_capacity(task.units.len());
            for (i, unit) in task.units.iter().enumerate() {
                match task.kind {
                    TaskKind::Coarse => {
                        let auto: CoarseLabel = unit.current.parse()?;
                        let votes: Vec<CoarseLabel> = submissions
                            .iter()
                            .filter_map(|v| match &v[i] {
                                Verdict::Label(l) => Some(*l),
                                Verdict::Ranking(_) => None,
                            })
                            .collect();
                        let m = merge_votes(&auto, &votes, quorum);
                        tags[unit.start..unit.end].fill(Tag::Outside);
                        if m.label.is_entity() {
                            write_span(&mut tags, unit.start, unit.end, m.label.as_str());
                        }
                        refs.push(vec![m.label.to_string()]);
                        agreement.push(m.agreement);
                    }
                    TaskKind::FineRank | TaskKind::DomainRank => {
                        let rankings: Vec<Vec<String>> = submissions
                            .iter()
                            .filter_map(|v| match &v[i] {
                                Verdict::Ranking(r) => Some(r.clone()),
                                Verdict::Label(_) => None,
                            })
                            .collect();
                        let merged = if rankings.len() >= quorum {
                            merge_rankings(&rankings, MAX_CANDIDATES)
                        } else {
                            let mut keep = vec![unit.current.clone()];
                            keep.extend(unit.candidates.iter().filter(|c| **c != unit.current).cloned());
                            keep.truncate(MAX_CANDIDATES);
                            keep
                        };
                        agreement.push(rankings.iter().filter(|r| r.first() == merged.first()).count());
                        refs.push(merged);
                    }
                }
            }
            let sentence = crate::text::Sentence {
                doc_key: String::new(),
                index: rows.len(),
                tokens: crate::text::tokens_from_texts(&task.tokens),
            };
            let sentence = crate::corpus::AnnotatedSentence::new(sentence, tags, task.domain.clone())?;
            rows.push(GroundTruthRow { sentence, refs, agreement });
        }
        let meta = BTreeMap::from([
            ("kind".to_owned(), self.kind.to_string()),
            ("quorum".to_owned(), quorum.to_string()),
            ("source".to_owned(), "merged".to_owned()),
        ]);
        Ok(GroundTruth { rows, meta })
    }
}

/// A ranking is a duplicate-free ordering of some candidates with at most
/// one outside suggestion, no longer than five entries.
fn check_ranking(r: &[String], candidates: &[String]) -> std::result::Result<(), String> {
    if r.is_empty() {
        return Err("empty ranking".into());
    }
    if r.len() > MAX_CANDIDATES {
        return Err(format!("at most {MAX_CANDIDATES} ranked entries"));
    }
    let mut seen = BTreeSet::new();
    let mut suggestions = 0;
    for t in r {
        if !seen.insert(t) {
            return Err(format!("{t:?} ranked twice"));
        }
        if !candidates.contains(t) {
            if t.is_empty() || t.contains(|c: char| c.is_whitespace() || c == '|') {
                return Err(format!("malformed suggestion {t:?}"));
            }
            suggestions += 1;
        }
    }
    if suggestions > 1 {
        return Err("at most one suggestion outside the candidates".into());
    }
    Ok(())
}
