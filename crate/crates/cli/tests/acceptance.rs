//! Acceptance suite: one PASS/FAIL line per criterion.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, BufReader};
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, ExitCode, Stdio};
use std::time::{Duration, Instant};

use kbner_core::coarse::CoarseLabel;
use kbner_core::corpus::{first_iob_violation, spans, AnnotatedCorpus};
use kbner_core::eval::{
    coarse_prf, diff_annotations, fine_grained_f1, merge_judgments, topk_agreement, Averaging, DiffAccounting, Judgment,
    SpanKey, Verdict,
};
use kbner_core::gazetteer::resolve_entity_type;
use kbner_core::kb::{KnowledgeSnapshot, TypePath};
use kbner_core::matcher::MatchAutomaton;
use kbner_core::noise::{reduce, NoiseMode};
use kbner_core::Rational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

type Outcome = Result<(), String>;
type Check = fn() -> Outcome;

fn ensure(cond: bool, msg: impl Into<String>) -> Outcome {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

// --------------------------------------------------------------- accounting

/// Builds token sequences with the given counts and checks that the diff
/// reproduces them along with both totals.
fn column(added: usize, removed: usize, changed: usize, same: usize) -> DiffAccounting {
    let mut auto = Vec::new();
    let mut gt = Vec::new();
    for (n, a, g) in [(added, "O", "PERSON"), (removed, "PERSON", "O"), (changed, "PERSON", "ORGANIZATION"), (same, "LOCATION", "LOCATION")] {
        auto.extend(std::iter::repeat_n(a, n));
        gt.extend(std::iter::repeat_n(g, n));
    }
    // Untagged filler must not count anywhere.
    auto.extend(["O"; 50]);
    gt.extend(["O"; 50]);
    diff_annotations(&auto, &gt).unwrap()
}

fn table3() -> Outcome {
    for (name, (added, removed, changed, same), (auto_total, gt_total)) in
        [("DI", (958, 163, 278, 1417), (1858, 2653)), ("DD", (926, 120, 198, 1647), (1965, 2771))]
    {
        let d = column(added, removed, changed, same);
        ensure(d.identities_hold(), format!("{name}: identities fail"))?;
        ensure(
            (d.added, d.removed, d.changed, d.same) == (added, removed, changed, same),
            format!("{name}: counts {d:?}"),
        )?;
        ensure(
            (d.auto_total, d.gt_total) == (auto_total, gt_total),
            format!("{name}: totals {} {} want {auto_total} {gt_total}", d.auto_total, d.gt_total),
        )?;
    }
    // The undenoised column: annotated side adds up, ground-truth side is
    // off by 180 in the published table.
    let d = column(872, 537, 564, 1275);
    ensure(d.auto_total == 2376, "undenoised column: annotated total")?;
    ensure(d.gt_total == 2711 && d.gt_total != 2891, "undenoised column: ground-truth total should be 2711, not the published 2891")
}

// ------------------------------------------------------------------ titanic

fn titanic() -> Outcome {
    let kb = KnowledgeSnapshot::parse_str(&read(fixtures().join("minikb.jsonl"))).map_err(|e| e.to_string())?;
    let ty = resolve_entity_type(&kb, "m.001").map_err(|e| e.to_string())?;
    ensure(ty.to_string() == "/film/film", format!("m.001 resolved to {ty}"))
}

// -------------------------------------------------------------------- top-k

fn topk_uniform() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut ranked = Vec::new();
    let mut reference = Vec::new();
    for item in 0..1000u32 {
        let rank = rng.random_range(1..=10usize);
        let list: Vec<(u32, usize)> = (1..=10).map(|r| (item, if r == rank { 0 } else { r })).collect();
        ranked.push(list);
        reference.push((item, 0));
    }
    let ks: Vec<usize> = (1..=10).collect();
    let t = topk_agreement::<f64, _>(&ranked, &reference, &ks).map_err(|e| e.to_string())?;
    ensure(t.is_monotone(), "rates not monotone")?;
    for k in ks {
        let r = t.rate(k).unwrap();
        let want = k as f64 / 10.0;
        ensure((r - want).abs() <= 0.03, format!("top-{k} = {r:.3}, expected {want:.1} +/- 0.03"))?;
    }
    Ok(())
}

// ------------------------------------------------------------------ matcher

fn brute_force(patterns: &[Vec<&str>], text: &[&str]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < text.len() {
        match patterns.iter().filter(|p| text[i..].starts_with(p)).map(Vec::len).max() {
            Some(l) => {
                out.push((i, l));
                i += l;
            }
            None => i += 1,
        }
    }
    out
}

const VOCAB: [&str; 6] = ["a", "b", "c", "d", "e", "f"];

fn matcher_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let ty: TypePath = "/x/y".parse().unwrap();
    for case in 0..2000 {
        let npat = rng.random_range(0..10);
        let patterns: Vec<Vec<&str>> = (0..npat)
            .map(|_| (0..rng.random_range(1..5)).map(|_| VOCAB[rng.random_range(0..VOCAB.len())]).collect())
            .collect();
        let text: Vec<&str> = (0..rng.random_range(0..40)).map(|_| VOCAB[rng.random_range(0..VOCAB.len())]).collect();
        let ac = MatchAutomaton::build(patterns.iter().enumerate().map(|(i, p)| (p.clone(), i.to_string(), ty.clone())))
            .map_err(|e| e.to_string())?;
        let got: Vec<(usize, usize)> = ac.find_iter(&text).map(|m| (m.start, m.len)).collect();
        let want = brute_force(&patterns, &text);
        ensure(got == want, format!("case {case}: {patterns:?} on {text:?}: {got:?} != {want:?}"))?;
    }
    Ok(())
}

// -------------------------------------------------------------------- noise

fn random_corpus(rng: &mut ChaCha8Rng) -> AnnotatedCorpus {
    let types = ["/x/a", "/x/b", "/y/c", "/y/d"];
    let domains = ["x", "y", "z"];
    let mut text = String::from("#twnertc v1\n");
    for _ in 0..rng.random_range(0..30) {
        let mut toks = Vec::new();
        let mut tags = Vec::new();
        for _ in 0..rng.random_range(1..8) {
            if rng.random_bool(0.5) {
                toks.push(VOCAB[rng.random_range(0..VOCAB.len())]);
                tags.push("O".to_owned());
            } else {
                let ty = types[rng.random_range(0..types.len())];
                for k in 0..rng.random_range(1..3) {
                    toks.push(VOCAB[rng.random_range(0..3)]);
                    tags.push(format!("{}-{ty}", if k == 0 { "B" } else { "I" }));
                }
            }
        }
        let domain = domains[rng.random_range(0..domains.len())];
        text.push_str(&format!("{domain}\t{}\t{}\n", toks.join(" "), tags.join(" ")));
    }
    AnnotatedCorpus::parse_str(&text).unwrap()
}

fn boundaries(c: &AnnotatedCorpus) -> Vec<Vec<(usize, usize)>> {
    c.sentences.iter().map(|s| s.spans().iter().map(|sp| (sp.start, sp.end)).collect()).collect()
}

fn types_per_key(c: &AnnotatedCorpus, with_domain: bool) -> HashMap<(Vec<&str>, Option<&str>), BTreeSet<&str>> {
    let mut m: HashMap<_, BTreeSet<&str>> = HashMap::new();
    for s in &c.sentences {
        let t = s.token_texts();
        for sp in spans(&s.tags) {
            let d = if with_domain { s.domain.as_deref() } else { None };
            m.entry((t[sp.start..sp.end].to_vec(), d)).or_default().insert(sp.label);
        }
    }
    m
}

fn noise_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for case in 0..100 {
        let c = random_corpus(&mut rng);
        let di = reduce(&c, NoiseMode::DomainIndependent).map_err(|e| e.to_string())?;
        let dd = reduce(&c, NoiseMode::DomainDependent).map_err(|e| e.to_string())?;
        for (name, out) in [("di", &di), ("dd", &dd)] {
            ensure(boundaries(out) == boundaries(&c), format!("case {case} {name}: span boundaries moved"))?;
            ensure(
                out.sentences.iter().all(|s| first_iob_violation(&s.tags).is_none()),
                format!("case {case} {name}: invalid IOB"),
            )?;
        }
        ensure(types_per_key(&di, false).values().all(|s| s.len() == 1), format!("case {case}: di surface has two types"))?;
        ensure(
            types_per_key(&dd, true).values().all(|s| s.len() == 1),
            format!("case {case}: dd (surface, domain) has two types"),
        )?;
        ensure(reduce(&di, NoiseMode::DomainIndependent).unwrap() == di, format!("case {case}: di not idempotent"))?;
    }
    Ok(())
}

// --------------------------------------------------------------- end-to-end

fn kbner(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_kbner")).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("kbner {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn end_to_end() -> Outcome {
    let fx = fixtures();
    let golden = fx.join("golden");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |n: &str| dir.path().join(n).to_string_lossy().into_owned();
    let f = |n: &str| fx.join(n).to_string_lossy().into_owned();
    kbner(&["annotate", "--kb", &f("minikb.jsonl"), "--dump", &f("fixture.dump"), "--out", &p("corpus.tsv")])?;
    ensure(read(p("corpus.tsv")) == read(golden.join("corpus.tsv")), "corpus.tsv differs")?;
    ensure(kbner(&["stats", "--in", &p("corpus.tsv"), "--json"])? == read(golden.join("stats.json")), "stats.json differs")?;
    for m in ["di", "dd"] {
        let reduced = p(&format!("corpus.{m}.tsv"));
        let cga = p(&format!("corpus.{m}.cga.tsv"));
        kbner(&["reduce-noise", "--in", &p("corpus.tsv"), "--mode", m, "--out", &reduced])?;
        ensure(read(&reduced) == read(golden.join(format!("corpus.{m}.tsv"))), format!("corpus.{m}.tsv differs"))?;
        kbner(&["to-cga", "--in", &reduced, "--mapping", &f("mapping.txt"), "--out", &cga])?;
        ensure(read(&cga) == read(golden.join(format!("corpus.{m}.cga.tsv"))), format!("corpus.{m}.cga.tsv differs"))?;
        let stats = kbner(&["stats", "--in", &cga, "--json"])?;
        ensure(stats == read(golden.join(format!("stats.{m}.cga.json"))), format!("stats.{m}.cga.json differs"))?;
    }
    Ok(())
}

// ------------------------------------------------------------- hand checks

fn set(items: &[&'static str]) -> BTreeSet<&'static str> {
    items.iter().copied().collect()
}

fn metric_hand_checks() -> Outcome {
    let r = |n, d| Rational::new(n, d);
    let t = fine_grained_f1::<Rational, _>(&[set(&["a"]), set(&["b"])], &[set(&["a"]), set(&["c"])])
        .map_err(|e| e.to_string())?;
    ensure(t.f1s() == (r(1, 2), r(1, 2), r(1, 2)), format!("2-entity example gave {:?}", t.f1s()))?;

    let t = fine_grained_f1::<Rational, _>(&[set(&["a", "b"])], &[set(&["a"])]).map_err(|e| e.to_string())?;
    ensure(t.strict.f1 == r(0, 1), "superset strict")?;
    for p in [&t.loose_macro, &t.loose_micro] {
        ensure((p.precision, p.recall, p.f1) == (r(1, 2), r(1, 1), r(2, 3)), format!("superset loose {p:?}"))?;
    }

    let s = coarse_prf::<Rational, _>(&["PERSON", "PERSON", "ORGANIZATION"], &["PERSON", "ORGANIZATION", "ORGANIZATION"], Averaging::Macro)
        .map_err(|e| e.to_string())?;
    let per = &s.per_label["PERSON"];
    let org = &s.per_label["ORGANIZATION"];
    ensure((per.precision, per.recall, per.f1) == (r(1, 2), r(1, 1), r(2, 3)), format!("PER {per:?}"))?;
    ensure((org.precision, org.recall, org.f1) == (r(1, 1), r(1, 2), r(2, 3)), format!("ORG {org:?}"))?;

    let cases = [
        (["PER", "PER", "PER", "ORG", "O"], "MISC", "PER"),
        (["PER", "ORG", "O", "LOC", "MISC"], "MISC", "MISC"),
        (["ORG", "ORG", "ORG", "ORG", "ORG"], "ORG", "ORG"),
    ];
    let lab = |s: &str| s.parse::<CoarseLabel>().unwrap();
    let key = |i: usize| SpanKey { sentence: "s".into(), span: i };
    let auto: BTreeMap<SpanKey, CoarseLabel> = cases.iter().enumerate().map(|(i, c)| (key(i), lab(c.1))).collect();
    let judgments: Vec<Judgment> = cases
        .iter()
        .enumerate()
        .flat_map(|(i, (votes, _, _))| {
            votes.iter().enumerate().map(move |(a, v)| Judgment {
                annotator: format!("a{a}"),
                key: key(i),
                verdict: Verdict::Label(v.parse().unwrap()),
            })
        })
        .collect();
    let merged = merge_judgments(&judgments, &auto, 3).map_err(|e| e.to_string())?;
    for (i, (votes, auto, want)) in cases.iter().enumerate() {
        let got = merged[&key(i)].label;
        ensure(got == lab(want), format!("votes {votes:?} auto {auto}: got {got}"))?;
    }
    Ok(())
}

// ------------------------------------------------------------------ restart

struct Server {
    child: Child,
    base: String,
}

impl Server {
    fn start(tasks: &str, log: &str) -> Result<Self, String> {
        let mut child = Command::new(env!("CARGO_BIN_EXE_kbner"))
            .args(["serve", "--port", "0", "--tasks", tasks, "--log", log])
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| e.to_string())?;
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).map_err(|e| e.to_string())?;
        let addr = line.trim().strip_prefix("listening on ").ok_or_else(|| format!("unexpected banner {line:?}"))?;
        Ok(Server { base: format!("http://{addr}"), child })
    }

    fn get(&self, path: &str) -> Result<String, String> {
        let mut resp = ureq::get(format!("{}{path}", self.base)).call().map_err(|e| e.to_string())?;
        resp.body_mut().read_to_string().map_err(|e| e.to_string())
    }

    fn submit(&self, annotator: &str, task: &Value, first: &str) -> Outcome {
        let units = task["units"].as_array().ok_or("task has no units")?;
        let verdicts: Vec<Value> = units
            .iter()
            .enumerate()
            .map(|(i, u)| json!({ "label": if i == 0 { first } else { u["current"].as_str().unwrap() } }))
            .collect();
        ureq::post(format!("{}/api/judgments", self.base))
            .send_json(json!({ "annotator": annotator, "task_id": task["task_id"], "verdicts": verdicts }))
            .map_err(|e| e.to_string())?;
        Ok(())
    }

    fn next(&self, annotator: &str) -> Result<Value, String> {
        let body = self.get(&format!("/api/tasks/next?annotator={annotator}"))?;
        let v: Value = serde_json::from_str(&body).map_err(|e| e.to_string())?;
        Ok(v["task"].clone())
    }

    fn kill(mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
    }
}

fn restart_replay() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let tasks = fixtures().join("golden/corpus.di.cga.tsv").to_string_lossy().into_owned();
    let log = dir.path().join("judgments.ndjson").to_string_lossy().into_owned();

    let server = Server::start(&tasks, &log)?;
    for (annotator, label, rounds) in [("a", "MISC", 3), ("b", "MISC", 2), ("c", "MISC", 1), ("d", "LOCATION", 2)] {
        for _ in 0..rounds {
            let task = server.next(annotator)?;
            if task.is_null() {
                break;
            }
            server.submit(annotator, &task, label)?;
        }
    }
    // A resubmission replaces the earlier verdicts.
    let first = serde_json::from_str::<Value>(&server.get("/api/tasks/next?annotator=zz")?).unwrap()["task"].clone();
    server.submit("d", &first, "MISC")?;
    let progress = server.get("/api/progress")?;
    let export = server.get("/api/export?quorum=3")?;
    let next_c = server.next("c")?;
    server.kill();

    let server = Server::start(&tasks, &log)?;
    ensure(server.get("/api/progress")? == progress, "progress differs after restart")?;
    ensure(server.get("/api/export?quorum=3")? == export, "export differs after restart")?;
    ensure(server.get("/api/export?quorum=3")? == export, "export not deterministic")?;
    ensure(server.next("c")? == next_c, "next task differs after restart")?;
    ensure(export.contains("MISC"), "merged labels missing from export")?;
    let p: Value = serde_json::from_str(&progress).map_err(|e| e.to_string())?;
    ensure(p["submissions"] == 9, format!("submissions {}", p["submissions"]))?;
    server.kill();
    Ok(())
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 8] = [
        ("accounting identities on the DI and DD comparison columns", table3),
        ("Titanic resolves to /film/film", titanic),
        ("top-k on 1000 uniform ranks is within 0.03 of k/10 and monotone", topk_uniform),
        ("token matcher equals brute-force leftmost-longest on 2000 instances", matcher_oracle),
        ("noise reduction properties on 100 random corpora", noise_properties),
        ("annotate, reduce-noise, to-cga, stats reproduce the goldens", end_to_end),
        ("metric hand checks are exact", metric_hand_checks),
        ("review service state survives kill and restart", restart_replay),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in criteria {
        let t = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let ms = Duration::as_millis(&t.elapsed());
        match outcome {
            Ok(()) => println!("PASS  {name} ({ms} ms)"),
            Err(e) => {
                failed += 1;
                println!("FAIL  {name} ({ms} ms): {e}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
