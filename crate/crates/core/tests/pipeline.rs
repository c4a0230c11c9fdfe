use kbner_core::annotator::{hash16, Annotator, AnnotatorConfig};
use kbner_core::coarse::{to_coarse, CoarseLabel, TypeMappingTable};
use kbner_core::corpus::AnnotatedCorpus;
use kbner_core::kb::KnowledgeSnapshot;
use kbner_core::noise::{reduce, NoiseMode};
use kbner_core::stats::compute_stats;
use kbner_core::text::Dump;

const MINIKB: &str = include_str!("fixtures/minikb.jsonl");
const DUMP: &str = include_str!("fixtures/fixture.dump");
const MAPPING: &str = include_str!("fixtures/mapping.txt");

fn golden(name: &str) -> String {
    std::fs::read_to_string(format!("{}/tests/fixtures/golden/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn annotated() -> AnnotatedCorpus {
    let kb = KnowledgeSnapshot::parse_str(MINIKB).unwrap();
    let dump = Dump::parse_str(DUMP).unwrap();
    let ann = Annotator::new(&kb, &dump, AnnotatorConfig::default()).unwrap();
    ann.annotate_corpus().unwrap().0.with_meta("snapshot", hash16(MINIKB.as_bytes()))
}

#[test]
fn full_chain_matches_goldens() {
    let corpus = annotated();
    assert_eq!(corpus.to_tsv(), golden("corpus.tsv"));
    assert_eq!(compute_stats(&corpus).to_json(), golden("stats.json"));
    let table = TypeMappingTable::parse_str(MAPPING).unwrap();
    for mode in [NoiseMode::DomainIndependent, NoiseMode::DomainDependent] {
        let m = mode.tag();
        let reduced = reduce(&corpus, mode).unwrap();
        assert_eq!(reduced.to_tsv(), golden(&format!("corpus.{m}.tsv")), "{m}");
        let (cga, counts) = to_coarse(&reduced, &table).unwrap();
        assert_eq!(cga.to_tsv(), golden(&format!("corpus.{m}.cga.tsv")), "{m}");
        let stats = compute_stats(&cga);
        assert_eq!(stats.to_json(), golden(&format!("stats.{m}.cga.json")), "{m}");
        assert_eq!(counts.values().sum::<usize>(), stats.tagged_tokens);
        assert_eq!(counts[&CoarseLabel::Person], stats.coarse_tokens.unwrap().person);
    }
}

#[test]
fn golden_files_reparse_byte_identically() {
    for name in ["corpus.tsv", "corpus.di.tsv", "corpus.dd.tsv", "corpus.di.cga.tsv", "corpus.dd.cga.tsv"] {
        let text = golden(name);
        assert_eq!(AnnotatedCorpus::parse_str(&text).unwrap().to_tsv(), text, "{name}");
    }
}

#[test]
fn people_spans_become_person() {
    let corpus = annotated();
    let table = TypeMappingTable::parse_str(MAPPING).unwrap();
    let (cga, _) = to_coarse(&corpus, &table).unwrap();
    for (fine, coarse) in corpus.sentences.iter().zip(&cga.sentences) {
        for (f, c) in fine.tags.iter().zip(&coarse.tags) {
            if f.label() == Some("/people/person") {
                assert_eq!(c.label(), Some("PERSON"));
            }
        }
        assert_eq!(fine.tokens().len(), coarse.tokens().len());
    }
}

#[test]
fn only_eliminated_domains_leaves_nothing() {
    let corpus = annotated();
    let domains: Vec<String> = compute_stats(&corpus).domains.into_keys().collect();
    let table = TypeMappingTable::new([], domains).unwrap();
    let (cga, counts) = to_coarse(&corpus, &table).unwrap();
    assert!(cga.is_empty());
    assert!(counts.values().all(|c| *c == 0));
}

#[test]
fn annotation_is_deterministic_across_job_counts() {
    let kb = KnowledgeSnapshot::parse_str(MINIKB).unwrap();
    let dump = Dump::parse_str(DUMP).unwrap();
    let outputs: Vec<String> = [1, 2, 8]
        .into_iter()
        .map(|jobs| {
            let cfg = AnnotatorConfig { jobs, ..Default::default() };
            Annotator::new(&kb, &dump, cfg).unwrap().annotate_corpus().unwrap().0.to_tsv()
        })
        .collect();
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn stricter_threshold_only_removes_sentences() {
    let kb = KnowledgeSnapshot::parse_str(MINIKB).unwrap();
    let dump = Dump::parse_str(DUMP).unwrap();
    let run = |t: f64| {
        let cfg = AnnotatorConfig { language_threshold: t, ..Default::default() };
        Annotator::new(&kb, &dump, cfg).unwrap().annotate_corpus().unwrap().0
    };
    let loose = run(0.0);
    let strict = run(1.0);
    assert!(strict.len() <= run(0.5).len());
    assert!(run(0.5).len() <= loose.len());
    // The English description of Galatasaray only passes with no threshold.
    assert!(loose.sentences.iter().any(|s| s.sentence.doc_key == "description:m.003"));
}

#[test]
fn conll_has_one_block_per_sentence() {
    let corpus = annotated();
    let conll = corpus.to_conll();
    assert_eq!(conll.matches("# domain: ").count(), corpus.len());
    let token_lines = conll.lines().filter(|l| l.contains('\t')).count();
    assert_eq!(token_lines, corpus.sentences.iter().map(|s| s.tokens().len()).sum::<usize>());
}
