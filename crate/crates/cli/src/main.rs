use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::{Arc, Mutex};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use kbner_core::adjudication::{build_tasks, parse_candidates, Adjudication, TaskKind};
use kbner_core::annotator::{hash16, Annotator, AnnotatorConfig};
use kbner_core::coarse::{to_coarse, TypeMappingTable};
use kbner_core::corpus::AnnotatedCorpus;
use kbner_core::eval::{
    coarse_prf_corpora, diff_corpora, domain_topk, fine_eval_against, parse_prediction_sidecar, Averaging,
    EvalReport, GroundTruth,
};
use kbner_core::gazetteer::Gazetteer;
use kbner_core::kb::KnowledgeSnapshot;
use kbner_core::noise::{reduce, NoiseMode};
use kbner_core::sample::{sample_sentences, sample_words, DEFAULT_SEED, NER_TEST_WORDS};
use kbner_core::stats::compute_stats;
use kbner_core::text::{CaseFolding, Dump, DEFAULT_LANGUAGE_THRESHOLD};
use kbner_core::Error;

/// Build fine- and coarse-grained NER/TC corpora from a knowledge base and
/// an article dump, and evaluate them.
#[derive(Parser)]
#[command(name = "kbner", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Tsv,
    Conll,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Di,
    Dd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    /// Token accounting and per-label P/R/F1 against coarse ground truth.
    Coarse,
    /// Strict/loose F1 and top-k against ranked fine ground truth.
    Fine,
    /// Top-k of sentence domains against ranked domain ground truth.
    Domain,
}

#[derive(Clone, Copy, ValueEnum)]
enum Average {
    Macro,
    Micro,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Coarse,
    FineRank,
    DomainRank,
}

#[derive(Subcommand)]
enum Command {
    /// Resolve entity types and write the gazetteer as `mid TAB type TAB surface...`.
    BuildGazetteer {
        #[arg(long)]
        kb: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Annotate the dump with fine-grained IOB tags and sentence domains.
    Annotate {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        dump: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "tsv")]
        format: Format,
        /// Minimum Turkishness score for a text to be used.
        #[arg(long, default_value_t = DEFAULT_LANGUAGE_THRESHOLD)]
        threshold: f64,
        /// Match surfaces case-insensitively with Turkish casing rules.
        #[arg(long)]
        fold: bool,
        /// Worker threads; 0 picks one per core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Re-type surface forms by majority vote.
    ReduceNoise {
        /// Input corpus; `-` reads stdin.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// `di`: one type per surface; `dd`: one type per surface and domain.
        #[arg(long, value_enum)]
        mode: Mode,
    },
    /// Map fine types to PERSON/ORGANIZATION/LOCATION/MISC.
    ToCga {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Mapping file of `TYPE LABEL` and `!drop DOMAIN` lines.
        #[arg(long, required_unless_present = "default_mapping")]
        mapping: Option<PathBuf>,
        /// Use the built-in policy instead of a mapping file.
        #[arg(long, conflicts_with = "mapping")]
        default_mapping: bool,
        /// Domain to eliminate under the built-in policy (repeatable).
        #[arg(long, requires = "default_mapping")]
        drop: Vec<String>,
    },
    /// Corpus statistics.
    Stats {
        #[arg(long = "in")]
        input: PathBuf,
        /// Machine-readable JSON instead of the table layout.
        #[arg(long)]
        json: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw a seeded test set.
    Sample {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Collect sentences until this many words (default 10000).
        #[arg(long, conflicts_with = "sentences")]
        words: Option<usize>,
        /// Draw exactly this many sentences.
        #[arg(long)]
        sentences: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Score an automatic corpus against ground truth.
    Eval {
        #[arg(long)]
        auto: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, value_enum, default_value = "coarse")]
        metric: Metric,
        #[arg(long, value_enum, default_value = "macro")]
        average: Average,
        /// Per-span predicted type sets, `sentence TAB span TAB type|type...`.
        #[arg(long)]
        pred: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Run the review service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Corpus whose sentences become review tasks.
        #[arg(long)]
        tasks: PathBuf,
        /// Judgment log; created when missing, replayed when present.
        #[arg(long)]
        log: PathBuf,
        /// Candidate sidecar, `task_id TAB unit TAB type|type...`.
        #[arg(long)]
        candidates: Option<PathBuf>,
        /// Comma-separated annotator ids allowed to judge; any id when omitted.
        #[arg(long, value_delimiter = ',')]
        annotators: Option<Vec<String>>,
        #[arg(long, value_enum, default_value = "coarse")]
        kind: Kind,
        /// Directory with the static review UI.
        #[arg(long)]
        ui_dir: Option<PathBuf>,
    },
}

fn read_text(path: &Path) -> Result<String> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s).context("reading stdin")?;
        return Ok(s);
    }
    fs::read_to_string(path).map_err(|e| Error::Io { path: path.to_owned(), source: e }.into())
}

fn read_corpus(path: &Path) -> Result<AnnotatedCorpus> {
    AnnotatedCorpus::parse_str(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn write_out(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::BuildGazetteer { kb, out } => {
            let snap = KnowledgeSnapshot::parse_str(&read_text(&kb)?)?;
            let gz = Gazetteer::build(&snap)?;
            write_out(out.as_deref(), &gz.export())?;
            eprintln!("{} entries, {} skipped, {} dangling targets", gz.len(), gz.skipped(), snap.dangling_targets());
        }
        Command::Annotate { kb, dump, out, format, threshold, fold, jobs } => {
            let raw = read_text(&kb)?;
            let snap = KnowledgeSnapshot::parse_str(&raw).with_context(|| format!("parsing {}", kb.display()))?;
            let dump = Dump::parse_str(&read_text(&dump)?).with_context(|| format!("parsing {}", dump.display()))?;
            let config = AnnotatorConfig {
                language_threshold: threshold,
                case_folding: if fold { CaseFolding::Turkish } else { CaseFolding::Sensitive },
                jobs,
            };
            let (corpus, report) = Annotator::new(&snap, &dump, config)?.annotate_corpus()?;
            let corpus = corpus.with_meta("snapshot", hash16(raw.as_bytes()));
            let text = match format {
                Format::Tsv => corpus.to_tsv(),
                Format::Conll => corpus.to_conll(),
            };
            write_out(out.as_deref(), &text)?;
            eprintln!(
                "{} candidates, {} annotated, skipped {:?}, {} sentences ({} before merging)",
                report.candidates, report.annotated, report.skipped, report.sentences, report.raw_sentences
            );
        }
        Command::ReduceNoise { input, out, mode } => {
            let mode = match mode {
                Mode::Di => NoiseMode::DomainIndependent,
                Mode::Dd => NoiseMode::DomainDependent,
            };
            let reduced = reduce(&read_corpus(&input)?, mode)?;
            write_out(out.as_deref(), &reduced.to_tsv())?;
        }
        Command::ToCga { input, out, mapping, default_mapping, drop } => {
            let corpus = read_corpus(&input)?;
            let table = match mapping {
                Some(p) if !default_mapping => TypeMappingTable::parse_str(&read_text(&p)?)
                    .with_context(|| format!("parsing {}", p.display()))?,
                _ => {
                    let types: BTreeSet<_> = corpus
                        .sentences
                        .iter()
                        .flat_map(|s| s.tags.iter().filter_map(|t| t.label()))
                        .map(|l| l.parse())
                        .collect::<kbner_core::Result<_>>()?;
                    TypeMappingTable::default_for(&types, drop)
                }
            };
            let (cga, counts) = to_coarse(&corpus, &table)?;
            write_out(out.as_deref(), &cga.to_tsv())?;
            let summary: Vec<String> = counts.iter().map(|(l, n)| format!("{l}={n}")).collect();
            eprintln!("{} of {} sentences kept; tokens {}", cga.len(), corpus.len(), summary.join(" "));
        }
        Command::Stats { input, json, out } => {
            let report = compute_stats(&read_corpus(&input)?);
            let text = if json { report.to_json() } else { report.to_string() };
            write_out(out.as_deref(), &text)?;
        }
        Command::Sample { input, out, words, sentences, seed } => {
            let corpus = read_corpus(&input)?;
            let sampled = match sentences {
                Some(n) => sample_sentences(&corpus, n, seed),
                None => sample_words(&corpus, words.unwrap_or(NER_TEST_WORDS), seed),
            };
            write_out(out.as_deref(), &sampled.to_tsv())?;
        }
        Command::Eval { auto, gt, metric, average, pred, json } => {
            let auto = read_corpus(&auto)?;
            let gt = GroundTruth::parse_str(&read_text(&gt)?).with_context(|| format!("parsing {}", gt.display()))?;
            let averaging = match average {
                Average::Macro => Averaging::Macro,
                Average::Micro => Averaging::Micro,
            };
            let mut report = EvalReport { diff: None, matching_ratios: None, labels: None, typing: None, topk: None };
            match metric {
                Metric::Coarse => {
                    let gt = gt.corpus();
                    let d = diff_corpora(&auto, &gt)?;
                    report.matching_ratios = Some(d.matching_ratios());
                    report.diff = Some(d);
                    report.labels = Some(coarse_prf_corpora::<f64>(&auto, &gt, averaging)?);
                }
                Metric::Fine => {
                    let preds = match &pred {
                        Some(p) => Some(parse_prediction_sidecar(&read_text(p)?)?),
                        None => None,
                    };
                    let (typing, topk) = fine_eval_against::<f64>(&auto, &gt, preds.as_ref())?;
                    report.typing = Some(typing);
                    report.topk = Some(topk);
                }
                Metric::Domain => report.topk = Some(domain_topk::<f64>(&auto, &gt)?),
            }
            let text = if json {
                serde_json::to_string_pretty(&report)? + "\n"
            } else {
                report.to_string()
            };
            write_out(None, &text)?;
        }
        Command::Serve { port, host, tasks, log, candidates, annotators, kind, ui_dir } => {
            let corpus = read_corpus(&tasks)?;
            let cands = match &candidates {
                Some(p) => parse_candidates(&read_text(p)?).with_context(|| format!("parsing {}", p.display()))?,
                None => HashMap::new(),
            };
            let kind = match kind {
                Kind::Coarse => TaskKind::Coarse,
                Kind::FineRank => TaskKind::FineRank,
                Kind::DomainRank => TaskKind::DomainRank,
            };
            let registry = annotators.map(|a| a.into_iter().filter(|s| !s.is_empty()).collect());
            let state = Adjudication::with_log(build_tasks(&corpus, kind, &cands)?, registry, &log)?;
            if let Some(dir) = &ui_dir {
                if !dir.is_dir() {
                    bail!(Error::Io {
                        path: dir.clone(),
                        source: io::Error::new(io::ErrorKind::NotFound, "UI directory not found"),
                    });
                }
            }
            let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind((host.as_str(), port)).await?;
                println!("listening on {}", listener.local_addr()?);
                io::stdout().flush()?;
                let app = kbner_server::router(Arc::new(Mutex::new(state)), ui_dir);
                kbner_server::serve(listener, app).await?;
                anyhow::Ok(())
            })?;
        }
    }
    Ok(())
}

/// 2 for bad or missing input, 3 for everything else.
fn exit_code(e: &anyhow::Error) -> u8 {
    match e.chain().find_map(|c| c.downcast_ref::<Error>()) {
        Some(err) if err.is_input() => 2,
        _ => 3,
    }
}

/// Joins the error chain, skipping causes already spelled out by their parent.
fn render(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !out.ends_with(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", render(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
