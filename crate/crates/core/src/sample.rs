//! Seeded test-set sampling.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::AnnotatedCorpus;

pub const DEFAULT_SEED: u64 = 42;
pub const NER_TEST_WORDS: usize = 10_000;
pub const TC_TEST_SENTENCES: usize = 2_000;

fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
}

fn pick(corpus: &AnnotatedCorpus, mut chosen: Vec<usize>, tag: String) -> AnnotatedCorpus {
    chosen.sort_unstable();
    let mut out = AnnotatedCorpus::new(chosen.into_iter().map(|i| corpus.sentences[i].clone()).collect());
    out.meta = corpus.meta.clone();
    out.meta.insert("sample".to_owned(), tag);
    out
}

/// Random sentences until at least `words` non-punctuation tokens are
/// collected (or the corpus runs out). Sentences keep corpus order.
pub fn sample_words(corpus: &AnnotatedCorpus, words: usize, seed: u64) -> AnnotatedCorpus {
    let mut total = 0;
    let mut chosen = Vec::new();
    for i in shuffled(corpus.len(), seed) {
        if total >= words {
            break;
        }
        total += corpus.sentences[i].tokens().iter().filter(|t| !t.is_punct).count();
        chosen.push(i);
    }
    pick(corpus, chosen, format!("words:{words}:seed:{seed}"))
}

/// `n` random sentences (all of them if the corpus is smaller), in corpus
/// order.
pub fn sample_sentences(corpus: &AnnotatedCorpus, n: usize, seed: u64) -> AnnotatedCorpus {
    let chosen = shuffled(corpus.len(), seed).into_iter().take(n).collect();
    pick(corpus, chosen, format!("sentences:{n}:seed:{seed}"))
}
