//! Token-level multi-pattern matcher with leftmost-longest semantics.
//!
//! Surfaces are token sequences. Tokens are interned once and stored in a
//! trie, so one query position costs at most the length of the longest
//! surface. Scanning is greedy and non-overlapping: at each position the
//! longest surface starting there wins, and the scan resumes after it.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::kb::TypePath;
use crate::text::CaseFolding;

/// Who a surface belongs to.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SurfaceOwner {
    pub mid: String,
    pub entity_type: TypePath,
}

#[derive(Default, Clone, Debug)]
struct Node {
    children: HashMap<u32, usize>,
    /// Owners of the surface ending here, sorted and deduplicated.
    owners: Vec<SurfaceOwner>,
}

#[derive(Clone, Debug)]
pub struct MatchAutomaton {
    nodes: Vec<Node>,
    vocab: HashMap<String, u32>,
    folding: CaseFolding,
    surfaces: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Match<'a> {
    pub start: usize,
    pub len: usize,
    pub owners: &'a [SurfaceOwner],
}

impl Match<'_> {
    pub fn end(&self) -> usize {
        self.start + self.len
    }
}

impl MatchAutomaton {
    pub fn build<I, S>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<S>, String, TypePath)>,
        S: AsRef<str>,
    {
        Self::build_with(pairs, CaseFolding::Sensitive)
    }

    pub fn build_with<I, S>(pairs: I, folding: CaseFolding) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<S>, String, TypePath)>,
        S: AsRef<str>,
    {
        let mut ac = MatchAutomaton {
            nodes: vec![Node::default()],
            vocab: HashMap::new(),
            folding,
            surfaces: 0,
        };
        for (surface, mid, entity_type) in pairs {
            if surface.is_empty() {
                return Err(Error::EmptySurface);
            }
            let mut node = 0;
            for tok in &surface {
                let key = folding.apply(tok.as_ref());
                let next_id = ac.vocab.len() as u32;
                let id = *ac.vocab.entry(key.into_owned()).or_insert(next_id);
                node = match ac.nodes[node].children.get(&id) {
                    Some(&n) => n,
                    None => {
                        ac.nodes.push(Node::default());
                        let n = ac.nodes.len() - 1;
                        ac.nodes[node].children.insert(id, n);
                        n
                    }
                };
            }
            let owners = &mut ac.nodes[node].owners;
            if owners.is_empty() {
                ac.surfaces += 1;
            }
            let owner = SurfaceOwner { mid, entity_type };
            if let Err(at) = owners.binary_search(&owner) {
                owners.insert(at, owner);
            }
        }
        Ok(ac)
    }

    /// Number of distinct surfaces.
    pub fn len(&self) -> usize {
        self.surfaces
    }

    pub fn is_empty(&self) -> bool {
        self.surfaces == 0
    }

    fn token_id(&self, tok: &str) -> Option<u32> {
        match self.folding {
            CaseFolding::Sensitive => self.vocab.get(tok).copied(),
            CaseFolding::Turkish => self.vocab.get(self.folding.apply(tok).as_ref()).copied(),
        }
    }

    /// Longest surface starting at `pos`.
    pub fn longest_at<S: AsRef<str>>(&self, tokens: &[S], pos: usize) -> Option<Match<'_>> {
        let mut node = 0;
        let mut best = None;
        for (i, tok) in tokens.iter().enumerate().skip(pos) {
            let Some(next) = self.token_id(tok.as_ref()).and_then(|id| self.nodes[node].children.get(&id)) else {
                break;
            };
            node = *next;
            if !self.nodes[node].owners.is_empty() {
                best = Some(Match { start: pos, len: i + 1 - pos, owners: &self.nodes[node].owners });
            }
        }
        best
    }

    /// Greedy leftmost-longest, non-overlapping matches over the whole slice.
    pub fn find_iter<'a, 't, S: AsRef<str>>(&'a self, tokens: &'t [S]) -> FindIter<'a, 't, S> {
        FindIter { automaton: self, tokens, pos: 0 }
    }
}

pub struct FindIter<'a, 't, S> {
    automaton: &'a MatchAutomaton,
    tokens: &'t [S],
    pos: usize,
}

impl<'a, S: AsRef<str>> Iterator for FindIter<'a, '_, S> {
    type Item = Match<'a>;

    fn next(&mut self) -> Option<Match<'a>> {
        while self.pos < self.tokens.len() {
            if let Some(m) = self.automaton.longest_at(self.tokens, self.pos) {
                self.pos = m.end();
                return Some(m);
            }
            self.pos += 1;
        }
        None
    }
}
