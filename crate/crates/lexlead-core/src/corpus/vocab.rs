//! Vocabulary construction and per-cell token caps.

use super::{BinnedArticle, Document};
use crate::error::{Error, Result};
use crate::rng::{self, tags};
use rand::Rng;
use sha2::{Digest, Sha256};
use std::collections::HashMap;

/// Word/index bijection plus total and per-(source, bin) occurrence counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    pub words: Vec<String>,
    index: HashMap<String, u32>,
    pub totals: Vec<u64>,
    /// Occurrences of word `w` in cell `(s, t)`, laid out `w * S * T + s * T + t`.
    pub cell_counts: Vec<u32>,
    pub n_sources: u16,
    pub n_bins: u16,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn word(&self, w: u32) -> &str {
        &self.words[w as usize]
    }

    pub fn index_of(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn total(&self, w: u32) -> u64 {
        self.totals[w as usize]
    }

    pub fn cell_count(&self, w: u32, s: u16, t: u16) -> u32 {
        let (s_n, t_n) = (self.n_sources as usize, self.n_bins as usize);
        self.cell_counts[w as usize * s_n * t_n + s as usize * t_n + t as usize]
    }

    /// Occurrences of `w` in bin `t`, summed over sources.
    pub fn bin_count(&self, w: u32, t: u16) -> u64 {
        (0..self.n_sources)
            .map(|s| self.cell_count(w, s, t) as u64)
            .sum()
    }

    /// Number of distinct sources in which `w` occurs at least once.
    pub fn source_spread(&self, w: u32) -> u16 {
        (0..self.n_sources)
            .filter(|&s| (0..self.n_bins).any(|t| self.cell_count(w, s, t) > 0))
            .count() as u16
    }

    /// Number of bins in which `w` never occurs.
    pub fn zero_bins(&self, w: u32) -> u16 {
        (0..self.n_bins)
            .filter(|&t| self.bin_count(w, t) == 0)
            .count() as u16
    }

    /// SHA-256 over the word list in index order; models record it so a
    /// model can refuse to run against the wrong corpus.
    pub fn content_hash(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        for w in &self.words {
            hasher.update((w.len() as u32).to_le_bytes());
            hasher.update(w.as_bytes());
        }
        hasher.finalize().into()
    }

    /// Recompute totals and cell counts from the documents; this is the
    /// single source of truth after any document removal.
    pub fn recount(&mut self, docs: &[Document]) {
        let (s_n, t_n) = (self.n_sources as usize, self.n_bins as usize);
        self.totals = vec![0; self.len()];
        self.cell_counts = vec![0; self.len() * s_n * t_n];
        for doc in docs {
            for &w in &doc.tokens {
                self.totals[w as usize] += 1;
                self.cell_counts[w as usize * s_n * t_n + doc.source as usize * t_n + doc.bin as usize] += 1;
            }
        }
    }

    pub fn from_words(words: Vec<String>, n_sources: u16, n_bins: u16) -> Self {
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        let n = words.len();
        Vocabulary {
            words,
            index,
            totals: vec![0; n],
            cell_counts: vec![0; n * n_sources as usize * n_bins as usize],
            n_sources,
            n_bins,
        }
    }
}

/// Select the vocabulary (count >= `min_count`, top `cap` by descending
/// count, ties lexicographic) and re-encode the documents against it. Tokens
/// outside the vocabulary are dropped; documents left empty are removed.
pub fn build_vocabulary(
    docs: &[BinnedArticle],
    n_sources: u16,
    n_bins: u16,
    cap: usize,
    min_count: u64,
) -> Result<(Vocabulary, Vec<Document>)> {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for doc in docs {
        for tok in &doc.tokens {
            *counts.entry(tok.as_str()).or_insert(0) += 1;
        }
    }
    let mut ranked: Vec<(&str, u64)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(cap);
    if ranked.is_empty() {
        return Err(Error::EmptyVocabulary);
    }

    let words: Vec<String> = ranked.iter().map(|(w, _)| w.to_string()).collect();
    let mut vocab = Vocabulary::from_words(words, n_sources, n_bins);

    let mut encoded = Vec::with_capacity(docs.len());
    for doc in docs {
        let tokens: Vec<u32> = doc
            .tokens
            .iter()
            .filter_map(|t| vocab.index_of(t))
            .collect();
        if tokens.is_empty() {
            continue;
        }
        encoded.push(Document {
            id: doc.id.clone(),
            source: doc.source,
            bin: doc.bin,
            tokens,
        });
    }
    vocab.recount(&encoded);
    Ok((vocab, encoded))
}

/// Enforce a per-(source, bin) token budget by removing whole documents,
/// chosen uniformly at random, until each cell first falls at or below
/// `cap`. Deterministic for a given seed.
pub fn cap_cell_tokens(docs: Vec<Document>, cap: u64, seed: u64) -> Vec<Document> {
    let mut cells: HashMap<(u16, u16), Vec<usize>> = HashMap::new();
    for (i, d) in docs.iter().enumerate() {
        cells.entry((d.source, d.bin)).or_default().push(i);
    }
    let mut remove = vec![false; docs.len()];
    let mut keys: Vec<(u16, u16)> = cells.keys().copied().collect();
    keys.sort_unstable();
    for (s, t) in keys {
        let mut live = cells.remove(&(s, t)).unwrap();
        let mut total: u64 = live.iter().map(|&i| docs[i].tokens.len() as u64).sum();
        if total <= cap {
            continue;
        }
        let mut rng = rng::stream(
            rng::mix(seed, tags::CELL_CAP),
            ((s as u64) << 16) | t as u64,
        );
        while total > cap && !live.is_empty() {
            let victim = live.swap_remove(rng.gen_range(0..live.len()));
            total -= docs[victim].tokens.len() as u64;
            remove[victim] = true;
        }
    }
    docs.into_iter()
        .enumerate()
        .filter(|(i, _)| !remove[*i])
        .map(|(_, d)| d)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binned(id: &str, source: u16, bin: u16, tokens: &[&str]) -> BinnedArticle {
        BinnedArticle {
            id: id.to_string(),
            source,
            bin,
            tokens: tokens.iter().map(|t| t.to_string()).collect(),
        }
    }

    #[test]
    fn min_count_and_cap_apply_in_order() {
        // a:10 b:5 c:1, cap 2, min_count 2 -> [a, b]
        let mut toks = vec!["a"; 10];
        toks.extend(vec!["b"; 5]);
        toks.push("c");
        let docs = vec![binned("d", 0, 0, &toks)];
        let (vocab, _) = build_vocabulary(&docs, 1, 1, 2, 2).unwrap();
        assert_eq!(vocab.words, vec!["a", "b"]);
    }

    #[test]
    fn count_ties_break_lexicographically() {
        let docs = vec![binned("d", 0, 0, &["y", "x", "y", "x", "z"])];
        let (vocab, _) = build_vocabulary(&docs, 1, 1, 1, 1).unwrap();
        assert_eq!(vocab.words, vec!["x"]);
    }

    #[test]
    fn oov_tokens_drop_and_empty_docs_vanish() {
        let docs = vec![
            binned("d1", 0, 0, &["a", "a", "rare"]),
            binned("d2", 0, 0, &["rarer"]),
        ];
        let (vocab, encoded) = build_vocabulary(&docs, 1, 1, 10, 2).unwrap();
        assert_eq!(vocab.words, vec!["a"]);
        assert_eq!(encoded.len(), 1);
        assert_eq!(encoded[0].tokens, vec![0, 0]);
    }

    #[test]
    fn empty_vocabulary_is_fatal() {
        let docs = vec![binned("d", 0, 0, &["a"])];
        assert!(matches!(
            build_vocabulary(&docs, 1, 1, 10, 5),
            Err(Error::EmptyVocabulary)
        ));
    }

    #[test]
    fn cell_counts_sum_to_totals() {
        let docs = vec![
            binned("d1", 0, 0, &["a", "b", "a"]),
            binned("d2", 1, 1, &["a", "b"]),
            binned("d3", 0, 1, &["b"]),
        ];
        let (vocab, _) = build_vocabulary(&docs, 2, 2, 10, 1).unwrap();
        for w in 0..vocab.len() as u32 {
            let total: u64 = (0..2u16)
                .flat_map(|s| (0..2u16).map(move |t| (s, t)))
                .map(|(s, t)| vocab.cell_count(w, s, t) as u64)
                .sum();
            assert_eq!(total, vocab.total(w));
        }
        let a = vocab.index_of("a").unwrap();
        assert_eq!(vocab.cell_count(a, 0, 0), 2);
        assert_eq!(vocab.cell_count(a, 1, 1), 1);
        assert_eq!(vocab.bin_count(a, 1), 1);
        assert_eq!(vocab.source_spread(a), 2);
        assert_eq!(vocab.zero_bins(a), 0);
    }

    fn encdoc(id: &str, source: u16, bin: u16, n: usize) -> Document {
        Document {
            id: id.to_string(),
            source,
            bin,
            tokens: vec![0; n],
        }
    }

    #[test]
    fn under_cap_cell_is_untouched() {
        let docs = vec![encdoc("a", 0, 0, 60), encdoc("b", 0, 0, 40)];
        let out = cap_cell_tokens(docs.clone(), 200, 1);
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn removal_stops_at_first_compliant_count() {
        let docs = vec![encdoc("a", 0, 0, 60), encdoc("b", 0, 0, 60)];
        let out = cap_cell_tokens(docs, 100, 1);
        assert_eq!(out.len(), 1);
    }

    #[test]
    fn capping_is_deterministic() {
        let docs: Vec<Document> = (0..10)
            .map(|i| encdoc(&format!("d{i}"), (i % 2) as u16, 0, 50))
            .collect();
        let a = cap_cell_tokens(docs.clone(), 120, 9);
        let b = cap_cell_tokens(docs, 120, 9);
        assert_eq!(a, b);
    }
}
