//! Corpus construction: ingest, normalize, deduplicate, bin, filter sources,
//! and build the vocabulary.
//!
//! The stages are pure functions between explicit document representations:
//!
//! ```text
//! RawArticle --normalize--> TokenizedArticle --dedup/group/filter-->
//! BinnedArticle --build_vocabulary--> Document --cap--> EncodedCorpus
//! ```

mod binning;
mod dedup;
mod ingest;
mod sources;
mod tokenize;
mod vocab;

pub use binning::TimeBinning;
pub use dedup::{deduplicate, DedupReport};
pub use ingest::{ingest, ingest_reader, ArticleRecord, IngestWarning, RawArticle};
pub use sources::{filter_and_group_sources, Grouping, SourceTable};
pub use tokenize::{apply_substitutions, normalize};
pub use vocab::{build_vocabulary, cap_cell_tokens, Vocabulary};

use crate::binio;
use crate::error::{Error, Result};
use chrono::NaiveDate;
use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

/// An article after normalization, before vocabulary encoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedArticle {
    pub id: String,
    pub source: String,
    pub date: NaiveDate,
    pub tokens: Vec<String>,
}

/// An article with resolved source index and time bin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinnedArticle {
    pub id: String,
    pub source: u16,
    pub bin: u16,
    pub tokens: Vec<String>,
}

/// A fully encoded document: vocabulary indices only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub source: u16,
    pub bin: u16,
    pub tokens: Vec<u32>,
}

impl Document {
    pub fn n(&self) -> usize {
        self.tokens.len()
    }
}

/// Resolve each article's source index and time bin. Out-of-span timestamps
/// are fatal and name the offending document.
pub fn assign_bins(
    docs: Vec<TokenizedArticle>,
    sources: &SourceTable,
    binning: &TimeBinning,
) -> Result<Vec<BinnedArticle>> {
    docs.into_iter()
        .map(|d| {
            let bin = binning.assign(&d.id, d.date)?;
            let source = sources
                .index_of(&d.source)
                .ok_or_else(|| Error::UnmappedSource(d.source.clone()))?;
            Ok(BinnedArticle {
                id: d.id,
                source,
                bin,
                tokens: d.tokens,
            })
        })
        .collect()
}

/// The finished corpus: encoded documents plus the tables needed to
/// interpret them.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedCorpus {
    pub binning: TimeBinning,
    pub sources: SourceTable,
    pub vocab: Vocabulary,
    pub docs: Vec<Document>,
}

impl EncodedCorpus {
    pub fn n_sources(&self) -> u16 {
        self.sources.len() as u16
    }

    pub fn n_bins(&self) -> u16 {
        self.binning.bins()
    }

    /// Token counts per (source, bin) cell, laid out `s * T + t`.
    pub fn token_count_matrix(&self) -> Vec<u64> {
        let t = self.n_bins() as usize;
        let mut m = vec![0u64; self.sources.len() * t];
        for d in &self.docs {
            m[d.source as usize * t + d.bin as usize] += d.tokens.len() as u64;
        }
        m
    }

    pub fn total_tokens(&self) -> u64 {
        self.docs.iter().map(|d| d.tokens.len() as u64).sum()
    }
}

/// Everything configurable about corpus construction.
#[derive(Debug, Clone)]
pub struct CorpusOptions {
    /// Corpus span; derived from the data when absent.
    pub span: Option<(NaiveDate, NaiveDate)>,
    pub bins: u16,
    pub min_articles: u32,
    pub vocab_cap: usize,
    pub min_count: u64,
    pub shingle_len: usize,
    /// Optional per-(source, bin) token budget.
    pub cell_token_cap: Option<u64>,
    /// Deduplicate after (rather than before) the source filter.
    pub dedup_after_filter: bool,
    pub substitutions: HashMap<String, String>,
    pub grouping: Grouping,
    pub seed: u64,
}

impl Default for CorpusOptions {
    fn default() -> Self {
        CorpusOptions {
            span: None,
            bins: 10,
            min_articles: 500,
            vocab_cap: 50_000,
            min_count: 5,
            shingle_len: 8,
            cell_token_cap: None,
            dedup_after_filter: false,
            substitutions: HashMap::new(),
            grouping: Grouping::identity(),
            seed: 0,
        }
    }
}

/// Per-stage counts for the construction log.
#[derive(Debug, Clone, Default)]
pub struct BuildReport {
    pub articles_in: usize,
    pub removed_as_duplicates: usize,
    pub removed_by_source_filter: usize,
    pub removed_empty: usize,
    pub removed_by_cell_cap: usize,
    pub dedup: DedupReport,
}

/// Run the full construction pipeline over already-ingested articles.
pub fn build_corpus(
    articles: Vec<RawArticle>,
    opts: &CorpusOptions,
) -> Result<(EncodedCorpus, BuildReport)> {
    let mut report = BuildReport {
        articles_in: articles.len(),
        ..BuildReport::default()
    };

    let span = match opts.span {
        Some(span) => span,
        None => {
            let min = articles.iter().map(|a| a.date).min();
            let max = articles.iter().map(|a| a.date).max();
            match (min, max) {
                (Some(lo), Some(hi)) => (lo, hi),
                _ => return Err(Error::Config("cannot derive span from empty input".into())),
            }
        }
    };
    let binning = TimeBinning::equal(span.0, span.1, opts.bins)?;

    let mut tokenized: Vec<TokenizedArticle> = articles
        .into_iter()
        .map(|a| {
            let mut tokens = normalize(&a.text);
            apply_substitutions(&mut tokens, &opts.substitutions);
            TokenizedArticle {
                id: a.id,
                source: a.source,
                date: a.date,
                tokens,
            }
        })
        .filter(|d| !d.tokens.is_empty())
        .collect();

    let dedup_stage = |docs: Vec<TokenizedArticle>, report: &mut BuildReport| {
        let before = docs.len();
        let (kept, dedup_report) = deduplicate(&docs, opts.shingle_len);
        report.removed_as_duplicates = before - kept.len();
        report.dedup = dedup_report;
        kept
    };

    if !opts.dedup_after_filter {
        tokenized = dedup_stage(tokenized, &mut report);
    }
    let before_filter = tokenized.len();
    let (mut filtered, source_table) =
        filter_and_group_sources(tokenized, &opts.grouping, opts.min_articles)?;
    report.removed_by_source_filter = before_filter - filtered.len();
    if opts.dedup_after_filter {
        filtered = dedup_stage(filtered, &mut report);
    }

    let binned = assign_bins(filtered, &source_table, &binning)?;
    let n_docs = binned.len();
    let (mut vocab, mut docs) = build_vocabulary(
        &binned,
        source_table.len() as u16,
        binning.bins(),
        opts.vocab_cap,
        opts.min_count,
    )?;
    report.removed_empty = n_docs - docs.len();

    if let Some(cap) = opts.cell_token_cap {
        let before = docs.len();
        docs = cap_cell_tokens(docs, cap, opts.seed);
        report.removed_by_cell_cap = before - docs.len();
        vocab.recount(&docs);
    }

    Ok((
        EncodedCorpus {
            binning,
            sources: source_table,
            vocab,
            docs,
        },
        report,
    ))
}

// ---------------------------------------------------------------------------
// Binary container
// ---------------------------------------------------------------------------

const CORPUS_MAGIC: &[u8; 4] = b"LXCP";
const CORPUS_VERSION: u32 = 1;

fn date_to_days(d: NaiveDate) -> i64 {
    d.signed_duration_since(NaiveDate::from_ymd_opt(1970, 1, 1).unwrap())
        .num_days()
}

fn days_to_date(days: i64) -> Option<NaiveDate> {
    NaiveDate::from_ymd_opt(1970, 1, 1).and_then(|epoch| epoch.checked_add_signed(chrono::Duration::days(days)))
}

impl EncodedCorpus {
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut w = BufWriter::new(file);
        self.write(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path.display().to_string(), e))
    }

    fn write<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(CORPUS_MAGIC)?;
        binio::write_u32(w, CORPUS_VERSION)?;

        binio::write_i64(w, date_to_days(self.binning.span_start))?;
        binio::write_i64(w, date_to_days(self.binning.span_end))?;
        binio::write_u32(w, self.binning.bins() as u32)?;
        for &e in &self.binning.edges {
            binio::write_i64(w, date_to_days(e))?;
        }

        binio::write_u32(w, self.sources.len() as u32)?;
        for (name, &count) in self.sources.names.iter().zip(&self.sources.article_counts) {
            binio::write_str(w, name)?;
            binio::write_u32(w, count)?;
        }

        binio::write_u32(w, self.vocab.len() as u32)?;
        for word in &self.vocab.words {
            binio::write_str(w, word)?;
        }
        for &t in &self.vocab.totals {
            binio::write_u64(w, t)?;
        }
        binio::write_u32_slice(w, &self.vocab.cell_counts)?;

        binio::write_u32(w, self.docs.len() as u32)?;
        for d in &self.docs {
            binio::write_str(w, &d.id)?;
            binio::write_u32(w, d.source as u32)?;
            binio::write_u32(w, d.bin as u32)?;
            binio::write_u32(w, d.tokens.len() as u32)?;
            binio::write_u32_slice(w, &d.tokens)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let display = path.display().to_string();
        let file = File::open(path).map_err(|e| Error::io(display.clone(), e))?;
        let mut r = binio::Reader::new(BufReader::new(file), &display);

        r.expect_magic(CORPUS_MAGIC, "corpus")?;
        let version = r.u32()?;
        if version != CORPUS_VERSION {
            return Err(Error::CorruptFile {
                path: display,
                reason: format!("unsupported corpus version {version}"),
            });
        }

        let bad_date = |path: &str| Error::CorruptFile {
            path: path.to_string(),
            reason: "date out of range".into(),
        };
        let span_start = days_to_date(r.i64()?).ok_or_else(|| bad_date(&display))?;
        let span_end = days_to_date(r.i64()?).ok_or_else(|| bad_date(&display))?;
        let n_bins = r.len()?;
        let mut edges = Vec::with_capacity(n_bins + 1);
        for _ in 0..=n_bins {
            edges.push(days_to_date(r.i64()?).ok_or_else(|| bad_date(&display))?);
        }
        let binning = TimeBinning {
            span_start,
            span_end,
            edges,
        };

        let n_sources = r.len()?;
        let mut names = Vec::with_capacity(n_sources);
        let mut article_counts = Vec::with_capacity(n_sources);
        for _ in 0..n_sources {
            names.push(r.string()?);
            article_counts.push(r.u32()?);
        }
        let sources = SourceTable {
            names,
            article_counts,
        };

        let n_words = r.len()?;
        let mut words = Vec::with_capacity(n_words);
        for _ in 0..n_words {
            words.push(r.string()?);
        }
        let mut vocab = Vocabulary::from_words(words, n_sources as u16, n_bins as u16);
        for t in vocab.totals.iter_mut() {
            *t = r.u64()?;
        }
        let n_cells = n_words * n_sources * n_bins;
        vocab.cell_counts = r.u32_vec(n_cells)?;

        let n_docs = r.len()?;
        let mut docs = Vec::with_capacity(n_docs);
        for _ in 0..n_docs {
            let id = r.string()?;
            let source = r.u32()? as u16;
            let bin = r.u32()? as u16;
            let n_tokens = r.len()?;
            let tokens = r.u32_vec(n_tokens)?;
            docs.push(Document {
                id,
                source,
                bin,
                tokens,
            });
        }

        Ok(EncodedCorpus {
            binning,
            sources,
            vocab,
            docs,
        })
    }
}
