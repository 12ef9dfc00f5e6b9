//! Source grouping and the minimum-article filter.

use super::TokenizedArticle;
use crate::error::{Error, Result};
use std::collections::HashMap;

/// Map from raw source names to canonical ones.
///
/// An empty grouping is the identity. A non-empty grouping must cover every
/// raw name in the corpus; a missing entry is fatal so that silent
/// misattribution cannot slip through a partially written table.
#[derive(Debug, Clone, Default)]
pub struct Grouping {
    pub entries: HashMap<String, String>,
}

impl Grouping {
    pub fn identity() -> Self {
        Grouping::default()
    }

    pub fn from_pairs<I: IntoIterator<Item = (String, String)>>(pairs: I) -> Self {
        Grouping {
            entries: pairs.into_iter().collect(),
        }
    }

    pub fn canonical<'a>(&'a self, raw: &'a str) -> Result<&'a str> {
        if self.entries.is_empty() {
            return Ok(raw);
        }
        self.entries
            .get(raw)
            .map(String::as_str)
            .ok_or_else(|| Error::UnmappedSource(raw.to_string()))
    }
}

/// Canonical sources retained after filtering, with their article counts.
///
/// Names are sorted so that source indices are stable across runs regardless
/// of input order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceTable {
    pub names: Vec<String>,
    pub article_counts: Vec<u32>,
}

impl SourceTable {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<u16> {
        self.names
            .binary_search_by(|n| n.as_str().cmp(name))
            .ok()
            .map(|i| i as u16)
    }

    pub fn name(&self, index: u16) -> &str {
        &self.names[index as usize]
    }
}

/// Rename sources through `grouping`, then drop any canonical source (and its
/// documents) with fewer than `min_articles` articles.
pub fn filter_and_group_sources(
    docs: Vec<TokenizedArticle>,
    grouping: &Grouping,
    min_articles: u32,
) -> Result<(Vec<TokenizedArticle>, SourceTable)> {
    let mut renamed = Vec::with_capacity(docs.len());
    for mut doc in docs {
        let canonical = grouping.canonical(&doc.source)?.to_string();
        doc.source = canonical;
        renamed.push(doc);
    }

    let mut counts: HashMap<&str, u32> = HashMap::new();
    for doc in &renamed {
        *counts.entry(doc.source.as_str()).or_insert(0) += 1;
    }

    let mut names: Vec<String> = counts
        .iter()
        .filter(|(_, &c)| c >= min_articles)
        .map(|(name, _)| name.to_string())
        .collect();
    names.sort();
    let article_counts: Vec<u32> = names.iter().map(|n| counts[n.as_str()]).collect();
    let table = SourceTable {
        names,
        article_counts,
    };

    let kept = renamed
        .into_iter()
        .filter(|d| table.index_of(&d.source).is_some())
        .collect();
    Ok((kept, table))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn doc(id: &str, source: &str) -> TokenizedArticle {
        TokenizedArticle {
            id: id.to_string(),
            source: source.to_string(),
            date: NaiveDate::from_ymd_opt(1850, 1, 1).unwrap(),
            tokens: vec!["a".to_string()],
        }
    }

    #[test]
    fn grouping_consolidates_and_sums_counts() {
        let grouping = Grouping::from_pairs([
            ("North Star".to_string(), "Douglass Papers".to_string()),
            (
                "Frederick Douglass Paper".to_string(),
                "Douglass Papers".to_string(),
            ),
            ("The Liberator".to_string(), "The Liberator".to_string()),
        ]);
        let docs = vec![
            doc("a", "North Star"),
            doc("b", "Frederick Douglass Paper"),
            doc("c", "The Liberator"),
            doc("d", "North Star"),
        ];
        let (kept, table) = filter_and_group_sources(docs, &grouping, 1).unwrap();
        assert_eq!(kept.len(), 4);
        assert_eq!(table.names, vec!["Douglass Papers", "The Liberator"]);
        assert_eq!(table.article_counts, vec![3, 1]);
    }

    #[test]
    fn below_minimum_source_is_dropped_with_docs() {
        let docs: Vec<_> = (0..499)
            .map(|i| doc(&format!("s{i}"), "small"))
            .chain((0..500).map(|i| doc(&format!("b{i}"), "big")))
            .collect();
        let (kept, table) = filter_and_group_sources(docs, &Grouping::identity(), 500).unwrap();
        assert_eq!(table.names, vec!["big"]);
        assert_eq!(kept.len(), 500);
        assert!(kept.iter().all(|d| d.source == "big"));
    }

    #[test]
    fn empty_grouping_is_identity() {
        let docs = vec![doc("a", "x"), doc("b", "y")];
        let (kept, table) = filter_and_group_sources(docs, &Grouping::identity(), 1).unwrap();
        assert_eq!(kept.len(), 2);
        assert_eq!(table.names, vec!["x", "y"]);
    }

    #[test]
    fn unmapped_name_is_fatal_when_grouping_nonempty() {
        let grouping = Grouping::from_pairs([("x".to_string(), "x".to_string())]);
        let docs = vec![doc("a", "x"), doc("b", "unknown")];
        let err = filter_and_group_sources(docs, &grouping, 1).unwrap_err();
        assert!(matches!(err, Error::UnmappedSource(name) if name == "unknown"));
    }
}
