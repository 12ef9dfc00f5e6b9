//! Shingle-based exact-overlap deduplication.
//!
//! Two documents conflict when they share any contiguous run of
//! `shingle_len` tokens (eight in the published configuration, which targets
//! verbatim reprints). When documents conflict, the earlier-timestamped one
//! wins; ties fall to the smaller id. Output preserves input order.

use super::TokenizedArticle;
use std::collections::HashMap;

/// What was removed and why.
#[derive(Debug, Clone, Default)]
pub struct DedupReport {
    /// `(removed id, retained id it collided with)`
    pub removed: Vec<(String, String)>,
}

/// 128-bit mix of one shingle window; two independent 64-bit lanes make
/// accidental collisions irrelevant in practice.
fn shingle_key(window: &[u32]) -> u128 {
    let mut a: u64 = 0x243f_6a88_85a3_08d3;
    let mut b: u64 = 0x1319_8a2e_0370_7344;
    for &t in window {
        a = crate::rng::mix(a ^ t as u64, 0x9e37);
        b = crate::rng::mix(b.rotate_left(17) ^ t as u64, 0x85eb);
    }
    ((a as u128) << 64) | b as u128
}

/// Remove every document that shares a `shingle_len`-token run with an
/// earlier retained document.
pub fn deduplicate(
    docs: &[TokenizedArticle],
    shingle_len: usize,
) -> (Vec<TokenizedArticle>, DedupReport) {
    assert!(shingle_len >= 1, "shingle length must be positive");

    // Intern tokens so windows hash over u32 ids.
    let mut intern: HashMap<&str, u32> = HashMap::new();
    let encoded: Vec<Vec<u32>> = docs
        .iter()
        .map(|d| {
            d.tokens
                .iter()
                .map(|t| {
                    let next = intern.len() as u32;
                    *intern.entry(t.as_str()).or_insert(next)
                })
                .collect()
        })
        .collect();

    // Conflict resolution scans in (date, id) order so the earliest
    // attestation of a reprint is the one that survives.
    let mut order: Vec<usize> = (0..docs.len()).collect();
    order.sort_by(|&i, &j| {
        (docs[i].date, docs[i].id.as_str()).cmp(&(docs[j].date, docs[j].id.as_str()))
    });

    let mut seen: HashMap<u128, usize> = HashMap::new();
    let mut keep = vec![false; docs.len()];
    let mut report = DedupReport::default();
    for &i in &order {
        let toks = &encoded[i];
        let conflict = toks
            .windows(shingle_len)
            .find_map(|w| seen.get(&shingle_key(w)).copied());
        match conflict {
            Some(owner) => {
                report
                    .removed
                    .push((docs[i].id.clone(), docs[owner].id.clone()));
            }
            None => {
                keep[i] = true;
                for w in toks.windows(shingle_len) {
                    seen.entry(shingle_key(w)).or_insert(i);
                }
            }
        }
    }

    let retained = docs
        .iter()
        .enumerate()
        .filter(|(i, _)| keep[*i])
        .map(|(_, d)| d.clone())
        .collect();
    (retained, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use std::collections::HashSet;

    fn doc(id: &str, day: u32, tokens: &[&str]) -> TokenizedArticle {
        TokenizedArticle {
            id: id.to_string(),
            source: "s".to_string(),
            date: NaiveDate::from_ymd_opt(1840, 1, day).unwrap(),
            tokens: tokens.iter().map(|t| t.to_string()).collect(),
        }
    }

    fn numbered(id: &str, day: u32, start: usize, len: usize) -> TokenizedArticle {
        let toks: Vec<String> = (start..start + len).map(|i| format!("w{i}")).collect();
        TokenizedArticle {
            id: id.to_string(),
            source: "s".to_string(),
            date: NaiveDate::from_ymd_opt(1840, 1, day).unwrap(),
            tokens: toks,
        }
    }

    /// Independent oracle: exhaustive set intersection over all n-token runs.
    fn shared_shingles(a: &TokenizedArticle, b: &TokenizedArticle, n: usize) -> usize {
        let set: HashSet<&[String]> = a.tokens.windows(n).collect();
        b.tokens.windows(n).filter(|w| set.contains(*w)).count()
    }

    #[test]
    fn identical_articles_keep_one() {
        let a = numbered("a", 1, 0, 20);
        let mut b = numbered("b", 2, 0, 20);
        b.tokens = a.tokens.clone();
        let (kept, report) = deduplicate(&[a, b], 8);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].id, "a");
        assert_eq!(report.removed, vec![("b".to_string(), "a".to_string())]);
    }

    #[test]
    fn eight_token_overlap_removes_later_doc() {
        // Distinct texts except for one 8-token run.
        let mut a = numbered("a", 1, 0, 30);
        let mut b = numbered("b", 2, 100, 30);
        for k in 0..8 {
            b.tokens[10 + k] = a.tokens[5 + k].clone();
        }
        assert!(shared_shingles(&a, &b, 8) > 0);
        let (kept, _) = deduplicate(&[a.clone(), b.clone()], 8);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].id, "a");

        // Earlier timestamp wins regardless of input order.
        b.date = NaiveDate::from_ymd_opt(1839, 12, 1).unwrap();
        a.date = NaiveDate::from_ymd_opt(1840, 1, 5).unwrap();
        let (kept, _) = deduplicate(&[a, b], 8);
        assert_eq!(kept[0].id, "b");
    }

    #[test]
    fn seven_token_overlap_keeps_both() {
        let a = numbered("a", 1, 0, 30);
        let mut b = numbered("b", 2, 100, 30);
        for k in 0..7 {
            b.tokens[10 + k] = a.tokens[5 + k].clone();
        }
        assert_eq!(shared_shingles(&a, &b, 8), 0);
        assert!(shared_shingles(&a, &b, 7) > 0);
        let (kept, _) = deduplicate(&[a, b], 8);
        assert_eq!(kept.len(), 2);
    }

    #[test]
    fn short_documents_never_conflict() {
        let a = doc("a", 1, &["only", "five", "tokens", "right", "here"]);
        let b = doc("b", 2, &["only", "five", "tokens", "right", "here"]);
        let (kept, _) = deduplicate(&[a, b], 8);
        assert_eq!(kept.len(), 2);
    }

    #[test]
    fn id_breaks_timestamp_ties() {
        let a = numbered("z-late-id", 1, 0, 20);
        let mut b = numbered("a-early-id", 1, 0, 20);
        b.tokens = a.tokens.clone();
        let (kept, _) = deduplicate(&[a, b], 8);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].id, "a-early-id");
    }

    #[test]
    fn output_preserves_input_order() {
        let docs = vec![
            numbered("c", 3, 300, 20),
            numbered("a", 1, 100, 20),
            numbered("b", 2, 200, 20),
        ];
        let (kept, _) = deduplicate(&docs, 8);
        let ids: Vec<&str> = kept.iter().map(|d| d.id.as_str()).collect();
        assert_eq!(ids, vec!["c", "a", "b"]);
    }

    #[test]
    fn idempotent() {
        let mut docs = Vec::new();
        for i in 0..12 {
            docs.push(numbered(&format!("d{i}"), i as u32 + 1, i * 9, 25));
        }
        // Inject overlaps.
        let shared: Vec<String> = docs[0].tokens[0..8].to_vec();
        docs[5].tokens[3..11].clone_from_slice(&shared);
        docs[9].tokens[10..18].clone_from_slice(&shared);
        let (once, _) = deduplicate(&docs, 8);
        let (twice, _) = deduplicate(&once, 8);
        assert_eq!(once, twice);
    }
}
