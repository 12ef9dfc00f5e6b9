//! Text normalization.
//!
//! The rule is deliberately small: lowercase everything, then emit maximal
//! runs of letters/digits, keeping apostrophes and hyphens only when they sit
//! between two alphanumeric characters. Historical compounds ("anti-slavery",
//! "slave's") survive; all other punctuation is discarded.

use std::collections::HashMap;

/// Lowercase and tokenize raw article text.
pub fn normalize(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let chars: Vec<char> = lower.chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            current.push(c);
        } else if (c == '\'' || c == '-')
            && !current.is_empty()
            && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric())
        {
            current.push(c);
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Apply a user-supplied token substitution table in place.
///
/// Entries map a surface token to its replacement (for example a corrected
/// segmentation of a known digitization error). Tokens without an entry are
/// left untouched.
pub fn apply_substitutions(tokens: &mut Vec<String>, table: &HashMap<String, String>) {
    if table.is_empty() {
        return;
    }
    let mut out = Vec::with_capacity(tokens.len());
    for tok in tokens.drain(..) {
        match table.get(&tok) {
            Some(replacement) => out.extend(replacement.split_whitespace().map(String::from)),
            None => out.push(tok),
        }
    }
    *tokens = out;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lowercases_and_keeps_internal_apostrophe() {
        assert_eq!(normalize("The SLAVE'S Friend."), vec!["the", "slave's", "friend"]);
    }

    #[test]
    fn keeps_internal_hyphen() {
        assert_eq!(normalize("Anti-Slavery Standard"), vec!["anti-slavery", "standard"]);
    }

    #[test]
    fn digits_form_tokens() {
        assert_eq!(normalize("1851 convention"), vec!["1851", "convention"]);
    }

    #[test]
    fn empty_text_is_empty() {
        assert!(normalize("").is_empty());
        assert!(normalize("  ... !!").is_empty());
    }

    #[test]
    fn edge_punctuation_is_dropped() {
        assert_eq!(normalize("'tis well--known, anti- slavery"), vec!["tis", "well", "known", "anti", "slavery"]);
    }

    #[test]
    fn substitution_can_split_tokens() {
        let mut toks = vec!["endowedwith".to_string(), "hope".to_string()];
        let table: HashMap<String, String> =
            [("endowedwith".to_string(), "endowed with".to_string())].into();
        apply_substitutions(&mut toks, &table);
        assert_eq!(toks, vec!["endowed", "with", "hope"]);
    }
}
