//! Tokenization and text normalization shared by BM25 retrieval and Token_F1.

/// Lowercased alphanumeric runs; everything else (whitespace, punctuation,
/// symbols) is a separator.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            current.extend(c.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Collapses runs of whitespace to a single space and trims both ends.
/// Case is preserved.
pub fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Whitespace-collapsed, lowercased form used for duplicate detection.
pub fn dedup_key(text: &str) -> String {
    collapse_whitespace(text).to_lowercase()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_on_punctuation_and_lowercases() {
        assert_eq!(
            tokenize("A 46-year-old Woman, (treated)."),
            vec!["a", "46", "year", "old", "woman", "treated"]
        );
        assert!(tokenize("  --  ").is_empty());
    }

    #[test]
    fn keeps_non_ascii_letters() {
        assert_eq!(tokenize("Guillain–Barré"), vec!["guillain", "barré"]);
    }

    #[test]
    fn collapse_preserves_case() {
        assert_eq!(collapse_whitespace("  Severe\t\n Rash "), "Severe Rash");
        assert_eq!(dedup_key("  Severe\t\n Rash "), "severe rash");
    }
}
