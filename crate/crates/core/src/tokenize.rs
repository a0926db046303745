//! Code tokenizer for token-based selection.
//!
//! Splits on every character that is not alphanumeric or `_`, lowercases,
//! and drops the reserved words of the language. Identifiers stay whole.

use std::collections::{BTreeSet, HashSet};
use std::sync::OnceLock;

use crate::corpus::Language;

const PYTHON_KEYWORDS: &str = include_str!("../data/keywords/python.txt");
const JAVA_KEYWORDS: &str = include_str!("../data/keywords/java.txt");

fn parse_keywords(text: &'static str) -> HashSet<&'static str> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
}

/// Lowercase reserved words of `language`, including `true`, `false`,
/// `none` and `null`.
pub fn keywords(language: Language) -> &'static HashSet<&'static str> {
    static PY: OnceLock<HashSet<&'static str>> = OnceLock::new();
    static JAVA: OnceLock<HashSet<&'static str>> = OnceLock::new();
    match language {
        Language::Python => PY.get_or_init(|| parse_keywords(PYTHON_KEYWORDS)),
        Language::Java => JAVA.get_or_init(|| parse_keywords(JAVA_KEYWORDS)),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Tokenizer {
    language: Language,
    keywords: &'static HashSet<&'static str>,
}

impl Tokenizer {
    pub fn for_language(language: Language) -> Self {
        Tokenizer {
            language,
            keywords: keywords(language),
        }
    }

    pub fn language(&self) -> Language {
        self.language
    }

    pub fn is_keyword(&self, lowercase_word: &str) -> bool {
        self.keywords.contains(lowercase_word)
    }

    /// Tokens in source order, duplicates kept.
    pub fn tokens(&self, code: &str) -> Vec<String> {
        code.split(|c: char| !(c.is_alphanumeric() || c == '_'))
            .filter(|t| !t.is_empty())
            .map(str::to_lowercase)
            .filter(|t| !self.is_keyword(t))
            .collect()
    }

    pub fn token_set(&self, code: &str) -> BTreeSet<String> {
        self.tokens(code).into_iter().collect()
    }
}
