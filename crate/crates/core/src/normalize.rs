//! Evaluation-time text normalization and tokenization.
//!
//! Both predicted and reference strings pass through the same deterministic
//! pipeline before token matching:
//!
//! 1. Unicode compatibility decomposition (NFKD), dropping combining marks;
//! 2. ligature replacement (`æ` → `ae`, `ﬀ` → `ff`, `&` → `et`, ...);
//! 3. lowercasing (re-folded afterwards, since lowercasing can reintroduce
//!    combining marks, e.g. `İ`);
//! 4. removal of numeric characters;
//! 5. de-hyphenation: fragments split by `-` plus optional whitespace or a
//!    line break are merged back into one token;
//! 6. typographic (non-ASCII) punctuation mapped to a space, then the ASCII
//!    punctuation set stripped outright.
//!
//! Tokenization afterwards is a plain split on Unicode whitespace. All
//! functions are pure; the table-driven steps can be re-configured from a
//! JSON file (see [`NormalizeConfig`]).

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

/// Default ligature / symbol replacements, applied after NFKD.
///
/// NFKD already decomposes the f-ligatures and long s; they are kept here so
/// the table is complete on its own.
pub const DEFAULT_LIGATURES: &[(&str, &str)] = &[
    ("ﬀ", "ff"),
    ("ﬁ", "fi"),
    ("ﬂ", "fl"),
    ("ﬃ", "ffi"),
    ("ﬄ", "ffl"),
    ("æ", "ae"),
    ("Æ", "ae"),
    ("œ", "oe"),
    ("Œ", "oe"),
    ("ſ", "s"),
    ("&", "et"),
];

/// Typographic punctuation mapped to a space ahead of ASCII punctuation
/// stripping, so dashes and quotes common in 18th-century print do not glue
/// neighbouring words together.
pub const DEFAULT_PUNCT_TO_SPACE: &[char] = &[
    '‐', '‑', '‒', '–', '—', '―', '‘', '’', '‚', '‛', '“', '”', '„', '‟', '«', '»', '‹', '›',
    '…', '·', '•', '¡', '¿', '§', '¶', '†', '‡', '°', '′', '″', '⁄',
];

/// ASCII punctuation stripped in the final step.
pub const ASCII_PUNCTUATION: &str = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";

/// Errors from loading a normalizer configuration file.
#[derive(Debug, Error)]
pub enum NormalizeError {
    #[error("failed to read normalizer config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed normalizer config {path}: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
}

/// On-disk override format for the replacement tables.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct NormalizeConfig {
    /// Term → replacement pairs applied after NFKD (ligatures, `&` → `et`).
    #[serde(default)]
    pub ligatures: Vec<(String, String)>,
    /// Characters mapped to a space before ASCII punctuation stripping.
    #[serde(default)]
    pub punct_to_space: Vec<char>,
}

/// Ordered list of non-empty tokens produced by [`preprocess`].
///
/// Tokens never contain whitespace, ASCII punctuation, or decimal digits,
/// and every cased letter is lowercase.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenList(Vec<String>);

impl TokenList {
    pub fn as_slice(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, String> {
        self.0.iter()
    }

    pub fn into_vec(self) -> Vec<String> {
        self.0
    }
}

impl std::ops::Deref for TokenList {
    type Target = [String];

    fn deref(&self) -> &[String] {
        &self.0
    }
}

impl<'a> IntoIterator for &'a TokenList {
    type Item = &'a String;
    type IntoIter = std::slice::Iter<'a, String>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// The table-driven normalization pipeline.
#[derive(Debug, Clone)]
pub struct Normalizer {
    ligatures: Vec<(String, String)>,
    punct_to_space: BTreeSet<char>,
}

impl Default for Normalizer {
    fn default() -> Self {
        Self {
            ligatures: DEFAULT_LIGATURES
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
            punct_to_space: DEFAULT_PUNCT_TO_SPACE.iter().copied().collect(),
        }
    }
}

fn dehyphen_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    // A letter, an (ASCII or Unicode) hyphen, optional whitespace, a letter.
    RE.get_or_init(|| Regex::new(r"(\p{L})[-‐‑]\s*(\p{L})").expect("valid regex"))
}

impl Normalizer {
    pub fn new(config: NormalizeConfig) -> Self {
        let defaults = Self::default();
        Self {
            ligatures: if config.ligatures.is_empty() {
                defaults.ligatures
            } else {
                config.ligatures
            },
            punct_to_space: if config.punct_to_space.is_empty() {
                defaults.punct_to_space
            } else {
                config.punct_to_space.into_iter().collect()
            },
        }
    }

    /// Loads replacement-table overrides from a JSON file.
    pub fn from_config_file(path: impl AsRef<Path>) -> Result<Self, NormalizeError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| NormalizeError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let config: NormalizeConfig =
            serde_json::from_str(&text).map_err(|source| NormalizeError::Parse {
                path: path.display().to_string(),
                source,
            })?;
        Ok(Self::new(config))
    }

    /// Full normalization pipeline; total and idempotent.
    pub fn normalize_text(&self, raw: &str) -> String {
        // (1) NFKD, dropping combining marks.
        let mut text = fold_marks(raw);

        // (2) ligature / symbol table.
        for (from, to) in &self.ligatures {
            if text.contains(from.as_str()) {
                text = text.replace(from.as_str(), to);
            }
        }

        // (3) lowercase, then re-fold: lowercasing may reintroduce combining
        // marks (e.g. 'İ' → "i\u{307}").
        text = fold_marks(&text.to_lowercase());

        // (4) numeric characters out.
        if text.chars().any(char::is_numeric) {
            text.retain(|c| !c.is_numeric());
        }

        // (5) de-hyphenation, to fixpoint so chained fragments all merge.
        let re = dehyphen_regex();
        loop {
            let joined = re.replace_all(&text, "${1}${2}");
            if joined == text {
                break;
            }
            text = joined.into_owned();
        }

        // (6) typographic punctuation to space, ASCII punctuation removed.
        let mut out = String::with_capacity(text.len());
        for c in text.chars() {
            if self.punct_to_space.contains(&c) {
                out.push(' ');
            } else if !(c.is_ascii_punctuation()) {
                out.push(c);
            }
        }
        out
    }

    /// Splits normalized text on Unicode whitespace runs.
    pub fn tokenize(&self, normalized: &str) -> TokenList {
        TokenList(normalized.split_whitespace().map(str::to_string).collect())
    }

    /// `tokenize(normalize_text(raw))`.
    pub fn preprocess(&self, raw: &str) -> TokenList {
        self.tokenize(&self.normalize_text(raw))
    }
}

fn default_normalizer() -> &'static Normalizer {
    static DEFAULT: OnceLock<Normalizer> = OnceLock::new();
    DEFAULT.get_or_init(Normalizer::default)
}

/// NFKD followed by combining-mark removal. Shared with the language
/// identifier, which folds case and diacritics but keeps punctuation.
pub(crate) fn fold_marks(text: &str) -> String {
    text.nfkd().filter(|c| !is_combining_mark(*c)).collect()
}

/// Case and diacritic folding (no punctuation or digit handling).
pub fn fold_text(text: &str) -> String {
    fold_marks(&fold_marks(text).to_lowercase())
}

/// [`Normalizer::normalize_text`] with the default tables.
pub fn normalize_text(raw: &str) -> String {
    default_normalizer().normalize_text(raw)
}

/// [`Normalizer::tokenize`] with the default tables.
pub fn tokenize(normalized: &str) -> TokenList {
    default_normalizer().tokenize(normalized)
}

/// [`Normalizer::preprocess`] with the default tables.
pub fn preprocess(raw: &str) -> TokenList {
    default_normalizer().preprocess(raw)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(raw: &str) -> Vec<String> {
        preprocess(raw).into_vec()
    }

    #[test]
    fn nfkd_separates_accents_from_base() {
        assert_eq!(normalize_text("virtúte"), "virtute");
        assert_eq!(normalize_text("Cæsär"), "caesar");
    }

    #[test]
    fn ligatures_replaced() {
        assert_eq!(normalize_text("æterna"), "aeterna");
        assert_eq!(normalize_text("Æneis"), "aeneis");
        assert_eq!(normalize_text("cœlum"), "coelum");
        assert_eq!(normalize_text("Œdipus"), "oedipus");
        assert_eq!(normalize_text("oﬀicium"), "officium");
        assert_eq!(normalize_text("ﬁdes"), "fides");
        assert_eq!(normalize_text("ﬂumen"), "flumen");
        assert_eq!(normalize_text("ſapientia"), "sapientia");
    }

    #[test]
    fn ampersand_becomes_et() {
        assert_eq!(toks("Virtus & Honor, 1750."), vec!["virtus", "et", "honor"]);
    }

    #[test]
    fn lowercasing_applied() {
        assert_eq!(normalize_text("DOMINUS"), "dominus");
    }

    #[test]
    fn digit_runs_removed() {
        assert_eq!(toks("Dominus 1234"), vec!["dominus"]);
        assert_eq!(normalize_text("p. 42"), "p ");
    }

    #[test]
    fn dehyphenation_merges_linebreak_fragments() {
        assert_eq!(normalize_text("glo-\nria"), "gloria");
        assert_eq!(normalize_text("glo- ria"), "gloria");
        assert_eq!(normalize_text("vita-brevis"), "vitabrevis");
        // chained fragments across lines
        assert_eq!(normalize_text("tem-\npo-\nris"), "temporis");
    }

    #[test]
    fn ascii_punctuation_stripped() {
        assert_eq!(toks("Et tu, Brute?"), vec!["et", "tu", "brute"]);
        let everything: String = ASCII_PUNCTUATION.chars().filter(|c| *c != '&').collect();
        assert_eq!(normalize_text(&everything), "");
    }

    #[test]
    fn typographic_punct_splits_tokens() {
        assert_eq!(toks("Ars—longa; vita."), vec!["ars", "longa", "vita"]);
        assert_eq!(toks("«pax» “et” ‘bellum’"), vec!["pax", "et", "bellum"]);
    }

    #[test]
    fn empty_input_is_empty() {
        assert_eq!(normalize_text(""), "");
        assert!(toks("   ").is_empty());
    }

    #[test]
    fn tokenize_splits_on_whitespace_runs() {
        assert_eq!(
            tokenize("ars  longa\tvita\nbrevis").into_vec(),
            vec!["ars", "longa", "vita", "brevis"]
        );
        assert!(tokenize("   ").is_empty());
    }

    #[test]
    fn idempotent_on_tricky_cases() {
        for raw in [
            "İstanbul",
            "glo-\nria",
            "Virtus & Honor, 1750.",
            "Æterna ﬁdes ſemper",
            "a-b- c",
            "ΣΟΦΙΑ",
        ] {
            let once = normalize_text(raw);
            assert_eq!(normalize_text(&once), once, "input {raw:?}");
        }
    }

    #[test]
    fn preprocess_idempotent_through_join() {
        for raw in ["Et tu, Brute?", "glo-\nria 12", "«Ô tempora»"] {
            let first = toks(raw);
            let rejoined = first.join(" ");
            assert_eq!(toks(&rejoined), first);
        }
    }

    #[test]
    fn config_overrides_replace_defaults() {
        let normalizer = Normalizer::new(NormalizeConfig {
            ligatures: vec![("æ".into(), "A".into())],
            punct_to_space: vec![],
        });
        // custom table wins; lowercasing still applies afterwards
        assert_eq!(normalizer.normalize_text("æter"), "ater");
    }

    #[test]
    fn config_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("norm.json");
        std::fs::write(&path, r#"{"ligatures": [["æ", "ae"]], "punct_to_space": ["—"]}"#)
            .unwrap();
        let normalizer = Normalizer::from_config_file(&path).unwrap();
        assert_eq!(normalizer.normalize_text("æ—b"), "ae b");
        assert!(Normalizer::from_config_file(dir.path().join("missing.json")).is_err());
    }
}
