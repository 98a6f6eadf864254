//! Detection and evaluation of Latin segments in mixed-language historical
//! pages.
//!
//! The crate covers four concerns:
//!
//! - [`corpus`]: the annotated page data model, line-delimited ingestion,
//!   corpus statistics, and mapping of image-space annotation boxes to text
//!   offsets ([`geometry`]);
//! - [`normalize`]: the deterministic evaluation-time text pipeline (NFKD,
//!   ligature folding, lowercasing, digit removal, de-hyphenation,
//!   punctuation stripping) and whitespace tokenization;
//! - [`fuzzy`] / [`eval`]: greedy one-to-one fuzzy token matching under an
//!   edit-distance ratio threshold θ, with page-level, token-level,
//!   negative-page, per-category, and θ-sweep metrics;
//! - [`lid`]: a character n-gram language identifier that detects and
//!   extracts Latin segments from mixed text as a statistical baseline.
//!
//! The numeric kernels are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below pin the `f64` instantiations the rest of the toolkit uses.

pub mod corpus;
pub mod eval;
pub mod fuzzy;
pub mod geometry;
pub mod lid;
pub mod normalize;
pub mod scalar;

pub use scalar::Scalar;

/// Scalar type used by the concrete aliases and the CLI.
pub type Real = f64;

/// An ordered list of extracted segment strings (prediction or reference).
pub type SegmentList = Vec<String>;

pub use corpus::{
    corpus_stats, load_corpus, save_corpus, Category, Corpus, CorpusError, CorpusStats,
    GtSegment, Page,
};
pub use eval::{
    categorized_metrics, category_recall, default_theta_grid, evaluate_corpus, metrics_from_counts,
    page_label, theta_sweep, token_metrics, EvalError, EvalOptions, TokenAggregation,
};
pub use fuzzy::{is_fuzzy_match, levenshtein, match_tokens, MatchOutcome};
pub use lid::{detect_segments, extract_latin, extract_latin_with, DetectOptions, LanguageCode, LidError};
pub use normalize::{fold_text, normalize_text, preprocess, tokenize, NormalizeError, Normalizer, TokenList};

/// `f64` match configuration.
pub type MatchConfig = fuzzy::MatchConfig<Real>;
/// `f64` token metrics.
pub type TokenMetrics = eval::TokenMetrics<Real>;
/// `f64` page-detection metrics.
pub type PageMetrics = eval::PageMetrics<Real>;
/// `f64` negative-page report.
pub type NegativeReport = eval::NegativeReport<Real>;
/// `f64` evaluation report.
pub type MetricsReport = eval::MetricsReport<Real>;
/// `f64` categorized-task report.
pub type CategorizedReport = eval::CategorizedReport<Real>;
/// `f64` sweep row.
pub type SweepPoint = eval::SweepPoint<Real>;
/// `f64` pixel box.
pub type BBox = geometry::BBox<Real>;
/// `f64` positioned word.
pub type PositionedWord = geometry::PositionedWord<Real>;
/// `f64` language model.
pub type LanguageModel = lid::LanguageModel<Real>;
/// `f64` language segment.
pub type LanguageSegment = lid::LanguageSegment<Real>;
