//! Character n-gram language identification baseline.
//!
//! Per-language models count character n-grams (orders 1 through `order`,
//! with start/end padding) over case- and diacritic-folded training text and
//! convert them to add-k-smoothed log probabilities. Mixed-language text is
//! classified token by token using a sliding context window, short runs are
//! smoothed away, and maximal same-language runs come out as segments.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::normalize::fold_text;
use crate::scalar::Scalar;
use crate::SegmentList;

/// Sequence-start padding character used in n-gram keys.
const PAD_START: char = '\u{2}';
/// Sequence-end marker counted as a successor event.
const PAD_END: char = '\u{3}';
/// Model file format version.
const FORMAT_VERSION: u32 = 1;

/// Lowercase language code (ISO 639-1 where one exists).
#[derive(
    Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct LanguageCode(String);

impl LanguageCode {
    pub fn new(code: impl AsRef<str>) -> Self {
        Self(code.as_ref().trim().to_lowercase())
    }

    pub fn latin() -> Self {
        Self("la".to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Accepts the common spellings of the Latin code.
    pub fn is_latin(&self) -> bool {
        matches!(self.0.as_str(), "la" | "lat" | "latin")
    }
}

impl std::fmt::Display for LanguageCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum LidError {
    #[error("training data is empty after folding")]
    EmptyTrainingData,
    #[error("n-gram order must be at least 1")]
    InvalidOrder,
    #[error("smoothing constant must be non-negative and finite")]
    InvalidSmoothing,
    #[error("cannot score empty text")]
    EmptyText,
    #[error("at least two language models are required")]
    TooFewModels,
    #[error("window must be at least 1")]
    InvalidWindow,
    #[error("no model with a Latin language code is configured")]
    NoLatinModel,
    #[error("all models scored -inf; smoothing disabled and text fully unseen")]
    AllModelsRejected,
    #[error("cannot access model file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed model file {path}: {source}")]
    Malformed {
        path: String,
        source: serde_json::Error,
    },
    #[error("unsupported model format version {found} (expected {FORMAT_VERSION})")]
    UnsupportedVersion { found: u32 },
}

/// A trained per-language character n-gram model.
///
/// `log_probs` maps each seen padded n-gram (length 1..=order) to the
/// add-k-smoothed log probability of its last character given the prefix;
/// `unseen_log_probs` carries the per-history unseen-successor mass. The
/// smoothing event space is `vocab_size + 2` (seen characters, the end
/// marker, and one unseen bucket), so per-history probabilities sum to at
/// most one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageModel<F = f64> {
    format_version: u32,
    language: LanguageCode,
    order: usize,
    smoothing_k: F,
    vocab_size: usize,
    log_probs: BTreeMap<String, F>,
    unseen_log_probs: BTreeMap<String, F>,
}

impl<F: Scalar> LanguageModel<F> {
    /// Trains with the default smoothing constant `k = 0.5`.
    pub fn train(
        texts: &[impl AsRef<str>],
        language: LanguageCode,
        order: usize,
    ) -> Result<Self, LidError> {
        Self::train_with(texts, language, order, F::constant(0.5))
    }

    /// Trains a model of the given order with add-k smoothing.
    pub fn train_with(
        texts: &[impl AsRef<str>],
        language: LanguageCode,
        order: usize,
        smoothing_k: F,
    ) -> Result<Self, LidError> {
        if order < 1 {
            return Err(LidError::InvalidOrder);
        }
        if !(smoothing_k >= F::zero()) || !smoothing_k.is_finite() {
            return Err(LidError::InvalidSmoothing);
        }
        let folded: Vec<Vec<char>> = texts
            .iter()
            .map(|t| fold_text(t.as_ref()).chars().collect::<Vec<char>>())
            .filter(|chars| !chars.is_empty())
            .collect();
        if folded.is_empty() {
            return Err(LidError::EmptyTrainingData);
        }

        let mut vocab: std::collections::BTreeSet<char> = std::collections::BTreeSet::new();
        for text in &folded {
            vocab.extend(text.iter().copied());
        }
        let vocab_size = vocab.len();

        // counts per n-gram length, over padded sequences
        let mut counts: HashMap<String, u64> = HashMap::new();
        for text in &folded {
            for n in 1..=order {
                let mut padded: Vec<char> = Vec::with_capacity(text.len() + n);
                padded.extend(std::iter::repeat(PAD_START).take(n - 1));
                padded.extend(text.iter().copied());
                padded.push(PAD_END);
                for window in padded.windows(n) {
                    *counts.entry(window.iter().collect()).or_insert(0) += 1;
                }
            }
        }

        // history totals: sum of counts grouped by the n-gram prefix
        let mut history_totals: HashMap<String, u64> = HashMap::new();
        for (ngram, count) in &counts {
            let chars: Vec<char> = ngram.chars().collect();
            let history: String = chars[..chars.len() - 1].iter().collect();
            *history_totals.entry(history).or_insert(0) += count;
        }

        let events = F::from_count(vocab_size + 2);
        let mut log_probs = BTreeMap::new();
        for (ngram, count) in &counts {
            let chars: Vec<char> = ngram.chars().collect();
            let history: String = chars[..chars.len() - 1].iter().collect();
            let total = F::from_count(history_totals[&history] as usize);
            let p = (F::from_count(*count as usize) + smoothing_k) / (total + smoothing_k * events);
            log_probs.insert(ngram.clone(), p.ln());
        }
        let mut unseen_log_probs = BTreeMap::new();
        for (history, total) in &history_totals {
            let p = smoothing_k / (F::from_count(*total as usize) + smoothing_k * events);
            unseen_log_probs.insert(history.clone(), p.ln());
        }

        Ok(Self {
            format_version: FORMAT_VERSION,
            language,
            order,
            smoothing_k,
            vocab_size,
            log_probs,
            unseen_log_probs,
        })
    }

    pub fn language(&self) -> &LanguageCode {
        &self.language
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    /// Probability of one n-gram (the last char given the prefix).
    fn ngram_prob(&self, ngram: &str) -> F {
        if let Some(lp) = self.log_probs.get(ngram) {
            return lp.exp();
        }
        let chars: Vec<char> = ngram.chars().collect();
        let history: String = chars[..chars.len() - 1].iter().collect();
        if let Some(lp) = self.unseen_log_probs.get(&history) {
            return lp.exp();
        }
        // history itself unseen: uniform over the event space
        F::one() / F::from_count(self.vocab_size + 2)
    }

    /// Mean log probability per character under uniform interpolation of
    /// orders `1..=order`.
    pub fn score_text(&self, text: &str) -> Result<F, LidError> {
        let folded: Vec<char> = fold_text(text).chars().collect();
        if folded.iter().all(|c| c.is_whitespace()) {
            return Err(LidError::EmptyText);
        }
        let mut padded: Vec<char> = Vec::with_capacity(folded.len() + self.order - 1);
        padded.extend(std::iter::repeat(PAD_START).take(self.order - 1));
        padded.extend(folded.iter().copied());

        let order_weight = F::one() / F::from_count(self.order);
        let mut total = F::zero();
        for i in (self.order - 1)..padded.len() {
            let mut interpolated = F::zero();
            for n in 1..=self.order {
                let ngram: String = padded[i + 1 - n..=i].iter().collect();
                interpolated = interpolated + order_weight * self.ngram_prob(&ngram);
            }
            total = total + interpolated.ln();
        }
        Ok(total / F::from_count(folded.len()))
    }

    /// Writes the model as versioned JSON.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LidError>
    where
        F: Serialize,
    {
        let path = path.as_ref();
        let io_err = |source| LidError::Io {
            path: path.display().to_string(),
            source,
        };
        let json = serde_json::to_vec(self).expect("model serializes");
        let mut file = std::fs::File::create(path).map_err(io_err)?;
        file.write_all(&json).map_err(io_err)?;
        file.write_all(b"\n").map_err(io_err)?;
        Ok(())
    }

    /// Loads a model saved by [`LanguageModel::save`].
    pub fn load(path: impl AsRef<Path>) -> Result<Self, LidError>
    where
        F: serde::de::DeserializeOwned,
    {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| LidError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let model: Self = serde_json::from_str(&text).map_err(|source| LidError::Malformed {
            path: path.display().to_string(),
            source,
        })?;
        if model.format_version != FORMAT_VERSION {
            return Err(LidError::UnsupportedVersion {
                found: model.format_version,
            });
        }
        Ok(model)
    }
}

/// A maximal same-language run of tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageSegment<F = f64> {
    pub language: LanguageCode,
    /// Half-open token index range into the page's whitespace tokens.
    pub token_range: (usize, usize),
    /// Surface text, sliced from the original string including separators.
    pub text: String,
    /// Mean per-character log-likelihood margin over the runner-up model.
    pub confidence: F,
}

/// Window and run-smoothing parameters for [`detect_segments`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DetectOptions {
    /// Tokens of context on each side when classifying one token.
    pub window: usize,
    /// Runs shorter than this are absorbed into a neighbouring run.
    pub min_run: usize,
}

impl Default for DetectOptions {
    fn default() -> Self {
        Self { window: 3, min_run: 2 }
    }
}

/// Whitespace tokens with byte ranges into the original text.
fn surface_tokens(text: &str) -> Vec<(usize, usize)> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut start: Option<usize> = None;
    for (idx, c) in text.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                tokens.push((s, idx));
            }
        } else if start.is_none() {
            start = Some(idx);
        }
    }
    if let Some(s) = start {
        tokens.push((s, bytes.len()));
    }
    tokens
}

/// Classifies each whitespace token with its ±window context, smooths away
/// runs shorter than `min_run`, and emits maximal same-language segments
/// that jointly cover every token exactly once.
pub fn detect_segments<F: Scalar>(
    models: &[LanguageModel<F>],
    text: &str,
    options: &DetectOptions,
) -> Result<Vec<LanguageSegment<F>>, LidError> {
    if models.len() < 2 {
        return Err(LidError::TooFewModels);
    }
    if options.window < 1 {
        return Err(LidError::InvalidWindow);
    }
    let tokens = surface_tokens(text);
    if tokens.is_empty() {
        return Ok(Vec::new());
    }

    // score matrix: token x model, each token scored with its context window
    let mut scores: Vec<Vec<F>> = Vec::with_capacity(tokens.len());
    for i in 0..tokens.len() {
        let lo = i.saturating_sub(options.window);
        let hi = (i + options.window).min(tokens.len() - 1);
        let window_text = &text[tokens[lo].0..tokens[hi].1];
        let mut row = Vec::with_capacity(models.len());
        for model in models {
            let score = match model.score_text(window_text) {
                Ok(s) => s,
                // a window of bare combining marks folds to nothing; score
                // it as a fully unseen event instead of failing the page
                Err(LidError::EmptyText) => {
                    (F::one() / F::from_count(model.vocab_size + 2)).ln()
                }
                Err(e) => return Err(e),
            };
            row.push(score);
        }
        if row.iter().all(|s| *s == F::neg_infinity()) {
            return Err(LidError::AllModelsRejected);
        }
        scores.push(row);
    }

    let argmax = |row: &[F]| -> usize {
        let mut best = 0;
        for (i, s) in row.iter().enumerate() {
            if *s > row[best] {
                best = i;
            }
        }
        best
    };
    let mut labels: Vec<usize> = scores.iter().map(|row| argmax(row)).collect();

    // run-length smoothing: absorb short runs into the neighbour whose
    // language scores higher over the run's tokens
    loop {
        let runs = run_lengths(&labels);
        if runs.len() <= 1 {
            break;
        }
        let Some(short_idx) = runs
            .iter()
            .position(|&(_, start, end)| end - start < options.min_run)
        else {
            break;
        };
        let (_, start, end) = runs[short_idx];
        let left = short_idx.checked_sub(1).map(|i| runs[i].0);
        let right = runs.get(short_idx + 1).map(|r| r.0);
        let run_mean = |lang: usize| {
            let mut sum = F::zero();
            for row in &scores[start..end] {
                sum = sum + row[lang];
            }
            sum / F::from_count(end - start)
        };
        let target = match (left, right) {
            (Some(l), Some(r)) => {
                if run_mean(l) >= run_mean(r) {
                    l
                } else {
                    r
                }
            }
            (Some(l), None) => l,
            (None, Some(r)) => r,
            (None, None) => unreachable!("single run handled above"),
        };
        for label in &mut labels[start..end] {
            *label = target;
        }
    }

    let mut segments = Vec::new();
    for (lang_idx, start, end) in run_lengths(&labels) {
        let slice = &text[tokens[start].0..tokens[end - 1].1];
        // margin of the winning model over the best runner-up on the
        // segment's own text; scores are already per-character means
        let seg_score = |model: &LanguageModel<F>| match model.score_text(slice) {
            Ok(s) => s,
            Err(_) => (F::one() / F::from_count(model.vocab_size + 2)).ln(),
        };
        let own = seg_score(&models[lang_idx]);
        let runner_up = models
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != lang_idx)
            .map(|(_, m)| seg_score(m))
            .fold(F::neg_infinity(), F::max);
        segments.push(LanguageSegment {
            language: models[lang_idx].language().clone(),
            token_range: (start, end),
            text: slice.to_string(),
            confidence: own - runner_up,
        });
    }
    Ok(segments)
}

/// `(label, start, end)` runs of equal labels, half-open over indices.
fn run_lengths(labels: &[usize]) -> Vec<(usize, usize, usize)> {
    let mut runs = Vec::new();
    let mut start = 0;
    for i in 1..=labels.len() {
        if i == labels.len() || labels[i] != labels[start] {
            runs.push((labels[start], start, i));
            start = i;
        }
    }
    runs
}

/// Runs [`detect_segments`] with default options and returns the surface
/// text of Latin-labelled segments in document order.
pub fn extract_latin<F: Scalar>(
    models: &[LanguageModel<F>],
    text: &str,
) -> Result<SegmentList, LidError> {
    extract_latin_with(models, text, &DetectOptions::default())
}

/// [`extract_latin`] with explicit window / run-smoothing options.
pub fn extract_latin_with<F: Scalar>(
    models: &[LanguageModel<F>],
    text: &str,
    options: &DetectOptions,
) -> Result<SegmentList, LidError> {
    if !models.iter().any(|m| m.language().is_latin()) {
        return Err(LidError::NoLatinModel);
    }
    let segments = detect_segments(models, text, options)?;
    Ok(segments
        .into_iter()
        .filter(|s| s.language.is_latin())
        .map(|s| s.text)
        .collect())
}
