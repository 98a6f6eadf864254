//! Token- and page-level evaluation over a corpus.
//!
//! Per page, the reference pool is the concatenation of ground-truth
//! segments in corpus order and the prediction pool is the concatenation of
//! predicted segments in output order; both run through [`preprocess`]
//! before greedy fuzzy matching. Token metrics aggregate as an unweighted
//! mean over pages by default (micro pooling and positive-only restriction
//! are available), page-level detection is scored as binary classification
//! with "has Latin" as the positive class, and gt-negative pages get their
//! own recall / false-positive-token analysis.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Category, Corpus, Page};
use crate::fuzzy::{match_tokens, MatchConfig, MatchOutcome};
use crate::normalize::preprocess;
use crate::scalar::{mean, Scalar};
use crate::SegmentList;

/// Precision / recall / F1 with the confusion counts they came from.
///
/// Zero-denominator convention: a metric whose denominator is zero is `1`
/// when `tp = fp = fn = 0` (nothing to find, nothing claimed) and `0`
/// otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TokenMetrics<F = f64> {
    pub precision: F,
    pub recall: F,
    pub f1: F,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

/// Page-level binary detection metrics; positive class = page has Latin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PageMetrics<F = f64> {
    pub precision: F,
    pub recall: F,
    pub f1: F,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

/// Behaviour on gt-negative pages, both expressed in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegativeReport<F = f64> {
    /// Share of gt-negative pages also predicted negative.
    pub negative_recall: F,
    /// Mean over gt-negative pages of predicted tokens over page tokens,
    /// clamped to 100 per page.
    pub fp_token_rate: F,
    /// Number of evaluated gt-negative pages.
    pub negative_pages: usize,
}

/// Aggregated token metrics (no counts: macro means are not count-backed).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TokenAggregate<F = f64> {
    pub precision: F,
    pub recall: F,
    pub f1: F,
}

/// How per-page token metrics combine into the corpus-level number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenAggregation {
    /// Unweighted mean over all evaluated pages (the default reading of
    /// "averaged across the full evaluation set").
    #[default]
    MacroAll,
    /// Unweighted mean over gt-positive pages only.
    MacroPositive,
    /// Pooled counts over all evaluated pages.
    Micro,
}

/// Evaluation switches beyond the match threshold.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct EvalOptions {
    pub aggregation: TokenAggregation,
    /// Use `corrected_text` (when present) for page token counts.
    pub use_corrected: bool,
}

impl EvalOptions {
    pub fn new() -> Self {
        Self {
            aggregation: TokenAggregation::MacroAll,
            use_corrected: true,
        }
    }
}

/// Per-page evaluation row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageRow<F = f64> {
    pub page_id: String,
    pub gt_has_latin: bool,
    pub pred_has_latin: bool,
    pub metrics: TokenMetrics<F>,
}

/// Full evaluation output: aggregate block plus per-page rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport<F = f64> {
    pub theta: F,
    pub aggregation: TokenAggregation,
    pub page: PageMetrics<F>,
    pub token: TokenAggregate<F>,
    pub negative: NegativeReport<F>,
    /// Mean per-page token recall for pages containing each category;
    /// categories with no evaluated pages are absent.
    pub category_recall: BTreeMap<Category, F>,
    /// Pages in the corpus but absent from the predictions (scored as empty).
    pub missing_predictions: Vec<String>,
    pub pages: Vec<PageRow<F>>,
}

/// Per-category metrics for the joint extraction + categorization task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryMetrics<F = f64> {
    pub precision: F,
    pub recall: F,
    pub f1: F,
    /// Pages where either the gt or the predicted pool for this category
    /// was non-empty.
    pub pages: usize,
}

/// Output of [`categorized_metrics`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategorizedReport<F = f64> {
    /// Categories with at least one evaluable page.
    pub per_category: BTreeMap<Category, CategoryMetrics<F>>,
    /// Unweighted mean over the fixed 12-category output; categories with
    /// no data contribute 0.
    pub macro_f1: F,
    /// Unweighted mean over represented categories only.
    pub macro_f1_represented: F,
}

/// One θ-sweep row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint<F = f64> {
    pub theta: F,
    pub f1: F,
    pub precision: F,
    pub recall: F,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("predictions reference unknown page ids: {}", offenders.join(", "))]
    UnknownPageIds { offenders: Vec<String> },
    #[error("invalid match config: {reason}")]
    InvalidConfig { reason: String },
    #[error("invalid theta grid: {reason}")]
    InvalidGrid { reason: String },
    #[error(
        "per-page TP decreased between theta {theta_low} and {theta_high} on page {page_id}"
    )]
    ThetaMonotonicity {
        page_id: String,
        theta_low: f64,
        theta_high: f64,
    },
}

fn ratio<F: Scalar>(numerator: usize, denominator: usize, all_zero: bool) -> F {
    if denominator == 0 {
        if all_zero {
            F::one()
        } else {
            F::zero()
        }
    } else {
        F::from_count(numerator) / F::from_count(denominator)
    }
}

/// Precision / recall / F1 from raw counts, with the zero-denominator
/// convention.
pub fn metrics_from_counts<F: Scalar>(tp: usize, gt_count: usize, pred_count: usize) -> TokenMetrics<F> {
    debug_assert!(tp <= gt_count && tp <= pred_count);
    let fp = pred_count - tp;
    let fn_ = gt_count - tp;
    let all_zero = tp == 0 && fp == 0 && fn_ == 0;
    let precision = ratio(tp, tp + fp, all_zero);
    let recall = ratio(tp, tp + fn_, all_zero);
    let f1 = if precision + recall > F::zero() {
        F::constant(2.0) * precision * recall / (precision + recall)
    } else if all_zero {
        F::one()
    } else {
        F::zero()
    };
    TokenMetrics {
        precision,
        recall,
        f1,
        tp,
        fp,
        fn_,
    }
}

/// Token metrics for one matching outcome.
pub fn token_metrics<F: Scalar>(outcome: &MatchOutcome) -> TokenMetrics<F> {
    metrics_from_counts(outcome.tp, outcome.gt_count, outcome.pred_count)
}

/// Task-1 label implied by a prediction: positive iff any token survives
/// preprocessing.
pub fn page_label(pred_segments: &[String]) -> bool {
    !preprocess(&pred_segments.join(" ")).is_empty()
}

fn gt_tokens(page: &Page) -> Vec<String> {
    let joined = page
        .gt_segments
        .iter()
        .map(|s| s.text.as_str())
        .collect::<Vec<_>>()
        .join(" ");
    preprocess(&joined).into_vec()
}

fn pred_tokens(segments: &[String]) -> Vec<String> {
    preprocess(&segments.join(" ")).into_vec()
}

fn check_known_pages(
    corpus: &Corpus,
    prediction_ids: impl Iterator<Item = impl AsRef<str>>,
) -> Result<(), EvalError> {
    let known: BTreeSet<&str> = corpus.pages.iter().map(|p| p.page_id.as_str()).collect();
    let mut offenders: Vec<String> = prediction_ids
        .filter(|id| !known.contains(id.as_ref()))
        .map(|id| id.as_ref().to_string())
        .collect();
    if offenders.is_empty() {
        Ok(())
    } else {
        offenders.sort();
        offenders.dedup();
        Err(EvalError::UnknownPageIds { offenders })
    }
}

fn empty_segments() -> &'static SegmentList {
    static EMPTY: SegmentList = Vec::new();
    &EMPTY
}

fn aggregate<F: Scalar>(
    rows: &[PageRow<F>],
    corpus_positive: &BTreeSet<&str>,
    aggregation: TokenAggregation,
) -> TokenAggregate<F> {
    let included: Vec<&PageRow<F>> = match aggregation {
        TokenAggregation::MacroAll | TokenAggregation::Micro => rows.iter().collect(),
        TokenAggregation::MacroPositive => rows
            .iter()
            .filter(|r| corpus_positive.contains(r.page_id.as_str()))
            .collect(),
    };
    match aggregation {
        TokenAggregation::Micro => {
            let tp: usize = included.iter().map(|r| r.metrics.tp).sum();
            let fp: usize = included.iter().map(|r| r.metrics.fp).sum();
            let fn_: usize = included.iter().map(|r| r.metrics.fn_).sum();
            let m = metrics_from_counts::<F>(tp, tp + fn_, tp + fp);
            TokenAggregate {
                precision: m.precision,
                recall: m.recall,
                f1: m.f1,
            }
        }
        _ => TokenAggregate {
            precision: mean(included.iter().map(|r| r.metrics.precision))
                .unwrap_or_else(F::one),
            recall: mean(included.iter().map(|r| r.metrics.recall)).unwrap_or_else(F::one),
            f1: mean(included.iter().map(|r| r.metrics.f1)).unwrap_or_else(F::one),
        },
    }
}

/// Evaluates predictions over every non-excluded page.
///
/// Pages missing from `predictions` are scored as empty (with a warning and
/// a `missing_predictions` entry); prediction ids not in the corpus are an
/// error.
pub fn evaluate_corpus<F: Scalar>(
    corpus: &Corpus,
    predictions: &BTreeMap<String, SegmentList>,
    config: &MatchConfig<F>,
    options: &EvalOptions,
) -> Result<MetricsReport<F>, EvalError> {
    config
        .validate()
        .map_err(|reason| EvalError::InvalidConfig { reason })?;
    check_known_pages(corpus, predictions.keys())?;

    let mut rows = Vec::new();
    let mut missing = Vec::new();
    let (mut page_tp, mut page_fp, mut page_tn, mut page_fn) = (0usize, 0usize, 0usize, 0usize);
    let mut negative_pages = 0usize;
    let mut negative_correct = 0usize;
    let mut fp_rate_sum = F::zero();

    for page in corpus.evaluated_pages() {
        let segments = match predictions.get(&page.page_id) {
            Some(segments) => segments,
            None => {
                log::warn!(
                    "no prediction for page {}; treating as empty list",
                    page.page_id
                );
                missing.push(page.page_id.clone());
                empty_segments()
            }
        };
        let gt = gt_tokens(page);
        let pred = pred_tokens(segments);
        let outcome = match_tokens(&gt, &pred, config);
        let metrics = token_metrics::<F>(&outcome);
        let pred_has_latin = !pred.is_empty();

        match (page.gt_has_latin, pred_has_latin) {
            (true, true) => page_tp += 1,
            (false, true) => page_fp += 1,
            (false, false) => page_tn += 1,
            (true, false) => page_fn += 1,
        }
        if !page.gt_has_latin {
            negative_pages += 1;
            if !pred_has_latin {
                negative_correct += 1;
            }
            let page_token_count = preprocess(page.eval_text(options.use_corrected)).len();
            let rate = if page_token_count == 0 {
                if pred.is_empty() {
                    F::zero()
                } else {
                    F::constant(100.0)
                }
            } else {
                (F::constant(100.0) * F::from_count(pred.len())
                    / F::from_count(page_token_count))
                .min(F::constant(100.0))
            };
            fp_rate_sum = fp_rate_sum + rate;
        }

        rows.push(PageRow {
            page_id: page.page_id.clone(),
            gt_has_latin: page.gt_has_latin,
            pred_has_latin,
            metrics,
        });
    }

    let positive_ids: BTreeSet<&str> = corpus
        .evaluated_pages()
        .filter(|p| p.gt_has_latin)
        .map(|p| p.page_id.as_str())
        .collect();
    let token = aggregate(&rows, &positive_ids, options.aggregation);

    let page_counts = metrics_from_counts::<F>(page_tp, page_tp + page_fn, page_tp + page_fp);
    let page = PageMetrics {
        precision: page_counts.precision,
        recall: page_counts.recall,
        f1: page_counts.f1,
        tp: page_tp,
        fp: page_fp,
        tn: page_tn,
        fn_: page_fn,
    };

    let negative = NegativeReport {
        negative_recall: if negative_pages == 0 {
            F::constant(100.0)
        } else {
            F::constant(100.0) * F::from_count(negative_correct) / F::from_count(negative_pages)
        },
        fp_token_rate: if negative_pages == 0 {
            F::zero()
        } else {
            fp_rate_sum / F::from_count(negative_pages)
        },
        negative_pages,
    };

    let category_recall = category_recall_inner(corpus, predictions, config);

    Ok(MetricsReport {
        theta: config.theta,
        aggregation: options.aggregation,
        page,
        token,
        negative,
        category_recall,
        missing_predictions: missing,
        pages: rows,
    })
}

fn category_recall_inner<F: Scalar>(
    corpus: &Corpus,
    predictions: &BTreeMap<String, SegmentList>,
    config: &MatchConfig<F>,
) -> BTreeMap<Category, F> {
    let mut per_category: BTreeMap<Category, Vec<F>> = BTreeMap::new();
    for page in corpus.evaluated_pages() {
        let segments = predictions.get(&page.page_id).unwrap_or(empty_segments());
        let pred = pred_tokens(segments);
        let page_categories: BTreeSet<Category> = page
            .gt_segments
            .iter()
            .flat_map(|s| s.categories.iter().copied())
            .collect();
        for category in page_categories {
            let joined = page
                .gt_segments
                .iter()
                .filter(|s| s.categories.contains(&category))
                .map(|s| s.text.as_str())
                .collect::<Vec<_>>()
                .join(" ");
            let gt = preprocess(&joined).into_vec();
            if gt.is_empty() {
                continue;
            }
            let outcome = match_tokens(&gt, &pred, config);
            per_category
                .entry(category)
                .or_default()
                .push(ratio(outcome.tp, gt.len(), false));
        }
    }
    per_category
        .into_iter()
        .filter_map(|(category, recalls)| mean(recalls).map(|m| (category, m)))
        .collect()
}

/// Token recall per category: for each page containing a category, the
/// tokens of exactly that category's segments are matched against the page's
/// full predicted pool; the category score is the unweighted mean over those
/// pages. Categories with no evaluated pages are omitted.
pub fn category_recall<F: Scalar>(
    corpus: &Corpus,
    predictions: &BTreeMap<String, SegmentList>,
    config: &MatchConfig<F>,
) -> Result<BTreeMap<Category, F>, EvalError> {
    config
        .validate()
        .map_err(|reason| EvalError::InvalidConfig { reason })?;
    check_known_pages(corpus, predictions.keys())?;
    Ok(category_recall_inner(corpus, predictions, config))
}

/// Scores the joint extraction + categorization task: predicted segments
/// under a category key are matched only against gt segments of the same
/// category, per page, averaged over pages where either side is non-empty.
pub fn categorized_metrics<F: Scalar>(
    corpus: &Corpus,
    predictions: &BTreeMap<String, BTreeMap<Category, SegmentList>>,
    config: &MatchConfig<F>,
) -> Result<CategorizedReport<F>, EvalError> {
    config
        .validate()
        .map_err(|reason| EvalError::InvalidConfig { reason })?;
    check_known_pages(corpus, predictions.keys())?;

    let empty_map = BTreeMap::new();
    let mut per_page: BTreeMap<Category, Vec<TokenMetrics<F>>> = BTreeMap::new();
    for page in corpus.evaluated_pages() {
        let page_preds = predictions.get(&page.page_id).unwrap_or(&empty_map);
        for category in Category::ALL {
            let joined = page
                .gt_segments
                .iter()
                .filter(|s| s.categories.contains(&category))
                .map(|s| s.text.as_str())
                .collect::<Vec<_>>()
                .join(" ");
            let gt = preprocess(&joined).into_vec();
            let pred = page_preds
                .get(&category)
                .map(|segments| pred_tokens(segments))
                .unwrap_or_default();
            if gt.is_empty() && pred.is_empty() {
                continue;
            }
            let outcome = match_tokens(&gt, &pred, config);
            per_page
                .entry(category)
                .or_default()
                .push(token_metrics(&outcome));
        }
    }

    let per_category: BTreeMap<Category, CategoryMetrics<F>> = per_page
        .into_iter()
        .map(|(category, metrics)| {
            let pages = metrics.len();
            (
                category,
                CategoryMetrics {
                    precision: mean(metrics.iter().map(|m| m.precision)).unwrap_or_else(F::zero),
                    recall: mean(metrics.iter().map(|m| m.recall)).unwrap_or_else(F::zero),
                    f1: mean(metrics.iter().map(|m| m.f1)).unwrap_or_else(F::zero),
                    pages,
                },
            )
        })
        .collect();

    let f1_sum = per_category
        .values()
        .fold(F::zero(), |acc, m| acc + m.f1);
    let macro_f1 = f1_sum / F::from_count(Category::ALL.len());
    let macro_f1_represented = if per_category.is_empty() {
        F::zero()
    } else {
        f1_sum / F::from_count(per_category.len())
    };

    Ok(CategorizedReport {
        per_category,
        macro_f1,
        macro_f1_represented,
    })
}

/// Default θ grid: 0.0 to 0.5 in steps of 0.05.
pub fn default_theta_grid<F: Scalar>() -> Vec<F> {
    (0..=10).map(|i| F::from_count(i) / F::constant(20.0)).collect()
}

/// Evaluates token metrics at each θ of an ascending grid in `[0, 1]`,
/// asserting that per-page TP never decreases along the way.
pub fn theta_sweep<F: Scalar>(
    corpus: &Corpus,
    predictions: &BTreeMap<String, SegmentList>,
    grid: &[F],
    options: &EvalOptions,
) -> Result<Vec<SweepPoint<F>>, EvalError> {
    if grid.is_empty() {
        return Err(EvalError::InvalidGrid {
            reason: "grid is empty".into(),
        });
    }
    for window in grid.windows(2) {
        if !(window[0] < window[1]) {
            return Err(EvalError::InvalidGrid {
                reason: format!("grid not strictly ascending at {} .. {}", window[0], window[1]),
            });
        }
    }
    if grid[0] < F::zero() || *grid.last().expect("non-empty") > F::one() {
        return Err(EvalError::InvalidGrid {
            reason: "grid values must lie in [0, 1]".into(),
        });
    }
    check_known_pages(corpus, predictions.keys())?;

    let mut points = Vec::with_capacity(grid.len());
    let mut previous: Option<(F, Vec<usize>)> = None;
    for &theta in grid {
        let config = MatchConfig { theta };
        let report = evaluate_corpus(corpus, predictions, &config, options)?;
        let tps: Vec<usize> = report.pages.iter().map(|r| r.metrics.tp).collect();
        if let Some((prev_theta, prev_tps)) = &previous {
            for (row, (prev_tp, tp)) in report.pages.iter().zip(prev_tps.iter().zip(&tps)) {
                if tp < prev_tp {
                    return Err(EvalError::ThetaMonotonicity {
                        page_id: row.page_id.clone(),
                        theta_low: prev_theta.to_f64().unwrap_or(f64::NAN),
                        theta_high: theta.to_f64().unwrap_or(f64::NAN),
                    });
                }
            }
        }
        points.push(SweepPoint {
            theta,
            f1: report.token.f1,
            precision: report.token.precision,
            recall: report.token.recall,
        });
        previous = Some((theta, tps));
    }
    Ok(points)
}
