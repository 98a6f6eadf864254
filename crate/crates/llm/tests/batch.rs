//! Batch-runner behaviour against scripted backends: ordering, retries,
//! concurrency independence, and file round-trips.

use std::collections::BTreeMap;

use latindet_core::corpus::{Category, Corpus, GtSegment, Page};
use latindet_llm::testing::ScriptedBackend;
use latindet_llm::{
    load_predictions, post_correct, run_batch, run_categorization_batch, segment_map,
    write_predictions, BackendError, BatchOptions, Capabilities, ChatResponse, GenerationParams,
    ParseStatus, ParsedPrediction, PipelineError, PromptMode, PromptVariant, RetryPolicy,
};

fn corpus(n: usize) -> Corpus {
    let pages = (0..n)
        .map(|i| Page {
            page_id: format!("p{i:02}"),
            book_id: "b".to_string(),
            image_ref: None,
            ocr_text: format!("page text marker-{i:02} with latin segmentum {i:02}"),
            corrected_text: None,
            gt_segments: vec![GtSegment::with_categories(
                format!("segmentum {i:02}"),
                [Category::DirectQuote],
            )],
            gt_has_latin: true,
            excluded: false,
        })
        .collect();
    Corpus::new(pages).unwrap()
}

fn keyed_backend(n: usize) -> ScriptedBackend {
    let script = (0..n)
        .map(|i| {
            (
                format!("marker-{i:02}"),
                format!("[\"segmentum {i:02}\"]"),
            )
        })
        .collect();
    ScriptedBackend::keyed(script, "[]")
}

fn fast_retry() -> BatchOptions {
    BatchOptions {
        concurrency: 4,
        retry: RetryPolicy {
            max_attempts: 3,
            initial_backoff_ms: 1,
            backoff_multiplier: 2.0,
        },
    }
}

#[tokio::test]
async fn records_align_with_corpus_order() {
    let corpus = corpus(6);
    let backend = keyed_backend(6);
    let records = run_batch(
        &backend,
        &corpus,
        PromptMode::TextOnly,
        PromptVariant::Minimal,
        GenerationParams::default(),
        &fast_retry(),
    )
    .await
    .unwrap();
    assert_eq!(records.len(), 6);
    for (i, record) in records.iter().enumerate() {
        assert_eq!(record.page_id, format!("p{i:02}"));
        assert_eq!(
            record.parsed.segments().unwrap(),
            &vec![format!("segmentum {i:02}")]
        );
        assert_eq!(record.parse_status, ParseStatus::Ok);
        assert_eq!(record.retries, 0);
    }
}

#[tokio::test]
async fn transient_failure_retried_and_counted() {
    let corpus = corpus(1);
    let backend = keyed_backend(1).failing_first(1);
    let records = run_batch(
        &backend,
        &corpus,
        PromptMode::TextOnly,
        PromptVariant::Minimal,
        GenerationParams::default(),
        &fast_retry(),
    )
    .await
    .unwrap();
    assert_eq!(records[0].parse_status, ParseStatus::Ok);
    assert_eq!(records[0].retries, 1);
    assert_eq!(backend.calls(), 2);
}

#[tokio::test]
async fn exhausted_retries_flagged_but_batch_continues() {
    let corpus = corpus(2);
    // every call fails transiently: 3 attempts for page 0, 3 for page 1
    let backend = keyed_backend(2).failing_first(100);
    let records = run_batch(
        &backend,
        &corpus,
        PromptMode::TextOnly,
        PromptVariant::Minimal,
        GenerationParams::default(),
        &fast_retry(),
    )
    .await
    .unwrap();
    assert_eq!(records.len(), 2);
    for record in &records {
        assert_eq!(record.parse_status, ParseStatus::Failed);
        assert!(record.parsed.segments().unwrap().is_empty());
        assert!(record.error.as_deref().unwrap().contains("transient"));
    }
    assert_eq!(backend.calls(), 6);
}

#[tokio::test]
async fn concurrency_does_not_change_parsed_output() {
    let corpus = corpus(12);
    let params = GenerationParams::default();
    let mut runs = Vec::new();
    for concurrency in [1, 8] {
        let backend = keyed_backend(12);
        let records = run_batch(
            &backend,
            &corpus,
            PromptMode::TextOnly,
            PromptVariant::Minimal,
            params,
            &BatchOptions {
                concurrency,
                retry: RetryPolicy::default(),
            },
        )
        .await
        .unwrap();
        let parsed: Vec<(String, ParsedPrediction, ParseStatus)> = records
            .into_iter()
            .map(|r| (r.page_id, r.parsed, r.parse_status))
            .collect();
        runs.push(parsed);
    }
    assert_eq!(runs[0], runs[1]);
}

#[tokio::test]
async fn vision_mode_requires_vision_capability() {
    let corpus = corpus(1);
    let backend = ScriptedBackend::canned("[]").with_capabilities(Capabilities {
        vision: false,
        reasoning: false,
    });
    let err = run_batch(
        &backend,
        &corpus,
        PromptMode::ImagePlusText,
        PromptVariant::Minimal,
        GenerationParams::default(),
        &fast_retry(),
    )
    .await
    .unwrap_err();
    assert!(matches!(
        err,
        PipelineError::Backend(BackendError::Config(_))
    ));
    assert_eq!(backend.calls(), 0, "aborts before the first request");
}

#[tokio::test]
async fn page_without_image_becomes_failed_record() {
    // backend supports vision, but pages carry no image_ref
    let corpus = corpus(2);
    let backend = keyed_backend(2);
    let records = run_batch(
        &backend,
        &corpus,
        PromptMode::ImageOnly,
        PromptVariant::Minimal,
        GenerationParams::default(),
        &fast_retry(),
    )
    .await
    .unwrap();
    assert!(records
        .iter()
        .all(|r| r.parse_status == ParseStatus::Failed && r.error.is_some()));
    assert_eq!(backend.calls(), 0);
}

#[tokio::test]
async fn excluded_pages_are_not_requested() {
    let mut corpus = corpus(3);
    corpus.pages[1].excluded = true;
    let backend = keyed_backend(3);
    let records = run_batch(
        &backend,
        &corpus,
        PromptMode::TextOnly,
        PromptVariant::Minimal,
        GenerationParams::default(),
        &fast_retry(),
    )
    .await
    .unwrap();
    assert_eq!(records.len(), 2);
    assert_eq!(records[0].page_id, "p00");
    assert_eq!(records[1].page_id, "p02");
}

#[tokio::test]
async fn categorization_batch_parses_category_maps() {
    let corpus = corpus(1);
    let reply = r#"{"Direct Quote": ["segmentum 00"], "Legal": []}"#;
    let backend = ScriptedBackend::canned(reply);
    let records = run_categorization_batch(
        &backend,
        &corpus,
        PromptMode::TextOnly,
        GenerationParams::default(),
        &fast_retry(),
    )
    .await
    .unwrap();
    let map = records[0].parsed.categories().unwrap();
    assert_eq!(map.len(), 12);
    assert_eq!(map[&Category::DirectQuote], vec!["segmentum 00"]);
    assert_eq!(records[0].parse_status, ParseStatus::Recovered);
}

#[tokio::test]
async fn invalid_params_abort_before_requests() {
    let corpus = corpus(1);
    let backend = keyed_backend(1);
    let mut params = GenerationParams::default();
    params.max_output_tokens = 0;
    assert!(run_batch(
        &backend,
        &corpus,
        PromptMode::TextOnly,
        PromptVariant::Minimal,
        params,
        &fast_retry(),
    )
    .await
    .is_err());
    assert_eq!(backend.calls(), 0);
}

#[tokio::test]
async fn predictions_file_roundtrip() {
    let corpus = corpus(3);
    let backend = keyed_backend(3);
    let records = run_batch(
        &backend,
        &corpus,
        PromptMode::TextOnly,
        PromptVariant::Minimal,
        GenerationParams::default(),
        &fast_retry(),
    )
    .await
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("predictions.jsonl");
    write_predictions(&path, &records).unwrap();

    let rows = load_predictions(&path).unwrap();
    assert_eq!(rows.len(), 3);
    let map = segment_map(&rows);
    assert_eq!(map["p01"], vec!["segmentum 01"]);

    // byte-identical on rewrite
    let first = std::fs::read(&path).unwrap();
    write_predictions(&path, &records).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), first);
}

#[tokio::test]
async fn post_correct_identity_and_scripted_substitution() {
    let identity = ScriptedBackend::new(|request| {
        let text = request.text();
        let body = text
            .split_once("\n\n")
            .map(|(_, b)| b.to_string())
            .unwrap_or(text);
        Ok(ChatResponse::text(body))
    });
    let params = GenerationParams::default();
    let out = post_correct(&identity, "Tbe Lord's prayer", "Correct the OCR text.", &params)
        .await
        .unwrap();
    assert_eq!(out, "Tbe Lord's prayer");

    let fixed = ScriptedBackend::canned("The Lord's prayer");
    let out = post_correct(&fixed, "Tbe Lord's prayer", "Correct: {text}", &params)
        .await
        .unwrap();
    assert_eq!(out, "The Lord's prayer");

    assert!(matches!(
        post_correct(&fixed, "   ", "Correct: {text}", &params).await,
        Err(PipelineError::EmptyCorrectionInput)
    ));
}

#[tokio::test]
async fn missing_predictions_entries_default_sensibly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pred.jsonl");
    std::fs::write(
        &path,
        concat!(
            r#"{"page_id":"a","segments":["ars"]}"#,
            "\n",
            r#"{"page_id":"b","segments":[],"parse_status":"failed","error":"it broke"}"#,
            "\n",
        ),
    )
    .unwrap();
    let rows = load_predictions(&path).unwrap();
    assert_eq!(rows[0].parse_status, ParseStatus::Ok);
    assert_eq!(rows[1].parse_status, ParseStatus::Failed);

    std::fs::write(
        &path,
        concat!(
            r#"{"page_id":"a","segments":[]}"#,
            "\n",
            r#"{"page_id":"a","segments":[]}"#,
            "\n",
        ),
    )
    .unwrap();
    assert!(matches!(
        load_predictions(&path),
        Err(PipelineError::DuplicatePrediction { .. })
    ));

    let mut by_id = BTreeMap::new();
    by_id.insert("x".to_string(), vec!["ars".to_string()]);
    assert_eq!(by_id.len(), 1);
}
