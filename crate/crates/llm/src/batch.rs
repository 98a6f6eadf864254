//! Deterministic batch inference over a corpus.
//!
//! One request per non-excluded page, at most `concurrency` in flight,
//! transient failures retried with exponential backoff. Results always come
//! back in corpus page order, so output is independent of completion order.
//! Per-page failures (prompt preconditions, unreadable images, exhausted
//! retries) become `failed` records and the batch continues; configuration
//! and authentication problems abort before the first request.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;
use std::time::Instant;

use base64::Engine;
use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};

use latindet_core::corpus::{Category, Corpus, Page};
use latindet_core::SegmentList;

use crate::backend::{
    BackendError, ChatBackend, ChatMessage, ChatRequest, ChatResponse, ContentPart,
    GenerationParams, RetryPolicy,
};
use crate::parse::{empty_category_map, parse_category_map, parse_segment_list, ParseStatus};
use crate::prompt::{
    build_categorization_prompt, build_prompt, PromptMode, PromptPayload, PromptVariant,
};
use crate::PipelineError;

/// Concurrency and retry settings for one batch run.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BatchOptions {
    pub concurrency: usize,
    pub retry: RetryPolicy,
}

impl Default for BatchOptions {
    fn default() -> Self {
        Self {
            concurrency: 16,
            retry: RetryPolicy::default(),
        }
    }
}

/// Structured value extracted from a response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ParsedPrediction {
    Segments(SegmentList),
    Categories(BTreeMap<Category, SegmentList>),
}

impl ParsedPrediction {
    pub fn segments(&self) -> Option<&SegmentList> {
        match self {
            ParsedPrediction::Segments(s) => Some(s),
            ParsedPrediction::Categories(_) => None,
        }
    }

    pub fn categories(&self) -> Option<&BTreeMap<Category, SegmentList>> {
        match self {
            ParsedPrediction::Categories(c) => Some(c),
            ParsedPrediction::Segments(_) => None,
        }
    }
}

/// Everything recorded about one page's request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub page_id: String,
    pub prompt_text: String,
    pub image_dimensions: Option<(u32, u32)>,
    pub raw_response: String,
    pub parsed: ParsedPrediction,
    pub parse_status: ParseStatus,
    pub retries: u32,
    pub latency_ms: u64,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy)]
enum BatchTask {
    Extract(PromptVariant),
    Categorize,
}

async fn complete_with_retry<B: ChatBackend + ?Sized>(
    backend: &B,
    request: &ChatRequest,
    retry: &RetryPolicy,
) -> Result<(ChatResponse, u32), BackendError> {
    let mut retries = 0;
    loop {
        match backend.complete(request).await {
            Ok(response) => return Ok((response, retries)),
            Err(e) if e.is_transient() && retries + 1 < retry.max_attempts.max(1) => {
                retries += 1;
                log::warn!("transient backend failure (retry {retries}): {e}");
                tokio::time::sleep(retry.backoff(retries)).await;
            }
            Err(e) => return Err(e),
        }
    }
}

fn media_type(path: &Path) -> &'static str {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .as_deref()
    {
        Some("png") => "image/png",
        Some("jpg") | Some("jpeg") => "image/jpeg",
        Some("gif") => "image/gif",
        Some("webp") => "image/webp",
        _ => "application/octet-stream",
    }
}

async fn build_request(
    payload: &PromptPayload,
    params: GenerationParams,
) -> Result<(ChatRequest, Option<(u32, u32)>), PipelineError> {
    let mut content = vec![ContentPart::Text {
        text: payload.text.clone(),
    }];
    let mut dimensions = None;
    if let Some(image_path) = &payload.image {
        let bytes = tokio::fs::read(image_path).await.map_err(|source| {
            PipelineError::Io {
                action: "read image",
                path: image_path.display().to_string(),
                source,
            }
        })?;
        // images are passed unmodified; dimensions are recorded for audit
        dimensions = image::load_from_memory(&bytes)
            .ok()
            .map(|img| (img.width(), img.height()));
        let encoded = base64::engine::general_purpose::STANDARD.encode(&bytes);
        content.push(ContentPart::ImageUrl {
            url: format!("data:{};base64,{encoded}", media_type(image_path)),
        });
    }
    Ok((
        ChatRequest {
            messages: vec![ChatMessage {
                role: "user".to_string(),
                content,
            }],
            params,
        },
        dimensions,
    ))
}

fn failed_record(page: &Page, task: BatchTask, prompt_text: String, error: String) -> PredictionRecord {
    PredictionRecord {
        page_id: page.page_id.clone(),
        prompt_text,
        image_dimensions: None,
        raw_response: String::new(),
        parsed: match task {
            BatchTask::Extract(_) => ParsedPrediction::Segments(Vec::new()),
            BatchTask::Categorize => ParsedPrediction::Categories(empty_category_map()),
        },
        parse_status: ParseStatus::Failed,
        retries: 0,
        latency_ms: 0,
        prompt_tokens: None,
        completion_tokens: None,
        error: Some(error),
    }
}

async fn run_page<B: ChatBackend + ?Sized>(
    backend: &B,
    page: &Page,
    mode: PromptMode,
    task: BatchTask,
    params: GenerationParams,
    retry: RetryPolicy,
) -> PredictionRecord {
    let payload = match task {
        BatchTask::Extract(variant) => build_prompt(mode, page, variant),
        BatchTask::Categorize => build_categorization_prompt(mode, page),
    };
    let payload = match payload {
        Ok(p) => p,
        Err(e) => return failed_record(page, task, String::new(), e.to_string()),
    };
    let (request, dimensions) = match build_request(&payload, params).await {
        Ok(r) => r,
        Err(e) => return failed_record(page, task, payload.text, e.to_string()),
    };

    let started = Instant::now();
    match complete_with_retry(backend, &request, &retry).await {
        Ok((response, retries)) => {
            let (parsed, parse_status) = match task {
                BatchTask::Extract(_) => {
                    let (segments, status) = parse_segment_list(&response.content);
                    (ParsedPrediction::Segments(segments), status)
                }
                BatchTask::Categorize => {
                    let (map, status) = parse_category_map(&response.content);
                    (ParsedPrediction::Categories(map), status)
                }
            };
            PredictionRecord {
                page_id: page.page_id.clone(),
                prompt_text: payload.text,
                image_dimensions: dimensions,
                raw_response: response.content,
                parsed,
                parse_status,
                retries,
                latency_ms: started.elapsed().as_millis() as u64,
                prompt_tokens: response.prompt_tokens,
                completion_tokens: response.completion_tokens,
                error: None,
            }
        }
        Err(e) => {
            let mut record = failed_record(page, task, payload.text, e.to_string());
            record.image_dimensions = dimensions;
            record.latency_ms = started.elapsed().as_millis() as u64;
            record
        }
    }
}

async fn run_batch_inner<B: ChatBackend + ?Sized>(
    backend: &B,
    corpus: &Corpus,
    mode: PromptMode,
    task: BatchTask,
    params: GenerationParams,
    options: &BatchOptions,
) -> Result<Vec<PredictionRecord>, PipelineError> {
    params.validate()?;
    backend.validate()?;
    if mode.needs_image() && !backend.capabilities().vision {
        return Err(PipelineError::Backend(BackendError::Config(format!(
            "prompt mode {mode} needs image input but the backend does not declare vision support"
        ))));
    }

    let retry = options.retry;
    let pages: Vec<&Page> = corpus.evaluated_pages().collect();
    let mut indexed: Vec<(usize, PredictionRecord)> = stream::iter(
        pages
            .iter()
            .enumerate()
            .map(|(idx, page)| async move {
                (idx, run_page(backend, page, mode, task, params, retry).await)
            }),
    )
    .buffer_unordered(options.concurrency.max(1))
    .collect()
    .await;
    indexed.sort_by_key(|(idx, _)| *idx);
    Ok(indexed.into_iter().map(|(_, record)| record).collect())
}

/// Runs the extraction task over every non-excluded page.
pub async fn run_batch<B: ChatBackend + ?Sized>(
    backend: &B,
    corpus: &Corpus,
    mode: PromptMode,
    variant: PromptVariant,
    params: GenerationParams,
    options: &BatchOptions,
) -> Result<Vec<PredictionRecord>, PipelineError> {
    run_batch_inner(backend, corpus, mode, BatchTask::Extract(variant), params, options).await
}

/// Runs the joint extraction + categorization task over every non-excluded
/// page.
pub async fn run_categorization_batch<B: ChatBackend + ?Sized>(
    backend: &B,
    corpus: &Corpus,
    mode: PromptMode,
    params: GenerationParams,
    options: &BatchOptions,
) -> Result<Vec<PredictionRecord>, PipelineError> {
    run_batch_inner(backend, corpus, mode, BatchTask::Categorize, params, options).await
}

/// Sends `text` through a caller-supplied correction prompt and returns the
/// backend's corrected text verbatim. `{text}` in the prompt marks the
/// substitution point; without it the text is appended after a blank line.
pub async fn post_correct<B: ChatBackend + ?Sized>(
    backend: &B,
    text: &str,
    correction_prompt: &str,
    params: &GenerationParams,
) -> Result<String, PipelineError> {
    if text.trim().is_empty() {
        return Err(PipelineError::EmptyCorrectionInput);
    }
    params.validate()?;
    backend.validate()?;
    let prompt = if correction_prompt.contains("{text}") {
        correction_prompt.replace("{text}", text)
    } else {
        format!("{correction_prompt}\n\n{text}")
    };
    let request = ChatRequest::user(prompt, *params);
    let (response, _) = complete_with_retry(backend, &request, &RetryPolicy::default()).await?;
    Ok(response.content)
}

// ---------------------------------------------------------------------------
// prediction and transcript files

/// One line of a predictions file. Extraction runs carry `segments`,
/// categorization runs carry `categories`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionFileRecord {
    pub page_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segments: Option<SegmentList>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<BTreeMap<Category, SegmentList>>,
    #[serde(default = "ok_status")]
    pub parse_status: ParseStatus,
    #[serde(default)]
    pub retries: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn ok_status() -> ParseStatus {
    ParseStatus::Ok
}

impl PredictionFileRecord {
    pub fn segments(page_id: impl Into<String>, segments: SegmentList) -> Self {
        Self {
            page_id: page_id.into(),
            segments: Some(segments),
            categories: None,
            parse_status: ParseStatus::Ok,
            retries: 0,
            error: None,
        }
    }
}

impl From<&PredictionRecord> for PredictionFileRecord {
    fn from(record: &PredictionRecord) -> Self {
        Self {
            page_id: record.page_id.clone(),
            segments: record.parsed.segments().cloned(),
            categories: record.parsed.categories().cloned(),
            parse_status: record.parse_status,
            retries: record.retries,
            error: record.error.clone(),
        }
    }
}

fn io_err(action: &'static str, path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        action,
        path: path.display().to_string(),
        source,
    }
}

/// Writes prediction rows as deterministic JSONL.
pub fn write_prediction_rows(
    path: impl AsRef<Path>,
    rows: &[PredictionFileRecord],
) -> Result<(), PipelineError> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for row in rows {
        serde_json::to_writer(&mut out, row).expect("prediction row serializes");
        out.push(b'\n');
    }
    let mut file = std::fs::File::create(path).map_err(io_err("write predictions", path))?;
    file.write_all(&out).map_err(io_err("write predictions", path))?;
    Ok(())
}

/// Writes the deterministic per-page rows of a batch run.
pub fn write_predictions(
    path: impl AsRef<Path>,
    records: &[PredictionRecord],
) -> Result<(), PipelineError> {
    let rows: Vec<PredictionFileRecord> = records.iter().map(Into::into).collect();
    write_prediction_rows(path, &rows)
}

/// Loads a predictions file, rejecting duplicate page ids.
pub fn load_predictions(path: impl AsRef<Path>) -> Result<Vec<PredictionFileRecord>, PipelineError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(io_err("read predictions", path))?;
    let mut rows = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (idx, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err("read predictions", path))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: PredictionFileRecord = serde_json::from_str(&line)
            .map_err(|source| PipelineError::MalformedPrediction { line: idx + 1, source })?;
        if !seen.insert(row.page_id.clone()) {
            return Err(PipelineError::DuplicatePrediction {
                page_id: row.page_id.clone(),
            });
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Page-id → segment-list view of prediction rows (extraction task).
pub fn segment_map(rows: &[PredictionFileRecord]) -> BTreeMap<String, SegmentList> {
    rows.iter()
        .map(|r| (r.page_id.clone(), r.segments.clone().unwrap_or_default()))
        .collect()
}

/// Page-id → category map view of prediction rows (categorization task).
pub fn category_map(
    rows: &[PredictionFileRecord],
) -> BTreeMap<String, BTreeMap<Category, SegmentList>> {
    rows.iter()
        .map(|r| {
            (
                r.page_id.clone(),
                r.categories.clone().unwrap_or_else(empty_category_map),
            )
        })
        .collect()
}

/// One line of a transcript file: the full request/response audit record.
/// Latency makes transcripts run-dependent; deterministic outputs are the
/// predictions and report files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub page_id: String,
    pub mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    pub prompt: String,
    pub raw_response: String,
    pub params: GenerationParams,
    pub retries: u32,
    pub latency_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_dimensions: Option<(u32, u32)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Writes request/response transcripts for audit and replay.
pub fn write_transcripts(
    path: impl AsRef<Path>,
    records: &[PredictionRecord],
    mode: PromptMode,
    variant: Option<PromptVariant>,
    params: &GenerationParams,
) -> Result<(), PipelineError> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for record in records {
        let row = TranscriptRecord {
            page_id: record.page_id.clone(),
            mode: mode.to_string(),
            variant: variant.map(|v| v.to_string()),
            prompt: record.prompt_text.clone(),
            raw_response: record.raw_response.clone(),
            params: *params,
            retries: record.retries,
            latency_ms: record.latency_ms,
            image_dimensions: record.image_dimensions,
            error: record.error.clone(),
        };
        serde_json::to_writer(&mut out, &row).expect("transcript row serializes");
        out.push(b'\n');
    }
    let mut file = std::fs::File::create(path).map_err(io_err("write transcripts", path))?;
    file.write_all(&out).map_err(io_err("write transcripts", path))?;
    Ok(())
}
