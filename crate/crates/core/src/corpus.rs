//! Corpus data model and line-delimited JSON ingestion.
//!
//! A corpus file holds one page record per line (UTF-8). An optional first
//! line of the form `{"corpus_metadata": {...}}` carries free-form corpus
//! metadata; every other line is a page object. Pages are immutable after
//! loading and safe to share across threads.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The twelve ways Latin integrates with the surrounding text.
///
/// Serialized names are the canonical strings used in corpus files and in
/// categorized prediction output.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum Category {
    #[serde(rename = "Bilingual")]
    Bilingual,
    #[serde(rename = "Independent")]
    Independent,
    #[serde(rename = "Direct Quote")]
    DirectQuote,
    #[serde(rename = "Code-switching")]
    CodeSwitching,
    #[serde(rename = "Dictionary")]
    Dictionary,
    #[serde(rename = "Footnote")]
    Footnote,
    #[serde(rename = "Emblematic")]
    Emblematic,
    #[serde(rename = "Side-note")]
    SideNote,
    #[serde(rename = "Legal")]
    Legal,
    #[serde(rename = "Ecclesiastical")]
    Ecclesiastical,
    #[serde(rename = "Tables and Charts")]
    TablesAndCharts,
    #[serde(rename = "Indices and Catalogs")]
    IndicesAndCatalogs,
}

impl Category {
    /// All twelve categories, in canonical order.
    pub const ALL: [Category; 12] = [
        Category::Bilingual,
        Category::Independent,
        Category::DirectQuote,
        Category::CodeSwitching,
        Category::Dictionary,
        Category::Footnote,
        Category::Emblematic,
        Category::SideNote,
        Category::Legal,
        Category::Ecclesiastical,
        Category::TablesAndCharts,
        Category::IndicesAndCatalogs,
    ];

    /// Canonical serialization name.
    pub fn name(&self) -> &'static str {
        match self {
            Category::Bilingual => "Bilingual",
            Category::Independent => "Independent",
            Category::DirectQuote => "Direct Quote",
            Category::CodeSwitching => "Code-switching",
            Category::Dictionary => "Dictionary",
            Category::Footnote => "Footnote",
            Category::Emblematic => "Emblematic",
            Category::SideNote => "Side-note",
            Category::Legal => "Legal",
            Category::Ecclesiastical => "Ecclesiastical",
            Category::TablesAndCharts => "Tables and Charts",
            Category::IndicesAndCatalogs => "Indices and Catalogs",
        }
    }

    /// Parses a canonical name.
    pub fn from_name(name: &str) -> Option<Category> {
        Category::ALL.into_iter().find(|c| c.name() == name)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One annotated Latin segment on a page.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GtSegment {
    /// Segment surface text; authoritative for evaluation.
    pub text: String,
    /// Optional `[start, end)` character offsets into `ocr_text`; advisory,
    /// since post-correction may change the text the offsets pointed at.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offsets: Option<(usize, usize)>,
    /// Categories this segment was annotated with.
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub categories: BTreeSet<Category>,
}

impl GtSegment {
    pub fn new(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            offsets: None,
            categories: BTreeSet::new(),
        }
    }

    pub fn with_categories(
        text: impl Into<String>,
        categories: impl IntoIterator<Item = Category>,
    ) -> Self {
        Self {
            text: text.into(),
            offsets: None,
            categories: categories.into_iter().collect(),
        }
    }
}

/// One document page with its OCR text and ground-truth annotation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Page {
    pub page_id: String,
    #[serde(default)]
    pub book_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_ref: Option<PathBuf>,
    #[serde(default)]
    pub ocr_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corrected_text: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gt_segments: Vec<GtSegment>,
    pub gt_has_latin: bool,
    /// Annotator veto: excluded pages are skipped by evaluation.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub excluded: bool,
}

impl Page {
    /// Text the evaluation operates on: post-corrected when available.
    pub fn eval_text(&self, use_corrected: bool) -> &str {
        match (&self.corrected_text, use_corrected) {
            (Some(corrected), true) => corrected,
            _ => &self.ocr_text,
        }
    }

    /// Validates this page's internal invariants.
    fn validate(&self) -> Result<(), String> {
        if self.page_id.trim().is_empty() {
            return Err("page_id is empty".into());
        }
        if self.gt_has_latin != !self.gt_segments.is_empty() {
            return Err(format!(
                "gt_has_latin={} inconsistent with {} gt_segments",
                self.gt_has_latin,
                self.gt_segments.len()
            ));
        }
        let char_count = self.ocr_text.chars().count();
        for (i, segment) in self.gt_segments.iter().enumerate() {
            if segment.text.trim().is_empty() {
                return Err(format!("gt_segments[{i}] has empty text"));
            }
            if let Some((start, end)) = segment.offsets {
                if start >= end || end > char_count {
                    return Err(format!(
                        "gt_segments[{i}] offsets ({start}, {end}) out of range for \
                         ocr_text of {char_count} chars"
                    ));
                }
            }
        }
        Ok(())
    }
}

/// An ordered collection of pages plus free-form metadata.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    pub pages: Vec<Page>,
    pub metadata: BTreeMap<String, String>,
}

impl Corpus {
    pub fn new(pages: Vec<Page>) -> Result<Self, CorpusError> {
        let corpus = Self {
            pages,
            metadata: BTreeMap::new(),
        };
        corpus.validate()?;
        Ok(corpus)
    }

    /// Pages that participate in evaluation.
    pub fn evaluated_pages(&self) -> impl Iterator<Item = &Page> {
        self.pages.iter().filter(|p| !p.excluded)
    }

    pub fn find_page(&self, page_id: &str) -> Option<&Page> {
        self.pages.iter().find(|p| p.page_id == page_id)
    }

    fn validate(&self) -> Result<(), CorpusError> {
        let mut seen = HashSet::new();
        for page in &self.pages {
            page.validate().map_err(|reason| CorpusError::Validation {
                page_id: page.page_id.clone(),
                reason,
            })?;
            if !seen.insert(page.page_id.as_str()) {
                return Err(CorpusError::DuplicatePageId {
                    page_id: page.page_id.clone(),
                });
            }
        }
        Ok(())
    }
}

/// Per-corpus counting, Table-2 shaped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total_pages: usize,
    /// Pages with `gt_has_latin = true`.
    pub positive_pages: usize,
    pub excluded_pages: usize,
    /// Pages containing at least one segment with the category; a page
    /// counts once per category regardless of segment multiplicity.
    pub category_pages: BTreeMap<Category, usize>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("corpus line {line}: malformed record: {source}")]
    Malformed {
        line: usize,
        source: serde_json::Error,
    },
    #[error("page {page_id}: {reason}")]
    Validation { page_id: String, reason: String },
    #[error("duplicate page_id {page_id}")]
    DuplicatePageId { page_id: String },
    #[error("cannot write corpus file {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct MetadataHeader {
    corpus_metadata: BTreeMap<String, String>,
}

/// Loads a line-delimited corpus file, validating all invariants.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_corpus_reader(BufReader::new(file), path)
}

fn load_corpus_reader(
    reader: impl BufRead,
    path: &Path,
) -> Result<Corpus, CorpusError> {
    let mut pages = Vec::new();
    let mut metadata = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        if idx == 0 {
            if let Ok(header) = serde_json::from_str::<MetadataHeader>(&line) {
                metadata = header.corpus_metadata;
                continue;
            }
        }
        let page: Page = serde_json::from_str(&line)
            .map_err(|source| CorpusError::Malformed { line: idx + 1, source })?;
        pages.push(page);
    }
    let mut corpus = Corpus::new(pages)?;
    corpus.metadata = metadata;
    Ok(corpus)
}

/// Writes a corpus in the same line-delimited format `load_corpus` reads.
pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let to_write_err = |source| CorpusError::Write {
        path: path.display().to_string(),
        source,
    };
    let mut out = Vec::new();
    if !corpus.metadata.is_empty() {
        let header = MetadataHeader {
            corpus_metadata: corpus.metadata.clone(),
        };
        serde_json::to_writer(&mut out, &header).expect("header serializes");
        out.push(b'\n');
    }
    for page in &corpus.pages {
        serde_json::to_writer(&mut out, page).expect("page serializes");
        out.push(b'\n');
    }
    let mut file = std::fs::File::create(path).map_err(to_write_err)?;
    file.write_all(&out).map_err(to_write_err)?;
    Ok(())
}

/// Counts pages, positives, and per-category page frequencies.
pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let mut category_pages: BTreeMap<Category, usize> = BTreeMap::new();
    let mut positive_pages = 0;
    let mut excluded_pages = 0;
    for page in &corpus.pages {
        if page.excluded {
            excluded_pages += 1;
        }
        if page.gt_has_latin {
            positive_pages += 1;
        }
        let mut page_categories = BTreeSet::new();
        for segment in &page.gt_segments {
            page_categories.extend(segment.categories.iter().copied());
        }
        for category in page_categories {
            *category_pages.entry(category).or_insert(0) += 1;
        }
    }
    CorpusStats {
        total_pages: corpus.pages.len(),
        positive_pages,
        excluded_pages,
        category_pages,
    }
}
