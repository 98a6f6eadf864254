//! Prompt construction for the three input modalities and the registered
//! prompt variants.
//!
//! All variants share a mode-dependent base instruction and differ only in
//! an optional persona line, an inserted sentence, or a trailing constraint
//! paragraph. The page text is substituted after the `OCR Text:` label for
//! text-bearing modes. Golden tests pin every rendering byte-for-byte.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use latindet_core::corpus::{Category, Page};

use crate::PipelineError;

/// Which inputs accompany the instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptMode {
    TextOnly,
    ImageOnly,
    ImagePlusText,
}

impl PromptMode {
    pub fn needs_text(&self) -> bool {
        matches!(self, PromptMode::TextOnly | PromptMode::ImagePlusText)
    }

    pub fn needs_image(&self) -> bool {
        matches!(self, PromptMode::ImageOnly | PromptMode::ImagePlusText)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            PromptMode::TextOnly => "text",
            PromptMode::ImageOnly => "image",
            PromptMode::ImagePlusText => "image-text",
        }
    }
}

impl FromStr for PromptMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "text" | "text-only" => Ok(PromptMode::TextOnly),
            "image" | "image-only" => Ok(PromptMode::ImageOnly),
            "image-text" | "multimodal" => Ok(PromptMode::ImagePlusText),
            other => Err(format!("unknown prompt mode '{other}'")),
        }
    }
}

impl fmt::Display for PromptMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The registered prompt variants: the minimal default plus the ten
/// modification strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptVariant {
    Minimal,
    PartialCategories,
    AllCategories,
    DetailedCategories,
    SpecialistContext,
    Specialist,
    Metrics,
    EmptyList,
    SingleWord,
    NoAbbrev,
    NoBorrow,
}

impl PromptVariant {
    /// All registered variants, minimal first.
    pub const ALL: [PromptVariant; 11] = [
        PromptVariant::Minimal,
        PromptVariant::PartialCategories,
        PromptVariant::AllCategories,
        PromptVariant::DetailedCategories,
        PromptVariant::SpecialistContext,
        PromptVariant::Specialist,
        PromptVariant::Metrics,
        PromptVariant::EmptyList,
        PromptVariant::SingleWord,
        PromptVariant::NoAbbrev,
        PromptVariant::NoBorrow,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PromptVariant::Minimal => "minimal",
            PromptVariant::PartialCategories => "partial-categories",
            PromptVariant::AllCategories => "all-categories",
            PromptVariant::DetailedCategories => "detailed-categories",
            PromptVariant::SpecialistContext => "specialist-context",
            PromptVariant::Specialist => "specialist",
            PromptVariant::Metrics => "metrics",
            PromptVariant::EmptyList => "empty-list",
            PromptVariant::SingleWord => "single-word",
            PromptVariant::NoAbbrev => "no-abbrev",
            PromptVariant::NoBorrow => "no-borrow",
        }
    }
}

impl FromStr for PromptVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        PromptVariant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| format!("unknown prompt variant '{s}'"))
    }
}

impl fmt::Display for PromptVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A rendered prompt plus the image it should be sent with, if any.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptPayload {
    pub text: String,
    pub image: Option<PathBuf>,
    pub mode: PromptMode,
}

const RETURN_LIST: &str =
    "Return the results as a list of strings in the JSON format: [\"text1\", \"text2\", ...].";

const PERSONA: &str = "You are a specialist in classical languages and historical documents.";

const PERSONA_CONTEXT: &str = "You are a specialist in classical languages and historical \
documents. You are given a scanned image of a page from an 18th-century document and its \
corresponding OCR result.";

fn base_instruction(mode: PromptMode) -> &'static str {
    match mode {
        PromptMode::TextOnly => {
            "Identify and extract all segments written in Latin (e.g., Classical or Medieval \
             Latin) from the OCR text of an image."
        }
        PromptMode::ImageOnly => {
            "Identify and extract all segments written in Latin (e.g., Classical or Medieval \
             Latin) from the provided image."
        }
        PromptMode::ImagePlusText => {
            "Identify and extract all segments written in Latin (e.g., Classical or Medieval \
             Latin) from the provided image, using the accompanying OCR text as a reference."
        }
    }
}

/// One-line definitions of the twelve categories, as used by the detailed
/// variant and the joint categorization prompt.
pub fn category_definition(category: Category) -> &'static str {
    match category {
        Category::Bilingual => "Original Latin text with its English translation immediately following.",
        Category::Independent => "Standalone Latin text by the author, possibly with adjacent English.",
        Category::DirectQuote => "Latin text quoted verbatim within primarily English content.",
        Category::CodeSwitching => "Alternation between Latin and English within the same passage.",
        Category::Dictionary => "Latin entries in dictionary-style definitions or explanations.",
        Category::Footnote => "Latin in annotations or footnotes clarifying main text.",
        Category::Emblematic => "Latin used as mottos, epigraphs, or thematic standalone phrases.",
        Category::SideNote => "Marginal notes or annotations in Latin beside main text.",
        Category::Legal => "Standard Latin phrases used in legal contexts.",
        Category::Ecclesiastical => "Standard Latin phrases used in religious contexts.",
        Category::TablesAndCharts => "Latin in tables, charts, genealogies, calendars, scientific or inflection data.",
        Category::IndicesAndCatalogs => "Latin in lists, indices, bibliographies, or catalog entries.",
    }
}

fn category_bullets() -> String {
    Category::ALL
        .iter()
        .map(|c| format!("- {}: {}", c.name(), category_definition(*c)))
        .collect::<Vec<_>>()
        .join("\n")
}

fn suffix_paragraph(variant: PromptVariant) -> Option<String> {
    match variant {
        PromptVariant::PartialCategories => Some(
            "Pay particular attention to identifying Latin segments in code-switching, \
             dictionaries, footnotes, sidenotes, tables, and charts, while maintaining accuracy \
             across all other categories."
                .to_string(),
        ),
        PromptVariant::AllCategories => Some(format!(
            "Please pay attention to Latin in all of those categories: {}.",
            Category::ALL
                .iter()
                .map(|c| c.name())
                .collect::<Vec<_>>()
                .join(", ")
        )),
        PromptVariant::DetailedCategories => Some(format!(
            "Please pay attention to Latin in all of those categories:\n{}",
            category_bullets()
        )),
        PromptVariant::Metrics => Some(
            "Please ensure your extraction is both precise (no non-Latin segments are included) \
             and comprehensive (all Latin segments are found)."
                .to_string(),
        ),
        PromptVariant::EmptyList => {
            Some("Return an empty list if no Latin text is found.".to_string())
        }
        PromptVariant::NoAbbrev => Some(
            "Please do not include any abbreviations that are commonly used in contemporary \
             languages, such as \"etc.\", \"e.g.\", \"i.e.\", \"et al.\", \"a.m.\", \"p.m.\", \
             \"A.D.\", \"B.C.\", \"P.S.\", and similar."
                .to_string(),
        ),
        PromptVariant::NoBorrow => Some(
            "Please consider the language context and do not include Latin words or phrases \
             that are used as loanwords or integrated into other languages, unless they function \
             as Latin text in the context."
                .to_string(),
        ),
        _ => None,
    }
}

/// Text the prompt carries for text-bearing modes: post-corrected when
/// available, raw OCR otherwise.
pub fn page_text(page: &Page) -> &str {
    page.eval_text(true)
}

fn check_modality(mode: PromptMode, page: &Page) -> Result<(), PipelineError> {
    if mode.needs_image() && page.image_ref.is_none() {
        return Err(PipelineError::MissingImage {
            page_id: page.page_id.clone(),
        });
    }
    if mode == PromptMode::TextOnly && page_text(page).trim().is_empty() {
        return Err(PipelineError::MissingText {
            page_id: page.page_id.clone(),
        });
    }
    Ok(())
}

/// Renders the extraction prompt for a page.
pub fn build_prompt(
    mode: PromptMode,
    page: &Page,
    variant: PromptVariant,
) -> Result<PromptPayload, PipelineError> {
    check_modality(mode, page)?;
    let base = base_instruction(mode);
    let mut paragraphs: Vec<String> = Vec::new();
    match variant {
        // Appendix-C layout: instruction and output format in one paragraph
        PromptVariant::Minimal => paragraphs.push(format!("{base} {RETURN_LIST}")),
        PromptVariant::Specialist => {
            paragraphs.push(PERSONA.to_string());
            paragraphs.push(base.to_string());
            paragraphs.push(RETURN_LIST.to_string());
        }
        PromptVariant::SpecialistContext => {
            paragraphs.push(PERSONA_CONTEXT.to_string());
            paragraphs.push(base.to_string());
            paragraphs.push(RETURN_LIST.to_string());
        }
        PromptVariant::SingleWord => {
            paragraphs.push(base.to_string());
            paragraphs.push(
                "Include segments even if they consist of only a single Latin word.".to_string(),
            );
            paragraphs.push(RETURN_LIST.to_string());
        }
        _ => {
            paragraphs.push(base.to_string());
            paragraphs.push(RETURN_LIST.to_string());
            if let Some(extra) = suffix_paragraph(variant) {
                paragraphs.push(extra);
            }
        }
    }
    if mode.needs_text() {
        paragraphs.push(format!("OCR Text: {}", page_text(page)));
    }
    Ok(PromptPayload {
        text: paragraphs.join("\n\n"),
        image: page.image_ref.clone().filter(|_| mode.needs_image()),
        mode,
    })
}

/// Renders the joint extraction + categorization prompt (fixed 12-key JSON
/// object output).
pub fn build_categorization_prompt(
    mode: PromptMode,
    page: &Page,
) -> Result<PromptPayload, PipelineError> {
    check_modality(mode, page)?;
    let base = match mode {
        PromptMode::TextOnly => {
            "Identify and extract all segments written in Latin (e.g., Classical or Medieval \
             Latin) from the OCR text of an image."
        }
        _ => {
            "Identify and extract all segments written in Latin (e.g., Classical or Medieval \
             Latin) from the provided image."
        }
    };
    let format_example = Category::ALL
        .iter()
        .map(|c| format!("\"{}\": [...]", c.name()))
        .collect::<Vec<_>>()
        .join(", ");
    let mut paragraphs = vec![
        base.to_string(),
        format!(
            "After extracting all the Latin segments, assign each to one or some of the \
             following categories:\n{}",
            category_bullets()
        ),
        format!(
            "Return a JSON object mapping each category to a list of Latin text segments, using \
             exactly this format (no extra text or modifications): {{{format_example}}}"
        ),
        "If a category has no results, include it with an empty list.".to_string(),
    ];
    if mode.needs_text() {
        paragraphs.push(format!("OCR Text: {}", page_text(page)));
    }
    Ok(PromptPayload {
        text: paragraphs.join("\n\n"),
        image: page.image_ref.clone().filter(|_| mode.needs_image()),
        mode,
    })
}
