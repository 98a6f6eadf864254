//! Mapping image-space annotation boxes to text offsets.
//!
//! OCR positional data gives every word a pixel bounding box and a character
//! span into the page text. An annotation box selects the words it covers
//! (intersection area over word area at or above a threshold); runs of
//! selected words that are consecutive in reading order merge into maximal
//! character spans.

use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Axis-aligned pixel rectangle with `x0 < x1`, `y0 < y1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "[F; 4]",
    into = "[F; 4]",
    bound(
        serialize = "F: Scalar + serde::Serialize",
        deserialize = "F: Scalar + serde::Deserialize<'de>"
    )
)]
pub struct BBox<F = f64> {
    pub x0: F,
    pub y0: F,
    pub x1: F,
    pub y1: F,
}

impl<F: Scalar> BBox<F> {
    pub fn new(x0: F, y0: F, x1: F, y1: F) -> Result<Self, GeometryError> {
        if !(x0 < x1 && y0 < y1) {
            return Err(GeometryError::DegenerateBox {
                detail: format!("[{x0}, {y0}, {x1}, {y1}]"),
            });
        }
        Ok(Self { x0, y0, x1, y1 })
    }

    pub fn area(&self) -> F {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    pub fn intersection_area(&self, other: &Self) -> F {
        let width = self.x1.min(other.x1) - self.x0.max(other.x0);
        let height = self.y1.min(other.y1) - self.y0.max(other.y0);
        if width > F::zero() && height > F::zero() {
            width * height
        } else {
            F::zero()
        }
    }
}

impl<F: Scalar> TryFrom<[F; 4]> for BBox<F> {
    type Error = GeometryError;

    fn try_from(v: [F; 4]) -> Result<Self, GeometryError> {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl<F: Scalar> From<BBox<F>> for [F; 4] {
    fn from(b: BBox<F>) -> [F; 4] {
        [b.x0, b.y0, b.x1, b.y1]
    }
}

/// One OCR word with its pixel box and character span into the page text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "F: Scalar + serde::Serialize",
    deserialize = "F: Scalar + serde::Deserialize<'de>"
))]
pub struct PositionedWord<F = f64> {
    pub word: String,
    pub bbox: BBox<F>,
    /// `[start, end)` character indices into the page's OCR text.
    pub char_span: (usize, usize),
}

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("degenerate box (zero or negative extent): {detail}")]
    DegenerateBox { detail: String },
    #[error("positioned words invalid: {reason}")]
    InvalidWords { reason: String },
    #[error("cannot read positioned words {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("positioned words line {line}: {source}")]
    Malformed {
        line: usize,
        source: serde_json::Error,
    },
}

fn validate_words<F: Scalar>(words: &[PositionedWord<F>]) -> Result<(), GeometryError> {
    for (i, word) in words.iter().enumerate() {
        let (start, end) = word.char_span;
        if start >= end {
            return Err(GeometryError::InvalidWords {
                reason: format!("word {i} has empty char_span ({start}, {end})"),
            });
        }
        if i > 0 {
            let prev_end = words[i - 1].char_span.1;
            if word.char_span.0 < prev_end {
                return Err(GeometryError::InvalidWords {
                    reason: format!(
                        "word {i} char_span starts at {} before previous span ends at {prev_end}",
                        word.char_span.0
                    ),
                });
            }
        }
    }
    Ok(())
}

/// For each box, selects words whose overlap ratio (intersection area over
/// word area) reaches `coverage`, merges selected words that are consecutive
/// in reading order into maximal spans, and returns the merged, sorted union
/// over all boxes.
pub fn map_boxes_to_offsets<F: Scalar>(
    words: &[PositionedWord<F>],
    boxes: &[BBox<F>],
    coverage: F,
) -> Result<Vec<(usize, usize)>, GeometryError> {
    validate_words(words)?;
    for b in boxes {
        // stored boxes are valid by construction; re-check for values built
        // from raw parts
        if !(b.x0 < b.x1 && b.y0 < b.y1) {
            return Err(GeometryError::DegenerateBox {
                detail: format!("[{}, {}, {}, {}]", b.x0, b.y0, b.x1, b.y1),
            });
        }
    }
    if words.is_empty() {
        if !boxes.is_empty() {
            log::warn!("map_boxes_to_offsets: no positioned words; returning empty spans");
        }
        return Ok(Vec::new());
    }

    let mut spans: Vec<(usize, usize)> = Vec::new();
    for b in boxes {
        let selected: Vec<usize> = words
            .iter()
            .enumerate()
            .filter(|(_, w)| w.bbox.intersection_area(b) >= coverage * w.bbox.area())
            .map(|(i, _)| i)
            .collect();
        // merge the words of each consecutive-index run into one span
        let mut run_start = 0;
        while run_start < selected.len() {
            let mut run_end = run_start;
            while run_end + 1 < selected.len()
                && selected[run_end + 1] == selected[run_end] + 1
            {
                run_end += 1;
            }
            spans.push((
                words[selected[run_start]].char_span.0,
                words[selected[run_end]].char_span.1,
            ));
            run_start = run_end + 1;
        }
    }

    // final pass: sort and merge overlapping or touching spans
    spans.sort_unstable();
    let mut merged: Vec<(usize, usize)> = Vec::with_capacity(spans.len());
    for span in spans {
        match merged.last_mut() {
            Some(last) if span.0 <= last.1 => last.1 = last.1.max(span.1),
            _ => merged.push(span),
        }
    }
    Ok(merged)
}

/// Default coverage threshold for box-to-word assignment.
pub fn default_coverage<F: Scalar>() -> F {
    F::constant(0.5)
}

/// Loads a line-delimited positioned-word file
/// (`{"word", "bbox": [x0,y0,x1,y1], "char_span": [start,end]}`).
pub fn load_positioned_words<F>(path: impl AsRef<Path>) -> Result<Vec<PositionedWord<F>>, GeometryError>
where
    F: Scalar + serde::de::DeserializeOwned,
{
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| GeometryError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut words = Vec::new();
    for (idx, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| GeometryError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let word: PositionedWord<F> = serde_json::from_str(&line)
            .map_err(|source| GeometryError::Malformed { line: idx + 1, source })?;
        words.push(word);
    }
    validate_words(&words)?;
    Ok(words)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn word(text: &str, x0: f64, x1: f64, span: (usize, usize)) -> PositionedWord {
        PositionedWord {
            word: text.to_string(),
            bbox: BBox::new(x0, 0.0, x1, 10.0).unwrap(),
            char_span: span,
        }
    }

    /// Five words laid out left to right on one line, 10px wide, 2px gaps.
    fn line_of_words() -> Vec<PositionedWord> {
        let mut words = Vec::new();
        let mut cursor = 0;
        for (i, text) in ["ars", "longa", "vita", "brevis", "est"].iter().enumerate() {
            let x0 = i as f64 * 12.0;
            words.push(word(text, x0, x0 + 10.0, (cursor, cursor + text.len())));
            cursor += text.len() + 1;
        }
        words
    }

    #[test]
    fn full_containment_gives_single_span() {
        let words = line_of_words();
        // box covering words 2..=4 ("vita brevis est")
        let b = BBox::new(23.0, -1.0, 59.0, 11.0).unwrap();
        let spans = map_boxes_to_offsets(&words, &[b], 0.5).unwrap();
        assert_eq!(spans, vec![(words[2].char_span.0, words[4].char_span.1)]);
    }

    #[test]
    fn below_threshold_selects_nothing() {
        let words = line_of_words();
        // overlaps word 0 by 2px of 10 → ratio 0.2 < 0.5
        let b = BBox::new(8.0, 0.0, 10.5, 10.0).unwrap();
        assert!(map_boxes_to_offsets(&words, &[b], 0.5).unwrap().is_empty());
    }

    #[test]
    fn gap_in_selection_yields_two_spans() {
        let words = line_of_words();
        // covers word 1 and word 3 fully but clips word 2 vertically to 40%
        let covers_1 = BBox::new(11.0, -1.0, 23.0, 11.0).unwrap();
        let covers_3 = BBox::new(35.0, -1.0, 47.0, 11.0).unwrap();
        let clips_2 = BBox::new(23.5, 0.0, 35.0, 4.0).unwrap();
        let spans =
            map_boxes_to_offsets(&words, &[covers_1, covers_3, clips_2], 0.5).unwrap();
        assert_eq!(
            spans,
            vec![
                (words[1].char_span.0, words[1].char_span.1),
                (words[3].char_span.0, words[3].char_span.1),
            ]
        );
    }

    #[test]
    fn overlapping_boxes_merge_in_final_pass() {
        let words = line_of_words();
        let left = BBox::new(-1.0, -1.0, 23.0, 11.0).unwrap(); // words 0..=1
        let right = BBox::new(11.0, -1.0, 35.0, 11.0).unwrap(); // words 1..=2
        let spans = map_boxes_to_offsets(&words, &[left, right], 0.5).unwrap();
        assert_eq!(spans, vec![(words[0].char_span.0, words[2].char_span.1)]);
    }

    #[test]
    fn empty_words_give_empty_spans() {
        let b = BBox::new(0.0, 0.0, 1.0, 1.0).unwrap();
        let spans = map_boxes_to_offsets::<f64>(&[], &[b], 0.5).unwrap();
        assert!(spans.is_empty());
    }

    #[test]
    fn degenerate_box_is_an_error() {
        assert!(BBox::new(0.0, 0.0, 0.0, 1.0).is_err());
        let words = line_of_words();
        let degenerate = BBox {
            x0: 5.0,
            y0: 5.0,
            x1: 5.0,
            y1: 9.0,
        };
        assert!(matches!(
            map_boxes_to_offsets(&words, &[degenerate], 0.5),
            Err(GeometryError::DegenerateBox { .. })
        ));
    }

    #[test]
    fn unordered_words_rejected() {
        let words = vec![word("b", 12.0, 22.0, (4, 5)), word("a", 0.0, 10.0, (0, 3))];
        assert!(matches!(
            map_boxes_to_offsets(&words, &[], 0.5),
            Err(GeometryError::InvalidWords { .. })
        ));
    }

    #[test]
    fn scaling_all_coordinates_preserves_spans() {
        let words = line_of_words();
        let boxes = vec![
            BBox::new(11.0, -1.0, 35.0, 11.0).unwrap(),
            BBox::new(40.0, 2.0, 70.0, 8.0).unwrap(),
        ];
        let base = map_boxes_to_offsets(&words, &boxes, 0.5).unwrap();
        for scale in [2.0, 0.5, 3.0, 10.0] {
            let scaled_words: Vec<_> = words
                .iter()
                .map(|w| PositionedWord {
                    word: w.word.clone(),
                    bbox: BBox {
                        x0: w.bbox.x0 * scale,
                        y0: w.bbox.y0 * scale,
                        x1: w.bbox.x1 * scale,
                        y1: w.bbox.y1 * scale,
                    },
                    char_span: w.char_span,
                })
                .collect();
            let scaled_boxes: Vec<_> = boxes
                .iter()
                .map(|b| BBox {
                    x0: b.x0 * scale,
                    y0: b.y0 * scale,
                    x1: b.x1 * scale,
                    y1: b.y1 * scale,
                })
                .collect();
            let scaled = map_boxes_to_offsets(&scaled_words, &scaled_boxes, 0.5).unwrap();
            assert_eq!(scaled, base, "scale {scale}");
        }
    }

    #[test]
    fn positioned_word_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("words.jsonl");
        std::fs::write(
            &path,
            concat!(
                r#"{"word":"ars","bbox":[0.0,0.0,10.0,10.0],"char_span":[0,3]}"#,
                "\n",
                r#"{"word":"longa","bbox":[12.0,0.0,22.0,10.0],"char_span":[4,9]}"#,
                "\n",
            ),
        )
        .unwrap();
        let words: Vec<PositionedWord> = load_positioned_words(&path).unwrap();
        assert_eq!(words.len(), 2);
        assert_eq!(words[1].word, "longa");
        assert_eq!(words[1].char_span, (4, 9));
    }
}
