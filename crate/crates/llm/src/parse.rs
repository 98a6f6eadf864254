//! Tolerant parsing of model responses into segment lists and category maps.
//!
//! Both parsers are total: every input maps to a `(value, status)` pair.
//! `ok` means the whole trimmed response was the expected JSON value,
//! `recovered` means the value was found inside fences or prose (or needed
//! repair, e.g. filled-in missing category keys), `failed` means nothing
//! usable was found and the value is empty.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use latindet_core::corpus::Category;
use latindet_core::SegmentList;

/// How a structured value was obtained from the raw response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseStatus {
    Ok,
    Recovered,
    Failed,
}

/// First JSON value parseable at `offset`, with the byte just past it.
fn value_at(raw: &str, offset: usize) -> Option<(Value, usize)> {
    let mut stream = serde_json::Deserializer::from_str(&raw[offset..]).into_iter::<Value>();
    match stream.next() {
        Some(Ok(value)) => Some((value, offset + stream.byte_offset())),
        _ => None,
    }
}

fn array_of_strings(value: &Value) -> Option<Vec<String>> {
    let items = value.as_array()?;
    let mut out = Vec::with_capacity(items.len());
    for item in items {
        out.push(item.as_str()?.to_string());
    }
    Some(out)
}

fn keep_non_empty(items: Vec<String>) -> SegmentList {
    items
        .into_iter()
        .filter(|s| !s.trim().is_empty())
        .collect()
}

/// Locates the first well-formed JSON array of strings in the response.
///
/// Empty-after-trim elements are dropped. When no array is found the result
/// is an empty list with `Failed` status.
pub fn parse_segment_list(raw: &str) -> (SegmentList, ParseStatus) {
    let trimmed = raw.trim();
    for (idx, _) in raw.match_indices('[') {
        if let Some((value, end)) = value_at(raw, idx) {
            if let Some(items) = array_of_strings(&value) {
                let status = if raw[idx..end].trim() == trimmed {
                    ParseStatus::Ok
                } else {
                    ParseStatus::Recovered
                };
                return (keep_non_empty(items), status);
            }
        }
    }
    (Vec::new(), ParseStatus::Failed)
}

/// Empty map with all twelve category keys.
pub fn empty_category_map() -> BTreeMap<Category, SegmentList> {
    Category::ALL.iter().map(|c| (*c, Vec::new())).collect()
}

/// Locates the first JSON object carrying at least one canonical category
/// key and normalizes it to the fixed 12-key map.
///
/// Missing keys are filled with empty lists, unknown keys are ignored with a
/// warning, and non-string elements are dropped. `Ok` requires the whole
/// trimmed response to be a clean 12-key object with string-array values.
pub fn parse_category_map(raw: &str) -> (BTreeMap<Category, SegmentList>, ParseStatus) {
    let trimmed = raw.trim();
    for (idx, _) in raw.match_indices('{') {
        let Some((value, end)) = value_at(raw, idx) else {
            continue;
        };
        let Value::Object(object) = value else {
            continue;
        };
        let recognized = object
            .keys()
            .filter(|k| Category::from_name(k).is_some())
            .count();
        if recognized == 0 {
            continue;
        }

        let mut map = empty_category_map();
        let mut clean = true;
        for (key, entry) in &object {
            let Some(category) = Category::from_name(key) else {
                log::warn!("ignoring unknown category key {key:?} in response");
                clean = false;
                continue;
            };
            match array_of_strings(entry) {
                Some(items) => {
                    map.insert(category, keep_non_empty(items));
                }
                None => {
                    log::warn!("category {key:?} does not hold an array of strings; skipped");
                    clean = false;
                }
            }
        }
        let spans_response = raw[idx..end].trim() == trimmed;
        let complete = recognized == Category::ALL.len();
        let status = if spans_response && complete && clean {
            ParseStatus::Ok
        } else {
            ParseStatus::Recovered
        };
        return (map, status);
    }
    (empty_category_map(), ParseStatus::Failed)
}
