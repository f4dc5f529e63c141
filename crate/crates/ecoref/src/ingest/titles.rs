//! Journal-title normalization for record linkage.

use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use super::IngestError;

/// Collapses a raw journal title to a linkage key: decompose and strip
/// diacritics, lowercase, drop one leading "the" token, then keep only
/// alphanumeric characters.
///
/// "The Review of Economic Studies" and "Review of Economic Studies" map
/// to the same key so the variants merge downstream.
pub fn normalize_title(title: &str) -> Result<String, IngestError> {
    let stripped: String = title.nfd().filter(|c| !is_combining_mark(*c)).collect();
    let lower = stripped.to_lowercase();
    let trimmed = lower.trim_start();

    // One leading "the" token only; "theoretical" keeps its prefix.
    let rest = match trimmed.strip_prefix("the") {
        Some(tail) if tail.chars().next().is_some_and(|c| !c.is_alphanumeric()) => tail,
        _ => trimmed,
    };

    let key: String = rest.chars().filter(|c| c.is_alphanumeric()).collect();
    if key.is_empty() {
        return Err(IngestError::UnusableTitle {
            title: title.to_string(),
        });
    }
    Ok(key)
}
