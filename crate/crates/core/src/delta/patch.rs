use thiserror::Error;

use super::DiffBlock;

/// Block indices are 1-based, matching the order blocks appear in the response.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PatchError {
    #[error("SearchNotFound({0}): SEARCH text of block {0} does not occur in the program")]
    SearchNotFound(usize),
    #[error("AmbiguousSearch({0}, {1}): SEARCH text of block {0} occurs {1} times")]
    AmbiguousSearch(usize, usize),
}

/// Counts occurrences of `needle`, overlapping ones included, stopping at `cap`.
fn count_occurrences(haystack: &str, needle: &str, cap: usize) -> usize {
    let mut count = 0;
    let mut from = 0;
    while let Some(pos) = haystack[from..].find(needle) {
        count += 1;
        if count >= cap {
            break;
        }
        let at = from + pos;
        from = at + haystack[at..].chars().next().map_or(1, char::len_utf8);
    }
    count
}

/// Applies blocks in order; each later block sees the already patched text.
/// A SEARCH text must occur exactly once.
pub fn apply_diffs(code: &str, diffs: &[DiffBlock]) -> Result<String, PatchError> {
    let mut text = code.to_string();
    for (i, block) in diffs.iter().enumerate() {
        let index = i + 1;
        match count_occurrences(&text, &block.search, 2) {
            0 => return Err(PatchError::SearchNotFound(index)),
            1 => {}
            _ => {
                let total = count_occurrences(&text, &block.search, usize::MAX);
                return Err(PatchError::AmbiguousSearch(index, total));
            }
        }
        let at = text.find(&block.search).expect("counted above");
        text.replace_range(at..at + block.search.len(), &block.replace);
    }
    Ok(text)
}
