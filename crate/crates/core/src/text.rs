//! Small text utilities shared across modules.
//!
//! All offsets in this crate are unicode scalar positions, not byte offsets.

/// Canonical matching key for a term or relation name.
///
/// Casefolds, trims, collapses internal whitespace runs to a single space and
/// strips leading/trailing punctuation.
pub fn normalize(s: &str) -> String {
    let lowered = s.to_lowercase();
    let collapsed = lowered.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed
        .trim_matches(|c: char| is_punctuation(c) || c.is_whitespace())
        .to_string()
}

fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}'..='\u{201F}' | '\u{2010}'..='\u{2015}' | '\u{2026}' | '\u{00B7}' | '\u{00AB}' | '\u{00BB}'
        )
}

/// Number of unicode scalars in `s`.
pub fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// Slice `s` by unicode scalar positions `[start, end)`.
///
/// Returns `None` when the range is out of bounds or inverted.
pub fn char_slice(s: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let mut begin = None;
    let mut finish = None;
    for (pos, (byte, _)) in s.char_indices().enumerate() {
        if pos == start {
            begin = Some(byte);
        }
        if pos == end {
            finish = Some(byte);
            break;
        }
    }
    let total = char_len(s);
    if start == total {
        begin = Some(s.len());
    }
    if end == total {
        finish = Some(s.len());
    }
    match (begin, finish) {
        (Some(b), Some(f)) => Some(&s[b..f]),
        _ => None,
    }
}

/// Byte offset of every char boundary, including the end of the string.
///
/// `table[i]` is the byte index of char `i`; `table[len]` is `s.len()`.
pub fn char_boundaries(s: &str) -> Vec<usize> {
    let mut table: Vec<usize> = s.char_indices().map(|(b, _)| b).collect();
    table.push(s.len());
    table
}

/// Char positions of every occurrence of `needle` in `haystack`.
///
/// Occurrences may overlap. An empty needle yields nothing.
pub fn find_all_chars(haystack: &str, needle: &str) -> Vec<usize> {
    if needle.is_empty() {
        return Vec::new();
    }
    let bounds = char_boundaries(haystack);
    let mut out = Vec::new();
    for (pos, &byte) in bounds.iter().enumerate() {
        if byte < haystack.len() && haystack[byte..].starts_with(needle) {
            out.push(pos);
        }
    }
    out
}

/// Stable short hex digest of arbitrary bytes (SHA-256, first 16 hex chars).
pub fn short_hash(data: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(data);
    hex::encode(&digest[..8])
}

/// Full hex SHA-256 digest.
pub fn full_hash(data: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize("  Sand  Casting."), "sand casting");
        assert_eq!(normalize("HPDC"), "hpdc");
        assert_eq!(normalize(""), "");
        assert_eq!(normalize("(semi-solid)"), "semi-solid");
        assert_eq!(normalize("\u{201C}alloy\u{201D}"), "alloy");
    }

    #[test]
    fn slicing_is_by_scalar() {
        let s = "Al₇Si₀.₃Mg alloy";
        assert_eq!(char_slice(s, 0, 10), Some("Al₇Si₀.₃Mg"));
        assert_eq!(char_slice(s, 11, 16), Some("alloy"));
        assert_eq!(char_slice(s, 16, 16), Some(""));
        assert_eq!(char_slice(s, 3, 17), None);
        assert_eq!(char_slice(s, 4, 3), None);
    }

    #[test]
    fn find_all_reports_char_positions() {
        assert_eq!(find_all_chars("₇ab₇ab", "ab"), vec![1, 4]);
        assert_eq!(find_all_chars("aaa", "aa"), vec![0, 1]);
        assert!(find_all_chars("abc", "").is_empty());
    }
}
