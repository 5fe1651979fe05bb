//! Seven-step cleanup applied to cross-dataset test text.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterConfig {
    /// Lowercase the result after the seven steps. Off by default.
    #[serde(default)]
    pub lowercase: bool,
}

/// Applies the filtering steps in their fixed order:
///
/// 1. remove `"` characters
/// 2. remove strings starting with `@` (up to the next whitespace)
/// 3. remove strings starting with `http://` or `https://`
/// 4. remove `,` `:` `;`
/// 5. delete the `#` prefix of hashtags, keeping the tag word
/// 6. remove `RT` tokens
/// 7. remove every character outside printable ASCII (0x20..=0x7E)
///
/// Whitespace is collapsed to single spaces before step 1 and after step 7.
/// Step 7 can splice characters back together (`"é@x"` becomes `"@x"`), so the
/// pass is repeated until the text stops changing; this makes the filter
/// idempotent. Ordinary text reaches the fixed point after one pass.
pub fn filter_text(text: &str) -> String {
    filter_text_with(text, FilterConfig::default())
}

pub fn filter_text_with(text: &str, config: FilterConfig) -> String {
    let mut current = collapse(text);
    loop {
        let next = single_pass(&current);
        if next == current {
            break;
        }
        current = next;
    }
    if config.lowercase {
        current.make_ascii_lowercase();
    }
    current
}

fn single_pass(text: &str) -> String {
    let s: String = text.chars().filter(|&c| c != '"').collect();
    let s = drop_words_starting_at(&s, |w| w.find('@'));
    let s = drop_words_starting_at(&s, find_url);
    let s: String = s.chars().filter(|c| !matches!(c, ',' | ':' | ';')).collect();
    let s = words(&s).map(|w| w.trim_start_matches('#')).collect::<Vec<_>>().join(" ");
    let s = words(&s).filter(|&w| w != "RT").collect::<Vec<_>>().join(" ");
    let s: String = s.chars().filter(|c| (' '..='~').contains(c)).collect();
    collapse(&s)
}

fn words(s: &str) -> impl Iterator<Item = &str> {
    s.split_whitespace().filter(|w| !w.is_empty())
}

fn collapse(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn find_url(word: &str) -> Option<usize> {
    let lower = word.to_ascii_lowercase();
    match (lower.find("http://"), lower.find("https://")) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    }
}

/// Cuts each whitespace-separated word at the position returned by `start`,
/// discarding the remainder of the word.
fn drop_words_starting_at(s: &str, start: impl Fn(&str) -> Option<usize>) -> String {
    words(s)
        .map(|w| match start(w) {
            Some(i) => &w[..i],
            None => w,
        })
        .filter(|w| !w.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn golden_cases() {
        let cases = [
            ("RT @u \"nice\" http://a.b #win;", "nice win"),
            ("plain words", "plain words"),
            ("caf\u{e9} #caf\u{e9}", "caf caf"),
            ("", ""),
            ("@only", ""),
            ("RT: great, day; #Monday", "great day Monday"),
            ("see https://t.co/x1 and HTTP://X.Y now", "see and now"),
            ("mail me at a@b.com", "mail me at a"),
            ("##double #", "double"),
            ("tabs\tand\nnewlines", "tabs and newlines"),
            ("ART RTX RT", "ART RTX"),
            ("just \u{1F600} emoji", "just emoji"),
            ("\u{e9}RT stays out", "stays out"),
        ];
        for (input, expected) in cases {
            assert_eq!(filter_text(input), expected, "input {input:?}");
        }
    }

    #[test]
    fn lowercase_switch() {
        let cfg = FilterConfig { lowercase: true };
        assert_eq!(filter_text_with("RT Hello #World", cfg), "hello world");
    }

    proptest! {
        #[test]
        fn idempotent(text in "[a-zRT@#:;,\"h/p.é😀 \\t]{0,40}") {
            let once = filter_text(&text);
            prop_assert_eq!(filter_text(&once), once.clone());
            prop_assert!(once.chars().all(|c| (' '..='~').contains(&c)));
        }
    }
}
