//! Rule-based word tokenizer.
//!
//! Rules, applied to each whitespace-separated chunk:
//!
//! 1. Leading detachable punctuation characters are split off one by one,
//!    each becoming its own token.
//! 2. If the remainder starts with `http://`, `https://` or `www.` it is a
//!    URL: only trailing characters from `.,;:!?)]}'"` are split off.
//! 3. Otherwise trailing detachable punctuation is split off one by one.
//!
//! Detachable punctuation is ASCII punctuation other than `@`, `#`, `_` and
//! `\`, so handles (`@user`) and hashtags (`#tag`) stay whole. Punctuation
//! inside a word (`don't`, `x.co`) is never split, and all non-ASCII
//! characters, emojis included, are kept as word material.

/// Bump when the rule set changes; persisted vocabularies record it.
pub const TOKENIZER_VERSION: u32 = 1;

fn is_detachable(c: char) -> bool {
    c.is_ascii_punctuation() && !matches!(c, '@' | '#' | '_' | '\\')
}

fn is_url_trailer(c: char) -> bool {
    matches!(c, '.' | ',' | ';' | ':' | '!' | '?' | ')' | ']' | '}' | '\'' | '"')
}

fn is_url(s: &str) -> bool {
    let lower = s.get(..8).unwrap_or(s).to_ascii_lowercase();
    lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.")
}

pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        split_chunk(chunk, &mut tokens);
    }
    tokens
}

fn split_chunk(chunk: &str, out: &mut Vec<String>) {
    let mut rest = chunk;
    while let Some(c) = rest.chars().next() {
        if !is_detachable(c) {
            break;
        }
        out.push(c.to_string());
        rest = &rest[c.len_utf8()..];
    }
    if rest.is_empty() {
        return;
    }

    let trailing: fn(char) -> bool = if is_url(rest) { is_url_trailer } else { is_detachable };
    let mut tail = Vec::new();
    while let Some(c) = rest.chars().next_back() {
        if !trailing(c) {
            break;
        }
        tail.push(c);
        rest = &rest[..rest.len() - c.len_utf8()];
    }
    if !rest.is_empty() {
        out.push(rest.to_string());
    }
    out.extend(tail.into_iter().rev().map(String::from));
}
