use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

/// BLEU tokenization scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Tokenize {
    /// The standard mteval-v13a punctuation splitting.
    #[default]
    #[serde(rename = "13a")]
    ThirteenA,
    /// Whitespace tokens as-is.
    #[serde(rename = "none")]
    None,
}

impl Tokenize {
    pub fn name(self) -> &'static str {
        match self {
            Tokenize::ThirteenA => "13a",
            Tokenize::None => "none",
        }
    }

    pub fn apply(self, line: &str) -> String {
        match self {
            Tokenize::ThirteenA => tokenize_13a(line),
            Tokenize::None => line.to_owned(),
        }
    }
}

impl std::str::FromStr for Tokenize {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "13a" => Ok(Tokenize::ThirteenA),
            "none" => Ok(Tokenize::None),
            other => Err(crate::Error::Usage(format!("unknown tokenizer {other:?} (expected 13a or none)"))),
        }
    }
}

/// Whitespace as understood by Python's `str.split()`, which reference
/// scorers use: Unicode whitespace plus the ASCII information separators.
pub(crate) fn is_space(c: char) -> bool {
    c.is_whitespace() || ('\u{1c}'..='\u{1f}').contains(&c)
}

pub(crate) fn words(text: &str) -> impl Iterator<Item = &str> {
    text.split(is_space).filter(|w| !w.is_empty())
}

pub(crate) fn rstrip(text: &str) -> &str {
    text.trim_end_matches(is_space)
}

fn join_words(text: &str) -> String {
    words(text).collect::<Vec<_>>().join(" ")
}

struct Rules {
    symbols: Regex,
    period_comma_left: Regex,
    period_comma_right: Regex,
    dash_after_digit: Regex,
    possessive: Regex,
    possessive_end: Regex,
}

fn rules() -> &'static Rules {
    static RULES: OnceLock<Rules> = OnceLock::new();
    RULES.get_or_init(|| Rules {
        symbols: Regex::new(r"([{-~\[-` -&(-+:-@/])").unwrap(),
        period_comma_left: Regex::new(r"([^0-9])([.,])").unwrap(),
        period_comma_right: Regex::new(r"([.,])([^0-9])").unwrap(),
        dash_after_digit: Regex::new(r"([0-9])(-)").unwrap(),
        possessive: Regex::new(r"'s ").unwrap(),
        possessive_end: Regex::new(r"'s$").unwrap(),
    })
}

fn split_punctuation(padded: &str, possessives: bool) -> String {
    let r = rules();
    let mut s = r.symbols.replace_all(padded, " ${1} ").into_owned();
    if possessives {
        s = r.possessive.replace_all(&s, " 's ").into_owned();
        s = r.possessive_end.replace_all(&s, " 's").into_owned();
    }
    s = r.period_comma_left.replace_all(&s, "${1} ${2} ").into_owned();
    s = r.period_comma_right.replace_all(&s, " ${1} ${2}").into_owned();
    r.dash_after_digit.replace_all(&s, "${1} ${2} ").into_owned()
}

fn unescape_entities(line: &str) -> String {
    line.replace("&quot;", "\"")
        .replace("&amp;", "&")
        .replace("&lt;", "<")
        .replace("&gt;", ">")
}

/// mteval-v13a tokenization.
pub fn tokenize_13a(line: &str) -> String {
    let mut line = line.replace("<skipped>", "").replace("-\n", "").replace('\n', " ");
    if line.contains('&') {
        line = unescape_entities(&line);
    }
    join_words(&split_punctuation(&format!(" {line} "), false))
}

/// Tercom-style normalization used by TER when normalization is on.
pub fn tercom_normalize(sent: &str) -> String {
    let sent = unescape_entities(&sent.replace("\n-", "").replace('\n', " "));
    split_punctuation(&format!(" {sent} "), true)
}

/// Preprocessing applied by TER before whitespace splitting.
pub(crate) fn tercom_tokenize(sent: &str, case_sensitive: bool, normalized: bool) -> String {
    if sent.is_empty() {
        return String::new();
    }
    let mut s = if case_sensitive { sent.to_owned() } else { sent.to_lowercase() };
    if normalized {
        s = tercom_normalize(&s);
    }
    join_words(&s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_punctuation_but_not_numbers() {
        assert_eq!(tokenize_13a("Hello, world."), "Hello , world .");
        assert_eq!(tokenize_13a("It costs 3.5% or 12,500."), "It costs 3.5 % or 12,500 .");
        assert_eq!(tokenize_13a("ages 2-14"), "ages 2 - 14");
        assert_eq!(tokenize_13a("a &amp; b"), "a & b");
        assert_eq!(tokenize_13a("\"quoted\""), "\" quoted \"");
    }

    #[test]
    fn python_whitespace() {
        assert_eq!(words("a\u{1f}b  c").collect::<Vec<_>>(), vec!["a", "b", "c"]);
        assert_eq!(rstrip("x \t\n"), "x");
    }

    #[test]
    fn tercom_case_folding() {
        assert_eq!(tercom_tokenize("A  B", false, false), "a b");
        assert_eq!(tercom_tokenize("A  B", true, false), "A B");
        assert_eq!(tercom_tokenize("it's done.", true, true), "it 's done .");
        assert_eq!(tercom_tokenize("a &amp; b, 3.5 2-4 (x)", true, true), "a & b , 3.5 2 - 4 ( x )");
        assert_eq!(tercom_tokenize("John's", true, true), "John 's");
    }
}
