//! Tweet normalization.
//!
//! Rules run in a fixed order: URLs, @-mentions, standalone numbers, emoji,
//! punctuation other than `#`. The text is lowercased and whitespace
//! collapsed. The function is idempotent.

use std::sync::LazyLock;

use regex::Regex;

static URL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)(?:https?://|www\.|\bt\.co/)\S*").unwrap());
static MENTION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"@[\p{L}\p{N}_]+").unwrap());

pub fn clean_text(raw: &str) -> String {
    let s = URL.replace_all(raw, " ");
    let s = MENTION.replace_all(&s, " ");
    let s = strip_standalone_numbers(&s);
    let s: String = s
        .chars()
        .map(|c| if is_emoji(c) { ' ' } else { c })
        .collect();
    // Lowercasing can emit combining marks (e.g. for U+0130), so it runs
    // before the punctuation filter.
    let s: String = s
        .to_lowercase()
        .chars()
        .map(|c| {
            if c.is_alphanumeric() || c.is_whitespace() || c == '#' {
                c
            } else {
                ' '
            }
        })
        .collect();
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '#'
}

/// Drop digit runs that are not glued to a letter, digit or `#`, so
/// `covid19` and `#covid19` survive while `123`, `3.5` and `(2020)` go.
fn strip_standalone_numbers(s: &str) -> String {
    let chars: Vec<char> = s.chars().collect();
    let mut out = String::with_capacity(s.len());
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let before = start.checked_sub(1).map(|j| chars[j]);
            let after = chars.get(i).copied();
            let glued = before.is_some_and(is_word_char) || after.is_some_and(is_word_char);
            if glued {
                out.extend(&chars[start..i]);
            } else {
                out.push(' ');
            }
        } else {
            out.push(chars[i]);
            i += 1;
        }
    }
    out
}

fn is_emoji(c: char) -> bool {
    matches!(c as u32,
        0x1F000..=0x1FAFF
        | 0x2600..=0x27BF
        | 0x2300..=0x23FF
        | 0x2B00..=0x2BFF
        | 0xFE00..=0xFE0F
        | 0x200D
        | 0x20E3
        | 0xE0020..=0xE007F)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_example() {
        assert_eq!(
            clean_text("Check https://t.co/x @bob 123 #chinavirus!!"),
            "check #chinavirus"
        );
    }

    #[test]
    fn trivial_inputs() {
        assert_eq!(clean_text(""), "");
        assert_eq!(clean_text("hello world"), "hello world");
    }

    #[test]
    fn keeps_digits_inside_words_and_hashtags() {
        assert_eq!(clean_text("#COVID19 cases: 1,200 in 2020 (covid19)"), "#covid19 cases in covid19");
    }

    #[test]
    fn emoji_and_mentions() {
        assert_eq!(clean_text("wow😷🙏 @who_is_this ok"), "wow ok");
        assert_eq!(clean_text("t.co/abc www.example.com/x HTTP://X.Y stay"), "stay");
    }

    #[test]
    fn idempotent_on_tricky_inputs() {
        for raw in ["abc-123", "a_1", "😀1😀", "#12 #a1!", "x.5 y", "3.5% of 10"] {
            let once = clean_text(raw);
            assert_eq!(clean_text(&once), once, "{raw:?}");
        }
    }
}
