use std::sync::LazyLock;

use regex::Regex;

/// Replacement for every mention (`@name`).
pub const MENTION: &str = "@mention";
/// Replacement for every hashtag (`#topic`).
pub const HASHTAG: &str = "#hashtag";
/// Replacement for every `http://` or `https://` URL.
pub const LINK: &str = "http://link";

const SENTINELS: [&str; 3] = [MENTION, HASHTAG, LINK];

static URL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"https?://\S+").unwrap());
static MENTION_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(^|\s)@\w+").unwrap());
static HASHTAG_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(^|\s)#\w+").unwrap());

/// Replaces URLs, mentions and hashtags with their sentinel forms.
///
/// URLs go first so that a `#fragment` inside a link is swallowed by the
/// link sentinel instead of being read as a hashtag.
pub fn preprocess(raw: &str) -> String {
    let text = URL.replace_all(raw, LINK);
    let text = MENTION_RE.replace_all(&text, format!("${{1}}{MENTION}").as_str());
    let text = HASHTAG_RE.replace_all(&text, format!("${{1}}{HASHTAG}").as_str());
    text.into_owned()
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}'
                | '\u{2019}'
                | '\u{201C}'
                | '\u{201D}'
                | '\u{2026}'
                | '\u{2013}'
                | '\u{2014}'
                | '\u{00AB}'
                | '\u{00BB}'
                | '\u{00A1}'
                | '\u{00BF}'
        )
}

/// Splits preprocessed text into lowercase word tokens.
///
/// Edge punctuation is stripped, internal punctuation (`let's`) is kept and
/// the three sentinels survive intact even when wrapped in punctuation.
pub fn tokenize(clean: &str) -> Vec<String> {
    clean.split_whitespace().filter_map(normalize_token).collect()
}

fn normalize_token(raw: &str) -> Option<String> {
    let lower = raw.to_lowercase();
    let core = lower.trim_end_matches(is_punct);
    for sentinel in SENTINELS {
        if let Some(prefix) = core.strip_suffix(sentinel) {
            if prefix.chars().all(is_punct) {
                return Some(sentinel.to_string());
            }
        }
    }
    let word = core.trim_start_matches(is_punct);
    (!word.is_empty()).then(|| word.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn replaces_all_three_patterns() {
        assert_eq!(
            preprocess("Win this @JoeBiden #Vote https://t.co/ab1"),
            "Win this @mention #hashtag http://link"
        );
    }

    #[test]
    fn leaves_plain_text_alone() {
        assert_eq!(preprocess(""), "");
        assert_eq!(preprocess("We need a leader"), "We need a leader");
        assert_eq!(preprocess("mail me at a@b.org"), "mail me at a@b.org");
    }

    #[test]
    fn url_fragment_is_not_a_hashtag() {
        assert_eq!(preprocess("see http://x.org/#intro now"), "see http://link now");
    }

    #[test]
    fn tokenizes_examples() {
        assert_eq!(tokenize("We need a leader!"), ["we", "need", "a", "leader"]);
        assert_eq!(
            tokenize("Let's win this together! http://link"),
            ["let's", "win", "this", "together", "http://link"]
        );
        assert!(tokenize("  ...  ").is_empty());
    }

    #[test]
    fn sentinels_survive_punctuation() {
        assert_eq!(
            tokenize("(@mention) #hashtag, http://link."),
            ["@mention", "#hashtag", "http://link"]
        );
        assert_eq!(tokenize("@MENTION"), ["@mention"]);
    }

    #[test]
    fn emoji_pass_through() {
        assert_eq!(tokenize("great 🔥 day"), ["great", "🔥", "day"]);
    }

    fn tweetish() -> impl Strategy<Value = String> {
        let piece = prop_oneof![
            "[A-Za-z']{1,8}",
            "@[A-Za-z0-9_]{1,6}",
            "#[A-Za-z0-9_]{1,6}",
            "https?://[a-z./#?=]{1,10}",
            "[!?.,:;()\"]{1,3}",
            "[\\PC]{1,4}",
        ];
        prop::collection::vec((piece, prop_oneof![Just(" "), Just(""), Just("\n")]), 0..12)
            .prop_map(|parts| parts.into_iter().map(|(p, sep)| p + sep).collect())
    }

    proptest! {
        #[test]
        fn preprocess_is_idempotent(raw in tweetish()) {
            let once = preprocess(&raw);
            prop_assert_eq!(preprocess(&once), once);
        }

        #[test]
        fn tokens_are_lowercase_without_whitespace(raw in tweetish()) {
            for token in tokenize(&preprocess(&raw)) {
                prop_assert!(!token.is_empty());
                prop_assert!(!token.chars().any(char::is_whitespace));
                prop_assert_eq!(token.to_lowercase(), token.clone());
            }
        }

        #[test]
        fn retokenizing_is_stable(raw in tweetish()) {
            let tokens = tokenize(&preprocess(&raw));
            prop_assert_eq!(tokenize(&tokens.join(" ")), tokens);
        }
    }
}
