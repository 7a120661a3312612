//! Post-processing of raw generator output.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

static NUMBERING: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?:\(?\d{1,3}[.):]\)?|[-*•·])\s+").expect("valid regex"));
static USER_PREFIX: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)^user\s*:\s*").expect("valid regex"));
static TRAILING_PAREN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"([.!?])\s*\([^()]*\)\s*$").expect("valid regex"));
static WHITESPACE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\s+").expect("valid regex"));

const QUOTE_PAIRS: [(char, char); 5] = [('"', '"'), ('\'', '\''), ('“', '”'), ('‘', '’'), ('`', '`')];

/// Individually toggleable cleanup rules.
///
/// The default is the minimal set (quotes and list numbering); the Refiner
/// is expected to learn the remaining repairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleanupRules {
    pub strip_quotes: bool,
    pub strip_numbering: bool,
    pub strip_user_prefix: bool,
    pub strip_trailing_parenthetical: bool,
    pub collapse_whitespace: bool,
}

impl Default for CleanupRules {
    fn default() -> Self {
        Self {
            strip_quotes: true,
            strip_numbering: true,
            strip_user_prefix: false,
            strip_trailing_parenthetical: false,
            collapse_whitespace: false,
        }
    }
}

impl CleanupRules {
    pub fn all() -> Self {
        Self {
            strip_quotes: true,
            strip_numbering: true,
            strip_user_prefix: true,
            strip_trailing_parenthetical: true,
            collapse_whitespace: true,
        }
    }

    pub fn none() -> Self {
        Self {
            strip_quotes: false,
            strip_numbering: false,
            strip_user_prefix: false,
            strip_trailing_parenthetical: false,
            collapse_whitespace: false,
        }
    }

    fn pass(&self, text: &str) -> String {
        let mut s = text.trim().to_string();
        if self.collapse_whitespace {
            s = WHITESPACE.replace_all(&s, " ").into_owned();
        }
        if self.strip_numbering {
            s = NUMBERING.replace(&s, "").trim().to_string();
        }
        if self.strip_user_prefix {
            s = USER_PREFIX.replace(&s, "").trim().to_string();
        }
        if self.strip_quotes {
            let mut chars = s.chars();
            if let (Some(first), Some(last)) = (chars.next(), chars.next_back()) {
                if QUOTE_PAIRS.contains(&(first, last)) {
                    s = chars.as_str().trim().to_string();
                }
            }
        }
        if self.strip_trailing_parenthetical {
            s = TRAILING_PAREN.replace(&s, "$1").trim().to_string();
        }
        s
    }

    /// Apply the enabled rules until the text stops changing.
    pub fn apply(&self, text: &str) -> String {
        let mut current = self.pass(text);
        loop {
            let next = self.pass(&current);
            if next == current {
                return current;
            }
            current = next;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_rules() {
        let r = CleanupRules::default();
        assert_eq!(r.apply("1. \"Freeze my account\""), "Freeze my account");
        assert_eq!(r.apply("- block my card"), "block my card");
        assert_eq!(r.apply("User: hi"), "User: hi");
    }

    #[test]
    fn full_rules_on_llm_artifacts() {
        let r = CleanupRules::all();
        assert_eq!(
            r.apply("User: I want to set a timer for 60 minutes.  Is that possible? (Note: This utterance also indicates a preference.)"),
            "I want to set a timer for 60 minutes. Is that possible?"
        );
        assert_eq!(
            r.apply("3) \"User: Can you freeze my account?\""),
            "Can you freeze my account?"
        );
        // parenthetical not after a terminator stays
        assert_eq!(r.apply("book a table (for two)"), "book a table (for two)");
        assert_eq!(r.apply("\"\""), "");
    }

    #[test]
    fn numbers_that_are_content_survive() {
        let r = CleanupRules::default();
        assert_eq!(r.apply("401k rollover please"), "401k rollover please");
        assert_eq!(r.apply("2.5 cups to grams"), "2.5 cups to grams");
    }

    proptest! {
        #[test]
        fn cleanup_idempotent(s in "[ a-zA-Z0-9.:()\"'*-]{0,40}", flags in any::<[bool; 5]>()) {
            let r = CleanupRules {
                strip_quotes: flags[0],
                strip_numbering: flags[1],
                strip_user_prefix: flags[2],
                strip_trailing_parenthetical: flags[3],
                collapse_whitespace: flags[4],
            };
            let once = r.apply(&s);
            prop_assert_eq!(r.apply(&once), once);
        }
    }
}
