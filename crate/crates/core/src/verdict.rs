//! Extraction of `<verification>true|false</verification>` verdict tags.

use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use crate::model::Verdict;

// Tag names are literal; the body is case-insensitive and may be padded.
static TAG: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"<verification>\s*((?i:true|false))\s*</verification>").expect("static regex")
});

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ParseFailure {
    #[error("no well-formed verification tag")]
    NoTag,
    #[error("negative verdict without an explanation")]
    MissingExplanation,
}

/// A verdict read from a response, with the text that follows the tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedVerdict {
    pub verdict: Verdict,
    pub explanation: String,
}

/// Finds the first well-formed verdict tag in `response`.
///
/// Only `Positive` or `Negative` come back on success. A negative tag must be
/// accompanied by some text (after the tag, or failing that before it) to
/// serve as the error description.
pub fn parse_verdict(response: &str) -> Result<ParsedVerdict, ParseFailure> {
    let caps = TAG.captures(response).ok_or(ParseFailure::NoTag)?;
    let whole = caps.get(0).expect("group 0");
    let positive = caps[1].eq_ignore_ascii_case("true");
    let explanation = response[whole.end()..].trim();
    if positive {
        return Ok(ParsedVerdict {
            verdict: Verdict::Positive,
            explanation: explanation.to_string(),
        });
    }
    let explanation = if explanation.is_empty() {
        response[..whole.start()].trim()
    } else {
        explanation
    };
    if explanation.is_empty() {
        return Err(ParseFailure::MissingExplanation);
    }
    Ok(ParsedVerdict {
        verdict: Verdict::Negative,
        explanation: explanation.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negative_with_explanation() {
        let parsed = parse_verdict(
            "<verification>false</verification> The bilinear relation is computed with a sign error.",
        )
        .unwrap();
        assert_eq!(parsed.verdict, Verdict::Negative);
        assert!(parsed.explanation.starts_with("The bilinear relation"));
    }

    #[test]
    fn bare_positive() {
        let parsed = parse_verdict("<verification>true</verification>").unwrap();
        assert_eq!(parsed.verdict, Verdict::Positive);
        assert_eq!(parsed.explanation, "");
    }

    #[test]
    fn padded_uppercase_body() {
        let parsed = parse_verdict("I think <verification> TRUE </verification> minor typo noted").unwrap();
        assert_eq!(parsed.verdict, Verdict::Positive);
        assert_eq!(parsed.explanation, "minor typo noted");
    }

    #[test]
    fn first_occurrence_wins() {
        let parsed =
            parse_verdict("<verification>false</verification> x <verification>true</verification>").unwrap();
        assert_eq!(parsed.verdict, Verdict::Negative);
        let parsed =
            parse_verdict("<verification>maybe</verification> <verification>true</verification>").unwrap();
        assert_eq!(parsed.verdict, Verdict::Positive);
    }

    #[test]
    fn failures() {
        assert_eq!(parse_verdict(""), Err(ParseFailure::NoTag));
        assert_eq!(parse_verdict("verification: true"), Err(ParseFailure::NoTag));
        assert_eq!(parse_verdict("<verification>yes</verification>"), Err(ParseFailure::NoTag));
        assert_eq!(parse_verdict("<verification>true"), Err(ParseFailure::NoTag));
        assert_eq!(
            parse_verdict("<verification>false</verification>"),
            Err(ParseFailure::MissingExplanation)
        );
        assert_eq!(
            parse_verdict("Step 3 is wrong. <verification>false</verification>").unwrap().explanation,
            "Step 3 is wrong."
        );
    }
}
