//! Deterministic structural similarity between two snippets of the same
//! language.
//!
//! The score blends a token-level view (Dice coefficient over bigrams of the
//! canonical token streams) with a control-flow view (multiset Jaccard over
//! control-keyword fingerprints). Both views are rename-invariant, so a
//! reconstruction that only differs in identifier names scores 1.0.

use core::fmt;

use serde::{Deserialize, Serialize};

use crate::lex::{canonicalize, control_fingerprint, CanonicalStream, CodeSnippet, LanguageId};
use crate::multiset::Multiset;

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct SimilarityScore(f64);

impl SimilarityScore {
    pub const ZERO: Self = Self(0.0);
    pub const ONE: Self = Self(1.0);

    /// Returns `None` unless `0 <= value <= 1`.
    pub fn new(value: f64) -> Option<Self> {
        (0.0..=1.0).contains(&value).then_some(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for SimilarityScore {
    type Error = SimilarityError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Self::new(value).ok_or(SimilarityError::OutOfRange(value))
    }
}

impl From<SimilarityScore> for f64 {
    fn from(score: SimilarityScore) -> f64 {
        score.0
    }
}

impl fmt::Display for SimilarityScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimilarityError {
    #[error("cannot compare {left} code with {right} code")]
    LanguageMismatch { left: LanguageId, right: LanguageId },
    #[error("similarity weights must be non-negative and sum to 1 (got {token} + {control})")]
    InvalidWeights { token: f64, control: f64 },
    #[error("similarity score {0} outside [0, 1]")]
    OutOfRange(f64),
}

/// Mixing weights for the token and control-flow sub-scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityWeights {
    token: f64,
    control: f64,
}

impl Default for SimilarityWeights {
    fn default() -> Self {
        Self {
            token: 0.5,
            control: 0.5,
        }
    }
}

impl SimilarityWeights {
    pub fn new(token: f64, control: f64) -> Result<Self, SimilarityError> {
        let ok = token >= 0.0 && control >= 0.0 && libm::fabs(token + control - 1.0) <= 1e-12;
        if ok {
            Ok(Self { token, control })
        } else {
            Err(SimilarityError::InvalidWeights { token, control })
        }
    }

    pub fn token(&self) -> f64 {
        self.token
    }

    pub fn control(&self) -> f64 {
        self.control
    }
}

/// Similarity with the default 0.5/0.5 weighting.
pub fn similarity(
    original: &CodeSnippet,
    candidate: &CodeSnippet,
) -> Result<SimilarityScore, SimilarityError> {
    similarity_weighted(original, candidate, SimilarityWeights::default())
}

pub fn similarity_weighted(
    original: &CodeSnippet,
    candidate: &CodeSnippet,
    weights: SimilarityWeights,
) -> Result<SimilarityScore, SimilarityError> {
    if original.language != candidate.language {
        return Err(SimilarityError::LanguageMismatch {
            left: original.language,
            right: candidate.language,
        });
    }
    let lang = original.language;
    let (ta, tb) = (original.tokens(), candidate.tokens());
    let dice = dice_bigrams(&canonicalize(&ta), &canonicalize(&tb));
    let jaccard = jaccard_multiset(
        &control_fingerprint(&ta, lang),
        &control_fingerprint(&tb, lang),
    );
    let value = weights.token * dice + weights.control * jaccard;
    // Weights may sum to 1 only within 1e-12.
    Ok(SimilarityScore(value.clamp(0.0, 1.0)))
}

/// Multiset Dice coefficient over adjacent-symbol bigrams.
pub fn dice_bigrams(a: &CanonicalStream, b: &CanonicalStream) -> f64 {
    dice_multiset(&a.bigrams(), &b.bigrams())
}

/// `2·|A ⊓ B| / (|A| + |B|)`; empty vs. empty is 1.
pub fn dice_multiset<T: Ord>(a: &Multiset<T>, b: &Multiset<T>) -> f64 {
    let total = a.len() + b.len();
    if total == 0 {
        return 1.0;
    }
    (2 * a.intersection_size(b)) as f64 / total as f64
}

/// `|A ⊓ B| / |A ⊔ B|` with min/max counts; empty vs. empty is 1.
pub fn jaccard_multiset<T: Ord>(a: &Multiset<T>, b: &Multiset<T>) -> f64 {
    let union = a.union_size(b);
    if union == 0 {
        return 1.0;
    }
    a.intersection_size(b) as f64 / union as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn py(src: &str) -> CodeSnippet {
        CodeSnippet::new(src, LanguageId::Python)
    }

    #[test]
    fn identity_is_one() {
        let c = py("def f(x):\n    if x:\n        return 1\n    return 2");
        assert_eq!(similarity(&c, &c).unwrap().value(), 1.0);
    }

    #[test]
    fn renamed_is_one() {
        let a = py("def add(a,b): return a+b");
        let b = py("def total(x,y): return x+y");
        assert_eq!(similarity(&a, &b).unwrap().value(), 1.0);
    }

    #[test]
    fn language_mismatch() {
        let a = py("x");
        let b = CodeSnippet::new("x", LanguageId::Go);
        assert!(matches!(
            similarity(&a, &b),
            Err(SimilarityError::LanguageMismatch { .. })
        ));
    }

    #[test]
    fn dice_examples() {
        let a: Multiset<&str> = vec!["xy", "xy", "yz"].into_iter().collect();
        let b: Multiset<&str> = vec!["xy", "zz"].into_iter().collect();
        assert!((dice_multiset(&a, &b) - 0.4).abs() < 1e-15);
        let c: Multiset<&str> = vec!["pq"].into_iter().collect();
        assert_eq!(dice_multiset(&a, &c), 0.0);
        assert_eq!(dice_multiset(&a, &a), 1.0);
        assert_eq!(
            dice_multiset::<&str>(&Multiset::new(), &Multiset::new()),
            1.0
        );
        assert_eq!(dice_multiset(&Multiset::new(), &a), 0.0);
    }

    #[test]
    fn jaccard_examples() {
        let a: Multiset<char> = vec!['p', 'p'].into_iter().collect();
        let b: Multiset<char> = vec!['p', 'q'].into_iter().collect();
        assert!((jaccard_multiset(&a, &b) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(jaccard_multiset(&a, &a), 1.0);
        assert_eq!(
            jaccard_multiset::<char>(&Multiset::new(), &Multiset::new()),
            1.0
        );
        assert_eq!(jaccard_multiset(&Multiset::new(), &a), 0.0);
    }

    #[test]
    fn short_streams_have_no_bigrams() {
        let one = canonicalize(&crate::lex::tokenize("x", LanguageId::Python));
        let two = canonicalize(&crate::lex::tokenize("x y", LanguageId::Python));
        assert_eq!(dice_bigrams(&one, &one), 1.0);
        assert_eq!(dice_bigrams(&one, &two), 0.0);
    }

    #[test]
    fn weights_validation() {
        assert!(SimilarityWeights::new(0.3, 0.7).is_ok());
        assert!(SimilarityWeights::new(0.5, 0.6).is_err());
        assert!(SimilarityWeights::new(-0.1, 1.1).is_err());
    }

    #[test]
    fn custom_weights_select_subscores() {
        let a = py("def f(): return 1");
        let b = py("def f():\n if 1:\n  return 1");
        let token_only =
            similarity_weighted(&a, &b, SimilarityWeights::new(1.0, 0.0).unwrap()).unwrap();
        let control_only =
            similarity_weighted(&a, &b, SimilarityWeights::new(0.0, 1.0).unwrap()).unwrap();
        assert!((token_only.value() - 0.8).abs() < 1e-12);
        assert!((control_only.value() - 0.4).abs() < 1e-12);
    }
}
