//! Tolerant lexing for Python, Ruby and Go, plus the canonical token streams and
//! control-keyword fingerprints that similarity scoring is built on.

mod canon;
mod keywords;
mod lexer;

use alloc::string::String;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

pub use canon::{
    canonicalize, control_fingerprint, CanonicalStream, Fingerprint, FingerprintSymbol, Symbol,
};
pub use keywords::{control_keywords, is_reserved, reserved_words};
pub use lexer::tokenize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LanguageId {
    Python,
    Ruby,
    Go,
}

impl LanguageId {
    pub const ALL: [LanguageId; 3] = [LanguageId::Python, LanguageId::Ruby, LanguageId::Go];

    /// Lowercase name, as substituted into prompts and code fences.
    pub fn name(self) -> &'static str {
        match self {
            LanguageId::Python => "python",
            LanguageId::Ruby => "ruby",
            LanguageId::Go => "go",
        }
    }

    /// Conventional source file extension, without the dot.
    pub fn extension(self) -> &'static str {
        match self {
            LanguageId::Python => "py",
            LanguageId::Ruby => "rb",
            LanguageId::Go => "go",
        }
    }
}

impl fmt::Display for LanguageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unsupported language `{0}` (expected python, ruby or go)")]
pub struct UnsupportedLanguage(pub String);

impl FromStr for LanguageId {
    type Err = UnsupportedLanguage;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "python" | "py" => Ok(LanguageId::Python),
            "ruby" | "rb" => Ok(LanguageId::Ruby),
            "go" | "golang" => Ok(LanguageId::Go),
            _ => Err(UnsupportedLanguage(s.into())),
        }
    }
}

/// A unit of source code together with the language it is written in.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CodeSnippet {
    pub source: String,
    pub language: LanguageId,
}

impl CodeSnippet {
    pub fn new(source: impl Into<String>, language: LanguageId) -> Self {
        Self {
            source: source.into(),
            language,
        }
    }

    /// True when the source is empty after stripping whitespace. Blank snippets
    /// are rejected before entering a rollout.
    pub fn is_blank(&self) -> bool {
        self.source.trim().is_empty()
    }

    pub fn tokens(&self) -> alloc::vec::Vec<Token> {
        tokenize(&self.source, self.language)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TokenKind {
    Keyword,
    Identifier,
    NumberLiteral,
    StringLiteral,
    Operator,
    Punct,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
}

impl Token {
    pub fn new(kind: TokenKind, text: impl Into<String>) -> Self {
        Self {
            kind,
            text: text.into(),
        }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} {}", self.kind, self.text)
    }
}
