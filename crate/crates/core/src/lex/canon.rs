use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use super::keywords::control_keyword;
use super::{LanguageId, Token, TokenKind};
use crate::multiset::Multiset;

/// One element of a canonical token stream.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Symbol {
    /// `ID<n>`: the n-th distinct identifier, numbered by first occurrence.
    Placeholder(usize),
    /// Any numeric literal.
    Num,
    /// Any string literal.
    Str,
    /// Keywords, operators and punctuation, unchanged.
    Verbatim(String),
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Placeholder(n) => write!(f, "ID{n}"),
            Symbol::Num => f.write_str("NUM"),
            Symbol::Str => f.write_str("STR"),
            Symbol::Verbatim(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CanonicalStream {
    pub symbols: Vec<Symbol>,
}

impl CanonicalStream {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Adjacent symbol pairs as a multiset; streams shorter than two symbols
    /// yield the empty multiset.
    pub fn bigrams(&self) -> Multiset<(&Symbol, &Symbol)> {
        self.symbols.windows(2).map(|w| (&w[0], &w[1])).collect()
    }

    /// Renders the stream back into lexable source: placeholders as `ID<n>`,
    /// `NUM` as `0`, `STR` as `""`, everything space-separated. Re-lexing and
    /// re-canonicalizing the rendering reproduces this stream.
    pub fn to_source(&self) -> String {
        let mut out = String::new();
        for (i, sym) in self.symbols.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            match sym {
                Symbol::Num => out.push('0'),
                Symbol::Str => out.push_str("\"\""),
                other => out.push_str(&other.to_string()),
            }
        }
        out
    }
}

impl fmt::Display for CanonicalStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, sym) in self.symbols.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{sym}")?;
        }
        Ok(())
    }
}

/// Replaces identifiers with first-occurrence placeholders and folds literals.
pub fn canonicalize(tokens: &[Token]) -> CanonicalStream {
    let mut names: BTreeMap<&str, usize> = BTreeMap::new();
    let symbols = tokens
        .iter()
        .map(|tok| match tok.kind {
            TokenKind::Identifier => {
                let next = names.len();
                Symbol::Placeholder(*names.entry(tok.text.as_str()).or_insert(next))
            }
            TokenKind::NumberLiteral => Symbol::Num,
            TokenKind::StringLiteral => Symbol::Str,
            TokenKind::Keyword | TokenKind::Operator | TokenKind::Punct => {
                Symbol::Verbatim(tok.text.clone())
            }
        })
        .collect();
    CanonicalStream { symbols }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FingerprintSymbol {
    Start,
    Keyword(&'static str),
    End,
}

impl fmt::Display for FingerprintSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FingerprintSymbol::Start => f.write_str("⟨S⟩"),
            FingerprintSymbol::Keyword(k) => f.write_str(k),
            FingerprintSymbol::End => f.write_str("⟨E⟩"),
        }
    }
}

pub type Fingerprint = Multiset<(FingerprintSymbol, FingerprintSymbol)>;

/// Bigram multiset over the control-keyword subsequence, bracketed by start
/// and end sentinels.
pub fn control_fingerprint(tokens: &[Token], language: LanguageId) -> Fingerprint {
    let mut seq = Vec::with_capacity(tokens.len() / 4 + 2);
    seq.push(FingerprintSymbol::Start);
    seq.extend(
        tokens
            .iter()
            .filter(|t| t.kind == TokenKind::Keyword)
            .filter_map(|t| control_keyword(&t.text, language))
            .map(FingerprintSymbol::Keyword),
    );
    seq.push(FingerprintSymbol::End);
    seq.windows(2).map(|w| (w[0], w[1])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lex::tokenize;
    use alloc::vec;
    use FingerprintSymbol::{End, Keyword as K, Start};

    fn canon(src: &str, lang: LanguageId) -> String {
        canonicalize(&tokenize(src, lang)).to_string()
    }

    #[test]
    fn first_occurrence_numbering() {
        assert_eq!(
            canon("return a + b", LanguageId::Python),
            "return ID0 + ID1"
        );
        assert_eq!(
            canon("return b + a + b", LanguageId::Python),
            "return ID0 + ID1 + ID0"
        );
    }

    #[test]
    fn literal_folding() {
        assert_eq!(canon("x = 42", LanguageId::Python), "ID0 = NUM");
        assert_eq!(
            canon("s := \"hi\" + `raw`", LanguageId::Go),
            "ID0 := STR + STR"
        );
    }

    #[test]
    fn empty_stream() {
        assert!(canonicalize(&[]).is_empty());
        assert!(canonicalize(&[]).bigrams().is_empty());
    }

    #[test]
    fn rerender_is_stable() {
        let src = "def f(x, y=3):\n    return x * 'a' + y";
        let once = canonicalize(&tokenize(src, LanguageId::Python));
        let twice = canonicalize(&tokenize(&once.to_source(), LanguageId::Python));
        assert_eq!(once, twice);
    }

    #[test]
    fn fingerprint_simple_function() {
        let fp = control_fingerprint(
            &tokenize("def f():\n return 1", LanguageId::Python),
            LanguageId::Python,
        );
        let want: Fingerprint = vec![
            (Start, K("def")),
            (K("def"), K("return")),
            (K("return"), End),
        ]
        .into_iter()
        .collect();
        assert_eq!(fp, want);
    }

    #[test]
    fn fingerprint_without_control_keywords() {
        let fp = control_fingerprint(
            &tokenize("x = y + 1", LanguageId::Python),
            LanguageId::Python,
        );
        assert_eq!(fp.len(), 1);
        assert_eq!(fp.count(&(Start, End)), 1);
    }

    #[test]
    fn fingerprint_repeated_keyword() {
        let fp = control_fingerprint(
            &tokenize("if x:\n return 1\nreturn 0", LanguageId::Python),
            LanguageId::Python,
        );
        let want: Fingerprint = vec![
            (Start, K("if")),
            (K("if"), K("return")),
            (K("return"), K("return")),
            (K("return"), End),
        ]
        .into_iter()
        .collect();
        assert_eq!(fp, want);
    }

    #[test]
    fn ruby_end_is_a_control_keyword() {
        let fp = control_fingerprint(
            &tokenize("def f\n  1\nend", LanguageId::Ruby),
            LanguageId::Ruby,
        );
        assert_eq!(fp.count(&(K("def"), K("end"))), 1);
    }
}
