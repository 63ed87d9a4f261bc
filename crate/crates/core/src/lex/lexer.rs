use alloc::vec::Vec;

use super::keywords::is_reserved;
use super::{LanguageId, Token, TokenKind};

use TokenKind::{Operator as Op, Punct};

const PYTHON_OPS: &[(&str, TokenKind)] = &[
    ("**=", Op),
    ("//=", Op),
    (">>=", Op),
    ("<<=", Op),
    ("...", Op),
    ("**", Op),
    ("//", Op),
    ("<<", Op),
    (">>", Op),
    ("<=", Op),
    (">=", Op),
    ("==", Op),
    ("!=", Op),
    ("->", Op),
    (":=", Op),
    ("+=", Op),
    ("-=", Op),
    ("*=", Op),
    ("/=", Op),
    ("%=", Op),
    ("@=", Op),
    ("&=", Op),
    ("|=", Op),
    ("^=", Op),
    ("+", Op),
    ("-", Op),
    ("*", Op),
    ("/", Op),
    ("%", Op),
    ("@", Op),
    ("&", Op),
    ("|", Op),
    ("^", Op),
    ("~", Op),
    ("<", Op),
    (">", Op),
    ("=", Op),
    ("(", Punct),
    (")", Punct),
    ("[", Punct),
    ("]", Punct),
    ("{", Punct),
    ("}", Punct),
    (",", Punct),
    (":", Punct),
    (";", Punct),
    (".", Punct),
];

const RUBY_OPS: &[(&str, TokenKind)] = &[
    ("**=", Op),
    ("<=>", Op),
    ("===", Op),
    ("...", Op),
    ("||=", Op),
    ("&&=", Op),
    ("<<=", Op),
    (">>=", Op),
    ("**", Op),
    ("==", Op),
    ("!=", Op),
    ("=~", Op),
    ("!~", Op),
    ("&&", Op),
    ("||", Op),
    ("<=", Op),
    (">=", Op),
    ("<<", Op),
    (">>", Op),
    ("..", Op),
    ("+=", Op),
    ("-=", Op),
    ("*=", Op),
    ("/=", Op),
    ("%=", Op),
    ("|=", Op),
    ("&=", Op),
    ("^=", Op),
    ("->", Op),
    ("=>", Op),
    ("::", Op),
    ("&.", Op),
    ("+", Op),
    ("-", Op),
    ("*", Op),
    ("/", Op),
    ("%", Op),
    ("=", Op),
    ("<", Op),
    (">", Op),
    ("!", Op),
    ("&", Op),
    ("|", Op),
    ("^", Op),
    ("~", Op),
    ("?", Op),
    ("(", Punct),
    (")", Punct),
    ("[", Punct),
    ("]", Punct),
    ("{", Punct),
    ("}", Punct),
    (",", Punct),
    (":", Punct),
    (";", Punct),
    (".", Punct),
];

const GO_OPS: &[(&str, TokenKind)] = &[
    ("<<=", Op),
    (">>=", Op),
    ("&^=", Op),
    ("...", Op),
    (":=", Op),
    ("&&", Op),
    ("||", Op),
    ("<-", Op),
    ("++", Op),
    ("--", Op),
    ("==", Op),
    ("!=", Op),
    ("<=", Op),
    (">=", Op),
    ("<<", Op),
    (">>", Op),
    ("&^", Op),
    ("+=", Op),
    ("-=", Op),
    ("*=", Op),
    ("/=", Op),
    ("%=", Op),
    ("&=", Op),
    ("|=", Op),
    ("^=", Op),
    ("+", Op),
    ("-", Op),
    ("*", Op),
    ("/", Op),
    ("%", Op),
    ("&", Op),
    ("|", Op),
    ("^", Op),
    ("<", Op),
    (">", Op),
    ("=", Op),
    ("!", Op),
    ("~", Op),
    ("(", Punct),
    (")", Punct),
    ("[", Punct),
    ("]", Punct),
    ("{", Punct),
    ("}", Punct),
    (",", Punct),
    (":", Punct),
    (";", Punct),
    (".", Punct),
];

fn operator_table(language: LanguageId) -> &'static [(&'static str, TokenKind)] {
    match language {
        LanguageId::Python => PYTHON_OPS,
        LanguageId::Ruby => RUBY_OPS,
        LanguageId::Go => GO_OPS,
    }
}

/// Splits `source` into tokens, dropping whitespace and comments.
///
/// Lexing is total: bytes that start no known token are emitted as single
/// `Punct` tokens, and unterminated strings or block comments run to the end
/// of their line (or of the input, for multi-line forms).
pub fn tokenize(source: &str, language: LanguageId) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut pos = 0;
    while pos < source.len() {
        let rest = &source[pos..];
        let Some(c) = rest.chars().next() else { break };
        if c.is_whitespace() {
            pos += c.len_utf8();
            continue;
        }
        let at_line_start = source[..pos].ends_with('\n') || pos == 0;
        if let Some(n) = comment_len(rest, language, at_line_start) {
            pos += n;
            continue;
        }
        if let Some(n) = string_len(rest, language) {
            tokens.push(Token::new(TokenKind::StringLiteral, &rest[..n]));
            pos += n;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && next_is_digit(rest, 1)) {
            let n = number_len(rest, language);
            tokens.push(Token::new(TokenKind::NumberLiteral, &rest[..n]));
            pos += n;
            continue;
        }
        if let Some(n) = ident_len(rest, language) {
            let word = &rest[..n];
            let kind = if is_reserved(word, language) {
                TokenKind::Keyword
            } else {
                TokenKind::Identifier
            };
            tokens.push(Token::new(kind, word));
            pos += n;
            continue;
        }
        if let Some(&(op, kind)) = operator_table(language)
            .iter()
            .find(|(op, _)| rest.starts_with(op))
        {
            tokens.push(Token::new(kind, op));
            pos += op.len();
            continue;
        }
        tokens.push(Token::new(TokenKind::Punct, &rest[..c.len_utf8()]));
        pos += c.len_utf8();
    }
    tokens
}

fn next_is_digit(s: &str, at: usize) -> bool {
    s.as_bytes().get(at).is_some_and(u8::is_ascii_digit)
}

fn line_len(s: &str) -> usize {
    s.find('\n').unwrap_or(s.len())
}

fn comment_len(rest: &str, language: LanguageId, at_line_start: bool) -> Option<usize> {
    match language {
        LanguageId::Python => rest.starts_with('#').then(|| line_len(rest)),
        LanguageId::Ruby => {
            if rest.starts_with('#') {
                return Some(line_len(rest));
            }
            if at_line_start && rest.starts_with("=begin") {
                // Runs through the end of the `=end` line, or to end of input.
                let mut offset = line_len(rest);
                while offset < rest.len() {
                    let line_start = offset + 1;
                    let line = &rest[line_start.min(rest.len())..];
                    let len = line_len(line);
                    if line.starts_with("=end") {
                        return Some(line_start + len);
                    }
                    offset = line_start + len;
                }
                return Some(rest.len());
            }
            None
        }
        LanguageId::Go => {
            if rest.starts_with("//") {
                Some(line_len(rest))
            } else {
                rest.strip_prefix("/*")
                    .map(|body| body.find("*/").map_or(rest.len(), |end| end + 4))
            }
        }
    }
}

/// Length of a string literal starting at the head of `rest`, if one does.
fn string_len(rest: &str, language: LanguageId) -> Option<usize> {
    match language {
        LanguageId::Python => {
            let prefix = rest
                .bytes()
                .take(3)
                .take_while(|b| matches!(b, b'r' | b'R' | b'b' | b'B' | b'u' | b'U' | b'f' | b'F'))
                .count();
            if prefix > 2 {
                return None;
            }
            let body = &rest[prefix..];
            let quote = body.chars().next().filter(|&q| q == '"' || q == '\'')?;
            let triple = if quote == '"' { "\"\"\"" } else { "'''" };
            if body.starts_with(triple) {
                Some(prefix + 3 + closing_len(&body[3..], triple, true))
            } else {
                Some(prefix + 1 + quoted_len(&body[1..], quote, true, false))
            }
        }
        LanguageId::Ruby => {
            let quote = rest.chars().next().filter(|&q| q == '"' || q == '\'')?;
            Some(1 + quoted_len(&rest[1..], quote, true, true))
        }
        LanguageId::Go => match rest.chars().next()? {
            q @ ('"' | '\'') => Some(1 + quoted_len(&rest[1..], q, true, false)),
            '`' => Some(rest[1..].find('`').map_or(rest.len(), |end| end + 2)),
            _ => None,
        },
    }
}

/// Scans a single-delimiter string body; unterminated single-line strings stop
/// at the end of the line.
fn quoted_len(body: &str, quote: char, escapes: bool, multiline: bool) -> usize {
    let mut chars = body.char_indices();
    while let Some((i, c)) = chars.next() {
        if c == quote {
            return i + c.len_utf8();
        }
        if c == '\\' && escapes {
            chars.next();
            continue;
        }
        if c == '\n' && !multiline {
            return i;
        }
    }
    body.len()
}

fn closing_len(body: &str, delim: &str, escapes: bool) -> usize {
    let mut i = 0;
    while i < body.len() {
        let rest = &body[i..];
        if rest.starts_with(delim) {
            return i + delim.len();
        }
        let c = rest.chars().next().unwrap_or('\0');
        i += c.len_utf8();
        if c == '\\' && escapes {
            if let Some(next) = body[i..].chars().next() {
                i += next.len_utf8();
            }
        }
    }
    body.len()
}

fn number_len(rest: &str, language: LanguageId) -> usize {
    let bytes = rest.as_bytes();
    let digits = |from: usize, pred: fn(&u8) -> bool| {
        from + bytes[from..]
            .iter()
            .take_while(|b| pred(b) || **b == b'_')
            .count()
    };
    if bytes.len() > 1
        && bytes[0] == b'0'
        && matches!(bytes[1], b'x' | b'X' | b'o' | b'O' | b'b' | b'B')
    {
        return digits(2, u8::is_ascii_hexdigit);
    }
    let mut n = digits(0, u8::is_ascii_digit);
    if bytes.get(n) == Some(&b'.') && next_is_digit(rest, n + 1) {
        n = digits(n + 1, u8::is_ascii_digit);
    }
    if matches!(bytes.get(n), Some(b'e' | b'E')) {
        let sign = usize::from(matches!(bytes.get(n + 1), Some(b'+' | b'-')));
        if next_is_digit(rest, n + 1 + sign) {
            n = digits(n + 1 + sign, u8::is_ascii_digit);
        }
    }
    let imaginary = match language {
        LanguageId::Python => matches!(bytes.get(n), Some(b'j' | b'J')),
        LanguageId::Go => bytes.get(n) == Some(&b'i'),
        LanguageId::Ruby => matches!(bytes.get(n), Some(b'r' | b'i')),
    };
    n + usize::from(imaginary)
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn ident_len(rest: &str, language: LanguageId) -> Option<usize> {
    let mut sigil = 0;
    if language == LanguageId::Ruby {
        if rest.starts_with("@@") {
            sigil = 2;
        } else if rest.starts_with('@') || rest.starts_with('$') {
            sigil = 1;
        }
    }
    let body = &rest[sigil..];
    let first = body.chars().next()?;
    if !(first.is_alphabetic() || first == '_') {
        return None;
    }
    let mut n = sigil
        + body
            .char_indices()
            .find(|&(_, c)| !is_ident_char(c))
            .map_or(body.len(), |(i, _)| i);
    // Ruby predicate and bang methods: `empty?`, `save!`, `defined?`.
    if language == LanguageId::Ruby && sigil == 0 {
        let tail = rest.as_bytes();
        if matches!(tail.get(n), Some(b'?' | b'!')) && tail.get(n + 1) != Some(&b'=') {
            n += 1;
        }
    }
    Some(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::String;
    use alloc::vec;

    fn kinds(src: &str, lang: LanguageId) -> Vec<(TokenKind, String)> {
        tokenize(src, lang)
            .into_iter()
            .map(|t| (t.kind, t.text))
            .collect()
    }

    fn t(kind: TokenKind, text: &str) -> (TokenKind, String) {
        (kind, text.into())
    }

    use TokenKind::*;

    #[test]
    fn python_function() {
        let got = kinds("def add(a, b):\n    return a + b", LanguageId::Python);
        let want = vec![
            t(Keyword, "def"),
            t(Identifier, "add"),
            t(Punct, "("),
            t(Identifier, "a"),
            t(Punct, ","),
            t(Identifier, "b"),
            t(Punct, ")"),
            t(Punct, ":"),
            t(Keyword, "return"),
            t(Identifier, "a"),
            t(Operator, "+"),
            t(Identifier, "b"),
        ];
        assert_eq!(got, want);
    }

    #[test]
    fn ruby_comment_only() {
        assert!(tokenize("# comment only", LanguageId::Ruby).is_empty());
    }

    #[test]
    fn string_contents_not_relexed() {
        let got = kinds("x = \"a + b\"", LanguageId::Python);
        assert_eq!(
            got,
            vec![
                t(Identifier, "x"),
                t(Operator, "="),
                t(StringLiteral, "\"a + b\"")
            ]
        );
    }

    #[test]
    fn python_prefixed_and_triple_strings() {
        let got = kinds(
            "f'{x}' + rb\"\\\"\" + \"\"\"a\n\"b\"\n\"\"\"",
            LanguageId::Python,
        );
        assert_eq!(
            got,
            vec![
                t(StringLiteral, "f'{x}'"),
                t(Operator, "+"),
                t(StringLiteral, "rb\"\\\"\""),
                t(Operator, "+"),
                t(StringLiteral, "\"\"\"a\n\"b\"\n\"\"\""),
            ]
        );
    }

    #[test]
    fn go_comments_and_raw_strings() {
        let src = "/* block\n */ x := `raw\nstr` // tail\ny++";
        let got = kinds(src, LanguageId::Go);
        assert_eq!(
            got,
            vec![
                t(Identifier, "x"),
                t(Operator, ":="),
                t(StringLiteral, "`raw\nstr`"),
                t(Identifier, "y"),
                t(Operator, "++"),
            ]
        );
    }

    #[test]
    fn ruby_sigils_and_predicates() {
        let got = kinds("@count += 1 if list.empty? && x != y", LanguageId::Ruby);
        assert_eq!(
            got,
            vec![
                t(Identifier, "@count"),
                t(Operator, "+="),
                t(NumberLiteral, "1"),
                t(Keyword, "if"),
                t(Identifier, "list"),
                t(Punct, "."),
                t(Identifier, "empty?"),
                t(Operator, "&&"),
                t(Identifier, "x"),
                t(Operator, "!="),
                t(Identifier, "y"),
            ]
        );
    }

    #[test]
    fn ruby_block_comment() {
        let src = "=begin\nignored def\n=end\nputs 1";
        assert_eq!(
            kinds(src, LanguageId::Ruby),
            vec![t(Identifier, "puts"), t(NumberLiteral, "1")]
        );
    }

    #[test]
    fn numbers() {
        let got = kinds("0x1F 3.14 1e-9 2j .5 1_000", LanguageId::Python);
        let texts: Vec<_> = got.iter().map(|(_, s)| s.as_str()).collect();
        assert_eq!(texts, ["0x1F", "3.14", "1e-9", "2j", ".5", "1_000"]);
        assert!(got.iter().all(|(k, _)| *k == NumberLiteral));
        // Ruby ranges are not decimals.
        let got = kinds("1..5", LanguageId::Ruby);
        assert_eq!(
            got,
            vec![
                t(NumberLiteral, "1"),
                t(Operator, ".."),
                t(NumberLiteral, "5")
            ]
        );
    }

    #[test]
    fn unknown_bytes_become_punct() {
        let got = kinds("a $ b \\ ¤", LanguageId::Python);
        assert_eq!(
            got,
            vec![
                t(Identifier, "a"),
                t(Punct, "$"),
                t(Identifier, "b"),
                t(Punct, "\\"),
                t(Punct, "¤"),
            ]
        );
    }

    #[test]
    fn unterminated_string_stops_at_line_end() {
        let got = kinds("x = 'oops\ny", LanguageId::Python);
        assert_eq!(
            got,
            vec![
                t(Identifier, "x"),
                t(Operator, "="),
                t(StringLiteral, "'oops"),
                t(Identifier, "y")
            ]
        );
    }
}
