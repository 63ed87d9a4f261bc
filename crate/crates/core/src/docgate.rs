//! Extraction, structural validation and rewriting of generated documentation.
//!
//! A raw stage-1 generation is reduced to the text between its first
//! `<doc>`/`</doc>` pair, checked line by line against the per-language
//! documentation layout, and then either rejected, truncated at the end of
//! the matched structure, or accepted as is. The outcome sets the format
//! reward: 0 for `Invalid`, 0.5 for `Redundant`, 1 for `Exact`.

use alloc::format;
use alloc::string::String;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::lex::LanguageId;

pub const OPEN_TAG: &str = "<doc>";
pub const CLOSE_TAG: &str = "</doc>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DocVerdict {
    /// Missing tags or unmet structural constraints.
    Invalid,
    /// Structure matched but text continues past the matched span.
    Redundant,
    /// Content ends exactly at the matched span (modulo trailing whitespace).
    Exact,
}

impl DocVerdict {
    pub fn format_reward(self) -> f64 {
        match self {
            DocVerdict::Invalid => 0.0,
            DocVerdict::Redundant => 0.5,
            DocVerdict::Exact => 1.0,
        }
    }

    pub fn is_valid(self) -> bool {
        self != DocVerdict::Invalid
    }
}

impl fmt::Display for DocVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DocVerdict::Invalid => "Invalid",
            DocVerdict::Redundant => "Redundant",
            DocVerdict::Exact => "Exact",
        })
    }
}

impl core::str::FromStr for DocVerdict {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "Invalid" => Ok(DocVerdict::Invalid),
            "Redundant" => Ok(DocVerdict::Redundant),
            "Exact" => Ok(DocVerdict::Exact),
            other => Err(format!("unknown verdict `{other}`")),
        }
    }
}

/// Byte offsets of a structural match inside extracted content.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StructureMatch {
    /// Start of the `def`/`func` line.
    pub definition_start: usize,
    /// End of the matched structure.
    pub end: usize,
}

/// A gated documentation candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatedDoc {
    raw: String,
    extracted: Option<String>,
    rewritten: Option<String>,
    verdict: DocVerdict,
    format_reward: f64,
    language: LanguageId,
    definition_start: Option<usize>,
}

impl GatedDoc {
    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn extracted(&self) -> Option<&str> {
        self.extracted.as_deref()
    }

    /// Present iff the verdict is not `Invalid`.
    pub fn rewritten(&self) -> Option<&str> {
        self.rewritten.as_deref()
    }

    pub fn verdict(&self) -> DocVerdict {
        self.verdict
    }

    pub fn format_reward(&self) -> f64 {
        self.format_reward
    }

    pub fn language(&self) -> LanguageId {
        self.language
    }

    /// The rewritten doc from its definition line onwards: the part of the
    /// documentation that is also the head of the reconstructed function.
    pub fn signature_block(&self) -> Option<&str> {
        let doc = self.rewritten.as_deref()?;
        doc.get(self.definition_start?..)
    }
}

/// Content between the first `<doc>` and the first `</doc>` after it, with
/// leading whitespace-only lines removed.
pub fn extract_tagged(raw: &str) -> Option<&str> {
    let open = raw.find(OPEN_TAG)? + OPEN_TAG.len();
    let close = open + raw[open..].find(CLOSE_TAG)?;
    let inner = &raw[open..close];
    let lead = inner.len() - inner.trim_start().len();
    let cut = inner[..lead].rfind('\n').map_or(0, |i| i + 1);
    Some(&inner[cut..])
}

pub fn wrap_tagged(doc: &str) -> String {
    format!("{OPEN_TAG}{doc}{CLOSE_TAG}")
}

/// End offset of the documentation structure in `content`, if it matches.
pub fn check_structure(content: &str, language: LanguageId) -> Option<usize> {
    match_structure(content, language).map(|m| m.end)
}

pub fn match_structure(content: &str, language: LanguageId) -> Option<StructureMatch> {
    match language {
        LanguageId::Python => match_python(content),
        LanguageId::Ruby => match_ruby(content),
        LanguageId::Go => match_go(content),
    }
}

pub fn gate(raw: &str, language: LanguageId) -> GatedDoc {
    let mut doc = GatedDoc {
        raw: raw.into(),
        extracted: None,
        rewritten: None,
        verdict: DocVerdict::Invalid,
        format_reward: 0.0,
        language,
        definition_start: None,
    };
    let Some(content) = extract_tagged(raw) else {
        return doc;
    };
    doc.extracted = Some(content.into());
    let Some(m) = match_structure(content, language) else {
        return doc;
    };
    let (verdict, rewritten) = if content[m.end..].trim().is_empty() {
        (DocVerdict::Exact, content)
    } else {
        (DocVerdict::Redundant, &content[..m.end])
    };
    doc.verdict = verdict;
    doc.format_reward = verdict.format_reward();
    doc.rewritten = Some(rewritten.into());
    doc.definition_start = Some(m.definition_start);
    doc
}

#[derive(Debug, Clone, Copy)]
struct Line<'a> {
    start: usize,
    text: &'a str,
    /// Offset just past the line terminator, or the content length.
    next: usize,
}

impl Line<'_> {
    fn end(&self) -> usize {
        self.start + self.text.len()
    }

    fn is_blank(&self) -> bool {
        self.text.trim().is_empty()
    }
}

fn lines(content: &str) -> impl Iterator<Item = Line<'_>> {
    let mut start = 0;
    core::iter::from_fn(move || {
        if start >= content.len() {
            return None;
        }
        let rest = &content[start..];
        let (len, term) = match rest.find('\n') {
            Some(i) => (i, 1),
            None => (rest.len(), 0),
        };
        let mut text = &rest[..len];
        if term == 1 {
            text = text.strip_suffix('\r').unwrap_or(text);
        }
        let line = Line {
            start,
            text,
            next: start + len + term,
        };
        start = line.next;
        Some(line)
    })
}

/// Span end for layouts that stop at a definition line: the line itself, its
/// terminator, and the leading indentation of the following line.
fn through_next_indent(content: &str, line: Line<'_>) -> usize {
    if line.next == line.end() {
        return line.end();
    }
    let after = &content[line.next..];
    let indent = after.len() - after.trim_start_matches([' ', '\t']).len();
    line.next + indent
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_alphabetic() || c == '_')
        && chars.all(|c| c.is_alphanumeric() || c == '_')
}

/// Splits a leading identifier off `s`.
fn take_ident(s: &str) -> Option<(&str, &str)> {
    let end = s
        .char_indices()
        .find(|&(_, c)| !(c.is_alphanumeric() || c == '_'))
        .map_or(s.len(), |(i, _)| i);
    let (name, rest) = s.split_at(end);
    is_ident(name).then_some((name, rest))
}

/// `keyword` followed by at least one space or tab.
fn strip_keyword<'a>(line: &'a str, keyword: &str) -> Option<&'a str> {
    let rest = line.strip_prefix(keyword)?;
    let trimmed = rest.trim_start_matches([' ', '\t']);
    (trimmed.len() < rest.len()).then_some(trimmed)
}

/// Classification of a comment line body (text after the comment marker).
enum CommentLine {
    Empty,
    Description,
    Example,
}

fn classify_comment(body: &str) -> CommentLine {
    let body = body.trim();
    if body.starts_with(">>>") {
        CommentLine::Example
    } else if body.is_empty() {
        CommentLine::Empty
    } else {
        CommentLine::Description
    }
}

/// Tracks the description-then-example ordering inside a doc comment block.
#[derive(Default)]
struct DocBody {
    described: bool,
    exemplified: bool,
}

impl DocBody {
    /// Returns false when an example shows up before any description.
    fn feed(&mut self, line: CommentLine) -> bool {
        match line {
            CommentLine::Empty => true,
            CommentLine::Description => {
                // Lines after the first example are expected outputs.
                if !self.exemplified {
                    self.described = true;
                }
                true
            }
            CommentLine::Example => {
                self.exemplified = true;
                self.described
            }
        }
    }

    fn complete(&self) -> bool {
        self.described && self.exemplified
    }
}

fn is_python_import(text: &str) -> bool {
    let text = text.trim_end();
    if let Some(rest) = strip_keyword(text, "import") {
        return !rest.is_empty();
    }
    strip_keyword(text, "from")
        .and_then(|rest| rest.split_once([' ', '\t']))
        .and_then(|(module, tail)| {
            strip_keyword(tail.trim_start(), "import").map(|names| (module, names))
        })
        .is_some_and(|(module, names)| !module.is_empty() && !names.is_empty())
}

fn is_python_def(text: &str) -> bool {
    let text = text.trim_end();
    let text = strip_keyword(text, "async").unwrap_or(text);
    let Some(rest) = strip_keyword(text, "def") else {
        return false;
    };
    let Some((_, rest)) = take_ident(rest) else {
        return false;
    };
    let Some(params) = rest.trim_start().strip_prefix('(') else {
        return false;
    };
    let Some(close) = params.rfind(')') else {
        return false;
    };
    let tail = params[close + 1..].trim();
    tail == ":" || (tail.starts_with("->") && tail.ends_with(':') && tail.len() > 3)
}

const TRIPLE_QUOTE: &str = "\"\"\"";

fn match_python(content: &str) -> Option<StructureMatch> {
    let mut lines = lines(content);
    let def = loop {
        let line = lines.next()?;
        if line.is_blank() || is_python_import(line.text) {
            continue;
        }
        if is_python_def(line.text) {
            break line;
        }
        return None;
    };
    let open = lines.find(|l| !l.is_blank())?;
    let after_open = open.text.strip_prefix("    ")?.strip_prefix(TRIPLE_QUOTE)?;
    if after_open.contains(TRIPLE_QUOTE) {
        // One-line docstring: nowhere to put an example.
        return None;
    }
    let mut body = DocBody::default();
    if !body.feed(classify_comment(after_open)) {
        return None;
    }
    for line in lines {
        if let Some(idx) = line.text.find(TRIPLE_QUOTE) {
            if !body.feed(classify_comment(&line.text[..idx])) || !body.complete() {
                return None;
            }
            return Some(StructureMatch {
                definition_start: def.start,
                end: line.start + idx + TRIPLE_QUOTE.len(),
            });
        }
        if !body.feed(classify_comment(line.text)) {
            return None;
        }
    }
    None
}

fn is_ruby_require(text: &str) -> bool {
    let text = text.trim_end();
    let rest = strip_keyword(text, "require")
        .or_else(|| strip_keyword(text, "require_relative"))
        .unwrap_or("");
    rest.len() >= 2
        && ((rest.starts_with('\'') && rest.ends_with('\''))
            || (rest.starts_with('"') && rest.ends_with('"')))
}

fn is_ruby_def(text: &str) -> bool {
    let text = text.trim_end();
    let Some(rest) = strip_keyword(text, "def") else {
        return false;
    };
    let rest = rest.strip_prefix("self.").unwrap_or(rest);
    let Some((_, rest)) = take_ident(rest) else {
        return false;
    };
    let rest = rest.strip_prefix(['?', '!', '=']).unwrap_or(rest);
    let rest = rest.trim_start();
    rest.is_empty() || (rest.starts_with('(') && rest.ends_with(')'))
}

fn match_ruby(content: &str) -> Option<StructureMatch> {
    let mut body = DocBody::default();
    let mut in_comments = false;
    for line in lines(content) {
        if line.is_blank() {
            continue;
        }
        let trimmed = line.text.trim_start();
        if let Some(comment) = trimmed.strip_prefix('#') {
            in_comments = true;
            if !body.feed(classify_comment(comment)) {
                return None;
            }
            continue;
        }
        if !in_comments && is_ruby_require(line.text) {
            continue;
        }
        if is_ruby_def(line.text) && body.complete() {
            return Some(StructureMatch {
                definition_start: line.start,
                end: through_next_indent(content, line),
            });
        }
        return None;
    }
    None
}

fn is_go_package(text: &str) -> bool {
    strip_keyword(text.trim_end(), "package").is_some_and(is_ident)
}

fn is_go_import_spec(spec: &str) -> bool {
    let spec = spec.trim();
    let path = match spec.split_once([' ', '\t']) {
        Some((alias, path)) if alias == "_" || alias == "." || is_ident(alias) => path.trim(),
        Some(_) => return false,
        None => spec,
    };
    path.len() >= 2 && path.starts_with('"') && path.ends_with('"')
}

fn is_go_func(text: &str) -> bool {
    let text = text.trim_end();
    let Some(mut rest) = strip_keyword(text, "func") else {
        return false;
    };
    if let Some(receiver) = rest.strip_prefix('(') {
        let Some(close) = receiver.find(')') else {
            return false;
        };
        rest = receiver[close + 1..].trim_start();
    }
    let Some((_, rest)) = take_ident(rest) else {
        return false;
    };
    (rest.starts_with('(') || rest.starts_with('[')) && rest.ends_with('{')
}

fn match_go(content: &str) -> Option<StructureMatch> {
    let mut lines = lines(content);
    let package = lines.find(|l| !l.is_blank())?;
    if !is_go_package(package.text) {
        return None;
    }
    let mut body = DocBody::default();
    let mut in_comments = false;
    let mut in_import_block = false;
    for line in lines {
        if line.is_blank() {
            continue;
        }
        let trimmed = line.text.trim();
        if in_import_block {
            if trimmed == ")" {
                in_import_block = false;
            } else if !is_go_import_spec(trimmed) {
                return None;
            }
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix("//") {
            in_comments = true;
            if !body.feed(classify_comment(comment)) {
                return None;
            }
            continue;
        }
        if !in_comments {
            if let Some(spec) = strip_keyword(line.text.trim_end(), "import") {
                if spec == "(" {
                    in_import_block = true;
                    continue;
                }
                if is_go_import_spec(spec) {
                    continue;
                }
                return None;
            }
            if line.text.trim_end() == "import(" {
                in_import_block = true;
                continue;
            }
        }
        if is_go_func(line.text) && body.complete() {
            return Some(StructureMatch {
                definition_start: line.start,
                end: through_next_indent(content, line),
            });
        }
        return None;
    }
    None
}
