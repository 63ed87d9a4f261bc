//! Stage-1 documentation prompts and the stage-2 completion prefix.

use alloc::string::String;

use crate::docgate::GatedDoc;
use crate::lex::{CodeSnippet, LanguageId};

const PYTHON_TEMPLATE: &str = include_str!("../templates/python.txt");
const RUBY_TEMPLATE: &str = include_str!("../templates/ruby.txt");
const GO_TEMPLATE: &str = include_str!("../templates/go.txt");

pub const LANGUAGE_PLACEHOLDER: &str = "{origin_lan}";
pub const CODE_PLACEHOLDER: &str = "{code}";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("documentation with verdict Invalid cannot seed code generation")]
    InvalidDoc,
}

/// A one-shot documentation-generation template with `{origin_lan}` and
/// `{code}` placeholders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PromptTemplate {
    pub language: LanguageId,
    pub body: &'static str,
}

impl PromptTemplate {
    pub fn for_language(language: LanguageId) -> Self {
        let body = match language {
            LanguageId::Python => PYTHON_TEMPLATE,
            LanguageId::Ruby => RUBY_TEMPLATE,
            LanguageId::Go => GO_TEMPLATE,
        };
        Self { language, body }
    }

    /// Substitutes both placeholders in a single left-to-right pass, so
    /// placeholder-like text inside the substituted code is left alone.
    pub fn render(&self, language_name: &str, code: &str) -> String {
        let mut out = String::with_capacity(self.body.len() + code.len());
        let mut rest = self.body;
        loop {
            let next = [
                (LANGUAGE_PLACEHOLDER, language_name),
                (CODE_PLACEHOLDER, code),
            ]
            .into_iter()
            .filter_map(|(ph, value)| rest.find(ph).map(|at| (at, ph, value)))
            .min_by_key(|&(at, _, _)| at);
            match next {
                Some((at, ph, value)) => {
                    out.push_str(&rest[..at]);
                    out.push_str(value);
                    rest = &rest[at + ph.len()..];
                }
                None => {
                    out.push_str(rest);
                    return out;
                }
            }
        }
    }
}

/// Stage-1 prompt asking the model to reverse-engineer documentation for `code`.
pub fn render_doc_prompt(code: &CodeSnippet) -> String {
    PromptTemplate::for_language(code.language).render(code.language.name(), &code.source)
}

/// Stage-2 input: the rewritten documentation itself, used as a completion
/// prefix that the model continues into a function body.
pub fn render_code_prompt(doc: &GatedDoc) -> Result<String, PromptError> {
    doc.rewritten()
        .map(String::from)
        .ok_or(PromptError::InvalidDoc)
}
