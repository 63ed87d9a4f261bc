use super::LanguageId;

const PYTHON_RESERVED: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue",
    "def", "del", "elif", "else", "except", "finally", "for", "from", "global", "if", "import",
    "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return", "try", "while",
    "with", "yield",
];

const RUBY_RESERVED: &[&str] = &[
    "__ENCODING__",
    "__FILE__",
    "__LINE__",
    "BEGIN",
    "END",
    "alias",
    "and",
    "begin",
    "break",
    "case",
    "class",
    "def",
    "defined?",
    "do",
    "else",
    "elsif",
    "end",
    "ensure",
    "false",
    "for",
    "if",
    "in",
    "module",
    "next",
    "nil",
    "not",
    "or",
    "redo",
    "rescue",
    "retry",
    "return",
    "self",
    "super",
    "then",
    "true",
    "undef",
    "unless",
    "until",
    "when",
    "while",
    "yield",
];

const GO_RESERVED: &[&str] = &[
    "break",
    "case",
    "chan",
    "const",
    "continue",
    "default",
    "defer",
    "else",
    "fallthrough",
    "for",
    "func",
    "go",
    "goto",
    "if",
    "import",
    "interface",
    "map",
    "package",
    "range",
    "return",
    "select",
    "struct",
    "switch",
    "type",
    "var",
];

const PYTHON_CONTROL: &[&str] = &[
    "def", "return", "if", "elif", "else", "for", "while", "try", "except", "with", "yield",
    "raise",
];

const RUBY_CONTROL: &[&str] = &[
    "def", "return", "if", "elsif", "else", "unless", "for", "while", "until", "begin", "rescue",
    "yield", "end",
];

const GO_CONTROL: &[&str] = &[
    "func", "return", "if", "else", "for", "switch", "case", "select", "defer", "go", "range",
];

pub fn reserved_words(language: LanguageId) -> &'static [&'static str] {
    match language {
        LanguageId::Python => PYTHON_RESERVED,
        LanguageId::Ruby => RUBY_RESERVED,
        LanguageId::Go => GO_RESERVED,
    }
}

/// The control keywords whose order forms a snippet's fingerprint.
pub fn control_keywords(language: LanguageId) -> &'static [&'static str] {
    match language {
        LanguageId::Python => PYTHON_CONTROL,
        LanguageId::Ruby => RUBY_CONTROL,
        LanguageId::Go => GO_CONTROL,
    }
}

pub fn is_reserved(word: &str, language: LanguageId) -> bool {
    reserved_words(language).contains(&word)
}

pub(crate) fn control_keyword(word: &str, language: LanguageId) -> Option<&'static str> {
    control_keywords(language)
        .iter()
        .copied()
        .find(|&k| k == word)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn control_keywords_are_reserved() {
        for lang in LanguageId::ALL {
            for kw in control_keywords(lang) {
                assert!(is_reserved(kw, lang), "{kw} not reserved in {lang}");
            }
        }
    }
}
