//! Corpus loading: a directory with one sub-directory per language holding
//! one snippet per file, or a JSONL file of `{language, source}` records.

use std::fs;
use std::path::Path;

use backtrans_core::lex::{CodeSnippet, LanguageId};

use crate::error::HarnessError;
use crate::jsonl;

pub fn load_corpus(path: &Path) -> Result<Vec<CodeSnippet>, HarnessError> {
    let meta = fs::metadata(path).map_err(|e| HarnessError::io(path, e))?;
    let snippets = if meta.is_dir() {
        load_dir(path)?
    } else {
        jsonl::read_file::<CodeSnippet>(path)?
    };
    if let Some(i) = snippets.iter().position(CodeSnippet::is_blank) {
        return Err(HarnessError::Format {
            path: path.into(),
            line: i + 1,
            message: "blank snippet".into(),
        });
    }
    Ok(snippets)
}

fn load_dir(root: &Path) -> Result<Vec<CodeSnippet>, HarnessError> {
    let mut out = Vec::new();
    for lang in LanguageId::ALL {
        let dir = root.join(lang.name());
        if !dir.is_dir() {
            continue;
        }
        let mut files: Vec<_> = fs::read_dir(&dir)
            .map_err(|e| HarnessError::io(&dir, e))?
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.is_file())
            .collect();
        files.sort();
        for file in files {
            let source = fs::read_to_string(&file).map_err(|e| HarnessError::io(&file, e))?;
            out.push(CodeSnippet::new(source, lang));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directory_and_jsonl_forms_agree() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("go")).unwrap();
        fs::create_dir(dir.path().join("python")).unwrap();
        fs::write(dir.path().join("go/b.go"), "func B() {}").unwrap();
        fs::write(dir.path().join("python/a.py"), "def a(): pass").unwrap();
        let from_dir = load_corpus(dir.path()).unwrap();
        assert_eq!(from_dir.len(), 2);
        assert_eq!(from_dir[0].language, LanguageId::Python);

        let file = dir.path().join("corpus.jsonl");
        jsonl::write_file(&file, &from_dir).unwrap();
        assert_eq!(load_corpus(&file).unwrap(), from_dir);
    }

    #[test]
    fn blank_snippets_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("c.jsonl");
        fs::write(&file, "{\"language\":\"ruby\",\"source\":\"  \"}\n").unwrap();
        assert!(load_corpus(&file).is_err());
    }
}
