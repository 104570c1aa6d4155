//! Lexicon files: `[category]` header lines followed by entry lines.
//! A trailing `*` marks a prefix pattern; `#` starts a comment.

use std::path::Path;

use traitsteer_core::analysis::LexiconCategory;

use crate::error::{Error, Result};

pub fn parse_lexicon(text: &str) -> Result<Vec<LexiconCategory>> {
    let mut out = Vec::new();
    let mut current: Option<(usize, String, Vec<String>)> = None;
    let finish = |c: Option<(usize, String, Vec<String>)>, out: &mut Vec<LexiconCategory>| -> Result<()> {
        if let Some((line, name, entries)) = c {
            out.push(LexiconCategory::new(name, entries).map_err(|e| Error::from(e).line(line))?);
        }
        Ok(())
    };
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            finish(current.take(), &mut out)?;
            if out.iter().any(|c| c.name == name.trim()) {
                return Err(Error::parse(i + 1, format!("duplicate category {name}")));
            }
            current = Some((i + 1, name.trim().to_string(), Vec::new()));
        } else {
            match current.as_mut() {
                Some((_, _, entries)) => entries.extend(line.split_whitespace().map(|w| w.to_lowercase())),
                None => return Err(Error::parse(i + 1, "entry before the first [category] header")),
            }
        }
    }
    finish(current, &mut out)?;
    Ok(out)
}

pub fn load_lexicon(path: &Path) -> Result<Vec<LexiconCategory>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_lexicon(&text).map_err(|e| e.file(path))
}
