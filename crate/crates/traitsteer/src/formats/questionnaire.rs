//! Questionnaire definition files: a header line `{name, scale_min, scale_max}`
//! followed by one item per line.

use std::path::Path;

use serde::Deserialize;
use traitsteer_core::psychometrics::{Questionnaire, QuestionnaireItem};

use crate::error::{Error, Result};

const BFI44: &str = include_str!("../../data/bfi44.jsonl");

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    name: String,
    scale_min: i64,
    scale_max: i64,
}

pub fn parse_questionnaire(text: &str) -> Result<Questionnaire> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (n, first) = lines.next().ok_or_else(|| Error::parse(1, "missing header record"))?;
    let header: Header = serde_json::from_str(first).map_err(|e| Error::parse(n + 1, format!("header: {e}")))?;
    let mut items = Vec::new();
    for (n, line) in lines {
        let item: QuestionnaireItem = serde_json::from_str(line).map_err(|e| Error::parse(n + 1, e.to_string()))?;
        items.push(item);
    }
    Questionnaire::new(header.name, items, header.scale_min, header.scale_max).map_err(Error::from)
}

/// Built-in name (`bfi44`) or a path to a definition file.
pub fn load_questionnaire(name_or_path: &str) -> Result<Questionnaire> {
    if name_or_path == "bfi44" {
        return parse_questionnaire(BFI44);
    }
    let path = Path::new(name_or_path);
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_questionnaire(&text).map_err(|e| e.file(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use traitsteer_core::personality::Trait;

    #[test]
    fn builtin_bfi_structure() {
        let q = load_questionnaire("bfi44").unwrap();
        assert_eq!(q.items().len(), 44);
        assert_eq!((q.scale().min, q.scale().max), (1, 5));
        let count = |t| q.items().iter().filter(|i| i.trait_name == t).count();
        let reversed = |t| q.items().iter().filter(|i| i.trait_name == t && i.reverse_keyed).count();
        let expected = [(Trait::Extraversion, 8, 3), (Trait::Agreeableness, 9, 4), (Trait::Conscientiousness, 9, 4), (Trait::Neuroticism, 8, 3), (Trait::Openness, 10, 2)];
        for (t, n, r) in expected {
            assert_eq!((count(t), reversed(t)), (n, r), "{t:?}");
        }
    }

    #[test]
    fn bad_item_line_is_located() {
        let text = "{\"name\":\"q\",\"scale_min\":1,\"scale_max\":5}\n{\"item_id\":\"a\",\"text\":\"t\",\"trait\":\"grit\",\"reverse_keyed\":false}\n";
        let e = parse_questionnaire(text).unwrap_err();
        assert_eq!(e.location, Some(crate::error::Location::Line(2)));
    }
}
