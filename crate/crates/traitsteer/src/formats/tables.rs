//! CSV score tables and labeled text corpora.

use std::path::Path;

use serde::{Deserialize, Serialize};
use traitsteer_core::personality::{check_labels, ContinuousLabels, Level, Trait, TraitSpec, TraitValues};

use crate::error::{Error, Result};
use crate::formats::jsonl::{atomic_write, read_jsonl};

/// A scored row: an identifier plus the five trait values.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub id: String,
    pub scores: TraitValues,
}

pub fn write_score_table(path: &Path, rows: &[ScoreRow]) -> Result<()> {
    atomic_write(path, |w| {
        let mut csv = csv::Writer::from_writer(w);
        let mut header = vec!["id"];
        header.extend(Trait::ALL.iter().map(|t| t.name()));
        csv.write_record(&header).map_err(|e| csv_error(path, e))?;
        for r in rows {
            let mut rec = vec![r.id.clone()];
            rec.extend(r.scores.0.iter().map(|v| v.to_string()));
            csv.write_record(&rec).map_err(|e| csv_error(path, e))?;
        }
        csv.flush().map_err(|e| Error::io(path, e))
    })
}

/// Reads any CSV with a column per trait name; other columns are ignored.
pub fn read_score_table(path: &Path) -> Result<Vec<ScoreRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let mut columns = [0usize; 5];
    for t in Trait::ALL {
        columns[t.index()] = headers
            .iter()
            .position(|h| h.trim() == t.name())
            .ok_or_else(|| Error::parse(1, format!("missing column {}", t.name())).file(path))?;
    }
    let id_col = headers.iter().position(|h| h.trim() == "id");
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| csv_error(path, e).line(line))?;
        let mut scores = [0.0; 5];
        for (k, &c) in columns.iter().enumerate() {
            let raw = rec.get(c).unwrap_or("");
            scores[k] = raw
                .trim()
                .parse()
                .map_err(|_| Error::parse(line, format!("{}: not a number: {raw:?}", Trait::ALL[k].name())).file(path))?;
        }
        let id = id_col.and_then(|c| rec.get(c)).map(str::to_string).unwrap_or_else(|| (line - 1).to_string());
        rows.push(ScoreRow { id, scores: TraitValues(scores) });
    }
    Ok(rows)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize);
    let err = Error::new("CsvError", e.to_string()).file(path);
    match line {
        Some(l) => err.line(l),
        None => err,
    }
}

/// Training example: a text with continuous labels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledText {
    pub text: String,
    pub openness: f64,
    pub conscientiousness: f64,
    pub extraversion: f64,
    pub agreeableness: f64,
    pub neuroticism: f64,
}

impl LabeledText {
    pub fn labels(&self) -> ContinuousLabels {
        TraitValues([self.openness, self.conscientiousness, self.extraversion, self.agreeableness, self.neuroticism])
    }
}

/// Evaluation example: a text with the trait level it should express.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeveledText {
    pub text: String,
    #[serde(rename = "trait")]
    pub trait_name: Trait,
    pub level: Level,
}

impl LeveledText {
    pub fn spec(&self) -> TraitSpec {
        TraitSpec::new(self.trait_name, self.level)
    }
}

pub fn read_labeled(path: &Path) -> Result<Vec<(String, ContinuousLabels)>> {
    let rows: Vec<(usize, LabeledText)> = read_jsonl(path)?;
    rows.into_iter()
        .map(|(line, r)| {
            let labels = r.labels();
            check_labels(&labels).map_err(|e| Error::from(e).file(path).line(line))?;
            Ok((r.text, labels))
        })
        .collect()
}
