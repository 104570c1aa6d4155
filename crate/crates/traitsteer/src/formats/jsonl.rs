//! Line-delimited JSON and atomic file output.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use traitsteer_core::dataset::{check_scenarios, DatasetError, DialogueRecord, Scenario, SCHEMA_VERSION};

use crate::error::{Error, Result};

/// Writes through a temporary file in the target directory and renames it
/// into place only once `body` succeeds.
pub fn atomic_write<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(tmp);
    body(&mut writer)?;
    let tmp = writer.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    atomic_write(path, |w| {
        for row in rows {
            serde_json::to_writer(&mut *w, row).map_err(|e| Error::new("SerializeError", e.to_string()))?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    atomic_write(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(|e| Error::new("SerializeError", e.to_string()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))
    })
}

/// Every non-blank line parsed as `T`, paired with its 1-based line number.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e).line(i + 1))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| Error::parse(i + 1, e.to_string()).file(path))?;
        out.push((i + 1, value));
    }
    Ok(out)
}

/// Reads scenarios in input order, rejecting duplicate ids.
pub fn ingest_scenarios(path: &Path) -> Result<Vec<Scenario>> {
    let rows: Vec<(usize, Scenario)> = read_jsonl(path)?;
    let scenarios: Vec<Scenario> = rows.iter().map(|(_, s)| s.clone()).collect();
    if let Err(e) = check_scenarios(&scenarios) {
        let id = match &e {
            DatasetError::DuplicateScenarioId(id) | DatasetError::InvalidRecord { scenario_id: id, .. } => id.clone(),
            _ => String::new(),
        };
        // report the offending line, which is the last one carrying the id
        let line = rows.iter().rev().find(|(_, s)| s.scenario_id == id).map(|(n, _)| *n).unwrap_or(0);
        return Err(Error::from(e).file(path).line(line));
    }
    Ok(scenarios)
}

pub fn read_dataset(path: &Path) -> Result<Vec<DialogueRecord>> {
    let rows: Vec<(usize, DialogueRecord)> = read_jsonl(path)?;
    for (line, r) in &rows {
        if r.schema_version != SCHEMA_VERSION {
            return Err(Error::new("WrongSchema", format!("schema_version {:?}, expected {SCHEMA_VERSION:?}", r.schema_version))
                .file(path)
                .line(*line));
        }
    }
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenarios_keep_order_and_reject_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.jsonl");
        std::fs::write(&p, "{\"scenario_id\":\"b\",\"speaker_x_utterance\":\"hi\"}\n\n{\"scenario_id\":\"a\",\"narrative\":\"n\",\"speaker_x_utterance\":\"yo\"}\n").unwrap();
        let s = ingest_scenarios(&p).unwrap();
        assert_eq!(s.iter().map(|s| s.scenario_id.as_str()).collect::<Vec<_>>(), ["b", "a"]);

        std::fs::write(&p, "").unwrap();
        assert!(ingest_scenarios(&p).unwrap().is_empty());

        std::fs::write(&p, "{\"scenario_id\":\"a\",\"speaker_x_utterance\":\"x\"}\n{\"scenario_id\":\"a\",\"speaker_x_utterance\":\"y\"}\n").unwrap();
        let e = ingest_scenarios(&p).unwrap_err();
        assert_eq!(e.code, "DuplicateScenarioId");
        assert_eq!(e.location, Some(crate::error::Location::Line(2)));

        std::fs::write(&p, "{\"scenario_id\":\"a\",\"speaker_x_utterance\":\"x\",\"extra\":1}\n").unwrap();
        let e = ingest_scenarios(&p).unwrap_err();
        assert_eq!((e.code.as_str(), e.location), ("ParseError", Some(crate::error::Location::Line(1))));
    }

    #[test]
    fn failed_writes_leave_no_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.jsonl");
        let r = atomic_write(&p, |w| {
            w.write_all(b"partial").unwrap();
            Err(Error::new("Boom", "stop"))
        });
        assert!(r.is_err());
        assert!(!p.exists());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    }
}
