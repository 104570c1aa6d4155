//! Versioned flat-file persistence for [`LinearTraitScorer`].
//!
//! ```text
//! traitsteer-linear-scorer 1
//! length_normalize false
//! vocab 2
//! w <token> <5 weights>
//! bias <5 values>
//! thresholds none | thresholds <t_lo t_hi> x5
//! sha256 <hex digest of every preceding byte>
//! ```
//!
//! Floats use Rust's shortest round-trip formatting, so a reload is
//! bit-identical.

use std::path::Path;

use sha2::{Digest, Sha256};
use traitsteer_core::personality::TertileThresholds;
use traitsteer_core::scorer::{Featurizer, LinearTraitScorer};

use crate::error::{Error, Result};
use crate::formats::jsonl::atomic_write;

const MAGIC: &str = "traitsteer-linear-scorer";
const VERSION: u32 = 1;

pub fn serialize_model(model: &LinearTraitScorer) -> Result<String> {
    model.validate()?;
    let mut body = format!("{MAGIC} {VERSION}\nlength_normalize {}\n", model.featurizer.length_normalize);
    let tokens = model.featurizer.tokens();
    body.push_str(&format!("vocab {}\n", tokens.len()));
    for tok in tokens {
        let idx = model.featurizer.index_of(tok).expect("token from vocabulary");
        body.push_str("w\t");
        body.push_str(tok);
        for k in 0..5 {
            body.push_str(&format!("\t{}", model.weights[k][idx]));
        }
        body.push('\n');
    }
    body.push_str("bias");
    for b in model.bias {
        body.push_str(&format!(" {b}"));
    }
    body.push('\n');
    match &model.thresholds {
        None => body.push_str("thresholds none\n"),
        Some(th) => {
            body.push_str("thresholds");
            for t in th {
                body.push_str(&format!(" {} {}", t.t_lo, t.t_hi));
            }
            body.push('\n');
        }
    }
    let digest = hex::encode(Sha256::digest(body.as_bytes()));
    body.push_str(&format!("sha256 {digest}\n"));
    Ok(body)
}

fn floats(line: usize, fields: &[&str], n: usize) -> Result<Vec<f64>> {
    if fields.len() != n {
        return Err(Error::parse(line, format!("expected {n} numbers, found {}", fields.len())));
    }
    fields.iter().map(|f| f.parse::<f64>().map_err(|e| Error::parse(line, format!("{f:?}: {e}")))).collect()
}

pub fn parse_model(text: &str) -> Result<LinearTraitScorer> {
    let (body, tail) = match text.rfind("sha256 ") {
        Some(i) if i == 0 || text.as_bytes()[i - 1] == b'\n' => text.split_at(i),
        _ => return Err(Error::new("ChecksumError", "missing sha256 line")),
    };
    let expected = tail.trim_start_matches("sha256 ").trim();
    if hex::encode(Sha256::digest(body.as_bytes())) != expected {
        return Err(Error::new("ChecksumError", "checksum does not match file contents"));
    }

    let lines: Vec<&str> = body.lines().collect();
    let get = |i: usize| lines.get(i).copied().ok_or_else(|| Error::parse(i + 1, "unexpected end of file"));
    let header = get(0)?;
    if header != format!("{MAGIC} {VERSION}") {
        return Err(Error::parse(1, format!("unsupported model header {header:?}")));
    }
    let length_normalize = match get(1)? {
        "length_normalize true" => true,
        "length_normalize false" => false,
        other => return Err(Error::parse(2, format!("bad flag line {other:?}"))),
    };
    let n: usize = get(2)?
        .strip_prefix("vocab ")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::parse(3, "expected `vocab <count>`"))?;
    let mut tokens = Vec::with_capacity(n);
    let mut weights: [Vec<f64>; 5] = Default::default();
    for i in 3..3 + n {
        let fields: Vec<&str> = get(i)?.split('\t').collect();
        if fields.len() != 7 || fields[0] != "w" {
            return Err(Error::parse(i + 1, "expected `w <token> <5 weights>`"));
        }
        tokens.push(fields[1].to_string());
        for (k, v) in floats(i + 1, &fields[2..], 5)?.into_iter().enumerate() {
            weights[k].push(v);
        }
    }
    let bias_line = get(3 + n)?;
    let bias_fields: Vec<&str> = bias_line.strip_prefix("bias").map(|s| s.split_whitespace().collect()).unwrap_or_default();
    let bias = floats(n + 4, &bias_fields, 5)?;
    let th_line = get(4 + n)?;
    let thresholds = match th_line.strip_prefix("thresholds") {
        Some(" none") => None,
        Some(rest) => {
            let v = floats(n + 5, &rest.split_whitespace().collect::<Vec<_>>(), 10)?;
            Some(std::array::from_fn(|k| TertileThresholds { t_lo: v[2 * k], t_hi: v[2 * k + 1] }))
        }
        None => return Err(Error::parse(n + 5, "expected thresholds line")),
    };
    if lines.len() != n + 5 {
        return Err(Error::parse(n + 6, "trailing content before checksum"));
    }
    let featurizer = Featurizer::new(tokens, length_normalize);
    let model = LinearTraitScorer { featurizer, weights, bias: std::array::from_fn(|k| bias[k]), thresholds };
    model.validate()?;
    Ok(model)
}

pub fn save_model(path: &Path, model: &LinearTraitScorer) -> Result<()> {
    let text = serialize_model(model)?;
    atomic_write(path, |w| w.write_all(text.as_bytes()).map_err(|e| Error::io(path, e)))
}

pub fn load_model(path: &Path) -> Result<LinearTraitScorer> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model(&text).map_err(|e| e.file(path))
}
