//! Output records. Every JSON document carries `schema_version`, matching a
//! file under `schemas/`. Probabilities and counts are written both as a linear
//! value and as a natural log.

use std::fs;
use std::io::Write;
use std::path::Path;

use pfdr::exact::{ExtendedCount, Provenance, TailSplit, VolumeResult};
use pfdr::LogProb;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prob {
    pub value: f64,
    /// `null` for probability zero.
    pub ln: Option<f64>,
}

impl From<LogProb> for Prob {
    fn from(p: LogProb) -> Self {
        Prob {
            value: p.prob(),
            ln: (!p.is_zero()).then(|| p.ln()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Count {
    /// `null` when the count overflows a double.
    pub value: Option<f64>,
    pub ln: f64,
    /// Exact integer when available.
    pub integer: Option<u64>,
}

impl From<ExtendedCount> for Count {
    fn from(c: ExtendedCount) -> Self {
        let v = c.value();
        Count {
            value: v.is_finite().then_some(v),
            ln: c.ln_value,
            integer: c.integer,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tails {
    pub p_null: Prob,
    pub p_alt: Prob,
    pub p_mix: Prob,
}

impl From<TailSplit> for Tails {
    fn from(t: TailSplit) -> Self {
        Tails {
            p_null: t.p_null.into(),
            p_alt: t.p_alt.into(),
            p_mix: t.p_mix.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Volume {
    pub p_event: Prob,
    pub k: f64,
    pub n_star: Count,
    pub v_star: Count,
    pub provenance: Provenance,
}

impl From<VolumeResult> for Volume {
    fn from(v: VolumeResult) -> Self {
        Volume {
            p_event: v.p_event.into(),
            k: v.k,
            n_star: v.n_star.into(),
            v_star: v.v_star.into(),
            provenance: v.provenance,
        }
    }
}

pub fn write_bytes(out: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, bytes).map_err(|e| CliError::io(&path.display().to_string(), e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::io("stdout", e))
        }
    }
}

pub fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut s = serde_json::to_vec_pretty(value).map_err(|e| CliError::io("json", e))?;
    s.push(b'\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<(), CliError> {
    write_bytes(out, &json_bytes(value)?)
}

/// Serialize rows with a header taken from `header` (used when rows are plain
/// vectors) or from the row type's field names.
pub fn csv_bytes<R: Serialize>(header: Option<&[String]>, rows: &[R]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(header.is_none())
        .from_writer(Vec::new());
    if let Some(h) = header {
        w.write_record(h).map_err(|e| CliError::io("csv", e))?;
    }
    for r in rows {
        w.serialize(r).map_err(|e| CliError::io("csv", e))?;
    }
    w.into_inner().map_err(|e| CliError::io("csv", e))
}
