//! Long-format result records: one row per replicate and metric.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Format;
use crate::error::Result;

pub const CSV_HEADER: &str = "run_id,scenario,n,p,q,mu,replicate,seed,metric,value";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub scenario: String,
    pub n: u64,
    pub p: f64,
    pub q: f64,
    pub mu: Option<f64>,
    pub replicate: u64,
    pub seed: u64,
    pub metric: String,
    pub value: f64,
}

pub fn write_records(path: &Path, format: Format, records: &[RunRecord]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let file = BufWriter::new(File::create(path)?);
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(file);
            for r in records {
                w.serialize(r)?;
            }
            if records.is_empty() {
                w.write_record(CSV_HEADER.split(','))?;
            }
            w.flush()?;
        }
        Format::Jsonl => {
            let mut w = file;
            for r in records {
                serde_json::to_writer(&mut w, r)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

pub fn read_records(path: &Path, format: Format) -> Result<Vec<RunRecord>> {
    let file = File::open(path)?;
    match format {
        Format::Csv => {
            let mut rd = csv::Reader::from_reader(file);
            rd.deserialize().map(|r| r.map_err(Into::into)).collect()
        }
        Format::Jsonl => BufReader::new(file)
            .lines()
            .filter(|l| l.as_ref().map_or(true, |s| !s.trim().is_empty()))
            .map(|l| Ok(serde_json::from_str(&l?)?))
            .collect(),
    }
}
