//! CSV ray traces with columns `t, re, im`.

use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub re: f64,
    pub im: f64,
}

pub fn rows(trace: &nonauto::rays::RayTrace) -> Vec<TraceRow> {
    trace.points.iter().map(|p| TraceRow { t: p.potential, re: p.z.re, im: p.z.im }).collect()
}

pub fn to_csv(rows: &[TraceRow]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn from_csv(text: &str) -> Result<Vec<TraceRow>, csv::Error> {
    csv::Reader::from_reader(text.as_bytes()).deserialize().collect()
}

pub fn write(path: &Path, rows: &[TraceRow]) -> std::io::Result<()> {
    let text = to_csv(rows).map_err(std::io::Error::other)?;
    std::fs::write(path, text)
}
