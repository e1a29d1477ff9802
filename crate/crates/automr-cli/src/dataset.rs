//! JSONL dataset ingestion: one `{"query", "answer", "task"?}` object per
//! line, order preserved, malformed lines reported with their line number.

use std::path::Path;

use anyhow::{bail, Context, Result};
use automr_core::{DatasetRecord, TaskKind};

pub fn load_dataset(path: &Path) -> Result<Vec<DatasetRecord>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read dataset {}", path.display()))?;
    parse_dataset(&text)
}

pub fn parse_dataset(text: &str) -> Result<Vec<DatasetRecord>> {
    let mut records = Vec::new();
    for (index, raw) in text.lines().enumerate() {
        let line_number = index + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(line)
            .with_context(|| format!("line {line_number}: invalid JSON"))?;
        let query = field(&value, "query", line_number)?;
        let answer = field(&value, "answer", line_number)?;
        let task = match value.get("task") {
            None | Some(serde_json::Value::Null) => TaskKind::Generic,
            Some(serde_json::Value::String(s)) => s
                .parse::<TaskKind>()
                .with_context(|| format!("line {line_number}: field task"))?,
            Some(other) => bail!("line {line_number}: field task must be a string, got {other}"),
        };
        if query.is_empty() {
            bail!("line {line_number}: empty field query");
        }
        if answer.is_empty() {
            bail!("line {line_number}: empty field answer");
        }
        records.push(DatasetRecord {
            query,
            answer,
            task,
        });
    }
    if records.is_empty() {
        bail!("dataset is empty");
    }
    Ok(records)
}

fn field(value: &serde_json::Value, name: &str, line_number: usize) -> Result<String> {
    match value.get(name) {
        Some(serde_json::Value::String(s)) => Ok(s.clone()),
        Some(other) => bail!("line {line_number}: field {name} must be a string, got {other}"),
        None => bail!("line {line_number}: missing field {name}"),
    }
}
