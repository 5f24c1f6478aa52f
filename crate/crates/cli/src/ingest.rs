//! Long-format CSV ingestion and export.
//!
//! Columns: an optional leading `layer`, then `sender`, `receiver`, `y`, then
//! one or more numeric covariates. Labels are mapped to dense ids in order
//! of first appearance (sender before receiver within a row).

use std::collections::HashMap;
use std::io::{Read, Write};

use dyadnet::relational::{DyadIndex, Layout, Observation, RelationalDataset};

/// Tokens treated as missing values.
const NA_TOKENS: [&str; 7] = ["", "na", "n/a", "nan", "null", "none", "."];

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("CSV parse error: {0}")]
    Parse(String),
    #[error("incomplete data: {0}")]
    Incomplete(String),
    #[error(transparent)]
    Core(#[from] dyadnet::error::Error),
}

/// A parsed dataset with the label mappings needed to report results.
#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub dataset: RelationalDataset,
    pub actor_labels: Vec<String>,
    /// Empty when the file had no layer column.
    pub layer_labels: Vec<String>,
    pub covariate_names: Vec<String>,
}

impl Ingested {
    pub fn has_layer_column(&self) -> bool {
        !self.layer_labels.is_empty()
    }
}

#[derive(Default)]
struct LabelMap {
    ids: HashMap<String, usize>,
    labels: Vec<String>,
}

impl LabelMap {
    fn id(&mut self, label: &str) -> usize {
        if let Some(&id) = self.ids.get(label) {
            return id;
        }
        let id = self.labels.len();
        self.ids.insert(label.to_string(), id);
        self.labels.push(label.to_string());
        id
    }
}

fn parse_value(raw: &str, row: usize, column: &str) -> Result<f64, IngestError> {
    let t = raw.trim();
    if NA_TOKENS.contains(&t.to_ascii_lowercase().as_str()) {
        return Err(IngestError::Incomplete(format!(
            "missing value `{raw}` in column `{column}` at data row {row}"
        )));
    }
    let v: f64 = t
        .parse()
        .map_err(|_| IngestError::Parse(format!("`{raw}` in column `{column}` at data row {row} is not a number")))?;
    if !v.is_finite() {
        return Err(IngestError::Parse(format!(
            "non-finite value `{raw}` in column `{column}` at data row {row}"
        )));
    }
    Ok(v)
}

fn label(raw: &str, row: usize, column: &str) -> Result<String, IngestError> {
    let t = raw.trim();
    if t.is_empty() {
        return Err(IngestError::Incomplete(format!("empty `{column}` label at data row {row}")));
    }
    Ok(t.to_string())
}

/// Parse a long-format CSV into a complete relational dataset.
pub fn parse_csv<R: Read>(reader: R, directed: bool) -> Result<Ingested, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| IngestError::Parse(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let lower: Vec<String> = header.iter().map(|h| h.to_ascii_lowercase()).collect();
    let has_layer = lower.first().is_some_and(|h| h == "layer");
    let offset = usize::from(has_layer);
    let expected = ["sender", "receiver", "y"];
    for (k, name) in expected.iter().enumerate() {
        if lower.get(offset + k).map(String::as_str) != Some(*name) {
            return Err(IngestError::Parse(format!(
                "header must be [layer,] sender, receiver, y, covariates...; column {} is `{}`",
                offset + k + 1,
                header.get(offset + k).map(String::as_str).unwrap_or("")
            )));
        }
    }
    let covariate_names: Vec<String> = header[offset + 3..].to_vec();
    if covariate_names.is_empty() {
        return Err(IngestError::Parse("no covariate columns".into()));
    }
    let p = covariate_names.len();

    let mut actors = LabelMap::default();
    let mut layers = LabelMap::default();
    let mut rows = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let row = k + 1;
        let record = record.map_err(|e| IngestError::Parse(e.to_string()))?;
        if record.len() != header.len() {
            return Err(IngestError::Parse(format!(
                "data row {row} has {} fields, header has {}",
                record.len(),
                header.len()
            )));
        }
        let r = if has_layer {
            layers.id(&label(&record[0], row, "layer")?)
        } else {
            0
        };
        let i = actors.id(&label(&record[offset], row, "sender")?);
        let j = actors.id(&label(&record[offset + 1], row, "receiver")?);
        if i == j {
            return Err(IngestError::Parse(format!("data row {row}: sender equals receiver")));
        }
        let y = parse_value(&record[offset + 2], row, "y")?;
        let x = (0..p)
            .map(|c| parse_value(&record[offset + 3 + c], row, &covariate_names[c]))
            .collect::<Result<Vec<f64>, _>>()?;
        let dyad = if directed || i < j {
            DyadIndex::new(i, j, r)
        } else {
            DyadIndex::new(j, i, r)
        };
        rows.push(Observation { dyad, y, x });
    }
    if rows.is_empty() {
        return Err(IngestError::Incomplete("no data rows".into()));
    }
    let n = actors.labels.len();
    let layer_count = if has_layer { layers.labels.len() } else { 1 };
    let layout = Layout::new(n, layer_count, directed);
    let dataset = RelationalDataset::from_observations(layout, p, rows).map_err(|e| match e {
        dyadnet::error::Error::IncompleteData { .. } => IngestError::Incomplete(e.to_string()),
        dyadnet::error::Error::InvalidDyad(msg) => IngestError::Parse(msg),
        other => IngestError::Core(other),
    })?;
    Ok(Ingested {
        dataset,
        actor_labels: actors.labels,
        layer_labels: if has_layer { layers.labels } else { Vec::new() },
        covariate_names,
    })
}

/// Write a dataset in canonical order; the output re-parses to the same
/// dataset and label mappings.
pub fn write_csv<W: Write>(data: &Ingested, writer: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = Vec::new();
    if data.has_layer_column() {
        header.push("layer");
    }
    header.extend(["sender", "receiver", "y"]);
    header.extend(data.covariate_names.iter().map(String::as_str));
    w.write_record(&header)?;
    for obs in data.dataset.devectorize() {
        let mut rec: Vec<String> = Vec::with_capacity(header.len());
        if data.has_layer_column() {
            rec.push(data.layer_labels[obs.dyad.r].clone());
        }
        rec.push(data.actor_labels[obs.dyad.i].clone());
        rec.push(data.actor_labels[obs.dyad.j].clone());
        rec.push(obs.y.to_string());
        rec.extend(obs.x.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn directed_csv() -> String {
        let mut s = String::from("sender,receiver,y,x\n");
        for (i, a) in ["b", "a", "c"].iter().enumerate() {
            for (j, b) in ["b", "a", "c"].iter().enumerate() {
                if i != j {
                    s.push_str(&format!("{a},{b},{},{}\n", i * 3 + j, i as f64 - j as f64));
                }
            }
        }
        s
    }

    #[test]
    fn labels_follow_first_appearance() {
        let d = parse_csv(directed_csv().as_bytes(), true).unwrap();
        assert_eq!(d.actor_labels, ["b", "a", "c"]);
        assert!(!d.has_layer_column());
        assert_eq!(d.dataset.n(), 3);
    }

    #[test]
    fn na_is_incomplete() {
        let s = directed_csv().replacen(",1,", ",NA,", 1);
        assert!(matches!(parse_csv(s.as_bytes(), true), Err(IngestError::Incomplete(_))));
    }

    #[test]
    fn missing_row_is_incomplete() {
        let s: String = directed_csv().lines().take(6).map(|l| format!("{l}\n")).collect();
        assert!(matches!(parse_csv(s.as_bytes(), true), Err(IngestError::Incomplete(_))));
    }

    #[test]
    fn bad_number_and_header_are_parse_errors() {
        let s = directed_csv().replacen(",1,", ",one,", 1);
        assert!(matches!(parse_csv(s.as_bytes(), true), Err(IngestError::Parse(_))));
        let s = directed_csv().replacen("sender", "from", 1);
        assert!(matches!(parse_csv(s.as_bytes(), true), Err(IngestError::Parse(_))));
    }

    #[test]
    fn undirected_duplicates_must_agree() {
        let s = "sender,receiver,y,x\na,b,1,2\nb,a,1,2\na,c,3,4\nb,c,5,6\n";
        let d = parse_csv(s.as_bytes(), false).unwrap();
        assert_eq!(d.dataset.layout().len(), 3);
        let bad = s.replace("b,a,1,2", "b,a,1.5,2");
        assert!(matches!(parse_csv(bad.as_bytes(), false), Err(IngestError::Parse(_))));
    }
}
