//! Feature CSV and edge-list readers.

use anyhow::{anyhow, bail, Context, Result};

/// One row of a feature CSV: `id,label1;label2;...,f1,...,fd`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub id: String,
    pub labels: Vec<String>,
    pub features: Vec<f64>,
}

/// Parses a feature CSV. Rows must share one dimension. An empty label field
/// means no labels. A header line is allowed when its first feature column is
/// not numeric.
pub fn parse_features(text: &str) -> Result<Vec<FeatureRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows: Vec<FeatureRow> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("feature CSV record {}", i + 1))?;
        let line = record.position().map_or(i as u64 + 1, |p| p.line());
        if record.len() < 3 {
            bail!("line {line}: expected `id,labels,f1,...`, got {} fields", record.len());
        }
        let parsed: Result<Vec<f64>, _> = record.iter().skip(2).map(str::parse::<f64>).collect();
        let features = match parsed {
            Ok(f) => f,
            Err(_) if rows.is_empty() && i == 0 && record[2].parse::<f64>().is_err() => continue,
            Err(e) => bail!("line {line}: bad feature value: {e}"),
        };
        if features.iter().any(|x| !x.is_finite()) {
            bail!("line {line}: feature values must be finite");
        }
        if let Some(first) = rows.first() {
            if first.features.len() != features.len() {
                bail!("line {line}: expected {} features, got {}", first.features.len(), features.len());
            }
        }
        let labels = record[1].split(';').map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect();
        rows.push(FeatureRow { id: record[0].to_string(), labels, features });
    }
    if rows.is_empty() {
        bail!("feature CSV has no rows");
    }
    Ok(rows)
}

/// Parses `u v [w]` lines. `#` starts a comment. Missing weights come back as
/// `None`.
pub fn parse_edges(text: &str) -> Result<Vec<(usize, usize, Option<f64>)>> {
    let mut edges = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let at = |what: &str| anyhow!("line {}: {what}", i + 1);
        let fields: Vec<&str> = line.split_whitespace().collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(at(&format!("expected `u v [w]`, got {} fields", fields.len())));
        }
        let u = fields[0].parse().map_err(|_| at(&format!("bad node id `{}`", fields[0])))?;
        let v = fields[1].parse().map_err(|_| at(&format!("bad node id `{}`", fields[1])))?;
        let w = match fields.get(2) {
            Some(s) => {
                let w: f64 = s.parse().map_err(|_| at(&format!("bad weight `{s}`")))?;
                if !(w.is_finite() && w >= 0.0) {
                    return Err(at("weights must be finite and non-negative"));
                }
                Some(w)
            }
            None => None,
        };
        edges.push((u, v, w));
    }
    if edges.is_empty() {
        bail!("edge list has no edges");
    }
    Ok(edges)
}

/// Label names mapped to dense indices in order of first appearance.
pub fn label_index(rows: &[FeatureRow]) -> (Vec<String>, Vec<Vec<usize>>) {
    let mut names: Vec<String> = Vec::new();
    let per_row = rows
        .iter()
        .map(|r| {
            let mut ids: Vec<usize> = r
                .labels
                .iter()
                .map(|l| match names.iter().position(|n| n == l) {
                    Some(i) => i,
                    None => {
                        names.push(l.clone());
                        names.len() - 1
                    }
                })
                .collect();
            ids.sort_unstable();
            ids.dedup();
            ids
        })
        .collect();
    (names, per_row)
}
