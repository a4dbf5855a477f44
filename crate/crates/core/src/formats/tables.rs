//! CSV inputs and JSON/CSV outputs.
//!
//! Row numbers in diagnostics count the header as row 0; columns are 0-based.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metric::{ContentDistanceVector, MetricReport};
use crate::perturb::SweepTable;
use crate::ranking::ComparisonMatrix;

pub const DISTANCE_HEADER: [&str; 3] = ["content_id", "generated_id", "distance"];

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader)
}

fn csv_error(e: csv::Error) -> Error {
    let row = e.position().map(|p| p.record() as usize);
    Error::schema(row, None, e.to_string())
}

fn records<R: Read>(rdr: &mut csv::Reader<R>, width: usize) -> Result<Vec<csv::StringRecord>> {
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_error)?;
        if rec.len() != width {
            return Err(Error::schema(
                Some(i + 1),
                None,
                format!("expected {width} fields, found {}", rec.len()),
            ));
        }
        out.push(rec);
    }
    Ok(out)
}

/// Square win-count matrix: a header row of `m` labels, then `m` rows of
/// non-negative integers. Cell `(i, j)` is how often label `i` beat label `j`.
pub fn parse_comparisons<R: Read>(reader: R) -> Result<ComparisonMatrix> {
    let mut rdr = csv_reader(reader);
    let labels: Vec<String> = rdr.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
    if labels.iter().any(String::is_empty) {
        return Err(Error::schema(Some(0), None, "labels must be non-empty"));
    }
    let m = labels.len();
    let rows = records(&mut rdr, m)?;
    if rows.len() != m {
        return Err(Error::schema(None, None, format!("expected {m} data rows, found {}", rows.len())));
    }
    let mut wins = Vec::with_capacity(m);
    for (i, rec) in rows.iter().enumerate() {
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, cell)| {
                cell.parse::<u64>().map_err(|_| {
                    Error::schema(Some(i + 1), Some(j), format!("'{cell}' is not a non-negative integer"))
                })
            })
            .collect::<Result<Vec<u64>>>()?;
        if row[i] != 0 {
            return Err(Error::schema(Some(i + 1), Some(i), "diagonal entries must be zero"));
        }
        wins.push(row);
    }
    ComparisonMatrix::new(labels, wins)
}

pub fn read_comparisons(path: &Path) -> Result<ComparisonMatrix> {
    parse_comparisons(open(path)?)
}

/// `content_id,generated_id,distance` rows; row order defines the pairing index.
pub fn parse_distances<R: Read>(reader: R) -> Result<ContentDistanceVector> {
    let mut rdr = csv_reader(reader);
    let header = rdr.headers().map_err(csv_error)?.clone();
    if header.iter().collect::<Vec<_>>() != DISTANCE_HEADER {
        return Err(Error::schema(
            Some(0),
            None,
            format!("header must be '{}'", DISTANCE_HEADER.join(",")),
        ));
    }
    let mut seen = HashSet::new();
    let mut distances = Vec::new();
    for (i, rec) in records(&mut rdr, 3)?.iter().enumerate() {
        let row = i + 1;
        if !seen.insert((rec[0].to_string(), rec[1].to_string())) {
            return Err(Error::schema(Some(row), None, format!("duplicate pair ({}, {})", &rec[0], &rec[1])));
        }
        let d: f64 = rec[2]
            .parse()
            .map_err(|_| Error::schema(Some(row), Some(2), format!("'{}' is not a number", &rec[2])))?;
        if !d.is_finite() || d < 0.0 {
            return Err(Error::schema(Some(row), Some(2), format!("distance must be finite and >= 0, got {d}")));
        }
        distances.push(d);
    }
    if distances.is_empty() {
        return Err(Error::EmptyInput("distance file has no rows".into()));
    }
    ContentDistanceVector::new(distances, "file")
}

pub fn read_distances(path: &Path) -> Result<ContentDistanceVector> {
    parse_distances(open(path)?)
}

pub fn write_distances<W: Write>(pairs: &[(String, String, f64)], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::InvalidArgument(e.to_string());
    w.write_record(DISTANCE_HEADER).map_err(io)?;
    for (c, g, d) in pairs {
        w.write_record([c.as_str(), g.as_str(), &d.to_string()]).map_err(io)?;
    }
    w.flush().map_err(|e| Error::InvalidArgument(e.to_string()))
}

fn column_index(header: &csv::StringRecord, name: &str) -> Result<usize> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::schema(Some(0), None, format!("missing column '{name}'")))
}

/// `(predicted_artist, target_artist)` pairs from a CSV with those two
/// columns (other columns are ignored).
pub fn parse_predictions<R: Read>(reader: R) -> Result<Vec<(String, String)>> {
    let mut rdr = csv_reader(reader);
    let header = rdr.headers().map_err(csv_error)?.clone();
    let p = column_index(&header, "predicted_artist")?;
    let t = column_index(&header, "target_artist")?;
    let rows = records(&mut rdr, header.len())?;
    if rows.is_empty() {
        return Err(Error::EmptyInput("prediction file has no rows".into()));
    }
    Ok(rows.iter().map(|r| (r[p].to_string(), r[t].to_string())).collect())
}

pub fn read_predictions(path: &Path) -> Result<Vec<(String, String)>> {
    parse_predictions(open(path)?)
}

/// One numeric column keyed by the first column's labels. `column` selects by
/// header name and defaults to the second column.
pub fn parse_score_column<R: Read>(reader: R, column: Option<&str>) -> Result<Vec<(String, f64)>> {
    let mut rdr = csv_reader(reader);
    let header = rdr.headers().map_err(csv_error)?.clone();
    if header.len() < 2 {
        return Err(Error::schema(Some(0), None, "need a label column and at least one value column"));
    }
    let col = match column {
        Some(name) => column_index(&header, name)?,
        None => 1,
    };
    if col == 0 {
        return Err(Error::schema(Some(0), Some(0), "the first column holds labels"));
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, rec) in records(&mut rdr, header.len())?.iter().enumerate() {
        let label = rec[0].to_string();
        if !seen.insert(label.clone()) {
            return Err(Error::schema(Some(i + 1), Some(0), format!("duplicate label '{label}'")));
        }
        let v: f64 = rec[col]
            .parse()
            .map_err(|_| Error::schema(Some(i + 1), Some(col), format!("'{}' is not a number", &rec[col])))?;
        if !v.is_finite() {
            return Err(Error::schema(Some(i + 1), Some(col), "value must be finite"));
        }
        out.push((label, v));
    }
    if out.is_empty() {
        return Err(Error::EmptyInput("score column has no rows".into()));
    }
    Ok(out)
}

pub fn read_score_column(path: &Path, column: Option<&str>) -> Result<Vec<(String, f64)>> {
    parse_score_column(open(path)?, column)
}

/// Pairs two labelled columns by label, in the order of `a`.
pub fn align_columns(a: &[(String, f64)], b: &[(String, f64)]) -> Result<(Vec<String>, Vec<f64>, Vec<f64>)> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let lookup: HashMap<&str, f64> = b.iter().map(|(l, v)| (l.as_str(), *v)).collect();
    let mut labels = Vec::with_capacity(a.len());
    let mut xs = Vec::with_capacity(a.len());
    let mut ys = Vec::with_capacity(a.len());
    for (i, (label, x)) in a.iter().enumerate() {
        let y = lookup
            .get(label.as_str())
            .ok_or_else(|| Error::schema(Some(i + 1), Some(0), format!("label '{label}' missing from second column")))?;
        labels.push(label.clone());
        xs.push(*x);
        ys.push(*y);
    }
    Ok((labels, xs, ys))
}

/// Pretty JSON with struct-declaration key order and a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    std::fs::write(path, to_json(value)?).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::schema(Some(e.line()), Some(e.column()), e.to_string()))
}

pub fn write_report(report: &MetricReport, path: &Path) -> Result<()> {
    write_json(report, path)
}

pub fn read_report(path: &Path) -> Result<MetricReport> {
    let report: MetricReport = read_json(path)?;
    if report.schema_version != crate::metric::REPORT_SCHEMA_VERSION {
        return Err(Error::schema(
            None,
            None,
            format!("unsupported report schema_version {}", report.schema_version),
        ));
    }
    Ok(report)
}

fn sweep_comment(table: &SweepTable) -> String {
    format!(
        "# perturbation={}; {}; metric={}\n",
        table.kind.name(),
        table.kind.parameter_map(),
        table.metric.name()
    )
}

/// `level,trial,value`, preceded by a `#` line naming the transform.
pub fn sweep_rows_csv(table: &SweepTable) -> String {
    let mut out = sweep_comment(table);
    out.push_str("level,trial,value\n");
    for r in &table.rows {
        out.push_str(&format!("{},{},{}\n", r.level, r.trial, r.value));
    }
    out
}

/// `level,mean,stddev,trials` for plotting.
pub fn sweep_summary_csv(table: &SweepTable) -> String {
    let mut out = sweep_comment(table);
    out.push_str("level,mean,stddev,trials\n");
    for s in &table.summary {
        out.push_str(&format!("{},{},{},{}\n", s.level, s.mean, s.stddev, s.trials));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::RunMetadata;

    #[test]
    fn comparisons_two_by_two() {
        let m = parse_comparisons("a,b\n0,3\n1,0\n".as_bytes()).unwrap();
        assert_eq!(m.labels(), ["a", "b"]);
        assert_eq!((m.wins(0, 1), m.wins(1, 0)), (3, 1));
    }

    #[test]
    fn comparisons_schema_errors() {
        let diag = parse_comparisons("a,b\n2,3\n1,0\n".as_bytes()).unwrap_err();
        assert!(matches!(diag, Error::SchemaViolation { row: Some(1), col: Some(0), .. }), "{diag}");
        let bad_cell = parse_comparisons("a,b\n0,x\n1,0\n".as_bytes()).unwrap_err();
        assert!(matches!(bad_cell, Error::SchemaViolation { row: Some(1), col: Some(1), .. }));
        assert!(parse_comparisons("a,b\n0,-1\n1,0\n".as_bytes()).is_err());
        assert!(parse_comparisons("a,b\n0,1\n".as_bytes()).is_err());
        assert!(matches!(
            parse_comparisons("a,b\n0,1,2\n1,0\n".as_bytes()),
            Err(Error::SchemaViolation { row: Some(1), .. })
        ));
    }

    #[test]
    fn distances_parse_and_validate() {
        let d = parse_distances("content_id,generated_id,distance\nc1,g1,0.25\nc2,g2,0.75\n".as_bytes()).unwrap();
        assert_eq!(d.distances(), &[0.25, 0.75]);
        assert_eq!(d.backend_tag(), "file");
        assert!(parse_distances("content,generated,d\nc,g,1\n".as_bytes()).is_err());
        assert!(parse_distances("content_id,generated_id,distance\nc,g,1\nc,g,2\n".as_bytes()).is_err());
        assert!(parse_distances("content_id,generated_id,distance\nc,g,-1\n".as_bytes()).is_err());
        assert!(parse_distances("content_id,generated_id,distance\nc,g,nan\n".as_bytes()).is_err());
        assert!(matches!(
            parse_distances("content_id,generated_id,distance\n".as_bytes()),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn predictions_by_column_name() {
        let p = parse_predictions("image_id,target_artist,predicted_artist\n1,monet,monet\n2,klee,monet\n".as_bytes())
            .unwrap();
        assert_eq!(p, vec![("monet".into(), "monet".into()), ("monet".into(), "klee".into())]);
        assert!(parse_predictions("predicted_artist\nx\n".as_bytes()).is_err());
    }

    #[test]
    fn score_columns_and_alignment() {
        let csv = "method,score,other\nb,2.0,9\na,1.5,8\n";
        let s = parse_score_column(csv.as_bytes(), None).unwrap();
        let o = parse_score_column(csv.as_bytes(), Some("other")).unwrap();
        assert_eq!(s, vec![("b".into(), 2.0), ("a".into(), 1.5)]);
        let (labels, x, y) = align_columns(&s, &o).unwrap();
        assert_eq!(labels, ["b", "a"]);
        assert_eq!((x, y), (vec![2.0, 1.5], vec![9.0, 8.0]));
        assert!(parse_score_column(csv.as_bytes(), Some("missing")).is_err());
        assert!(align_columns(&s, &[("b".into(), 1.0), ("z".into(), 2.0)]).is_err());
    }

    #[test]
    fn report_round_trip_preserves_full_precision() {
        let report = MetricReport {
            schema_version: crate::metric::REPORT_SCHEMA_VERSION,
            fid: 0.1 + 0.2,
            fid_infinity: Some(-1.0 / 3.0),
            mean_content_distance: std::f64::consts::PI / 7.0,
            artfid: (1.0 + std::f64::consts::PI / 7.0) * 1.3,
            artfid_infinity: Some(1e-300),
            deception_rate: Some(2.0 / 3.0),
            extrapolation: None,
            metadata: RunMetadata {
                seeds: vec![u64::MAX],
                ..Default::default()
            },
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        write_report(&report, &path).unwrap();
        assert_eq!(read_report(&path).unwrap(), report);
    }
}
