//! CSV ingestion for the paired-block analysis of real data.
//!
//! Format: UTF-8, comma separated, first row is the header. An empty cell or
//! a token that does not parse as a finite number counts as missing. Rows
//! with a missing value in any selected column are dropped and counted;
//! missing values in unselected columns are ignored. Retained columns are
//! centered to mean zero. Rows are never imputed.

use crate::error::{Error, Result};
use crate::linalg::RMat;
use std::path::Path;

/// Column selector: a header name, or a zero-based index for headerless
/// reference. Names win when a token matches both.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnRef {
    Name(String),
    Index(usize),
}

/// Parse a comma-separated selector list; numeric tokens become indices.
pub fn parse_column_refs(s: &str) -> Vec<ColumnRef> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| match t.parse::<usize>() {
            Ok(i) => ColumnRef::Index(i),
            Err(_) => ColumnRef::Name(t.to_string()),
        })
        .collect()
}

/// Two centered variable blocks sharing retained rows.
#[derive(Debug, Clone)]
pub struct DatasetFrame {
    pub x_names: Vec<String>,
    pub y_names: Vec<String>,
    /// p x n, one row per x variable, columns centered to mean zero.
    pub x: RMat,
    /// q x n, one row per y variable.
    pub y: RMat,
    pub retained_rows: usize,
    pub dropped_rows: usize,
}

impl DatasetFrame {
    pub fn p(&self) -> usize {
        self.x.nrows()
    }
    pub fn q(&self) -> usize {
        self.y.nrows()
    }
}

fn resolve(header: &[String], refs: &[ColumnRef]) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(refs.len());
    for r in refs {
        let idx = match r {
            ColumnRef::Name(name) => header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Config(format!("unknown column '{name}'")))?,
            ColumnRef::Index(i) => {
                if *i >= header.len() {
                    return Err(Error::Config(format!(
                        "column index {i} out of range, file has {} columns",
                        header.len()
                    )));
                }
                *i
            }
        };
        if out.contains(&idx) {
            return Err(Error::Config(format!(
                "column '{}' selected twice",
                header[idx]
            )));
        }
        out.push(idx);
    }
    Ok(out)
}

fn parse_cell(tok: &str) -> Option<f64> {
    let t = tok.trim();
    if t.is_empty() {
        return None;
    }
    t.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Load the selected columns of a CSV file, drop incomplete rows, and center
/// each selected column to mean zero.
pub fn ingest_csv<P: AsRef<Path>>(
    path: P,
    x_cols: &[ColumnRef],
    y_cols: &[ColumnRef],
) -> Result<DatasetFrame> {
    let text = std::fs::read_to_string(path)?;
    ingest_csv_str(&text, x_cols, y_cols)
}

/// [`ingest_csv`] over in-memory text.
pub fn ingest_csv_str(text: &str, x_cols: &[ColumnRef], y_cols: &[ColumnRef]) -> Result<DatasetFrame> {
    if x_cols.is_empty() {
        return Err(Error::Config("no x columns selected".into()));
    }
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut lines = text.lines().map(|l| l.trim_end_matches('\r'));
    let header: Vec<String> = match lines.next() {
        Some(h) if !h.trim().is_empty() => h.split(',').map(|t| t.trim().to_string()).collect(),
        _ => return Err(Error::Config("csv file has no header row".into())),
    };
    let xi = resolve(&header, x_cols)?;
    let yi = resolve(&header, y_cols)?;
    if let Some(shared) = xi.iter().find(|i| yi.contains(i)) {
        return Err(Error::Config(format!(
            "column '{}' appears in both x and y selections",
            header[*shared]
        )));
    }

    let selected: Vec<usize> = xi.iter().chain(yi.iter()).copied().collect();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut dropped = 0usize;
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        let mut row = Vec::with_capacity(selected.len());
        let mut ok = true;
        for &c in &selected {
            match cells.get(c).and_then(|t| parse_cell(t)) {
                Some(v) => row.push(v),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            rows.push(row);
        } else {
            dropped += 1;
        }
    }

    let n = rows.len();
    let (p, q) = (xi.len(), yi.len());
    if n <= p + q {
        return Err(Error::InsufficientData(format!(
            "{n} retained rows for {p}+{q} variables; need more rows than variables"
        )));
    }

    // center each selected column over retained rows
    let k = selected.len();
    let mut means = vec![0.0; k];
    for row in &rows {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }

    let block = |offset: usize, count: usize| -> RMat {
        RMat::from_fn(count, n, |i, j| rows[j][offset + i] - means[offset + i])
    };
    Ok(DatasetFrame {
        x_names: xi.iter().map(|&i| header[i].clone()).collect(),
        y_names: yi.iter().map(|&i| header[i].clone()).collect(),
        x: block(0, p),
        y: block(p, q),
        retained_rows: n,
        dropped_rows: dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(s: &[&str]) -> Vec<ColumnRef> {
        s.iter().map(|t| ColumnRef::Name(t.to_string())).collect()
    }

    #[test]
    fn drops_and_counts_incomplete_rows() {
        let csv = "a,b,c\n1,2,3\n4,,6\n7,8,9\n10,11,x\n13,14,15\n";
        let f = ingest_csv_str(csv, &names(&["a"]), &names(&["b"])).unwrap();
        // "4,,6" misses selected b; "10,11,x" is bad only in unselected c
        assert_eq!(f.retained_rows, 4);
        assert_eq!(f.dropped_rows, 1);
        assert_eq!(f.p(), 1);
        assert_eq!(f.q(), 1);
    }

    #[test]
    fn missing_cell_in_unselected_column_is_ignored() {
        let csv = "a,b,c\n1,2,\n4,5,\n7,8,9\n";
        let f = ingest_csv_str(csv, &names(&["a"]), &names(&["b"])).unwrap();
        assert_eq!(f.retained_rows, 3);
        assert_eq!(f.dropped_rows, 0);
    }

    #[test]
    fn selected_columns_are_centered() {
        let csv = "a,b\n1,10\n2,20\n3,30\n4,40\n";
        let f = ingest_csv_str(csv, &names(&["a"]), &names(&["b"])).unwrap();
        assert!(f.x.row(0).sum().abs() < 1e-12);
        assert!(f.y.row(0).sum().abs() < 1e-12);
        assert!((f.x[(0, 0)] - (1.0 - 2.5)).abs() < 1e-12);
    }

    #[test]
    fn shared_column_rejected() {
        let csv = "a,b\n1,2\n3,4\n5,6\n";
        assert!(matches!(
            ingest_csv_str(csv, &names(&["a"]), &names(&["a"])),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn unknown_column_rejected() {
        let csv = "a,b\n1,2\n3,4\n5,6\n";
        assert!(matches!(
            ingest_csv_str(csv, &names(&["z"]), &names(&["b"])),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn index_selectors_resolve_positionally() {
        let csv = "a,b,c\n1,2,3\n4,5,6\n7,8,9\n10,11,12\n";
        let f = ingest_csv_str(csv, &[ColumnRef::Index(2)], &[ColumnRef::Index(0)]).unwrap();
        assert_eq!(f.x_names, vec!["c"]);
        assert_eq!(f.y_names, vec!["a"]);
    }

    #[test]
    fn too_few_rows_for_variable_count() {
        let csv = "a,b,c\n1,2,3\n4,5,6\n7,8,9\n";
        let sel = ingest_csv_str(csv, &names(&["a", "b"]), &names(&["c"]));
        assert!(matches!(sel, Err(Error::InsufficientData(_))));
    }

    #[test]
    fn header_only_and_empty_files_rejected() {
        assert!(matches!(
            ingest_csv_str("", &names(&["a"]), &[]),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            ingest_csv_str("a,b\n", &names(&["a"]), &names(&["b"])),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn selector_parsing_mixes_names_and_indices() {
        let refs = parse_column_refs("alpha, 3 ,beta");
        assert_eq!(
            refs,
            vec![
                ColumnRef::Name("alpha".into()),
                ColumnRef::Index(3),
                ColumnRef::Name("beta".into()),
            ]
        );
    }
}
