//! A minimal column table with CSV round-tripping, used for panels.
//!
//! Numeric columns mark missing cells with NaN; text columns with the empty
//! string. Both are written as empty CSV fields.

use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("column {name:?} has {got} rows, expected {expected}")]
    Length {
        name: String,
        got: usize,
        expected: usize,
    },
    #[error("duplicate column {0:?}")]
    Duplicate(String),
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Num(Vec<f64>),
    Text(Vec<String>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Num(v) => v.len(),
            Column::Text(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match self {
            Column::Num(v) => v[row].is_nan(),
            Column::Text(v) => v[row].is_empty(),
        }
    }

    /// Cell as a factor level; integral numbers print without a fraction.
    pub fn level(&self, row: usize) -> Option<String> {
        match self {
            Column::Num(v) => {
                let x = v[row];
                if x.is_nan() {
                    None
                } else {
                    Some(format_number(x))
                }
            }
            Column::Text(v) => (!v[row].is_empty()).then(|| v[row].clone()),
        }
    }

    fn take(&self, rows: &[usize]) -> Column {
        match self {
            Column::Num(v) => Column::Num(rows.iter().map(|&r| v[r]).collect()),
            Column::Text(v) => Column::Text(rows.iter().map(|&r| v[r].clone()).collect()),
        }
    }

    fn cell(&self, row: usize) -> String {
        match self {
            Column::Num(v) if v[row].is_nan() => String::new(),
            Column::Num(v) => format_number(v[row]),
            Column::Text(v) => v[row].clone(),
        }
    }
}

/// Shortest representation that parses back to the same value.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else if x == x.trunc() && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Frame {
    names: Vec<String>,
    columns: Vec<Column>,
}

impl Frame {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn nrows(&self) -> usize {
        self.columns.first().map_or(0, Column::len)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn push(&mut self, name: &str, column: Column) -> Result<(), FrameError> {
        if self.names.iter().any(|n| n == name) {
            return Err(FrameError::Duplicate(name.into()));
        }
        if !self.columns.is_empty() && column.len() != self.nrows() {
            return Err(FrameError::Length {
                name: name.into(),
                got: column.len(),
                expected: self.nrows(),
            });
        }
        self.names.push(name.into());
        self.columns.push(column);
        Ok(())
    }

    pub fn push_num(&mut self, name: &str, values: Vec<f64>) -> Result<(), FrameError> {
        self.push(name, Column::Num(values))
    }

    pub fn push_text(&mut self, name: &str, values: Vec<String>) -> Result<(), FrameError> {
        self.push(name, Column::Text(values))
    }

    /// Replaces an existing column or appends a new one.
    pub fn set_num(&mut self, name: &str, values: Vec<f64>) -> Result<(), FrameError> {
        match self.names.iter().position(|n| n == name) {
            Some(i) if values.len() == self.nrows() => {
                self.columns[i] = Column::Num(values);
                Ok(())
            }
            Some(_) => Err(FrameError::Length {
                name: name.into(),
                got: values.len(),
                expected: self.nrows(),
            }),
            None => self.push_num(name, values),
        }
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.columns[i])
    }

    pub fn num(&self, name: &str) -> Option<&[f64]> {
        match self.column(name)? {
            Column::Num(v) => Some(v),
            Column::Text(_) => None,
        }
    }

    pub fn text(&self, name: &str) -> Option<&[String]> {
        match self.column(name)? {
            Column::Text(v) => Some(v),
            Column::Num(_) => None,
        }
    }

    /// Rows at the given positions, in that order.
    pub fn take(&self, rows: &[usize]) -> Frame {
        Frame {
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| c.take(rows)).collect(),
        }
    }

    pub fn filter(&self, keep: impl Fn(usize) -> bool) -> Frame {
        let rows: Vec<usize> = (0..self.nrows()).filter(|&r| keep(r)).collect();
        self.take(&rows)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), FrameError> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e| FrameError::Csv {
            path: "<output>".into(),
            source: e,
        };
        w.write_record(&self.names).map_err(err)?;
        for r in 0..self.nrows() {
            w.write_record(self.columns.iter().map(|c| c.cell(r))).map_err(err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_path(&self, path: &Path) -> Result<(), FrameError> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(f)
    }

    /// Columns whose non-empty cells all parse as numbers become numeric,
    /// unless listed in `text_columns`.
    pub fn read_csv(path: &Path, text_columns: &[&str]) -> Result<Frame, FrameError> {
        let err = |e| FrameError::Csv {
            path: path.display().to_string(),
            source: e,
        };
        let mut r = csv::Reader::from_path(path).map_err(err)?;
        let names: Vec<String> = r.headers().map_err(err)?.iter().map(str::to_owned).collect();
        let mut raw: Vec<Vec<String>> = vec![Vec::new(); names.len()];
        for rec in r.records() {
            let rec = rec.map_err(err)?;
            for (c, field) in rec.iter().enumerate() {
                raw[c].push(field.trim().to_owned());
            }
        }
        let mut frame = Frame::new();
        for (name, cells) in names.iter().zip(raw) {
            let numeric = !text_columns.contains(&name.as_str())
                && cells.iter().all(|c| c.is_empty() || c.parse::<f64>().is_ok());
            let column = if numeric {
                Column::Num(
                    cells
                        .iter()
                        .map(|c| c.parse::<f64>().unwrap_or(f64::NAN))
                        .collect(),
                )
            } else {
                Column::Text(cells)
            };
            frame.push(name, column)?;
        }
        Ok(frame)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_preserves_missing() {
        let mut f = Frame::new();
        f.push_text("region", vec!["A".into(), "".into(), "C".into()]).unwrap();
        f.push_num("x", vec![1.0, f64::NAN, 0.1 + 0.2]).unwrap();
        f.push_num("t", vec![18.0, 19.0, 20.0]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        f.to_csv_path(&p).unwrap();
        let g = Frame::read_csv(&p, &["region"]).unwrap();
        assert_eq!(g.text("region").unwrap(), f.text("region").unwrap());
        assert!(g.num("x").unwrap()[1].is_nan());
        assert_eq!(g.num("x").unwrap()[2], 0.1 + 0.2);
        assert_eq!(g.column("t").unwrap().level(0).as_deref(), Some("18"));
    }

    #[test]
    fn length_checked() {
        let mut f = Frame::new();
        f.push_num("a", vec![1.0]).unwrap();
        assert!(f.push_num("b", vec![1.0, 2.0]).is_err());
        assert!(f.push_num("a", vec![1.0]).is_err());
    }
}
