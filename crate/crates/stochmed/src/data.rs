//! Column-oriented dataset of binary A/Z/M, outcome Y, and baseline
//! covariates W, plus CSV ingestion and emission.

use std::path::Path;

use crate::error::{Error, Result};

/// The analysis table. A, Z, M are binary; Y is binary or continuous
/// (continuous outcomes are range-bounded inside the estimators); W is a
/// numeric covariate matrix stored column-major.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub a: Vec<u8>,
    pub z: Vec<u8>,
    pub m: Vec<u8>,
    pub y: Vec<f64>,
    pub w: Vec<Vec<f64>>,
    pub w_names: Vec<String>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn n_covariates(&self) -> usize {
        self.w.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 {
            return Err(Error::InvalidInput("dataset is empty".into()));
        }
        if self.z.len() != n || self.m.len() != n || self.y.len() != n {
            return Err(Error::DimensionMismatch(
                "A/Z/M/Y columns have differing lengths".into(),
            ));
        }
        if self.w.len() != self.w_names.len() {
            return Err(Error::DimensionMismatch(
                "covariate names do not match covariate columns".into(),
            ));
        }
        for col in &self.w {
            if col.len() != n {
                return Err(Error::DimensionMismatch(
                    "covariate column length differs from row count".into(),
                ));
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("non-finite covariate value".into()));
            }
        }
        for v in [&self.a, &self.z, &self.m] {
            if v.iter().any(|&b| b > 1) {
                return Err(Error::InvalidInput("binary column outside {0,1}".into()));
            }
        }
        if self.y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite outcome value".into()));
        }
        Ok(())
    }

    pub fn y_is_binary(&self) -> bool {
        self.y.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// Dataset formed by the given row indices (with repetition allowed);
    /// used by the bootstrap.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            a: idx.iter().map(|&i| self.a[i]).collect(),
            z: idx.iter().map(|&i| self.z[i]).collect(),
            m: idx.iter().map(|&i| self.m[i]).collect(),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            w: self
                .w
                .iter()
                .map(|col| idx.iter().map(|&i| col[i]).collect())
                .collect(),
            w_names: self.w_names.clone(),
        }
    }

    pub fn count_a(&self, level: u8) -> usize {
        self.a.iter().filter(|&&ai| ai == level).count()
    }
}

/// Names of the dataset columns inside an input CSV.
#[derive(Clone, Debug)]
pub struct ColumnMapping {
    pub a: String,
    pub z: String,
    pub m: String,
    pub y: String,
    pub w: Vec<String>,
    /// Optional selection indicator; rows with value 0 are dropped.
    pub selection: Option<String>,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        ColumnMapping {
            a: "A".into(),
            z: "Z".into(),
            m: "M".into(),
            y: "Y".into(),
            w: vec!["W1".into(), "W2".into()],
            selection: None,
        }
    }
}

fn parse_binary(field: &str, row: usize, col: &str) -> Result<u8> {
    match field.trim() {
        "0" => Ok(0),
        "1" => Ok(1),
        other => {
            // Accept float spellings of 0/1.
            if let Ok(v) = other.parse::<f64>() {
                if v == 0.0 {
                    return Ok(0);
                }
                if v == 1.0 {
                    return Ok(1);
                }
            }
            Err(Error::BadRow {
                row,
                message: format!("{col} not in {{0,1}}"),
            })
        }
    }
}

fn parse_numeric(field: &str, row: usize, col: &str) -> Result<f64> {
    let t = field.trim();
    if t.is_empty() {
        return Err(Error::BadRow {
            row,
            message: format!("missing value in column {col}"),
        });
    }
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::BadRow {
            row,
            message: format!("non-numeric value '{t}' in column {col}"),
        }),
    }
}

/// Read a dataset from CSV. Binary columns are validated against {0,1} with
/// row-indexed errors (rows are 1-based, excluding the header); rows whose
/// selection indicator is 0 are dropped.
pub fn ingest_csv<P: AsRef<Path>>(path: P, mapping: &ColumnMapping) -> Result<Dataset> {
    let mut reader = csv::Reader::from_path(path.as_ref())?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("column '{name}' not found in input header")))
    };
    let ia = find(&mapping.a)?;
    let iz = find(&mapping.z)?;
    let im = find(&mapping.m)?;
    let iy = find(&mapping.y)?;
    let iw: Vec<usize> = mapping
        .w
        .iter()
        .map(|n| find(n))
        .collect::<Result<Vec<_>>>()?;
    let isel = match &mapping.selection {
        Some(name) => Some(find(name)?),
        None => None,
    };

    let mut ds = Dataset {
        a: Vec::new(),
        z: Vec::new(),
        m: Vec::new(),
        y: Vec::new(),
        w: vec![Vec::new(); iw.len()],
        w_names: mapping.w.clone(),
    };
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record?;
        let field = |i: usize| -> Result<&str> {
            record.get(i).ok_or(Error::BadRow {
                row,
                message: "short record".into(),
            })
        };
        if let Some(is) = isel {
            if parse_binary(field(is)?, row, mapping.selection.as_deref().unwrap())? == 0 {
                continue;
            }
        }
        ds.a.push(parse_binary(field(ia)?, row, &mapping.a)?);
        ds.z.push(parse_binary(field(iz)?, row, &mapping.z)?);
        ds.m.push(parse_binary(field(im)?, row, &mapping.m)?);
        ds.y.push(parse_numeric(field(iy)?, row, &mapping.y)?);
        for (k, &ci) in iw.iter().enumerate() {
            ds.w[k].push(parse_numeric(field(ci)?, row, &mapping.w[k])?);
        }
    }
    ds.validate()?;
    Ok(ds)
}

/// Write a dataset as CSV with columns W..., A, Z, M, Y.
pub fn write_csv<P: AsRef<Path>>(ds: &Dataset, path: P) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    let mut header: Vec<String> = ds.w_names.clone();
    header.extend(["A", "Z", "M", "Y"].map(String::from));
    writer.write_record(&header)?;
    for i in 0..ds.n() {
        let mut rec: Vec<String> = ds.w.iter().map(|c| format_num(c[i])).collect();
        rec.push(ds.a[i].to_string());
        rec.push(ds.z[i].to_string());
        rec.push(ds.m[i].to_string());
        rec.push(format_num(ds.y[i]));
        writer.write_record(&rec)?;
    }
    writer.flush()?;
    Ok(())
}

fn format_num(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        // Shortest round-trippable representation.
        format!("{v}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn ingest_four_row_toy_file() {
        let f = write_tmp("W1,W2,A,Z,M,Y\n0,1,1,0,1,1\n1,0,0,1,0,0\n0,0,1,1,1,1\n1,1,0,0,0,1\n");
        let ds = ingest_csv(f.path(), &ColumnMapping::default()).unwrap();
        assert_eq!(ds.n(), 4);
        assert_eq!(ds.a, vec![1, 0, 1, 0]);
        assert!(ds.y_is_binary());
    }

    #[test]
    fn non_binary_treatment_names_row_and_column() {
        let f = write_tmp("W1,W2,A,Z,M,Y\n0,1,1,0,1,1\n1,0,0,1,0,0\n0,0,2,1,1,1\n");
        let err = ingest_csv(f.path(), &ColumnMapping::default()).unwrap_err();
        assert_eq!(err.to_string(), "row 3: A not in {0,1}");
    }

    #[test]
    fn missing_value_is_rejected() {
        let f = write_tmp("W1,W2,A,Z,M,Y\n0,1,1,0,1,\n");
        let err = ingest_csv(f.path(), &ColumnMapping::default()).unwrap_err();
        assert!(err.to_string().contains("row 1"));
    }

    #[test]
    fn selection_rows_are_dropped() {
        let mapping = ColumnMapping {
            selection: Some("sel".into()),
            ..ColumnMapping::default()
        };
        let f = write_tmp("W1,W2,A,Z,M,Y,sel\n0,1,1,0,1,1,1\n1,0,0,1,0,0,0\n0,0,1,1,1,1,1\n1,1,0,0,0,1,1\n");
        let ds = ingest_csv(f.path(), &mapping).unwrap();
        assert_eq!(ds.n(), 3);
        assert_eq!(ds.a, vec![1, 1, 0]);
    }

    #[test]
    fn continuous_outcome_is_accepted() {
        let f = write_tmp("W1,W2,A,Z,M,Y\n0,1,1,0,1,2.5\n1,0,0,1,0,-1.25\n");
        let ds = ingest_csv(f.path(), &ColumnMapping::default()).unwrap();
        assert!(!ds.y_is_binary());
        assert_eq!(ds.y, vec![2.5, -1.25]);
    }

    #[test]
    fn csv_round_trip_preserves_rows() {
        let f = write_tmp("W1,W2,A,Z,M,Y\n0,1,1,0,1,1\n1,0.5,0,1,0,0\n");
        let ds = ingest_csv(f.path(), &ColumnMapping::default()).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        write_csv(&ds, out.path()).unwrap();
        let back = ingest_csv(out.path(), &ColumnMapping::default()).unwrap();
        assert_eq!(back.a, ds.a);
        assert_eq!(back.y, ds.y);
        assert_eq!(back.w, ds.w);
    }
}
