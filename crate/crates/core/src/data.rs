//! The analyst-visible dataset: one row per first-stage survivor with the
//! second-stage treatment label `z`, a binary outcome `y`, and named
//! covariates.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("column `{column}` row {row}: {message}")]
    BadValue {
        column: String,
        row: usize,
        message: String,
    },
    #[error("column `{0}` is not discrete")]
    NotDiscrete(String),
    #[error("column `{name}` has {got} rows, expected {expected}")]
    Length {
        name: String,
        got: usize,
        expected: usize,
    },
    #[error("duplicate column `{0}`")]
    Duplicate(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Perceived race (the treatment): white or Black.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Race {
    #[serde(rename = "w")]
    White,
    #[serde(rename = "b")]
    Black,
}

impl Race {
    pub const BOTH: [Race; 2] = [Race::White, Race::Black];

    pub fn label(self) -> &'static str {
        match self {
            Race::White => "w",
            Race::Black => "b",
        }
    }

    pub fn is_black(self) -> bool {
        self == Race::Black
    }

    pub fn indicator(self) -> f64 {
        if self.is_black() {
            1.0
        } else {
            0.0
        }
    }

    pub fn parse(s: &str) -> Option<Race> {
        match s.trim() {
            "w" | "W" | "0" => Some(Race::White),
            "b" | "B" | "1" => Some(Race::Black),
            _ => None,
        }
    }
}

impl fmt::Display for Race {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Column {
    Numeric(Vec<f64>),
    Categorical { levels: Vec<String>, codes: Vec<u32> },
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Categorical { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Builds a categorical column from string labels; levels are sorted.
    pub fn categorical<S: AsRef<str>>(labels: &[S]) -> Column {
        let mut levels: Vec<String> = labels.iter().map(|s| s.as_ref().to_string()).collect();
        levels.sort();
        levels.dedup();
        let index: HashMap<&str, u32> = levels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i as u32))
            .collect();
        let codes = labels.iter().map(|s| index[s.as_ref()]).collect();
        Column::Categorical { levels, codes }
    }

    fn cell(&self, row: usize) -> String {
        match self {
            Column::Numeric(v) => fmt_num(v[row]),
            Column::Categorical { levels, codes } => levels[codes[row] as usize].clone(),
        }
    }

    fn take(&self, idx: &[usize]) -> Column {
        match self {
            Column::Numeric(v) => Column::Numeric(idx.iter().map(|&i| v[i]).collect()),
            Column::Categorical { levels, codes } => Column::Categorical {
                levels: levels.clone(),
                codes: idx.iter().map(|&i| codes[i]).collect(),
            },
        }
    }
}

fn fmt_num(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Covariate {
    pub name: String,
    pub column: Column,
}

impl Covariate {
    pub fn numeric(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            column: Column::Numeric(values),
        }
    }

    pub fn categorical<S: AsRef<str>>(name: impl Into<String>, labels: &[S]) -> Self {
        Self {
            name: name.into(),
            column: Column::categorical(labels),
        }
    }

    /// Integer stratum codes. Numeric columns must be integer-valued.
    pub fn discrete_codes(&self) -> Result<Vec<i64>, DataError> {
        match &self.column {
            Column::Categorical { codes, .. } => Ok(codes.iter().map(|&c| c as i64).collect()),
            Column::Numeric(v) => v
                .iter()
                .map(|&x| {
                    if x.is_finite() && x.fract() == 0.0 {
                        Ok(x as i64)
                    } else {
                        Err(DataError::NotDiscrete(self.name.clone()))
                    }
                })
                .collect(),
        }
    }

    fn level_label(&self, code: i64) -> String {
        match &self.column {
            Column::Categorical { levels, .. } => levels[code as usize].clone(),
            Column::Numeric(_) => code.to_string(),
        }
    }

    /// Regression columns: numeric columns enter as-is, categorical columns as
    /// one-hot indicators with the most frequent level dropped (ties go to the
    /// first level in sorted order).
    pub fn encode(&self) -> Vec<(String, Vec<f64>)> {
        match &self.column {
            Column::Numeric(v) => vec![(self.name.clone(), v.clone())],
            Column::Categorical { levels, codes } => {
                let mut counts = vec![0usize; levels.len()];
                for &c in codes {
                    counts[c as usize] += 1;
                }
                let reference = counts
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
                    .map(|(i, _)| i)
                    .unwrap_or(0);
                levels
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != reference && counts[i] > 0)
                    .map(|(i, l)| {
                        let col = codes
                            .iter()
                            .map(|&c| if c as usize == i { 1.0 } else { 0.0 })
                            .collect();
                        (format!("{}={}", self.name, l), col)
                    })
                    .collect()
            }
        }
    }
}

/// Rows observed by the second-stage analyst.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservedDataset {
    z: Vec<Race>,
    y: Vec<u8>,
    covariates: Vec<Covariate>,
}

impl ObservedDataset {
    pub fn new(z: Vec<Race>, y: Vec<u8>, covariates: Vec<Covariate>) -> Result<Self, DataError> {
        let n = z.len();
        if y.len() != n {
            return Err(DataError::Length {
                name: "y".into(),
                got: y.len(),
                expected: n,
            });
        }
        if let Some(row) = y.iter().position(|&v| v > 1) {
            return Err(DataError::BadValue {
                column: "y".into(),
                row,
                message: "outcome must be 0 or 1".into(),
            });
        }
        let mut seen = std::collections::HashSet::new();
        for c in &covariates {
            if c.name == "z" || c.name == "y" || !seen.insert(c.name.clone()) {
                return Err(DataError::Duplicate(c.name.clone()));
            }
            if c.column.len() != n {
                return Err(DataError::Length {
                    name: c.name.clone(),
                    got: c.column.len(),
                    expected: n,
                });
            }
        }
        Ok(Self { z, y, covariates })
    }

    pub fn empty_like(names: &[&str]) -> Self {
        Self {
            z: vec![],
            y: vec![],
            covariates: names
                .iter()
                .map(|n| Covariate::numeric(*n, vec![]))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn z(&self) -> &[Race] {
        &self.z
    }

    pub fn y(&self) -> &[u8] {
        &self.y
    }

    pub fn y_f64(&self) -> Vec<f64> {
        self.y.iter().map(|&v| v as f64).collect()
    }

    pub fn z_indicator(&self) -> Vec<f64> {
        self.z.iter().map(|r| r.indicator()).collect()
    }

    pub fn covariates(&self) -> &[Covariate] {
        &self.covariates
    }

    pub fn covariate_names(&self) -> Vec<&str> {
        self.covariates.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn covariate(&self, name: &str) -> Result<&Covariate, DataError> {
        self.covariates
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))
    }

    /// Returns a copy with an extra covariate appended.
    pub fn with_covariate(&self, cov: Covariate) -> Result<Self, DataError> {
        let mut covariates = self.covariates.clone();
        covariates.push(cov);
        Self::new(self.z.clone(), self.y.clone(), covariates)
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            z: idx.iter().map(|&i| self.z[i]).collect(),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            covariates: self
                .covariates
                .iter()
                .map(|c| Covariate {
                    name: c.name.clone(),
                    column: c.column.take(idx),
                })
                .collect(),
        }
    }

    /// Per-row stratum keys over `names`, plus a readable label per key.
    pub fn strata(&self, names: &[&str]) -> Result<(Vec<Vec<i64>>, BTreeMap<Vec<i64>, String>), DataError> {
        let cols = names
            .iter()
            .map(|n| {
                let c = self.covariate(n)?;
                Ok((c, c.discrete_codes()?))
            })
            .collect::<Result<Vec<_>, DataError>>()?;
        let keys: Vec<Vec<i64>> = (0..self.len())
            .map(|i| cols.iter().map(|(_, codes)| codes[i]).collect())
            .collect();
        let mut labels = BTreeMap::new();
        for k in &keys {
            labels.entry(k.clone()).or_insert_with(|| {
                if k.is_empty() {
                    "(all)".to_string()
                } else {
                    cols.iter()
                        .zip(k)
                        .map(|((c, _), &code)| format!("{}={}", c.name, c.level_label(code)))
                        .collect::<Vec<_>>()
                        .join(",")
                }
            });
        }
        Ok((keys, labels))
    }

    /// Encoded regression columns for the named covariates.
    pub fn encode(&self, names: &[&str]) -> Result<Vec<(String, Vec<f64>)>, DataError> {
        let mut out = Vec::new();
        for n in names {
            out.extend(self.covariate(n)?.encode());
        }
        Ok(out)
    }

    /// Writes `z,<covariates...>,y`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), DataError> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["z".to_string()];
        header.extend(self.covariates.iter().map(|c| c.name.clone()));
        header.push("y".into());
        wtr.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![self.z[i].label().to_string()];
            rec.extend(self.covariates.iter().map(|c| c.column.cell(i)));
            rec.push(self.y[i].to_string());
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_csv_path(&self, path: &Path) -> Result<(), DataError> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    /// Reads a CSV with required `z` and `y` columns; every other column is
    /// a covariate, numeric when all of its cells parse as numbers and
    /// categorical otherwise.
    pub fn read_csv<R: Read>(r: R) -> Result<Self, DataError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let headers: Vec<String> = rdr.headers()?.iter().map(|s| s.to_string()).collect();
        let zi = headers
            .iter()
            .position(|h| h == "z")
            .ok_or_else(|| DataError::MissingColumn("z".into()))?;
        let yi = headers
            .iter()
            .position(|h| h == "y")
            .ok_or_else(|| DataError::MissingColumn("y".into()))?;
        let mut cells: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
        for rec in rdr.records() {
            let rec = rec?;
            for (j, v) in rec.iter().enumerate() {
                cells[j].push(v.to_string());
            }
        }
        let z = cells[zi]
            .iter()
            .enumerate()
            .map(|(row, s)| {
                Race::parse(s).ok_or_else(|| DataError::BadValue {
                    column: "z".into(),
                    row,
                    message: format!("expected w or b, got `{s}`"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let y = cells[yi]
            .iter()
            .enumerate()
            .map(|(row, s)| match s.as_str() {
                "0" => Ok(0u8),
                "1" => Ok(1u8),
                _ => Err(DataError::BadValue {
                    column: "y".into(),
                    row,
                    message: format!("expected 0 or 1, got `{s}`"),
                }),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut covariates = Vec::new();
        for (j, name) in headers.iter().enumerate() {
            if j == zi || j == yi {
                continue;
            }
            let parsed: Option<Vec<f64>> = cells[j].iter().map(|s| s.parse::<f64>().ok()).collect();
            covariates.push(match parsed {
                Some(v) => Covariate::numeric(name.clone(), v),
                None => Covariate::categorical(name.clone(), &cells[j]),
            });
        }
        Self::new(z, y, covariates)
    }

    pub fn read_csv_path(path: &Path) -> Result<Self, DataError> {
        let f = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> ObservedDataset {
        ObservedDataset::new(
            vec![Race::Black, Race::White, Race::White],
            vec![1, 0, 1],
            vec![
                Covariate::numeric("x", vec![1.0, 0.0, 1.0]),
                Covariate::categorical("offense", &["theft", "drug", "drug"]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn csv_roundtrip() {
        let d = toy();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("z,x,offense,y\nb,1,theft,1\n"));
        let back = ObservedDataset::read_csv(&buf[..]).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn one_hot_drops_most_frequent() {
        let d = toy();
        let enc = d.encode(&["offense"]).unwrap();
        assert_eq!(enc.len(), 1);
        assert_eq!(enc[0].0, "offense=theft");
        assert_eq!(enc[0].1, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(ObservedDataset::new(vec![Race::Black], vec![2], vec![]).is_err());
        assert!(ObservedDataset::read_csv("z,y\nq,1\n".as_bytes()).is_err());
        assert!(matches!(
            ObservedDataset::read_csv("z,x\nb,1\n".as_bytes()),
            Err(DataError::MissingColumn(_))
        ));
    }

    #[test]
    fn strata_require_discrete_values() {
        let d = ObservedDataset::new(
            vec![Race::Black],
            vec![1],
            vec![Covariate::numeric("age", vec![31.5])],
        )
        .unwrap();
        assert!(matches!(d.strata(&["age"]), Err(DataError::NotDiscrete(_))));
        let (keys, labels) = toy().strata(&["x", "offense"]).unwrap();
        assert_eq!(keys[0], vec![1, 1]);
        assert_eq!(labels[&vec![1, 1]], "x=1,offense=theft");
    }
}
