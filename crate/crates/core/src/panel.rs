//! Return panel: T periods by n assets of simple (decimal) returns.
//!
//! The loader accepts CSV with a header row of asset names. A first column
//! named `date` (any case) is treated as the period index; every other
//! column must parse as a finite decimal return.

use std::path::Path;

use crate::error::Error;
use crate::sets::PortfolioWeights;
use crate::Result;

/// Row-major T x n matrix of simple returns with asset names and an
/// optional period index. All entries are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    data: Vec<f64>,
    periods: usize,
    assets: usize,
    names: Vec<String>,
    dates: Option<Vec<String>>,
}

impl ReturnPanel {
    pub fn new(rows: Vec<Vec<f64>>, names: Vec<String>, dates: Option<Vec<String>>) -> Result<Self> {
        let periods = rows.len();
        if periods == 0 {
            return Err(Error::InvalidPanel("no return rows".into()));
        }
        let assets = names.len();
        if assets == 0 {
            return Err(Error::InvalidPanel("no asset columns".into()));
        }
        check_unique_names(&names)?;
        if let Some(d) = &dates {
            if d.len() != periods {
                return Err(Error::InvalidPanel(format!(
                    "{} dates for {} rows",
                    d.len(),
                    periods
                )));
            }
        }
        let mut data = Vec::with_capacity(periods * assets);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != assets {
                return Err(Error::InvalidPanel(format!(
                    "row {} has {} entries, expected {}",
                    i + 1,
                    row.len(),
                    assets
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::InvalidPanel(format!(
                        "non-finite return at row {}, column {} ({})",
                        i + 1,
                        j + 1,
                        names[j]
                    )));
                }
                data.push(v);
            }
        }
        Ok(Self {
            data,
            periods,
            assets,
            names,
            dates,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_path(path.as_ref())?;
        let headers: Vec<String> = reader
            .headers()?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        if headers.is_empty() {
            return Err(Error::InvalidPanel("empty header row".into()));
        }
        let has_dates = headers[0].eq_ignore_ascii_case("date");
        let names: Vec<String> = if has_dates {
            headers[1..].to_vec()
        } else {
            headers.clone()
        };
        if names.is_empty() {
            return Err(Error::InvalidPanel("header has a date column but no assets".into()));
        }
        check_unique_names(&names)?;

        let offset = usize::from(has_dates);
        let mut rows = Vec::new();
        let mut dates = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            if record.len() != headers.len() {
                return Err(Error::InvalidPanel(format!(
                    "row {} has {} fields, expected {}",
                    i + 1,
                    record.len(),
                    headers.len()
                )));
            }
            if has_dates {
                dates.push(record[0].to_string());
            }
            let mut row = Vec::with_capacity(names.len());
            for (j, field) in record.iter().skip(offset).enumerate() {
                let v: f64 = field.parse().map_err(|_| Error::Parse {
                    row: i + 1,
                    column: j + offset + 1,
                    name: names[j].clone(),
                    message: format!("cannot parse {field:?} as a return"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        row: i + 1,
                        column: j + offset + 1,
                        name: names[j].clone(),
                        message: "non-finite return".into(),
                    });
                }
                row.push(v);
            }
            rows.push(row);
        }
        Self::new(rows, names, has_dates.then_some(dates))
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    pub fn assets(&self) -> usize {
        self.assets
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn dates(&self) -> Option<&[String]> {
        self.dates.as_deref()
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.assets..(t + 1) * self.assets]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.assets)
    }

    /// Return series of one portfolio: row-by-row dot product with the weights.
    pub fn portfolio_returns(&self, weights: &PortfolioWeights) -> Result<Vec<f64>> {
        if weights.len() != self.assets {
            return Err(Error::DimensionMismatch {
                expected: self.assets,
                found: weights.len(),
            });
        }
        Ok(self
            .rows()
            .map(|row| dot(weights.as_slice(), row))
            .collect())
    }

    /// Contiguous sub-panel of `len` rows starting at `start`.
    pub fn window(&self, start: usize, len: usize) -> Result<Self> {
        if len == 0 || start + len > self.periods {
            return Err(Error::InvalidPanel(format!(
                "window [{start}, {}) outside panel of {} rows",
                start + len,
                self.periods
            )));
        }
        Ok(Self {
            data: self.data[start * self.assets..(start + len) * self.assets].to_vec(),
            periods: len,
            assets: self.assets,
            names: self.names.clone(),
            dates: self
                .dates
                .as_ref()
                .map(|d| d[start..start + len].to_vec()),
        })
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_unique_names(names: &[String]) -> Result<()> {
    for (j, name) in names.iter().enumerate() {
        if name.is_empty() {
            return Err(Error::InvalidPanel(format!("empty asset name in column {}", j + 1)));
        }
        if names[..j].contains(name) {
            return Err(Error::InvalidPanel(format!(
                "duplicate asset name {name:?} in column {}",
                j + 1
            )));
        }
    }
    Ok(())
}
