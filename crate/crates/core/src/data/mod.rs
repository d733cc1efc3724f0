//! Price panels, cleaning, returns and scenario matrices.

mod copula;

pub use copula::{copula_simulate, spearman_matrix, CopulaFamily, CopulaOutput};

use std::io::{Read, Write};

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::format::g17;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("parse error at line {row}, column {column:?}: {message}")]
    Parse {
        row: u64,
        column: String,
        message: String,
    },
    #[error("duplicate date {date} at line {row}")]
    DuplicateDate { row: u64, date: NaiveDate },
    #[error("non-positive price {value} at line {row}, column {column:?}")]
    NonPositivePrice { row: u64, column: String, value: f64 },
    #[error("nothing left after cleaning")]
    EmptyAfterCleaning,
    #[error("need at least {needed} rows, got {got}")]
    InsufficientHistory { needed: usize, got: usize },
    #[error("coverage must lie in (0, 1], got {0}")]
    BadCoverage(f64),
    #[error("panel has missing entries; clean it first")]
    MissingEntries,
    #[error("bad scenario matrix: {0}")]
    BadMatrix(String),
    #[error("csv: {0}")]
    Csv(String),
}

impl From<csv::Error> for DataError {
    fn from(e: csv::Error) -> Self {
        DataError::Csv(e.to_string())
    }
}

/// Non-fatal conditions met while processing data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DataWarning {
    /// A constant column; it is simulated as that constant.
    DegenerateColumn { ticker: String },
}

/// Dated prices for a set of tickers. `None` marks a missing quote.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    pub dates: Vec<NaiveDate>,
    pub tickers: Vec<String>,
    /// One row per date.
    pub prices: Vec<Vec<Option<f64>>>,
}

impl PricePanel {
    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn n_tickers(&self) -> usize {
        self.tickers.len()
    }

    pub fn is_complete(&self) -> bool {
        self.prices.iter().all(|r| r.iter().all(Option::is_some))
    }

    /// Keep tickers `0, k, 2k, ...`.
    pub fn take_every(&self, k: usize) -> PricePanel {
        let k = k.max(1);
        let keep: Vec<usize> = (0..self.n_tickers()).step_by(k).collect();
        self.select_tickers(&keep)
    }

    fn select_tickers(&self, keep: &[usize]) -> PricePanel {
        PricePanel {
            dates: self.dates.clone(),
            tickers: keep.iter().map(|&j| self.tickers[j].clone()).collect(),
            prices: self
                .prices
                .iter()
                .map(|r| keep.iter().map(|&j| r[j]).collect())
                .collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["date".to_string()];
        header.extend(self.tickers.iter().cloned());
        w.write_record(&header)?;
        for (d, row) in self.dates.iter().zip(&self.prices) {
            let mut rec = vec![d.to_string()];
            rec.extend(row.iter().map(|p| p.map(g17).unwrap_or_default()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| DataError::Csv(e.to_string()))
    }
}

/// Parse a `date,TICKER...` price file. Rows are sorted by date.
pub fn load_price_panel<R: Read>(input: R) -> Result<PricePanel, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = reader.headers()?.clone();
    if header.len() < 2 {
        return Err(DataError::Parse {
            row: 1,
            column: header.get(0).unwrap_or("").to_string(),
            message: "expected a date column and at least one ticker".into(),
        });
    }
    let tickers: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut rows: Vec<(NaiveDate, u64, Vec<Option<f64>>)> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let date_text = record.get(0).unwrap_or("");
        let date = NaiveDate::parse_from_str(date_text, "%Y-%m-%d").map_err(|e| DataError::Parse {
            row: line,
            column: header[0].to_string(),
            message: format!("bad date {date_text:?}: {e}"),
        })?;
        let mut prices = Vec::with_capacity(tickers.len());
        for (j, ticker) in tickers.iter().enumerate() {
            let cell = record.get(j + 1).unwrap_or("");
            if cell.is_empty() {
                prices.push(None);
                continue;
            }
            let value: f64 = cell.parse().map_err(|_| DataError::Parse {
                row: line,
                column: ticker.clone(),
                message: format!("not a number: {cell:?}"),
            })?;
            if !value.is_finite() {
                return Err(DataError::Parse {
                    row: line,
                    column: ticker.clone(),
                    message: format!("not finite: {cell:?}"),
                });
            }
            if value <= 0.0 {
                return Err(DataError::NonPositivePrice {
                    row: line,
                    column: ticker.clone(),
                    value,
                });
            }
            prices.push(Some(value));
        }
        rows.push((date, line, prices));
    }
    rows.sort_by_key(|r| r.0);
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(DataError::DuplicateDate {
            row: w[0].1.max(w[1].1),
            date: w[0].0,
        });
    }
    Ok(PricePanel {
        dates: rows.iter().map(|r| r.0).collect(),
        tickers,
        prices: rows.into_iter().map(|r| r.2).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedTicker {
    pub ticker: String,
    pub coverage: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeptShape {
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "N")]
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub dropped_tickers: Vec<DroppedTicker>,
    pub dropped_dates: usize,
    pub kept: KeptShape,
}

/// Drop tickers quoted on fewer than `coverage` of the original dates, then
/// drop every date where a surviving ticker has no quote.
pub fn clean_panel(panel: &PricePanel, coverage: f64) -> Result<(PricePanel, CleaningReport), DataError> {
    if !(coverage > 0.0 && coverage <= 1.0) {
        return Err(DataError::BadCoverage(coverage));
    }
    let t = panel.n_dates();
    if t == 0 {
        return Err(DataError::EmptyAfterCleaning);
    }
    let mut keep = Vec::new();
    let mut dropped_tickers = Vec::new();
    for (j, ticker) in panel.tickers.iter().enumerate() {
        let present = panel.prices.iter().filter(|r| r[j].is_some()).count();
        let ratio = present as f64 / t as f64;
        if ratio >= coverage {
            keep.push(j);
        } else {
            dropped_tickers.push(DroppedTicker {
                ticker: ticker.clone(),
                coverage: ratio,
            });
        }
    }
    let selected = panel.select_tickers(&keep);
    let rows: Vec<usize> = (0..t)
        .filter(|&i| selected.prices[i].iter().all(Option::is_some))
        .collect();
    if keep.is_empty() || rows.is_empty() {
        return Err(DataError::EmptyAfterCleaning);
    }
    let cleaned = PricePanel {
        dates: rows.iter().map(|&i| selected.dates[i]).collect(),
        tickers: selected.tickers.clone(),
        prices: rows.iter().map(|&i| selected.prices[i].clone()).collect(),
    };
    let report = CleaningReport {
        dropped_tickers,
        dropped_dates: t - rows.len(),
        kept: KeptShape {
            t: cleaned.n_dates(),
            n: cleaned.n_tickers(),
        },
    };
    Ok((cleaned, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frequency {
    #[default]
    Daily,
    Weekly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReturnKind {
    #[default]
    Simple,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    #[default]
    Historical,
    Simulated,
}

/// T scenarios of N asset returns, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioMatrix {
    values: Vec<f64>,
    rows: usize,
    cols: usize,
    pub tickers: Vec<String>,
    /// Date of each row, when the rows come from dated prices.
    pub dates: Option<Vec<NaiveDate>>,
    pub frequency: Frequency,
    pub source: Source,
    pub seed: Option<u64>,
}

impl ScenarioMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>, tickers: Vec<String>) -> Result<Self, DataError> {
        let cols = tickers.len();
        if cols == 0 {
            return Err(DataError::BadMatrix("no assets".into()));
        }
        let n_rows = rows.len();
        let mut values = Vec::with_capacity(n_rows * cols);
        for (i, r) in rows.into_iter().enumerate() {
            if r.len() != cols {
                return Err(DataError::BadMatrix(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            if let Some(j) = r.iter().position(|v| !v.is_finite()) {
                return Err(DataError::BadMatrix(format!("non-finite entry at ({i}, {j})")));
            }
            values.extend(r);
        }
        Ok(Self {
            values,
            rows: n_rows,
            cols,
            tickers,
            dates: None,
            frequency: Frequency::Daily,
            source: Source::Historical,
            seed: None,
        })
    }

    /// Matrix with generated tickers `A1, A2, ...`.
    pub fn unlabeled(rows: Vec<Vec<f64>>) -> Result<Self, DataError> {
        let n = rows.first().map_or(0, Vec::len);
        Self::from_rows(rows, (1..=n).map(|j| format!("A{j}")).collect())
    }

    pub fn n_scenarios(&self) -> usize {
        self.rows
    }

    pub fn n_assets(&self) -> usize {
        self.cols
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.cols..(t + 1) * self.cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.cols)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn get(&self, t: usize, j: usize) -> f64 {
        self.values[t * self.cols + j]
    }

    /// Per-asset sample means.
    pub fn means(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for r in self.rows() {
            for (s, v) in sums.iter_mut().zip(r) {
                *s += v;
            }
        }
        sums.iter().map(|s| s / self.rows as f64).collect()
    }

    /// The trailing `t` rows.
    fn tail(&self, t: usize) -> ScenarioMatrix {
        let start = self.rows - t;
        ScenarioMatrix {
            values: self.values[start * self.cols..].to_vec(),
            rows: t,
            cols: self.cols,
            tickers: self.tickers.clone(),
            dates: self.dates.as_ref().map(|d| d[start..].to_vec()),
            frequency: self.frequency,
            source: self.source,
            seed: self.seed,
        }
    }

    /// Writes `date,TICKER...`; rows without a date are labelled 1, 2, ...
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["date".to_string()];
        header.extend(self.tickers.iter().cloned());
        w.write_record(&header)?;
        for (i, r) in self.rows().enumerate() {
            let label = match &self.dates {
                Some(d) => d[i].to_string(),
                None => (i + 1).to_string(),
            };
            let mut rec = vec![label];
            rec.extend(r.iter().map(|v| g17(*v)));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| DataError::Csv(e.to_string()))
    }

    /// Reads what [`ScenarioMatrix::write_csv`] writes. Dates are kept when
    /// every label parses as one.
    pub fn read_csv<R: Read>(input: R) -> Result<Self, DataError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(input);
        let header = reader.headers()?.clone();
        let tickers: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut labels = Vec::new();
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            labels.push(record.get(0).unwrap_or("").to_string());
            let mut row = Vec::with_capacity(tickers.len());
            for (j, ticker) in tickers.iter().enumerate() {
                let cell = record.get(j + 1).unwrap_or("");
                let v: f64 = cell.parse().map_err(|_| DataError::Parse {
                    row: line,
                    column: ticker.clone(),
                    message: format!("not a number: {cell:?}"),
                })?;
                row.push(v);
            }
            rows.push(row);
        }
        let mut m = Self::from_rows(rows, tickers)?;
        let dates: Result<Vec<NaiveDate>, _> = labels
            .iter()
            .map(|l| NaiveDate::parse_from_str(l, "%Y-%m-%d"))
            .collect();
        m.dates = dates.ok().filter(|d| !d.is_empty());
        Ok(m)
    }
}

/// Returns between consecutive observations. Weekly uses the last
/// observation of each ISO week.
pub fn compute_returns(
    panel: &PricePanel,
    frequency: Frequency,
    kind: ReturnKind,
) -> Result<ScenarioMatrix, DataError> {
    if !panel.is_complete() {
        return Err(DataError::MissingEntries);
    }
    let picked: Vec<usize> = match frequency {
        Frequency::Daily => (0..panel.n_dates()).collect(),
        Frequency::Weekly => {
            let week = |i: usize| {
                let w = panel.dates[i].iso_week();
                (w.year(), w.week())
            };
            (0..panel.n_dates())
                .filter(|&i| i + 1 == panel.n_dates() || week(i) != week(i + 1))
                .collect()
        }
    };
    if picked.len() < 2 {
        return Err(DataError::InsufficientHistory {
            needed: 2,
            got: picked.len(),
        });
    }
    let price = |i: usize, j: usize| panel.prices[i][j].expect("complete panel");
    let rows: Vec<Vec<f64>> = picked
        .windows(2)
        .map(|w| {
            (0..panel.n_tickers())
                .map(|j| {
                    let (p0, p1) = (price(w[0], j), price(w[1], j));
                    match kind {
                        ReturnKind::Simple => p1 / p0 - 1.0,
                        ReturnKind::Log => (p1 / p0).ln(),
                    }
                })
                .collect()
        })
        .collect();
    let mut m = ScenarioMatrix::from_rows(rows, panel.tickers.clone())?;
    m.dates = Some(picked[1..].iter().map(|&i| panel.dates[i]).collect());
    m.frequency = frequency;
    Ok(m)
}

/// The last `t` rows, order preserved.
pub fn historical_scenarios(returns: &ScenarioMatrix, t: usize) -> Result<ScenarioMatrix, DataError> {
    if t == 0 || returns.n_scenarios() < t {
        return Err(DataError::InsufficientHistory {
            needed: t.max(1),
            got: returns.n_scenarios(),
        });
    }
    let mut m = returns.tail(t);
    m.source = Source::Historical;
    Ok(m)
}
