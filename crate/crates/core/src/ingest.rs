//! Monthly CSV panels in the layout of the Ken French data library, and
//! alignment of factor and portfolio panels onto a common date range.
//!
//! Raw library downloads carry a free-text preamble, a header row whose first
//! field is usually empty, then `YYYYMM,v1,v2,...` rows. Files that hold
//! several tables (monthly, annual, equal-weighted, ...) are read up to the end
//! of the first monthly table.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Cells at or below this value are the library's "missing" sentinel (-99.99).
pub const MISSING_SENTINEL_MAX: f64 = -99.0;
const MISSING_WRITTEN: &str = "-99.99";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("invalid month {0}: expected YYYYMM with month in 1..=12")]
    InvalidDate(String),
    #[error("row {row}, column {column}: cannot parse {value:?} as a number")]
    MalformedCell {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}: expected {expected} fields, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("duplicate date {0}")]
    DuplicateDate(YearMonth),
    #[error("duplicate column name {0:?}")]
    DuplicateColumn(String),
    #[error("no data rows found")]
    NoData,
    #[error("no header row precedes the first data row")]
    MissingHeader,
    #[error("expected column {0:?} not present")]
    MissingColumn(String),
    #[error("column {column:?} has {found} values, expected {expected}")]
    LengthMismatch {
        column: String,
        expected: usize,
        found: usize,
    },
    #[error("dates are not strictly increasing at {0}")]
    Unordered(YearMonth),
    #[error("no common dates between the panels within {from}..={to}")]
    EmptyRange { from: YearMonth, to: YearMonth },
    #[error("requested endpoint {0} is not present in either panel")]
    EndpointAbsent(YearMonth),
    #[error("column {column:?} still has a missing value at {date}; clean the panel first")]
    MissingCell { column: String, date: YearMonth },
    #[error("required factor column {0:?} is absent")]
    MissingFactor(String),
    #[error("sector {0:?} not found among portfolio columns")]
    UnknownSector(String),
}

/// Calendar month encoded as `YYYYMM`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct YearMonth(u32);

impl YearMonth {
    pub fn new(year: u32, month: u32) -> Result<Self, IngestError> {
        if !(1..=12).contains(&month) || year > 9999 {
            return Err(IngestError::InvalidDate(format!("{year:04}{month:02}")));
        }
        Ok(Self(year * 100 + month))
    }

    pub fn from_yyyymm(code: u32) -> Result<Self, IngestError> {
        Self::new(code / 100, code % 100)
    }

    pub fn yyyymm(self) -> u32 {
        self.0
    }

    pub fn year(self) -> u32 {
        self.0 / 100
    }

    pub fn month(self) -> u32 {
        self.0 % 100
    }

    /// Months since January of year 0.
    pub fn ordinal(self) -> u32 {
        self.year() * 12 + self.month() - 1
    }

    pub fn from_ordinal(ordinal: u32) -> Self {
        Self((ordinal / 12) * 100 + ordinal % 12 + 1)
    }

    pub fn succ(self) -> Self {
        if self.month() == 12 {
            Self((self.year() + 1) * 100 + 1)
        } else {
            Self(self.0 + 1)
        }
    }
}

impl TryFrom<u32> for YearMonth {
    type Error = IngestError;

    fn try_from(code: u32) -> Result<Self, Self::Error> {
        Self::from_yyyymm(code)
    }
}

impl From<YearMonth> for u32 {
    fn from(ym: YearMonth) -> u32 {
        ym.0
    }
}

impl FromStr for YearMonth {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.len() != 6 || !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(IngestError::InvalidDate(s.to_string()));
        }
        let code: u32 = s.parse().map_err(|_| IngestError::InvalidDate(s.to_string()))?;
        Self::from_yyyymm(code)
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:06}", self.0)
    }
}

/// One named monthly series. Missing cells hold `NaN` and are flagged in `missing`.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub values: Vec<f64>,
    pub missing: Vec<bool>,
}

impl Series {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        let missing = values.iter().map(|v| v.is_nan()).collect();
        Self {
            name: name.into(),
            values,
            missing,
        }
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }
}

/// Date-indexed table of monthly series, values in percent per month.
#[derive(Debug, Clone)]
pub struct MonthlyPanel {
    dates: Vec<YearMonth>,
    columns: Vec<Series>,
}

impl PartialEq for MonthlyPanel {
    // NaN != NaN, so missing cells compare through the mask.
    fn eq(&self, other: &Self) -> bool {
        self.dates == other.dates
            && self.columns.len() == other.columns.len()
            && self.columns.iter().zip(&other.columns).all(|(a, b)| {
                a.name == b.name
                    && a.missing == b.missing
                    && a.values
                        .iter()
                        .zip(&b.values)
                        .zip(&a.missing)
                        .all(|((x, y), &m)| m || x.to_bits() == y.to_bits())
            })
    }
}

impl MonthlyPanel {
    pub fn new(dates: Vec<YearMonth>, columns: Vec<Series>) -> Result<Self, IngestError> {
        for w in dates.windows(2) {
            if w[1] == w[0] {
                return Err(IngestError::DuplicateDate(w[1]));
            }
            if w[1] < w[0] {
                return Err(IngestError::Unordered(w[1]));
            }
        }
        let mut seen = HashMap::new();
        for col in &columns {
            if seen.insert(col.name.as_str(), ()).is_some() {
                return Err(IngestError::DuplicateColumn(col.name.clone()));
            }
            if col.values.len() != dates.len() || col.missing.len() != dates.len() {
                return Err(IngestError::LengthMismatch {
                    column: col.name.clone(),
                    expected: dates.len(),
                    found: col.values.len(),
                });
            }
        }
        Ok(Self { dates, columns })
    }

    pub fn dates(&self) -> &[YearMonth] {
        &self.dates
    }

    pub fn columns(&self) -> &[Series] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<&Series> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    pub(crate) fn columns_mut(&mut self) -> &mut [Series] {
        &mut self.columns
    }

    /// Rows with dates in `from..=to`.
    pub fn slice(&self, from: YearMonth, to: YearMonth) -> Self {
        let keep: Vec<usize> = (0..self.dates.len())
            .filter(|&i| self.dates[i] >= from && self.dates[i] <= to)
            .collect();
        Self {
            dates: keep.iter().map(|&i| self.dates[i]).collect(),
            columns: self
                .columns
                .iter()
                .map(|c| Series {
                    name: c.name.clone(),
                    values: keep.iter().map(|&i| c.values[i]).collect(),
                    missing: keep.iter().map(|&i| c.missing[i]).collect(),
                })
                .collect(),
        }
    }

    /// Inner join on dates. Columns already present are kept from `self`, except
    /// that an SMB column arriving from a five-factor file (one that also carries
    /// RMW or CMA) is kept as `SMB5`.
    pub fn merge(&self, other: &MonthlyPanel) -> Self {
        let other_is_ff5 = other
            .column_names()
            .any(|n| matches!(canonical_factor_name(n), Some("RMW" | "CMA")));
        let pos: HashMap<YearMonth, usize> =
            other.dates.iter().enumerate().map(|(i, d)| (*d, i)).collect();
        let rows: Vec<(usize, usize)> = self
            .dates
            .iter()
            .enumerate()
            .filter_map(|(i, d)| pos.get(d).map(|&j| (i, j)))
            .collect();

        let pick = |s: &Series, left: bool, name: String| Series {
            name,
            values: rows
                .iter()
                .map(|&(i, j)| s.values[if left { i } else { j }])
                .collect(),
            missing: rows
                .iter()
                .map(|&(i, j)| s.missing[if left { i } else { j }])
                .collect(),
        };

        let mut columns: Vec<Series> = self
            .columns
            .iter()
            .map(|c| pick(c, true, c.name.clone()))
            .collect();
        let mut present: Vec<Option<&'static str>> = self
            .columns
            .iter()
            .map(|c| canonical_factor_name(&c.name))
            .collect();
        for c in &other.columns {
            let canon = canonical_factor_name(&c.name);
            let mut name = c.name.clone();
            if other_is_ff5 && canon == Some("SMB") {
                name = "SMB5".to_string();
            } else if columns.iter().any(|x| x.name == c.name)
                || (canon.is_some() && present.contains(&canon))
            {
                continue;
            }
            if columns.iter().any(|x| x.name == name) {
                continue;
            }
            present.push(canonical_factor_name(&name));
            columns.push(pick(c, false, name));
        }
        Self {
            dates: rows.iter().map(|&(i, _)| self.dates[i]).collect(),
            columns,
        }
    }

    /// CSV text readable by [`parse_panel_csv`]; missing cells are written as `-99.99`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("Date");
        for c in &self.columns {
            out.push(',');
            out.push_str(&c.name);
        }
        out.push('\n');
        for (i, d) in self.dates.iter().enumerate() {
            out.push_str(&d.to_string());
            for c in &self.columns {
                out.push(',');
                if c.missing[i] {
                    out.push_str(MISSING_WRITTEN);
                } else {
                    out.push_str(&c.values[i].to_string());
                }
            }
            out.push('\n');
        }
        out
    }
}

fn split_fields(line: &str) -> Vec<&str> {
    line.split(',').map(str::trim).collect()
}

fn is_data_row(fields: &[&str]) -> bool {
    fields.len() >= 2 && fields[0].parse::<YearMonth>().is_ok()
}

/// Parse a monthly panel. Leading banner lines are skipped; the header is the
/// last non-blank line with at least two fields before the first data row.
/// Reading stops at the first non-data line after data has started.
///
/// When `expected_columns` is given, each name must be present and the panel
/// keeps only those columns, in the given order.
pub fn parse_panel_csv(
    text: &str,
    expected_columns: Option<&[&str]>,
) -> Result<MonthlyPanel, IngestError> {
    let lines: Vec<&str> = text.lines().collect();
    let first_data = lines
        .iter()
        .position(|l| is_data_row(&split_fields(l)))
        .ok_or(IngestError::NoData)?;
    let header_line = lines[..first_data]
        .iter()
        .rev()
        .find(|l| !l.trim().is_empty())
        .filter(|l| split_fields(l).len() >= 2)
        .ok_or(IngestError::MissingHeader)?;
    let header: Vec<String> = split_fields(header_line)
        .iter()
        .skip(1)
        .map(|s| s.to_string())
        .collect();

    let mut rows: Vec<(YearMonth, Vec<f64>)> = Vec::new();
    for (offset, line) in lines[first_data..].iter().enumerate() {
        let fields = split_fields(line);
        if !is_data_row(&fields) {
            break;
        }
        let row_no = first_data + offset + 1;
        let date: YearMonth = fields[0].parse()?;
        if fields.len() - 1 != header.len() {
            return Err(IngestError::RaggedRow {
                row: row_no,
                expected: header.len() + 1,
                found: fields.len(),
            });
        }
        let mut values = Vec::with_capacity(header.len());
        for (col, raw) in header.iter().zip(&fields[1..]) {
            let v: f64 = raw.parse().map_err(|_| IngestError::MalformedCell {
                row: row_no,
                column: col.clone(),
                value: raw.to_string(),
            })?;
            if !v.is_finite() {
                return Err(IngestError::MalformedCell {
                    row: row_no,
                    column: col.clone(),
                    value: raw.to_string(),
                });
            }
            values.push(if v <= MISSING_SENTINEL_MAX { f64::NAN } else { v });
        }
        rows.push((date, values));
    }

    rows.sort_by_key(|(d, _)| *d);
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(IngestError::DuplicateDate(w[0].0));
    }

    let selected: Vec<usize> = match expected_columns {
        None => (0..header.len()).collect(),
        Some(names) => names
            .iter()
            .map(|n| {
                header
                    .iter()
                    .position(|h| h == n)
                    .ok_or_else(|| IngestError::MissingColumn(n.to_string()))
            })
            .collect::<Result<_, _>>()?,
    };

    let dates = rows.iter().map(|(d, _)| *d).collect();
    let columns = selected
        .iter()
        .map(|&j| Series::new(header[j].clone(), rows.iter().map(|(_, v)| v[j]).collect()))
        .collect();
    MonthlyPanel::new(dates, columns)
}

/// Canonical factor name for the spellings used across library files.
pub fn canonical_factor_name(name: &str) -> Option<&'static str> {
    let key: String = name
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_ascii_uppercase();
    Some(match key.as_str() {
        "MKTRF" => "Mkt-RF",
        "SMB" => "SMB",
        "SMB5" => "SMB5",
        "HML" => "HML",
        "MOM" | "UMD" | "WML" => "MOM",
        "RMW" => "RMW",
        "CMA" => "CMA",
        "RF" => "RF",
        _ => return None,
    })
}

/// Factor columns that every aligned dataset must carry.
pub const BASE_FACTORS: [&str; 4] = ["Mkt-RF", "SMB", "HML", "RF"];

/// Factor and sector columns on a shared, fully observed date index.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedDataset {
    dates: Vec<YearMonth>,
    factors: BTreeMap<String, Vec<f64>>,
    sectors: Vec<(String, Vec<f64>)>,
}

impl AlignedDataset {
    /// Build directly from columns, e.g. for synthetic data. Factor names are
    /// canonicalised; `RF` must be among them.
    pub fn from_columns(
        dates: Vec<YearMonth>,
        factors: Vec<(String, Vec<f64>)>,
        sectors: Vec<(String, Vec<f64>)>,
    ) -> Result<Self, IngestError> {
        let n = dates.len();
        if let Some(w) = dates.windows(2).find(|w| w[1] <= w[0]) {
            return Err(IngestError::Unordered(w[1]));
        }
        let mut map = BTreeMap::new();
        for (name, values) in factors {
            let canon = canonical_factor_name(&name).unwrap_or(name.as_str()).to_string();
            check_column(&canon, &values, n, &dates)?;
            if map.insert(canon.clone(), values).is_some() {
                return Err(IngestError::DuplicateColumn(canon));
            }
        }
        for (name, values) in &sectors {
            check_column(name, values, n, &dates)?;
        }
        if !map.contains_key("RF") {
            return Err(IngestError::MissingFactor("RF".into()));
        }
        Ok(Self {
            dates,
            factors: map,
            sectors,
        })
    }

    pub fn dates(&self) -> &[YearMonth] {
        &self.dates
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// Factor column by canonical name (aliases such as `Mom` are accepted).
    pub fn factor(&self, name: &str) -> Option<&[f64]> {
        let canon = canonical_factor_name(name).unwrap_or(name);
        self.factors.get(canon).map(Vec::as_slice)
    }

    pub fn factor_names(&self) -> impl Iterator<Item = &str> {
        self.factors.keys().map(String::as_str)
    }

    pub fn risk_free(&self) -> &[f64] {
        &self.factors["RF"]
    }

    /// Sector column, matched case-insensitively (`Hitec` finds `HiTec`).
    pub fn sector(&self, name: &str) -> Option<&[f64]> {
        self.sectors
            .iter()
            .find(|(n, _)| n == name)
            .or_else(|| self.sectors.iter().find(|(n, _)| n.eq_ignore_ascii_case(name)))
            .map(|(_, v)| v.as_slice())
    }

    pub fn sector_names(&self) -> impl Iterator<Item = &str> {
        self.sectors.iter().map(|(n, _)| n.as_str())
    }

    /// Sector return minus the risk-free rate.
    pub fn excess_return(&self, sector: &str) -> Result<Vec<f64>, IngestError> {
        let r = self
            .sector(sector)
            .ok_or_else(|| IngestError::UnknownSector(sector.to_string()))?;
        Ok(r.iter().zip(self.risk_free()).map(|(r, f)| r - f).collect())
    }

    /// Error naming the first of `names` with no factor column.
    pub fn require_factors(&self, names: &[&str]) -> Result<(), IngestError> {
        match names.iter().find(|n| self.factor(n).is_none()) {
            Some(n) => Err(IngestError::MissingFactor(n.to_string())),
            None => Ok(()),
        }
    }

    /// Rows `start..end` of every column.
    pub fn rows(&self, start: usize, end: usize) -> Self {
        Self {
            dates: self.dates[start..end].to_vec(),
            factors: self
                .factors
                .iter()
                .map(|(k, v)| (k.clone(), v[start..end].to_vec()))
                .collect(),
            sectors: self
                .sectors
                .iter()
                .map(|(k, v)| (k.clone(), v[start..end].to_vec()))
                .collect(),
        }
    }
}

fn check_column(name: &str, values: &[f64], n: usize, dates: &[YearMonth]) -> Result<(), IngestError> {
    if values.len() != n {
        return Err(IngestError::LengthMismatch {
            column: name.to_string(),
            expected: n,
            found: values.len(),
        });
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(IngestError::MissingCell {
            column: name.to_string(),
            date: dates[i],
        });
    }
    Ok(())
}

/// Intersect the dates of a cleaned factor panel and a cleaned portfolio panel
/// within `from..=to`.
///
/// Every factor column whose name is recognised is kept under its canonical
/// name, and every portfolio column becomes a sector. `Mkt-RF`, `SMB`, `HML`
/// and `RF` are required.
pub fn align_panels(
    factors: &MonthlyPanel,
    portfolios: &MonthlyPanel,
    from: YearMonth,
    to: YearMonth,
) -> Result<AlignedDataset, IngestError> {
    for endpoint in [from, to] {
        if !factors.dates.contains(&endpoint) && !portfolios.dates.contains(&endpoint) {
            return Err(IngestError::EndpointAbsent(endpoint));
        }
    }
    let in_portfolios: HashMap<YearMonth, usize> = portfolios
        .dates
        .iter()
        .enumerate()
        .map(|(i, d)| (*d, i))
        .collect();
    let rows: Vec<(usize, usize)> = factors
        .dates
        .iter()
        .enumerate()
        .filter(|(_, d)| **d >= from && **d <= to)
        .filter_map(|(i, d)| in_portfolios.get(d).map(|&j| (i, j)))
        .collect();
    if rows.is_empty() {
        return Err(IngestError::EmptyRange { from, to });
    }
    let dates: Vec<YearMonth> = rows.iter().map(|&(i, _)| factors.dates[i]).collect();

    let take = |s: &Series, left: bool| -> Result<Vec<f64>, IngestError> {
        rows.iter()
            .map(|&(i, j)| {
                let k = if left { i } else { j };
                if s.missing[k] {
                    Err(IngestError::MissingCell {
                        column: s.name.clone(),
                        date: dates_at(&dates, &rows, i),
                    })
                } else {
                    Ok(s.values[k])
                }
            })
            .collect()
    };

    let mut factor_cols = Vec::new();
    let mut seen = Vec::new();
    for s in &factors.columns {
        if let Some(canon) = canonical_factor_name(&s.name) {
            if seen.contains(&canon) {
                continue;
            }
            seen.push(canon);
            factor_cols.push((canon.to_string(), take(s, true)?));
        }
    }
    for required in BASE_FACTORS {
        if !seen.contains(&required) {
            return Err(IngestError::MissingFactor(required.to_string()));
        }
    }
    let sectors = portfolios
        .columns
        .iter()
        .map(|s| Ok((s.name.clone(), take(s, false)?)))
        .collect::<Result<Vec<_>, IngestError>>()?;

    AlignedDataset::from_columns(dates, factor_cols, sectors)
}

fn dates_at(dates: &[YearMonth], rows: &[(usize, usize)], factor_row: usize) -> YearMonth {
    rows.iter()
        .position(|&(i, _)| i == factor_row)
        .map(|k| dates[k])
        .unwrap_or(dates[0])
}
