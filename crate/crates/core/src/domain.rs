//! Shared domain types: count panels, public information and secret pairs.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// County-by-month case and death counts.
///
/// Grids are indexed `[county][month]`, both 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountPanel {
    counties: usize,
    months: usize,
    cases: Vec<Vec<u64>>,
    deaths: Vec<Vec<u64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PanelRow {
    county: usize,
    month: usize,
    cases: u64,
    deaths: u64,
}

impl CountPanel {
    pub fn new(cases: Vec<Vec<u64>>, deaths: Vec<Vec<u64>>) -> Result<Self> {
        let counties = cases.len();
        if counties == 0 {
            return Err(Error::Validation("panel must have at least one county".into()));
        }
        let months = cases[0].len();
        if months == 0 {
            return Err(Error::Validation("panel must have at least one month".into()));
        }
        if deaths.len() != counties {
            return Err(Error::Validation(format!(
                "deaths grid has {} counties, cases grid has {counties}",
                deaths.len()
            )));
        }
        let mut problems = Vec::new();
        for j in 0..counties {
            if cases[j].len() != months || deaths[j].len() != months {
                return Err(Error::Validation(format!(
                    "county {j} does not have {months} months in both grids"
                )));
            }
            for t in 0..months {
                if deaths[j][t] > cases[j][t] {
                    problems.push(format!(
                        "county {j} month {t}: deaths {} exceed cases {}",
                        deaths[j][t], cases[j][t]
                    ));
                }
            }
        }
        if !problems.is_empty() {
            return Err(Error::Validation(problems.join("; ")));
        }
        Ok(Self {
            counties,
            months,
            cases,
            deaths,
        })
    }

    pub fn counties(&self) -> usize {
        self.counties
    }

    pub fn months(&self) -> usize {
        self.months
    }

    pub fn cases(&self, county: usize, month: usize) -> u64 {
        self.cases[county][month]
    }

    pub fn deaths(&self, county: usize, month: usize) -> u64 {
        self.deaths[county][month]
    }

    /// Case counts of every county for one month.
    pub fn month_cases(&self, month: usize) -> Vec<u64> {
        self.cases.iter().map(|row| row[month]).collect()
    }

    pub fn month_deaths(&self, month: usize) -> Vec<u64> {
        self.deaths.iter().map(|row| row[month]).collect()
    }

    pub fn month_total(&self, month: usize) -> u64 {
        self.cases.iter().map(|row| row[month]).sum()
    }

    pub fn county_cases(&self, county: usize) -> &[u64] {
        &self.cases[county]
    }

    /// Writes the panel as `county,month,cases,deaths`, one row per cell,
    /// county-major.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        for j in 0..self.counties {
            for t in 0..self.months {
                out.serialize(PanelRow {
                    county: j,
                    month: t,
                    cases: self.cases[j][t],
                    deaths: self.deaths[j][t],
                })?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Parses the CSV schema, collecting every malformed row (by 1-based
    /// line number, header is line 1) instead of stopping at the first.
    pub fn read_csv<R: Read>(reader: R) -> std::result::Result<Self, Vec<String>> {
        let mut input = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut problems = Vec::new();
        match input.headers() {
            Ok(h) => {
                let h: Vec<&str> = h.iter().collect();
                if h != ["county", "month", "cases", "deaths"] {
                    problems.push(format!(
                        "line 1: expected header county,month,cases,deaths, found {}",
                        h.join(",")
                    ));
                    return Err(problems);
                }
            }
            Err(e) => return Err(vec![format!("line 1: {e}")]),
        }
        let mut rows = Vec::new();
        for (i, record) in input.deserialize::<PanelRow>().enumerate() {
            let line = i + 2;
            match record {
                Ok(row) => {
                    if row.deaths > row.cases {
                        problems.push(format!(
                            "line {line}: deaths {} exceed cases {}",
                            row.deaths, row.cases
                        ));
                    }
                    rows.push((line, row));
                }
                Err(e) => problems.push(format!("line {line}: {e}")),
            }
        }
        if rows.is_empty() && problems.is_empty() {
            problems.push("no data rows".to_string());
        }
        if !problems.is_empty() {
            return Err(problems);
        }

        let counties = rows.iter().map(|(_, r)| r.county).max().unwrap_or(0) + 1;
        let months = rows.iter().map(|(_, r)| r.month).max().unwrap_or(0) + 1;
        let mut seen: Vec<Vec<Option<usize>>> = vec![vec![None; months]; counties];
        let mut cases = vec![vec![0u64; months]; counties];
        let mut deaths = vec![vec![0u64; months]; counties];
        for (line, row) in &rows {
            if let Some(first) = seen[row.county][row.month] {
                problems.push(format!(
                    "line {line}: duplicate cell county {} month {} (first at line {first})",
                    row.county, row.month
                ));
                continue;
            }
            seen[row.county][row.month] = Some(*line);
            cases[row.county][row.month] = row.cases;
            deaths[row.county][row.month] = row.deaths;
        }
        for (j, row) in seen.iter().enumerate() {
            for (t, cell) in row.iter().enumerate() {
                if cell.is_none() {
                    problems.push(format!("missing cell county {j} month {t}"));
                }
            }
        }
        if !problems.is_empty() {
            return Err(problems);
        }
        CountPanel::new(cases, deaths).map_err(|e| vec![e.to_string()])
    }
}

/// Realized public information for one release month.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicInfo {
    pub prior_cases: Vec<u64>,
    pub prior_deaths: Vec<u64>,
    pub current_total: u64,
    pub ordering_enforced: bool,
}

impl PublicInfo {
    pub fn new(
        prior_cases: Vec<u64>,
        prior_deaths: Vec<u64>,
        current_total: u64,
        ordering_enforced: bool,
    ) -> Result<Self> {
        if prior_cases.len() != prior_deaths.len() {
            return Err(Error::Validation(format!(
                "prior vectors differ in length ({} vs {})",
                prior_cases.len(),
                prior_deaths.len()
            )));
        }
        Ok(Self {
            prior_cases,
            prior_deaths,
            current_total,
            ordering_enforced,
        })
    }

    /// Public information available when releasing `month`: the previous
    /// month's counts and the current month's case total.
    pub fn from_panel(panel: &CountPanel, month: usize) -> Result<Self> {
        if month == 0 || month >= panel.months() {
            return Err(Error::InvalidInput(format!(
                "month {month} has no preceding month in a {}-month panel",
                panel.months()
            )));
        }
        Self::new(
            panel.month_cases(month - 1),
            panel.month_deaths(month - 1),
            panel.month_total(month),
            true,
        )
    }

    pub fn counties(&self) -> usize {
        self.prior_cases.len()
    }
}

/// Value of a single record on one side of a secret pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RecordValue {
    Binary(bool),
    Bounded { value: f64, lower: f64, upper: f64 },
}

impl RecordValue {
    fn validate(&self) -> Result<()> {
        match *self {
            RecordValue::Binary(_) => Ok(()),
            RecordValue::Bounded {
                value,
                lower,
                upper,
            } => {
                if !(lower <= value && value <= upper) || !lower.is_finite() || !upper.is_finite() {
                    Err(Error::Validation(format!(
                        "bounded record value {value} outside [{lower}, {upper}]"
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// Two disjoint hypotheses about the value of one record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecretPair {
    pub record_index: usize,
    pub value_a: RecordValue,
    pub value_b: RecordValue,
}

impl SecretPair {
    pub fn new(record_index: usize, value_a: RecordValue, value_b: RecordValue) -> Result<Self> {
        value_a.validate()?;
        value_b.validate()?;
        if value_a == value_b {
            return Err(Error::Validation(format!(
                "secret pair for record {record_index} has identical values"
            )));
        }
        match (value_a, value_b) {
            (RecordValue::Binary(_), RecordValue::Binary(_))
            | (RecordValue::Bounded { .. }, RecordValue::Bounded { .. }) => {}
            _ => {
                return Err(Error::Validation(
                    "secret pair mixes binary and bounded record values".into(),
                ))
            }
        }
        Ok(Self {
            record_index,
            value_a,
            value_b,
        })
    }

    /// The `(X_i = 0, X_i = 1)` pair for a binary record.
    pub fn binary(record_index: usize) -> Self {
        Self {
            record_index,
            value_a: RecordValue::Binary(false),
            value_b: RecordValue::Binary(true),
        }
    }

    /// All binary secret pairs over `n` records.
    pub fn all_binary(n: usize) -> Vec<Self> {
        (0..n).map(Self::binary).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> CountPanel {
        CountPanel::new(vec![vec![5, 7], vec![2, 0]], vec![vec![1, 2], vec![2, 0]]).unwrap()
    }

    #[test]
    fn rejects_deaths_above_cases() {
        let err = CountPanel::new(vec![vec![1]], vec![vec![2]]).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn rejects_empty_and_ragged() {
        assert!(CountPanel::new(vec![], vec![]).is_err());
        assert!(CountPanel::new(vec![vec![]], vec![vec![]]).is_err());
        assert!(CountPanel::new(vec![vec![1, 2], vec![1]], vec![vec![0, 0], vec![0]]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let panel = small();
        let mut buf = Vec::new();
        panel.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("county,month,cases,deaths\n0,0,5,1\n"));
        assert_eq!(CountPanel::read_csv(buf.as_slice()).unwrap(), panel);
    }

    #[test]
    fn csv_reports_line_numbers() {
        let text = "county,month,cases,deaths\n0,0,3,1\n0,1,1,4\n";
        let problems = CountPanel::read_csv(text.as_bytes()).unwrap_err();
        assert_eq!(problems.len(), 1);
        assert!(problems[0].starts_with("line 3"), "{problems:?}");
    }

    #[test]
    fn csv_empty_is_error() {
        assert!(CountPanel::read_csv("".as_bytes()).is_err());
        assert!(CountPanel::read_csv("county,month,cases,deaths\n".as_bytes()).is_err());
    }

    #[test]
    fn csv_missing_cell() {
        let text = "county,month,cases,deaths\n0,0,3,1\n1,1,4,1\n";
        let problems = CountPanel::read_csv(text.as_bytes()).unwrap_err();
        assert_eq!(problems.len(), 2);
    }

    #[test]
    fn public_info_from_panel() {
        let info = PublicInfo::from_panel(&small(), 1).unwrap();
        assert_eq!(info.prior_cases, vec![5, 2]);
        assert_eq!(info.prior_deaths, vec![1, 2]);
        assert_eq!(info.current_total, 7);
        assert!(PublicInfo::from_panel(&small(), 0).is_err());
    }

    #[test]
    fn secret_pair_values_differ() {
        assert!(SecretPair::new(0, RecordValue::Binary(true), RecordValue::Binary(true)).is_err());
        let bounded = |v| RecordValue::Bounded {
            value: v,
            lower: 0.0,
            upper: 1.0,
        };
        assert!(SecretPair::new(1, bounded(0.2), bounded(0.7)).is_ok());
        assert!(SecretPair::new(1, bounded(0.2), bounded(1.7)).is_err());
        assert!(SecretPair::new(1, bounded(0.2), RecordValue::Binary(true)).is_err());
        assert_eq!(SecretPair::all_binary(3).len(), 3);
    }
}
