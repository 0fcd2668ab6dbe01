//! Monthly returns and factor tables loaded from delimited text.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use super::{CorpusError, FirmId, YearMonth};

pub const RETURNS_HEADER: [&str; 5] = ["firm", "month", "ret", "mktcap", "bm"];
pub const FACTORS_HEADER: [&str; 7] = ["month", "mkt_rf", "smb", "hml", "mom", "liq", "rf"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnRow {
    pub ret: f64,
    /// Market value of equity; `None` when the field is blank.
    pub market_cap: Option<f64>,
    pub book_to_market: Option<f64>,
}

/// Firm-month returns with size and value characteristics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReturnsTable {
    rows: BTreeMap<(FirmId, YearMonth), ReturnRow>,
}

impl ReturnsTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, firm: FirmId, month: YearMonth, row: ReturnRow) -> Result<(), CorpusError> {
        if row.ret <= -1.0 || !row.ret.is_finite() {
            return Err(CorpusError::InvalidValue(format!(
                "return {} for {firm} {month} must be finite and > -1",
                row.ret
            )));
        }
        for (name, v) in [("mktcap", row.market_cap), ("bm", row.book_to_market)] {
            if let Some(v) = v {
                if v <= 0.0 || !v.is_finite() {
                    return Err(CorpusError::InvalidValue(format!(
                        "{name} {v} for {firm} {month} must be positive"
                    )));
                }
            }
        }
        let key = (firm, month);
        if self.rows.contains_key(&key) {
            return Err(CorpusError::DuplicateKey(format!("({}, {})", key.0, key.1)));
        }
        self.rows.insert(key, row);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, firm: &FirmId, month: YearMonth) -> Option<&ReturnRow> {
        self.rows.get(&(firm.clone(), month))
    }

    pub fn ret(&self, firm: &FirmId, month: YearMonth) -> Option<f64> {
        self.get(firm, month).map(|r| r.ret)
    }

    /// Most recent row at or before `month` whose `pick` field is present.
    pub fn latest_at_or_before(
        &self,
        firm: &FirmId,
        month: YearMonth,
        pick: impl Fn(&ReturnRow) -> Option<f64>,
    ) -> Option<f64> {
        self.rows
            .range((firm.clone(), YearMonth::MIN)..=(firm.clone(), month))
            .rev()
            .find_map(|(_, row)| pick(row))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FirmId, YearMonth, &ReturnRow)> {
        self.rows.iter().map(|((f, m), r)| (f, *m, r))
    }

    pub fn from_reader(reader: impl Read) -> Result<Self, CorpusError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let cols = column_positions(rdr.headers()?, &RETURNS_HEADER)?;
        let mut table = Self::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            let line = line + 2;
            let field = |i: usize| record.get(cols[i]).unwrap_or("");
            let firm = FirmId::new(field(0))?;
            let month: YearMonth = field(1).parse()?;
            let ret = parse_number(field(2), RETURNS_HEADER[2], line)?;
            let market_cap = parse_optional(field(3), RETURNS_HEADER[3], line)?;
            let book_to_market = parse_optional(field(4), RETURNS_HEADER[4], line)?;
            table.insert(
                firm,
                month,
                ReturnRow {
                    ret,
                    market_cap,
                    book_to_market,
                },
            )?;
        }
        Ok(table)
    }
}

/// One month of factor returns, all as decimal fractions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorRow {
    pub mkt_rf: f64,
    pub smb: f64,
    pub hml: f64,
    pub mom: f64,
    pub liq: f64,
    pub rf: f64,
}

/// Contiguous monthly factor returns.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FactorSeries {
    rows: BTreeMap<YearMonth, FactorRow>,
}

impl FactorSeries {
    /// Builds a series, rejecting duplicate or non-contiguous months.
    pub fn from_rows(rows: impl IntoIterator<Item = (YearMonth, FactorRow)>) -> Result<Self, CorpusError> {
        let mut map = BTreeMap::new();
        for (month, row) in rows {
            if map.insert(month, row).is_some() {
                return Err(CorpusError::DuplicateKey(month.to_string()));
            }
        }
        let months: Vec<YearMonth> = map.keys().copied().collect();
        for pair in months.windows(2) {
            if pair[1] != pair[0].next() {
                return Err(CorpusError::NonContiguousMonths {
                    after: pair[0].to_string(),
                    found: pair[1].to_string(),
                });
            }
        }
        Ok(Self { rows: map })
    }

    pub fn get(&self, month: YearMonth) -> Option<&FactorRow> {
        self.rows.get(&month)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (YearMonth, &FactorRow)> {
        self.rows.iter().map(|(m, r)| (*m, r))
    }

    pub fn from_reader(reader: impl Read) -> Result<Self, CorpusError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let cols = column_positions(rdr.headers()?, &FACTORS_HEADER)?;
        let mut rows = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            let line = line + 2;
            let num = |i: usize| parse_number(record.get(cols[i]).unwrap_or(""), FACTORS_HEADER[i], line);
            let month: YearMonth = record.get(cols[0]).unwrap_or("").parse()?;
            rows.push((
                month,
                FactorRow {
                    mkt_rf: num(1)?,
                    smb: num(2)?,
                    hml: num(3)?,
                    mom: num(4)?,
                    liq: num(5)?,
                    rf: num(6)?,
                },
            ));
        }
        Self::from_rows(rows)
    }
}

fn column_positions(headers: &csv::StringRecord, required: &[&str]) -> Result<Vec<usize>, CorpusError> {
    required
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h == *name)
                .ok_or_else(|| CorpusError::MissingColumn((*name).to_string()))
        })
        .collect()
}

fn parse_number(field: &str, column: &str, line: usize) -> Result<f64, CorpusError> {
    field
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| CorpusError::ParseNumber {
            line,
            column: column.to_string(),
            value: field.to_string(),
        })
}

fn parse_optional(field: &str, column: &str, line: usize) -> Result<Option<f64>, CorpusError> {
    if field.is_empty() {
        Ok(None)
    } else {
        parse_number(field, column, line).map(Some)
    }
}

fn open(path: &Path) -> Result<std::fs::File, CorpusError> {
    std::fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_returns(path: impl AsRef<Path>) -> Result<ReturnsTable, CorpusError> {
    ReturnsTable::from_reader(open(path.as_ref())?)
}

pub fn load_factors(path: impl AsRef<Path>) -> Result<FactorSeries, CorpusError> {
    FactorSeries::from_reader(open(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_row_returns() {
        let csv = "firm,month,ret,mktcap,bm\nAAPL,2020-03,0.01,1000,0.5\nAAPL,2020-04,-0.02,990,0.51\n";
        let t = ReturnsTable::from_reader(csv.as_bytes()).unwrap();
        assert_eq!(t.len(), 2);
        let firm = FirmId::new("AAPL").unwrap();
        assert_eq!(t.ret(&firm, "2020-04".parse().unwrap()), Some(-0.02));
    }

    #[test]
    fn duplicate_firm_month_rejected() {
        let csv = "firm,month,ret,mktcap,bm\nAAPL,2020-03,0.01,1000,0.5\nAAPL,2020-03,0.02,1000,0.5\n";
        let err = ReturnsTable::from_reader(csv.as_bytes()).unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateKey(_)), "{err}");
    }

    #[test]
    fn returns_validation() {
        let bad_ret = "firm,month,ret,mktcap,bm\nA,2020-03,-1.0,1,1\n";
        assert!(ReturnsTable::from_reader(bad_ret.as_bytes()).is_err());
        let bad_cap = "firm,month,ret,mktcap,bm\nA,2020-03,0.1,0,1\n";
        assert!(ReturnsTable::from_reader(bad_cap.as_bytes()).is_err());
        let bad_num = "firm,month,ret,mktcap,bm\nA,2020-03,abc,1,1\n";
        let err = ReturnsTable::from_reader(bad_num.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("ret"), "{err}");
        let blank = "firm,month,ret,mktcap,bm\nA,2020-03,0.1,,\n";
        let t = ReturnsTable::from_reader(blank.as_bytes()).unwrap();
        let firm = FirmId::new("A").unwrap();
        assert_eq!(t.get(&firm, "2020-03".parse().unwrap()).unwrap().market_cap, None);
    }

    #[test]
    fn latest_at_or_before_skips_blanks() {
        let csv = "firm,month,ret,mktcap,bm\nA,2020-01,0.0,100,0.5\nA,2020-02,0.0,,0.6\nA,2020-04,0.0,300,0.7\n";
        let t = ReturnsTable::from_reader(csv.as_bytes()).unwrap();
        let firm = FirmId::new("A").unwrap();
        let m: YearMonth = "2020-03".parse().unwrap();
        assert_eq!(t.latest_at_or_before(&firm, m, |r| r.market_cap), Some(100.0));
        assert_eq!(t.latest_at_or_before(&firm, m, |r| r.book_to_market), Some(0.6));
        let early: YearMonth = "2019-12".parse().unwrap();
        assert_eq!(t.latest_at_or_before(&firm, early, |r| r.market_cap), None);
    }

    #[test]
    fn factor_missing_column_named() {
        let csv = "month,mkt_rf,smb,hml,mom,rf\n2020-01,0.01,0,0,0,0.001\n";
        let err = FactorSeries::from_reader(csv.as_bytes()).unwrap_err();
        assert!(matches!(&err, CorpusError::MissingColumn(c) if c == "liq"), "{err}");
        assert!(err.to_string().contains("liq"));
    }

    #[test]
    fn factor_contiguity_and_duplicates() {
        let gap = "month,mkt_rf,smb,hml,mom,liq,rf\n2020-01,0,0,0,0,0,0\n2020-03,0,0,0,0,0,0\n";
        assert!(matches!(
            FactorSeries::from_reader(gap.as_bytes()),
            Err(CorpusError::NonContiguousMonths { .. })
        ));
        let dup = "month,mkt_rf,smb,hml,mom,liq,rf\n2020-01,0,0,0,0,0,0\n2020-01,0,0,0,0,0,0\n";
        assert!(matches!(
            FactorSeries::from_reader(dup.as_bytes()),
            Err(CorpusError::DuplicateKey(_))
        ));
        let ok = "month,mkt_rf,smb,hml,mom,liq,rf\n2020-01,0.01,0.02,0.03,0.04,0.05,0.001\n2020-02,0,0,0,0,0,0\n";
        let f = FactorSeries::from_reader(ok.as_bytes()).unwrap();
        assert_eq!(f.len(), 2);
        assert_eq!(f.get("2020-01".parse().unwrap()).unwrap().liq, 0.05);
    }
}
