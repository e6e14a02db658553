use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};

use super::{repair_dst, HourlySeries, RawRow};
use crate::error::{Error, Result};

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

/// Reads a `timestamp,price,temperature` CSV and returns a repaired series.
pub fn ingest_csv(path: impl AsRef<Path>, market_id: &str) -> Result<HourlySeries> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows = read_rows(file)?;
    rows.sort_by_key(|r| r.timestamp);
    repair_dst(market_id, &rows)
}

/// Parses rows in file order. Empty price or temperature cells become `None`.
pub fn read_rows<R: Read>(input: R) -> Result<Vec<RawRow>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Parse {
                row: 1,
                message: format!("missing column `{name}`"),
            })
    };
    let (ts_col, price_col, temp_col) = (column("timestamp")?, column("price")?, column("temperature")?);

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| record.get(i).unwrap_or("");
        let timestamp = parse_timestamp(field(ts_col)).ok_or_else(|| Error::Parse {
            row,
            message: format!("unparseable timestamp `{}`", field(ts_col)),
        })?;
        let value = |i: usize, name: &str| -> Result<Option<f64>> {
            let s = field(i);
            if s.is_empty() || s.eq_ignore_ascii_case("nan") {
                return Ok(None);
            }
            match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(Some(v)),
                _ => Err(Error::Parse {
                    row,
                    message: format!("unparseable {name} `{s}`"),
                }),
            }
        };
        rows.push(RawRow {
            timestamp,
            price: value(price_col, "price")?,
            temperature: value(temp_col, "temperature")?,
        });
    }
    Ok(rows)
}

/// Accepts naive ISO-8601 local times, or RFC 3339 with an offset (the
/// offset is dropped and the local wall-clock time kept).
fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    const FORMATS: [&str; 4] = [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ];
    FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .or_else(|| DateTime::parse_from_rfc3339(s).ok().map(|d| d.naive_local()))
}

pub fn write_csv<W: Write>(series: &HourlySeries, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["timestamp", "price", "temperature"])?;
    for (i, (p, t)) in series
        .prices()
        .iter()
        .zip(series.temperatures())
        .enumerate()
    {
        w.write_record([
            series.timestamp(i).format(TIMESTAMP_FORMAT).to_string(),
            p.to_string(),
            t.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn emit_csv(series: &HourlySeries, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(series, std::io::BufWriter::new(file))
}
