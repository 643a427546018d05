//! CSV ingestion and export.
//!
//! All files are UTF-8 with a dot decimal separator and a header row:
//!
//! * portfolio — `id,age,lives,sum_assured,annual_net_premium,remaining_term`
//! * mortality table — `age,year,q` (`year` column optional; without it the
//!   rate holds for every projection year)
//! * lapse rates — `year,w`
//! * discount factors — `t,delta`
//! * aggregate mortality — `year,q`

use std::path::Path;

use crate::drivers::FunnelTable;
use crate::error::{Error, Result};
use crate::portfolio::{ModelPoint, MortalityTable, Portfolio};
use crate::projection::{RegressorLayout, SimulationBatch};

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path, message: impl std::fmt::Display) -> Error {
    Error::Csv {
        path: path.display().to_string(),
        message: message.to_string(),
    }
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => {
                if let csv::ErrorKind::Io(io) = e.into_kind() {
                    io_err(path, io)
                } else {
                    unreachable!()
                }
            }
            _ => csv_err(path, e),
        })
}

fn parse_field<T: std::str::FromStr>(
    path: &Path,
    record: &csv::StringRecord,
    idx: usize,
    name: &str,
    line: u64,
) -> Result<T> {
    let raw = record
        .get(idx)
        .ok_or_else(|| csv_err(path, format!("missing column `{name}` on line {line}")))?;
    raw.parse().map_err(|_| {
        csv_err(
            path,
            format!("cannot parse `{raw}` as {name} on line {line}"),
        )
    })
}

fn header_index(path: &Path, headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case(name))
        .ok_or_else(|| csv_err(path, format!("missing header column `{name}`")))
}

pub fn read_portfolio_csv(path: impl AsRef<Path>) -> Result<Portfolio> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let cols: Vec<usize> = [
        "id",
        "age",
        "lives",
        "sum_assured",
        "annual_net_premium",
        "remaining_term",
    ]
    .iter()
    .map(|name| header_index(path, &headers, name))
    .collect::<Result<_>>()?;

    let mut points = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let record = record.map_err(|e| csv_err(path, e))?;
        points.push(ModelPoint {
            id: record
                .get(cols[0])
                .ok_or_else(|| csv_err(path, format!("missing id on line {line}")))?
                .to_string(),
            age: parse_field(path, &record, cols[1], "age", line)?,
            lives: parse_field(path, &record, cols[2], "lives", line)?,
            sum_assured: parse_field(path, &record, cols[3], "sum_assured", line)?,
            annual_net_premium: parse_field(path, &record, cols[4], "annual_net_premium", line)?,
            remaining_term: parse_field(path, &record, cols[5], "remaining_term", line)?,
        });
    }
    if points.is_empty() {
        return Err(csv_err(path, "portfolio file has no model points"));
    }
    Ok(Portfolio::new(points))
}

pub fn read_mortality_csv(path: impl AsRef<Path>) -> Result<MortalityTable> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let age_col = header_index(path, &headers, "age")?;
    let q_col = header_index(path, &headers, "q")?;
    let year_col = headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case("year"));

    let mut table = MortalityTable::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let record = record.map_err(|e| csv_err(path, e))?;
        let age: u32 = parse_field(path, &record, age_col, "age", line)?;
        let q: f64 = parse_field(path, &record, q_col, "q", line)?;
        match year_col {
            Some(c) if !record.get(c).unwrap_or("").is_empty() => {
                let year: usize = parse_field(path, &record, c, "year", line)?;
                table.insert_age_year(age, year, q);
            }
            _ => table.insert_age(age, q),
        }
    }
    Ok(table)
}

/// Read a per-year rate series (`year_header,value_header`), returning the
/// values for years `1..=horizon` in order. Every year must be present.
pub fn read_year_series_csv(
    path: impl AsRef<Path>,
    year_header: &str,
    value_header: &str,
    horizon: usize,
) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let year_col = header_index(path, &headers, year_header)?;
    let value_col = header_index(path, &headers, value_header)?;

    let mut values = vec![None; horizon];
    for (i, record) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let record = record.map_err(|e| csv_err(path, e))?;
        let year: usize = parse_field(path, &record, year_col, year_header, line)?;
        let value: f64 = parse_field(path, &record, value_col, value_header, line)?;
        if (1..=horizon).contains(&year) {
            values[year - 1] = Some(value);
        }
    }
    values
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            v.ok_or_else(|| {
                Error::AssumptionCoverage(format!(
                    "{}: no `{value_header}` entry for year {}",
                    path.display(),
                    i + 1
                ))
            })
        })
        .collect()
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => {
            if let csv::ErrorKind::Io(io) = e.into_kind() {
                io_err(path, io)
            } else {
                unreachable!()
            }
        }
        _ => csv_err(path, e),
    })
}

fn finish(path: &Path, mut w: csv::Writer<std::fs::File>) -> Result<()> {
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_portfolio_csv(path: impl AsRef<Path>, portfolio: &Portfolio) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    w.write_record([
        "id",
        "age",
        "lives",
        "sum_assured",
        "annual_net_premium",
        "remaining_term",
    ])
    .map_err(|e| csv_err(path, e))?;
    for p in &portfolio.points {
        w.write_record([
            p.id.clone(),
            p.age.to_string(),
            format_float(p.lives),
            format_float(p.sum_assured),
            format_float(p.annual_net_premium),
            p.remaining_term.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

/// Write an age-indexed mortality table (no year column).
pub fn write_mortality_csv(
    path: impl AsRef<Path>,
    rates: impl IntoIterator<Item = (u32, f64)>,
) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    w.write_record(["age", "q"]).map_err(|e| csv_err(path, e))?;
    for (age, q) in rates {
        w.write_record([age.to_string(), format_float(q)])
            .map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

pub fn write_year_series_csv(
    path: impl AsRef<Path>,
    year_header: &str,
    value_header: &str,
    values: &[f64],
) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    w.write_record([year_header, value_header])
        .map_err(|e| csv_err(path, e))?;
    for (i, v) in values.iter().enumerate() {
        w.write_record([(i + 1).to_string(), format_float(*v)])
            .map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

/// Per-path regressors and responses for external scatter/surface plots.
/// The mandatory columns are the observable first-year factors; latent
/// component columns are appended when the batch carries them.
pub fn write_batch_csv(path: impl AsRef<Path>, batch: &SimulationBatch) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    let latent = batch.layout == RegressorLayout::Latent;
    let mut header = vec!["path", "af_mort_1", "af_lapse_1", "ev", "y"];
    if latent {
        header.extend(["trend_1", "basis", "calamity_1"]);
    }
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for p in 0..batch.len() {
        let o = batch.outcome(p);
        let mut record = vec![
            p.to_string(),
            format_float(batch.af_mort_1()[p]),
            format_float(batch.af_lapse_1()[p]),
            format_float(o.ev),
            format_float(o.y),
        ];
        if latent {
            record.push(format_float(o.regressors[0] + 1.0));
            record.push(format_float(o.regressors[1] + 1.0));
            record.push(format_float(o.regressors[2]));
        }
        w.write_record(&record).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

pub fn write_funnel_csv(path: impl AsRef<Path>, table: &FunnelTable) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    let mut header = vec!["year".to_string(), "mean".to_string()];
    header.extend(table.quantiles.iter().map(|q| format!("q{q}")));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for row in &table.rows {
        let mut record = vec![row.year.to_string(), format_float(row.mean)];
        record.extend(row.values.iter().map(|v| format_float(*v)));
        w.write_record(&record).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

pub fn write_distribution_csv(path: impl AsRef<Path>, samples: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    w.write_record(["path", "own_funds_change"])
        .map_err(|e| csv_err(path, e))?;
    for (i, s) in samples.iter().enumerate() {
        w.write_record([i.to_string(), format_float(*s)])
            .map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

/// Shortest decimal representation that round-trips; negative zero is
/// normalized away.
fn format_float(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    format!("{v}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn portfolio_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("portfolio.csv");
        let pf = Portfolio::new(vec![
            ModelPoint {
                id: "a".into(),
                age: 30,
                lives: 12.5,
                sum_assured: 50_000.0,
                annual_net_premium: 420.75,
                remaining_term: 25,
            },
            ModelPoint {
                id: "b".into(),
                age: 55,
                lives: 3.0,
                sum_assured: 10_000.0,
                annual_net_premium: 260.0,
                remaining_term: 10,
            },
        ]);
        write_portfolio_csv(&path, &pf).unwrap();
        let back = read_portfolio_csv(&path).unwrap();
        assert_eq!(back.points, pf.points);
    }

    #[test]
    fn year_series_requires_full_coverage() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("lapse.csv");
        std::fs::write(&path, "year,w\n1,0.05\n3,0.04\n").unwrap();
        let err = read_year_series_csv(&path, "year", "w", 3);
        assert!(matches!(err, Err(Error::AssumptionCoverage(_))), "{err:?}");
        let ok = read_year_series_csv(&path, "year", "w", 1).unwrap();
        assert_eq!(ok, vec![0.05]);
    }

    #[test]
    fn mortality_table_reads_optional_year_column() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("mortality.csv");
        std::fs::write(&path, "age,year,q\n40,,0.01\n40,2,0.02\n").unwrap();
        let table = read_mortality_csv(&path).unwrap();
        assert_eq!(table.lookup(40, 1), Some(0.01));
        assert_eq!(table.lookup(40, 2), Some(0.02));
    }

    #[test]
    fn mortality_table_without_year_header() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("mortality.csv");
        std::fs::write(&path, "age,q\n40,0.01\n41,0.011\n").unwrap();
        let table = read_mortality_csv(&path).unwrap();
        assert_eq!(table.lookup(41, 7), Some(0.011));
    }

    #[test]
    fn parse_errors_name_the_line() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("portfolio.csv");
        std::fs::write(
            &path,
            "id,age,lives,sum_assured,annual_net_premium,remaining_term\nx,notanage,1,1,1,1\n",
        )
        .unwrap();
        match read_portfolio_csv(&path) {
            Err(Error::Csv { message, .. }) => {
                assert!(message.contains("line 2"), "{message}")
            }
            other => panic!("expected csv error, got {other:?}"),
        }
    }

    #[test]
    fn missing_file_is_an_io_error() {
        assert!(matches!(
            read_portfolio_csv("/nonexistent/portfolio.csv"),
            Err(Error::Io { .. })
        ));
    }
}
