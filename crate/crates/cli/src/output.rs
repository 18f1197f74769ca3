//! CSV and JSON writers. CSV columns are fixed:
//! sweep `p,layout,ci`; histogram `layout,bin_lo,bin_hi,freq`;
//! mcfid `n,mean_infidelity,stderr`; tomo `field,value`.

use std::io::Write;

use serde::Serialize;

use crate::{CliError, CliResult, HistogramReport, McfidRow, SweepReport, TomoReport};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

fn csv_error(e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::Io(io),
        other => CliError::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

fn write_json<T: Serialize, W: Write>(value: &T, mut out: W) -> CliResult<()> {
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| CliError::Io(e.into()))?;
    writeln!(out)?;
    Ok(())
}

fn write_csv<T: Serialize, W: Write>(rows: impl IntoIterator<Item = T>, out: W) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep<W: Write>(report: &SweepReport, format: Format, out: W) -> CliResult<()> {
    match format {
        Format::Csv => write_csv(&report.rows, out),
        Format::Json => write_json(report, out),
    }
}

#[derive(Serialize)]
struct BinRow<'a> {
    layout: &'a str,
    bin_lo: f64,
    bin_hi: f64,
    freq: f64,
}

pub fn write_histogram<W: Write>(
    report: &HistogramReport,
    format: Format,
    out: W,
) -> CliResult<()> {
    match format {
        Format::Csv => {
            let rows = report.histograms.iter().flat_map(|h| {
                let freqs = h.histogram.frequencies();
                freqs.into_iter().enumerate().map(move |(k, freq)| {
                    let (bin_lo, bin_hi) = h.histogram.edges(k);
                    BinRow {
                        layout: &h.name,
                        bin_lo,
                        bin_hi,
                        freq,
                    }
                })
            });
            write_csv(rows, out)
        }
        Format::Json => write_json(report, out),
    }
}

pub fn write_mcfid<W: Write>(rows: &[McfidRow], format: Format, out: W) -> CliResult<()> {
    match format {
        Format::Csv => write_csv(rows, out),
        Format::Json => write_json(&rows, out),
    }
}

#[derive(Serialize)]
struct FieldRow {
    field: String,
    value: String,
}

fn flatten(prefix: &str, value: &serde_json::Value, rows: &mut Vec<FieldRow>) {
    match value {
        serde_json::Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, rows);
            }
        }
        serde_json::Value::String(s) => rows.push(FieldRow {
            field: prefix.into(),
            value: s.clone(),
        }),
        other => rows.push(FieldRow {
            field: prefix.into(),
            value: other.to_string(),
        }),
    }
}

pub fn write_tomo<W: Write>(report: &TomoReport, format: Format, out: W) -> CliResult<()> {
    match format {
        Format::Csv => {
            let value = serde_json::to_value(report).map_err(|e| CliError::Io(e.into()))?;
            let mut rows = Vec::new();
            flatten("", &value, &mut rows);
            write_csv(rows, out)
        }
        Format::Json => write_json(report, out),
    }
}
