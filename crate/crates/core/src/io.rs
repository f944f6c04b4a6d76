//! CSV schemas for series, fitted values, forecasts, ledgers and reports,
//! plus the plain-text comparison table.
//!
//! Every file has a header row. Numbers are written with Rust's shortest
//! round-trip formatting, so `inf` marks an absent censor level and every
//! file written here parses back to identical values.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::filter::CensoredObservation;
use crate::forecast::{interval, ForecastDistribution};
use crate::inventory::{DayRecord, ForecasterKind, InventoryLedger, SimulationReport};

pub const SERIES_HEADER: [&str; 6] = ["t", "demand", "sales", "censor_level", "day_index", "hour_index"];
pub const FITTED_HEADER: [&str; 6] = ["t", "observed", "censor_level", "censored", "fitted", "latent_fitted"];
pub const LEDGER_HEADER: [&str; 12] = [
    "model",
    "target_csl",
    "day",
    "y_max",
    "target_stock",
    "demand",
    "sales",
    "lost_sales",
    "excess_inventory",
    "stockout",
    "forecast_mean",
    "forecast_sd",
];
pub const REPORT_HEADER: [&str; 8] = [
    "model",
    "target_csl",
    "days",
    "rmse",
    "bias",
    "lost_sales_total",
    "excess_inventory_total",
    "achieved_csl",
];
pub const AGGREGATE_HEADER: [&str; 5] = ["cycle_length", "mean", "variance", "lower", "upper"];

/// One row of a series file.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesRow {
    pub t: usize,
    pub demand: f64,
    pub sales: f64,
    pub censor_level: f64,
    pub day_index: usize,
    pub hour_index: usize,
}

impl SeriesRow {
    pub fn observation(&self) -> Result<CensoredObservation> {
        CensoredObservation::new(self.sales, self.censor_level).map_err(|e| Error::Parse {
            row: self.t,
            message: e.to_string(),
        })
    }
}

/// Builds series rows from latent demand and the observed sales, with
/// `s` observations per day for the day/hour indices.
pub fn series_rows(demand: &[f64], observed: &[CensoredObservation], s: usize) -> Vec<SeriesRow> {
    let s = s.max(1);
    demand
        .iter()
        .zip(observed)
        .enumerate()
        .map(|(t, (&d, o))| SeriesRow {
            t,
            demand: d,
            sales: o.value(),
            censor_level: o.censor_level(),
            day_index: t / s,
            hour_index: t % s,
        })
        .collect()
}

pub fn observations(rows: &[SeriesRow]) -> Result<Vec<CensoredObservation>> {
    rows.iter().map(SeriesRow::observation).collect()
}

/// Fitted values of one series; `latent_fitted` equals `fitted` unless the
/// fit ran on cumulated data.
#[derive(Clone, Debug, PartialEq)]
pub struct FittedRow {
    pub t: usize,
    pub observed: f64,
    pub censor_level: f64,
    pub censored: bool,
    pub fitted: f64,
    pub latent_fitted: f64,
}

/// Forecast quantities for one horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct ForecastRow {
    pub horizon: usize,
    pub mean: f64,
    pub variance: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Percentage label for an interval level, e.g. 0.95 -> "95", 0.975 -> "97.5".
pub fn level_label(level: f64) -> String {
    let pct = (level * 100.0 * 1e6).round() / 1e6;
    format!("{pct}")
}

pub fn forecast_header(level: f64) -> Vec<String> {
    let l = level_label(level);
    vec![
        "horizon".into(),
        "mean".into(),
        "variance".into(),
        format!("lower{l}"),
        format!("upper{l}"),
    ]
}

pub fn forecast_rows(dist: &ForecastDistribution, level: f64) -> Result<Vec<ForecastRow>> {
    (1..=dist.horizons())
        .map(|h| {
            let (lower, upper) = dist.interval(h, level)?;
            Ok(ForecastRow {
                horizon: h,
                mean: dist.mean[h - 1],
                variance: dist.variance[h - 1],
                lower,
                upper,
            })
        })
        .collect()
}

// ---- low-level helpers ----

fn num(x: f64) -> String {
    format!("{x}")
}

fn writer<W: Write>(out: W, header: &[&str]) -> Result<csv::Writer<W>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(header)?;
    Ok(w)
}

fn reader<R: Read>(input: R, header: &[&str]) -> Result<csv::Reader<R>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let found: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if found != header {
        return Err(Error::Parse {
            row: 1,
            message: format!("expected header {}, found {}", header.join(","), found.join(",")),
        });
    }
    Ok(r)
}

/// Record together with its 1-based line number in the file.
struct Row {
    line: usize,
    record: csv::StringRecord,
}

impl Row {
    fn field(&self, i: usize, name: &str) -> Result<&str> {
        self.record.get(i).ok_or_else(|| Error::Parse {
            row: self.line,
            message: format!("missing column {name}"),
        })
    }

    fn float(&self, i: usize, name: &str) -> Result<f64> {
        let raw = self.field(i, name)?;
        raw.parse::<f64>().map_err(|_| Error::Parse {
            row: self.line,
            message: format!("column {name}: cannot parse {raw:?} as a number"),
        })
    }

    fn finite(&self, i: usize, name: &str) -> Result<f64> {
        let x = self.float(i, name)?;
        if x.is_finite() {
            Ok(x)
        } else {
            Err(Error::Parse {
                row: self.line,
                message: format!("column {name}: value must be finite, got {x}"),
            })
        }
    }

    fn index(&self, i: usize, name: &str) -> Result<usize> {
        let raw = self.field(i, name)?;
        raw.parse::<usize>().map_err(|_| Error::Parse {
            row: self.line,
            message: format!("column {name}: cannot parse {raw:?} as a non-negative integer"),
        })
    }

    fn flag(&self, i: usize, name: &str) -> Result<bool> {
        match self.field(i, name)? {
            "true" | "1" => Ok(true),
            "false" | "0" => Ok(false),
            raw => Err(Error::Parse {
                row: self.line,
                message: format!("column {name}: expected true or false, got {raw:?}"),
            }),
        }
    }
}

fn rows<R: Read>(r: &mut csv::Reader<R>, width: usize) -> impl Iterator<Item = Result<Row>> + '_ {
    r.records().map(move |rec| {
        let record = rec?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != width {
            return Err(Error::Parse {
                row: line,
                message: format!("expected {width} columns, found {}", record.len()),
            });
        }
        Ok(Row { line, record })
    })
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(Error::from)
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(Error::from)
}

// ---- series ----

pub fn write_series<W: Write>(out: W, rows: &[SeriesRow]) -> Result<()> {
    let mut w = writer(out, &SERIES_HEADER)?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            num(r.demand),
            num(r.sales),
            num(r.censor_level),
            r.day_index.to_string(),
            r.hour_index.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a series file. Demand may be `nan` when unknown; sales must be
/// finite and not above the censor level.
pub fn read_series<R: Read>(input: R) -> Result<Vec<SeriesRow>> {
    let mut r = reader(input, &SERIES_HEADER)?;
    rows(&mut r, SERIES_HEADER.len())
        .map(|row| {
            let row = row?;
            let out = SeriesRow {
                t: row.index(0, "t")?,
                demand: row.float(1, "demand")?,
                sales: row.finite(2, "sales")?,
                censor_level: row.float(3, "censor_level")?,
                day_index: row.index(4, "day_index")?,
                hour_index: row.index(5, "hour_index")?,
            };
            CensoredObservation::new(out.sales, out.censor_level).map_err(|e| Error::Parse {
                row: row.line,
                message: e.to_string(),
            })?;
            Ok(out)
        })
        .collect()
}

pub fn write_series_file(path: &Path, rows: &[SeriesRow]) -> Result<()> {
    write_series(create(path)?, rows)
}

pub fn read_series_file(path: &Path) -> Result<Vec<SeriesRow>> {
    read_series(open(path)?)
}

// ---- fitted values ----

pub fn write_fitted<W: Write>(out: W, rows: &[FittedRow]) -> Result<()> {
    let mut w = writer(out, &FITTED_HEADER)?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            num(r.observed),
            num(r.censor_level),
            r.censored.to_string(),
            num(r.fitted),
            num(r.latent_fitted),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_fitted<R: Read>(input: R) -> Result<Vec<FittedRow>> {
    let mut r = reader(input, &FITTED_HEADER)?;
    rows(&mut r, FITTED_HEADER.len())
        .map(|row| {
            let row = row?;
            Ok(FittedRow {
                t: row.index(0, "t")?,
                observed: row.float(1, "observed")?,
                censor_level: row.float(2, "censor_level")?,
                censored: row.flag(3, "censored")?,
                fitted: row.float(4, "fitted")?,
                latent_fitted: row.float(5, "latent_fitted")?,
            })
        })
        .collect()
}

// ---- forecasts ----

pub fn write_forecast<W: Write>(out: W, rows: &[ForecastRow], level: f64) -> Result<()> {
    let header = forecast_header(level);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut w = writer(out, &header)?;
    for r in rows {
        w.write_record([r.horizon.to_string(), num(r.mean), num(r.variance), num(r.lower), num(r.upper)])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a forecast file written at interval `level`.
pub fn read_forecast<R: Read>(input: R, level: f64) -> Result<Vec<ForecastRow>> {
    let header = forecast_header(level);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut r = reader(input, &header)?;
    rows(&mut r, header.len())
        .map(|row| {
            let row = row?;
            Ok(ForecastRow {
                horizon: row.index(0, "horizon")?,
                mean: row.finite(1, "mean")?,
                variance: row.finite(2, "variance")?,
                lower: row.finite(3, "lower")?,
                upper: row.finite(4, "upper")?,
            })
        })
        .collect()
}

/// Writes the cycle-sum distribution as a single-row file.
pub fn write_aggregate<W: Write>(out: W, dist: &ForecastDistribution, level: f64) -> Result<()> {
    let (lo, hi) = interval(dist.aggregate_mean, dist.aggregate_variance, level)?;
    let mut w = writer(out, &AGGREGATE_HEADER)?;
    w.write_record([
        dist.cycle_length.to_string(),
        num(dist.aggregate_mean),
        num(dist.aggregate_variance),
        num(lo),
        num(hi),
    ])?;
    w.flush()?;
    Ok(())
}

/// Returns `(cycle_length, mean, variance, lower, upper)`.
pub fn read_aggregate<R: Read>(input: R) -> Result<(usize, f64, f64, f64, f64)> {
    let mut r = reader(input, &AGGREGATE_HEADER)?;
    let row = rows(&mut r, AGGREGATE_HEADER.len()).next().ok_or(Error::EmptyInput)??;
    Ok((
        row.index(0, "cycle_length")?,
        row.finite(1, "mean")?,
        row.finite(2, "variance")?,
        row.finite(3, "lower")?,
        row.finite(4, "upper")?,
    ))
}

// ---- ledgers and reports ----

pub fn write_ledgers<W: Write>(out: W, ledgers: &[&InventoryLedger]) -> Result<()> {
    let mut w = writer(out, &LEDGER_HEADER)?;
    for l in ledgers {
        for r in &l.records {
            w.write_record([
                l.model.to_string(),
                num(l.target_csl),
                r.day.to_string(),
                num(r.y_max),
                num(r.target_stock),
                num(r.demand),
                num(r.sales),
                num(r.lost_sales),
                num(r.excess_inventory),
                r.stockout.to_string(),
                num(r.forecast_mean),
                num(r.forecast_sd),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads ledgers back, one per consecutive (model, target CSL) block.
pub fn read_ledgers<R: Read>(input: R) -> Result<Vec<InventoryLedger>> {
    let mut r = reader(input, &LEDGER_HEADER)?;
    let mut out: Vec<InventoryLedger> = Vec::new();
    for row in rows(&mut r, LEDGER_HEADER.len()) {
        let row = row?;
        let model: ForecasterKind = row.field(0, "model")?.parse().map_err(|e: Error| Error::Parse {
            row: row.line,
            message: e.to_string(),
        })?;
        let target_csl = row.finite(1, "target_csl")?;
        let record = DayRecord {
            day: row.index(2, "day")?,
            y_max: row.float(3, "y_max")?,
            target_stock: row.float(4, "target_stock")?,
            demand: row.finite(5, "demand")?,
            sales: row.finite(6, "sales")?,
            lost_sales: row.finite(7, "lost_sales")?,
            excess_inventory: row.float(8, "excess_inventory")?,
            stockout: row.flag(9, "stockout")?,
            forecast_mean: row.finite(10, "forecast_mean")?,
            forecast_sd: row.finite(11, "forecast_sd")?,
        };
        match out.last_mut() {
            Some(l) if l.model == model && l.target_csl == target_csl => l.records.push(record),
            _ => out.push(InventoryLedger {
                model,
                target_csl,
                records: vec![record],
            }),
        }
    }
    Ok(out)
}

pub fn write_reports<W: Write>(out: W, reports: &[SimulationReport]) -> Result<()> {
    let mut w = writer(out, &REPORT_HEADER)?;
    for r in reports {
        w.write_record([
            r.model.to_string(),
            num(r.target_csl),
            r.days.to_string(),
            num(r.rmse),
            num(r.bias),
            num(r.lost_sales_total),
            num(r.excess_inventory_total),
            num(r.achieved_csl),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_reports<R: Read>(input: R) -> Result<Vec<SimulationReport>> {
    let mut r = reader(input, &REPORT_HEADER)?;
    rows(&mut r, REPORT_HEADER.len())
        .map(|row| {
            let row = row?;
            Ok(SimulationReport {
                model: row.field(0, "model")?.parse().map_err(|e: Error| Error::Parse {
                    row: row.line,
                    message: e.to_string(),
                })?,
                target_csl: row.finite(1, "target_csl")?,
                days: row.index(2, "days")?,
                rmse: row.float(3, "rmse")?,
                bias: row.float(4, "bias")?,
                lost_sales_total: row.float(5, "lost_sales_total")?,
                excess_inventory_total: row.float(6, "excess_inventory_total")?,
                achieved_csl: row.float(7, "achieved_csl")?,
            })
        })
        .collect()
}

/// Comparison table: one column per target CSL, rows grouped as forecast
/// accuracy (RMSE, bias) then inventory (lost sales, excess, achieved CSL).
pub fn report_table(reports: &[SimulationReport]) -> String {
    let mut csls: Vec<f64> = reports.iter().map(|r| r.target_csl).collect();
    csls.sort_by(f64::total_cmp);
    csls.dedup();
    let mut models: Vec<ForecasterKind> = reports.iter().map(|r| r.model).collect();
    models.sort();
    models.dedup();

    let find = |m: ForecasterKind, c: f64| reports.iter().find(|r| r.model == m && r.target_csl == c);
    let width = 10;
    let label_width = 24;
    let mut out = String::new();
    let rule = "-".repeat(label_width + width * csls.len());

    let _ = write!(out, "{:label_width$}", "");
    for c in &csls {
        let _ = write!(out, "{:>width$}", format!("{}%", level_label(*c)));
    }
    out.push('\n');

    type Metric = (&'static str, fn(&SimulationReport) -> String);
    let groups: [&[Metric]; 2] = [
        &[
            ("RMSE", |r| format!("{:.1}", r.rmse)),
            ("Bias", |r| format!("{:.1}", r.bias)),
        ],
        &[
            ("Lost sales", |r| format!("{:.0}", r.lost_sales_total)),
            ("Excess inventory", |r| format!("{:.0}", r.excess_inventory_total)),
            ("Achieved CSL", |r| format!("{:.1}%", 100.0 * r.achieved_csl)),
        ],
    ];
    for group in groups {
        out.push_str(&rule);
        out.push('\n');
        for (name, fmt) in group {
            for &m in &models {
                let _ = write!(out, "{:label_width$}", format!("{name} {m}"));
                for &c in &csls {
                    let cell = find(m, c).map_or_else(|| "-".to_string(), fmt);
                    let _ = write!(out, "{cell:>width$}");
                }
                out.push('\n');
            }
        }
    }
    out.push_str(&rule);
    out.push('\n');
    out
}
