//! File formats: grid CSV and PGM, flight logs, tilt calibration tables and
//! error reports.
//!
//! Grid CSV starts with a `width,height,cell_size` header line and its values,
//! followed by `height` rows of `width` values, row `j = 0` first. Values are
//! written in shortest round-trip form, so reading a written grid gives the
//! same numbers back.

use std::io::{BufRead, Read, Write};

use nalgebra::Point2;

use crate::error::{Error, Result};
use crate::grid::ScalarGrid;
use crate::harness::ErrorReport;
use crate::measurement::{Measurement, MeasurementLog};
use crate::wind::{TiltCalibration, WindMeasurement};

/// Raw grid contents without the non-negativity rule of [`ScalarGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridData {
    pub width: usize,
    pub height: usize,
    pub cell_size: f64,
    pub values: Vec<f64>,
}

impl From<&ScalarGrid> for GridData {
    fn from(g: &ScalarGrid) -> Self {
        GridData {
            width: g.width(),
            height: g.height(),
            cell_size: g.cell_size(),
            values: g.values().to_vec(),
        }
    }
}

impl GridData {
    pub fn into_scalar_grid(self) -> Result<ScalarGrid> {
        ScalarGrid::from_values(self.width, self.height, self.cell_size, self.values)
    }
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            line,
            reason: format!("{other:?}"),
        },
    }
}

pub fn write_grid_csv(mut w: impl Write, width: usize, height: usize, cell_size: f64, values: &[f64]) -> Result<()> {
    if values.len() != width * height {
        return Err(Error::DimensionMismatch(format!("{} values for {width}x{height}", values.len())));
    }
    writeln!(w, "width,height,cell_size")?;
    writeln!(w, "{width},{height},{cell_size}")?;
    for row in values.chunks(width.max(1)) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn write_scalar_grid_csv(w: impl Write, g: &ScalarGrid) -> Result<()> {
    write_grid_csv(w, g.width(), g.height(), g.cell_size(), g.values())
}

fn parse_f64(field: &str, line: usize) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|e| Error::Parse {
        line,
        reason: format!("`{field}`: {e}"),
    })
}

pub fn read_grid_csv(r: impl Read) -> Result<GridData> {
    let mut rd = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(r);
    let mut records = rd.records();
    let mut next = |what: &str| -> Result<csv::StringRecord> {
        match records.next() {
            Some(rec) => rec.map_err(csv_error),
            None => Err(Error::Parse {
                line: 0,
                reason: format!("missing {what}"),
            }),
        }
    };
    let header = next("header")?;
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names != ["width", "height", "cell_size"] {
        return Err(Error::Parse {
            line: 1,
            reason: format!("expected header width,height,cell_size, got {}", names.join(",")),
        });
    }
    let dims = next("dimensions")?;
    if dims.len() != 3 {
        return Err(Error::Parse {
            line: 2,
            reason: "dimension line needs three fields".into(),
        });
    }
    let parse_usize = |s: &str| {
        s.trim().parse::<usize>().map_err(|e| Error::Parse {
            line: 2,
            reason: format!("`{s}`: {e}"),
        })
    };
    let width = parse_usize(&dims[0])?;
    let height = parse_usize(&dims[1])?;
    let cell_size = parse_f64(&dims[2], 2)?;
    let mut values = Vec::with_capacity(width * height);
    for j in 0..height {
        let line = j + 3;
        let row = next("row")?;
        if row.len() != width {
            return Err(Error::Parse {
                line,
                reason: format!("{} values, expected {width}", row.len()),
            });
        }
        for f in row.iter() {
            values.push(parse_f64(f, line)?);
        }
    }
    Ok(GridData {
        width,
        height,
        cell_size,
        values,
    })
}

/// Binary 8-bit PGM, scaled so the largest value is 255. Image rows run top
/// down, so the last grid row comes first.
pub fn write_pgm(mut w: impl Write, width: usize, height: usize, values: &[f64]) -> Result<()> {
    if values.len() != width * height {
        return Err(Error::DimensionMismatch(format!("{} values for {width}x{height}", values.len())));
    }
    let max = values.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max);
    write!(w, "P5\n{width} {height}\n255\n")?;
    let mut bytes = Vec::with_capacity(values.len());
    for j in (0..height).rev() {
        for v in &values[j * width..(j + 1) * width] {
            let level = if max > 0.0 && v.is_finite() {
                (v.max(0.0) / max * 255.0).round()
            } else {
                0.0
            };
            bytes.push(level as u8);
        }
    }
    w.write_all(&bytes)?;
    Ok(())
}

pub fn write_scalar_grid_pgm(w: impl Write, g: &ScalarGrid) -> Result<()> {
    write_pgm(w, g.width(), g.height(), g.values())
}

/// Reads a binary PGM written by [`write_pgm`] back into grid order, as gray
/// levels `0..=255`.
pub fn read_pgm(mut r: impl Read) -> Result<(usize, usize, Vec<u8>)> {
    let mut data = Vec::new();
    r.read_to_end(&mut data)?;
    let mut pos = 0;
    let mut tokens = Vec::new();
    while tokens.len() < 4 {
        while pos < data.len() && data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < data.len() && data[pos] == b'#' {
            while pos < data.len() && data[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < data.len() && !data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Parse {
                line: 1,
                reason: "truncated PGM header".into(),
            });
        }
        tokens.push(String::from_utf8_lossy(&data[start..pos]).into_owned());
    }
    pos += 1;
    if tokens[0] != "P5" {
        return Err(Error::Parse {
            line: 1,
            reason: format!("magic `{}` is not P5", tokens[0]),
        });
    }
    let num = |s: &str| {
        s.parse::<usize>().map_err(|e| Error::Parse {
            line: 1,
            reason: format!("`{s}`: {e}"),
        })
    };
    let (width, height, maxval) = (num(&tokens[1])?, num(&tokens[2])?, num(&tokens[3])?);
    if maxval != 255 {
        return Err(Error::Parse {
            line: 1,
            reason: format!("max value {maxval} is not 255"),
        });
    }
    let body = data.get(pos..pos + width * height).ok_or_else(|| Error::Parse {
        line: 1,
        reason: "truncated PGM body".into(),
    })?;
    let mut levels = vec![0u8; width * height];
    for (row, chunk) in body.chunks(width.max(1)).enumerate() {
        let j = height - 1 - row;
        levels[j * width..(j + 1) * width].copy_from_slice(chunk);
    }
    Ok((width, height, levels))
}

pub const FLIGHT_LOG_COLUMNS: [&str; 6] = ["t_s", "x_m", "y_m", "gas_ppm", "wind_speed_mps", "wind_dir_rad"];

/// Parses a flight log. Columns are found by header name, in any order.
pub fn read_flight_log(r: impl Read, domain_side: f64) -> Result<MeasurementLog> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header = rd.headers().map_err(csv_error)?.clone();
    let mut idx = [0usize; 6];
    for (slot, name) in idx.iter_mut().zip(FLIGHT_LOG_COLUMNS) {
        *slot = header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
    }
    let mut log = MeasurementLog::new(domain_side)?;
    for rec in rd.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let field = |k: usize| -> Result<f64> {
            let s = rec.get(idx[k]).ok_or_else(|| Error::Parse {
                line,
                reason: format!("missing value for `{}`", FLIGHT_LOG_COLUMNS[k]),
            })?;
            parse_f64(s, line)
        };
        let (t, x, y, gas, speed, dir) = (field(0)?, field(1)?, field(2)?, field(3)?, field(4)?, field(5)?);
        let wind = WindMeasurement::new(t, speed, dir).map_err(|e| Error::Parse {
            line,
            reason: e.to_string(),
        })?;
        log.push(Measurement {
            position: Point2::new(x, y),
            time: t,
            gas,
            wind,
        })
        .map_err(|e| Error::Parse {
            line,
            reason: e.to_string(),
        })?;
    }
    Ok(log)
}

pub fn write_flight_log(w: impl Write, log: &MeasurementLog) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(FLIGHT_LOG_COLUMNS).map_err(csv_error)?;
    for r in log.records() {
        wr.write_record([
            r.time.to_string(),
            r.position.x.to_string(),
            r.position.y.to_string(),
            r.gas.to_string(),
            r.wind.speed.to_string(),
            r.wind.direction.to_string(),
        ])
        .map_err(csv_error)?;
    }
    wr.flush()?;
    Ok(())
}

/// Two columns, `tilt_deg,speed_mps`, header required.
pub fn read_calibration(r: impl BufRead) -> Result<TiltCalibration> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header = rd.headers().map_err(csv_error)?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let (ti, si) = (col("tilt_deg")?, col("speed_mps")?);
    let mut table = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        table.push((parse_f64(&rec[ti], line)?, parse_f64(&rec[si], line)?));
    }
    TiltCalibration::new(table)
}

/// Writes the report with a fixed column order.
pub fn write_error_report(w: impl Write, report: &ErrorReport, header: bool) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(header).from_writer(w);
    for r in &report.rows {
        wr.serialize(r).map_err(csv_error)?;
    }
    if report.rows.is_empty() && header {
        wr.write_record([
            "scenario",
            "algorithm",
            "seed",
            "error_m",
            "iterations",
            "converged",
            "samples",
            "steps",
            "wall_time_s",
        ])
        .map_err(csv_error)?;
    }
    wr.flush()?;
    Ok(())
}
