use nalgebra::Point2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fluid::SimParams;
use crate::wind::{self, WindMeasurement, WindSeries};

/// One gas/wind sample taken at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub position: Point2<f64>,
    pub time: f64,
    pub gas: f64,
    pub wind: WindMeasurement,
}

/// Time-ordered samples over a square domain `[0, domain_side]²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementLog {
    domain_side: f64,
    records: Vec<Measurement>,
}

impl MeasurementLog {
    pub fn new(domain_side: f64) -> Result<Self> {
        if !(domain_side > 0.0 && domain_side.is_finite()) {
            return Err(Error::invalid("domain_side", format!("{domain_side}")));
        }
        Ok(MeasurementLog {
            domain_side,
            records: Vec::new(),
        })
    }

    pub fn from_records(domain_side: f64, records: Vec<Measurement>) -> Result<Self> {
        let mut log = Self::new(domain_side)?;
        for r in records {
            log.push(r)?;
        }
        Ok(log)
    }

    pub fn push(&mut self, m: Measurement) -> Result<()> {
        let side = self.domain_side;
        let p = m.position;
        if !(p.x >= 0.0 && p.y >= 0.0 && p.x <= side && p.y <= side) {
            return Err(Error::OutOfDomain { x: p.x, y: p.y, side });
        }
        if !(m.gas >= 0.0 && m.gas.is_finite()) {
            return Err(Error::invalid("gas", format!("reading {} is negative or not finite", m.gas)));
        }
        if !(m.time >= 0.0 && m.time.is_finite()) {
            return Err(Error::invalid("time", format!("{} s", m.time)));
        }
        if let Some(last) = self.records.last() {
            if m.time < last.time {
                return Err(Error::UnorderedProbes {
                    index: self.records.len(),
                    time: m.time,
                });
            }
        }
        self.records.push(m);
        Ok(())
    }

    pub fn domain_side(&self) -> f64 {
        self.domain_side
    }

    pub fn records(&self) -> &[Measurement] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn readings(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.gas).collect()
    }

    pub fn last_time(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.time)
    }

    /// Multiplies every gas reading by `factor`.
    pub fn scaled(&self, factor: f64) -> MeasurementLog {
        let mut out = self.clone();
        for r in &mut out.records {
            r.gas *= factor;
        }
        out
    }

    /// Dense wind series for the model, held from the logged wind samples at
    /// the solver step.
    pub fn wind_series(&self, params: &SimParams) -> Result<WindSeries> {
        let winds: Vec<WindMeasurement> = self.records.iter().map(|r| r.wind).collect();
        wind::reconstruct(&winds, params.dt, self.last_time())
    }

    pub(crate) fn require_len(&self, k: usize) -> Result<()> {
        if self.records.len() < k {
            return Err(Error::invalid(
                "log",
                format!("needs at least {k} measurements, has {}", self.records.len()),
            ));
        }
        Ok(())
    }
}
