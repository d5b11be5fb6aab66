//! Kernel DM+V/W: kernel-weighted gas distribution mean and variance maps
//! with wind-stretched kernels and time decay.

use nalgebra::{Point2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ScalarGrid, MIN_CELLS};
use crate::measurement::MeasurementLog;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmvwParams {
    /// Map resolution in meters.
    pub cell_size: f64,
    /// Kernel width in map cells.
    pub kernel_size: f64,
    /// Meters; cells farther than this from every sample keep the prior.
    pub evaluation_radius: f64,
    /// Seconds; older samples weigh `exp(-age / time_scale)` relative to newer.
    pub time_scale: f64,
    /// Kernel stretch per m/s of wind.
    pub wind_scale: f64,
}

impl Default for DmvwParams {
    fn default() -> Self {
        DmvwParams {
            cell_size: 0.2,
            kernel_size: 10.0,
            evaluation_radius: 10.0,
            time_scale: 1.0,
            wind_scale: 0.001,
        }
    }
}

impl DmvwParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("cell_size", self.cell_size),
            ("kernel_size", self.kernel_size),
            ("evaluation_radius", self.evaluation_radius),
            ("time_scale", self.time_scale),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("{v} is not positive")));
            }
        }
        if !(self.wind_scale >= 0.0 && self.wind_scale.is_finite()) {
            return Err(Error::invalid("wind_scale", format!("{} is negative", self.wind_scale)));
        }
        Ok(())
    }

    /// Kernel standard deviation in meters.
    pub fn sigma(&self) -> f64 {
        self.kernel_size * self.cell_size
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DmvwMaps {
    pub mean: ScalarGrid,
    pub variance: ScalarGrid,
    /// In `[0, 1)`: how much of each cell's value comes from data.
    pub confidence: ScalarGrid,
}

impl DmvwMaps {
    /// Center of the first cell with the largest mean.
    pub fn peak(&self) -> Point2<f64> {
        let (i, j) = self.mean.argmax();
        self.mean.cell_center(i, j)
    }

    /// Mean and standard deviation at the map cell containing `p`.
    pub fn at(&self, p: &Point2<f64>) -> (f64, f64) {
        let h = self.mean.cell_size();
        let i = ((p.x / h).floor().max(0.0) as usize).min(self.mean.width() - 1);
        let j = ((p.y / h).floor().max(0.0) as usize).min(self.mean.height() - 1);
        (self.mean.get(i, j), self.variance.get(i, j).sqrt())
    }
}

struct Kernel {
    center: Point2<f64>,
    origin: Point2<f64>,
    along: Vector2<f64>,
    a: f64,
    b: f64,
    log_decay: f64,
    reading: f64,
}

impl Kernel {
    fn log_weight(&self, x: &Point2<f64>) -> f64 {
        let d = x - self.center;
        let u = d.dot(&self.along);
        let w = d.x * -self.along.y + d.y * self.along.x;
        -0.5 * (u * u / (self.a * self.a) + w * w / (self.b * self.b))
    }
}

/// Mean, variance and confidence maps over the log's domain. The prior is a
/// zero mean and the variance of the readings.
pub fn dmvw_map(log: &MeasurementLog, p: &DmvwParams) -> Result<DmvwMaps> {
    p.validate()?;
    log.require_len(1)?;
    let side = log.domain_side();
    let cells = ((side / p.cell_size).round() as usize).max(MIN_CELLS);
    let h = side / cells as f64;
    let sigma = p.sigma();
    let t_now = log.last_time();

    let kernels: Vec<Kernel> = log
        .records()
        .iter()
        .map(|r| {
            let w = r.wind.to_vector();
            let speed = w.norm();
            let stretch = 1.0 + p.wind_scale * speed;
            let along = if speed > 0.0 { w / speed } else { Vector2::x() };
            let a = sigma * stretch;
            // The kernel keeps its upwind extent and grows downwind.
            Kernel {
                center: r.position + along * (a - sigma),
                origin: r.position,
                along,
                a,
                b: sigma / stretch,
                log_decay: -(t_now - r.time) / p.time_scale,
                reading: r.gas,
            }
        })
        .collect();

    let readings = log.readings();
    let n = readings.len() as f64;
    let r_mean = readings.iter().sum::<f64>() / n;
    let prior_var = readings.iter().map(|r| (r - r_mean).powi(2)).sum::<f64>() / n;

    let radius2 = p.evaluation_radius * p.evaluation_radius;
    let mut mean = vec![0.0; cells * cells];
    let mut variance = vec![prior_var; cells * cells];
    let mut confidence = vec![0.0; cells * cells];
    let mut local: Vec<(f64, f64, f64)> = Vec::with_capacity(kernels.len());

    for j in 0..cells {
        for i in 0..cells {
            let x = Point2::new((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
            local.clear();
            for k in &kernels {
                if (x - k.origin).norm_squared() <= radius2 {
                    let lw = k.log_weight(&x);
                    local.push((lw, lw + k.log_decay, k.reading));
                }
            }
            if local.is_empty() {
                continue;
            }
            // Decayed weights only enter ratios, so shift them to avoid underflow.
            let shift = local.iter().map(|l| l.1).fold(f64::NEG_INFINITY, f64::max);
            let mut omega = 0.0;
            let mut omega_d = 0.0;
            let mut r_sum = 0.0;
            for (lw, lwd, r) in &local {
                omega += lw.exp();
                let wd = (lwd - shift).exp();
                omega_d += wd;
                r_sum += wd * r;
            }
            let r_hat = r_sum / omega_d;
            let v_hat = local
                .iter()
                .map(|(_, lwd, r)| (lwd - shift).exp() * (r - r_hat).powi(2))
                .sum::<f64>()
                / omega_d;
            let alpha = 1.0 - (-omega * omega).exp();
            let k = j * cells + i;
            mean[k] = alpha * r_hat;
            variance[k] = alpha * v_hat + (1.0 - alpha) * prior_var;
            confidence[k] = alpha;
        }
    }
    Ok(DmvwMaps {
        mean: ScalarGrid::from_values(cells, cells, h, mean)?,
        variance: ScalarGrid::from_values(cells, cells, h, variance)?,
        confidence: ScalarGrid::from_values(cells, cells, h, confidence)?,
    })
}
