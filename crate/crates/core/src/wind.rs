//! Wind handling: polar/cartesian conversion, zero-order-hold reconstruction of a
//! dense, spatially constant wind series, and attitude-based wind estimation.
//!
//! Directions follow one convention everywhere: the angle the wind blows
//! *toward*, counterclockwise from +x, normalized to `[0, 2π)`.

use std::f64::consts::TAU;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack used when mapping a time onto a sample index so that `t = k*dt`
/// computed with rounding error still lands on sample `k`.
pub(crate) const TIME_EPS: f64 = 1e-9;

pub fn normalize_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    // rem_euclid can return TAU for tiny negative inputs.
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Wind speed and direction without a timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarWind {
    pub speed: f64,
    pub direction: f64,
}

impl PolarWind {
    pub fn new(speed: f64, direction: f64) -> Result<Self> {
        if !(speed >= 0.0 && speed.is_finite()) {
            return Err(Error::invalid("wind speed", format!("{speed} is negative or not finite")));
        }
        if !direction.is_finite() {
            return Err(Error::invalid("wind direction", "not finite"));
        }
        Ok(PolarWind {
            speed,
            direction: normalize_angle(direction),
        })
    }

    pub fn from_vector(v: Vector2<f64>) -> Self {
        let speed = v.norm();
        let direction = if speed > 0.0 { normalize_angle(v.y.atan2(v.x)) } else { 0.0 };
        PolarWind { speed, direction }
    }

    pub fn to_vector(&self) -> Vector2<f64> {
        Vector2::new(self.speed * self.direction.cos(), self.speed * self.direction.sin())
    }
}

/// One sparse wind observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindMeasurement {
    pub time: f64,
    pub speed: f64,
    pub direction: f64,
}

impl WindMeasurement {
    pub fn new(time: f64, speed: f64, direction: f64) -> Result<Self> {
        let polar = PolarWind::new(speed, direction)?;
        Ok(Self::from_polar(time, polar))
    }

    pub fn from_polar(time: f64, polar: PolarWind) -> Self {
        WindMeasurement {
            time,
            speed: polar.speed,
            direction: polar.direction,
        }
    }

    pub fn from_vector(time: f64, v: Vector2<f64>) -> Self {
        Self::from_polar(time, PolarWind::from_vector(v))
    }

    pub fn to_vector(&self) -> Vector2<f64> {
        PolarWind {
            speed: self.speed,
            direction: self.direction,
        }
        .to_vector()
    }
}

/// Anything that yields a spatially constant wind vector (m/s) at a time.
pub trait WindField {
    fn wind_at(&self, t: f64) -> Vector2<f64>;
}

impl<F: Fn(f64) -> Vector2<f64>> WindField for F {
    fn wind_at(&self, t: f64) -> Vector2<f64> {
        self(t)
    }
}

/// Temporally dense wind reconstruction sampled every `dt` seconds on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindSeries {
    dt: f64,
    horizon: f64,
    samples: Vec<Vector2<f64>>,
}

impl WindSeries {
    pub fn from_samples(dt: f64, horizon: f64, samples: Vec<Vector2<f64>>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("dt_w", format!("{dt} is not positive")));
        }
        if !(horizon >= 0.0 && horizon.is_finite()) {
            return Err(Error::invalid("horizon", format!("{horizon} is negative")));
        }
        if samples.len() != sample_count(dt, horizon) {
            return Err(Error::DimensionMismatch(format!(
                "{} samples cannot cover [0, {horizon}] at dt={dt}",
                samples.len()
            )));
        }
        if samples.iter().any(|s| !(s.x.is_finite() && s.y.is_finite())) {
            return Err(Error::invalid("samples", "non-finite wind vector"));
        }
        Ok(WindSeries { dt, horizon, samples })
    }

    pub fn constant(wind: Vector2<f64>, dt: f64, horizon: f64) -> Result<Self> {
        Self::from_samples(dt, horizon, vec![wind; sample_count(dt, horizon)])
    }

    /// Samples an arbitrary wind field at `k * dt`.
    pub fn from_field(field: &impl WindField, dt: f64, horizon: f64) -> Result<Self> {
        let n = sample_count(dt, horizon);
        let samples = (0..n).map(|k| field.wind_at(k as f64 * dt)).collect();
        Self::from_samples(dt, horizon, samples)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn samples(&self) -> &[Vector2<f64>] {
        &self.samples
    }

    /// Returns a copy with every vector scaled and rotated (used for
    /// model-side perturbation studies).
    pub fn transformed(&self, scale: f64, rotation: f64) -> WindSeries {
        let (s, c) = rotation.sin_cos();
        let samples = self
            .samples
            .iter()
            .map(|w| Vector2::new(c * w.x - s * w.y, s * w.x + c * w.y) * scale)
            .collect();
        WindSeries {
            dt: self.dt,
            horizon: self.horizon,
            samples,
        }
    }
}

impl WindField for WindSeries {
    /// Held value of the sample at or before `t`; times beyond the horizon
    /// keep the last sample.
    fn wind_at(&self, t: f64) -> Vector2<f64> {
        let k = if t <= 0.0 { 0 } else { (t / self.dt + TIME_EPS).floor() as usize };
        self.samples[k.min(self.samples.len() - 1)]
    }
}

fn sample_count(dt: f64, horizon: f64) -> usize {
    (horizon / dt + TIME_EPS).floor() as usize + 1
}

/// Zero-order-hold reconstruction of a dense series from sparse measurements.
///
/// Each dense sample takes the vector of the latest measurement at or before
/// it; samples before the first measurement take the first one.
pub fn reconstruct(measurements: &[WindMeasurement], dt_w: f64, horizon: f64) -> Result<WindSeries> {
    if measurements.is_empty() {
        return Err(Error::Empty("wind measurements"));
    }
    if let Some(m) = measurements
        .iter()
        .find(|m| !(m.time >= 0.0 && m.time <= horizon + TIME_EPS))
    {
        return Err(Error::invalid(
            "measurement time",
            format!("{} s is outside [0, {horizon}]", m.time),
        ));
    }
    let mut ordered: Vec<&WindMeasurement> = measurements.iter().collect();
    // Stable sort keeps the input order for equal timestamps, so the later
    // record wins, as it would in a streaming log.
    ordered.sort_by(|a, b| a.time.total_cmp(&b.time));

    let n = sample_count(dt_w, horizon);
    let mut samples = Vec::with_capacity(n);
    let mut next = 0;
    let mut current = ordered[0].to_vector();
    for k in 0..n {
        let t = k as f64 * dt_w;
        while next < ordered.len() && ordered[next].time <= t + TIME_EPS * dt_w {
            current = ordered[next].to_vector();
            next += 1;
        }
        samples.push(current);
    }
    WindSeries::from_samples(dt_w, horizon, samples)
}

/// Monotone lookup table from UAV tilt (degrees) to wind speed (m/s).
#[derive(Debug, Clone, PartialEq)]
pub struct TiltCalibration {
    breakpoints: Vec<(f64, f64)>,
}

impl TiltCalibration {
    pub fn new(breakpoints: Vec<(f64, f64)>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::invalid("calibration", "needs at least two breakpoints"));
        }
        for w in breakpoints.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::invalid("calibration", "tilt angles must be strictly increasing"));
            }
            if w[1].1 < w[0].1 {
                return Err(Error::invalid("calibration", "speeds must be non-decreasing"));
            }
        }
        if breakpoints
            .iter()
            .any(|(a, s)| !a.is_finite() || !s.is_finite() || *s < 0.0)
        {
            return Err(Error::invalid("calibration", "entries must be finite, speeds non-negative"));
        }
        Ok(TiltCalibration { breakpoints })
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    /// Piecewise-linear speed for a tilt in degrees, clamped at both ends.
    pub fn speed_at(&self, tilt_deg: f64) -> f64 {
        let bp = &self.breakpoints;
        if tilt_deg <= bp[0].0 {
            return bp[0].1;
        }
        let last = bp[bp.len() - 1];
        if tilt_deg >= last.0 {
            return last.1;
        }
        let k = bp.partition_point(|(a, _)| *a <= tilt_deg);
        let (a0, s0) = bp[k - 1];
        let (a1, s1) = bp[k];
        s0 + (s1 - s0) * (tilt_deg - a0) / (a1 - a0)
    }
}

/// Angle in radians between the body z-axis and world vertical for a
/// roll-pitch-yaw attitude (yaw does not change it).
pub fn tilt_magnitude(roll: f64, pitch: f64) -> f64 {
    (roll.cos() * pitch.cos()).clamp(-1.0, 1.0).acos()
}

/// Estimates wind from a hovering UAV's attitude.
///
/// The body z-axis in world coordinates is `Rz(yaw) Ry(pitch) Rx(roll) e_z`.
/// The airframe leans into the wind, so the wind blows toward the azimuth
/// opposite the lean.
pub fn tilt_to_wind(roll: f64, pitch: f64, yaw: f64, cal: &TiltCalibration) -> PolarWind {
    let tilt = tilt_magnitude(roll, pitch);
    let speed = cal.speed_at(tilt.to_degrees());
    // Lean direction in the body frame, then rotated into the world by yaw.
    let bx = pitch.sin() * roll.cos();
    let by = -roll.sin();
    let (sy, cy) = yaw.sin_cos();
    let wx = cy * bx - sy * by;
    let wy = sy * bx + cy * by;
    let direction = if wx == 0.0 && wy == 0.0 {
        0.0
    } else {
        normalize_angle(wy.atan2(wx) + std::f64::consts::PI)
    };
    PolarWind { speed, direction }
}
