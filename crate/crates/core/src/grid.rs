//! Cell-centered grids shared by the solver, the localizers and the writers.
//!
//! Cell `(i, j)` covers `[i*h, (i+1)*h] x [j*h, (j+1)*h]` and its center sits at
//! `((i + 0.5) h, (j + 0.5) h)`. Storage is row-major with `j` (the y index) as
//! the row.

use nalgebra::{Point2, Vector2};

use crate::error::{Error, Result};

/// Smallest grid edge accepted by [`ScalarGrid::new`].
pub const MIN_CELLS: usize = 4;

/// Bilinear stencil for a continuous point: four cell indices and their weights.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Stencil {
    pub i0: usize,
    pub j0: usize,
    pub fx: f64,
    pub fy: f64,
}

impl Stencil {
    /// Stencil for continuous cell-center coordinates `(gx, gy)`, clamped to the
    /// range of cell centers so points in the outer half cell take the edge value.
    #[inline]
    pub(crate) fn from_cell_coords(gx: f64, gy: f64, width: usize, height: usize) -> Self {
        let gx = gx.clamp(0.0, (width - 1) as f64);
        let gy = gy.clamp(0.0, (height - 1) as f64);
        let i0 = (gx.floor() as usize).min(width - 2);
        let j0 = (gy.floor() as usize).min(height - 2);
        Stencil {
            i0,
            j0,
            fx: gx - i0 as f64,
            fy: gy - j0 as f64,
        }
    }

    #[inline]
    pub(crate) fn weights(&self) -> [f64; 4] {
        let (fx, fy) = (self.fx, self.fy);
        [
            (1.0 - fx) * (1.0 - fy),
            fx * (1.0 - fy),
            (1.0 - fx) * fy,
            fx * fy,
        ]
    }

    #[inline]
    pub(crate) fn sample(&self, values: &[f64], width: usize) -> f64 {
        let base = self.j0 * width + self.i0;
        let w = self.weights();
        w[0] * values[base] + w[1] * values[base + 1] + w[2] * values[base + width] + w[3] * values[base + width + 1]
    }
}

/// 2D cell-centered scalar field, e.g. gas concentration.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid {
    width: usize,
    height: usize,
    cell_size: f64,
    values: Vec<f64>,
}

impl ScalarGrid {
    pub fn new(width: usize, height: usize, cell_size: f64) -> Result<Self> {
        Self::from_values(width, height, cell_size, vec![0.0; width * height])
    }

    pub fn from_values(width: usize, height: usize, cell_size: f64, values: Vec<f64>) -> Result<Self> {
        if width < MIN_CELLS || height < MIN_CELLS {
            return Err(Error::invalid(
                "grid",
                format!("{width}x{height} is smaller than {MIN_CELLS}x{MIN_CELLS}"),
            ));
        }
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(Error::invalid("cell_size", format!("{cell_size} is not positive")));
        }
        if values.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {width}x{height} grid",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid("values", format!("{v} is negative or not finite")));
        }
        Ok(ScalarGrid {
            width,
            height,
            cell_size,
            values,
        })
    }

    /// Builds a grid without re-validating values. Used inside the solver where
    /// every operator clamps its output.
    pub(crate) fn from_raw(width: usize, height: usize, cell_size: f64, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), width * height);
        ScalarGrid {
            width,
            height,
            cell_size,
            values,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.width + i
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.index(i, j)]
    }

    /// Sets a cell; negative or non-finite values are rejected to keep the
    /// non-negativity invariant.
    pub fn set(&mut self, i: usize, j: usize, value: f64) -> Result<()> {
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::invalid("value", format!("{value} is negative or not finite")));
        }
        let idx = self.index(i, j);
        self.values[idx] = value;
        Ok(())
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn extent(&self) -> Vector2<f64> {
        Vector2::new(self.width as f64 * self.cell_size, self.height as f64 * self.cell_size)
    }

    pub fn contains(&self, p: &Point2<f64>) -> bool {
        let ext = self.extent();
        p.x >= 0.0 && p.y >= 0.0 && p.x <= ext.x && p.y <= ext.y
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Point2<f64> {
        Point2::new((i as f64 + 0.5) * self.cell_size, (j as f64 + 0.5) * self.cell_size)
    }

    pub(crate) fn stencil(&self, p: &Point2<f64>) -> Stencil {
        Stencil::from_cell_coords(
            p.x / self.cell_size - 0.5,
            p.y / self.cell_size - 0.5,
            self.width,
            self.height,
        )
    }

    /// Bilinear interpolation at a point in meters.
    pub fn sample(&self, p: &Point2<f64>) -> Result<f64> {
        if !self.contains(p) {
            return Err(Error::OutOfDomain {
                x: p.x,
                y: p.y,
                side: self.extent().x,
            });
        }
        Ok(self.stencil(p).sample(&self.values, self.width))
    }

    /// Index of the largest cell, first in row-major order on ties.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (k, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = k;
            }
        }
        (best % self.width, best / self.width)
    }
}

/// Collocated 2D velocity field in m/s.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityGrid {
    width: usize,
    height: usize,
    cell_size: f64,
    pub(crate) u: Vec<f64>,
    pub(crate) v: Vec<f64>,
}

impl VelocityGrid {
    pub fn zeros(width: usize, height: usize, cell_size: f64) -> Self {
        Self::uniform(width, height, cell_size, Vector2::zeros())
    }

    pub fn uniform(width: usize, height: usize, cell_size: f64, vel: Vector2<f64>) -> Self {
        VelocityGrid {
            width,
            height,
            cell_size,
            u: vec![vel.x; width * height],
            v: vec![vel.y; width * height],
        }
    }

    pub fn from_components(width: usize, height: usize, cell_size: f64, u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::invalid("grid", format!("{width}x{height} velocity grid")));
        }
        if u.len() != width * height || v.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "velocity components of length {}/{} for a {width}x{height} grid",
                u.len(),
                v.len()
            )));
        }
        if u.iter().chain(&v).any(|c| !c.is_finite()) {
            return Err(Error::invalid("velocity", "non-finite component"));
        }
        Ok(VelocityGrid {
            width,
            height,
            cell_size,
            u,
            v,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn at(&self, i: usize, j: usize) -> Vector2<f64> {
        let k = j * self.width + i;
        Vector2::new(self.u[k], self.v[k])
    }

    pub fn max_speed(&self) -> f64 {
        self.u
            .iter()
            .zip(&self.v)
            .map(|(u, v)| u.hypot(*v))
            .fold(0.0, f64::max)
    }

    pub fn is_uniform(&self) -> bool {
        let (u0, v0) = (self.u[0], self.v[0]);
        self.u.iter().all(|u| *u == u0) && self.v.iter().all(|v| *v == v0)
    }

    pub fn matches(&self, field: &ScalarGrid) -> bool {
        self.width == field.width && self.height == field.height && self.cell_size == field.cell_size
    }
}
