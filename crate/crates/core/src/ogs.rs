//! One-shot grid search.
//!
//! A spatially constant wind makes the simulated plume a pure translation of
//! its source. One simulation on a domain twice as wide, with the source in
//! the middle, therefore predicts the readings for every candidate source:
//! the prediction for candidate `Δl` at probe `s` is the big field sampled at
//! `s - Δl + center`.

use nalgebra::{Point2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fluid::{SimParams, Simulation};
use crate::measurement::MeasurementLog;
use crate::wind::WindField;

/// Relative floor added to every entry before normalizing.
pub const EPSILON: f64 = 1e-9;

/// Regular `m x n` lattice of candidate sources over `[0, side]²`. Candidate
/// `j = b * m + a` sits at the center of lattice cell `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateGrid {
    m: usize,
    n: usize,
    domain_side: f64,
}

impl CandidateGrid {
    pub fn new(m: usize, n: usize, domain_side: f64) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::invalid("candidate grid", format!("{m}x{n} has no candidates")));
        }
        if !(domain_side > 0.0 && domain_side.is_finite()) {
            return Err(Error::invalid("domain_side", format!("{domain_side}")));
        }
        Ok(CandidateGrid { m, n, domain_side })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.m * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn domain_side(&self) -> f64 {
        self.domain_side
    }

    pub fn pitch_x(&self) -> f64 {
        self.domain_side / self.m as f64
    }

    pub fn pitch_y(&self) -> f64 {
        self.domain_side / self.n as f64
    }

    pub fn cell_of(&self, j: usize) -> (usize, usize) {
        (j % self.m, j / self.m)
    }

    pub fn index_of(&self, a: usize, b: usize) -> usize {
        b * self.m + a
    }

    pub fn center(&self, j: usize) -> Point2<f64> {
        let (a, b) = self.cell_of(j);
        Point2::new((a as f64 + 0.5) * self.pitch_x(), (b as f64 + 0.5) * self.pitch_y())
    }

    pub fn centers(&self) -> Vec<Point2<f64>> {
        (0..self.len()).map(|j| self.center(j)).collect()
    }

    /// Candidate whose lattice cell contains `p` (clamped to the lattice).
    pub fn nearest(&self, p: &Point2<f64>) -> usize {
        let a = ((p.x / self.pitch_x()).floor().max(0.0) as usize).min(self.m - 1);
        let b = ((p.y / self.pitch_y()).floor().max(0.0) as usize).min(self.n - 1);
        self.index_of(a, b)
    }

    /// Distance between two candidates in lattice steps (Chebyshev).
    pub fn cell_distance(&self, i: usize, j: usize) -> usize {
        let (ai, bi) = self.cell_of(i);
        let (aj, bj) = self.cell_of(j);
        ai.abs_diff(aj).max(bi.abs_diff(bj))
    }

    /// True when the pitch is a whole number of simulation cells in both
    /// axes, which makes the one-shot matrix exact.
    pub fn is_aligned(&self, cell_size: f64) -> bool {
        let whole = |pitch: f64| {
            let c = pitch / cell_size;
            (c - c.round()).abs() < 1e-9 && c.round() >= 1.0
        };
        whole(self.pitch_x()) && whole(self.pitch_y())
    }
}

/// `k x mn` model predictions, row `i` for measurement `i`, column `j` for
/// candidate `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    steps: usize,
}

impl ConcentrationMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let k = rows.len();
        if k == 0 {
            return Err(Error::Empty("concentration matrix"));
        }
        let cols = rows[0].len();
        let mut values = Vec::with_capacity(k * cols);
        for (i, r) in rows.into_iter().enumerate() {
            if r.len() != cols {
                return Err(Error::DimensionMismatch(format!("row {i} has {} columns, expected {cols}", r.len())));
            }
            if let Some(v) = r.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                return Err(Error::invalid("matrix", format!("entry {v} in row {i}")));
            }
            values.extend(r);
        }
        Ok(ConcentrationMatrix {
            rows: k,
            cols,
            values,
            steps: 0,
        })
    }

    pub fn k(&self) -> usize {
        self.rows
    }

    pub fn mn(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Solver steps spent building the matrix.
    pub fn steps(&self) -> usize {
        self.steps
    }
}

fn floor_for(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        EPSILON * max
    } else {
        EPSILON
    }
}

fn normalize_with(v: &[f64], eps: f64) -> Vec<f64> {
    let total: f64 = v.iter().map(|x| x + eps).sum();
    v.iter().map(|x| (x + eps) / total).collect()
}

/// `(v + ε) / Σ(v + ε)` with `ε = EPSILON * max(v)`, so the result does not
/// depend on the scale of `v`. An all-zero vector maps to the uniform one.
pub fn normalize(v: &[f64]) -> Vec<f64> {
    normalize_with(v, floor_for(v))
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(p, q)| p * (p / q).ln()).sum()
}

fn check_vector(name: &'static str, v: &[f64]) -> Result<()> {
    if let Some(x) = v.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::invalid(name, format!("entry {x} is negative or not finite")));
    }
    Ok(())
}

/// `KL(normalize(a) || normalize(b))`.
pub fn distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!("{} readings vs {} predictions", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::invalid("readings", "need at least two entries"));
    }
    check_vector("readings", a)?;
    check_vector("predictions", b)?;
    Ok(kl(&normalize(a), &normalize(b)))
}

/// Softmax of `-q / τ` over the candidate lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodMap {
    grid: CandidateGrid,
    probabilities: Vec<f64>,
    tau: f64,
}

impl LikelihoodMap {
    pub fn from_distances(grid: CandidateGrid, q: &[f64], tau: f64) -> Result<Self> {
        if q.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!("{} distances for {} candidates", q.len(), grid.len())));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::invalid("tau", format!("{tau} is not positive")));
        }
        let qmin = q.iter().copied().fold(f64::INFINITY, f64::min);
        let weights: Vec<f64> = q.iter().map(|qj| (-(qj - qmin) / tau).exp()).collect();
        let total: f64 = weights.iter().sum();
        Ok(LikelihoodMap {
            grid,
            probabilities: weights.into_iter().map(|w| w / total).collect(),
            tau,
        })
    }

    /// Every candidate equally likely.
    pub fn uniform(grid: CandidateGrid) -> Self {
        let p = 1.0 / grid.len() as f64;
        LikelihoodMap {
            grid,
            probabilities: vec![p; grid.len()],
            tau: 1.0,
        }
    }

    pub fn grid(&self) -> &CandidateGrid {
        &self.grid
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.probabilities[self.grid.index_of(a, b)]
    }

    /// Most likely candidate, first index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (j, p) in self.probabilities.iter().enumerate() {
            if *p > self.probabilities[best] {
                best = j;
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceEstimate {
    pub location: Point2<f64>,
    pub q: Vec<f64>,
    pub index: usize,
}

impl SourceEstimate {
    pub fn from_distances(grid: &CandidateGrid, q: Vec<f64>) -> Result<Self> {
        if q.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!("{} distances for {} candidates", q.len(), grid.len())));
        }
        if let Some(column) = q.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteDistance { column });
        }
        let mut index = 0;
        for (j, v) in q.iter().enumerate() {
            if *v < q[index] {
                index = j;
            }
        }
        Ok(SourceEstimate {
            location: grid.center(index),
            q,
            index,
        })
    }
}

/// Default temperature: `median(q) - min(q)`, floored at `1e-6`.
pub fn default_tau(q: &[f64]) -> f64 {
    let mut sorted = q.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if sorted.is_empty() {
        0.0
    } else if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
    };
    let min = sorted.first().copied().unwrap_or(0.0);
    (median - min).max(1e-6)
}

/// Distance of the readings to every column. Readings are floored relative
/// to their own maximum and columns relative to the matrix maximum, so
/// scaling either side leaves `q` unchanged. All-zero readings give `q = 0`
/// everywhere.
pub fn distances(m: &ConcentrationMatrix, g: &[f64]) -> Result<Vec<f64>> {
    if g.len() != m.k() {
        return Err(Error::DimensionMismatch(format!("{} readings for {} matrix rows", g.len(), m.k())));
    }
    check_vector("readings", g)?;
    // All-zero readings have no shape to compare; every candidate fits.
    if g.iter().all(|x| *x == 0.0) {
        return Ok(vec![0.0; m.mn()]);
    }
    let pg = normalize(g);
    let col_eps = floor_for(&m.values);
    Ok((0..m.mn())
        .map(|j| kl(&pg, &normalize_with(&m.column(j), col_eps)))
        .collect())
}

/// Picks the column closest to the readings and turns the distances into a
/// likelihood. `tau = None` selects [`default_tau`].
pub fn localize(
    m: &ConcentrationMatrix,
    g: &[f64],
    grid: &CandidateGrid,
    tau: Option<f64>,
) -> Result<(SourceEstimate, LikelihoodMap)> {
    if m.mn() != grid.len() {
        return Err(Error::DimensionMismatch(format!("{} columns for {} candidates", m.mn(), grid.len())));
    }
    let q = distances(m, g)?;
    let estimate = SourceEstimate::from_distances(grid, q)?;
    let tau = tau.unwrap_or_else(|| default_tau(&estimate.q));
    let map = LikelihoodMap::from_distances(*grid, &estimate.q, tau)?;
    Ok((estimate, map))
}

fn check_candidates(log: &MeasurementLog, params: &SimParams, grid: &CandidateGrid) -> Result<()> {
    params.validate()?;
    log.require_len(1)?;
    let side = params.domain_side;
    if (grid.domain_side() - side).abs() > 1e-9 * side || (log.domain_side() - side).abs() > 1e-9 * side {
        return Err(Error::DimensionMismatch(format!(
            "model domain {side} m, candidate domain {} m, log domain {} m",
            grid.domain_side(),
            log.domain_side()
        )));
    }
    Ok(())
}

/// Sub-cell position of the candidate lattice; the enlarged source sits at
/// the same phase so every shift is a whole number of cells.
fn lattice_phase(grid: &CandidateGrid, h: f64) -> Vector2<f64> {
    let c = grid.center(0);
    Vector2::new(c.x - (c.x / h).floor() * h, c.y - (c.y / h).floor() * h)
}

/// Source position of the one-shot simulation on the enlarged domain.
pub fn enlarged_source(params: &SimParams, grid: &CandidateGrid) -> Point2<f64> {
    let h = params.cell_size();
    let side = params.domain_side;
    Point2::new(side, side) + lattice_phase(grid, h)
}

/// One-shot matrix for a log over `[0, side]²`. `params` describes the model
/// on the measurement domain; the simulation itself runs on
/// `params.enlarged()`. Wind comes from the log.
pub fn build_matrix(log: &MeasurementLog, params: &SimParams, grid: &CandidateGrid) -> Result<ConcentrationMatrix> {
    check_candidates(log, params, grid)?;
    let wind = log.wind_series(params)?;
    build_matrix_with_wind(log, params, grid, &wind)
}

/// [`build_matrix`] with an explicit wind field.
pub fn build_matrix_with_wind(
    log: &MeasurementLog,
    params: &SimParams,
    grid: &CandidateGrid,
    wind: &impl WindField,
) -> Result<ConcentrationMatrix> {
    check_candidates(log, params, grid)?;
    let big = params.enlarged();
    let source = enlarged_source(params, grid);
    let mut sim = Simulation::new(&big, source)?;
    let centers = grid.centers();
    let mut values = Vec::with_capacity(log.len() * grid.len());
    for r in log.records() {
        sim.advance_to(r.time, wind)?;
        for c in &centers {
            let p = r.position - c.coords + source.coords;
            values.push(sim.sample(&p)?);
        }
    }
    Ok(ConcentrationMatrix {
        rows: log.len(),
        cols: grid.len(),
        values,
        steps: sim.steps(),
    })
}

/// Where the measurement domain sits inside the enlarged domain for
/// per-candidate simulations: a whole number of cells close to `side / 2`.
pub fn embedding_offset(params: &SimParams) -> Vector2<f64> {
    let cells = (params.grid_cells_per_side / 2) as f64;
    let o = cells * params.cell_size();
    Vector2::new(o, o)
}

/// Reference matrix from one simulation per candidate, each with its source
/// at the candidate. Costs `mn` simulations.
pub fn naive_matrix(log: &MeasurementLog, params: &SimParams, grid: &CandidateGrid) -> Result<ConcentrationMatrix> {
    check_candidates(log, params, grid)?;
    let wind = log.wind_series(params)?;
    let big = params.enlarged();
    let offset = embedding_offset(params);
    let probes: Vec<(Point2<f64>, f64)> = log.records().iter().map(|r| (r.position + offset, r.time)).collect();
    let mut columns = Vec::with_capacity(grid.len());
    let mut steps = 0;
    for c in grid.centers() {
        let mut sim = Simulation::new(&big, c + offset)?;
        let mut col = Vec::with_capacity(probes.len());
        for (p, t) in &probes {
            sim.advance_to(*t, &wind)?;
            col.push(sim.sample(p)?);
        }
        steps += sim.steps();
        columns.push(col);
    }
    let k = log.len();
    let mut values = Vec::with_capacity(k * grid.len());
    for i in 0..k {
        values.extend(columns.iter().map(|col| col[i]));
    }
    Ok(ConcentrationMatrix {
        rows: k,
        cols: grid.len(),
        values,
        steps,
    })
}

pub fn naive_localize(log: &MeasurementLog, params: &SimParams, grid: &CandidateGrid) -> Result<SourceEstimate> {
    let m = naive_matrix(log, params, grid)?;
    Ok(localize(&m, &log.readings(), grid, None)?.0)
}

/// `build_matrix` followed by `localize`.
pub fn ogs_localize(
    log: &MeasurementLog,
    params: &SimParams,
    grid: &CandidateGrid,
    tau: Option<f64>,
) -> Result<(SourceEstimate, LikelihoodMap)> {
    let m = build_matrix(log, params, grid)?;
    localize(&m, &log.readings(), grid, tau)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize(&[1.0; 4]), vec![0.25; 4]);
        for p in normalize(&[0.0; 3]) {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        let v = [0.3, 0.0, 2.0, 1e-4];
        let s: Vec<f64> = v.iter().map(|x| x * 1e6).collect();
        for (a, b) in normalize(&v).iter().zip(normalize(&s)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn distance_examples() {
        assert_eq!(distance(&[0.2, 0.5, 0.3], &[0.2, 0.5, 0.3]).unwrap(), 0.0);
        let d = distance(&[1.0, 0.0], &[0.5, 0.5]).unwrap();
        assert!((d - 2f64.ln()).abs() < 1e-6);
        let a = [1.0, 2.0, 3.0];
        let b = [3.0, 1.0, 1.0];
        assert!((distance(&a, &b).unwrap() - distance(&b, &a).unwrap()).abs() > 1e-3);
        assert!(distance(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn candidate_lattice_geometry() {
        let g = CandidateGrid::new(4, 2, 8.0).unwrap();
        assert_eq!(g.center(0), Point2::new(1.0, 2.0));
        assert_eq!(g.center(5), Point2::new(3.0, 6.0));
        assert_eq!(g.nearest(&Point2::new(7.9, 7.9)), 7);
        assert!(g.is_aligned(1.0));
        assert!(!g.is_aligned(3.0));
    }

    #[test]
    fn localize_finds_matching_column() {
        let m = ConcentrationMatrix::from_rows(vec![vec![1.0, 0.0, 2.0, 0.5], vec![0.0, 1.0, 2.0, 0.5]]).unwrap();
        let grid = CandidateGrid::new(2, 2, 2.0).unwrap();
        let (est, map) = localize(&m, &[0.0, 7.0], &grid, None).unwrap();
        assert_eq!(est.index, 1);
        // The column floor is relative to the whole matrix, so an exact match
        // is off by the floor only.
        assert!(est.q[1].abs() < 1e-8);
        assert_eq!(map.argmax(), 1);
        assert!((map.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_matrix_ties_break_to_first() {
        let m = ConcentrationMatrix::from_rows(vec![vec![0.0; 6]; 3]).unwrap();
        let grid = CandidateGrid::new(3, 2, 6.0).unwrap();
        let (est, map) = localize(&m, &[1.0, 2.0, 0.5], &grid, None).unwrap();
        assert_eq!(est.index, 0);
        assert_eq!(map.argmax(), 0);
    }
}
