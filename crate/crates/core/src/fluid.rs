//! Grid-based stable-fluids solver driven by a spatially constant wind.
//!
//! One step runs `apply_wind -> project -> advect(velocity) -> project ->
//! add_source -> diffuse(density) -> advect(density)` on a collocated grid.
//! Density uses zero-gradient (no-flux) diffusion boundaries in both modes;
//! the boundary mode only changes how velocity behaves at the walls.

use std::sync::Arc;

use nalgebra::{DMatrix, Point2, SymmetricEigen, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ScalarGrid, Stencil, VelocityGrid};
use crate::wind::{WindField, TIME_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryMode {
    /// Walls: the normal velocity component reflects.
    Closed,
    /// Zero-gradient velocity; plumes leave through the edges.
    #[default]
    Open,
}

impl std::str::FromStr for BoundaryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed" => Ok(BoundaryMode::Closed),
            "open" => Ok(BoundaryMode::Open),
            other => Err(Error::invalid("boundary_mode", format!("`{other}` is not closed|open"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub grid_cells_per_side: usize,
    /// Side of the square domain in meters.
    pub domain_side: f64,
    /// Diffusion coefficient in m²/s.
    pub diffusion: f64,
    pub dt: f64,
    /// Gauss-Seidel sweeps for the implicit diffusion solve.
    pub solver_iterations: usize,
    /// Mass released per second at the source.
    pub emission_rate: f64,
    /// Gain from measured wind (m/s) to solver velocity.
    pub wind_coupling: f64,
    pub boundary_mode: BoundaryMode,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            grid_cells_per_side: 64,
            domain_side: 64.0,
            diffusion: 0.0,
            dt: 1.0,
            solver_iterations: 20,
            emission_rate: 50.0,
            wind_coupling: 1.0,
            boundary_mode: BoundaryMode::Open,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        if self.grid_cells_per_side < crate::grid::MIN_CELLS {
            return Err(Error::invalid(
                "grid_cells_per_side",
                format!("{} < {}", self.grid_cells_per_side, crate::grid::MIN_CELLS),
            ));
        }
        if !(self.domain_side > 0.0 && self.domain_side.is_finite()) {
            return Err(Error::invalid("domain_side", format!("{}", self.domain_side)));
        }
        if !(self.diffusion >= 0.0 && self.diffusion.is_finite()) {
            return Err(Error::invalid("diffusion", format!("{} is negative", self.diffusion)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("dt", format!("{} is not positive", self.dt)));
        }
        if self.solver_iterations < 1 {
            return Err(Error::invalid("solver_iterations", "must be at least 1"));
        }
        if !(self.emission_rate >= 0.0 && self.emission_rate.is_finite()) {
            return Err(Error::invalid("emission_rate", format!("{} is negative", self.emission_rate)));
        }
        if !self.wind_coupling.is_finite() {
            return Err(Error::invalid("wind_coupling", "not finite"));
        }
        Ok(())
    }

    pub fn cell_size(&self) -> f64 {
        self.domain_side / self.grid_cells_per_side as f64
    }

    /// Same physics on a domain twice as wide (four times the cells).
    pub fn enlarged(&self) -> SimParams {
        SimParams {
            grid_cells_per_side: self.grid_cells_per_side * 2,
            domain_side: self.domain_side * 2.0,
            ..self.clone()
        }
    }

    pub fn empty_density(&self) -> ScalarGrid {
        let n = self.grid_cells_per_side;
        ScalarGrid::from_raw(n, n, self.cell_size(), vec![0.0; n * n])
    }
}

/// Number of completed steps at time `t`; measurement times floor onto steps.
pub fn steps_for(t: f64, dt: f64) -> usize {
    if t <= 0.0 {
        0
    } else {
        (t / dt + TIME_EPS).floor() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub density: ScalarGrid,
    pub velocity: VelocityGrid,
    pub sim_time: f64,
}

impl SimState {
    pub fn new(params: &SimParams) -> Result<Self> {
        params.validate()?;
        let density = params.empty_density();
        let velocity = VelocityGrid::zeros(density.width(), density.height(), density.cell_size());
        Ok(SimState {
            density,
            velocity,
            sim_time: 0.0,
        })
    }
}

fn check_inside(field: &ScalarGrid, p: &Point2<f64>) -> Result<()> {
    if field.contains(p) && p.x.is_finite() && p.y.is_finite() {
        Ok(())
    } else {
        Err(Error::OutOfDomain {
            x: p.x,
            y: p.y,
            side: field.extent().x,
        })
    }
}

fn splat(field: &mut ScalarGrid, location: &Point2<f64>, amount: f64) {
    let st = field.stencil(location);
    let w = field.width();
    let base = st.j0 * w + st.i0;
    let weights = st.weights();
    let values = field.values_mut();
    values[base] += amount * weights[0];
    values[base + 1] += amount * weights[1];
    values[base + w] += amount * weights[2];
    values[base + w + 1] += amount * weights[3];
}

/// Deposits `rate * dt` bilinearly into the four cells around `location`.
pub fn add_source(state: &SimState, location: &Point2<f64>, rate: f64, dt: f64) -> Result<SimState> {
    check_inside(&state.density, location)?;
    let mut next = state.clone();
    if rate != 0.0 {
        splat(&mut next.density, location, rate * dt);
    }
    Ok(next)
}

/// In-place lexicographic Gauss-Seidel for `(1 + a n_k) x_k - a Σ x_nb = x0_k`,
/// finished by one flux-form update `x0 + a L x` so the total is conserved
/// exactly even when the sweeps have not converged.
fn diffuse_into(src: &[f64], dst: &mut [f64], scratch: &mut [f64], width: usize, height: usize, a: f64, iterations: usize) {
    if a == 0.0 {
        dst.copy_from_slice(src);
        return;
    }
    let inv = [1.0 / (1.0 + 2.0 * a), 1.0 / (1.0 + 3.0 * a), 1.0 / (1.0 + 4.0 * a)];
    let x = scratch;
    x.copy_from_slice(src);
    let update = |x: &mut [f64], i: usize, j: usize| {
        let k = j * width + i;
        let mut sum = 0.0;
        let mut n = 0;
        if i > 0 {
            sum += x[k - 1];
            n += 1;
        }
        if i + 1 < width {
            sum += x[k + 1];
            n += 1;
        }
        if j > 0 {
            sum += x[k - width];
            n += 1;
        }
        if j + 1 < height {
            sum += x[k + width];
            n += 1;
        }
        x[k] = (src[k] + a * sum) * inv[n - 2];
    };
    let inv4 = inv[2];
    let a4 = a * inv4;
    for _ in 0..iterations {
        for j in 0..height {
            if j == 0 || j + 1 == height {
                for i in 0..width {
                    update(x, i, j);
                }
                continue;
            }
            update(x, 0, j);
            let row = j * width;
            // Only the left neighbour depends on this sweep's previous cell;
            // keep it out of the independent part.
            let mut prev = x[row];
            for k in row + 1..row + width - 1 {
                let c = (src[k] + a * (x[k + 1] + x[k - width] + x[k + width])) * inv4;
                prev = c + a4 * prev;
                x[k] = prev;
            }
            update(x, width - 1, j);
        }
    }
    for j in 0..height {
        let row = j * width;
        for i in 0..width {
            let k = row + i;
            let mut flux = 0.0;
            if i > 0 {
                flux += x[k - 1] - x[k];
            }
            if i + 1 < width {
                flux += x[k + 1] - x[k];
            }
            if j > 0 {
                flux += x[k - width] - x[k];
            }
            if j + 1 < height {
                flux += x[k + width] - x[k];
            }
            dst[k] = (src[k] + a * flux).max(0.0);
        }
    }
}

/// Implicit diffusion step solved with `iterations` Gauss-Seidel sweeps.
pub fn diffuse(field: &ScalarGrid, diffusion: f64, dt: f64, iterations: usize) -> Result<ScalarGrid> {
    if iterations < 1 {
        return Err(Error::invalid("iterations", "must be at least 1"));
    }
    if !(diffusion >= 0.0) {
        return Err(Error::invalid("diffusion", format!("{diffusion} is negative")));
    }
    let (w, h) = (field.width(), field.height());
    let a = dt * diffusion / (field.cell_size() * field.cell_size());
    let mut out = vec![0.0; w * h];
    let mut scratch = vec![0.0; w * h];
    diffuse_into(field.values(), &mut out, &mut scratch, w, h, a, iterations);
    Ok(ScalarGrid::from_raw(w, h, field.cell_size(), out))
}

/// Backtrace stencil for cell `i` displaced by `d` cells along one axis.
///
/// Uniform displacements yield identical fractional weights for every
/// interior cell, which keeps translated fields bit-identical.
#[inline]
fn axis_stencil(i: usize, d: f64, n: usize) -> (usize, f64) {
    let fl = d.floor();
    let frac = d - fl;
    let base = i as f64 + fl;
    if base >= 0.0 && base + frac <= (n - 1) as f64 {
        let b = base as usize;
        if b >= n - 1 {
            (n - 2, 1.0)
        } else {
            (b, frac)
        }
    } else {
        let g = (i as f64 + d).clamp(0.0, (n - 1) as f64);
        let b = (g.floor() as usize).min(n - 2);
        (b, g - b as f64)
    }
}

#[inline]
fn backtrace(i: usize, j: usize, u: f64, v: f64, scale: f64, width: usize, height: usize) -> Stencil {
    let (i0, fx) = axis_stencil(i, -u * scale, width);
    let (j0, fy) = axis_stencil(j, -v * scale, height);
    Stencil { i0, j0, fx, fy }
}

fn advect_into(src: &[f64], dst: &mut [f64], u: &[f64], v: &[f64], width: usize, height: usize, scale: f64) {
    for j in 0..height {
        for i in 0..width {
            let k = j * width + i;
            let st = backtrace(i, j, u[k], v[k], scale, width, height);
            dst[k] = st.sample(src, width);
        }
    }
}

/// Semi-Lagrangian transport: each cell takes the bilinear value at
/// `x - dt * velocity(x)`, with the backtrace clamped to the domain.
pub fn advect(field: &ScalarGrid, velocity: &VelocityGrid, dt: f64) -> Result<ScalarGrid> {
    if !velocity.matches(field) {
        return Err(Error::DimensionMismatch(format!(
            "velocity {}x{} vs field {}x{}",
            velocity.width(),
            velocity.height(),
            field.width(),
            field.height()
        )));
    }
    let (w, h) = (field.width(), field.height());
    let mut out = vec![0.0; w * h];
    advect_into(field.values(), &mut out, &velocity.u, &velocity.v, w, h, dt / field.cell_size());
    for x in &mut out {
        *x = x.max(0.0);
    }
    Ok(ScalarGrid::from_raw(w, h, field.cell_size(), out))
}

fn advect_velocity(velocity: &VelocityGrid, dt: f64) -> VelocityGrid {
    let (w, h) = (velocity.width(), velocity.height());
    let scale = dt / velocity.cell_size();
    let mut u = vec![0.0; w * h];
    let mut v = vec![0.0; w * h];
    for j in 0..h {
        for i in 0..w {
            let k = j * w + i;
            let st = backtrace(i, j, velocity.u[k], velocity.v[k], scale, w, h);
            u[k] = st.sample(&velocity.u, w);
            v[k] = st.sample(&velocity.v, w);
        }
    }
    VelocityGrid::from_components(w, h, velocity.cell_size(), u, v).expect("advected velocity keeps its shape")
}

/// Central-difference divergence with ghost cells: open mode mirrors both
/// components (zero gradient), closed mode negates the wall-normal one.
pub fn divergence(velocity: &VelocityGrid, mode: BoundaryMode) -> Vec<f64> {
    let (w, h) = (velocity.width(), velocity.height());
    let s = match mode {
        BoundaryMode::Open => 1.0,
        BoundaryMode::Closed => -1.0,
    };
    let inv2h = 0.5 / velocity.cell_size();
    let (u, v) = (&velocity.u, &velocity.v);
    let mut div = vec![0.0; w * h];
    for j in 0..h {
        for i in 0..w {
            let k = j * w + i;
            let right = if i + 1 < w { u[k + 1] } else { s * u[k] };
            let left = if i > 0 { u[k - 1] } else { s * u[k] };
            let up = if j + 1 < h { v[k + w] } else { s * v[k] };
            let down = if j > 0 { v[k - w] } else { s * v[k] };
            div[k] = (right - left + up - down) * inv2h;
        }
    }
    div
}

/// 1D central-difference matrix matching [`divergence`] along one axis.
fn difference_matrix(n: usize, h: f64, mode: BoundaryMode) -> DMatrix<f64> {
    let s = match mode {
        BoundaryMode::Open => 1.0,
        BoundaryMode::Closed => -1.0,
    };
    let c = 0.5 / h;
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        if i + 1 < n {
            d[(i, i + 1)] += c;
        } else {
            d[(i, i)] += s * c;
        }
        if i > 0 {
            d[(i, i - 1)] -= c;
        } else {
            d[(i, i)] -= s * c;
        }
    }
    d
}

/// Exact pressure projection for one grid shape and boundary mode.
///
/// With `D` the discrete divergence above, the projection is
/// `w - Dᵀ (D Dᵀ)⁺ D w`, the orthogonal projection onto `ker D`. `D Dᵀ`
/// separates into per-axis operators, so it is inverted through their
/// eigendecompositions; null modes are dropped, which is consistent because
/// `D w` always lies in the range of `D Dᵀ`.
#[derive(Debug)]
pub struct PressureSolver {
    width: usize,
    height: usize,
    cell_size: f64,
    mode: BoundaryMode,
    dx: DMatrix<f64>,
    dy: DMatrix<f64>,
    qx: DMatrix<f64>,
    qy: DMatrix<f64>,
    inv_eig: DMatrix<f64>,
}

impl PressureSolver {
    pub fn new(width: usize, height: usize, cell_size: f64, mode: BoundaryMode) -> Self {
        let dx = difference_matrix(width, cell_size, mode);
        let dy = difference_matrix(height, cell_size, mode);
        let ex = SymmetricEigen::new(&dx * dx.transpose());
        let ey = SymmetricEigen::new(&dy * dy.transpose());
        let top = ex.eigenvalues.max() + ey.eigenvalues.max();
        let inv_eig = DMatrix::from_fn(height, width, |r, c| {
            let lam = ey.eigenvalues[r] + ex.eigenvalues[c];
            if lam > 1e-12 * top {
                1.0 / lam
            } else {
                0.0
            }
        });
        PressureSolver {
            width,
            height,
            cell_size,
            mode,
            dx,
            dy,
            qx: ex.eigenvectors,
            qy: ey.eigenvectors,
            inv_eig,
        }
    }

    fn fits(&self, velocity: &VelocityGrid, mode: BoundaryMode) -> bool {
        self.width == velocity.width()
            && self.height == velocity.height()
            && self.cell_size == velocity.cell_size()
            && self.mode == mode
    }

    pub fn project(&self, velocity: &VelocityGrid) -> VelocityGrid {
        let div = divergence(velocity, self.mode);
        if div.iter().all(|d| *d == 0.0) {
            return velocity.clone();
        }
        let (w, h) = (self.width, self.height);
        let b = DMatrix::from_row_slice(h, w, &div);
        let mut spec = self.qy.transpose() * b * &self.qx;
        spec.component_mul_assign(&self.inv_eig);
        let psi = &self.qy * spec * self.qx.transpose();
        let gu = &psi * &self.dx;
        let gv = self.dy.transpose() * &psi;
        let mut u = velocity.u.clone();
        let mut v = velocity.v.clone();
        for j in 0..h {
            for i in 0..w {
                let k = j * w + i;
                u[k] -= gu[(j, i)];
                v[k] -= gv[(j, i)];
            }
        }
        VelocityGrid::from_components(w, h, self.cell_size, u, v).expect("projection keeps the shape")
    }
}

/// Removes the divergent part of `velocity` (see [`PressureSolver`]).
pub fn project(velocity: &VelocityGrid, mode: BoundaryMode) -> VelocityGrid {
    PressureSolver::new(velocity.width(), velocity.height(), velocity.cell_size(), mode).project(velocity)
}

/// Replaces the bulk velocity with the spatially constant `coupling * wind`.
pub fn apply_wind(velocity: &VelocityGrid, wind: Vector2<f64>, coupling: f64) -> Result<VelocityGrid> {
    if !(wind.x.is_finite() && wind.y.is_finite()) {
        return Err(Error::invalid("wind", "not finite"));
    }
    Ok(VelocityGrid::uniform(
        velocity.width(),
        velocity.height(),
        velocity.cell_size(),
        wind * coupling,
    ))
}

/// Reusable buffers and the cached pressure solver for repeated steps.
#[derive(Debug, Default)]
struct Workspace {
    scratch: Vec<f64>,
    buffer: Vec<f64>,
    pressure: Option<Arc<PressureSolver>>,
}

impl Workspace {
    fn project(&mut self, velocity: &VelocityGrid, mode: BoundaryMode) -> VelocityGrid {
        // Spatially constant fields in open mode are already divergence free;
        // skip building the solver for them.
        if mode == BoundaryMode::Open && velocity.is_uniform() {
            return velocity.clone();
        }
        if divergence(velocity, mode).iter().all(|d| *d == 0.0) {
            return velocity.clone();
        }
        match &self.pressure {
            Some(p) if p.fits(velocity, mode) => {}
            _ => {
                self.pressure = Some(Arc::new(PressureSolver::new(
                    velocity.width(),
                    velocity.height(),
                    velocity.cell_size(),
                    mode,
                )))
            }
        }
        self.pressure.as_ref().unwrap().project(velocity)
    }
}

fn step_in_place(
    state: &mut SimState,
    params: &SimParams,
    wind: Vector2<f64>,
    source: &Point2<f64>,
    emit: bool,
    ws: &mut Workspace,
) -> Result<()> {
    let mode = params.boundary_mode;
    let vel = apply_wind(&state.velocity, wind, params.wind_coupling)?;
    let vel = ws.project(&vel, mode);
    // A spatially constant field is a fixed point of self-advection; skipping
    // it keeps the field exactly constant (bilinear weights may not sum to
    // one in the last bit).
    let vel = if vel.is_uniform() {
        vel
    } else {
        advect_velocity(&vel, params.dt)
    };
    state.velocity = ws.project(&vel, mode);

    if emit && params.emission_rate > 0.0 {
        check_inside(&state.density, source)?;
        splat(&mut state.density, source, params.emission_rate * params.dt);
    }

    let (w, h) = (state.density.width(), state.density.height());
    let hsz = state.density.cell_size();
    ws.scratch.resize(w * h, 0.0);
    ws.buffer.resize(w * h, 0.0);
    let a = params.dt * params.diffusion / (hsz * hsz);
    diffuse_into(
        state.density.values(),
        &mut ws.buffer,
        &mut ws.scratch,
        w,
        h,
        a,
        params.solver_iterations,
    );
    advect_into(
        &ws.buffer,
        state.density.values_mut(),
        &state.velocity.u,
        &state.velocity.v,
        w,
        h,
        params.dt / hsz,
    );
    for x in state.density.values_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    state.sim_time += params.dt;
    Ok(())
}

/// Advances a state by one step (functional form of [`Simulation::step`]).
pub fn step(
    state: &SimState,
    params: &SimParams,
    wind_at_t: Vector2<f64>,
    source: &Point2<f64>,
    emit: bool,
) -> Result<SimState> {
    params.validate()?;
    let mut next = state.clone();
    step_in_place(&mut next, params, wind_at_t, source, emit, &mut Workspace::default())?;
    Ok(next)
}

/// A running simulation with a fixed source and an instrumented step counter.
#[derive(Debug)]
pub struct Simulation {
    params: SimParams,
    source: Point2<f64>,
    state: SimState,
    steps: usize,
    ws: Workspace,
}

impl Simulation {
    pub fn new(params: &SimParams, source: Point2<f64>) -> Result<Self> {
        let state = SimState::new(params)?;
        check_inside(&state.density, &source)?;
        Ok(Simulation {
            params: params.clone(),
            source,
            state,
            steps: 0,
            ws: Workspace::default(),
        })
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn source(&self) -> Point2<f64> {
        self.source
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn density(&self) -> &ScalarGrid {
        &self.state.density
    }

    /// Steps taken so far.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.params.dt
    }

    pub fn step(&mut self, wind: Vector2<f64>, emit: bool) -> Result<()> {
        step_in_place(&mut self.state, &self.params, wind, &self.source, emit, &mut self.ws)?;
        self.steps += 1;
        // Avoid drift from repeated addition.
        self.state.sim_time = self.steps as f64 * self.params.dt;
        Ok(())
    }

    /// Runs emitting steps until the step containing `t` has completed. Step
    /// `k` uses the wind at its start time `k * dt`.
    pub fn advance_to(&mut self, t: f64, wind: &impl WindField) -> Result<()> {
        let target = steps_for(t, self.params.dt);
        if target < self.steps {
            return Err(Error::TimeReversal {
                requested: t,
                current: self.time(),
            });
        }
        while self.steps < target {
            let w = wind.wind_at(self.time());
            self.step(w, true)?;
        }
        Ok(())
    }

    pub fn sample(&self, p: &Point2<f64>) -> Result<f64> {
        self.state.density.sample(p)
    }
}

/// Model prediction `g̃` at each `(point, time)` probe for a continuous source.
pub fn simulate(
    params: &SimParams,
    wind: &impl WindField,
    horizon: f64,
    source: &Point2<f64>,
    probes: &[(Point2<f64>, f64)],
) -> Result<Vec<f64>> {
    let mut sim = Simulation::new(params, *source)?;
    for (index, (p, t)) in probes.iter().enumerate() {
        check_inside(&sim.state.density, p)?;
        if index > 0 && *t < probes[index - 1].1 {
            return Err(Error::UnorderedProbes { index, time: *t });
        }
        if *t > horizon + TIME_EPS {
            return Err(Error::invalid("probe time", format!("{t} s beyond wind horizon {horizon} s")));
        }
    }
    let mut out = Vec::with_capacity(probes.len());
    for (p, t) in probes {
        sim.advance_to(*t, wind)?;
        out.push(sim.sample(p)?);
    }
    Ok(out)
}

/// Returns measurement gaps that are not whole multiples of `dt`, which
/// would be floored onto earlier steps.
pub fn misaligned_times(times: &[f64], dt: f64) -> Vec<f64> {
    times
        .iter()
        .copied()
        .filter(|t| {
            let r = t / dt;
            (r - r.round()).abs() > 1e-6
        })
        .collect()
}
