use nalgebra::{Cholesky, DMatrix, DVector, Dyn, Point2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::MeasurementLog;
use crate::ogs::CandidateGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Rbf,
    Matern52,
}

impl std::str::FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rbf" => Ok(Kernel::Rbf),
            "matern52" => Ok(Kernel::Matern52),
            other => Err(Error::invalid("kernel", format!("`{other}` is not rbf|matern52"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpHyper {
    pub kernel: Kernel,
    pub variance: f64,
    /// Meters.
    pub lengthscale: f64,
    pub noise: f64,
}

impl Default for GpHyper {
    fn default() -> Self {
        GpHyper {
            kernel: Kernel::Rbf,
            variance: 15.0,
            lengthscale: 7.0,
            noise: 0.1,
        }
    }
}

impl GpHyper {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("variance", self.variance), ("lengthscale", self.lengthscale), ("noise", self.noise)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("{v} is not positive")));
            }
        }
        Ok(())
    }

    pub fn covariance(&self, a: &Point2<f64>, b: &Point2<f64>) -> f64 {
        let r = (a - b).norm() / self.lengthscale;
        match self.kernel {
            Kernel::Rbf => self.variance * (-0.5 * r * r).exp(),
            Kernel::Matern52 => {
                let s = 5f64.sqrt() * r;
                self.variance * (1.0 + s + s * s / 3.0) * (-s).exp()
            }
        }
    }
}

/// Exact zero-mean GP regression.
#[derive(Debug, Clone)]
pub struct GpModel {
    hyper: GpHyper,
    points: Vec<Point2<f64>>,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    jitter: f64,
}

impl GpModel {
    pub fn fit(points: Vec<Point2<f64>>, values: &[f64], hyper: GpHyper) -> Result<Self> {
        hyper.validate()?;
        if points.len() != values.len() {
            return Err(Error::DimensionMismatch(format!("{} points, {} values", points.len(), values.len())));
        }
        if points.is_empty() {
            return Err(Error::Empty("training set"));
        }
        let k = points.len();
        let base = DMatrix::from_fn(k, k, |i, j| hyper.covariance(&points[i], &points[j]));
        let mut jitter = 0.0;
        let chol = loop {
            let mut a = base.clone();
            for i in 0..k {
                a[(i, i)] += hyper.noise + jitter;
            }
            if let Some(c) = a.cholesky() {
                break c;
            }
            jitter = if jitter == 0.0 { 1e-10 * hyper.variance } else { jitter * 10.0 };
            if jitter > 1e-2 * hyper.variance {
                return Err(Error::NotPositiveDefinite { jitter });
            }
        };
        let alpha = chol.solve(&DVector::from_column_slice(values));
        Ok(GpModel {
            hyper,
            points,
            chol,
            alpha,
            jitter,
        })
    }

    pub fn hyper(&self) -> &GpHyper {
        &self.hyper
    }

    /// Extra diagonal added to get a factorization; zero when none was needed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    fn cross(&self, p: &Point2<f64>) -> DVector<f64> {
        DVector::from_iterator(self.points.len(), self.points.iter().map(|x| self.hyper.covariance(p, x)))
    }

    pub fn mean(&self, p: &Point2<f64>) -> f64 {
        self.cross(p).dot(&self.alpha)
    }

    /// Posterior mean and latent variance at `p`.
    pub fn predict(&self, p: &Point2<f64>) -> (f64, f64) {
        let ks = self.cross(p);
        let mean = ks.dot(&self.alpha);
        let v = self.chol.l().solve_lower_triangular(&ks).expect("cholesky factor is non-singular");
        let var = (self.hyper.covariance(p, p) - v.dot(&v)).max(0.0);
        (mean, var)
    }
}

/// Fits gas readings against sample positions.
pub fn gp_fit(log: &MeasurementLog, hyper: GpHyper) -> Result<GpModel> {
    log.require_len(2)?;
    let points = log.records().iter().map(|r| r.position).collect();
    GpModel::fit(points, &log.readings(), hyper)
}

/// Candidate with the highest posterior mean, first index on ties.
pub fn gp_peak(model: &GpModel, grid: &CandidateGrid) -> Point2<f64> {
    let mut best = (0, f64::NEG_INFINITY);
    for j in 0..grid.len() {
        let m = model.mean(&grid.center(j));
        if m > best.1 {
            best = (j, m);
        }
    }
    grid.center(best.0)
}
