//! Grid-based density metrics: Gaussian KDE, Riemann-sum KL divergence and
//! covariance trace error.
//!
//! Grid nodes sit at cell midpoints `lo + (i + 1/2) mesh`, and the first
//! coordinate varies fastest in the flattened node order.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;

/// Densities below this floor contribute nothing to the KL sum.
pub const KL_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub mesh: f64,
}

impl GridSpec {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, mesh: f64) -> Result<Self> {
        let g = Self { lo, hi, mesh };
        g.validate()?;
        Ok(g)
    }

    /// Square box `[lo, hi]^d`.
    pub fn cube(d: usize, lo: f64, hi: f64, mesh: f64) -> Result<Self> {
        Self::new(vec![lo; d], vec![hi; d], mesh)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lo.is_empty() || self.lo.len() != self.hi.len() {
            return Err(Error::IncompatibleGrid(
                "box corners must share a nonzero dimension".into(),
            ));
        }
        if !(self.mesh > 0.0 && self.mesh.is_finite()) {
            return Err(Error::IncompatibleGrid(format!(
                "mesh must be positive, got {}",
                self.mesh
            )));
        }
        for (l, h) in self.lo.iter().zip(&self.hi) {
            if !(h > l) {
                return Err(Error::IncompatibleGrid(format!("need hi > lo, got [{l}, {h}]")));
            }
            let cells = (h - l) / self.mesh;
            if (cells - cells.round()).abs() > 1e-6 * cells.max(1.0) {
                return Err(Error::IncompatibleGrid(format!(
                    "box side {} is not a multiple of the mesh {}",
                    h - l,
                    self.mesh
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| ((h - l) / self.mesh).round() as usize)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.counts().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.mesh.powi(self.dim() as i32)
    }

    /// Midpoints along axis `k`.
    pub fn axis(&self, k: usize) -> Vec<f64> {
        let n = self.counts()[k];
        (0..n).map(|i| self.lo[k] + (i as f64 + 0.5) * self.mesh).collect()
    }

    /// Coordinates of the node with flat index `idx`.
    pub fn node(&self, mut idx: usize, out: &mut [f64]) {
        for (k, n) in self.counts().into_iter().enumerate() {
            let i = idx % n;
            idx /= n;
            out[k] = self.lo[k] + (i as f64 + 0.5) * self.mesh;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub values: Vec<f64>,
    pub grid: GridSpec,
}

impl DensityGrid {
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// Evaluates a density at every node.
    pub fn from_fn<F>(grid: &GridSpec, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Sync + Send,
    {
        let d = grid.dim();
        let values = exec::map_indices(grid.len(), |idx| {
            let mut x = vec![0.0; d];
            grid.node(idx, &mut x);
            f(&x)
        });
        Self {
            values,
            grid: grid.clone(),
        }
    }
}

fn kernel_table(samples: &DMatrix<f64>, k: usize, axis: &[f64], bandwidth: f64) -> DMatrix<f64> {
    let norm = 1.0 / (bandwidth * (2.0 * std::f64::consts::PI).sqrt());
    let n = samples.ncols();
    DMatrix::from_fn(axis.len(), n, |i, j| {
        let z = (axis[i] - samples[(k, j)]) / bandwidth;
        norm * (-0.5 * z * z).exp()
    })
}

/// Isotropic Gaussian KDE with covariance `bandwidth^2 I`, evaluated at the grid nodes.
///
/// The kernel factorises over coordinates, so in 2D the grid is a single
/// product of two per-axis kernel tables.
pub fn kde_density(samples: &DMatrix<f64>, bandwidth: f64, grid: &GridSpec) -> Result<DensityGrid> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::config(format!("bandwidth must be positive, got {bandwidth}")));
    }
    grid.validate()?;
    let d = grid.dim();
    if samples.nrows() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: samples.nrows(),
        });
    }
    let n = samples.ncols();
    if n == 0 {
        return Err(Error::TooFewParticles { needed: 1, got: 0 });
    }
    let tables: Vec<DMatrix<f64>> = (0..d)
        .map(|k| kernel_table(samples, k, &grid.axis(k), bandwidth))
        .collect();
    let inv_n = 1.0 / n as f64;
    let values = match d {
        1 => tables[0].column_sum().iter().map(|v| v * inv_n).collect(),
        2 => {
            let prod = &tables[0] * tables[1].transpose();
            prod.iter().map(|v| v * inv_n).collect()
        }
        _ => {
            let counts = grid.counts();
            exec::map_indices(grid.len(), |mut idx| {
                let mut ix = vec![0usize; d];
                for (k, c) in counts.iter().enumerate() {
                    ix[k] = idx % c;
                    idx /= c;
                }
                let mut acc = 0.0;
                for j in 0..n {
                    acc += (0..d).map(|k| tables[k][(ix[k], j)]).product::<f64>();
                }
                acc * inv_n
            })
        }
    };
    Ok(DensityGrid {
        values,
        grid: grid.clone(),
    })
}

/// Log target density tabulated on a grid and renormalized to unit mass over the box.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetGrid {
    pub log_values: Vec<f64>,
    pub grid: GridSpec,
    /// Log of the box mass of the input density before renormalization.
    pub log_box_mass: f64,
}

impl TargetGrid {
    /// Tabulates an unnormalized log density and renormalizes it over the box.
    pub fn normalized<F>(grid: &GridSpec, log_density: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Sync + Send,
    {
        grid.validate()?;
        let d = grid.dim();
        let mut log_values = exec::map_indices(grid.len(), |idx| {
            let mut x = vec![0.0; d];
            grid.node(idx, &mut x);
            log_density(&x)
        });
        let m = log_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !m.is_finite() {
            return Err(Error::domain("target log density is not finite on the grid"));
        }
        let s: f64 = log_values.iter().map(|v| (v - m).exp()).sum();
        let log_box_mass = m + (s * grid.cell_volume()).ln();
        log_values.iter_mut().for_each(|v| *v -= log_box_mass);
        Ok(Self {
            log_values,
            grid: grid.clone(),
            log_box_mass,
        })
    }
}

/// Riemann-sum `KL(rho_hat || pi)` with both densities renormalized over the box.
pub fn grid_kl_precomputed(estimated: &DensityGrid, target: &TargetGrid) -> Result<f64> {
    if estimated.grid != target.grid || estimated.values.len() != target.log_values.len() {
        return Err(Error::IncompatibleGrid(
            "estimate and target use different grids".into(),
        ));
    }
    let vol = estimated.grid.cell_volume();
    let mass = estimated.mass();
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::domain("estimated density has no mass inside the box"));
    }
    let log_mass = mass.ln();
    let mut kl = 0.0;
    for (&r, &lp) in estimated.values.iter().zip(&target.log_values) {
        if r > KL_FLOOR {
            let q = r / mass;
            kl += q * (r.ln() - log_mass - lp);
        }
    }
    Ok(kl * vol)
}

/// Riemann-sum KL against a target log density that must already integrate to
/// within 5% of one over the box.
pub fn grid_kl<F>(estimated: &DensityGrid, target_log_density: F, grid: &GridSpec) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    if &estimated.grid != grid {
        return Err(Error::IncompatibleGrid("estimate was evaluated on another grid".into()));
    }
    let target = TargetGrid::normalized(grid, target_log_density)?;
    let box_mass = target.log_box_mass.exp();
    if !(0.95..=1.05).contains(&box_mass) {
        return Err(Error::domain(format!(
            "target integrates to {box_mass} over the box; expected a normalized density"
        )));
    }
    grid_kl_precomputed(estimated, &target)
}

/// `|tr(sigma - sigma_star)|`.
pub fn trace_error(sigma: &DMatrix<f64>, sigma_star: &DMatrix<f64>) -> Result<f64> {
    if sigma.shape() != sigma_star.shape() || !sigma.is_square() {
        return Err(Error::DimensionMismatch {
            expected: sigma_star.nrows(),
            got: sigma.nrows(),
        });
    }
    Ok((sigma.trace() - sigma_star.trace()).abs())
}
