//! Model state container.

use crate::error::{Result, SimError};
use crate::grid::Grid;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Compressible,
    PseudoIncompressible,
}

/// Cell-centered conserved fields plus the node-centered Exner perturbation.
///
/// All fields are nondimensional. `pi` is the first-order Exner perturbation
/// pi1 = (pi_full - pi_bar) / Ma^2 on the unique nodes of the dual grid
/// (shape `grid.node_rows() x grid.node_cols()`); the cell fields have shape
/// nz x nx with z outer.
#[derive(Debug, Clone)]
pub struct ModelState {
    pub rho: Array2<f64>,
    pub rho_u: Array2<f64>,
    pub rho_w: Array2<f64>,
    /// Mass-weighted potential temperature P = rho Theta.
    pub p: Array2<f64>,
    /// First-order Exner pressure perturbation on nodes.
    pub pi: Array2<f64>,
    /// Nondimensional time.
    pub t: f64,
    pub regime: Regime,
    /// Set by a conversion back to the compressible regime and cleared by
    /// the next completed step: the first corrector after a conversion must
    /// treat the carried time-n flux as unequilibrated.
    pub just_converted: bool,
}

impl ModelState {
    /// Quiescent state with uniform fields, compressible regime.
    pub fn uniform(grid: &Grid, rho: f64, p: f64) -> Self {
        Self {
            rho: Array2::from_elem((grid.nz, grid.nx), rho),
            rho_u: Array2::zeros((grid.nz, grid.nx)),
            rho_w: Array2::zeros((grid.nz, grid.nx)),
            p: Array2::from_elem((grid.nz, grid.nx), p),
            pi: Array2::zeros((grid.node_rows(), grid.node_cols())),
            t: 0.0,
            regime: Regime::Compressible,
            just_converted: false,
        }
    }

    /// Check the positivity invariants rho > 0, P > 0.
    pub fn validate(&self) -> Result<()> {
        for (name, f) in [("rho", &self.rho), ("P", &self.p)] {
            if let Some(v) = f.iter().find(|v| !(**v > 0.0)) {
                return Err(SimError::Domain(format!("{name} not positive: {v}")));
            }
        }
        Ok(())
    }

    /// Potential temperature Theta = P / rho per cell.
    pub fn theta(&self) -> Array2<f64> {
        &self.p / &self.rho
    }

    /// Cell-centered velocities (u, w).
    pub fn velocities(&self) -> (Array2<f64>, Array2<f64>) {
        (&self.rho_u / &self.rho, &self.rho_w / &self.rho)
    }

    /// Cell-centered advective flux components (P u, P w).
    pub fn p_velocity(&self) -> (Array2<f64>, Array2<f64>) {
        let theta = self.theta();
        (&theta * &self.rho_u, &theta * &self.rho_w)
    }

    /// Max pointwise |u| and |w|.
    pub fn max_speeds(&self) -> (f64, f64) {
        let mut mu: f64 = 0.0;
        let mut mw: f64 = 0.0;
        for ((ru, rw), r) in self.rho_u.iter().zip(self.rho_w.iter()).zip(self.rho.iter()) {
            mu = mu.max((ru / r).abs());
            mw = mw.max((rw / r).abs());
        }
        (mu, mw)
    }
}
