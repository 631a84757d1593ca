//! Local ensemble transform Kalman filter.
//!
//! The analysis is computed independently at every grid point from the
//! observations inside a square local region, with distance-dependent
//! weights folded into the observation-error precision. The K x K gain
//! matrix [(K-1) I / b + Y^T R^-1 Y]^-1 and its symmetric square root are
//! obtained from a symmetric eigendecomposition, so the transform weights
//! are exactly symmetric positive definite. One weight set per grid point
//! updates every prognostic variable carried at that point.

use crate::error::{Result, SimError};
use crate::grid::{BoundaryKind, Grid};
use crate::state::ModelState;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// Observable fields (cell-centered prognostic variables).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObsField {
    Rho,
    RhoU,
    RhoW,
    P,
    /// Node-centered Exner perturbation, sampled at the node sharing the
    /// cell's (j, i) index.
    Pi,
}

impl ObsField {
    /// The four cell-centered prognostic fields.
    pub fn cell_fields() -> [ObsField; 4] {
        [ObsField::Rho, ObsField::RhoU, ObsField::RhoW, ObsField::P]
    }

    pub fn of<'a>(&self, state: &'a ModelState) -> &'a Array2<f64> {
        match self {
            ObsField::Rho => &state.rho,
            ObsField::RhoU => &state.rho_u,
            ObsField::RhoW => &state.rho_w,
            ObsField::P => &state.p,
            ObsField::Pi => &state.pi,
        }
    }
}

/// A single pointwise observation with its error variance.
#[derive(Debug, Clone, Copy)]
pub struct Observation {
    pub field: ObsField,
    pub i: usize,
    pub j: usize,
    pub value: f64,
    pub variance: f64,
}

/// All observations taken at one assimilation time.
#[derive(Debug, Clone, Default)]
pub struct ObservationBatch {
    pub obs: Vec<Observation>,
}

/// Distance taper applied to the observation weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Localisation {
    /// exp(-d^2 / (2 sigma^2)) with sigma = half-width / 2, cut off at the
    /// region edge.
    TruncatedGaussian,
    /// Gaspari-Cohn fifth-order piecewise rational taper with support equal
    /// to the region half-width.
    GaspariCohn,
    /// Uniform weight 1 inside the region.
    Uniform,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LetkfConfig {
    /// Odd edge length of the square local region, in cells.
    pub region: usize,
    /// Covariance inflation factor b >= 1.
    pub inflation: f64,
    pub localisation: Localisation,
}

impl Default for LetkfConfig {
    fn default() -> Self {
        Self {
            region: 11,
            inflation: 1.0,
            localisation: Localisation::TruncatedGaussian,
        }
    }
}

impl LetkfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.region % 2 == 0 || self.region == 0 {
            return Err(SimError::Config(format!(
                "localisation region must be odd, got {}",
                self.region
            )));
        }
        if self.inflation < 1.0 {
            return Err(SimError::Config(format!(
                "inflation factor must be >= 1, got {}",
                self.inflation
            )));
        }
        Ok(())
    }

    fn weight(&self, dist: f64) -> f64 {
        let half = (self.region / 2) as f64;
        if half == 0.0 {
            return if dist == 0.0 { 1.0 } else { 0.0 };
        }
        match self.localisation {
            Localisation::TruncatedGaussian => {
                if dist > half {
                    0.0
                } else {
                    let sigma = 0.5 * half;
                    (-0.5 * (dist / sigma).powi(2)).exp()
                }
            }
            Localisation::GaspariCohn => gaspari_cohn(dist / half),
            Localisation::Uniform => {
                if dist > half {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }
}

/// Gaspari-Cohn fifth-order taper, rescaled to unit support (zero for
/// r >= 1, piecewise split at r = 1/2).
fn gaspari_cohn(r: f64) -> f64 {
    let a = 2.0 * r.abs();
    if a >= 2.0 {
        0.0
    } else if a < 1.0 {
        1.0 - 5.0 / 3.0 * a.powi(2) + 5.0 / 8.0 * a.powi(3) + 0.5 * a.powi(4)
            - 0.25 * a.powi(5)
    } else {
        4.0 - 5.0 * a + 5.0 / 3.0 * a.powi(2) + 5.0 / 8.0 * a.powi(3) - 0.5 * a.powi(4)
            + a.powi(5) / 12.0
            - 2.0 / (3.0 * a)
    }
}

/// Sample a member in observation space.
pub fn forward_operator(state: &ModelState, obs: &Observation) -> f64 {
    obs.field.of(state)[[obs.j, obs.i]]
}

struct PointWeights {
    w_mean: DVector<f64>,
    w_pert: DMatrix<f64>,
}

/// LETKF analysis update of an ensemble, in place.
pub fn analyse(
    grid: &Grid,
    cfg: &LetkfConfig,
    ensemble: &mut [ModelState],
    batch: &ObservationBatch,
) -> Result<()> {
    cfg.validate()?;
    let k = ensemble.len();
    if k < 2 {
        return Err(SimError::Config("ensemble needs at least 2 members".into()));
    }
    let km1 = (k - 1) as f64;

    // observation-space ensemble: mean, perturbations and innovations
    let n_obs = batch.obs.len();
    let mut y_pert = vec![vec![0.0; k]; n_obs];
    let mut innov = vec![0.0; n_obs];
    for (o, ob) in batch.obs.iter().enumerate() {
        if ob.i >= grid.nx || ob.j >= grid.nz {
            return Err(SimError::Config(format!(
                "observation at ({}, {}) outside grid",
                ob.i, ob.j
            )));
        }
        if !(ob.variance > 0.0) {
            return Err(SimError::Config("observation variance must be positive".into()));
        }
        let vals: Vec<f64> = ensemble.iter().map(|m| forward_operator(m, ob)).collect();
        let mean = vals.iter().sum::<f64>() / k as f64;
        for (m, v) in vals.iter().enumerate() {
            y_pert[o][m] = v - mean;
        }
        innov[o] = ob.value - mean;
    }

    let half = (cfg.region / 2) as isize;
    let dist_1d = |d: isize, n: isize, periodic: bool| -> isize {
        if periodic {
            let m = d.rem_euclid(n);
            m.min(n - m)
        } else {
            d.abs()
        }
    };

    let solve_point = |jc: isize, ic: isize| -> Result<Option<PointWeights>> {
        // gather local observations
        let mut local: Vec<(usize, f64)> = Vec::new();
        for (o, ob) in batch.obs.iter().enumerate() {
            let di = dist_1d(
                ob.i as isize - ic,
                grid.nx as isize,
                grid.bc_x == BoundaryKind::Periodic,
            );
            let dj = dist_1d(
                ob.j as isize - jc,
                grid.nz as isize,
                grid.bc_z == BoundaryKind::Periodic,
            );
            if di > half || dj > half {
                continue;
            }
            let dist = ((di * di + dj * dj) as f64).sqrt();
            let w = cfg.weight(dist);
            if w > 0.0 {
                local.push((o, w));
            }
        }
        if local.is_empty() && cfg.inflation == 1.0 {
            return Ok(None);
        }

        // A = (K-1)/b I + sum_o w_o / R_o Y_o Y_o^T
        let mut a = DMatrix::<f64>::identity(k, k) * (km1 / cfg.inflation);
        let mut c = DVector::<f64>::zeros(k);
        for &(o, w) in &local {
            let prec = w / batch.obs[o].variance;
            let y = &y_pert[o];
            for m in 0..k {
                c[m] += prec * y[m] * innov[o];
                for n in m..k {
                    let v = prec * y[m] * y[n];
                    a[(m, n)] += v;
                    if n != m {
                        a[(n, m)] += v;
                    }
                }
            }
        }

        let eig = SymmetricEigen::new(a);
        for ev in eig.eigenvalues.iter() {
            if *ev <= 0.0 {
                return Err(SimError::Logic(format!(
                    "non-positive eigenvalue {ev} in LETKF gain"
                )));
            }
        }
        let q = &eig.eigenvectors;
        let inv_l = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v));
        let inv_sqrt_l = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| (km1 / v).sqrt()));
        let gain = q * inv_l * q.transpose();
        let w_pert = q * inv_sqrt_l * q.transpose();
        let w_mean = &gain * c;
        Ok(Some(PointWeights { w_mean, w_pert }))
    };

    // cell pass: update the four cell-centered variables, caching the
    // weights for the node pass
    let mut cache: Vec<Option<PointWeights>> = Vec::with_capacity(grid.nz * grid.nx);
    let mut new_cells: Vec<[Array2<f64>; 4]> = ensemble
        .iter()
        .map(|m| {
            [
                m.rho.clone(),
                m.rho_u.clone(),
                m.rho_w.clone(),
                m.p.clone(),
            ]
        })
        .collect();
    for j in 0..grid.nz {
        for i in 0..grid.nx {
            let pw = solve_point(j as isize, i as isize)?;
            if let Some(pw) = &pw {
                for (f, field) in ObsField::cell_fields().iter().enumerate() {
                    let vals: Vec<f64> =
                        ensemble.iter().map(|m| field.of(m)[[j, i]]).collect();
                    let mean = vals.iter().sum::<f64>() / k as f64;
                    for m in 0..k {
                        let mut v = mean;
                        for n in 0..k {
                            v += (vals[n] - mean) * (pw.w_pert[(n, m)] + pw.w_mean[n]);
                        }
                        new_cells[m][f][[j, i]] = v;
                    }
                }
            }
            cache.push(pw);
        }
    }

    // node pass: the Exner perturbation at node (j, i) reuses the weights of
    // the adjacent cell (clipped at wall boundaries)
    let (nr, nc) = (grid.node_rows(), grid.node_cols());
    let mut new_pi: Vec<Array2<f64>> = ensemble.iter().map(|m| m.pi.clone()).collect();
    for jn in 0..nr {
        let j = jn.min(grid.nz - 1);
        for in_ in 0..nc {
            let i = in_.min(grid.nx - 1);
            if let Some(pw) = &cache[j * grid.nx + i] {
                let vals: Vec<f64> = ensemble.iter().map(|m| m.pi[[jn, in_]]).collect();
                let mean = vals.iter().sum::<f64>() / k as f64;
                for m in 0..k {
                    let mut v = mean;
                    for n in 0..k {
                        v += (vals[n] - mean) * (pw.w_pert[(n, m)] + pw.w_mean[n]);
                    }
                    new_pi[m][[jn, in_]] = v;
                }
            }
        }
    }

    for (m, member) in ensemble.iter_mut().enumerate() {
        let [rho, rho_u, rho_w, p] = std::mem::replace(
            &mut new_cells[m],
            [
                Array2::zeros((0, 0)),
                Array2::zeros((0, 0)),
                Array2::zeros((0, 0)),
                Array2::zeros((0, 0)),
            ],
        );
        member.rho = rho;
        member.rho_u = rho_u;
        member.rho_w = rho_w;
        member.p = p;
        member.pi = std::mem::replace(&mut new_pi[m], Array2::zeros((0, 0)));
        member.validate()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize) -> Grid {
        Grid::new(
            n,
            n,
            0.0,
            1.0,
            0.0,
            1.0,
            BoundaryKind::Periodic,
            BoundaryKind::Periodic,
        )
        .unwrap()
    }

    fn uniform_ensemble(grid: &Grid, k: usize) -> Vec<ModelState> {
        (0..k).map(|_| ModelState::uniform(grid, 1.0, 1.0)).collect()
    }

    fn mean_and_var(vals: &[f64]) -> (f64, f64) {
        let k = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / k;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
        (mean, var)
    }

    #[test]
    fn gaspari_cohn_taper_shape() {
        assert_relative_eq!(gaspari_cohn(0.0), 1.0, epsilon = 1e-14);
        assert_relative_eq!(gaspari_cohn(1.0), 0.0, epsilon = 1e-14);
        // continuity at the piecewise split
        assert_relative_eq!(
            gaspari_cohn(0.5 - 1e-9),
            gaspari_cohn(0.5 + 1e-9),
            epsilon = 1e-6
        );
        let mut prev = 1.0;
        for s in 1..=20 {
            let v = gaspari_cohn(s as f64 / 20.0);
            assert!(v <= prev + 1e-12, "taper not monotone at {s}");
            assert!(v >= 0.0);
            prev = v;
        }
    }

    #[test]
    fn zero_spread_ensemble_is_unchanged() {
        let g = grid(8);
        let mut ens = uniform_ensemble(&g, 10);
        let orig = ens[0].clone();
        let batch = ObservationBatch {
            obs: vec![Observation {
                field: ObsField::Rho,
                i: 3,
                j: 3,
                value: 1.3,
                variance: 0.01,
            }],
        };
        let cfg = LetkfConfig::default();
        analyse(&g, &cfg, &mut ens, &batch).unwrap();
        for m in &ens {
            for (a, b) in m.rho.iter().zip(orig.rho.iter()) {
                assert_relative_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn scalar_update_matches_kalman_formulas() {
        let g = grid(8);
        let k = 10;
        let mut ens = uniform_ensemble(&g, k);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for m in ens.iter_mut() {
            m.rho_u[[2, 2]] = 0.5 + 0.2 * (rng.gen::<f64>() - 0.5);
        }
        let prior: Vec<f64> = ens.iter().map(|m| m.rho_u[[2, 2]]).collect();
        let (xb, sb) = mean_and_var(&prior);
        let r = 0.01;
        let y = 0.8;
        let batch = ObservationBatch {
            obs: vec![Observation {
                field: ObsField::RhoU,
                i: 2,
                j: 2,
                value: y,
                variance: r,
            }],
        };
        let cfg = LetkfConfig {
            region: 11,
            inflation: 1.0,
            localisation: Localisation::Uniform,
        };
        analyse(&g, &cfg, &mut ens, &batch).unwrap();
        let post: Vec<f64> = ens.iter().map(|m| m.rho_u[[2, 2]]).collect();
        let (xa, sa) = mean_and_var(&post);
        let gain = sb / (sb + r);
        assert_relative_eq!(xa, xb + gain * (y - xb), epsilon = 1e-10);
        assert_relative_eq!(sa, sb * r / (sb + r), epsilon = 1e-10);
    }

    #[test]
    fn zero_innovation_keeps_ensemble_mean() {
        let g = grid(8);
        let k = 10;
        let mut ens = uniform_ensemble(&g, k);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for m in ens.iter_mut() {
            m.rho[[4, 4]] = 1.0 + 0.1 * (rng.gen::<f64>() - 0.5);
        }
        let prior: Vec<f64> = ens.iter().map(|m| m.rho[[4, 4]]).collect();
        let (xb, _) = mean_and_var(&prior);
        let batch = ObservationBatch {
            obs: vec![Observation {
                field: ObsField::Rho,
                i: 4,
                j: 4,
                value: xb,
                variance: 0.05,
            }],
        };
        let cfg = LetkfConfig::default();
        analyse(&g, &cfg, &mut ens, &batch).unwrap();
        let post: Vec<f64> = ens.iter().map(|m| m.rho[[4, 4]]).collect();
        let (xa, _) = mean_and_var(&post);
        assert_relative_eq!(xa, xb, epsilon = 1e-12);
    }

    #[test]
    fn observation_outside_region_has_no_effect() {
        let g = grid(16);
        let k = 6;
        let mut ens = uniform_ensemble(&g, k);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for m in ens.iter_mut() {
            for v in m.rho_u.iter_mut() {
                *v = 0.3 * (rng.gen::<f64>() - 0.5);
            }
        }
        let before: Vec<f64> = ens.iter().map(|m| m.rho_u[[12, 12]]).collect();
        let batch = ObservationBatch {
            obs: vec![Observation {
                field: ObsField::RhoU,
                i: 2,
                j: 2,
                value: 0.7,
                variance: 0.01,
            }],
        };
        let cfg = LetkfConfig {
            region: 3,
            inflation: 1.0,
            localisation: Localisation::TruncatedGaussian,
        };
        analyse(&g, &cfg, &mut ens, &batch).unwrap();
        let after: Vec<f64> = ens.iter().map(|m| m.rho_u[[12, 12]]).collect();
        for (a, b) in before.iter().zip(after.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-13);
        }
        // ... while the observed cell does move
        assert!(ens
            .iter()
            .zip(before.iter())
            .any(|(m, _)| (m.rho_u[[2, 2]] - 0.0).abs() > 0.0));
    }

    #[test]
    fn inflation_increases_posterior_spread() {
        let g = grid(8);
        let k = 10;
        let mut spreads = Vec::new();
        for b in [1.0, 1.5, 2.0] {
            let mut ens = uniform_ensemble(&g, k);
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            for m in ens.iter_mut() {
                m.p[[3, 3]] = 1.0 + 0.05 * (rng.gen::<f64>() - 0.5);
            }
            let batch = ObservationBatch {
                obs: vec![Observation {
                    field: ObsField::P,
                    i: 3,
                    j: 3,
                    value: 1.02,
                    variance: 0.01,
                }],
            };
            let cfg = LetkfConfig {
                region: 5,
                inflation: b,
                localisation: Localisation::Uniform,
            };
            analyse(&g, &cfg, &mut ens, &batch).unwrap();
            let post: Vec<f64> = ens.iter().map(|m| m.p[[3, 3]]).collect();
            spreads.push(mean_and_var(&post).1);
        }
        assert!(spreads[0] < spreads[1] && spreads[1] < spreads[2]);
    }

    #[test]
    fn correlated_neighbour_is_dragged_along() {
        // Perfectly correlated fields at two cells: updating one through an
        // observation must update the other by the same amount.
        let g = grid(8);
        let k = 8;
        let mut ens = uniform_ensemble(&g, k);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for m in ens.iter_mut() {
            let d = 0.1 * (rng.gen::<f64>() - 0.5);
            m.rho[[3, 3]] = 1.0 + d;
            m.rho[[3, 4]] = 1.0 + d;
        }
        let batch = ObservationBatch {
            obs: vec![Observation {
                field: ObsField::Rho,
                i: 3,
                j: 3,
                value: 1.05,
                variance: 1e-4,
            }],
        };
        let cfg = LetkfConfig {
            region: 11,
            inflation: 1.0,
            localisation: Localisation::Uniform,
        };
        analyse(&g, &cfg, &mut ens, &batch).unwrap();
        for m in &ens {
            assert_relative_eq!(m.rho[[3, 3]], m.rho[[3, 4]], epsilon = 1e-10);
        }
    }

    #[test]
    fn even_region_is_rejected() {
        let cfg = LetkfConfig {
            region: 10,
            inflation: 1.0,
            localisation: Localisation::Uniform,
        };
        assert!(cfg.validate().is_err());
    }
}
