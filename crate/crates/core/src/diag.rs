//! Probe series, error metrics and the acoustic-imbalance scale estimate.

use crate::constants::PhysConstants;
use crate::error::{Result, SimError};
use crate::grid::Grid;
use crate::ops::{div, node_to_cell};
use crate::state::{ModelState, Regime};
use ndarray::Array2;

/// Thermodynamic pressure field [Pa]. In the compressible regime P carries
/// the full pressure, p = p_ref P^gamma; in the pseudo-incompressible
/// regime the Exner multiplier pi supplies the perturbation on top of the
/// advected background, p = p_ref (P^(gamma-1) + Ma^2 pi)^(gamma/(gamma-1)).
pub fn pressure_field(state: &ModelState, grid: &Grid, consts: &PhysConstants) -> Array2<f64> {
    let gamma = consts.gamma;
    match state.regime {
        Regime::Compressible => state.p.mapv(|p| consts.p_ref * p.powf(gamma)),
        Regime::PseudoIncompressible => {
            let pi_cell = node_to_cell(grid, &state.pi);
            let msq = consts.msq();
            Array2::from_shape_fn(state.p.raw_dim(), |(j, i)| {
                let base = state.p[[j, i]].powf(gamma - 1.0) + msq * pi_cell[[j, i]];
                consts.p_ref * base.powf(gamma / (gamma - 1.0))
            })
        }
    }
}

/// Pressure [Pa] at the cell containing (x, z) [m]; the grid itself is
/// nondimensional, so the probe coordinates are rescaled by h_ref.
pub fn probe_pressure(state: &ModelState, grid: &Grid, consts: &PhysConstants, x: f64, z: f64) -> Result<f64> {
    let (i, j) = grid.cell_at(x / consts.h_ref, z / consts.h_ref)?;
    match state.regime {
        Regime::Compressible => Ok(consts.p_ref * state.p[[j, i]].powf(consts.gamma)),
        Regime::PseudoIncompressible => {
            let pi_cell = node_to_cell(grid, &state.pi);
            let base = state.p[[j, i]].powf(consts.gamma - 1.0) + consts.msq() * pi_cell[[j, i]];
            Ok(consts.p_ref * base.powf(consts.gamma / (consts.gamma - 1.0)))
        }
    }
}

/// Successive increments d^n = s^{n+1} - s^n of a sampled series.
pub fn increments(series: &[f64]) -> Vec<f64> {
    series.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Relative l2 error of one increment series against a reference series.
pub fn relative_error(series: &[f64], reference: &[f64]) -> Result<f64> {
    if series.len() != reference.len() {
        return Err(SimError::Logic(format!(
            "series length mismatch: {} vs {}",
            series.len(),
            reference.len()
        )));
    }
    let num: f64 = series
        .iter()
        .zip(reference.iter())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let den: f64 = reference.iter().map(|v| v * v).sum::<f64>().sqrt();
    if den == 0.0 {
        return Err(SimError::Logic("zero reference increment norm".into()));
    }
    Ok(num / den)
}

/// Spatially and ensemble averaged root mean square error of one field
/// against the truth.
pub fn rmse(ensemble: &[&Array2<f64>], truth: &Array2<f64>) -> f64 {
    let k = ensemble.len() as f64;
    let n = truth.len() as f64;
    let mut acc = 0.0;
    for member in ensemble {
        for (a, b) in member.iter().zip(truth.iter()) {
            acc += (a - b).powi(2);
        }
    }
    (acc / (k * n)).sqrt()
}

/// Acoustic-timescale estimate of the fast-pressure amplitude injected by
/// one analysis: t_ac = (region/2) dx / c, p_hat = (2 t_ac / pi)(div dv)
/// rho c^2, converted to a P amplitude through the equation of state, then
/// spatially RMS-averaged and ensemble-averaged. `pairs` holds
/// (pre-analysis, post-analysis) states per member; the result is in the
/// units of the nondimensional P field.
pub fn imbalance_estimate(
    grid: &Grid,
    consts: &PhysConstants,
    region: usize,
    pairs: &[(ModelState, ModelState)],
) -> f64 {
    let c = consts.c_sound();
    // grid.dx is nondimensional; the acoustic timescale is in seconds
    let t_ac = (region as f64 / 2.0) * grid.dx * consts.h_ref / c;
    let mut acc = 0.0;
    for (pre, post) in pairs {
        let (u0, w0) = pre.velocities();
        let (u1, w1) = post.velocities();
        // velocity increment [m/s] and its divergence [1/s]; the grid
        // spacing is in units of h_ref
        let du = (&u1 - &u0).mapv(|v| v * consts.u_ref);
        let dw = (&w1 - &w0).mapv(|v| v * consts.u_ref);
        let d = div(grid, &du, &dw).mapv(|v| v / consts.h_ref);
        let mut sum = 0.0;
        for ((jn, in_), dv) in d.indexed_iter() {
            // sample rho, p, P at an adjacent cell
            let j = jn.min(grid.nz - 1);
            let i = in_.min(grid.nx - 1);
            let rho = post.rho[[j, i]] * consts.rho_ref();
            let p_big = post.p[[j, i]];
            let p_pa = consts.p_ref * p_big.powf(consts.gamma);
            let p_hat = 2.0 * t_ac / std::f64::consts::PI * dv * rho * c * c;
            let cap_p_hat = p_big / (consts.gamma * p_pa) * p_hat;
            sum += cap_p_hat * cap_p_hat;
        }
        acc += (sum / d.len() as f64).sqrt();
    }
    acc / pairs.len() as f64
}
