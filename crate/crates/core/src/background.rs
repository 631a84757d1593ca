//! Hydrostatically balanced background column.
//!
//! The background Exner pressure is integrated from the surface upward with
//! the midpoint rule on half-levels, so the discrete hydrostatic balance
//! c_p P_bar dpi_bar/dz + rho_bar g = 0 holds to round-off at every level
//! with the same vertical difference the solver uses.

use crate::constants::PhysConstants;
use crate::error::{Result, SimError};
use crate::grid::Grid;

/// Nondimensional background profiles. `*_node` arrays have nz+1 entries on
/// node levels, `*_cell` arrays nz entries on cell levels.
#[derive(Debug, Clone)]
pub struct HydroBackground {
    /// Full Exner pressure on node levels.
    pub pi_node: Vec<f64>,
    /// Full Exner pressure on cell levels (node-level average).
    pub pi_cell: Vec<f64>,
    /// Mass-weighted potential temperature P on cell levels.
    pub p_cell: Vec<f64>,
    /// Density on cell levels.
    pub rho_cell: Vec<f64>,
    /// Inverse potential temperature chi = 1/Theta on cell levels.
    pub chi_cell: Vec<f64>,
    /// Thermodynamic pressure p/p_ref on cell levels.
    pub pres_cell: Vec<f64>,
}

/// Integrate dpi/dz = -g/(c_p Theta) from pi(surface) = 1.
///
/// `theta_profile` returns the potential temperature [K] at height z [m]
/// above `grid.z_min`.
pub fn build_hydrostatic_background(
    theta_profile: &dyn Fn(f64) -> f64,
    grid: &Grid,
    consts: &PhysConstants,
) -> Result<HydroBackground> {
    let nz = grid.nz;
    let gamma = consts.gamma;
    // d(pi)/dz* = -g* Ma^2 (R/c_p) / Theta* with the midpoint Theta.
    let fac = consts.grav_nd() * consts.msq() * consts.r_over_cp();

    let theta_nd = |z_nd: f64| -> Result<f64> {
        let th = theta_profile(z_nd * consts.h_ref);
        if th <= 0.0 {
            return Err(SimError::Domain(format!("non-positive Theta {th}")));
        }
        Ok(th / consts.t_ref)
    };

    let dz = grid.dz; // the grid is nondimensional already
    let mut pi_node = vec![0.0; nz + 1];
    pi_node[0] = 1.0;
    for j in 0..nz {
        let z_mid = (j as f64 + 0.5) * dz;
        pi_node[j + 1] = pi_node[j] - dz * fac / theta_nd(z_mid)?;
    }

    let mut pi_cell = vec![0.0; nz];
    let mut p_cell = vec![0.0; nz];
    let mut rho_cell = vec![0.0; nz];
    let mut chi_cell = vec![0.0; nz];
    let mut pres_cell = vec![0.0; nz];
    for j in 0..nz {
        let pic = 0.5 * (pi_node[j] + pi_node[j + 1]);
        if pic <= 0.0 {
            return Err(SimError::Domain(
                "background Exner pressure fell to zero inside the column".into(),
            ));
        }
        let th = theta_nd((j as f64 + 0.5) * dz)?;
        pi_cell[j] = pic;
        p_cell[j] = pic.powf(1.0 / (gamma - 1.0));
        chi_cell[j] = 1.0 / th;
        rho_cell[j] = p_cell[j] * chi_cell[j];
        pres_cell[j] = pic.powf(consts.c_p / consts.r_gas);
    }

    Ok(HydroBackground {
        pi_node,
        pi_cell,
        p_cell,
        rho_cell,
        chi_cell,
        pres_cell,
    })
}

impl HydroBackground {
    /// Max over levels of |c_p P dpi/dz + rho g| / (rho g), the discrete
    /// hydrostatic balance residual. Returns 0 when g = 0.
    pub fn balance_residual(&self, grid: &Grid, consts: &PhysConstants) -> f64 {
        let g = consts.grav_nd();
        if g == 0.0 {
            return 0.0;
        }
        let dz = grid.dz;
        // In pi1 units the vertical momentum source is
        // (c_p/R) P (dpi/dz)/Ma^2 + g rho.
        let coeff = consts.cp_over_r() / consts.msq();
        let mut worst: f64 = 0.0;
        for j in 0..grid.nz {
            let dpi = (self.pi_node[j + 1] - self.pi_node[j]) / dz;
            let res = coeff * self.p_cell[j] * dpi + g * self.rho_cell[j];
            worst = worst.max((res / (g * self.rho_cell[j])).abs());
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BoundaryKind;
    use approx::assert_relative_eq;

    fn column(nz: usize, grav: f64) -> (Grid, PhysConstants) {
        let grid = Grid::new(
            4,
            nz,
            0.0,
            0.1,
            0.0,
            1.0,
            BoundaryKind::Periodic,
            BoundaryKind::Wall,
        )
        .unwrap();
        let consts = PhysConstants::new(1e5, 300.0, 10.0, 10_000.0, grav).unwrap();
        (grid, consts)
    }

    #[test]
    fn zero_gravity_is_uniform() {
        let (grid, consts) = column(16, 0.0);
        let bg = build_hydrostatic_background(&|_| 300.0, &grid, &consts).unwrap();
        for v in &bg.pi_node {
            assert_relative_eq!(*v, 1.0, max_relative = 1e-15);
        }
        for v in &bg.p_cell {
            assert_relative_eq!(*v, 1.0, max_relative = 1e-15);
        }
    }

    #[test]
    fn isentropic_column_balance_residual() {
        let (grid, consts) = column(80, 9.81);
        let bg = build_hydrostatic_background(&|_| 300.0, &grid, &consts).unwrap();
        assert!(bg.balance_residual(&grid, &consts) < 1e-10);
    }

    #[test]
    fn balance_is_exact_at_any_resolution() {
        for nz in [20, 40, 80] {
            let (grid, consts) = column(nz, 9.81);
            let bg =
                build_hydrostatic_background(&|z| 300.0 + 0.003 * z, &grid, &consts).unwrap();
            assert!(bg.balance_residual(&grid, &consts) < 1e-10, "nz = {nz}");
        }
    }

    #[test]
    fn surface_pressure_matches_reference() {
        let (grid, consts) = column(80, 9.81);
        let bg = build_hydrostatic_background(&|_| 300.0, &grid, &consts).unwrap();
        // pi(0) = 1 corresponds to p = p_ref; first cell level sits half a
        // cell above the surface.
        assert!(bg.pi_node[0] == 1.0);
        assert!(bg.pres_cell[0] < 1.0 && bg.pres_cell[0] > 0.99);
    }
}
