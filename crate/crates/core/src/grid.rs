//! Uniform 2D (x,z) grid with cell-centered fields and node-centered
//! Exner pressure on the dual grid.
//!
//! Grid coordinates and spacings are nondimensional: lengths are measured
//! in units of the reference height h_ref, matching the nondimensional
//! model fields the operators act on.
//!
//! Array layout is row-major with z outer and x inner: `a[[j, i]]` addresses
//! vertical level `j`, column `i`. Under periodic boundary conditions the
//! stored node array holds only the unique nodes (the wrap column/row is an
//! alias, not stored twice).

use crate::error::{Result, SimError};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryKind {
    Periodic,
    /// Solid wall, zero normal flux.
    Wall,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Grid {
    pub nx: usize,
    pub nz: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub dx: f64,
    pub dz: f64,
    pub bc_x: BoundaryKind,
    pub bc_z: BoundaryKind,
}

impl Grid {
    pub fn new(
        nx: usize,
        nz: usize,
        x_min: f64,
        x_max: f64,
        z_min: f64,
        z_max: f64,
        bc_x: BoundaryKind,
        bc_z: BoundaryKind,
    ) -> Result<Self> {
        if nx < 2 || nz < 2 {
            return Err(SimError::Config("grid needs at least 2 cells per axis".into()));
        }
        if x_max <= x_min || z_max <= z_min {
            return Err(SimError::Config("grid extents must be increasing".into()));
        }
        Ok(Self {
            nx,
            nz,
            x_min,
            x_max,
            z_min,
            z_max,
            dx: (x_max - x_min) / nx as f64,
            dz: (z_max - z_min) / nz as f64,
            bc_x,
            bc_z,
        })
    }

    /// Number of stored (unique) node columns.
    pub fn node_cols(&self) -> usize {
        match self.bc_x {
            BoundaryKind::Periodic => self.nx,
            BoundaryKind::Wall => self.nx + 1,
        }
    }

    /// Number of stored (unique) node rows.
    pub fn node_rows(&self) -> usize {
        match self.bc_z {
            BoundaryKind::Periodic => self.nz,
            BoundaryKind::Wall => self.nz + 1,
        }
    }

    /// Wrap a node column index (resolves the periodic alias i = nx -> 0).
    #[inline]
    pub fn node_col(&self, i: usize) -> usize {
        match self.bc_x {
            BoundaryKind::Periodic => i % self.nx,
            BoundaryKind::Wall => i,
        }
    }

    #[inline]
    pub fn node_row(&self, j: usize) -> usize {
        match self.bc_z {
            BoundaryKind::Periodic => j % self.nz,
            BoundaryKind::Wall => j,
        }
    }

    /// Cell-center coordinate of column i.
    #[inline]
    pub fn x_center(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx
    }

    /// Cell-center coordinate of level j.
    #[inline]
    pub fn z_center(&self, j: usize) -> f64 {
        self.z_min + (j as f64 + 0.5) * self.dz
    }

    /// Node coordinate of level j.
    #[inline]
    pub fn z_node(&self, j: usize) -> f64 {
        self.z_min + j as f64 * self.dz
    }

    /// Minimum-image separation in x (periodic-aware).
    pub fn sep_x(&self, x: f64, x0: f64) -> f64 {
        let mut d = x - x0;
        if self.bc_x == BoundaryKind::Periodic {
            let lx = self.x_max - self.x_min;
            while d > 0.5 * lx {
                d -= lx;
            }
            while d < -0.5 * lx {
                d += lx;
            }
        }
        d
    }

    /// Minimum-image separation in z (periodic-aware).
    pub fn sep_z(&self, z: f64, z0: f64) -> f64 {
        let mut d = z - z0;
        if self.bc_z == BoundaryKind::Periodic {
            let lz = self.z_max - self.z_min;
            while d > 0.5 * lz {
                d -= lz;
            }
            while d < -0.5 * lz {
                d += lz;
            }
        }
        d
    }

    /// Cell index containing (x, z), for probe sampling.
    pub fn cell_at(&self, x: f64, z: f64) -> Result<(usize, usize)> {
        if x < self.x_min || x > self.x_max || z < self.z_min || z > self.z_max {
            return Err(SimError::Domain(format!("({x}, {z}) outside domain")));
        }
        let i = (((x - self.x_min) / self.dx) as usize).min(self.nx - 1);
        let j = (((z - self.z_min) / self.dz) as usize).min(self.nz - 1);
        Ok((i, j))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn spacing_and_node_counts() {
        let g = Grid::new(
            64,
            64,
            -0.5,
            0.5,
            -0.5,
            0.5,
            BoundaryKind::Periodic,
            BoundaryKind::Periodic,
        )
        .unwrap();
        assert_relative_eq!(g.dx, 0.015625);
        assert_relative_eq!(g.dz, 0.015625);
        assert_eq!(g.node_cols(), 64);
        assert_eq!(g.node_col(64), 0);

        let b = Grid::new(
            160,
            80,
            -1.0,
            1.0,
            0.0,
            1.0,
            BoundaryKind::Periodic,
            BoundaryKind::Wall,
        )
        .unwrap();
        assert_eq!(b.node_rows(), 81);
        assert_eq!(b.node_cols(), 160);
    }

    #[test]
    fn min_image_separation() {
        let g = Grid::new(
            8,
            8,
            -5.0,
            5.0,
            -5.0,
            5.0,
            BoundaryKind::Periodic,
            BoundaryKind::Wall,
        )
        .unwrap();
        assert_relative_eq!(g.sep_x(4.5, -4.5), -1.0);
    }

    #[test]
    fn probe_cell_lookup() {
        let g = Grid::new(
            4,
            4,
            0.0,
            4.0,
            0.0,
            4.0,
            BoundaryKind::Periodic,
            BoundaryKind::Wall,
        )
        .unwrap();
        assert_eq!(g.cell_at(0.5, 3.5).unwrap(), (0, 3));
        assert!(g.cell_at(9.0, 0.0).is_err());
    }
}
