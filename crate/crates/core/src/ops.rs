//! Discrete node/cell operators on the staggered dual grid.
//!
//! `grad` maps node fields to cell-centered vectors, `div` maps cell-centered
//! vectors to node fields. The two are exact negative transposes of each
//! other, which makes the pseudo-incompressible corrector an exact discrete
//! projection.

use crate::grid::{BoundaryKind, Grid};
use ndarray::Array2;

/// Node-to-cell gradient. Returns (d/dx, d/dz) on cells.
pub fn grad(grid: &Grid, pi: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let (nz, nx) = (grid.nz, grid.nx);
    let mut gx = Array2::zeros((nz, nx));
    let mut gz = Array2::zeros((nz, nx));
    let hx = 0.5 / grid.dx;
    let hz = 0.5 / grid.dz;
    for j in 0..nz {
        let jn = grid.node_row(j);
        let jp = grid.node_row(j + 1);
        for i in 0..nx {
            let iw = grid.node_col(i);
            let ie = grid.node_col(i + 1);
            let (sw, se) = (pi[[jn, iw]], pi[[jn, ie]]);
            let (nw, ne) = (pi[[jp, iw]], pi[[jp, ie]]);
            gx[[j, i]] = hx * (se + ne - sw - nw);
            gz[[j, i]] = hz * (nw + ne - sw - se);
        }
    }
    (gx, gz)
}

/// Cell-to-node divergence, the negative transpose of `grad`. Cells outside
/// a wall are treated as carrying zero flux.
pub fn div(grid: &Grid, fx: &Array2<f64>, fz: &Array2<f64>) -> Array2<f64> {
    let (nz, nx) = (grid.nz, grid.nx);
    let (nr, nc) = (grid.node_rows(), grid.node_cols());
    let mut out = Array2::zeros((nr, nc));
    let hx = 0.5 / grid.dx;
    let hz = 0.5 / grid.dz;

    let col_left = |i: usize| -> Option<usize> {
        match grid.bc_x {
            BoundaryKind::Periodic => Some((i + nx - 1) % nx),
            BoundaryKind::Wall => i.checked_sub(1),
        }
    };
    let col_right = |i: usize| -> Option<usize> {
        match grid.bc_x {
            BoundaryKind::Periodic => Some(i % nx),
            BoundaryKind::Wall => (i < nx).then_some(i),
        }
    };
    let row_below = |j: usize| -> Option<usize> {
        match grid.bc_z {
            BoundaryKind::Periodic => Some((j + nz - 1) % nz),
            BoundaryKind::Wall => j.checked_sub(1),
        }
    };
    let row_above = |j: usize| -> Option<usize> {
        match grid.bc_z {
            BoundaryKind::Periodic => Some(j % nz),
            BoundaryKind::Wall => (j < nz).then_some(j),
        }
    };

    for jn in 0..nr {
        let rows = [(row_below(jn), -1.0), (row_above(jn), 1.0)];
        for in_ in 0..nc {
            let cols = [(col_left(in_), -1.0), (col_right(in_), 1.0)];
            let mut acc = 0.0;
            for (jc, sz) in rows {
                let Some(j) = jc else { continue };
                for (ic, sx) in cols {
                    let Some(i) = ic else { continue };
                    acc += sx * hx * fx[[j, i]] + sz * hz * fz[[j, i]];
                }
            }
            out[[jn, in_]] = acc;
        }
    }
    out
}

/// Weighted Laplacian apply: div(c grad(pi)) with a per-cell coefficient.
pub fn weighted_laplacian(grid: &Grid, coeff: &Array2<f64>, pi: &Array2<f64>) -> Array2<f64> {
    let (mut gx, mut gz) = grad(grid, pi);
    gx *= coeff;
    gz *= coeff;
    div(grid, &gx, &gz)
}

/// Average the 4 corner nodes of each cell.
pub fn node_to_cell(grid: &Grid, f: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros((grid.nz, grid.nx));
    for j in 0..grid.nz {
        let jn = grid.node_row(j);
        let jp = grid.node_row(j + 1);
        for i in 0..grid.nx {
            let iw = grid.node_col(i);
            let ie = grid.node_col(i + 1);
            out[[j, i]] = 0.25 * (f[[jn, iw]] + f[[jn, ie]] + f[[jp, iw]] + f[[jp, ie]]);
        }
    }
    out
}

/// Average the adjacent cells of each node (fewer than 4 at walls).
pub fn cell_to_node(grid: &Grid, f: &Array2<f64>) -> Array2<f64> {
    let (nz, nx) = (grid.nz, grid.nx);
    let (nr, nc) = (grid.node_rows(), grid.node_cols());
    let mut out = Array2::zeros((nr, nc));
    for jn in 0..nr {
        let jlo = match grid.bc_z {
            BoundaryKind::Periodic => Some((jn + nz - 1) % nz),
            BoundaryKind::Wall => jn.checked_sub(1),
        };
        let jhi = match grid.bc_z {
            BoundaryKind::Periodic => Some(jn % nz),
            BoundaryKind::Wall => (jn < nz).then_some(jn),
        };
        for in_ in 0..nc {
            let ilo = match grid.bc_x {
                BoundaryKind::Periodic => Some((in_ + nx - 1) % nx),
                BoundaryKind::Wall => in_.checked_sub(1),
            };
            let ihi = match grid.bc_x {
                BoundaryKind::Periodic => Some(in_ % nx),
                BoundaryKind::Wall => (in_ < nx).then_some(in_),
            };
            let mut acc = 0.0;
            let mut n = 0.0;
            for j in [jlo, jhi].into_iter().flatten() {
                for i in [ilo, ihi].into_iter().flatten() {
                    acc += f[[j, i]];
                    n += 1.0;
                }
            }
            out[[jn, in_]] = acc / n;
        }
    }
    out
}

/// Remove the gauge modes of the weighted Laplacian from a node field:
/// the constant, and (on fully even grids) the nodal checkerboard, which the
/// 4-point gradient annihilates.
pub fn project_out_nullspace(grid: &Grid, f: &mut Array2<f64>) {
    let n = f.len() as f64;
    let mean = f.sum() / n;
    f.mapv_inplace(|v| v - mean);

    let x_ok = grid.bc_x == BoundaryKind::Wall || grid.nx % 2 == 0;
    let z_ok = grid.bc_z == BoundaryKind::Wall || grid.nz % 2 == 0;
    if x_ok && z_ok {
        let mut dot = 0.0;
        for ((j, i), v) in f.indexed_iter() {
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            dot += sign * v;
        }
        let amp = dot / n;
        for ((j, i), v) in f.indexed_iter_mut() {
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            *v -= sign * amp;
        }
    }
}
