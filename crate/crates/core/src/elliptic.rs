//! Helmholtz / projection solver for the implicit pressure correctors.
//!
//! The operator is A pi = h pi - div(c grad pi) on nodes, with a per-node
//! Helmholtz coefficient `h` (zero in the pseudo-incompressible regime,
//! where the system is a singular Poisson problem solved up to its gauge
//! modes) and a per-cell gradient coefficient `c` that already carries any
//! time-step scaling. The solve is matrix-free BiCGStab with Jacobi
//! preconditioning.

use crate::error::{Result, SimError};
use crate::grid::Grid;
use crate::ops::{project_out_nullspace, weighted_laplacian};
use ndarray::Array2;

/// One elliptic solve: operator coefficients plus iteration controls.
pub struct EllipticProblem<'a> {
    pub grid: &'a Grid,
    /// Helmholtz coefficient on nodes; `None` marks the singular projection
    /// case (identically zero coefficient).
    pub helmholtz: Option<&'a Array2<f64>>,
    /// Gradient coefficient on cells, including any dt^2 factor.
    pub coeff: &'a Array2<f64>,
    /// Relative residual tolerance.
    pub tol: f64,
    pub max_iter: usize,
}

impl<'a> EllipticProblem<'a> {
    pub fn new(
        grid: &'a Grid,
        helmholtz: Option<&'a Array2<f64>>,
        coeff: &'a Array2<f64>,
    ) -> Self {
        Self {
            grid,
            helmholtz,
            coeff,
            tol: 1e-8,
            max_iter: 1000,
        }
    }

    fn singular(&self) -> bool {
        self.helmholtz.is_none()
    }

    /// Apply the operator to a node field.
    pub fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = weighted_laplacian(self.grid, self.coeff, x);
        out.mapv_inplace(|v| -v);
        if let Some(h) = self.helmholtz {
            out = out + &(h * x);
        }
        out
    }

    /// Exact operator diagonal, extracted with stride-3 coloring vectors
    /// (the stencil only couples nodes within one cell of each other).
    pub fn diagonal(&self) -> Array2<f64> {
        let (nr, nc) = (self.grid.node_rows(), self.grid.node_cols());
        let mut diag = Array2::zeros((nr, nc));
        for a in 0..3usize {
            for b in 0..3usize {
                let e = Array2::from_shape_fn((nr, nc), |(j, i)| {
                    if j % 3 == a && i % 3 == b {
                        1.0
                    } else {
                        0.0
                    }
                });
                let ae = self.apply(&e);
                for j in (a..nr).step_by(3) {
                    for i in (b..nc).step_by(3) {
                        diag[[j, i]] = ae[[j, i]];
                    }
                }
            }
        }
        diag
    }

    /// Solve A x = rhs. Returns the solution and the iteration count.
    /// In the singular case the gauge modes are removed from both the
    /// right-hand side and the returned solution.
    pub fn solve(&self, rhs: &Array2<f64>) -> Result<(Array2<f64>, usize)> {
        let mut b = rhs.clone();
        if self.singular() {
            project_out_nullspace(self.grid, &mut b);
        }
        let bnorm = norm(&b);
        let shape = b.raw_dim();
        if bnorm == 0.0 {
            return Ok((Array2::zeros(shape), 0));
        }

        let diag = self.diagonal();
        let minv = diag.mapv(|d| if d.abs() > 1e-300 { 1.0 / d } else { 1.0 });
        let precond = |v: &Array2<f64>| -> Array2<f64> { v * &minv };

        let mut x = Array2::<f64>::zeros(shape);
        let mut r = b.clone();
        let r_hat = r.clone();
        let mut rho = 1.0f64;
        let mut alpha = 1.0f64;
        let mut omega = 1.0f64;
        let mut v = Array2::<f64>::zeros(shape);
        let mut p = Array2::<f64>::zeros(shape);
        let tol_abs = self.tol * bnorm;

        for it in 1..=self.max_iter {
            let rho_new = dot(&r_hat, &r);
            if rho_new.abs() < 1e-300 {
                return Err(SimError::SolverDiverged {
                    iters: it,
                    residual: norm(&r) / bnorm,
                });
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            // p = r + beta (p - omega v)
            p.zip_mut_with(&v, |pv, vv| *pv -= omega * vv);
            p.mapv_inplace(|pv| pv * beta);
            p += &r;

            let p_hat = precond(&p);
            v = self.apply(&p_hat);
            let rhv = dot(&r_hat, &v);
            if rhv.abs() < 1e-300 {
                return Err(SimError::SolverDiverged {
                    iters: it,
                    residual: norm(&r) / bnorm,
                });
            }
            alpha = rho / rhv;

            let mut s = r.clone();
            s.zip_mut_with(&v, |sv, vv| *sv -= alpha * vv);
            if norm(&s) <= tol_abs {
                x.zip_mut_with(&p_hat, |xv, pv| *xv += alpha * pv);
                if self.singular() {
                    project_out_nullspace(self.grid, &mut x);
                }
                return Ok((x, it));
            }

            let s_hat = precond(&s);
            let t = self.apply(&s_hat);
            let tt = dot(&t, &t);
            if tt.abs() < 1e-300 {
                return Err(SimError::SolverDiverged {
                    iters: it,
                    residual: norm(&s) / bnorm,
                });
            }
            omega = dot(&t, &s) / tt;

            for ((xv, pv), sv) in x.iter_mut().zip(p_hat.iter()).zip(s_hat.iter()) {
                *xv += alpha * pv + omega * sv;
            }
            r = s;
            r.zip_mut_with(&t, |rv, tv| *rv -= omega * tv);
            if self.singular() {
                project_out_nullspace(self.grid, &mut x);
                project_out_nullspace(self.grid, &mut r);
            }
            if norm(&r) <= tol_abs {
                return Ok((x, it));
            }
        }
        Err(SimError::SolverDiverged {
            iters: self.max_iter,
            residual: norm(&r) / bnorm,
        })
    }
}

fn dot(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn norm(a: &Array2<f64>) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BoundaryKind;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn periodic(n: usize) -> Grid {
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

    fn sine_field(grid: &Grid) -> Array2<f64> {
        Array2::from_shape_fn((grid.node_rows(), grid.node_cols()), |(j, i)| {
            (2.0 * PI * i as f64 * grid.dx).sin() * (2.0 * PI * j as f64 * grid.dz).sin()
        })
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let grid = periodic(8);
        let coeff = Array2::from_elem((8, 8), 1.0);
        let h = Array2::from_elem((8, 8), 2.0);
        let prob = EllipticProblem::new(&grid, Some(&h), &coeff);
        let (x, iters) = prob.solve(&Array2::zeros((8, 8))).unwrap();
        assert_eq!(iters, 0);
        assert!(x.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn diagonal_limit_reduces_to_pointwise_division() {
        let grid = periodic(8);
        let coeff = Array2::zeros((8, 8));
        let h = Array2::from_shape_fn((8, 8), |(j, i)| 1.0 + 0.1 * (i + j) as f64);
        let prob = EllipticProblem::new(&grid, Some(&h), &coeff);
        let rhs = Array2::from_shape_fn((8, 8), |(j, i)| ((i * 3 + j) as f64 * 0.7).sin());
        let (x, _) = prob.solve(&rhs).unwrap();
        for ((xv, hv), bv) in x.iter().zip(h.iter()).zip(rhs.iter()) {
            assert_relative_eq!(*xv, bv / hv, max_relative = 1e-7);
        }
    }

    #[test]
    fn helmholtz_solve_recovers_manufactured_solution() {
        let grid = periodic(24);
        let coeff = Array2::from_shape_fn((24, 24), |(j, i)| {
            1.0 + 0.3 * ((i as f64 * 0.5).sin() + (j as f64 * 0.4).cos())
        });
        let h = Array2::from_elem((24, 24), 1.5);
        let prob = EllipticProblem::new(&grid, Some(&h), &coeff);
        let x_exact = sine_field(&grid);
        let rhs = prob.apply(&x_exact);
        let (x, _) = prob.solve(&rhs).unwrap();
        let err = norm(&(&x - &x_exact)) / norm(&x_exact);
        assert!(err < 1e-5, "relative error {err}");
    }

    #[test]
    fn singular_poisson_solve_is_gauge_fixed_projection() {
        let grid = periodic(16);
        let coeff = Array2::from_elem((16, 16), 1.0);
        let prob = EllipticProblem::new(&grid, None, &coeff);
        let mut x_exact = sine_field(&grid);
        project_out_nullspace(&grid, &mut x_exact);
        let rhs = prob.apply(&x_exact);
        let (x, _) = prob.solve(&rhs).unwrap();
        let err = norm(&(&x - &x_exact)) / norm(&x_exact);
        assert!(err < 1e-6, "relative error {err}");
        // gauge: zero mean
        assert!(x.sum().abs() / (x.len() as f64) < 1e-10);
    }

    #[test]
    fn negative_laplacian_consistency_second_order() {
        // -div(grad pi) of sin sin should converge to 8 pi^2 sin sin.
        let mut errs = Vec::new();
        for n in [16usize, 32, 64] {
            let grid = periodic(n);
            let coeff = Array2::from_elem((n, n), 1.0);
            let prob = EllipticProblem::new(&grid, None, &coeff);
            let x = sine_field(&grid);
            let ax = prob.apply(&x);
            let exact = x.mapv(|v| 8.0 * PI * PI * v);
            let err = norm(&(&ax - &exact)) / norm(&exact);
            errs.push(err);
        }
        let order = (errs[0] / errs[2]).log2() / 2.0;
        assert!(order > 1.8, "order {order}, errors {errs:?}");
    }

    #[test]
    fn wall_bc_manufactured_solution() {
        let grid = Grid::new(
            12,
            10,
            0.0,
            1.0,
            0.0,
            1.0,
            BoundaryKind::Periodic,
            BoundaryKind::Wall,
        )
        .unwrap();
        let (nr, nc) = (grid.node_rows(), grid.node_cols());
        let coeff = Array2::from_elem((grid.nz, grid.nx), 1.0);
        let h = Array2::from_elem((nr, nc), 0.8);
        let prob = EllipticProblem::new(&grid, Some(&h), &coeff);
        let x_exact = Array2::from_shape_fn((nr, nc), |(j, i)| {
            (2.0 * PI * i as f64 * grid.dx).sin() * (PI * j as f64 * grid.dz).cos()
        });
        let rhs = prob.apply(&x_exact);
        let (x, _) = prob.solve(&rhs).unwrap();
        let err = norm(&(&x - &x_exact)) / norm(&x_exact);
        assert!(err < 1e-7, "relative error {err}");
    }
}
