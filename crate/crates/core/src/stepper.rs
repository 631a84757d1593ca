//! Semi-implicit predictor-corrector time step.
//!
//! One step runs: (i) a first-order upwind half-step advection predictor,
//! (ii) an implicit half corrector (Helmholtz solve in the compressible
//! regime, exact projection in the pseudo-incompressible regime) that also
//! yields the time-centered advective fluxes, (iii) an explicit half-step of
//! the pressure-gradient and buoyancy sources on the time-n fields, (iv) a
//! full Strang-split advection with the centered fluxes, and (v) the final
//! implicit half corrector producing the new Exner perturbation.
//!
//! Buoyancy is handled explicitly: both reference scenarios run on neutrally
//! stratified backgrounds, where the buoyancy frequency vanishes and the
//! usual stiffness argument for an implicit treatment does not apply.

use crate::advect::{advect_full, advect_half, AdvectiveFlux, Limiter};
use crate::background::HydroBackground;
use crate::constants::PhysConstants;
use crate::elliptic::EllipticProblem;
use crate::error::Result;
use crate::grid::Grid;
use crate::ops::{cell_to_node, div, grad, node_to_cell};
use crate::state::{ModelState, Regime};
use ndarray::Array2;

/// Per-step iteration and stability statistics.
#[derive(Debug, Clone, Copy)]
pub struct StepStats {
    pub dt: f64,
    pub iters_half: usize,
    pub iters_full: usize,
    pub max_cfl: f64,
}

/// Time integrator bound to a grid, constants and background column.
pub struct Stepper<'a> {
    pub grid: &'a Grid,
    pub consts: &'a PhysConstants,
    pub bg: &'a HydroBackground,
    pub limiter: Limiter,
    pub solver_tol: f64,
    pub solver_max_iter: usize,
    /// Fourth-order hyperdiffusion strength. The per-step coefficient is
    /// `hyper_coeff * cfl^2` with the advective CFL of the step: the
    /// trapezoidal acoustic corrector is neutrally stable and develops a
    /// short-wave advective-acoustic instability near CFL 0.5, while at
    /// small advective CFL (acoustic-resolving steps) no sink is needed --
    /// there the acoustic modes must be left undamped.
    pub hyper_coeff: f64,
    /// Off-centering of the trapezoidal divergence average in the final
    /// compressible corrector: the time-n flux gets weight (1 + eps)/2 and
    /// the advected flux (1 - eps)/2. A small positive value reproduces the
    /// slow amplification of partially resolved acoustics characteristic of
    /// this scheme family; zero makes every step neutral.
    pub acoustic_offcenter: f64,
    /// Strength of the damping counterpart: the effective off-centering is
    /// `acoustic_offcenter - advective_offcenter * (cfl/0.45)^2`, so steps
    /// run near the advective stability margin flip to a negative
    /// (dissipative) off-centering that suppresses the short-wave
    /// advective-acoustic coupling, while acoustic-resolving steps (small
    /// advective CFL) keep the slow growth. Both contributions are rolled
    /// off sharply once the acoustic Courant number exceeds ~15: steps that
    /// take fully unresolved acoustics keep the neutral average, which
    /// neither amplifies nor damps the slow dynamics.
    pub advective_offcenter: f64,
    /// Divergence-damping strength beta: each compressible step adds
    /// beta * min(dx,dz)^2 * grad(div(Pv)) to the momenta, diffusing the
    /// divergent (acoustic) part of the flow at a rate ~ 4 beta sin^2(k
    /// dx/2) per step while leaving the vortical part untouched. Rolled
    /// off once the acoustic Courant number exceeds ~2 so that runs which
    /// resolve acoustics (and runs taking fully unresolved acoustics)
    /// keep their acoustic energy.
    pub div_damp: f64,
}

impl<'a> Stepper<'a> {
    pub fn new(grid: &'a Grid, consts: &'a PhysConstants, bg: &'a HydroBackground) -> Self {
        Self {
            grid,
            consts,
            bg,
            limiter: Limiter::Mc,
            solver_tol: 1e-8,
            solver_max_iter: 1000,
            hyper_coeff: std::env::var("HYPER")
                .ok()
                .and_then(|v| v.parse().ok())
                .unwrap_or(1.0),
            acoustic_offcenter: std::env::var("EPS_OC")
                .ok()
                .and_then(|v| v.parse().ok())
                .unwrap_or(0.04),
            advective_offcenter: std::env::var("EPS_DAMP")
                .ok()
                .and_then(|v| v.parse().ok())
                .unwrap_or(0.2),
            div_damp: std::env::var("DIVDAMP")
                .ok()
                .and_then(|v| v.parse().ok())
                .unwrap_or(0.15),
        }
    }

    /// Conservative fourth-order hyperdiffusion of one cell field, one
    /// application per call: psi -= c lap(lap(psi)), dimension by dimension,
    /// with mirrored ghost cells at walls and zero boundary flux.
    fn hyperdiffuse_field(&self, f: &mut Array2<f64>, c: f64) {
        if c == 0.0 {
            return;
        }
        let (nz, nx) = (self.grid.nz, self.grid.nx);
        let per_x = self.grid.bc_x == crate::grid::BoundaryKind::Periodic;
        let per_z = self.grid.bc_z == crate::grid::BoundaryKind::Periodic;
        let idx = |i: isize, n: usize, periodic: bool| -> usize {
            if periodic {
                i.rem_euclid(n as isize) as usize
            } else {
                i.clamp(0, n as isize - 1) as usize
            }
        };
        // x sweep: flux at face i+1/2 is lap(i+1) - lap(i); wall faces carry
        // zero flux so row sums are exactly preserved
        let src = f.clone();
        for j in 0..nz {
            let lap = |i: isize| -> f64 {
                src[[j, idx(i + 1, nx, per_x)]] - 2.0 * src[[j, idx(i, nx, per_x)]]
                    + src[[j, idx(i - 1, nx, per_x)]]
            };
            let face = |i: isize| -> f64 {
                // face between cells i and i+1
                if !per_x && (i < 0 || i >= nx as isize - 1) {
                    0.0
                } else {
                    lap(i + 1) - lap(i)
                }
            };
            for i in 0..nx {
                let ii = i as isize;
                f[[j, i]] -= c * (face(ii) - face(ii - 1));
            }
        }
        // z sweep
        let src = f.clone();
        for i in 0..nx {
            let lap = |j: isize| -> f64 {
                src[[idx(j + 1, nz, per_z), i]] - 2.0 * src[[idx(j, nz, per_z), i]]
                    + src[[idx(j - 1, nz, per_z), i]]
            };
            let face = |j: isize| -> f64 {
                if !per_z && (j < 0 || j >= nz as isize - 1) {
                    0.0
                } else {
                    lap(j + 1) - lap(j)
                }
            };
            for j in 0..nz {
                let jj = j as isize;
                f[[j, i]] -= c * (face(jj) - face(jj - 1));
            }
        }
    }

    /// Buoyancy source for the vertical momentum: -g (rho - P chi_bar).
    pub fn buoyancy(&self, rho: &Array2<f64>, p: &Array2<f64>) -> Array2<f64> {
        let g = self.consts.grav_nd();
        if g == 0.0 {
            return Array2::zeros(rho.raw_dim());
        }
        Array2::from_shape_fn(rho.raw_dim(), |(j, i)| {
            -g * (rho[[j, i]] - p[[j, i]] * self.bg.chi_cell[j])
        })
    }

    /// Helmholtz coefficient Ma^2 P^(2-gamma) / (gamma - 1) on nodes.
    fn helmholtz_coeff(&self, p_cell: &Array2<f64>) -> Array2<f64> {
        let gamma = self.consts.gamma;
        let msq = self.consts.msq();
        let p_node = cell_to_node(self.grid, p_cell);
        p_node.mapv(|p| msq / (gamma - 1.0) * p.powf(2.0 - gamma))
    }

    /// Pressure-gradient coefficient (c_p/R) P Theta per cell.
    fn grad_coeff(&self, rho: &Array2<f64>, p: &Array2<f64>) -> Array2<f64> {
        let cpr = self.consts.cp_over_r();
        Array2::from_shape_fn(rho.raw_dim(), |(j, i)| {
            cpr * p[[j, i]] * p[[j, i]] / rho[[j, i]]
        })
    }

    /// Subtract dt (c_p/R) P grad(pi) from the momenta, in place.
    fn apply_pressure_gradient(
        &self,
        rho_u: &mut Array2<f64>,
        rho_w: &mut Array2<f64>,
        p: &Array2<f64>,
        pi: &Array2<f64>,
        dt: f64,
    ) {
        let cpr = self.consts.cp_over_r();
        let (gx, gz) = grad(self.grid, pi);
        for j in 0..self.grid.nz {
            for i in 0..self.grid.nx {
                let f = dt * cpr * p[[j, i]];
                rho_u[[j, i]] -= f * gx[[j, i]];
                rho_w[[j, i]] -= f * gz[[j, i]];
            }
        }
    }

    /// Stages (i)+(ii): upwind half-step advection, explicit buoyancy, and
    /// the implicit half corrector. Returns the corrected half-time state
    /// (whose `pi` is the half-time Exner perturbation) together with the
    /// time-centered advective face fluxes and the solver iteration count.
    pub fn half_predictor(
        &self,
        state: &ModelState,
        dt: f64,
    ) -> Result<(ModelState, AdvectiveFlux, usize)> {
        let half = 0.5 * dt;
        let comp = state.regime == Regime::Compressible;

        let (u_cell, w_cell) = state.velocities();
        let flux_n = AdvectiveFlux::from_cell_fields(self.grid, &u_cell, &w_cell);

        let mut st = state.clone();
        {
            let ModelState {
                rho, rho_u, rho_w, p, ..
            } = &mut st;
            // P is advected in both regimes; in the pseudo-incompressible
            // regime the projection keeps div(Pv) near zero, so P stays on
            // the background to solver tolerance while remaining flux-
            // consistent with rho (a fixed P with an advected rho would
            // accumulate a spurious buoyancy difference).
            advect_half(
                self.grid,
                &mut [rho, rho_u, rho_w],
                p,
                &flux_n,
                half,
                true,
                self.limiter,
            )?;
        }

        // explicit buoyancy over the half interval
        let b = self.buoyancy(&st.rho, &st.p);
        st.rho_w.zip_mut_with(&b, |w, bv| *w += half * bv);

        // implicit half corrector
        let (pu_h, pw_h) = st.p_velocity();
        let div_pv = div(self.grid, &pu_h, &pw_h);
        let coeff = self.grad_coeff(&st.rho, &st.p).mapv(|c| half * half * c);
        let (rhs, h_opt) = if comp {
            let h = self.helmholtz_coeff(&st.p);
            let rhs = &h * &state.pi - &div_pv.mapv(|d| half * d);
            (rhs, Some(h))
        } else {
            (div_pv.mapv(|d| -half * d), None)
        };
        let prob = {
            let mut p = EllipticProblem::new(self.grid, h_opt.as_ref(), &coeff);
            p.tol = self.solver_tol;
            p.max_iter = self.solver_max_iter;
            p
        };
        let (pi_half, iters) = prob.solve(&rhs)?;

        self.apply_pressure_gradient(&mut st.rho_u, &mut st.rho_w, &st.p.clone(), &pi_half, half);
        st.pi = pi_half;
        st.t = state.t + half;

        let (u_c, w_c) = st.velocities();
        let flux_half = AdvectiveFlux::from_cell_fields(self.grid, &u_c, &w_c);
        Ok((st, flux_half, iters))
    }

    /// Advance the state by one full step of size `dt` (nondimensional).
    pub fn step(&self, state: &mut ModelState, dt: f64) -> Result<StepStats> {
        self.step_with_half_pi(state, dt).map(|(s, _)| s)
    }

    /// As `step`, but also return the half-time Exner perturbation computed
    /// by the predictor stage (used as the conversion pressure when a
    /// blended window ends on this step).
    pub fn step_with_half_pi(
        &self,
        state: &mut ModelState,
        dt: f64,
    ) -> Result<(StepStats, Array2<f64>)> {
        let half = 0.5 * dt;
        let comp = state.regime == Regime::Compressible;

        let (half_state, flux_half, iters_half) = self.half_predictor(state, dt)?;
        let (cx, cz) = flux_half.max_cfl(self.grid, dt);
        let max_cfl = cx.max(cz);

        // explicit half-step of the sources on the time-n fields. The
        // compressible regime re-centers on the pi carried from the previous
        // step; the pseudo-incompressible regime keeps the freshly projected
        // half-time pi (its pi is a Lagrange multiplier, not a prognostic
        // variable, so the predictor value is not reset).
        // time-n advective momentum flux, for the trapezoidal compression
        // in the final compressible corrector
        let (pu_n, pw_n) = state.p_velocity();

        let pi_src = if comp { &state.pi } else { &half_state.pi };
        let p_n = state.p.clone();
        self.apply_pressure_gradient(&mut state.rho_u, &mut state.rho_w, &p_n, pi_src, half);
        let b = self.buoyancy(&state.rho, &p_n);
        state.rho_w.zip_mut_with(&b, |w, bv| *w += half * bv);

        // full advection with time-centered fluxes
        {
            let ModelState {
                rho, rho_u, rho_w, p, ..
            } = state;
            advect_full(self.grid, &mut [rho, rho_u, rho_w], p, &flux_half, dt, self.limiter)?;
        }

        // scale-selective grid-noise sink, applied before the corrector so
        // the divergence constraint is re-established afterwards. The
        // coefficient scales with the squared advective CFL and the total is
        // subcycled to stay inside the explicit stability bound c <= 1/8.
        let c_step = self.hyper_coeff * max_cfl * max_cfl;
        if c_step > 0.0 {
            let n_sub = (c_step / 0.1).ceil().max(1.0) as usize;
            let c_sub = c_step / n_sub as f64;
            for _ in 0..n_sub {
                self.hyperdiffuse_field(&mut state.rho, c_sub);
                self.hyperdiffuse_field(&mut state.rho_u, c_sub);
                self.hyperdiffuse_field(&mut state.rho_w, c_sub);
                self.hyperdiffuse_field(&mut state.p, c_sub);
            }
        }

        // final implicit half corrector
        let b = self.buoyancy(&state.rho, &state.p);
        state.rho_w.zip_mut_with(&b, |w, bv| *w += half * bv);
        let (pu_s, pw_s) = state.p_velocity();
        let div_pv = div(self.grid, &pu_s, &pw_s);
        let (coeff_state_rho, coeff_state_p) = if comp {
            (&half_state.rho, &half_state.p)
        } else {
            (&state.rho, &state.p)
        };
        let coeff = self
            .grad_coeff(coeff_state_rho, coeff_state_p)
            .mapv(|c| half * half * c);
        let (rhs, h_opt) = if comp {
            // trapezoidal compression over the full step: the divergence
            // averages the time-n momentum flux and the advected,
            // explicitly sourced one, so the Exner increment matches the
            // compression the advected P absorbs (a one-sided divergence
            // damps the acoustic modes and decouples pi from P)
            let div_n = div(self.grid, &pu_n, &pw_n);
            let h = self.helmholtz_coeff(&state.p);
            let a_nd = (self.consts.gamma / self.consts.msq()).sqrt();
            let cfl_ac = a_nd * dt / self.grid.dx.min(self.grid.dz);
            let gate = 1.0 / (1.0 + (cfl_ac / 15.0).powi(6));
            let mut eps = (self.acoustic_offcenter
                - self.advective_offcenter * (max_cfl / 0.45).powi(2))
                * gate;
            if state.just_converted {
                // the time-n flux of a freshly converted state is not a
                // point on an equilibrated acoustic trajectory; off-
                // centering the average would turn the conversion
                // transient into a spurious one-time pressure kick
                eps = eps.min(0.0);
            }
            let rhs = &h * &state.pi
                - &(&div_pv.mapv(|d| (1.0 - eps) * d) + &div_n.mapv(|d| (1.0 + eps) * d))
                    .mapv(|d| half * d);
            (rhs, Some(h))
        } else {
            (div_pv.mapv(|d| -half * d), None)
        };
        let prob = {
            let mut pr = EllipticProblem::new(self.grid, h_opt.as_ref(), &coeff);
            pr.tol = self.solver_tol;
            pr.max_iter = self.solver_max_iter;
            pr
        };
        let (pi_new, iters_full) = prob.solve(&rhs)?;
        let p_grad = coeff_state_p.clone();
        self.apply_pressure_gradient(&mut state.rho_u, &mut state.rho_w, &p_grad, &pi_new, half);
        state.pi = pi_new;
        state.just_converted = false;
        state.t += dt;
        state.validate()?;

        Ok((
            StepStats {
                dt,
                iters_half,
                iters_full,
                max_cfl,
            },
            half_state.pi,
        ))
    }

    /// Residual divergence of the advective flux, for diagnostics:
    /// max |div(P v)| over nodes.
    pub fn divergence_norm(&self, state: &ModelState) -> f64 {
        let (pu, pw) = state.p_velocity();
        let d = div(self.grid, &pu, &pw);
        d.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    /// CFL-driven step size: cfl * min(dx/max|u|, dz/max|w|), nondim.
    /// Returns +inf for a quiescent state.
    pub fn compute_dt(&self, state: &ModelState, cfl: f64) -> f64 {
        let (mu, mw) = state.max_speeds();
        let tx = if mu > 0.0 { self.grid.dx / mu } else { f64::INFINITY };
        let tz = if mw > 0.0 { self.grid.dz / mw } else { f64::INFINITY };
        cfl * tx.min(tz)
    }

    /// Interpolate the node Exner perturbation to cells (for diagnostics).
    pub fn pi_at_cells(&self, state: &ModelState) -> Array2<f64> {
        node_to_cell(self.grid, &state.pi)
    }
}
