//! Physical constants, reference set and the equation of state.
//!
//! All solver-internal arithmetic is nondimensional. The reference set is
//! {p_ref, T_ref, u_ref, h_ref}; derived scales are
//!   rho_ref = p_ref / (R T_ref),
//!   c_ref   = sqrt(R T_ref)      (reference sound speed of the scaling),
//!   t_ref   = h_ref / u_ref,
//!   Ma      = u_ref / c_ref.
//! The Exner perturbation carried by the solver is the first-order field
//! pi1 = (pi - pi_bar) / Ma^2, which is O(1) in the low Mach number limit.

use crate::error::{Result, SimError};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PhysConstants {
    /// Reference pressure [Pa].
    pub p_ref: f64,
    /// Gas constant [J kg^-1 K^-1].
    pub r_gas: f64,
    /// Heat capacity at constant pressure [J kg^-1 K^-1].
    pub c_p: f64,
    /// Heat capacity at constant volume [J kg^-1 K^-1].
    pub c_v: f64,
    /// Isentropic exponent c_p / c_v.
    pub gamma: f64,
    /// Gravity [m s^-2].
    pub grav: f64,
    /// Coriolis parameter [s^-1]. Carried but zero in all tests.
    pub coriolis: f64,
    /// Reference temperature [K].
    pub t_ref: f64,
    /// Reference velocity [m s^-1].
    pub u_ref: f64,
    /// Reference length [m].
    pub h_ref: f64,
}

impl PhysConstants {
    /// Dry-air constants with a given reference set.
    pub fn new(p_ref: f64, t_ref: f64, u_ref: f64, h_ref: f64, grav: f64) -> Result<Self> {
        if p_ref <= 0.0 || t_ref <= 0.0 || u_ref <= 0.0 || h_ref <= 0.0 {
            return Err(SimError::Config(
                "reference values p_ref, T_ref, u_ref, h_ref must be positive".into(),
            ));
        }
        let r_gas = 287.4;
        let gamma = 1.4;
        let c_p = r_gas * gamma / (gamma - 1.0);
        let c_v = c_p - r_gas;
        Ok(Self {
            p_ref,
            r_gas,
            c_p,
            c_v,
            gamma,
            grav,
            coriolis: 0.0,
            t_ref,
            u_ref,
            h_ref,
        })
    }

    /// Reference sound speed of the scaling, sqrt(R T_ref) [m s^-1].
    pub fn c_ref(&self) -> f64 {
        (self.r_gas * self.t_ref).sqrt()
    }

    /// Adiabatic sound speed sqrt(gamma R T_ref) [m s^-1], used by the
    /// acoustic-timescale imbalance estimate.
    pub fn c_sound(&self) -> f64 {
        (self.gamma * self.r_gas * self.t_ref).sqrt()
    }

    /// Mach number u_ref / c_ref, recomputed on every call.
    pub fn mach(&self) -> f64 {
        self.u_ref / self.c_ref()
    }

    /// Ma^2, the factor multiplying the first-order Exner pressure.
    pub fn msq(&self) -> f64 {
        let ma = self.mach();
        ma * ma
    }

    /// Reference density p_ref / (R T_ref) [kg m^-3].
    pub fn rho_ref(&self) -> f64 {
        self.p_ref / (self.r_gas * self.t_ref)
    }

    /// Reference time h_ref / u_ref [s].
    pub fn time_ref(&self) -> f64 {
        self.h_ref / self.u_ref
    }

    /// Nondimensional gravity g h_ref / u_ref^2.
    pub fn grav_nd(&self) -> f64 {
        self.grav * self.h_ref / (self.u_ref * self.u_ref)
    }

    /// c_p / R = gamma / (gamma - 1), the coefficient of P grad(pi1) in the
    /// nondimensional momentum equation.
    pub fn cp_over_r(&self) -> f64 {
        self.c_p / self.r_gas
    }

    /// R / c_p, the Exner exponent.
    pub fn r_over_cp(&self) -> f64 {
        self.r_gas / self.c_p
    }
}

/// Exner pressure from thermodynamic pressure, pi = (p / p_ref)^(R/c_p).
pub fn eos_pi_from_p(p: f64, consts: &PhysConstants) -> Result<f64> {
    if p <= 0.0 {
        return Err(SimError::Domain(format!("non-positive pressure {p}")));
    }
    Ok((p / consts.p_ref).powf(consts.r_over_cp()))
}

/// Thermodynamic pressure from Exner pressure, inverse of `eos_pi_from_p`.
pub fn eos_p_from_pi(pi: f64, consts: &PhysConstants) -> Result<f64> {
    if pi <= 0.0 {
        return Err(SimError::Domain(format!("non-positive Exner pressure {pi}")));
    }
    Ok(consts.p_ref * pi.powf(consts.c_p / consts.r_gas))
}

/// Mass-weighted potential temperature from Exner pressure,
/// P = (p_ref / R) pi^(1/(gamma-1)).
pub fn p_from_pi(pi: f64, consts: &PhysConstants) -> Result<f64> {
    if pi <= 0.0 {
        return Err(SimError::Domain(format!("non-positive Exner pressure {pi}")));
    }
    Ok(consts.p_ref / consts.r_gas * pi.powf(1.0 / (consts.gamma - 1.0)))
}

/// Exner pressure from mass-weighted potential temperature, inverse of `p_from_pi`.
pub fn pi_from_p_theta(p_theta: f64, consts: &PhysConstants) -> Result<f64> {
    if p_theta <= 0.0 {
        return Err(SimError::Domain(format!(
            "non-positive mass-weighted potential temperature {p_theta}"
        )));
    }
    Ok((p_theta * consts.r_gas / consts.p_ref).powf(consts.gamma - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn consts() -> PhysConstants {
        PhysConstants::new(1e5, 300.0, 100.0, 10_000.0, 0.0).unwrap()
    }

    #[test]
    fn gas_constant_identities() {
        let c = consts();
        assert_relative_eq!(c.r_gas, c.c_p - c.c_v, max_relative = 1e-14);
        assert_relative_eq!(c.gamma, c.c_p / c.c_v, max_relative = 1e-14);
    }

    #[test]
    fn pi_at_reference_pressure_is_one() {
        let c = consts();
        assert_relative_eq!(eos_pi_from_p(c.p_ref, &c).unwrap(), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn pi_below_reference() {
        let c = consts();
        let expected = 0.9f64.powf(2.0 / 7.0);
        // R/c_p = 2/7 only for R = 287, c_p = 1004.5; with R = 287.4 the
        // exponent is still 2/7 because c_p = gamma R/(gamma-1) = 3.5 R.
        assert_relative_eq!(
            eos_pi_from_p(0.9 * c.p_ref, &c).unwrap(),
            expected,
            max_relative = 1e-13
        );
    }

    #[test]
    fn eos_round_trip() {
        let c = consts();
        for frac in [0.5, 0.75, 1.0, 1.5, 2.0] {
            let p = frac * c.p_ref;
            let back = eos_p_from_pi(eos_pi_from_p(p, &c).unwrap(), &c).unwrap();
            assert_relative_eq!(back, p, max_relative = 1e-14);
            let pt = p_from_pi(eos_pi_from_p(p, &c).unwrap(), &c).unwrap();
            let pi_back = pi_from_p_theta(pt, &c).unwrap();
            assert_relative_eq!(pi_back, eos_pi_from_p(p, &c).unwrap(), max_relative = 1e-13);
        }
    }

    #[test]
    fn p_at_unit_exner() {
        let c = consts();
        let p = p_from_pi(1.0, &c).unwrap();
        assert_relative_eq!(p, c.p_ref / c.r_gas, max_relative = 1e-14);
        assert_relative_eq!(p, 347.947_11, max_relative = 1e-6);
    }

    #[test]
    fn dp_dpi_matches_finite_difference() {
        let c = consts();
        let analytic = (c.p_ref / c.r_gas) / (c.gamma - 1.0);
        let h = 1e-6;
        let fd = (p_from_pi(1.0 + h, &c).unwrap() - p_from_pi(1.0 - h, &c).unwrap()) / (2.0 * h);
        assert_relative_eq!(fd, analytic, max_relative = 1e-8);
    }

    #[test]
    fn mach_numbers_of_the_two_test_cases() {
        let vortex = PhysConstants::new(1e5, 300.0, 100.0, 10_000.0, 0.0).unwrap();
        assert_relative_eq!(vortex.mach(), 0.341, max_relative = 2e-3);
        let bubble = PhysConstants::new(1e5, 300.0, 10.0, 10_000.0, 9.81).unwrap();
        assert_relative_eq!(bubble.mach(), 0.0341, max_relative = 2e-3);
    }

    #[test]
    fn negative_pressure_rejected() {
        let c = consts();
        assert!(eos_pi_from_p(-1.0, &c).is_err());
        assert!(p_from_pi(0.0, &c).is_err());
    }
}
