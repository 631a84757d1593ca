//! TOML run configuration for the command-line front end.

use crate::blend::BlendConfig;
use crate::error::{Result, SimError};
use crate::experiments::{DaMode, DtPolicy, EnsembleSpec, Scenario};
use crate::letkf::LetkfConfig;
use serde::Deserialize;
use std::path::Path;

fn default_k() -> usize {
    10
}
fn default_cfl() -> f64 {
    0.33
}
fn default_obs_fraction() -> f64 {
    0.1
}
fn default_noise_frac() -> f64 {
    0.05
}
fn default_true() -> bool {
    true
}

/// One deterministic or ensemble run, as read from a TOML file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    pub scenario: Scenario,
    /// Ensemble mode; absent for deterministic runs.
    #[serde(default)]
    pub mode: Option<DaMode>,
    #[serde(default = "default_k")]
    pub ensemble_size: usize,
    #[serde(default)]
    pub seed: u64,
    /// Final time [s].
    pub t_final_s: f64,
    /// Fixed step [s]; when absent the CFL-driven policy is used.
    #[serde(default)]
    pub dt_s: Option<f64>,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    /// Per-step overrides [(step index, dt in s)].
    #[serde(default)]
    pub dt_overrides: Vec<(usize, f64)>,
    /// First assimilation time [s].
    #[serde(default)]
    pub t_first_s: Option<f64>,
    /// Assimilation interval [s].
    #[serde(default)]
    pub dt_obs_s: Option<f64>,
    #[serde(default = "default_obs_fraction")]
    pub obs_fraction: f64,
    #[serde(default = "default_noise_frac")]
    pub noise_frac: f64,
    #[serde(default = "default_true")]
    pub observe_all: bool,
    #[serde(default)]
    pub letkf: LetkfConfig,
    #[serde(default)]
    pub blend: BlendConfig,
    /// Probe positions [km].
    #[serde(default)]
    pub probes_km: Vec<(f64, f64)>,
    /// Start from the pressure-imbalanced vortex initialization.
    #[serde(default)]
    pub imbalanced_init: bool,
    /// Run the first step(s) in the pseudo-incompressible regime.
    #[serde(default)]
    pub blend_first_step: bool,
    /// Run entirely in the pseudo-incompressible regime.
    #[serde(default)]
    pub pseudo_incompressible: bool,
    /// Vortex center [km] for deterministic runs.
    #[serde(default)]
    pub center_km: (f64, f64),
    /// Bubble amplitude [K] for deterministic runs.
    #[serde(default = "default_bubble_amp")]
    pub bubble_amplitude_k: f64,
}

fn default_bubble_amp() -> f64 {
    2.0
}

impl RunConfig {
    pub fn from_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| SimError::Config(format!("config parse error: {e}")))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_str(&text)
    }

    pub fn policy(&self) -> DtPolicy {
        match self.dt_s {
            Some(dt_s) => DtPolicy::Fixed { dt_s },
            None => DtPolicy::CflDriven {
                cfl: self.cfl,
                overrides: self.dt_overrides.clone(),
            },
        }
    }

    /// Ensemble specification; errors when `mode` is absent.
    pub fn ensemble_spec(&self) -> Result<EnsembleSpec> {
        let mode = self
            .mode
            .ok_or_else(|| SimError::Config("key `mode` required for ensemble runs".into()))?;
        let defaults = match self.scenario {
            Scenario::TravellingVortex => EnsembleSpec::vortex_default(mode, self.seed),
            Scenario::RisingBubble => EnsembleSpec::bubble_default(mode, self.seed),
        };
        Ok(EnsembleSpec {
            k: self.ensemble_size,
            seed: self.seed,
            mode,
            t_first_s: self.t_first_s.unwrap_or(defaults.t_first_s),
            dt_obs_s: self.dt_obs_s.unwrap_or(defaults.dt_obs_s),
            t_final_s: self.t_final_s,
            obs_fraction: self.obs_fraction,
            noise_frac: self.noise_frac,
            observe_all: self.observe_all,
            letkf: self.letkf,
            blend: self.blend,
            policy: self.policy(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blend::PiChoice;

    #[test]
    fn minimal_deterministic_config() {
        let cfg = RunConfig::from_str(
            r#"
scenario = "travelling-vortex"
t-final-s = 100.0
"#,
        )
        .unwrap();
        assert_eq!(cfg.scenario, Scenario::TravellingVortex);
        assert!(matches!(cfg.policy(), DtPolicy::CflDriven { cfl, .. } if cfl == 0.33));
        assert!(cfg.ensemble_spec().is_err());
    }

    #[test]
    fn full_ensemble_config() {
        let cfg = RunConfig::from_str(
            r#"
scenario = "rising-bubble"
mode = "en-da-b"
t-final-s = 700.0
seed = 42
dt-overrides = [[0, 21.69], [1, 21.69]]

[letkf]
region = 21
inflation = 1.0
localisation = "truncated-gaussian"

[blend]
pi-choice = "pi-half"
n-psinc-steps = 1
"#,
        )
        .unwrap();
        let spec = cfg.ensemble_spec().unwrap();
        assert_eq!(spec.mode, DaMode::EnDaB);
        assert_eq!(spec.letkf.region, 21);
        assert_eq!(spec.blend.pi_choice, PiChoice::PiHalf);
        assert_eq!(spec.t_first_s, 500.0);
        assert!(matches!(spec.policy, DtPolicy::CflDriven { ref overrides, .. } if overrides.len() == 2));
    }

    #[test]
    fn unknown_key_is_named_in_error() {
        let err = RunConfig::from_str(
            r#"
scenario = "travelling-vortex"
t-final-s = 1.0
no-such-key = 3
"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("no-such-key"), "{err}");
    }
}
