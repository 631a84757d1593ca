//! Reference scenarios (travelling vortex, rising bubble), ensemble
//! generation, observation synthesis and the twin-experiment driver.

use crate::background::{build_hydrostatic_background, HydroBackground};
use crate::blend::{self, BlendConfig};
use crate::constants::PhysConstants;
use crate::diag;
use crate::error::{Result, SimError};
use crate::grid::{BoundaryKind, Grid};
use crate::letkf::{self, LetkfConfig, ObsField, Observation, ObservationBatch};
use crate::state::ModelState;
use crate::stepper::Stepper;
use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

/// The two reference test cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    TravellingVortex,
    RisingBubble,
}

/// A scenario bound to its grid, reference set and background column.
pub struct Experiment {
    pub scenario: Scenario,
    pub grid: Grid,
    pub consts: PhysConstants,
    pub bg: HydroBackground,
}

/// Vortex radius [m].
pub const VORTEX_R0: f64 = 4_000.0;
/// Vortex peak tangential speed [m/s].
pub const VORTEX_UTH_MAX: f64 = 25.0;
/// Bubble center height and radius [m].
pub const BUBBLE_R0: f64 = 2_000.0;
/// Background potential temperature [K].
pub const THETA0: f64 = 300.0;

impl Experiment {
    pub fn new(scenario: Scenario) -> Result<Self> {
        // grid coordinates are nondimensional (lengths in units of h_ref)
        let (grid, consts) = match scenario {
            Scenario::TravellingVortex => (
                Grid::new(
                    64,
                    64,
                    -0.5,
                    0.5,
                    -0.5,
                    0.5,
                    BoundaryKind::Periodic,
                    BoundaryKind::Periodic,
                )?,
                PhysConstants::new(1e5, THETA0, 100.0, 10_000.0, 0.0)?,
            ),
            Scenario::RisingBubble => (
                Grid::new(
                    160,
                    80,
                    -1.0,
                    1.0,
                    0.0,
                    1.0,
                    BoundaryKind::Periodic,
                    BoundaryKind::Wall,
                )?,
                PhysConstants::new(1e5, THETA0, 10.0, 10_000.0, 9.81)?,
            ),
        };
        let bg = build_hydrostatic_background(&|_| THETA0, &grid, &consts)?;
        Ok(Self {
            scenario,
            grid,
            consts,
            bg,
        })
    }

    pub fn stepper(&self) -> Stepper<'_> {
        Stepper::new(&self.grid, &self.consts, &self.bg)
    }

    /// Balanced travelling vortex centered at `center` [m]: uniform
    /// background wind plus a compactly supported tangential velocity with
    /// the cyclostrophically balanced pressure integrated by quadrature.
    pub fn init_vortex(&self, center: (f64, f64)) -> Result<ModelState> {
        self.vortex_state(center, true)
    }

    /// As `init_vortex`, but with P reset to the reference value and
    /// pi = 0 everywhere (pressure-imbalanced initialization).
    pub fn init_vortex_imbalanced(&self, center: (f64, f64)) -> Result<ModelState> {
        self.vortex_state(center, false)
    }

    fn vortex_state(&self, center: (f64, f64), balanced: bool) -> Result<ModelState> {
        if self.scenario != Scenario::TravellingVortex {
            return Err(SimError::Config(
                "vortex initialization requires the travelling-vortex scenario".into(),
            ));
        }
        let grid = &self.grid;
        let consts = &self.consts;
        let msq = consts.msq();
        let r_over_cp = consts.r_over_cp();
        let u0 = 100.0 / consts.u_ref;
        let w0 = 100.0 / consts.u_ref;
        let uth_nd = VORTEX_UTH_MAX / consts.u_ref;

        // tangential speed and density as functions of r_tilde = r / R0
        let uth = |rt: f64| -> f64 {
            if rt < 1.0 {
                // 4096 r^6 (1-r)^6 peaks at exactly 1 (r = 1/2)
                uth_nd * 4096.0 * rt.powi(6) * (1.0 - rt).powi(6)
            } else {
                0.0
            }
        };
        let rho_prof =
            |rt: f64| -> f64 { if rt < 1.0 { 1.0 - 0.5 * (1.0 - rt * rt).powi(6) } else { 1.0 } };

        // cyclostrophic balance: dp/dr_tilde = Ma^2 rho u_th^2 / r_tilde,
        // integrated inward from p(1) = 1 with Gauss-Legendre quadrature
        // (the integrand is polynomial, so 64 nodes are exact)
        let (gl_x, gl_w) = gauss_legendre(64);
        let pressure = |rt: f64| -> f64 {
            if rt >= 1.0 {
                return 1.0;
            }
            let a = rt.max(1e-14);
            let mut integral = 0.0;
            for (x, w) in gl_x.iter().zip(gl_w.iter()) {
                let s = 0.5 * (1.0 - a) * x + 0.5 * (1.0 + a);
                integral += w * rho_prof(s) * uth(s).powi(2) / s;
            }
            integral *= 0.5 * (1.0 - a);
            1.0 - msq * integral
        };

        // grid coordinates are nondimensional; convert the meter inputs
        let r0 = VORTEX_R0 / consts.h_ref;
        let (cx, cz) = (center.0 / consts.h_ref, center.1 / consts.h_ref);
        let rt_of = |x: f64, z: f64| -> (f64, f64, f64) {
            let dx = grid.sep_x(x, cx);
            let dz = grid.sep_z(z, cz);
            let r = (dx * dx + dz * dz).sqrt();
            (r / r0, dx, dz)
        };

        let mut state = ModelState::uniform(grid, 1.0, 1.0);
        for j in 0..grid.nz {
            for i in 0..grid.nx {
                let (rt, dx, dz) = rt_of(grid.x_center(i), grid.z_center(j));
                let rho = rho_prof(rt);
                let ut = uth(rt);
                let r = rt * r0;
                let (mut u, mut w) = (u0, w0);
                if r > 1e-12 {
                    u -= ut * dz / r;
                    w += ut * dx / r;
                }
                state.rho[[j, i]] = rho;
                state.rho_u[[j, i]] = rho * u;
                state.rho_w[[j, i]] = rho * w;
                if balanced {
                    // p* = (P*)^gamma  =>  P* = (p*)^(1/gamma)
                    state.p[[j, i]] = pressure(rt).powf(1.0 / consts.gamma);
                } else {
                    state.p[[j, i]] = 1.0;
                }
            }
        }
        if balanced {
            for jn in 0..grid.node_rows() {
                for in_ in 0..grid.node_cols() {
                    let x = grid.x_min + in_ as f64 * grid.dx;
                    let z = grid.z_node(jn);
                    let (rt, _, _) = rt_of(x, z);
                    let pi_full = pressure(rt).powf(r_over_cp);
                    state.pi[[jn, in_]] = (pi_full - 1.0) / msq;
                }
            }
        }
        state.validate()?;
        Ok(state)
    }

    /// Rising warm bubble: potential-temperature perturbation of the given
    /// amplitude [K] on a hydrostatic isentropic column, pi' = 0 and zero
    /// velocity.
    pub fn init_bubble(&self, amplitude_k: f64) -> Result<ModelState> {
        if self.scenario != Scenario::RisingBubble {
            return Err(SimError::Config(
                "bubble initialization requires the rising-bubble scenario".into(),
            ));
        }
        let grid = &self.grid;
        let r0 = BUBBLE_R0 / self.consts.h_ref;
        let mut state = ModelState::uniform(grid, 1.0, 1.0);
        for j in 0..grid.nz {
            let z = grid.z_center(j);
            for i in 0..grid.nx {
                let x = grid.x_center(i);
                let dx = grid.sep_x(x, 0.0);
                let r = (dx * dx + (z - r0).powi(2)).sqrt() / r0;
                let theta_k = if r <= 1.0 {
                    THETA0 + amplitude_k * (std::f64::consts::FRAC_PI_2 * r).cos()
                } else {
                    THETA0
                };
                let theta_nd = theta_k / self.consts.t_ref;
                state.p[[j, i]] = self.bg.p_cell[j];
                state.rho[[j, i]] = self.bg.p_cell[j] / theta_nd;
            }
        }
        state.validate()?;
        Ok(state)
    }

    /// Ensemble perturbation draws: vortex centers [m] uniform in
    /// [-1, 1) km per coordinate; bubble amplitudes [K] uniform in [2, 12).
    /// Returns `k + 1` draws; the last one is shared by the obs and truth
    /// runs.
    pub fn make_draws(&self, k: usize, seed: u64) -> Vec<(f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..=k)
            .map(|_| match self.scenario {
                Scenario::TravellingVortex => (
                    2e3 * rng.gen::<f64>() - 1e3,
                    2e3 * rng.gen::<f64>() - 1e3,
                ),
                Scenario::RisingBubble => (2.0 + 10.0 * rng.gen::<f64>(), 0.0),
            })
            .collect()
    }

    /// Initial state from one draw.
    pub fn init_from_draw(&self, draw: (f64, f64)) -> Result<ModelState> {
        match self.scenario {
            Scenario::TravellingVortex => self.init_vortex(draw),
            Scenario::RisingBubble => self.init_bubble(draw.0),
        }
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre polynomial recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        loop {
            let (mut p0, mut p1) = (1.0, 0.0);
            for jj in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2.0 * jj as f64 + 1.0) * z * p1 - jj as f64 * p2) / (jj as f64 + 1.0);
            }
            let dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let z1 = z;
            z -= p0 / dp;
            if (z - z1).abs() < 1e-15 {
                let dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
                x[i] = -z;
                x[n - 1 - i] = z;
                w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
                w[n - 1 - i] = w[i];
                break;
            }
        }
    }
    (x, w)
}

/// Time-step selection for a run.
#[derive(Debug, Clone)]
pub enum DtPolicy {
    /// Constant step [s].
    Fixed { dt_s: f64 },
    /// Advective CFL target with optional per-step overrides [s].
    CflDriven {
        cfl: f64,
        overrides: Vec<(usize, f64)>,
    },
    /// Replay a recorded nondimensional step sequence.
    Replay(Vec<f64>),
}

impl DtPolicy {
    fn base_dt(&self, stepper: &Stepper, state: &ModelState, step_idx: usize) -> Result<f64> {
        match self {
            DtPolicy::Fixed { dt_s } => Ok(dt_s / stepper.consts.time_ref()),
            DtPolicy::CflDriven { cfl, overrides } => {
                if let Some((_, dt_s)) = overrides.iter().find(|(s, _)| *s == step_idx) {
                    return Ok(dt_s / stepper.consts.time_ref());
                }
                let dt = stepper.compute_dt(state, *cfl);
                if !dt.is_finite() {
                    return Err(SimError::Logic(
                        "CFL-driven step size undefined for a quiescent state".into(),
                    ));
                }
                Ok(dt)
            }
            DtPolicy::Replay(seq) => seq.get(step_idx).copied().ok_or_else(|| {
                SimError::Logic(format!("replayed dt sequence exhausted at step {step_idx}"))
            }),
        }
    }
}

/// Result of a deterministic single-model run.
pub struct SingleRunResult {
    pub state: ModelState,
    /// Executed nondimensional steps, replayable via `DtPolicy::Replay`.
    pub dts: Vec<f64>,
    /// Probe pressure samples [Pa], one series per probe, sampled at t = 0
    /// and after every step.
    pub probe_pressure: Vec<Vec<f64>>,
}

/// Advance one state to `t_final_s`, sampling pressure probes each step.
/// With `blend_first` set, the first `n_psinc_steps` steps run in the
/// pseudo-incompressible regime before converting back.
pub fn run_single(
    stepper: &Stepper,
    mut state: ModelState,
    t_final_s: f64,
    policy: &DtPolicy,
    probes_m: &[(f64, f64)],
    blend_first: Option<&BlendConfig>,
) -> Result<SingleRunResult> {
    let t_ref = stepper.consts.time_ref();
    let t_final = t_final_s / t_ref;
    let mut probe_pressure = vec![Vec::new(); probes_m.len()];
    let mut dts = Vec::new();

    let sample = |state: &ModelState, out: &mut Vec<Vec<f64>>| -> Result<()> {
        for (s, &(x, z)) in out.iter_mut().zip(probes_m.iter()) {
            s.push(diag::probe_pressure(state, stepper.grid, stepper.consts, x, z)?);
        }
        Ok(())
    };
    sample(&state, &mut probe_pressure)?;

    let mut psinc_left = 0usize;
    if let Some(cfg) = blend_first {
        blend::to_psinc(stepper.grid, stepper.consts, &mut state)?;
        psinc_left = cfg.n_psinc_steps.max(1);
    }

    let mut step_idx = 0usize;
    let mut t = 0.0;
    while t < t_final - 1e-12 {
        let mut dt = policy.base_dt(stepper, &state, step_idx)?;
        dt = dt.min(t_final - t);
        stepper.step(&mut state, dt)?;
        dts.push(dt);
        t += dt;
        step_idx += 1;
        if psinc_left > 0 {
            psinc_left -= 1;
            if psinc_left == 0 {
                let cfg = blend_first.unwrap();
                let pi = blend::conversion_pi(stepper, &state, dt, cfg.pi_choice)?;
                blend::to_comp(stepper.grid, stepper.consts, &mut state, &pi)?;
            }
        }
        sample(&state, &mut probe_pressure)?;
    }
    Ok(SingleRunResult {
        state,
        dts,
        probe_pressure,
    })
}

/// Ensemble data-assimilation mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DaMode {
    #[serde(alias = "ennoda")]
    EnNoDa,
    #[serde(alias = "enda")]
    EnDa,
    #[serde(alias = "endab")]
    EnDaB,
}

/// Twin-experiment specification.
#[derive(Debug, Clone)]
pub struct EnsembleSpec {
    pub k: usize,
    pub seed: u64,
    pub mode: DaMode,
    /// First assimilation time [s].
    pub t_first_s: f64,
    /// Assimilation interval [s].
    pub dt_obs_s: f64,
    pub t_final_s: f64,
    /// Fraction of grid cells observed per analysis.
    pub obs_fraction: f64,
    /// Observation noise std as a fraction of the field's peak-to-peak.
    pub noise_frac: f64,
    /// Observe all five variables (otherwise momenta only).
    pub observe_all: bool,
    pub letkf: LetkfConfig,
    pub blend: BlendConfig,
    pub policy: DtPolicy,
}

impl EnsembleSpec {
    pub fn vortex_default(mode: DaMode, seed: u64) -> Self {
        Self {
            k: 10,
            seed,
            mode,
            t_first_s: 25.0,
            dt_obs_s: 25.0,
            t_final_s: 100.0,
            obs_fraction: 0.1,
            noise_frac: 0.05,
            observe_all: true,
            letkf: LetkfConfig::default(),
            blend: BlendConfig::default(),
            policy: DtPolicy::CflDriven {
                cfl: 0.33,
                overrides: vec![],
            },
        }
    }

    pub fn bubble_default(mode: DaMode, seed: u64) -> Self {
        Self {
            k: 10,
            seed,
            mode,
            t_first_s: 500.0,
            dt_obs_s: 50.0,
            t_final_s: 700.0,
            obs_fraction: 0.1,
            noise_frac: 0.05,
            observe_all: false,
            letkf: LetkfConfig::default(),
            blend: BlendConfig::default(),
            policy: DtPolicy::CflDriven {
                cfl: 0.5,
                overrides: vec![(0, 21.69), (1, 21.69)],
            },
        }
    }
}

/// RMSE-vs-truth series of an ensemble run. Each record holds the time [s]
/// and the per-variable RMSE of the ensemble against the truth state.
#[derive(Debug, Clone)]
pub struct RmseRecord {
    pub t_s: f64,
    /// "pre" before the analysis at this time, "post" after (identical for
    /// EnNoDa and for non-analysis output times).
    pub phase: &'static str,
    pub rho: f64,
    pub rho_u: f64,
    pub rho_w: f64,
    pub p: f64,
    pub pi: f64,
}

#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub records: Vec<RmseRecord>,
    /// (analysis time [s], Appendix-B imbalance amplitude in P units).
    pub imbalance: Vec<(f64, f64)>,
}

impl EnsembleResult {
    pub fn records_at<'a>(&'a self, phase: &'a str) -> impl Iterator<Item = &'a RmseRecord> + 'a {
        self.records.iter().filter(move |r| r.phase == phase)
    }

    /// RMSE(P) jump at the first analysis: post minus pre.
    pub fn first_analysis_p_jump(&self) -> Option<f64> {
        let pre = self.records.iter().find(|r| r.phase == "pre")?;
        let post = self.records.iter().find(|r| r.phase == "post")?;
        (pre.t_s == post.t_s).then(|| post.p - pre.p)
    }
}

fn rmse_record(
    t_s: f64,
    phase: &'static str,
    members: &[ModelState],
    truth: &ModelState,
) -> RmseRecord {
    let field = |get: fn(&ModelState) -> &Array2<f64>| -> f64 {
        let refs: Vec<&Array2<f64>> = members.iter().map(get).collect();
        diag::rmse(&refs, get(truth))
    };
    RmseRecord {
        t_s,
        phase,
        rho: field(|s| &s.rho),
        rho_u: field(|s| &s.rho_u),
        rho_w: field(|s| &s.rho_w),
        p: field(|s| &s.p),
        pi: field(|s| &s.pi),
    }
}

/// Synthesize one observation batch from the obs-run state: a Fisher-Yates
/// cell mask of ceil(fraction * N) cells, per-field Gaussian noise with
/// std = noise_frac * (field peak-to-peak).
pub fn gen_observations(
    grid: &Grid,
    obs_state: &ModelState,
    fields: &[ObsField],
    obs_fraction: f64,
    noise_frac: f64,
    rng: &mut ChaCha8Rng,
) -> Result<ObservationBatch> {
    let n = grid.nx * grid.nz;
    let count = (obs_fraction * n as f64).ceil() as usize;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.truncate(count);

    let mut batch = ObservationBatch::default();
    for field in fields {
        let arr = field.of(obs_state);
        let (mn, mx) = arr
            .iter()
            .fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(*v), b.max(*v)));
        let sigma = noise_frac * (mx - mn);
        if !(sigma > 0.0) {
            continue;
        }
        let normal = Normal::new(0.0, sigma)
            .map_err(|e| SimError::Logic(format!("noise distribution: {e}")))?;
        for &cell in &idx {
            let (j, i) = (cell / grid.nx, cell % grid.nx);
            let value = match field {
                ObsField::Pi => obs_state.pi[[j, i]],
                f => f.of(obs_state)[[j, i]],
            } + normal.sample(rng);
            batch.obs.push(Observation {
                field: *field,
                i,
                j,
                value,
                variance: sigma * sigma,
            });
        }
    }
    Ok(batch)
}

/// Run the full twin experiment: truth + obs runs and a K-member ensemble
/// marched in lockstep, with LETKF analyses (EnDA/EnDAB) and post-analysis
/// blending (EnDAB). All members and the truth run their first step(s) in
/// the pseudo-incompressible regime (first-step blending); the obs run
/// stays compressible throughout.
pub fn run_ensemble(exp: &Experiment, spec: &EnsembleSpec) -> Result<EnsembleResult> {
    spec.letkf.validate()?;
    let stepper = exp.stepper();
    let t_ref = exp.consts.time_ref();
    let draws = exp.make_draws(spec.k, spec.seed);
    let mut members: Vec<ModelState> = draws[..spec.k]
        .iter()
        .map(|d| exp.init_from_draw(*d))
        .collect::<Result<_>>()?;
    let mut obs_run = exp.init_from_draw(draws[spec.k])?;
    let mut truth = obs_run.clone();

    // first-step blending for truth and members
    let mut psinc_left = spec.blend.n_psinc_steps.max(1);
    blend::to_psinc(&exp.grid, &exp.consts, &mut truth)?;
    for m in members.iter_mut() {
        blend::to_psinc(&exp.grid, &exp.consts, m)?;
    }

    let mut obs_rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(0x0b5e_55ed));
    let fields: Vec<ObsField> = if spec.observe_all {
        vec![
            ObsField::Rho,
            ObsField::RhoU,
            ObsField::RhoW,
            ObsField::P,
            ObsField::Pi,
        ]
    } else {
        vec![ObsField::RhoU, ObsField::RhoW]
    };

    let mut analysis_times: Vec<f64> = Vec::new();
    let mut t_s = spec.t_first_s;
    while t_s <= spec.t_final_s + 1e-9 {
        analysis_times.push(t_s);
        t_s += spec.dt_obs_s;
    }

    let mut records = Vec::new();
    let mut imbalance = Vec::new();
    let mut t = 0.0f64;
    let t_final = spec.t_final_s / t_ref;
    let mut step_idx = 0usize;
    let mut next_analysis = 0usize;
    // counts down pseudo-incompressible steps after an EnDAB analysis
    let mut post_da_psinc = 0usize;

    while t < t_final - 1e-12 {
        let mut dt = spec.policy.base_dt(&stepper, &obs_run, step_idx)?;
        if next_analysis < analysis_times.len() {
            let ta = analysis_times[next_analysis] / t_ref;
            if ta - t > 1e-12 {
                dt = dt.min(ta - t);
            }
        }
        dt = dt.min(t_final - t);

        stepper.step(&mut obs_run, dt)?;
        stepper.step(&mut truth, dt)?;
        for m in members.iter_mut() {
            stepper.step(m, dt)?;
        }
        t += dt;
        step_idx += 1;

        // end of the first-step blending window
        if psinc_left > 0 {
            psinc_left -= 1;
            if psinc_left == 0 {
                let pi = blend::conversion_pi(&stepper, &truth, dt, spec.blend.pi_choice)?;
                blend::to_comp(&exp.grid, &exp.consts, &mut truth, &pi)?;
                for m in members.iter_mut() {
                    let pi = blend::conversion_pi(&stepper, m, dt, spec.blend.pi_choice)?;
                    blend::to_comp(&exp.grid, &exp.consts, m, &pi)?;
                }
            }
        }
        // end of a post-analysis blending window (EnDAB)
        if post_da_psinc > 0 {
            post_da_psinc -= 1;
            if post_da_psinc == 0 {
                for m in members.iter_mut() {
                    let pi = blend::conversion_pi(&stepper, m, dt, spec.blend.pi_choice)?;
                    blend::to_comp(&exp.grid, &exp.consts, m, &pi)?;
                }
            }
        }

        // analysis event
        let at_analysis = next_analysis < analysis_times.len()
            && (t * t_ref - analysis_times[next_analysis]).abs() < 1e-6;
        if at_analysis {
            let t_here = analysis_times[next_analysis];
            records.push(rmse_record(t_here, "pre", &members, &truth));
            if spec.mode != DaMode::EnNoDa {
                let batch = gen_observations(
                    &exp.grid,
                    &obs_run,
                    &fields,
                    spec.obs_fraction,
                    spec.noise_frac,
                    &mut obs_rng,
                )?;
                let pre: Vec<ModelState> = members.to_vec();
                letkf::analyse(&exp.grid, &spec.letkf, &mut members, &batch)?;
                let pairs: Vec<(ModelState, ModelState)> = pre
                    .into_iter()
                    .zip(members.iter().cloned())
                    .collect();
                imbalance.push((
                    t_here,
                    diag::imbalance_estimate(&exp.grid, &exp.consts, spec.letkf.region, &pairs),
                ));
                if spec.mode == DaMode::EnDaB {
                    for m in members.iter_mut() {
                        blend::to_psinc(&exp.grid, &exp.consts, m)?;
                    }
                    post_da_psinc = spec.blend.n_psinc_steps.max(1);
                }
            }
            records.push(rmse_record(t_here, "post", &members, &truth));
            next_analysis += 1;
        }
    }
    records.push(rmse_record(spec.t_final_s, "final", &members, &truth));
    Ok(EnsembleResult {
        records,
        imbalance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(64);
        assert_eq!(x.len(), 64);
        let total: f64 = w.iter().sum();
        assert_relative_eq!(total, 2.0, epsilon = 1e-13);
        // odd powers vanish, x^126 is within the exactness degree 127
        let odd: f64 = x.iter().zip(w.iter()).map(|(x, w)| w * x.powi(13)).sum();
        assert!(odd.abs() < 1e-14);
        let even: f64 = x.iter().zip(w.iter()).map(|(x, w)| w * x.powi(126)).sum();
        assert_relative_eq!(even, 2.0 / 127.0, max_relative = 1e-10);
    }

    #[test]
    fn vortex_fields_match_published_ranges() {
        let exp = Experiment::new(Scenario::TravellingVortex).unwrap();
        let s = exp.init_vortex((0.0, 0.0)).unwrap();
        // rho u in [50, 115] kg m^-1 s^-1 dimensional
        let scale = exp.consts.rho_ref() * exp.consts.u_ref;
        let (mn, mx) = s
            .rho_u
            .iter()
            .fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(*v), b.max(*v)));
        assert!(mn * scale > 45.0 && mn * scale < 80.0, "min rho_u {}", mn * scale);
        assert!(mx * scale > 100.0 && mx * scale < 150.0, "max rho_u {}", mx * scale);
        // dimensional pi perturbation is small and non-positive
        let msq = exp.consts.msq();
        for v in s.pi.iter() {
            let pi_dim = v * msq;
            assert!(pi_dim <= 1e-12 && pi_dim > -5e-3, "pi' {pi_dim}");
        }
        // max tangential speed ~ 25 m/s on top of the 100 m/s background
        let (u, w) = s.velocities();
        let mut max_dev: f64 = 0.0;
        for (uv, wv) in u.iter().zip(w.iter()) {
            let du = (uv - 1.0).hypot(wv - 1.0);
            max_dev = max_dev.max(du);
        }
        assert_relative_eq!(max_dev * exp.consts.u_ref, 25.0, max_relative = 0.05);
    }

    #[test]
    fn imbalanced_vortex_has_flat_pressure() {
        let exp = Experiment::new(Scenario::TravellingVortex).unwrap();
        let s = exp.init_vortex_imbalanced((0.0, 0.0)).unwrap();
        assert!(s.p.iter().all(|v| *v == 1.0));
        assert!(s.pi.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn zero_amplitude_bubble_is_hydrostatic() {
        let exp = Experiment::new(Scenario::RisingBubble).unwrap();
        let s = exp.init_bubble(0.0).unwrap();
        let stepper = exp.stepper();
        let mut s = s;
        for _ in 0..5 {
            let dt = 1.9 / exp.consts.time_ref();
            stepper.step(&mut s, dt).unwrap();
        }
        let (mu, mw) = s.max_speeds();
        assert!(mu < 1e-10 && mw < 1e-10, "drift u={mu} w={mw}");
    }

    #[test]
    fn bubble_rises() {
        let exp = Experiment::new(Scenario::RisingBubble).unwrap();
        let mut s = exp.init_bubble(2.0).unwrap();
        let stepper = exp.stepper();
        // height of the warm-anomaly centroid: sum z Theta' / sum Theta'
        let centroid = |s: &ModelState| -> f64 {
            let (mut num, mut den) = (0.0, 0.0);
            for j in 0..exp.grid.nz {
                for i in 0..exp.grid.nx {
                    let th = s.p[[j, i]] / s.rho[[j, i]];
                    let anom = (th - 1.0 / exp.bg.chi_cell[j]).max(0.0);
                    num += exp.grid.z_center(j) * anom;
                    den += anom;
                }
            }
            num / den
        };
        let z0 = centroid(&s);
        for _ in 0..20 {
            let dt = stepper.compute_dt(&s, 0.5).min(21.69 / exp.consts.time_ref());
            stepper.step(&mut s, dt).unwrap();
        }
        let z1 = centroid(&s);
        assert!(
            z1 > z0 + 0.1 * exp.grid.dz,
            "bubble should rise: centroid {z0} -> {z1}"
        );
    }

    #[test]
    fn draws_are_deterministic_and_in_range() {
        let exp = Experiment::new(Scenario::TravellingVortex).unwrap();
        let a = exp.make_draws(10, 7);
        let b = exp.make_draws(10, 7);
        assert_eq!(a, b);
        assert_eq!(a.len(), 11);
        for (x, z) in &a {
            assert!(*x >= -1e3 && *x < 1e3);
            assert!(*z >= -1e3 && *z < 1e3);
        }
        let bubble = Experiment::new(Scenario::RisingBubble).unwrap();
        for (amp, _) in bubble.make_draws(10, 3) {
            assert!((2.0..12.0).contains(&amp));
        }
    }

    #[test]
    fn observation_batch_has_expected_size_and_noise() {
        let exp = Experiment::new(Scenario::TravellingVortex).unwrap();
        let s = exp.init_vortex((0.0, 0.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let batch = gen_observations(
            &exp.grid,
            &s,
            &[ObsField::RhoU, ObsField::RhoW],
            0.1,
            0.05,
            &mut rng,
        )
        .unwrap();
        let per_field = (0.1f64 * 4096.0).ceil() as usize;
        assert_eq!(batch.obs.len(), 2 * per_field);
        // noise std ~ 5% of peak-to-peak; check the innovation scale
        let (mn, mx) = s
            .rho_u
            .iter()
            .fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(*v), b.max(*v)));
        let sigma = 0.05 * (mx - mn);
        let devs: Vec<f64> = batch
            .obs
            .iter()
            .filter(|o| o.field == ObsField::RhoU)
            .map(|o| o.value - s.rho_u[[o.j, o.i]])
            .collect();
        let rms = (devs.iter().map(|d| d * d).sum::<f64>() / devs.len() as f64).sqrt();
        assert!(rms > 0.5 * sigma && rms < 1.5 * sigma, "rms {rms} vs {sigma}");
        assert_relative_eq!(batch.obs[0].variance, sigma * sigma, max_relative = 1e-12);
    }

    #[test]
    fn vortex_survives_a_few_steps() {
        let exp = Experiment::new(Scenario::TravellingVortex).unwrap();
        let mut s = exp.init_vortex((0.0, 0.0)).unwrap();
        let stepper = exp.stepper();
        for _ in 0..5 {
            let dt = stepper.compute_dt(&s, 0.45);
            stepper.step(&mut s, dt).unwrap();
        }
        s.validate().unwrap();
    }
}
