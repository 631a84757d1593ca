//! Batch command-line front end: deterministic runs, ensemble twin
//! experiments, artifact post-processing and the localisation-size sweep.

use blendsim::blend::PiChoice;
use blendsim::config::RunConfig;
use blendsim::diag;
use blendsim::error::SimError;
use blendsim::experiments::{run_ensemble, run_single, DaMode, Experiment, Scenario};
use blendsim::output::RunWriter;
use blendsim::state::Regime;
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "blendsim", version, about = "Blended soundproof-compressible flow solver with ensemble data assimilation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// One deterministic simulation from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out/run")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// A full ensemble twin experiment from a config file.
    Ensemble {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out/ensemble")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Override the DA mode (ennoda | enda | endab).
        #[arg(long)]
        mode: Option<String>,
        /// Override the localisation region edge length.
        #[arg(long)]
        region: Option<usize>,
        /// Override the conversion pressure (half | full).
        #[arg(long)]
        pi_choice: Option<String>,
    },
    /// Post-process stored probe series into increment/error tables.
    Diag {
        /// Run directory holding probe_*.csv artifacts.
        #[arg(long)]
        run: PathBuf,
        /// Reference run directory for relative errors.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long, default_value = "metrics.csv")]
        out: String,
    },
    /// Localisation-size study: EnDA vs EnDAB over a set of region sizes.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "5,21,41")]
        regions: String,
        #[arg(long, default_value = "out/sweep")]
        out: PathBuf,
    },
}

fn parse_mode(s: &str) -> Result<DaMode, SimError> {
    match s.to_ascii_lowercase().as_str() {
        "ennoda" => Ok(DaMode::EnNoDa),
        "enda" => Ok(DaMode::EnDa),
        "endab" => Ok(DaMode::EnDaB),
        other => Err(SimError::Config(format!(
            "unknown mode `{other}` (expected ennoda | enda | endab)"
        ))),
    }
}

fn parse_pi_choice(s: &str) -> Result<PiChoice, SimError> {
    match s.to_ascii_lowercase().as_str() {
        "half" => Ok(PiChoice::PiHalf),
        "full" => Ok(PiChoice::PiFull),
        other => Err(SimError::Config(format!(
            "unknown pi-choice `{other}` (expected half | full)"
        ))),
    }
}

fn write_manifest(w: &RunWriter, exp: &Experiment) -> Result<(), SimError> {
    w.manifest_entry("p_ref_pa", &format!("{}", exp.consts.p_ref))?;
    w.manifest_entry("t_ref_k", &format!("{}", exp.consts.t_ref))?;
    w.manifest_entry("u_ref_ms", &format!("{}", exp.consts.u_ref))?;
    w.manifest_entry("h_ref_m", &format!("{}", exp.consts.h_ref))?;
    w.manifest_entry("mach", &format!("{:.6}", exp.consts.mach()))?;
    w.manifest_entry("c_ref_ms", &format!("{:.4}", exp.consts.c_ref()))?;
    w.manifest_entry("c_sound_ms", &format!("{:.4}", exp.consts.c_sound()))?;
    Ok(())
}

fn default_probes_m(scenario: Scenario) -> Vec<(f64, f64)> {
    match scenario {
        Scenario::TravellingVortex => vec![(0.0, 0.0)],
        Scenario::RisingBubble => vec![(-7.5e3, 5e3), (0.0, 5e3)],
    }
}

fn cmd_run(config: PathBuf, out: PathBuf, seed: Option<u64>) -> Result<(), SimError> {
    let mut cfg = RunConfig::from_path(&config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let exp = Experiment::new(cfg.scenario)?;
    let stepper = exp.stepper();
    let mut state = match cfg.scenario {
        Scenario::TravellingVortex => {
            let c = (cfg.center_km.0 * 1e3, cfg.center_km.1 * 1e3);
            if cfg.imbalanced_init {
                exp.init_vortex_imbalanced(c)?
            } else {
                exp.init_vortex(c)?
            }
        }
        Scenario::RisingBubble => exp.init_bubble(cfg.bubble_amplitude_k)?,
    };
    if cfg.pseudo_incompressible {
        blendsim::blend::to_psinc(&exp.grid, &exp.consts, &mut state)?;
        state.regime = Regime::PseudoIncompressible;
    }
    let probes: Vec<(f64, f64)> = if cfg.probes_km.is_empty() {
        default_probes_m(cfg.scenario)
    } else {
        cfg.probes_km.iter().map(|(x, z)| (x * 1e3, z * 1e3)).collect()
    };
    let blend_first = cfg.blend_first_step.then_some(&cfg.blend);
    let result = run_single(
        &stepper,
        state,
        cfg.t_final_s,
        &cfg.policy(),
        &probes,
        blend_first,
    )?;

    let w = RunWriter::create(&out)?;
    write_manifest(&w, &exp)?;
    let t_ref = exp.consts.time_ref();
    let mut times = vec![0.0];
    for dt in &result.dts {
        times.push(times.last().unwrap() + dt * t_ref);
    }
    for (pi, series) in result.probe_pressure.iter().enumerate() {
        let rows: Vec<Vec<f64>> = times
            .iter()
            .zip(series.iter())
            .map(|(t, p)| vec![*t, *p])
            .collect();
        w.write_csv(&format!("probe_{pi}.csv"), &["t_s", "p_pa"], &rows)?;
    }
    for (name, field) in [
        ("rho", &result.state.rho),
        ("rho_u", &result.state.rho_u),
        ("rho_w", &result.state.rho_w),
        ("p", &result.state.p),
        ("pi", &result.state.pi),
    ] {
        w.write_field(cfg.t_final_s, name, field)?;
    }
    w.log_event(&format!(
        "run complete: {} steps to t = {} s",
        result.dts.len(),
        cfg.t_final_s
    ))?;
    println!("run complete: {} steps, artifacts in {}", result.dts.len(), out.display());
    Ok(())
}

fn cmd_ensemble(
    config: PathBuf,
    out: PathBuf,
    seed: Option<u64>,
    mode: Option<String>,
    region: Option<usize>,
    pi_choice: Option<String>,
) -> Result<(), SimError> {
    let mut cfg = RunConfig::from_path(&config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(m) = mode {
        cfg.mode = Some(parse_mode(&m)?);
    }
    if let Some(r) = region {
        cfg.letkf.region = r;
    }
    if let Some(p) = pi_choice {
        cfg.blend.pi_choice = parse_pi_choice(&p)?;
    }
    let exp = Experiment::new(cfg.scenario)?;
    let spec = cfg.ensemble_spec()?;
    let result = run_ensemble(&exp, &spec)?;

    let w = RunWriter::create(&out)?;
    write_manifest(&w, &exp)?;
    let rows: Vec<Vec<f64>> = result
        .records
        .iter()
        .map(|r| {
            vec![
                r.t_s,
                match r.phase {
                    "pre" => 0.0,
                    "post" => 1.0,
                    _ => 2.0,
                },
                r.rho,
                r.rho_u,
                r.rho_w,
                r.p,
                r.pi,
            ]
        })
        .collect();
    w.write_csv(
        "rmse.csv",
        &["t_s", "phase", "rho", "rho_u", "rho_w", "p", "pi"],
        &rows,
    )?;
    let imb: Vec<Vec<f64>> = result.imbalance.iter().map(|(t, v)| vec![*t, *v]).collect();
    w.write_csv("imbalance.csv", &["t_s", "p_hat"], &imb)?;
    w.log_event(&format!(
        "ensemble complete: mode {:?}, {} analyses",
        spec.mode,
        result.imbalance.len()
    ))?;
    println!("ensemble complete, artifacts in {}", out.display());
    Ok(())
}

fn read_probe_csv(path: &std::path::Path) -> Result<Vec<f64>, SimError> {
    let text = std::fs::read_to_string(path)?;
    let mut vals = Vec::new();
    for line in text.lines().skip(1) {
        let p = line
            .split(',')
            .nth(1)
            .ok_or_else(|| SimError::Config(format!("malformed probe row in {}", path.display())))?;
        vals.push(p.parse::<f64>().map_err(|e| {
            SimError::Config(format!("bad value in {}: {e}", path.display()))
        })?);
    }
    Ok(vals)
}

fn cmd_diag(run: PathBuf, reference: Option<PathBuf>, out: String) -> Result<(), SimError> {
    let w = RunWriter::create(&run)?;
    let mut rows = Vec::new();
    let mut idx = 0usize;
    loop {
        let probe = run.join(format!("probe_{idx}.csv"));
        if !probe.exists() {
            break;
        }
        let series = read_probe_csv(&probe)?;
        // increments with the first (spin-up) increment excluded
        let inc = diag::increments(&series);
        let inc_trim = &inc[1.min(inc.len())..];
        let rel = if let Some(refdir) = &reference {
            let ref_series = read_probe_csv(&refdir.join(format!("probe_{idx}.csv")))?;
            let ref_inc = diag::increments(&ref_series);
            let ref_trim = &ref_inc[1.min(ref_inc.len())..];
            diag::relative_error(inc_trim, ref_trim)?
        } else {
            f64::NAN
        };
        let max_abs = inc_trim.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        rows.push(vec![idx as f64, max_abs, rel]);
        idx += 1;
    }
    if rows.is_empty() {
        return Err(SimError::Config(format!(
            "no probe_*.csv artifacts found in {}",
            run.display()
        )));
    }
    w.write_csv(&out, &["probe", "max_abs_increment_pa", "relative_error"], &rows)?;
    println!("wrote {} probe metrics to {}", rows.len(), run.join(&out).display());
    Ok(())
}

fn cmd_sweep(config: PathBuf, regions: String, out: PathBuf) -> Result<(), SimError> {
    let cfg = RunConfig::from_path(&config)?;
    let exp = Experiment::new(cfg.scenario)?;
    let sizes: Vec<usize> = regions
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|e| SimError::Config(format!("bad region size `{s}`: {e}")))
        })
        .collect::<Result<_, _>>()?;
    let w = RunWriter::create(&out)?;
    write_manifest(&w, &exp)?;
    let mut rows = Vec::new();
    for &r in &sizes {
        for mode in [DaMode::EnDa, DaMode::EnDaB] {
            let mut c = cfg.clone();
            c.mode = Some(mode);
            c.letkf.region = r;
            let spec = c.ensemble_spec()?;
            let result = run_ensemble(&exp, &spec)?;
            let max_rho_u = result
                .records_at("post")
                .map(|rec| rec.rho_u)
                .fold(0.0f64, f64::max);
            rows.push(vec![
                r as f64,
                if mode == DaMode::EnDa { 0.0 } else { 1.0 },
                max_rho_u,
            ]);
            w.log_event(&format!("sweep: region {r}, mode {mode:?} done"))?;
        }
    }
    w.write_csv("sweep.csv", &["region", "mode", "max_rmse_rho_u"], &rows)?;
    println!("sweep complete, artifacts in {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Run { config, out, seed } => cmd_run(config, out, seed),
        Cmd::Ensemble {
            config,
            out,
            seed,
            mode,
            region,
            pi_choice,
        } => cmd_ensemble(config, out, seed, mode, region, pi_choice),
        Cmd::Diag {
            run,
            reference,
            out,
        } => cmd_diag(run, reference, out),
        Cmd::Sweep {
            config,
            regions,
            out,
        } => cmd_sweep(config, regions, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                SimError::Config(_) | SimError::Io(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}
