use blendsim::experiments::*;

// Vortex twin-experiment comparison across DA modes: RMSE-vs-truth series,
// the first-analysis RMSE(P) jump and the imbalance estimate.
fn main() {
    let exp = Experiment::new(Scenario::TravellingVortex).unwrap();
    let seed = 7;
    for mode in [DaMode::EnNoDa, DaMode::EnDa, DaMode::EnDaB] {
        let spec = EnsembleSpec::vortex_default(mode, seed);
        let res = run_ensemble(&exp, &spec).unwrap();
        println!("mode {mode:?}");
        for r in &res.records {
            println!(
                "  t={:6.1}s {:5} rho={:.4e} rho_u={:.4e} rho_w={:.4e} P={:.4e} pi={:.4e}",
                r.t_s, r.phase, r.rho, r.rho_u, r.rho_w, r.p, r.pi
            );
        }
        if let Some(j) = res.first_analysis_p_jump() {
            println!("  first-analysis P jump: {j:.4e}");
        }
        for (t, b) in &res.imbalance {
            println!("  imbalance estimate at t={t:.1}s: {b:.4e}");
        }
    }
}
