use blendsim::experiments::*;
use blendsim::blend::{self, BlendConfig, PiChoice};
use blendsim::diag;
fn main() {
    let cfl: f64 = std::env::var("CFL").ok().and_then(|v| v.parse().ok()).unwrap_or(0.33);
    let exp = Experiment::new(Scenario::TravellingVortex).unwrap();
    let stepper = exp.stepper();
    // conversion-pressure accuracy
    let balanced = exp.init_vortex((0.0, 0.0)).unwrap();
    let mut s = exp.init_vortex_imbalanced((0.0, 0.0)).unwrap();
    blend::to_psinc(&exp.grid, &exp.consts, &mut s).unwrap();
    let dt = stepper.compute_dt(&s, cfl);
    stepper.step(&mut s, dt).unwrap();
    let pi_half = blend::harvest_pi_half(&stepper, &s, dt).unwrap();
    let demean = |a: &ndarray::Array2<f64>| { let m = a.mean().unwrap(); a.mapv(|v| v - m) };
    let bd = demean(&balanced.pi);
    let l2d = |a: &ndarray::Array2<f64>| {
        let ad = demean(a);
        (ad.iter().zip(bd.iter()).map(|(x,y)| (x-y).powi(2)).sum::<f64>() / ad.len() as f64).sqrt()
    };
    println!("demeaned err(pi_half) = {:.4e}, err(pi_full) = {:.4e}", l2d(&pi_half), l2d(&s.pi));

    // probe errors
    let probes = [(0.0, 0.0)];
    for t_final in [100.0, 300.0] {
        let reference = run_single(&stepper, exp.init_vortex((0.0,0.0)).unwrap(), t_final,
            &DtPolicy::CflDriven { cfl, overrides: vec![] }, &probes, None).unwrap();
        let replay = DtPolicy::Replay(reference.dts.clone());
        let imb = exp.init_vortex_imbalanced((0.0, 0.0)).unwrap();
        let unb = run_single(&stepper, imb.clone(), t_final, &replay, &probes, None).unwrap();
        let half = BlendConfig { pi_choice: PiChoice::PiHalf, n_psinc_steps: 1 };
        let full = BlendConfig { pi_choice: PiChoice::PiFull, n_psinc_steps: 1 };
        let bh = run_single(&stepper, imb.clone(), t_final, &replay, &probes, Some(&half)).unwrap();
        let bf = run_single(&stepper, imb.clone(), t_final, &replay, &probes, Some(&full)).unwrap();
        let mut psinc0 = exp.init_vortex((0.0, 0.0)).unwrap();
        blend::to_psinc(&exp.grid, &exp.consts, &mut psinc0).unwrap();
        let psinc = run_single(&stepper, psinc0, t_final, &replay, &probes, None).unwrap();
        let d_ref = diag::increments(&reference.probe_pressure[0]);
        let d_psinc = diag::increments(&psinc.probe_pressure[0]);
        let e = |r: &SingleRunResult, dref: &[f64]| {
            let d = diag::increments(&r.probe_pressure[0]);
            diag::relative_error(&d[1..], &dref[1..]).unwrap()
        };
        println!("t_final {t_final} vs balanced comp: E_c={:.4} E_b(half)={:.4} E_b(full)={:.4}",
            e(&unb, &d_ref), e(&bh, &d_ref), e(&bf, &d_ref));
        // field-space errors at the final time vs the balanced comp state
        let fe = |r: &SingleRunResult| {
            let dr = demean(&r.state.pi);
            let db2 = demean(&reference.state.pi);
            let num = dr.iter().zip(db2.iter()).map(|(x,y)| (x-y).powi(2)).sum::<f64>().sqrt();
            let den = db2.iter().map(|v| v*v).sum::<f64>().sqrt();
            num / den
        };
        println!("  field pi(T) rel err: E_c={:.4} E_b(half)={:.4} E_b(full)={:.4} psinc={:.4}",
            fe(&unb), fe(&bh), fe(&bf), fe(&psinc));
        println!("t_final {t_final} vs psinc ref:     E_c={:.4} E_b(half)={:.4} E_b(full)={:.4} E(balcomp)={:.4}",
            e(&unb, &d_psinc), e(&bh, &d_psinc), e(&bf, &d_psinc), e(&reference, &d_psinc));
        if t_final == 100.0 {
            println!("  d_comp : {:?}", &d_ref[1..13.min(d_ref.len())]);
            println!("  d_psinc: {:?}", &d_psinc[1..13.min(d_psinc.len())]);
        }
    }
}
