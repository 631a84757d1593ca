use blendsim::blend;
use blendsim::diag;
use blendsim::experiments::*;

// Sensitivity of the late-time probe increments to a tiny initial
// perturbation: bound on how close any two runs can stay.
fn main() {
    let exp = Experiment::new(Scenario::RisingBubble).unwrap();
    let stepper = exp.stepper();
    let probes = [(-7.5e3, 5.0e3), (0.0, 5.0e3)];
    let t_final = 1000.0;
    let policy = DtPolicy::Fixed { dt_s: 1.9 };
    let mut a0 = exp.init_bubble(2.0).unwrap();
    blend::to_psinc(&exp.grid, &exp.consts, &mut a0).unwrap();
    let a = run_single(&stepper, a0, t_final, &policy, &probes, None).unwrap();
    let replay = DtPolicy::Replay(a.dts.clone());
    let eps = 1e-6;
    let mut b0 = exp.init_bubble(2.0 * (1.0 + eps)).unwrap();
    blend::to_psinc(&exp.grid, &exp.consts, &mut b0).unwrap();
    let b = run_single(&stepper, b0, t_final, &replay, &probes, None).unwrap();
    for p in 0..probes.len() {
        let da = diag::increments(&a.probe_pressure[p]);
        let db = diag::increments(&b.probe_pressure[p]);
        let n = da.len();
        let w = (n - 1) / 10;
        let werr: Vec<f64> = (0..10)
            .map(|k| {
                let s = 1 + k * w;
                let e = if k == 9 { n } else { 1 + (k + 1) * w };
                diag::relative_error(&db[s..e], &da[s..e]).unwrap()
            })
            .collect();
        println!("probe {p} (init amp rel perturbation {eps:.0e}):");
        println!("  windowed E(psinc' vs psinc): {werr:?}");
    }
}
