use blendsim::blend::{self, BlendConfig, PiChoice};
use blendsim::diag;
use blendsim::experiments::*;

fn windowed(series: &[f64], reference: &[f64], nwin: usize) -> Vec<f64> {
    let n = series.len();
    let w = n / nwin;
    (0..nwin)
        .map(|k| {
            let a = k * w;
            let b = if k == nwin - 1 { n } else { (k + 1) * w };
            diag::relative_error(&series[a..b], &reference[a..b]).unwrap()
        })
        .collect()
}

fn ratios(exp: &Experiment, policy: &DtPolicy, label: &str) {
    let stepper = exp.stepper();
    let probes = [(-7.5e3, 5.0e3), (0.0, 5.0e3)];
    let t_final = 1000.0;
    // psinc reference
    let mut ps0 = exp.init_bubble(2.0).unwrap();
    blend::to_psinc(&exp.grid, &exp.consts, &mut ps0).unwrap();
    let psinc = run_single(&stepper, ps0, t_final, policy, &probes, None).unwrap();
    let replay = DtPolicy::Replay(psinc.dts.clone());
    let comp = run_single(
        &stepper,
        exp.init_bubble(2.0).unwrap(),
        t_final,
        &replay,
        &probes,
        None,
    )
    .unwrap();
    let cfg = BlendConfig {
        pi_choice: PiChoice::PiHalf,
        n_psinc_steps: 1,
    };
    let blend_run = run_single(
        &stepper,
        exp.init_bubble(2.0).unwrap(),
        t_final,
        &replay,
        &probes,
        Some(&cfg),
    )
    .unwrap();
    for p in 0..probes.len() {
        let dref = diag::increments(&psinc.probe_pressure[p]);
        let dc = diag::increments(&comp.probe_pressure[p]);
        let db = diag::increments(&blend_run.probe_pressure[p]);
        let ec = diag::relative_error(&dc[1..], &dref[1..]).unwrap();
        let eb = diag::relative_error(&db[1..], &dref[1..]).unwrap();
        println!(
            "{label} probe {p}: E_c={ec:.4} E_b={eb:.4} ratio={:.1}",
            ec / eb
        );
        println!("  windowed E_b: {:?}", windowed(&db[1..], &dref[1..], 10));
        println!("  windowed E_c: {:?}", windowed(&dc[1..], &dref[1..], 10));
        let rms = |v: &[f64]| (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt();
        let n = dref.len();
        println!(
            "  rms dref early/late: {:.3e} {:.3e}  db early/late: {:.3e} {:.3e}",
            rms(&dref[1..n / 10]),
            rms(&dref[9 * n / 10..]),
            rms(&db[1..n / 10]),
            rms(&db[9 * n / 10..])
        );
    }
}

fn main() {
    let exp = Experiment::new(Scenario::RisingBubble).unwrap();
    ratios(&exp, &DtPolicy::Fixed { dt_s: 1.9 }, "acoustic dt=1.9s");
    ratios(
        &exp,
        &DtPolicy::CflDriven {
            cfl: 0.5,
            overrides: vec![(0, 21.69), (1, 21.69)],
        },
        "advective cfl=0.5",
    );
}
