use blendsim::blend::{self, BlendConfig, PiChoice};
use blendsim::diag;
use blendsim::experiments::*;

// Decompose the blended run's late-time probe error: how much of it is
// shared with the unblended compressible run (same-model radiation /
// drift), and how much is acoustic-frequency vs slow.
fn main() {
    let exp = Experiment::new(Scenario::RisingBubble).unwrap();
    let stepper = exp.stepper();
    let probes = [(-7.5e3, 5.0e3), (0.0, 5.0e3)];
    let t_final = 1000.0;
    let dt_s: f64 = std::env::var("DT").ok().and_then(|v| v.parse().ok()).unwrap_or(1.9);
    let policy = DtPolicy::Fixed { dt_s };
    let mut ps0 = exp.init_bubble(2.0).unwrap();
    blend::to_psinc(&exp.grid, &exp.consts, &mut ps0).unwrap();
    let psinc = run_single(&stepper, ps0, t_final, &policy, &probes, None).unwrap();
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
        let n = dref.len();
        let late = 7 * n / 10;
        let eb: Vec<f64> = (late..n).map(|i| db[i] - dref[i]).collect();
        let ec: Vec<f64> = (late..n).map(|i| dc[i] - dref[i]).collect();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let nrm = |a: &[f64]| dot(a, a).sqrt();
        let corr = dot(&eb, &ec) / (nrm(&eb) * nrm(&ec));
        // lag-1 autocorrelation of the blended error: near -1 means the
        // error alternates sign every step (acoustic at the step scale)
        let ac1 = dot(&eb[..eb.len() - 1], &eb[1..])
            / (nrm(&eb[..eb.len() - 1]) * nrm(&eb[1..]));
        let ac1c = dot(&ec[..ec.len() - 1], &ec[1..])
            / (nrm(&ec[..ec.len() - 1]) * nrm(&ec[1..]));
        // smooth component: 5-point moving average of the error
        let smooth: Vec<f64> = (2..eb.len() - 2)
            .map(|i| (eb[i - 2] + eb[i - 1] + eb[i] + eb[i + 1] + eb[i + 2]) / 5.0)
            .collect();
        println!(
            "probe {p}: late |eb|={:.4e} |ec|={:.4e} corr(eb,ec)={:.3} ac1(eb)={:.3} ac1(ec)={:.3} smooth/|eb|={:.3}",
            nrm(&eb) / (eb.len() as f64).sqrt(),
            nrm(&ec) / (ec.len() as f64).sqrt(),
            corr,
            ac1,
            ac1c,
            nrm(&smooth) / nrm(&eb[2..eb.len() - 2])
        );
    }
}
