use blendsim::experiments::*;

// Balanced vortex: track perturbation growth and look at the spatial
// structure of the noise (checkerboard vs smooth acoustics).
fn main() {
    let exp = Experiment::new(Scenario::TravellingVortex).unwrap();
    let mut stepper = exp.stepper();
    stepper.hyper_coeff = std::env::var("HC").ok().and_then(|v| v.parse().ok()).unwrap_or(4.0);
    let mut s = exp.init_vortex((0.0, 0.0)).unwrap();
    let t_ref = exp.consts.h_ref / exp.consts.u_ref;
    let t_final = 300.0 / t_ref;
    let mut step = 0usize;
    while s.t < t_final {
        let cfl: f64 = std::env::var("CFL").ok().and_then(|v| v.parse().ok()).unwrap_or(0.45);
        let dt = stepper.compute_dt(&s, cfl).min(t_final - s.t);
        stepper.step(&mut s, dt).unwrap();
        step += 1;
        if step % (100 * ((0.45 / std::env::var("CFL").ok().and_then(|v| v.parse::<f64>().ok()).unwrap_or(0.45)) as usize).max(1)) == 0 {
            // high-pass P: difference from 4-neighbour average
            let (nz, nx) = (exp.grid.nz, exp.grid.nx);
            let mut hp_max: f64 = 0.0;
            let mut hp_rms = 0.0;
            let mut cb = 0.0; // checkerboard correlation
            for j in 0..nz {
                for i in 0..nx {
                    let jm = (j + nz - 1) % nz;
                    let jp = (j + 1) % nz;
                    let im = (i + nx - 1) % nx;
                    let ip = (i + 1) % nx;
                    let avg = 0.25
                        * (s.p[[jm, i]] + s.p[[jp, i]] + s.p[[j, im]] + s.p[[j, ip]]);
                    let hp = s.p[[j, i]] - avg;
                    hp_max = hp_max.max(hp.abs());
                    hp_rms += hp * hp;
                    let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                    cb += sign * hp;
                }
            }
            hp_rms = (hp_rms / (nx * nz) as f64).sqrt();
            let mpi = s.pi.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let pic = blendsim::ops::node_to_cell(&exp.grid, &s.pi);
            let msq = exp.consts.msq();
            let gm1 = exp.consts.gamma - 1.0;
            let mut mm: f64 = 0.0;
            let mut acc = 0.0;
            for (pv, piv) in s.p.iter().zip(pic.iter()) {
                let d = pv.powf(gm1) - 1.0 - msq * piv;
                mm = mm.max(d.abs());
                acc += d * d;
            }
            let eos_rms = (acc / s.p.len() as f64).sqrt();
            println!(
                "step {step} t={:.1}s  hpP max={:.3e} rms={:.3e} cb={:.3e}  max|pi|={:.3e} eos max={:.3e} rms={:.3e}",
                s.t * t_ref,
                hp_max,
                hp_rms,
                cb / (nx * nz) as f64,
                mpi, mm, eos_rms
            );
        }
    }
}
