use blendsim::experiments::*;
use blendsim::blend;
fn main() {
    let exp = Experiment::new(Scenario::TravellingVortex).unwrap();
    let stepper = exp.stepper();
    let balanced = exp.init_vortex((0.0, 0.0)).unwrap();
    let mut s = exp.init_vortex_imbalanced((0.0, 0.0)).unwrap();
    blend::to_psinc(&exp.grid, &exp.consts, &mut s).unwrap();
    let dt = stepper.compute_dt(&s, 0.45);
    let (_, pi_half) = stepper.step_with_half_pi(&mut s, dt).unwrap();
    let pi_full = s.pi.clone();
    // compare to balanced init pi (vortex moves <1 cell in one step)
    let l2 = |a: &ndarray::Array2<f64>| {
        let mut acc = 0.0;
        for (x, y) in a.iter().zip(balanced.pi.iter()) { acc += (x - y).powi(2); }
        (acc / a.len() as f64).sqrt()
    };
    let ref_rms = (balanced.pi.iter().map(|v| v*v).sum::<f64>() / balanced.pi.len() as f64).sqrt();
    println!("ref pi rms = {:.4e}", ref_rms);
    println!("err(pi_half) = {:.4e}  rel {:.3}", l2(&pi_half), l2(&pi_half)/ref_rms);
    println!("err(pi_full) = {:.4e}  rel {:.3}", l2(&pi_full), l2(&pi_full)/ref_rms);
    // also mean removed (gauge)
    let demean = |a: &ndarray::Array2<f64>| {
        let m = a.mean().unwrap(); a.mapv(|v| v - m)
    };
    let bd = demean(&balanced.pi);
    let l2d = |a: &ndarray::Array2<f64>| {
        let ad = demean(a);
        let mut acc = 0.0;
        for (x, y) in ad.iter().zip(bd.iter()) { acc += (x - y).powi(2); }
        (acc / ad.len() as f64).sqrt()
    };
    println!("demeaned err(pi_half) = {:.4e}", l2d(&pi_half));
    println!("demeaned err(pi_full) = {:.4e}", l2d(&pi_full));
}
