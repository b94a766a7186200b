use gdm_core::exact::heat_irregular_case;
use gdm_core::experiments::{CaseId, ExperimentConfig};
use gdm_core::interp;
use std::time::Instant;

fn main() {
    let m: usize = 31;
    let cfg = ExperimentConfig::for_case(CaseId::IrregularInitial);
    let case = heat_irregular_case(cfg.final_time);
    let d = cfg.build_disc(m).unwrap();
    let grid = cfg.grid_for(m).unwrap();
    let k = grid.k();
    for slice in [1usize, 2, 5, 20, 80] {
        let t = slice as f64 * k;
        let phi = case.solution.value_profile(t);
        let gphi = case.solution.gradient_profile(t).unwrap();
        let t0 = Instant::now();
        let pf = d.pair_function(&phi);
        let t1 = t0.elapsed();
        let t0 = Instant::now();
        let pg = d.pair_gradient(&gphi);
        let t2 = t0.elapsed();
        let t0 = Instant::now();
        let _v = interp::interpolate(&d, &phi, &gphi).unwrap();
        let t3 = t0.elapsed();
        println!("slice {slice}: pair_fn {t1:?} pair_grad {t2:?} interpolate {t3:?}  ({:.3e},{:.3e})", pf[0], pg[0]);
    }
}
