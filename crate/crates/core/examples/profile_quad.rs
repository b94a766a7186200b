use gdm_core::exact::heat_irregular_case;
use gdm_core::experiments::{CaseId, ExperimentConfig};
use std::time::Instant;
use std::cell::Cell;
use gdm_core::quadrature;

fn main() {
    let cfg = ExperimentConfig::for_case(CaseId::IrregularInitial);
    let case = heat_irregular_case(cfg.final_time);
    let d = cfg.build_disc(31).unwrap();
    let grid = cfg.grid_for(31).unwrap();
    let t = grid.k();
    println!("t = {t:.6e}");
    let gphi = case.solution.gradient_profile(t).unwrap();
    // manual pass over the gradient cells with an eval counter
    let total = Cell::new(0usize);
    let t0 = Instant::now();
    for i in 0..d.grad_breaks().len() - 1 {
        let (a, b) = (d.grad_breaks()[i], d.grad_breaks()[i + 1]);
        let count = Cell::new(0usize);
        let _ = quadrature::integrate(|x| { count.set(count.get() + 1); gphi.eval(x) }, a, b, &gphi.breakpoints, 1e-10);
        total.set(total.get() + count.get());
        if count.get() > 1000 { println!("cell {i} ({a:.4},{b:.4}): {} evals", count.get()); }
    }
    println!("manual total evals {} in {:?}", total.get(), t0.elapsed());
}
