use gdm_core::exact::heat_irregular_case;
use gdm_core::experiments::{interpolant_trajectory, CaseId, ExperimentConfig};
use gdm_core::metrics::{self, MetricOptions};
use gdm_core::solver;
use std::time::Instant;

fn main() {
    let m: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(31);
    let cfg = ExperimentConfig::for_case(CaseId::IrregularInitial);
    let case = heat_irregular_case(cfg.final_time);
    let d = cfg.build_disc(m).unwrap();
    let grid = cfg.grid_for(m).unwrap();
    let spec = case.problem_spec();
    println!("M={m} N={}", grid.n_steps());
    let t0 = Instant::now();
    let sol = solver::solve(&d, &spec, &grid).unwrap();
    println!("solve: {:?}", t0.elapsed());
    let t0 = Instant::now();
    let res = solver::scheme_residual(&d, &spec, &grid, &sol).unwrap();
    println!("residual {res:.2e}: {:?}", t0.elapsed());
    let opts = MetricOptions::default();
    let t0 = Instant::now();
    let e1 = metrics::error_e1(&case.solution, &d, &grid, &sol, &opts).unwrap();
    println!("e1 {e1:.4e}: {:?}", t0.elapsed());
    let t0 = Instant::now();
    let e2 = metrics::error_e2(&case.solution, &d, &grid, &sol, &opts).unwrap();
    println!("e2 {e2:.4e}: {:?}", t0.elapsed());
    let t0 = Instant::now();
    let rg = metrics::riesz_gap(&case.solution, &d, &spec.weight, &grid, &sol, &opts).unwrap();
    println!("riesz {rg:.4e}: {:?}", t0.elapsed());
    let t0 = Instant::now();
    let interp = interpolant_trajectory(&case, &d, &grid).unwrap();
    println!("interpolant: {:?}", t0.elapsed());
    let t0 = Instant::now();
    let di = metrics::delta_t(&case.solution, &d, &spec.lambda, &spec.weight, &grid, &interp, &opts).unwrap();
    println!("delta_interp {di:.4e}: {:?}", t0.elapsed());
}
