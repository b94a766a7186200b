//! The error functionals: the space-time gradient error E1, the uniform-in-
//! time L error E2, the Riesz-derivative gap, the weighted distance combining
//! them, the conformity measure of a divergence-form flux, and least-squares
//! rate extraction.
//!
//! Two evaluation paths coexist. Solutions carrying the odd-harmonic series
//! use modal sums: spatial pairings against the discrete fields are exact
//! per mode, and time integration is either high-order Gauss with graded
//! subdivision near t = 0 (the default, used as the oracle) or termwise
//! exact exponentials (the fast path). Everything else integrates pointwise
//! profiles with fixed Gauss rules on the merged partitions.

use crate::discretisation::GradientDiscretisation;
use crate::error::{GdmError, Result};
use crate::exact::{
    field_sin_moments, gradient_cos_moments, gradient_pair_stationary, series_amplitude,
    series_rate, AnalyticSolution, HeatSeries,
};
use crate::field::{merge_breaks, PiecewiseField, PiecewiseGradient, SpaceFn, WeightOperator};
use crate::problem::{
    Diffusion, DiscreteSolution, FluxField, GeneralFlux, ProblemSpec, TimeGrid,
};
use crate::quadrature::{self, GAUSS4, GAUSS8};

/// Evaluation controls for the error functionals.
#[derive(Debug, Clone)]
pub struct MetricOptions {
    /// Relative quadrature target for the space-time integrals.
    pub rel_tol: f64,
    /// Interior Chebyshev samples per step for the uniform-in-time error.
    pub samples_per_step: usize,
    /// Termwise-exact time integration for modal solutions instead of the
    /// default graded Gauss quadrature.
    pub exact_time_integrals: bool,
    /// Graded-refinement levels (ratio 2) on the first step for solutions
    /// singular at t = 0; 20 levels reach k·1e-6.
    pub graded_levels: u32,
}

impl Default for MetricOptions {
    fn default() -> Self {
        MetricOptions {
            rel_tol: 1e-6,
            samples_per_step: 8,
            exact_time_integrals: false,
            graded_levels: 20,
        }
    }
}

/// The error functionals of one run, with the grid metadata.
#[derive(Debug, Clone)]
pub struct ErrorReport {
    pub mesh_m: usize,
    pub h: f64,
    pub k: f64,
    pub n_steps: usize,
    pub e1: f64,
    pub e2: f64,
    pub riesz_gap: f64,
    pub lambda_gap: f64,
    pub zeta_t: f64,
    pub delta_t: f64,
}

// ---------------------------------------------------------------------------
// modal path (odd-harmonic series reference)
// ---------------------------------------------------------------------------

/// Mode cutoff for sums Σ c_p e^{−λ_p t}·pair_p with |pair_p| ≤ pair_scale.
fn cross_cutoff(t: f64, pair_scale: f64) -> usize {
    HeatSeries::mode_cutoff(t, 1e-13 / (1.0 + pair_scale), 8.0)
}

/// ∫ over (t0, t1) of ‖∂ₓu(t)‖², closed form via the energy identity:
/// ½(‖u(t0)‖² − ‖u(t1)‖²).
fn grad_energy_integral(t0: f64, t1: f64) -> f64 {
    0.5 * (HeatSeries::norm_l_sq(t0) - HeatSeries::norm_l_sq(t1))
}

/// Antiderivative sum A(t) = Σ c_p pair_p e^{−λ_p t}/λ_p, so the termwise
/// exact cross integral over (t0, t1) is A(t0) − A(t1). At t = 0 the sum is
/// the exact pairing with the gradient of x(1−x)/2 (the stationary limit),
/// avoiding a slowly convergent series.
fn cross_antiderivative(t: f64, pair: &[f64], stationary: f64) -> f64 {
    if t <= 0.0 {
        return stationary;
    }
    let pmax = cross_cutoff(t, 1.0).min(pair.len() - 1);
    (0..=pmax)
        .map(|p| series_amplitude(p) * pair[p] * (-series_rate(p) * t).exp() / series_rate(p))
        .sum()
}

fn cross_time_integral(t0: f64, t1: f64, pair: &[f64], stationary: f64) -> f64 {
    cross_antiderivative(t0, pair, stationary) - cross_antiderivative(t1, pair, stationary)
}

/// ⟨∂ₓu(t), g⟩ at a fixed t from precomputed pairings.
fn cross_at(t: f64, pair: &[f64]) -> f64 {
    let pmax = cross_cutoff(t, 1.0).min(pair.len() - 1);
    (0..=pmax)
        .map(|p| series_amplitude(p) * pair[p] * (-series_rate(p) * t).exp())
        .sum()
}

/// ∫₀ᵀ ‖sign·∂ₓu(t) − g_m(t)‖² dt for the series solution against the
/// per-step constant gradient fields.
fn modal_gap_sq(
    grid: &TimeGrid,
    mut step_field: impl FnMut(usize) -> Result<PiecewiseGradient>,
    sign: f64,
    opts: &MetricOptions,
) -> Result<f64> {
    let k = grid.k();
    let mut total = 0.0;
    for m in 1..=grid.n_steps() {
        let (t0, t1) = grid.step_bounds(m);
        let g = step_field(m)?;
        let gnorm = g.norm_sq();
        let pair_scale: f64 = 2.0 * g.values().iter().map(|v| v.abs()).sum::<f64>();
        let floor = k * 1e-6;
        // the exact path only evaluates exponentials at step endpoints, so
        // the first step needs modes down to t1 rather than the graded floor
        let t_min = if m > 1 {
            t0
        } else if opts.exact_time_integrals {
            t1
        } else {
            floor
        };
        let pmax = cross_cutoff(t_min, pair_scale);
        let pair = gradient_cos_moments(&g, pmax);
        let stationary = gradient_pair_stationary(&g);

        if opts.exact_time_integrals {
            total += grad_energy_integral(t0, t1)
                - 2.0 * sign * cross_time_integral(t0, t1, &pair, stationary)
                + (t1 - t0) * gnorm;
            continue;
        }
        let integrand = |t: f64| -> f64 {
            HeatSeries::grad_norm_sq(t) - 2.0 * sign * cross_at(t, &pair) + gnorm
        };
        if m == 1 {
            // exact below the graded floor, ratio-2 panels above it
            let s_bot = t1 * 2f64.powi(-(opts.graded_levels as i32));
            total += grad_energy_integral(0.0, s_bot)
                - 2.0 * sign * cross_time_integral(0.0, s_bot, &pair, stationary)
                + s_bot * gnorm;
            let mut lo = s_bot;
            for level in (0..opts.graded_levels).rev() {
                let hi = t1 * 2f64.powi(-(level as i32));
                total += quadrature::fixed_rule(&GAUSS8, lo, hi, integrand);
                lo = hi;
            }
        } else {
            total += quadrature::fixed_rule(&GAUSS8, t0, t1, integrand);
        }
    }
    Ok(total.max(0.0))
}

// ---------------------------------------------------------------------------
// pointwise path (analytic profiles)
// ---------------------------------------------------------------------------

/// ∫ w(x)·(profile(x) − g(x))² over the merged partition by per-piece Gauss.
fn weighted_profile_gap_sq(
    g: &PiecewiseGradient,
    profile: &SpaceFn,
    weight: Option<&WeightOperator>,
) -> f64 {
    let mut breaks = merge_breaks(g.breaks(), &profile.breakpoints);
    if let Some(w) = weight {
        breaks = merge_breaks(&breaks, w.breaks());
    }
    let mut acc = 0.0;
    for win in breaks.windows(2) {
        let (a, b) = (win[0], win[1]);
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let gval = g.eval(mid);
        let wval = weight.map_or(1.0, |w| w.eval(mid));
        for &(xi, wq) in &GAUSS4 {
            let x = mid + half * xi;
            let dgap = profile.eval(x) - gval;
            acc += wq * half * wval * dgap * dgap;
        }
    }
    acc
}

struct PointwiseGap<'a> {
    profile_at: Box<dyn Fn(f64) -> Result<SpaceFn> + 'a>,
    weight_at: Option<Box<dyn Fn(f64) -> WeightOperator + 'a>>,
}

fn pointwise_gap_sq(
    grid: &TimeGrid,
    mut step_field: impl FnMut(usize) -> Result<PiecewiseGradient>,
    gap: &PointwiseGap<'_>,
) -> Result<f64> {
    let mut total = 0.0;
    for m in 1..=grid.n_steps() {
        let (t0, t1) = grid.step_bounds(m);
        let g = step_field(m)?;
        let mid = 0.5 * (t0 + t1);
        let half = 0.5 * (t1 - t0);
        let mut step = 0.0;
        for &(xi, wq) in &GAUSS8 {
            let t = mid + half * xi;
            let profile = (gap.profile_at)(t)?;
            let w = gap.weight_at.as_ref().map(|f| f(t));
            step += wq * half * weighted_profile_gap_sq(&g, &profile, w.as_ref());
        }
        total += step;
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// public error functionals
// ---------------------------------------------------------------------------

/// E1 = ‖∂ₓu − G_h w‖ over (0,T)×Ω.
pub fn error_e1(
    u: &AnalyticSolution,
    d: &GradientDiscretisation,
    grid: &TimeGrid,
    sol: &DiscreteSolution,
    opts: &MetricOptions,
) -> Result<f64> {
    let field = |m: usize| d.reconstruct_gradient(sol.slice(m));
    let sq = if u.modal {
        modal_gap_sq(grid, field, 1.0, opts)?
    } else {
        let gapspec = PointwiseGap {
            profile_at: Box::new(|t| u.gradient_profile(t)),
            weight_at: None,
        };
        pointwise_gap_sq(grid, field, &gapspec)?
    };
    Ok(sq.max(0.0).sqrt())
}

/// E2 = max over {0} and sampled t in each step of ‖u(t) − P_h w(t)‖.
/// Sampling is monotone in `samples_per_step` (Chebyshev nodes plus both
/// step endpoints); solutions singular at t = 0 get geometric refinement of
/// the first step.
pub fn error_e2(
    u: &AnalyticSolution,
    d: &GradientDiscretisation,
    grid: &TimeGrid,
    sol: &DiscreteSolution,
    opts: &MetricOptions,
) -> Result<f64> {
    if opts.samples_per_step < 2 {
        return Err(GdmError::InvalidConfig(
            "uniform-error sampling needs at least 2 samples per step".into(),
        ));
    }
    let mut worst: f64 = 0.0;
    // t = 0 against the initial slice
    let f0 = d.reconstruct_function(sol.slice(0))?;
    let at_zero = if u.modal {
        // ‖1 − v‖² = 1 − 2∫v + ‖v‖², exact for the unit datum
        1.0 - 2.0 * f0.integral() + f0.norm_sq()
    } else {
        field_diff_sq(&f0, &u.value_profile(0.0))
    };
    worst = worst.max(at_zero.max(0.0));

    for m in 1..=grid.n_steps() {
        let (t0, t1) = grid.step_bounds(m);
        let field = d.reconstruct_function(sol.slice(m))?;
        let mut ts = quadrature::chebyshev_points(t0, t1, opts.samples_per_step);
        ts.push(t1);
        if m == 1 && u.grad_singular_at_zero {
            for level in 1..=opts.graded_levels {
                ts.push(t1 * 2f64.powi(-(level as i32)));
            }
        }
        if u.modal {
            let t_min = ts.iter().copied().fold(f64::INFINITY, f64::min);
            let scale = field.integral().abs() + field.norm_sq().sqrt();
            let pmax = HeatSeries::mode_cutoff(t_min, 1e-13 / (1.0 + scale), series_amplitude(0));
            let moments = field_sin_moments(&field, pmax);
            let fnorm = field.norm_sq();
            for &t in &ts {
                let pcut = HeatSeries::mode_cutoff(t, 1e-13 / (1.0 + scale), series_amplitude(0))
                    .min(pmax);
                let cross: f64 = (0..=pcut)
                    .map(|p| {
                        series_amplitude(p) * moments[p] * (-series_rate(p) * t).exp()
                    })
                    .sum();
                let sq = HeatSeries::norm_l_sq(t) - 2.0 * cross + fnorm;
                worst = worst.max(sq.max(0.0));
            }
        } else {
            for &t in &ts {
                let sq = field_diff_sq(&field, &u.value_profile(t));
                worst = worst.max(sq.max(0.0));
            }
        }
    }
    Ok(worst.sqrt())
}

/// ∫ (field − f)² by per-piece Gauss on the merged partition; exact cellwise
/// for the field part, high order against the smooth profile pieces.
fn field_diff_sq(field: &PiecewiseField, f: &SpaceFn) -> f64 {
    let breaks = merge_breaks(field.breaks(), &f.breakpoints);
    let mut acc = 0.0;
    for win in breaks.windows(2) {
        let (a, b) = (win[0], win[1]);
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        for &(xi, wq) in &GAUSS4 {
            let x = mid + half * xi;
            let dgap = field.eval(x) - f.eval(x);
            acc += wq * half * dgap * dgap;
        }
    }
    acc
}

/// ‖S^{1/2}(∂ₓ(R u′) − G_h R_h ∂w)‖ over (0,T)×Ω: the discrete side applies
/// the factored Riesz operator to each discrete derivative slice.
pub fn riesz_gap(
    u: &AnalyticSolution,
    d: &GradientDiscretisation,
    s: &WeightOperator,
    grid: &TimeGrid,
    sol: &DiscreteSolution,
    opts: &MetricOptions,
) -> Result<f64> {
    let riesz = d.riesz_operator(s)?;
    let deriv = sol.derivative();
    let field = |m: usize| d.reconstruct_gradient(&riesz.apply(&deriv[m - 1]));
    let sq = if u.modal {
        if !s.is_identity() {
            return Err(GdmError::InvalidConfig(
                "modal Riesz gap supports the identity weight only".into(),
            ));
        }
        modal_gap_sq(grid, field, -1.0, opts)?
    } else {
        let gapspec = PointwiseGap {
            profile_at: Box::new(|t| Ok(u.riesz_profile(t))),
            weight_at: Some(Box::new(|_t| s.clone())),
        };
        pointwise_gap_sq(grid, field, &gapspec)?
    };
    Ok(sq.max(0.0).sqrt())
}

/// ‖S^{−1/2}Λ(∂ₓu − G_h w)‖ over (0,T)×Ω. With Λ = S = Id this equals E1.
pub fn lambda_gap(
    u: &AnalyticSolution,
    d: &GradientDiscretisation,
    lambda: &Diffusion,
    s: &WeightOperator,
    grid: &TimeGrid,
    sol: &DiscreteSolution,
    opts: &MetricOptions,
) -> Result<f64> {
    let trivial = matches!(lambda, Diffusion::Constant(c) if *c == 1.0) && s.is_identity();
    if trivial {
        return error_e1(u, d, grid, sol, opts);
    }
    if u.modal {
        return Err(GdmError::InvalidConfig(
            "modal weighted gradient gap requires Λ = S = Id".into(),
        ));
    }
    let grad_breaks = d.grad_breaks().to_vec();
    let cells = d.grad_cell_count();
    let s_cells = d.weight_on_grad_cells(s);
    let field = |m: usize| d.reconstruct_gradient(sol.slice(m));
    let gapspec = PointwiseGap {
        profile_at: Box::new(|t| u.gradient_profile(t)),
        weight_at: Some(Box::new(move |t| {
            let lam = lambda.cells_at(t, cells).expect("diffusion cells");
            let w: Vec<f64> = lam
                .iter()
                .zip(&s_cells)
                .map(|(l, sv)| l * l / sv)
                .collect();
            WeightOperator::cellwise(grad_breaks.clone(), w).expect("positive weight")
        })),
    };
    Ok(pointwise_gap_sq(grid, field, &gapspec)?.max(0.0).sqrt())
}

/// The divergence-form flux induced by a solution and problem data:
/// S·∂ₓ(R u′) + Λ·∂ₓu + F, with divergence partner −f.
pub fn flux_v(
    u: &AnalyticSolution,
    spec: &ProblemSpec,
    d: &GradientDiscretisation,
) -> FluxField {
    let uu = u.clone();
    let spec_v = spec.clone();
    let grad_breaks = d.grad_breaks().to_vec();
    let cells = d.grad_cell_count();
    let mut x_breaks = merge_breaks(&u.x_breakpoints, &grad_breaks);
    for (_, g) in &spec.flux_source.terms {
        x_breaks = merge_breaks(&x_breaks, &g.breakpoints);
    }
    let value = {
        let u = uu.clone();
        let spec = spec_v.clone();
        let gb = grad_breaks.clone();
        move |t: f64, x: f64| -> f64 {
            let cell = gb.partition_point(|&b| b <= x).saturating_sub(1).min(cells - 1);
            let lam = spec.lambda.cells_at(t, cells).expect("diffusion cells")[cell];
            let sw = spec.weight.eval(x);
            sw * u.riesz_derivative_gradient(t, x)
                + lam * u.gradient(t, x).unwrap_or(f64::NAN)
                + spec.flux_source.eval(t, x)
        }
    };
    let spec_d = spec.clone();
    let divergence = move |t: f64, x: f64| -spec_d.source.eval(t, x);
    FluxField {
        terms: Vec::new(),
        general: Some(GeneralFlux {
            value: std::sync::Arc::new(value),
            divergence: std::sync::Arc::new(divergence),
            x_breakpoints: x_breaks,
            time_constant: false,
        }),
    }
}

/// The conformity measure of a flux over the piecewise-constant-in-time test
/// space: per step, the Riesz representative r of the averaged pairing
/// ⟨v̄, G z⟩ + ⟨div v̄, P z⟩ is solved in the S-weighted gradient inner
/// product, and ζ² = Σ k‖r‖²; per-step averaging realizes the supremum
/// exactly because the test functions are constant on each step.
pub fn zeta_t(
    flux: &FluxField,
    d: &GradientDiscretisation,
    s: &WeightOperator,
    grid: &TimeGrid,
) -> Result<f64> {
    if flux.is_zero() {
        return Ok(0.0);
    }
    let riesz = d.riesz_operator(s)?;
    let n = d.dof_count();
    let k = grid.k();

    // separable terms: spatial pairings once, time averages per step
    let term_pairs: Vec<Vec<f64>> = flux
        .terms
        .iter()
        .map(|term| {
            let mut p = d.pair_gradient(&term.space);
            let pdiv = d.pair_function(&term.space_div);
            for (a, b) in p.iter_mut().zip(&pdiv) {
                *a += b;
            }
            p
        })
        .collect();

    let mut total = 0.0;
    let mut cached_general: Option<Vec<f64>> = None;
    for m in 1..=grid.n_steps() {
        let (t0, t1) = grid.step_bounds(m);
        let mut rhs = vec![0.0; n];
        for (term, pairs) in flux.terms.iter().zip(&term_pairs) {
            let avg = term.time.mean_over(t0, t1);
            crate::linalg::axpy(&mut rhs, avg, pairs);
        }
        if let Some(gen) = &flux.general {
            let reuse = gen.time_constant && cached_general.is_some();
            let pairs = if reuse {
                cached_general.clone().unwrap()
            } else {
                let mid = 0.5 * (t0 + t1);
                let half = 0.5 * (t1 - t0);
                let vbar = {
                    let g = gen.clone();
                    SpaceFn::with_breaks(
                        move |x| {
                            GAUSS8
                                .iter()
                                .map(|&(xi, wq)| 0.5 * wq * (g.value)(mid + half * xi, x))
                                .sum()
                        },
                        gen.x_breakpoints.clone(),
                    )
                };
                let dbar = {
                    let g = gen.clone();
                    SpaceFn::with_breaks(
                        move |x| {
                            GAUSS8
                                .iter()
                                .map(|&(xi, wq)| 0.5 * wq * (g.divergence)(mid + half * xi, x))
                                .sum()
                        },
                        gen.x_breakpoints.clone(),
                    )
                };
                let mut p = d.pair_gradient_tol(&vbar, 1e-9);
                let pdiv = d.pair_function_tol(&dbar, 1e-9);
                for (a, b) in p.iter_mut().zip(&pdiv) {
                    *a += b;
                }
                if gen.time_constant {
                    cached_general = Some(p.clone());
                }
                p
            };
            crate::linalg::axpy(&mut rhs, 1.0, &pairs);
        }
        let r = riesz.represent(&rhs);
        total += k * crate::linalg::dot(&r, &rhs);
    }
    Ok(total.max(0.0).sqrt())
}

/// Least-squares slope of log E against log h.
pub fn convergence_rate(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(GdmError::RateExtraction(
            "at least 3 points are required".into(),
        ));
    }
    for &(h, e) in points {
        if !(h > 0.0) || !(e > 0.0) {
            return Err(GdmError::RateExtraction(format!(
                "nonpositive sample (h={h}, E={e})"
            )));
        }
    }
    let mut hs: Vec<f64> = points.iter().map(|p| p.0).collect();
    hs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if hs.windows(2).any(|w| w[0] == w[1]) {
        return Err(GdmError::RateExtraction("mesh sizes must be distinct".into()));
    }
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(h, e) in points {
        let (x, y) = (h.ln(), e.ln());
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    Ok((n * sxy - sx * sy) / (n * sxx - sx * sx))
}

/// All error functionals of one run against a manufactured case.
pub fn error_report(
    case: &crate::exact::CaseData,
    d: &GradientDiscretisation,
    spec: &ProblemSpec,
    grid: &TimeGrid,
    sol: &DiscreteSolution,
    mesh_m: usize,
    opts: &MetricOptions,
) -> Result<ErrorReport> {
    let u = &case.solution;
    let e1 = error_e1(u, d, grid, sol, opts)?;
    let e2 = error_e2(u, d, grid, sol, opts)?;
    let rg = riesz_gap(u, d, &spec.weight, grid, sol, opts)?;
    let lg = lambda_gap(u, d, &spec.lambda, &spec.weight, grid, sol, opts)?;
    let zt = zeta_t(&case.flux, d, &spec.weight, grid)?;
    Ok(ErrorReport {
        mesh_m,
        h: 1.0 / (mesh_m as f64 + 1.0),
        k: grid.k(),
        n_steps: grid.n_steps(),
        e1,
        e2,
        riesz_gap: rg,
        lambda_gap: lg,
        zeta_t: zt,
        delta_t: rg + lg + e2,
    })
}

/// The weighted space-time distance δ between an exact solution and an
/// arbitrary discrete trajectory: Riesz-derivative gap + weighted gradient
/// gap + uniform-in-time L gap.
pub fn delta_t(
    u: &AnalyticSolution,
    d: &GradientDiscretisation,
    lambda: &Diffusion,
    s: &WeightOperator,
    grid: &TimeGrid,
    sol: &DiscreteSolution,
    opts: &MetricOptions,
) -> Result<f64> {
    let rg = riesz_gap(u, d, s, grid, sol, opts)?;
    let lg = lambda_gap(u, d, lambda, s, grid, sol, opts)?;
    let e2 = error_e2(u, d, grid, sol, opts)?;
    Ok(rg + lg + e2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builders::build_cvfe;
    use crate::exact::{heat_irregular_case, periodic_case, tent_case};
    use crate::solver;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn zero_solution(d: &GradientDiscretisation, grid: TimeGrid) -> DiscreteSolution {
        DiscreteSolution::new(
            vec![vec![0.0; d.dof_count()]; grid.n_steps() + 1],
            grid,
        )
        .unwrap()
    }

    #[test]
    fn e1_zero_solution_tent_closed_form() {
        // sol ≡ 0 → E1² = ∫₀ᵀ‖∂ₓu(t)‖² dt = ∫ t² dt = T³/3 for the tent
        let case = tent_case(0.1);
        let d = build_cvfe(5).unwrap();
        let grid = TimeGrid::new(4, 0.1).unwrap();
        let sol = zero_solution(&d, grid);
        let opts = MetricOptions::default();
        let e1 = error_e1(&case.solution, &d, &grid, &sol, &opts).unwrap();
        let expect = (0.1_f64.powi(3) / 3.0).sqrt();
        assert_relative_eq!(e1, expect, max_relative = 1e-9);
    }

    #[test]
    fn e1_case1_zero_solution_matches_energy_identity() {
        // sol ≡ 0: E1² = ∫‖∂ₓu‖² = ½(‖ξ0‖² − ‖u(T)‖²) by the energy identity
        let case = heat_irregular_case(0.01);
        let d = build_cvfe(3).unwrap();
        let grid = TimeGrid::new(8, 0.01).unwrap();
        let sol = zero_solution(&d, grid);
        let opts = MetricOptions::default();
        let e1 = error_e1(&case.solution, &d, &grid, &sol, &opts).unwrap();
        let expect = (0.5 * (1.0 - HeatSeries::norm_l_sq(0.01))).sqrt();
        assert_relative_eq!(e1, expect, max_relative = 1e-7);
        // fast path agrees with the quadrature default
        let fast = MetricOptions {
            exact_time_integrals: true,
            ..MetricOptions::default()
        };
        let e1f = error_e1(&case.solution, &d, &grid, &sol, &fast).unwrap();
        assert_relative_eq!(e1, e1f, max_relative = 1e-9);
    }

    #[test]
    fn e1_tent_interpolant_is_time_sampling_error() {
        // slices w^m = u(mk) nodal values (odd M puts the kink on a node):
        // ∂ₓu − G_h w = (t − mk)·∂ₓφ on step m, so E1 = k·sqrt(T/3)
        let case = tent_case(0.1);
        let m = 7usize;
        let d = build_cvfe(m).unwrap();
        let grid = TimeGrid::new(16, 0.1).unwrap();
        let h = 1.0 / (m as f64 + 1.0);
        let k = grid.k();
        let slices: Vec<Vec<f64>> = (0..=16)
            .map(|step| {
                (1..=m)
                    .map(|i| (step as f64 * k) * (i as f64 * h).min(1.0 - i as f64 * h))
                    .collect()
            })
            .collect();
        let sol = DiscreteSolution::new(slices, grid).unwrap();
        let opts = MetricOptions::default();
        let e1 = error_e1(&case.solution, &d, &grid, &sol, &opts).unwrap();
        let expect = k * (0.1_f64 / 3.0).sqrt();
        assert_relative_eq!(e1, expect, max_relative = 1e-8);
    }

    #[test]
    fn e2_zero_and_monotone_in_sampling() {
        let case = tent_case(0.1);
        let d = build_cvfe(5).unwrap();
        let grid = TimeGrid::new(6, 0.1).unwrap();
        let spec = case.problem_spec();
        let sol = solver::solve(&d, &spec, &grid).unwrap();
        let mut prev = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for s in [2usize, 4, 8, 16] {
            let opts = MetricOptions {
                samples_per_step: s,
                ..MetricOptions::default()
            };
            let e2 = error_e2(&case.solution, &d, &grid, &sol, &opts).unwrap();
            assert!(e2 >= prev * (1.0 - 1e-12), "E2 not monotone in sampling");
            prev = e2;
            let _ = rng.gen::<f64>();
        }
        assert!(prev > 0.0);
    }

    #[test]
    fn case1_initial_mismatch_is_boundary_cells() {
        // projection of the unit datum reproduces 1 on the dof cells; the
        // two boundary half-cells carry the value 0, so the t = 0 error is
        // exactly √h
        let case = heat_irregular_case(0.005);
        let m = 15usize;
        let d = build_cvfe(m).unwrap();
        let grid = TimeGrid::new(4, 0.005).unwrap();
        let spec = case.problem_spec();
        let sol = solver::solve(&d, &spec, &grid).unwrap();
        let opts = MetricOptions::default();
        let e2 = error_e2(&case.solution, &d, &grid, &sol, &opts).unwrap();
        let h = 1.0 / (m as f64 + 1.0);
        assert!(e2 >= h.sqrt() * (1.0 - 1e-10), "E2 = {e2} < sqrt(h)");
    }

    #[test]
    fn riesz_gap_equals_e1_for_case1() {
        let case = heat_irregular_case(0.02);
        let d = build_cvfe(7).unwrap();
        let grid = TimeGrid::new(32, 0.02).unwrap();
        let spec = case.problem_spec();
        let sol = solver::solve(&d, &spec, &grid).unwrap();
        let opts = MetricOptions::default();
        let e1 = error_e1(&case.solution, &d, &grid, &sol, &opts).unwrap();
        let rg = riesz_gap(&case.solution, &d, &spec.weight, &grid, &sol, &opts).unwrap();
        assert_relative_eq!(e1, rg, max_relative = 1e-6);
        // and the weighted gradient gap collapses to E1 for Λ = S = Id
        let lg = lambda_gap(
            &case.solution,
            &d,
            &spec.lambda,
            &spec.weight,
            &grid,
            &sol,
            &opts,
        )
        .unwrap();
        assert_relative_eq!(lg, e1, max_relative = 1e-12);
    }

    #[test]
    fn riesz_gap_zero_for_zero_data() {
        let case = tent_case(0.1);
        let d = build_cvfe(4).unwrap();
        let grid = TimeGrid::new(3, 0.1).unwrap();
        let sol = zero_solution(&d, grid);
        // compare against the zero reference directly: use the tent case with
        // amplitude scaled to zero via a zero trajectory + zero u handled by
        // the periodic constructor is awkward; instead check the discrete
        // side alone: R_h ∂0 = 0 so the gap equals ‖∂ₓ(R u′)‖
        let opts = MetricOptions::default();
        let rg = riesz_gap(
            &case.solution,
            &d,
            &WeightOperator::identity(),
            &grid,
            &sol,
            &opts,
        )
        .unwrap();
        let expect_sq = quadrature::integrate(
            |x| {
                let v = crate::exact::tent_riesz_grad(x);
                v * v
            },
            0.0,
            1.0,
            &[0.5],
            1e-12,
        ) * 0.1;
        assert_relative_eq!(rg, expect_sq.sqrt(), max_relative = 1e-7);
    }

    #[test]
    fn zeta_vanishes_for_zero_flux_and_conforming() {
        let d = build_cvfe(9).unwrap();
        let grid = TimeGrid::new(4, 0.1).unwrap();
        let s = WeightOperator::identity();
        assert_eq!(zeta_t(&FluxField::zero(), &d, &s, &grid).unwrap(), 0.0);

        // conforming instance against a smooth polynomial flux
        let p1 = crate::builders::build_p1(9).unwrap();
        let flux = FluxField::separable(vec![crate::problem::FluxTerm {
            time: crate::problem::TimeCoeff::Constant(1.0),
            space: SpaceFn::new(|x: f64| x * (1.0 - x)),
            space_div: SpaceFn::new(|x: f64| 1.0 - 2.0 * x),
        }]);
        let z = zeta_t(&flux, &p1, &s, &grid).unwrap();
        assert!(z <= 1e-9, "conforming conformity measure {z}");
    }

    #[test]
    fn zeta_cvfe_tent_flux_positive_decreasing_and_dominates_sampling() {
        let s = WeightOperator::identity();
        let grid = TimeGrid::new(4, 0.1).unwrap();
        let case = tent_case(0.1);
        let mut prev = f64::INFINITY;
        for m in [7usize, 15, 31] {
            let d = build_cvfe(m).unwrap();
            let z = zeta_t(&case.flux, &d, &s, &grid).unwrap();
            assert!(z > 0.0 && z < prev, "zeta {z} not decreasing");
            prev = z;

            // brute-force sampled supremum from random test elements is a
            // lower bound for the exact dual-norm value
            let mut rng = ChaCha8Rng::seed_from_u64(m as u64);
            let k = grid.k();
            let mut best = 0.0f64;
            for _ in 0..200 {
                let mut num = 0.0;
                let mut den = 0.0;
                for step in 1..=grid.n_steps() {
                    let (t0, t1) = grid.step_bounds(step);
                    let v: Vec<f64> = (0..m).map(|_| rng.gen::<f64>() - 0.5).collect();
                    let gv = d.reconstruct_gradient(&v).unwrap();
                    let pv = d.reconstruct_function(&v).unwrap();
                    let tmid = 0.5 * (t0 + t1);
                    let pair = gv.inner_fn(
                        &SpaceFn::with_breaks(
                            {
                                let fx = case.flux.clone();
                                move |x| fx.value(tmid, x)
                            },
                            vec![0.5],
                        ),
                        1e-9,
                    ) + pv.inner_fn(
                        &SpaceFn::with_breaks(
                            {
                                let fx = case.flux.clone();
                                move |x| fx.divergence(tmid, x)
                            },
                            vec![0.5],
                        ),
                        1e-9,
                    );
                    num += k * pair;
                    den += k * gv.norm_sq();
                }
                if den > 0.0 {
                    best = best.max(num.abs() / den.sqrt());
                }
            }
            assert!(
                z >= best * (1.0 - 1e-9),
                "exact value {z} below sampled sup {best}"
            );
        }
    }

    #[test]
    fn flux_v_matches_case_fluxes() {
        let d = build_cvfe(7).unwrap();
        for case in [tent_case(0.1), periodic_case(0.1, 1.0)] {
            let spec = case.problem_spec();
            let vf = flux_v(&case.solution, &spec, &d);
            for &t in &[0.02, 0.07] {
                for &x in &[0.2, 0.45, 0.8] {
                    assert_relative_eq!(
                        vf.value(t, x),
                        case.flux.value(t, x),
                        max_relative = 1e-10,
                        epsilon = 1e-12
                    );
                    assert_relative_eq!(
                        vf.divergence(t, x),
                        case.flux.divergence(t, x),
                        max_relative = 1e-12,
                        epsilon = 1e-14
                    );
                }
            }
        }
    }

    #[test]
    fn zeta_general_flux_agrees_with_separable() {
        let d = build_cvfe(7).unwrap();
        let grid = TimeGrid::new(3, 0.1).unwrap();
        let s = WeightOperator::identity();
        let case = tent_case(0.1);
        let spec = case.problem_spec();
        let z_sep = zeta_t(&case.flux, &d, &s, &grid).unwrap();
        let z_gen = zeta_t(&flux_v(&case.solution, &spec, &d), &d, &s, &grid).unwrap();
        assert_relative_eq!(z_sep, z_gen, max_relative = 1e-6, epsilon = 1e-10);
    }

    #[test]
    fn rate_extraction() {
        let pts: Vec<(f64, f64)> = [0.5, 0.25, 0.125].iter().map(|&h| (h, h)).collect();
        assert_relative_eq!(convergence_rate(&pts).unwrap(), 1.0, max_relative = 1e-12);
        let pts: Vec<(f64, f64)> = [0.5, 0.25, 0.125]
            .iter()
            .map(|&h: &f64| (h, h.sqrt()))
            .collect();
        assert_relative_eq!(convergence_rate(&pts).unwrap(), 0.5, max_relative = 1e-12);
        assert!(convergence_rate(&[(0.5, 1.0), (0.25, 0.5)]).is_err());
        assert!(convergence_rate(&[(0.5, 1.0), (0.25, 0.5), (0.125, 0.0)]).is_err());
        assert!(convergence_rate(&[(0.5, 1.0), (0.5, 0.5), (0.125, 0.2)]).is_err());
    }
}
