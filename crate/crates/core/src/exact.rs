//! Exact and manufactured solutions with controlled evaluation error: the
//! odd-harmonic heat series for a unit initial datum, the tent solution with
//! an irregular right-hand side, and a time-periodic manufactured case.

use crate::error::{GdmError, Result};
use crate::field::{PiecewiseField, PiecewiseGradient, SpaceFn};
use crate::problem::{FluxField, FluxTerm, SpaceTimeFn, TimeBoundaryOp, TimeCoeff};
use crate::quadrature;
use std::f64::consts::PI;
use std::sync::Arc;

/// The heat solution with unit initial datum on (0, 1): odd harmonics
/// sin((2p+1)πx) with amplitudes 4/((2p+1)π) and decay rates ((2p+1)π)².
/// All evaluators choose the truncation index per call from a geometric
/// tail majorant; nothing is summed at t = 0, where the datum itself is
/// returned.
pub struct HeatSeries;

#[inline]
pub fn series_amplitude(p: usize) -> f64 {
    4.0 / ((2 * p + 1) as f64 * PI)
}

#[inline]
pub fn series_rate(p: usize) -> f64 {
    let n = (2 * p + 1) as f64 * PI;
    n * n
}

impl HeatSeries {
    /// Smallest index P such that `amp · e^{−λ_{P+1} t} / (1 − r) < eps`
    /// with `r = e^{−8(P+2)π²t}` the geometric ratio bound; the gaps
    /// λ_{p+1} − λ_p = 8(p+1)π² grow, so the tail is dominated by this
    /// geometric series. Quadrature evaluates whole profiles at a fixed t,
    /// so the last query is memoized per thread.
    pub fn mode_cutoff(t: f64, eps: f64, amp: f64) -> usize {
        assert!(t > 0.0, "mode cutoff needs t > 0");
        thread_local! {
            static LAST: std::cell::Cell<(u64, u64, u64, usize)> =
                const { std::cell::Cell::new((0, 0, 0, 0)) };
        }
        let key = (t.to_bits(), eps.to_bits(), amp.to_bits());
        let cached = LAST.with(|c| c.get());
        if (cached.0, cached.1, cached.2) == key {
            return cached.3;
        }
        let mut p = 0usize;
        loop {
            if Self::tail_majorant(t, p, amp) < eps || p > 80_000_000 {
                LAST.with(|c| c.set((key.0, key.1, key.2, p)));
                return p;
            }
            p = if p < 64 { p + 1 } else { p + p / 4 };
        }
    }

    pub fn tail_majorant(t: f64, p: usize, amp: f64) -> f64 {
        let r = (-8.0 * (p + 2) as f64 * PI * PI * t).exp();
        amp * (-series_rate(p + 1) * t).exp() / (1.0 - r).max(1e-300)
    }

    /// u(t, x); at t = 0 the initial datum 1 is returned directly.
    pub fn value(t: f64, x: f64, eps: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        let pmax = Self::mode_cutoff(t, eps, series_amplitude(0));
        let mut acc = 0.0;
        for p in 0..=pmax {
            acc += series_amplitude(p) * (-series_rate(p) * t).exp() * ((2 * p + 1) as f64 * PI * x).sin();
        }
        acc
    }

    /// ∂ₓu(t, x) for t > 0.
    pub fn gradient(t: f64, x: f64, eps: f64) -> f64 {
        let pmax = Self::mode_cutoff(t, eps, 4.0);
        let mut acc = 0.0;
        for p in 0..=pmax {
            let n = (2 * p + 1) as f64 * PI;
            acc += 4.0 * (-series_rate(p) * t).exp() * (n * x).cos();
        }
        acc
    }

    /// ‖u(t)‖²_L in closed form: ½ Σ c_p² e^{−2λ_p t}; equals 1 at t = 0.
    pub fn norm_l_sq(t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        let pmax = Self::mode_cutoff(2.0 * t, 1e-16, 0.5 * series_amplitude(0) * series_amplitude(0));
        (0..=pmax)
            .map(|p| 0.5 * series_amplitude(p) * series_amplitude(p) * (-2.0 * series_rate(p) * t).exp())
            .sum()
    }

    /// ‖∂ₓu(t)‖² = 8 Σ e^{−2λ_p t} for t > 0.
    pub fn grad_norm_sq(t: f64) -> f64 {
        let pmax = Self::mode_cutoff(2.0 * t, 1e-16, 8.0);
        (0..=pmax).map(|p| 8.0 * (-2.0 * series_rate(p) * t).exp()).sum()
    }

    /// ∫_{t0}^{t1} u(t, x) dt. The t0 = 0 endpoint uses the stationary sum
    /// Σ c_p sin((2p+1)πx)/λ_p = x(1−x)/2, so no slowly-convergent series
    /// appears.
    pub fn int_value(t0: f64, t1: f64, x: f64) -> f64 {
        let at = |t: f64| -> f64 {
            // Σ_p c_p sin λ⁻¹ e^{−λ t}, truncated by the exponential
            let pmax = Self::mode_cutoff(t, 1e-16, series_amplitude(0) / series_rate(0));
            (0..=pmax)
                .map(|p| {
                    let n = (2 * p + 1) as f64 * PI;
                    series_amplitude(p) / series_rate(p) * (-series_rate(p) * t).exp() * (n * x).sin()
                })
                .sum()
        };
        let head = if t0 <= 0.0 {
            0.5 * x * (1.0 - x)
        } else {
            at(t0)
        };
        head - at(t1)
    }
}

/// Explicit truncated evaluation of the series at (t, x): the truncation
/// index is the smallest whose tail majorant is below ε, so the result is
/// within ε of the infinite sum.
pub fn evaluate_series(t: f64, x: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(GdmError::InvalidData("series tolerance must be positive".into()));
    }
    if t < 0.0 {
        return Err(GdmError::Domain("series defined for t ≥ 0".into()));
    }
    Ok(HeatSeries::value(t, x, eps))
}

/// sin/cos of the odd harmonics (2p+1)πx at a fixed set of points, advanced
/// by angle addition: two trig calls per point total, then two multiplies
/// per point per mode.
pub struct OddHarmonics {
    s: Vec<f64>,
    c: Vec<f64>,
    s2: Vec<f64>,
    c2: Vec<f64>,
}

impl OddHarmonics {
    pub fn new(points: &[f64]) -> Self {
        let s: Vec<f64> = points.iter().map(|&x| (PI * x).sin()).collect();
        let c: Vec<f64> = points.iter().map(|&x| (PI * x).cos()).collect();
        let s2: Vec<f64> = points.iter().map(|&x| (2.0 * PI * x).sin()).collect();
        let c2: Vec<f64> = points.iter().map(|&x| (2.0 * PI * x).cos()).collect();
        OddHarmonics { s, c, s2, c2 }
    }

    #[inline]
    pub fn sin(&self, i: usize) -> f64 {
        self.s[i]
    }

    #[inline]
    pub fn cos(&self, i: usize) -> f64 {
        self.c[i]
    }

    /// Advance from mode (2p+1) to (2p+3).
    pub fn advance(&mut self) {
        for i in 0..self.s.len() {
            let (s, c) = (self.s[i], self.c[i]);
            self.s[i] = s * self.c2[i] + c * self.s2[i];
            self.c[i] = c * self.c2[i] - s * self.s2[i];
        }
    }
}

/// m_p = ∫ field · sin((2p+1)πx) dx for p = 0..=p_max, exact per cell for
/// degree ≤ 1 polynomials.
pub fn field_sin_moments(field: &PiecewiseField, p_max: usize) -> Vec<f64> {
    let breaks = field.breaks();
    let mut harm = OddHarmonics::new(breaks);
    let ncell = field.cell_count();
    let mut out = Vec::with_capacity(p_max + 1);
    for p in 0..=p_max {
        let omega = (2 * p + 1) as f64 * PI;
        let mut acc = 0.0;
        for i in 0..ncell {
            let a = field.avg()[i];
            let b = field.slope()[i];
            let (sl, cl) = (harm.sin(i), harm.cos(i));
            let (sr, cr) = (harm.sin(i + 1), harm.cos(i + 1));
            acc += a * (cl - cr) / omega;
            if b != 0.0 {
                let half = 0.5 * (breaks[i + 1] - breaks[i]);
                acc += b * (-(half) * (cr + cl) / omega + (sr - sl) / (omega * omega));
            }
        }
        out.push(acc);
        harm.advance();
    }
    out
}

/// pair_p = ∫ g · (2p+1)π cos((2p+1)πx) dx for p = 0..=p_max; the pairing of
/// a gradient field with the gradient of the p-th unit-amplitude mode.
pub fn gradient_cos_moments(g: &PiecewiseGradient, p_max: usize) -> Vec<f64> {
    let breaks = g.breaks();
    let mut harm = OddHarmonics::new(breaks);
    let ncell = g.values().len();
    let mut out = Vec::with_capacity(p_max + 1);
    for _p in 0..=p_max {
        let mut acc = 0.0;
        for i in 0..ncell {
            acc += g.values()[i] * (harm.sin(i + 1) - harm.sin(i));
        }
        out.push(acc);
        harm.advance();
    }
    out
}

/// ∫ g · (1−2x)/2 dx, the pairing of a gradient field with the gradient of
/// x(1−x)/2; closes the t0 = 0 endpoint of time-exact cross terms.
pub fn gradient_pair_stationary(g: &PiecewiseGradient) -> f64 {
    let breaks = g.breaks();
    let mut acc = 0.0;
    for i in 0..g.values().len() {
        let (a, b) = (breaks[i], breaks[i + 1]);
        // ∫_a^b (1-2x)/2 dx = (b-a)(1-(a+b))/2
        acc += g.values()[i] * (b - a) * (1.0 - (a + b)) / 2.0;
    }
    acc
}

type SpaceTimeEval = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type TimeEval = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// An exact solution: value, gradient and the gradient of the Riesz lift of
/// its time derivative, with declared spatial breakpoints and closed-form
/// norms where available.
#[derive(Clone)]
pub struct AnalyticSolution {
    value: SpaceTimeEval,
    gradient: SpaceTimeEval,
    riesz_grad: SpaceTimeEval,
    gradient_dt: Option<SpaceTimeEval>,
    pub x_breakpoints: Vec<f64>,
    pub norm_l_sq: Option<TimeEval>,
    pub grad_norm_sq: Option<TimeEval>,
    /// The gradient does not exist at t = 0 (the initial datum is only in L).
    pub grad_singular_at_zero: bool,
    /// Modal fast paths apply: the solution is the odd-harmonic heat series.
    pub modal: bool,
}

impl AnalyticSolution {
    pub fn value(&self, t: f64, x: f64) -> f64 {
        (self.value)(t, x)
    }

    pub fn gradient(&self, t: f64, x: f64) -> Result<f64> {
        if self.grad_singular_at_zero && t <= 0.0 {
            return Err(GdmError::Domain(
                "gradient undefined at t = 0: the initial datum has no gradient in L²".into(),
            ));
        }
        Ok((self.gradient)(t, x))
    }

    pub fn riesz_derivative_gradient(&self, t: f64, x: f64) -> f64 {
        (self.riesz_grad)(t, x)
    }

    pub fn gradient_dt(&self, t: f64, x: f64) -> Option<f64> {
        self.gradient_dt.as_ref().map(|f| f(t, x))
    }

    pub fn value_profile(&self, t: f64) -> SpaceFn {
        let f = self.value.clone();
        SpaceFn::with_breaks(move |x| f(t, x), self.x_breakpoints.clone())
    }

    pub fn gradient_profile(&self, t: f64) -> Result<SpaceFn> {
        if self.grad_singular_at_zero && t <= 0.0 {
            return Err(GdmError::Domain(
                "gradient undefined at t = 0: the initial datum has no gradient in L²".into(),
            ));
        }
        let f = self.gradient.clone();
        Ok(SpaceFn::with_breaks(move |x| f(t, x), self.x_breakpoints.clone()))
    }

    pub fn riesz_profile(&self, t: f64) -> SpaceFn {
        let f = self.riesz_grad.clone();
        SpaceFn::with_breaks(move |x| f(t, x), self.x_breakpoints.clone())
    }
}

/// A manufactured case: the exact solution with the matching problem data
/// and the divergence-form flux it induces.
pub struct CaseData {
    pub solution: AnalyticSolution,
    pub final_time: f64,
    pub phi: TimeBoundaryOp,
    pub source: SpaceTimeFn,
    pub flux_source: SpaceTimeFn,
    pub initial: SpaceFn,
    pub flux: FluxField,
}

impl CaseData {
    /// Problem data with Λ = S = Id.
    pub fn problem_spec(&self) -> crate::problem::ProblemSpec {
        crate::problem::ProblemSpec {
            final_time: self.final_time,
            lambda: crate::problem::Diffusion::Constant(1.0),
            weight: crate::field::WeightOperator::identity(),
            phi: self.phi.clone(),
            source: self.source.clone(),
            flux_source: self.flux_source.clone(),
            initial: self.initial.clone(),
        }
    }
}

/// The irregular-initial-data case: unit datum, no sources, homogeneous
/// Dirichlet heat flow. The flux S·G(Ru′) + Λ·Gu + F vanishes identically
/// because Ru′ = −u, so the conformity measure of the flux is zero.
pub fn heat_irregular_case(final_time: f64) -> CaseData {
    let eps = 1e-12;
    let solution = heat_irregular_initial(eps);
    CaseData {
        solution,
        final_time,
        phi: TimeBoundaryOp::Zero,
        source: SpaceTimeFn::zero(),
        flux_source: SpaceTimeFn::zero(),
        initial: SpaceFn::new(|_| 1.0),
        flux: FluxField::zero(),
    }
}

/// The series solution as an `AnalyticSolution`; since the sources vanish,
/// the Riesz lift of u′ is −u and its gradient is −∂ₓu in closed form.
pub fn heat_irregular_initial(eps: f64) -> AnalyticSolution {
    AnalyticSolution {
        value: Arc::new(move |t, x| HeatSeries::value(t, x, eps)),
        gradient: Arc::new(move |t, x| HeatSeries::gradient(t, x, eps)),
        riesz_grad: Arc::new(move |t, x| -HeatSeries::gradient(t, x, eps)),
        gradient_dt: None,
        x_breakpoints: vec![],
        norm_l_sq: Some(Arc::new(HeatSeries::norm_l_sq)),
        grad_norm_sq: Some(Arc::new(HeatSeries::grad_norm_sq)),
        grad_singular_at_zero: true,
        modal: true,
    }
}

fn tent(x: f64) -> f64 {
    x.min(1.0 - x)
}

fn tent_grad(x: f64) -> f64 {
    if x < 0.5 {
        1.0
    } else {
        -1.0
    }
}

/// Gradient of the Riesz lift of the tent profile: w solves −w″ = min(x,1−x)
/// with Dirichlet ends, so w′(x) = 1/8 − x²/2 for x < 1/2, mirrored oddly.
pub fn tent_riesz_grad(x: f64) -> f64 {
    if x <= 0.5 {
        0.125 - 0.5 * x * x
    } else {
        let y = 1.0 - x;
        0.5 * y * y - 0.125
    }
}

/// The irregular right-hand-side case: u(t) = t·min(x, 1−x), with data
/// ξ0 = 0, f(t) = min(x, 1−x) and F(t) = −∂ₓu(t). The induced flux is the
/// time-independent G(R u′), whose divergence is −f.
pub fn tent_case(final_time: f64) -> CaseData {
    let solution = AnalyticSolution {
        value: Arc::new(|t, x| t * tent(x)),
        gradient: Arc::new(|t, x| t * tent_grad(x)),
        riesz_grad: Arc::new(|_t, x| tent_riesz_grad(x)),
        gradient_dt: Some(Arc::new(|_t, x| tent_grad(x))),
        x_breakpoints: vec![0.5],
        norm_l_sq: Some(Arc::new(|t| t * t / 12.0)),
        grad_norm_sq: Some(Arc::new(|t| t * t)),
        grad_singular_at_zero: false,
        modal: false,
    };
    CaseData {
        solution,
        final_time,
        phi: TimeBoundaryOp::Zero,
        source: SpaceTimeFn::constant_in_time(SpaceFn::with_breaks(tent, vec![0.5])),
        flux_source: SpaceTimeFn::separable(|t| -t, SpaceFn::with_breaks(tent_grad, vec![0.5])),
        initial: SpaceFn::zero(),
        flux: FluxField::separable(vec![FluxTerm {
            time: TimeCoeff::Constant(1.0),
            space: SpaceFn::with_breaks(tent_riesz_grad, vec![0.5]),
            space_div: SpaceFn::with_breaks(|x| -tent(x), vec![0.5]),
        }]),
    }
}

/// A smooth time-periodic manufactured case for Φ = Id:
/// u(t, x) = (2 + a·sin(2πt/T))·sin(πx), with the source chosen so the heat
/// equation holds and u(0) = u(T) exactly.
pub fn periodic_case(final_time: f64, amplitude: f64) -> CaseData {
    let t_per = final_time;
    let a = amplitude;
    let c = move |t: f64| 2.0 + a * (2.0 * PI * t / t_per).sin();
    let cp = move |t: f64| a * (2.0 * PI / t_per) * (2.0 * PI * t / t_per).cos();
    let solution = AnalyticSolution {
        value: Arc::new(move |t, x| c(t) * (PI * x).sin()),
        gradient: Arc::new(move |t, x| c(t) * PI * (PI * x).cos()),
        riesz_grad: Arc::new(move |t, x| cp(t) / PI * (PI * x).cos()),
        gradient_dt: Some(Arc::new(move |t, x| cp(t) * PI * (PI * x).cos())),
        x_breakpoints: vec![],
        norm_l_sq: Some(Arc::new(move |t| 0.5 * c(t) * c(t))),
        grad_norm_sq: Some(Arc::new(move |t| 0.5 * PI * PI * c(t) * c(t))),
        grad_singular_at_zero: false,
        modal: false,
    };
    CaseData {
        solution,
        final_time,
        phi: TimeBoundaryOp::Identity,
        source: SpaceTimeFn {
            terms: vec![
                (
                    TimeCoeff::Fn(Arc::new(cp)),
                    SpaceFn::new(|x: f64| (PI * x).sin()),
                ),
                (
                    TimeCoeff::Fn(Arc::new(move |t| PI * PI * c(t))),
                    SpaceFn::new(|x: f64| (PI * x).sin()),
                ),
            ],
        },
        flux_source: SpaceTimeFn::zero(),
        initial: SpaceFn::new(|x: f64| 2.0 * (PI * x).sin()),
        flux: FluxField::separable(vec![FluxTerm {
            time: TimeCoeff::Fn(Arc::new(move |t| cp(t) / PI + PI * c(t))),
            space: SpaceFn::new(|x: f64| (PI * x).cos()),
            space_div: SpaceFn::new(|x: f64| -PI * (PI * x).sin()),
        }]),
    }
}

/// General spectral Riesz evaluator: expand g in sin(nπx) by quadrature,
/// divide each coefficient by λ_n = (nπ)², and return the gradient of the
/// lift, Σ b_n cos(nπx)/(nπ).
pub fn spectral_riesz_gradient(g: &SpaceFn, n_modes: usize) -> SpaceFn {
    let mut coeffs = Vec::with_capacity(n_modes);
    for n in 1..=n_modes {
        let omega = n as f64 * PI;
        // panel per half-wave keeps the adaptive pass cheap
        let mut breaks: Vec<f64> = (1..n).map(|j| j as f64 / n as f64).collect();
        breaks.extend_from_slice(&g.breakpoints);
        breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let gg = g.clone();
        let b_n = 2.0 * quadrature::integrate(|x| gg.eval(x) * (omega * x).sin(), 0.0, 1.0, &breaks, 1e-12);
        coeffs.push(b_n / omega);
    }
    SpaceFn::new(move |x| {
        coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * ((i + 1) as f64 * PI * x).cos())
            .sum()
    })
}
