//! Problem data for the parabolic scheme: diffusion, weight, time boundary
//! operator, sources and the initial/linking datum, plus the time grid and
//! the piecewise-constant-in-time discrete solution.

use crate::discretisation::GradientDiscretisation;
use crate::error::{GdmError, Result};
use crate::field::{SpaceFn, WeightOperator};
use crate::linalg;
use crate::quadrature;
use nalgebra::DMatrix;
use std::sync::Arc;

/// Uniform time grid on (0, T) with N steps of size k = T/N.
#[derive(Debug, Clone, Copy)]
pub struct TimeGrid {
    n_steps: usize,
    final_time: f64,
}

impl TimeGrid {
    pub fn new(n_steps: usize, final_time: f64) -> Result<Self> {
        if n_steps < 1 || !(final_time > 0.0) {
            return Err(GdmError::InvalidData(
                "time grid needs N ≥ 1 and T > 0".into(),
            ));
        }
        Ok(TimeGrid {
            n_steps,
            final_time,
        })
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn final_time(&self) -> f64 {
        self.final_time
    }

    pub fn k(&self) -> f64 {
        self.final_time / self.n_steps as f64
    }

    /// Endpoints of step m = 1..=N: ((m-1)k, mk).
    pub fn step_bounds(&self, m: usize) -> (f64, f64) {
        let k = self.k();
        ((m - 1) as f64 * k, m as f64 * k)
    }
}

/// N+1 time slices of dof vectors; the left-continuous piecewise-constant
/// extension in time is implied (slice m covers ((m-1)k, mk], slice 0 is the
/// value at t = 0).
#[derive(Debug, Clone)]
pub struct DiscreteSolution {
    pub slices: Vec<Vec<f64>>,
    pub grid: TimeGrid,
}

impl DiscreteSolution {
    pub fn new(slices: Vec<Vec<f64>>, grid: TimeGrid) -> Result<Self> {
        if slices.len() != grid.n_steps() + 1 {
            return Err(GdmError::DimensionMismatch {
                expected: grid.n_steps() + 1,
                got: slices.len(),
            });
        }
        let n = slices[0].len();
        if slices.iter().any(|s| s.len() != n) {
            return Err(GdmError::InvalidData(
                "all time slices must share the dof dimension".into(),
            ));
        }
        Ok(DiscreteSolution { slices, grid })
    }

    pub fn slice(&self, m: usize) -> &[f64] {
        &self.slices[m]
    }

    /// Index of the slice owning time t under the left-continuous convention.
    pub fn slice_index_at(&self, t: f64) -> usize {
        if t <= 0.0 {
            return 0;
        }
        let k = self.grid.k();
        ((t / k).ceil() as usize).clamp(1, self.grid.n_steps())
    }

    /// The discrete derivative: N dof vectors (w^m − w^{m-1})/k.
    pub fn derivative(&self) -> Vec<Vec<f64>> {
        let k = self.grid.k();
        (1..self.slices.len())
            .map(|m| {
                self.slices[m]
                    .iter()
                    .zip(&self.slices[m - 1])
                    .map(|(a, b)| (a - b) / k)
                    .collect()
            })
            .collect()
    }
}

/// Time-dependent diffusion, acting on gradient reconstructions as a
/// per-gradient-cell positive scalar.
#[derive(Clone)]
pub enum Diffusion {
    Constant(f64),
    /// One value per gradient cell of the discretisation, constant in time.
    Cellwise(Vec<f64>),
    /// t ↦ per-gradient-cell values.
    TimeVarying(Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>),
}

impl Diffusion {
    pub fn cells_at(&self, t: f64, cell_count: usize) -> Result<Vec<f64>> {
        let v = match self {
            Diffusion::Constant(c) => vec![*c; cell_count],
            Diffusion::Cellwise(v) => v.clone(),
            Diffusion::TimeVarying(f) => f(t),
        };
        if v.len() != cell_count {
            return Err(GdmError::DimensionMismatch {
                expected: cell_count,
                got: v.len(),
            });
        }
        Ok(v)
    }

    pub fn is_time_constant(&self) -> bool {
        !matches!(self, Diffusion::TimeVarying(_))
    }
}

/// The time boundary operator Φ linking u(0) and u(T); a contraction on L.
/// `GeneralContraction` acts on reconstruction coordinates.
#[derive(Clone)]
pub enum TimeBoundaryOp {
    Zero,
    Identity,
    Scaled(f64),
    GeneralContraction(DMatrix<f64>),
}

impl TimeBoundaryOp {
    pub fn is_zero(&self) -> bool {
        matches!(self, TimeBoundaryOp::Zero)
    }

    /// Apply Φ to reconstruction coordinates.
    pub fn apply_coords(&self, v: &[f64]) -> Vec<f64> {
        match self {
            TimeBoundaryOp::Zero => vec![0.0; v.len()],
            TimeBoundaryOp::Identity => v.to_vec(),
            TimeBoundaryOp::Scaled(c) => v.iter().map(|x| c * x).collect(),
            TimeBoundaryOp::GeneralContraction(m) => {
                let x = nalgebra::DVector::from_column_slice(v);
                (m * x).iter().copied().collect()
            }
        }
    }

    /// Operator norm of Φ in the L-inner product of the reconstruction space,
    /// by power iteration on Φ*Φ (tolerance 1e-8).
    pub fn norm(&self, d: &GradientDiscretisation) -> Result<f64> {
        match self {
            TimeBoundaryOp::Zero => Ok(0.0),
            TimeBoundaryOp::Identity => Ok(1.0),
            TimeBoundaryOp::Scaled(c) => Ok(c.abs()),
            TimeBoundaryOp::GeneralContraction(mat) => {
                let n = d.dof_count();
                if mat.nrows() != n || mat.ncols() != n {
                    return Err(GdmError::DimensionMismatch {
                        expected: n,
                        got: mat.nrows(),
                    });
                }
                let mass = d.mass();
                let mut x: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64) / (n as f64)).collect();
                let mut lam_prev = 0.0;
                for it in 0..10_000 {
                    let phix = self.apply_coords(&x);
                    let num = linalg::dot(&mass.matvec(&phix), &phix);
                    let den = linalg::dot(&mass.matvec(&x), &x).max(1e-300);
                    let lam = num / den;
                    if it > 2 && (lam - lam_prev).abs() <= 1e-8 * lam.abs().max(1e-12) {
                        return Ok(lam.max(0.0).sqrt());
                    }
                    lam_prev = lam;
                    // iterate x ← M⁻¹ Φᵀ M Φ x, the L-adjoint composition
                    let mphix = mass.matvec(&phix);
                    let phit_m = {
                        let v = nalgebra::DVector::from_column_slice(&mphix);
                        (mat.transpose() * v).iter().copied().collect::<Vec<f64>>()
                    };
                    let chol = mass.cholesky()?;
                    x = linalg::solve_spd_refined(mass, &chol, &phit_m, 1e-12);
                    let nrm = linalg::norm2(&x).max(1e-300);
                    x.iter_mut().for_each(|v| *v /= nrm);
                }
                Ok(lam_prev.max(0.0).sqrt())
            }
        }
    }
}

/// Space-time data as a sum of separable terms a_i(t)·g_i(x). This covers
/// every data set used here while keeping time-averaging and load assembly
/// cheap: spatial pairings are computed once per term.
#[derive(Clone)]
pub struct SpaceTimeFn {
    pub terms: Vec<(TimeCoeff, SpaceFn)>,
}

#[derive(Clone)]
pub enum TimeCoeff {
    Constant(f64),
    Fn(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl TimeCoeff {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeCoeff::Constant(c) => *c,
            TimeCoeff::Fn(f) => f(t),
        }
    }

    /// Mean over (a, b) to relative tolerance 1e-10; exact for constants.
    pub fn mean_over(&self, a: f64, b: f64) -> f64 {
        match self {
            TimeCoeff::Constant(c) => *c,
            TimeCoeff::Fn(f) => quadrature::integrate(|t| f(t), a, b, &[], 1e-10) / (b - a),
        }
    }
}

impl SpaceTimeFn {
    pub fn zero() -> Self {
        SpaceTimeFn { terms: Vec::new() }
    }

    pub fn constant_in_time(g: SpaceFn) -> Self {
        SpaceTimeFn {
            terms: vec![(TimeCoeff::Constant(1.0), g)],
        }
    }

    pub fn separable(a: impl Fn(f64) -> f64 + Send + Sync + 'static, g: SpaceFn) -> Self {
        SpaceTimeFn {
            terms: vec![(TimeCoeff::Fn(Arc::new(a)), g)],
        }
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        self.terms
            .iter()
            .map(|(a, g)| a.eval(t) * g.eval(x))
            .sum()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

/// A divergence-form flux together with its divergence partner, as a sum of
/// separable terms. The conformity measure pairs it against test functions,
/// so keeping the spatial profiles explicit lets those pairings be computed
/// once per term.
#[derive(Clone)]
pub struct FluxTerm {
    pub time: TimeCoeff,
    pub space: SpaceFn,
    pub space_div: SpaceFn,
}

/// A flux that is not separable in (t, x); the conformity measure averages
/// its pairings per step by quadrature.
#[derive(Clone)]
pub struct GeneralFlux {
    pub value: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    pub divergence: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    pub x_breakpoints: Vec<f64>,
    pub time_constant: bool,
}

#[derive(Clone)]
pub struct FluxField {
    pub terms: Vec<FluxTerm>,
    pub general: Option<GeneralFlux>,
}

impl FluxField {
    pub fn zero() -> Self {
        FluxField {
            terms: Vec::new(),
            general: None,
        }
    }

    pub fn separable(terms: Vec<FluxTerm>) -> Self {
        FluxField {
            terms,
            general: None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty() && self.general.is_none()
    }

    pub fn value(&self, t: f64, x: f64) -> f64 {
        let mut v: f64 = self
            .terms
            .iter()
            .map(|term| term.time.eval(t) * term.space.eval(x))
            .sum();
        if let Some(g) = &self.general {
            v += (g.value)(t, x);
        }
        v
    }

    pub fn divergence(&self, t: f64, x: f64) -> f64 {
        let mut v: f64 = self
            .terms
            .iter()
            .map(|term| term.time.eval(t) * term.space_div.eval(x))
            .sum();
        if let Some(g) = &self.general {
            v += (g.divergence)(t, x);
        }
        v
    }
}

/// The parabolic problem data (T, Λ, S, Φ, f, F, ξ0).
#[derive(Clone)]
pub struct ProblemSpec {
    pub final_time: f64,
    pub lambda: Diffusion,
    pub weight: WeightOperator,
    pub phi: TimeBoundaryOp,
    pub source: SpaceTimeFn,
    pub flux_source: SpaceTimeFn,
    pub initial: SpaceFn,
}

/// The coercivity/continuity constants of S⁻¹Λ in the S-weighted gradient
/// inner product: α = ess-inf λ/s, M = max(1, ess-sup λ/s) and
/// ρ = ess-sup of the symmetrically weighted operator (equal to the raw
/// sup for commuting cellwise scalars).
#[derive(Debug, Clone, Copy)]
pub struct OperatorConstants {
    pub alpha: f64,
    pub m_bound: f64,
    pub rho: f64,
}

impl ProblemSpec {
    pub fn heat(final_time: f64, source: SpaceTimeFn, flux_source: SpaceTimeFn, initial: SpaceFn) -> Self {
        ProblemSpec {
            final_time,
            lambda: Diffusion::Constant(1.0),
            weight: WeightOperator::identity(),
            phi: TimeBoundaryOp::Zero,
            source,
            flux_source,
            initial,
        }
    }

    /// Derived constants by sampling λ/s over the time grid and cells.
    pub fn operator_constants(
        &self,
        d: &GradientDiscretisation,
        grid: &TimeGrid,
    ) -> Result<OperatorConstants> {
        let cells = d.grad_cell_count();
        let s_cells = d.weight_on_grad_cells(&self.weight);
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        let sample_times: Vec<f64> = if self.lambda.is_time_constant() {
            vec![0.0]
        } else {
            let k = grid.k();
            (0..grid.n_steps())
                .flat_map(|m| {
                    let t0 = m as f64 * k;
                    [t0 + 0.25 * k, t0 + 0.5 * k, t0 + 0.75 * k]
                })
                .collect()
        };
        for &t in &sample_times {
            let lam = self.lambda.cells_at(t, cells)?;
            for (l, s) in lam.iter().zip(&s_cells) {
                if !l.is_finite() || *l <= 0.0 {
                    return Err(GdmError::InvalidData(format!(
                        "diffusion must be positive and finite, got {l} at t = {t}"
                    )));
                }
                let r = l / s;
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
        Ok(OperatorConstants {
            alpha: lo,
            m_bound: hi.max(1.0),
            rho: hi,
        })
    }

    /// Validate data invariants: α > 0 and ‖Φ‖ ≤ 1 (power-iteration check
    /// for general contractions, tolerance 1e-8).
    pub fn validate(&self, d: &GradientDiscretisation, grid: &TimeGrid) -> Result<()> {
        let c = self.operator_constants(d, grid)?;
        if !(c.alpha > 0.0) {
            return Err(GdmError::InvalidData("diffusion not coercive".into()));
        }
        let phinorm = self.phi.norm(d)?;
        if phinorm > 1.0 + 1e-8 {
            return Err(GdmError::InvalidData(format!(
                "time boundary operator is not a contraction: ‖Φ‖ ≈ {phinorm}"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builders::build_cvfe;
    use approx::assert_relative_eq;

    #[test]
    fn grid_basics() {
        let g = TimeGrid::new(4, 2.0).unwrap();
        assert_eq!(g.k(), 0.5);
        assert_eq!(g.step_bounds(1), (0.0, 0.5));
        assert_eq!(g.step_bounds(4), (1.5, 2.0));
        assert!(TimeGrid::new(0, 1.0).is_err());
    }

    #[test]
    fn solution_slice_lookup_left_continuous() {
        let g = TimeGrid::new(2, 1.0).unwrap();
        let sol = DiscreteSolution::new(vec![vec![0.0], vec![1.0], vec![2.0]], g).unwrap();
        assert_eq!(sol.slice_index_at(0.0), 0);
        assert_eq!(sol.slice_index_at(0.2), 1);
        assert_eq!(sol.slice_index_at(0.5), 1);
        assert_eq!(sol.slice_index_at(0.6), 2);
        assert_eq!(sol.slice_index_at(1.0), 2);
    }

    #[test]
    fn derivative_definition_and_telescoping() {
        let g = TimeGrid::new(2, 1.0).unwrap();
        let sol =
            DiscreteSolution::new(vec![vec![0.0, 0.0], vec![1.0, -2.0], vec![1.0, -2.0]], g)
                .unwrap();
        let d = sol.derivative();
        assert_eq!(d[0], vec![2.0, -4.0]); // (w1 − w0)/k with k = 0.5
        assert_eq!(d[1], vec![0.0, 0.0]); // constant in time → zero
        // telescoping: k Σ ∂w = w^N − w^0 exactly
        let k = g.k();
        for j in 0..2 {
            let sum: f64 = d.iter().map(|v| v[j]).sum::<f64>() * k;
            assert_eq!(sum, sol.slices[2][j] - sol.slices[0][j]);
        }
    }

    #[test]
    fn phi_norms() {
        let d = build_cvfe(4).unwrap();
        assert_eq!(TimeBoundaryOp::Zero.norm(&d).unwrap(), 0.0);
        assert_eq!(TimeBoundaryOp::Identity.norm(&d).unwrap(), 1.0);
        assert_eq!(TimeBoundaryOp::Scaled(-0.5).norm(&d).unwrap(), 0.5);
        let m = DMatrix::from_diagonal_element(4, 4, 0.75);
        let phi = TimeBoundaryOp::GeneralContraction(m);
        assert_relative_eq!(phi.norm(&d).unwrap(), 0.75, max_relative = 1e-6);
    }

    #[test]
    fn operator_constants_cellwise() {
        let d = build_cvfe(3).unwrap();
        let grid = TimeGrid::new(2, 1.0).unwrap();
        let mut spec = ProblemSpec::heat(
            1.0,
            SpaceTimeFn::zero(),
            SpaceTimeFn::zero(),
            SpaceFn::zero(),
        );
        spec.lambda = Diffusion::Cellwise(vec![1.0, 2.0, 10.0, 4.0]);
        let c = spec.operator_constants(&d, &grid).unwrap();
        assert_eq!(c.alpha, 1.0);
        assert_eq!(c.m_bound, 10.0);
        assert_eq!(c.rho, 10.0);
        // sub-unit diffusion still reports M ≥ 1
        spec.lambda = Diffusion::Constant(0.5);
        let c = spec.operator_constants(&d, &grid).unwrap();
        assert_eq!(c.alpha, 0.5);
        assert_eq!(c.m_bound, 1.0);
        assert_eq!(c.rho, 0.5);
    }

    #[test]
    fn validate_rejects_expansion() {
        let d = build_cvfe(2).unwrap();
        let grid = TimeGrid::new(1, 1.0).unwrap();
        let mut spec = ProblemSpec::heat(
            1.0,
            SpaceTimeFn::zero(),
            SpaceTimeFn::zero(),
            SpaceFn::zero(),
        );
        spec.phi = TimeBoundaryOp::Scaled(1.5);
        assert!(spec.validate(&d, &grid).is_err());
    }
}
