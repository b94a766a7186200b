//! The gradient-discretisation triple (X, P, G): a dof space with linear
//! function and gradient reconstructions, plus the Gram structures, the
//! coercivity constant, the discrete Riesz operator and L²-projection onto
//! the reconstructed space.

use crate::error::{GdmError, Result};
use crate::field::{PiecewiseField, PiecewiseGradient, SpaceFn, WeightOperator};
use crate::linalg::{self, BandedCholesky, SymBanded};
use crate::quadrature;

/// Threshold above which the coercivity eigensolve switches from the dense
/// reduction to power iteration on the pencil.
pub const DENSE_EIG_LIMIT: usize = 2048;

/// Per function cell: the dofs contributing to the cell polynomial, with
/// coefficients for the midpoint-average and the slope.
#[derive(Debug, Clone, Default)]
pub struct FunctionCell {
    pub avg: Vec<(usize, f64)>,
    pub slope: Vec<(usize, f64)>,
}

/// A gradient discretisation over Ω = (0, 1).
pub struct GradientDiscretisation {
    dof_count: usize,
    fn_breaks: Vec<f64>,
    fn_cells: Vec<FunctionCell>,
    grad_breaks: Vec<f64>,
    grad_cells: Vec<Vec<(usize, f64)>>,
    mass: SymBanded,
    stiffness: SymBanded,
    label: &'static str,
}

impl GradientDiscretisation {
    /// Assemble a discretisation from per-cell dof maps. Validates that the
    /// gradient map is injective (the gradient Gram must be positive
    /// definite), which makes `v ↦ ‖G v‖` a norm on the dof space.
    pub fn assemble(
        dof_count: usize,
        fn_breaks: Vec<f64>,
        fn_cells: Vec<FunctionCell>,
        grad_breaks: Vec<f64>,
        grad_cells: Vec<Vec<(usize, f64)>>,
        label: &'static str,
    ) -> Result<Self> {
        if fn_cells.len() + 1 != fn_breaks.len() || grad_cells.len() + 1 != grad_breaks.len() {
            return Err(GdmError::InvalidDiscretisation(
                "cell maps must match partitions".into(),
            ));
        }
        let bw_fn = bandwidth_of(fn_cells.iter().map(|c| {
            c.avg
                .iter()
                .chain(c.slope.iter())
                .map(|&(j, _)| j)
                .collect::<Vec<_>>()
        }));
        let bw_gr = bandwidth_of(grad_cells.iter().map(|c| c.iter().map(|&(j, _)| j).collect()));

        let mut mass = SymBanded::zeros(dof_count, bw_fn);
        for (i, cell) in fn_cells.iter().enumerate() {
            let m = fn_breaks[i + 1] - fn_breaks[i];
            if !(m > 0.0) {
                return Err(GdmError::InvalidDiscretisation(
                    "cell measures must be positive".into(),
                ));
            }
            for &(j, aj) in &cell.avg {
                for &(l, al) in &cell.avg {
                    if j <= l {
                        mass.add(j, l, aj * al * m);
                    }
                }
            }
            let m3 = m * m * m / 12.0;
            for &(j, bj) in &cell.slope {
                for &(l, bl) in &cell.slope {
                    if j <= l {
                        mass.add(j, l, bj * bl * m3);
                    }
                }
            }
        }

        let mut stiffness = SymBanded::zeros(dof_count, bw_gr);
        for (i, cell) in grad_cells.iter().enumerate() {
            let m = grad_breaks[i + 1] - grad_breaks[i];
            for &(j, gj) in cell {
                for &(l, gl) in cell {
                    if j <= l {
                        stiffness.add(j, l, gj * gl * m);
                    }
                }
            }
        }
        // positive-definiteness of the gradient Gram = injectivity of G
        stiffness.cholesky().map_err(|_| {
            GdmError::InvalidDiscretisation(
                "gradient reconstruction is not injective: ‖G·‖ is not a norm".into(),
            )
        })?;

        Ok(GradientDiscretisation {
            dof_count,
            fn_breaks,
            fn_cells,
            grad_breaks,
            grad_cells,
            mass,
            stiffness,
            label,
        })
    }

    pub fn dof_count(&self) -> usize {
        self.dof_count
    }

    pub fn label(&self) -> &'static str {
        self.label
    }

    pub fn fn_breaks(&self) -> &[f64] {
        &self.fn_breaks
    }

    pub fn grad_breaks(&self) -> &[f64] {
        &self.grad_breaks
    }

    pub fn grad_cell_count(&self) -> usize {
        self.grad_cells.len()
    }

    /// Gram of the function reconstruction ⟨P eᵢ, P eⱼ⟩.
    pub fn mass(&self) -> &SymBanded {
        &self.mass
    }

    /// Unweighted gradient Gram ⟨G eᵢ, G eⱼ⟩.
    pub fn stiffness(&self) -> &SymBanded {
        &self.stiffness
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dof_count {
            return Err(GdmError::DimensionMismatch {
                expected: self.dof_count,
                got: v.len(),
            });
        }
        Ok(())
    }

    /// P v: the reconstructed function.
    pub fn reconstruct_function(&self, v: &[f64]) -> Result<PiecewiseField> {
        self.check_dim(v)?;
        let n = self.fn_cells.len();
        let mut avg = vec![0.0; n];
        let mut slope = vec![0.0; n];
        for (i, cell) in self.fn_cells.iter().enumerate() {
            for &(j, c) in &cell.avg {
                avg[i] += c * v[j];
            }
            for &(j, c) in &cell.slope {
                slope[i] += c * v[j];
            }
        }
        PiecewiseField::new(self.fn_breaks.clone(), avg, slope)
    }

    /// G v: the reconstructed gradient.
    pub fn reconstruct_gradient(&self, v: &[f64]) -> Result<PiecewiseGradient> {
        self.check_dim(v)?;
        let n = self.grad_cells.len();
        let mut val = vec![0.0; n];
        for (i, cell) in self.grad_cells.iter().enumerate() {
            for &(j, c) in cell {
                val[i] += c * v[j];
            }
        }
        PiecewiseGradient::new(self.grad_breaks.clone(), val)
    }

    /// Gradient Gram weighted by per-gradient-cell coefficients
    /// ⟨w · G eᵢ, G eⱼ⟩.
    pub fn weighted_stiffness(&self, cell_weights: &[f64]) -> Result<SymBanded> {
        if cell_weights.len() != self.grad_cells.len() {
            return Err(GdmError::DimensionMismatch {
                expected: self.grad_cells.len(),
                got: cell_weights.len(),
            });
        }
        let mut k = SymBanded::zeros(self.dof_count, self.stiffness.bandwidth());
        for (i, cell) in self.grad_cells.iter().enumerate() {
            let m = (self.grad_breaks[i + 1] - self.grad_breaks[i]) * cell_weights[i];
            for &(j, gj) in cell {
                for &(l, gl) in cell {
                    if j <= l {
                        k.add(j, l, gj * gl * m);
                    }
                }
            }
        }
        Ok(k)
    }

    /// Samples a weight operator on the gradient cells by exact averaging.
    pub fn weight_on_grad_cells(&self, s: &WeightOperator) -> Vec<f64> {
        self.grad_breaks
            .windows(2)
            .map(|w| s.mean_over(w[0], w[1]))
            .collect()
    }

    /// S-weighted gradient Gram ⟨S G eᵢ, G eⱼ⟩.
    pub fn stiffness_weighted(&self, s: &WeightOperator) -> SymBanded {
        if s.is_identity() {
            return self.stiffness.clone();
        }
        self.weighted_stiffness(&self.weight_on_grad_cells(s))
            .expect("weight sampled on grad cells")
    }

    /// The weighted norm ‖v‖ = ‖S^{1/2} G v‖; zero iff v = 0.
    pub fn weighted_norm(&self, s: &WeightOperator, v: &[f64]) -> Result<f64> {
        self.check_dim(v)?;
        let g = self.reconstruct_gradient(v)?;
        Ok(g.weighted_norm_sq(s).max(0.0).sqrt())
    }

    /// The coercivity constant: the operator norm of P against the weighted
    /// gradient norm, i.e. the square root of the largest eigenvalue of the
    /// pencil (mass, S-stiffness).
    pub fn coercivity_constant(&self, s: &WeightOperator) -> Result<f64> {
        Ok(self.coercivity_with_maximizer(s)?.0)
    }

    /// As `coercivity_constant`, also returning the maximizing dof vector.
    pub fn coercivity_with_maximizer(&self, s: &WeightOperator) -> Result<(f64, Vec<f64>)> {
        let ks = self.stiffness_weighted(s);
        ks.cholesky().map_err(|_| {
            GdmError::InvalidDiscretisation("weighted gradient Gram singular".into())
        })?;
        let (lam, v) = if self.dof_count <= DENSE_EIG_LIMIT {
            linalg::largest_pencil_eig_dense(&self.mass, &ks)?
        } else {
            linalg::largest_pencil_eig_power(&self.mass, &ks, 1e-10, 100_000)?
        };
        if !(lam >= 0.0) {
            return Err(GdmError::InvalidDiscretisation(
                "coercivity pencil produced a negative eigenvalue".into(),
            ));
        }
        Ok((lam.sqrt(), v))
    }

    /// Factorized discrete Riesz operator for a fixed weight.
    pub fn riesz_operator(&self, s: &WeightOperator) -> Result<RieszOperator<'_>> {
        let ks = self.stiffness_weighted(s);
        let chol = ks.cholesky().map_err(|_| {
            GdmError::InvalidDiscretisation("weighted gradient Gram singular".into())
        })?;
        Ok(RieszOperator { d: self, ks, chol })
    }

    /// R u: solves ⟨S G (R u), G z⟩ = ⟨P u, P z⟩ for all z.
    pub fn discrete_riesz(&self, s: &WeightOperator, u: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(u)?;
        Ok(self.riesz_operator(s)?.apply(u))
    }

    /// Load vector ⟨f, P eⱼ⟩ by adaptive quadrature (relative tol 1e-10).
    pub fn pair_function(&self, f: &SpaceFn) -> Vec<f64> {
        self.pair_function_tol(f, 1e-10)
    }

    pub fn pair_function_tol(&self, f: &SpaceFn, rel_tol: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dof_count];
        for (i, cell) in self.fn_cells.iter().enumerate() {
            if cell.avg.is_empty() && cell.slope.is_empty() {
                continue;
            }
            let (a, b) = (self.fn_breaks[i], self.fn_breaks[i + 1]);
            let mid = 0.5 * (a + b);
            let i0 = quadrature::integrate(|x| f.eval(x), a, b, &f.breakpoints, rel_tol);
            for &(j, c) in &cell.avg {
                out[j] += c * i0;
            }
            if !cell.slope.is_empty() {
                let i1 = quadrature::integrate(
                    |x| f.eval(x) * (x - mid),
                    a,
                    b,
                    &f.breakpoints,
                    rel_tol,
                );
                for &(j, c) in &cell.slope {
                    out[j] += c * i1;
                }
            }
        }
        out
    }

    /// Load vector ⟨g, G eⱼ⟩ by adaptive quadrature.
    pub fn pair_gradient(&self, g: &SpaceFn) -> Vec<f64> {
        self.pair_gradient_tol(g, 1e-10)
    }

    pub fn pair_gradient_tol(&self, g: &SpaceFn, rel_tol: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dof_count];
        for (i, cell) in self.grad_cells.iter().enumerate() {
            if cell.is_empty() {
                continue;
            }
            let (a, b) = (self.grad_breaks[i], self.grad_breaks[i + 1]);
            let i0 = quadrature::integrate(|x| g.eval(x), a, b, &g.breakpoints, rel_tol);
            for &(j, c) in cell {
                out[j] += c * i0;
            }
        }
        out
    }

    /// Coordinates of the L²-orthogonal projection of ξ onto P(X). Uses the
    /// mass Cholesky when P is injective and the minimum-norm least-squares
    /// solution otherwise.
    pub fn project_onto_reconstruction(&self, xi: &SpaceFn) -> Result<Vec<f64>> {
        let rhs = self.pair_function(xi);
        self.project_rhs(&rhs)
    }

    /// Same projection from an already-paired right-hand side ⟨ξ, P eⱼ⟩.
    pub fn project_rhs(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(rhs)?;
        match self.mass.cholesky() {
            Ok(chol) => Ok(linalg::solve_spd_refined(&self.mass, &chol, rhs, 1e-13)),
            Err(_) => {
                // non-injective P: minimum-norm coordinates via SVD
                let m = self.mass.to_dense();
                let svd = m.svd(true, true);
                let b = nalgebra::DVector::from_column_slice(rhs);
                let x = svd
                    .solve(&b, 1e-12)
                    .map_err(|e| GdmError::InvalidDiscretisation(e.to_string()))?;
                Ok(x.iter().copied().collect())
            }
        }
    }
}

/// Discrete Riesz operator with a cached factorization of the S-weighted
/// gradient Gram.
pub struct RieszOperator<'a> {
    d: &'a GradientDiscretisation,
    ks: SymBanded,
    chol: BandedCholesky,
}

impl RieszOperator<'_> {
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let rhs = self.d.mass.matvec(u);
        linalg::solve_spd_refined(&self.ks, &self.chol, &rhs, 1e-13)
    }

    /// Riesz representative of an arbitrary functional given by its action on
    /// the dof basis.
    pub fn represent(&self, rhs: &[f64]) -> Vec<f64> {
        linalg::solve_spd_refined(&self.ks, &self.chol, rhs, 1e-13)
    }

    pub fn weighted_stiffness(&self) -> &SymBanded {
        &self.ks
    }
}

fn bandwidth_of<I: Iterator<Item = Vec<usize>>>(cells: I) -> usize {
    let mut bw = 0usize;
    for dofs in cells {
        for (a, &i) in dofs.iter().enumerate() {
            for &j in dofs.iter().skip(a + 1) {
                bw = bw.max(i.abs_diff(j));
            }
        }
    }
    bw
}

#[cfg(test)]
mod tests {
    use crate::builders::{build_cvfe, build_p1};
    use crate::field::{SpaceFn, WeightOperator};
    use crate::linalg;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    /// Closed form for the CVFE coercivity constant on the uniform mesh:
    /// the pencil (h·I, (1/h)·tridiag(-1,2,-1)) has largest eigenvalue
    /// h² / (4 sin²(πh/2)).
    fn cvfe_ph_closed_form(m: usize) -> f64 {
        let h = 1.0 / (m as f64 + 1.0);
        h / (2.0 * (std::f64::consts::PI * h / 2.0).sin())
    }

    #[test]
    fn coercivity_single_dof_closed_form() {
        // M = 1: ‖P v‖² = v²/2 and ‖G v‖² = 4v², so p = √2/4
        let d = build_cvfe(1).unwrap();
        let s = WeightOperator::identity();
        let p = d.coercivity_constant(&s).unwrap();
        assert_relative_eq!(p, 2.0_f64.sqrt() / 4.0, max_relative = 1e-12);
        assert_relative_eq!(p, cvfe_ph_closed_form(1), max_relative = 1e-12);
    }

    #[test]
    fn coercivity_scales_with_weight() {
        let d = build_cvfe(5).unwrap();
        let p1 = d.coercivity_constant(&WeightOperator::identity()).unwrap();
        let p4 = d
            .coercivity_constant(&WeightOperator::constant(4.0).unwrap())
            .unwrap();
        assert_relative_eq!(p4, p1 / 2.0, max_relative = 1e-11);
    }

    #[test]
    fn coercivity_matches_closed_form_and_poincare_window() {
        let s = WeightOperator::identity();
        let cp = 1.0 / std::f64::consts::PI;
        for m in [3usize, 7, 31] {
            let d = build_cvfe(m).unwrap();
            let p = d.coercivity_constant(&s).unwrap();
            assert_relative_eq!(p, cvfe_ph_closed_form(m), max_relative = 1e-10);
            assert!(p >= cp && p <= 1.0 + cp, "p_h = {p} outside window at M={m}");
        }
    }

    #[test]
    fn coercivity_power_iteration_agrees_with_dense() {
        let d = build_cvfe(24).unwrap();
        let ks = d.stiffness_weighted(&WeightOperator::identity());
        let (ld, _) = linalg::largest_pencil_eig_dense(d.mass(), &ks).unwrap();
        let (lp, _) = linalg::largest_pencil_eig_power(d.mass(), &ks, 1e-12, 100000).unwrap();
        assert_relative_eq!(ld, lp, max_relative = 1e-8);
    }

    #[test]
    fn discrete_poincare_holds_with_sharp_maximizer() {
        let s = WeightOperator::identity();
        for d in [build_cvfe(9).unwrap(), build_p1(9).unwrap()] {
            let (p, vmax) = d.coercivity_with_maximizer(&s).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(17);
            for _ in 0..200 {
                let v: Vec<f64> = (0..9).map(|_| rng.gen::<f64>() - 0.5).collect();
                let pv = d.reconstruct_function(&v).unwrap().norm_sq().sqrt();
                let gv = d.weighted_norm(&s, &v).unwrap();
                assert!(pv <= p * gv * (1.0 + 1e-12));
            }
            let pv = d.reconstruct_function(&vmax).unwrap().norm_sq().sqrt();
            let gv = d.weighted_norm(&s, &vmax).unwrap();
            assert_relative_eq!(pv, p * gv, max_relative = 1e-8);
        }
    }

    #[test]
    fn weighted_norm_positive_on_random_vectors() {
        let d = build_cvfe(12).unwrap();
        let s = WeightOperator::identity();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..1000 {
            let mut v: Vec<f64> = (0..12).map(|_| rng.gen::<f64>() - 0.5).collect();
            if v.iter().all(|&x| x == 0.0) {
                v[0] = 1.0;
            }
            assert!(d.weighted_norm(&s, &v).unwrap() > 0.0);
        }
        assert_eq!(d.weighted_norm(&s, &vec![0.0; 12]).unwrap(), 0.0);
    }

    #[test]
    fn riesz_single_dof_hand_solve() {
        // M = 1: 4·(R u) = u/2 so R u = u/8
        let d = build_cvfe(1).unwrap();
        let s = WeightOperator::identity();
        let r = d.discrete_riesz(&s, &[1.0]).unwrap();
        assert_relative_eq!(r[0], 0.125, max_relative = 1e-13);
        assert_eq!(d.discrete_riesz(&s, &[0.0]).unwrap()[0], 0.0);
    }

    #[test]
    fn riesz_defining_equation_residual() {
        let d = build_cvfe(11).unwrap();
        let s = WeightOperator::constant(2.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u: Vec<f64> = (0..11).map(|_| rng.gen::<f64>() - 0.5).collect();
        let r = d.discrete_riesz(&s, &u).unwrap();
        let ks = d.stiffness_weighted(&s);
        let lhs = ks.matvec(&r);
        let rhs = d.mass().matvec(&u);
        let scale = linalg::norm2(&rhs).max(1e-300);
        let res: f64 = lhs
            .iter()
            .zip(&rhs)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(res <= 1e-12 * scale, "riesz residual {res}");
    }

    #[test]
    fn riesz_symmetry_and_positivity() {
        let d = build_p1(8).unwrap();
        let s = WeightOperator::identity();
        let op = d.riesz_operator(&s).unwrap();
        let ks = d.stiffness_weighted(&s);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let u: Vec<f64> = (0..8).map(|_| rng.gen::<f64>() - 0.5).collect();
            let v: Vec<f64> = (0..8).map(|_| rng.gen::<f64>() - 0.5).collect();
            let ru = op.apply(&u);
            let rv = op.apply(&v);
            let a = linalg::dot(&ks.matvec(&ru), &v);
            let b = linalg::dot(&ks.matvec(&rv), &u);
            assert_relative_eq!(a, b, max_relative = 1e-10, epsilon = 1e-14);
            // ⟨S G R u, G u⟩ = ‖P u‖² ≥ 0
            let pu = d.reconstruct_function(&u).unwrap().norm_sq();
            assert_relative_eq!(linalg::dot(&ks.matvec(&ru), &u), pu, max_relative = 1e-10);
        }
    }

    #[test]
    fn projection_reproduces_constants_and_range() {
        let d = build_cvfe(6).unwrap();
        let ones = d
            .project_onto_reconstruction(&SpaceFn::new(|_| 1.0))
            .unwrap();
        for c in &ones {
            assert_relative_eq!(*c, 1.0, max_relative = 1e-12);
        }
        // idempotent on the range
        let v = [0.3, -0.7, 0.2, 0.9, -0.1, 0.5];
        let pv = d.reconstruct_function(&v).unwrap();
        let c = d
            .project_onto_reconstruction(&SpaceFn::new(move |x| pv.eval(x)))
            .unwrap();
        for (a, b) in c.iter().zip(&v) {
            assert_relative_eq!(a, b, max_relative = 1e-10, epsilon = 1e-12);
        }
    }

    #[test]
    fn projection_single_dof_cell_average() {
        // M = 1, ξ(x) = x: the single staggered cell is (1/4, 3/4), mean 1/2
        let d = build_cvfe(1).unwrap();
        let c = d.project_onto_reconstruction(&SpaceFn::new(|x| x)).unwrap();
        assert_relative_eq!(c[0], 0.5, max_relative = 1e-11);
    }

    #[test]
    fn projection_orthogonality_and_optimality() {
        let d = build_p1(7).unwrap();
        let xi = SpaceFn::new(|x: f64| (2.0 * x).exp());
        let c = d.project_onto_reconstruction(&xi).unwrap();
        let pc = d.reconstruct_function(&c).unwrap();
        // orthogonality: ⟨P c − ξ, P z⟩ = 0 for basis z
        for j in 0..7 {
            let mut e = vec![0.0; 7];
            e[j] = 1.0;
            let pe = d.reconstruct_function(&e).unwrap();
            let gap = pc.inner(&pe) - pe.inner_fn(&xi, 1e-12);
            assert!(gap.abs() <= 1e-10, "orthogonality defect {gap}");
        }
        // optimality against random competitors
        let best = pc.diff_norm_sq_fn(&xi, 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..100 {
            let v: Vec<f64> = (0..7).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            let pv = d.reconstruct_function(&v).unwrap();
            assert!(best <= pv.diff_norm_sq_fn(&xi, 1e-10) * (1.0 + 1e-9));
        }
    }
}
