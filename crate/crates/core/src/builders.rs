//! Concrete 1D instances on the uniform mesh: the mass-lumped control-volume
//! finite element discretisation and the conforming P1 comparison instance.
//! Homogeneous Dirichlet values are built into the dof space (no boundary
//! dofs, `w_0 = w_{M+1} = 0`).

use crate::discretisation::{FunctionCell, GradientDiscretisation};
use crate::error::{GdmError, Result};

/// Uniform mesh of (0, 1) with M interior nodes and h = 1/(M+1).
#[derive(Debug, Clone, Copy)]
pub struct Mesh1D {
    m: usize,
}

impl Mesh1D {
    pub fn new(m: usize) -> Result<Self> {
        if m < 1 {
            return Err(GdmError::InvalidDiscretisation(
                "mesh needs at least one interior node".into(),
            ));
        }
        Ok(Mesh1D { m })
    }

    pub fn interior_nodes(&self) -> usize {
        self.m
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.m as f64 + 1.0)
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 * self.h()
    }

    pub fn nodes(&self) -> Vec<f64> {
        // force exact endpoints so partitions cover (0,1) to the last ulp
        let mut v: Vec<f64> = (0..=self.m + 1).map(|i| self.node(i)).collect();
        v[self.m + 1] = 1.0;
        v
    }
}

fn difference_quotient_cells(mesh: &Mesh1D) -> (Vec<f64>, Vec<Vec<(usize, f64)>>) {
    let m = mesh.interior_nodes();
    let h = mesh.h();
    let breaks = mesh.nodes();
    let mut cells = Vec::with_capacity(m + 1);
    for i in 0..=m {
        // cell (ih, (i+1)h): (w_{i+1} - w_i)/h with dof index i-1 for node i
        let mut terms = Vec::with_capacity(2);
        if i + 1 <= m {
            terms.push((i, 1.0 / h));
        }
        if i >= 1 {
            terms.push((i - 1, -1.0 / h));
        }
        cells.push(terms);
    }
    (breaks, cells)
}

/// Control Volume Finite Element instance: piecewise-constant function
/// reconstruction on staggered cells ((i-1/2)h, (i+1/2)h) ∩ (0,1), P1
/// difference-quotient gradients. The lumped function Gram is diagonal.
pub fn build_cvfe(m: usize) -> Result<GradientDiscretisation> {
    let mesh = Mesh1D::new(m)?;
    let h = mesh.h();
    let mut fn_breaks = Vec::with_capacity(m + 3);
    fn_breaks.push(0.0);
    for i in 0..=m {
        fn_breaks.push((i as f64 + 0.5) * h);
    }
    fn_breaks.push(1.0);

    let mut fn_cells = Vec::with_capacity(m + 2);
    fn_cells.push(FunctionCell::default()); // (0, h/2): boundary value 0
    for i in 1..=m {
        fn_cells.push(FunctionCell {
            avg: vec![(i - 1, 1.0)],
            slope: vec![],
        });
    }
    fn_cells.push(FunctionCell::default()); // (1 - h/2, 1)

    let (grad_breaks, grad_cells) = difference_quotient_cells(&mesh);
    GradientDiscretisation::assemble(m, fn_breaks, fn_cells, grad_breaks, grad_cells, "cvfe")
}

/// Conforming P1 instance: the function reconstruction is the hat-function
/// interpolant itself, so the conformity error vanishes.
pub fn build_p1(m: usize) -> Result<GradientDiscretisation> {
    let mesh = Mesh1D::new(m)?;
    let h = mesh.h();
    let fn_breaks = mesh.nodes();
    let mut fn_cells = Vec::with_capacity(m + 1);
    for i in 0..=m {
        // cell (ih, (i+1)h): affine between nodal values w_i and w_{i+1}
        let mut avg = Vec::with_capacity(2);
        let mut slope = Vec::with_capacity(2);
        if i >= 1 {
            avg.push((i - 1, 0.5));
            slope.push((i - 1, -1.0 / h));
        }
        if i + 1 <= m {
            avg.push((i, 0.5));
            slope.push((i, 1.0 / h));
        }
        fn_cells.push(FunctionCell { avg, slope });
    }
    let (grad_breaks, grad_cells) = difference_quotient_cells(&mesh);
    GradientDiscretisation::assemble(m, fn_breaks, fn_cells, grad_breaks, grad_cells, "p1")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{SpaceFn, WeightOperator};
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mesh_rejects_zero_nodes() {
        assert!(Mesh1D::new(0).is_err());
        assert!(build_cvfe(0).is_err());
        assert!(build_p1(0).is_err());
    }

    #[test]
    fn mesh_covers_unit_interval_exactly() {
        for m in [1, 3, 7, 100] {
            let mesh = Mesh1D::new(m).unwrap();
            let nodes = mesh.nodes();
            assert_eq!(nodes[0], 0.0);
            assert_eq!(nodes[m + 1], 1.0);
            assert!((mesh.h() * (m as f64 + 1.0) - 1.0).abs() <= f64::EPSILON);
            assert!(nodes.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn cvfe_reconstructions_hand_example() {
        // M = 3, w = (1, 2, 1): staggered cells carry (0, 1, 2, 1, 0) and the
        // four gradient cells carry (4, 4, -4, -4).
        let d = build_cvfe(3).unwrap();
        let w = [1.0, 2.0, 1.0];
        let f = d.reconstruct_function(&w).unwrap();
        assert_eq!(f.cell_count(), 5);
        let expect = [0.0, 1.0, 2.0, 1.0, 0.0];
        for (i, &v) in expect.iter().enumerate() {
            let mid = 0.5 * (f.breaks()[i] + f.breaks()[i + 1]);
            assert_relative_eq!(f.eval(mid), v, epsilon = 1e-14);
        }
        let g = d.reconstruct_gradient(&w).unwrap();
        assert_eq!(g.values(), &[4.0, 4.0, -4.0, -4.0]);
        assert_relative_eq!(g.norm_sq(), 16.0, max_relative = 1e-14);
    }

    #[test]
    fn zero_dofs_reconstruct_zero() {
        let d = build_cvfe(5).unwrap();
        let z = vec![0.0; 5];
        assert_eq!(d.reconstruct_function(&z).unwrap().norm_sq(), 0.0);
        assert_eq!(d.reconstruct_gradient(&z).unwrap().norm_sq(), 0.0);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let d = build_cvfe(3).unwrap();
        assert!(d.reconstruct_function(&[1.0]).is_err());
        assert!(d.reconstruct_gradient(&[1.0, 2.0, 3.0, 4.0]).is_err());
    }

    #[test]
    fn cvfe_gradient_matches_p1_interpolant_gradient() {
        // G_h w equals the classical gradient of the hat-basis interpolant.
        let m = 9;
        let cvfe = build_cvfe(m).unwrap();
        let p1 = build_p1(m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..100 {
            let w: Vec<f64> = (0..m).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            let gc = cvfe.reconstruct_gradient(&w).unwrap();
            let gp = p1.reconstruct_gradient(&w).unwrap();
            for (a, b) in gc.values().iter().zip(gp.values()) {
                assert_relative_eq!(a, b, epsilon = 1e-13, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn cvfe_gram_structures() {
        // gradient Gram is the P1 stiffness (2/h diag, -1/h off), function
        // Gram is diagonal with entries h (mass lumping)
        for m in [1usize, 4, 17, 64] {
            let d = build_cvfe(m).unwrap();
            let h = 1.0 / (m as f64 + 1.0);
            let k = d.stiffness();
            let mass = d.mass();
            for i in 0..m {
                assert_relative_eq!(k.get(i, i), 2.0 / h, max_relative = 1e-12);
                assert_relative_eq!(mass.get(i, i), h, max_relative = 1e-12);
                for j in (i + 1)..m {
                    if j == i + 1 {
                        assert_relative_eq!(k.get(i, j), -1.0 / h, max_relative = 1e-12);
                    } else {
                        assert_eq!(k.get(i, j), 0.0);
                    }
                    assert_eq!(mass.get(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn p1_consistent_mass_structure() {
        for m in [2usize, 5, 33] {
            let d = build_p1(m).unwrap();
            let h = 1.0 / (m as f64 + 1.0);
            let mass = d.mass();
            for i in 0..m {
                assert_relative_eq!(mass.get(i, i), 2.0 * h / 3.0, max_relative = 1e-12);
                if i + 1 < m {
                    assert_relative_eq!(mass.get(i, i + 1), h / 6.0, max_relative = 1e-12);
                }
            }
        }
    }

    #[test]
    fn p1_single_hat_norms() {
        // M = 1: gradient (2, -2); ‖G w‖² = 4 and ‖P w‖² = 1/3
        let d = build_p1(1).unwrap();
        let g = d.reconstruct_gradient(&[1.0]).unwrap();
        assert_eq!(g.values(), &[2.0, -2.0]);
        assert_relative_eq!(g.norm_sq(), 4.0, max_relative = 1e-14);
        let f = d.reconstruct_function(&[1.0]).unwrap();
        assert_relative_eq!(f.norm_sq(), 1.0 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn p1_conformity_integration_by_parts() {
        // ⟨φ, G w⟩ + ⟨Dφ, P w⟩ = 0 for conforming reconstructions, with
        // φ = x(1-x) and Dφ = 1-2x its distributional divergence partner.
        let d = build_p1(6).unwrap();
        let phi = SpaceFn::new(|x: f64| x * (1.0 - x));
        let dphi = SpaceFn::new(|x: f64| 1.0 - 2.0 * x);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let w: Vec<f64> = (0..6).map(|_| rng.gen::<f64>() - 0.5).collect();
            let g = d.reconstruct_gradient(&w).unwrap();
            let p = d.reconstruct_function(&w).unwrap();
            let lhs = g.inner_fn(&phi, 1e-12) + p.inner_fn(&dphi, 1e-12);
            assert!(lhs.abs() <= 1e-10, "conformity defect {lhs}");
        }
    }

    #[test]
    fn weighted_stiffness_scales() {
        let d = build_cvfe(4).unwrap();
        let s = WeightOperator::constant(4.0).unwrap();
        let k4 = d.stiffness_weighted(&s);
        for i in 0..4 {
            for j in 0..4 {
                assert_relative_eq!(
                    k4.get(i, j),
                    4.0 * d.stiffness().get(i, j),
                    max_relative = 1e-14,
                    epsilon = 1e-300
                );
            }
        }
    }
}
