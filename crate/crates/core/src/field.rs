//! Reconstructed fields on Ω = (0, 1).
//!
//! `PiecewiseField` carries per-cell polynomials of degree ≤ 1 with an
//! implicit 2-point Gauss rule per cell, which integrates products of two
//! such fields exactly. `PiecewiseGradient` carries per-cell constants.
//! Fields with different partitions are combined on the merged partition.

use crate::error::{GdmError, Result};
use crate::quadrature::{self, GAUSS2};
use std::sync::Arc;

/// An analytic function of x with declared breakpoints, so quadrature panels
/// never straddle a kink.
#[derive(Clone)]
pub struct SpaceFn {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub breakpoints: Vec<f64>,
}

impl SpaceFn {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        SpaceFn {
            f: Arc::new(f),
            breakpoints: Vec::new(),
        }
    }

    pub fn with_breaks(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        breakpoints: Vec<f64>,
    ) -> Self {
        SpaceFn {
            f: Arc::new(f),
            breakpoints,
        }
    }

    pub fn zero() -> Self {
        SpaceFn::new(|_| 0.0)
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }
}

fn check_partition(breaks: &[f64]) -> Result<()> {
    if breaks.len() < 2 {
        return Err(GdmError::InvalidDiscretisation(
            "partition needs at least one cell".into(),
        ));
    }
    for w in breaks.windows(2) {
        if !(w[1] > w[0]) {
            return Err(GdmError::InvalidDiscretisation(
                "partition breakpoints must be strictly increasing".into(),
            ));
        }
    }
    if (breaks[0]).abs() > 1e-14 || (breaks[breaks.len() - 1] - 1.0).abs() > 1e-14 {
        return Err(GdmError::InvalidDiscretisation(
            "partition must cover (0, 1)".into(),
        ));
    }
    Ok(())
}

/// Merge two sorted breakpoint lists, deduplicating exact ties.
pub fn merge_breaks(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let v = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => {
                if x < y {
                    i += 1;
                    x
                } else if y < x {
                    j += 1;
                    y
                } else {
                    i += 1;
                    j += 1;
                    x
                }
            }
            (Some(&x), None) => {
                i += 1;
                x
            }
            (None, Some(&y)) => {
                j += 1;
                y
            }
            (None, None) => break,
        };
        if out.last().map_or(true, |&l| v > l) {
            out.push(v);
        }
    }
    out
}

#[inline]
fn locate(breaks: &[f64], x: f64) -> usize {
    // index of the cell containing x; clamps at the ends
    match breaks.binary_search_by(|b| b.partial_cmp(&x).unwrap()) {
        Ok(i) => i.min(breaks.len() - 2),
        Err(i) => i.saturating_sub(1).min(breaks.len() - 2),
    }
}

/// Element of L = L²(0,1): per-cell polynomial of degree ≤ 1, written about
/// the cell midpoint as `avg + slope · (x − mid)`.
#[derive(Debug, Clone)]
pub struct PiecewiseField {
    breaks: Vec<f64>,
    avg: Vec<f64>,
    slope: Vec<f64>,
}

impl PiecewiseField {
    pub fn new(breaks: Vec<f64>, avg: Vec<f64>, slope: Vec<f64>) -> Result<Self> {
        check_partition(&breaks)?;
        if avg.len() != breaks.len() - 1 || slope.len() != breaks.len() - 1 {
            return Err(GdmError::DimensionMismatch {
                expected: breaks.len() - 1,
                got: avg.len(),
            });
        }
        Ok(PiecewiseField { breaks, avg, slope })
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn cell_count(&self) -> usize {
        self.avg.len()
    }

    pub fn avg(&self) -> &[f64] {
        &self.avg
    }

    pub fn slope(&self) -> &[f64] {
        &self.slope
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let i = locate(&self.breaks, x);
        let mid = 0.5 * (self.breaks[i] + self.breaks[i + 1]);
        self.avg[i] + self.slope[i] * (x - mid)
    }

    /// Evaluate treating the field as the given cell's polynomial (used on
    /// merged partitions where x may be a shared breakpoint).
    #[inline]
    fn eval_in(&self, i: usize, x: f64) -> f64 {
        let mid = 0.5 * (self.breaks[i] + self.breaks[i + 1]);
        self.avg[i] + self.slope[i] * (x - mid)
    }

    /// L² inner product; exact for per-cell degree ≤ 1 polynomials via the
    /// stored 2-point Gauss rule on the merged partition.
    pub fn inner(&self, other: &PiecewiseField) -> f64 {
        let merged = merge_breaks(&self.breaks, &other.breaks);
        let mut acc = 0.0;
        let mut ia = 0usize;
        let mut ib = 0usize;
        for w in merged.windows(2) {
            let (a, b) = (w[0], w[1]);
            let mid = 0.5 * (a + b);
            while self.breaks[ia + 1] < mid {
                ia += 1;
            }
            while other.breaks[ib + 1] < mid {
                ib += 1;
            }
            let half = 0.5 * (b - a);
            for &(xi, wi) in &GAUSS2 {
                let x = mid + half * xi;
                acc += wi * half * self.eval_in(ia, x) * other.eval_in(ib, x);
            }
        }
        acc
    }

    pub fn norm_sq(&self) -> f64 {
        // exact cellwise: ∫(a + b(x-mid))² = a²|c| + b²|c|³/12
        let mut acc = 0.0;
        for i in 0..self.avg.len() {
            let m = self.breaks[i + 1] - self.breaks[i];
            acc += self.avg[i] * self.avg[i] * m + self.slope[i] * self.slope[i] * m * m * m / 12.0;
        }
        acc
    }

    pub fn integral(&self) -> f64 {
        self.avg
            .iter()
            .enumerate()
            .map(|(i, a)| a * (self.breaks[i + 1] - self.breaks[i]))
            .sum()
    }

    /// ⟨self, f⟩ for analytic f by adaptive composite Gauss on the partition
    /// refined with f's breakpoints.
    pub fn inner_fn(&self, f: &SpaceFn, rel_tol: f64) -> f64 {
        let breaks = merge_breaks(&self.breaks, &f.breakpoints);
        quadrature::integrate(|x| self.eval(x) * f.eval(x), 0.0, 1.0, &breaks, rel_tol)
    }

    /// ∫ (self − f)² by adaptive quadrature.
    pub fn diff_norm_sq_fn(&self, f: &SpaceFn, rel_tol: f64) -> f64 {
        let breaks = merge_breaks(&self.breaks, &f.breakpoints);
        quadrature::integrate(
            |x| {
                let d = self.eval(x) - f.eval(x);
                d * d
            },
            0.0,
            1.0,
            &breaks,
            rel_tol,
        )
    }

    pub fn axpy(&self, c: f64, other: &PiecewiseField) -> PiecewiseField {
        // result on the merged partition
        let merged = merge_breaks(&self.breaks, &other.breaks);
        let n = merged.len() - 1;
        let mut avg = vec![0.0; n];
        let mut slope = vec![0.0; n];
        for i in 0..n {
            let mid = 0.5 * (merged[i] + merged[i + 1]);
            let ia = locate(&self.breaks, mid);
            let ib = locate(&other.breaks, mid);
            avg[i] = self.eval_in(ia, mid) + c * other.eval_in(ib, mid);
            slope[i] = self.slope[ia] + c * other.slope[ib];
        }
        PiecewiseField {
            breaks: merged,
            avg,
            slope,
        }
    }
}

/// Element of L² as a gradient reconstruction: per-cell constant value.
#[derive(Debug, Clone)]
pub struct PiecewiseGradient {
    breaks: Vec<f64>,
    value: Vec<f64>,
}

impl PiecewiseGradient {
    pub fn new(breaks: Vec<f64>, value: Vec<f64>) -> Result<Self> {
        check_partition(&breaks)?;
        if value.len() != breaks.len() - 1 {
            return Err(GdmError::DimensionMismatch {
                expected: breaks.len() - 1,
                got: value.len(),
            });
        }
        Ok(PiecewiseGradient { breaks, value })
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn values(&self) -> &[f64] {
        &self.value
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.value[locate(&self.breaks, x)]
    }

    pub fn inner(&self, other: &PiecewiseGradient) -> f64 {
        self.inner_weighted(other, None)
    }

    /// ⟨w · self, other⟩ with an optional piecewise-constant weight.
    pub fn inner_weighted(&self, other: &PiecewiseGradient, weight: Option<&WeightOperator>) -> f64 {
        let mut merged = merge_breaks(&self.breaks, &other.breaks);
        if let Some(w) = weight {
            merged = merge_breaks(&merged, &w.breaks);
        }
        let mut acc = 0.0;
        for win in merged.windows(2) {
            let mid = 0.5 * (win[0] + win[1]);
            let m = win[1] - win[0];
            let wv = weight.map_or(1.0, |w| w.eval(mid));
            acc += wv * self.eval(mid) * other.eval(mid) * m;
        }
        acc
    }

    pub fn norm_sq(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.value.len() {
            acc += self.value[i] * self.value[i] * (self.breaks[i + 1] - self.breaks[i]);
        }
        acc
    }

    pub fn weighted_norm_sq(&self, weight: &WeightOperator) -> f64 {
        self.inner_weighted(self, Some(weight))
    }

    pub fn inner_fn(&self, f: &SpaceFn, rel_tol: f64) -> f64 {
        let breaks = merge_breaks(&self.breaks, &f.breakpoints);
        quadrature::integrate(|x| self.eval(x) * f.eval(x), 0.0, 1.0, &breaks, rel_tol)
    }

    pub fn diff_norm_sq_fn(&self, f: &SpaceFn, rel_tol: f64) -> f64 {
        let breaks = merge_breaks(&self.breaks, &f.breakpoints);
        quadrature::integrate(
            |x| {
                let d = self.eval(x) - f.eval(x);
                d * d
            },
            0.0,
            1.0,
            &breaks,
            rel_tol,
        )
    }
}

/// The symmetric positive definite weight on gradient space, stored as a
/// piecewise-constant positive scalar (its action in 1D). Square-root and
/// inverse act cellwise.
#[derive(Debug, Clone)]
pub struct WeightOperator {
    breaks: Vec<f64>,
    value: Vec<f64>,
}

impl WeightOperator {
    pub fn identity() -> Self {
        WeightOperator {
            breaks: vec![0.0, 1.0],
            value: vec![1.0],
        }
    }

    pub fn constant(c: f64) -> Result<Self> {
        WeightOperator::cellwise(vec![0.0, 1.0], vec![c])
    }

    pub fn cellwise(breaks: Vec<f64>, value: Vec<f64>) -> Result<Self> {
        check_partition(&breaks)?;
        if value.len() != breaks.len() - 1 {
            return Err(GdmError::DimensionMismatch {
                expected: breaks.len() - 1,
                got: value.len(),
            });
        }
        if value.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(GdmError::InvalidData(
                "weight operator must be strictly positive".into(),
            ));
        }
        Ok(WeightOperator { breaks, value })
    }

    pub fn is_identity(&self) -> bool {
        self.value.iter().all(|&v| v == 1.0)
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.value[locate(&self.breaks, x)]
    }

    pub fn sqrt(&self) -> WeightOperator {
        WeightOperator {
            breaks: self.breaks.clone(),
            value: self.value.iter().map(|v| v.sqrt()).collect(),
        }
    }

    pub fn inverse(&self) -> WeightOperator {
        WeightOperator {
            breaks: self.breaks.clone(),
            value: self.value.iter().map(|v| 1.0 / v).collect(),
        }
    }

    pub fn apply(&self, g: &PiecewiseGradient) -> PiecewiseGradient {
        let merged = merge_breaks(&self.breaks, &g.breaks);
        let value = merged
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                self.eval(mid) * g.eval(mid)
            })
            .collect();
        PiecewiseGradient {
            breaks: merged,
            value,
        }
    }

    /// Mean of the weight over (a, b); exact for the piecewise-constant
    /// representation.
    pub fn mean_over(&self, a: f64, b: f64) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.value.len() {
            let lo = self.breaks[i].max(a);
            let hi = self.breaks[i + 1].min(b);
            if hi > lo {
                acc += self.value[i] * (hi - lo);
            }
        }
        acc / (b - a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn field_norm_matches_gauss_rule() {
        // hat function on (0,1) with node at 1/2: ∫ = 1/3 (checked two ways)
        let f = PiecewiseField::new(
            vec![0.0, 0.5, 1.0],
            vec![0.5, 0.5],
            vec![2.0, -2.0],
        )
        .unwrap();
        assert_relative_eq!(f.norm_sq(), 1.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(f.inner(&f), 1.0 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn inner_exact_on_mismatched_partitions() {
        // f = x on (0,1) split one way, g = 1 - x split another; ⟨f,g⟩ = 1/6
        let f = PiecewiseField::new(vec![0.0, 0.25, 1.0], vec![0.125, 0.625], vec![1.0, 1.0])
            .unwrap();
        let g = PiecewiseField::new(vec![0.0, 0.7, 1.0], vec![0.65, 0.15], vec![-1.0, -1.0])
            .unwrap();
        assert_relative_eq!(f.inner(&g), 1.0 / 6.0, max_relative = 1e-14);
    }

    #[test]
    fn gradient_weighted_inner() {
        let g = PiecewiseGradient::new(vec![0.0, 0.5, 1.0], vec![2.0, -2.0]).unwrap();
        assert_relative_eq!(g.norm_sq(), 4.0, max_relative = 1e-14);
        let w = WeightOperator::cellwise(vec![0.0, 0.5, 1.0], vec![1.0, 4.0]).unwrap();
        assert_relative_eq!(g.weighted_norm_sq(&w), 0.5 * 4.0 + 0.5 * 4.0 * 4.0, max_relative = 1e-14);
    }

    #[test]
    fn weight_sqrt_composes_to_weight() {
        let w = WeightOperator::cellwise(vec![0.0, 0.3, 1.0], vec![2.0, 9.0]).unwrap();
        let g = PiecewiseGradient::new(vec![0.0, 0.5, 1.0], vec![1.0, -3.0]).unwrap();
        let twice = w.sqrt().apply(&w.sqrt().apply(&g));
        let once = w.apply(&g);
        for x in [0.1, 0.4, 0.8] {
            assert_relative_eq!(twice.eval(x), once.eval(x), max_relative = 1e-14);
        }
    }

    #[test]
    fn weight_rejects_nonpositive() {
        assert!(WeightOperator::cellwise(vec![0.0, 1.0], vec![0.0]).is_err());
        assert!(WeightOperator::cellwise(vec![0.0, 1.0], vec![-1.0]).is_err());
    }

    #[test]
    fn inner_fn_with_kink() {
        let f = PiecewiseField::new(vec![0.0, 1.0], vec![1.0], vec![0.0]).unwrap();
        let tent = SpaceFn::with_breaks(|x: f64| x.min(1.0 - x), vec![0.5]);
        assert_relative_eq!(f.inner_fn(&tent, 1e-12), 0.25, max_relative = 1e-12);
    }

    #[test]
    fn partition_must_cover_domain() {
        assert!(PiecewiseField::new(vec![0.0, 0.5], vec![1.0], vec![0.0]).is_err());
        assert!(PiecewiseGradient::new(vec![0.0, 0.4, 0.2, 1.0], vec![1.0, 1.0, 1.0]).is_err());
    }
}
