use nalgebra::{DMatrix, DVector};

use super::small::{solve_in_place, SmallMat};
use super::ChartPoint;
use crate::error::{Error, Result};

/// Largest chart dimension supported by the stack-allocated integrator kernels.
pub const MAX_DIM: usize = 8;

/// Central-difference step for the numeric Christoffel fallback.
pub const FD_STEP: f64 = 1e-5;

/// Bound on `sup ‖Dφ − I‖` accepted for nonlinear pullback metrics.
const MAX_PERTURBATION: f64 = 0.5;

/// One term `amplitude · sin(⟨frequency, x⟩ + phase)` added to coordinate
/// `component` of the pullback diffeomorphism `φ = id + ψ`.
#[derive(Clone, Debug, PartialEq)]
pub struct SineTerm {
    pub component: usize,
    pub amplitude: f64,
    pub frequency: Vec<f64>,
    pub phase: f64,
}

impl SineTerm {
    fn angle(&self, x: &[f64]) -> f64 {
        self.frequency
            .iter()
            .zip(x)
            .map(|(w, xi)| w * xi)
            .sum::<f64>()
            + self.phase
    }

    fn slope_bound(&self) -> f64 {
        self.amplitude.abs() * self.frequency.iter().map(|w| w * w).sum::<f64>().sqrt()
    }
}

#[derive(Clone, Debug)]
pub enum MetricFamily {
    Flat,
    /// `g = AᵀA`, the pullback of the Euclidean metric by `x ↦ A x`.
    LinearPullback {
        matrix: DMatrix<f64>,
        inverse: DMatrix<f64>,
    },
    /// `g = DφᵀDφ` with `φ = id + Σ sine terms`.
    NonlinearPullback { terms: Vec<SineTerm>, lipschitz: f64 },
    /// `g = e^{2f} I` with `f(x) = ⟨linear, x⟩ + quadratic · |x|² / 2`.
    Conformal { linear: DVector<f64>, quadratic: f64 },
}

/// A Riemannian metric on the global chart ℝⁿ.
#[derive(Clone, Debug)]
pub struct MetricField {
    dim: usize,
    family: MetricFamily,
    analytic: bool,
}

/// Christoffel symbols `Γᵏᵢⱼ` at one point, stored densely.
#[derive(Clone, Debug, PartialEq)]
pub struct Christoffel {
    dim: usize,
    data: Vec<f64>,
}

impl Christoffel {
    fn zeros(dim: usize) -> Self {
        Christoffel {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }

    fn idx(&self, k: usize, i: usize, j: usize) -> usize {
        (k * self.dim + i) * self.dim + j
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[self.idx(k, i, j)]
    }

    fn set(&mut self, k: usize, i: usize, j: usize, value: f64) {
        let at = self.idx(k, i, j);
        self.data[at] = value;
    }

    /// Largest asymmetry `|Γᵏᵢⱼ − Γᵏⱼᵢ|`.
    pub fn max_asymmetry(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    worst = worst.max((self.get(k, i, j) - self.get(k, j, i)).abs());
                }
            }
        }
        worst
    }

    pub fn max_abs_difference(&self, other: &Christoffel) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `Γᵏᵢⱼ vⁱ vʲ`.
    pub fn contract(&self, v: &[f64]) -> DVector<f64> {
        let n = self.dim;
        DVector::from_fn(n, |k, _| {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += self.get(k, i, j) * v[i] * v[j];
                }
            }
            s
        })
    }
}

impl MetricField {
    fn check_dim(dim: usize) -> Result<()> {
        if !(2..=MAX_DIM).contains(&dim) {
            return Err(Error::config(format!(
                "dimension {dim} outside supported range 2..={MAX_DIM}"
            )));
        }
        Ok(())
    }

    pub fn flat(dim: usize) -> Result<Self> {
        Self::check_dim(dim)?;
        Ok(MetricField {
            dim,
            family: MetricFamily::Flat,
            analytic: true,
        })
    }

    pub fn linear_pullback(matrix: DMatrix<f64>) -> Result<Self> {
        let dim = matrix.nrows();
        Self::check_dim(dim)?;
        if matrix.ncols() != dim {
            return Err(Error::config("linear pullback matrix must be square"));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("linear pullback matrix has non-finite entries"));
        }
        let inverse = matrix
            .clone()
            .try_inverse()
            .filter(|inv| inv.iter().all(|v| v.is_finite()))
            .ok_or_else(|| Error::config("linear pullback matrix is singular"))?;
        Ok(MetricField {
            dim,
            family: MetricFamily::LinearPullback { matrix, inverse },
            analytic: true,
        })
    }

    pub fn nonlinear_pullback(dim: usize, terms: Vec<SineTerm>) -> Result<Self> {
        Self::check_dim(dim)?;
        let mut problems = Vec::new();
        let mut row_bounds = vec![0.0; dim];
        for (t, term) in terms.iter().enumerate() {
            if term.component >= dim {
                problems.push(format!(
                    "term {t}: component {} out of range for dimension {dim}",
                    term.component
                ));
                continue;
            }
            if term.frequency.len() != dim {
                problems.push(format!(
                    "term {t}: frequency has {} entries, expected {dim}",
                    term.frequency.len()
                ));
                continue;
            }
            if !term.amplitude.is_finite()
                || !term.phase.is_finite()
                || term.frequency.iter().any(|w| !w.is_finite())
            {
                problems.push(format!("term {t}: non-finite parameter"));
                continue;
            }
            row_bounds[term.component] += term.slope_bound();
        }
        // Frobenius bound on ‖Dψ‖.
        let lipschitz = row_bounds.iter().map(|b| b * b).sum::<f64>().sqrt();
        if problems.is_empty() && lipschitz > MAX_PERTURBATION {
            problems.push(format!(
                "perturbation bound sup‖Dφ − I‖ ≤ {lipschitz:.4} exceeds {MAX_PERTURBATION}"
            ));
        }
        if !problems.is_empty() {
            return Err(Error::Config(problems));
        }
        Ok(MetricField {
            dim,
            family: MetricFamily::NonlinearPullback { terms, lipschitz },
            analytic: true,
        })
    }

    pub fn conformal(linear: DVector<f64>, quadratic: f64) -> Result<Self> {
        let dim = linear.len();
        Self::check_dim(dim)?;
        if linear.iter().any(|v| !v.is_finite()) || !quadratic.is_finite() {
            return Err(Error::config("conformal exponent has non-finite coefficients"));
        }
        if quadratic < 0.0 {
            return Err(Error::config(
                "conformal quadratic coefficient must be nonnegative",
            ));
        }
        Ok(MetricField {
            dim,
            family: MetricFamily::Conformal { linear, quadratic },
            analytic: true,
        })
    }

    /// Forces the central-difference Christoffel path even when the family
    /// has closed-form derivatives.
    pub fn with_numeric_christoffel(mut self) -> Self {
        self.analytic = false;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn family(&self) -> &MetricFamily {
        &self.family
    }

    pub fn tag(&self) -> &'static str {
        match self.family {
            MetricFamily::Flat => "flat",
            MetricFamily::LinearPullback { .. } => "linear-pullback",
            MetricFamily::NonlinearPullback { .. } => "nonlinear-pullback",
            MetricFamily::Conformal { .. } => "conformal",
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::domain(format!(
                "point has {} coordinates, metric is {}-dimensional",
                x.len(),
                self.dim
            )));
        }
        if x.iter().any(|c| !c.is_finite()) {
            return Err(Error::domain(format!("non-finite chart point {x:?}")));
        }
        Ok(())
    }

    /// The metric tensor `g(x)`.
    pub fn metric_at(&self, x: &ChartPoint) -> Result<DMatrix<f64>> {
        self.check_point(x.as_slice())?;
        let g = self.metric_raw(x.as_slice());
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric(format!(
                "metric overflows at {:?}",
                x.as_slice()
            )));
        }
        Ok(g)
    }

    pub(crate) fn metric_raw(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.dim;
        match &self.family {
            MetricFamily::Flat => DMatrix::identity(n, n),
            MetricFamily::LinearPullback { matrix, .. } => matrix.transpose() * matrix,
            MetricFamily::NonlinearPullback { terms, .. } => {
                let j = nonlinear_jacobian(n, terms, x);
                j.transpose() * j
            }
            MetricFamily::Conformal { linear, quadratic } => {
                let f = conformal_exponent(linear, *quadratic, x);
                DMatrix::identity(n, n) * (2.0 * f).exp()
            }
        }
    }

    pub fn inner_at(&self, x: &ChartPoint, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
        let g = self.metric_at(x)?;
        Ok(u.dot(&(g * v)))
    }

    pub fn norm_at(&self, x: &ChartPoint, v: &DVector<f64>) -> Result<f64> {
        Ok(self.inner_at(x, v, v)?.max(0.0).sqrt())
    }

    /// Christoffel symbols of the second kind. Closed form when available,
    /// central differences of `metric_at` otherwise.
    pub fn christoffel_at(&self, x: &ChartPoint) -> Result<Christoffel> {
        self.check_point(x.as_slice())?;
        if !self.analytic {
            return self.christoffel_numeric(x);
        }
        let n = self.dim;
        let xs = x.as_slice();
        let mut gamma = Christoffel::zeros(n);
        match &self.family {
            MetricFamily::Flat | MetricFamily::LinearPullback { .. } => {}
            MetricFamily::NonlinearPullback { terms, .. } => {
                // Γᵏᵢⱼ = (Dφ⁻¹)ₖₐ ∂ᵢ∂ⱼφᵃ
                let jinv = nonlinear_jacobian(n, terms, xs)
                    .try_inverse()
                    .ok_or_else(|| Error::numeric("singular pullback Jacobian"))?;
                let mut hess = vec![0.0; n * n * n];
                for term in terms {
                    let s = -term.amplitude * term.angle(xs).sin();
                    for i in 0..n {
                        for j in 0..n {
                            hess[(term.component * n + i) * n + j] +=
                                s * term.frequency[i] * term.frequency[j];
                        }
                    }
                }
                for k in 0..n {
                    for i in 0..n {
                        for j in 0..n {
                            let v = (0..n).map(|a| jinv[(k, a)] * hess[(a * n + i) * n + j]).sum();
                            gamma.set(k, i, j, v);
                        }
                    }
                }
            }
            MetricFamily::Conformal { linear, quadratic } => {
                let grad: Vec<f64> = (0..n).map(|i| linear[i] + quadratic * xs[i]).collect();
                for k in 0..n {
                    for i in 0..n {
                        for j in 0..n {
                            let mut v = 0.0;
                            if i == k {
                                v += grad[j];
                            }
                            if j == k {
                                v += grad[i];
                            }
                            if i == j {
                                v -= grad[k];
                            }
                            gamma.set(k, i, j, v);
                        }
                    }
                }
            }
        }
        Ok(gamma)
    }

    /// Christoffel symbols from central differences of the metric with step
    /// [`FD_STEP`].
    pub fn christoffel_numeric(&self, x: &ChartPoint) -> Result<Christoffel> {
        self.check_point(x.as_slice())?;
        let n = self.dim;
        let xs = x.as_slice();
        let ginv = self
            .metric_raw(xs)
            .try_inverse()
            .ok_or_else(|| Error::numeric(format!("singular metric at {xs:?}")))?;
        // dg[l] = ∂ₗ g
        let dg: Vec<DMatrix<f64>> = (0..n)
            .map(|l| {
                let mut plus = xs.to_vec();
                let mut minus = xs.to_vec();
                plus[l] += FD_STEP;
                minus[l] -= FD_STEP;
                (self.metric_raw(&plus) - self.metric_raw(&minus)) / (2.0 * FD_STEP)
            })
            .collect();
        let mut gamma = Christoffel::zeros(n);
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut v = 0.0;
                    for l in 0..n {
                        v += ginv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                    }
                    gamma.set(k, i, j, 0.5 * v);
                }
            }
        }
        Ok(gamma)
    }

    /// Geodesic acceleration `ẍᵏ = −Γᵏᵢⱼ ẋⁱ ẋʲ`, written into `out`.
    /// Allocation-free for the closed-form families.
    pub(crate) fn accel(&self, x: &[f64], v: &[f64], out: &mut [f64]) -> bool {
        let n = self.dim;
        if !self.analytic {
            let Ok(p) = ChartPoint::from_slice(x) else {
                return false;
            };
            let Ok(gamma) = self.christoffel_numeric(&p) else {
                return false;
            };
            let c = gamma.contract(v);
            for k in 0..n {
                out[k] = -c[k];
            }
            return true;
        }
        match &self.family {
            MetricFamily::Flat | MetricFamily::LinearPullback { .. } => {
                out[..n].fill(0.0);
                true
            }
            MetricFamily::NonlinearPullback { terms, .. } => {
                // Dφ · ẍ = −D²ψ[ẋ, ẋ]
                let mut jac: SmallMat = [[0.0; MAX_DIM]; MAX_DIM];
                let mut rhs = [0.0; MAX_DIM];
                for (i, row) in jac.iter_mut().enumerate().take(n) {
                    row[i] = 1.0;
                }
                for term in terms {
                    let theta = term.angle(x);
                    let (s, c) = theta.sin_cos();
                    let wv: f64 = term.frequency.iter().zip(v).map(|(w, vi)| w * vi).sum();
                    let row = &mut jac[term.component];
                    for (col, w) in term.frequency.iter().enumerate() {
                        row[col] += term.amplitude * c * w;
                    }
                    rhs[term.component] += term.amplitude * s * wv * wv;
                }
                if !solve_in_place(n, &mut jac, &mut rhs) {
                    return false;
                }
                out[..n].copy_from_slice(&rhs[..n]);
                true
            }
            MetricFamily::Conformal { linear, quadratic } => {
                let mut gv = 0.0;
                let mut vv = 0.0;
                for i in 0..n {
                    gv += (linear[i] + quadratic * x[i]) * v[i];
                    vv += v[i] * v[i];
                }
                for k in 0..n {
                    let gk = linear[k] + quadratic * x[k];
                    out[k] = -(2.0 * v[k] * gv - vv * gk);
                }
                true
            }
        }
    }

    /// The diffeomorphism `φ` whose pullback of the flat metric is `g`, for
    /// the families that have one.
    pub fn pullback(&self, x: &[f64]) -> Option<DVector<f64>> {
        let n = self.dim;
        match &self.family {
            MetricFamily::Flat => Some(DVector::from_column_slice(x)),
            MetricFamily::LinearPullback { matrix, .. } => {
                Some(matrix * DVector::from_column_slice(x))
            }
            MetricFamily::NonlinearPullback { terms, .. } => {
                let mut y = DVector::from_column_slice(x);
                for term in terms {
                    y[term.component] += term.amplitude * term.angle(x).sin();
                }
                debug_assert_eq!(y.len(), n);
                Some(y)
            }
            MetricFamily::Conformal { .. } => None,
        }
    }

    /// `Dφ(x)` for pullback families.
    pub fn pullback_jacobian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        let n = self.dim;
        match &self.family {
            MetricFamily::Flat => Some(DMatrix::identity(n, n)),
            MetricFamily::LinearPullback { matrix, .. } => Some(matrix.clone()),
            MetricFamily::NonlinearPullback { terms, .. } => Some(nonlinear_jacobian(n, terms, x)),
            MetricFamily::Conformal { .. } => None,
        }
    }

    /// `φ⁻¹(y)`; Newton iteration for the nonlinear family.
    pub fn pullback_inverse(&self, y: &[f64]) -> Result<DVector<f64>> {
        self.check_point(y)?;
        let n = self.dim;
        match &self.family {
            MetricFamily::Flat => Ok(DVector::from_column_slice(y)),
            MetricFamily::LinearPullback { inverse, .. } => {
                Ok(inverse * DVector::from_column_slice(y))
            }
            MetricFamily::NonlinearPullback { terms, .. } => {
                let target = DVector::from_column_slice(y);
                let scale = target.amax().max(1.0);
                let mut x = target.clone();
                let residual_of = |x: &DVector<f64>| -> DVector<f64> {
                    let mut r = x - &target;
                    for term in terms {
                        r[term.component] += term.amplitude * term.angle(x.as_slice()).sin();
                    }
                    r
                };
                let mut r = residual_of(&x);
                for _ in 0..100 {
                    if r.amax() <= 1e-15 * scale {
                        break;
                    }
                    let jac = nonlinear_jacobian(n, terms, x.as_slice());
                    let step = jac
                        .lu()
                        .solve(&r)
                        .ok_or_else(|| Error::numeric("singular pullback Jacobian"))?;
                    let candidate = &x - step;
                    let rc = residual_of(&candidate);
                    if rc.amax() < r.amax() {
                        x = candidate;
                        r = rc;
                    } else {
                        // Fixed-point step x ← y − ψ(x) contracts with rate ≤ 1/2.
                        let fp = &x - &r;
                        let rf = residual_of(&fp);
                        if rf.amax() >= r.amax() {
                            break;
                        }
                        x = fp;
                        r = rf;
                    }
                }
                if r.amax() > 1e-12 * scale {
                    return Err(Error::numeric(format!(
                        "pullback inversion stalled at residual {:.3e}",
                        r.amax()
                    )));
                }
                Ok(x)
            }
            MetricFamily::Conformal { .. } => Err(Error::domain(
                "conformal metrics have no pullback diffeomorphism",
            )),
        }
    }

    /// True for families with an exact distance oracle `|φ(x) − φ(y)|`.
    pub fn has_oracle(&self) -> bool {
        !matches!(self.family, MetricFamily::Conformal { .. })
    }

    pub fn oracle_distance(&self, x: &[f64], y: &[f64]) -> Option<f64> {
        Some((self.pullback(x)? - self.pullback(y)?).norm())
    }

    /// Whether every pair of points is joined by a unique minimizing geodesic:
    /// flat pullbacks always, conformal metrics when they are Cartan–Hadamard
    /// surfaces.
    pub fn minimizing_guaranteed(&self) -> bool {
        match &self.family {
            MetricFamily::Conformal { linear, quadratic } => {
                (self.dim == 2 && *quadratic > 0.0)
                    || (*quadratic == 0.0 && linear.iter().all(|c| *c == 0.0))
            }
            _ => true,
        }
    }

    /// `sup ‖Dφ − I‖` bound (nonlinear) or exact value (flat, linear).
    pub fn perturbation_bound(&self) -> Option<f64> {
        let n = self.dim;
        match &self.family {
            MetricFamily::Flat => Some(0.0),
            MetricFamily::LinearPullback { matrix, .. } => {
                Some((matrix - DMatrix::<f64>::identity(n, n)).norm())
            }
            MetricFamily::NonlinearPullback { lipschitz, .. } => Some(*lipschitz),
            MetricFamily::Conformal { .. } => None,
        }
    }

    /// Constant `Λ` with `d(a, b) ≥ |a − b| / Λ` for chart points, when the
    /// family provides one analytically.
    pub fn chart_ratio_bound(&self) -> Option<f64> {
        match &self.family {
            MetricFamily::Flat => Some(1.0),
            MetricFamily::LinearPullback { inverse, .. } => {
                Some(inverse.clone().svd(false, false).singular_values.max())
            }
            MetricFamily::NonlinearPullback { lipschitz, .. } => Some(1.0 / (1.0 - lipschitz)),
            MetricFamily::Conformal { .. } => None,
        }
    }

    /// Lipschitz constant of `φ` (so `|φ(a) − φ(b)| ≤ L |a − b|`).
    pub fn pullback_lipschitz(&self) -> Option<f64> {
        match &self.family {
            MetricFamily::Flat => Some(1.0),
            MetricFamily::LinearPullback { matrix, .. } => {
                Some(matrix.clone().svd(false, false).singular_values.max())
            }
            MetricFamily::NonlinearPullback { lipschitz, .. } => Some(1.0 + lipschitz),
            MetricFamily::Conformal { .. } => None,
        }
    }

    /// Smallest eigenvalue of `g` over sampled points, used for the generic
    /// chart-to-metric distance ratio.
    pub fn min_eigenvalue_over(&self, points: &[DVector<f64>]) -> f64 {
        points
            .iter()
            .map(|p| {
                self.metric_raw(p.as_slice())
                    .symmetric_eigenvalues()
                    .min()
            })
            .fold(f64::INFINITY, f64::min)
    }
}

fn nonlinear_jacobian(n: usize, terms: &[SineTerm], x: &[f64]) -> DMatrix<f64> {
    let mut j = DMatrix::identity(n, n);
    for term in terms {
        let c = term.amplitude * term.angle(x).cos();
        for (col, w) in term.frequency.iter().enumerate() {
            j[(term.component, col)] += c * w;
        }
    }
    j
}

fn conformal_exponent(linear: &DVector<f64>, quadratic: f64, x: &[f64]) -> f64 {
    let lin: f64 = linear.iter().zip(x).map(|(c, xi)| c * xi).sum();
    let sq: f64 = x.iter().map(|xi| xi * xi).sum();
    lin + 0.5 * quadratic * sq
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn shear() -> MetricField {
        MetricField::linear_pullback(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0])).unwrap()
    }

    fn sine() -> MetricField {
        MetricField::nonlinear_pullback(
            2,
            vec![SineTerm {
                component: 1,
                amplitude: 0.3,
                frequency: vec![1.0, 0.0],
                phase: 0.0,
            }],
        )
        .unwrap()
    }

    fn pt(c: &[f64]) -> ChartPoint {
        ChartPoint::from_slice(c).unwrap()
    }

    #[test]
    fn flat_metric_is_identity() {
        let g = MetricField::flat(2).unwrap().metric_at(&pt(&[2.3, -1.0])).unwrap();
        assert_eq!(g, DMatrix::identity(2, 2));
    }

    #[test]
    fn shear_metric_is_ata() {
        let g = shear().metric_at(&pt(&[0.7, 4.0])).unwrap();
        assert_eq!(g, DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 2.0]));
    }

    #[test]
    fn sine_metric_at_origin() {
        let g = sine().metric_at(&pt(&[0.0, 0.0])).unwrap();
        assert_relative_eq!(g[(0, 0)], 1.09, epsilon = 1e-15);
        assert_relative_eq!(g[(0, 1)], 0.3, epsilon = 1e-15);
        assert_relative_eq!(g[(1, 0)], 0.3, epsilon = 1e-15);
        assert_relative_eq!(g[(1, 1)], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn non_finite_point_is_a_domain_error() {
        let m = MetricField::flat(2).unwrap();
        assert!(ChartPoint::from_slice(&[f64::NAN, 0.0]).is_err());
        assert!(matches!(
            m.metric_at(&ChartPoint(DVector::from_vec(vec![f64::INFINITY, 0.0]))),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn constant_metrics_have_zero_christoffels() {
        for m in [MetricField::flat(3).unwrap(), shear()] {
            let x = pt(&vec![0.4; m.dim()]);
            let g = m.christoffel_at(&x).unwrap();
            assert!(g.data.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn conformal_linear_exponent_christoffels() {
        let m = MetricField::conformal(DVector::from_vec(vec![1.0, 0.0]), 0.0).unwrap();
        let g = m.christoffel_at(&pt(&[0.3, -2.0])).unwrap();
        assert_relative_eq!(g.get(0, 0, 0), 1.0);
        assert_relative_eq!(g.get(0, 1, 1), -1.0);
        assert_relative_eq!(g.get(1, 0, 1), 1.0);
        assert_relative_eq!(g.get(1, 1, 0), 1.0);
        assert_eq!(g.get(1, 0, 0), 0.0);
    }

    #[test]
    fn analytic_christoffels_match_finite_differences() {
        let sine3 = MetricField::nonlinear_pullback(
            3,
            vec![
                SineTerm { component: 0, amplitude: 0.2, frequency: vec![0.0, 1.0, 0.0], phase: 0.1 },
                SineTerm { component: 1, amplitude: 0.2, frequency: vec![0.0, 0.0, 1.0], phase: 0.0 },
                SineTerm { component: 2, amplitude: 0.2, frequency: vec![1.0, 0.0, 0.0], phase: -0.4 },
            ],
        )
        .unwrap();
        let conf = MetricField::conformal(DVector::from_vec(vec![0.2, -0.1]), 0.1).unwrap();
        for (m, x) in [
            (sine(), vec![0.7, -1.3]),
            (sine3, vec![0.3, 1.1, -0.6]),
            (conf, vec![0.5, 0.9]),
        ] {
            let x = pt(&x);
            let a = m.christoffel_at(&x).unwrap();
            let f = m.christoffel_numeric(&x).unwrap();
            assert!(a.max_abs_difference(&f) < 1e-8, "{}", a.max_abs_difference(&f));
            assert!(a.max_asymmetry() < 1e-14);
            assert!(f.max_asymmetry() < 1e-9);
        }
    }

    #[test]
    fn accel_matches_christoffel_contraction() {
        let m = sine();
        let x = [0.4, 0.2];
        let v = [1.3, -0.7];
        let mut out = [0.0; 2];
        assert!(m.accel(&x, &v, &mut out));
        let c = m.christoffel_at(&pt(&x)).unwrap().contract(&v);
        assert_relative_eq!(out[0], -c[0], epsilon = 1e-14);
        assert_relative_eq!(out[1], -c[1], epsilon = 1e-14);

        let fd = sine().with_numeric_christoffel();
        let mut out_fd = [0.0; 2];
        assert!(fd.accel(&x, &v, &mut out_fd));
        assert_relative_eq!(out[0], out_fd[0], epsilon = 1e-8);
        assert_relative_eq!(out[1], out_fd[1], epsilon = 1e-8);
    }

    #[test]
    fn pullback_inverse_round_trips() {
        let m = sine();
        let y = [2.5, -1.25];
        let x = m.pullback_inverse(&y).unwrap();
        let back = m.pullback(x.as_slice()).unwrap();
        assert!((back - DVector::from_column_slice(&y)).amax() < 1e-13);
    }

    #[test]
    fn rejects_large_perturbations() {
        let err = MetricField::nonlinear_pullback(
            2,
            vec![SineTerm { component: 1, amplitude: 0.6, frequency: vec![1.0, 0.0], phase: 0.0 }],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn singular_linear_pullback_rejected() {
        assert!(MetricField::linear_pullback(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0])).is_err());
    }
}
