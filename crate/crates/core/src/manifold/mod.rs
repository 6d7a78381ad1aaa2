//! Riemannian metrics on a global chart of ℝⁿ and the geodesic primitives
//! built on them: initial-value integration, two-point shooting, distance and
//! radial projection.

mod geodesic;
mod metric;
pub(crate) mod ode;
pub(crate) mod small;

use nalgebra::DVector;

use crate::error::{Error, Result};

pub use geodesic::{
    distance, flow, geodesic_bvp, geodesic_ivp, radial_projection, shoot, GeodesicPath,
    PathSample, BVP_TOLERANCE, INTEGRATION_TOLERANCE, MAX_RESTARTS,
};
pub use metric::{Christoffel, MetricFamily, MetricField, SineTerm, FD_STEP, MAX_DIM};

/// A point of the manifold, written in the global chart.
#[derive(Clone, Debug, PartialEq)]
pub struct ChartPoint(DVector<f64>);

impl ChartPoint {
    pub fn new(coords: DVector<f64>) -> Result<Self> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::domain(format!(
                "chart point has non-finite coordinates {:?}",
                coords.as_slice()
            )));
        }
        Ok(ChartPoint(coords))
    }

    pub fn from_slice(coords: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(coords))
    }

    pub fn origin(dim: usize) -> Self {
        ChartPoint(DVector::zeros(dim))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }

    /// Euclidean distance between chart coordinates (not the Riemannian one).
    pub fn chart_distance(&self, other: &ChartPoint) -> f64 {
        (&self.0 - &other.0).norm()
    }
}

impl From<ChartPoint> for DVector<f64> {
    fn from(p: ChartPoint) -> Self {
        p.0
    }
}

/// A tangent vector in chart components, attached to its base point.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector {
    pub base: ChartPoint,
    pub components: DVector<f64>,
}

impl TangentVector {
    pub fn new(base: ChartPoint, components: DVector<f64>) -> Result<Self> {
        if components.len() != base.dim() {
            return Err(Error::domain(format!(
                "tangent vector has {} components at a {}-dimensional point",
                components.len(),
                base.dim()
            )));
        }
        if components.iter().any(|c| !c.is_finite()) {
            return Err(Error::domain("tangent vector has non-finite components"));
        }
        Ok(TangentVector { base, components })
    }

    /// Metric norm `sqrt(vᵀ g(base) v)`.
    pub fn norm(&self, metric: &MetricField) -> Result<f64> {
        metric.norm_at(&self.base, &self.components)
    }

    /// Rescale to unit metric norm.
    pub fn normalized(&self, metric: &MetricField) -> Result<Self> {
        let norm = self.norm(metric)?;
        if norm <= 0.0 || !norm.is_finite() {
            return Err(Error::domain("cannot normalize a zero tangent vector"));
        }
        Ok(TangentVector {
            base: self.base.clone(),
            components: &self.components / norm,
        })
    }
}
