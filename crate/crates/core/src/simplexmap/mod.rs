//! The recursive geodesic simplex map `Δ[u₀, …, u_k]`: the cone from `u₀`
//! over the map of the opposite face, built from minimizing geodesics.

use std::sync::Arc;

use dashmap::DashMap;
use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::manifold::{distance, flow, shoot, ChartPoint};
use crate::netlattice::{EmbeddedNet, Lattice, LatticeIndex, Rounded};
use crate::triangulation::KuhnSimplex;

/// `λ₀` this close to 1 is snapped to the vertex itself.
pub const LAMBDA0_SNAP: f64 = 1e-12;

/// `ι(ν(u))` for a lattice vertex `u`, with the rounding data.
#[derive(Clone, Debug)]
pub struct VertexImage {
    pub rounded: Rounded,
    pub image: ChartPoint,
}

/// Evaluates `Δ` on ordered lattice simplices. Vertex images and edge
/// geodesics are cached; entries never change once inserted.
#[derive(Debug)]
pub struct SimplexMapEvaluator {
    net: Arc<EmbeddedNet>,
    lattice: Lattice,
    vertices: DashMap<LatticeIndex, Arc<VertexImage>>,
    edges: DashMap<(LatticeIndex, LatticeIndex), DVector<f64>>,
}

impl SimplexMapEvaluator {
    pub fn new(net: Arc<EmbeddedNet>, lattice: Lattice) -> Self {
        if !net.metric().minimizing_guaranteed() {
            log::warn!(
                "{} metric does not guarantee unique minimizing geodesics; simplex maps may be ill-defined",
                net.metric().tag()
            );
        }
        SimplexMapEvaluator {
            net,
            lattice,
            vertices: DashMap::new(),
            edges: DashMap::new(),
        }
    }

    pub fn net(&self) -> &EmbeddedNet {
        &self.net
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    /// `ι(ν(u))`.
    pub fn vertex(&self, u: &LatticeIndex) -> Result<Arc<VertexImage>> {
        if let Some(v) = self.vertices.get(u) {
            return Ok(v.clone());
        }
        let x = self.lattice.point(u);
        let (rounded, image) = self.net.round_and_embed(x.as_slice())?;
        let entry = Arc::new(VertexImage { rounded, image });
        Ok(self.vertices.entry(u.clone()).or_insert(entry).clone())
    }

    fn edge_velocity(&self, u0: &LatticeIndex, u1: &LatticeIndex, x0: &ChartPoint, x1: &ChartPoint) -> Result<DVector<f64>> {
        let key = (u0.clone(), u1.clone());
        if let Some(v) = self.edges.get(&key) {
            return Ok(v.clone());
        }
        let v = shoot(self.net.metric(), x0.as_slice(), x1.as_slice())?;
        Ok(self.edges.entry(key).or_insert(v).clone())
    }

    /// `Δ[u₀, …, u_k](λ)` for lexicographically sorted lattice vertices.
    pub fn delta_eval(&self, vertices: &[LatticeIndex], lambda: &[f64]) -> Result<ChartPoint> {
        check_input(vertices, lambda)?;
        self.eval(vertices, lambda).map_err(|e| Error::Evaluation {
            vertices: vertices.to_vec(),
            source: Box::new(e),
        })
    }

    fn eval(&self, vertices: &[LatticeIndex], lambda: &[f64]) -> Result<ChartPoint> {
        let u0 = self.vertex(&vertices[0])?;
        let l0 = lambda[0];
        if vertices.len() == 1 || l0 >= 1.0 - LAMBDA0_SNAP {
            return Ok(u0.image.clone());
        }
        let face = if vertices.len() == 2 {
            self.vertex(&vertices[1])?.image.clone()
        } else {
            let rest = 1.0 - l0;
            let theta: Vec<f64> = lambda[1..].iter().map(|l| l / rest).collect();
            self.eval(&vertices[1..], &theta)?
        };
        if l0 == 0.0 || face == u0.image {
            return Ok(face);
        }
        let velocity = if vertices.len() == 2 {
            self.edge_velocity(&vertices[0], &vertices[1], &u0.image, &face)?
        } else {
            shoot(self.net.metric(), u0.image.as_slice(), face.as_slice())?
        };
        let (x, _) = flow(self.net.metric(), u0.image.as_slice(), velocity.as_slice(), 1.0 - l0)?;
        ChartPoint::new(x)
    }

    /// Condition (iii): `d(y, u₀) ≤ Σ d(uᵢ, uᵢ₊₁)` for `y` in the image,
    /// probed at `budget` low-discrepancy barycentric points.
    pub fn verify_condition_iii(&self, vertices: &[LatticeIndex], budget: usize) -> Result<ConditionReport> {
        let images = vertices
            .iter()
            .map(|u| self.vertex(u).map(|v| v.image.clone()))
            .collect::<Result<Vec<_>>>()?;
        let metric = self.net.metric();
        let mut bound = 0.0;
        for w in images.windows(2) {
            bound += distance(metric, &w[0], &w[1])?;
        }
        let samples = simplex_samples(vertices.len() - 1, budget.max(1));
        let observed: Vec<f64> = samples
            .par_iter()
            .map(|l| {
                let y = self.delta_eval(vertices, l)?;
                distance(metric, &y, &images[0])
            })
            .collect::<Result<_>>()?;
        let (k, worst) = observed
            .iter()
            .copied()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("at least one sample");
        Ok(ConditionReport {
            bound,
            worst,
            slack: bound - worst,
            worst_lambda: samples[k].clone(),
            samples: samples.len(),
        })
    }

    /// Largest chart distance between `Δ[s1]` and `Δ[s2]` on their shared face.
    pub fn verify_face_consistency(&self, s1: &KuhnSimplex, s2: &KuhnSimplex, budget: usize) -> Result<FaceReport> {
        let v1 = s1.vertices();
        let v2 = s2.vertices();
        let face: Vec<LatticeIndex> = v1.iter().filter(|v| v2.contains(v)).cloned().collect();
        if face.is_empty() {
            return Err(Error::Precondition("simplices share no face".into()));
        }
        let embed = |verts: &[LatticeIndex], lt: &[f64]| -> Vec<f64> {
            verts
                .iter()
                .map(|v| face.iter().position(|f| f == v).map_or(0.0, |i| lt[i]))
                .collect()
        };
        let samples = simplex_samples(face.len() - 1, budget.max(1));
        let gaps: Vec<f64> = samples
            .par_iter()
            .map(|lt| {
                let a = self.delta_eval(&v1, &embed(&v1, lt))?;
                let b = self.delta_eval(&v2, &embed(&v2, lt))?;
                Ok(a.chart_distance(&b))
            })
            .collect::<Result<_>>()?;
        Ok(FaceReport {
            face,
            max_discrepancy: gaps.iter().copied().fold(0.0, f64::max),
            samples: samples.len(),
        })
    }
}

fn check_input(vertices: &[LatticeIndex], lambda: &[f64]) -> Result<()> {
    if vertices.is_empty() || vertices.len() != lambda.len() {
        return Err(Error::Precondition(format!(
            "{} vertices with {} barycentric coordinates",
            vertices.len(),
            lambda.len()
        )));
    }
    if vertices.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Precondition("simplex vertices must be strictly lexicographically increasing".into()));
    }
    let sum: f64 = lambda.iter().sum();
    if lambda.iter().any(|l| !(*l >= -1e-12)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Precondition(format!("invalid barycentric coordinates {lambda:?}")));
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionReport {
    pub bound: f64,
    pub worst: f64,
    pub slack: f64,
    pub worst_lambda: Vec<f64>,
    pub samples: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct FaceReport {
    pub face: Vec<LatticeIndex>,
    pub max_discrepancy: f64,
    pub samples: usize,
}

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as f64;
    let mut f = 1.0 / b;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base as u64) as f64;
        i /= base as u64;
        f /= b;
    }
    r
}

/// `count` barycentric points on the `k`-simplex: the `k + 1` vertices first,
/// then Halton points mapped by sorting and differencing.
pub fn simplex_samples(k: usize, count: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    for j in 0..=k {
        if out.len() == count {
            return out;
        }
        let mut l = vec![0.0; k + 1];
        l[j] = 1.0;
        out.push(l);
    }
    let mut i = 1u64;
    while out.len() < count {
        let mut u: Vec<f64> = (0..k).map(|d| radical_inverse(i, PRIMES[d % PRIMES.len()])).collect();
        u.sort_by(f64::total_cmp);
        let mut l = Vec::with_capacity(k + 1);
        let mut prev = 0.0;
        for &t in &u {
            l.push(t - prev);
            prev = t;
        }
        l.push(1.0 - prev);
        out.push(l);
        i += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::MetricField;
    use crate::netlattice::{BoundingBox, Embedding, Net};
    use nalgebra::DMatrix;

    fn evaluator(metric: MetricField, embedding: Embedding) -> SimplexMapEvaluator {
        let net = Net::generate(1.0, 0.75, 0.0, 0, BoundingBox::symmetric(2, 20.0).unwrap()).unwrap();
        let en = EmbeddedNet::new(Arc::new(metric), Arc::new(net), embedding).unwrap();
        SimplexMapEvaluator::new(Arc::new(en), Lattice::new(1.0).unwrap())
    }

    fn flat() -> SimplexMapEvaluator {
        evaluator(MetricField::flat(2).unwrap(), Embedding::Identity)
    }

    #[test]
    fn single_vertex_is_identity() {
        let e = flat();
        let y = e.delta_eval(&[vec![2, 3]], &[1.0]).unwrap();
        assert_eq!(y.as_slice(), &[2.0, 3.0]);
    }

    #[test]
    fn flat_centroid() {
        let e = flat();
        let third = 1.0 / 3.0;
        let y = e
            .delta_eval(&[vec![0, 0], vec![1, 0], vec![1, 1]], &[third, third, third])
            .unwrap();
        assert!((y.coords() - DVector::from_vec(vec![2.0 / 3.0, 1.0 / 3.0])).amax() < 1e-12);
    }

    #[test]
    fn shear_midpoint_is_oracle_midpoint() {
        let m = MetricField::linear_pullback(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0])).unwrap();
        let e = evaluator(m.clone(), Embedding::Pullback);
        let y = e.delta_eval(&[vec![0, 0], vec![0, 1]], &[0.5, 0.5]).unwrap();
        // The net points are (0,0) and (0,1); ι = φ⁻¹ maps their midpoint.
        let expected = m.pullback_inverse(&[0.0, 0.5]).unwrap();
        assert!((y.coords() - expected).amax() < 1e-10);
    }

    #[test]
    fn rejects_bad_input() {
        let e = flat();
        assert!(e.delta_eval(&[vec![1, 0], vec![0, 0]], &[0.5, 0.5]).is_err());
        assert!(e.delta_eval(&[vec![0, 0], vec![1, 0]], &[0.7, 0.7]).is_err());
        assert!(e.delta_eval(&[vec![0, 0]], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn condition_iii_flat_examples() {
        let e = flat();
        let r = e.verify_condition_iii(&[vec![0, 0], vec![1, 0], vec![1, 1]], 200).unwrap();
        assert!((r.bound - 2.0).abs() < 1e-12);
        assert!((r.worst - 2f64.sqrt()).abs() < 1e-12);
        let r = e.verify_condition_iii(&[vec![0, 0], vec![1, 0]], 50).unwrap();
        assert!(r.slack.abs() < 1e-12);
    }

    #[test]
    fn flat_face_consistency() {
        let e = flat();
        let s = crate::triangulation::kuhn_simplices(&[0, 0]);
        let r = e.verify_face_consistency(&s[0], &s[1], 50).unwrap();
        assert_eq!(r.face, vec![vec![0, 0], vec![1, 1]]);
        assert!(r.max_discrepancy < 1e-12);
    }

    #[test]
    fn samples_are_barycentric() {
        let s = simplex_samples(3, 100);
        assert_eq!(s.len(), 100);
        assert_eq!(s[0], vec![1.0, 0.0, 0.0, 0.0]);
        for l in &s {
            assert!(l.iter().all(|v| *v >= 0.0));
            assert!((l.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(simplex_samples(0, 3), vec![vec![1.0]; 3]);
    }
}
