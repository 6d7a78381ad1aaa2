//! The glued map `Φ: ℝⁿ → M`, its round-preserving and growth bounds, and
//! the sphere restrictions `Φ_r` whose degree witnesses surjectivity.

mod degree;

use std::sync::Arc;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::manifold::{distance, shoot, ChartPoint};
use crate::netlattice::{Cube, LatticeIndex};
use crate::simplexmap::SimplexMapEvaluator;
use crate::triangulation::{kuhn_simplices, locate, KuhnSimplex};

pub use degree::{sphere_degree, winding_number, Icosphere, SphereDegree, Winding};

/// Minimum chart distance between a sphere image and the basepoint.
pub const BASEPOINT_CLEARANCE: f64 = 1e-6;

/// The radii `R₀ < R₁` controlling where `Φ_r` is far from the basepoint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Constants {
    pub r0: f64,
    pub r1: f64,
}

/// `R₀ = (ε + 2δ)n + 3ε√n/2 + 4δ`, `R₁ = 2(ε + 2δ)n + 5ε√n/2 + 7δ`.
pub fn constants(n: usize, epsilon: f64, delta: f64) -> Constants {
    let nf = n as f64;
    let s = nf.sqrt();
    Constants {
        r0: (epsilon + 2.0 * delta) * nf + 1.5 * epsilon * s + 4.0 * delta,
        r1: 2.0 * (epsilon + 2.0 * delta) * nf + 2.5 * epsilon * s + 7.0 * delta,
    }
}

/// `n·(ε + 2·max δ_ν)`, the round-preserving radius.
pub fn round_preserving_bound(n: usize, epsilon: f64, max_delta_nu: f64) -> f64 {
    n as f64 * (epsilon + 2.0 * max_delta_nu)
}

#[derive(Clone, Debug, Serialize)]
pub struct RoundPreservingSample {
    pub x: Vec<f64>,
    pub phi: Vec<f64>,
    pub anchor: LatticeIndex,
    pub bound: f64,
    pub observed: f64,
    pub slack: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LowerBoundSample {
    pub x: Vec<f64>,
    pub norm: f64,
    pub distance: f64,
    pub slack: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AntipodalSample {
    pub v: Vec<f64>,
    /// Metric angle at `o` between `v_o(Φ(rv))` and `v_o(Φ(−rv))`.
    pub angle: f64,
    /// `|d(o, Φ(x)) − d(o, Φ(−x))|`.
    pub radial_gap: f64,
    /// `d(Φ(x), Φ(−x))`.
    pub separation: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AntipodalReport {
    pub radius: f64,
    pub min_angle: f64,
    /// Smallest `d(Φ(x), Φ(−x)) − |d(o, Φ(x)) − d(o, Φ(−x))|`.
    pub min_inequality_slack: f64,
    pub samples: Vec<AntipodalSample>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DegreeReport {
    pub radius: f64,
    pub resolution: usize,
    pub degree: i64,
    /// Winding angle over 2π (n = 2) or solid angle over 4π (n = 3).
    pub raw_degree: f64,
    pub min_antipodal_gap: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeResult {
    pub target: Vec<f64>,
    pub preimage: Option<Vec<f64>>,
    pub residual: f64,
    pub starts: usize,
}

/// `Φ`, assembled from `Δ` on the Kuhn simplices of the lattice, with the
/// basepoint `o = ι(ν(0))`.
#[derive(Debug, Clone)]
pub struct GluedMap {
    evaluator: Arc<SimplexMapEvaluator>,
    delta: f64,
    basepoint: ChartPoint,
    sqrt_metric: DMatrix<f64>,
    inv_sqrt_metric: DMatrix<f64>,
}

impl GluedMap {
    pub fn new(evaluator: Arc<SimplexMapEvaluator>) -> Result<Self> {
        let n = evaluator.net().dim();
        let delta = evaluator.net().net().delta();
        let basepoint = evaluator.vertex(&vec![0; n])?.image.clone();
        let g = evaluator.net().metric().metric_at(&basepoint)?;
        let eig = g.symmetric_eigen();
        let root = eig.eigenvalues.map(f64::sqrt);
        let q = &eig.eigenvectors;
        let sqrt_metric = q * DMatrix::from_diagonal(&root) * q.transpose();
        let inv_sqrt_metric = q * DMatrix::from_diagonal(&root.map(|r| 1.0 / r)) * q.transpose();
        Ok(GluedMap {
            evaluator,
            delta,
            basepoint,
            sqrt_metric,
            inv_sqrt_metric,
        })
    }

    pub fn evaluator(&self) -> &SimplexMapEvaluator {
        &self.evaluator
    }

    pub fn dim(&self) -> usize {
        self.basepoint.dim()
    }

    pub fn epsilon(&self) -> f64 {
        self.evaluator.lattice().epsilon()
    }

    pub fn basepoint(&self) -> &ChartPoint {
        &self.basepoint
    }

    pub fn constants(&self) -> Constants {
        constants(self.dim(), self.epsilon(), self.delta)
    }

    pub fn phi(&self, x: &[f64]) -> Result<ChartPoint> {
        if x.len() != self.dim() || x.iter().any(|c| !c.is_finite()) {
            return Err(Error::domain(format!("cannot evaluate the glued map at {x:?}")));
        }
        let b = locate(x, self.evaluator.lattice());
        self.evaluator.delta_eval(&b.simplex.vertices(), &b.lambda)
    }

    /// `d(Φ(x), ν(p)) ≤ n(ε + 2 max δ_ν(q))` over the vertices `q` of the
    /// cube `Q(p)` containing `x`.
    pub fn round_preserving(&self, x: &[f64]) -> Result<RoundPreservingSample> {
        let b = locate(x, self.evaluator.lattice());
        let anchor = b.simplex.anchor.clone();
        let cube = Cube {
            anchor: anchor.clone(),
            epsilon: self.epsilon(),
        };
        let mut max_delta: f64 = 0.0;
        for q in cube.vertices() {
            max_delta = max_delta.max(self.evaluator.vertex(&q)?.rounded.delta_nu);
        }
        let bound = round_preserving_bound(self.dim(), self.epsilon(), max_delta);
        let phi = self.evaluator.delta_eval(&b.simplex.vertices(), &b.lambda)?;
        let target = self.evaluator.vertex(&anchor)?.image.clone();
        let observed = distance(self.evaluator.net().metric(), &phi, &target)?;
        Ok(RoundPreservingSample {
            x: x.to_vec(),
            phi: phi.as_slice().to_vec(),
            anchor,
            bound,
            observed,
            slack: bound - observed,
        })
    }

    /// Slack of `|x| < d(Φ(x), o) + R₀`.
    pub fn lower_bound(&self, x: &[f64]) -> Result<LowerBoundSample> {
        let phi = self.phi(x)?;
        let d = distance(self.evaluator.net().metric(), &phi, &self.basepoint)?;
        let norm = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        Ok(LowerBoundSample {
            x: x.to_vec(),
            norm,
            distance: d,
            slack: d + self.constants().r0 - norm,
        })
    }

    /// Unit direction `v_o(y)` at the basepoint and `d(o, y)`.
    pub fn polar(&self, y: &ChartPoint) -> Result<(DVector<f64>, f64)> {
        if y.chart_distance(&self.basepoint) <= BASEPOINT_CLEARANCE {
            return Err(Error::domain("sphere image meets the basepoint"));
        }
        let metric = self.evaluator.net().metric();
        let v = shoot(metric, self.basepoint.as_slice(), y.as_slice())?;
        let d = metric.norm_at(&self.basepoint, &v)?;
        Ok((v / d, d))
    }

    /// `g(o)^{1/2} v`, identifying the unit sphere of `T_oM` with `Sⁿ⁻¹`.
    pub fn to_round_sphere(&self, unit: &DVector<f64>) -> DVector<f64> {
        &self.sqrt_metric * unit
    }

    /// Inverse of [`GluedMap::to_round_sphere`].
    pub fn from_round_sphere(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.inv_sqrt_metric * v
    }

    fn metric_angle(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        let (sa, sb) = (self.to_round_sphere(a), self.to_round_sphere(b));
        (sa.dot(&sb) / (sa.norm() * sb.norm())).clamp(-1.0, 1.0).acos()
    }

    fn warn_radius(&self, r: f64) {
        let c = self.constants();
        if r < c.r1 {
            log::warn!("radius {r:.4} is below R1 = {:.4}; the separation argument does not cover it", c.r1);
        }
    }

    /// Antipodal separation at radius `r` on `count` pairs `±v`.
    pub fn antipodal_check(&self, r: f64, count: usize) -> Result<AntipodalReport> {
        self.warn_radius(r);
        let dirs = sphere_directions(self.dim(), count.max(1));
        let metric = self.evaluator.net().metric();
        let samples: Vec<AntipodalSample> = dirs
            .par_iter()
            .map(|v| {
                let x: Vec<f64> = v.iter().map(|c| r * c).collect();
                let nx: Vec<f64> = x.iter().map(|c| -c).collect();
                let (a, b) = (self.phi(&x)?, self.phi(&nx)?);
                let (ua, da) = self.polar(&a)?;
                let (ub, db) = self.polar(&b)?;
                Ok(AntipodalSample {
                    v: v.as_slice().to_vec(),
                    angle: self.metric_angle(&ua, &ub),
                    radial_gap: (da - db).abs(),
                    separation: distance(metric, &a, &b)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(AntipodalReport {
            radius: r,
            min_angle: samples.iter().map(|s| s.angle).fold(f64::INFINITY, f64::min),
            min_inequality_slack: samples
                .iter()
                .map(|s| s.separation - s.radial_gap)
                .fold(f64::INFINITY, f64::min),
            samples,
        })
    }

    /// Round-sphere image of `v ∈ Sⁿ⁻¹` under `v_o ∘ Φ_r`.
    pub fn sphere_map(&self, r: f64, v: &[f64]) -> Result<DVector<f64>> {
        let x: Vec<f64> = v.iter().map(|c| r * c).collect();
        let (u, _) = self.polar(&self.phi(&x)?)?;
        Ok(self.to_round_sphere(&u))
    }

    /// Degree of `v_o ∘ Φ_r`: a winding number with `resolution` loop samples
    /// when `n = 2`, regular-value counting on an icosphere of subdivision
    /// level `resolution` when `n = 3`. The antipodal gap is read off the
    /// same samples.
    pub fn degree(&self, r: f64, resolution: usize, seed: u64) -> Result<DegreeReport> {
        self.warn_radius(r);
        match self.dim() {
            2 => {
                let resolution = resolution.max(8) & !1;
                let angles: Vec<f64> = (0..resolution)
                    .map(|i| std::f64::consts::TAU * i as f64 / resolution as f64)
                    .collect();
                let base: Vec<DVector<f64>> = angles
                    .par_iter()
                    .map(|t| self.sphere_map(r, &[t.cos(), t.sin()]))
                    .collect::<Result<_>>()?;
                let lookup = |t: f64| -> Result<[f64; 2]> {
                    let i = (t / std::f64::consts::TAU * resolution as f64).round() as usize;
                    let p = if i < resolution && (angles[i] - t).abs() < 1e-15 {
                        base[i].clone()
                    } else {
                        self.sphere_map(r, &[t.cos(), t.sin()])?
                    };
                    Ok([p[0], p[1]])
                };
                let w = winding_number(lookup, resolution, 20 * resolution)?;
                let half = resolution / 2;
                let gap = (0..half)
                    .map(|i| {
                        let (a, b) = (&base[i], &base[i + half]);
                        (a.dot(b) / (a.norm() * b.norm())).clamp(-1.0, 1.0).acos()
                    })
                    .fold(f64::INFINITY, f64::min);
                Ok(DegreeReport {
                    radius: r,
                    resolution,
                    degree: w.degree,
                    raw_degree: w.raw,
                    min_antipodal_gap: gap,
                    samples: w.evaluations,
                })
            }
            3 => {
                let sphere = Icosphere::new(resolution as u32);
                let images: Vec<Vector3<f64>> = sphere
                    .vertices
                    .par_iter()
                    .map(|v| {
                        let s = self.sphere_map(r, v.as_slice())?;
                        Ok(Vector3::new(s[0], s[1], s[2]).normalize())
                    })
                    .collect::<Result<_>>()?;
                let d = sphere_degree(&sphere, &images, 1e-3, 16, seed)?;
                let anti = sphere.antipodes();
                let gap = (0..images.len())
                    .map(|i| images[i].dot(&images[anti[i]]).clamp(-1.0, 1.0).acos())
                    .fold(f64::INFINITY, f64::min);
                Ok(DegreeReport {
                    radius: r,
                    resolution,
                    degree: d.degree,
                    raw_degree: d.solid_angle_degree,
                    min_antipodal_gap: gap,
                    samples: images.len(),
                })
            }
            n => Err(Error::Precondition(format!("degree is implemented for n = 2, 3, not {n}"))),
        }
    }

    /// Searches for `x` with `Φ(x) = y`.
    ///
    /// Round preservation and the isometry of `ι` put every preimage within
    /// `ε√n + δ + n(ε + 4δ)` of the net point `q` whose image is nearest to
    /// `y`. Kuhn simplices in a ball around `q` are ranked by the chart
    /// distance from `y` to the mean of their vertex images and the best
    /// `starts` are searched by damped least squares on barycentric
    /// coordinates; the ball doubles until that radius is covered.
    pub fn surjectivity_probe(&self, y: &ChartPoint, starts: usize) -> Result<ProbeResult> {
        let n = self.dim();
        let eps = self.epsilon();
        let near = self.evaluator.net().nearest_image(y)?;
        let centre = near.point.coords.clone();
        let nf = n as f64;
        let max_radius = eps * nf.sqrt() + self.delta + nf * (eps + 4.0 * self.delta);
        let mut radius = (eps * nf.sqrt() + self.delta).min(max_radius);
        let mut tried = std::collections::HashSet::new();
        let mut best: (f64, Option<DVector<f64>>) = (f64::INFINITY, None);
        let mut used = 0;
        loop {
            let ranges: Vec<std::ops::RangeInclusive<i64>> = centre
                .iter()
                .map(|c| ((c - radius) / eps).floor() as i64..=((c + radius) / eps).ceil() as i64)
                .collect();
            let mut ranked = Vec::new();
            for anchor in ranges.into_iter().multi_cartesian_product() {
                for s in kuhn_simplices(&anchor) {
                    if tried.contains(&s) {
                        continue;
                    }
                    let mut mean = DVector::zeros(n);
                    for v in s.vertices() {
                        mean += self.evaluator.vertex(&v)?.image.coords();
                    }
                    mean /= (n + 1) as f64;
                    ranked.push(((mean - y.coords()).norm(), s));
                }
            }
            ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
            for (_, s) in ranked.into_iter().take(starts.max(1)) {
                used += 1;
                let (x, res) = self.simplex_least_squares(&s, y)?;
                tried.insert(s);
                if res < best.0 {
                    best = (res, Some(x));
                }
                if best.0 < 1e-10 {
                    break;
                }
            }
            if best.0 < 1e-10 || radius >= max_radius {
                break;
            }
            radius = (2.0 * radius).min(max_radius);
        }
        let found = best.0 < 1e-6;
        Ok(ProbeResult {
            target: y.as_slice().to_vec(),
            preimage: if found { best.1.map(|x| x.as_slice().to_vec()) } else { None },
            residual: best.0,
            starts: used,
        })
    }

    /// Levenberg–Marquardt on the barycentric coordinates `λ₁..λₙ` of `s`,
    /// projected back onto the simplex after each step. Returns the point of
    /// `ℝⁿ` reached and its chart residual.
    fn simplex_least_squares(&self, s: &KuhnSimplex, y: &ChartPoint) -> Result<(DVector<f64>, f64)> {
        let n = self.dim();
        let verts = s.vertices();
        let lambda = |t: &DVector<f64>| -> Vec<f64> {
            let mut l = Vec::with_capacity(n + 1);
            l.push((1.0 - t.sum()).max(0.0));
            l.extend(t.iter());
            l
        };
        let project = |t: &mut DVector<f64>| {
            t.iter_mut().for_each(|c| *c = c.max(0.0));
            let sum = t.sum();
            if sum > 1.0 {
                *t /= sum;
            }
        };
        let resid = |t: &DVector<f64>| -> Result<DVector<f64>> {
            Ok(self.evaluator.delta_eval(&verts, &lambda(t))?.into_inner() - y.coords())
        };
        let mut t = DVector::from_element(n, 1.0 / (n + 1) as f64);
        let mut r = resid(&t)?;
        let mut rn = r.norm();
        let mut mu = 1e-3;
        for _ in 0..60 {
            if rn < 1e-12 {
                break;
            }
            // Forward differences from a point nudged into the interior, so
            // every perturbed copy stays a valid barycentric vector.
            let h = 1e-7;
            let inner = &t * (1.0 - 1e-6) + DVector::from_element(n, 1e-6 / (n + 1) as f64);
            let r_inner = resid(&inner)?;
            let mut jac = DMatrix::zeros(n, n);
            for j in 0..n {
                let mut tp = inner.clone();
                tp[j] += h;
                jac.set_column(j, &((resid(&tp)? - &r_inner) / h));
            }
            let jtj = jac.transpose() * &jac;
            let grad = jac.transpose() * &r;
            let mut moved = false;
            while mu < 1e10 {
                let damped = &jtj + DMatrix::from_diagonal(&jtj.diagonal().map(|d| mu * (d + 1e-12)));
                let Some(dt) = damped.lu().solve(&(-&grad)) else {
                    mu *= 10.0;
                    continue;
                };
                let mut tt = &t + dt;
                project(&mut tt);
                let rt = resid(&tt)?;
                if rt.norm() < rn {
                    t = tt;
                    rn = rt.norm();
                    r = rt;
                    mu = (mu * 0.3).max(1e-12);
                    moved = true;
                    break;
                }
                mu *= 10.0;
            }
            if !moved {
                break;
            }
        }
        let x = s.point_at(self.evaluator.lattice(), &lambda(&t));
        Ok((x, rn))
    }

    /// Largest image displacement under `count` random input perturbations of
    /// size `h` around `x`.
    pub fn continuity_probe(&self, x: &[f64], h: f64, count: usize, seed: u64) -> Result<f64> {
        let base = self.phi(x)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..count {
            let d = DVector::from_fn(x.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
            let xp: Vec<f64> = x.iter().zip(d.normalize().iter()).map(|(a, b)| a + h * b).collect();
            worst = worst.max(self.phi(&xp)?.chart_distance(&base));
        }
        Ok(worst)
    }
}

/// `count` directions on `Sⁿ⁻¹` covering a hemisphere (so `±v` spans the
/// sphere): equal angles for `n = 2`, a Fibonacci spiral for `n = 3`, seeded
/// Gaussian draws otherwise.
pub fn sphere_directions(n: usize, count: usize) -> Vec<DVector<f64>> {
    match n {
        2 => (0..count)
            .map(|i| {
                let t = std::f64::consts::PI * (i as f64 + 0.5) / count as f64;
                DVector::from_vec(vec![t.cos(), t.sin()])
            })
            .collect(),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|i| {
                    let z = (i as f64 + 0.5) / count as f64;
                    let rho = (1.0 - z * z).sqrt();
                    let t = golden * i as f64;
                    DVector::from_vec(vec![rho * t.cos(), rho * t.sin(), z])
                })
                .collect()
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
            (0..count)
                .map(|_| DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal)).normalize())
                .collect()
        }
    }
}
