//! Degree of sphere maps: winding numbers on S¹ and regular-value counting
//! on a triangulated S².

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_4, PI, TAU};

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Winding number of a closed curve `θ ↦ f(θ) ∈ ℝ² ∖ {0}` over `[0, 2π)`.
#[derive(Clone, Debug)]
pub struct Winding {
    pub degree: i64,
    /// Accumulated angle divided by 2π (an integer up to rounding).
    pub raw: f64,
    pub evaluations: usize,
    /// Samples in loop order, `(θ, f(θ))`.
    pub samples: Vec<(f64, [f64; 2])>,
}

/// Accumulates wrapped angle increments over `resolution` uniform samples,
/// bisecting any interval whose increment exceeds π/4. `extra_budget` caps
/// the number of refinement evaluations.
pub fn winding_number<F>(f: F, resolution: usize, extra_budget: usize) -> Result<Winding>
where
    F: Fn(f64) -> Result<[f64; 2]>,
{
    let resolution = resolution.max(4);
    let eval = |t: f64| -> Result<(f64, [f64; 2])> {
        let p = f(t)?;
        if p[0] == 0.0 && p[1] == 0.0 {
            return Err(Error::domain("curve passes through the origin"));
        }
        Ok((t, p))
    };
    let base: Vec<(f64, [f64; 2])> = (0..resolution)
        .map(|i| eval(TAU * i as f64 / resolution as f64))
        .collect::<Result<_>>()?;
    let mut extra = 0usize;
    let mut samples = Vec::with_capacity(resolution);
    let mut total = 0.0;
    for i in 0..resolution {
        let a = base[i];
        let b = if i + 1 == resolution {
            (TAU, base[0].1)
        } else {
            base[i + 1]
        };
        samples.push(a);
        let mut stack = vec![(a, b)];
        while let Some((p, q)) = stack.pop() {
            let step = wrapped(angle(q.1) - angle(p.1));
            if step.abs() <= FRAC_PI_4 {
                total += step;
                continue;
            }
            if extra >= extra_budget || q.0 - p.0 < 1e-12 {
                return Err(Error::Resolution(format!(
                    "angular step {step:.3} rad persists after {extra} refinements"
                )));
            }
            extra += 1;
            let m = eval(0.5 * (p.0 + q.0))?;
            stack.push((m, q));
            stack.push((p, m));
        }
    }
    let raw = total / TAU;
    Ok(Winding {
        degree: raw.round() as i64,
        raw,
        evaluations: resolution + extra,
        samples,
    })
}

fn angle(p: [f64; 2]) -> f64 {
    p[1].atan2(p[0])
}

fn wrapped(a: f64) -> f64 {
    let mut a = a % TAU;
    if a > PI {
        a -= TAU;
    } else if a < -PI {
        a += TAU;
    }
    a
}

/// Geodesic subdivision of the icosahedron with outward-oriented faces.
#[derive(Clone, Debug)]
pub struct Icosphere {
    pub vertices: Vec<Vector3<f64>>,
    pub faces: Vec<[usize; 3]>,
}

impl Icosphere {
    pub fn new(level: u32) -> Icosphere {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let raw = [
            [-1.0, t, 0.0],
            [1.0, t, 0.0],
            [-1.0, -t, 0.0],
            [1.0, -t, 0.0],
            [0.0, -1.0, t],
            [0.0, 1.0, t],
            [0.0, -1.0, -t],
            [0.0, 1.0, -t],
            [t, 0.0, -1.0],
            [t, 0.0, 1.0],
            [-t, 0.0, -1.0],
            [-t, 0.0, 1.0],
        ];
        let mut vertices: Vec<Vector3<f64>> = raw.iter().map(|v| Vector3::from(*v).normalize()).collect();
        let mut faces: Vec<[usize; 3]> = vec![
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ];
        for _ in 0..level {
            let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
            let mut next = Vec::with_capacity(faces.len() * 4);
            let mut midpoint = |a: usize, b: usize, vs: &mut Vec<Vector3<f64>>| -> usize {
                *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                    vs.push(((vs[a] + vs[b]) * 0.5).normalize());
                    vs.len() - 1
                })
            };
            for [a, b, c] in faces {
                let ab = midpoint(a, b, &mut vertices);
                let bc = midpoint(b, c, &mut vertices);
                let ca = midpoint(c, a, &mut vertices);
                next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            faces = next;
        }
        for f in &mut faces {
            let (a, b, c) = (vertices[f[0]], vertices[f[1]], vertices[f[2]]);
            if a.dot(&b.cross(&c)) < 0.0 {
                f.swap(1, 2);
            }
        }
        Icosphere { vertices, faces }
    }

    /// Index of `−v` for every vertex (the point set is centrally symmetric).
    pub fn antipodes(&self) -> Vec<usize> {
        let key = |v: &Vector3<f64>| -> [i64; 3] { [0, 1, 2].map(|i| (v[i] * 1e9).round() as i64) };
        let index: HashMap<[i64; 3], usize> = self.vertices.iter().enumerate().map(|(i, v)| (key(v), i)).collect();
        self.vertices
            .iter()
            .map(|v| index[&key(&(-v))])
            .collect()
    }
}

/// Degree of a map `S² → S²` given by its values on an icosphere.
#[derive(Clone, Debug)]
pub struct SphereDegree {
    pub degree: i64,
    /// Total signed solid angle of the image triangles over 4π.
    pub solid_angle_degree: f64,
    pub draws: usize,
    pub regular_value: [f64; 3],
}

/// Counts signed preimages of a random regular value among the image
/// triangles. A value is regular when its normalized cone coordinates in
/// every image triangle stay at least `margin` away from zero; otherwise a
/// new direction is drawn, up to `max_draws` times.
pub fn sphere_degree(
    sphere: &Icosphere,
    images: &[Vector3<f64>],
    margin: f64,
    max_draws: usize,
    seed: u64,
) -> Result<SphereDegree> {
    let tri: Vec<(Vector3<f64>, Vector3<f64>, Vector3<f64>)> = sphere
        .faces
        .iter()
        .map(|f| (images[f[0]], images[f[1]], images[f[2]]))
        .collect();
    let solid: f64 = tri
        .iter()
        .map(|(a, b, c)| {
            let num = a.dot(&b.cross(c));
            let den = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
            2.0 * num.atan2(den)
        })
        .sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    'draw: for draw in 1..=max_draws {
        let y = Vector3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal)).normalize();
        let mut count = 0i64;
        for (a, b, c) in &tri {
            let m = Matrix3::from_columns(&[*a, *b, *c]);
            let det = m.determinant();
            let Some(coef) = m.lu().solve(&y) else {
                continue;
            };
            let s = coef.sum();
            if !(s > 0.0) {
                continue;
            }
            let lowest = coef.min() / s;
            if lowest > margin {
                count += det.signum() as i64;
            } else if lowest > -margin {
                continue 'draw;
            }
        }
        return Ok(SphereDegree {
            degree: count,
            solid_angle_degree: solid / (4.0 * PI),
            draws: draw,
            regular_value: [y[0], y[1], y[2]],
        });
    }
    Err(Error::Degeneracy(max_draws))
}
