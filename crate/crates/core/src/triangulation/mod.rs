//! Kuhn (Freudenthal) triangulation of the ε-lattice: each cube splits into
//! `n!` simplices `σ(p, π)` whose vertices form a monotone lattice path.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};

use crate::netlattice::{Lattice, LatticeIndex};

/// Barycentric entries below this are treated as exact zeros.
pub const LAMBDA_CLAMP: f64 = 1e-14;

/// `σ(p, π) = conv{p, p + εe_π(1), …, p + ε Σ e_π(l)}` with 0-based `π`.
///
/// Each path step adds a unit vector, so every vertex is lexicographically
/// larger than the one before: the path order is already the sorted order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct KuhnSimplex {
    pub anchor: LatticeIndex,
    pub perm: Vec<usize>,
}

/// A point given by barycentric coordinates over a simplex's sorted vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct BarycentricPoint {
    pub simplex: KuhnSimplex,
    pub lambda: Vec<f64>,
}

impl KuhnSimplex {
    pub fn new(anchor: LatticeIndex, perm: Vec<usize>) -> Self {
        debug_assert_eq!(anchor.len(), perm.len());
        KuhnSimplex { anchor, perm }
    }

    pub fn dim(&self) -> usize {
        self.anchor.len()
    }

    /// Vertex indices `v₀ ≺ v₁ ≺ … ≺ vₙ`.
    pub fn vertices(&self) -> Vec<LatticeIndex> {
        let mut v = self.anchor.clone();
        let mut out = Vec::with_capacity(self.dim() + 1);
        out.push(v.clone());
        for &axis in &self.perm {
            v[axis] += 1;
            out.push(v.clone());
        }
        out
    }

    pub fn vertex_points(&self, lattice: &Lattice) -> Vec<DVector<f64>> {
        self.vertices().iter().map(|v| lattice.point(v)).collect()
    }

    /// `Σ λⱼ vⱼ`.
    pub fn point_at(&self, lattice: &Lattice, lambda: &[f64]) -> DVector<f64> {
        let n = self.dim();
        self.vertex_points(lattice)
            .iter()
            .zip(lambda)
            .fold(DVector::zeros(n), |acc, (v, l)| acc + v * *l)
    }

    /// Lattice membership test: the coordinates of `(x − p)/ε`, read in the
    /// order π, must be non-increasing and lie in `[0, 1]`.
    pub fn contains(&self, lattice: &Lattice, x: &[f64], tol: f64) -> bool {
        let mut prev = 1.0 + tol;
        for &axis in &self.perm {
            let t = x[axis] / lattice.epsilon() - self.anchor[axis] as f64;
            if t > prev + tol || t < -tol {
                return false;
            }
            prev = t;
        }
        true
    }

    /// Volume `|det[v₁ − v₀, …, vₙ − v₀]| / n!`.
    pub fn volume(&self, lattice: &Lattice) -> f64 {
        let n = self.dim();
        let v = self.vertex_points(lattice);
        let m = DMatrix::from_fn(n, n, |r, c| v[c + 1][r] - v[0][r]);
        m.determinant().abs() / (1..=n).product::<usize>() as f64
    }

    /// The neighbour across the facet opposite vertex `k`.
    pub fn facet_neighbor(&self, k: usize) -> KuhnSimplex {
        let n = self.dim();
        let mut anchor = self.anchor.clone();
        let mut perm = self.perm.clone();
        if k == 0 {
            anchor[perm[0]] += 1;
            perm.rotate_left(1);
        } else if k == n {
            anchor[perm[n - 1]] -= 1;
            perm.rotate_right(1);
        } else {
            perm.swap(k - 1, k);
        }
        KuhnSimplex { anchor, perm }
    }
}

/// The `n!` simplices of the cube `Q_ε(p)`, permutations in lexicographic order.
pub fn kuhn_simplices(anchor: &[i64]) -> Vec<KuhnSimplex> {
    let n = anchor.len();
    (0..n)
        .permutations(n)
        .map(|perm| KuhnSimplex::new(anchor.to_vec(), perm))
        .collect()
}

/// The simplex containing `x` and its barycentric coordinates.
///
/// Among several containing simplices (points on shared faces) this returns
/// the lexicographically smallest `(p, π)`: every coordinate lying on a
/// lattice hyperplane is assigned to the lower cube, and equal fractional
/// parts keep their axis order.
pub fn locate(x: &[f64], lattice: &Lattice) -> BarycentricPoint {
    let n = x.len();
    let mut anchor = Vec::with_capacity(n);
    let mut frac = Vec::with_capacity(n);
    for &xi in x {
        let t = xi / lattice.epsilon();
        let c = t.ceil();
        anchor.push(c as i64 - 1);
        frac.push(t - c + 1.0);
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.sort_by(|&a, &b| frac[b].total_cmp(&frac[a]));
    let mut lambda = Vec::with_capacity(n + 1);
    lambda.push(1.0 - frac[perm[0]]);
    for w in perm.windows(2) {
        lambda.push(frac[w[0]] - frac[w[1]]);
    }
    lambda.push(frac[perm[n - 1]]);
    clamp_lambda(&mut lambda);
    BarycentricPoint {
        simplex: KuhnSimplex { anchor, perm },
        lambda,
    }
}

/// Zero entries below [`LAMBDA_CLAMP`] and renormalize to unit sum.
pub fn clamp_lambda(lambda: &mut [f64]) {
    for l in lambda.iter_mut() {
        if *l < LAMBDA_CLAMP {
            *l = 0.0;
        }
    }
    let s: f64 = lambda.iter().sum();
    if s > 0.0 && s != 1.0 {
        for l in lambda.iter_mut() {
            *l /= s;
        }
    }
}

/// The sorted vertices of `s` selected by the (sorted) index set `subset`.
pub fn ordered_face(s: &KuhnSimplex, subset: &[usize]) -> Vec<LatticeIndex> {
    let v = s.vertices();
    subset.iter().sorted().dedup().map(|&j| v[j].clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Lattice {
        Lattice::new(1.0).unwrap()
    }

    #[test]
    fn two_dimensional_cube() {
        let s = kuhn_simplices(&[0, 0]);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].vertices(), vec![vec![0, 0], vec![1, 0], vec![1, 1]]);
        assert_eq!(s[1].vertices(), vec![vec![0, 0], vec![0, 1], vec![1, 1]]);
        assert_eq!(kuhn_simplices(&[0, 0, 0]).len(), 6);
    }

    #[test]
    fn volumes() {
        let l = Lattice::new(0.5).unwrap();
        for s in kuhn_simplices(&[2, -1, 0]) {
            assert!((s.volume(&l) - 0.125 / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn locate_examples() {
        let b = locate(&[0.3, 0.6], &unit());
        assert_eq!(b.simplex.vertices(), vec![vec![0, 0], vec![0, 1], vec![1, 1]]);
        let expected = [0.4, 0.3, 0.3];
        for (a, e) in b.lambda.iter().zip(expected) {
            assert!((a - e).abs() < 1e-15);
        }
        let b = locate(&[0.5, 0.5], &unit());
        assert_eq!(b.simplex.anchor, vec![0, 0]);
        assert_eq!(b.simplex.perm, vec![0, 1]);
        let b = locate(&[2.0, -1.0], &unit());
        let v = b.simplex.vertices();
        let hot = b.lambda.iter().position(|&l| l == 1.0).unwrap();
        assert_eq!(v[hot], vec![2, -1]);
        assert_eq!(b.lambda.iter().filter(|&&l| l == 0.0).count(), 2);
    }

    #[test]
    fn ordered_faces() {
        let s = kuhn_simplices(&[0, 0]);
        assert_eq!(ordered_face(&s[0], &[0, 2]), vec![vec![0, 0], vec![1, 1]]);
        assert_eq!(ordered_face(&s[0], &[2, 0]), ordered_face(&s[1], &[0, 2]));
        assert_eq!(ordered_face(&s[1], &[0, 1, 2]), s[1].vertices());
    }

    #[test]
    fn facet_neighbors_share_the_facet() {
        let s = KuhnSimplex::new(vec![1, -2, 0], vec![2, 0, 1]);
        let vs = s.vertices();
        for k in 0..=3 {
            let t = s.facet_neighbor(k);
            let vt = t.vertices();
            let shared: Vec<_> = vs.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, v)| v.clone()).collect();
            assert!(shared.iter().all(|v| vt.contains(v)));
            assert!(!vt.contains(&vs[k]));
            assert_eq!(t.facet_neighbor(vt.iter().position(|v| !vs.contains(v)).unwrap()), s);
        }
    }
}
