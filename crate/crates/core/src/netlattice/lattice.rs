use nalgebra::DVector;

use crate::error::{Error, Result};

/// The scaled integer lattice `L_ε = ε·ℤⁿ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lattice {
    epsilon: f64,
}

/// A lattice point, stored by its integer index `k` (the point is `ε·k`).
pub type LatticeIndex = Vec<i64>;

impl Lattice {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::config(format!("lattice epsilon must be positive, got {epsilon}")));
        }
        Ok(Lattice { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn point(&self, index: &[i64]) -> DVector<f64> {
        DVector::from_iterator(index.len(), index.iter().map(|&k| k as f64 * self.epsilon))
    }

    pub fn cube(&self, anchor: LatticeIndex) -> Cube {
        Cube {
            anchor,
            epsilon: self.epsilon,
        }
    }
}

/// The lattice cube `Q_ε(p) = p + [0, ε]ⁿ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cube {
    pub anchor: LatticeIndex,
    pub epsilon: f64,
}

impl Cube {
    pub fn dim(&self) -> usize {
        self.anchor.len()
    }

    /// The `2ⁿ` vertex indices; bit `j` of the enumeration counter selects `e_j`.
    pub fn vertices(&self) -> Vec<LatticeIndex> {
        let n = self.dim();
        (0..1usize << n)
            .map(|mask| {
                self.anchor
                    .iter()
                    .enumerate()
                    .map(|(j, &a)| a + ((mask >> j) & 1) as i64)
                    .collect()
            })
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.anchor).all(|(&xi, &a)| {
            let lo = a as f64 * self.epsilon;
            xi >= lo && xi <= lo + self.epsilon
        })
    }
}

/// Outcome of lattice rounding, with the number of argmin ties met on the way.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaResult {
    pub index: LatticeIndex,
    pub ties: usize,
}

/// The lattice-rounding map Γ: among the nearest lattice points of `x`, the
/// one of least norm.
///
/// The nearest set is a product of per-coordinate choices and the norm is
/// separable, so Γ rounds each coordinate to the nearer integer, and at a
/// half-integer picks the one closer to zero. This is `sign(t)·⌈|t| − ½⌉`,
/// which is exactly odd.
pub fn gamma(x: &[f64], lattice: &Lattice) -> LatticeIndex {
    gamma_checked(x, lattice).index
}

/// As [`gamma`], additionally counting coordinates where the two candidate
/// integers would have equal norm (never happens: `|k| ≠ |k + 1|`).
pub fn gamma_checked(x: &[f64], lattice: &Lattice) -> GammaResult {
    let mut ties = 0;
    let index = x
        .iter()
        .map(|&xi| {
            let t = xi / lattice.epsilon;
            let a = t.abs();
            if t - t.floor() == 0.5 {
                let lo = t.floor();
                if lo.abs() == (lo + 1.0).abs() {
                    ties += 1;
                }
            }
            let k = (a - 0.5).ceil().max(0.0) as i64;
            if t < 0.0 {
                -k
            } else {
                k
            }
        })
        .collect();
    GammaResult { index, ties }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Lattice {
        Lattice::new(1.0).unwrap()
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(gamma(&[0.5, 0.5], &unit()), vec![0, 0]);
        assert_eq!(gamma(&[0.7, 0.2], &unit()), vec![1, 0]);
        assert_eq!(gamma(&[-0.5, 0.25], &unit()), vec![0, 0]);
        assert_eq!(gamma(&[0.5, -0.25], &unit()), vec![0, 0]);
        assert_eq!(gamma(&[1.5, -2.5], &unit()), vec![1, -2]);
        assert_eq!(gamma(&[0.26, -0.74], &Lattice::new(0.5).unwrap()), vec![1, -1]);
    }

    #[test]
    fn cube_vertices() {
        let c = unit().cube(vec![1, -1]);
        let mut v = c.vertices();
        v.sort();
        assert_eq!(v, vec![vec![1, -1], vec![1, 0], vec![2, -1], vec![2, 0]]);
        assert!(c.contains(&[1.5, 0.0]));
        assert!(!c.contains(&[0.9, -0.5]));
    }

    #[test]
    fn rejects_bad_epsilon() {
        assert!(Lattice::new(0.0).is_err());
        assert!(Lattice::new(f64::NAN).is_err());
    }
}
