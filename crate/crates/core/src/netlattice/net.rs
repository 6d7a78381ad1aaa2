use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use itertools::Itertools;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Axis-aligned box `[lo, hi]` in ℝⁿ.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundingBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoundingBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::config("box bounds must have equal, nonzero length"));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::config(format!("box needs finite lo < hi, got {lo:?} .. {hi:?}")));
        }
        Ok(BoundingBox { lo, hi })
    }

    /// The cube `[−h, h]ⁿ`.
    pub fn symmetric(dim: usize, half_width: f64) -> Result<Self> {
        Self::new(vec![-half_width; dim], vec![half_width; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| v >= a && v <= b)
    }

    pub fn expanded(&self, by: f64) -> BoundingBox {
        BoundingBox {
            lo: self.lo.iter().map(|v| v - by).collect(),
            hi: self.hi.iter().map(|v| v + by).collect(),
        }
    }

    /// Distance from an interior point to the boundary (negative outside).
    pub fn inner_margin(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(v, (a, b))| (v - a).min(b - v))
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest half-width over the axes.
    pub fn min_half_width(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| 0.5 * (b - a))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            self.lo.iter().zip(&self.hi).map(|(a, b)| rng.random_range(*a..=*b)),
        )
    }
}

/// Identity of a net point: its lattice index for procedural nets, its
/// position in the list for loaded ones.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NetId {
    Lattice(Vec<i64>),
    Listed(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetPoint {
    pub id: NetId,
    pub coords: DVector<f64>,
}

#[derive(Clone, Debug)]
enum NetKind {
    /// `ε_b·k + jitter(k)` for every `k ∈ ℤⁿ` with `ε_b·k` in the box grown
    /// by `ε_b`; points are generated on demand.
    Procedural {
        epsilon_base: f64,
        jitter: f64,
        seed: u64,
    },
    Listed {
        points: Vec<DVector<f64>>,
        cell: f64,
        grid: HashMap<Vec<i64>, Vec<usize>>,
    },
}

/// A δ-net `X ⊂ ℝⁿ` with a region on which every point is covered.
#[derive(Clone, Debug)]
pub struct Net {
    dim: usize,
    delta: f64,
    region: BoundingBox,
    kind: NetKind,
}

fn mix(seed: u64, index: &[i64]) -> u64 {
    let mut h = seed ^ 0x9E37_79B9_7F4A_7C15;
    for &k in index {
        h ^= k as u64;
        h = h.wrapping_mul(0xBF58_476D_1CE4_E5B9);
        h ^= h >> 31;
        h = h.wrapping_mul(0x94D0_49BB_1331_11EB);
        h ^= h >> 29;
    }
    h
}

fn lex_cmp(a: &DVector<f64>, b: &DVector<f64>) -> Ordering {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

fn index_ranges(lo: &[f64], hi: &[f64], step: f64) -> Vec<std::ops::RangeInclusive<i64>> {
    lo.iter()
        .zip(hi)
        .map(|(a, b)| ((a / step).ceil() as i64)..=((b / step).floor() as i64))
        .collect()
}

impl Net {
    /// Jittered `ε_b`-lattice on `region`, with every point inside a ball of
    /// radius `jitter` around its lattice site, deterministic in `seed`.
    pub fn generate(epsilon_base: f64, delta: f64, jitter: f64, seed: u64, region: BoundingBox) -> Result<Net> {
        let n = region.dim();
        let mut problems = Vec::new();
        if n < 2 {
            problems.push(format!("dimension must be at least 2, got {n}"));
        }
        if !(epsilon_base > 0.0) {
            problems.push(format!("epsilon_base must be positive, got {epsilon_base}"));
        }
        if !(jitter >= 0.0) {
            problems.push(format!("jitter must be nonnegative, got {jitter}"));
        }
        let covering = epsilon_base * (n as f64).sqrt() / 2.0;
        if !(covering + jitter < delta) {
            problems.push(format!(
                "epsilon_base*sqrt(n)/2 + jitter < delta fails: {covering:.6} + {jitter} >= {delta}"
            ));
        }
        if !problems.is_empty() {
            return Err(Error::Config(problems));
        }
        Ok(Net {
            dim: n,
            delta,
            region,
            kind: NetKind::Procedural {
                epsilon_base,
                jitter,
                seed,
            },
        })
    }

    /// A net from explicit points. The coverage region defaults to the
    /// points' bounding box.
    pub fn from_points(points: Vec<DVector<f64>>, delta: f64, region: Option<BoundingBox>) -> Result<Net> {
        let Some(first) = points.first() else {
            return Err(Error::config("net has no points"));
        };
        let n = first.len();
        if n < 2 || points.iter().any(|p| p.len() != n || p.iter().any(|c| !c.is_finite())) {
            return Err(Error::config("net points must be finite and share a dimension >= 2"));
        }
        if !(delta > 0.0) {
            return Err(Error::config(format!("delta must be positive, got {delta}")));
        }
        let region = match region {
            Some(r) => r,
            None => {
                let lo = (0..n).map(|i| points.iter().map(|p| p[i]).fold(f64::INFINITY, f64::min)).collect();
                let hi = (0..n).map(|i| points.iter().map(|p| p[i]).fold(f64::NEG_INFINITY, f64::max)).collect();
                BoundingBox::new(lo, hi)?
            }
        };
        let cell = delta;
        let mut grid: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            grid.entry(Self::cell_of(p.as_slice(), cell)).or_default().push(i);
        }
        Ok(Net {
            dim: n,
            delta,
            region,
            kind: NetKind::Listed { points, cell, grid },
        })
    }

    fn cell_of(x: &[f64], cell: f64) -> Vec<i64> {
        x.iter().map(|v| (v / cell).floor() as i64).collect()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Region on which `|x − ν(x)| < δ` is guaranteed.
    pub fn coverage_region(&self) -> &BoundingBox {
        &self.region
    }

    pub fn is_procedural(&self) -> bool {
        matches!(self.kind, NetKind::Procedural { .. })
    }

    fn procedural_point(&self, index: &[i64]) -> Option<DVector<f64>> {
        let NetKind::Procedural {
            epsilon_base,
            jitter,
            seed,
        } = &self.kind
        else {
            return None;
        };
        let base = DVector::from_iterator(self.dim, index.iter().map(|&k| k as f64 * epsilon_base));
        if !self.region.expanded(*epsilon_base).contains(base.as_slice()) {
            return None;
        }
        if *jitter == 0.0 {
            return Some(base);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(*seed);
        rng.set_stream(mix(*seed, index));
        let dir = DVector::from_iterator(self.dim, (0..self.dim).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let norm = dir.norm();
        let u: f64 = rng.random();
        let radius = jitter * u.powf(1.0 / self.dim as f64);
        Some(if norm > 0.0 { base + dir * (radius / norm) } else { base })
    }

    /// The point with the given id, if it belongs to the net.
    pub fn point(&self, id: &NetId) -> Option<NetPoint> {
        let coords = match (&self.kind, id) {
            (NetKind::Procedural { .. }, NetId::Lattice(k)) if k.len() == self.dim => self.procedural_point(k)?,
            (NetKind::Listed { points, .. }, NetId::Listed(i)) => points.get(*i)?.clone(),
            _ => return None,
        };
        Some(NetPoint { id: id.clone(), coords })
    }

    /// All net points within Euclidean distance `radius` of `x`, in
    /// lexicographic order of coordinates.
    pub fn within(&self, x: &[f64], radius: f64) -> Vec<NetPoint> {
        let mut out = Vec::new();
        match &self.kind {
            NetKind::Procedural {
                epsilon_base, jitter, ..
            } => {
                let reach = radius + jitter;
                let lo: Vec<f64> = x.iter().map(|v| v - reach).collect();
                let hi: Vec<f64> = x.iter().map(|v| v + reach).collect();
                for k in index_ranges(&lo, &hi, *epsilon_base).into_iter().multi_cartesian_product() {
                    if let Some(p) = self.procedural_point(&k) {
                        if (p.as_slice().iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()).sqrt() <= radius {
                            out.push(NetPoint {
                                id: NetId::Lattice(k),
                                coords: p,
                            });
                        }
                    }
                }
            }
            NetKind::Listed { points, cell, grid } => {
                let lo: Vec<f64> = x.iter().map(|v| v - radius).collect();
                let hi: Vec<f64> = x.iter().map(|v| v + radius).collect();
                let ranges: Vec<_> = Self::cell_of(&lo, *cell)
                    .into_iter()
                    .zip(Self::cell_of(&hi, *cell))
                    .map(|(a, b)| a..=b)
                    .collect();
                for c in ranges.into_iter().multi_cartesian_product() {
                    for &i in grid.get(&c).into_iter().flatten() {
                        let p = &points[i];
                        if (p.as_slice().iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()).sqrt() <= radius {
                            out.push(NetPoint {
                                id: NetId::Listed(i),
                                coords: p.clone(),
                            });
                        }
                    }
                }
            }
        }
        out.sort_by(|a, b| lex_cmp(&a.coords, &b.coords));
        out
    }

    /// The net-rounding map ν: the nearest net point, ties going to the
    /// lexicographically smallest.
    pub fn nearest(&self, x: &[f64]) -> Result<NetPoint> {
        if x.len() != self.dim || !self.region.contains(x) {
            return Err(Error::Coverage { point: x.to_vec() });
        }
        let radius = match &self.kind {
            NetKind::Procedural {
                epsilon_base, jitter, ..
            } => epsilon_base * (self.dim as f64).sqrt() / 2.0 + jitter,
            NetKind::Listed { .. } => self.delta,
        };
        let xv = DVector::from_column_slice(x);
        self.within(x, radius)
            .into_iter()
            .map(|p| ((&p.coords - &xv).norm(), p))
            .min_by(|(da, a), (db, b)| da.total_cmp(db).then_with(|| lex_cmp(&a.coords, &b.coords)))
            .map(|(_, p)| p)
            .ok_or(Error::Coverage { point: x.to_vec() })
    }

    /// Every net point inside `region` (which must be finite in extent).
    pub fn points_in(&self, region: &BoundingBox) -> Vec<NetPoint> {
        match &self.kind {
            NetKind::Procedural {
                epsilon_base, jitter, ..
            } => {
                let grown = region.expanded(*jitter);
                index_ranges(&grown.lo, &grown.hi, *epsilon_base)
                    .into_iter()
                    .multi_cartesian_product()
                    .filter_map(|k| {
                        let p = self.procedural_point(&k)?;
                        region.contains(p.as_slice()).then_some(NetPoint {
                            id: NetId::Lattice(k),
                            coords: p,
                        })
                    })
                    .collect()
            }
            NetKind::Listed { points, .. } => points
                .iter()
                .enumerate()
                .filter(|(_, p)| region.contains(p.as_slice()))
                .map(|(i, p)| NetPoint {
                    id: NetId::Listed(i),
                    coords: p.clone(),
                })
                .collect(),
        }
    }

    /// Largest distance to the nearest net point over a `per_axis`ⁿ grid
    /// spanning `region`.
    pub fn coverage_probe(&self, region: &BoundingBox, per_axis: usize) -> Result<f64> {
        let per_axis = per_axis.max(2);
        let mut worst: f64 = 0.0;
        for idx in (0..self.dim).map(|_| 0..per_axis).multi_cartesian_product() {
            let x: Vec<f64> = idx
                .iter()
                .enumerate()
                .map(|(i, &j)| region.lo[i] + (region.hi[i] - region.lo[i]) * j as f64 / (per_axis - 1) as f64)
                .collect();
            let p = self.nearest(&x)?;
            worst = worst.max((p.coords - DVector::from_column_slice(&x)).norm());
        }
        Ok(worst)
    }

    /// Reads the plain-text net format: a header `n delta`, then one point
    /// per line.
    pub fn load(path: &Path, region: Option<BoundingBox>) -> Result<Net> {
        let (n, delta, rows) = read_rows(path, 1)?;
        let points = rows.into_iter().map(DVector::from_vec).collect::<Vec<_>>();
        if points.iter().any(|p| p.len() != n) {
            return Err(Error::config("net file rows disagree with the header dimension"));
        }
        Net::from_points(points, delta, region)
    }

    /// Writes the points in `region` in the format read by [`Net::load`].
    pub fn save(&self, path: &Path, region: &BoundingBox) -> Result<()> {
        let mut out = format!("{} {}\n", self.dim, self.delta);
        for p in self.points_in(region) {
            let row = p.coords.iter().map(|c| format!("{c:.17e}")).join(" ");
            let _ = writeln!(out, "{row}");
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Parses the shared `n delta` + rows text format, where each row holds
/// `columns·n` numbers.
pub(crate) fn read_rows(path: &Path, columns: usize) -> Result<(usize, f64, Vec<Vec<f64>>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let parse_err = |line, message: String| Error::Parse { line, message };
    let (hl, header) = lines.next().ok_or_else(|| parse_err(1, "missing `n delta` header".into()))?;
    let head: Vec<&str> = header.split_whitespace().collect();
    if head.len() != 2 {
        return Err(parse_err(hl, "header must be `n delta`".into()));
    }
    let n: usize = head[0].parse().map_err(|_| parse_err(hl, format!("bad dimension `{}`", head[0])))?;
    let delta: f64 = head[1].parse().map_err(|_| parse_err(hl, format!("bad delta `{}`", head[1])))?;
    let mut rows = Vec::new();
    for (ln, line) in lines {
        let row = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| parse_err(ln, format!("bad number `{t}`"))))
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != columns * n {
            return Err(parse_err(ln, format!("expected {} values, found {}", columns * n, row.len())));
        }
        rows.push(row);
    }
    Ok((n, delta, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z2(delta: f64) -> Net {
        Net::generate(1.0, delta, 0.0, 0, BoundingBox::symmetric(2, 10.0).unwrap()).unwrap()
    }

    #[test]
    fn nearest_examples() {
        let net = z2(0.75);
        let p = net.nearest(&[0.2, 0.1]).unwrap();
        assert_eq!(p.id, NetId::Lattice(vec![0, 0]));
        let p = net.nearest(&[3.0, -2.0]).unwrap();
        assert_eq!(p.coords, DVector::from_vec(vec![3.0, -2.0]));
        let p = net.nearest(&[0.5, 0.0]).unwrap();
        assert_eq!(p.coords, DVector::from_vec(vec![0.0, 0.0]));
        assert!(matches!(net.nearest(&[20.0, 0.0]), Err(Error::Coverage { .. })));
    }

    #[test]
    fn precondition_is_checked() {
        let region = BoundingBox::symmetric(2, 5.0).unwrap();
        assert!(Net::generate(1.0, 0.75, 0.0, 1, region.clone()).is_ok());
        let err = Net::generate(1.0, 0.75, 0.1, 1, region).unwrap_err();
        assert!(err.to_string().contains("jitter < delta"), "{err}");
    }

    #[test]
    fn jitter_is_deterministic_and_bounded() {
        let region = BoundingBox::symmetric(2, 4.0).unwrap();
        let a = Net::generate(1.0, 0.85, 0.1, 7, region.clone()).unwrap();
        let b = Net::generate(1.0, 0.85, 0.1, 7, region.clone()).unwrap();
        let c = Net::generate(1.0, 0.85, 0.1, 8, region.clone()).unwrap();
        let pa = a.points_in(&region);
        assert_eq!(pa, b.points_in(&region));
        assert_ne!(pa, c.points_in(&region));
        for p in &pa {
            let NetId::Lattice(k) = &p.id else { panic!() };
            let base = DVector::from_iterator(2, k.iter().map(|&v| v as f64));
            assert!((&p.coords - base).norm() <= 0.1);
        }
        assert!(a.coverage_probe(&region, 41).unwrap() < 0.85);
    }

    #[test]
    fn listed_net_round_trips_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.txt");
        let net = z2(0.75);
        let region = BoundingBox::symmetric(2, 2.0).unwrap();
        net.save(&path, &region).unwrap();
        let loaded = Net::load(&path, None).unwrap();
        assert_eq!(loaded.points_in(&region).len(), 25);
        assert_eq!(loaded.nearest(&[0.4, -1.6]).unwrap().coords, DVector::from_vec(vec![0.0, -2.0]));
        assert_eq!(loaded.within(&[0.0, 0.0], 1.0).len(), 5);
    }
}
