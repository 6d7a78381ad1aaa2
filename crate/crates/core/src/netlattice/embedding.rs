use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::net::{read_rows, BoundingBox, Net, NetId, NetPoint};
use crate::error::{Error, Result};
use crate::manifold::{distance, ChartPoint, MetricField};

/// How net points are placed in `M`.
#[derive(Clone, Debug, PartialEq)]
pub enum Embedding {
    /// `ι(p) = p` in the chart.
    Identity,
    /// `ι = φ⁻¹`, an exact isometry for pullback metrics.
    Pullback,
    /// Explicit images, indexed like the points of a loaded net.
    Table(Vec<DVector<f64>>),
}

impl Embedding {
    pub fn mode(&self) -> &'static str {
        match self {
            Embedding::Identity => "identity",
            Embedding::Pullback => "pullback",
            Embedding::Table(_) => "table",
        }
    }

    /// Reads a table file: header `n delta`, then rows of `2n` numbers
    /// (net point followed by its chart image).
    pub fn load_table(path: &Path, region: Option<BoundingBox>) -> Result<(Net, Embedding)> {
        let (n, delta, rows) = read_rows(path, 2)?;
        let points = rows.iter().map(|r| DVector::from_column_slice(&r[..n])).collect();
        let images = rows.iter().map(|r| DVector::from_column_slice(&r[n..])).collect();
        Ok((Net::from_points(points, delta, region)?, Embedding::Table(images)))
    }
}

/// A net point together with its rounding error `δ_ν(x) = |x − ν(x)|`.
#[derive(Clone, Debug, PartialEq)]
pub struct Rounded {
    pub point: NetPoint,
    pub delta_nu: f64,
}

/// The nearest embedded net point to a point of `M`.
#[derive(Clone, Debug)]
pub struct NearestImage {
    pub point: NetPoint,
    pub image: ChartPoint,
    pub distance: f64,
    /// Number of geodesic distances actually computed.
    pub evaluated: usize,
}

/// A net, its embedding `ι` and the ambient metric.
#[derive(Clone, Debug)]
pub struct EmbeddedNet {
    metric: Arc<MetricField>,
    net: Arc<Net>,
    embedding: Embedding,
    prune_ratio: f64,
}

impl EmbeddedNet {
    pub fn new(metric: Arc<MetricField>, net: Arc<Net>, embedding: Embedding) -> Result<Self> {
        if metric.dim() != net.dim() {
            return Err(Error::config(format!(
                "metric dimension {} differs from net dimension {}",
                metric.dim(),
                net.dim()
            )));
        }
        match &embedding {
            Embedding::Pullback if !metric.has_oracle() => {
                return Err(Error::config("pullback embedding needs a pullback metric family"));
            }
            Embedding::Table(images) => {
                if net.is_procedural() {
                    return Err(Error::config("table embeddings need a net loaded from the same file"));
                }
                if images.iter().any(|v| v.len() != net.dim()) {
                    return Err(Error::config("table images have the wrong dimension"));
                }
            }
            _ => {}
        }
        let chart_ratio = match metric.chart_ratio_bound() {
            Some(l) => l,
            None => {
                let r = net.coverage_region();
                let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
                let samples: Vec<DVector<f64>> = (0..256).map(|_| r.sample(&mut rng)).collect();
                1.0 / metric.min_eigenvalue_over(&samples).sqrt()
            }
        };
        let safe = 2.0 * chart_ratio;
        let prune_ratio = match embedding {
            Embedding::Pullback => safe * metric.pullback_lipschitz().unwrap_or(1.0),
            _ => safe,
        };
        Ok(EmbeddedNet {
            metric,
            net,
            embedding,
            prune_ratio,
        })
    }

    pub fn metric(&self) -> &MetricField {
        &self.metric
    }

    pub fn metric_arc(&self) -> &Arc<MetricField> {
        &self.metric
    }

    pub fn net(&self) -> &Net {
        &self.net
    }

    pub fn embedding(&self) -> &Embedding {
        &self.embedding
    }

    pub fn dim(&self) -> usize {
        self.net.dim()
    }

    /// `Λ` used for pruning: `d(y, ι(q)) ≥ |q − hint(y)| / Λ`.
    pub fn prune_ratio(&self) -> f64 {
        self.prune_ratio
    }

    pub fn nu(&self, x: &[f64]) -> Result<Rounded> {
        let point = self.net.nearest(x)?;
        let delta_nu = point
            .coords
            .iter()
            .zip(x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        Ok(Rounded { point, delta_nu })
    }

    /// `ι(p)`.
    pub fn image(&self, p: &NetPoint) -> Result<ChartPoint> {
        match &self.embedding {
            Embedding::Identity => ChartPoint::new(p.coords.clone()),
            Embedding::Pullback => ChartPoint::new(self.metric.pullback_inverse(p.coords.as_slice())?),
            Embedding::Table(images) => match p.id {
                NetId::Listed(i) => images
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::domain(format!("no table image for net point {i}")))
                    .and_then(ChartPoint::new),
                NetId::Lattice(_) => Err(Error::domain("table embedding queried with a lattice id")),
            },
        }
    }

    /// `ι(ν(x))`.
    pub fn round_and_embed(&self, x: &[f64]) -> Result<(Rounded, ChartPoint)> {
        let r = self.nu(x)?;
        let image = self.image(&r.point)?;
        Ok((r, image))
    }

    /// Search centre in net coordinates for points of `ι(X)` near `y`.
    fn hint(&self, y: &ChartPoint) -> DVector<f64> {
        match &self.embedding {
            Embedding::Pullback => self.metric.pullback(y.as_slice()).unwrap_or_else(|| y.coords().clone()),
            _ => y.coords().clone(),
        }
    }

    /// `d(y, ι(X))` and its minimizer, by branch and bound over candidates
    /// ordered by the chart lower bound.
    pub fn nearest_image(&self, y: &ChartPoint) -> Result<NearestImage> {
        let hint = self.hint(y);
        let mut cache: HashMap<NetId, (f64, ChartPoint)> = HashMap::new();
        let mut best: Option<(NetPoint, f64)> = None;
        let mut radius = self.net.delta();
        let limit = 1e3 * self.net.delta() * self.prune_ratio;
        loop {
            let mut candidates: Vec<(f64, NetPoint)> = match &self.embedding {
                Embedding::Table(images) => self
                    .net
                    .points_in(&BoundingBox {
                        lo: vec![f64::NEG_INFINITY; self.dim()],
                        hi: vec![f64::INFINITY; self.dim()],
                    })
                    .into_iter()
                    .filter_map(|p| {
                        let NetId::Listed(i) = p.id else { return None };
                        let d = (&images[i] - &hint).norm();
                        (d <= radius).then_some((d, p))
                    })
                    .collect(),
                _ => self
                    .net
                    .within(hint.as_slice(), radius)
                    .into_iter()
                    .map(|p| ((&p.coords - &hint).norm(), p))
                    .collect(),
            };
            candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
            for (hd, p) in candidates {
                let lower = hd / self.prune_ratio;
                if let Some((_, b)) = &best {
                    if lower > *b {
                        break;
                    }
                }
                if cache.contains_key(&p.id) {
                    continue;
                }
                let image = self.image(&p)?;
                let d = distance(&self.metric, y, &image)?;
                cache.insert(p.id.clone(), (d, image));
                if best.as_ref().is_none_or(|(_, b)| d < *b) {
                    best = Some((p, d));
                }
            }
            if let Some((p, d)) = &best {
                if d * self.prune_ratio <= radius {
                    let image = cache[&p.id].1.clone();
                    return Ok(NearestImage {
                        point: p.clone(),
                        image,
                        distance: *d,
                        evaluated: cache.len(),
                    });
                }
            }
            radius *= 2.0;
            if radius > limit {
                return Err(Error::Coverage {
                    point: y.as_slice().to_vec(),
                });
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AuditRow {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub euclidean: f64,
    pub riemannian: f64,
    pub distortion: f64,
}

#[derive(Clone, Debug)]
pub struct AuditReport {
    pub max_distortion: f64,
    pub worst_pair: Option<(NetPoint, NetPoint)>,
    pub pairs: usize,
    pub rows: Vec<AuditRow>,
}

/// `max |d(ι(p), ι(q)) − |p − q||` over net points in `region`: all pairs when
/// there are at most `budget` of them, otherwise `budget` seeded random pairs.
pub fn distortion_audit(en: &EmbeddedNet, region: &BoundingBox, budget: usize, seed: u64) -> Result<AuditReport> {
    let points = en.net().points_in(region);
    let m = points.len();
    let total = m * m.saturating_sub(1) / 2;
    let pairs: Vec<(usize, usize)> = if total <= budget {
        (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..budget)
            .map(|_| {
                let i = rng.random_range(0..m);
                let mut j = rng.random_range(0..m - 1);
                if j >= i {
                    j += 1;
                }
                (i.min(j), i.max(j))
            })
            .collect()
    };
    let images: Vec<ChartPoint> = points.par_iter().map(|p| en.image(p)).collect::<Result<_>>()?;
    let rows: Vec<AuditRow> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let euclidean = (&points[i].coords - &points[j].coords).norm();
            let riemannian = distance(en.metric(), &images[i], &images[j])?;
            Ok(AuditRow {
                p: points[i].coords.as_slice().to_vec(),
                q: points[j].coords.as_slice().to_vec(),
                euclidean,
                riemannian,
                distortion: (riemannian - euclidean).abs(),
            })
        })
        .collect::<Result<_>>()?;
    let worst = rows
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.distortion.total_cmp(&b.1.distortion))
        .map(|(k, _)| k);
    Ok(AuditReport {
        max_distortion: worst.map_or(0.0, |k| rows[k].distortion),
        worst_pair: worst.map(|k| (points[pairs[k].0].clone(), points[pairs[k].1].clone())),
        pairs: rows.len(),
        rows,
    })
}
