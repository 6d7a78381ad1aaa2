//! Geodesics `γ_{p,v}` in a global direction `v`, obtained from segments to
//! net points drifting in direction `v`, and the global-to-local direction
//! map `v ↦ γ̇_{p,v}(0)`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gluedmap::Icosphere;
use crate::manifold::{flow, shoot, ChartPoint, MetricField};
use crate::netlattice::{EmbeddedNet, NetPoint};

/// Drift schedule `r_m = start·growthᵐ`, `m < max_terms`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DriftParams {
    pub start_radius: f64,
    pub growth: f64,
    pub max_terms: usize,
    pub tol: f64,
    /// Angle (radians) between the main drift direction and the auxiliary
    /// chords used to fit the linear part of the chord-to-tangent map.
    pub aux_angle: f64,
}

impl DriftParams {
    /// Start at `8·max(R₁, 1)`, double each term, at most 12 terms.
    pub fn standard(r1: f64) -> Self {
        DriftParams {
            start_radius: 8.0 * r1.max(1.0),
            growth: 2.0,
            max_terms: 12,
            tol: 1e-6,
            aux_angle: 0.25,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceEntry {
    pub radius: f64,
    pub net_point: Vec<f64>,
    /// Unit initial tangent of the segment from `p` to `p_m`.
    pub chord_tangent: Vec<f64>,
    /// Unit tangent after the linear chord correction.
    pub tangent: Vec<f64>,
    /// Metric distance to the previous corrected tangent.
    pub gap: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GlobalGeodesic {
    pub base: Vec<f64>,
    pub base_image: Vec<f64>,
    pub direction: Vec<f64>,
    /// `γ̇_{p,v}(0)`, unit in `g(ι(p))`.
    pub tangent: Vec<f64>,
    pub trace: Vec<TraceEntry>,
    pub converged: bool,
    pub final_gap: f64,
}

/// Orthonormal basis of `v^⊥` (Gram–Schmidt on the coordinate axes).
fn complement(v: &DVector<f64>) -> Vec<DVector<f64>> {
    let n = v.len();
    let mut basis: Vec<DVector<f64>> = vec![v.clone()];
    for i in 0..n {
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        for b in &basis {
            e -= b * b.dot(&e);
        }
        if e.norm() > 1e-8 {
            basis.push(e.normalize());
        }
        if basis.len() == n {
            break;
        }
    }
    basis.split_off(1)
}

fn metric_norm(metric: &MetricField, at: &ChartPoint, v: &DVector<f64>) -> Result<f64> {
    metric.norm_at(at, v)
}

/// Builds `γ_{p,v}` from `p_m = ν(p + r_m v)`.
///
/// Segment tangents approach the limit only like `δ/r_m`, because `p_m` sits
/// up to `δ` off the ray. Each term therefore also shoots to net points in
/// `n − 1` nearby directions and fits the linear map `L` sending chords
/// `p_m − p` to initial velocities; the tangent estimate is `Lv`, normalized.
/// For flat and pullback metrics the velocity is exactly linear in the chord,
/// so the estimate is exact at every term.
pub fn global_geodesic(en: &EmbeddedNet, p: &NetPoint, v: &DVector<f64>, params: &DriftParams) -> Result<GlobalGeodesic> {
    let n = en.dim();
    if v.len() != n || (v.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::domain("drift direction must be a unit vector"));
    }
    let metric = en.metric();
    let x0 = en.image(p)?;
    let perp = complement(v);
    let (ca, sa) = (params.aux_angle.cos(), params.aux_angle.sin());
    let dirs: Vec<DVector<f64>> = std::iter::once(v.clone())
        .chain(perp.iter().map(|b| v * ca + b * sa))
        .collect();
    let mut trace: Vec<TraceEntry> = Vec::new();
    let mut prev: Option<DVector<f64>> = None;
    let mut converged = false;
    let mut final_gap = f64::INFINITY;
    for m in 0..params.max_terms {
        let r = params.start_radius * params.growth.powi(m as i32);
        let mut chords = DMatrix::zeros(n, n);
        let mut vels = DMatrix::zeros(n, n);
        let mut main_point = None;
        let mut covered = true;
        for (j, d) in dirs.iter().enumerate() {
            let target = &p.coords + d * r;
            let q = match en.nu(target.as_slice()) {
                Ok(q) => q.point,
                Err(Error::Coverage { .. }) => {
                    covered = false;
                    break;
                }
                Err(e) => return Err(e),
            };
            let image = en.image(&q)?;
            let vel = shoot(metric, x0.as_slice(), image.as_slice())?;
            chords.set_column(j, &(&q.coords - &p.coords));
            vels.set_column(j, &vel);
            if j == 0 {
                main_point = Some((q, vel));
            }
        }
        if !covered {
            break;
        }
        let (q, vel) = main_point.expect("main direction shot first");
        let chord_tangent = &vel / metric_norm(metric, &x0, &vel)?;
        let fit = chords
            .clone()
            .lu()
            .solve(&DMatrix::identity(n, n))
            .map(|inv| &vels * inv)
            .ok_or_else(|| Error::numeric("drift chords are degenerate"))?;
        let lv = &fit * v;
        let w = &lv / metric_norm(metric, &x0, &lv)?;
        let gap = match &prev {
            Some(pw) => Some(metric_norm(metric, &x0, &(&w - pw))?),
            None => None,
        };
        trace.push(TraceEntry {
            radius: r,
            net_point: q.coords.as_slice().to_vec(),
            chord_tangent: chord_tangent.as_slice().to_vec(),
            tangent: w.as_slice().to_vec(),
            gap,
        });
        prev = Some(w);
        if let Some(g) = gap {
            final_gap = g;
            if g < params.tol {
                converged = true;
                break;
            }
        }
    }
    let tangent = prev.ok_or_else(|| Error::Coverage {
        point: (&p.coords + v * params.start_radius).as_slice().to_vec(),
    })?;
    Ok(GlobalGeodesic {
        base: p.coords.as_slice().to_vec(),
        base_image: x0.as_slice().to_vec(),
        direction: v.as_slice().to_vec(),
        tangent: tangent.as_slice().to_vec(),
        trace,
        converged,
        final_gap,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DirectionEntry {
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    /// `‖w(v) + w(−v)‖_g`.
    pub oddness_defect: f64,
    pub trace_len: usize,
    pub final_gap: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct DirectionTable {
    pub entries: Vec<DirectionEntry>,
    pub max_oddness_defect: f64,
    /// Smallest metric angle between images of distinct grid directions.
    pub min_separation: f64,
    /// Smallest angle between distinct grid directions.
    pub grid_spacing: f64,
    pub max_final_gap: f64,
}

/// Uniform direction grid: `resolution` equal angles (`n = 2`) or an
/// icosphere of subdivision level `resolution` (`n = 3`), with the index of
/// each direction's antipode.
pub fn direction_grid(n: usize, resolution: usize) -> Result<(Vec<DVector<f64>>, Vec<usize>)> {
    match n {
        2 => {
            let k = resolution.max(8) & !1;
            let dirs = (0..k)
                .map(|i| {
                    let t = std::f64::consts::TAU * i as f64 / k as f64;
                    DVector::from_vec(vec![t.cos(), t.sin()])
                })
                .collect();
            Ok((dirs, (0..k).map(|i| (i + k / 2) % k).collect()))
        }
        3 => {
            let s = Icosphere::new(resolution.max(1) as u32);
            let anti = s.antipodes();
            Ok((s.vertices.iter().map(|v| DVector::from_column_slice(v.as_slice())).collect(), anti))
        }
        _ => Err(Error::Precondition(format!("direction grids exist for n = 2, 3, not {n}"))),
    }
}

fn angle_between(metric: &MetricField, at: &ChartPoint, a: &DVector<f64>, b: &DVector<f64>) -> Result<f64> {
    let ab = metric.inner_at(at, a, b)?;
    let na = metric.norm_at(at, a)?;
    let nb = metric.norm_at(at, b)?;
    Ok((ab / (na * nb)).clamp(-1.0, 1.0).acos())
}

/// The global-to-local direction map on a uniform grid of `Sⁿ⁻¹`.
pub fn local_direction_map(en: &EmbeddedNet, p: &NetPoint, resolution: usize, params: &DriftParams) -> Result<DirectionTable> {
    let (dirs, anti) = direction_grid(en.dim(), resolution)?;
    let geos: Vec<GlobalGeodesic> = dirs
        .par_iter()
        .map(|v| global_geodesic(en, p, v, params))
        .collect::<Result<_>>()?;
    let x0 = en.image(p)?;
    let metric = en.metric();
    let ws: Vec<DVector<f64>> = geos.iter().map(|g| DVector::from_column_slice(&g.tangent)).collect();
    let mut entries = Vec::with_capacity(dirs.len());
    for (i, g) in geos.iter().enumerate() {
        entries.push(DirectionEntry {
            v: g.direction.clone(),
            w: g.tangent.clone(),
            oddness_defect: metric.norm_at(&x0, &(&ws[i] + &ws[anti[i]]))?,
            trace_len: g.trace.len(),
            final_gap: g.final_gap,
            converged: g.converged,
        });
    }
    let mut min_sep = f64::INFINITY;
    let mut spacing = f64::INFINITY;
    for i in 0..ws.len() {
        for j in i + 1..ws.len() {
            min_sep = min_sep.min(angle_between(metric, &x0, &ws[i], &ws[j])?);
            spacing = spacing.min(dirs[i].dot(&dirs[j]).clamp(-1.0, 1.0).acos());
        }
    }
    Ok(DirectionTable {
        max_oddness_defect: entries.iter().map(|e| e.oddness_defect).fold(0.0, f64::max),
        max_final_gap: entries.iter().map(|e| e.final_gap).fold(0.0, f64::max),
        entries,
        min_separation: min_sep,
        grid_spacing: spacing,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct InjectivityReport {
    pub base: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub epsilon: f64,
    pub epsilon_raw: f64,
    pub delta_tilde: f64,
    pub horizon: f64,
    pub gamma_end: Vec<f64>,
    pub witness: Vec<f64>,
    pub witness_distance: f64,
    pub base_to_witness: f64,
    pub bracket_holds: bool,
    /// The direction among `u, v` with `⟨(q − p)/|q − p|, ·⟩ < 1 − ε`.
    pub drift_direction: Vec<f64>,
    /// `|p_m − p|` for the farthest drift point `p_m`.
    pub drift_radius: f64,
    /// `⟨(q − p)/|q − p|, (p_m − p)/|p_m − p|⟩`.
    pub drift_alignment: f64,
    pub drift_inequality_holds: bool,
    /// `d(γ'(T), γ(T))` for the global geodesic `γ'` in the drift direction.
    pub segment_separation: f64,
}

/// Largest `ε` compatible with `min(⟨w, u⟩, ⟨w, v⟩) < 1 − ε` for every unit
/// `w`, less a 0.01 margin; values of at least 0.05 are floored to a
/// multiple of 0.05. Returns `(ε, raw ε)`.
pub fn separation_epsilon(u: &DVector<f64>, v: &DVector<f64>) -> Result<(f64, f64)> {
    let cos = u.dot(v).clamp(-1.0, 1.0);
    let theta = cos.acos();
    if theta < 1e-12 {
        return Err(Error::Precondition("injectivity experiment needs u != v".into()));
    }
    let raw = 1.0 - (theta / 2.0).cos() - 0.01;
    if raw <= 0.0 {
        return Err(Error::Precondition(format!("directions too close for a usable gap (raw epsilon {raw:.3e})")));
    }
    let eps = if raw >= 0.05 {
        ((raw + 1e-12) / 0.05).floor() * 0.05
    } else {
        raw
    };
    Ok((eps.min(0.99), raw))
}

/// Follows `γ = γ_{p,v}` to `T = 6δ̃/ε`, `δ̃ = 2δn`, finds a net point `q`
/// near `γ(T)` and measures the quantities the injectivity argument uses.
pub fn injectivity_experiment(
    en: &EmbeddedNet,
    p: &NetPoint,
    u: &DVector<f64>,
    v: &DVector<f64>,
    params: &DriftParams,
) -> Result<InjectivityReport> {
    let (eps, raw) = separation_epsilon(u, v)?;
    let n = en.dim() as f64;
    let delta_tilde = 2.0 * en.net().delta() * n;
    let horizon = 6.0 * delta_tilde / eps;
    let metric = en.metric();
    let x0 = en.image(p)?;
    let geo = global_geodesic(en, p, v, params)?;
    let w = DVector::from_column_slice(&geo.tangent);
    let (end, _) = flow(metric, x0.as_slice(), w.as_slice(), horizon)?;
    let end = ChartPoint::new(end)?;
    let hit = en.nearest_image(&end)?;
    if hit.distance >= delta_tilde {
        return Err(Error::Precondition(format!(
            "net property violated: nearest net image to gamma(T) is {:.4} away (bound {delta_tilde})",
            hit.distance
        )));
    }
    let qp = &hit.point.coords - &p.coords;
    let base_to_witness = qp.norm();
    let dir_q = &qp / base_to_witness;
    // The direction the witness chord is not aligned with; its drift
    // sequence comes from the corresponding global geodesic.
    let (drift_dir, drift_geo) = if dir_q.dot(u) <= dir_q.dot(v) {
        (u.clone(), global_geodesic(en, p, u, params)?)
    } else {
        (v.clone(), geo.clone())
    };
    let last = drift_geo.trace.last().expect("global geodesic has a trace");
    let mut pm = DVector::from_column_slice(&last.net_point);
    if (&pm - &p.coords).norm() <= horizon {
        // Trace converged early: continue along the fitted geodesic past T.
        let (far, _) = flow(metric, x0.as_slice(), &drift_geo.tangent, params.growth * horizon)?;
        pm = en.nearest_image(&ChartPoint::new(far)?)?.point.coords.clone();
    }
    let drift_radius = (&pm - &p.coords).norm();
    let drift_alignment = dir_q.dot(&((&pm - &p.coords) / drift_radius));
    let (seg_end, _) = flow(metric, x0.as_slice(), &drift_geo.tangent, horizon)?;
    let segment_separation = crate::manifold::distance(metric, &ChartPoint::new(seg_end)?, &end)?;
    Ok(InjectivityReport {
        base: p.coords.as_slice().to_vec(),
        u: u.as_slice().to_vec(),
        v: v.as_slice().to_vec(),
        epsilon: eps,
        epsilon_raw: raw,
        delta_tilde,
        horizon,
        gamma_end: end.as_slice().to_vec(),
        witness: hit.point.coords.as_slice().to_vec(),
        witness_distance: hit.distance,
        base_to_witness,
        bracket_holds: horizon - delta_tilde < base_to_witness && base_to_witness < horizon + delta_tilde,
        drift_direction: drift_dir.as_slice().to_vec(),
        drift_radius,
        drift_alignment,
        drift_inequality_holds: drift_radius > horizon && drift_alignment < 1.0 - eps,
        segment_separation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlattice::{BoundingBox, Embedding, Net};
    use nalgebra::DMatrix;
    use std::sync::Arc;

    fn embedded(metric: MetricField, embedding: Embedding) -> EmbeddedNet {
        let net = Net::generate(1.0, 0.75, 0.0, 0, BoundingBox::symmetric(2, 1e5).unwrap()).unwrap();
        EmbeddedNet::new(Arc::new(metric), Arc::new(net), embedding).unwrap()
    }

    fn origin(en: &EmbeddedNet) -> NetPoint {
        en.nu(&[0.0, 0.0]).unwrap().point
    }

    #[test]
    fn flat_direction_is_exact() {
        let en = embedded(MetricField::flat(2).unwrap(), Embedding::Identity);
        let v = DVector::from_vec(vec![0.6, 0.8]);
        let g = global_geodesic(&en, &origin(&en), &v, &DriftParams::standard(1.0)).unwrap();
        assert!((DVector::from_column_slice(&g.tangent) - &v).amax() < 1e-9);
        assert!(g.converged);
        assert_eq!(g.trace.len(), 2);
    }

    #[test]
    fn shear_direction_is_parallel_chord() {
        let m = MetricField::linear_pullback(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0])).unwrap();
        let en = embedded(m, Embedding::Pullback);
        let v = DVector::from_vec(vec![0.0, 1.0]);
        let g = global_geodesic(&en, &origin(&en), &v, &DriftParams::standard(1.0)).unwrap();
        // Dφ⁻¹ (0, 1) = (−1, 1), unit in g since |A (−1, 1)| = 1.
        let expected = DVector::from_vec(vec![-1.0, 1.0]);
        assert!((DVector::from_column_slice(&g.tangent) - expected).amax() < 1e-9, "{:?}", g.tangent);
    }

    #[test]
    fn shear_metric_on_chart_net() {
        // Net placed directly in the chart: chords stay parallel to v and
        // only the normalization changes, |A (0, 1)| = √2.
        let m = MetricField::linear_pullback(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0])).unwrap();
        let en = embedded(m, Embedding::Identity);
        let v = DVector::from_vec(vec![0.0, 1.0]);
        let g = global_geodesic(&en, &origin(&en), &v, &DriftParams::standard(1.0)).unwrap();
        let expected = DVector::from_vec(vec![0.0, 0.5f64.sqrt()]);
        assert!((DVector::from_column_slice(&g.tangent) - expected).amax() < 1e-9, "{:?}", g.tangent);
    }

    #[test]
    fn flat_direction_map() {
        let en = embedded(MetricField::flat(2).unwrap(), Embedding::Identity);
        let t = local_direction_map(&en, &origin(&en), 16, &DriftParams::standard(1.0)).unwrap();
        assert!(t.max_oddness_defect < 1e-12);
        assert!((t.min_separation - t.grid_spacing).abs() < 1e-9);
    }

    #[test]
    fn epsilon_selection() {
        let u = DVector::from_vec(vec![1.0, 0.0]);
        let v = DVector::from_vec(vec![0.0, 1.0]);
        let (e, raw) = separation_epsilon(&u, &v).unwrap();
        assert_eq!(e, 0.25);
        assert!((raw - (1.0 - 0.5f64.sqrt() - 0.01)).abs() < 1e-15);
        assert!(separation_epsilon(&u, &u).is_err());
    }

    #[test]
    fn flat_injectivity_bracket() {
        let en = embedded(MetricField::flat(2).unwrap(), Embedding::Identity);
        let u = DVector::from_vec(vec![1.0, 0.0]);
        let v = DVector::from_vec(vec![0.0, 1.0]);
        let r = injectivity_experiment(&en, &origin(&en), &u, &v, &DriftParams::standard(1.0)).unwrap();
        assert_eq!(r.delta_tilde, 3.0);
        assert!((r.horizon - 72.0).abs() < 1e-12);
        assert!(r.bracket_holds);
        assert!(r.witness_distance < 1e-9);
        assert!(r.drift_inequality_holds);
        assert!(r.segment_separation > r.delta_tilde);
    }
}
