use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::metric::MetricField;
use super::ode::{integrate, Tolerances};
use super::{ChartPoint, TangentVector};
use crate::error::{Error, Result};

/// Local error tolerance of the geodesic integrator (relative and absolute).
pub const INTEGRATION_TOLERANCE: f64 = 1e-10;
/// Maximum chart-coordinate endpoint residual accepted from shooting.
pub const BVP_TOLERANCE: f64 = 1e-9;
/// Randomized restarts after the straight-line initial guess fails.
pub const MAX_RESTARTS: usize = 8;

const NEWTON_TARGET: f64 = 1e-11;
const MAX_NEWTON_ITERATIONS: usize = 40;
const FD_RELATIVE_STEP: f64 = 1e-7;

const TOL: Tolerances = Tolerances {
    rtol: INTEGRATION_TOLERANCE,
    atol: INTEGRATION_TOLERANCE,
    max_steps: 4_000_000,
};

#[derive(Clone, Debug, PartialEq)]
pub struct PathSample {
    pub t: f64,
    pub point: DVector<f64>,
    pub velocity: DVector<f64>,
}

/// A geodesic segment with its dense output (one sample per accepted step).
#[derive(Clone, Debug)]
pub struct GeodesicPath {
    pub start: ChartPoint,
    pub initial_velocity: TangentVector,
    pub duration: f64,
    pub samples: Vec<PathSample>,
    pub minimizing: bool,
}

impl GeodesicPath {
    pub fn endpoint(&self) -> &DVector<f64> {
        &self.samples.last().expect("paths always hold samples").point
    }

    /// Constant metric speed, read off the initial velocity.
    pub fn speed(&self, metric: &MetricField) -> Result<f64> {
        self.initial_velocity.norm(metric)
    }

    pub fn length(&self, metric: &MetricField) -> Result<f64> {
        Ok(self.speed(metric)? * self.duration)
    }

    /// `max_t |‖γ̇(t)‖ − ‖γ̇(0)‖| / ‖γ̇(0)‖` over the stored samples.
    pub fn max_speed_deviation(&self, metric: &MetricField) -> Result<f64> {
        let s0 = self.speed(metric)?;
        if s0 == 0.0 {
            return Ok(0.0);
        }
        let mut worst: f64 = 0.0;
        for s in &self.samples {
            let p = ChartPoint::new(s.point.clone())?;
            let speed = metric.norm_at(&p, &s.velocity)?;
            worst = worst.max((speed - s0).abs() / s0);
        }
        Ok(worst)
    }
}

fn check_pair(metric: &MetricField, x: &[f64], y: &[f64]) -> Result<()> {
    let n = metric.dim();
    if x.len() != n || y.len() != n {
        return Err(Error::domain("endpoint dimension does not match the metric"));
    }
    if x.iter().chain(y).any(|c| !c.is_finite()) {
        return Err(Error::domain("non-finite geodesic endpoint"));
    }
    Ok(())
}

fn geodesic_rhs<'a>(metric: &'a MetricField, copies: usize) -> impl FnMut(&[f64], &mut [f64]) -> bool + 'a {
    let n = metric.dim();
    move |y: &[f64], dy: &mut [f64]| {
        for c in 0..copies {
            let off = c * 2 * n;
            let (x, v) = y[off..off + 2 * n].split_at(n);
            dy[off..off + n].copy_from_slice(v);
            if !metric.accel(x, v, &mut dy[off + n..off + 2 * n]) {
                return false;
            }
        }
        dy.iter().all(|d| d.is_finite())
    }
}

/// Follows the geodesic from `x` with initial chart velocity `v` for time
/// `t`, returning the final position and velocity.
pub fn flow(metric: &MetricField, x: &[f64], v: &[f64], t: f64) -> Result<(DVector<f64>, DVector<f64>)> {
    check_pair(metric, x, v)?;
    let n = metric.dim();
    let mut y = Vec::with_capacity(2 * n);
    y.extend_from_slice(x);
    y.extend_from_slice(v);
    integrate(geodesic_rhs(metric, 1), &mut y, t, 2 * n, TOL, |_, _| {})?;
    Ok((
        DVector::from_column_slice(&y[..n]),
        DVector::from_column_slice(&y[n..]),
    ))
}

/// Endpoint at `t = 1` and its finite-difference Jacobian with respect to the
/// initial velocity. The perturbed copies share the base step sequence.
fn endpoint_and_jacobian(
    metric: &MetricField,
    x: &[f64],
    v: &DVector<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = metric.dim();
    let copies = n + 1;
    let h = FD_RELATIVE_STEP * v.amax().max(1.0);
    let mut y = vec![0.0; copies * 2 * n];
    for c in 0..copies {
        let off = c * 2 * n;
        y[off..off + n].copy_from_slice(x);
        y[off + n..off + 2 * n].copy_from_slice(v.as_slice());
        if c > 0 {
            y[off + n + c - 1] += h;
        }
    }
    integrate(geodesic_rhs(metric, copies), &mut y, 1.0, 2 * n, TOL, |_, _| {})?;
    let end = DVector::from_column_slice(&y[..n]);
    let jac = DMatrix::from_fn(n, n, |r, c| {
        let off = (c + 1) * 2 * n;
        (y[off + r] - end[r]) / h
    });
    Ok((end, jac))
}

fn newton(
    metric: &MetricField,
    x: &[f64],
    y: &DVector<f64>,
    v0: DVector<f64>,
    scale: f64,
) -> std::result::Result<DVector<f64>, f64> {
    let (target, accept) = (NEWTON_TARGET * scale, BVP_TOLERANCE * scale);
    let mut v = v0;
    let Ok((end, mut jac)) = endpoint_and_jacobian(metric, x, &v) else {
        return Err(f64::INFINITY);
    };
    let mut f = end - y;
    let mut fnorm = f.amax();
    for _ in 0..MAX_NEWTON_ITERATIONS {
        if fnorm <= target {
            return Ok(v);
        }
        let Some(dv) = jac.clone().lu().solve(&(-&f)) else {
            return if fnorm <= accept { Ok(v) } else { Err(fnorm) };
        };
        let mut alpha = 1.0;
        let accepted = loop {
            let trial = &v + &dv * alpha;
            if let Ok((e, j)) = endpoint_and_jacobian(metric, x, &trial) {
                let ft = e - y;
                let tn = ft.amax();
                if tn.is_finite() && tn < fnorm * (1.0 - 1e-4 * alpha) {
                    break Some((trial, ft, tn, j));
                }
            }
            alpha *= 0.5;
            if alpha < 1.0 / 1024.0 {
                break None;
            }
        };
        match accepted {
            Some((trial, ft, tn, j)) => {
                let stalled = tn > 0.5 * fnorm;
                v = trial;
                f = ft;
                jac = j;
                fnorm = tn;
                if stalled && fnorm <= accept {
                    return Ok(v);
                }
            }
            None => {
                return if fnorm <= accept { Ok(v) } else { Err(fnorm) };
            }
        }
    }
    if fnorm <= accept {
        Ok(v)
    } else {
        Err(fnorm)
    }
}

fn restart_seed(x: &[f64], y: &[f64]) -> u64 {
    x.iter().chain(y).fold(0x243F_6A88_85A3_08D3u64, |h, c| {
        (h ^ c.to_bits()).wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(23)
    })
}

/// Endpoint tolerance scale: residuals are absolute up to unit chart
/// separation and relative beyond it, since integration error grows with
/// the length of the arc.
pub fn residual_scale(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt().max(1.0)
}

/// Initial chart velocity of the geodesic `γ: [0, 1] → M` from `x` to `y`,
/// found by damped Newton shooting from the chart straight line, with
/// seeded random restarts.
pub fn shoot(metric: &MetricField, x: &[f64], y: &[f64]) -> Result<DVector<f64>> {
    check_pair(metric, x, y)?;
    let n = metric.dim();
    if x == y {
        return Ok(DVector::zeros(n));
    }
    let target = DVector::from_column_slice(y);
    let guess = &target - DVector::from_column_slice(x);
    let mut rng = ChaCha8Rng::seed_from_u64(restart_seed(x, y));
    let scale = residual_scale(x, y);
    let mut best = f64::INFINITY;
    for attempt in 0..=MAX_RESTARTS {
        let v0 = if attempt == 0 {
            guess.clone()
        } else {
            let spread = 0.25 * attempt as f64 / MAX_RESTARTS as f64 + 0.05;
            let norm = guess.norm();
            DVector::from_fn(n, |i, _| {
                guess[i] * (1.0 + spread * rng.random_range(-1.0..1.0))
                    + spread * norm * rng.random_range(-1.0..1.0)
            })
        };
        match newton(metric, x, &target, v0, scale) {
            Ok(v) => return Ok(v),
            Err(r) => best = best.min(r),
        }
    }
    Err(Error::Bvp {
        attempts: MAX_RESTARTS + 1,
        residual: best,
    })
}

fn record_path(
    metric: &MetricField,
    start: &ChartPoint,
    velocity: &DVector<f64>,
    duration: f64,
) -> Result<GeodesicPath> {
    let n = metric.dim();
    let mut y = Vec::with_capacity(2 * n);
    y.extend_from_slice(start.as_slice());
    y.extend_from_slice(velocity.as_slice());
    let mut samples = Vec::new();
    integrate(geodesic_rhs(metric, 1), &mut y, duration, 2 * n, TOL, |t, s| {
        samples.push(PathSample {
            t,
            point: DVector::from_column_slice(&s[..n]),
            velocity: DVector::from_column_slice(&s[n..]),
        })
    })?;
    Ok(GeodesicPath {
        start: start.clone(),
        initial_velocity: TangentVector::new(start.clone(), velocity.clone())?,
        duration,
        samples,
        minimizing: metric.minimizing_guaranteed(),
    })
}

/// Solves the geodesic equation from `v.base` with initial velocity `v` up to
/// time `t_max`.
pub fn geodesic_ivp(metric: &MetricField, v: &TangentVector, t_max: f64) -> Result<GeodesicPath> {
    check_pair(metric, v.base.as_slice(), v.components.as_slice())?;
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::domain(format!("geodesic horizon must be positive, got {t_max}")));
    }
    record_path(metric, &v.base, &v.components, t_max)
}

/// The constant-speed geodesic `γ: [0, 1] → M` with `γ(0) = x`, `γ(1) = y`.
/// Coincident endpoints give the constant path.
pub fn geodesic_bvp(metric: &MetricField, x: &ChartPoint, y: &ChartPoint) -> Result<GeodesicPath> {
    let v = shoot(metric, x.as_slice(), y.as_slice())?;
    let path = record_path(metric, x, &v, 1.0)?;
    let residual = (path.endpoint() - y.coords()).amax();
    if residual > BVP_TOLERANCE * residual_scale(x.as_slice(), y.as_slice()) {
        return Err(Error::Bvp {
            attempts: 1,
            residual,
        });
    }
    Ok(path)
}

/// Riemannian distance: the length of the shooting solution.
pub fn distance(metric: &MetricField, x: &ChartPoint, y: &ChartPoint) -> Result<f64> {
    if x == y {
        return Ok(0.0);
    }
    let v = shoot(metric, x.as_slice(), y.as_slice())?;
    metric.norm_at(x, &v)
}

/// Unit initial direction at `o` of the minimizing geodesic to `x`
/// (`exp_o⁻¹(x) / ‖exp_o⁻¹(x)‖`).
pub fn radial_projection(metric: &MetricField, o: &ChartPoint, x: &ChartPoint) -> Result<TangentVector> {
    if o.chart_distance(x) <= 1e-9 {
        return Err(Error::domain("radial projection is undefined at the basepoint"));
    }
    let v = shoot(metric, o.as_slice(), x.as_slice())?;
    TangentVector::new(o.clone(), v)?.normalized(metric)
}
