//! Dormand–Prince 5(4) with adaptive step control for autonomous systems.

use crate::error::{Error, Result};

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Clone, Copy, Debug)]
pub(crate) struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Stats {
    pub accepted: usize,
    pub rejected: usize,
}

/// Integrates `y' = f(y)` from `t = 0` to `t_end`, overwriting `y`.
///
/// Error control only looks at the first `err_dims` components, so trailing
/// components (finite-difference copies) ride along on the same step
/// sequence. `sink` sees `(t, y)` at the start and after every accepted step.
pub(crate) fn integrate<F, S>(
    mut rhs: F,
    y: &mut [f64],
    t_end: f64,
    err_dims: usize,
    tol: Tolerances,
    mut sink: S,
) -> Result<Stats>
where
    F: FnMut(&[f64], &mut [f64]) -> bool,
    S: FnMut(f64, &[f64]),
{
    let dim = y.len();
    let mut stats = Stats::default();
    sink(0.0, y);
    if t_end == 0.0 {
        return Ok(stats);
    }
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::Integration {
            t: 0.0,
            reason: format!("invalid integration horizon {t_end}"),
        });
    }

    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut k5 = vec![0.0; dim];
    let mut k6 = vec![0.0; dim];
    let mut k7 = vec![0.0; dim];
    let mut tmp = vec![0.0; dim];
    let mut ynew = vec![0.0; dim];

    let fail = |t: f64, reason: &str| Error::Integration {
        t,
        reason: reason.to_string(),
    };

    if !rhs(y, &mut k1) {
        return Err(fail(0.0, "right-hand side undefined at start"));
    }

    let scale = |a: f64, b: f64| tol.atol + tol.rtol * a.abs().max(b.abs());
    let rms = |v: &[f64], y: &[f64]| -> f64 {
        let s: f64 = (0..err_dims)
            .map(|i| {
                let r = v[i] / scale(y[i], y[i]);
                r * r
            })
            .sum();
        (s / err_dims as f64).sqrt()
    };

    // Initial step (Hairer, Nørsett & Wanner II.4).
    let mut h = {
        let d0 = rms(y, y);
        let d1 = rms(&k1, y);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(t_end);
        for i in 0..dim {
            tmp[i] = y[i] + h0 * k1[i];
        }
        if !rhs(&tmp, &mut k2) {
            return Err(fail(0.0, "right-hand side undefined near start"));
        }
        let mut d2 = 0.0;
        for i in 0..err_dims {
            let r = (k2[i] - k1[i]) / scale(y[i], y[i]);
            d2 += r * r;
        }
        let d2 = (d2 / err_dims as f64).sqrt() / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(1.0 / 5.0)
        };
        (100.0 * h0).min(h1).min(t_end)
    };

    let mut t = 0.0;
    let h_min = 1e-14 * t_end;
    while t < t_end {
        if stats.accepted + stats.rejected >= tol.max_steps {
            return Err(fail(t, "step budget exhausted"));
        }
        let last = t + h >= t_end * (1.0 - 1e-15);
        if last {
            h = t_end - t;
        }

        for i in 0..dim {
            tmp[i] = y[i] + h * A21 * k1[i];
        }
        let mut ok = rhs(&tmp, &mut k2);
        for i in 0..dim {
            tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        ok &= rhs(&tmp, &mut k3);
        for i in 0..dim {
            tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        ok &= rhs(&tmp, &mut k4);
        for i in 0..dim {
            tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        ok &= rhs(&tmp, &mut k5);
        for i in 0..dim {
            tmp[i] = y[i]
                + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        ok &= rhs(&tmp, &mut k6);
        for i in 0..dim {
            ynew[i] = y[i]
                + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        ok &= rhs(&ynew, &mut k7);

        let err = if ok {
            let mut s = 0.0;
            for i in 0..err_dims {
                let e = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                        + E7 * k7[i]);
                let r = e / scale(y[i], ynew[i]);
                s += r * r;
            }
            (s / err_dims as f64).sqrt()
        } else {
            f64::INFINITY
        };

        if err.is_finite() && err <= 1.0 {
            t = if last { t_end } else { t + h };
            y.copy_from_slice(&ynew);
            std::mem::swap(&mut k1, &mut k7);
            stats.accepted += 1;
            sink(t, y);
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h *= factor;
        } else {
            stats.rejected += 1;
            let factor = if err.is_finite() {
                (0.9 * err.powf(-0.2)).clamp(0.1, 0.5)
            } else {
                0.25
            };
            h *= factor;
            if h < h_min {
                return Err(fail(t, "step size underflow"));
            }
        }
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: Tolerances = Tolerances {
        rtol: 1e-10,
        atol: 1e-10,
        max_steps: 100_000,
    };

    #[test]
    fn harmonic_oscillator_quarter_period() {
        let mut y = [1.0, 0.0];
        let stats = integrate(
            |y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
                true
            },
            &mut y,
            std::f64::consts::FRAC_PI_2,
            2,
            TOL,
            |_, _| {},
        )
        .unwrap();
        assert!(y[0].abs() < 1e-9, "{y:?}");
        assert!((y[1] + 1.0).abs() < 1e-9);
        assert!(stats.accepted > 3);
    }

    #[test]
    fn exponential_growth_hits_endpoint() {
        let mut y = [1.0];
        let mut last_t = 0.0;
        integrate(
            |y, dy| {
                dy[0] = y[0];
                true
            },
            &mut y,
            2.0,
            1,
            TOL,
            |t, _| last_t = t,
        )
        .unwrap();
        assert_eq!(last_t, 2.0);
        assert!((y[0] - 2f64.exp()).abs() < 1e-8);
    }

    #[test]
    fn undefined_rhs_underflows() {
        let mut y = [1.0];
        let err = integrate(
            |y, dy| {
                dy[0] = 1.0;
                y[0] < 1.5
            },
            &mut y,
            2.0,
            1,
            TOL,
            |_, _| {},
        )
        .unwrap_err();
        assert!(matches!(err, Error::Integration { .. }));
    }
}
