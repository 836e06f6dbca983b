//! Time-dependent rates and their running integrals.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Absolute tolerance of the adaptive quadrature.
pub const QUAD_TOL: f64 = 1e-10;
const MAX_DEPTH: u32 = 20;

/// A rate as a function of time (t in μs, value in 1/μs or rad/μs).
#[derive(Clone)]
pub enum RateFn {
    Constant(f64),
    /// `amplitude · (sin(frequency · t) + offset)`.
    Sinusoidal {
        amplitude: f64,
        frequency: f64,
        offset: f64,
    },
    /// Linear interpolation between `(t, value)` points, held constant outside.
    Table(Vec<(f64, f64)>),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for RateFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RateFn::Constant(v) => f.debug_tuple("Constant").field(v).finish(),
            RateFn::Sinusoidal { amplitude, frequency, offset } => f
                .debug_struct("Sinusoidal")
                .field("amplitude", amplitude)
                .field("frequency", frequency)
                .field("offset", offset)
                .finish(),
            RateFn::Table(points) => f.debug_tuple("Table").field(points).finish(),
            RateFn::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl RateFn {
    pub fn zero() -> Self {
        RateFn::Constant(0.0)
    }

    pub fn table(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidRates("rate table is empty".into()));
        }
        if points.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(Error::InvalidRates("rate table has non-finite entries".into()));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidRates("rate table has repeated times".into()));
        }
        Ok(RateFn::Table(points))
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            RateFn::Constant(v) => *v,
            RateFn::Sinusoidal { amplitude, frequency, offset } => amplitude * ((frequency * t).sin() + offset),
            RateFn::Table(points) => interpolate(points, t),
            RateFn::Custom(f) => f(t),
        }
    }

    /// `∫₀ᵗ value`.
    pub fn integral(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidInput(format!("integration time {t} must be finite and ≥ 0")));
        }
        let out = match self {
            RateFn::Constant(v) => v * t,
            RateFn::Table(points) => table_integral(points, t),
            other => adaptive_simpson(&|x| other.value(x), 0.0, t, QUAD_TOL)?,
        };
        if !out.is_finite() {
            return Err(Error::InvalidRates(format!("integral up to t = {t} is not finite")));
        }
        Ok(out)
    }
}

fn interpolate(points: &[(f64, f64)], t: f64) -> f64 {
    let first = points[0];
    let last = points[points.len() - 1];
    if t <= first.0 {
        return first.1;
    }
    if t >= last.0 {
        return last.1;
    }
    let k = points.partition_point(|p| p.0 <= t);
    let (t0, v0) = points[k - 1];
    let (t1, v1) = points[k];
    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
}

fn table_integral(points: &[(f64, f64)], t: f64) -> f64 {
    let mut knots = vec![0.0];
    knots.extend(points.iter().map(|p| p.0).filter(|&x| x > 0.0 && x < t));
    knots.push(t);
    knots.windows(2).map(|w| 0.5 * (w[1] - w[0]) * (interpolate(points, w[0]) + interpolate(points, w[1]))).sum()
}

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let fa = checked(f, a)?;
    let fb = checked(f, b)?;
    let m = 0.5 * (a + b);
    let fm = checked(f, m)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)
}

fn checked(f: &dyn Fn(f64) -> f64, x: f64) -> Result<f64> {
    let v = f(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidRates(format!("rate is not finite at t = {x}")))
    }
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = checked(f, lm)?;
    let frm = checked(f, rm)?;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    Ok(simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)?
        + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)?)
}

/// Dephasing or relaxation rate `γ(t)` and coherent shift `ω_noise(t)`.
#[derive(Debug, Clone)]
pub struct RateFunctions {
    pub gamma: RateFn,
    pub omega_noise: RateFn,
}

impl RateFunctions {
    pub fn new(gamma: RateFn, omega_noise: RateFn) -> Self {
        Self { gamma, omega_noise }
    }

    pub fn constant(gamma: f64, omega_noise: f64) -> Self {
        Self::new(RateFn::Constant(gamma), RateFn::Constant(omega_noise))
    }

    /// `(Γ(t), φ(t))`.
    pub fn integrate(&self, t: f64) -> Result<(f64, f64)> {
        Ok((self.gamma.integral(t)?, self.omega_noise.integral(t)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_rate() {
        let rf = RateFunctions::constant(0.05, 0.0);
        let (g, phi) = rf.integrate(12.0).unwrap();
        assert!((g - 0.6).abs() < 1e-15 && phi == 0.0);
    }

    #[test]
    fn sinusoidal_rate_matches_antiderivative() {
        let ws = 2.0 * PI * 0.0625;
        let rate = RateFn::Sinusoidal { amplitude: 2.0 * PI * 0.3, frequency: 2.0 * ws, offset: 0.2 };
        for t in [0.0, 0.7, 3.3, 10.0, 25.0] {
            let exact = 2.0 * PI * 0.3 * ((1.0 - (2.0 * ws * t).cos()) / (2.0 * ws) + 0.2 * t);
            assert!((rate.integral(t).unwrap() - exact).abs() < 1e-9, "t = {t}");
        }
    }

    #[test]
    fn static_coupling_phase() {
        let omega = RateFn::Constant(2.0 * PI * 0.1);
        assert!((omega.integral(4.0).unwrap() - 2.0 * PI * 0.1 * 4.0).abs() < 1e-14);
    }

    #[test]
    fn table_integral_is_piecewise_exact() {
        let rate = RateFn::table(vec![(1.0, 2.0), (3.0, 0.0), (0.0, 0.0)]).unwrap();
        // triangle 0→2 on [0,1], 2→0 on [1,3], constant 0 after
        assert!((rate.integral(3.0).unwrap() - 3.0).abs() < 1e-15);
        assert!((rate.integral(0.5).unwrap() - 0.25).abs() < 1e-15);
        assert!((rate.integral(10.0).unwrap() - 3.0).abs() < 1e-15);
        assert!((rate.value(2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn non_finite_rate_is_rejected() {
        let rate = RateFn::Custom(Arc::new(|t| if t > 1.0 { f64::NAN } else { 1.0 }));
        assert!(matches!(rate.integral(2.0), Err(Error::InvalidRates(_))));
        assert!(RateFn::table(vec![(0.0, f64::INFINITY)]).is_err());
    }

    #[test]
    fn custom_rate_quadrature() {
        let rate = RateFn::Custom(Arc::new(|t: f64| (-t).exp()));
        assert!((rate.integral(2.0).unwrap() - (1.0 - (-2.0f64).exp())).abs() < 1e-10);
    }
}
