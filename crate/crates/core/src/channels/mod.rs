//! Dephasing, relaxation and thermalization channels with closed-form
//! mitigation plans.
//!
//! Channels are written in the precession frame, where noise damps the
//! coherences `ρ₀₁`. The sensing layer measures σ_z after the final Ramsey
//! pulse; [`measurement_frame`] is the fixed rotation taking one frame to the
//! other.

mod rates;

pub use rates::{adaptive_simpson, RateFn, RateFunctions, QUAD_TOL};

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mitigation::{invert_channel, ExtremalRealization, MitigationPlan};
use crate::qmatrix::{unitary_ptm, AxisAngle, ChannelRep, Ptm, Super4, C64};

/// Accumulated Γ below `-GAMMA_TOL` is unphysical; smaller negatives are clamped.
const GAMMA_TOL: f64 = 1e-12;

/// Constant-rate thermal bath at occupation `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalParams {
    pub gamma0: f64,
    pub n_thermal: f64,
}

impl ThermalParams {
    pub fn new(gamma0: f64, n_thermal: f64) -> Result<Self> {
        if !(gamma0 > 0.0) || !gamma0.is_finite() {
            return Err(Error::InvalidRates(format!("gamma0 = {gamma0} must be finite and > 0")));
        }
        if !(n_thermal >= 0.0) || !n_thermal.is_finite() {
            return Err(Error::InvalidRates(format!("n_thermal = {n_thermal} must be finite and ≥ 0")));
        }
        Ok(Self { gamma0, n_thermal })
    }

    /// Decay rate `(N + 1) γ`.
    pub fn gamma1(&self) -> f64 {
        (self.n_thermal + 1.0) * self.gamma0
    }

    /// Excitation rate `N γ`.
    pub fn gamma2(&self) -> f64 {
        self.n_thermal * self.gamma0
    }

    pub fn total_rate(&self) -> f64 {
        self.gamma1() + self.gamma2()
    }

    /// Excited population of the steady state, `N / (2N + 1)`.
    pub fn steady_excited_population(&self) -> f64 {
        self.gamma2() / self.total_rate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Dephasing,
    Relaxation,
    Thermalization,
    CustomPtm,
}

#[derive(Debug, Clone)]
pub enum NoiseChannelSpec {
    Dephasing(RateFunctions),
    Relaxation(RateFunctions),
    Thermalization {
        params: ThermalParams,
        omega_noise: RateFn,
    },
    /// Fixed channel, given directly in the measurement frame.
    CustomPtm(Ptm),
}

impl NoiseChannelSpec {
    pub fn custom_ptm(ptm: Ptm) -> Result<Self> {
        let report = ChannelRep::Ptm(ptm).check_cptp(1e-9);
        if !report.is_cptp() {
            return Err(Error::InvalidInput(format!(
                "custom PTM is not CPTP (min Choi eigenvalue {:e}, TP residual {:e})",
                report.min_choi_eigenvalue, report.tp_residual
            )));
        }
        Ok(NoiseChannelSpec::CustomPtm(ptm))
    }

    pub fn kind(&self) -> NoiseKind {
        match self {
            NoiseChannelSpec::Dephasing(_) => NoiseKind::Dephasing,
            NoiseChannelSpec::Relaxation(_) => NoiseKind::Relaxation,
            NoiseChannelSpec::Thermalization { .. } => NoiseKind::Thermalization,
            NoiseChannelSpec::CustomPtm(_) => NoiseKind::CustomPtm,
        }
    }

    /// Channel at time `t` in the precession frame. Custom channels are
    /// returned as given.
    pub fn channel(&self, t: f64) -> Result<ChannelRep> {
        match self {
            NoiseChannelSpec::Dephasing(rf) => {
                let (g, phi) = rf.integrate(t)?;
                dephasing_channel(g, phi)
            }
            NoiseChannelSpec::Relaxation(rf) => {
                let (g, phi) = rf.integrate(t)?;
                relaxation_channel(g, phi)
            }
            NoiseChannelSpec::Thermalization { params, omega_noise } => {
                thermalization_channel(params, t, omega_noise.integral(t)?)
            }
            NoiseChannelSpec::CustomPtm(ptm) => Ok(ChannelRep::Ptm(*ptm)),
        }
    }

    /// Channel at time `t` in the measurement frame.
    pub fn measurement_channel(&self, t: f64) -> Result<ChannelRep> {
        match self {
            NoiseChannelSpec::CustomPtm(ptm) => Ok(ChannelRep::Ptm(*ptm)),
            other => Ok(frame_conjugate(&other.channel(t)?, &measurement_frame())),
        }
    }
}

fn accumulated(gamma: f64, what: &str) -> Result<f64> {
    if !gamma.is_finite() {
        return Err(Error::InvalidInput(format!("{what} must be finite")));
    }
    if gamma < -GAMMA_TOL {
        return Err(Error::Unphysical(format!("{what} = {gamma} is negative")));
    }
    Ok(gamma.max(0.0))
}

fn stm(entries: [[C64; 4]; 4]) -> ChannelRep {
    ChannelRep::Stm(Super4::from_fn(|r, c| entries[r][c]))
}

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Pure dephasing with accumulated rate `Γ` and phase `φ`.
pub fn dephasing_channel(gamma: f64, phi: f64) -> Result<ChannelRep> {
    let g = accumulated(gamma, "Γ")?;
    accumulated(phi.abs(), "φ")?;
    let z = re(0.0);
    Ok(stm([
        [re(1.0), z, z, z],
        [z, C64::from_polar((-g).exp(), phi), z, z],
        [z, z, C64::from_polar((-g).exp(), -phi), z],
        [z, z, z, re(1.0)],
    ]))
}

/// Amplitude damping towards `|0⟩` with accumulated rate `Γ` and phase `φ`.
pub fn relaxation_channel(gamma: f64, phi: f64) -> Result<ChannelRep> {
    let g = accumulated(gamma, "Γ")?;
    accumulated(phi.abs(), "φ")?;
    let e = (-g).exp();
    let z = re(0.0);
    Ok(stm([
        [re(1.0), z, z, re(1.0 - e)],
        [z, C64::from_polar((-g / 2.0).exp(), phi), z, z],
        [z, z, C64::from_polar((-g / 2.0).exp(), -phi), z],
        [z, z, z, re(e)],
    ]))
}

/// Generalized amplitude damping towards the thermal state after time `t`.
pub fn thermalization_channel(tp: &ThermalParams, t: f64, phi: f64) -> Result<ChannelRep> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidInput(format!("time {t} must be finite and ≥ 0")));
    }
    accumulated(phi.abs(), "φ")?;
    let (g1, g2, g) = (tp.gamma1(), tp.gamma2(), tp.total_rate());
    let e = (-g * t).exp();
    let z = re(0.0);
    Ok(stm([
        [re((g1 + g2 * e) / g), z, z, re(g1 * (1.0 - e) / g)],
        [z, C64::from_polar((-g * t / 2.0).exp(), phi), z, z],
        [z, z, C64::from_polar((-g * t / 2.0).exp(), -phi), z],
        [re(g2 * (1.0 - e) / g), z, z, re((g1 * e + g2) / g)],
    ]))
}

/// Pure dephasing taking `ρ₀₁ → w ρ₀₁`, e.g. from a bath coherence.
pub fn coherence_channel(w: C64) -> Result<ChannelRep> {
    if !w.re.is_finite() || !w.im.is_finite() {
        return Err(Error::InvalidInput("coherence must be finite".into()));
    }
    if w.norm() > 1.0 + 1e-9 {
        return Err(Error::Unphysical(format!("|W| = {} exceeds 1", w.norm())));
    }
    let w = if w.norm() > 1.0 { w / w.norm() } else { w };
    let (z, one) = (re(0.0), re(1.0));
    Ok(stm([[one, z, z, z], [z, w, z, z], [z, z, w.conj(), z], [z, z, z, one]]))
}

/// Rotation taking the precession frame to the measurement frame.
pub fn measurement_frame() -> AxisAngle {
    AxisAngle::y(FRAC_PI_2)
}

/// `ρ ↦ U c(U† ρ U) U†`.
pub fn frame_conjugate(c: &ChannelRep, rotation: &AxisAngle) -> ChannelRep {
    let r = unitary_ptm(&rotation.unitary());
    ChannelRep::Ptm(r * c.ptm() * r.transpose())
}

/// Plan from the closed-form decompositions of the three analytic channels,
/// in the precession frame.
pub fn analytic_plan(spec: &NoiseChannelSpec, t: f64) -> Result<MitigationPlan> {
    let target = invert_channel(&spec.channel(t)?)?.ptm();
    match spec {
        NoiseChannelSpec::Dephasing(rf) => {
            let (g, phi) = rf.integrate(t)?;
            let p = (g.exp() - 1.0) / 2.0;
            let plus = vec![ExtremalRealization::unitary(AxisAngle::z(phi))];
            let minus = vec![ExtremalRealization::unitary(AxisAngle::z(phi + PI))];
            MitigationPlan::from_parts(p, plus, minus, target)
        }
        NoiseChannelSpec::Relaxation(rf) => {
            let (g, phi) = rf.integrate(t)?;
            let p = g.exp() - 1.0;
            let theta = (-g / 2.0).exp().min(1.0).acos();
            let plus = rotation_pair(phi, theta);
            let minus = vec![ExtremalRealization::normal_form(FRAC_PI_2, FRAC_PI_2)];
            MitigationPlan::from_parts(p, plus, minus, target)
        }
        NoiseChannelSpec::Thermalization { params, omega_noise } => {
            let phi = omega_noise.integral(t)?;
            let (g1, g2, g) = (params.gamma1(), params.gamma2(), params.total_rate());
            let growth = (g * t).exp();
            let p = g1 * (growth - 1.0) / g;
            let theta = (g * (g * t / 2.0).exp() / (g2 + g1 * growth)).min(1.0).acos();
            let alpha = (g2 / g1).sqrt().acos();
            let beta = PI - alpha;
            let plus = rotation_pair(phi, theta);
            let mut minus = vec![ExtremalRealization::normal_form(alpha, beta)];
            if (beta - alpha).abs() > 1e-12 {
                minus.push(ExtremalRealization::normal_form(beta, alpha));
            }
            MitigationPlan::from_parts(p, plus, minus, target)
        }
        NoiseChannelSpec::CustomPtm(_) => Err(Error::UseNumericalPipeline),
    }
}

/// `R_z(φ ± θ)`, collapsed to one circuit when `θ = 0`.
fn rotation_pair(phi: f64, theta: f64) -> Vec<ExtremalRealization> {
    if theta.abs() < 1e-12 {
        return vec![ExtremalRealization::unitary(AxisAngle::z(phi))];
    }
    vec![
        ExtremalRealization::unitary(AxisAngle::z(phi + theta)),
        ExtremalRealization::unitary(AxisAngle::z(phi - theta)),
    ]
}
