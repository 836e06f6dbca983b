//! Ramsey DC/AC magnetometry with mitigated, shot-sampled estimates.
//!
//! Fields are in nT, times in μs and sensitivities in nT·Hz^(-1/2). All
//! states and channels here live in the measurement frame, where the ideal
//! Ramsey signal is `Tr(ρ_Θ σ_z) = sin Θ`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{analytic_plan, coherence_channel, frame_conjugate, measurement_frame, NoiseChannelSpec};
use crate::error::{Error, Result};
use crate::mitigation::{
    build_plan, invert_channel, optimize_mitigation_map, ExtremalRealization, MitigationPlan, ObservableAxis,
};
use crate::qmatrix::{pauli, AxisAngle, ChannelRep, DensityMatrix, Ptm};
use crate::rng::substream;
use crate::spinbath::CoherenceCurve;
use crate::GAMMA_E;

/// Below this phase the signal is treated as linear in Θ.
pub const LINEAR_PHASE: f64 = 0.1;
/// Above this phase the sensitivity formulas carry a nonlinearity warning.
pub const NONLINEAR_PHASE: f64 = 0.3;
const GRID_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensingMode {
    Dc,
    Ac,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensingSpec {
    pub mode: SensingMode,
    /// Field amplitude in nT.
    pub b_s_nt: f64,
    /// AC angular frequency in rad/μs.
    pub omega_s: Option<f64>,
    /// Gyromagnetic ratio in rad s⁻¹ T⁻¹.
    pub gamma_e: f64,
    pub tau_grid: Vec<f64>,
    pub measure_full_half_periods: bool,
}

impl SensingSpec {
    pub fn dc(b_s_nt: f64, tau_grid: Vec<f64>) -> Self {
        Self {
            mode: SensingMode::Dc,
            b_s_nt,
            omega_s: None,
            gamma_e: GAMMA_E,
            tau_grid,
            measure_full_half_periods: true,
        }
    }

    pub fn ac(b_s_nt: f64, omega_s: f64, tau_grid: Vec<f64>) -> Self {
        Self { mode: SensingMode::Ac, omega_s: Some(omega_s), ..Self::dc(b_s_nt, tau_grid) }
    }

    /// All problems found, empty when valid.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.b_s_nt.is_finite() {
            out.push("sensing.b_s_nt must be finite".into());
        }
        if !(self.gamma_e > 0.0) || !self.gamma_e.is_finite() {
            out.push("sensing.gamma_e must be finite and > 0".into());
        }
        if self.tau_grid.is_empty() {
            out.push("sensing.tau_grid must not be empty".into());
        }
        if self.tau_grid.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            out.push("sensing.tau_grid entries must be finite and ≥ 0".into());
        }
        if self.mode == SensingMode::Ac {
            match self.omega_s {
                None => out.push("sensing.omega_s is required for AC sensing".into()),
                Some(w) if !(w > 0.0) || !w.is_finite() => out.push("sensing.omega_s must be finite and > 0".into()),
                Some(_) => {
                    if self.measure_full_half_periods {
                        for &t in &self.tau_grid {
                            if check_half_period(self.omega_s.unwrap_or(1.0), t).is_err() {
                                out.push(format!(
                                    "sensing.tau_grid entry {t} is not a full half period of the AC field"
                                ));
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self.problems().into_iter().next() {
            None => Ok(()),
            Some(p) => Err(Error::InvalidInput(p)),
        }
    }

    /// `∂Θ/∂B` in rad/nT; Θ is linear in the field.
    pub fn partial_b_theta(&self, tau: f64) -> Result<f64> {
        phase_per_nt(self, tau)
    }
}

fn check_half_period(omega: f64, tau: f64) -> Result<()> {
    let m = tau * omega / PI;
    if (m - m.round()).abs() > GRID_TOL * m.max(1.0) {
        return Err(Error::GridViolation { tau });
    }
    Ok(())
}

/// `∫₀ˣ |cos u| du`.
fn abs_cos_integral(x: f64) -> f64 {
    let n = ((x + PI / 2.0) / PI).floor();
    2.0 * n + if n as i64 % 2 == 0 { x.sin() } else { -x.sin() }
}

fn phase_per_nt(spec: &SensingSpec, tau: f64) -> Result<f64> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::InvalidInput(format!("tau = {tau} must be finite and ≥ 0")));
    }
    let scale = spec.gamma_e * 1e-9 * 1e-6;
    match spec.mode {
        SensingMode::Dc => Ok(scale * tau),
        SensingMode::Ac => {
            let omega = spec
                .omega_s
                .filter(|w| *w > 0.0 && w.is_finite())
                .ok_or_else(|| Error::InvalidInput("omega_s is required for AC sensing".into()))?;
            if spec.measure_full_half_periods {
                check_half_period(omega, tau)?;
            }
            Ok(scale * abs_cos_integral(omega * tau) / omega)
        }
    }
}

/// Accumulated Ramsey phase. AC sensing assumes π pulses at the field's
/// zero crossings, so the field is rectified.
pub fn accumulate_phase(spec: &SensingSpec, tau: f64) -> Result<f64> {
    Ok(spec.b_s_nt * phase_per_nt(spec, tau)?)
}

/// Decoupling π-pulse times before `tau` for an AC field at `omega` rad/μs.
pub fn ac_pulse_times(omega: f64, tau: f64) -> Vec<f64> {
    (1..).map(|n| PI / omega * (n as f64 - 0.5)).take_while(|&t| t < tau).collect()
}

pub fn ideal_signal(theta: f64) -> f64 {
    theta.sin()
}

pub fn is_linear_regime(theta: f64) -> bool {
    theta.abs() < LINEAR_PHASE
}

/// `(I + sinΘ σ_z + cosΘ σ_x) / 2`.
pub fn ramsey_state(theta: f64) -> DensityMatrix {
    DensityMatrix::from_bloch([theta.cos(), 0.0, theta.sin()])
}

pub fn noisy_state(theta: f64, noise: &ChannelRep) -> DensityMatrix {
    noise.apply(&ramsey_state(theta))
}

fn z_expectation(rho: &crate::qmatrix::Op2) -> f64 {
    (rho * pauli(3)).trace().re
}

/// Shots per circuit in plan order. Each circuit gets its share of `N`
/// rounded, the first plus circuit takes the rounding residue.
pub fn allocate_shots(plan: &MitigationPlan, shots: u64) -> Result<Vec<u64>> {
    let circuits = plan.circuits().len();
    if shots < circuits as u64 {
        return Err(Error::TooFewShots { shots, circuits });
    }
    let mut out: Vec<u64> = plan.shot_fractions().iter().map(|f| ((f * shots as f64).round() as u64).max(1)).collect();
    // tiny budgets: take shots back from the largest circuits until the first has one
    while out[1..].iter().sum::<u64>() >= shots {
        let (k, _) = out[1..].iter().enumerate().max_by_key(|(k, n)| (**n, usize::MAX - k)).expect("nonempty");
        out[k + 1] -= 1;
    }
    out[0] = shots - out[1..].iter().sum::<u64>();
    Ok(out)
}

/// Signed weighted combination of per-circuit signals.
pub fn combine(plan: &MitigationPlan, s_values: &[f64]) -> f64 {
    plan.circuits().iter().zip(s_values).map(|(c, s)| c.sign.factor() * c.weight * s).sum()
}

/// Standard deviation of the mitigated signal for `N` shots split by the
/// plan's shot fractions: `√((2p+1)/N · Σ w_j (1 − S_j²))`.
pub fn delta_s(plan: &MitigationPlan, s_values: &[f64], shots: u64) -> f64 {
    let sum: f64 = plan.circuits().iter().zip(s_values).map(|(c, s)| c.weight * (1.0 - s * s)).sum();
    (plan.overhead() / shots as f64 * sum.max(0.0)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MitigatedEstimate {
    pub s_values: Vec<f64>,
    pub s_mitigated: f64,
    pub std: f64,
    pub shots_used: Vec<u64>,
    pub p: f64,
}

/// Exact per-circuit expectations of σ_z.
pub fn circuit_signals(plan: &MitigationPlan, rho_noisy: &DensityMatrix) -> Vec<f64> {
    plan.circuits().iter().map(|c| z_expectation(&c.apply(rho_noisy.matrix()))).collect()
}

/// Infinite-shot estimate: exact expectations with the spread `delta_s` predicts for `N` shots.
pub fn exact_estimate(plan: &MitigationPlan, rho_noisy: &DensityMatrix, shots: u64) -> Result<MitigatedEstimate> {
    let shots_used = allocate_shots(plan, shots)?;
    let s_values = circuit_signals(plan, rho_noisy);
    Ok(MitigatedEstimate {
        s_mitigated: combine(plan, &s_values),
        std: delta_s(plan, &s_values, shots),
        s_values,
        shots_used,
        p: plan.p(),
    })
}

/// Binomial estimate of `⟨σ_z⟩` from `n` shots.
pub fn sample_z<R: Rng + ?Sized>(z: f64, n: u64, rng: &mut R) -> f64 {
    let q = ((1.0 + z) / 2.0).clamp(0.0, 1.0);
    let k = Binomial::new(n, q).expect("q is a probability").sample(rng);
    2.0 * k as f64 / n as f64 - 1.0
}

/// Shot-sampled mitigated estimate; circuit `j` draws from `substream(seed, path ++ [j])`.
pub fn mitigated_estimate(
    plan: &MitigationPlan,
    rho_noisy: &DensityMatrix,
    shots: u64,
    seed: u64,
    path: &[u64],
) -> Result<MitigatedEstimate> {
    let shots_used = allocate_shots(plan, shots)?;
    let exact = circuit_signals(plan, rho_noisy);
    let s_values: Vec<f64> = exact
        .iter()
        .zip(&shots_used)
        .enumerate()
        .map(|(j, (&z, &n))| {
            let mut stream: Vec<u64> = path.to_vec();
            stream.push(j as u64);
            sample_z(z, n, &mut substream(seed, &stream))
        })
        .collect();
    Ok(MitigatedEstimate {
        s_mitigated: combine(plan, &s_values),
        std: delta_s(plan, &s_values, shots),
        s_values,
        shots_used,
        p: plan.p(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub eta_mitigated: f64,
    pub eta_naqs: f64,
    pub eta_bound: f64,
    /// rad/nT.
    pub partial_b_theta: f64,
    /// `|Θ|` is beyond the linear regime the formulas assume.
    pub nonlinear: bool,
}

/// Sensitivities at `tau` for a mitigated estimate and the measurement-frame noise.
pub fn sensitivity(
    spec: &SensingSpec,
    tau: f64,
    estimate: &MitigatedEstimate,
    noise: &ChannelRep,
) -> Result<SensitivityReport> {
    let db = spec.partial_b_theta(tau)?;
    if !(db.abs() > 0.0) {
        return Err(Error::DegenerateProtocol);
    }
    let theta = accumulate_phase(spec, tau)?;
    let sqrt_tau = (tau * 1e-6).sqrt();
    let shots: u64 = estimate.shots_used.iter().sum();
    let ptm: Ptm = noise.ptm();
    let s_noisy = z_expectation(noisy_state(theta, noise).matrix());
    let eta_naqs = sqrt_tau * (1.0 - s_noisy * s_noisy).max(0.0).sqrt() / (db * ptm[(3, 3)]).abs();
    Ok(SensitivityReport {
        eta_mitigated: (shots as f64).sqrt() * sqrt_tau * estimate.std / db.abs(),
        eta_naqs,
        eta_bound: sqrt_tau * (2.0 * estimate.p + 1.0) / db.abs(),
        partial_b_theta: db,
        nonlinear: theta.abs() > NONLINEAR_PHASE,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MitigationStrategy {
    #[default]
    Inverse,
    Optimized,
    Analytic,
    None,
}

/// Where the noise at each τ comes from.
#[derive(Debug, Clone)]
pub enum NoiseSource {
    Channel(NoiseChannelSpec),
    /// Bath coherence `W(τ)` acting as dephasing in the precession frame.
    Bath(CoherenceCurve),
}

impl NoiseSource {
    pub fn measurement_channel(&self, tau: f64) -> Result<ChannelRep> {
        match self {
            NoiseSource::Channel(spec) => spec.measurement_channel(tau),
            NoiseSource::Bath(curve) => {
                Ok(frame_conjugate(&coherence_channel(curve.value_at(tau))?, &measurement_frame()))
            }
        }
    }
}

/// Plan for the measurement-frame noise at `tau`.
pub fn plan_for(
    strategy: MitigationStrategy,
    source: &NoiseSource,
    noise: &ChannelRep,
    tau: f64,
) -> Result<MitigationPlan> {
    match strategy {
        MitigationStrategy::Inverse => build_plan(&invert_channel(noise)?),
        MitigationStrategy::Optimized => Ok(optimize_mitigation_map(noise, ObservableAxis::Z)?.plan),
        MitigationStrategy::Analytic => match source {
            NoiseSource::Channel(spec) => {
                // keeps invertibility failures consistent with the numerical path
                invert_channel(noise)?;
                Ok(analytic_plan(spec, tau)?.conjugated(&measurement_frame()))
            }
            NoiseSource::Bath(_) => Err(Error::UseNumericalPipeline),
        },
        MitigationStrategy::None => identity_plan(),
    }
}

/// Single identity circuit, `p = 0`.
pub fn identity_plan() -> Result<MitigationPlan> {
    MitigationPlan::from_parts(0.0, vec![ExtremalRealization::unitary(AxisAngle::identity())], vec![], Ptm::identity())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub tau_us: f64,
    pub theta_rad: f64,
    /// `+∞` where the noise is not invertible.
    pub p: f64,
    pub s_ideal: f64,
    /// Unmitigated shot-sampled signal.
    pub s_noisy: f64,
    pub s_mitigated: Option<f64>,
    pub s_mitigated_std: Option<f64>,
    pub eta_mitigated: Option<f64>,
    pub eta_naqs: Option<f64>,
    pub eta_bound: Option<f64>,
    pub circuits_used: usize,
    pub shots_per_circuit: Vec<u64>,
    /// Exact expectation of the unmitigated signal.
    pub s_noisy_exact: f64,
}

impl SweepRow {
    pub fn invertible(&self) -> bool {
        self.p.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

/// One row per τ. Streams: `(seed, i, 0)` for the unmitigated signal and
/// `(seed, i, 1, j)` for circuit `j`.
pub fn sweep(
    spec: &SensingSpec,
    source: &NoiseSource,
    strategy: MitigationStrategy,
    shots: u64,
    seed: u64,
) -> Result<SweepResult> {
    spec.validate()?;
    if shots == 0 {
        return Err(Error::InvalidInput("shots must be ≥ 1".into()));
    }
    let rows = spec
        .tau_grid
        .par_iter()
        .enumerate()
        .map(|(i, &tau)| sweep_row(spec, source, strategy, shots, seed, i as u64, tau))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult { rows })
}

fn sweep_row(
    spec: &SensingSpec,
    source: &NoiseSource,
    strategy: MitigationStrategy,
    shots: u64,
    seed: u64,
    index: u64,
    tau: f64,
) -> Result<SweepRow> {
    let theta = accumulate_phase(spec, tau)?;
    let noise = source.measurement_channel(tau)?;
    let rho = noisy_state(theta, &noise);
    let s_noisy_exact = z_expectation(rho.matrix());
    let s_noisy = sample_z(s_noisy_exact, shots, &mut substream(seed, &[index, 0]));
    let mut row = SweepRow {
        tau_us: tau,
        theta_rad: theta,
        p: f64::INFINITY,
        s_ideal: ideal_signal(theta),
        s_noisy,
        s_mitigated: None,
        s_mitigated_std: None,
        eta_mitigated: None,
        eta_naqs: None,
        eta_bound: None,
        circuits_used: 0,
        shots_per_circuit: Vec::new(),
        s_noisy_exact,
    };
    let plan = match plan_for(strategy, source, &noise, tau) {
        Ok(plan) => plan,
        Err(Error::NotInvertible { .. }) => return Ok(row),
        Err(e) => return Err(e),
    };
    let mut estimate = mitigated_estimate(&plan, &rho, shots, seed, &[index, 1])?;
    if strategy == MitigationStrategy::None {
        estimate.s_values = vec![s_noisy];
        estimate.s_mitigated = s_noisy;
        estimate.std = delta_s(&plan, &[s_noisy], shots);
    }
    row.p = plan.p();
    row.s_mitigated = Some(estimate.s_mitigated);
    row.s_mitigated_std = Some(estimate.std);
    row.circuits_used = plan.circuits().len();
    row.shots_per_circuit = estimate.shots_used.clone();
    match sensitivity(spec, tau, &estimate, &noise) {
        Ok(report) => {
            row.eta_mitigated = Some(report.eta_mitigated);
            row.eta_naqs = Some(report.eta_naqs);
            row.eta_bound = Some(report.eta_bound);
        }
        Err(Error::DegenerateProtocol) => {}
        Err(e) => return Err(e),
    }
    Ok(row)
}
