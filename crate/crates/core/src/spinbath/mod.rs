//! Surface electron spin bath: Poisson sampling, dipolar couplings,
//! mean-field averaging and the cluster-correlation expansion.
//!
//! Units: positions in nm with the NV at the origin and the surface at
//! `z = d_NV`, couplings in kHz, times in μs, frequency shifts in rad/μs.
//!
//! Conditional on the NV branch the bath evolves under
//! `H± = ±½ Σ πa_k σ_z^k + Σ_{j<k} πb_jk (σ₊σ₋ + σ₋σ₊)` and the coherence is
//! `W = ⟨ψ| U₋† U₊ |ψ⟩` for a computational-basis bath state `ψ`.

mod cluster;

use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmatrix::C64;
use crate::rng::substream;
use crate::GAMMA_E;

pub use cluster::{cluster_coherence, MAX_EXACT_SPINS};

const MU0: f64 = 1.256_637_062_12e-6;
const HBAR: f64 = 1.054_571_817e-34;

/// `μ₀ħγ_e² / (8π²)` in kHz·nm³.
pub fn dipolar_prefactor() -> f64 {
    MU0 * HBAR * GAMMA_E * GAMMA_E / (8.0 * PI * PI) * 1e27 * 1e-3
}

/// kHz · μs → cycles.
const KHZ_US: f64 = 1e-3;
const MAX_LAMBDA: f64 = 1e6;
/// Configurations summed per parallel work item; fixes the summation order.
const CHUNK: usize = 64;

/// Secular dipolar couplings between two electron spins, in kHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipolarCoupling {
    pub a_zz: f64,
    /// `A_xx + A_yy`.
    pub a_flipflop: f64,
}

/// Couplings for separation vector `r` with the field along z.
pub fn dipolar_coupling(r: [f64; 3]) -> Result<DipolarCoupling> {
    let dist = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
    if !(dist > 1e-12) || !dist.is_finite() {
        return Err(Error::Singular);
    }
    let nz2 = (r[2] / dist).powi(2);
    let scale = dipolar_prefactor() / dist.powi(3);
    Ok(DipolarCoupling { a_zz: scale * (3.0 * nz2 - 1.0), a_flipflop: scale * (1.0 - 3.0 * nz2) })
}

/// Time in μs at which a surface spin at lateral radius `r` has imprinted a
/// phase π on the NV. Negative beyond the magic angle.
pub fn coupling_timescale(nv_depth: f64, r: f64) -> f64 {
    let d2 = nv_depth * nv_depth;
    (d2 + r * r).powf(2.5) / (dipolar_prefactor() * KHZ_US * (2.0 * d2 - r * r))
}

/// Radius within which bath spins flip-flop significantly during `tau` μs.
pub fn flip_flop_radius(tau: f64) -> f64 {
    (dipolar_prefactor() * KHZ_US * tau).cbrt()
}

/// Cutoff radius beyond which no single spin reaches phase π within
/// `tau_max` μs. Never smaller than the magic-angle radius `√2 d`.
pub fn convergence_radius(nv_depth: f64, tau_max: f64) -> f64 {
    let magic = SQRT_2 * nv_depth;
    // the far branch has its minimum at r = 2d and grows from there
    let r_min = 2.0 * nv_depth;
    let far = |r: f64| coupling_timescale(nv_depth, r).abs();
    if far(r_min) >= tau_max {
        return magic;
    }
    let mut hi = 2.0 * r_min;
    while far(hi) < tau_max {
        hi *= 2.0;
    }
    let mut lo = r_min;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if far(mid) < tau_max {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// NV frequency shift for a field in nT, in rad/μs.
pub fn larmor_shift(b_nt: f64) -> f64 {
    GAMMA_E * b_nt * 1e-9 * 1e-6
}

fn check_geometry(density: f64, r_cut: f64, nv_depth: f64) -> Result<()> {
    if !(density >= 0.0) || !density.is_finite() {
        return Err(Error::InvalidInput(format!("density = {density} must be finite and ≥ 0")));
    }
    for (name, v) in [("r_cut", r_cut), ("nv_depth", nv_depth)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidInput(format!("{name} = {v} must be finite and > 0")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BathConfiguration {
    pub positions: Vec<[f64; 3]>,
    pub nv_depth: f64,
    pub density: f64,
    pub r_cut: f64,
    /// Position-stable spin, always present in addition to the sampled ones.
    pub fixed_spin: Option<[f64; 3]>,
}

impl BathConfiguration {
    pub fn empty(nv_depth: f64) -> Self {
        Self { positions: Vec::new(), nv_depth, density: 0.0, r_cut: 0.0, fixed_spin: None }
    }

    /// Bath from explicit positions.
    pub fn from_positions(nv_depth: f64, positions: Vec<[f64; 3]>) -> Self {
        Self { positions, ..Self::empty(nv_depth) }
    }

    pub fn with_fixed_spin(mut self, pos: [f64; 3]) -> Self {
        self.fixed_spin = Some(pos);
        self
    }

    /// Fixed spin first, then the sampled ones.
    pub fn spins(&self) -> Vec<[f64; 3]> {
        self.fixed_spin.iter().copied().chain(self.positions.iter().copied()).collect()
    }

    pub fn len(&self) -> usize {
        self.positions.len() + usize::from(self.fixed_spin.is_some())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sampled spins within lateral radius `r`. A Poisson bath restricted to
    /// a smaller disc is again a Poisson bath.
    pub fn truncated(&self, r: f64) -> Self {
        let positions = self.positions.iter().copied().filter(|p| p[0].hypot(p[1]) <= r).collect();
        Self { positions, r_cut: r.min(self.r_cut), ..self.clone() }
    }

    /// NV couplings of [`spins`](Self::spins).
    pub fn nv_couplings(&self) -> Result<Vec<DipolarCoupling>> {
        self.spins().into_iter().map(dipolar_coupling).collect()
    }

    /// Mean-field angular frequencies `πa_k` in rad/μs.
    pub fn mf_frequencies(&self) -> Result<Vec<f64>> {
        Ok(self.nv_couplings()?.iter().map(|c| PI * c.a_zz * KHZ_US).collect())
    }
}

/// Poisson number of spins, uniform in the disc of radius `r_cut` on the surface.
pub fn sample_configuration<R: Rng + ?Sized>(
    density: f64,
    r_cut: f64,
    nv_depth: f64,
    rng: &mut R,
) -> Result<BathConfiguration> {
    check_geometry(density, r_cut, nv_depth)?;
    let lambda = PI * r_cut * r_cut * density;
    if lambda > MAX_LAMBDA {
        return Err(Error::TooManySpins { lambda });
    }
    let count = if lambda == 0.0 {
        0
    } else {
        Poisson::new(lambda).map_err(|e| Error::InvalidInput(e.to_string()))?.sample(rng) as usize
    };
    let positions = (0..count)
        .map(|_| {
            let r = r_cut * rng.random::<f64>().sqrt();
            let phi = 2.0 * PI * rng.random::<f64>();
            [r * phi.cos(), r * phi.sin(), nv_depth]
        })
        .collect();
    Ok(BathConfiguration { positions, nv_depth, density, r_cut, fixed_spin: None })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveOrder {
    Gcce(u8),
    Exact,
}

/// Complex NV coherence on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceCurve {
    pub times: Vec<f64>,
    pub values: Vec<C64>,
    pub order: CurveOrder,
}

impl CoherenceCurve {
    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|w| w.norm()).collect()
    }

    /// Multiply by the sensing phase `e^{iωt}`.
    pub fn with_signal(mut self, omega: f64) -> Self {
        for (w, &t) in self.values.iter_mut().zip(&self.times) {
            *w *= C64::from_polar(1.0, omega * t);
        }
        self
    }

    pub fn sup_distance(&self, other: &CoherenceCurve) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// Linear interpolation at `t`, held constant outside the grid.
    pub fn value_at(&self, t: f64) -> C64 {
        let ts = &self.times;
        if t <= ts[0] {
            return self.values[0];
        }
        let k = ts.partition_point(|&x| x <= t);
        if k >= ts.len() {
            return self.values[ts.len() - 1];
        }
        let f = (t - ts[k - 1]) / (ts[k] - ts[k - 1]);
        self.values[k - 1] * (1.0 - f) + self.values[k] * f
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() || times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
        return Err(Error::InvalidInput("time grid must be nonempty, finite and ≥ 0".into()));
    }
    Ok(())
}

/// Deterministic parallel mean of per-item curves.
fn parallel_mean<F>(n: usize, len: usize, f: F) -> Result<Vec<C64>>
where
    F: Fn(usize) -> Result<Vec<C64>> + Sync,
{
    let chunks: Vec<Vec<C64>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![C64::new(0.0, 0.0); len];
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                for (a, v) in acc.iter_mut().zip(f(i)?) {
                    *a += v;
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = vec![C64::new(0.0, 0.0); len];
    for chunk in chunks {
        for (a, v) in total.iter_mut().zip(chunk) {
            *a += v;
        }
    }
    Ok(total.into_iter().map(|v| v / n as f64).collect())
}

/// Uniformly random computational-basis bath state; `true` is spin up.
pub fn random_bath_state<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<bool> {
    (0..n).map(|_| rng.random()).collect()
}

fn spin_sign(up: bool) -> f64 {
    if up {
        1.0
    } else {
        -1.0
    }
}

/// Mean-field coherence averaged over configurations and all bath
/// eigenstates, plus one frequency shift per configuration from a uniformly
/// drawn eigenstate (stream `(seed, index)`).
pub fn mf_signal(
    configs: &[BathConfiguration],
    b_s_nt: f64,
    times: &[f64],
    seed: u64,
) -> Result<(CoherenceCurve, Vec<f64>)> {
    if configs.is_empty() {
        return Err(Error::InvalidInput("need at least one bath configuration".into()));
    }
    check_times(times)?;
    let values = parallel_mean(configs.len(), times.len(), |i| {
        let freqs = configs[i].mf_frequencies()?;
        Ok(times.iter().map(|&t| C64::new(freqs.iter().map(|w| (w * t).cos()).product(), 0.0)).collect())
    })?;
    let shifts = configs
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let freqs = c.mf_frequencies()?;
            let state = random_bath_state(freqs.len(), &mut substream(seed, &[i as u64]));
            Ok(freqs.iter().zip(state).map(|(w, s)| spin_sign(s) * w).sum())
        })
        .collect::<Result<Vec<f64>>>()?;
    let curve = CoherenceCurve { times: times.to_vec(), values, order: CurveOrder::Gcce(0) };
    Ok((curve.with_signal(larmor_shift(b_s_nt)), shifts))
}

/// `T2* = √2 / σ_f` from the sample standard deviation of frequency shifts.
pub fn estimate_t2star(shifts: &[f64]) -> Result<f64> {
    if shifts.len() < 30 {
        return Err(Error::InvalidInput(format!("need at least 30 shifts, got {}", shifts.len())));
    }
    let n = shifts.len() as f64;
    let mean = shifts.iter().sum::<f64>() / n;
    let var = shifts.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let spread =
        shifts.iter().fold(f64::NEG_INFINITY, |m, &s| m.max(s)) - shifts.iter().fold(f64::INFINITY, |m, &s| m.min(s));
    if !(spread > 0.0) || !(var > 0.0) {
        return Err(Error::InfiniteT2);
    }
    Ok(SQRT_2 / var.sqrt())
}

/// Least-squares fit of `|W(t)| = exp(-(t/T)²)` over the points with
/// `|W| ≥ floor`, returning `T`.
pub fn gaussian_envelope_t2(curve: &CoherenceCurve, floor: f64) -> Result<f64> {
    let (mut xx, mut xy) = (0.0, 0.0);
    for (&t, w) in curve.times.iter().zip(&curve.values) {
        let m = w.norm();
        if t > 0.0 && m >= floor {
            let x = t * t;
            xx += x * x;
            xy += x * m.ln();
        }
    }
    if !(xy < 0.0) {
        return Err(Error::InfiniteT2);
    }
    Ok((-xx / xy).sqrt())
}

/// Coherence of one configuration for one bath state at gCCE order 0, 1 or 2.
///
/// Order 0 is the mean-field phase product; order 1 multiplies exactly
/// propagated single-spin clusters; order 2 adds the pair corrections
/// `W_ij / (W_i W_j)`. With `flip_flop` off all orders coincide.
pub fn gcce_signal(
    config: &BathConfiguration,
    order: u8,
    times: &[f64],
    state: &[bool],
    flip_flop: bool,
) -> Result<CoherenceCurve> {
    check_times(times)?;
    let spins = config.spins();
    if state.len() != spins.len() {
        return Err(Error::InvalidInput(format!("bath state has {} entries for {} spins", state.len(), spins.len())));
    }
    let mut values = vec![C64::new(1.0, 0.0); times.len()];
    match order {
        0 => {
            let freqs = config.mf_frequencies()?;
            for (v, &t) in values.iter_mut().zip(times) {
                let phase: f64 = freqs.iter().zip(state).map(|(w, &s)| spin_sign(s) * w).sum();
                *v = C64::from_polar(1.0, -phase * t);
            }
        }
        1 | 2 => {
            let singles = (0..spins.len())
                .map(|i| cluster_coherence(&[spins[i]], &[state[i]], times, flip_flop))
                .collect::<Result<Vec<_>>>()?;
            for w in &singles {
                for (v, x) in values.iter_mut().zip(w) {
                    *v *= x;
                }
            }
            if order == 2 {
                for i in 0..spins.len() {
                    for j in i + 1..spins.len() {
                        let pair = cluster_coherence(&[spins[i], spins[j]], &[state[i], state[j]], times, flip_flop)?;
                        for (k, v) in values.iter_mut().enumerate() {
                            *v *= pair[k] / (singles[i][k] * singles[j][k]);
                        }
                    }
                }
            }
        }
        _ => return Err(Error::InvalidInput(format!("gCCE order {order} is not supported, use 0, 1 or 2"))),
    }
    Ok(CoherenceCurve { times: times.to_vec(), values, order: CurveOrder::Gcce(order) })
}

/// Brute-force propagation of the whole bath for one state.
pub fn exact_signal(
    config: &BathConfiguration,
    times: &[f64],
    state: &[bool],
    flip_flop: bool,
) -> Result<CoherenceCurve> {
    check_times(times)?;
    let values = cluster_coherence(&config.spins(), state, times, flip_flop)?;
    Ok(CoherenceCurve { times: times.to_vec(), values, order: CurveOrder::Exact })
}

/// gCCE coherence averaged over configurations, each with one uniformly drawn
/// bath state from stream `(seed, index)`.
pub fn gcce_average(
    configs: &[BathConfiguration],
    order: u8,
    times: &[f64],
    seed: u64,
    flip_flop: bool,
) -> Result<CoherenceCurve> {
    if configs.is_empty() {
        return Err(Error::InvalidInput("need at least one bath configuration".into()));
    }
    check_times(times)?;
    let values = parallel_mean(configs.len(), times.len(), |i| {
        let state = random_bath_state(configs[i].len(), &mut substream(seed, &[i as u64]));
        Ok(gcce_signal(&configs[i], order, times, &state, flip_flop)?.values)
    })?;
    Ok(CoherenceCurve { times: times.to_vec(), values, order: CurveOrder::Gcce(order) })
}

/// Bath parameters as read from a configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathParams {
    pub density_per_nm2: f64,
    pub r_cut_nm: f64,
    pub nv_depth_nm: f64,
    pub n_configurations: usize,
    #[serde(default)]
    pub gcce_order: u8,
    #[serde(default)]
    pub fixed_spin_xyz_nm: Option<[f64; 3]>,
    #[serde(default)]
    pub seed: u64,
}

impl BathParams {
    /// All problems found, empty when valid.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.density_per_nm2 >= 0.0) || !self.density_per_nm2.is_finite() {
            out.push("bath.density_per_nm2 must be finite and ≥ 0".into());
        }
        for (name, v) in [("r_cut_nm", self.r_cut_nm), ("nv_depth_nm", self.nv_depth_nm)] {
            if !(v > 0.0) || !v.is_finite() {
                out.push(format!("bath.{name} must be finite and > 0"));
            }
        }
        if self.n_configurations == 0 {
            out.push("bath.n_configurations must be ≥ 1".into());
        }
        if self.gcce_order > 2 {
            out.push("bath.gcce_order must be 0, 1 or 2".into());
        }
        if let Some(p) = self.fixed_spin_xyz_nm {
            if p.iter().any(|x| !x.is_finite()) || p.iter().all(|x| *x == 0.0) {
                out.push("bath.fixed_spin_xyz_nm must be finite and away from the NV".into());
            }
        }
        out
    }

    /// Configurations from streams `(seed, 0, index)`.
    pub fn sample(&self) -> Result<Vec<BathConfiguration>> {
        if let Some(p) = self.problems().first() {
            return Err(Error::InvalidInput(p.clone()));
        }
        (0..self.n_configurations)
            .into_par_iter()
            .map(|i| {
                let mut rng = substream(self.seed, &[0, i as u64]);
                let c = sample_configuration(self.density_per_nm2, self.r_cut_nm, self.nv_depth_nm, &mut rng)?;
                Ok(match self.fixed_spin_xyz_nm {
                    Some(p) => c.with_fixed_spin(p),
                    None => c,
                })
            })
            .collect()
    }

    /// Configuration-averaged bath coherence, without the sensing phase.
    pub fn coherence(&self, times: &[f64]) -> Result<CoherenceCurve> {
        let configs = self.sample()?;
        if self.gcce_order == 0 {
            Ok(mf_signal(&configs, 0.0, times, self.seed ^ 1)?.0)
        } else {
            gcce_average(&configs, self.gcce_order, times, self.seed ^ 1, true)
        }
    }
}
