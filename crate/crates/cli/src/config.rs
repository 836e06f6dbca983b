//! Experiment configuration: raw TOML schema and validation.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use tqem_core::channels::{NoiseChannelSpec, RateFn, RateFunctions, ThermalParams};
use tqem_core::qmatrix::Ptm;
use tqem_core::sensing::{MitigationStrategy, SensingMode, SensingSpec};
use tqem_core::spinbath::BathParams;
use tqem_core::GAMMA_E;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub seed: Option<u64>,
    pub shots: Option<i64>,
    pub mitigation_strategy: Option<MitigationStrategy>,
    pub sensing: Option<RawSensing>,
    pub noise: Option<RawNoise>,
    pub output: Option<RawOutput>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSensing {
    pub mode: Option<SensingMode>,
    pub b_s_nt: Option<f64>,
    pub omega_s: Option<f64>,
    pub gamma_e: Option<f64>,
    pub tau_grid: Option<Vec<f64>>,
    pub tau_range: Option<TauRange>,
    pub measure_full_half_periods: Option<bool>,
}

/// `count` evenly spaced points from `start` to `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TauRange {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl TauRange {
    pub fn points(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![self.start],
            n => (0..n).map(|i| self.start + (self.stop - self.start) * i as f64 / (n - 1) as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RawRate {
    Constant(f64),
    Shaped(RateShape),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RateShape {
    Sinusoidal { amplitude: f64, frequency: f64, offset: f64 },
    Table { points: Vec<[f64; 2]> },
}

impl RawRate {
    fn build(&self, name: &str, problems: &mut Vec<String>) -> Option<RateFn> {
        match self {
            RawRate::Constant(v) if v.is_finite() => Some(RateFn::Constant(*v)),
            RawRate::Constant(_) => {
                problems.push(format!("{name} must be finite"));
                None
            }
            RawRate::Shaped(RateShape::Sinusoidal { amplitude, frequency, offset }) => {
                if [amplitude, frequency, offset].iter().all(|x| x.is_finite()) {
                    Some(RateFn::Sinusoidal { amplitude: *amplitude, frequency: *frequency, offset: *offset })
                } else {
                    problems.push(format!("{name} sinusoid parameters must be finite"));
                    None
                }
            }
            RawRate::Shaped(RateShape::Table { points }) => {
                match RateFn::table(points.iter().map(|p| (p[0], p[1])).collect()) {
                    Ok(r) => Some(r),
                    Err(e) => {
                        problems.push(format!("{name}: {e}"));
                        None
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RawNoiseKind {
    Dephasing,
    Relaxation,
    Thermalization,
    CustomPtm,
    SpinBath,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawNoise {
    pub kind: Option<RawNoiseKind>,
    /// Dephasing or relaxation rate γ(t) in 1/μs.
    pub gamma: Option<RawRate>,
    /// Shorthand for a constant dephasing rate `1 / T2*`.
    pub t2_star_us: Option<f64>,
    /// Coherent frequency shift in rad/μs.
    pub omega_noise: Option<RawRate>,
    pub gamma0: Option<f64>,
    pub n_thermal: Option<f64>,
    pub ptm: Option<[[f64; 4]; 4]>,
    pub bath: Option<RawBath>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawBath {
    pub density_per_nm2: f64,
    pub r_cut_nm: f64,
    pub nv_depth_nm: f64,
    pub n_configurations: usize,
    #[serde(default)]
    pub gcce_order: u8,
    pub fixed_spin_xyz_nm: Option<[f64; 3]>,
    /// Defaults to the run seed.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawOutput {
    pub path: Option<PathBuf>,
    pub format: Option<Format>,
}

#[derive(Debug, Clone)]
pub enum NoiseConfig {
    Channel(NoiseChannelSpec),
    Bath(BathParams),
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub shots: u64,
    pub sensing: SensingSpec,
    pub noise: NoiseConfig,
    pub strategy: MitigationStrategy,
    pub output_path: Option<PathBuf>,
    pub format: Format,
    /// Effective configuration with defaults and overrides applied.
    pub raw: RawConfig,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

pub fn parse(text: &str) -> Result<RawConfig, Vec<String>> {
    toml::from_str(text).map_err(|e| vec![e.to_string().trim().to_string()])
}

fn finite_positive(name: &str, v: Option<f64>, problems: &mut Vec<String>) -> Option<f64> {
    match v {
        None => {
            problems.push(format!("{name} is required"));
            None
        }
        Some(x) if !(x.is_finite() && x > 0.0) => {
            problems.push(format!("{name} must be finite and > 0"));
            None
        }
        x => x,
    }
}

/// Typed configuration, or every problem found.
pub fn validate(mut raw: RawConfig, overrides: &Overrides) -> Result<ExperimentConfig, Vec<String>> {
    let mut problems = Vec::new();
    if let Some(s) = overrides.seed {
        raw.seed = Some(s);
    }
    let seed = *raw.seed.get_or_insert(0);
    let shots = match raw.shots {
        None => {
            problems.push("shots is required".into());
            0
        }
        Some(n) if n < 1 => {
            problems.push("shots must be ≥ 1".into());
            0
        }
        Some(n) => n as u64,
    };
    let strategy = *raw.mitigation_strategy.get_or_insert(MitigationStrategy::Inverse);

    let sensing = match &mut raw.sensing {
        None => {
            problems.push("[sensing] section is required".into());
            None
        }
        Some(s) => validate_sensing(s, &mut problems),
    };
    let noise = match &mut raw.noise {
        None => {
            problems.push("[noise] section is required".into());
            None
        }
        Some(n) => validate_noise(n, seed, &mut problems),
    };
    if strategy == MitigationStrategy::Analytic {
        if let Some(NoiseConfig::Bath(_) | NoiseConfig::Channel(NoiseChannelSpec::CustomPtm(_))) = &noise {
            problems.push(
                "mitigation_strategy = \"analytic\" needs a dephasing, relaxation or thermalization channel".into(),
            );
        }
    }

    let output = raw.output.get_or_insert(RawOutput { path: None, format: None });
    if let Some(p) = &overrides.out {
        output.path = Some(p.clone());
    }
    if let Some(f) = overrides.format {
        output.format = Some(f);
    }
    let format = *output.format.get_or_insert(Format::Csv);
    let output_path = output.path.clone();

    match (sensing, noise) {
        (Some(sensing), Some(noise)) if problems.is_empty() => {
            Ok(ExperimentConfig { seed, shots, sensing, noise, strategy, output_path, format, raw })
        }
        _ => Err(problems),
    }
}

fn validate_sensing(s: &mut RawSensing, problems: &mut Vec<String>) -> Option<SensingSpec> {
    let mode = match s.mode {
        Some(m) => m,
        None => {
            problems.push("sensing.mode is required (\"dc\" or \"ac\")".into());
            return None;
        }
    };
    let b_s_nt = match s.b_s_nt {
        Some(b) => b,
        None => {
            problems.push("sensing.b_s_nt is required".into());
            0.0
        }
    };
    let tau_grid = match (&s.tau_grid, &s.tau_range) {
        (Some(g), None) => g.clone(),
        (None, Some(r)) => {
            if r.count == 0 || !r.start.is_finite() || !r.stop.is_finite() {
                problems.push("sensing.tau_range needs finite bounds and count ≥ 1".into());
            }
            r.points()
        }
        (Some(_), Some(_)) => {
            problems.push("give either sensing.tau_grid or sensing.tau_range, not both".into());
            Vec::new()
        }
        (None, None) => {
            problems.push("sensing.tau_grid or sensing.tau_range is required".into());
            Vec::new()
        }
    };
    let spec = SensingSpec {
        mode,
        b_s_nt,
        omega_s: s.omega_s,
        gamma_e: *s.gamma_e.get_or_insert(GAMMA_E),
        tau_grid,
        measure_full_half_periods: *s.measure_full_half_periods.get_or_insert(true),
    };
    let grid_reported = spec.tau_grid.is_empty();
    problems.extend(spec.problems().into_iter().filter(|p| !(grid_reported && p.contains("must not be empty"))));
    if mode == SensingMode::Dc && s.omega_s.is_some() {
        problems.push("sensing.omega_s only applies to AC sensing".into());
    }
    Some(spec)
}

fn validate_noise(n: &mut RawNoise, seed: u64, problems: &mut Vec<String>) -> Option<NoiseConfig> {
    let Some(kind) = n.kind else {
        problems.push("noise.kind is required".into());
        return None;
    };
    let unused = |field: &str, present: bool, problems: &mut Vec<String>| {
        if present {
            problems.push(format!("noise.{field} does not apply to this noise kind"));
        }
    };
    let omega = |n: &RawNoise, problems: &mut Vec<String>| match &n.omega_noise {
        None => Some(RateFn::zero()),
        Some(r) => r.build("noise.omega_noise", problems),
    };
    match kind {
        RawNoiseKind::Dephasing | RawNoiseKind::Relaxation => {
            unused("gamma0", n.gamma0.is_some(), problems);
            unused("n_thermal", n.n_thermal.is_some(), problems);
            unused("ptm", n.ptm.is_some(), problems);
            unused("bath", n.bath.is_some(), problems);
            let gamma = match (&n.gamma, n.t2_star_us) {
                (Some(g), None) => g.build("noise.gamma", problems),
                (None, Some(t2)) if kind == RawNoiseKind::Dephasing => {
                    finite_positive("noise.t2_star_us", Some(t2), problems).map(|t| RateFn::Constant(1.0 / t))
                }
                (None, Some(_)) => {
                    problems.push("noise.t2_star_us only applies to dephasing".into());
                    None
                }
                (Some(_), Some(_)) => {
                    problems.push("give either noise.gamma or noise.t2_star_us, not both".into());
                    None
                }
                (None, None) => {
                    problems.push("noise.gamma is required".into());
                    None
                }
            };
            let omega = omega(n, problems);
            let rates = RateFunctions::new(gamma?, omega?);
            Some(NoiseConfig::Channel(if kind == RawNoiseKind::Dephasing {
                NoiseChannelSpec::Dephasing(rates)
            } else {
                NoiseChannelSpec::Relaxation(rates)
            }))
        }
        RawNoiseKind::Thermalization => {
            unused("gamma", n.gamma.is_some(), problems);
            unused("t2_star_us", n.t2_star_us.is_some(), problems);
            unused("ptm", n.ptm.is_some(), problems);
            unused("bath", n.bath.is_some(), problems);
            let gamma0 = finite_positive("noise.gamma0", n.gamma0, problems);
            let n_thermal = match n.n_thermal {
                Some(x) if x >= 0.0 && x.is_finite() => Some(x),
                Some(_) => {
                    problems.push("noise.n_thermal must be finite and ≥ 0".into());
                    None
                }
                None => {
                    problems.push("noise.n_thermal is required".into());
                    None
                }
            };
            let omega = omega(n, problems);
            let params = ThermalParams::new(gamma0?, n_thermal?).ok()?;
            Some(NoiseConfig::Channel(NoiseChannelSpec::Thermalization { params, omega_noise: omega? }))
        }
        RawNoiseKind::CustomPtm => {
            for (f, present) in [
                ("gamma", n.gamma.is_some()),
                ("t2_star_us", n.t2_star_us.is_some()),
                ("omega_noise", n.omega_noise.is_some()),
                ("bath", n.bath.is_some()),
            ] {
                unused(f, present, problems);
            }
            let Some(rows) = n.ptm else {
                problems.push("noise.ptm is required".into());
                return None;
            };
            match NoiseChannelSpec::custom_ptm(Ptm::from_fn(|r, c| rows[r][c])) {
                Ok(spec) => Some(NoiseConfig::Channel(spec)),
                Err(e) => {
                    problems.push(format!("noise.ptm: {e}"));
                    None
                }
            }
        }
        RawNoiseKind::SpinBath => {
            for (f, present) in [
                ("gamma", n.gamma.is_some()),
                ("t2_star_us", n.t2_star_us.is_some()),
                ("omega_noise", n.omega_noise.is_some()),
                ("gamma0", n.gamma0.is_some()),
                ("n_thermal", n.n_thermal.is_some()),
                ("ptm", n.ptm.is_some()),
            ] {
                unused(f, present, problems);
            }
            let Some(b) = &mut n.bath else {
                problems.push("noise.bath is required for kind = \"spin_bath\"".into());
                return None;
            };
            let params = BathParams {
                density_per_nm2: b.density_per_nm2,
                r_cut_nm: b.r_cut_nm,
                nv_depth_nm: b.nv_depth_nm,
                n_configurations: b.n_configurations,
                gcce_order: b.gcce_order,
                fixed_spin_xyz_nm: b.fixed_spin_xyz_nm,
                seed: *b.seed.get_or_insert(seed),
            };
            let found = params.problems();
            if found.is_empty() {
                Some(NoiseConfig::Bath(params))
            } else {
                problems.extend(found.into_iter().map(|p| format!("noise.{p}")));
                None
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL_DC: &str = r#"
shots = 10000

[sensing]
mode = "dc"
b_s_nt = 50.0
tau_range = { start = 0.0, stop = 40.0, count = 5 }

[noise]
kind = "dephasing"
t2_star_us = 20.0
"#;

    #[test]
    fn minimal_dc_gets_defaults() {
        let cfg = validate(parse(MINIMAL_DC).unwrap(), &Overrides::default()).unwrap();
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.strategy, MitigationStrategy::Inverse);
        assert_eq!(cfg.format, Format::Csv);
        assert_eq!(cfg.sensing.tau_grid, vec![0.0, 10.0, 20.0, 30.0, 40.0]);
        assert_eq!(cfg.sensing.gamma_e, GAMMA_E);
    }

    #[test]
    fn all_problems_are_reported() {
        let text = MINIMAL_DC.replace("shots = 10000", "shots = 0").replace("mode = \"dc\"", "mode = \"ac\"");
        let errs = validate(parse(&text).unwrap(), &Overrides::default()).unwrap_err();
        assert!(errs.iter().any(|e| e == "shots must be ≥ 1"), "{errs:?}");
        assert!(errs.iter().any(|e| e.contains("omega_s")), "{errs:?}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL_DC.replace("kind = \"dephasing\"", "kind = \"dephasing\"\nfoo = 1");
        let errs = parse(&text).unwrap_err();
        assert!(errs[0].contains("foo"), "{errs:?}");
    }

    #[test]
    fn analytic_needs_an_analytic_channel() {
        let text = MINIMAL_DC.replace(
            "kind = \"dephasing\"\nt2_star_us = 20.0",
            "kind = \"custom_ptm\"\nptm = [[1,0,0,0],[0,1,0,0],[0,0,1,0],[0,0,0,1]]",
        );
        let text = format!("mitigation_strategy = \"analytic\"\n{text}");
        let errs = validate(parse(&text).unwrap(), &Overrides::default()).unwrap_err();
        assert!(errs.iter().any(|e| e.contains("analytic")));
    }

    #[test]
    fn rates_parse() {
        let text = MINIMAL_DC.replace(
            "t2_star_us = 20.0",
            "gamma = { kind = \"table\", points = [[0.0, 0.0], [10.0, 0.1]] }\nomega_noise = { kind = \"sinusoidal\", amplitude = 1.0, frequency = 0.5, offset = 0.2 }",
        );
        let cfg = validate(parse(&text).unwrap(), &Overrides::default()).unwrap();
        let NoiseConfig::Channel(NoiseChannelSpec::Dephasing(rf)) = cfg.noise else { panic!() };
        assert!(matches!(rf.gamma, RateFn::Table(_)));
        assert!(matches!(rf.omega_noise, RateFn::Sinusoidal { .. }));
    }
}
