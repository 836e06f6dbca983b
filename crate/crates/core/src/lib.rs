//! Quasiprobability error mitigation for single-qubit sensors.
//!
//! The crate decomposes the inverse of an invertible single-qubit noise
//! channel into a signed, weighted set of implementable circuits, and ships a
//! noisy Ramsey magnetometry simulator that exercises those circuits with
//! finite shot budgets.
//!
//! Module map:
//!
//! - [`qmatrix`]: 2×2 / 4×4 complex algebra and the four channel
//!   representations (Kraus, Choi, standard transfer matrix, Pauli transfer
//!   matrix).
//! - [`mitigation`]: Choi sign split, completion operator, extremal split,
//!   two-Kraus circuit realization and the mitigation-map optimizer.
//! - [`channels`]: dephasing / relaxation / thermalization channels with
//!   time-dependent rates and their closed-form mitigation plans.
//! - [`spinbath`]: surface electron spin bath sampling, mean-field and
//!   cluster-expansion coherence curves.
//! - [`sensing`]: DC/AC Ramsey phase, shot allocation, sampled mitigated
//!   estimates, sensitivities and τ sweeps.
//!
//! ```
//! use tqem_core::channels::relaxation_channel;
//! use tqem_core::mitigation::{build_plan, invert_channel};
//!
//! let noise = relaxation_channel(0.7, 0.0)?;
//! let plan = build_plan(&invert_channel(&noise)?)?;
//! assert!((plan.p() - (0.7f64.exp() - 1.0)).abs() < 1e-10);
//! assert!(plan.reconstruction_error() < 1e-9);
//! for c in plan.circuits() {
//!     println!("{:?} w={:.4} ancilla={}", c.sign, c.weight, c.realization.needs_ancilla);
//! }
//! # Ok::<(), tqem_core::Error>(())
//! ```

// `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channels;
pub mod error;
pub mod mitigation;
pub mod qmatrix;
pub mod rng;
pub mod sensing;
pub mod spinbath;

pub use channels::{NoiseChannelSpec, NoiseKind, RateFn, RateFunctions, ThermalParams};
pub use error::{Error, Result};
pub use mitigation::{
    CircuitSign, CptpPair, ExtremalRealization, GeneralMap, MitigationPlan, PlanCircuit, SignedDecomposition,
};
pub use qmatrix::{ChannelRep, CptpReport, DensityMatrix, KrausSet, Op2, RepKind, Super4};
pub use sensing::{SensingMode, SensingSpec, SensitivityReport, SweepResult, SweepRow};
pub use spinbath::{BathConfiguration, BathParams, CoherenceCurve, DipolarCoupling};

/// Electron gyromagnetic ratio magnitude in rad s⁻¹ T⁻¹.
pub const GAMMA_E: f64 = 1.760859e11;
