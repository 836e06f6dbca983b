use serde::{Deserialize, Serialize};

use super::{cptp_pair, extremal_split, realize_extremal, ExtremalRealization, GeneralMap};
use crate::error::{Error, Result};
use crate::qmatrix::{ChannelRep, Op2, Ptm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CircuitSign {
    Plus,
    Minus,
}

impl CircuitSign {
    pub fn factor(self) -> f64 {
        match self {
            CircuitSign::Plus => 1.0,
            CircuitSign::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanCircuit {
    pub sign: CircuitSign,
    /// Quasiprobability weight; the signed sum of weighted circuits is the target map.
    pub weight: f64,
    pub realization: ExtremalRealization,
    /// `weight / (2p + 1)`.
    pub shot_fraction: f64,
}

impl PlanCircuit {
    pub fn apply(&self, rho: &Op2) -> Op2 {
        self.realization.apply(rho)
    }
}

/// Circuits whose signed, weighted sum reproduces a general map.
#[derive(Debug, Clone, PartialEq)]
pub struct MitigationPlan {
    circuits: Vec<PlanCircuit>,
    p: f64,
    target: Ptm,
}

impl MitigationPlan {
    /// Assemble a plan from the realizations of the two CPTP parts. Parts
    /// share their weight equally; minus circuits are dropped when `p == 0`.
    pub fn from_parts(
        p: f64,
        plus: Vec<ExtremalRealization>,
        minus: Vec<ExtremalRealization>,
        target: Ptm,
    ) -> Result<Self> {
        if !(p >= 0.0) || !p.is_finite() {
            return Err(Error::InvalidInput(format!("overhead p = {p} must be finite and ≥ 0")));
        }
        if plus.is_empty() || plus.len() > 2 || minus.len() > 2 || (p > 0.0 && minus.is_empty()) {
            return Err(Error::InvalidInput("each part needs one or two circuits".into()));
        }
        let total = 2.0 * p + 1.0;
        let mut circuits = Vec::with_capacity(4);
        let n_plus = plus.len() as f64;
        for realization in plus {
            let weight = (1.0 + p) / n_plus;
            circuits.push(PlanCircuit { sign: CircuitSign::Plus, weight, realization, shot_fraction: weight / total });
        }
        if p > 0.0 {
            let n_minus = minus.len() as f64;
            for realization in minus {
                let weight = p / n_minus;
                circuits.push(PlanCircuit {
                    sign: CircuitSign::Minus,
                    weight,
                    realization,
                    shot_fraction: weight / total,
                });
            }
        }
        Ok(Self { circuits, p, target })
    }

    pub fn circuits(&self) -> &[PlanCircuit] {
        &self.circuits
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Sampling overhead `2p + 1`.
    pub fn overhead(&self) -> f64 {
        2.0 * self.p + 1.0
    }

    pub fn target(&self) -> Ptm {
        self.target
    }

    pub fn shot_fractions(&self) -> Vec<f64> {
        self.circuits.iter().map(|c| c.shot_fraction).collect()
    }

    pub fn ancilla_count(&self) -> usize {
        self.circuits.iter().filter(|c| c.realization.needs_ancilla).count()
    }

    pub fn signed_ptm(&self) -> Ptm {
        self.circuits.iter().map(|c| c.realization.ptm() * (c.sign.factor() * c.weight)).sum()
    }

    pub fn reconstruction_error(&self) -> f64 {
        (self.signed_ptm() - self.target).amax()
    }

    /// Signed weighted action on an operator, i.e. the target map applied exactly.
    pub fn apply_linear(&self, rho: &Op2) -> Op2 {
        self.circuits.iter().map(|c| c.apply(rho) * num_complex::Complex64::new(c.sign.factor() * c.weight, 0.0)).sum()
    }

    /// Same plan with every circuit conjugated by a unitary frame change.
    pub fn conjugated(&self, u: &crate::qmatrix::AxisAngle) -> Self {
        let circuits = self
            .circuits
            .iter()
            .map(|c| {
                let mut c = c.clone();
                c.realization.post_rotation = u.after(&c.realization.post_rotation);
                c.realization.pre_rotation = c.realization.pre_rotation.after(&u.inverse());
                c
            })
            .collect();
        let frame = crate::qmatrix::unitary_ptm(&u.unitary());
        let target = frame * self.target * frame.transpose();
        Self { circuits, p: self.p, target }
    }
}

fn realize_part(part: &ChannelRep) -> Result<Vec<ExtremalRealization>> {
    extremal_split(part)?.iter().map(realize_extremal).collect()
}

/// Full pipeline: CPTP pair, extremal split and circuit realization.
pub fn build_plan(m: &GeneralMap) -> Result<MitigationPlan> {
    let pair = cptp_pair(m)?;
    let plus = realize_part(&pair.m_plus)?;
    let minus = if pair.p > 0.0 { realize_part(&pair.m_minus)? } else { Vec::new() };
    MitigationPlan::from_parts(pair.p, plus, minus, m.ptm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mitigation::invert_channel;
    use crate::qmatrix::{AxisAngle, DensityMatrix};
    use nalgebra::Vector4;
    use proptest::prelude::*;

    fn relaxation(g: f64) -> ChannelRep {
        let e = (-g).exp();
        let mut ptm = Ptm::from_diagonal(&Vector4::new(1.0, (-g / 2.0).exp(), (-g / 2.0).exp(), e));
        ptm[(3, 0)] = 1.0 - e;
        ChannelRep::Ptm(ptm)
    }

    #[test]
    fn inverse_dephasing_needs_two_plain_circuits() {
        let g: f64 = 0.9;
        let noise = ChannelRep::Ptm(Ptm::from_diagonal(&Vector4::new(1.0, (-g).exp(), (-g).exp(), 1.0)));
        let plan = build_plan(&invert_channel(&noise).unwrap()).unwrap();
        assert_eq!(plan.circuits().len(), 2);
        assert_eq!(plan.ancilla_count(), 0);
        assert!((plan.p() - (g.exp() - 1.0) / 2.0).abs() < 1e-10);
        assert!(plan.reconstruction_error() < 1e-10);
        let fractions = plan.shot_fractions();
        assert!((fractions.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_relaxation_needs_three_circuits() {
        let plan = build_plan(&invert_channel(&relaxation(2f64.ln())).unwrap()).unwrap();
        assert_eq!(plan.circuits().len(), 3);
        assert_eq!(plan.ancilla_count(), 1);
        assert!((plan.p() - 1.0).abs() < 1e-10);
        assert!(plan.reconstruction_error() < 1e-10);
        let minus: Vec<_> = plan.circuits().iter().filter(|c| c.sign == CircuitSign::Minus).collect();
        assert_eq!(minus.len(), 1);
        assert!((minus[0].weight - 1.0).abs() < 1e-10);
    }

    #[test]
    fn cptp_input_has_only_plus_circuits() {
        let noise = relaxation(0.4);
        let m = GeneralMap::from_channel(&noise).unwrap();
        let plan = build_plan(&m).unwrap();
        assert_eq!(plan.p(), 0.0);
        assert!(plan.circuits().iter().all(|c| c.sign == CircuitSign::Plus));
        let rho = DensityMatrix::from_bloch([0.3, -0.4, 0.5]);
        let out = plan.apply_linear(rho.matrix());
        let expect = noise.apply_linear(rho.matrix());
        assert!(crate::qmatrix::max_abs(&(out - expect)) < 1e-10);
    }

    #[test]
    fn conjugated_plan_matches_conjugated_target() {
        let plan = build_plan(&invert_channel(&relaxation(1.0)).unwrap()).unwrap();
        let rot = AxisAngle::y(std::f64::consts::FRAC_PI_2);
        let moved = plan.conjugated(&rot);
        assert!(moved.reconstruction_error() < 1e-10);
    }

    proptest! {
        #[test]
        fn random_maps_reconstruct(m in crate::mitigation::tests::arb_general_map()) {
            let plan = build_plan(&m).unwrap();
            prop_assert!((1..=4).contains(&plan.circuits().len()));
            prop_assert!(plan.reconstruction_error() < 1e-9, "{}", plan.reconstruction_error());
            for c in plan.circuits() {
                let gram: Op2 = c.realization.kraus.operators().iter().map(|k| k.adjoint() * k).sum();
                prop_assert!(crate::qmatrix::max_abs(&(gram - crate::qmatrix::pauli(0))) < 1e-12);
            }
        }
    }
}
