use serde::{Deserialize, Serialize};

use super::{build_plan, invert_channel, overhead_bound, wittstock_paulsen, GeneralMap, MitigationPlan};
use crate::error::Result;
use crate::qmatrix::{ChannelRep, Ptm};

/// Pauli axis of the measured observable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObservableAxis {
    X,
    Y,
    #[default]
    Z,
}

impl ObservableAxis {
    /// Row of the Pauli transfer matrix, 1..=3.
    pub fn index(self) -> usize {
        match self {
            ObservableAxis::X => 1,
            ObservableAxis::Y => 2,
            ObservableAxis::Z => 3,
        }
    }
}

/// Scales applied to the off-axis diagonal of the inverse.
pub const OFF_AXIS_SCALES: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

#[derive(Debug, Clone)]
pub struct OptimizedMap {
    pub map: GeneralMap,
    pub plan: MitigationPlan,
    /// Overhead of the plain inverse, for comparison.
    pub p_inverse: f64,
    /// Index into [`candidates`]; 0 is the plain inverse.
    pub candidate: usize,
}

/// Candidate maps sharing the inverse's observable row.
///
/// Index 0 is the inverse itself. The others keep only the observable row,
/// with the remaining diagonal entries scaled by [`OFF_AXIS_SCALES`].
pub fn candidates(inverse: &GeneralMap, axis: ObservableAxis) -> Vec<GeneralMap> {
    let inv = inverse.ptm();
    let k = axis.index();
    let mut out = vec![*inverse];
    for s in OFF_AXIS_SCALES {
        let mut ptm = Ptm::zeros();
        ptm[(0, 0)] = 1.0;
        ptm.set_row(k, &inv.row(k));
        for j in (1..4).filter(|&j| j != k) {
            ptm[(j, j)] = s * inv[(j, j)];
        }
        out.push(GeneralMap::new(ptm).expect("first row is exact"));
    }
    out
}

/// Mitigation map with the smallest overhead among [`candidates`] that
/// reproduces the inverse along the observable axis.
pub fn optimize_mitigation_map(noise: &ChannelRep, axis: ObservableAxis) -> Result<OptimizedMap> {
    let inverse = invert_channel(noise)?;
    let cands = candidates(&inverse, axis);
    let ps: Vec<f64> = cands.iter().map(|m| overhead_bound(&wittstock_paulsen(m))).collect();
    let mut best = 0;
    for (i, &p) in ps.iter().enumerate() {
        if p < ps[best] {
            best = i;
        }
    }
    let map = cands[best];
    let plan = build_plan(&map)?;
    Ok(OptimizedMap { map, plan, p_inverse: ps[0], candidate: best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector4;

    #[test]
    fn identity_noise_gives_identity() {
        let opt = optimize_mitigation_map(&ChannelRep::identity(), ObservableAxis::Z).unwrap();
        assert_eq!(opt.candidate, 0);
        assert_eq!(opt.plan.p(), 0.0);
        assert!((opt.map.ptm() - Ptm::identity()).amax() < 1e-15);
    }

    #[test]
    fn z_dephasing_keeps_inverse() {
        // dephasing along the measured axis: PTM diag(1, 1, e^{-Γ}, e^{-Γ})
        let g: f64 = 1.2;
        let noise = ChannelRep::Ptm(Ptm::from_diagonal(&Vector4::new(1.0, 1.0, (-g).exp(), (-g).exp())));
        let opt = optimize_mitigation_map(&noise, ObservableAxis::Z).unwrap();
        assert!((opt.plan.p() - opt.p_inverse).abs() < 1e-12);
        assert!((opt.plan.p() - (g.exp() - 1.0) / 2.0).abs() < 1e-10);
    }

    #[test]
    fn relaxation_row_only_is_cheaper() {
        // measurement-frame relaxation: z row damped by e^{-Γ/2}, no affine part
        let g: f64 = 1.0;
        let e = (-g).exp();
        let mut ptm = Ptm::from_diagonal(&Vector4::new(1.0, e, (-g / 2.0).exp(), (-g / 2.0).exp()));
        ptm[(1, 0)] = -(1.0 - e);
        let opt = optimize_mitigation_map(&ChannelRep::Ptm(ptm), ObservableAxis::Z).unwrap();
        assert!(opt.plan.p() < opt.p_inverse);
        assert!(((opt.plan.p()) - ((g / 2.0).exp() - 1.0) / 2.0).abs() < 1e-10);
        let inv = invert_channel(&ChannelRep::Ptm(ptm)).unwrap().ptm();
        assert!((opt.map.ptm().row(3) - inv.row(3)).amax() < 1e-10);
        assert!(opt.plan.reconstruction_error() < 1e-10);
    }
}
