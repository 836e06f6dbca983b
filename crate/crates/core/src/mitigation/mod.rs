//! Signed decomposition of trace-preserving maps into implementable circuits.
//!
//! A Hermiticity-preserving, trace-preserving map `M` (typically the inverse
//! of a noise channel) is written as `(1 + p) M₊ − p M₋` with CPTP `M₊`,
//! `M₋`. Each CPTP part is then split into at most two extremal maps, and each
//! extremal map is realized by two Kraus operators in trigonometric normal
//! form sandwiched between single-qubit rotations.

mod extremal;
mod optimize;
mod plan;

pub use extremal::{extremal_split, realize_extremal, ExtremalRealization};
pub use optimize::{optimize_mitigation_map, ObservableAxis, OptimizedMap};
pub use plan::{build_plan, CircuitSign, MitigationPlan, PlanCircuit};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::qmatrix::{
    choi_kraus_gram, hermitian_eigen, kraus_op_choi, max_abs, pauli, stm_to_ptm, to_dynamic, ChannelRep, Op2, Ptm,
    Super4, C64,
};

/// Choi eigenvalues with magnitude below this are assigned to neither part.
pub const EIGEN_CUTOFF: f64 = 1e-11;
/// |det STM| below this means the channel is treated as singular.
pub const DET_CUTOFF: f64 = 1e-12;

/// Trace-preserving, Hermiticity-preserving map given by its real PTM.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralMap {
    ptm: Ptm,
}

impl GeneralMap {
    /// The first row must be `(1, 0, 0, 0)` within 1e-9; it is then set exactly.
    pub fn new(mut ptm: Ptm) -> Result<Self> {
        if ptm.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("map has non-finite entries".into()));
        }
        let row = [ptm[(0, 0)] - 1.0, ptm[(0, 1)], ptm[(0, 2)], ptm[(0, 3)]];
        if row.iter().any(|x| x.abs() > 1e-9) {
            return Err(Error::InvalidInput("map is not trace preserving".into()));
        }
        ptm.set_row(0, &nalgebra::RowVector4::new(1.0, 0.0, 0.0, 0.0));
        Ok(Self { ptm })
    }

    pub fn identity() -> Self {
        Self { ptm: Ptm::identity() }
    }

    pub fn from_channel(c: &ChannelRep) -> Result<Self> {
        Self::new(c.ptm())
    }

    pub fn ptm(&self) -> Ptm {
        self.ptm
    }

    pub fn rep(&self) -> ChannelRep {
        ChannelRep::Ptm(self.ptm)
    }

    pub fn choi(&self) -> Super4 {
        self.rep().choi()
    }
}

/// Split of a Choi matrix by eigenvalue sign, `C = C₊ − C₋`.
#[derive(Debug, Clone)]
pub struct SignedDecomposition {
    pub choi_plus: Super4,
    pub choi_minus: Super4,
    /// Eigenpairs of the Hermitized Choi matrix, eigenvalues descending.
    pub eigen: Vec<(f64, DVector<C64>)>,
}

/// The map as `(1 + p) M₊ − p M₋` with both parts CPTP.
#[derive(Debug, Clone)]
pub struct CptpPair {
    pub m_plus: ChannelRep,
    /// Identity placeholder when `p == 0`.
    pub m_minus: ChannelRep,
    pub p: f64,
    pub d_op: Op2,
}

impl CptpPair {
    pub fn signed_ptm(&self) -> Ptm {
        self.m_plus.ptm() * (1.0 + self.p) - self.m_minus.ptm() * self.p
    }
}

/// Inverse of an invertible channel as a general map.
pub fn invert_channel(noise: &ChannelRep) -> Result<GeneralMap> {
    let stm = noise.stm();
    let det = stm.determinant().norm();
    if !det.is_finite() || det < DET_CUTOFF {
        return Err(Error::NotInvertible { det });
    }
    let inv = stm.try_inverse().ok_or(Error::NotInvertible { det })?;
    GeneralMap::new(stm_to_ptm(&inv))
}

/// 2-norm condition number of the channel's transfer matrix.
pub fn condition_number(noise: &ChannelRep) -> f64 {
    let s = noise.ptm().svd(false, false).singular_values;
    let min = s.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        s.max() / min
    }
}

pub fn wittstock_paulsen(m: &GeneralMap) -> SignedDecomposition {
    let (vals, vecs) = hermitian_eigen(&to_dynamic(&m.choi()));
    let mut choi_plus = Super4::zeros();
    let mut choi_minus = Super4::zeros();
    for (&lambda, v) in vals.iter().zip(&vecs) {
        if lambda.abs() < EIGEN_CUTOFF {
            continue;
        }
        let v4 = nalgebra::Vector4::new(v[0], v[1], v[2], v[3]);
        let proj = v4 * v4.adjoint() * C64::new(lambda.abs(), 0.0);
        if lambda > 0.0 {
            choi_plus += proj;
        } else {
            choi_minus += proj;
        }
    }
    SignedDecomposition { choi_plus, choi_minus, eigen: vals.into_iter().zip(vecs).collect() }
}

/// Least `p` with `Σ K₋†K₋ ≤ p·I`.
pub fn overhead_bound(sd: &SignedDecomposition) -> f64 {
    let (vals, _) = hermitian_eigen(&to_dynamic(&choi_kraus_gram(&sd.choi_minus)));
    vals[0].max(0.0)
}

/// Kraus operator `D` with `D†D = p·I − Σ K₋†K₋`.
pub fn completion_operator(sd: &SignedDecomposition, p: f64) -> Result<Op2> {
    let bound = overhead_bound(sd);
    if !(p >= bound - 1e-12) {
        return Err(Error::InvalidOverhead { p, bound });
    }
    let rest = pauli(0) * C64::new(p, 0.0) - choi_kraus_gram(&sd.choi_minus);
    let floor = 1e-13 * p.max(1.0);
    let (vals, vecs) = hermitian_eigen(&to_dynamic(&rest));
    let mut d = Op2::zeros();
    for (&lambda, v) in vals.iter().zip(&vecs) {
        if lambda <= floor {
            continue;
        }
        let v2 = nalgebra::Vector2::new(v[0], v[1]);
        d += v2 * v2.adjoint() * C64::new(lambda.sqrt(), 0.0);
    }
    Ok(d)
}

pub fn cptp_pair(m: &GeneralMap) -> Result<CptpPair> {
    let sd = wittstock_paulsen(m);
    let p = overhead_bound(&sd);
    if p == 0.0 {
        return Ok(CptpPair {
            m_plus: ChannelRep::Choi(m.choi()),
            m_minus: ChannelRep::identity(),
            p,
            d_op: Op2::zeros(),
        });
    }
    let d_op = completion_operator(&sd, p)?;
    let choi_d = kraus_op_choi(&d_op);
    let m_plus = (sd.choi_plus + choi_d) * C64::new(1.0 / (1.0 + p), 0.0);
    let m_minus = (sd.choi_minus + choi_d) * C64::new(1.0 / p, 0.0);
    Ok(CptpPair { m_plus: ChannelRep::Choi(m_plus), m_minus: ChannelRep::Choi(m_minus), p, d_op })
}

/// PTM distance helper used by tests and invariants.
pub fn ptm_distance(a: &Ptm, b: &Ptm) -> f64 {
    (a - b).amax()
}

/// Largest deviation of a Choi matrix from Hermiticity, for diagnostics.
pub fn hermiticity_defect(c: &Super4) -> f64 {
    max_abs(&(c - c.adjoint()))
}

#[cfg(test)]
pub(crate) fn ptm_from_rows(rows: [[f64; 4]; 4]) -> Ptm {
    nalgebra::Matrix4::from_fn(|r, c| rows[r][c])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmatrix::{kron, matrix_unit};
    use nalgebra::Vector4;
    use proptest::prelude::*;

    fn dephasing_inverse(g: f64) -> GeneralMap {
        GeneralMap::new(Ptm::from_diagonal(&Vector4::new(1.0, g.exp(), g.exp(), 1.0))).unwrap()
    }

    fn relaxation_inverse(g: f64) -> GeneralMap {
        // |1⟩⟨1| → e^{-Γ}|1⟩⟨1| + (1 − e^{-Γ})|0⟩⟨0|, coherences e^{-Γ/2}
        let e = (-g).exp();
        let ptm = ptm_from_rows([
            [1.0, 0.0, 0.0, 0.0],
            [0.0, (-g / 2.0).exp(), 0.0, 0.0],
            [0.0, 0.0, (-g / 2.0).exp(), 0.0],
            [1.0 - e, 0.0, 0.0, e],
        ]);
        invert_channel(&ChannelRep::Ptm(ptm)).unwrap()
    }

    #[test]
    fn invert_identity_and_dephasing() {
        let inv = invert_channel(&ChannelRep::identity()).unwrap();
        assert!(ptm_distance(&inv.ptm(), &Ptm::identity()) < 1e-15);
        let g: f64 = 0.7;
        let noise = ChannelRep::Ptm(Ptm::from_diagonal(&Vector4::new(1.0, (-g).exp(), (-g).exp(), 1.0)));
        let inv = invert_channel(&noise).unwrap();
        assert!(ptm_distance(&inv.ptm(), &dephasing_inverse(g).ptm()) < 1e-12);
        assert!(ptm_distance(&(inv.ptm() * noise.ptm()), &Ptm::identity()) < 1e-9);
    }

    #[test]
    fn full_dephasing_is_not_invertible() {
        let noise = ChannelRep::Ptm(Ptm::from_diagonal(&Vector4::new(1.0, 0.0, 0.0, 1.0)));
        assert!(matches!(invert_channel(&noise), Err(Error::NotInvertible { .. })));
    }

    #[test]
    fn identity_has_no_negative_part() {
        let sd = wittstock_paulsen(&GeneralMap::identity());
        assert!(max_abs(&sd.choi_minus) == 0.0);
        assert_eq!(overhead_bound(&sd), 0.0);
        let pair = cptp_pair(&GeneralMap::identity()).unwrap();
        assert_eq!(pair.p, 0.0);
        assert!(ptm_distance(&pair.m_minus.ptm(), &Ptm::identity()) < 1e-15);
    }

    #[test]
    fn inverse_dephasing_split() {
        let g = 2f64.ln();
        let sd = wittstock_paulsen(&dephasing_inverse(g));
        // single eigenvalue e^Γ − 1 = 1 on (|00⟩ − |11⟩)/√2
        let (vals, _) = hermitian_eigen(&to_dynamic(&sd.choi_minus));
        assert!((vals[0] - 1.0).abs() < 1e-12 && vals[1].abs() < 1e-12);
        let bell = Vector4::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(-1.0, 0.0))
            / C64::new(2f64.sqrt(), 0.0);
        let expect = bell * bell.adjoint();
        assert!(max_abs(&(sd.choi_minus - expect)) < 1e-12);
        let gram = choi_kraus_gram(&sd.choi_minus);
        assert!(max_abs(&(gram - pauli(0) * C64::new(0.5, 0.0))) < 1e-12);
        assert!((overhead_bound(&sd) - 0.5).abs() < 1e-12);
        let d = completion_operator(&sd, 0.5).unwrap();
        assert!(max_abs(&d) == 0.0);
        let pair = cptp_pair(&dephasing_inverse(g)).unwrap();
        assert!(ptm_distance(&pair.m_plus.ptm(), &Ptm::identity()) < 1e-12);
        let z = Ptm::from_diagonal(&Vector4::new(1.0, -1.0, -1.0, 1.0));
        assert!(ptm_distance(&pair.m_minus.ptm(), &z) < 1e-12);
    }

    #[test]
    fn inverse_relaxation_split() {
        let g = 2f64.ln();
        let m = relaxation_inverse(g);
        let sd = wittstock_paulsen(&m);
        // C̃₋ = (e^Γ − 1)|10⟩⟨10| (index 2 = input |1⟩, output |0⟩)
        let mut expect = Super4::zeros();
        expect[(2, 2)] = C64::new(1.0, 0.0);
        assert!(max_abs(&(sd.choi_minus - expect)) < 1e-12);
        for gamma in [0.1, 0.5, 1.0, 2.0, 3.0] {
            let sd = wittstock_paulsen(&relaxation_inverse(gamma));
            let p = overhead_bound(&sd);
            assert!((p - (gamma.exp() - 1.0)).abs() < 1e-10);
            let d = completion_operator(&sd, p).unwrap();
            let mut expect = Op2::zeros();
            expect[(0, 0)] = C64::new((gamma.exp() - 1.0).sqrt(), 0.0);
            assert!(max_abs(&(d - expect)) < 1e-7, "{d}");
        }
    }

    #[test]
    fn overhead_below_bound_is_rejected() {
        let sd = wittstock_paulsen(&dephasing_inverse(1.0));
        assert!(matches!(completion_operator(&sd, 0.1), Err(Error::InvalidOverhead { .. })));
    }

    #[test]
    fn choi_of_kraus_op_matches_definition() {
        let k = Op2::new(C64::new(0.3, 0.1), C64::new(-0.2, 0.5), C64::new(0.7, 0.0), C64::new(0.0, -0.4));
        let mut brute = Super4::zeros();
        for i in 0..4 {
            let e = matrix_unit(i);
            brute += kron(&e, &(k * e * k.adjoint()));
        }
        assert!(max_abs(&(kraus_op_choi(&k) - brute)) < 1e-15);
    }

    pub(crate) fn arb_general_map() -> impl Strategy<Value = GeneralMap> {
        proptest::collection::vec(-1.5f64..1.5, 12).prop_map(|xs| {
            let mut ptm = Ptm::identity();
            for r in 1..4 {
                for c in 0..4 {
                    ptm[(r, c)] = xs[4 * (r - 1) + c];
                }
            }
            GeneralMap::new(ptm).unwrap()
        })
    }

    proptest! {
        #[test]
        fn cptp_pair_reconstructs(m in arb_general_map()) {
            let pair = cptp_pair(&m).unwrap();
            prop_assert!(pair.p >= 0.0);
            prop_assert!(ptm_distance(&pair.signed_ptm(), &m.ptm()) < 1e-9);
            prop_assert!(pair.m_plus.check_cptp(1e-9).is_cptp());
            prop_assert!(pair.m_minus.check_cptp(1e-9).is_cptp());
            let sd = wittstock_paulsen(&m);
            prop_assert!(max_abs(&(sd.choi_plus - sd.choi_minus - m.choi())) < 1e-10);
        }
    }
}
