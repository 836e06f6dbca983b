//! Single-qubit channel representations.
//!
//! Conventions used throughout the crate:
//!
//! - Matrix units are ordered `e_{2a+b} = |a⟩⟨b|`; vectorization is row-major.
//! - Standard transfer matrix (STM): `S_ij = Tr[e_i† M(e_j)]`, so that
//!   `vec(M(ρ)) = S vec(ρ)` and a Kraus set maps to `Σ K ⊗ conj(K)`.
//! - Choi matrix: `C = Σ_i e_i ⊗ M(e_i)`; block `(a, b)` holds `M(|a⟩⟨b|)`.
//! - Pauli transfer matrix (PTM): `Λ_ij = ½ Tr[σ_i M(σ_j)]`, real for
//!   Hermiticity-preserving maps, first row `(1, 0, 0, 0)` when trace
//!   preserving.

mod linalg;

pub use linalg::{
    hermitian_eigen, hermitize, kron, matrix_unit, max_abs, max_abs_real, pauli, psd_sqrt, to_dynamic, unitary_ptm,
    unvec_row, vec_row, AxisAngle, Op2, Super4, C64,
};
pub(crate) use linalg::{is_finite, ONE, ZERO};

use nalgebra::{Matrix4, Vector4};

use crate::error::{Error, Result};

/// Hermiticity tolerance for density matrices.
pub const TOL_HERM: f64 = 1e-10;
/// Trace tolerance for density matrices.
pub const TOL_TR: f64 = 1e-10;
/// Eigenvalues below `-TOL_PSD` fail positivity.
pub const TOL_PSD: f64 = 1e-10;

/// Real 4×4 Pauli transfer matrix.
pub type Ptm = Matrix4<f64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix(Op2);

impl DensityMatrix {
    pub fn new(m: Op2) -> Result<Self> {
        if !is_finite(&m) {
            return Err(Error::InvalidInput("density matrix has non-finite entries".into()));
        }
        if max_abs(&(m - m.adjoint())) > TOL_HERM {
            return Err(Error::InvalidInput("density matrix is not Hermitian".into()));
        }
        if (m.trace() - ONE).norm() > TOL_TR {
            return Err(Error::InvalidInput("density matrix trace is not 1".into()));
        }
        let (vals, _) = hermitian_eigen(&to_dynamic(&m));
        if vals.iter().any(|&l| l < -TOL_PSD) {
            return Err(Error::InvalidInput("density matrix is not positive semidefinite".into()));
        }
        Ok(Self(m))
    }

    /// State with Bloch vector `r` (|r| ≤ 1 is not checked).
    pub fn from_bloch(r: [f64; 3]) -> Self {
        let m = (pauli(0)
            + pauli(1) * C64::new(r[0], 0.0)
            + pauli(2) * C64::new(r[1], 0.0)
            + pauli(3) * C64::new(r[2], 0.0))
            * C64::new(0.5, 0.0);
        Self(m)
    }

    pub fn pure(psi: [C64; 2]) -> Self {
        let v = nalgebra::Vector2::new(psi[0], psi[1]);
        let v = v / C64::new(v.norm(), 0.0);
        Self(v * v.adjoint())
    }

    pub fn matrix(&self) -> &Op2 {
        &self.0
    }

    pub fn bloch(&self) -> [f64; 3] {
        [1, 2, 3].map(|i| (self.0 * pauli(i)).trace().re)
    }

    /// Tr(ρ O) for a Hermitian observable (real part).
    pub fn expectation(&self, observable: &Op2) -> f64 {
        (self.0 * observable).trace().re
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum Completeness {
    TracePreserving,
    /// Σ K†K ≤ c·I.
    SubNormalized(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrausSet {
    operators: Vec<Op2>,
    completeness: Completeness,
}

impl KrausSet {
    /// Trace-preserving Kraus set; completeness is checked to 1e-10.
    pub fn new(operators: Vec<Op2>) -> Result<Self> {
        Self::validate_entries(&operators)?;
        let set = Self { operators, completeness: Completeness::TracePreserving };
        let residual = set.completeness_residual();
        if residual > TOL_TR {
            return Err(Error::InvalidInput(format!("Kraus operators are not complete (residual {residual:e})")));
        }
        Ok(set)
    }

    pub fn sub_normalized(operators: Vec<Op2>, bound: f64) -> Result<Self> {
        Self::validate_entries(&operators)?;
        let set = Self { operators, completeness: Completeness::SubNormalized(bound) };
        let (vals, _) = hermitian_eigen(&to_dynamic(&set.gram()));
        if vals[0] > bound + TOL_TR {
            return Err(Error::InvalidInput(format!("Σ K†K has eigenvalue {} above bound {bound}", vals[0])));
        }
        Ok(set)
    }

    fn validate_entries(operators: &[Op2]) -> Result<()> {
        if operators.is_empty() {
            return Err(Error::InvalidInput("empty Kraus set".into()));
        }
        if operators.iter().any(|k| !is_finite(k)) {
            return Err(Error::InvalidInput("Kraus operator has non-finite entries".into()));
        }
        Ok(())
    }

    pub fn operators(&self) -> &[Op2] {
        &self.operators
    }

    pub fn completeness(&self) -> Completeness {
        self.completeness
    }

    /// Σ K†K.
    pub fn gram(&self) -> Op2 {
        self.operators.iter().map(|k| k.adjoint() * k).sum()
    }

    /// max |Σ K†K − I|.
    pub fn completeness_residual(&self) -> f64 {
        max_abs(&(self.gram() - pauli(0)))
    }

    pub fn stm(&self) -> Super4 {
        self.operators.iter().map(|k| kron(k, &k.map(|z| z.conj()))).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RepKind {
    Kraus,
    Choi,
    Stm,
    Ptm,
}

/// A single-qubit linear map in one of four interconvertible forms.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelRep {
    Kraus(KrausSet),
    Choi(Super4),
    Stm(Super4),
    Ptm(Ptm),
}

/// Outcome of [`ChannelRep::check_cptp`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CptpReport {
    pub min_choi_eigenvalue: f64,
    /// max |Σ K†K − I|, computed from the Choi partial trace.
    pub tp_residual: f64,
    pub cp: bool,
    pub tp: bool,
}

impl CptpReport {
    pub fn is_cptp(&self) -> bool {
        self.cp && self.tp
    }
}

/// Pauli basis change: column j is vec(σ_j).
fn pauli_basis() -> Super4 {
    let mut p = Super4::zeros();
    for j in 0..4 {
        p.set_column(j, &vec_row(&pauli(j)));
    }
    p
}

/// Choi ↔ STM reshuffle; the permutation is an involution up to transposition
/// of roles, so one function serves both directions.
fn choi_from_stm(s: &Super4) -> Super4 {
    // C[(2a+c),(2b+d)] = S[(2c+d),(2a+b)]
    Super4::from_fn(|r, col| {
        let (a, c) = (r / 2, r % 2);
        let (b, d) = (col / 2, col % 2);
        s[(2 * c + d, 2 * a + b)]
    })
}

fn stm_from_choi(choi: &Super4) -> Super4 {
    Super4::from_fn(|r, col| {
        let (c, d) = (r / 2, r % 2);
        let (a, b) = (col / 2, col % 2);
        choi[(2 * a + c, 2 * b + d)]
    })
}

pub fn stm_to_ptm(s: &Super4) -> Ptm {
    let p = pauli_basis();
    (p.adjoint() * s * p * C64::new(0.5, 0.0)).map(|z| z.re)
}

pub fn ptm_to_stm(ptm: &Ptm) -> Super4 {
    let p = pauli_basis();
    p * ptm.map(|x| C64::new(x, 0.0)) * p.adjoint() * C64::new(0.5, 0.0)
}

/// Σ K†K of the map with Choi matrix `choi` (the transpose of the partial
/// trace over the output factor).
pub fn choi_kraus_gram(choi: &Super4) -> Op2 {
    Op2::from_fn(|b, a| (0..2).map(|c| choi[(2 * a + c, 2 * b + c)]).sum())
}

/// Choi matrix of ρ ↦ KρK†.
pub fn kraus_op_choi(k: &Op2) -> Super4 {
    // |K⟩⟩[2a + c] = K[(c, a)]
    let v = Vector4::new(k[(0, 0)], k[(1, 0)], k[(0, 1)], k[(1, 1)]);
    v * v.adjoint()
}

pub fn kraus_to_choi(k: &KrausSet) -> Result<ChannelRep> {
    Ok(ChannelRep::Choi(k.operators().iter().map(kraus_op_choi).sum()))
}

/// Kraus operators of a CP map from its Choi eigendecomposition.
pub fn choi_to_kraus_ops(choi: &Super4) -> Result<Vec<Op2>> {
    let (vals, vecs) = hermitian_eigen(&to_dynamic(choi));
    let min = *vals.last().unwrap();
    if min < -TOL_PSD {
        return Err(Error::NotCompletelyPositive { min_eigenvalue: min });
    }
    let mut ops = Vec::new();
    for (lambda, v) in vals.iter().zip(&vecs) {
        if *lambda <= 1e-14 {
            continue;
        }
        let s = C64::new(lambda.sqrt(), 0.0);
        ops.push(Op2::new(v[0], v[2], v[1], v[3]) * s);
    }
    if ops.is_empty() {
        ops.push(Op2::zeros());
    }
    Ok(ops)
}

impl ChannelRep {
    pub fn identity() -> Self {
        ChannelRep::Ptm(Ptm::identity())
    }

    pub fn unitary(u: Op2) -> Self {
        ChannelRep::Kraus(KrausSet { operators: vec![u], completeness: Completeness::TracePreserving })
    }

    pub fn kind(&self) -> RepKind {
        match self {
            ChannelRep::Kraus(_) => RepKind::Kraus,
            ChannelRep::Choi(_) => RepKind::Choi,
            ChannelRep::Stm(_) => RepKind::Stm,
            ChannelRep::Ptm(_) => RepKind::Ptm,
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = match self {
            ChannelRep::Kraus(k) => k.operators().iter().all(is_finite),
            ChannelRep::Choi(m) | ChannelRep::Stm(m) => is_finite(m),
            ChannelRep::Ptm(m) => m.iter().all(|x| x.is_finite()),
        };
        if finite {
            Ok(())
        } else {
            Err(Error::InvalidInput("channel has non-finite entries".into()))
        }
    }

    pub fn stm(&self) -> Super4 {
        match self {
            ChannelRep::Kraus(k) => k.stm(),
            ChannelRep::Choi(c) => stm_from_choi(c),
            ChannelRep::Stm(s) => *s,
            ChannelRep::Ptm(p) => ptm_to_stm(p),
        }
    }

    pub fn choi(&self) -> Super4 {
        match self {
            ChannelRep::Choi(c) => *c,
            ChannelRep::Kraus(k) => k.operators().iter().map(kraus_op_choi).sum(),
            other => choi_from_stm(&other.stm()),
        }
    }

    pub fn ptm(&self) -> Ptm {
        match self {
            ChannelRep::Ptm(p) => *p,
            other => stm_to_ptm(&other.stm()),
        }
    }

    /// Kraus operators; fails for maps that are not completely positive.
    pub fn kraus(&self) -> Result<KrausSet> {
        if let ChannelRep::Kraus(k) = self {
            return Ok(k.clone());
        }
        let choi = self.choi();
        let ops = choi_to_kraus_ops(&choi)?;
        let gram: Op2 = ops.iter().map(|k| k.adjoint() * k).sum();
        let completeness = if max_abs(&(gram - pauli(0))) <= 1e-9 {
            Completeness::TracePreserving
        } else {
            let (vals, _) = hermitian_eigen(&to_dynamic(&gram));
            Completeness::SubNormalized(vals[0])
        };
        Ok(KrausSet { operators: ops, completeness })
    }

    pub fn convert(&self, target: RepKind) -> Result<ChannelRep> {
        self.validate()?;
        Ok(match target {
            RepKind::Kraus => ChannelRep::Kraus(self.kraus()?),
            RepKind::Choi => ChannelRep::Choi(self.choi()),
            RepKind::Stm => ChannelRep::Stm(self.stm()),
            RepKind::Ptm => ChannelRep::Ptm(self.ptm()),
        })
    }

    /// Action on an arbitrary 2×2 operator.
    pub fn apply_linear(&self, m: &Op2) -> Op2 {
        match self {
            ChannelRep::Kraus(k) => k.operators().iter().map(|op| op * m * op.adjoint()).sum(),
            other => unvec_row(&(other.stm() * vec_row(m))),
        }
    }

    /// Action on a state. The caller guarantees the map is CPTP; the output is
    /// not re-validated.
    pub fn apply(&self, rho: &DensityMatrix) -> DensityMatrix {
        DensityMatrix(self.apply_linear(rho.matrix()))
    }

    /// `self ∘ first`.
    pub fn after(&self, first: &ChannelRep) -> ChannelRep {
        ChannelRep::Stm(self.stm() * first.stm())
    }

    /// Adjoint map with respect to the Hilbert-Schmidt inner product.
    pub fn adjoint(&self) -> ChannelRep {
        ChannelRep::Stm(self.stm().adjoint())
    }

    pub fn check_cptp(&self, tol: f64) -> CptpReport {
        let choi = self.choi();
        let (vals, _) = hermitian_eigen(&to_dynamic(&choi));
        let min_choi_eigenvalue = *vals.last().unwrap();
        let tp_residual = max_abs(&(choi_kraus_gram(&choi) - pauli(0)));
        CptpReport { min_choi_eigenvalue, tp_residual, cp: min_choi_eigenvalue >= -tol, tp: tp_residual <= tol }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn basis_states() -> Vec<DensityMatrix> {
        vec![
            DensityMatrix::from_bloch([0.0, 0.0, 1.0]),
            DensityMatrix::from_bloch([0.0, 0.0, -1.0]),
            DensityMatrix::from_bloch([1.0, 0.0, 0.0]),
            DensityMatrix::from_bloch([0.0, 1.0, 0.0]),
        ]
    }

    /// Brute-force Σ_i e_i ⊗ M(e_i) with M applied through the Kraus sum.
    fn brute_choi(ops: &[Op2]) -> Super4 {
        let mut out = Super4::zeros();
        for i in 0..4 {
            let e = matrix_unit(i);
            let image: Op2 = ops.iter().map(|k| k * e * k.adjoint()).sum();
            out += kron(&e, &image);
        }
        out
    }

    fn trig_kraus(nu: f64, mu: f64) -> Vec<Op2> {
        vec![
            Op2::new(c(((mu - nu) / 2.0).cos()), ZERO, ZERO, c(((mu + nu) / 2.0).cos())),
            Op2::new(ZERO, c(((mu + nu) / 2.0).sin()), c(((mu - nu) / 2.0).sin()), ZERO),
        ]
    }

    #[test]
    fn identity_choi() {
        let k = KrausSet::new(vec![pauli(0)]).unwrap();
        let choi = kraus_to_choi(&k).unwrap().choi();
        let expect = Super4::from_fn(|r, col| if (r == 0 || r == 3) && (col == 0 || col == 3) { ONE } else { ZERO });
        assert!(max_abs(&(choi - expect)) < 1e-15);
    }

    #[test]
    fn x_conjugation_choi_support() {
        let k = KrausSet::new(vec![pauli(1)]).unwrap();
        let choi = kraus_to_choi(&k).unwrap().choi();
        for (r, col) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
            assert!((choi[(r, col)] - ONE).norm() < 1e-15);
        }
        let (vals, vecs) = hermitian_eigen(&to_dynamic(&choi));
        assert!((vals[0] - 2.0).abs() < 1e-12);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((vecs[0][1].re - s).abs() < 1e-12 && (vecs[0][2].re - s).abs() < 1e-12);
    }

    #[test]
    fn trig_kraus_choi_matches_brute_force() {
        let ops = trig_kraus(std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2);
        let choi = kraus_to_choi(&KrausSet::new(ops.clone()).unwrap()).unwrap().choi();
        assert!(max_abs(&(choi - brute_choi(&ops))) < 1e-15);
        // reset to |0⟩: PTM rows x, y, z = 0 except t_z = 1
        let ptm = ChannelRep::Choi(choi).ptm();
        let expect = Ptm::new(1., 0., 0., 0., 0., 0., 0., 0., 0., 0., 0., 0., 1., 0., 0., 0.);
        assert!(max_abs_real(&(ptm - expect)) < 1e-15);
    }

    #[test]
    fn trig_kraus_ptm_normal_form() {
        let (nu, mu) = (0.7, 4.1);
        let ptm = ChannelRep::Kraus(KrausSet::new(trig_kraus(nu, mu)).unwrap()).ptm();
        let expect = Ptm::new(
            1.,
            0.,
            0.,
            0.,
            0.,
            nu.cos(),
            0.,
            0.,
            0.,
            0.,
            mu.cos(),
            0.,
            mu.sin() * nu.sin(),
            0.,
            0.,
            mu.cos() * nu.cos(),
        );
        assert!(max_abs_real(&(ptm - expect)) < 1e-14);
    }

    #[test]
    fn sigma_x_ptm_signs() {
        let ptm = ChannelRep::Kraus(KrausSet::new(vec![pauli(1)]).unwrap()).ptm();
        assert!(max_abs_real(&(ptm - Ptm::from_diagonal(&Vector4::new(1., 1., -1., -1.)))) < 1e-15);
    }

    #[test]
    fn identity_stm_to_ptm() {
        let ptm = ChannelRep::Stm(Super4::identity()).ptm();
        assert!(max_abs_real(&(ptm - Ptm::identity())) < 1e-15);
    }

    #[test]
    fn dephasing_stm_to_ptm() {
        let g: f64 = 0.8;
        let stm = Super4::from_diagonal(&Vector4::new(ONE, c((-g).exp()), c((-g).exp()), ONE));
        let ptm = ChannelRep::Stm(stm).ptm();
        let expect = Ptm::from_diagonal(&Vector4::new(1., (-g).exp(), (-g).exp(), 1.));
        assert!(max_abs_real(&(ptm - expect)) < 1e-15);
    }

    #[test]
    fn full_dephasing_maps_plus_to_mixed() {
        let ch = ChannelRep::Ptm(Ptm::from_diagonal(&Vector4::new(1., 0., 0., 1.)));
        let out = ch.apply(&DensityMatrix::from_bloch([1.0, 0.0, 0.0]));
        assert!(max_abs(&(out.matrix() - pauli(0) * c(0.5))) < 1e-15);
    }

    #[test]
    fn choi_to_kraus_rejects_non_cp() {
        // inverse dephasing at Γ = ln 2
        let ch = ChannelRep::Ptm(Ptm::from_diagonal(&Vector4::new(1., 2., 2., 1.)));
        assert!(matches!(ch.convert(RepKind::Kraus), Err(Error::NotCompletelyPositive { .. })));
        let report = ch.check_cptp(1e-10);
        assert!(!report.cp && report.tp);
        // eigenvalues of the coherence block are 1 ± 2
        assert!((report.min_choi_eigenvalue + 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_input_rejected() {
        let mut m = Super4::identity();
        m[(0, 1)] = C64::new(f64::NAN, 0.0);
        assert!(matches!(ChannelRep::Stm(m).convert(RepKind::Ptm), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::new(pauli(0) * c(0.5)).is_ok());
        assert!(DensityMatrix::new(pauli(0)).is_err());
        assert!(DensityMatrix::new(Op2::new(c(1.5), ZERO, ZERO, c(-0.5))).is_err());
    }

    fn arb_kraus() -> impl Strategy<Value = KrausSet> {
        // random Stiefel isometry from 8 Gaussian-ish entries per operator, then orthonormalize
        proptest::collection::vec(-1.0f64..1.0, 24).prop_filter_map("degenerate", |xs| {
            let m = nalgebra::DMatrix::from_fn(6, 2, |r, col| C64::new(xs[4 * r + 2 * col], xs[4 * r + 2 * col + 1]));
            let qr = m.qr();
            let q = qr.q();
            if qr.r().diagonal().iter().any(|z| z.norm() < 1e-3) {
                return None;
            }
            let ops = (0..3).map(|j| Op2::from_fn(|r, col| q[(2 * j + r, col)])).collect();
            KrausSet::new(ops).ok()
        })
    }

    proptest! {
        #[test]
        fn representation_round_trips(k in arb_kraus()) {
            let ch = ChannelRep::Kraus(k);
            for kind in [RepKind::Choi, RepKind::Stm, RepKind::Ptm, RepKind::Kraus] {
                let converted = ch.convert(kind).unwrap();
                for target in [RepKind::Choi, RepKind::Stm, RepKind::Ptm, RepKind::Kraus] {
                    let back = converted.convert(target).unwrap();
                    for rho in basis_states() {
                        let a = ch.apply(&rho);
                        let b = back.apply(&rho);
                        prop_assert!(max_abs(&(a.matrix() - b.matrix())) < 1e-12);
                    }
                }
            }
            let ptm = ch.ptm();
            prop_assert!((ptm[(0, 0)] - 1.0).abs() < 1e-12);
            prop_assert!(ptm[(0, 1)].abs() < 1e-12 && ptm[(0, 2)].abs() < 1e-12 && ptm[(0, 3)].abs() < 1e-12);
            prop_assert!(max_abs(&(choi_kraus_gram(&ch.choi()) - pauli(0))) < 1e-12);
            let report = ch.check_cptp(1e-10);
            prop_assert!(report.is_cptp());
        }

        #[test]
        fn apply_preserves_trace_and_positivity(k in arb_kraus(), x in -0.5f64..0.5, y in -0.5f64..0.5, z in -0.5f64..0.5) {
            let rho = DensityMatrix::from_bloch([x, y, z]);
            let out = ChannelRep::Kraus(k).apply(&rho);
            prop_assert!(DensityMatrix::new(*out.matrix()).is_ok());
        }
    }
}
