//! Small dense helpers shared by the channel and mitigation code.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Matrix4, Rotation3, UnitQuaternion, Vector3};
use num_complex::Complex64;

pub type C64 = Complex64;
/// Single-qubit operator.
pub type Op2 = Matrix2<C64>;
/// Operator on two qubits, or a superoperator on one qubit.
pub type Super4 = Matrix4<C64>;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// Pauli matrix σ_i with σ_0 = I.
pub fn pauli(i: usize) -> Op2 {
    match i {
        0 => Op2::new(ONE, ZERO, ZERO, ONE),
        1 => Op2::new(ZERO, ONE, ONE, ZERO),
        2 => Op2::new(ZERO, -I, I, ZERO),
        3 => Op2::new(ONE, ZERO, ZERO, -ONE),
        _ => panic!("pauli index {i} out of range"),
    }
}

/// Matrix unit |a⟩⟨b| for i = 2a + b.
pub fn matrix_unit(i: usize) -> Op2 {
    assert!(i < 4, "matrix unit index {i} out of range");
    let mut m = Op2::zeros();
    m[(i / 2, i % 2)] = ONE;
    m
}

/// Row-major vectorization, index 2a + b holds m[(a, b)].
pub fn vec_row(m: &Op2) -> nalgebra::Vector4<C64> {
    nalgebra::Vector4::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)])
}

pub fn unvec_row(v: &nalgebra::Vector4<C64>) -> Op2 {
    Op2::new(v[0], v[1], v[2], v[3])
}

/// Kronecker product, entry (2a+c, 2b+d) = a[(a,b)] * b[(c,d)].
pub fn kron(a: &Op2, b: &Op2) -> Super4 {
    Super4::from_fn(|r, c| a[(r / 2, c / 2)] * b[(r % 2, c % 2)])
}

pub fn max_abs<const R: usize, const C: usize>(m: &nalgebra::SMatrix<C64, R, C>) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_real<const R: usize, const C: usize>(m: &nalgebra::SMatrix<f64, R, C>) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub(crate) fn is_finite<const R: usize, const C: usize>(m: &nalgebra::SMatrix<C64, R, C>) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn hermitize<const N: usize>(m: &nalgebra::SMatrix<C64, N, N>) -> nalgebra::SMatrix<C64, N, N> {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Eigendecomposition of a Hermitian matrix.
///
/// The input is hermitized first. Eigenvalues come back in descending order;
/// eigenvectors are re-orthonormalized in that order (modified Gram-Schmidt)
/// and phase-fixed so that their largest component is real and positive.
pub fn hermitian_eigen(m: &DMatrix<C64>) -> (Vec<f64>, Vec<DVector<C64>>) {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::new(h);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors: Vec<DVector<C64>> = Vec::with_capacity(n);
    for &k in &order {
        let mut v: DVector<C64> = eig.eigenvectors.column(k).into_owned();
        for u in &vectors {
            let proj = u.dotc(&v);
            v -= u * proj;
        }
        let norm = v.norm();
        if norm > 0.0 {
            v /= C64::new(norm, 0.0);
        }
        let mut lead = 0;
        for j in 1..v.len() {
            if v[j].norm() > v[lead].norm() + 1e-12 {
                lead = j;
            }
        }
        if v[lead].norm() > 0.0 {
            let phase = v[lead] / v[lead].norm();
            v *= phase.conj();
        }
        vectors.push(v);
    }
    (values, vectors)
}

pub fn to_dynamic<const N: usize>(m: &nalgebra::SMatrix<C64, N, N>) -> DMatrix<C64> {
    DMatrix::from_fn(N, N, |r, c| m[(r, c)])
}

/// Principal square root of a Hermitian positive semidefinite 2×2 matrix.
/// Negative round-off eigenvalues are clamped to zero.
pub fn psd_sqrt(m: &Op2) -> Op2 {
    let (vals, vecs) = hermitian_eigen(&to_dynamic(m));
    let mut out = Op2::zeros();
    for (lambda, v) in vals.iter().zip(&vecs) {
        let s = lambda.max(0.0).sqrt();
        if s == 0.0 {
            continue;
        }
        let v2 = nalgebra::Vector2::new(v[0], v[1]);
        out += v2 * v2.adjoint() * C64::new(s, 0.0);
    }
    out
}

/// Bloch-sphere rotation given by a unit axis and an angle in radians.
///
/// The associated unitary is `exp(-i θ/2 n·σ)`, whose Pauli transfer matrix
/// rotates Bloch vectors by +θ about `n`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AxisAngle {
    pub axis: [f64; 3],
    pub angle: f64,
}

impl AxisAngle {
    pub fn identity() -> Self {
        Self { axis: [0.0, 0.0, 1.0], angle: 0.0 }
    }

    pub fn new(axis: [f64; 3], angle: f64) -> Self {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if n == 0.0 {
            return Self::identity();
        }
        Self { axis: [axis[0] / n, axis[1] / n, axis[2] / n], angle }
    }

    pub fn x(angle: f64) -> Self {
        Self::new([1.0, 0.0, 0.0], angle)
    }

    pub fn y(angle: f64) -> Self {
        Self::new([0.0, 1.0, 0.0], angle)
    }

    pub fn z(angle: f64) -> Self {
        Self::new([0.0, 0.0, 1.0], angle)
    }

    fn quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_scaled_axis(Vector3::from(self.axis) * self.angle)
    }

    fn from_quaternion(q: &UnitQuaternion<f64>) -> Self {
        match q.axis_angle() {
            Some((axis, angle)) => Self { axis: [axis.x, axis.y, axis.z], angle },
            None => Self::identity(),
        }
    }

    /// Recover the rotation from an SO(3) matrix.
    pub fn from_rotation_matrix(m: &Matrix3<f64>) -> Self {
        let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*m));
        Self::from_quaternion(&q)
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.quaternion().to_rotation_matrix().into_inner()
    }

    pub fn unitary(&self) -> Op2 {
        let (s, c) = (self.angle / 2.0).sin_cos();
        let n_sigma = pauli(1) * C64::new(self.axis[0], 0.0)
            + pauli(2) * C64::new(self.axis[1], 0.0)
            + pauli(3) * C64::new(self.axis[2], 0.0);
        pauli(0) * C64::new(c, 0.0) - n_sigma * C64::new(0.0, s)
    }

    /// Rotation applying `first`, then `self`.
    pub fn after(&self, first: &AxisAngle) -> Self {
        Self::from_quaternion(&(self.quaternion() * first.quaternion()))
    }

    pub fn inverse(&self) -> Self {
        Self { axis: self.axis, angle: -self.angle }
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        (self.rotation_matrix() - Matrix3::identity()).amax() <= tol
    }
}

/// Pauli transfer matrix of ρ ↦ UρU†.
pub fn unitary_ptm(u: &Op2) -> Matrix4<f64> {
    Matrix4::from_fn(|i, j| 0.5 * (pauli(i) * u * pauli(j) * u.adjoint()).trace().re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn paulis_square_to_identity() {
        for i in 0..4 {
            let p = pauli(i);
            assert!(max_abs(&(p * p - pauli(0))) < 1e-15);
        }
        // σx σy = i σz
        assert!(max_abs(&(pauli(1) * pauli(2) - pauli(3) * I)) < 1e-15);
    }

    #[test]
    fn rotation_unitary_matches_matrix() {
        for rot in [AxisAngle::x(0.3), AxisAngle::y(-1.2), AxisAngle::new([1.0, 2.0, -0.5], 2.7)] {
            let ptm = unitary_ptm(&rot.unitary());
            let block = ptm.fixed_view::<3, 3>(1, 1).into_owned();
            assert!((block - rot.rotation_matrix()).amax() < 1e-12);
            let back = AxisAngle::from_rotation_matrix(&rot.rotation_matrix());
            assert!((back.rotation_matrix() - rot.rotation_matrix()).amax() < 1e-12);
        }
    }

    #[test]
    fn z_rotation_turns_x_towards_y() {
        let r = AxisAngle::z(PI / 2.0).rotation_matrix();
        let v = r * Vector3::new(1.0, 0.0, 0.0);
        assert!((v - Vector3::new(0.0, 1.0, 0.0)).amax() < 1e-15);
    }

    #[test]
    fn composition_order() {
        let a = AxisAngle::x(0.4);
        let b = AxisAngle::z(1.1);
        let ab = b.after(&a);
        let expect = b.rotation_matrix() * a.rotation_matrix();
        assert!((ab.rotation_matrix() - expect).amax() < 1e-12);
    }

    #[test]
    fn eigen_is_sorted_and_reconstructs() {
        let m = DMatrix::from_fn(4, 4, |r, c| {
            C64::new((r + 2 * c) as f64 * 0.1, if r == c { 0.0 } else { (r as f64 - c as f64) * 0.2 })
        });
        let h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        let (vals, vecs) = hermitian_eigen(&h);
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        let mut rec = DMatrix::<C64>::zeros(4, 4);
        for (l, v) in vals.iter().zip(&vecs) {
            rec += v * v.adjoint() * C64::new(*l, 0.0);
        }
        assert!((rec - h).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let a = Op2::new(C64::new(2.0, 0.0), C64::new(0.5, 0.5), C64::new(0.5, -0.5), C64::new(1.0, 0.0));
        let s = psd_sqrt(&a);
        assert!(max_abs(&(s * s - a)) < 1e-12);
        assert!(max_abs(&(s - s.adjoint())) < 1e-14);
    }
}
