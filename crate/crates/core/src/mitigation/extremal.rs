//! Extremal split and two-Kraus realization of CPTP maps.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix2, Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::qmatrix::{
    hermitian_eigen, max_abs, max_abs_real, to_dynamic, AxisAngle, ChannelRep, KrausSet, Op2, Ptm, Super4, C64, ZERO,
};

/// Singular values of the contraction within this distance of 1 count as unitary.
const UNITARY_TOL: f64 = 1e-10;
/// Support threshold for the blocks `A` and `I − A` of the adjoint Choi matrix.
const SUPPORT_TOL: f64 = 1e-12;
/// Largest trigonometric-form residual accepted by [`realize_extremal`].
const FIT_TOL: f64 = 1e-8;

/// Circuit data for one extremal map: `V · K · W` with rotations `V`, `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtremalRealization {
    /// Rotation applied before the Kraus pair.
    pub pre_rotation: AxisAngle,
    /// Rotation applied after the Kraus pair.
    pub post_rotation: AxisAngle,
    pub nu: f64,
    pub mu: f64,
    /// `{K_A, K_B}` in trigonometric normal form.
    pub kraus: KrausSet,
    pub needs_ancilla: bool,
}

/// Kraus pair of the trigonometric normal form.
pub fn trig_kraus(nu: f64, mu: f64) -> [Op2; 2] {
    let c = |x: f64| C64::new(x, 0.0);
    [
        Op2::new(c(((mu - nu) / 2.0).cos()), ZERO, ZERO, c(((mu + nu) / 2.0).cos())),
        Op2::new(ZERO, c(((mu + nu) / 2.0).sin()), c(((mu - nu) / 2.0).sin()), ZERO),
    ]
}

fn trig_ptm(nu: f64, mu: f64) -> Ptm {
    let mut m = Ptm::zeros();
    m[(0, 0)] = 1.0;
    m[(1, 1)] = nu.cos();
    m[(2, 2)] = mu.cos();
    m[(3, 3)] = mu.cos() * nu.cos();
    m[(3, 0)] = mu.sin() * nu.sin();
    m
}

impl ExtremalRealization {
    /// Single-unitary circuit.
    pub fn unitary(rotation: AxisAngle) -> Self {
        let [ka, kb] = trig_kraus(0.0, 0.0);
        Self {
            pre_rotation: AxisAngle::identity(),
            post_rotation: rotation,
            nu: 0.0,
            mu: 0.0,
            kraus: KrausSet::new(vec![ka, kb]).expect("identity pair is complete"),
            needs_ancilla: false,
        }
    }

    /// Normal-form pair without frame rotations.
    pub fn normal_form(nu: f64, mu: f64) -> Self {
        let [ka, kb] = trig_kraus(nu, mu);
        let needs_ancilla = max_abs(&kb) > 1e-12;
        Self {
            pre_rotation: AxisAngle::identity(),
            post_rotation: AxisAngle::identity(),
            nu,
            mu,
            kraus: KrausSet::new(vec![ka, kb]).expect("trigonometric pair is complete"),
            needs_ancilla,
        }
    }

    /// Kraus operators including the frame rotations. `K_B` is dropped when
    /// the map is unitary.
    pub fn full_kraus(&self) -> Vec<Op2> {
        let v = self.post_rotation.unitary();
        let w = self.pre_rotation.unitary();
        let ops = self.kraus.operators();
        let n = if self.needs_ancilla { 2 } else { 1 };
        ops[..n].iter().map(|k| v * k * w).collect()
    }

    pub fn channel(&self) -> ChannelRep {
        ChannelRep::Kraus(KrausSet::new(self.full_kraus()).expect("rotated trigonometric pair is complete"))
    }

    pub fn ptm(&self) -> Ptm {
        self.channel().ptm()
    }

    /// PTM of the normal-form pair without rotations.
    pub fn normal_ptm(&self) -> Ptm {
        trig_ptm(self.nu, self.mu)
    }

    pub fn apply(&self, rho: &Op2) -> Op2 {
        self.full_kraus().iter().map(|k| k * rho * k.adjoint()).sum()
    }
}

fn block(m: &Super4, r: usize, c: usize) -> Op2 {
    m.fixed_view::<2, 2>(2 * r, 2 * c).into_owned()
}

fn from_blocks(a: &Op2, x: &Op2, b: &Op2) -> Super4 {
    let mut m = Super4::zeros();
    m.fixed_view_mut::<2, 2>(0, 0).copy_from(a);
    m.fixed_view_mut::<2, 2>(0, 2).copy_from(x);
    m.fixed_view_mut::<2, 2>(2, 0).copy_from(&x.adjoint());
    m.fixed_view_mut::<2, 2>(2, 2).copy_from(b);
    m
}

/// Split a CPTP map into at most two maps whose average is the input.
///
/// The adjoint map's Choi matrix is written as `[[A, √A R √B], [·, B]]`. When
/// the contraction `R` is unitary on the supports of `A` and `B` the map is
/// returned alone; otherwise `R = V cos(θ) W†` is replaced by
/// `V e^{±iθ} W†`, giving two maps of Kraus rank at most two.
pub fn extremal_split(c: &ChannelRep) -> Result<Vec<ChannelRep>> {
    let adj_choi = ChannelRep::Stm(c.stm().adjoint()).choi();
    let a = block(&adj_choi, 0, 0);
    let x = block(&adj_choi, 0, 1);
    let b = block(&adj_choi, 1, 1);
    let (a_vals, basis) = hermitian_eigen(&to_dynamic(&a));
    let b_vals: Vec<f64> = basis.iter().map(|u| u.dotc(&(to_dynamic(&b) * u)).re).collect();
    let rows: Vec<usize> = (0..2).filter(|&k| a_vals[k] > SUPPORT_TOL).collect();
    let cols: Vec<usize> = (0..2).filter(|&k| b_vals[k] > SUPPORT_TOL).collect();
    if rows.is_empty() || cols.is_empty() {
        return Ok(vec![c.clone()]);
    }
    let xd = to_dynamic(&x);
    let r = DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
        let (k, l) = (rows[i], cols[j]);
        let u = &basis[k];
        let w = &basis[l];
        u.dotc(&(&xd * w)) / C64::new((a_vals[k] * b_vals[l]).sqrt(), 0.0)
    });
    let svd = r.svd(true, true);
    let sigma = &svd.singular_values;
    if sigma.iter().all(|s| (s - 1.0).abs() <= UNITARY_TOL) {
        return Ok(vec![c.clone()]);
    }
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V†");
    let halves = [1.0, -1.0].map(|sign| {
        let phases = DMatrix::from_diagonal(&sigma.map(|s| {
            let theta = s.clamp(-1.0, 1.0).acos();
            C64::from_polar(1.0, sign * theta)
        }));
        let unitary = &u * phases * &vt;
        let mut xk = Op2::zeros();
        for (i, &k) in rows.iter().enumerate() {
            for (j, &l) in cols.iter().enumerate() {
                let scale = C64::new((a_vals[k] * b_vals[l]).sqrt(), 0.0) * unitary[(i, j)];
                let uk = nalgebra::Vector2::new(basis[k][0], basis[k][1]);
                let ul = nalgebra::Vector2::new(basis[l][0], basis[l][1]);
                xk += uk * ul.adjoint() * scale;
            }
        }
        let half_adj = ChannelRep::Choi(from_blocks(&a, &xk, &b));
        ChannelRep::Stm(half_adj.stm().adjoint())
    });
    Ok(halves.into())
}

fn complete_basis(v: &Vector3<f64>) -> Matrix3<f64> {
    let v = v.normalize();
    let mut axis = 0;
    for k in 1..3 {
        if v[k].abs() < v[axis].abs() {
            axis = k;
        }
    }
    let e = Vector3::ith(axis, 1.0);
    let q1 = (e - v * v.dot(&e)).normalize();
    let q2 = v.cross(&q1);
    Matrix3::from_columns(&[q1, q2, v])
}

fn make_proper(mut m: Matrix3<f64>) -> Matrix3<f64> {
    if m.determinant() < 0.0 {
        let col = -m.column(2);
        m.set_column(2, &col);
    }
    m
}

/// Frames `(V, W)` from the singular value decomposition of `T`.
fn svd_frame(t: &Matrix3<f64>) -> (Matrix3<f64>, Matrix3<f64>) {
    let svd = t.svd(true, true);
    let v = svd.u.expect("requested U");
    let w = svd.v_t.expect("requested Vᵀ").transpose();
    (make_proper(v), make_proper(w))
}

/// Frames with the third left axis along the affine part `t`, which keeps the
/// normal form reachable when singular values are degenerate.
fn aligned_frame(t_mat: &Matrix3<f64>, t_vec: &Vector3<f64>) -> (Matrix3<f64>, Matrix3<f64>) {
    let q = complete_basis(t_vec);
    let tq = q.transpose() * t_mat;
    let r3 = tq.row(2).transpose();
    let m2 = tq.fixed_view::<2, 3>(0, 0).into_owned();
    let w3 = if r3.norm() > 1e-9 {
        r3.normalize()
    } else {
        let eig = (m2.transpose() * m2).symmetric_eigen();
        eig.eigenvectors.column(eig.eigenvalues.imin()).into_owned()
    };
    let p = complete_basis(&w3);
    let b2: Matrix2<f64> = m2 * p.fixed_view::<3, 2>(0, 0);
    let svd = b2.svd(true, true);
    let mut ub = svd.u.expect("requested U");
    let mut vb = svd.v_t.expect("requested Vᵀ").transpose();
    if ub.determinant() < 0.0 {
        let col = -ub.column(1);
        ub.set_column(1, &col);
    }
    if vb.determinant() < 0.0 {
        let col = -vb.column(1);
        vb.set_column(1, &col);
    }
    let embed = |m: &Matrix2<f64>| {
        let mut out = Matrix3::identity();
        out.fixed_view_mut::<2, 2>(0, 0).copy_from(m);
        out
    };
    (q * embed(&ub), p * embed(&vb))
}

/// Proper rotations mapping coordinate axes onto coordinate axes.
fn axis_placements() -> Vec<Matrix3<f64>> {
    let perms = [[0, 1, 2], [1, 2, 0], [2, 0, 1], [1, 0, 2], [0, 2, 1], [2, 1, 0]];
    perms
        .iter()
        .map(|p| {
            let mut m = Matrix3::zeros();
            for (col, &row) in p.iter().enumerate() {
                m[(row, col)] = 1.0;
            }
            make_proper(m)
        })
        .collect()
}

const FLIPS: [[f64; 3]; 4] = [[1., 1., 1.], [-1., -1., 1.], [-1., 1., -1.], [1., -1., -1.]];

fn residuals(nu: f64, mu: f64, d: &[f64; 4]) -> [f64; 4] {
    let (sn, cn) = nu.sin_cos();
    let (sm, cm) = mu.sin_cos();
    [cn - d[0], cm - d[1], cm * cn - d[2], sm * sn - d[3]]
}

/// Fit (ν, μ) to `d = (T̃₁₁, T̃₂₂, T̃₃₃, t̃_z)` by damped Gauss-Newton from the
/// arccos estimate.
fn fit_angles(d: &[f64; 4]) -> (f64, f64) {
    let nu0 = d[0].clamp(-1.0, 1.0).acos();
    let mut mu0 = d[1].clamp(-1.0, 1.0).acos();
    if nu0.sin() > 1e-9 && d[3] < 0.0 {
        mu0 = 2.0 * PI - mu0;
    }
    let norm = |r: &[f64; 4]| r.iter().map(|x| x * x).sum::<f64>();
    let (mut nu, mut mu) = (nu0, mu0);
    let mut best = norm(&residuals(nu, mu, d));
    for _ in 0..30 {
        if best < 1e-32 {
            break;
        }
        let r = residuals(nu, mu, d);
        let (sn, cn) = nu.sin_cos();
        let (sm, cm) = mu.sin_cos();
        let jac = [[-sn, 0.0], [0.0, -sm], [-cm * sn, -sm * cn], [sm * cn, cm * sn]];
        let mut jtj = Matrix2::<f64>::zeros();
        let mut jtr = nalgebra::Vector2::<f64>::zeros();
        for (row, ri) in jac.iter().zip(r) {
            for a in 0..2 {
                jtr[a] += row[a] * ri;
                for b in 0..2 {
                    jtj[(a, b)] += row[a] * row[b];
                }
            }
        }
        jtj += Matrix2::identity() * 1e-14;
        let Some(step) = jtj.try_inverse().map(|inv| -(inv * jtr)) else { break };
        let (nn, nm) = (nu + step[0], mu + step[1]);
        let val = norm(&residuals(nn, nm, d));
        if val < best {
            best = val;
            nu = nn;
            mu = nm;
        } else {
            break;
        }
    }
    // (ν, μ) and (−ν, −μ) give the same map
    nu = nu.rem_euclid(2.0 * PI);
    if nu >= PI {
        nu = 2.0 * PI - nu;
        mu = -mu;
    }
    (nu, mu.rem_euclid(2.0 * PI))
}

struct Candidate {
    residual: f64,
    kb: f64,
    nu: f64,
    mu: f64,
    v: Matrix3<f64>,
    w: Matrix3<f64>,
}

fn realize_unitary(t_mat: &Matrix3<f64>, ptm: &Ptm) -> Result<ExtremalRealization> {
    let svd = t_mat.svd(true, true);
    let rotation = svd.u.expect("requested U") * svd.v_t.expect("requested Vᵀ");
    let realization = ExtremalRealization {
        pre_rotation: AxisAngle::identity(),
        post_rotation: AxisAngle::from_rotation_matrix(&rotation),
        nu: 0.0,
        mu: 0.0,
        kraus: KrausSet::new(trig_kraus(0.0, 0.0).to_vec())?,
        needs_ancilla: false,
    };
    let mismatch = max_abs_real(&(realization.ptm() - ptm));
    if mismatch > FIT_TOL {
        return Err(Error::NotExtremal { residual: mismatch });
    }
    Ok(realization)
}

/// Bring an extremal map to trigonometric normal form and read off its circuit.
pub fn realize_extremal(e: &ChannelRep) -> Result<ExtremalRealization> {
    let ptm = e.ptm();
    let t_mat: Matrix3<f64> = ptm.fixed_view::<3, 3>(1, 1).into_owned();
    let t_vec: Vector3<f64> = ptm.fixed_view::<3, 1>(1, 0).into_owned();
    if (t_mat.transpose() * t_mat - Matrix3::identity()).amax() <= UNITARY_TOL
        && t_vec.amax() <= UNITARY_TOL
        && t_mat.determinant() > 0.0
    {
        return realize_unitary(&t_mat, &ptm);
    }
    let mut frames = vec![svd_frame(&t_mat)];
    if t_vec.norm() > 1e-12 {
        frames.push(aligned_frame(&t_mat, &t_vec));
    }
    let placements = axis_placements();
    let mut best: Option<Candidate> = None;
    'search: for (v0, w0) in &frames {
        for place in &placements {
            for fv in FLIPS {
                for fw in FLIPS {
                    let v = v0 * place * Matrix3::from_diagonal(&Vector3::from(fv));
                    let w = w0 * place * Matrix3::from_diagonal(&Vector3::from(fw));
                    let tt = v.transpose() * t_mat * w;
                    let tv = v.transpose() * t_vec;
                    let d = [tt[(0, 0)], tt[(1, 1)], tt[(2, 2)], tv[2]];
                    let (nu, mu) = fit_angles(&d);
                    let mut full = Ptm::zeros();
                    full[(0, 0)] = 1.0;
                    full.fixed_view_mut::<3, 3>(1, 1).copy_from(&tt);
                    full.fixed_view_mut::<3, 1>(1, 0).copy_from(&tv);
                    let residual = max_abs_real(&(full - trig_ptm(nu, mu)));
                    let kb = max_abs(&trig_kraus(nu, mu)[1]);
                    let better = match &best {
                        None => true,
                        Some(b) => {
                            residual < b.residual - 1e-13 || (residual <= b.residual + 1e-13 && kb < b.kb - 1e-12)
                        }
                    };
                    if better {
                        best = Some(Candidate { residual, kb, nu, mu, v, w });
                    }
                    if let Some(b) = &best {
                        if b.residual < 1e-14 && b.kb < 1e-14 {
                            break 'search;
                        }
                    }
                }
            }
        }
    }
    let best = best.expect("at least one candidate");
    if best.residual > FIT_TOL {
        return Err(Error::NotExtremal { residual: best.residual });
    }
    let [ka, kb] = trig_kraus(best.nu, best.mu);
    let needs_ancilla = max_abs(&kb) > 1e-12;
    let kraus = KrausSet::new(vec![ka, kb])?;
    let realization = ExtremalRealization {
        pre_rotation: AxisAngle::from_rotation_matrix(&best.w.transpose()),
        post_rotation: AxisAngle::from_rotation_matrix(&best.v),
        nu: best.nu,
        mu: best.mu,
        kraus,
        needs_ancilla,
    };
    let mismatch = max_abs_real(&(realization.ptm() - ptm));
    if mismatch > FIT_TOL {
        return Err(Error::NotExtremal { residual: mismatch });
    }
    Ok(realization)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmatrix::{pauli, unitary_ptm, ONE};
    use nalgebra::Vector4;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn average(maps: &[ChannelRep]) -> Ptm {
        maps.iter().map(|m| m.ptm()).sum::<Ptm>() / maps.len() as f64
    }

    #[test]
    fn unitary_is_already_extremal() {
        let u = AxisAngle::new([0.3, -0.2, 0.9], 1.3).unitary();
        let ch = ChannelRep::unitary(u);
        let parts = extremal_split(&ch).unwrap();
        assert_eq!(parts.len(), 1);
        let real = realize_extremal(&parts[0]).unwrap();
        assert!(!real.needs_ancilla);
        assert!(max_abs_real(&(real.ptm() - unitary_ptm(&u))) < 1e-12);
    }

    #[test]
    fn identity_normal_form() {
        let real = realize_extremal(&ChannelRep::identity()).unwrap();
        assert!(real.nu.abs() < 1e-12 && real.mu.abs() < 1e-12);
        assert!(!real.needs_ancilla);
        assert!(max_abs(&(real.kraus.operators()[0] - pauli(0))) < 1e-12);
        assert!(max_abs(&real.kraus.operators()[1]) < 1e-12);
    }

    #[test]
    fn reset_is_extremal_swap_form() {
        // reset to |0⟩: {(I + σz)/2, σ₊}
        let k_a = Op2::new(ONE, ZERO, ZERO, ZERO);
        let k_b = Op2::new(ZERO, ONE, ZERO, ZERO);
        let ch = ChannelRep::Kraus(KrausSet::new(vec![k_a, k_b]).unwrap());
        assert_eq!(extremal_split(&ch).unwrap().len(), 1);
        let real = realize_extremal(&ch).unwrap();
        assert!(real.needs_ancilla);
        assert!((real.nu - FRAC_PI_2).abs() < 1e-9 && (real.mu - FRAC_PI_2).abs() < 1e-9);
        assert!(max_abs_real(&(real.ptm() - ch.ptm())) < 1e-12);
        assert!(max_abs(&(real.kraus.operators()[0] - k_a)) < 1e-12);
        assert!(max_abs(&(real.kraus.operators()[1] - k_b)) < 1e-12);
    }

    #[test]
    fn partial_dephasing_splits_into_z_rotations() {
        let g: f64 = 0.6;
        let theta = (-g / 2.0).exp().acos();
        let ch = ChannelRep::Ptm(Ptm::from_diagonal(&Vector4::new(1.0, (-g / 2.0).exp(), (-g / 2.0).exp(), 1.0)));
        let parts = extremal_split(&ch).unwrap();
        assert_eq!(parts.len(), 2);
        assert!(max_abs_real(&(average(&parts) - ch.ptm())) < 1e-12);
        let mut angles = Vec::new();
        for part in &parts {
            let real = realize_extremal(part).unwrap();
            assert!(!real.needs_ancilla);
            let rot = AxisAngle::z(theta);
            let fits =
                [rot, rot.inverse()].iter().any(|r| max_abs_real(&(part.ptm() - unitary_ptm(&r.unitary()))) < 1e-10);
            assert!(fits);
            angles.push(part.ptm()[(1, 2)].signum());
        }
        assert_ne!(angles[0], angles[1]);
    }

    #[test]
    fn bit_flip_mixture_is_realized_directly() {
        let ch = ChannelRep::Ptm(Ptm::from_diagonal(&Vector4::new(1.0, 1.0, 0.0, 0.0)));
        let parts = extremal_split(&ch).unwrap();
        assert_eq!(parts.len(), 1);
        let real = realize_extremal(&parts[0]).unwrap();
        assert!(max_abs_real(&(real.ptm() - ch.ptm())) < 1e-12);
    }

    #[test]
    fn depolarizing_is_not_extremal() {
        let ch = ChannelRep::Ptm(Ptm::from_diagonal(&Vector4::new(1.0, 0.5, 0.5, 0.5)));
        assert!(matches!(realize_extremal(&ch), Err(Error::NotExtremal { .. })));
    }

    #[test]
    fn trig_pairs_round_trip() {
        for (nu, mu) in [(0.3, 1.1), (2.0, 4.0), (FRAC_PI_2, 0.2), (0.0, 2.5), (1.0, 6.0)] {
            let [ka, kb] = trig_kraus(nu, mu);
            let rot_v = AxisAngle::new([1.0, 2.0, 3.0], 0.7).unitary();
            let rot_w = AxisAngle::new([-1.0, 0.5, 0.2], 2.1).unitary();
            let ops = vec![rot_v * ka * rot_w, rot_v * kb * rot_w];
            let ch = ChannelRep::Kraus(KrausSet::new(ops).unwrap());
            let real = realize_extremal(&ch).unwrap();
            assert!(max_abs_real(&(real.ptm() - ch.ptm())) < 1e-10, "{nu} {mu}");
            let gram: Op2 = real.kraus.operators().iter().map(|k| k.adjoint() * k).sum();
            assert!(max_abs(&(gram - pauli(0))) < 1e-12);
        }
    }

    fn arb_cptp() -> impl Strategy<Value = ChannelRep> {
        proptest::collection::vec(-1.0f64..1.0, 32).prop_filter_map("degenerate", |xs| {
            let m = DMatrix::from_fn(8, 2, |r, c| C64::new(xs[4 * r + 2 * c], xs[4 * r + 2 * c + 1]));
            let qr = m.qr();
            if qr.r().diagonal().iter().any(|z| z.norm() < 1e-3) {
                return None;
            }
            let q = qr.q();
            let ops = (0..4).map(|j| Op2::from_fn(|r, c| q[(2 * j + r, c)])).collect();
            KrausSet::new(ops).ok().map(ChannelRep::Kraus)
        })
    }

    proptest! {
        #[test]
        fn halves_are_cptp_and_realizable(ch in arb_cptp()) {
            let parts = extremal_split(&ch).unwrap();
            prop_assert!(max_abs_real(&(average(&parts) - ch.ptm())) < 1e-9);
            for part in &parts {
                prop_assert!(part.check_cptp(1e-9).is_cptp());
                let real = realize_extremal(part).unwrap();
                prop_assert!(max_abs_real(&(real.ptm() - part.ptm())) < 1e-9);
            }
        }
    }
}
