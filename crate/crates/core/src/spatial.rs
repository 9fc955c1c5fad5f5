//! Homogeneous transforms, adjoints, spatial cross operators and screw exponentials.
//!
//! Twists are ordered (angular, linear). Everything is generic over [`Scalar`] so
//! dual numbers flow through unchanged.

use crate::scalar::Scalar;

pub type V3<S> = [S; 3];
pub type M3<S> = [[S; 3]; 3];
pub type V6<S> = [S; 6];
pub type M6<S> = [[S; 6]; 6];

#[inline]
pub fn v3_zero<S: Scalar>() -> V3<S> {
    [S::zero(); 3]
}

#[inline]
pub fn v6_zero<S: Scalar>() -> V6<S> {
    [S::zero(); 6]
}

#[inline]
pub fn m3_zero<S: Scalar>() -> M3<S> {
    [[S::zero(); 3]; 3]
}

#[inline]
pub fn m6_zero<S: Scalar>() -> M6<S> {
    [[S::zero(); 6]; 6]
}

pub fn m3_identity<S: Scalar>() -> M3<S> {
    let mut m = m3_zero();
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = S::one();
    }
    m
}

pub fn m6_identity<S: Scalar>() -> M6<S> {
    let mut m = m6_zero();
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = S::one();
    }
    m
}

pub fn lift3<S: Scalar>(v: &[f64; 3]) -> V3<S> {
    [S::cst(v[0]), S::cst(v[1]), S::cst(v[2])]
}

pub fn lift6<S: Scalar>(v: &[f64; 6]) -> V6<S> {
    std::array::from_fn(|i| S::cst(v[i]))
}

pub fn lift_m6<S: Scalar>(m: &M6<f64>) -> M6<S> {
    std::array::from_fn(|i| std::array::from_fn(|j| S::cst(m[i][j])))
}

pub fn lift_m3<S: Scalar>(m: &M3<f64>) -> M3<S> {
    std::array::from_fn(|i| std::array::from_fn(|j| S::cst(m[i][j])))
}

#[inline]
pub fn add3<S: Scalar>(a: &V3<S>, b: &V3<S>) -> V3<S> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub3<S: Scalar>(a: &V3<S>, b: &V3<S>) -> V3<S> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale3<S: Scalar>(a: &V3<S>, s: S) -> V3<S> {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot3<S: Scalar>(a: &V3<S>, b: &V3<S>) -> S {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross<S: Scalar>(a: &V3<S>, b: &V3<S>) -> V3<S> {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[inline]
pub fn m3_vec<S: Scalar>(m: &M3<S>, v: &V3<S>) -> V3<S> {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

#[inline]
pub fn m3t_vec<S: Scalar>(m: &M3<S>, v: &V3<S>) -> V3<S> {
    [
        m[0][0] * v[0] + m[1][0] * v[1] + m[2][0] * v[2],
        m[0][1] * v[0] + m[1][1] * v[1] + m[2][1] * v[2],
        m[0][2] * v[0] + m[1][2] * v[1] + m[2][2] * v[2],
    ]
}

pub fn m3_mul<S: Scalar>(a: &M3<S>, b: &M3<S>) -> M3<S> {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j]))
}

pub fn m3_transpose<S: Scalar>(a: &M3<S>) -> M3<S> {
    std::array::from_fn(|i| std::array::from_fn(|j| a[j][i]))
}

pub fn m3_add<S: Scalar>(a: &M3<S>, b: &M3<S>) -> M3<S> {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][j] + b[i][j]))
}

pub fn m3_scale<S: Scalar>(a: &M3<S>, s: S) -> M3<S> {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][j] * s))
}

pub fn m3_det<S: Scalar>(m: &M3<S>) -> S {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Inverse of a 3×3 matrix by cofactors. Returns `None` when |det| falls below `tiny`.
pub fn m3_inverse<S: Scalar>(m: &M3<S>, tiny: f64) -> Option<M3<S>> {
    let det = m3_det(m);
    if det.re().abs() <= tiny || !det.re().is_finite() {
        return None;
    }
    let c = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let adj = [
        [c(1, 2, 1, 2), -c(0, 2, 1, 2), c(0, 1, 1, 2)],
        [-c(1, 2, 0, 2), c(0, 2, 0, 2), -c(0, 1, 0, 2)],
        [c(1, 2, 0, 1), -c(0, 2, 0, 1), c(0, 1, 0, 1)],
    ];
    let inv = det.recip();
    Some(m3_scale(&adj, inv))
}

#[inline]
pub fn m6_vec<S: Scalar>(m: &M6<S>, v: &V6<S>) -> V6<S> {
    std::array::from_fn(|i| {
        let r = &m[i];
        r[0] * v[0] + r[1] * v[1] + r[2] * v[2] + r[3] * v[3] + r[4] * v[4] + r[5] * v[5]
    })
}

#[inline]
pub fn m6t_vec<S: Scalar>(m: &M6<S>, v: &V6<S>) -> V6<S> {
    std::array::from_fn(|j| m[0][j] * v[0] + m[1][j] * v[1] + m[2][j] * v[2] + m[3][j] * v[3] + m[4][j] * v[4] + m[5][j] * v[5])
}

pub fn m6_mul<S: Scalar>(a: &M6<S>, b: &M6<S>) -> M6<S> {
    let mut out = m6_zero();
    for i in 0..6 {
        for k in 0..6 {
            let aik = a[i][k];
            for j in 0..6 {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

pub fn m6_transpose<S: Scalar>(a: &M6<S>) -> M6<S> {
    std::array::from_fn(|i| std::array::from_fn(|j| a[j][i]))
}

pub fn m6_add<S: Scalar>(a: &M6<S>, b: &M6<S>) -> M6<S> {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][j] + b[i][j]))
}

#[inline]
pub fn add6<S: Scalar>(a: &V6<S>, b: &V6<S>) -> V6<S> {
    std::array::from_fn(|i| a[i] + b[i])
}

#[inline]
pub fn sub6<S: Scalar>(a: &V6<S>, b: &V6<S>) -> V6<S> {
    std::array::from_fn(|i| a[i] - b[i])
}

#[inline]
pub fn scale6<S: Scalar>(a: &V6<S>, s: S) -> V6<S> {
    std::array::from_fn(|i| a[i] * s)
}

#[inline]
pub fn dot6<S: Scalar>(a: &V6<S>, b: &V6<S>) -> S {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3] + a[4] * b[4] + a[5] * b[5]
}

/// Skew-symmetric matrix with `cross3(a)·b = a × b`.
pub fn cross3<S: Scalar>(a: &V3<S>) -> M3<S> {
    let z = S::zero();
    [[z, -a[2], a[1]], [a[2], z, -a[0]], [-a[1], a[0], z]]
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Twist<S> {
    pub angular: V3<S>,
    pub linear: V3<S>,
}

impl<S: Scalar> Twist<S> {
    pub fn new(angular: V3<S>, linear: V3<S>) -> Self {
        Twist { angular, linear }
    }
    pub fn to_array(&self) -> V6<S> {
        [self.angular[0], self.angular[1], self.angular[2], self.linear[0], self.linear[1], self.linear[2]]
    }
    pub fn from_array(v: &V6<S>) -> Self {
        Twist { angular: [v[0], v[1], v[2]], linear: [v[3], v[4], v[5]] }
    }
}

/// Screw axis (angular, linear). Revolute axes have a unit angular part.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScrewAxis<S> {
    pub angular: V3<S>,
    pub linear: V3<S>,
}

impl<S: Scalar> ScrewAxis<S> {
    pub fn new(angular: V3<S>, linear: V3<S>) -> Self {
        ScrewAxis { angular, linear }
    }
    /// Pure rotation about a unit axis through the origin.
    pub fn revolute(axis: V3<S>) -> Self {
        ScrewAxis { angular: axis, linear: v3_zero() }
    }
    pub fn to_array(&self) -> V6<S> {
        Twist { angular: self.angular, linear: self.linear }.to_array()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpatialTransform<S> {
    pub rotation: M3<S>,
    pub translation: V3<S>,
}

impl<S: Scalar> SpatialTransform<S> {
    pub fn identity() -> Self {
        SpatialTransform { rotation: m3_identity(), translation: v3_zero() }
    }

    pub fn from_translation(p: V3<S>) -> Self {
        SpatialTransform { rotation: m3_identity(), translation: p }
    }

    pub fn new(rotation: M3<S>, translation: V3<S>) -> Self {
        SpatialTransform { rotation, translation }
    }

    /// Rotation by `theta` about z followed by translation `p`.
    pub fn rot_z(theta: S, p: V3<S>) -> Self {
        let (s, c) = (theta.sin(), theta.cos());
        let z = S::zero();
        let o = S::one();
        SpatialTransform { rotation: [[c, -s, z], [s, c, z], [z, z, o]], translation: p }
    }

    pub fn lift(t: &SpatialTransform<f64>) -> Self {
        SpatialTransform { rotation: lift_m3(&t.rotation), translation: lift3(&t.translation) }
    }

    pub fn value(&self) -> SpatialTransform<f64> {
        SpatialTransform {
            rotation: std::array::from_fn(|i| std::array::from_fn(|j| self.rotation[i][j].re())),
            translation: std::array::from_fn(|i| self.translation[i].re()),
        }
    }

    /// Composition `self · other`.
    pub fn compose(&self, other: &Self) -> Self {
        SpatialTransform {
            rotation: m3_mul(&self.rotation, &other.rotation),
            translation: add3(&m3_vec(&self.rotation, &other.translation), &self.translation),
        }
    }

    pub fn inverse(&self) -> Self {
        let rt = m3_transpose(&self.rotation);
        let p = m3_vec(&rt, &self.translation);
        SpatialTransform { rotation: rt, translation: [-p[0], -p[1], -p[2]] }
    }

    pub fn apply_point(&self, x: &V3<S>) -> V3<S> {
        add3(&m3_vec(&self.rotation, x), &self.translation)
    }

    /// 6×6 adjoint `[[R, 0], [p×R, R]]`.
    pub fn adjoint(&self) -> M6<S> {
        let r = &self.rotation;
        let pr = m3_mul(&cross3(&self.translation), r);
        let mut m = m6_zero();
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = r[i][j];
                m[i + 3][j + 3] = r[i][j];
                m[i + 3][j] = pr[i][j];
            }
        }
        m
    }

    /// `Ad_T · v` without forming the matrix.
    #[inline]
    pub fn ad_apply(&self, v: &V6<S>) -> V6<S> {
        let w = m3_vec(&self.rotation, &[v[0], v[1], v[2]]);
        let l = m3_vec(&self.rotation, &[v[3], v[4], v[5]]);
        let pw = cross(&self.translation, &w);
        [w[0], w[1], w[2], pw[0] + l[0], pw[1] + l[1], pw[2] + l[2]]
    }

    /// `Ad_Tᵀ · f` for a wrench `f = (moment, force)`.
    #[inline]
    pub fn ad_transpose_apply(&self, f: &V6<S>) -> V6<S> {
        let m = [f[0], f[1], f[2]];
        let fo = [f[3], f[4], f[5]];
        let pf = cross(&self.translation, &fo);
        let a = m3t_vec(&self.rotation, &sub3(&m, &pf));
        let b = m3t_vec(&self.rotation, &fo);
        [a[0], a[1], a[2], b[0], b[1], b[2]]
    }
}

/// Spatial cross operator `[[ω×, 0], [v×, ω×]]`.
pub fn spatial_cross<S: Scalar>(v: &Twist<S>) -> M6<S> {
    let w = cross3(&v.angular);
    let l = cross3(&v.linear);
    let mut m = m6_zero();
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = w[i][j];
            m[i + 3][j + 3] = w[i][j];
            m[i + 3][j] = l[i][j];
        }
    }
    m
}

/// `ad_V · x` for twists stored as arrays.
#[inline]
pub fn ad_apply<S: Scalar>(v: &V6<S>, x: &V6<S>) -> V6<S> {
    let w = [v[0], v[1], v[2]];
    let l = [v[3], v[4], v[5]];
    let xw = [x[0], x[1], x[2]];
    let xl = [x[3], x[4], x[5]];
    let a = cross(&w, &xw);
    let b = add3(&cross(&l, &xw), &cross(&w, &xl));
    [a[0], a[1], a[2], b[0], b[1], b[2]]
}

/// `ad_Vᵀ · f`.
#[inline]
pub fn ad_transpose_apply<S: Scalar>(v: &V6<S>, f: &V6<S>) -> V6<S> {
    // (ω×)ᵀ = −ω×
    let w = [v[0], v[1], v[2]];
    let l = [v[3], v[4], v[5]];
    let fm = [f[0], f[1], f[2]];
    let ff = [f[3], f[4], f[5]];
    let a = add3(&cross(&fm, &w), &cross(&ff, &l));
    let b = cross(&ff, &w);
    [a[0], a[1], a[2], b[0], b[1], b[2]]
}

/// Screw exponential `exp([S]θ)` in closed (Rodrigues) form. The angular part's
/// norm is folded into θ.
pub fn screw_exp<S: Scalar>(s: &ScrewAxis<S>, theta: S) -> SpatialTransform<S> {
    let mut w = s.angular;
    let mut v = s.linear;
    let mut theta = theta;
    let wn = dot3(&w, &w).re();
    if wn == 0.0 {
        return SpatialTransform::from_translation(scale3(&v, theta));
    }
    // normalizing unconditionally keeps derivatives smooth across the unit sphere
    let norm = dot3(&w, &w).sqrt();
    let inv = norm.recip();
    w = scale3(&w, inv);
    v = scale3(&v, inv);
    theta *= norm;
    let wx = cross3(&w);
    let wx2 = m3_mul(&wx, &wx);
    let (st, ct) = (theta.sin(), theta.cos());
    let one_m_c = S::one() - ct;
    let mut r = m3_identity();
    let mut g = m3_zero();
    for i in 0..3 {
        for j in 0..3 {
            r[i][j] += wx[i][j] * st + wx2[i][j] * one_m_c;
            g[i][j] = wx[i][j] * one_m_c + wx2[i][j] * (theta - st);
        }
        g[i][i] += theta;
    }
    SpatialTransform { rotation: r, translation: m3_vec(&g, &v) }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat_exp_series(s: &ScrewAxis<f64>, theta: f64) -> [[f64; 4]; 4] {
        let mut a = [[0.0; 4]; 4];
        let wx = cross3(&s.angular);
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] = wx[i][j] * theta;
            }
            a[i][3] = s.linear[i] * theta;
        }
        let mut out = [[0.0; 4]; 4];
        let mut term = [[0.0; 4]; 4];
        for i in 0..4 {
            out[i][i] = 1.0;
            term[i][i] = 1.0;
        }
        for k in 1..=20 {
            let mut next = [[0.0; 4]; 4];
            for i in 0..4 {
                for j in 0..4 {
                    for l in 0..4 {
                        next[i][j] += term[i][l] * a[l][j];
                    }
                    next[i][j] /= k as f64;
                }
            }
            term = next;
            for i in 0..4 {
                for j in 0..4 {
                    out[i][j] += term[i][j];
                }
            }
        }
        out
    }

    #[test]
    fn screw_exp_matches_series() {
        let w = [0.36, -0.48, 0.8];
        let s = ScrewAxis::new(w, [0.3, 1.2, -0.7]);
        let t = screw_exp(&s, 0.7);
        let e = mat_exp_series(&s, 0.7);
        for i in 0..3 {
            for j in 0..3 {
                assert!((t.rotation[i][j] - e[i][j]).abs() < 1e-10);
            }
            assert!((t.translation[i] - e[i][3]).abs() < 1e-10);
        }
    }

    #[test]
    fn quarter_turn_about_z() {
        let s = ScrewAxis::revolute([0.0, 0.0, 1.0]);
        let t = screw_exp(&s, std::f64::consts::FRAC_PI_2);
        let expect = [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((t.rotation[i][j] - expect[i][j]).abs() < 1e-15);
            }
            assert_eq!(t.translation[i], 0.0);
        }
    }

    #[test]
    fn pure_translation_adjoint() {
        let t = SpatialTransform::from_translation([1.0, 0.0, 0.0]);
        let ad = t.adjoint();
        let px = cross3(&[1.0, 0.0, 0.0]);
        for i in 0..3 {
            for j in 0..3 {
                let id = if i == j { 1.0 } else { 0.0 };
                assert_eq!(ad[i][j], id);
                assert_eq!(ad[i + 3][j + 3], id);
                assert_eq!(ad[i][j + 3], 0.0);
                assert_eq!(ad[i + 3][j], px[i][j]);
            }
        }
    }

    #[test]
    fn cross3_basis() {
        let m = cross3(&[1.0, 0.0, 0.0]);
        assert_eq!(m3_vec(&m, &[0.0, 1.0, 0.0]), [0.0, 0.0, 1.0]);
        let z = cross3::<f64>(&[0.0; 3]);
        assert_eq!(z, [[0.0; 3]; 3]);
    }

    #[test]
    fn spatial_cross_pure_rotation_blocks() {
        let ad = spatial_cross(&Twist::new([0.0, 0.0, 1.0], [0.0; 3]));
        let w = cross3(&[0.0, 0.0, 1.0]);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(ad[i][j], w[i][j]);
                assert_eq!(ad[i + 3][j + 3], w[i][j]);
                assert_eq!(ad[i + 3][j], 0.0);
            }
        }
    }
}
