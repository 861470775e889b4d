//! SE(3) / se(3) primitives.
//!
//! Twists are stored angular part first, `[ω; v]`, and every 6×6 operator in
//! this crate (adjoints, Jacobians) uses that ordering. The hat of a twist is
//!
//! ```text
//! [ *ω  v ]
//! [  0  0 ]
//! ```
//!
//! where `*ω` is the 3×3 skew-symmetric (cross-product) matrix of `ω`.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, Matrix3, Matrix4, Matrix6, Vector3, Vector6};
use thiserror::Error;

/// Below this rotation angle the exponential switches to series.
pub const SMALL_ANGLE: f64 = 1e-6;

/// Below this angle the log map uses series coefficients.
const LOG_SERIES_ANGLE: f64 = 1e-3;

/// Rotations closer than this to π have no unique principal logarithm.
pub const LOG_BRANCH_MARGIN: f64 = 1e-6;

/// Tolerance used when checking that a 4×4 matrix is an se(3) element.
pub const HAT_TOLERANCE: f64 = 1e-9;

/// Angular norms at or below this are treated as pure translations.
const PURE_TRANSLATION_EPS: f64 = 1e-12;

/// Below this angle the dexp coefficients are evaluated by Taylor series.
const DEXP_SERIES_ANGLE: f64 = 5e-2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LieError {
    #[error("matrix is not an se(3) element (residual {residual:.3e})")]
    NotATwist { residual: f64 },
    #[error("rotation angle {angle} is within {margin:e} of pi; logarithm branch is ambiguous")]
    LogBranch { angle: f64, margin: f64 },
    #[error("cannot take the screw form of a zero twist")]
    ZeroTwist,
}

/// Element of se(3) in `[ω; v]` order.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Twist {
    pub omega: Vector3<f64>,
    pub v: Vector3<f64>,
}

impl Twist {
    pub fn new(omega: Vector3<f64>, v: Vector3<f64>) -> Self {
        Self { omega, v }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_components(c: [f64; 6]) -> Self {
        Self { omega: Vector3::new(c[0], c[1], c[2]), v: Vector3::new(c[3], c[4], c[5]) }
    }

    pub fn from_vector(x: &Vector6<f64>) -> Self {
        Self { omega: x.fixed_rows::<3>(0).into_owned(), v: x.fixed_rows::<3>(3).into_owned() }
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(self.omega.x, self.omega.y, self.omega.z, self.v.x, self.v.y, self.v.z)
    }

    pub fn components(&self) -> [f64; 6] {
        self.to_vector().into()
    }

    /// Euclidean norm of the 6-vector.
    pub fn norm(&self) -> f64 {
        (self.omega.norm_squared() + self.v.norm_squared()).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.omega.iter().chain(self.v.iter()).all(|x| x.is_finite())
    }
}

impl Add for Twist {
    type Output = Twist;
    fn add(self, rhs: Twist) -> Twist {
        Twist::new(self.omega + rhs.omega, self.v + rhs.v)
    }
}

impl Sub for Twist {
    type Output = Twist;
    fn sub(self, rhs: Twist) -> Twist {
        Twist::new(self.omega - rhs.omega, self.v - rhs.v)
    }
}

impl Neg for Twist {
    type Output = Twist;
    fn neg(self) -> Twist {
        Twist::new(-self.omega, -self.v)
    }
}

impl Mul<f64> for Twist {
    type Output = Twist;
    fn mul(self, s: f64) -> Twist {
        Twist::new(self.omega * s, self.v * s)
    }
}

impl Mul<Twist> for Matrix6<f64> {
    type Output = Twist;
    fn mul(self, t: Twist) -> Twist {
        Twist::from_vector(&(self * t.to_vector()))
    }
}

/// Rigid transform `x ↦ R x + p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self { rotation, translation }
    }

    pub fn identity() -> Self {
        Self::new(Matrix3::identity(), Vector3::zeros())
    }

    pub fn from_translation(p: Vector3<f64>) -> Self {
        Self::new(Matrix3::identity(), p)
    }

    pub fn from_rotation(r: Matrix3<f64>) -> Self {
        Self::new(r, Vector3::zeros())
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Reads the rotation and translation blocks; the last row is ignored.
    pub fn from_homogeneous(m: &Matrix4<f64>) -> Self {
        Self::new(m.fixed_view::<3, 3>(0, 0).into_owned(), m.fixed_view::<3, 1>(0, 3).into_owned())
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self::new(rt, -(rt * self.translation))
    }

    pub fn transform_point(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * x + self.translation
    }

    /// Largest deviation of `RᵀR` from identity and of `det R` from one.
    pub fn orthonormality_error(&self) -> f64 {
        let gram = self.rotation.transpose() * self.rotation - Matrix3::identity();
        let det = (self.rotation.determinant() - 1.0).abs();
        gram.amax().max(det)
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        self.rotation.iter().chain(self.translation.iter()).all(|x| x.is_finite()) && self.orthonormality_error() <= tol
    }
}

impl Mul for Pose {
    type Output = Pose;
    fn mul(self, rhs: Pose) -> Pose {
        Pose::new(self.rotation * rhs.rotation, self.rotation * rhs.translation + self.translation)
    }
}

impl Mul<&Pose> for &Pose {
    type Output = Pose;
    fn mul(self, rhs: &Pose) -> Pose {
        *self * *rhs
    }
}

/// Cross-product matrix: `skew3(a) * b == a × b`.
pub fn skew3(a: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -a.z, a.y, a.z, 0.0, -a.x, -a.y, a.x, 0.0)
}

pub fn twist_hat(t: &Twist) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&skew3(&t.omega));
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&t.v);
    m
}

/// Inverse of [`twist_hat`]. Rejects matrices whose rotation block is not
/// antisymmetric or whose last row is non-zero.
pub fn twist_vee(m: &Matrix4<f64>) -> Result<Twist, LieError> {
    let w = m.fixed_view::<3, 3>(0, 0);
    let sym = (w + w.transpose()).amax();
    let last_row = m.row(3).amax();
    let residual = sym.max(last_row);
    if !residual.is_finite() || residual > HAT_TOLERANCE {
        return Err(LieError::NotATwist { residual });
    }
    Ok(Twist::new(Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)]), Vector3::new(m[(0, 3)], m[(1, 3)], m[(2, 3)])))
}

/// Coefficients `(sinθ/θ, (1−cosθ)/θ², (θ−sinθ)/θ³)` with a series fallback.
fn rodrigues_coefficients(theta: f64) -> (f64, f64, f64) {
    if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        (
            1.0 - t2 / 6.0 + t2 * t2 / 120.0 - t2 * t2 * t2 / 5040.0,
            0.5 - t2 / 24.0 + t2 * t2 / 720.0 - t2 * t2 * t2 / 40320.0,
            1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0 - t2 * t2 * t2 / 362880.0,
        )
    } else {
        let s = theta.sin();
        // Half-angle form: 1 − cos θ loses all but a few digits for small θ.
        let half = (0.5 * theta).sin() / (0.5 * theta);
        (s / theta, 0.5 * half * half, (theta - s) / (theta * theta * theta))
    }
}

/// Exponential of an so(3) element `ω` (rotation by `‖ω‖` about `ω`).
pub fn exp_so3(omega: &Vector3<f64>) -> Matrix3<f64> {
    let (a, b, _) = rodrigues_coefficients(omega.norm());
    let w = skew3(omega);
    Matrix3::identity() + w * a + w * w * b
}

pub fn exp_se3(t: &Twist) -> Pose {
    let (a, b, c) = rodrigues_coefficients(t.omega.norm());
    let w = skew3(&t.omega);
    let w2 = w * w;
    let rotation = Matrix3::identity() + w * a + w2 * b;
    let left_jacobian = Matrix3::identity() + w * b + w2 * c;
    Pose::new(rotation, left_jacobian * t.v)
}

/// Principal logarithm. Fails for rotation angles within
/// [`LOG_BRANCH_MARGIN`] of π.
pub fn log_se3(pose: &Pose) -> Result<Twist, LieError> {
    let r = &pose.rotation;
    let axis_sin = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]) * 0.5;
    let cos = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let theta = axis_sin.norm().atan2(cos);
    if theta > std::f64::consts::PI - LOG_BRANCH_MARGIN {
        return Err(LieError::LogBranch { angle: theta, margin: LOG_BRANCH_MARGIN });
    }

    // ω = θ/sinθ · axis_sin; second coefficient is (1 − (θ/2) cot(θ/2)) / θ².
    let (scale, inv_coeff) = if theta < LOG_SERIES_ANGLE {
        let t2 = theta * theta;
        (1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0, 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0)
    } else {
        let half = 0.5 * theta;
        (theta / theta.sin(), (1.0 - half / half.tan()) / (theta * theta))
    };
    let omega = axis_sin * scale;
    let w = skew3(&omega);
    let inv_left_jacobian = Matrix3::identity() - w * 0.5 + w * w * inv_coeff;
    Ok(Twist::new(omega, inv_left_jacobian * pose.translation))
}

/// `Ad_T = [R 0; *p R  R]`, so that `Ad_T V = vee(T hat(V) T⁻¹)`.
pub fn adjoint_of_pose(pose: &Pose) -> Matrix6<f64> {
    let mut m = Matrix6::zeros();
    let r = &pose.rotation;
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(r);
    m.fixed_view_mut::<3, 3>(3, 0).copy_from(&(skew3(&pose.translation) * r));
    m
}

/// `ad_V = [*ω 0; *v *ω]`, so that `ad_V W = vee([hat V, hat W])`.
pub fn ad_of_twist(t: &Twist) -> Matrix6<f64> {
    let mut m = Matrix6::zeros();
    let w = skew3(&t.omega);
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&w);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&w);
    m.fixed_view_mut::<3, 3>(3, 0).copy_from(&skew3(&t.v));
    m
}

/// Coefficients `c1..c4` of the closed-form right-trivialised differential
/// of the exponential, `I + c1 ad + c2 ad² + c3 ad³ + c4 ad⁴`, for a twist
/// with angular norm `theta`.
pub fn dexp_coefficients(theta: f64) -> [f64; 4] {
    let t = theta.abs();
    if t < DEXP_SERIES_ANGLE {
        let t2 = t * t;
        let t4 = t2 * t2;
        let t6 = t4 * t2;
        let t8 = t4 * t4;
        let t10 = t8 * t2;
        [
            0.5 - t4 / 720.0 + t6 / 20160.0 - t8 / 1_209_600.0 + t10 / 119_750_400.0,
            1.0 / 6.0 - t4 / 5040.0 + t6 / 181_440.0 - t8 / 13_305_600.0 + t10 / 1_556_755_200.0,
            1.0 / 24.0 - t2 / 360.0 + t4 / 13440.0 - t6 / 907_200.0 + t8 / 95_800_320.0 - t10 / 14_529_715_200.0,
            1.0 / 120.0 - t2 / 2520.0 + t4 / 120_960.0 - t6 / 9_979_200.0 + t8 / 1_245_404_160.0
                - t10 / 217_945_728_000.0,
        ]
    } else {
        let (s, c) = t.sin_cos();
        [
            (4.0 - t * s - 4.0 * c) / (2.0 * t.powi(2)),
            (4.0 * t - 5.0 * s + t * c) / (2.0 * t.powi(3)),
            (2.0 - t * s - 2.0 * c) / (2.0 * t.powi(4)),
            (2.0 * t - 3.0 * s + t * c) / (2.0 * t.powi(5)),
        ]
    }
}

/// Applies `I + c1 ad + c2 ad² + c3 ad³ + c4 ad⁴` of `x` to `tangent`.
pub fn apply_dexp(coefficients: [f64; 4], x: &Twist, tangent: &Twist) -> Twist {
    let ad = ad_of_twist(x);
    let mut term = tangent.to_vector();
    let mut acc = term;
    for c in coefficients {
        term = ad * term;
        acc += term * c;
    }
    Twist::from_vector(&acc)
}

/// Right-trivialised differential of the exponential:
/// `vee(∂e^{X(s)} e^{−X(s)})` for `∂X = tangent`.
pub fn dexp(x: &Twist, tangent: &Twist) -> Twist {
    apply_dexp(dexp_coefficients(x.omega.norm()), x, tangent)
}

/// Geometric (screw) form of a twist:
/// `V = magnitude · [axis; axis × point + pitch · axis]`.
///
/// For a pure translation `pitch` is infinite, `axis` is the unit direction
/// of `v` and `V = magnitude · [0; axis]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScrewDecomposition {
    pub axis: Vector3<f64>,
    pub point: Vector3<f64>,
    pub pitch: f64,
    pub magnitude: f64,
    pub pure_translation: bool,
}

impl ScrewDecomposition {
    pub fn to_twist(&self) -> Twist {
        if self.pure_translation {
            Twist::new(Vector3::zeros(), self.axis * self.magnitude)
        } else {
            let v = self.axis.cross(&self.point) + self.axis * self.pitch;
            Twist::new(self.axis * self.magnitude, v * self.magnitude)
        }
    }
}

pub fn screw_decompose(t: &Twist) -> Result<ScrewDecomposition, LieError> {
    let w = t.omega.norm();
    if w > PURE_TRANSLATION_EPS {
        let axis = t.omega / w;
        let u = t.v / w;
        Ok(ScrewDecomposition {
            axis,
            // Closest point to the origin satisfying axis × point = u⊥.
            point: u.cross(&axis),
            pitch: axis.dot(&u),
            magnitude: w,
            pure_translation: false,
        })
    } else {
        let d = t.v.norm();
        if d == 0.0 {
            return Err(LieError::ZeroTwist);
        }
        Ok(ScrewDecomposition {
            axis: t.v / d,
            point: Vector3::zeros(),
            pitch: f64::INFINITY,
            magnitude: d,
            pure_translation: true,
        })
    }
}

/// Moore–Penrose pseudo-inverse by SVD. Singular values below
/// `1e-10 · max(m, n) · σ_max` are treated as zero.
pub fn pseudo_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 || m.iter().all(|&x| x == 0.0) {
        return DMatrix::zeros(cols, rows);
    }
    let svd = m.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let cutoff = 1e-10 * rows.max(cols) as f64 * sigma_max;
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let inv_sigma = svd.singular_values.map(|s| if s > cutoff { 1.0 / s } else { 0.0 });
    let mut scaled_v = v_t.transpose();
    for (j, mut col) in scaled_v.column_iter_mut().enumerate() {
        col *= inv_sigma[j];
    }
    scaled_v * u.transpose()
}
