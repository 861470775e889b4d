//! Constant-curvature segment model.
//!
//! Each segment bends as a circular arc about an axis lying in the base
//! xy-plane. With `R(φ)` the rotation about z, the segment's strain twist is
//!
//! ```text
//! V = l [ κ R(φ) ŷ ; R(φ) (x̂ × ŷ) ] = l [ κ R(φ) ŷ ; ẑ ]
//! ```
//!
//! and forward kinematics is the product `e^{V₁} e^{V₂} … e^{Vₙ}`.
//!
//! The partial twists `V^α` satisfy `hat(V^α) e^{V} = ∂_α e^{V}` and so are
//! expressed in the segment's base frame. Jacobian columns transport them to
//! the manipulator base with the adjoint of the upstream product.

use std::fmt;

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::liegroup::{adjoint_of_pose, apply_dexp, dexp_coefficients, exp_se3, Pose, Twist};

/// Default cap on the number of segments.
pub const DEFAULT_MAX_SEGMENTS: usize = 16;

/// Curvatures with `|κ| ≤ KAPPA_EPS / l` use the straight-segment limits.
pub const KAPPA_EPS: f64 = 1e-9;

/// Bending angles below this use series forms of the curvature partial.
const BEND_SERIES_ANGLE: f64 = 1e-3;

/// Bending axis of an unrotated segment.
pub fn bend_axis() -> Vector3<f64> {
    Vector3::y()
}

/// Direction from the segment base to the bending axis when φ = 0.
pub fn offset_direction() -> Vector3<f64> {
    Vector3::x()
}

fn rot_z(phi: f64) -> Matrix3<f64> {
    let (s, c) = phi.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("segment {index}: {reason}")]
    InvalidSegment { index: usize, reason: String },
    #[error("manipulator needs between 1 and {max} segments, got {count}")]
    SegmentCount { count: usize, max: usize },
}

/// One constant-curvature segment.
///
/// `length` is the length used in the kinematics and may differ from
/// `nominal_length` while the variable-length solver is iterating.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentState {
    pub kappa: f64,
    pub phi: f64,
    pub length: f64,
    pub nominal_length: f64,
}

impl SegmentState {
    pub fn new(kappa: f64, phi: f64, length: f64, nominal_length: f64) -> Self {
        Self { kappa, phi, length, nominal_length }
    }

    /// Segment at its physical length.
    pub fn nominal(kappa: f64, phi: f64, length: f64) -> Self {
        Self::new(kappa, phi, length, length)
    }

    pub fn straight(length: f64) -> Self {
        Self::nominal(0.0, 0.0, length)
    }

    /// Total bending angle `κ l`.
    pub fn bending_angle(&self) -> f64 {
        self.kappa * self.length
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(format!("length must be positive and finite, got {}", self.length));
        }
        if !(self.nominal_length.is_finite() && self.nominal_length > 0.0) {
            return Err(format!("nominal length must be positive and finite, got {}", self.nominal_length));
        }
        if !self.kappa.is_finite() || !self.phi.is_finite() {
            return Err("curvature and bending-plane angle must be finite".into());
        }
        if !self.bending_angle().is_finite() {
            return Err("bending angle overflows".into());
        }
        Ok(())
    }

    fn is_straight(&self) -> bool {
        self.kappa.abs() <= KAPPA_EPS / self.length
    }
}

/// Ordered base-to-tip list of segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManipulatorState {
    segments: Vec<SegmentState>,
}

impl ManipulatorState {
    pub fn new(segments: Vec<SegmentState>) -> Result<Self, ModelError> {
        Self::with_max_segments(segments, DEFAULT_MAX_SEGMENTS)
    }

    pub fn with_max_segments(segments: Vec<SegmentState>, max: usize) -> Result<Self, ModelError> {
        if segments.is_empty() || segments.len() > max {
            return Err(ModelError::SegmentCount { count: segments.len(), max });
        }
        for (index, seg) in segments.iter().enumerate() {
            seg.validate().map_err(|reason| ModelError::InvalidSegment { index, reason })?;
        }
        Ok(Self { segments })
    }

    /// Builds a state from per-segment curvature and bending-plane angle, all
    /// at their nominal lengths.
    pub fn from_curvatures(kappa: &[f64], phi: &[f64], lengths: &[f64]) -> Result<Self, ModelError> {
        if kappa.len() != phi.len() || kappa.len() != lengths.len() {
            return Err(ModelError::InvalidSegment {
                index: kappa.len().min(phi.len()).min(lengths.len()),
                reason: "curvature, angle and length lists differ in size".into(),
            });
        }
        Self::new(kappa.iter().zip(phi).zip(lengths).map(|((&k, &p), &l)| SegmentState::nominal(k, p, l)).collect())
    }

    pub fn segments(&self) -> &[SegmentState] {
        &self.segments
    }

    pub fn segments_mut(&mut self) -> &mut [SegmentState] {
        &mut self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Copy of the state with every length reset to its nominal value.
    pub fn at_nominal_lengths(&self) -> Self {
        let mut out = self.clone();
        for seg in &mut out.segments {
            seg.length = seg.nominal_length;
        }
        out
    }

    /// Concatenation `self ⧺ other` (base segments first).
    pub fn concat(&self, other: &Self) -> Result<Self, ModelError> {
        let mut segments = self.segments.clone();
        segments.extend_from_slice(&other.segments);
        Self::new(segments)
    }

    pub fn total_nominal_length(&self) -> f64 {
        self.segments.iter().map(|s| s.nominal_length).sum()
    }

    pub fn total_length(&self) -> f64 {
        self.segments.iter().map(|s| s.length).sum()
    }
}

/// Strain twist `l [κ R(φ) ŷ; R(φ) *x̂ ŷ]`.
pub fn segment_twist(seg: &SegmentState) -> Twist {
    let r = rot_z(seg.phi);
    let omega = r * bend_axis() * seg.kappa;
    let v = r * offset_direction().cross(&bend_axis());
    Twist::new(omega, v) * seg.length
}

pub fn segment_transform(seg: &SegmentState) -> Pose {
    exp_se3(&segment_twist(seg))
}

pub fn forward_kinematics(state: &ManipulatorState) -> Pose {
    state.segments().iter().fold(Pose::identity(), |acc, seg| acc * segment_transform(seg))
}

/// `(θ − sinθ)/θ²` and `(1 − cosθ)/θ²`.
fn arc_coefficients(theta: f64) -> (f64, f64) {
    if theta.abs() < BEND_SERIES_ANGLE {
        let t2 = theta * theta;
        (
            theta * (1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0),
            0.5 - t2 / 24.0 + t2 * t2 / 720.0 - t2 * t2 * t2 / 40320.0,
        )
    } else {
        let (s, c) = theta.sin_cos();
        ((theta - s) / (theta * theta), (1.0 - c) / (theta * theta))
    }
}

/// Partial twist with respect to curvature:
/// `[l R(φ) ŷ; κ⁻² R(φ)(e^{lκ *ŷ} − lκ *ŷ − I) x̂]`.
///
/// For a straight segment the translational part tends to
/// `(l²/2) R(φ) (*ŷ)² x̂ = −(l²/2) R(φ) x̂`.
pub fn partial_twist_kappa(seg: &SegmentState) -> Twist {
    let r = rot_z(seg.phi);
    let l = seg.length;
    let omega = r * bend_axis() * l;
    let x_dir = r * offset_direction();
    let v = if seg.is_straight() {
        -x_dir * (0.5 * l * l)
    } else {
        // (e^{θ*ŷ} − θ*ŷ − I) x̂ = (θ − sinθ) ẑ − (1 − cosθ) x̂, divided by κ² = θ²/l².
        let (axial, radial) = arc_coefficients(seg.bending_angle());
        (Vector3::z() * axial - x_dir * radial) * (l * l)
    };
    Twist::new(omega, v)
}

fn twist_phi_derivative(seg: &SegmentState) -> Twist {
    let (s, c) = seg.phi.sin_cos();
    // d/dφ of R(φ) ŷ = (−sinφ, cosφ, 0).
    let omega = Vector3::new(-c, -s, 0.0) * (seg.kappa * seg.length);
    Twist::new(omega, Vector3::zeros())
}

/// Partial twist with respect to the bending-plane angle: the closed-form
/// dexp operator of the segment twist applied to `∂_φ V`. Zero for a
/// straight segment, where `∂_φ V` vanishes.
pub fn partial_twist_phi(seg: &SegmentState) -> Twist {
    let twist = segment_twist(seg);
    let coefficients = if seg.is_straight() {
        [0.5, 1.0 / 6.0, 1.0 / 24.0, 1.0 / 120.0]
    } else {
        dexp_coefficients(seg.bending_angle())
    };
    apply_dexp(coefficients, &twist, &twist_phi_derivative(seg))
}

/// Partial twist with respect to length. `V` is linear in `l` and commutes
/// with its own derivative, so this is just `V / l`.
pub fn partial_twist_length(seg: &SegmentState) -> Twist {
    let r = rot_z(seg.phi);
    Twist::new(r * bend_axis() * seg.kappa, r * offset_direction().cross(&bend_axis()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Parameter {
    Kappa,
    Phi,
    Length,
}

/// Identifies the segment parameter a Jacobian column or update entry
/// refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ColumnLabel {
    pub segment: usize,
    pub parameter: Parameter,
}

impl fmt::Display for ColumnLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.parameter {
            Parameter::Kappa => "kappa",
            Parameter::Phi => "phi",
            Parameter::Length => "l",
        };
        write!(f, "{}[{}]", name, self.segment)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowLabel {
    /// Component of the error twist, 0..6 in `[ω; v]` order.
    Twist(usize),
    /// Length-restoration row for a segment.
    LengthConstraint(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct JacobianMatrix {
    pub matrix: DMatrix<f64>,
    pub columns: Vec<ColumnLabel>,
    pub rows: Vec<RowLabel>,
}

impl JacobianMatrix {
    pub fn column_of(&self, label: ColumnLabel) -> Option<usize> {
        self.columns.iter().position(|&c| c == label)
    }
}

/// Base-frame partial twists of every segment, `Ad(e^{V₁}⋯e^{V_{i−1}}) V^α_i`
/// for α = κ, φ, l, together with the tip pose.
#[derive(Debug, Clone)]
pub struct TransportedPartials {
    pub kappa: Vec<Twist>,
    pub phi: Vec<Twist>,
    pub length: Vec<Twist>,
    pub tip: Pose,
}

pub fn transported_partials(state: &ManipulatorState) -> TransportedPartials {
    let n = state.len();
    let mut out = TransportedPartials {
        kappa: Vec::with_capacity(n),
        phi: Vec::with_capacity(n),
        length: Vec::with_capacity(n),
        tip: Pose::identity(),
    };
    let mut prefix = Pose::identity();
    for seg in state.segments() {
        let ad = adjoint_of_pose(&prefix);
        out.kappa.push(ad * partial_twist_kappa(seg));
        out.phi.push(ad * partial_twist_phi(seg));
        out.length.push(ad * partial_twist_length(seg));
        prefix = prefix * segment_transform(seg);
    }
    out.tip = prefix;
    out
}

fn twist_rows() -> Vec<RowLabel> {
    (0..6).map(RowLabel::Twist).collect()
}

fn fill_columns(
    matrix: &mut DMatrix<f64>,
    columns: &mut Vec<ColumnLabel>,
    entries: impl IntoIterator<Item = (ColumnLabel, Twist)>,
) {
    for (label, twist) in entries {
        let j = columns.len();
        matrix.view_mut((0, j), (6, 1)).copy_from(&twist.to_vector());
        columns.push(label);
    }
}

/// 6×2n Jacobian with interleaved columns `(κ₁, φ₁, …, κₙ, φₙ)`.
pub fn jacobian_standard(state: &ManipulatorState) -> JacobianMatrix {
    jacobian_standard_from(&transported_partials(state))
}

pub fn jacobian_standard_from(partials: &TransportedPartials) -> JacobianMatrix {
    let n = partials.kappa.len();
    let mut matrix = DMatrix::zeros(6, 2 * n);
    let mut columns = Vec::with_capacity(2 * n);
    let entries = (0..n).flat_map(|i| {
        [
            (ColumnLabel { segment: i, parameter: Parameter::Kappa }, partials.kappa[i]),
            (ColumnLabel { segment: i, parameter: Parameter::Phi }, partials.phi[i]),
        ]
    });
    fill_columns(&mut matrix, &mut columns, entries);
    JacobianMatrix { matrix, columns, rows: twist_rows() }
}

/// 6×3n Jacobian including the length columns, grouped as
/// `(κ₁…κₙ | φ₁…φₙ | l₁…lₙ)`.
pub fn jacobian_vvl(state: &ManipulatorState) -> JacobianMatrix {
    jacobian_vvl_from(&transported_partials(state))
}

pub fn jacobian_vvl_from(partials: &TransportedPartials) -> JacobianMatrix {
    let n = partials.kappa.len();
    let mut matrix = DMatrix::zeros(6, 3 * n);
    let mut columns = Vec::with_capacity(3 * n);
    for (parameter, twists) in
        [(Parameter::Kappa, &partials.kappa), (Parameter::Phi, &partials.phi), (Parameter::Length, &partials.length)]
    {
        let entries = twists.iter().enumerate().map(|(segment, &t)| (ColumnLabel { segment, parameter }, t));
        fill_columns(&mut matrix, &mut columns, entries);
    }
    JacobianMatrix { matrix, columns, rows: twist_rows() }
}

/// `(6+n)×3n` matrix `[J_vvl; 0 I]` whose bottom rows select the lengths.
pub fn jacobian_augmented(state: &ManipulatorState) -> JacobianMatrix {
    jacobian_augmented_from(&transported_partials(state))
}

pub fn jacobian_augmented_from(partials: &TransportedPartials) -> JacobianMatrix {
    let top = jacobian_vvl_from(partials);
    let n = partials.kappa.len();
    let mut matrix = DMatrix::zeros(6 + n, 3 * n);
    matrix.view_mut((0, 0), (6, 3 * n)).copy_from(&top.matrix);
    for i in 0..n {
        matrix[(6 + i, 2 * n + i)] = 1.0;
    }
    let mut rows = top.rows;
    rows.extend((0..n).map(RowLabel::LengthConstraint));
    JacobianMatrix { matrix, columns: top.columns, rows }
}

/// Base-to-tip polyline of the backbone. Each segment contributes
/// `samples_per_segment` evenly spaced points along its arc; the junction
/// shared by consecutive segments appears once.
pub fn centerline(state: &ManipulatorState, samples_per_segment: usize) -> Vec<Vector3<f64>> {
    let samples = samples_per_segment.max(2);
    let mut points = Vec::with_capacity(1 + state.len() * (samples - 1));
    points.push(Vector3::zeros());
    let mut prefix = Pose::identity();
    for seg in state.segments() {
        let twist = segment_twist(seg);
        for s in 1..samples {
            let local = if s == samples - 1 {
                segment_transform(seg)
            } else {
                exp_se3(&(twist * (s as f64 / (samples - 1) as f64)))
            };
            points.push((prefix * local).translation);
        }
        prefix = prefix * segment_transform(seg);
    }
    points
}
