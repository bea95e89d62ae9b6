//! Small-deflection screw quantities: twists, wrenches and the operators that
//! move them between points and frames.
//!
//! All 6-vectors are ordered `[translation; rotation]` for twists and
//! `[force; moment]` for wrenches, so the natural pairing `twist · wrench`
//! is the plain dot product of the two 6-vectors.

use nalgebra::{Matrix3, Matrix6, SMatrix, Vector3, Vector6};
use thiserror::Error;

/// 12×12 matrix relating the two end twists of a link to its two end wrenches.
pub type Matrix12 = SMatrix<f64, 12, 12>;

/// Tolerance on `RᵀR − I` accepted by [`Rotation::new`].
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Relative tolerance on `K − Kᵀ` accepted by [`rotate_stiffness`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScrewError {
    #[error("matrix is not orthogonal: max |RᵀR − I| = {deviation:e}")]
    NotOrthogonal { deviation: f64 },
    #[error("matrix is a reflection, not a rotation: det = {det}")]
    NotProperRotation { det: f64 },
    #[error("stiffness matrix is not symmetric: relative asymmetry {asymmetry:e}")]
    AsymmetricStiffness { asymmetry: f64 },
    #[error("non-finite entry in input")]
    NonFinite,
}

/// Skew-symmetric cross-product matrix: `skew(v) * w == v × w`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Small nodal deflection: translation `dp` [m] and rotation `dphi` [rad].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Twist {
    pub dp: Vector3<f64>,
    pub dphi: Vector3<f64>,
}

impl Twist {
    pub fn new(dp: Vector3<f64>, dphi: Vector3<f64>) -> Self {
        Self { dp, dphi }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self {
            dp: v.fixed_rows::<3>(0).into_owned(),
            dphi: v.fixed_rows::<3>(3).into_owned(),
        }
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self::from_vector(&Vector6::from_row_slice(&a))
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(self.dp.x, self.dp.y, self.dp.z, self.dphi.x, self.dphi.y, self.dphi.z)
    }

    pub fn to_array(&self) -> [f64; 6] {
        self.to_vector().into()
    }
}

/// Nodal load: force `f` [N] and moment `m` [N·m].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Wrench {
    pub f: Vector3<f64>,
    pub m: Vector3<f64>,
}

impl Wrench {
    pub fn new(f: Vector3<f64>, m: Vector3<f64>) -> Self {
        Self { f, m }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self {
            f: v.fixed_rows::<3>(0).into_owned(),
            m: v.fixed_rows::<3>(3).into_owned(),
        }
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self::from_vector(&Vector6::from_row_slice(&a))
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(self.f.x, self.f.y, self.f.z, self.m.x, self.m.y, self.m.z)
    }

    pub fn to_array(&self) -> [f64; 6] {
        self.to_vector().into()
    }
}

impl std::ops::Add for Wrench {
    type Output = Wrench;
    fn add(self, rhs: Wrench) -> Wrench {
        Wrench::new(self.f + rhs.f, self.m + rhs.m)
    }
}

impl std::ops::Sub for Wrench {
    type Output = Wrench;
    fn sub(self, rhs: Wrench) -> Wrench {
        Wrench::new(self.f - rhs.f, self.m - rhs.m)
    }
}

/// Rigid-body transport operator `D = [[I, skew(d)ᵀ], [0, I]]`.
///
/// `D · t_i` is the twist at a point offset by `d` from the point where `t_i`
/// is measured, when both points belong to the same rigid body. `Dᵀ` moves a
/// wrench the other way: `Dᵀ · W_j` is `W_j` re-expressed about the point `d`
/// behind it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportMatrix {
    offset: Vector3<f64>,
}

pub fn transport_matrix(d: &Vector3<f64>) -> TransportMatrix {
    TransportMatrix { offset: *d }
}

impl TransportMatrix {
    pub fn offset(&self) -> &Vector3<f64> {
        &self.offset
    }

    pub fn matrix(&self) -> Matrix6<f64> {
        let mut m = Matrix6::identity();
        m.fixed_view_mut::<3, 3>(0, 3)
            .copy_from(&skew(&self.offset).transpose());
        m
    }

    pub fn inverse(&self) -> TransportMatrix {
        TransportMatrix { offset: -self.offset }
    }

    /// `self · other`; offsets add.
    pub fn compose(&self, other: &TransportMatrix) -> TransportMatrix {
        TransportMatrix {
            offset: self.offset + other.offset,
        }
    }

    pub fn apply(&self, t: &Twist) -> Twist {
        Twist::new(t.dp + t.dphi.cross(&self.offset), t.dphi)
    }

    /// `Dᵀ · w`.
    pub fn apply_transpose(&self, w: &Wrench) -> Wrench {
        transport_wrench(w, &self.offset)
    }
}

/// Force unchanged, moment `m + d × f`.
pub fn transport_wrench(w: &Wrench, d: &Vector3<f64>) -> Wrench {
    Wrench::new(w.f, w.m + d.cross(&w.f))
}

/// A proper orthogonal 3×3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub fn new(m: Matrix3<f64>) -> Result<Self, ScrewError> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(ScrewError::NonFinite);
        }
        let deviation = (m.transpose() * m - Matrix3::identity()).amax();
        if deviation > ROTATION_TOLERANCE {
            return Err(ScrewError::NotOrthogonal { deviation });
        }
        let det = m.determinant();
        if det < 0.0 {
            return Err(ScrewError::NotProperRotation { det });
        }
        Ok(Self(m))
    }

    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Rotation by `angle` [rad] about `axis` (normalized internally).
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let unit = nalgebra::Unit::new_normalize(*axis);
        Self(*nalgebra::Rotation3::from_axis_angle(&unit, angle).matrix())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Rotation {
        Rotation(self.0.transpose())
    }

    pub fn apply(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }
}

/// `blockdiag(R, R)`: re-expresses a twist or wrench in a rotated frame.
pub fn adjoint_rotation(r: &Rotation) -> Matrix6<f64> {
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(r.matrix());
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(r.matrix());
    m
}

/// Largest entry of `|K − Kᵀ|` relative to the largest `|K|` entry.
pub(crate) fn relative_asymmetry<const N: usize>(k: &SMatrix<f64, N, N>) -> f64 {
    let scale = k.amax();
    if scale == 0.0 {
        return 0.0;
    }
    (k - k.transpose()).amax() / scale
}

/// `T · K · Tᵀ` with `T = blockdiag(R, R, R, R)`.
pub fn rotate_stiffness(k_local: &Matrix12, r: &Rotation) -> Result<Matrix12, ScrewError> {
    if k_local.iter().any(|v| !v.is_finite()) {
        return Err(ScrewError::NonFinite);
    }
    let asymmetry = relative_asymmetry(k_local);
    if asymmetry > SYMMETRY_TOLERANCE {
        return Err(ScrewError::AsymmetricStiffness { asymmetry });
    }
    let mut t = Matrix12::zeros();
    for b in 0..4 {
        t.fixed_view_mut::<3, 3>(3 * b, 3 * b).copy_from(r.matrix());
    }
    Ok(t * k_local * t.transpose())
}
