//! Independent reference computations.
//!
//! Everything here uses closed-form beam theory and dense arithmetic written
//! from scratch: no code is shared with the element, assembly or solver
//! modules, so agreement between the two routes is meaningful.

use nalgebra::{DMatrix, Matrix3, Matrix6, Vector3, Vector6};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("accumulated compliance is singular (rank {rank} of 6)")]
    SingularCompliance { rank: usize },
    #[error("degenerate beam element {index}: {reason}")]
    DegenerateBeam { index: usize, reason: &'static str },
}

/// Beam properties for the reference route (SI units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamProperties {
    pub youngs_modulus: f64,
    pub shear_modulus: f64,
    pub area: f64,
    pub iy: f64,
    pub iz: f64,
    pub torsion: f64,
}

/// Tip compliance of a clamped Euler–Bernoulli beam along local x, in the
/// local frame at the tip. Maps tip wrench `[F; M]` to tip twist `[δ; θ]`.
pub fn cantilever_compliance(p: &BeamProperties, length: f64) -> Matrix6<f64> {
    let (e, l) = (p.youngs_modulus, length);
    let mut c = Matrix6::zeros();
    c[(0, 0)] = l / (e * p.area);
    c[(3, 3)] = l / (p.shear_modulus * p.torsion);
    // bending in the x–y plane (about z)
    c[(1, 1)] = l.powi(3) / (3.0 * e * p.iz);
    c[(1, 5)] = l.powi(2) / (2.0 * e * p.iz);
    c[(5, 1)] = c[(1, 5)];
    c[(5, 5)] = l / (e * p.iz);
    // bending in the x–z plane (about y); a +z force turns the tip about −y
    c[(2, 2)] = l.powi(3) / (3.0 * e * p.iy);
    c[(2, 4)] = -l.powi(2) / (2.0 * e * p.iy);
    c[(4, 2)] = c[(2, 4)];
    c[(4, 4)] = l / (e * p.iy);
    c
}

/// One compliant element of a serial chain, listed from base to tip.
#[derive(Debug, Clone, PartialEq)]
pub enum ChainElement {
    /// Beam clamped at `start`, compliant at `end`.
    Beam {
        start: Vector3<f64>,
        end: Vector3<f64>,
        properties: BeamProperties,
        orientation_hint: Option<Vector3<f64>>,
    },
    /// One-directional spring at `point` acting along the unit twist `free_twist`.
    Spring {
        point: Vector3<f64>,
        free_twist: Vector6<f64>,
        stiffness: f64,
    },
    /// Arbitrary compliance (global frame) measured at `point`.
    Compliance {
        point: Vector3<f64>,
        compliance: Matrix6<f64>,
    },
}

/// Strictly serial chain clamped to the base before its first element.
#[derive(Debug, Clone, PartialEq)]
pub struct SerialChainSpec {
    pub elements: Vec<ChainElement>,
    pub end_effector: Vector3<f64>,
}

fn cross_matrix(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Maps a twist at `from` to the twist of the same rigid body at `to`.
fn twist_shift(from: &Vector3<f64>, to: &Vector3<f64>) -> Matrix6<f64> {
    let r = to - from;
    let mut j = Matrix6::identity();
    // δp(to) = δp(from) + δφ × r = δp(from) − [r×] δφ
    j.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-cross_matrix(&r)));
    j
}

/// Columns are the local x, y, z axes of a beam from `start` to `end`.
fn beam_axes(start: &Vector3<f64>, end: &Vector3<f64>, hint: Option<Vector3<f64>>) -> Option<Matrix3<f64>> {
    let axis = end - start;
    let length = axis.norm();
    if length <= 0.0 {
        return None;
    }
    let x = axis / length;
    let up = match hint {
        Some(h) => h,
        None if x.z.abs() > 1.0 - 1e-6 => Vector3::y(),
        None => Vector3::z(),
    };
    let y = up.cross(&x);
    if y.norm() < 1e-9 * up.norm().max(1e-300) {
        return None;
    }
    let y = y.normalize();
    let z = x.cross(&y);
    Some(Matrix3::from_columns(&[x, y, z]))
}

/// Sum of element compliances transported to the end effector, then inverted.
pub fn vjm_serial_compliance(chain: &SerialChainSpec) -> Result<Matrix6<f64>, OracleError> {
    let tip = chain.end_effector;
    let mut total = Matrix6::zeros();
    for (index, element) in chain.elements.iter().enumerate() {
        let (point, local) = match element {
            ChainElement::Beam {
                start,
                end,
                properties,
                orientation_hint,
            } => {
                let axes = beam_axes(start, end, *orientation_hint).ok_or(OracleError::DegenerateBeam {
                    index,
                    reason: "zero length or orientation hint parallel to the axis",
                })?;
                let mut rot = Matrix6::zeros();
                rot.fixed_view_mut::<3, 3>(0, 0).copy_from(&axes);
                rot.fixed_view_mut::<3, 3>(3, 3).copy_from(&axes);
                let c = cantilever_compliance(properties, (end - start).norm());
                (*end, rot * c * rot.transpose())
            }
            ChainElement::Spring {
                point,
                free_twist,
                stiffness,
            } => (*point, free_twist * free_twist.transpose() / *stiffness),
            ChainElement::Compliance { point, compliance } => (*point, *compliance),
        };
        let j = twist_shift(&point, &tip);
        total += j * local * j.transpose();
    }
    Ok(total)
}

pub fn vjm_serial_stiffness(chain: &SerialChainSpec) -> Result<Matrix6<f64>, OracleError> {
    let compliance = vjm_serial_compliance(chain)?;
    let svd = compliance.svd(false, false);
    let smax = svd.singular_values.max();
    let rank = svd.singular_values.iter().filter(|&&s| s > 1e-12 * smax).count();
    if rank < 6 {
        return Err(OracleError::SingularCompliance { rank });
    }
    compliance.try_inverse().ok_or(OracleError::SingularCompliance { rank })
}

/// Orthonormal basis (as columns) of the right null space, taken as the right
/// singular vectors with `σ < 1e-9 · σ_max`. Row-deficient inputs are padded
/// with zero rows so every column direction gets a singular value.
pub fn dense_nullspace(matrix: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, cols) = matrix.shape();
    if cols == 0 {
        return DMatrix::zeros(0, 0);
    }
    let padded = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(matrix);
        p
    } else {
        matrix.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let smax = svd.singular_values.max();
    let threshold = 1e-9 * smax;
    let null: Vec<_> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| smax == 0.0 || s < threshold)
        .map(|(k, _)| v_t.row(k).transpose())
        .collect();
    if null.is_empty() {
        DMatrix::zeros(cols, 0)
    } else {
        DMatrix::from_columns(&null)
    }
}
