//! Link models: elastic beams (or externally supplied 12×12 stiffness
//! matrices) and rigid bodies, together with the twelve equation rows each
//! contributes to the global system.
//!
//! Wrench convention: `W_i` is the wrench applied *to* the link end by its
//! node, so a flexible link obeys `[W_i; W_j] = K · [Δt_i; Δt_j]`.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix6, SMatrix, Vector3};
use thiserror::Error;

use crate::rows::{ConstraintBlock, NodeIdx, VarKind};
use crate::screw::{relative_asymmetry, rotate_stiffness, transport_matrix, Matrix12, Rotation, ScrewError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ElementError {
    #[error("{name} must be strictly positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("link end nodes coincide; a beam needs a positive length")]
    ZeroLength,
    #[error("orientation hint is parallel to the link axis")]
    DegenerateOrientation,
    #[error("stiffness matrix is not symmetric (relative asymmetry {asymmetry:e})")]
    Asymmetric { asymmetry: f64 },
    #[error(
        "stiffness matrix is not positive semi-definite (eigenvalue {min_eigenvalue:e}, largest {max_eigenvalue:e})"
    )]
    NotPositiveSemidefinite { min_eigenvalue: f64, max_eigenvalue: f64 },
    #[error("stiffness matrix does not have the rigid-body null space: {detail}")]
    NullSpaceMismatch { detail: String },
    #[error("non-finite value in link data")]
    NonFinite,
    #[error(transparent)]
    Screw(#[from] ScrewError),
}

fn positive(name: &'static str, value: f64) -> Result<f64, ElementError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(ElementError::NonPositive { name, value })
    }
}

/// Isotropic elastic material.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    /// Young's modulus E [Pa].
    pub youngs_modulus: f64,
    /// Shear modulus G [Pa].
    pub shear_modulus: f64,
}

impl Material {
    pub fn new(youngs_modulus: f64, shear_modulus: f64) -> Result<Self, ElementError> {
        Ok(Self {
            youngs_modulus: positive("E", youngs_modulus)?,
            shear_modulus: positive("G", shear_modulus)?,
        })
    }
}

/// Beam cross-section constants. `iy`/`iz` are second moments about the
/// local y/z axes; `torsion` is the torsion constant J.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossSection {
    pub area: f64,
    pub iy: f64,
    pub iz: f64,
    pub torsion: f64,
}

impl CrossSection {
    pub fn new(area: f64, iy: f64, iz: f64, torsion: f64) -> Result<Self, ElementError> {
        Ok(Self {
            area: positive("A", area)?,
            iy: positive("Iy", iy)?,
            iz: positive("Iz", iz)?,
            torsion: positive("J", torsion)?,
        })
    }

    /// Solid circular section of diameter `d`.
    pub fn circular(d: f64) -> Result<Self, ElementError> {
        let d = positive("diameter", d)?;
        let i = std::f64::consts::PI * d.powi(4) / 64.0;
        Self::new(std::f64::consts::PI * d * d / 4.0, i, i, 2.0 * i)
    }
}

/// Local-frame 12×12 stiffness of a free-free spatial Euler–Bernoulli beam
/// lying along local x. Ordering per node: `[u, v, w, θx, θy, θz]`.
pub fn beam_stiffness(mat: &Material, sec: &CrossSection, length: f64) -> Result<Matrix12, ElementError> {
    let l = positive("L", length)?;
    let mat = Material::new(mat.youngs_modulus, mat.shear_modulus)?;
    let sec = CrossSection::new(sec.area, sec.iy, sec.iz, sec.torsion)?;
    let e = mat.youngs_modulus;

    let mut k = Matrix12::zeros();
    let mut set = |i: usize, j: usize, v: f64| {
        k[(i, j)] = v;
        k[(j, i)] = v;
    };

    let axial = e * sec.area / l;
    set(0, 0, axial);
    set(6, 6, axial);
    set(0, 6, -axial);

    let torsion = mat.shear_modulus * sec.torsion / l;
    set(3, 3, torsion);
    set(9, 9, torsion);
    set(3, 9, -torsion);

    // v / θz, bending about local z
    let ez = e * sec.iz;
    set(1, 1, 12.0 * ez / l.powi(3));
    set(7, 7, 12.0 * ez / l.powi(3));
    set(1, 7, -12.0 * ez / l.powi(3));
    set(1, 5, 6.0 * ez / l.powi(2));
    set(1, 11, 6.0 * ez / l.powi(2));
    set(5, 7, -6.0 * ez / l.powi(2));
    set(7, 11, -6.0 * ez / l.powi(2));
    set(5, 5, 4.0 * ez / l);
    set(11, 11, 4.0 * ez / l);
    set(5, 11, 2.0 * ez / l);

    // w / θy, bending about local y
    let ey = e * sec.iy;
    set(2, 2, 12.0 * ey / l.powi(3));
    set(8, 8, 12.0 * ey / l.powi(3));
    set(2, 8, -12.0 * ey / l.powi(3));
    set(2, 4, -6.0 * ey / l.powi(2));
    set(2, 10, -6.0 * ey / l.powi(2));
    set(4, 8, 6.0 * ey / l.powi(2));
    set(8, 10, 6.0 * ey / l.powi(2));
    set(4, 4, 4.0 * ey / l);
    set(10, 10, 4.0 * ey / l);
    set(4, 10, 2.0 * ey / l);

    Ok(k)
}

/// Local beam frame: x along `axis`, y = normalize(hint × x), z = x × y.
///
/// Without a hint, world z is used, or world y when the axis is within 1e-6
/// of vertical.
pub fn local_frame(axis: &Vector3<f64>, hint: Option<&Vector3<f64>>) -> Result<Rotation, ElementError> {
    if axis.iter().any(|v| !v.is_finite()) {
        return Err(ElementError::NonFinite);
    }
    let length = axis.norm();
    if length == 0.0 {
        return Err(ElementError::ZeroLength);
    }
    let x = axis / length;
    let up = match hint {
        Some(h) => {
            if h.iter().any(|v| !v.is_finite()) {
                return Err(ElementError::NonFinite);
            }
            *h
        }
        None if x.z.abs() > 1.0 - 1e-6 => Vector3::y(),
        None => Vector3::z(),
    };
    let y = up.cross(&x);
    if y.norm() <= 1e-9 * up.norm() || up.norm() == 0.0 {
        return Err(ElementError::DegenerateOrientation);
    }
    let y = y.normalize();
    let z = x.cross(&y);
    Ok(Rotation::new(Matrix3::from_columns(&[x, y, z]))?)
}

/// Link whose elasticity is described by a 12×12 global-frame stiffness.
#[derive(Debug, Clone, PartialEq)]
pub struct FlexibleLink {
    pub node_i: NodeIdx,
    pub node_j: NodeIdx,
    stiffness: Matrix12,
    d: Vector3<f64>,
}

/// `[[I], [D]]`: the six rigid-body motions of a link as end-twist pairs.
fn rigid_motions(d: &Vector3<f64>) -> SMatrix<f64, 12, 6> {
    let mut r = SMatrix::<f64, 12, 6>::zeros();
    r.fixed_view_mut::<6, 6>(0, 0).copy_from(&Matrix6::identity());
    r.fixed_view_mut::<6, 6>(6, 0).copy_from(&transport_matrix(d).matrix());
    r
}

impl FlexibleLink {
    /// Beam between `p_i` and `p_j`, rotated into the global frame.
    pub fn beam(
        node_i: NodeIdx,
        node_j: NodeIdx,
        p_i: &Vector3<f64>,
        p_j: &Vector3<f64>,
        mat: &Material,
        sec: &CrossSection,
        orientation_hint: Option<&Vector3<f64>>,
    ) -> Result<Self, ElementError> {
        let d = p_j - p_i;
        let frame = local_frame(&d, orientation_hint)?;
        let local = beam_stiffness(mat, sec, d.norm())?;
        let stiffness = rotate_stiffness(&local, &frame)?;
        Ok(Self {
            node_i,
            node_j,
            stiffness,
            d,
        })
    }

    /// Link from an externally identified stiffness matrix, after checking
    /// symmetry, positive semi-definiteness and the rigid-body null space.
    pub fn custom(node_i: NodeIdx, node_j: NodeIdx, k: Matrix12, d: Vector3<f64>) -> Result<Self, ElementError> {
        if k.iter().chain(d.iter()).any(|v| !v.is_finite()) {
            return Err(ElementError::NonFinite);
        }
        let asymmetry = relative_asymmetry(&k);
        if asymmetry > 1e-9 {
            return Err(ElementError::Asymmetric { asymmetry });
        }
        let sym = (k + k.transpose()) * 0.5;
        let eig = sym.symmetric_eigenvalues();
        let max_eigenvalue = eig.max();
        let min_eigenvalue = eig.min();
        if max_eigenvalue <= 0.0 {
            return Err(ElementError::NullSpaceMismatch {
                detail: "matrix has no positive stiffness".into(),
            });
        }
        if min_eigenvalue < -1e-6 * max_eigenvalue {
            return Err(ElementError::NotPositiveSemidefinite {
                min_eigenvalue,
                max_eigenvalue,
            });
        }
        let zero_count = eig.iter().filter(|&&l| l.abs() < 1e-9 * max_eigenvalue).count();
        let rigid = rigid_motions(&d);
        let leak = (k * rigid).amax();
        let tolerance = 1e-8 * k.amax() * rigid.amax();
        if leak > tolerance {
            return Err(ElementError::NullSpaceMismatch {
                detail: format!("rigid-body motion produces end wrench of size {leak:e}"),
            });
        }
        if zero_count != 6 {
            return Err(ElementError::NullSpaceMismatch {
                detail: format!("expected 6 zero eigenvalues, found {zero_count}"),
            });
        }
        Ok(Self {
            node_i,
            node_j,
            stiffness: k,
            d,
        })
    }

    pub fn stiffness(&self) -> &Matrix12 {
        &self.stiffness
    }

    /// 6×6 sub-block `K_ab`, with `a, b ∈ {1, 2}`.
    pub fn block(&self, a: usize, b: usize) -> Matrix6<f64> {
        assert!((1..=2).contains(&a) && (1..=2).contains(&b));
        self.stiffness.fixed_view::<6, 6>(6 * (a - 1), 6 * (b - 1)).into_owned()
    }

    /// Geometry vector from node i to node j.
    pub fn offset(&self) -> &Vector3<f64> {
        &self.d
    }

    pub fn rows(&self) -> ConstraintBlock {
        flexible_link_rows(self)
    }
}

/// `K · [Δt_i; Δt_j] − [W_i; W_j] = 0`.
pub fn flexible_link_rows(link: &FlexibleLink) -> ConstraintBlock {
    let k = DMatrix::from_fn(12, 12, |r, c| link.stiffness[(r, c)]);
    let mut block = ConstraintBlock::empty();
    block.push_rows(
        vec![
            (link.node_i, VarKind::Deflection, k.columns(0, 6).into_owned()),
            (link.node_j, VarKind::Deflection, k.columns(6, 6).into_owned()),
            (link.node_i, VarKind::Wrench, -DMatrix::identity(12, 6)),
            (link.node_j, VarKind::Wrench, {
                let mut m = DMatrix::zeros(12, 6);
                m.view_mut((6, 0), (6, 6)).fill_with_identity();
                -m
            }),
        ],
        DVector::zeros(12),
    );
    block
}

/// Link whose flexibility is negligible.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidLink {
    pub node_i: NodeIdx,
    pub node_j: NodeIdx,
    pub d: Vector3<f64>,
}

impl RigidLink {
    pub fn new(node_i: NodeIdx, node_j: NodeIdx, d: Vector3<f64>) -> Result<Self, ElementError> {
        if d.iter().any(|v| !v.is_finite()) {
            return Err(ElementError::NonFinite);
        }
        Ok(Self { node_i, node_j, d })
    }

    pub fn rows(&self) -> ConstraintBlock {
        rigid_link_rows(self)
    }
}

/// `[D, −I]·[Δt_i; Δt_j] = 0` (kinematics) and `[I, Dᵀ]·[W_i; W_j] = 0` (statics).
pub fn rigid_link_rows(link: &RigidLink) -> ConstraintBlock {
    let d = transport_matrix(&link.d).matrix();
    let dyn6 = |m: &Matrix6<f64>| DMatrix::from_fn(6, 6, |r, c| m[(r, c)]);
    let mut block = ConstraintBlock::empty();
    block.push_rows(
        vec![
            (link.node_i, VarKind::Deflection, dyn6(&d)),
            (link.node_j, VarKind::Deflection, -DMatrix::identity(6, 6)),
        ],
        DVector::zeros(6),
    );
    block.push_rows(
        vec![
            (link.node_i, VarKind::Wrench, DMatrix::identity(6, 6)),
            (link.node_j, VarKind::Wrench, dyn6(&d.transpose())),
        ],
        DVector::zeros(6),
    );
    block
}
