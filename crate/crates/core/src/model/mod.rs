//! Manipulator description: nodes, links, joints, supports, loads and the
//! end-effector designation, resolved from a [`ModelDoc`].
//!
//! Resolution only checks what is needed to build each entity on its own
//! (references exist, ids are unique, element data is valid). Whole-model
//! structure — every node bound exactly once, equation counts — is the job
//! of [`validate`].

mod format;
mod validate;

use std::collections::HashMap;
use std::fmt;

use nalgebra::{DMatrix, DVector, Vector3, Vector6};
use thiserror::Error;

use crate::connections::{
    complement_basis, Actuation, ConnectionError, ElasticParams, JointKind, JointSpec, LoadSpec, SelectionBasis,
    SupportKind, SupportSpec,
};
use crate::elements::{CrossSection, ElementError, FlexibleLink, Material, RigidLink};
use crate::rows::{ConstraintBlock, NodeIdx};
use crate::screw::{Matrix12, Wrench};

pub use format::{
    ActuationMode, JointDoc, JointType, LinkDoc, LinkType, LoadDoc, MaterialDoc, ModelDoc, NodeDoc, SectionDoc,
    SupportDoc, SupportType, MSA_VERSION,
};
pub use validate::{validate, Issue, IssueCode, ValidationReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported msa_version {found} (this build reads version {MSA_VERSION})")]
    UnsupportedVersion { found: u32 },
    #[error("duplicate {kind} id '{id}'")]
    DuplicateId { kind: &'static str, id: String },
    #[error("{entity} references unknown node '{node}'")]
    UnknownNode { entity: String, node: String },
    #[error("model has no end_effector")]
    MissingEndEffector,
    #[error("{entity}: {message}")]
    Invalid { entity: String, message: String },
}

impl ModelError {
    fn invalid(entity: impl Into<String>, message: impl fmt::Display) -> Self {
        ModelError::Invalid {
            entity: entity.into(),
            message: message.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub position: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LinkModel {
    Flexible(Box<FlexibleLink>),
    Rigid(RigidLink),
}

impl LinkModel {
    pub fn nodes(&self) -> [NodeIdx; 2] {
        match self {
            LinkModel::Flexible(l) => [l.node_i, l.node_j],
            LinkModel::Rigid(l) => [l.node_i, l.node_j],
        }
    }

    pub fn rows(&self) -> ConstraintBlock {
        match self {
            LinkModel::Flexible(l) => l.rows(),
            LinkModel::Rigid(l) => l.rows(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub id: String,
    pub model: LinkModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub id: String,
    pub spec: JointSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManipulatorModel {
    nodes: Vec<Node>,
    links: Vec<Link>,
    joints: Vec<Joint>,
    supports: Vec<SupportSpec>,
    loads: Vec<LoadSpec>,
    end_effector: NodeIdx,
    lookup: HashMap<String, NodeIdx>,
}

/// Parses and resolves a model file.
pub fn parse_model(text: &str) -> Result<ManipulatorModel, ModelError> {
    ManipulatorModel::from_doc(&ModelDoc::from_json(text)?)
}

fn vec3(a: &[f64; 3]) -> Vector3<f64> {
    Vector3::new(a[0], a[1], a[2])
}

fn square_matrix(entity: &str, values: &[f64], size: usize) -> Result<DMatrix<f64>, ModelError> {
    if values.len() != size * size {
        return Err(ModelError::invalid(
            entity,
            format!(
                "stiffness has {} entries but {size} free directions need {}",
                values.len(),
                size * size
            ),
        ));
    }
    Ok(DMatrix::from_row_slice(size, size, values))
}

/// Unused optional fields are rejected so typos in the joint type surface.
fn forbid(entity: &str, present: bool, field: &str, kind: &str) -> Result<(), ModelError> {
    if present {
        Err(ModelError::invalid(
            entity,
            format!("'{field}' is not used by {kind} connections"),
        ))
    } else {
        Ok(())
    }
}

fn basis_from(entity: &str, free: &Option<Vec<[f64; 6]>>) -> Result<SelectionBasis, ModelError> {
    let rows = free
        .as_ref()
        .ok_or_else(|| ModelError::invalid(entity, "'free_twists' is required"))?;
    let rows: Vec<Vector6<f64>> = rows.iter().map(|r| Vector6::from_column_slice(r)).collect();
    let basis = complement_basis(&rows).map_err(|e| ModelError::invalid(entity, e))?;
    if !(1..=5).contains(&basis.free_count()) {
        return Err(ModelError::invalid(
            entity,
            ConnectionError::FreeCountOutOfRange {
                count: basis.free_count(),
            },
        ));
    }
    Ok(basis)
}

fn elastic_from(
    entity: &str,
    free: &Option<Vec<[f64; 6]>>,
    stiffness: &Option<Vec<f64>>,
    preload: &Option<Vec<f64>>,
) -> Result<ElasticParams, ModelError> {
    let basis = basis_from(entity, free)?;
    let values = stiffness
        .as_ref()
        .ok_or_else(|| ModelError::invalid(entity, "'stiffness' is required"))?;
    let k = square_matrix(entity, values, basis.free_count())?;
    let preload = preload.as_ref().map(|p| DVector::from_column_slice(p));
    ElasticParams::new(basis, k, preload).map_err(|e| ModelError::invalid(entity, e))
}

impl ManipulatorModel {
    pub fn from_doc(doc: &ModelDoc) -> Result<Self, ModelError> {
        if doc.msa_version != MSA_VERSION {
            return Err(ModelError::UnsupportedVersion { found: doc.msa_version });
        }

        let mut lookup = HashMap::new();
        let mut nodes = Vec::with_capacity(doc.nodes.len());
        for (k, n) in doc.nodes.iter().enumerate() {
            if lookup.insert(n.id.clone(), NodeIdx(k)).is_some() {
                return Err(ModelError::DuplicateId {
                    kind: "node",
                    id: n.id.clone(),
                });
            }
            if n.position.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::invalid(
                    format!("node '{}'", n.id),
                    "position is not finite",
                ));
            }
            nodes.push(Node {
                id: n.id.clone(),
                position: vec3(&n.position),
            });
        }
        let resolve = |entity: &str, id: &str| {
            lookup.get(id).copied().ok_or_else(|| ModelError::UnknownNode {
                entity: entity.to_string(),
                node: id.to_string(),
            })
        };

        let mut seen = HashMap::new();
        let mut links = Vec::with_capacity(doc.links.len());
        for l in &doc.links {
            if seen.insert(l.id.as_str(), ()).is_some() {
                return Err(ModelError::DuplicateId {
                    kind: "link",
                    id: l.id.clone(),
                });
            }
            let entity = format!("link '{}'", l.id);
            let ni = resolve(&entity, &l.nodes[0])?;
            let nj = resolve(&entity, &l.nodes[1])?;
            let (pi, pj) = (nodes[ni.0].position, nodes[nj.0].position);
            let element_err = |e: ElementError| ModelError::invalid(entity.as_str(), e);
            let kind = match l.kind {
                LinkType::Beam => "beam",
                LinkType::Rigid => "rigid",
                LinkType::Custom => "custom",
            };
            if l.kind != LinkType::Beam {
                forbid(&entity, l.material.is_some(), "material", kind)?;
                forbid(&entity, l.section.is_some(), "section", kind)?;
                forbid(&entity, l.orientation_hint.is_some(), "orientation_hint", kind)?;
            }
            if l.kind != LinkType::Custom {
                forbid(&entity, l.stiffness.is_some(), "K", kind)?;
            }
            let model = match l.kind {
                LinkType::Beam => {
                    let m = l
                        .material
                        .ok_or_else(|| ModelError::invalid(entity.as_str(), "'material' is required"))?;
                    let s = l
                        .section
                        .ok_or_else(|| ModelError::invalid(entity.as_str(), "'section' is required"))?;
                    let mat = Material::new(m.e, m.g).map_err(element_err)?;
                    let sec = CrossSection::new(s.a, s.iy, s.iz, s.j).map_err(element_err)?;
                    let hint = l.orientation_hint.as_ref().map(vec3);
                    LinkModel::Flexible(Box::new(
                        FlexibleLink::beam(ni, nj, &pi, &pj, &mat, &sec, hint.as_ref()).map_err(element_err)?,
                    ))
                }
                LinkType::Rigid => LinkModel::Rigid(RigidLink::new(ni, nj, pj - pi).map_err(element_err)?),
                LinkType::Custom => {
                    let values = l
                        .stiffness
                        .as_ref()
                        .ok_or_else(|| ModelError::invalid(entity.as_str(), "'K' is required"))?;
                    if values.len() != 144 {
                        return Err(ModelError::invalid(
                            entity,
                            format!("'K' needs 144 entries, got {}", values.len()),
                        ));
                    }
                    let k = Matrix12::from_row_slice(values);
                    LinkModel::Flexible(Box::new(FlexibleLink::custom(ni, nj, k, pj - pi).map_err(element_err)?))
                }
            };
            links.push(Link {
                id: l.id.clone(),
                model,
            });
        }

        let mut seen = HashMap::new();
        let mut joints = Vec::with_capacity(doc.joints.len());
        for j in &doc.joints {
            if seen.insert(j.id.as_str(), ()).is_some() {
                return Err(ModelError::DuplicateId {
                    kind: "joint",
                    id: j.id.clone(),
                });
            }
            let entity = format!("joint '{}'", j.id);
            let members = j
                .nodes
                .iter()
                .map(|n| resolve(&entity, n))
                .collect::<Result<Vec<_>, _>>()?;
            let kind = match j.kind {
                JointType::Rigid => {
                    forbid(&entity, j.free_twists.is_some(), "free_twists", "rigid")?;
                    forbid(&entity, j.stiffness.is_some(), "stiffness", "rigid")?;
                    forbid(&entity, j.preload.is_some(), "preload", "rigid")?;
                    forbid(&entity, j.mode.is_some(), "mode", "rigid")?;
                    JointKind::Rigid
                }
                JointType::Passive => {
                    forbid(&entity, j.stiffness.is_some(), "stiffness", "passive")?;
                    forbid(&entity, j.preload.is_some(), "preload", "passive")?;
                    forbid(&entity, j.mode.is_some(), "mode", "passive")?;
                    JointKind::Passive(basis_from(&entity, &j.free_twists)?)
                }
                JointType::Elastic => {
                    forbid(&entity, j.mode.is_some(), "mode", "elastic")?;
                    JointKind::Elastic(elastic_from(&entity, &j.free_twists, &j.stiffness, &j.preload)?)
                }
                JointType::Actuated => match j.mode {
                    None => return Err(ModelError::invalid(entity, "'mode' is required for actuated joints")),
                    Some(ActuationMode::Locked) => {
                        forbid(&entity, j.free_twists.is_some(), "free_twists", "locked actuated")?;
                        forbid(&entity, j.stiffness.is_some(), "stiffness", "locked actuated")?;
                        forbid(&entity, j.preload.is_some(), "preload", "locked actuated")?;
                        JointKind::Actuated(Actuation::Locked)
                    }
                    Some(ActuationMode::DriveStiffness) => JointKind::Actuated(Actuation::DriveStiffness(
                        elastic_from(&entity, &j.free_twists, &j.stiffness, &j.preload)?,
                    )),
                },
            };
            let spec = JointSpec::new(kind, members).map_err(|e| ModelError::invalid(entity.as_str(), e))?;
            joints.push(Joint { id: j.id.clone(), spec });
        }

        let mut supports = Vec::with_capacity(doc.supports.len());
        for s in &doc.supports {
            let entity = format!("support at '{}'", s.node);
            let node = resolve(&entity, &s.node)?;
            let kind = match s.kind {
                SupportType::Rigid => {
                    forbid(&entity, s.free_twists.is_some(), "free_twists", "rigid")?;
                    forbid(&entity, s.stiffness.is_some(), "stiffness", "rigid")?;
                    forbid(&entity, s.preload.is_some(), "preload", "rigid")?;
                    SupportKind::Rigid
                }
                SupportType::Passive => {
                    forbid(&entity, s.stiffness.is_some(), "stiffness", "passive")?;
                    forbid(&entity, s.preload.is_some(), "preload", "passive")?;
                    SupportKind::Passive(basis_from(&entity, &s.free_twists)?)
                }
                SupportType::Elastic => {
                    SupportKind::Elastic(elastic_from(&entity, &s.free_twists, &s.stiffness, &s.preload)?)
                }
            };
            supports.push(SupportSpec::new(node, kind).map_err(|e| ModelError::invalid(entity.as_str(), e))?);
        }

        let mut loads = Vec::with_capacity(doc.loads.len());
        for l in &doc.loads {
            let entity = format!("load at '{}'", l.node);
            let node = resolve(&entity, &l.node)?;
            if l.wrench.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::invalid(entity, "wrench is not finite"));
            }
            loads.push(LoadSpec {
                node,
                wrench: Wrench::from_array(l.wrench),
            });
        }

        let ee = doc.end_effector.as_ref().ok_or(ModelError::MissingEndEffector)?;
        let end_effector = resolve("end_effector", ee)?;

        Ok(Self {
            nodes,
            links,
            joints,
            supports,
            loads,
            end_effector,
            lookup,
        })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, idx: NodeIdx) -> &Node {
        &self.nodes[idx.0]
    }

    pub fn node_index(&self, id: &str) -> Option<NodeIdx> {
        self.lookup.get(id).copied()
    }

    pub fn position(&self, idx: NodeIdx) -> Vector3<f64> {
        self.nodes[idx.0].position
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn supports(&self) -> &[SupportSpec] {
        &self.supports
    }

    pub fn loads(&self) -> &[LoadSpec] {
        &self.loads
    }

    pub fn end_effector(&self) -> NodeIdx {
        self.end_effector
    }

    /// Joint a node belongs to, if any (first match when bound twice).
    pub fn joint_of(&self, node: NodeIdx) -> Option<&Joint> {
        self.joints.iter().find(|j| j.spec.nodes.contains(&node))
    }

    pub fn support_of(&self, node: NodeIdx) -> Option<&SupportSpec> {
        self.supports.iter().find(|s| s.node == node)
    }

    /// External load declared at a node, ignoring duplicates.
    pub fn load_at(&self, node: NodeIdx) -> Option<&LoadSpec> {
        self.loads.iter().find(|l| l.node == node)
    }

    /// True if any elastic joint or support carries a nonzero preload.
    pub fn has_preload(&self) -> bool {
        self.joints
            .iter()
            .filter_map(|j| j.spec.kind.elastic_params())
            .chain(self.supports.iter().filter_map(|s| match &s.kind {
                SupportKind::Elastic(p) => Some(p),
                _ => None,
            }))
            .any(|p| p.has_preload())
    }
}

/// Bounding-box diagonal of the node cloud, or 1 m when it is degenerate.
pub fn characteristic_length(model: &ManipulatorModel) -> f64 {
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for n in &model.nodes {
        lo = lo.inf(&n.position);
        hi = hi.sup(&n.position);
    }
    let diag = (hi - lo).norm();
    if diag.is_finite() && diag > 0.0 {
        diag
    } else {
        1.0
    }
}
