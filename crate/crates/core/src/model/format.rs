//! JSON document layout of a model file.
//!
//! These types mirror the file one-to-one; nothing is resolved or checked
//! beyond JSON shape. [`super::ManipulatorModel::from_doc`] turns them into
//! the solver-facing model.

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Only file-format version understood by this crate.
pub const MSA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    pub msa_version: u32,
    pub nodes: Vec<NodeDoc>,
    #[serde(default)]
    pub links: Vec<LinkDoc>,
    #[serde(default)]
    pub joints: Vec<JointDoc>,
    #[serde(default)]
    pub supports: Vec<SupportDoc>,
    #[serde(default)]
    pub loads: Vec<LoadDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_effector: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDoc {
    pub id: String,
    pub position: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkType {
    Beam,
    Rigid,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialDoc {
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "G")]
    pub g: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionDoc {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "Iy")]
    pub iy: f64,
    #[serde(rename = "Iz")]
    pub iz: f64,
    #[serde(rename = "J")]
    pub j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkDoc {
    pub id: String,
    #[serde(rename = "type")]
    pub kind: LinkType,
    pub nodes: [String; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material: Option<MaterialDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub section: Option<SectionDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation_hint: Option<[f64; 3]>,
    /// 144 numbers, row-major, global frame.
    #[serde(default, rename = "K", skip_serializing_if = "Option::is_none")]
    pub stiffness: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointType {
    Rigid,
    Passive,
    Elastic,
    Actuated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActuationMode {
    Locked,
    DriveStiffness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointDoc {
    pub id: String,
    #[serde(rename = "type")]
    pub kind: JointType,
    pub nodes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub free_twists: Option<Vec<[f64; 6]>>,
    /// `e × e`, row-major.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stiffness: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preload: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ActuationMode>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SupportType {
    Rigid,
    Passive,
    Elastic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupportDoc {
    pub node: String,
    #[serde(rename = "type")]
    pub kind: SupportType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub free_twists: Option<Vec<[f64; 6]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stiffness: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preload: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadDoc {
    pub node: String,
    /// `[Fx, Fy, Fz, Mx, My, Mz]`.
    pub wrench: [f64; 6],
}

impl ModelDoc {
    /// Parses the JSON text without resolving references.
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        serde_json::from_str(text).map_err(|e| ModelError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model documents always serialize")
    }
}
