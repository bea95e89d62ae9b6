//! Structural checks on a resolved model.
//!
//! Counting rule: each link gives 12 equations, each joint 6 per member end,
//! each support 6, and each free node (loaded, or the end effector) 6. With
//! 12 unknowns per node (deflection and wrench), a well-formed model has
//! exactly as many equations as unknowns.

use serde::Serialize;

use super::ManipulatorModel;
use crate::connections::{JointKind, COINCIDENCE_TOLERANCE};
use crate::rows::NodeIdx;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IssueCode {
    NodeNotInLink,
    NodeInSeveralLinks,
    NodeUnbound,
    NodeBoundTwice,
    DuplicateLoad,
    LoadOnSupport,
    LoadOnPassiveJoint,
    EndEffectorSupported,
    EndEffectorWithoutBalance,
    JointNotCoincident,
    EquationCountMismatch,
    EndEffectorLoadIgnored,
}

impl IssueCode {
    pub fn as_str(&self) -> &'static str {
        match self {
            IssueCode::NodeNotInLink => "NODE_NOT_IN_LINK",
            IssueCode::NodeInSeveralLinks => "NODE_IN_SEVERAL_LINKS",
            IssueCode::NodeUnbound => "NODE_UNBOUND",
            IssueCode::NodeBoundTwice => "NODE_BOUND_TWICE",
            IssueCode::DuplicateLoad => "DUPLICATE_LOAD",
            IssueCode::LoadOnSupport => "LOAD_ON_SUPPORT",
            IssueCode::LoadOnPassiveJoint => "LOAD_ON_PASSIVE_JOINT",
            IssueCode::EndEffectorSupported => "END_EFFECTOR_SUPPORTED",
            IssueCode::EndEffectorWithoutBalance => "END_EFFECTOR_WITHOUT_BALANCE",
            IssueCode::JointNotCoincident => "JOINT_NOT_COINCIDENT",
            IssueCode::EquationCountMismatch => "EQUATION_COUNT_MISMATCH",
            IssueCode::EndEffectorLoadIgnored => "END_EFFECTOR_LOAD_IGNORED",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Issue {
    pub code: IssueCode,
    pub message: String,
    pub entity: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub errors: Vec<Issue>,
    pub warnings: Vec<Issue>,
    pub equation_count: usize,
    pub unknown_count: usize,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn has_error(&self, code: IssueCode) -> bool {
        self.errors.iter().any(|e| e.code == code)
    }

    fn error(&mut self, code: IssueCode, entity: impl Into<String>, message: String) {
        self.errors.push(Issue {
            code,
            message,
            entity: Some(entity.into()),
        });
    }
}

#[derive(Default)]
struct NodeUse {
    link_ends: usize,
    joints: Vec<usize>,
    supports: usize,
    loads: usize,
}

pub fn validate(model: &ManipulatorModel) -> ValidationReport {
    let n = model.nodes().len();
    let mut report = ValidationReport {
        errors: Vec::new(),
        warnings: Vec::new(),
        equation_count: 0,
        unknown_count: 12 * n,
    };
    let mut uses: Vec<NodeUse> = (0..n).map(|_| NodeUse::default()).collect();
    for link in model.links() {
        for node in link.model.nodes() {
            uses[node.0].link_ends += 1;
        }
    }
    for (k, joint) in model.joints().iter().enumerate() {
        for node in &joint.spec.nodes {
            uses[node.0].joints.push(k);
        }
    }
    for s in model.supports() {
        uses[s.node.0].supports += 1;
    }
    for l in model.loads() {
        uses[l.node.0].loads += 1;
    }
    let ee = model.end_effector();
    let id = |idx: usize| model.nodes()[idx].id.as_str();

    let mut equations = 12 * model.links().len();
    equations += model.joints().iter().map(|j| j.spec.equation_count()).sum::<usize>();
    equations += 6 * model.supports().len();

    for (k, u) in uses.iter().enumerate() {
        let name = id(k);
        match u.link_ends {
            0 => report.error(
                IssueCode::NodeNotInLink,
                name,
                format!("node '{name}' is not the end of any link"),
            ),
            1 => {}
            c => report.error(
                IssueCode::NodeInSeveralLinks,
                name,
                format!("node '{name}' is an end of {c} links; each node belongs to exactly one link end"),
            ),
        }

        let bindings = u.joints.len() + u.supports;
        let is_ee = NodeIdx(k) == ee;
        if bindings == 0 {
            // free nodes get their equations from a load (or the end-effector designation)
            if u.loads == 0 && !is_ee {
                report.error(
                    IssueCode::NodeUnbound,
                    name,
                    format!("node '{name}' is not bound to a joint, support or load"),
                );
            }
            equations += 6 * u.loads.max(usize::from(is_ee));
        } else {
            if bindings > 1 {
                report.error(
                    IssueCode::NodeBoundTwice,
                    name,
                    format!("node '{name}' is bound by {bindings} joints/supports; exactly one is allowed"),
                );
            }
            if u.supports > 0 {
                // loads at supported nodes would add rows that no unknown balances
                equations += 6 * u.loads;
            }
        }

        if u.loads > 1 {
            report.error(
                IssueCode::DuplicateLoad,
                name,
                format!("node '{name}' carries {} load declarations", u.loads),
            );
        }
        if u.loads > 0 && u.supports > 0 {
            report.error(
                IssueCode::LoadOnSupport,
                name,
                format!("node '{name}' carries both a load and a support"),
            );
        }
        let passive_joint = u
            .joints
            .iter()
            .map(|&j| &model.joints()[j])
            .find(|j| matches!(j.spec.kind, JointKind::Passive(_)));
        if let Some(joint) = passive_joint {
            if u.loads > 0 {
                report.error(
                    IssueCode::LoadOnPassiveJoint,
                    name,
                    format!(
                        "node '{name}' is loaded but sits in passive joint '{}', which has no wrench-balance rows",
                        joint.id
                    ),
                );
            }
            if is_ee {
                report.error(
                    IssueCode::EndEffectorWithoutBalance,
                    name,
                    format!(
                        "end effector '{name}' sits in passive joint '{}', which has no wrench-balance rows",
                        joint.id
                    ),
                );
            }
        }
        if is_ee && u.supports > 0 {
            report.error(
                IssueCode::EndEffectorSupported,
                name,
                format!("end effector '{name}' carries a support"),
            );
        }
    }

    for joint in model.joints() {
        let first = model.position(joint.spec.nodes[0]);
        let distance = joint
            .spec
            .nodes
            .iter()
            .map(|&nd| (model.position(nd) - first).norm())
            .fold(0.0, f64::max);
        if !(distance <= COINCIDENCE_TOLERANCE) {
            report.error(
                IssueCode::JointNotCoincident,
                format!("joint '{}'", joint.id),
                format!(
                    "joint '{}' connects nodes {distance:e} m apart; joined nodes must coincide",
                    joint.id
                ),
            );
        }
    }

    if let Some(load) = model.load_at(ee) {
        if load.wrench.to_vector().iter().any(|&v| v != 0.0) {
            report.warnings.push(Issue {
                code: IssueCode::EndEffectorLoadIgnored,
                message: format!(
                    "load declared at end effector '{}' is not part of the stiffness computation; pass it to solve instead",
                    id(ee.0)
                ),
                entity: Some(id(ee.0).to_string()),
            });
        }
    }

    report.equation_count = equations;
    if equations != report.unknown_count {
        report.errors.push(Issue {
            code: IssueCode::EquationCountMismatch,
            message: format!(
                "{equations} equations for {} unknowns ({} nodes)",
                report.unknown_count, n
            ),
            entity: None,
        });
    }
    report
}
