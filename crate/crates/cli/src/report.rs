//! Serializable run reports and their text rendering.

use std::fmt::Write as _;

use msa_core::model::{Issue, ManipulatorModel, ValidationReport};
use msa_core::rows::VarKind;
use msa_core::screw::{Twist, Wrench};
use msa_core::solver::{
    support_reactions, ComplianceResult, FullState, MobilityReport, SolveWarning, StiffnessResult, UnboundedReport,
};
use nalgebra::Matrix6;
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct ModelSummary {
    pub nodes: usize,
    pub links: usize,
    pub joints: usize,
    pub supports: usize,
    pub loads: usize,
    pub end_effector: String,
    pub equations: usize,
    pub unknowns: usize,
}

impl ModelSummary {
    pub fn new(model: &ManipulatorModel, report: &ValidationReport) -> Self {
        Self {
            nodes: model.nodes().len(),
            links: model.links().len(),
            joints: model.joints().len(),
            supports: model.supports().len(),
            loads: model.loads().len(),
            end_effector: model.node(model.end_effector()).id.clone(),
            equations: report.equation_count,
            unknowns: report.unknown_count,
        }
    }
}

fn rows(m: &Matrix6<f64>) -> [[f64; 6]; 6] {
    std::array::from_fn(|r| std::array::from_fn(|c| m[(r, c)]))
}

#[derive(Debug, Serialize)]
pub struct WarningEntry {
    #[serde(flatten)]
    pub warning: SolveWarning,
    pub message: String,
}

pub fn warnings(list: &[SolveWarning]) -> Vec<WarningEntry> {
    list.iter()
        .map(|w| WarningEntry {
            warning: w.clone(),
            message: w.to_string(),
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct ValidateOutput<'a> {
    pub valid: bool,
    pub equations: usize,
    pub unknowns: usize,
    pub errors: &'a [Issue],
    pub warnings: &'a [Issue],
}

#[derive(Debug, Serialize)]
pub struct StiffnessOutput {
    pub model: ModelSummary,
    pub kc: [[f64; 6]; 6],
    pub w_offset: [f64; 6],
    /// `Kc⁻¹`, absent when Kc is singular.
    pub compliance: Option<[[f64; 6]; 6]>,
    /// `1/Cc[i,i]`: stiffness along each axis when only that wrench
    /// component is applied and the end effector is otherwise free.
    pub axis_stiffness: Option<[f64; 6]>,
    pub condition_estimate: f64,
    pub warnings: Vec<WarningEntry>,
    pub validation_warnings: Vec<Issue>,
}

impl StiffnessOutput {
    pub fn new(model: ModelSummary, s: &StiffnessResult, validation_warnings: Vec<Issue>) -> Self {
        let singular = s
            .warnings
            .iter()
            .any(|w| matches!(w, SolveWarning::RankDeficientStiffness { .. }));
        let compliance = if singular { None } else { s.kc.try_inverse() };
        Self {
            model,
            kc: rows(&s.kc),
            w_offset: s.w_offset.to_array(),
            axis_stiffness: compliance.map(|c| std::array::from_fn(|i| 1.0 / c[(i, i)])),
            compliance: compliance.as_ref().map(rows),
            condition_estimate: s.condition_estimate,
            warnings: warnings(&s.warnings),
            validation_warnings,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct NodeState {
    pub id: String,
    pub deflection: [f64; 6],
    pub wrench: [f64; 6],
}

#[derive(Debug, Serialize)]
pub struct Reaction {
    pub node: String,
    pub wrench: [f64; 6],
}

#[derive(Debug, Serialize)]
pub struct SolveOutput {
    pub model: ModelSummary,
    /// `stiffness` when solved through Kc, `compliance` when Kc is unbounded.
    pub route: &'static str,
    pub end_effector: String,
    pub ee_twist: [f64; 6],
    pub ee_wrench: [f64; 6],
    pub nodes: Vec<NodeState>,
    pub reactions: Vec<Reaction>,
    pub equilibrium_residual: f64,
    pub condition_estimate: f64,
    pub warnings: Vec<WarningEntry>,
    pub validation_warnings: Vec<Issue>,
}

pub struct SolveParts<'a> {
    pub route: &'static str,
    pub state: &'a FullState,
    pub residual: f64,
    pub condition_estimate: f64,
    pub warnings: &'a [SolveWarning],
}

impl SolveOutput {
    pub fn new(
        model: &ManipulatorModel,
        summary: ModelSummary,
        p: SolveParts<'_>,
        validation_warnings: Vec<Issue>,
    ) -> Self {
        let id = |n: msa_core::NodeIdx| model.node(n).id.clone();
        Self {
            model: summary,
            route: p.route,
            end_effector: id(p.state.end_effector),
            ee_twist: p.state.ee_twist.to_array(),
            ee_wrench: p.state.ee_wrench.to_array(),
            nodes: model
                .nodes()
                .iter()
                .enumerate()
                .map(|(k, n)| NodeState {
                    id: n.id.clone(),
                    deflection: p.state.deflections[k].to_array(),
                    wrench: p.state.wrenches[k].to_array(),
                })
                .collect(),
            reactions: support_reactions(p.state, model)
                .into_iter()
                .map(|(n, w)| Reaction {
                    node: id(n),
                    wrench: w.to_array(),
                })
                .collect(),
            equilibrium_residual: p.residual,
            condition_estimate: p.condition_estimate,
            warnings: warnings(p.warnings),
            validation_warnings,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct MotionEntry {
    pub node: String,
    pub kind: &'static str,
    pub vector: [f64; 6],
}

#[derive(Debug, Serialize)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum ErrorOutput {
    Parse {
        message: String,
    },
    Validation {
        errors: Vec<Issue>,
        warnings: Vec<Issue>,
        equations: usize,
        unknowns: usize,
    },
    Mechanism {
        message: String,
        condition_estimate: f64,
        nullity: Option<usize>,
        modes: Vec<Vec<MotionEntry>>,
    },
    UnboundedStiffness {
        message: String,
        compliance: Box<[[f64; 6]; 6]>,
        deflection_offset: [f64; 6],
        rigid_directions: Vec<[f64; 6]>,
    },
    SingularStiffness {
        message: String,
        free_directions: Vec<[f64; 6]>,
    },
    Inaccurate {
        message: String,
        backward_error: f64,
    },
    IllConditioned {
        message: String,
        condition_estimate: f64,
    },
    Usage {
        message: String,
    },
    Io {
        message: String,
    },
}

impl ErrorOutput {
    pub fn mechanism(message: String, report: &MobilityReport, model: &ManipulatorModel) -> Self {
        ErrorOutput::Mechanism {
            message,
            condition_estimate: report.condition_estimate,
            nullity: report.nullity,
            modes: report
                .modes
                .iter()
                .map(|mode| {
                    mode.components
                        .iter()
                        .map(|c| MotionEntry {
                            node: model.node(c.node).id.clone(),
                            kind: match c.kind {
                                VarKind::Deflection => "deflection",
                                VarKind::Wrench => "wrench",
                            },
                            vector: c.vector.into(),
                        })
                        .collect()
                })
                .collect(),
        }
    }

    pub fn unbounded(message: String, report: &UnboundedReport) -> Self {
        let ComplianceResult {
            cc, deflection_offset, ..
        } = &report.compliance;
        ErrorOutput::UnboundedStiffness {
            message,
            compliance: Box::new(rows(cc)),
            deflection_offset: deflection_offset.to_array(),
            rigid_directions: report.rigid_directions.iter().map(Wrench::to_array).collect(),
        }
    }

    pub fn singular(message: String, free: &[Twist]) -> Self {
        ErrorOutput::SingularStiffness {
            message,
            free_directions: free.iter().map(Twist::to_array).collect(),
        }
    }
}

fn vec6(v: &[f64; 6]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:>13.6e}")).collect();
    format!("[{}]", parts.join(" "))
}

fn matrix(out: &mut String, m: &[[f64; 6]; 6]) {
    for row in m {
        let _ = writeln!(out, "  {}", vec6(row));
    }
}

fn issues(out: &mut String, label: &str, list: &[Issue]) {
    for i in list {
        let _ = writeln!(out, "{label} [{}] {}", i.code.as_str(), i.message);
    }
}

fn summary(out: &mut String, s: &ModelSummary) {
    let _ = writeln!(
        out,
        "model: {} nodes, {} links, {} joints, {} supports, {} loads; end effector '{}'",
        s.nodes, s.links, s.joints, s.supports, s.loads, s.end_effector
    );
    let _ = writeln!(out, "equations: {}, unknowns: {}", s.equations, s.unknowns);
}

fn warning_lines(out: &mut String, list: &[WarningEntry]) {
    for w in list {
        let _ = writeln!(out, "warning: {}", w.message);
    }
}

pub fn validate_text(v: &ValidateOutput<'_>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "equations: {}, unknowns: {}", v.equations, v.unknowns);
    issues(&mut out, "error", v.errors);
    issues(&mut out, "warning", v.warnings);
    let _ = writeln!(out, "{}", if v.valid { "valid" } else { "invalid" });
    out
}

pub fn stiffness_text(s: &StiffnessOutput) -> String {
    let mut out = String::new();
    summary(&mut out, &s.model);
    issues(&mut out, "warning", &s.validation_warnings);
    let _ = writeln!(out, "Cartesian stiffness Kc:");
    matrix(&mut out, &s.kc);
    let _ = writeln!(out, "W_offset: {}", vec6(&s.w_offset));
    if let Some(c) = &s.compliance {
        let _ = writeln!(out, "Cartesian compliance Kc⁻¹:");
        matrix(&mut out, c);
    }
    if let Some(a) = &s.axis_stiffness {
        let _ = writeln!(out, "axis stiffness 1/Cc[i,i]: {}", vec6(a));
    }
    let _ = writeln!(out, "condition estimate: {:.3e}", s.condition_estimate);
    warning_lines(&mut out, &s.warnings);
    out
}

pub fn solve_text(s: &SolveOutput) -> String {
    let mut out = String::new();
    summary(&mut out, &s.model);
    issues(&mut out, "warning", &s.validation_warnings);
    let _ = writeln!(out, "end effector '{}' ({} route)", s.end_effector, s.route);
    let _ = writeln!(out, "  twist  {}", vec6(&s.ee_twist));
    let _ = writeln!(out, "  wrench {}", vec6(&s.ee_wrench));
    let width = s.nodes.iter().map(|n| n.id.len()).max().unwrap_or(0);
    let _ = writeln!(out, "nodes (deflection / wrench):");
    for n in &s.nodes {
        let _ = writeln!(out, "  {:<width$}  {}", n.id, vec6(&n.deflection));
        let _ = writeln!(out, "  {:<width$}  {}", "", vec6(&n.wrench));
    }
    let _ = writeln!(out, "support reactions:");
    for r in &s.reactions {
        let _ = writeln!(out, "  {:<width$}  {}", r.node, vec6(&r.wrench));
    }
    let _ = writeln!(out, "equilibrium residual: {:.3e}", s.equilibrium_residual);
    let _ = writeln!(out, "condition estimate: {:.3e}", s.condition_estimate);
    warning_lines(&mut out, &s.warnings);
    out
}

pub fn error_text(e: &ErrorOutput) -> String {
    let mut out = String::new();
    match e {
        ErrorOutput::Parse { message } | ErrorOutput::Usage { message } | ErrorOutput::Io { message } => {
            let _ = writeln!(out, "error: {message}");
        }
        ErrorOutput::Validation {
            errors,
            warnings,
            equations,
            unknowns,
        } => {
            let _ = writeln!(out, "equations: {equations}, unknowns: {unknowns}");
            issues(&mut out, "error", errors);
            issues(&mut out, "warning", warnings);
        }
        ErrorOutput::Mechanism {
            message,
            condition_estimate,
            modes,
            ..
        } => {
            let _ = writeln!(out, "error: {message}");
            let _ = writeln!(out, "condition estimate: {condition_estimate:.3e}");
            for (k, mode) in modes.iter().enumerate() {
                let _ = writeln!(out, "mode {}:", k + 1);
                for m in mode {
                    let _ = writeln!(out, "  {:<12} {:<10} {}", m.node, m.kind, vec6(&m.vector));
                }
            }
        }
        ErrorOutput::UnboundedStiffness {
            message,
            compliance,
            deflection_offset,
            rigid_directions,
        } => {
            let _ = writeln!(out, "error: {message}");
            let _ = writeln!(out, "Cartesian compliance Cc:");
            matrix(&mut out, compliance);
            let _ = writeln!(out, "deflection offset: {}", vec6(deflection_offset));
            for d in rigid_directions {
                let _ = writeln!(out, "rigid wrench direction: {}", vec6(d));
            }
        }
        ErrorOutput::SingularStiffness {
            message,
            free_directions,
        } => {
            let _ = writeln!(out, "error: {message}");
            for d in free_directions {
                let _ = writeln!(out, "free twist direction: {}", vec6(d));
            }
        }
        ErrorOutput::Inaccurate { message, .. } => {
            let _ = writeln!(out, "error: {message}");
        }
        ErrorOutput::IllConditioned { message, .. } => {
            let _ = writeln!(out, "error: {message}");
        }
    }
    out
}
