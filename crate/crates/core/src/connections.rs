//! Joint, support and external-load equation generators.
//!
//! A joint's free directions are given as unit twists at the joint node
//! (revolute `[0; u]`, prismatic `[u; 0]`). The constrained directions are
//! their orthonormal complement in R⁶, so both the compatibility rows
//! (`Λ_r · Δt`) and the no-transmission rows (`Λ_free · W`) use the natural
//! twist–wrench pairing.
//!
//! Spring sign: the wrench a spring applies to the link end it is attached to
//! opposes that end's deflection relative to the other side, i.e.
//! `Λ_e·W_i = −Ke·Λ_e·(Δt_i − Δt_j) + w⁰`, where `w⁰` is the preload
//! expressed along the free directions.

use nalgebra::{DMatrix, DVector, Vector3, Vector6};
use thiserror::Error;

use crate::rows::{ConstraintBlock, NodeIdx, VarKind};
use crate::screw::Wrench;

/// Largest distance [m] between nodes tied by a joint.
pub const COINCIDENCE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConnectionError {
    #[error("free-direction rows are linearly dependent (smallest singular value {sigma_min:e})")]
    RankDeficientFreeRows { sigma_min: f64 },
    #[error("{count} free directions given; this connection needs between 1 and 5")]
    FreeCountOutOfRange { count: usize },
    #[error("joint stiffness must be symmetric positive definite")]
    StiffnessNotSpd,
    #[error("joint stiffness is {rows}×{cols} but there are {free} free directions")]
    StiffnessDimension { rows: usize, cols: usize, free: usize },
    #[error("preload has {len} components but there are {free} free directions")]
    PreloadDimension { len: usize, free: usize },
    #[error("joint nodes are {distance:e} m apart; joined nodes must coincide")]
    NonCoincident { distance: f64 },
    #[error("{kind} joint needs {expected} nodes, got {got}")]
    NodeCount {
        kind: &'static str,
        expected: &'static str,
        got: usize,
    },
    #[error("joint lists the same node twice")]
    RepeatedNode,
    #[error("a load needs at least one member end")]
    NoMembers,
    #[error("non-finite value in connection data")]
    NonFinite,
}

/// Orthonormal split of R⁶ into free and constrained twist directions.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionBasis {
    free: DMatrix<f64>,
    constrained: DMatrix<f64>,
}

fn gram_schmidt_residual(v: &Vector6<f64>, basis: &[Vector6<f64>]) -> Vector6<f64> {
    let mut r = *v;
    // two passes keep the result orthogonal to working precision
    for _ in 0..2 {
        for b in basis {
            r -= b * b.dot(&r);
        }
    }
    r
}

/// Builds the basis from free twist rows.
///
/// Free rows are orthonormalized in the given order; the complement is built
/// greedily from the canonical unit vectors, always taking the one with the
/// largest remaining component (lowest index on ties).
pub fn complement_basis(free_rows: &[Vector6<f64>]) -> Result<SelectionBasis, ConnectionError> {
    if free_rows.iter().any(|r| r.iter().any(|v| !v.is_finite())) {
        return Err(ConnectionError::NonFinite);
    }
    if free_rows.len() > 6 {
        return Err(ConnectionError::FreeCountOutOfRange { count: free_rows.len() });
    }
    if !free_rows.is_empty() {
        let m = DMatrix::from_fn(free_rows.len(), 6, |r, c| free_rows[r][c]);
        let sv = m.singular_values();
        let sigma_min = sv.min();
        if sigma_min <= 1e-9 {
            return Err(ConnectionError::RankDeficientFreeRows { sigma_min });
        }
    }

    let mut free = Vec::with_capacity(free_rows.len());
    for row in free_rows {
        let r = gram_schmidt_residual(row, &free);
        free.push(r.normalize());
    }

    let mut all = free.clone();
    let mut constrained = Vec::new();
    let mut remaining: Vec<usize> = (0..6).collect();
    while all.len() < 6 {
        let (pos, residual) = remaining
            .iter()
            .enumerate()
            .map(|(pos, &k)| (pos, gram_schmidt_residual(&Vector6::ith(k, 1.0), &all)))
            .fold(None::<(usize, Vector6<f64>)>, |best, (pos, r)| match best {
                Some((_, b)) if b.norm() >= r.norm() => best,
                _ => Some((pos, r)),
            })
            .expect("fewer than six directions chosen");
        remaining.remove(pos);
        let unit = residual.normalize();
        all.push(unit);
        constrained.push(unit);
    }

    let to_matrix = |rows: &[Vector6<f64>]| DMatrix::from_fn(rows.len(), 6, |r, c| rows[r][c]);
    Ok(SelectionBasis {
        free: to_matrix(&free),
        constrained: to_matrix(&constrained),
    })
}

impl SelectionBasis {
    /// `p × 6` free (passive or elastic) directions.
    pub fn free(&self) -> &DMatrix<f64> {
        &self.free
    }

    /// `r × 6` constrained directions, `r = 6 − p`.
    pub fn constrained(&self) -> &DMatrix<f64> {
        &self.constrained
    }

    pub fn free_count(&self) -> usize {
        self.free.nrows()
    }

    pub fn constrained_count(&self) -> usize {
        self.constrained.nrows()
    }

    fn check_partial(&self) -> Result<(), ConnectionError> {
        match self.free_count() {
            1..=5 => Ok(()),
            count => Err(ConnectionError::FreeCountOutOfRange { count }),
        }
    }
}

/// Spring data shared by elastic joints, drive stiffness and elastic supports.
#[derive(Debug, Clone, PartialEq)]
pub struct ElasticParams {
    basis: SelectionBasis,
    stiffness: DMatrix<f64>,
    preload: DVector<f64>,
}

impl ElasticParams {
    /// `stiffness` is `e × e` over the free directions; `preload` (default
    /// zero) is the spring wrench along the free directions at zero stretch.
    pub fn new(
        basis: SelectionBasis,
        stiffness: DMatrix<f64>,
        preload: Option<DVector<f64>>,
    ) -> Result<Self, ConnectionError> {
        basis.check_partial()?;
        let free = basis.free_count();
        if stiffness.nrows() != free || stiffness.ncols() != free {
            return Err(ConnectionError::StiffnessDimension {
                rows: stiffness.nrows(),
                cols: stiffness.ncols(),
                free,
            });
        }
        if stiffness.iter().any(|v| !v.is_finite()) {
            return Err(ConnectionError::NonFinite);
        }
        let scale = stiffness.amax();
        if (&stiffness - stiffness.transpose()).amax() > 1e-12 * scale {
            return Err(ConnectionError::StiffnessNotSpd);
        }
        if stiffness.clone().cholesky().is_none() {
            return Err(ConnectionError::StiffnessNotSpd);
        }
        let preload = preload.unwrap_or_else(|| DVector::zeros(free));
        if preload.len() != free {
            return Err(ConnectionError::PreloadDimension {
                len: preload.len(),
                free,
            });
        }
        if preload.iter().any(|v| !v.is_finite()) {
            return Err(ConnectionError::NonFinite);
        }
        Ok(Self {
            basis,
            stiffness,
            preload,
        })
    }

    pub fn basis(&self) -> &SelectionBasis {
        &self.basis
    }

    pub fn stiffness(&self) -> &DMatrix<f64> {
        &self.stiffness
    }

    pub fn preload(&self) -> &DVector<f64> {
        &self.preload
    }

    pub fn with_stiffness(&self, stiffness: DMatrix<f64>) -> Result<Self, ConnectionError> {
        Self::new(self.basis.clone(), stiffness, Some(self.preload.clone()))
    }

    pub fn with_preload(&self, preload: DVector<f64>) -> Result<Self, ConnectionError> {
        Self::new(self.basis.clone(), self.stiffness.clone(), Some(preload))
    }

    pub fn has_preload(&self) -> bool {
        self.preload.iter().any(|&v| v != 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Actuation {
    /// Drive holds its position rigidly.
    Locked,
    /// Drive behaves as a spring along its actuated (free) directions.
    DriveStiffness(ElasticParams),
}

#[derive(Debug, Clone, PartialEq)]
pub enum JointKind {
    Rigid,
    Passive(SelectionBasis),
    Elastic(ElasticParams),
    Actuated(Actuation),
}

impl JointKind {
    pub fn name(&self) -> &'static str {
        match self {
            JointKind::Rigid => "rigid",
            JointKind::Passive(_) => "passive",
            JointKind::Elastic(_) => "elastic",
            JointKind::Actuated(_) => "actuated",
        }
    }

    pub fn elastic_params(&self) -> Option<&ElasticParams> {
        match self {
            JointKind::Elastic(p) | JointKind::Actuated(Actuation::DriveStiffness(p)) => Some(p),
            _ => None,
        }
    }
}

/// A node id paired with its position, as seen by the row generators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointNode {
    pub node: NodeIdx,
    pub position: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointSpec {
    pub kind: JointKind,
    pub nodes: Vec<NodeIdx>,
}

impl JointSpec {
    pub fn new(kind: JointKind, nodes: Vec<NodeIdx>) -> Result<Self, ConnectionError> {
        let got = nodes.len();
        let ok = match kind {
            JointKind::Rigid => got >= 2,
            _ => got == 2,
        };
        if !ok {
            let expected = if matches!(kind, JointKind::Rigid) {
                "at least 2"
            } else {
                "exactly 2"
            };
            return Err(ConnectionError::NodeCount {
                kind: kind.name(),
                expected,
                got,
            });
        }
        let mut sorted = nodes.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != nodes.len() {
            return Err(ConnectionError::RepeatedNode);
        }
        if let JointKind::Passive(basis) = &kind {
            basis.check_partial()?;
        }
        Ok(Self { kind, nodes })
    }

    /// Rows for this joint, with the node positions looked up by `position`.
    pub fn rows(&self, position: impl Fn(NodeIdx) -> Vector3<f64>) -> Result<ConstraintBlock, ConnectionError> {
        let members: Vec<JointNode> = self
            .nodes
            .iter()
            .map(|&node| JointNode {
                node,
                position: position(node),
            })
            .collect();
        match &self.kind {
            JointKind::Rigid => multi_rigid_joint_rows(&members),
            JointKind::Passive(basis) => passive_joint_rows(members[0], members[1], basis),
            JointKind::Elastic(params) => elastic_joint_rows(members[0], members[1], params),
            JointKind::Actuated(mode) => actuated_joint_rows(members[0], members[1], mode),
        }
    }

    /// Scalar equations this joint contributes: six per member node.
    pub fn equation_count(&self) -> usize {
        6 * self.nodes.len()
    }
}

fn check_coincident(nodes: &[JointNode]) -> Result<(), ConnectionError> {
    let first = nodes[0].position;
    for n in &nodes[1..] {
        let distance = (n.position - first).norm();
        if !(distance <= COINCIDENCE_TOLERANCE) {
            return Err(ConnectionError::NonCoincident { distance });
        }
    }
    Ok(())
}

fn identity() -> DMatrix<f64> {
    DMatrix::identity(6, 6)
}

/// `Δt_i − Δt_j = 0` and `W_i + W_j = 0`.
pub fn rigid_joint_rows(a: JointNode, b: JointNode) -> Result<ConstraintBlock, ConnectionError> {
    multi_rigid_joint_rows(&[a, b])
}

/// `Δt_{n1} = Δt_{nk}` for `k = 2..m` and `Σ W_{nk} = 0`: `6m` rows.
pub fn multi_rigid_joint_rows(nodes: &[JointNode]) -> Result<ConstraintBlock, ConnectionError> {
    if nodes.len() < 2 {
        return Err(ConnectionError::NodeCount {
            kind: "rigid",
            expected: "at least 2",
            got: nodes.len(),
        });
    }
    check_coincident(nodes)?;
    let mut block = ConstraintBlock::empty();
    for other in &nodes[1..] {
        block.push_rows(
            vec![
                (nodes[0].node, VarKind::Deflection, identity()),
                (other.node, VarKind::Deflection, -identity()),
            ],
            DVector::zeros(6),
        );
    }
    let members: Vec<NodeIdx> = nodes.iter().map(|n| n.node).collect();
    block.push_balance_rows(&members, Vector6::zeros());
    Ok(block)
}

/// `r` compatibility rows, `r` transmitted-wrench rows and `p + p`
/// no-transmission rows along the free directions: 12 rows.
pub fn passive_joint_rows(
    a: JointNode,
    b: JointNode,
    basis: &SelectionBasis,
) -> Result<ConstraintBlock, ConnectionError> {
    basis.check_partial()?;
    check_coincident(&[a, b])?;
    let lr = basis.constrained().clone();
    let lp = basis.free().clone();
    let (r, p) = (lr.nrows(), lp.nrows());
    let mut block = ConstraintBlock::empty();
    block.push_rows(
        vec![
            (a.node, VarKind::Deflection, lr.clone()),
            (b.node, VarKind::Deflection, -lr.clone()),
        ],
        DVector::zeros(r),
    );
    block.push_rows(
        vec![(a.node, VarKind::Wrench, lr.clone()), (b.node, VarKind::Wrench, lr)],
        DVector::zeros(r),
    );
    block.push_rows(vec![(a.node, VarKind::Wrench, lp.clone())], DVector::zeros(p));
    block.push_rows(vec![(b.node, VarKind::Wrench, lp)], DVector::zeros(p));
    Ok(block)
}

/// `r` compatibility rows, six balance rows `W_i + W_j = 0`, and `e` spring
/// rows `Λ_e·W_i + Ke·Λ_e·(Δt_i − Δt_j) = w⁰`: 12 rows.
pub fn elastic_joint_rows(
    a: JointNode,
    b: JointNode,
    params: &ElasticParams,
) -> Result<ConstraintBlock, ConnectionError> {
    check_coincident(&[a, b])?;
    let lr = params.basis.constrained().clone();
    let le = params.basis.free().clone();
    let k_le = &params.stiffness * &le;
    let mut block = ConstraintBlock::empty();
    block.push_rows(
        vec![
            (a.node, VarKind::Deflection, lr.clone()),
            (b.node, VarKind::Deflection, -lr.clone()),
        ],
        DVector::zeros(lr.nrows()),
    );
    block.push_balance_rows(&[a.node, b.node], Vector6::zeros());
    block.push_rows(
        vec![
            (a.node, VarKind::Wrench, le),
            (a.node, VarKind::Deflection, k_le.clone()),
            (b.node, VarKind::Deflection, -k_le),
        ],
        params.preload.clone(),
    );
    Ok(block)
}

/// A locked drive is a rigid joint; a compliant drive is an elastic joint
/// whose free directions are the actuated ones.
pub fn actuated_joint_rows(a: JointNode, b: JointNode, mode: &Actuation) -> Result<ConstraintBlock, ConnectionError> {
    match mode {
        Actuation::Locked => rigid_joint_rows(a, b),
        Actuation::DriveStiffness(params) => elastic_joint_rows(a, b, params),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SupportKind {
    Rigid,
    Passive(SelectionBasis),
    Elastic(ElasticParams),
}

impl SupportKind {
    pub fn name(&self) -> &'static str {
        match self {
            SupportKind::Rigid => "rigid",
            SupportKind::Passive(_) => "passive",
            SupportKind::Elastic(_) => "elastic",
        }
    }
}

/// Connection of one link end to the fixed base.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportSpec {
    pub node: NodeIdx,
    pub kind: SupportKind,
}

impl SupportSpec {
    pub fn new(node: NodeIdx, kind: SupportKind) -> Result<Self, ConnectionError> {
        if let SupportKind::Passive(basis) = &kind {
            basis.check_partial()?;
        }
        Ok(Self { node, kind })
    }

    pub fn rows(&self) -> Result<ConstraintBlock, ConnectionError> {
        match &self.kind {
            SupportKind::Rigid => Ok(rigid_support_rows(self.node)),
            SupportKind::Passive(basis) => passive_support_rows(self.node, basis),
            SupportKind::Elastic(params) => Ok(elastic_support_rows(self.node, params)),
        }
    }
}

/// `Δt_j = 0`.
pub fn rigid_support_rows(node: NodeIdx) -> ConstraintBlock {
    let mut block = ConstraintBlock::empty();
    block.push_rows(vec![(node, VarKind::Deflection, identity())], DVector::zeros(6));
    block
}

/// `Λ_r·Δt_j = 0` and `Λ_p·W_j = 0`: six rows.
pub fn passive_support_rows(node: NodeIdx, basis: &SelectionBasis) -> Result<ConstraintBlock, ConnectionError> {
    basis.check_partial()?;
    let mut block = ConstraintBlock::empty();
    block.push_rows(
        vec![(node, VarKind::Deflection, basis.constrained().clone())],
        DVector::zeros(basis.constrained_count()),
    );
    block.push_rows(
        vec![(node, VarKind::Wrench, basis.free().clone())],
        DVector::zeros(basis.free_count()),
    );
    Ok(block)
}

/// `Λ_r·Δt_j = 0` and `Λ_e·W_j + Ke·Λ_e·Δt_j = w⁰`: six rows.
pub fn elastic_support_rows(node: NodeIdx, params: &ElasticParams) -> ConstraintBlock {
    let le = params.basis.free().clone();
    let mut block = ConstraintBlock::empty();
    block.push_rows(
        vec![(node, VarKind::Deflection, params.basis.constrained().clone())],
        DVector::zeros(params.basis.constrained_count()),
    );
    block.push_rows(
        vec![
            (node, VarKind::Wrench, le.clone()),
            (node, VarKind::Deflection, &params.stiffness * le),
        ],
        params.preload.clone(),
    );
    block
}

/// External wrench at a node that is not bound by a joint or support.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadSpec {
    pub node: NodeIdx,
    pub wrench: Wrench,
}

/// `Σ_k W_k = W_e` over the member ends meeting at the loaded node.
pub fn external_load_rows(members: &[NodeIdx], wrench: &Wrench) -> Result<ConstraintBlock, ConnectionError> {
    if members.is_empty() {
        return Err(ConnectionError::NoMembers);
    }
    let mut block = ConstraintBlock::empty();
    block.push_balance_rows(members, wrench.to_vector());
    Ok(block)
}
