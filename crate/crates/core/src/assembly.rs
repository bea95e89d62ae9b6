//! Aggregation of every link, joint, support and load equation into one
//! square sparse system over all nodal deflections and wrenches, and its
//! split into the end-effector extraction rows and the reduced system.
//!
//! Columns: all deflections first (`6·k`), then all wrenches (`6N + 6·k`),
//! nodes in declaration order. Rows follow entity order: links, joints,
//! supports, then free-node loads. Each row group keeps a provenance tag.

use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::ops::Range;
use std::path::Path;

use nalgebra::{DMatrix, DVector, Matrix6, Vector6};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::connections::{external_load_rows, ConnectionError};
use crate::model::{validate, ManipulatorModel, ValidationReport};
use crate::rows::{ConstraintBlock, NodeIdx, VarKind};
use crate::screw::Wrench;
use crate::sparse::{write_matrix_market_vector, CsrMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("model failed validation with {} error(s)", .0.errors.len())]
    Invalid(ValidationReport),
    #[error("{entity}: {source}")]
    Connection {
        entity: String,
        #[source]
        source: ConnectionError,
    },
    #[error("assembled {rows} equations for {cols} unknowns")]
    CountMismatch { rows: usize, cols: usize },
}

/// Column layout of the global system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VariableIndex {
    nodes: usize,
}

impl VariableIndex {
    pub fn new(nodes: usize) -> Self {
        Self { nodes }
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    pub fn ncols(&self) -> usize {
        12 * self.nodes
    }

    /// First of the six columns holding `kind` of `node`.
    pub fn column(&self, node: NodeIdx, kind: VarKind) -> usize {
        assert!(node.0 < self.nodes, "node index out of range");
        match kind {
            VarKind::Deflection => 6 * node.0,
            VarKind::Wrench => 6 * self.nodes + 6 * node.0,
        }
    }

    pub fn columns(&self, node: NodeIdx, kind: VarKind) -> Range<usize> {
        let first = self.column(node, kind);
        first..first + 6
    }

    /// Inverse of [`column`](Self::column): node, variable kind and component.
    pub fn describe(&self, col: usize) -> (NodeIdx, VarKind, usize) {
        let half = 6 * self.nodes;
        if col < half {
            (NodeIdx(col / 6), VarKind::Deflection, col % 6)
        } else {
            (NodeIdx((col - half) / 6), VarKind::Wrench, col % 6)
        }
    }
}

pub fn index_variables(model: &ManipulatorModel) -> VariableIndex {
    VariableIndex::new(model.nodes().len())
}

/// Which model entity produced a row group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "id", rename_all = "lowercase")]
pub enum RowSource {
    Link(String),
    Joint(String),
    Support(String),
    Load(String),
}

impl fmt::Display for RowSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowSource::Link(id) => write!(f, "link '{id}'"),
            RowSource::Joint(id) => write!(f, "joint '{id}'"),
            RowSource::Support(id) => write!(f, "support at '{id}'"),
            RowSource::Load(id) => write!(f, "load at '{id}'"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowGroup {
    pub source: RowSource,
    pub rows: Range<usize>,
}

#[derive(Debug, Clone)]
pub struct GlobalSystem {
    matrix: CsrMatrix,
    rhs: DVector<f64>,
    index: VariableIndex,
    groups: Vec<RowGroup>,
    end_effector: NodeIdx,
    ee_rows: Range<usize>,
    ee_load: Vector6<f64>,
}

impl GlobalSystem {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.rhs
    }

    pub fn index(&self) -> &VariableIndex {
        &self.index
    }

    pub fn groups(&self) -> &[RowGroup] {
        &self.groups
    }

    pub fn end_effector(&self) -> NodeIdx {
        self.end_effector
    }

    /// The six wrench-balance rows at the end effector.
    pub fn end_effector_rows(&self) -> Range<usize> {
        self.ee_rows.clone()
    }

    /// Load declared at the end effector (included in `rhs`).
    pub fn end_effector_load(&self) -> Vector6<f64> {
        self.ee_load
    }

    pub fn row_source(&self, row: usize) -> &RowSource {
        let k = self.groups.partition_point(|g| g.rows.end <= row);
        &self.groups[k].source
    }

    /// Writes `system.mtx`, `rhs.mtx` and `rows.txt` (one provenance line per row).
    pub fn write_matrix_market(&self, dir: &Path) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        self.matrix
            .write_matrix_market(BufWriter::new(File::create(dir.join("system.mtx"))?))?;
        write_matrix_market_vector(&self.rhs, BufWriter::new(File::create(dir.join("rhs.mtx"))?))?;
        let mut rows = BufWriter::new(File::create(dir.join("rows.txt"))?);
        for g in &self.groups {
            for r in g.rows.clone() {
                let ee = if self.ee_rows.contains(&r) {
                    " [end-effector balance]"
                } else {
                    ""
                };
                writeln!(rows, "{} {}{}", r + 1, g.source, ee)?;
            }
        }
        rows.flush()
    }
}

struct Blocks {
    blocks: Vec<(RowSource, ConstraintBlock)>,
    /// Block holding the end-effector balance rows.
    ee_block: usize,
}

fn model_blocks(model: &ManipulatorModel) -> Result<Blocks, AssemblyError> {
    let mut blocks: Vec<(RowSource, ConstraintBlock)> = model
        .links()
        .par_iter()
        .map(|l| (RowSource::Link(l.id.clone()), l.model.rows()))
        .collect();

    let ee = model.end_effector();
    let mut ee_block = None;
    let node_id = |n: NodeIdx| model.node(n).id.clone();
    let mut in_joint = vec![None; model.nodes().len()];

    for joint in model.joints() {
        let mut block = joint
            .spec
            .rows(|n| model.position(n))
            .map_err(|source| AssemblyError::Connection {
                entity: format!("joint '{}'", joint.id),
                source,
            })?;
        for &n in &joint.spec.nodes {
            in_joint[n.0] = Some(blocks.len());
            if let Some(load) = model.load_at(n) {
                if !block.add_external_wrench(&load.wrench.to_vector()) {
                    // validation rejects loads on joints without balance rows
                    unreachable!("load on joint without balance rows passed validation");
                }
            }
            if n == ee {
                ee_block = Some(blocks.len());
            }
        }
        blocks.push((RowSource::Joint(joint.id.clone()), block));
    }

    for support in model.supports() {
        let block = support.rows().map_err(|source| AssemblyError::Connection {
            entity: format!("support at '{}'", node_id(support.node)),
            source,
        })?;
        blocks.push((RowSource::Support(node_id(support.node)), block));
    }

    for (k, node) in model.nodes().iter().enumerate() {
        let idx = NodeIdx(k);
        if in_joint[k].is_some() || model.support_of(idx).is_some() {
            continue;
        }
        let load = model.load_at(idx);
        if load.is_none() && idx != ee {
            continue;
        }
        let wrench = load.map(|l| l.wrench).unwrap_or_else(Wrench::zero);
        let block = external_load_rows(&[idx], &wrench).map_err(|source| AssemblyError::Connection {
            entity: format!("load at '{}'", node.id),
            source,
        })?;
        if idx == ee {
            ee_block = Some(blocks.len());
        }
        blocks.push((RowSource::Load(node.id.clone()), block));
    }

    Ok(Blocks {
        blocks,
        ee_block: ee_block.expect("validated end effector has balance rows"),
    })
}

/// Builds the global system; the model must pass [`validate`].
pub fn assemble(model: &ManipulatorModel) -> Result<GlobalSystem, AssemblyError> {
    let report = validate(model);
    if !report.is_valid() {
        return Err(AssemblyError::Invalid(report));
    }
    let Blocks { blocks, ee_block } = model_blocks(model)?;
    let index = index_variables(model);
    let nrows: usize = blocks.iter().map(|(_, b)| b.nrows()).sum();
    if nrows != index.ncols() {
        return Err(AssemblyError::CountMismatch {
            rows: nrows,
            cols: index.ncols(),
        });
    }

    let mut triplets = Vec::new();
    let mut rhs = DVector::zeros(nrows);
    let mut groups = Vec::with_capacity(blocks.len());
    let mut ee_rows = 0..0;
    let mut offset = 0;
    for (k, (source, block)) in blocks.into_iter().enumerate() {
        for term in block.terms() {
            let col0 = index.column(term.node, term.kind);
            for r in 0..term.coeff.nrows() {
                for c in 0..6 {
                    let v = term.coeff[(r, c)];
                    if v != 0.0 {
                        triplets.push((offset + term.first_row + r, col0 + c, v));
                    }
                }
            }
        }
        rhs.rows_mut(offset, block.nrows()).copy_from(block.rhs());
        if k == ee_block {
            let b = block.balance_rows().expect("end-effector block has balance rows");
            ee_rows = offset + b.start..offset + b.end;
        }
        groups.push(RowGroup {
            source,
            rows: offset..offset + block.nrows(),
        });
        offset += block.nrows();
    }

    let ee_load = model
        .load_at(model.end_effector())
        .map(|l| l.wrench.to_vector())
        .unwrap_or_else(Vector6::zeros);

    Ok(GlobalSystem {
        matrix: CsrMatrix::from_triplets(nrows, nrows, triplets),
        rhs,
        index,
        groups,
        end_effector: model.end_effector(),
        ee_rows,
        ee_load,
    })
}

/// The global system split around the end effector.
///
/// With `y` the unknowns other than `Δt_e` (wrenches first, then the other
/// deflections) the system reads
///
/// ```text
/// M·y + C_e·Δt_e = b
/// B_e·y + E_e·Δt_e = b_e + W_e
/// ```
///
/// so `W_e = (E_e − B_e·M⁻¹·C_e)·Δt_e + B_e·M⁻¹·b − b_e`.
#[derive(Debug, Clone)]
pub struct PartitionedSystem {
    pub m: CsrMatrix,
    pub c_e: DMatrix<f64>,
    pub b: DVector<f64>,
    pub b_e_rows: CsrMatrix,
    pub e_e: Matrix6<f64>,
    /// End-effector balance right-hand side without the external wrench itself.
    pub b_e: Vector6<f64>,
    /// Global row of each `M` row.
    pub row_map: Vec<usize>,
    /// Global column of each `M` column.
    pub col_map: Vec<usize>,
    /// Global columns of `Δt_e`.
    pub ee_cols: Range<usize>,
}

pub fn partition(system: &GlobalSystem) -> PartitionedSystem {
    let index = system.index();
    let n = index.node_count();
    let ee = system.end_effector();
    let ee_cols = index.columns(ee, VarKind::Deflection);
    let ee_rows = system.end_effector_rows();

    let row_map: Vec<usize> = (0..12 * n).filter(|r| !ee_rows.contains(r)).collect();
    let wrench_cols = (0..n).flat_map(|k| index.columns(NodeIdx(k), VarKind::Wrench));
    let deflection_cols = (0..n)
        .filter(|&k| NodeIdx(k) != ee)
        .flat_map(|k| index.columns(NodeIdx(k), VarKind::Deflection));
    let col_map: Vec<usize> = wrench_cols.chain(deflection_cols).collect();
    let ee_row_list: Vec<usize> = ee_rows.clone().collect();
    let ee_col_list: Vec<usize> = ee_cols.clone().collect();

    let a = system.matrix();
    let m = a.submatrix(&row_map, &col_map);
    let c_e = a.submatrix(&row_map, &ee_col_list).to_dense();
    let b_e_rows = a.submatrix(&ee_row_list, &col_map);
    let e_dense = a.submatrix(&ee_row_list, &ee_col_list).to_dense();
    let e_e = Matrix6::from_fn(|r, c| e_dense[(r, c)]);
    let b = DVector::from_fn(row_map.len(), |k, _| system.rhs()[row_map[k]]);
    let b_e = Vector6::from_fn(|k, _| system.rhs()[ee_rows.start + k]) - system.end_effector_load();

    PartitionedSystem {
        m,
        c_e,
        b,
        b_e_rows,
        e_e,
        b_e,
        row_map,
        col_map,
        ee_cols,
    }
}
