//! Equation rows produced by link, joint, support and load generators.
//!
//! A [`ConstraintBlock`] is a small group of scalar equations written over
//! the per-node deflection and wrench 6-vectors. Generators know nothing
//! about global column numbering; the assembly step maps `(node, kind)` pairs
//! onto columns.

use std::ops::Range;

use nalgebra::{DMatrix, DVector, Vector6};

/// Position of a node in the model's node list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeIdx(pub usize);

/// Which of the two 6-vectors attached to a node a coefficient multiplies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    Deflection,
    Wrench,
}

/// Coefficients of one node variable over a contiguous row range of a block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTerm {
    pub first_row: usize,
    pub node: NodeIdx,
    pub kind: VarKind,
    /// `k × 6`, covering rows `first_row..first_row + k`.
    pub coeff: DMatrix<f64>,
}

impl BlockTerm {
    pub fn rows(&self) -> Range<usize> {
        self.first_row..self.first_row + self.coeff.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintBlock {
    terms: Vec<BlockTerm>,
    rhs: DVector<f64>,
    balance: Option<usize>,
}

impl ConstraintBlock {
    pub fn empty() -> Self {
        Self {
            terms: Vec::new(),
            rhs: DVector::zeros(0),
            balance: None,
        }
    }

    /// Appends `coeffs.nrows()` equations `Σ coeff · var = rhs`.
    ///
    /// All coefficient matrices must share the row count of `rhs`.
    pub fn push_rows(&mut self, coeffs: Vec<(NodeIdx, VarKind, DMatrix<f64>)>, rhs: DVector<f64>) {
        let first_row = self.rhs.len();
        for (node, kind, coeff) in coeffs {
            assert_eq!(coeff.nrows(), rhs.len(), "coefficient rows must match rhs length");
            assert_eq!(coeff.ncols(), 6, "coefficients act on 6-vectors");
            self.terms.push(BlockTerm {
                first_row,
                node,
                kind,
                coeff,
            });
        }
        let mut stacked = DVector::zeros(first_row + rhs.len());
        stacked.rows_mut(0, first_row).copy_from(&self.rhs);
        stacked.rows_mut(first_row, rhs.len()).copy_from(&rhs);
        self.rhs = stacked;
    }

    /// Appends six rows `Σ W_k = rhs` over the given nodes and marks them as
    /// the block's wrench-balance rows (where nodal external loads land).
    pub fn push_balance_rows(&mut self, nodes: &[NodeIdx], rhs: Vector6<f64>) {
        let first = self.rhs.len();
        let coeffs = nodes
            .iter()
            .map(|&n| (n, VarKind::Wrench, DMatrix::identity(6, 6)))
            .collect();
        self.push_rows(coeffs, DVector::from_column_slice(rhs.as_slice()));
        self.balance = Some(first);
    }

    pub fn nrows(&self) -> usize {
        self.rhs.len()
    }

    pub fn terms(&self) -> &[BlockTerm] {
        &self.terms
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.rhs
    }

    /// Rows carrying the full six-component wrench balance, if any.
    pub fn balance_rows(&self) -> Option<Range<usize>> {
        self.balance.map(|b| b..b + 6)
    }

    /// Adds an external wrench to the balance rows.
    ///
    /// Returns `false` when the block has no balance rows.
    pub fn add_external_wrench(&mut self, w: &Vector6<f64>) -> bool {
        match self.balance {
            Some(b) => {
                let mut rows = self.rhs.rows_mut(b, 6);
                rows += w;
                true
            }
            None => false,
        }
    }

    /// `A·x − rhs` for the values returned by `value`.
    pub fn residual(&self, value: impl Fn(NodeIdx, VarKind) -> Vector6<f64>) -> DVector<f64> {
        let mut r = -self.rhs.clone();
        for term in &self.terms {
            let v = value(term.node, term.kind);
            let contribution = &term.coeff * v;
            let mut rows = r.rows_mut(term.first_row, term.coeff.nrows());
            rows += contribution;
        }
        r
    }

    /// Dense coefficient matrix over the listed `(node, kind)` variables, in order.
    pub fn dense(&self, vars: &[(NodeIdx, VarKind)]) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.nrows(), 6 * vars.len());
        for term in &self.terms {
            let slot = vars
                .iter()
                .position(|&(n, k)| n == term.node && k == term.kind)
                .expect("variable not listed");
            let mut view = a.view_mut((term.first_row, 6 * slot), (term.coeff.nrows(), 6));
            view += &term.coeff;
        }
        a
    }
}
