//! Cartesian stiffness, full internal states and support reactions.
//!
//! The reduced matrix `M` mixes deflection and wrench unknowns whose units
//! differ by many orders of magnitude, so it is equilibrated (row and column
//! scaling by powers of two) before factorization. Below [`SolverOptions::dense_limit`]
//! unknowns a dense partial-pivoting LU is used, above it the sparse LU.
//! One factorization serves the six `C_e` columns and the load vector.

use std::fmt;

use nalgebra::{DMatrix, DVector, Dyn, Matrix6, Vector6, LU};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::assembly::{assemble, partition, AssemblyError, GlobalSystem, PartitionedSystem};
use crate::model::ManipulatorModel;
use crate::oracle::dense_nullspace;
use crate::rows::{NodeIdx, VarKind};
use crate::screw::{relative_asymmetry, transport_wrench, Twist, Wrench};
use crate::sparse::{CsrMatrix, SparseLu};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Systems with fewer global unknowns than this use the dense LU.
    pub dense_limit: usize,
    /// Condition estimate above which a warning is raised.
    pub ill_conditioned: f64,
    /// Condition estimate above which `M` is treated as singular.
    pub singular: f64,
    /// Largest accepted normwise backward error of each solve.
    pub residual_gate: f64,
    /// Row/column equilibration before factorization.
    pub equilibrate: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            dense_limit: 600,
            ill_conditioned: 1e12,
            singular: 1e15,
            residual_gate: 1e-9,
            equilibrate: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "code", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SolveWarning {
    IllConditioned {
        estimate: f64,
    },
    AsymmetricStiffness {
        asymmetry: f64,
    },
    /// The end effector moves freely along these twists.
    RankDeficientStiffness {
        free_directions: Vec<[f64; 6]>,
    },
}

impl fmt::Display for SolveWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolveWarning::IllConditioned { estimate } => {
                write!(f, "reduced system is ill-conditioned (condition estimate {estimate:e})")
            }
            SolveWarning::AsymmetricStiffness { asymmetry } => write!(
                f,
                "Cartesian stiffness is asymmetric (relative {asymmetry:e}) without preload; check the model"
            ),
            SolveWarning::RankDeficientStiffness { free_directions } => write!(
                f,
                "Cartesian stiffness is singular; the end effector is free along {} direction(s)",
                free_directions.len()
            ),
        }
    }
}

/// Motion of one node variable within a mobility mode.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeMotion {
    pub node: NodeIdx,
    pub kind: VarKind,
    pub vector: Vector6<f64>,
}

/// Unit null vector of `M`, split into its nonzero node blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct MobilityMode {
    pub components: Vec<NodeMotion>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MobilityReport {
    pub condition_estimate: f64,
    /// Null-space dimension, when it could be computed.
    pub nullity: Option<usize>,
    pub modes: Vec<MobilityMode>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error("reduced system is singular: the model is a mechanism ({} mobility mode(s))", .0.nullity.map_or("unknown".to_string(), |n| n.to_string()))]
    Mobility(MobilityReport),
    #[error("Cartesian stiffness is unbounded: the end effector is rigidly held along {} direction(s)", .0.rigid_directions.len())]
    UnboundedStiffness(Box<UnboundedReport>),
    #[error("solve failed the residual gate (backward error {backward_error:e})")]
    Inaccurate { backward_error: f64 },
    #[error("Cartesian stiffness is singular: the end effector can move freely along {} direction(s)", .free_directions.len())]
    SingularStiffness { free_directions: Vec<Twist> },
}

/// Reduced matrix singular while the full system is not: the end-effector
/// compliance exists but is rank deficient, so no finite stiffness does.
#[derive(Debug, Clone, PartialEq)]
pub struct UnboundedReport {
    pub compliance: ComplianceResult,
    /// Unit wrenches producing no end-effector deflection.
    pub rigid_directions: Vec<Wrench>,
}

/// `Δt_e = Cc·W_e + deflection_offset`, from the full system.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplianceResult {
    pub cc: Matrix6<f64>,
    pub deflection_offset: Twist,
    pub condition_estimate: f64,
    pub warnings: Vec<SolveWarning>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StiffnessResult {
    pub kc: Matrix6<f64>,
    pub w_offset: Wrench,
    /// 1-norm condition estimate of the equilibrated reduced matrix.
    pub condition_estimate: f64,
    pub warnings: Vec<SolveWarning>,
}

/// Solved deflection and wrench of every node.
#[derive(Debug, Clone, PartialEq)]
pub struct FullState {
    pub deflections: Vec<Twist>,
    pub wrenches: Vec<Wrench>,
    pub end_effector: NodeIdx,
    pub ee_twist: Twist,
    /// External wrench acting at the end effector.
    pub ee_wrench: Wrench,
}

impl FullState {
    fn from_global(x: &DVector<f64>, ee: NodeIdx, ee_wrench: Wrench) -> Self {
        let n = x.len() / 12;
        let six = |start: usize| Vector6::from_fn(|k, _| x[start + k] + 0.0);
        let deflections: Vec<Twist> = (0..n).map(|k| Twist::from_vector(&six(6 * k))).collect();
        let wrenches = (0..n).map(|k| Wrench::from_vector(&six(6 * n + 6 * k))).collect();
        Self {
            ee_twist: deflections[ee.0],
            deflections,
            wrenches,
            end_effector: ee,
            ee_wrench,
        }
    }

    /// Stacked global unknown vector (deflections, then wrenches).
    pub fn to_global(&self) -> DVector<f64> {
        let n = self.deflections.len();
        let mut x = DVector::zeros(12 * n);
        for k in 0..n {
            x.rows_mut(6 * k, 6).copy_from(&self.deflections[k].to_vector());
            x.rows_mut(6 * n + 6 * k, 6).copy_from(&self.wrenches[k].to_vector());
        }
        x
    }
}

fn power_of_two(x: f64) -> f64 {
    2f64.powi(x.log2().round() as i32)
}

/// Ruiz equilibration: returns `(row_scale, col_scale)` such that every row
/// and column of `diag(r)·A·diag(c)` has max-norm close to one.
fn equilibrate(a: &CsrMatrix) -> (DVector<f64>, DVector<f64>) {
    let (nr, nc) = (a.nrows(), a.ncols());
    let mut r = DVector::from_element(nr, 1.0);
    let mut c = DVector::from_element(nc, 1.0);
    for _ in 0..20 {
        let mut row_max = vec![0.0f64; nr];
        let mut col_max = vec![0.0f64; nc];
        for (i, j, v) in a.triplets() {
            let s = (v * r[i] * c[j]).abs();
            row_max[i] = row_max[i].max(s);
            col_max[j] = col_max[j].max(s);
        }
        let off = row_max
            .iter()
            .chain(col_max.iter())
            .filter(|&&m| m > 0.0)
            .map(|&m| (m.log2()).abs())
            .fold(0.0, f64::max);
        if off <= 1.0 {
            break;
        }
        for i in 0..nr {
            if row_max[i] > 0.0 {
                r[i] *= power_of_two(1.0 / row_max[i].sqrt());
            }
        }
        for j in 0..nc {
            if col_max[j] > 0.0 {
                c[j] *= power_of_two(1.0 / col_max[j].sqrt());
            }
        }
    }
    (r, c)
}

enum Factor {
    Dense {
        lu: LU<f64, Dyn, Dyn>,
        l: DMatrix<f64>,
        u: DMatrix<f64>,
    },
    Sparse(SparseLu),
}

/// LU of `Â = diag(r)·A·diag(c)` with solves expressed in terms of `A`.
struct ScaledFactor {
    a_hat: CsrMatrix,
    row_scale: DVector<f64>,
    col_scale: DVector<f64>,
    factor: Factor,
    condition_estimate: f64,
}

/// Equilibrated matrix that could not be factorized, kept for diagnosis.
struct SingularSystem {
    a_hat: CsrMatrix,
    col_scale: DVector<f64>,
    condition_estimate: f64,
}

impl ScaledFactor {
    fn new(a: &CsrMatrix, opts: &SolverOptions, dense: bool) -> Result<Self, Box<SingularSystem>> {
        let (row_scale, col_scale) = if opts.equilibrate {
            equilibrate(a)
        } else {
            (
                DVector::from_element(a.nrows(), 1.0),
                DVector::from_element(a.ncols(), 1.0),
            )
        };
        let a_hat = a.scaled(&row_scale, &col_scale);
        let tiny = 64.0 * f64::EPSILON * a_hat.max_abs();
        let factor = if dense {
            let lu = a_hat.to_dense().lu();
            let u = lu.u();
            if u.diagonal().iter().all(|d| d.abs() > tiny) {
                let l = lu.l();
                Some(Factor::Dense { lu, l, u })
            } else {
                None
            }
        } else {
            SparseLu::factor(&a_hat).ok().map(Factor::Sparse)
        };
        let Some(factor) = factor else {
            return Err(Box::new(SingularSystem {
                a_hat,
                col_scale,
                condition_estimate: f64::INFINITY,
            }));
        };
        let mut f = ScaledFactor {
            a_hat,
            row_scale,
            col_scale,
            factor,
            condition_estimate: f64::NAN,
        };
        f.condition_estimate = f.estimate_condition();
        if f.condition_estimate <= opts.singular {
            Ok(f)
        } else {
            Err(Box::new(SingularSystem {
                condition_estimate: f.condition_estimate,
                a_hat: f.a_hat,
                col_scale: f.col_scale,
            }))
        }
    }

    fn solve_hat(&self, b: &DVector<f64>) -> DVector<f64> {
        match &self.factor {
            Factor::Dense { lu, .. } => lu.solve(b).expect("factor checked nonsingular"),
            Factor::Sparse(lu) => lu.solve(b),
        }
    }

    fn solve_hat_transpose(&self, b: &DVector<f64>) -> DVector<f64> {
        match &self.factor {
            Factor::Dense { lu, l, u } => {
                // Âᵀ = Uᵀ·Lᵀ·P
                let y = u.tr_solve_upper_triangular(b).expect("nonsingular U");
                let mut z = l.tr_solve_lower_triangular(&y).expect("unit L");
                lu.p().inv_permute_rows(&mut z);
                z
            }
            Factor::Sparse(lu) => lu.solve_transpose(b),
        }
    }

    /// Solves `A·x = b` with one refinement step; returns `x` and the
    /// normwise backward error of the scaled solve.
    fn solve(&self, b: &DVector<f64>) -> (DVector<f64>, f64) {
        let b_hat = b.component_mul(&self.row_scale);
        let mut y = self.solve_hat(&b_hat);
        let r = &b_hat - self.a_hat.mul_vec(&y);
        y += self.solve_hat(&r);
        let r = &b_hat - self.a_hat.mul_vec(&y);
        let denom = self.a_hat.norm_inf() * y.amax() + b_hat.amax();
        let backward = if denom > 0.0 { r.amax() / denom } else { 0.0 };
        (y.component_mul(&self.col_scale), backward)
    }

    /// Solves all right-hand sides in parallel, enforcing the residual gate.
    fn solve_all(&self, rhs: &[DVector<f64>], opts: &SolverOptions) -> Result<Vec<DVector<f64>>, SolveError> {
        let solved: Vec<(DVector<f64>, f64)> = rhs.par_iter().map(|b| self.solve(b)).collect();
        let backward_error = solved.iter().map(|s| s.1).fold(0.0, f64::max);
        if !(backward_error <= opts.residual_gate) {
            return Err(SolveError::Inaccurate { backward_error });
        }
        Ok(solved.into_iter().map(|s| s.0).collect())
    }

    /// Hager–Higham estimate of `‖Â‖₁·‖Â⁻¹‖₁`.
    fn estimate_condition(&self) -> f64 {
        let n = self.a_hat.nrows();
        if n == 0 {
            return 1.0;
        }
        let mut x = DVector::from_element(n, 1.0 / n as f64);
        let mut estimate = 0.0f64;
        let mut last_j = usize::MAX;
        for _ in 0..5 {
            let y = self.solve_hat(&x);
            estimate = estimate.max(y.lp_norm(1));
            let xi = y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
            let z = self.solve_hat_transpose(&xi);
            let j = z.iamax();
            if z[j].abs() <= z.dot(&x) || j == last_j {
                break;
            }
            last_j = j;
            x = DVector::zeros(n);
            x[j] = 1.0;
        }
        // alternating probe guards against the estimator stalling
        let denom = (n.max(2) - 1) as f64;
        let probe = DVector::from_fn(n, |i, _| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            sign * (1.0 + i as f64 / denom)
        });
        let alt = 2.0 * self.solve_hat(&probe).lp_norm(1) / (3.0 * n as f64);
        let cond = self.a_hat.norm_one() * estimate.max(alt);
        if cond.is_finite() {
            cond
        } else {
            f64::INFINITY
        }
    }

    fn warnings(&self, opts: &SolverOptions) -> Vec<SolveWarning> {
        if self.condition_estimate > opts.ill_conditioned {
            vec![SolveWarning::IllConditioned {
                estimate: self.condition_estimate,
            }]
        } else {
            Vec::new()
        }
    }
}

/// Null space of the full system, as node motions and wrenches.
fn mobility_report(singular: &SingularSystem, system: &GlobalSystem) -> MobilityReport {
    let a_hat = &singular.a_hat;
    if a_hat.ncols() > 2000 {
        return MobilityReport {
            condition_estimate: singular.condition_estimate,
            nullity: None,
            modes: Vec::new(),
        };
    }
    let basis = dense_nullspace(&a_hat.to_dense());
    let index = system.index();
    let modes = basis
        .column_iter()
        .map(|v| {
            let mut x = v.component_mul(&singular.col_scale);
            let norm = x.norm();
            if norm > 0.0 {
                x /= norm;
            }
            let cutoff = 1e-9 * x.amax();
            let mut components = Vec::new();
            for node in 0..index.node_count() {
                for kind in [VarKind::Deflection, VarKind::Wrench] {
                    let cols = index.columns(NodeIdx(node), kind);
                    let vector = Vector6::from_fn(|k, _| x[cols.start + k]);
                    if vector.amax() > cutoff {
                        components.push(NodeMotion {
                            node: NodeIdx(node),
                            kind,
                            vector,
                        });
                    }
                }
            }
            MobilityMode { components }
        })
        .collect();
    MobilityReport {
        condition_estimate: singular.condition_estimate,
        nullity: Some(basis.ncols()),
        modes,
    }
}

/// Right singular vectors of a 6×6 map with `σ ≤ 1e-9·σ_max`.
fn null_directions(m: &Matrix6<f64>) -> Vec<Vector6<f64>> {
    let svd = m.svd(false, true);
    let smax = svd.singular_values.max();
    let v_t = svd.v_t.expect("requested V");
    (0..6)
        .filter(|&k| !(svd.singular_values[k] > 1e-9 * smax))
        .map(|k| v_t.row(k).transpose())
        .collect()
}

fn use_dense(system: &GlobalSystem, opts: &SolverOptions) -> bool {
    system.index().ncols() < opts.dense_limit
}

/// Load-controlled analysis of the full system: the end-effector wrench is
/// given and every deflection (including `Δt_e`) is unknown. Works whenever
/// the structure is not a mechanism, even if some end-effector directions
/// are rigid.
pub struct ComplianceAnalysis {
    system: GlobalSystem,
    /// Responses to unit end-effector wrenches.
    x_w: DMatrix<f64>,
    /// Response to preloads and internal loads alone.
    x_0: DVector<f64>,
    compliance: ComplianceResult,
}

impl ComplianceAnalysis {
    pub fn new(model: &ManipulatorModel, opts: &SolverOptions) -> Result<Self, SolveError> {
        Self::from_system(assemble(model)?, opts)
    }

    fn from_system(system: GlobalSystem, opts: &SolverOptions) -> Result<Self, SolveError> {
        let factor = match ScaledFactor::new(system.matrix(), opts, use_dense(&system, opts)) {
            Ok(f) => f,
            Err(singular) => return Err(SolveError::Mobility(mobility_report(&singular, &system))),
        };
        let ee_rows = system.end_effector_rows();
        let mut base = system.rhs().clone();
        let ee_load = system.end_effector_load();
        let mut rhs = Vec::with_capacity(7);
        for k in 0..6 {
            base[ee_rows.start + k] -= ee_load[k];
            let mut unit = DVector::zeros(base.len());
            unit[ee_rows.start + k] = 1.0;
            rhs.push(unit);
        }
        rhs.push(base);
        let mut solved = factor.solve_all(&rhs, opts)?;
        let x_0 = solved.pop().expect("seven solutions");
        let x_w = DMatrix::from_columns(&solved);
        let ee_cols = system.index().columns(system.end_effector(), VarKind::Deflection);
        let cc = Matrix6::from_fn(|r, c| x_w[(ee_cols.start + r, c)]);
        let offset = Vector6::from_fn(|r, _| x_0[ee_cols.start + r]);
        Ok(Self {
            compliance: ComplianceResult {
                cc,
                deflection_offset: Twist::from_vector(&offset),
                condition_estimate: factor.condition_estimate,
                warnings: factor.warnings(opts),
            },
            system,
            x_w,
            x_0,
        })
    }

    pub fn compliance(&self) -> &ComplianceResult {
        &self.compliance
    }

    pub fn system(&self) -> &GlobalSystem {
        &self.system
    }

    pub fn solve_applied_wrench(&self, w_e: &Wrench) -> FullState {
        let w = DVector::from_column_slice(w_e.to_vector().as_slice());
        let x = &self.x_0 + &self.x_w * w;
        FullState::from_global(&x, self.system.end_effector(), *w_e)
    }

    pub fn equilibrium_residual(&self, state: &FullState) -> f64 {
        equilibrium_residual(state, &self.system)
    }
}

/// Deflection-controlled analysis: factorizes the reduced matrix `M` once
/// and derives the Cartesian stiffness plus full states for any
/// end-effector deflection or wrench.
pub struct Analysis {
    system: GlobalSystem,
    parts: PartitionedSystem,
    /// `M⁻¹·C_e`.
    x_c: DMatrix<f64>,
    /// `M⁻¹·b`.
    x_b: DVector<f64>,
    stiffness: StiffnessResult,
}

impl Analysis {
    pub fn new(model: &ManipulatorModel, opts: &SolverOptions) -> Result<Self, SolveError> {
        let system = assemble(model)?;
        let parts = partition(&system);
        let factor = match ScaledFactor::new(&parts.m, opts, use_dense(&system, opts)) {
            Ok(f) => f,
            // tell a mechanism apart from an end effector that is rigid in some direction
            Err(_) => {
                let full = ComplianceAnalysis::from_system(system, opts)?;
                let rigid_directions = null_directions(&full.compliance.cc)
                    .iter()
                    .map(Wrench::from_vector)
                    .collect();
                return Err(SolveError::UnboundedStiffness(Box::new(UnboundedReport {
                    compliance: full.compliance,
                    rigid_directions,
                })));
            }
        };

        let mut rhs: Vec<DVector<f64>> = (0..6).map(|k| parts.c_e.column(k).into_owned()).collect();
        rhs.push(parts.b.clone());
        let mut solved = factor.solve_all(&rhs, opts)?;
        let x_b = solved.pop().expect("seven solutions");
        let x_c = DMatrix::from_columns(&solved);

        let b_x_c = DMatrix::from_fn(6, 6, |r, c| {
            parts.b_e_rows.row(r).map(|(j, v)| v * x_c[(j, c)]).sum::<f64>()
        });
        let kc = parts.e_e - Matrix6::from_fn(|r, c| b_x_c[(r, c)]);
        let w_off = Vector6::from_fn(|r, _| parts.b_e_rows.row(r).map(|(j, v)| v * x_b[j]).sum::<f64>()) - parts.b_e;

        let mut warnings = factor.warnings(opts);
        let asymmetry = relative_asymmetry(&kc);
        if !model.has_preload() && asymmetry > 1e-8 {
            warnings.push(SolveWarning::AsymmetricStiffness { asymmetry });
        }
        let free_directions = null_directions(&kc);
        if !free_directions.is_empty() {
            warnings.push(SolveWarning::RankDeficientStiffness {
                free_directions: free_directions.iter().map(|v| (*v).into()).collect(),
            });
        }

        Ok(Self {
            system,
            parts,
            x_c,
            x_b,
            stiffness: StiffnessResult {
                kc,
                // drop the sign of exact zeros so unloaded models print cleanly
                w_offset: Wrench::from_vector(&w_off.map(|v| v + 0.0)),
                condition_estimate: factor.condition_estimate,
                warnings,
            },
        })
    }

    pub fn stiffness(&self) -> &StiffnessResult {
        &self.stiffness
    }

    pub fn system(&self) -> &GlobalSystem {
        &self.system
    }

    pub fn partition(&self) -> &PartitionedSystem {
        &self.parts
    }

    /// Full state for a prescribed end-effector deflection.
    pub fn solve_prescribed_deflection(&self, dt_e: &Twist) -> FullState {
        let dt = dt_e.to_vector();
        let dt_dyn = DVector::from_column_slice(dt.as_slice());
        let y = &self.x_b - &self.x_c * &dt_dyn;
        let w_e = Vector6::from_fn(|r, _| self.parts.b_e_rows.row(r).map(|(j, v)| v * y[j]).sum::<f64>())
            + self.parts.e_e * dt
            - self.parts.b_e;
        let mut x = DVector::zeros(self.system.index().ncols());
        for (k, &c) in self.parts.col_map.iter().enumerate() {
            x[c] = y[k];
        }
        x.rows_mut(self.parts.ee_cols.start, 6).copy_from(&dt);
        FullState::from_global(&x, self.system.end_effector(), Wrench::from_vector(&w_e))
    }

    /// Full state for an external end-effector wrench, via
    /// `Δt_e = Kc⁻¹·(W_e − W_offset)`.
    pub fn solve_applied_wrench(&self, w_e: &Wrench) -> Result<FullState, SolveError> {
        let kc = &self.stiffness.kc;
        let free_directions: Vec<Twist> = null_directions(kc).iter().map(Twist::from_vector).collect();
        if !free_directions.is_empty() {
            return Err(SolveError::SingularStiffness { free_directions });
        }
        let rhs = w_e.to_vector() - self.stiffness.w_offset.to_vector();
        let dt = kc.lu().solve(&rhs).expect("checked nonsingular");
        let mut state = self.solve_prescribed_deflection(&Twist::from_vector(&dt));
        state.ee_wrench = *w_e;
        Ok(state)
    }

    pub fn equilibrium_residual(&self, state: &FullState) -> f64 {
        equilibrium_residual(state, &self.system)
    }
}

pub fn cartesian_stiffness(model: &ManipulatorModel) -> Result<StiffnessResult, SolveError> {
    Ok(Analysis::new(model, &SolverOptions::default())?.stiffness)
}

/// End-effector compliance from the full system; defined even where the
/// stiffness is unbounded.
pub fn cartesian_compliance(model: &ManipulatorModel) -> Result<ComplianceResult, SolveError> {
    Ok(ComplianceAnalysis::new(model, &SolverOptions::default())?.compliance)
}

pub fn solve_prescribed_deflection(model: &ManipulatorModel, dt_e: &Twist) -> Result<FullState, SolveError> {
    Ok(Analysis::new(model, &SolverOptions::default())?.solve_prescribed_deflection(dt_e))
}

/// Uses the stiffness route when it exists and falls back to the full system
/// when the end effector is rigid along some direction.
pub fn solve_applied_wrench(model: &ManipulatorModel, w_e: &Wrench) -> Result<FullState, SolveError> {
    let opts = SolverOptions::default();
    match Analysis::new(model, &opts) {
        Ok(analysis) => analysis.solve_applied_wrench(w_e),
        Err(SolveError::UnboundedStiffness(_)) => Ok(ComplianceAnalysis::new(model, &opts)?.solve_applied_wrench(w_e)),
        Err(e) => Err(e),
    }
}

/// Reaction at every supported node: the solved wrench the support applies.
pub fn support_reactions(state: &FullState, model: &ManipulatorModel) -> Vec<(NodeIdx, Wrench)> {
    model
        .supports()
        .iter()
        .map(|s| (s.node, state.wrenches[s.node.0]))
        .collect()
}

/// Sum of all support reactions and external wrenches, about the origin.
/// Zero (to rounding) for any solved state.
pub fn equilibrium_closure(state: &FullState, model: &ManipulatorModel) -> Wrench {
    let ee = model.end_effector();
    let about_origin = |w: &Wrench, node: NodeIdx| transport_wrench(w, &model.position(node));
    let reactions = support_reactions(state, model)
        .into_iter()
        .map(|(n, w)| about_origin(&w, n));
    let loads = model
        .loads()
        .iter()
        .filter(|l| l.node != ee)
        .map(|l| about_origin(&l.wrench, l.node));
    reactions
        .chain(loads)
        .chain(std::iter::once(about_origin(&state.ee_wrench, ee)))
        .fold(Wrench::zero(), |a, b| a + b)
}

/// Relative residual of every assembled equation, with the end-effector
/// balance using the state's own `W_e`:
/// `max_r |a_r·x − rhs_r| / (Σ_j |a_rj|·s_j + |rhs_r|)`, where `s_j` is the
/// largest magnitude among the state's translations, rotations, forces or
/// moments — whichever class variable `j` belongs to. Unit-consistent, and
/// rows that vanish identically count as satisfied.
pub fn equilibrium_residual(state: &FullState, system: &GlobalSystem) -> f64 {
    let x = state.to_global();
    let mut rhs = system.rhs().clone();
    let ee_rows = system.end_effector_rows();
    let w_e = state.ee_wrench.to_vector() - system.end_effector_load();
    for k in 0..6 {
        rhs[ee_rows.start + k] += w_e[k];
    }
    let wrench_start = 6 * system.index().node_count();
    let class = |j: usize| 2 * usize::from(j >= wrench_start) + usize::from(j % 6 >= 3);
    let mut scale = [0.0f64; 4];
    for (j, v) in x.iter().enumerate() {
        scale[class(j)] = scale[class(j)].max(v.abs());
    }
    let a = system.matrix();
    (0..rhs.len())
        .map(|r| {
            let (ax, size) = a.row(r).fold((0.0, 0.0), |(s, m), (j, v)| {
                (s + v * x[j], m + v.abs() * scale[class(j)])
            });
            let denom = size + rhs[r].abs();
            if denom > 0.0 {
                (ax - rhs[r]).abs() / denom
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}
