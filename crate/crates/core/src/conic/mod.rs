//! Semidefinite programs in "LMI form" and an interior-point solver for them.
//!
//! A problem has a variable vector `v`, a linear objective `cᵀv` to minimize,
//! and constraints
//!
//! * LMIs `F₀ + Σᵢ vᵢ Fᵢ ⪰ 0` with symmetric sparse `Fᵢ`,
//! * scalar affine constraints `aᵀv + b ≥ 0` or `aᵀv + b = 0`,
//! * per-variable bounds.
//!
//! [`VarIndexMap`] documents how structured unknowns (matrices, symmetric
//! matrices) are laid out inside `v`.

mod ipm;
mod presolve;
pub mod sdpa;
mod verify;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use verify::{verify, ViolationReport};

/// Symmetric matrix given by its upper-triangle entries `(i, j, v)`, `i ≤ j`.
/// Off-diagonal entries stand for both `(i, j)` and `(j, i)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SymSparse {
    dim: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SymSparse {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    /// Adds `v` at `(i, j)` and its mirror. Order of `i`, `j` is irrelevant.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(i < self.dim && j < self.dim, "entry ({i}, {j}) outside {}", self.dim);
        if v != 0.0 {
            self.entries.push((i.min(j), i.max(j), v));
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Entries with duplicates merged, sorted by `(i, j)`.
    pub fn entries(&self) -> Vec<(usize, usize, f64)> {
        let mut e = self.entries.clone();
        e.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut out: Vec<(usize, usize, f64)> = Vec::with_capacity(e.len());
        for (i, j, v) in e {
            match out.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => out.push((i, j, v)),
            }
        }
        out.retain(|e| e.2 != 0.0);
        out
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
            if i != j {
                m[(j, i)] += v;
            }
        }
        m
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut s = Self::new(m.nrows());
        for j in 0..m.ncols() {
            for i in 0..=j {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                if v != 0.0 {
                    s.entries.push((i, j, v));
                }
            }
        }
        s
    }
}

/// `constant + Σ v[var] · coeff ⪰ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiConstraint {
    pub name: String,
    pub constant: SymSparse,
    pub coeffs: Vec<(usize, SymSparse)>,
}

impl LmiConstraint {
    pub fn new(name: impl Into<String>, dim: usize) -> Self {
        Self {
            name: name.into(),
            constant: SymSparse::new(dim),
            coeffs: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.constant.dim()
    }

    /// Dense value of the affine map at `v`.
    pub fn evaluate(&self, v: &[f64]) -> DMatrix<f64> {
        let mut m = self.constant.to_dense();
        for (var, f) in &self.coeffs {
            m += f.to_dense() * v[*var];
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinearKind {
    GreaterEq,
    Equal,
}

/// `Σ coeff·v[var] + constant ≥ 0` (or `= 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub name: String,
    pub coeffs: Vec<(usize, f64)>,
    pub constant: f64,
    pub kind: LinearKind,
}

impl LinearConstraint {
    pub fn evaluate(&self, v: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(i, a)| a * v[i]).sum::<f64>() + self.constant
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarBound {
    pub var: usize,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

/// Shape of one named group of scalar variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarShape {
    Vector(usize),
    /// Column-major `rows × cols`.
    Matrix { rows: usize, cols: usize },
    /// Symmetric `n × n` stored as the scaled lower triangle, column-major:
    /// `(0,0), (1,0), …, (n−1,0), (1,1), …`. Off-diagonal slots hold
    /// `√2 · W_ij` so that `⟨W₁, W₂⟩ = svec(W₁)·svec(W₂)`.
    Symmetric(usize),
}

impl VarShape {
    pub fn len(&self) -> usize {
        match *self {
            VarShape::Vector(n) => n,
            VarShape::Matrix { rows, cols } => rows * cols,
            VarShape::Symmetric(n) => n * (n + 1) / 2,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarGroup {
    pub name: String,
    pub offset: usize,
    pub shape: VarShape,
}

/// Bijection between structured unknowns and the flat variable vector.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarIndexMap {
    groups: Vec<VarGroup>,
    len: usize,
}

/// Handle to a group inside a [`VarIndexMap`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupId(usize);

impl VarIndexMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, shape: VarShape) -> GroupId {
        self.groups.push(VarGroup {
            name: name.into(),
            offset: self.len,
            shape,
        });
        self.len += shape.len();
        GroupId(self.groups.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn groups(&self) -> &[VarGroup] {
        &self.groups
    }

    pub fn group(&self, id: GroupId) -> &VarGroup {
        &self.groups[id.0]
    }

    pub fn vector(&self, id: GroupId, i: usize) -> usize {
        let g = &self.groups[id.0];
        match g.shape {
            VarShape::Vector(n) => {
                assert!(i < n);
                g.offset + i
            }
            _ => panic!("group {} is not a vector", g.name),
        }
    }

    pub fn matrix(&self, id: GroupId, r: usize, c: usize) -> usize {
        let g = &self.groups[id.0];
        match g.shape {
            VarShape::Matrix { rows, cols } => {
                assert!(r < rows && c < cols);
                g.offset + c * rows + r
            }
            _ => panic!("group {} is not a matrix", g.name),
        }
    }

    /// Slot and scale for symmetric entry `(i, j)`: `W_ij = scale · v[slot]`.
    pub fn symmetric(&self, id: GroupId, i: usize, j: usize) -> (usize, f64) {
        let g = &self.groups[id.0];
        match g.shape {
            VarShape::Symmetric(n) => {
                let (r, c) = (i.max(j), i.min(j));
                assert!(r < n);
                // Column c starts after columns of lengths n, n−1, …, n−c+1.
                let start = c * n - c * c.saturating_sub(1) / 2;
                let slot = g.offset + start + (r - c);
                let scale = if r == c { 1.0 } else { std::f64::consts::FRAC_1_SQRT_2 };
                (slot, scale)
            }
            _ => panic!("group {} is not symmetric", g.name),
        }
    }

    /// Reassembles a symmetric group as a dense matrix.
    pub fn symmetric_value(&self, id: GroupId, v: &[f64]) -> DMatrix<f64> {
        let n = match self.groups[id.0].shape {
            VarShape::Symmetric(n) => n,
            _ => panic!("group is not symmetric"),
        };
        DMatrix::from_fn(n, n, |i, j| {
            let (slot, scale) = self.symmetric(id, i, j);
            v[slot] * scale
        })
    }

    pub fn matrix_value(&self, id: GroupId, v: &[f64]) -> DMatrix<f64> {
        let g = &self.groups[id.0];
        match g.shape {
            VarShape::Matrix { rows, cols } => {
                DMatrix::from_column_slice(rows, cols, &v[g.offset..g.offset + rows * cols])
            }
            _ => panic!("group {} is not a matrix", g.name),
        }
    }

    pub fn vector_value<'a>(&self, id: GroupId, v: &'a [f64]) -> &'a [f64] {
        let g = &self.groups[id.0];
        &v[g.offset..g.offset + g.shape.len()]
    }
}

/// A semidefinite program: minimize `objective·v + objective_offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub vars: VarIndexMap,
    pub objective: Vec<f64>,
    pub objective_offset: f64,
    pub lmis: Vec<LmiConstraint>,
    pub linear: Vec<LinearConstraint>,
    pub bounds: Vec<VarBound>,
}

impl SdpProblem {
    pub fn new(vars: VarIndexMap) -> Self {
        let n = vars.len();
        Self {
            vars,
            objective: vec![0.0; n],
            objective_offset: 0.0,
            lmis: Vec::new(),
            linear: Vec::new(),
            bounds: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn objective_value(&self, v: &[f64]) -> f64 {
        self.objective.iter().zip(v).map(|(c, x)| c * x).sum::<f64>() + self.objective_offset
    }

    /// Structural checks: every index in range, finite data.
    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.objective.len() != n {
            return Err(Error::InvalidInput(format!(
                "objective has {} entries for {n} variables",
                self.objective.len()
            )));
        }
        let finite = |x: f64, what: &str| {
            if x.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!("non-finite value in {what}")))
            }
        };
        for c in &self.objective {
            finite(*c, "objective")?;
        }
        for l in &self.lmis {
            for (var, f) in &l.coeffs {
                if *var >= n {
                    return Err(Error::InvalidInput(format!(
                        "LMI {}: variable {var} out of range",
                        l.name
                    )));
                }
                if f.dim() != l.dim() {
                    return Err(Error::InvalidInput(format!(
                        "LMI {}: coefficient of variable {var} has dimension {} instead of {}",
                        l.name,
                        f.dim(),
                        l.dim()
                    )));
                }
                for e in &f.entries {
                    finite(e.2, "LMI coefficient")?;
                }
            }
            for e in &l.constant.entries {
                finite(e.2, "LMI constant")?;
            }
        }
        for c in &self.linear {
            finite(c.constant, "linear constraint")?;
            for &(var, a) in &c.coeffs {
                if var >= n {
                    return Err(Error::InvalidInput(format!(
                        "linear constraint {}: variable {var} out of range",
                        c.name
                    )));
                }
                finite(a, "linear constraint")?;
            }
        }
        for b in &self.bounds {
            if b.var >= n {
                return Err(Error::InvalidInput(format!("bound on variable {} out of range", b.var)));
            }
            if let (Some(lo), Some(hi)) = (b.lower, b.upper) {
                if lo > hi {
                    return Err(Error::InvalidInput(format!(
                        "bound on variable {}: lower {lo} above upper {hi}",
                        b.var
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConicStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Relative duality gap `⟨X, Z⟩ / (1 + |pobj| + |dobj|)`.
    pub gap_tol: f64,
    /// Relative primal and dual residual norms.
    pub feas_tol: f64,
    pub max_iters: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-7,
            feas_tol: 1e-8,
            max_iters: 100,
        }
    }
}

/// Farkas-type evidence that no `v` satisfies the constraints: multipliers
/// `X_b ⪰ 0`, `x ≥ 0`, `y` with `Σ ⟨F_i, X⟩ + … = 0` for every variable and a
/// strictly negative pairing with the constants.
#[derive(Debug, Clone, PartialEq)]
pub struct InfeasibilityCertificate {
    pub lmi_multipliers: Vec<DMatrix<f64>>,
    /// One multiplier per linear constraint (`≥` and `=`), in problem order.
    pub linear_multipliers: Vec<f64>,
    /// `(lower, upper)` multipliers per entry of `bounds`.
    pub bound_multipliers: Vec<(f64, f64)>,
    /// Worst violation of the stationarity conditions over the variables not
    /// fixed during presolve.
    pub stationarity_residual: f64,
    /// `Σ ⟨F₀, X⟩ + Σ b·x` (negative for a valid certificate).
    pub constant_pairing: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicSolution {
    pub status: ConicStatus,
    /// Best iterate (always present, meaningful only when `Optimal`).
    pub x: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub relative_gap: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub iterations: usize,
    /// Dual matrices of the LMIs at the returned iterate.
    pub lmi_duals: Vec<DMatrix<f64>>,
    pub certificate: Option<InfeasibilityCertificate>,
    pub message: String,
}

/// Solves `problem` with the built-in primal–dual interior-point method.
///
/// The result is deterministic for identical inputs and options. An
/// `Infeasible` status always carries an [`InfeasibilityCertificate`].
pub fn solve(problem: &SdpProblem, opts: &SolveOptions) -> Result<ConicSolution> {
    problem.validate()?;
    if !(opts.gap_tol > 0.0 && opts.feas_tol > 0.0 && opts.max_iters > 0) {
        return Err(Error::InvalidInput("solver tolerances must be positive".into()));
    }
    ipm::solve_problem(problem, opts)
}
