//! Problem data for affine linear matrix inequality programs.
//!
//! A problem has `num_vars` real scalar decision variables `z`. Symmetric
//! matrix variables are laid out as consecutive scalars (upper triangle,
//! row by row), so every constraint is affine in `z`:
//!
//! ```text
//! F(z) = constant + Σ_i z_i · coeff_i   ⪰ 0   (or ⪯ 0)
//! ```

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::matrix::SymmetricMatrix;
use crate::ConicError;

/// Strict definiteness floor: `P ≻ 0` is encoded as `P ⪰ ε I`.
pub const DEFINITE_MARGIN: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    /// `F(z) ⪰ 0`
    PositiveSemidefinite,
    /// `F(z) ⪯ 0`
    NegativeSemidefinite,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmiTerm {
    pub var: usize,
    pub coeff: SymmetricMatrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmiConstraint {
    pub label: String,
    pub sense: Sense,
    pub constant: SymmetricMatrix,
    pub terms: Vec<LmiTerm>,
}

impl LmiConstraint {
    pub fn new(label: impl Into<String>, sense: Sense, size: usize) -> Self {
        Self {
            label: label.into(),
            sense,
            constant: SymmetricMatrix::zeros(size),
            terms: Vec::new(),
        }
    }

    pub fn size(&self) -> usize {
        self.constant.size()
    }

    /// Accumulates `coeff` onto variable `var`, merging repeated variables.
    pub fn add_term(&mut self, var: usize, coeff: SymmetricMatrix) {
        assert_eq!(coeff.size(), self.size(), "coefficient size mismatch");
        if coeff.is_zero() {
            return;
        }
        if let Some(t) = self.terms.iter_mut().find(|t| t.var == var) {
            t.coeff.axpy(1.0, &coeff);
        } else {
            self.terms.push(LmiTerm { var, coeff });
        }
    }

    /// Evaluates `F(z)` without the sense orientation applied.
    pub fn evaluate(&self, z: &[f64]) -> SymmetricMatrix {
        let mut m = self.constant.clone();
        for t in &self.terms {
            m.axpy(z[t.var], &t.coeff);
        }
        m
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Definiteness {
    /// `X ⪰ 0`
    Semidefinite,
    /// `X ⪰ ε I`
    Definite,
    /// no definiteness requirement
    Free,
}

/// A symmetric matrix variable occupying `size (size + 1) / 2` consecutive
/// scalar slots starting at `offset`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixVariable {
    pub label: String,
    pub offset: usize,
    pub size: usize,
    pub requirement: Definiteness,
}

impl MatrixVariable {
    pub fn num_scalars(&self) -> usize {
        self.size * (self.size + 1) / 2
    }

    /// Scalar index holding entry `(i, j)`.
    pub fn index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        // rows 0..i contribute size, size-1, ..., size-i+1 entries
        self.offset + i * self.size - i * i.saturating_sub(1) / 2 + j - i
    }

    /// Symmetric basis matrix multiplying the scalar at `(i, j)`.
    pub fn basis(&self, i: usize, j: usize) -> SymmetricMatrix {
        let mut b = SymmetricMatrix::zeros(self.size);
        b.set(i, j, 1.0);
        b
    }

    /// Iterates `(scalar index, i, j)` over the upper triangle.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        (0..self.size).flat_map(move |i| (i..self.size).map(move |j| (self.index(i, j), i, j)))
    }

    /// Reassembles the matrix value from a full variable vector.
    pub fn value(&self, z: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.size, self.size);
        for (k, i, j) in self.entries() {
            m[(i, j)] = z[k];
            m[(j, i)] = z[k];
        }
        m
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "coefficients")]
pub enum Objective {
    Feasibility,
    /// minimize `cᵀ z`
    Minimize(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearMatrixProblem {
    pub num_vars: usize,
    pub constraints: Vec<LmiConstraint>,
    /// scalar variables constrained to be nonnegative
    pub nonnegative: Vec<usize>,
    pub matrix_variables: Vec<MatrixVariable>,
    pub objective: Objective,
    #[serde(default = "default_margin")]
    pub definite_margin: f64,
}

fn default_margin() -> f64 {
    DEFINITE_MARGIN
}

impl LinearMatrixProblem {
    pub fn validate(&self) -> Result<(), ConicError> {
        for c in &self.constraints {
            for t in &c.terms {
                if t.var >= self.num_vars {
                    return Err(ConicError::Malformed(format!(
                        "constraint '{}' references variable {} of {}",
                        c.label, t.var, self.num_vars
                    )));
                }
                if t.coeff.size() != c.size() {
                    return Err(ConicError::Malformed(format!(
                        "constraint '{}' mixes block sizes",
                        c.label
                    )));
                }
            }
        }
        if let Some(&v) = self.nonnegative.iter().find(|&&v| v >= self.num_vars) {
            return Err(ConicError::Malformed(format!("sign constraint on unknown variable {v}")));
        }
        for mv in &self.matrix_variables {
            if mv.offset + mv.num_scalars() > self.num_vars {
                return Err(ConicError::Malformed(format!(
                    "matrix variable '{}' exceeds the variable vector",
                    mv.label
                )));
            }
        }
        if let Objective::Minimize(c) = &self.objective {
            if c.len() != self.num_vars {
                return Err(ConicError::Malformed("objective length mismatch".into()));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(ConicError::Malformed("non-finite objective".into()));
            }
        }
        if !(self.definite_margin >= 0.0) {
            return Err(ConicError::Malformed("negative definiteness margin".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String, ConicError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, ConicError> {
        let p: Self = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }
}

/// Incremental construction of a [`LinearMatrixProblem`].
#[derive(Debug, Default)]
pub struct ProblemBuilder {
    num_vars: usize,
    constraints: Vec<LmiConstraint>,
    nonnegative: Vec<usize>,
    matrix_variables: Vec<MatrixVariable>,
    objective: Vec<f64>,
    minimize: bool,
}

impl ProblemBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn scalar(&mut self) -> usize {
        self.num_vars += 1;
        self.objective.push(0.0);
        self.num_vars - 1
    }

    pub fn nonnegative_scalar(&mut self) -> usize {
        let v = self.scalar();
        self.nonnegative.push(v);
        v
    }

    pub fn matrix(&mut self, label: impl Into<String>, size: usize, requirement: Definiteness) -> MatrixVariable {
        let mv = MatrixVariable { label: label.into(), offset: self.num_vars, size, requirement };
        for _ in 0..mv.num_scalars() {
            self.scalar();
        }
        self.matrix_variables.push(mv.clone());
        mv
    }

    pub fn add_constraint(&mut self, c: LmiConstraint) {
        self.constraints.push(c);
    }

    /// Adds `coeff` to the objective coefficient of `var` (turns on minimization).
    pub fn minimize_term(&mut self, var: usize, coeff: f64) {
        self.minimize = true;
        self.objective[var] += coeff;
    }

    /// Adds `trace(X)` of a matrix variable to the objective.
    pub fn minimize_trace(&mut self, mv: &MatrixVariable) {
        for i in 0..mv.size {
            self.minimize_term(mv.index(i, i), 1.0);
        }
    }

    pub fn build(self) -> LinearMatrixProblem {
        LinearMatrixProblem {
            num_vars: self.num_vars,
            constraints: self.constraints,
            nonnegative: self.nonnegative,
            matrix_variables: self.matrix_variables,
            objective: if self.minimize { Objective::Minimize(self.objective) } else { Objective::Feasibility },
            definite_margin: DEFINITE_MARGIN,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_variable_indices_are_dense_and_unique() {
        for size in 1..6 {
            let mv = MatrixVariable { label: "X".into(), offset: 7, size, requirement: Definiteness::Free };
            let idx: Vec<usize> = mv.entries().map(|(k, _, _)| k).collect();
            let expected: Vec<usize> = (7..7 + mv.num_scalars()).collect();
            assert_eq!(idx, expected, "size {size}");
            assert_eq!(mv.index(1.min(size - 1), 0), mv.index(0, 1.min(size - 1)));
        }
    }

    #[test]
    fn rejects_out_of_range_variable() {
        let mut c = LmiConstraint::new("c", Sense::PositiveSemidefinite, 1);
        c.add_term(3, SymmetricMatrix::identity(1));
        let p = LinearMatrixProblem {
            num_vars: 2,
            constraints: vec![c],
            nonnegative: vec![],
            matrix_variables: vec![],
            objective: Objective::Feasibility,
            definite_margin: DEFINITE_MARGIN,
        };
        assert!(p.validate().is_err());
    }
}
