use thiserror::Error;

/// Index of a variable in a [`LinearProgram`].
pub type VarId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates this row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let act = self.activity(x);
        match self.relation {
            Relation::Le => (act - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - act).max(0.0),
            Relation::Eq => (act - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("variable {var}: lower bound {lower} exceeds upper bound {upper}")]
    InvertedBounds { var: VarId, lower: f64, upper: f64 },
    #[error("row {row}: column index {var} out of range ({num_vars} variables)")]
    ColumnOutOfRange { row: usize, var: VarId, num_vars: usize },
    #[error("non-finite coefficient in {0}")]
    NonFinite(String),
    #[error("integer variable {0} out of range or not restricted to [0, 1]")]
    BadIntegerVar(VarId),
}

/// A minimization LP: `min cᵀx  s.t.  rows, lower ≤ x ≤ upper`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub var_names: Vec<Option<String>>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn add_var(&mut self, cost: f64, lower: f64, upper: f64) -> VarId {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.var_names.push(None);
        self.objective.len() - 1
    }

    pub fn add_named_var(&mut self, name: impl Into<String>, cost: f64, lower: f64, upper: f64) -> VarId {
        let id = self.add_var(cost, lower, upper);
        self.var_names[id] = Some(name.into());
        id
    }

    /// Adds a row and returns its index. Repeated column indexes are summed.
    pub fn add_constraint(&mut self, coeffs: Vec<(VarId, f64)>, relation: Relation, rhs: f64) -> usize {
        let mut coeffs = coeffs;
        coeffs.sort_by_key(|&(j, _)| j);
        coeffs.dedup_by(|b, a| {
            if a.0 == b.0 {
                a.1 += b.1;
                true
            } else {
                false
            }
        });
        coeffs.retain(|&(_, a)| a != 0.0);
        self.constraints.push(Constraint { coeffs, relation, rhs });
        self.constraints.len() - 1
    }

    pub fn var_name(&self, j: VarId) -> String {
        self.var_names
            .get(j)
            .and_then(|n| n.clone())
            .unwrap_or_else(|| format!("x{j}"))
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest row or bound violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.constraints.iter().map(|c| c.violation(x)).fold(0.0, f64::max);
        let bounds = (0..self.num_vars())
            .map(|j| (self.lower[j] - x[j]).max(x[j] - self.upper[j]).max(0.0))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.num_vars();
        for j in 0..n {
            if !self.objective[j].is_finite() {
                return Err(ModelError::NonFinite(format!("objective of {}", self.var_name(j))));
            }
            if self.lower[j].is_nan() || self.upper[j].is_nan() {
                return Err(ModelError::NonFinite(format!("bounds of {}", self.var_name(j))));
            }
            if self.lower[j] > self.upper[j] {
                return Err(ModelError::InvertedBounds { var: j, lower: self.lower[j], upper: self.upper[j] });
            }
        }
        for (i, row) in self.constraints.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(ModelError::NonFinite(format!("rhs of row {i}")));
            }
            for &(j, a) in &row.coeffs {
                if j >= n {
                    return Err(ModelError::ColumnOutOfRange { row: i, var: j, num_vars: n });
                }
                if !a.is_finite() {
                    return Err(ModelError::NonFinite(format!("row {i}")));
                }
            }
        }
        Ok(())
    }
}

/// An LP plus a set of variables restricted to `{0, 1}`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MipProblem {
    pub lp: LinearProgram,
    pub integer_vars: Vec<VarId>,
}

impl MipProblem {
    pub fn new(lp: LinearProgram, integer_vars: Vec<VarId>) -> Self {
        Self { lp, integer_vars }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.lp.validate()?;
        for &j in &self.integer_vars {
            if j >= self.lp.num_vars() || self.lp.lower[j] < 0.0 || self.lp.upper[j] > 1.0 {
                return Err(ModelError::BadIntegerVar(j));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_columns_are_merged() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0, 0.0, 1.0);
        lp.add_constraint(vec![(x, 1.0), (x, 2.0)], Relation::Le, 3.0);
        assert_eq!(lp.constraints[0].coeffs, vec![(x, 3.0)]);
    }

    #[test]
    fn validation_catches_bad_input() {
        let mut lp = LinearProgram::new();
        lp.add_var(1.0, 2.0, 1.0);
        assert!(matches!(lp.validate(), Err(ModelError::InvertedBounds { .. })));

        let mut lp = LinearProgram::new();
        lp.add_var(1.0, 0.0, 1.0);
        lp.constraints.push(Constraint { coeffs: vec![(3, 1.0)], relation: Relation::Le, rhs: 1.0 });
        assert!(matches!(lp.validate(), Err(ModelError::ColumnOutOfRange { var: 3, .. })));

        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0, 0.0, 2.0);
        let mip = MipProblem::new(lp, vec![x]);
        assert_eq!(mip.validate(), Err(ModelError::BadIntegerVar(x)));
    }
}
