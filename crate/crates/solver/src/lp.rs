use crate::error::LpError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// One sparse constraint row `coeffs · x (sense) rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates this row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// A minimization LP over bounded variables.
///
/// Every variable starts with bounds `[0, +inf)` and a zero objective
/// coefficient. Lower bounds must stay finite.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    num_vars: usize,
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rows: Vec<Row>,
    names: Vec<Option<String>>,
}

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            objective: vec![0.0; num_vars],
            lower: vec![0.0; num_vars],
            upper: vec![f64::INFINITY; num_vars],
            rows: Vec::new(),
            names: vec![None; num_vars],
        }
    }

    /// Appends a variable and returns its column index.
    pub fn add_var(&mut self, lower: f64, upper: f64, cost: f64) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.names.push(None);
        self.num_vars += 1;
        self.num_vars - 1
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> usize {
        self.rows.push(Row { coeffs, sense, rhs });
        self.rows.len() - 1
    }

    pub fn set_objective(&mut self, var: usize, cost: f64) {
        self.objective[var] = cost;
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn set_name(&mut self, var: usize, name: impl Into<String>) {
        self.names[var] = Some(name.into());
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn name(&self, var: usize) -> Option<&str> {
        self.names[var].as_deref()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest row or bound violation of `x`, scaled per row by `1 + |rhs|`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self
            .rows
            .iter()
            .map(|r| r.violation(x) / (1.0 + r.rhs.abs()))
            .fold(0.0, f64::max);
        let bounds = (0..self.num_vars)
            .map(|j| (self.lower[j] - x[j]).max(x[j] - self.upper[j]).max(0.0))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }

    /// Returns a copy with the lower bound of `var` raised to `new_lb`.
    pub fn update_lower_bound(&self, var: usize, new_lb: f64) -> Result<Self, LpError> {
        let mut out = self.clone();
        out.tighten_lower_bound(var, new_lb)?;
        Ok(out)
    }

    /// In-place variant of [`update_lower_bound`](Self::update_lower_bound).
    pub fn tighten_lower_bound(&mut self, var: usize, new_lb: f64) -> Result<(), LpError> {
        if var >= self.num_vars {
            return Err(LpError::NoSuchVariable { var, num_vars: self.num_vars });
        }
        let current = self.lower[var];
        if new_lb < current {
            return Err(LpError::BoundLoosening { var, current, new: new_lb });
        }
        if new_lb > self.upper[var] {
            return Err(LpError::BoundCrossing { var, lower: new_lb, upper: self.upper[var] });
        }
        self.lower[var] = new_lb;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), LpError> {
        for j in 0..self.num_vars {
            if !self.objective[j].is_finite() {
                return Err(LpError::NotFinite(format!("objective of variable {j}")));
            }
            if !self.lower[j].is_finite() {
                return Err(LpError::InfiniteLowerBound { var: j });
            }
            if self.upper[j].is_nan() {
                return Err(LpError::NotFinite(format!("upper bound of variable {j}")));
            }
            if self.lower[j] > self.upper[j] {
                return Err(LpError::BoundCrossing {
                    var: j,
                    lower: self.lower[j],
                    upper: self.upper[j],
                });
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(LpError::NotFinite(format!("rhs of row {i}")));
            }
            for &(j, a) in &row.coeffs {
                if j >= self.num_vars {
                    return Err(LpError::BadColumn { row: i, col: j, num_vars: self.num_vars });
                }
                if !a.is_finite() {
                    return Err(LpError::NotFinite(format!("row {i}, column {j}")));
                }
            }
        }
        Ok(())
    }
}
