use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    /// Sparse row: (variable index, coefficient).
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates the row (zero when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// Minimisation over binary variables subject to linear rows.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BinaryProgram {
    pub var_count: usize,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub var_names: Option<Vec<String>>,
}

impl BinaryProgram {
    pub fn new(var_count: usize) -> Self {
        Self {
            var_count,
            objective: vec![0.0; var_count],
            constraints: Vec::new(),
            var_names: None,
        }
    }

    pub fn set_objective(&mut self, var: usize, coeff: f64) {
        self.objective[var] = coeff;
    }

    /// Adds a row, merging duplicate indices and dropping zero coefficients.
    pub fn add_constraint(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> Result<usize> {
        if !rhs.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite right-hand side {rhs}")));
        }
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(coeffs.len());
        let mut sorted = coeffs;
        sorted.sort_by_key(|&(j, _)| j);
        for (j, a) in sorted {
            if j >= self.var_count {
                return Err(Error::InvalidArgument(format!(
                    "row references variable {j} of {}",
                    self.var_count
                )));
            }
            if !a.is_finite() {
                return Err(Error::InvalidArgument(format!("non-finite coefficient on x{j}")));
            }
            match merged.last_mut() {
                Some((k, b)) if *k == j => *b += a,
                _ => merged.push((j, a)),
            }
        }
        merged.retain(|&(_, a)| a != 0.0);
        self.constraints.push(Constraint { coeffs: merged, sense, rhs });
        Ok(self.constraints.len() - 1)
    }

    /// Pins a variable with an equality row.
    pub fn fix(&mut self, var: usize, value: bool) -> Result<usize> {
        self.add_constraint(vec![(var, 1.0)], Sense::Eq, f64::from(u8::from(value)))
    }

    pub fn validate(&self) -> Result<()> {
        if self.objective.len() != self.var_count {
            return Err(Error::InvalidArgument("objective length differs from var_count".into()));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("non-finite objective coefficient".into()));
        }
        if let Some(names) = &self.var_names {
            if names.len() != self.var_count {
                return Err(Error::InvalidArgument("var_names length differs from var_count".into()));
            }
        }
        for (r, c) in self.constraints.iter().enumerate() {
            if !c.rhs.is_finite() || c.coeffs.iter().any(|&(j, a)| j >= self.var_count || !a.is_finite()) {
                return Err(Error::InvalidArgument(format!("row {r} is malformed")));
            }
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.constraints.len()
    }

    pub fn cols(&self) -> usize {
        self.var_count
    }

    pub fn nonzeros(&self) -> usize {
        self.constraints.iter().map(|c| c.coeffs.len()).sum()
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.constraints.iter().map(|c| c.violation(x)).fold(0.0, f64::max)
    }

    /// Independent check of a 0/1 point against every row.
    pub fn is_feasible(&self, x: &[u8], tol: f64) -> bool {
        x.len() == self.var_count
            && x.iter().all(|&v| v <= 1)
            && self.max_violation(&x.iter().map(|&v| f64::from(v)).collect::<Vec<_>>()) <= tol
    }

    pub fn var_name(&self, j: usize) -> String {
        match &self.var_names {
            Some(names) => names[j].clone(),
            None => format!("x{j}"),
        }
    }

    /// Plain-text dump in an LP-style layout:
    ///
    /// ```text
    /// minimize
    ///  obj: <term> <term> ...
    /// subject to
    ///  c<r>: <term> <term> ... <= | = | >= <rhs>
    /// binary
    ///  <name> <name> ...
    /// end
    /// ```
    ///
    /// A term is `+ <coef> <name>` or `- <coef> <name>`, coefficients printed
    /// with Rust's shortest round-trip float formatting. Zero objective
    /// coefficients are omitted; an empty row or objective prints `0`.
    pub fn to_lp_string(&self) -> String {
        let mut out = String::from("minimize\n obj:");
        let terms: Vec<(usize, f64)> = self
            .objective
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(|(j, &c)| (j, c))
            .collect();
        self.write_terms(&mut out, &terms);
        out.push_str("\nsubject to\n");
        for (r, c) in self.constraints.iter().enumerate() {
            let _ = write!(out, " c{r}:");
            self.write_terms(&mut out, &c.coeffs);
            let _ = writeln!(out, " {} {}", c.sense.symbol(), c.rhs);
        }
        out.push_str("binary\n");
        if self.var_count > 0 {
            let names: Vec<String> = (0..self.var_count).map(|j| self.var_name(j)).collect();
            let _ = writeln!(out, " {}", names.join(" "));
        }
        out.push_str("end\n");
        out
    }

    fn write_terms(&self, out: &mut String, terms: &[(usize, f64)]) {
        if terms.is_empty() {
            out.push_str(" 0");
        }
        for &(j, a) in terms {
            let sign = if a < 0.0 { '-' } else { '+' };
            let _ = write!(out, " {sign} {} {}", a.abs(), self.var_name(j));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merges_duplicates_and_rejects_bad_indices() {
        let mut p = BinaryProgram::new(3);
        p.add_constraint(vec![(2, 1.0), (0, 2.0), (2, 0.5), (1, 0.0)], Sense::Le, 3.0)
            .unwrap();
        assert_eq!(p.constraints[0].coeffs, vec![(0, 2.0), (2, 1.5)]);
        assert!(p.add_constraint(vec![(3, 1.0)], Sense::Le, 1.0).is_err());
        assert!(p.add_constraint(vec![(0, 1.0)], Sense::Le, f64::INFINITY).is_err());
    }

    #[test]
    fn feasibility_checker() {
        let mut p = BinaryProgram::new(2);
        p.add_constraint(vec![(0, 1.0), (1, 1.0)], Sense::Eq, 1.0).unwrap();
        assert!(p.is_feasible(&[1, 0], 1e-6));
        assert!(!p.is_feasible(&[1, 1], 1e-6));
        assert!(!p.is_feasible(&[1], 1e-6));
    }

    #[test]
    fn lp_dump_layout() {
        let mut p = BinaryProgram::new(2);
        p.set_objective(0, -1.0);
        p.set_objective(1, 2.5);
        p.add_constraint(vec![(0, 1.0), (1, 1.0)], Sense::Ge, 1.0).unwrap();
        let text = p.to_lp_string();
        assert_eq!(
            text,
            "minimize\n obj: - 1 x0 + 2.5 x1\nsubject to\n c0: + 1 x0 + 1 x1 >= 1\nbinary\n x0 x1\nend\n"
        );
    }
}
