//! Dispatch between the iterative and direct linear solvers.

use std::fmt;
use std::str::FromStr;

use crate::assembly::SparseSystem;
use crate::sparse::{
    pcg_with, reverse_cuthill_mckee, CsrMatrix, EnvelopeCholesky, LinearSolveError, Preconditioner,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LinearSolverKind {
    /// Preconditioned conjugate gradients.
    #[default]
    Pcg,
    /// Envelope Cholesky on a reverse Cuthill-McKee ordering.
    Direct,
}

impl fmt::Display for LinearSolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LinearSolverKind::Pcg => "pcg",
            LinearSolverKind::Direct => "direct",
        })
    }
}

impl FromStr for LinearSolverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pcg" => Ok(LinearSolverKind::Pcg),
            "direct" => Ok(LinearSolverKind::Direct),
            other => Err(format!(
                "unknown linear solver '{other}' (expected pcg or direct)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearConfig {
    pub kind: LinearSolverKind,
    pub preconditioner: Preconditioner,
    /// Relative residual tolerance of the iterative solver.
    pub tolerance: f64,
    /// Iteration cap of the iterative solver; `None` means `10 n`.
    pub max_iterations: Option<usize>,
}

impl Default for LinearConfig {
    fn default() -> Self {
        LinearConfig {
            kind: LinearSolverKind::Pcg,
            preconditioner: Preconditioner::Jacobi,
            tolerance: 1e-10,
            max_iterations: None,
        }
    }
}

/// Linear solver with cached fill-reducing orderings, keyed by pattern.
#[derive(Debug, Clone, Default)]
pub struct LinearSolver {
    config: LinearConfig,
    orderings: Vec<(usize, usize, Vec<usize>)>,
    pub solves: usize,
    pub iterations: usize,
}

impl LinearSolver {
    pub fn new(config: LinearConfig) -> Self {
        LinearSolver {
            config,
            ..Default::default()
        }
    }

    pub fn config(&self) -> &LinearConfig {
        &self.config
    }

    /// Solves `a x = b`; `guess` seeds the iterative solver.
    pub fn solve(
        &mut self,
        a: &CsrMatrix,
        b: &[f64],
        guess: Option<&[f64]>,
    ) -> Result<Vec<f64>, LinearSolveError> {
        let n = a.size();
        if b.len() != n {
            return Err(LinearSolveError::Dimension(n, b.len()));
        }
        self.solves += 1;
        match self.config.kind {
            LinearSolverKind::Pcg => {
                let mut x = match guess {
                    Some(g) if g.len() == n => g.to_vec(),
                    _ => vec![0.0; n],
                };
                let cap = self.config.max_iterations.unwrap_or(10 * n.max(10));
                let it = pcg_with(
                    a,
                    b,
                    &mut x,
                    self.config.tolerance,
                    cap,
                    self.config.preconditioner,
                )?;
                self.iterations += it;
                Ok(x)
            }
            LinearSolverKind::Direct => {
                if b.iter().any(|v| !v.is_finite()) || a.values().iter().any(|v| !v.is_finite()) {
                    return Err(LinearSolveError::NonFinite);
                }
                let key = (n, a.nnz());
                let perm = match self.orderings.iter().find(|(s, z, _)| (*s, *z) == key) {
                    Some((_, _, p)) => p.clone(),
                    None => {
                        let p = reverse_cuthill_mckee(a);
                        self.orderings.push((key.0, key.1, p.clone()));
                        p
                    }
                };
                let factor = EnvelopeCholesky::factor(a, &perm)?;
                Ok(factor.solve(b))
            }
        }
    }
}

/// Solves a Dirichlet-imposed system with a fresh solver.
pub fn solve_linear(
    system: &SparseSystem,
    config: &LinearConfig,
) -> Result<Vec<f64>, LinearSolveError> {
    LinearSolver::new(*config).solve(&system.matrix, &system.rhs, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{DofMap, SparseSystem};

    fn system(matrix: CsrMatrix, rhs: Vec<f64>) -> SparseSystem {
        SparseSystem {
            matrix,
            rhs,
            dofs: DofMap { components: 1 },
        }
    }

    #[test]
    fn identity_returns_rhs() {
        for kind in [LinearSolverKind::Pcg, LinearSolverKind::Direct] {
            let cfg = LinearConfig {
                kind,
                ..Default::default()
            };
            let s = system(CsrMatrix::identity(4), vec![1.0, -2.0, 3.5, 0.0]);
            assert_eq!(solve_linear(&s, &cfg).unwrap(), vec![1.0, -2.0, 3.5, 0.0]);
        }
    }

    #[test]
    fn zero_matrix_is_singular() {
        let zero = CsrMatrix::from_triplets(3, &[(0, 0, 0.0), (1, 1, 0.0), (2, 2, 0.0)]);
        for kind in [LinearSolverKind::Pcg, LinearSolverKind::Direct] {
            let cfg = LinearConfig {
                kind,
                ..Default::default()
            };
            let s = system(zero.clone(), vec![1.0; 3]);
            assert!(matches!(
                solve_linear(&s, &cfg),
                Err(LinearSolveError::Singular { .. })
            ));
        }
    }

    #[test]
    fn kinds_parse() {
        assert_eq!(
            "direct".parse::<LinearSolverKind>().unwrap(),
            LinearSolverKind::Direct
        );
        assert!("lu".parse::<LinearSolverKind>().is_err());
    }
}
