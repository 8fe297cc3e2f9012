//! Damage update with irreversibility `α ≥ α_prev` and the bound `α ≤ 1`.

use crate::assembly::{Constraints, SparseSystem};
use crate::sparse::{norm_inf, LinearSolveError};

use super::linear::LinearSolver;

/// Nodal `max(candidate, previous)` clamped to `[0, 1]`. Returns the
/// projected field and the number of nodes whose candidate exceeded 1.
pub fn enforce_irreversibility(candidate: &[f64], previous: &[f64]) -> (Vec<f64>, usize) {
    assert_eq!(
        candidate.len(),
        previous.len(),
        "damage vectors differ in length"
    );
    let mut clamped = 0;
    let out = candidate
        .iter()
        .zip(previous)
        .map(|(&c, &p)| {
            if c > 1.0 {
                clamped += 1;
            }
            c.max(p).clamp(0.0, 1.0)
        })
        .collect();
    (out, clamped)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoxQpMethod {
    ActiveSet,
    GaussSeidel,
}

#[derive(Debug, Clone)]
pub struct BoxQpOutcome {
    pub x: Vec<f64>,
    pub method: BoxQpMethod,
    pub iterations: usize,
    /// Nodes held at the upper bound.
    pub at_upper: usize,
}

const MAX_ACTIVE_SET_ITERATIONS: usize = 100;
const MAX_SWEEPS: usize = 200_000;

/// Minimises `½ xᵀA x - bᵀx` over `lo ≤ x ≤ hi` by a primal-dual active set
/// iteration; falls back to projected Gauss-Seidel if the active sets cycle.
/// `system` must not carry Dirichlet rows.
pub fn solve_box_qp(
    system: &SparseSystem,
    lo: &[f64],
    hi: &[f64],
    x0: &[f64],
    linear: &mut LinearSolver,
) -> Result<BoxQpOutcome, LinearSolveError> {
    let a = &system.matrix;
    let b = &system.rhs;
    let n = a.size();
    if lo.len() != n || hi.len() != n || x0.len() != n {
        return Err(LinearSolveError::Dimension(
            n,
            lo.len().min(hi.len()).min(x0.len()),
        ));
    }
    let diag = a.diagonal();
    let gtol = 1e-12 * norm_inf(b).max(f64::MIN_POSITIVE);

    let mut x: Vec<f64> = (0..n)
        .map(|i| x0[i].clamp(lo[i], hi[i].max(lo[i])))
        .collect();
    let g = gradient(system, &x);
    // 0 free, 1 lower, 2 upper
    let mut set: Vec<u8> = (0..n)
        .map(|i| {
            if lo[i] >= hi[i] {
                1
            } else if x[i] <= lo[i] && g[i] > gtol {
                1
            } else if x[i] >= hi[i] && g[i] < -gtol {
                2
            } else {
                0
            }
        })
        .collect();

    let mut seen: Vec<Vec<u8>> = Vec::new();
    for it in 1..=MAX_ACTIVE_SET_ITERATIONS {
        let mut c = Constraints::new();
        for i in 0..n {
            match set[i] {
                1 => c.insert(i, lo[i]).expect("single insert"),
                2 => c.insert(i, hi[i]).expect("single insert"),
                _ => {}
            }
        }
        let mut sys = system.clone();
        sys.apply_dirichlet(&c);
        x = linear.solve(&sys.matrix, &sys.rhs, Some(&x))?;
        let g = gradient(system, &x);
        let next: Vec<u8> = (0..n)
            .map(|i| {
                if lo[i] >= hi[i] {
                    return 1;
                }
                let lam = if set[i] == 0 { 0.0 } else { g[i] };
                let ci = diag[i].max(f64::MIN_POSITIVE);
                if lam + ci * (lo[i] - x[i]) > gtol && !(set[i] == 0 && x[i] >= lo[i]) {
                    1
                } else if -lam + ci * (x[i] - hi[i]) > gtol && !(set[i] == 0 && x[i] <= hi[i]) {
                    2
                } else {
                    0
                }
            })
            .collect();
        if next == set {
            for i in 0..n {
                x[i] = x[i].clamp(lo[i], hi[i].max(lo[i]));
            }
            let at_upper = set.iter().filter(|s| **s == 2).count();
            return Ok(BoxQpOutcome {
                x,
                method: BoxQpMethod::ActiveSet,
                iterations: it,
                at_upper,
            });
        }
        if seen.contains(&next) {
            break;
        }
        seen.push(std::mem::replace(&mut set, next));
    }
    projected_gauss_seidel(system, lo, hi, &x, &diag)
}

fn gradient(system: &SparseSystem, x: &[f64]) -> Vec<f64> {
    let mut g = system.matrix.apply(x);
    for (gi, bi) in g.iter_mut().zip(&system.rhs) {
        *gi -= bi;
    }
    g
}

fn projected_gauss_seidel(
    system: &SparseSystem,
    lo: &[f64],
    hi: &[f64],
    x0: &[f64],
    diag: &[f64],
) -> Result<BoxQpOutcome, LinearSolveError> {
    let a = &system.matrix;
    let n = a.size();
    if let Some((row, &pivot)) = diag.iter().enumerate().find(|(_, d)| !(**d > 0.0)) {
        return Err(LinearSolveError::Singular { row, pivot });
    }
    let mut x: Vec<f64> = (0..n)
        .map(|i| x0[i].clamp(lo[i], hi[i].max(lo[i])))
        .collect();
    for sweep in 1..=MAX_SWEEPS {
        let mut change = 0.0f64;
        for i in 0..n {
            let (cols, vals) = a.row(i);
            let mut s = system.rhs[i];
            for (&j, &v) in cols.iter().zip(vals) {
                if j != i {
                    s -= v * x[j];
                }
            }
            let xi = (s / diag[i]).clamp(lo[i], hi[i].max(lo[i]));
            change = change.max((xi - x[i]).abs());
            x[i] = xi;
        }
        if !change.is_finite() {
            return Err(LinearSolveError::NonFinite);
        }
        if change <= 1e-13 {
            let at_upper = (0..n).filter(|&i| x[i] >= hi[i] && lo[i] < hi[i]).count();
            return Ok(BoxQpOutcome {
                x,
                method: BoxQpMethod::GaussSeidel,
                iterations: sweep,
                at_upper,
            });
        }
    }
    Err(LinearSolveError::NotConverged {
        iterations: MAX_SWEEPS,
        residual: f64::NAN,
        residual_history: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::DofMap;
    use crate::solver::linear::LinearConfig;
    use crate::sparse::CsrMatrix;
    use proptest::prelude::*;

    fn laplacian(n: usize, shift: f64) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 + shift));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, &t)
    }

    fn energy(a: &CsrMatrix, b: &[f64], x: &[f64]) -> f64 {
        let ax = a.apply(x);
        0.5 * x.iter().zip(&ax).map(|(p, q)| p * q).sum::<f64>()
            - x.iter().zip(b).map(|(p, q)| p * q).sum::<f64>()
    }

    #[test]
    fn irreversibility_examples() {
        let prev = [0.2, 0.5, 0.0];
        assert_eq!(
            enforce_irreversibility(&[0.1, 0.4, -1.0], &prev).0,
            prev.to_vec()
        );
        assert_eq!(enforce_irreversibility(&prev, &prev).0, prev.to_vec());
        let (a, clamped) = enforce_irreversibility(&[1.2, 0.6, 0.3], &prev);
        assert_eq!(a, vec![1.0, 0.6, 0.3]);
        assert_eq!(clamped, 1);
    }

    #[test]
    fn unconstrained_interior_solution_is_exact() {
        let a = laplacian(6, 1.0);
        let x_true = [0.1, 0.3, 0.5, 0.4, 0.2, 0.6];
        let b = a.apply(&x_true);
        let sys = SparseSystem {
            matrix: a,
            rhs: b,
            dofs: DofMap { components: 1 },
        };
        let mut ls = LinearSolver::new(LinearConfig::default());
        let out = solve_box_qp(&sys, &[0.0; 6], &[1.0; 6], &[0.0; 6], &mut ls).unwrap();
        assert_eq!(out.method, BoxQpMethod::ActiveSet);
        for (p, q) in out.x.iter().zip(&x_true) {
            assert!((p - q).abs() < 1e-9);
        }
    }

    #[test]
    fn fixed_nodes_stay_fixed() {
        let a = laplacian(4, 0.5);
        let sys = SparseSystem {
            matrix: a,
            rhs: vec![-1.0; 4],
            dofs: DofMap { components: 1 },
        };
        let mut ls = LinearSolver::new(LinearConfig::default());
        let out = solve_box_qp(&sys, &[0.0, 1.0, 0.0, 0.0], &[1.0; 4], &[0.0; 4], &mut ls).unwrap();
        assert_eq!(out.x[1], 1.0);
        assert!(out.x.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    proptest! {
        #[test]
        fn box_qp_satisfies_kkt(
            b in proptest::collection::vec(-3.0f64..3.0, 8),
            lo in proptest::collection::vec(0.0f64..0.4, 8),
        ) {
            let a = laplacian(8, 0.3);
            let hi = vec![1.0; 8];
            let sys = SparseSystem { matrix: a.clone(), rhs: b.clone(), dofs: DofMap { components: 1 } };
            let mut ls = LinearSolver::new(LinearConfig::default());
            let out = solve_box_qp(&sys, &lo, &hi, &lo, &mut ls).unwrap();
            let g = gradient(&sys, &out.x);
            for i in 0..8 {
                prop_assert!(out.x[i] >= lo[i] && out.x[i] <= hi[i]);
                if out.x[i] > lo[i] + 1e-12 && out.x[i] < hi[i] - 1e-12 {
                    prop_assert!(g[i].abs() < 1e-8);
                } else if out.x[i] <= lo[i] + 1e-12 {
                    prop_assert!(g[i] > -1e-8);
                } else {
                    prop_assert!(g[i] < 1e-8);
                }
            }
            // no feasible coordinate perturbation lowers the energy
            let e0 = energy(&a, &b, &out.x);
            for i in 0..8 {
                for d in [-1e-3, 1e-3] {
                    let mut y = out.x.clone();
                    y[i] = (y[i] + d).clamp(lo[i], hi[i]);
                    prop_assert!(energy(&a, &b, &y) >= e0 - 1e-12);
                }
            }
        }

        #[test]
        fn projection_is_monotone_and_bounded(
            c in proptest::collection::vec(-2.0f64..2.0, 10),
            p in proptest::collection::vec(0.0f64..1.0, 10),
        ) {
            let (a, _) = enforce_irreversibility(&c, &p);
            for i in 0..10 {
                prop_assert!(a[i] >= p[i] && a[i] <= 1.0 && a[i] >= 0.0);
            }
            let (again, _) = enforce_irreversibility(&a, &p);
            prop_assert_eq!(again, a);
        }
    }
}
