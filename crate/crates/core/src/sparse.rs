//! Compressed sparse row storage with a fixed pattern, plus the linear
//! solvers used by the staggered scheme: preconditioned conjugate gradients
//! (Jacobi or zero-fill incomplete Cholesky) and an envelope Cholesky
//! factorisation on a reverse Cuthill-McKee ordering.

use std::collections::VecDeque;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum LinearSolveError {
    #[error("system of size {0} does not match vector of length {1}")]
    Dimension(usize, usize),
    #[error("matrix is singular or indefinite at row {row} (pivot {pivot:e})")]
    Singular { row: usize, pivot: f64 },
    #[error("conjugate gradients broke down at iteration {iteration}")]
    Breakdown {
        iteration: usize,
        residual_history: Vec<f64>,
    },
    #[error("conjugate gradients did not converge in {iterations} iterations (relative residual {residual:e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        residual_history: Vec<f64>,
    },
    #[error("non-finite value in linear system")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Zero matrix with the given sorted, deduplicated row patterns.
    pub fn from_pattern(rows: Vec<Vec<usize>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            col_idx.extend(r);
            row_ptr.push(col_idx.len());
        }
        let values = vec![0.0; col_idx.len()];
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Builds from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows = vec![Vec::new(); n];
        for &(i, j, _) in triplets {
            rows[i].push(j);
        }
        let mut m = Self::from_pattern(rows);
        for &(i, j, v) in triplets {
            let k = m.position(i, j).expect("pattern contains entry");
            m.values[k] += v;
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::from_pattern((0..n).map(|i| vec![i]).collect());
        m.values.fill(1.0);
        m
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Storage offset of entry `(i, j)`, if it is in the pattern.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (cols, _) = self.row(i);
        cols.binary_search(&j).ok().map(|k| self.row_ptr[i] + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yi = s;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec(x, &mut y);
        y
    }

    /// Largest relative asymmetry `|a_ij - a_ji| / max|a|`.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                row[j] = v;
            }
        }
        d
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Preconditioner {
    #[default]
    Jacobi,
    /// Zero-fill incomplete Cholesky; falls back to a diagonally shifted
    /// factorisation, then to Jacobi, if a pivot is not positive.
    IncompleteCholesky,
}

impl std::fmt::Display for Preconditioner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Preconditioner::Jacobi => "jacobi",
            Preconditioner::IncompleteCholesky => "ic0",
        })
    }
}

impl std::str::FromStr for Preconditioner {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jacobi" => Ok(Preconditioner::Jacobi),
            "ic0" => Ok(Preconditioner::IncompleteCholesky),
            other => Err(format!(
                "unknown preconditioner '{other}' (expected jacobi or ic0)"
            )),
        }
    }
}

/// Lower factor of a zero-fill incomplete Cholesky factorisation, stored by
/// rows with the diagonal last in each row.
#[derive(Debug, Clone)]
pub struct IncompleteCholesky {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl IncompleteCholesky {
    /// Factors `A + shift·diag(A)` on the lower pattern of `A`. Returns
    /// `None` on a non-positive pivot.
    pub fn factor(a: &CsrMatrix, shift: f64) -> Option<Self> {
        let n = a.size();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..n {
            let (cols, vals) = a.row(i);
            let start = col_idx.len();
            for (&j, &v) in cols.iter().zip(vals) {
                if j < i {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            let diag_pos = col_idx.len();
            col_idx.push(i);
            values.push(a.get(i, i) * (1.0 + shift));
            for p in start..diag_pos {
                let j = col_idx[p];
                let (js, je) = (row_ptr[j], row_ptr[j + 1] - 1);
                // sparse dot of row i (before p) and row j (before its diagonal)
                let (mut x, mut y, mut sum) = (start, js, 0.0);
                while x < p && y < je {
                    match col_idx[x].cmp(&col_idx[y]) {
                        std::cmp::Ordering::Less => x += 1,
                        std::cmp::Ordering::Greater => y += 1,
                        std::cmp::Ordering::Equal => {
                            sum += values[x] * values[y];
                            x += 1;
                            y += 1;
                        }
                    }
                }
                values[p] = (values[p] - sum) / values[je];
            }
            let sq: f64 = values[start..diag_pos].iter().map(|v| v * v).sum();
            let d = values[diag_pos] - sq;
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            values[diag_pos] = d.sqrt();
            row_ptr.push(col_idx.len());
        }
        Some(IncompleteCholesky {
            row_ptr,
            col_idx,
            values,
        })
    }

    /// `z = (L Lᵀ)⁻¹ r`.
    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = self.row_ptr.len() - 1;
        for i in 0..n {
            let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1] - 1);
            let mut v = r[i];
            for p in s..e {
                v -= self.values[p] * z[self.col_idx[p]];
            }
            z[i] = v / self.values[e];
        }
        for i in (0..n).rev() {
            let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1] - 1);
            z[i] /= self.values[e];
            let zi = z[i];
            for p in s..e {
                z[self.col_idx[p]] -= self.values[p] * zi;
            }
        }
    }
}

enum Apply {
    Jacobi(Vec<f64>),
    Ic(IncompleteCholesky),
}

impl Apply {
    fn build(a: &CsrMatrix, diag: Vec<f64>, kind: Preconditioner) -> Self {
        if kind == Preconditioner::IncompleteCholesky {
            for shift in [0.0, 1e-3, 1e-2, 1e-1] {
                if let Some(f) = IncompleteCholesky::factor(a, shift) {
                    return Apply::Ic(f);
                }
            }
        }
        Apply::Jacobi(diag)
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Apply::Jacobi(d) => {
                for i in 0..r.len() {
                    z[i] = r[i] / d[i];
                }
            }
            Apply::Ic(f) => f.apply(r, z),
        }
    }
}

/// Solves `A x = b` by Jacobi-preconditioned conjugate gradients starting from
/// the contents of `x`. Stops when `‖r‖₂ ≤ tol · ‖b‖₂`.
pub fn pcg(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<usize, LinearSolveError> {
    pcg_with(a, b, x, tol, max_iter, Preconditioner::Jacobi)
}

/// Conjugate gradients with the chosen preconditioner.
pub fn pcg_with(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
    preconditioner: Preconditioner,
) -> Result<usize, LinearSolveError> {
    let n = a.size();
    if b.len() != n || x.len() != n {
        return Err(LinearSolveError::Dimension(n, b.len()));
    }
    if b.iter().any(|v| !v.is_finite()) || a.values().iter().any(|v| !v.is_finite()) {
        return Err(LinearSolveError::NonFinite);
    }
    let diag = a.diagonal();
    if let Some((row, &pivot)) = diag.iter().enumerate().find(|(_, d)| !(**d > 0.0)) {
        return Err(LinearSolveError::Singular { row, pivot });
    }
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        x.fill(0.0);
        return Ok(0);
    }
    let mut r = a.apply(x);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let m = Apply::build(a, diag, preconditioner);
    let mut z = vec![0.0; n];
    m.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut history = Vec::new();
    for it in 0..=max_iter {
        let rel = norm2(&r) / bnorm;
        history.push(rel);
        if rel <= tol {
            return Ok(it);
        }
        if it == max_iter {
            break;
        }
        a.mul_vec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(LinearSolveError::Breakdown {
                iteration: it,
                residual_history: history,
            });
        }
        let step = rz / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        m.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(LinearSolveError::NotConverged {
        iterations: max_iter,
        residual: *history.last().unwrap_or(&f64::NAN),
        residual_history: history,
    })
}

/// Reverse Cuthill-McKee permutation of the pattern of `a`:
/// `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.size();
    let degree: Vec<usize> = (0..n).map(|i| a.row(i).0.len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree[i], i));
    let mut queue = VecDeque::new();
    for &start in &by_degree {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = a
                .row(v)
                .0
                .iter()
                .copied()
                .filter(|&j| !visited[j])
                .collect();
            nbrs.sort_by_key(|&j| (degree[j], j));
            for j in nbrs {
                visited[j] = true;
                queue.push_back(j);
            }
        }
    }
    order.reverse();
    order
}

/// Cholesky factor stored by rows over the matrix envelope of a permuted
/// symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    perm: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    /// Factorises `a` using ordering `perm` (`perm[new] = old`).
    pub fn factor(a: &CsrMatrix, perm: &[usize]) -> Result<Self, LinearSolveError> {
        let n = a.size();
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (new, &old) in perm.iter().enumerate() {
            for &j in a.row(old).0 {
                first[new] = first[new].min(inv[j]);
            }
        }
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for i in 0..n {
            start.push(start[i] + (i - first[i] + 1));
        }
        let mut data = vec![0.0; start[n]];
        for (new, &old) in perm.iter().enumerate() {
            let (cols, vals) = a.row(old);
            for (&j, &v) in cols.iter().zip(vals) {
                let jn = inv[j];
                if jn <= new {
                    data[start[new] + jn - first[new]] = v;
                }
            }
        }
        let scale = a.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let mut s = data[start[i] + j - fi];
                let ri = &data[start[i] + k0 - fi..start[i] + j - fi];
                let rj = &data[start[j] + k0 - fj..start[j] + j - fj];
                s -= dot(ri, rj);
                if j < i {
                    s /= data[start[j + 1] - 1];
                    data[start[i] + j - fi] = s;
                } else {
                    if !(s > 1e-14 * scale) || !s.is_finite() {
                        return Err(LinearSolveError::Singular {
                            row: perm[i],
                            pivot: s,
                        });
                    }
                    data[start[i] + j - fi] = s.sqrt();
                }
            }
        }
        Ok(EnvelopeCholesky {
            perm: perm.to_vec(),
            first,
            start,
            data,
        })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.perm.len();
        let mut y: Vec<f64> = self.perm.iter().map(|&o| b[o]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1]];
            let s = y[i] - dot(&row[..i - fi], &y[fi..i]);
            y[i] = s / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1]];
            y[i] /= row[i - fi];
            let yi = y[i];
            for (k, &l) in row[..i - fi].iter().enumerate() {
                y[fi + k] -= l * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }

    pub fn envelope_size(&self) -> usize {
        self.data.len()
    }
}
