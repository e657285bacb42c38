//! Compressed-row sparse matrices and Jacobi-preconditioned Krylov solvers.

use crate::error::{Error, Result};

/// Square sparse matrix in compressed-row layout with sorted, unique
/// column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from `(row, col, value)` triplets; repeated positions are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted = triplets.to_vec();
        if let Some(&(r, c, _)) = sorted.iter().find(|(r, c, _)| *r >= n || *c >= n) {
            return Err(Error::invalid(format!(
                "entry ({r}, {c}) outside a {n}x{n} matrix"
            )));
        }
        sorted.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; n + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Storage slot of entry `(row, col)`, if it is part of the pattern.
    pub fn position(&self, row: usize, col: usize) -> Option<usize> {
        let lo = self.row_ptr[row];
        let hi = self.row_ptr[row + 1];
        self.col_idx[lo..hi]
            .binary_search(&col)
            .ok()
            .map(|k| lo + k)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.position(row, col).map_or(0.0, |k| self.values[k])
    }

    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yi = s;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverReport {
    pub iterations: usize,
    /// `‖Ax − b‖ / ‖b‖`, or `‖Ax‖` when `b = 0`.
    pub final_residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn true_residual(a: &CsrMatrix, x: &[f64], b: &[f64], r: &mut [f64]) {
    a.mul_vec_into(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
}

fn inverse_diagonal(a: &CsrMatrix) -> Vec<f64> {
    a.diagonal()
        .into_iter()
        .map(|d| if d != 0.0 { 1.0 / d } else { 1.0 })
        .collect()
}

fn check_dims(a: &CsrMatrix, b: &[f64], x: &[f64], opts: &SolverOptions) -> Result<()> {
    if b.len() != a.dim() || x.len() != a.dim() {
        return Err(Error::invalid(format!(
            "vector length {} / {} does not match matrix dimension {}",
            b.len(),
            x.len(),
            a.dim()
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::invalid("solver tolerance must be positive"));
    }
    Ok(())
}

/// Conjugate gradients with Jacobi preconditioning for SPD systems.
pub fn solve_spd(a: &CsrMatrix, b: &[f64], opts: SolverOptions) -> Result<(Vec<f64>, SolverReport)> {
    let mut x = vec![0.0; a.dim()];
    let report = solve_spd_from(a, b, &mut x, opts)?;
    Ok((x, report))
}

/// As [`solve_spd`], starting from the initial guess held in `x`.
pub fn solve_spd_from(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    opts: SolverOptions,
) -> Result<SolverReport> {
    check_dims(a, b, x, &opts)?;
    let n = a.dim();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolverReport {
            iterations: 0,
            final_residual: 0.0,
            converged: true,
        });
    }
    let inv_diag = inverse_diagonal(a);
    let target = opts.tol * b_norm;

    let mut r = vec![0.0; n];
    true_residual(a, x, b, &mut r);
    let mut res = norm(&r);
    if res <= target {
        return Ok(SolverReport {
            iterations: 0,
            final_residual: res / b_norm,
            converged: true,
        });
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);

    for it in 1..=opts.max_iter {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            return Ok(SolverReport {
                iterations: it,
                final_residual: res / b_norm,
                converged: false,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = norm(&r);
        if res <= target {
            // guard against drift of the recursive residual
            true_residual(a, x, b, &mut r);
            res = norm(&r);
            if res <= target {
                return Ok(SolverReport {
                    iterations: it,
                    final_residual: res / b_norm,
                    converged: true,
                });
            }
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Ok(SolverReport {
        iterations: opts.max_iter,
        final_residual: res / b_norm,
        converged: false,
    })
}

/// BiCGStab with Jacobi (right) preconditioning for general nonsingular
/// systems.
pub fn solve_general(
    a: &CsrMatrix,
    b: &[f64],
    opts: SolverOptions,
) -> Result<(Vec<f64>, SolverReport)> {
    let mut x = vec![0.0; a.dim()];
    let report = solve_general_from(a, b, &mut x, opts)?;
    Ok((x, report))
}

/// As [`solve_general`], starting from the initial guess held in `x`.
pub fn solve_general_from(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    opts: SolverOptions,
) -> Result<SolverReport> {
    check_dims(a, b, x, &opts)?;
    let n = a.dim();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolverReport {
            iterations: 0,
            final_residual: 0.0,
            converged: true,
        });
    }
    let inv_diag = inverse_diagonal(a);
    let target = opts.tol * b_norm;

    let mut r = vec![0.0; n];
    true_residual(a, x, b, &mut r);
    let mut res = norm(&r);
    if res <= target {
        return Ok(SolverReport {
            iterations: 0,
            final_residual: res / b_norm,
            converged: true,
        });
    }
    let r_hat = r.clone();
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut p_hat = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut s_hat = vec![0.0; n];
    let mut t = vec![0.0; n];
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);

    let breakdown = |it: usize, res: f64| SolverReport {
        iterations: it,
        final_residual: res / b_norm,
        converged: false,
    };

    for it in 1..=opts.max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || !rho_new.is_finite() {
            return Ok(breakdown(it, res));
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            p_hat[i] = p[i] * inv_diag[i];
        }
        a.mul_vec_into(&p_hat, &mut v);
        let rv = dot(&r_hat, &v);
        if rv == 0.0 || !rv.is_finite() {
            return Ok(breakdown(it, res));
        }
        alpha = rho / rv;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) <= target {
            for i in 0..n {
                x[i] += alpha * p_hat[i];
            }
            true_residual(a, x, b, &mut r);
            res = norm(&r);
            if res <= target {
                return Ok(SolverReport {
                    iterations: it,
                    final_residual: res / b_norm,
                    converged: true,
                });
            }
            // recursive residual drifted; restart the direction from the
            // true residual on the next pass
            continue;
        }
        for i in 0..n {
            s_hat[i] = s[i] * inv_diag[i];
        }
        a.mul_vec_into(&s_hat, &mut t);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            return Ok(breakdown(it, res));
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
            r[i] = s[i] - omega * t[i];
        }
        res = norm(&r);
        if res <= target {
            true_residual(a, x, b, &mut r);
            res = norm(&r);
            if res <= target {
                return Ok(SolverReport {
                    iterations: it,
                    final_residual: res / b_norm,
                    converged: true,
                });
            }
        }
        if omega == 0.0 {
            return Ok(breakdown(it, res));
        }
    }
    Ok(SolverReport {
        iterations: opts.max_iter,
        final_residual: res / b_norm,
        converged: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Dense Gaussian elimination with partial pivoting, kept separate from
    /// the library LU so it can serve as an oracle.
    fn gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| a[i][k].abs().partial_cmp(&a[j][k].abs()).unwrap())
                .unwrap();
            a.swap(k, p);
            b.swap(k, p);
            for i in k + 1..n {
                let f = a[i][k] / a[k][k];
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
            x[i] = (b[i] - s) / a[i][i];
        }
        x
    }

    fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
        let ax = a.mul_vec(x);
        let r: f64 = ax.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum();
        r.sqrt() / norm(b)
    }

    fn poisson_1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, &t).unwrap()
    }

    #[test]
    fn triplets_are_merged_and_sorted() {
        let m = CsrMatrix::from_triplets(2, &[(1, 1, 1.0), (0, 1, 2.0), (1, 1, 3.0)]).unwrap();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(1, 1), 4.0);
        assert_eq!(m.get(0, 1), 2.0);
        assert_eq!(m.get(0, 0), 0.0);
        assert!(CsrMatrix::from_triplets(2, &[(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn spd_identity_one_iteration() {
        let a = CsrMatrix::identity(5);
        let b = vec![1.0, -2.0, 3.0, 0.5, 7.0];
        let (x, rep) = solve_spd(&a, &b, SolverOptions::default()).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.iterations, 1);
        assert_eq!(x, b);
    }

    #[test]
    fn spd_poisson_matches_dense() {
        let a = poisson_1d(4);
        let b = vec![1.0; 4];
        let (x, rep) = solve_spd(&a, &b, SolverOptions { tol: 1e-12, max_iter: 100 }).unwrap();
        let oracle = gauss(a.to_dense(), b.clone());
        assert!(rep.converged);
        for (p, q) in x.iter().zip(&oracle) {
            assert!((p - q).abs() < 1e-10);
        }
        // x = (2, 3, 3, 2)
        assert!((oracle[0] - 2.0).abs() < 1e-12 && (oracle[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn homogeneous_system_gives_zero() {
        let a = poisson_1d(6);
        let (x, rep) = solve_spd(&a, &[0.0; 6], SolverOptions::default()).unwrap();
        assert!(rep.converged && rep.iterations <= 1);
        assert!(x.iter().all(|&v| v == 0.0));
        let (x, rep) = solve_general(&a, &[0.0; 6], SolverOptions::default()).unwrap();
        assert!(rep.converged && x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn general_diagonal_and_identity() {
        let a = CsrMatrix::from_triplets(2, &[(0, 0, 2.0), (1, 1, 4.0)]).unwrap();
        let (x, rep) = solve_general(&a, &[2.0, 4.0], SolverOptions::default()).unwrap();
        assert!(rep.converged);
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);

        let a = CsrMatrix::identity(3);
        let b = [0.3, -1.0, 2.0];
        let (x, _) = solve_general(&a, &b, SolverOptions::default()).unwrap();
        for (p, q) in x.iter().zip(&b) {
            assert!((p - q).abs() < 1e-14);
        }
    }

    #[test]
    fn general_advection_diffusion_matches_dense() {
        // 5-point upwinded advection-diffusion in 1D
        let n = 5;
        let (nu, u) = (0.5, 1.3);
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 * nu + u + 0.1));
            if i > 0 {
                t.push((i, i - 1, -nu - u));
            }
            if i + 1 < n {
                t.push((i, i + 1, -nu));
            }
        }
        let a = CsrMatrix::from_triplets(n, &t).unwrap();
        let b = vec![1.0, -0.5, 2.0, 0.0, 0.7];
        let opts = SolverOptions { tol: 1e-10, max_iter: 200 };
        let (x, rep) = solve_general(&a, &b, opts).unwrap();
        assert!(rep.converged);
        let oracle = gauss(a.to_dense(), b.clone());
        let scale = norm(&oracle);
        for (p, q) in x.iter().zip(&oracle) {
            assert!((p - q).abs() <= 1e-9 * scale);
        }
        assert!(relative_residual(&a, &x, &b) <= opts.tol);
    }

    #[test]
    fn non_convergence_is_reported() {
        let a = poisson_1d(50);
        let b = vec![1.0; 50];
        let (_, rep) = solve_spd(&a, &b, SolverOptions { tol: 1e-14, max_iter: 3 }).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 3);
    }

    #[test]
    fn converged_reports_honor_true_residual() {
        let a = poisson_1d(40);
        let b: Vec<f64> = (0..40).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let opts = SolverOptions { tol: 1e-9, max_iter: 500 };
        let (x, rep) = solve_spd(&a, &b, opts).unwrap();
        assert!(rep.converged);
        assert!(relative_residual(&a, &x, &b) <= opts.tol);
        let (x2, rep2) = solve_spd(&a, &b, opts).unwrap();
        assert_eq!(x, x2);
        assert_eq!(rep, rep2);
    }

    #[test]
    fn warm_start_at_solution_exits_immediately() {
        let a = poisson_1d(8);
        let b = vec![1.0; 8];
        let (mut x, _) = solve_spd(&a, &b, SolverOptions { tol: 1e-13, max_iter: 100 }).unwrap();
        let rep = solve_spd_from(&a, &b, &mut x, SolverOptions::default()).unwrap();
        assert_eq!(rep.iterations, 0);
        assert!(rep.converged);
    }
}
