//! Cyclic tridiagonal solves for the periodic implicit diffusion step.
//!
//! Rows have the form `d_j x_j + o x_{j+1} + o x_{j-1} = b_j` with periodic
//! indices. The semi-implicit step only ever produces a constant diagonal
//! `1 + 2 lambda` with off-diagonal `-lambda`; Newton iterations for convex
//! splitting add a per-row diagonal shift, so the factorization accepts a
//! diagonal vector.
//!
//! The periodic corners are removed with a Sherman-Morrison rank-one update,
//! leaving two Thomas solves against the same tridiagonal factorization.

use crate::error::{Error, Result};

/// Pivots with smaller magnitude are treated as singular.
pub const PIVOT_FLOOR: f64 = 1e-30;

/// Largest system accepted by [`solve_dense_oracle`].
pub const DENSE_ORACLE_MAX: usize = 2048;

/// Constant-coefficient cyclic system `(diag) x_j + (off) (x_{j-1} + x_{j+1}) = rhs_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct CyclicTridiagonalSystem {
    pub diag: f64,
    pub off: f64,
    pub rhs: Vec<f64>,
}

impl CyclicTridiagonalSystem {
    /// The implicit diffusion system with mesh ratio `lambda`.
    pub fn diffusion(lambda: f64, rhs: Vec<f64>) -> Self {
        Self {
            diag: 1.0 + 2.0 * lambda,
            off: -lambda,
            rhs,
        }
    }

    pub fn len(&self) -> usize {
        self.rhs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rhs.is_empty()
    }

    /// `A x` for this system's matrix.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        apply_cyclic(&vec![self.diag; x.len()], self.off, x)
    }

    /// `||A x - b||_inf`.
    pub fn residual_inf(&self, x: &[f64]) -> f64 {
        self.apply(x)
            .iter()
            .zip(&self.rhs)
            .map(|(ax, b)| (ax - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `A x` for a cyclic tridiagonal matrix with per-row diagonal.
pub fn apply_cyclic(diag: &[f64], off: f64, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|j| {
            let left = x[(j + n - 1) % n];
            let right = x[(j + 1) % n];
            diag[j] * x[j] + off * (left + right)
        })
        .collect()
}

fn check_pivot(row: usize, pivot: f64) -> Result<f64> {
    if pivot.abs() < PIVOT_FLOOR || !pivot.is_finite() {
        Err(Error::SingularSystem { row, pivot })
    } else {
        Ok(pivot)
    }
}

/// Factorized cyclic tridiagonal matrix, reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct CyclicSolver {
    off: f64,
    /// Modified super-diagonal of the Thomas sweep.
    upper: Vec<f64>,
    /// Pivots of the Thomas sweep.
    pivots: Vec<f64>,
    /// `T^{-1} u` for the rank-one correction.
    z: Vec<f64>,
    /// `v = (1, 0, ..., 0, corner_ratio)`.
    corner_ratio: f64,
    denom: f64,
}

impl CyclicSolver {
    pub fn constant(n: usize, diag: f64, off: f64) -> Result<Self> {
        Self::new(&vec![diag; n], off)
    }

    pub fn new(diag: &[f64], off: f64) -> Result<Self> {
        let n = diag.len();
        if n < 3 {
            return Err(Error::InvalidSystem(format!(
                "cyclic systems need at least 3 unknowns, got {n}"
            )));
        }
        // A = T + u v^T with u = (gamma, 0, .., 0, off), v = (1, 0, .., 0, off / gamma).
        let gamma = -check_pivot(0, diag[0])?;
        let corner_ratio = off / gamma;
        let mut modified = diag.to_vec();
        modified[0] -= gamma;
        modified[n - 1] -= off * corner_ratio;

        let mut upper = vec![0.0; n];
        let mut pivots = vec![0.0; n];
        pivots[0] = check_pivot(0, modified[0])?;
        upper[0] = off / pivots[0];
        for j in 1..n {
            pivots[j] = check_pivot(j, modified[j] - off * upper[j - 1])?;
            upper[j] = off / pivots[j];
        }

        let mut solver = Self {
            off,
            upper,
            pivots,
            z: vec![0.0; n],
            corner_ratio,
            denom: 1.0,
        };
        let mut u = vec![0.0; n];
        u[0] = gamma;
        u[n - 1] = off;
        let mut z = vec![0.0; n];
        solver.thomas(&u, &mut z);
        let denom = check_pivot(n - 1, 1.0 + z[0] + corner_ratio * z[n - 1])?;
        solver.z = z;
        solver.denom = denom;
        Ok(solver)
    }

    pub fn len(&self) -> usize {
        self.pivots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pivots.is_empty()
    }

    fn thomas(&self, rhs: &[f64], out: &mut [f64]) {
        let n = rhs.len();
        out[0] = rhs[0] / self.pivots[0];
        for j in 1..n {
            out[j] = (rhs[j] - self.off * out[j - 1]) / self.pivots[j];
        }
        for j in (0..n - 1).rev() {
            out[j] -= self.upper[j] * out[j + 1];
        }
    }

    /// Solves into `out`; both slices must have the factorized length.
    pub fn solve_into(&self, rhs: &[f64], out: &mut [f64]) {
        let n = self.len();
        assert_eq!(rhs.len(), n, "right-hand side length");
        assert_eq!(out.len(), n, "output length");
        self.thomas(rhs, out);
        let factor = (out[0] + self.corner_ratio * out[n - 1]) / self.denom;
        for (x, z) in out.iter_mut().zip(&self.z) {
            *x -= factor * z;
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; rhs.len()];
        self.solve_into(rhs, &mut out);
        out
    }
}

/// Thomas sweep plus Sherman-Morrison correction, `O(J)`.
pub fn solve_cyclic(sys: &CyclicTridiagonalSystem) -> Result<Vec<f64>> {
    let solver = CyclicSolver::constant(sys.len(), sys.diag, sys.off)?;
    Ok(solver.solve(&sys.rhs))
}

/// Same as [`solve_cyclic`] with a per-row diagonal.
pub fn solve_cyclic_variable(diag: &[f64], off: f64, rhs: &[f64]) -> Result<Vec<f64>> {
    if diag.len() != rhs.len() {
        return Err(Error::InvalidSystem(format!(
            "diagonal has {} entries but right-hand side has {}",
            diag.len(),
            rhs.len()
        )));
    }
    Ok(CyclicSolver::new(diag, off)?.solve(rhs))
}

/// Assembles the full matrix and solves by Gaussian elimination with partial
/// pivoting. `O(J^3)`; test oracle only.
pub fn solve_dense_oracle(sys: &CyclicTridiagonalSystem) -> Result<Vec<f64>> {
    let n = sys.len();
    if !(3..=DENSE_ORACLE_MAX).contains(&n) {
        return Err(Error::InvalidSystem(format!(
            "dense oracle needs 3 <= J <= {DENSE_ORACLE_MAX}, got {n}"
        )));
    }
    let mut a = vec![vec![0.0; n]; n];
    for (j, row) in a.iter_mut().enumerate() {
        row[j] += sys.diag;
        row[(j + 1) % n] += sys.off;
        row[(j + n - 1) % n] += sys.off;
    }
    let mut b = sys.rhs.clone();

    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
            .expect("non-empty range");
        check_pivot(col, a[pivot_row][col])?;
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        let (upper, lower) = a.split_at_mut(col + 1);
        let pivot = &upper[col];
        for (k, row) in lower.iter_mut().enumerate() {
            let m = row[col] / pivot[col];
            if m == 0.0 {
                continue;
            }
            for (x, p) in row[col..].iter_mut().zip(&pivot[col..]) {
                *x -= m * p;
            }
            b[col + 1 + k] -= m * b[col];
        }
    }

    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let tail: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - tail) / a[r][r];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    fn inf_norm(a: &[f64]) -> f64 {
        a.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }

    #[test]
    fn identity_system() {
        let b = vec![0.3, -1.0, 2.5, 7.0, 0.0];
        let sys = CyclicTridiagonalSystem {
            diag: 1.0,
            off: 0.0,
            rhs: b.clone(),
        };
        assert_eq!(solve_cyclic(&sys).unwrap(), b);
        assert_eq!(solve_dense_oracle(&sys).unwrap(), b);
    }

    #[test]
    fn diagonal_system() {
        let sys = CyclicTridiagonalSystem {
            diag: 2.0,
            off: 0.0,
            rhs: vec![2.0, 4.0, 6.0],
        };
        assert_eq!(solve_dense_oracle(&sys).unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(solve_cyclic(&sys).unwrap(), vec![1.0, 2.0, 3.0]);
        let sys = CyclicTridiagonalSystem {
            diag: 1.0,
            off: -0.0,
            rhs: vec![1.0; 3],
        };
        assert_eq!(solve_dense_oracle(&sys).unwrap(), vec![1.0; 3]);
        assert_eq!(solve_cyclic(&sys).unwrap(), vec![1.0; 3]);
    }

    #[test]
    fn constants_are_preserved() {
        for &lambda in &[1e-6, 0.25, 1.0, 17.0, 100.0] {
            for &c in &[1.0, -1.0, 0.5375, -0.3] {
                let sys = CyclicTridiagonalSystem::diffusion(lambda, vec![c; 64]);
                let x = solve_cyclic(&sys).unwrap();
                assert!(
                    x.iter().all(|v| (v - c).abs() <= 1e-14),
                    "lambda {lambda} c {c}: {x:?}"
                );
            }
        }
    }

    #[test]
    fn small_worked_system_matches_oracle() {
        let sys = CyclicTridiagonalSystem::diffusion(
            0.7,
            (0..17).map(|j| (j as f64 * 0.37).sin()).collect(),
        );
        let fast = solve_cyclic(&sys).unwrap();
        let dense = solve_dense_oracle(&sys).unwrap();
        assert!(max_diff(&fast, &dense) <= 1e-10);
        assert!(sys.residual_inf(&fast) <= 1e-12 * (1.0 + inf_norm(&sys.rhs)));
    }

    #[test]
    fn variable_diagonal_residual() {
        let diag: Vec<f64> = (0..9).map(|j| 3.0 + 0.1 * j as f64).collect();
        let rhs: Vec<f64> = (0..9).map(|j| j as f64 - 4.0).collect();
        let x = solve_cyclic_variable(&diag, -1.0, &rhs).unwrap();
        let ax = apply_cyclic(&diag, -1.0, &x);
        assert!(max_diff(&ax, &rhs) <= 1e-13);
    }

    #[test]
    fn error_paths() {
        let tiny = CyclicTridiagonalSystem {
            diag: 1.0,
            off: -0.1,
            rhs: vec![1.0, 2.0],
        };
        assert!(matches!(solve_cyclic(&tiny), Err(Error::InvalidSystem(_))));
        assert!(matches!(
            solve_dense_oracle(&tiny),
            Err(Error::InvalidSystem(_))
        ));
        let zero = CyclicTridiagonalSystem {
            diag: 0.0,
            off: 0.0,
            rhs: vec![1.0; 4],
        };
        assert!(matches!(
            solve_cyclic(&zero),
            Err(Error::SingularSystem { .. })
        ));
        assert!(matches!(
            solve_dense_oracle(&zero),
            Err(Error::SingularSystem { .. })
        ));
        assert!(solve_cyclic_variable(&[1.0; 4], 0.0, &[1.0; 5]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn agrees_with_dense_oracle(
            lambda in 1e-9f64..=100.0,
            rhs in prop::collection::vec(-10.0f64..10.0, 3..=129),
        ) {
            let sys = CyclicTridiagonalSystem::diffusion(lambda, rhs);
            let fast = solve_cyclic(&sys).unwrap();
            let dense = solve_dense_oracle(&sys).unwrap();
            let scale = inf_norm(&dense).max(f64::MIN_POSITIVE);
            prop_assert!(max_diff(&fast, &dense) / scale <= 1e-10);
            prop_assert!(sys.residual_inf(&fast) <= 1e-12 * (1.0 + inf_norm(&sys.rhs)));
        }

        #[test]
        fn rotation_equivariance(
            lambda in 1e-6f64..=100.0,
            rhs in prop::collection::vec(-1.0f64..1.0, 3..=64),
            shift in 0usize..64,
        ) {
            let n = rhs.len();
            let shift = shift % n;
            let x = solve_cyclic(&CyclicTridiagonalSystem::diffusion(lambda, rhs.clone())).unwrap();
            let mut rotated = rhs;
            rotated.rotate_right(shift);
            let y = solve_cyclic(&CyclicTridiagonalSystem::diffusion(lambda, rotated)).unwrap();
            let mut expected = x;
            expected.rotate_right(shift);
            prop_assert!(max_diff(&y, &expected) <= 1e-12);
        }
    }
}
