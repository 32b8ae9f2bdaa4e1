//! Small dense linear-algebra helpers shared across modules: matrix
//! exponentials with caching, Kronecker-product Lyapunov operators and
//! norm utilities.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Matrix exponential `e^M` by scaling-and-squaring with a Padé approximant.
///
/// Backed by nalgebra's implementation of the Higham algorithm; relative
/// accuracy is well below 1e-12 for the well-conditioned, moderately sized
/// matrices used here.
pub fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.exp()
}

/// Cache of `e^{A t}` keyed by the bit pattern of the time gap `t`.
///
/// The simplex quadrature evaluates kernels on a lattice of time gaps, so
/// a handful of distinct exponentials serve very many kernel evaluations.
pub struct ExpCache {
    base: DMatrix<f64>,
    map: HashMap<u64, DMatrix<f64>>,
}

impl ExpCache {
    pub fn new(base: DMatrix<f64>) -> Self {
        Self {
            base,
            map: HashMap::new(),
        }
    }

    /// `e^{A g}` for the cached generator `A`.
    pub fn at(&mut self, gap: f64) -> &DMatrix<f64> {
        let key = gap.to_bits();
        if !self.map.contains_key(&key) {
            let e = expm(&(&self.base * gap));
            self.map.insert(key, e);
        }
        &self.map[&key]
    }
}

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> DVector<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let mut eigs = sym.symmetric_eigenvalues();
    eigs.as_mut_slice()
        .sort_by(|a, b| a.partial_cmp(b).expect("non-finite eigenvalue"));
    eigs
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

/// Logarithmic 2-norm `mu(A)`: the largest eigenvalue of `(A + A^T)/2`.
///
/// Gives the rigorous envelope `||e^{A t}||_2 <= e^{mu(A) t}`.
pub fn log_norm(m: &DMatrix<f64>) -> f64 {
    symmetric_eigenvalues(m).max()
}

/// Solve the dense linear system `L x = rhs`, reporting the 2-norm condition
/// number alongside the solution.
pub fn solve_with_condition(l: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let svals = l.clone().singular_values();
    let smax = svals.max();
    let smin = svals.min();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let lu = l.clone().lu();
    let x = lu
        .solve(rhs)
        .ok_or_else(|| Error::Numerical("singular linear operator".into()))?;
    Ok((x, cond))
}

/// Column-stack a matrix into a vector (column-major `vec` operator).
pub fn vec_of(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec_of`] for an `n x n` matrix.
pub fn unvec(v: &DVector<f64>, n: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(n, n, v.as_slice())
}
