use nalgebra::DMatrix;

use super::{CMatrix, C64};

/// Ascending eigenvalues of a Hermitian matrix with orthonormal eigenvectors
/// stored as columns in the same order.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Spectrum {
    pub fn of(m: &CMatrix) -> Self {
        let eig = m.clone().symmetric_eigen();
        let n = eig.eigenvalues.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        Self { values, vectors }
    }

    /// Real symmetric variant; eigenvectors are returned as real columns.
    pub fn of_real(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
        let eig = m.clone().symmetric_eigen();
        let n = eig.eigenvalues.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        (values, vectors)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// Columns for the `k` largest eigenvalues (an orthonormal basis of the
    /// numerical image when `k` is the rank).
    pub fn top_vectors(&self, k: usize) -> CMatrix {
        let n = self.len();
        self.vectors.columns(n - k, k).into_owned()
    }

    /// Columns for the `k` smallest eigenvalues.
    pub fn bottom_vectors(&self, k: usize) -> CMatrix {
        self.vectors.columns(0, k).into_owned()
    }

    /// Reassembles `V diag(λ) V†`.
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.len();
        let scaled = CMatrix::from_fn(n, n, |r, c| self.vectors[(r, c)] * C64::new(self.values[c], 0.0));
        scaled * self.vectors.adjoint()
    }
}

/// Number of eigenvalues `λ > tau · λ_max`; zero when `λ_max ≤ 1e-12`.
pub fn numerical_rank(ascending: &[f64], tau: f64) -> usize {
    let max = ascending.last().copied().unwrap_or(0.0);
    if max <= 1e-12 {
        return 0;
    }
    ascending.iter().filter(|&&l| l > tau * max).count()
}
