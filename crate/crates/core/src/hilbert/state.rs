use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BipartiteDims, CMatrix, HermitianMatrix, C64, RANK_TOLERANCE};
use crate::error::{Error, Result};

/// Smallest eigenvalue of `ρ` and `ρ^P` tolerated by the PPT certificate.
pub const PSD_TOLERANCE: f64 = 1e-9;

/// A normalized density matrix certified PPT, with its ranks and provenance.
#[derive(Clone, Debug)]
pub struct PptState {
    pub rho: HermitianMatrix,
    /// Numerical ranks `(m, n)` of `ρ` and `ρ^P`.
    pub ranks: (usize, usize),
    /// Ranks `(r_A, r_B)` of the reduced density matrices.
    pub local_ranks: (usize, usize),
    pub seed: Option<u64>,
    pub target: Option<(usize, usize)>,
    pub iterations_used: usize,
    pub residual: f64,
}

impl PptState {
    /// Normalizes `rho`, verifies that `ρ` and `ρ^P` are PSD within
    /// [`PSD_TOLERANCE`] using fresh eigensolves, and records the ranks.
    pub fn certify(rho: &HermitianMatrix) -> Result<Self> {
        let t = rho.trace();
        if t.is_nan() || t <= 0.0 {
            return Err(Error::InvalidInput(format!("trace {t} is not positive")));
        }
        let rho = rho.normalized();
        let spec = rho.spectrum();
        let spec_pt = rho.partial_transpose().spectrum();
        let (min_rho, min_pt) = (spec.values[0], spec_pt.values[0]);
        if min_rho < -PSD_TOLERANCE || min_pt < -PSD_TOLERANCE {
            return Err(Error::NotPpt { min_rho, min_pt });
        }
        let ranks = (
            super::numerical_rank(&spec.values, RANK_TOLERANCE),
            super::numerical_rank(&spec_pt.values, RANK_TOLERANCE),
        );
        let (ra, rb) = rho.reduced_states();
        let local_ranks = (
            ra.numerical_rank(RANK_TOLERANCE),
            rb.numerical_rank(RANK_TOLERANCE),
        );
        Ok(Self {
            rho,
            ranks,
            local_ranks,
            seed: None,
            target: None,
            iterations_used: 0,
            residual: 0.0,
        })
    }

    pub fn dims(&self) -> BipartiteDims {
        self.rho.dims()
    }

    pub fn has_full_local_ranks(&self) -> bool {
        let d = self.dims();
        self.local_ranks == (d.n_a(), d.n_b())
    }

    pub fn to_file(&self) -> StateFile {
        StateFile::from_matrix(
            &self.rho,
            StateMeta {
                seed: self.seed,
                target_ranks: self.target.map(|(m, n)| [m, n]),
                achieved_ranks: Some([self.ranks.0, self.ranks.1]),
                residual: Some(self.residual),
                iterations: Some(self.iterations_used),
                recipe: None,
            },
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_file().save(path)
    }

    /// Loads a state file and certifies it; provenance is copied from `meta`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        StateFile::load(path)?.to_state()
    }
}

/// Provenance stored next to a matrix in a state file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StateMeta {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub target_ranks: Option<[usize; 2]>,
    #[serde(default)]
    pub achieved_ranks: Option<[usize; 2]>,
    #[serde(default)]
    pub residual: Option<f64>,
    #[serde(default)]
    pub iterations: Option<usize>,
    /// Replay recipe for constructed states.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recipe: Option<serde_json::Value>,
}

/// On-disk JSON layout: `{"dims": [a, b], "matrix": [[[re, im], ...], ...], "meta": {...}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    pub dims: BipartiteDims,
    pub matrix: Vec<Vec<[f64; 2]>>,
    #[serde(default)]
    pub meta: StateMeta,
}

impl StateFile {
    pub fn from_matrix(h: &HermitianMatrix, meta: StateMeta) -> Self {
        let m = h.as_matrix();
        let n = m.nrows();
        let matrix = (0..n)
            .map(|i| (0..n).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
            .collect();
        Self {
            dims: h.dims(),
            matrix,
            meta,
        }
    }

    /// Parses the matrix, checking shape and Hermiticity.
    pub fn to_matrix(&self) -> Result<HermitianMatrix> {
        let n = self.dims.n();
        if self.matrix.len() != n || self.matrix.iter().any(|row| row.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.matrix.len(),
            });
        }
        let data = CMatrix::from_fn(n, n, |i, j| {
            let [re, im] = self.matrix[i][j];
            C64::new(re, im)
        });
        HermitianMatrix::new(self.dims, data)
    }

    pub fn to_state(&self) -> Result<PptState> {
        let mut st = PptState::certify(&self.to_matrix()?)?;
        st.seed = self.meta.seed;
        st.target = self.meta.target_ranks.map(|[m, n]| (m, n));
        st.residual = self.meta.residual.unwrap_or(0.0);
        st.iterations_used = self.meta.iterations.unwrap_or(0);
        Ok(st)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let s = serde_json::to_string_pretty(self)?;
        std::fs::write(path, s)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let s = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&s)?)
    }
}
