//! Linear algebra on a bipartite Hilbert space `H_A ⊗ H_B`.
//!
//! Vectors are indexed row-major over subsystem indices: the pair `(a, b)`
//! maps to `a * n_b + b`. Partial transposition always acts on subsystem B.

mod basis;
mod random;
mod spectrum;
mod state;

pub use basis::{BasisElement, HermitianBasis};
pub use random::{derive_seed, random_density, random_product_vector, random_unit_vector, seeded_rng, SeededRng};
pub use spectrum::{numerical_rank, Spectrum};
pub use state::{PptState, StateFile, StateMeta, PSD_TOLERANCE};

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = nalgebra::Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Largest total dimension accepted anywhere in the toolkit.
pub const MAX_TOTAL_DIM: usize = 36;

/// Relative eigenvalue threshold used to decide numerical ranks.
pub const RANK_TOLERANCE: f64 = 1e-8;

/// Subsystem dimensions `(n_a, n_b)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "[usize; 2]", into = "[usize; 2]")]
pub struct BipartiteDims {
    n_a: usize,
    n_b: usize,
}

impl BipartiteDims {
    pub fn new(n_a: usize, n_b: usize) -> Result<Self> {
        if n_a == 0 || n_b == 0 {
            return Err(Error::InvalidDims {
                n_a,
                n_b,
                reason: "subsystem dimensions must be positive",
            });
        }
        if n_a * n_b > MAX_TOTAL_DIM {
            return Err(Error::InvalidDims {
                n_a,
                n_b,
                reason: "total dimension exceeds 36",
            });
        }
        Ok(Self { n_a, n_b })
    }

    #[inline]
    pub fn n_a(&self) -> usize {
        self.n_a
    }

    #[inline]
    pub fn n_b(&self) -> usize {
        self.n_b
    }

    /// Total dimension `N = n_a * n_b`.
    #[inline]
    pub fn n(&self) -> usize {
        self.n_a * self.n_b
    }

    /// Dimension `N²` of the real vector space of Hermitian matrices.
    #[inline]
    pub fn real_dim(&self) -> usize {
        self.n() * self.n()
    }

    #[inline]
    pub fn index(&self, a: usize, b: usize) -> usize {
        a * self.n_b + b
    }
}

impl fmt::Display for BipartiteDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.n_a, self.n_b)
    }
}

impl FromStr for BipartiteDims {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("cannot parse dimensions '{s}', expected AxB"));
        let (a, b) = s.trim().split_once(['x', 'X']).ok_or_else(bad)?;
        let n_a = a.trim().parse().map_err(|_| bad())?;
        let n_b = b.trim().parse().map_err(|_| bad())?;
        Self::new(n_a, n_b)
    }
}

impl TryFrom<[usize; 2]> for BipartiteDims {
    type Error = Error;

    fn try_from(v: [usize; 2]) -> Result<Self> {
        Self::new(v[0], v[1])
    }
}

impl From<BipartiteDims> for [usize; 2] {
    fn from(d: BipartiteDims) -> Self {
        [d.n_a, d.n_b]
    }
}

/// A Hermitian operator on a bipartite space.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix {
    dims: BipartiteDims,
    data: CMatrix,
}

impl HermitianMatrix {
    /// Wraps `data`, checking shape and Hermiticity. The stored matrix is
    /// symmetrized so that it is exactly Hermitian.
    pub fn new(dims: BipartiteDims, data: CMatrix) -> Result<Self> {
        let n = dims.n();
        if data.nrows() != n || data.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: data.nrows().max(data.ncols()),
            });
        }
        let scale = data.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let dev = hermiticity_defect(&data);
        if dev > 1e-13 * scale.max(f64::MIN_POSITIVE) && dev > 0.0 {
            return Err(Error::NotHermitian(dev));
        }
        Ok(Self::from_raw(dims, data))
    }

    /// Wraps `data` after replacing it with its Hermitian part.
    pub fn from_raw(dims: BipartiteDims, mut data: CMatrix) -> Self {
        debug_assert_eq!(data.nrows(), dims.n());
        hermitize(&mut data);
        Self { dims, data }
    }

    pub fn zeros(dims: BipartiteDims) -> Self {
        Self {
            dims,
            data: CMatrix::zeros(dims.n(), dims.n()),
        }
    }

    pub fn identity(dims: BipartiteDims) -> Self {
        Self {
            dims,
            data: CMatrix::identity(dims.n(), dims.n()),
        }
    }

    /// The maximally mixed state `𝟙/N`.
    pub fn maximally_mixed(dims: BipartiteDims) -> Self {
        let mut m = Self::identity(dims);
        m.scale_mut(1.0 / dims.n() as f64);
        m
    }

    /// The projector `ψψ†` (not normalized).
    pub fn projector(dims: BipartiteDims, psi: &CVector) -> Self {
        Self::from_raw(dims, psi * psi.adjoint())
    }

    #[inline]
    pub fn dims(&self) -> BipartiteDims {
        self.dims
    }

    #[inline]
    pub fn as_matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> CMatrix {
        self.data
    }

    pub fn trace(&self) -> f64 {
        self.data.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn scale_mut(&mut self, s: f64) {
        self.data.iter_mut().for_each(|z| *z *= s);
    }

    /// Returns a copy with unit trace.
    pub fn normalized(&self) -> Self {
        let mut m = self.clone();
        let t = m.trace();
        m.scale_mut(1.0 / t);
        m
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `Tr(self · other)`, real for Hermitian arguments.
    pub fn inner(&self, other: &Self) -> f64 {
        let n = self.dims.n();
        let mut acc = 0.0;
        for j in 0..n {
            for i in 0..n {
                acc += (self.data[(i, j)] * other.data[(j, i)]).re;
            }
        }
        acc
    }

    /// Partial transpose on subsystem B: `H'[(a,b),(a',b')] = H[(a,b'),(a',b)]`.
    pub fn partial_transpose(&self) -> Self {
        Self {
            dims: self.dims,
            data: partial_transpose_raw(self.dims, &self.data),
        }
    }

    /// Reduced operators `(Tr_B H, Tr_A H)`, carried with dims `(n_a, 1)` and
    /// `(1, n_b)` respectively.
    pub fn reduced_states(&self) -> (Self, Self) {
        let (na, nb) = (self.dims.n_a, self.dims.n_b);
        let d = self.dims;
        let mut ra = CMatrix::zeros(na, na);
        let mut rb = CMatrix::zeros(nb, nb);
        for a in 0..na {
            for a2 in 0..na {
                let mut s = C64::new(0.0, 0.0);
                for b in 0..nb {
                    s += self.data[(d.index(a, b), d.index(a2, b))];
                }
                ra[(a, a2)] = s;
            }
        }
        for b in 0..nb {
            for b2 in 0..nb {
                let mut s = C64::new(0.0, 0.0);
                for a in 0..na {
                    s += self.data[(d.index(a, b), d.index(a, b2))];
                }
                rb[(b, b2)] = s;
            }
        }
        (
            Self::from_raw(BipartiteDims { n_a: na, n_b: 1 }, ra),
            Self::from_raw(BipartiteDims { n_a: 1, n_b: nb }, rb),
        )
    }

    pub fn spectrum(&self) -> Spectrum {
        Spectrum::of(&self.data)
    }

    pub fn numerical_rank(&self, tau: f64) -> usize {
        numerical_rank(&self.spectrum().values, tau)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.spectrum().values[0]
    }
}

impl std::ops::Add<&HermitianMatrix> for &HermitianMatrix {
    type Output = HermitianMatrix;

    fn add(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix {
            dims: self.dims,
            data: &self.data + &rhs.data,
        }
    }
}

impl std::ops::Sub<&HermitianMatrix> for &HermitianMatrix {
    type Output = HermitianMatrix;

    fn sub(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix {
            dims: self.dims,
            data: &self.data - &rhs.data,
        }
    }
}

impl std::ops::Mul<f64> for &HermitianMatrix {
    type Output = HermitianMatrix;

    fn mul(self, s: f64) -> HermitianMatrix {
        let mut m = self.clone();
        m.scale_mut(s);
        m
    }
}

pub(crate) fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

pub(crate) fn hermitize(m: &mut CMatrix) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)].im = 0.0;
        for j in (i + 1)..n {
            let z = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
}

pub(crate) fn partial_transpose_raw(dims: BipartiteDims, m: &CMatrix) -> CMatrix {
    let (na, nb) = (dims.n_a, dims.n_b);
    let mut out = CMatrix::zeros(dims.n(), dims.n());
    for a in 0..na {
        for b in 0..nb {
            for a2 in 0..na {
                for b2 in 0..nb {
                    out[(dims.index(a, b), dims.index(a2, b2))] =
                        m[(dims.index(a, b2), dims.index(a2, b))];
                }
            }
        }
    }
    out
}

/// `φ ⊗ χ` in the row-major convention.
pub fn kron(phi: &CVector, chi: &CVector) -> CVector {
    let nb = chi.len();
    CVector::from_fn(phi.len() * nb, |k, _| phi[k / nb] * chi[k % nb])
}

/// Orthogonal projector onto the span of the given orthonormal columns.
pub fn projector_onto(cols: &CMatrix) -> CMatrix {
    cols * cols.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bell() -> HermitianMatrix {
        let d = BipartiteDims::new(2, 2).unwrap();
        let s = 0.5f64.sqrt();
        let psi = CVector::from_vec(vec![
            C64::new(s, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(s, 0.0),
        ]);
        HermitianMatrix::projector(d, &psi)
    }

    #[test]
    fn dims_parse_and_validate() {
        let d: BipartiteDims = "3x4".parse().unwrap();
        assert_eq!((d.n_a(), d.n_b(), d.n()), (3, 4, 12));
        assert!("0x3".parse::<BipartiteDims>().is_err());
        assert!("7x7".parse::<BipartiteDims>().is_err());
        assert!("3by3".parse::<BipartiteDims>().is_err());
        assert_eq!(d.to_string(), "3x4");
    }

    #[test]
    fn bell_state_partial_transpose_spectrum() {
        let pt = bell().partial_transpose();
        let vals = pt.spectrum().values;
        let expected = [-0.5, 0.5, 0.5, 0.5];
        for (v, e) in vals.iter().zip(expected) {
            assert!((v - e).abs() < 1e-14, "{vals:?}");
        }
    }

    #[test]
    fn bell_state_reduced_states_are_maximally_mixed() {
        let (ra, rb) = bell().reduced_states();
        for r in [ra, rb] {
            let m = r.as_matrix();
            assert!((m[(0, 0)].re - 0.5).abs() < 1e-15);
            assert!((m[(1, 1)].re - 0.5).abs() < 1e-15);
            assert!(m[(0, 1)].norm() < 1e-15);
        }
    }

    #[test]
    fn maximally_mixed_reduced_states() {
        let d = BipartiteDims::new(2, 3).unwrap();
        let (ra, rb) = HermitianMatrix::maximally_mixed(d).reduced_states();
        assert!((ra.as_matrix()[(1, 1)].re - 0.5).abs() < 1e-15);
        assert!((rb.as_matrix()[(2, 2)].re - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(ra.numerical_rank(RANK_TOLERANCE), 2);
        assert_eq!(rb.numerical_rank(RANK_TOLERANCE), 3);
    }

    #[test]
    fn product_state_partial_transpose_conjugates_chi() {
        let d = BipartiteDims::new(2, 3).unwrap();
        let mut rng = seeded_rng(3);
        let phi = random_unit_vector(&mut rng, 2);
        let chi = random_unit_vector(&mut rng, 3);
        let rho = HermitianMatrix::projector(d, &kron(&phi, &chi));
        let expected = HermitianMatrix::projector(d, &kron(&phi, &chi.conjugate()));
        assert!(rho.partial_transpose().max_abs_diff(&expected) < 1e-15);
        assert_eq!(rho.partial_transpose().numerical_rank(RANK_TOLERANCE), 1);
        assert!(rho.partial_transpose().min_eigenvalue() > -1e-15);
    }

    #[test]
    fn rejects_non_hermitian() {
        let d = BipartiteDims::new(1, 2).unwrap();
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
        );
        assert!(matches!(HermitianMatrix::new(d, m), Err(Error::NotHermitian(_))));
        let wrong = CMatrix::zeros(3, 3);
        assert!(matches!(
            HermitianMatrix::new(d, wrong),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
