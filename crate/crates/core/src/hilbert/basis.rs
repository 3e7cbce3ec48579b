use nalgebra::{DMatrix, DVector};

use super::{BipartiteDims, CMatrix, HermitianMatrix, C64};
use crate::error::{Error, Result};

/// One element of the canonical trace-orthonormal Hermitian basis.
///
/// The canonical order is:
/// 1. `Identity`: `𝟙/√N`;
/// 2. `Diagonal(l)` for `l = 1..N`: `(Σ_{j<l} E_jj − l·E_ll)/√(l(l+1))`;
/// 3. `Symmetric(j, k)` for `j < k`, lexicographic: `(E_jk + E_kj)/√2`;
/// 4. `Antisymmetric(j, k)` for `j < k`, lexicographic: `i(E_jk − E_kj)/√2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BasisElement {
    Identity,
    Diagonal(usize),
    Symmetric(usize, usize),
    Antisymmetric(usize, usize),
}

/// An orthonormal basis `{M_i}` of the `N²`-dimensional real space of
/// Hermitian matrices, `Tr(M_i M_j) = δ_ij`.
///
/// The canonical basis is applied implicitly through the sparse structure of
/// its elements. A rotated basis `M'_i = Σ_j R_ij M_j` with `R` orthogonal
/// is supported for covariance checks.
#[derive(Clone, Debug)]
pub struct HermitianBasis {
    dims: BipartiteDims,
    elements: Vec<BasisElement>,
    rotation: Option<DMatrix<f64>>,
}

impl HermitianBasis {
    pub fn canonical(dims: BipartiteDims) -> Self {
        let n = dims.n();
        let mut elements = Vec::with_capacity(n * n);
        elements.push(BasisElement::Identity);
        elements.extend((1..n).map(BasisElement::Diagonal));
        for j in 0..n {
            for k in (j + 1)..n {
                elements.push(BasisElement::Symmetric(j, k));
            }
        }
        for j in 0..n {
            for k in (j + 1)..n {
                elements.push(BasisElement::Antisymmetric(j, k));
            }
        }
        Self {
            dims,
            elements,
            rotation: None,
        }
    }

    /// The basis `M'_i = Σ_j R_ij M_j`; `R` must be orthogonal.
    pub fn rotated(dims: BipartiteDims, rotation: DMatrix<f64>) -> Result<Self> {
        let d = dims.real_dim();
        if rotation.nrows() != d || rotation.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: rotation.nrows(),
            });
        }
        let defect = (&rotation * rotation.transpose() - DMatrix::<f64>::identity(d, d)).amax();
        if defect > 1e-10 {
            return Err(Error::InvalidInput(format!(
                "rotation is not orthogonal (defect {defect:e})"
            )));
        }
        let mut b = Self::canonical(dims);
        b.rotation = Some(rotation);
        Ok(b)
    }

    #[inline]
    pub fn dims(&self) -> BipartiteDims {
        self.dims
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[BasisElement] {
        &self.elements
    }

    /// Dense form of `M_i`.
    pub fn matrix(&self, i: usize) -> HermitianMatrix {
        let mut e = DVector::<f64>::zeros(self.len());
        e[i] = 1.0;
        self.from_coords(&e).expect("unit vector has basis length")
    }

    /// `x_i = Tr(H M_i)`.
    pub fn to_coords(&self, h: &HermitianMatrix) -> Result<DVector<f64>> {
        self.check(h.dims().n())?;
        let x = canonical_coords(&self.elements, h.as_matrix());
        Ok(match &self.rotation {
            Some(r) => r * x,
            None => x,
        })
    }

    /// `Σ_i x_i M_i`.
    pub fn from_coords(&self, x: &DVector<f64>) -> Result<HermitianMatrix> {
        if x.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: x.len(),
            });
        }
        let rotated;
        let x = match &self.rotation {
            Some(r) => {
                rotated = r.tr_mul(x);
                &rotated
            }
            None => x,
        };
        Ok(HermitianMatrix::from_raw(
            self.dims,
            canonical_matrix(&self.elements, self.dims.n(), x),
        ))
    }

    /// Coordinates of the rank-one operator `ψψ†`, i.e. `x_i = ψ† M_i ψ`.
    pub(crate) fn coords_of_raw(&self, m: &CMatrix) -> DVector<f64> {
        let x = canonical_coords(&self.elements, m);
        match &self.rotation {
            Some(r) => r * x,
            None => x,
        }
    }

    fn check(&self, n: usize) -> Result<()> {
        if n != self.dims.n() {
            return Err(Error::DimensionMismatch {
                expected: self.dims.n(),
                got: n,
            });
        }
        Ok(())
    }
}

fn canonical_coords(elements: &[BasisElement], h: &CMatrix) -> DVector<f64> {
    let n = h.nrows();
    let sqrt2 = std::f64::consts::SQRT_2;
    let mut prefix = 0.0;
    let mut diag_prefix = Vec::with_capacity(n);
    for j in 0..n {
        diag_prefix.push(prefix);
        prefix += h[(j, j)].re;
    }
    DVector::from_iterator(
        elements.len(),
        elements.iter().map(|e| match *e {
            BasisElement::Identity => prefix / (n as f64).sqrt(),
            BasisElement::Diagonal(l) => {
                let lf = l as f64;
                (diag_prefix[l] - lf * h[(l, l)].re) / (lf * (lf + 1.0)).sqrt()
            }
            BasisElement::Symmetric(j, k) => sqrt2 * 0.5 * (h[(j, k)].re + h[(k, j)].re),
            BasisElement::Antisymmetric(j, k) => sqrt2 * 0.5 * (h[(j, k)].im - h[(k, j)].im),
        }),
    )
}

fn canonical_matrix(elements: &[BasisElement], n: usize, x: &DVector<f64>) -> CMatrix {
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut m = CMatrix::zeros(n, n);
    // Diagonal family: accumulate a suffix sum so the work stays O(N).
    let mut diag = vec![0.0; n];
    let mut suffix = 0.0;
    let mut diag_coeff = vec![0.0; n];
    for (e, &xi) in elements.iter().zip(x.iter()) {
        match *e {
            BasisElement::Identity => {
                let v = xi / (n as f64).sqrt();
                diag.iter_mut().for_each(|d| *d += v);
            }
            BasisElement::Diagonal(l) => {
                let lf = l as f64;
                let c = xi / (lf * (lf + 1.0)).sqrt();
                diag_coeff[l] = c;
                diag[l] -= lf * c;
            }
            BasisElement::Symmetric(j, k) => {
                m[(j, k)].re += xi * inv_sqrt2;
                m[(k, j)].re += xi * inv_sqrt2;
            }
            BasisElement::Antisymmetric(j, k) => {
                m[(j, k)].im += xi * inv_sqrt2;
                m[(k, j)].im -= xi * inv_sqrt2;
            }
        }
    }
    // D_l contributes c_l to every E_jj with j < l.
    for j in (0..n).rev() {
        diag[j] += suffix;
        suffix += diag_coeff[j];
    }
    for j in 0..n {
        m[(j, j)] = C64::new(diag[j], 0.0);
    }
    m
}
