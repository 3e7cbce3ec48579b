//! Dimension of the face of the PPT cone containing a state.
//!
//! The face of the PSD cone at `ρ` is `{σ ⪰ 0 : Im σ ⊆ Im ρ}`; its linear
//! span is the range of `H ↦ ΠHΠ` with `Π` the projector onto `Im ρ`. The
//! face of the partially transposed cone at `ρ` is spanned by the range of
//! `H ↦ (Π'H^PΠ')^P` with `Π'` the projector onto `Im ρ^P`. The face of
//! the PPT cone is their intersection, whose dimension equals the number of
//! unit eigenvalues of `P Q̄ P`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    projector_onto, BipartiteDims, CMatrix, HermitianBasis, HermitianMatrix, PptState, Spectrum,
    RANK_TOLERANCE,
};

/// Eigenvalues of `P Q̄ P` within this distance of 1 are counted.
pub const UNIT_EIGENVALUE_TOL: f64 = 1e-6;
/// Reports with a smaller spectral gap are flagged unreliable.
pub const MIN_RELIABLE_GAP: f64 = 1e-4;

/// Orthogonal projectors, in basis coordinates, onto the spans of the faces
/// of the PSD cone and of the partially transposed PSD cone at a state.
#[derive(Clone, Debug)]
pub struct FaceProjectors {
    pub p: DMatrix<f64>,
    pub q_bar: DMatrix<f64>,
    pub ranks: (usize, usize),
    pub dims: BipartiteDims,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaceReport {
    pub dim_f: usize,
    /// `m² + n² − N²`.
    pub lower_bound: i64,
    pub is_extremal: bool,
    /// Smallest counted eigenvalue minus largest uncounted one.
    pub eigen_gap: f64,
    pub unreliable: bool,
}

/// Projector onto the numerical image, refusing when an eigenvalue sits
/// within a factor 10 of the rank threshold.
pub(crate) fn image_projector(
    spec: &Spectrum,
    rank: usize,
    which: &'static str,
) -> Result<CMatrix> {
    let threshold = RANK_TOLERANCE * spec.max();
    if let Some(&value) = spec
        .values
        .iter()
        .find(|&&l| l > threshold / 10.0 && l < threshold * 10.0)
    {
        return Err(Error::RankAmbiguity {
            which,
            value,
            threshold,
        });
    }
    Ok(projector_onto(&spec.top_vectors(rank)))
}

pub fn face_projectors(state: &PptState, basis: &HermitianBasis) -> Result<FaceProjectors> {
    let dims = state.dims();
    if basis.dims() != dims {
        return Err(Error::DimensionMismatch {
            expected: dims.n(),
            got: basis.dims().n(),
        });
    }
    let pt = state.rho.partial_transpose();
    let pi = image_projector(&state.rho.spectrum(), state.ranks.0, "rho")?;
    let pi_pt = image_projector(&pt.spectrum(), state.ranks.1, "rho^P")?;

    let d = basis.len();
    let mut p = DMatrix::zeros(d, d);
    let mut q_bar = DMatrix::zeros(d, d);
    for j in 0..d {
        let mj = basis.matrix(j);
        let col = basis.coords_of_raw(&(&pi * mj.as_matrix() * &pi));
        p.set_column(j, &col);
        let mj_pt = mj.partial_transpose();
        let inner = HermitianMatrix::from_raw(dims, &pi_pt * mj_pt.as_matrix() * &pi_pt);
        let col = basis.coords_of_raw(inner.partial_transpose().as_matrix());
        q_bar.set_column(j, &col);
    }
    symmetrize(&mut p);
    symmetrize(&mut q_bar);
    Ok(FaceProjectors {
        p,
        q_bar,
        ranks: state.ranks,
        dims,
    })
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

/// Counts unit eigenvalues of `P Q̄ P`.
pub fn face_dimension(proj: &FaceProjectors) -> FaceReport {
    let composite = &proj.p * &proj.q_bar * &proj.p;
    report_from(&composite, proj)
}

/// Same count from `Q̄ P Q̄`.
pub fn face_dimension_alt(proj: &FaceProjectors) -> FaceReport {
    let composite = &proj.q_bar * &proj.p * &proj.q_bar;
    report_from(&composite, proj)
}

fn report_from(composite: &DMatrix<f64>, proj: &FaceProjectors) -> FaceReport {
    let mut c = composite.clone();
    symmetrize(&mut c);
    let (values, _) = Spectrum::of_real(&c);
    let counted: Vec<f64> = values
        .iter()
        .copied()
        .filter(|v| (v - 1.0).abs() <= UNIT_EIGENVALUE_TOL)
        .collect();
    let dim_f = counted.len();
    let min_counted = counted.iter().copied().fold(f64::INFINITY, f64::min);
    let max_rest = values
        .iter()
        .copied()
        .filter(|v| (v - 1.0).abs() > UNIT_EIGENVALUE_TOL)
        .fold(f64::NEG_INFINITY, f64::max);
    let eigen_gap = match (dim_f, max_rest.is_finite()) {
        (0, _) => 1.0 - max_rest,
        (_, true) => min_counted - max_rest,
        (_, false) => min_counted,
    };
    let (m, n) = proj.ranks;
    let lower_bound = (m * m + n * n) as i64 - proj.dims.real_dim() as i64;
    FaceReport {
        dim_f,
        lower_bound,
        is_extremal: dim_f == 1,
        eigen_gap,
        unreliable: eigen_gap < MIN_RELIABLE_GAP,
    }
}

/// Convenience wrapper: projectors in the canonical basis, then the count.
pub fn analyze(state: &PptState) -> Result<FaceReport> {
    let basis = HermitianBasis::canonical(state.dims());
    Ok(face_dimension(&face_projectors(state, &basis)?))
}

/// Necessary condition for an extremal state of ranks `(m, n)`:
/// `m² + n² ≤ N² + 1`.
pub fn extremity_rank_bound(dims: BipartiteDims, m: usize, n: usize) -> bool {
    m * m + n * n <= dims.real_dim() + 1
}

/// Rank of a real symmetric projector, counted from its spectrum.
pub fn projector_rank(p: &DMatrix<f64>) -> usize {
    let (values, _) = Spectrum::of_real(p);
    values.iter().filter(|&&v| v > 0.5).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{kron, random_unit_vector, seeded_rng};

    fn product_state(dims: BipartiteDims, seed: u64) -> PptState {
        let mut rng = seeded_rng(seed);
        let psi = kron(
            &random_unit_vector(&mut rng, dims.n_a()),
            &random_unit_vector(&mut rng, dims.n_b()),
        );
        PptState::certify(&HermitianMatrix::projector(dims, &psi)).unwrap()
    }

    #[test]
    fn full_rank_gives_identity_projector() {
        let d = BipartiteDims::new(2, 2).unwrap();
        let st = PptState::certify(&HermitianMatrix::maximally_mixed(d)).unwrap();
        let basis = HermitianBasis::canonical(d);
        let proj = face_projectors(&st, &basis).unwrap();
        let id = DMatrix::<f64>::identity(16, 16);
        assert!((&proj.p - &id).amax() < 1e-13);
        assert!((&proj.q_bar - &id).amax() < 1e-13);
        let rep = face_dimension(&proj);
        assert_eq!(rep.dim_f, 16);
        assert_eq!(rep.lower_bound, 16);
    }

    #[test]
    fn pure_product_state_has_rank_one_projectors() {
        let d = BipartiteDims::new(2, 2).unwrap();
        let st = product_state(d, 4);
        let basis = HermitianBasis::canonical(d);
        let proj = face_projectors(&st, &basis).unwrap();
        assert_eq!(projector_rank(&proj.p), 1);
        assert_eq!(projector_rank(&proj.q_bar), 1);
        assert!((&proj.p * &proj.p - &proj.p).amax() < 1e-10);
        let x = basis.to_coords(&st.rho).unwrap();
        assert!((&proj.p * &x - &x).amax() < 1e-12);
        assert!((&proj.q_bar * &x - &x).amax() < 1e-12);
        let rep = face_dimension(&proj);
        assert_eq!(rep.dim_f, 1);
        assert!(rep.is_extremal);
        assert!(!rep.unreliable);
    }

    #[test]
    fn rank_bound_arithmetic() {
        let d = BipartiteDims::new(3, 3).unwrap();
        assert!(extremity_rank_bound(d, 6, 6));
        assert!(!extremity_rank_bound(d, 7, 6));
        for (a, b) in [(1, 2), (2, 2), (3, 4)] {
            let d = BipartiteDims::new(a, b).unwrap();
            assert!(!extremity_rank_bound(d, d.n(), d.n()));
        }
        let one = BipartiteDims::new(1, 1).unwrap();
        assert!(extremity_rank_bound(one, 1, 1));
    }

    #[test]
    fn ambiguous_rank_is_refused() {
        let d = BipartiteDims::new(1, 3).unwrap();
        let mut m = CMatrix::zeros(3, 3);
        m[(0, 0)].re = 0.5;
        m[(1, 1)].re = 0.5;
        m[(2, 2)].re = 5e-9;
        let st = PptState::certify(&HermitianMatrix::from_raw(d, m)).unwrap();
        let basis = HermitianBasis::canonical(d);
        assert!(matches!(
            face_projectors(&st, &basis),
            Err(Error::RankAmbiguity { .. })
        ));
    }
}
