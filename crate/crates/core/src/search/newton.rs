//! One linearized step of the rank search.

use nalgebra::{DMatrix, DVector};

use super::RankTarget;
use crate::hilbert::{CMatrix, HermitianBasis, HermitianMatrix, Spectrum};

/// Full spectra of `ρ` and `ρ^P` at the current iterate.
#[derive(Clone, Debug)]
pub struct Eigensystems {
    pub rho: Spectrum,
    pub pt: Spectrum,
}

/// The eigenvalues that the search drives to zero: the `N − m` smallest
/// eigenvalues of `ρ` followed by the `N − n` smallest of `ρ^P`, each block
/// ascending.
pub fn mu_vector(rho: &HermitianMatrix, target: RankTarget) -> (Vec<f64>, Eigensystems) {
    let eig = Eigensystems {
        rho: rho.spectrum(),
        pt: rho.partial_transpose().spectrum(),
    };
    (mu_from(&eig, target), eig)
}

pub(crate) fn mu_from(eig: &Eigensystems, target: RankTarget) -> Vec<f64> {
    let n = eig.rho.len();
    let mut mu = Vec::with_capacity(2 * n - target.m - target.n);
    mu.extend_from_slice(&eig.rho.values[..n - target.m]);
    mu.extend_from_slice(&eig.pt.values[..n - target.n]);
    mu
}

/// Derivatives `B_kj = ∂μ_k/∂x_j` from first-order perturbation theory.
///
/// For rows belonging to `ρ` this is `ψ_k† M_j ψ_k = Tr(M_j ψ_kψ_k†)`, the
/// coordinate vector of `ψ_kψ_k†`. For rows belonging to `ρ^P` it is
/// `ψ_k^P† M_j^P ψ_k^P = Tr(M_j (ψ_k^P ψ_k^P†)^P)`.
pub fn jacobian(eig: &Eigensystems, target: RankTarget, basis: &HermitianBasis) -> DMatrix<f64> {
    let n = eig.rho.len();
    let rows = 2 * n - target.m - target.n;
    let mut b = DMatrix::zeros(rows, basis.len());
    let mut r = 0;
    for k in 0..(n - target.m) {
        b.set_row(r, &eigen_row(&eig.rho, k, false, basis).transpose());
        r += 1;
    }
    for k in 0..(n - target.n) {
        b.set_row(r, &eigen_row(&eig.pt, k, true, basis).transpose());
        r += 1;
    }
    b
}

/// Gradient of the `k`-th eigenvalue of `ρ` (or of `ρ^P` when `transposed`)
/// in basis coordinates.
pub fn eigen_row(
    spec: &Spectrum,
    k: usize,
    transposed: bool,
    basis: &HermitianBasis,
) -> DVector<f64> {
    let psi = spec.vectors.column(k);
    let proj: CMatrix = psi * psi.adjoint();
    if transposed {
        let pt = HermitianMatrix::from_raw(basis.dims(), proj).partial_transpose();
        basis.coords_of_raw(pt.as_matrix())
    } else {
        basis.coords_of_raw(&proj)
    }
}

/// Jacobian rows for the off-diagonal couplings `ψ_k† ρ ψ_l`, `k < l`,
/// within the blocks of eigenvectors whose eigenvalues are driven to zero
/// (real and imaginary parts, scaled to unit norm). At the current iterate
/// these couplings vanish, so the matching right-hand side entries are zero.
pub fn coupling_rows(
    eig: &Eigensystems,
    target: RankTarget,
    basis: &HermitianBasis,
) -> DMatrix<f64> {
    let n = eig.rho.len();
    let dims = basis.dims();
    let (kr, kp) = (n - target.m, n - target.n);
    let rows = kr * kr.saturating_sub(1) + kp * kp.saturating_sub(1);
    let mut b = DMatrix::zeros(rows, basis.len());
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let i_unit = crate::hilbert::C64::new(0.0, 1.0);
    let mut r = 0;
    for (spec, count, transposed) in [(&eig.rho, kr, false), (&eig.pt, kp, true)] {
        for k in 0..count {
            for l in (k + 1)..count {
                let vk = spec.vectors.column(k);
                let vl = spec.vectors.column(l);
                let lk: CMatrix = vl * vk.adjoint();
                let kl: CMatrix = vk * vl.adjoint();
                for op in [(&lk + &kl) * crate::hilbert::C64::new(s, 0.0), (&lk - &kl) * (i_unit * s)] {
                    let op = if transposed {
                        HermitianMatrix::from_raw(dims, op).partial_transpose().into_matrix()
                    } else {
                        op
                    };
                    b.set_row(r, &basis.coords_of_raw(&op).transpose());
                    r += 1;
                }
            }
        }
    }
    b
}

/// Result of the conjugate-gradient solve of `BᵀB Δx = −Bᵀμ`.
#[derive(Clone, Debug)]
pub struct NewtonStep {
    pub dx: DVector<f64>,
    pub cg_steps: usize,
    /// Final `‖A Δx − b‖ / ‖b‖`.
    pub relative_residual: f64,
}

/// Failure modes of a Newton step.
#[derive(Clone, Debug, PartialEq)]
pub enum StepError {
    /// `Bᵀμ = 0` although `μ ≠ 0`: a stationary point that is not a solution.
    Stationary,
}

/// Solves `A Δx = b` with `A = BᵀB` and `b = −Bᵀμ` by conjugate gradients
/// started from zero. `A` may be singular; since `b` lies in the range of
/// `A` the iterates stay in that range and approach the minimum-norm
/// solution.
pub fn newton_step(
    b_mat: &DMatrix<f64>,
    mu: &[f64],
    cg_tol: f64,
    cg_max_steps: usize,
) -> Result<NewtonStep, StepError> {
    let cols = b_mat.ncols();
    let mu = DVector::from_column_slice(mu);
    if mu.is_empty() || mu.amax() == 0.0 {
        return Ok(NewtonStep {
            dx: DVector::zeros(cols),
            cg_steps: 0,
            relative_residual: 0.0,
        });
    }
    let rhs = -(b_mat.tr_mul(&mu));
    let rhs_norm = rhs.norm();
    if rhs_norm == 0.0 {
        return Err(StepError::Stationary);
    }
    let apply = |v: &DVector<f64>| b_mat.tr_mul(&(b_mat * v));

    let mut x = DVector::zeros(cols);
    let mut r = rhs.clone();
    let mut p = r.clone();
    let mut rr = r.norm_squared();
    let mut steps = 0;
    while steps < cg_max_steps && rr.sqrt() > cg_tol * rhs_norm {
        let ap = apply(&p);
        let pap = p.dot(&ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rr / pap;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        let rr_new = r.norm_squared();
        p = &r + &p * (rr_new / rr);
        rr = rr_new;
        steps += 1;
    }
    let relative_residual = (apply(&x) - &rhs).norm() / rhs_norm;
    Ok(NewtonStep {
        dx: x,
        cg_steps: steps,
        relative_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{random_density, seeded_rng, BipartiteDims};

    #[test]
    fn mu_of_maximally_mixed() {
        let d = BipartiteDims::new(2, 2).unwrap();
        let rho = HermitianMatrix::maximally_mixed(d);
        let (mu, _) = mu_vector(&rho, RankTarget::new(d, 3, 4).unwrap());
        assert_eq!(mu.len(), 1);
        assert!((mu[0] - 0.25).abs() < 1e-15);
        let (mu, _) = mu_vector(&rho, RankTarget::new(d, 4, 4).unwrap());
        assert!(mu.is_empty());
    }

    #[test]
    fn jacobian_of_diagonal_state() {
        // Eigenvectors of a non-degenerate diagonal ρ are the computational
        // basis vectors, so rows on diagonal basis elements read off their
        // diagonal entries.
        let d = BipartiteDims::new(1, 3).unwrap();
        let mut m = CMatrix::zeros(3, 3);
        m[(0, 0)].re = 0.6;
        m[(1, 1)].re = 0.3;
        m[(2, 2)].re = 0.1;
        let rho = HermitianMatrix::from_raw(d, m);
        let basis = HermitianBasis::canonical(d);
        let target = RankTarget::new(d, 2, 3).unwrap();
        let (_, eig) = mu_vector(&rho, target);
        let b = jacobian(&eig, target, &basis);
        assert_eq!(b.nrows(), 1);
        // Smallest eigenvalue belongs to e_2.
        for j in 0..3 {
            let mj = basis.matrix(j);
            let expected = mj.as_matrix()[(2, 2)].re;
            assert!((b[(0, j)] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn jacobian_rows_bounded_by_one() {
        let d = BipartiteDims::new(2, 3).unwrap();
        let basis = HermitianBasis::canonical(d);
        let rho = random_density(d, 6, &mut seeded_rng(4));
        let target = RankTarget::new(d, 3, 2).unwrap();
        let (_, eig) = mu_vector(&rho, target);
        let b = jacobian(&eig, target, &basis);
        for r in 0..b.nrows() {
            assert!(b.row(r).norm() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn zero_mu_gives_zero_step() {
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let s = newton_step(&b, &[0.0, 0.0], 1e-12, 8).unwrap();
        assert_eq!(s.dx.amax(), 0.0);
    }

    #[test]
    fn square_system_matches_direct_solve() {
        let b = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, -1.0, 3.0]);
        let mu = [0.5, -0.25];
        let s = newton_step(&b, &mu, 1e-12, 8).unwrap();
        let direct = b.clone().lu().solve(&(-DVector::from_column_slice(&mu))).unwrap();
        assert!((s.dx - direct).amax() < 1e-11);
    }

    #[test]
    fn singular_normal_equations_converge() {
        // Duplicate rows: A = BᵀB is rank one in two unknowns.
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 1.0, 2.0]);
        let s = newton_step(&b, &[1.0, 3.0], 1e-12, 8).unwrap();
        assert!(s.relative_residual <= 1e-12);
        // Minimum-norm solution lies along (1, 2).
        assert!((s.dx[1] - 2.0 * s.dx[0]).abs() < 1e-12);
    }

    #[test]
    fn stationary_point_is_signalled() {
        let b = DMatrix::from_row_slice(1, 2, &[0.0, 0.0]);
        assert_eq!(newton_step(&b, &[1.0], 1e-12, 8).unwrap_err(), StepError::Stationary);
    }
}
