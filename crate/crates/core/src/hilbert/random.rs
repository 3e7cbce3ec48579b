use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{kron, BipartiteDims, CMatrix, CVector, HermitianMatrix, C64};

/// The generator used by every seeded job.
pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed of job `i` in a batch seeded with `seed`: a SplitMix64 scramble.
pub fn derive_seed(seed: u64, i: usize) -> u64 {
    let mut z = seed.wrapping_add((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Haar-random unit vector in `C^n`.
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVector {
    let v = CVector::from_fn(n, |_, _| complex_gaussian(rng));
    let norm = v.norm();
    v / C64::new(norm, 0.0)
}

/// Random `φ ⊗ χ` with independent Haar-random factors.
pub fn random_product_vector<R: Rng + ?Sized>(
    rng: &mut R,
    dims: BipartiteDims,
) -> (CVector, CVector) {
    let phi = random_unit_vector(rng, dims.n_a());
    let chi = random_unit_vector(rng, dims.n_b());
    debug_assert_eq!(kron(&phi, &chi).len(), dims.n());
    (phi, chi)
}

/// `GG†/Tr(GG†)` with `G` an `N × rank_hint` complex Gaussian matrix.
pub fn random_density<R: Rng + ?Sized>(
    dims: BipartiteDims,
    rank_hint: usize,
    rng: &mut R,
) -> HermitianMatrix {
    let n = dims.n();
    let r = rank_hint.clamp(1, n);
    let g = CMatrix::from_fn(n, r, |_, _| complex_gaussian(rng));
    let m = &g * g.adjoint();
    HermitianMatrix::from_raw(dims, m).normalized()
}
