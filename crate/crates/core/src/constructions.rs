//! Deterministic constructions: separable mixtures of random product states
//! and entangled PPT states of minimal rank with full local ranks, built
//! by mixing a lower-dimensional state with one product vector from
//! complementary local subspaces.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::face::image_projector;
use crate::hilbert::{
    derive_seed, random_unit_vector, seeded_rng, BipartiteDims, CMatrix, CVector,
    HermitianMatrix, PptState, Spectrum, C64, RANK_TOLERANCE,
};
use crate::product::ProductVector;
use crate::search::{search, RankTarget, SearchConfig};

/// Smallest norm of the component of `u` (or `v`) outside the local support
/// of the base state.
pub const COMPLEMENT_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RecipeKind {
    SeparableMixture {
        k: usize,
        #[serde(default)]
        real_chi: bool,
    },
    HlvcSaturating {
        levels: usize,
        #[serde(default)]
        orthogonal: bool,
    },
}

/// Everything needed to replay a construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstructionRecipe {
    #[serde(flatten)]
    pub kind: RecipeKind,
    pub dims: BipartiteDims,
    pub seed: u64,
    /// Mixing weight per level; empty for separable mixtures.
    #[serde(default)]
    pub mixing: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Constructed {
    pub state: PptState,
    /// Known decomposition `ρ = Σ p_k ψ_kψ_k†`, when there is one.
    pub decomposition: Option<Vec<(f64, ProductVector)>>,
    /// Product vectors added at each level.
    pub added: Vec<ProductVector>,
    pub recipe: ConstructionRecipe,
}

impl Constructed {
    /// The state with the recipe attached, in the state-file format.
    pub fn to_file(&self) -> crate::hilbert::StateFile {
        let mut f = self.state.to_file();
        f.meta.seed = Some(self.recipe.seed);
        f.meta.recipe = serde_json::to_value(&self.recipe).ok();
        f
    }
}

/// `ρ = Σ_{i≤k} p_i ψ_iψ_i†` with random product vectors and random
/// positive weights. With `real_chi` the `χ_i` are real, so each `ψ_i` is
/// its own conjugate partner.
pub fn separable_mixture(
    dims: BipartiteDims,
    k: usize,
    seed: u64,
    real_chi: bool,
) -> Result<Constructed> {
    if k == 0 || k > dims.n() {
        return Err(Error::Construction(format!(
            "mixture size {k} outside 1..={}",
            dims.n()
        )));
    }
    let mut rng = seeded_rng(seed);
    let mut parts = Vec::with_capacity(k);
    for _ in 0..k {
        let phi = random_unit_vector(&mut rng, dims.n_a());
        let mut chi = random_unit_vector(&mut rng, dims.n_b());
        if real_chi {
            chi = chi.map(|z| C64::new(z.re, 0.0));
        }
        let w: f64 = rng.random_range(0.2..1.0);
        parts.push((w, ProductVector::new(phi, chi)));
    }
    let total: f64 = parts.iter().map(|(w, _)| w).sum();
    let mut sum = HermitianMatrix::zeros(dims);
    for (w, pv) in parts.iter_mut() {
        *w /= total;
        sum = &sum + &(&HermitianMatrix::projector(dims, &pv.psi()) * *w);
    }
    let state = PptState::certify(&sum)?;
    Ok(Constructed {
        state,
        decomposition: Some(parts),
        added: Vec::new(),
        recipe: ConstructionRecipe {
            kind: RecipeKind::SeparableMixture { k, real_chi },
            dims,
            seed,
            mixing: Vec::new(),
        },
    })
}

/// Places `ρ` on the first `N_A × N_B` basis vectors of a larger space.
pub fn embed(rho: &HermitianMatrix, into: BipartiteDims) -> Result<HermitianMatrix> {
    let from = rho.dims();
    if into.n_a() < from.n_a() || into.n_b() < from.n_b() {
        return Err(Error::InvalidDims {
            n_a: into.n_a(),
            n_b: into.n_b(),
            reason: "embedding target is smaller than the source",
        });
    }
    let m = rho.as_matrix();
    let mut out = CMatrix::zeros(into.n(), into.n());
    for a in 0..from.n_a() {
        for b in 0..from.n_b() {
            for a2 in 0..from.n_a() {
                for b2 in 0..from.n_b() {
                    out[(into.index(a, b), into.index(a2, b2))] =
                        m[(from.index(a, b), from.index(a2, b2))];
                }
            }
        }
    }
    Ok(HermitianMatrix::from_raw(into, out))
}

fn outside_component(support: &HermitianMatrix, u: &CVector) -> f64 {
    let spec = support.spectrum();
    let r = crate::hilbert::numerical_rank(&spec.values, RANK_TOLERANCE);
    let basis = spec.top_vectors(r);
    let inside = &basis * (basis.adjoint() * u);
    (u - inside).norm() / u.norm()
}

/// `ρ = (1−x)·base + x·ww†` with `w = u ⊗ v`, where `u` and `v` must have
/// components outside the local supports of `base`.
pub fn hlvc_saturating(base: &PptState, new_product: &ProductVector, x: f64) -> Result<PptState> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::Construction(format!("mixing weight {x} not in (0, 1)")));
    }
    let dims = base.dims();
    if new_product.phi.len() != dims.n_a() || new_product.chi.len() != dims.n_b() {
        return Err(Error::DimensionMismatch {
            expected: dims.n(),
            got: new_product.phi.len() * new_product.chi.len(),
        });
    }
    let (ra, rb) = base.rho.reduced_states();
    let du = outside_component(&ra, &new_product.phi);
    let dv = outside_component(&rb, &new_product.chi);
    if du < COMPLEMENT_TOL || dv < COMPLEMENT_TOL {
        return Err(Error::Construction(format!(
            "product vector lies in the local support of the base (outside components {du:.1e}, {dv:.1e})"
        )));
    }
    let w = HermitianMatrix::projector(dims, &new_product.psi());
    let rho = &(&base.rho * (1.0 - x)) + &(&w * x);
    PptState::certify(&rho)
}

/// One level: embed into `(N_A+1) × (N_B+1)` and add a random product
/// vector. With `orthogonal` the new local vectors are the added basis
/// vectors themselves.
pub fn hlvc_step(
    base: &PptState,
    seed: u64,
    x: f64,
    orthogonal: bool,
) -> Result<(PptState, ProductVector)> {
    let d = base.dims();
    let bigger = BipartiteDims::new(d.n_a() + 1, d.n_b() + 1)?;
    let embedded = PptState::certify(&embed(&base.rho, bigger)?)?;
    let (u, v) = if orthogonal {
        let mut u = CVector::zeros(bigger.n_a());
        let mut v = CVector::zeros(bigger.n_b());
        u[d.n_a()] = C64::new(1.0, 0.0);
        v[d.n_b()] = C64::new(1.0, 0.0);
        (u, v)
    } else {
        let mut rng = seeded_rng(seed);
        (
            random_unit_vector(&mut rng, bigger.n_a()),
            random_unit_vector(&mut rng, bigger.n_b()),
        )
    };
    let pv = ProductVector::new(u, v);
    let st = hlvc_saturating(&embedded, &pv, x)?;
    Ok((st, pv))
}

/// The 3x3 rank-(4,4) state used as level 0, found by rank search.
pub fn extremal_seed_state(seed: u64) -> Result<PptState> {
    let dims = BipartiteDims::new(3, 3)?;
    let cfg = SearchConfig {
        seed,
        ..SearchConfig::default()
    };
    let out = search(dims, RankTarget::new(dims, 4, 4)?, &cfg);
    match out.state {
        Some(st) if st.ranks == (4, 4) => Ok(st),
        _ => Err(Error::Construction(
            "rank search found no 3x3 rank-(4,4) state".into(),
        )),
    }
}

/// `levels` successive steps from `base` (or from a searched level-0 state).
/// `mixing[i]` is the weight of level `i + 1`; missing entries are `1/2`.
pub fn hlvc_chain(
    base: Option<PptState>,
    levels: usize,
    seed: u64,
    mixing: &[f64],
    orthogonal: bool,
) -> Result<Constructed> {
    let mut st = match base {
        Some(b) => b,
        None => extremal_seed_state(seed)?,
    };
    let mut added = Vec::with_capacity(levels);
    let mut weights = Vec::with_capacity(levels);
    for level in 0..levels {
        let x = mixing.get(level).copied().unwrap_or(0.5);
        let (next, pv) = hlvc_step(&st, derive_seed(seed, level), x, orthogonal)?;
        st = next;
        added.push(pv);
        weights.push(x);
    }
    let dims = st.dims();
    Ok(Constructed {
        state: st,
        decomposition: None,
        added,
        recipe: ConstructionRecipe {
            kind: RecipeKind::HlvcSaturating { levels, orthogonal },
            dims,
            seed,
            mixing: weights,
        },
    })
}

/// Replays a recipe. HLVC recipes start from the searched level-0 state
/// unless `base` is given.
pub fn build(recipe: &ConstructionRecipe, base: Option<PptState>) -> Result<Constructed> {
    match recipe.kind {
        RecipeKind::SeparableMixture { k, real_chi } => {
            separable_mixture(recipe.dims, k, recipe.seed, real_chi)
        }
        RecipeKind::HlvcSaturating { levels, orthogonal } => {
            let out = hlvc_chain(base, levels, recipe.seed, &recipe.mixing, orthogonal)?;
            if out.state.dims() != recipe.dims {
                return Err(Error::Construction(format!(
                    "recipe dims {} do not match {} levels from the base ({})",
                    recipe.dims,
                    levels,
                    out.state.dims()
                )));
            }
            Ok(out)
        }
    }
}

/// `(max(N_A, N_B) + 1, N_A + N_B − 2)`: the lower rank bound for entangled
/// PPT states with full local ranks, and the conjectured lowest rank of an
/// extremal one.
pub fn hlvc_bounds(dims: BipartiteDims) -> (usize, usize) {
    (
        dims.n_a().max(dims.n_b()) + 1,
        (dims.n_a() + dims.n_b()).saturating_sub(2),
    )
}

/// Largest `x` with `ρ − x·ww† ⪰ 0`, for `w` in `Im ρ`, by bisection on the
/// smallest eigenvalue of the compression to `Im ρ`.
pub fn max_subtractable(rho: &HermitianMatrix, rank: usize, w: &CVector) -> Result<f64> {
    let spec = rho.spectrum();
    let basis = image_projector(&spec, rank, "rho").map(|_| spec.top_vectors(rank))?;
    let rc = basis.adjoint() * rho.as_matrix() * &basis;
    let wc = basis.adjoint() * w;
    let captured = wc.norm_squared() / w.norm_squared();
    if captured < 1.0 - 1e-8 {
        return Err(Error::Construction(format!(
            "vector is not in the image (captured norm {captured:.3e})"
        )));
    }
    let ww = &wc * wc.adjoint();
    let feasible = |x: f64| {
        let m = &rc - &ww * C64::new(x, 0.0);
        Spectrum::of(&m).values[0] >= 0.0
    };
    let (mut lo, mut hi) = (0.0, wc.dotc(&(&rc * &wc)).re / wc.norm_squared().powi(2));
    if feasible(hi) {
        return Ok(hi);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Splits off the product vector `w` from a PPT state: the largest `x` that
/// keeps both `ρ − x·ww†` and its partial transpose PSD, and the normalized
/// remainder.
pub fn extract_extremal(state: &PptState, w: &ProductVector) -> Result<(f64, PptState)> {
    let psi = w.psi();
    let x_rho = max_subtractable(&state.rho, state.ranks.0, &psi)?;
    let pt = state.rho.partial_transpose();
    let x_pt = max_subtractable(&pt, state.ranks.1, &w.conjugate_b())?;
    let x = x_rho.min(x_pt);
    let rest = &state.rho - &(&HermitianMatrix::projector(state.dims(), &psi) * x);
    let remainder = PptState::certify(&rest.normalized())?;
    Ok((x, remainder))
}
