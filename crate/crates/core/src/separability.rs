//! Conjugate-pair separability test and state classification.
//!
//! A separable `ρ = Σ p_k ψ_kψ_k†` has every `ψ_k = φ_k ⊗ χ_k` in `Im ρ`
//! and every `φ_k ⊗ χ_k*` in `Im ρ^P`. When such conjugate pairs are
//! finite in number, separability reduces to a nonnegative least-squares
//! problem over them.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::face::{self, image_projector, FaceReport};
use crate::hilbert::{
    derive_seed, partial_transpose_raw, projector_onto, BipartiteDims, CMatrix, CVector,
    HermitianBasis, HermitianMatrix, PptState, Spectrum,
};
use crate::product::{
    census, distinct_minima, CensusOptions, MinimizeOptions, ProductConstraints, ProductVector,
    PvCell, PvCensus, PvTotal, Subspace, ACCEPT_TOL,
};

/// Maximum entrywise residual accepted for a decomposition.
pub const RECONSTRUCTION_TOL: f64 = 1e-8;

/// `m + n ≤ 2N − N_A − N_B + 2`.
pub fn criterion_in_range(dims: BipartiteDims, m: usize, n: usize) -> bool {
    (m + n) as i64 <= 2 * dims.n() as i64 - dims.n_a() as i64 - dims.n_b() as i64 + 2
}

/// `ψ = φ⊗χ ∈ Im ρ` together with `ψ̃ = φ⊗χ* ∈ Im ρ^P`.
#[derive(Clone, Debug)]
pub struct ConjugatePair {
    pub psi: ProductVector,
    /// Value of `2 − ψ†Pψ − ψ̃†Qψ̃`.
    pub objective: f64,
    /// `ψ†(𝟙−P)ψ`.
    pub image_defect: f64,
    /// `ψ̃†(𝟙−Q)ψ̃`.
    pub pt_defect: f64,
}

impl ConjugatePair {
    pub fn psi_tilde(&self) -> CVector {
        self.psi.conjugate_b()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairOptions {
    /// Random starts; `60·max(m, n)` when `None`.
    pub budget: Option<usize>,
    pub seed: u64,
    pub minimize: MinimizeOptions,
}

impl Default for PairOptions {
    fn default() -> Self {
        Self {
            budget: None,
            seed: 0,
            minimize: CensusOptions::default().minimize,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PairSearch {
    pub pairs: Vec<ConjugatePair>,
    /// Reported infinite when more than `3·max(m, n)` distinct pairs appear.
    pub total: PvTotal,
    pub attempts: usize,
}

fn defect(p: &CMatrix, v: &CVector) -> f64 {
    let pv = p * v;
    (v.norm_squared() - v.dotc(&pv).re).max(0.0)
}

pub fn find_conjugate_pairs(state: &PptState, opts: &PairOptions) -> Result<PairSearch> {
    let dims = state.dims();
    let n = dims.n();
    let (m, mp) = state.ranks;
    let p = image_projector(&state.rho.spectrum(), m, "rho")?;
    let q = image_projector(&state.rho.partial_transpose().spectrum(), mp, "rho^P")?;
    let a = CMatrix::identity(n, n) * crate::hilbert::C64::new(2.0, 0.0)
        - &p
        - partial_transpose_raw(dims, &q);
    let mut constraints = ProductConstraints::in_range(dims, &p);
    constraints.push(&q, true);
    let budget = opts.budget.unwrap_or(60 * m.max(mp).max(1));
    let found = distinct_minima(&a, &constraints, budget, opts.seed, &opts.minimize);
    let pairs: Vec<ConjugatePair> = found
        .into_iter()
        .filter_map(|psi| {
            let image_defect = defect(&p, &psi.psi());
            let pt_defect = defect(&q, &psi.conjugate_b());
            (image_defect <= ACCEPT_TOL && pt_defect <= ACCEPT_TOL).then(|| ConjugatePair {
                objective: psi.objective,
                psi,
                image_defect,
                pt_defect,
            })
        })
        .collect();
    let total = if pairs.len() > 3 * m.max(mp) {
        PvTotal::Infinite
    } else {
        PvTotal::Finite(pairs.len())
    };
    Ok(PairSearch {
        pairs,
        total,
        attempts: budget,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    SeparableWithDecomposition,
    /// PPT implies separable when `N_A·N_B ≤ 6` or one factor is trivial.
    SeparableByLowDimension,
    EntangledByPairDeficit,
    EntangledByReconstructionFailure,
    InconclusiveOutOfRange,
}

impl VerdictStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            VerdictStatus::SeparableWithDecomposition => "separable_with_decomposition",
            VerdictStatus::SeparableByLowDimension => "separable_by_low_dimension",
            VerdictStatus::EntangledByPairDeficit => "entangled_by_pair_deficit",
            VerdictStatus::EntangledByReconstructionFailure => {
                "entangled_by_reconstruction_failure"
            }
            VerdictStatus::InconclusiveOutOfRange => "inconclusive_out_of_range",
        }
    }

    pub fn is_separable(&self) -> bool {
        matches!(
            self,
            VerdictStatus::SeparableWithDecomposition | VerdictStatus::SeparableByLowDimension
        )
    }

    pub fn is_entangled(&self) -> bool {
        matches!(
            self,
            VerdictStatus::EntangledByPairDeficit | VerdictStatus::EntangledByReconstructionFailure
        )
    }
}

impl std::fmt::Display for VerdictStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for VerdictStatus {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| crate::Error::InvalidInput(format!("unknown verdict {s:?}")))
    }
}

#[derive(Clone, Debug)]
pub struct SeparabilityVerdict {
    pub status: VerdictStatus,
    pub k_pairs: Option<PvTotal>,
    pub weights: Option<Vec<f64>>,
    /// Entrywise max-norm of `ρ − Σ p_k ψ_kψ_k†`.
    pub residual: f64,
    /// Condition number of the candidates' projector Gram matrix.
    pub condition: Option<f64>,
}

/// Lawson-Hanson active-set solution of `min ‖Ax − b‖₂` subject to `x ≥ 0`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let cols = a.ncols();
    let mut x = DVector::zeros(cols);
    let mut passive = vec![false; cols];
    let scale = a.amax().max(1.0) * b.amax().max(1.0);
    let tol = 1e-14 * scale * cols.max(1) as f64;
    let gradient = |x: &DVector<f64>| a.tr_mul(&(b - a * x));

    for _ in 0..3 * cols + 10 {
        let w = gradient(&x);
        let Some(j) = (0..cols)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]))
        else {
            break;
        };
        passive[j] = true;
        loop {
            let idx: Vec<usize> = (0..cols).filter(|&i| passive[i]).collect();
            let sub = a.select_columns(&idx);
            let svd = sub.svd(true, true);
            let cut = 1e-13 * svd.singular_values.max();
            let Ok(s_p) = svd.solve(b, cut) else {
                return x;
            };
            if s_p.iter().all(|&v| v > 0.0) {
                x.fill(0.0);
                for (k, &i) in idx.iter().enumerate() {
                    x[i] = s_p[k];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (k, &i) in idx.iter().enumerate() {
                if s_p[k] <= 0.0 {
                    alpha = alpha.min(x[i] / (x[i] - s_p[k]));
                }
            }
            for (k, &i) in idx.iter().enumerate() {
                x[i] += alpha * (s_p[k] - x[i]);
                if x[i] <= 1e-300 {
                    x[i] = 0.0;
                    passive[i] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    x
}

/// Tries to write `ρ` as a nonnegative combination of the pairs' `ψψ†`.
pub fn reconstruct(state: &PptState, search: &PairSearch) -> SeparabilityVerdict {
    let (m, n) = state.ranks;
    let k = search.pairs.len();
    let deficit = SeparabilityVerdict {
        status: VerdictStatus::EntangledByPairDeficit,
        k_pairs: Some(search.total),
        weights: None,
        residual: f64::INFINITY,
        condition: None,
    };
    if search.total != PvTotal::Infinite && k < m.max(n) {
        return deficit;
    }
    if k == 0 {
        return deficit;
    }
    let dims = state.dims();
    let basis = HermitianBasis::canonical(dims);
    let psis: Vec<CVector> = search.pairs.iter().map(|p| p.psi.psi()).collect();
    let projectors: Vec<HermitianMatrix> = psis
        .iter()
        .map(|v| HermitianMatrix::projector(dims, v))
        .collect();
    let mut a = DMatrix::zeros(basis.len(), k);
    for (j, pr) in projectors.iter().enumerate() {
        a.set_column(j, &basis.to_coords(pr).expect("same dims"));
    }
    let b = basis.to_coords(&state.rho).expect("same dims");
    let weights = nnls(&a, &b);
    let mut sum = HermitianMatrix::zeros(dims);
    for (w, pr) in weights.iter().zip(&projectors) {
        sum = &sum + &(pr * *w);
    }
    let residual = sum.max_abs_diff(&state.rho);
    let (gram_values, _) = Spectrum::of_real(&crate::product::projector_gram(&psis));
    let condition = gram_values.last().copied().unwrap_or(0.0)
        / gram_values.first().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
    let status = if residual <= RECONSTRUCTION_TOL {
        VerdictStatus::SeparableWithDecomposition
    } else {
        VerdictStatus::EntangledByReconstructionFailure
    };
    SeparabilityVerdict {
        status,
        k_pairs: Some(search.total),
        weights: Some(weights.iter().copied().collect()),
        residual,
        condition: Some(condition),
    }
}

/// PPT implies separable in these dimensions.
pub fn ppt_implies_separable(dims: BipartiteDims) -> bool {
    local_ranks_imply_separable(dims.n_a(), dims.n_b())
}

/// The same test for a state supported on an `r_A × r_B` subsystem.
pub fn local_ranks_imply_separable(r_a: usize, r_b: usize) -> bool {
    r_a.min(r_b) <= 1 || r_a * r_b <= 6
}

/// Separability verdict with the pair search run only inside the range of
/// the criterion.
pub fn decide(state: &PptState, opts: &PairOptions) -> Result<SeparabilityVerdict> {
    let dims = state.dims();
    let (m, n) = state.ranks;
    let low = ppt_implies_separable(dims)
        || local_ranks_imply_separable(state.local_ranks.0, state.local_ranks.1);
    let out_of_range = SeparabilityVerdict {
        status: VerdictStatus::InconclusiveOutOfRange,
        k_pairs: None,
        weights: None,
        residual: f64::NAN,
        condition: None,
    };
    let mut verdict = if criterion_in_range(dims, m, n) {
        reconstruct(state, &find_conjugate_pairs(state, opts)?)
    } else {
        out_of_range
    };
    if low && !verdict.status.is_separable() {
        verdict.status = VerdictStatus::SeparableByLowDimension;
    }
    Ok(verdict)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassifyConfig {
    pub seed: u64,
    pub pv_budget: Option<usize>,
    pub pair_budget: Option<usize>,
    pub minimize: MinimizeOptions,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            pv_budget: None,
            pair_budget: None,
            minimize: CensusOptions::default().minimize,
        }
    }
}

/// One table row's worth of information about a state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub dims: BipartiteDims,
    pub ranks: [usize; 2],
    pub bound: i64,
    #[serde(rename = "dimF")]
    pub dim_f: usize,
    pub local_ranks: [usize; 2],
    pub pv_im: PvCell,
    pub pv_ker: PvCell,
    pub verdict: VerdictStatus,
    pub extremal: bool,
    pub full_local_ranks: bool,
    pub face_gap: f64,
    pub face_unreliable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_pairs: Option<PvTotal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reconstruction_residual: Option<f64>,
}

/// Every analysis of a state, kept for callers that need the vectors.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub face: FaceReport,
    pub image: PvCensus,
    pub kernel: PvCensus,
    pub verdict: SeparabilityVerdict,
}

pub fn analyze_state(state: &PptState, cfg: &ClassifyConfig) -> Result<Analysis> {
    let dims = state.dims();
    let face = face::analyze(state)?;
    let spec = state.rho.spectrum();
    let m = state.ranks.0;
    let p_im = image_projector(&spec, m, "rho")?;
    let p_ker = projector_onto(&spec.bottom_vectors(dims.n() - m));
    let census_opts = |i| CensusOptions {
        budget: cfg.pv_budget,
        seed: derive_seed(cfg.seed, i),
        minimize: cfg.minimize,
    };
    let image = census(&p_im, dims, Subspace::Image, &census_opts(0));
    let kernel = census(&p_ker, dims, Subspace::Kernel, &census_opts(1));
    let verdict = decide(
        state,
        &PairOptions {
            budget: cfg.pair_budget,
            seed: derive_seed(cfg.seed, 2),
            minimize: cfg.minimize,
        },
    )?;
    Ok(Analysis {
        face,
        image,
        kernel,
        verdict,
    })
}

pub fn classify_state(state: &PptState, cfg: &ClassifyConfig) -> Result<Classification> {
    let an = analyze_state(state, cfg)?;
    Ok(Classification {
        dims: state.dims(),
        ranks: [state.ranks.0, state.ranks.1],
        bound: an.face.lower_bound,
        dim_f: an.face.dim_f,
        local_ranks: [state.local_ranks.0, state.local_ranks.1],
        pv_im: an.image.cell(),
        pv_ker: an.kernel.cell(),
        verdict: an.verdict.status,
        extremal: an.face.is_extremal,
        full_local_ranks: state.has_full_local_ranks(),
        face_gap: an.face.eigen_gap,
        face_unreliable: an.face.unreliable,
        k_pairs: an.verdict.k_pairs,
        reconstruction_residual: an
            .verdict
            .residual
            .is_finite()
            .then_some(an.verdict.residual),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_boundaries() {
        let d33 = BipartiteDims::new(3, 3).unwrap();
        assert!(criterion_in_range(d33, 6, 6));
        assert!(criterion_in_range(d33, 7, 7));
        assert!(!criterion_in_range(d33, 8, 7));
        let d24 = BipartiteDims::new(2, 4).unwrap();
        assert!(criterion_in_range(d24, 6, 6));
        assert!(!criterion_in_range(d24, 7, 6));
    }

    #[test]
    fn nnls_recovers_nonnegative_solution() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_column_slice(&[2.0, 3.0, 5.0]);
        let x = nnls(&a, &b);
        assert!((x[0] - 2.0).abs() < 1e-12 && (x[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn nnls_clamps_negative_direction() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let b = DVector::from_column_slice(&[-1.0, 2.0]);
        let x = nnls(&a, &b);
        assert_eq!(x[0], 0.0);
        assert!((x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn verdict_names() {
        for v in [
            VerdictStatus::SeparableWithDecomposition,
            VerdictStatus::SeparableByLowDimension,
            VerdictStatus::EntangledByPairDeficit,
            VerdictStatus::EntangledByReconstructionFailure,
            VerdictStatus::InconclusiveOutOfRange,
        ] {
            assert_eq!(v.as_str().parse::<VerdictStatus>().unwrap(), v);
            assert_eq!(
                serde_json::to_value(v).unwrap(),
                serde_json::Value::String(v.as_str().into())
            );
        }
    }

    #[test]
    fn maximally_mixed_is_out_of_range() {
        let d = BipartiteDims::new(3, 3).unwrap();
        let st = PptState::certify(&HermitianMatrix::maximally_mixed(d)).unwrap();
        let c = classify_state(&st, &ClassifyConfig::default()).unwrap();
        assert_eq!(c.ranks, [9, 9]);
        assert_eq!(c.dim_f, 81);
        assert_eq!(c.verdict, VerdictStatus::InconclusiveOutOfRange);
    }
}
