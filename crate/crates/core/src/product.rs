//! Product vectors `φ ⊗ χ` in a subspace.
//!
//! A product vector lies in the subspace with projector `P` iff it
//! minimizes `f = ψ†(𝟙−P)ψ` with value zero. The minimizer alternates
//! a gradient evaluation with an exact minimization of the Rayleigh quotient
//! over the two-dimensional span of `ψ` and the gradient direction.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::hilbert::{
    derive_seed, kron, random_product_vector, seeded_rng, BipartiteDims, CMatrix, CVector, C64,
};

/// Objective value below which a minimum counts as a product vector.
pub const ACCEPT_TOL: f64 = 1e-9;
/// Two solutions are the same up to phases when `|⟨ψ_i, ψ_j⟩| ≥ 1 − DEDUP_TOL`.
pub const DEDUP_TOL: f64 = 1e-6;
/// Relative singular-value threshold for counting independent vectors.
pub const INDEPENDENCE_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct ProductVector {
    pub phi: CVector,
    pub chi: CVector,
    /// Final `ψ†Aψ`.
    pub objective: f64,
    pub converged: bool,
    pub steps: usize,
}

impl ProductVector {
    /// Normalizes both factors.
    pub fn new(phi: CVector, chi: CVector) -> Self {
        Self {
            phi: unit(phi),
            chi: unit(chi),
            objective: f64::NAN,
            converged: false,
            steps: 0,
        }
    }

    pub fn random(dims: BipartiteDims, seed: u64) -> Self {
        let (phi, chi) = random_product_vector(&mut seeded_rng(seed), dims);
        Self::new(phi, chi)
    }

    pub fn psi(&self) -> CVector {
        kron(&self.phi, &self.chi)
    }

    /// `φ ⊗ χ*`, conjugated in the computational basis of `ℋ_B`.
    pub fn conjugate_b(&self) -> CVector {
        kron(&self.phi, &self.chi.conjugate())
    }

    /// `|⟨ψ, ψ'⟩|`.
    pub fn fidelity(&self, other: &Self) -> f64 {
        let norms = self.phi.norm() * other.phi.norm() * self.chi.norm() * other.chi.norm();
        self.phi.dotc(&other.phi).norm() * self.chi.dotc(&other.chi).norm() / norms
    }
}

fn unit(v: CVector) -> CVector {
    let n = v.norm();
    v / C64::new(n, 0.0)
}

fn expectation(a: &CMatrix, psi: &CVector) -> (CVector, f64) {
    let z = a * psi;
    let f = psi.dotc(&z).re;
    (z, f)
}

/// Stopping rules for [`minimize_once`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MinimizeOptions {
    /// Stop when `‖x‖² + ‖y‖² ≤ grad_tol`.
    pub grad_tol: f64,
    /// Stop when one step lowers `f` by at most `f_tol · max(f, tiny)`.
    pub f_tol: f64,
    /// Stop once `f ≤ f_floor`.
    pub f_floor: f64,
    pub max_steps: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            grad_tol: 1e-26,
            f_tol: 1e-10,
            f_floor: 0.0,
            max_steps: 5000,
        }
    }
}

/// One step of the minimizer, exposed for tests of the update rule.
#[derive(Clone, Debug)]
pub struct StepTrace {
    pub f: f64,
    /// `φ†u`, the Lagrange multiplier of the normalization constraints.
    pub lambda: f64,
    pub grad_sq: f64,
}

/// Minimizes `ψ†Aψ` over unit product vectors from `start`.
pub fn minimize_once(
    a: &CMatrix,
    dims: BipartiteDims,
    start: &ProductVector,
    opts: &MinimizeOptions,
) -> ProductVector {
    minimize_traced(a, dims, start, opts).0
}

/// As [`minimize_once`], also returning one record per iterate.
pub fn minimize_traced(
    a: &CMatrix,
    dims: BipartiteDims,
    start: &ProductVector,
    opts: &MinimizeOptions,
) -> (ProductVector, Vec<StepTrace>) {
    let (na, nb) = (dims.n_a(), dims.n_b());
    let mut phi = unit(start.phi.clone());
    let mut chi = unit(start.chi.clone());
    let mut psi = kron(&phi, &chi);
    let (mut z, mut f) = expectation(a, &psi);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut steps = 0;

    while steps < opts.max_steps {
        let mut u = CVector::zeros(na);
        let mut v = CVector::zeros(nb);
        for i in 0..na {
            for j in 0..nb {
                let zij = z[i * nb + j];
                u[i] += chi[j].conj() * zij;
                v[j] += phi[i].conj() * zij;
            }
        }
        let lambda = phi.dotc(&u).re;
        let x = &u - &phi * C64::new(lambda, 0.0);
        let y = &v - &chi * C64::new(lambda, 0.0);
        let grad_sq = x.norm_squared() + y.norm_squared();
        trace.push(StepTrace { f, lambda, grad_sq });
        if grad_sq <= opts.grad_tol || f <= opts.f_floor {
            converged = true;
            break;
        }

        let w = kron(&phi, &y) + kron(&x, &chi);
        let wn = w.norm();
        let w_hat = &w / C64::new(wn, 0.0);
        let aw = a * &w_hat;
        let b = z.dotc(&w_hat).re;
        let c = w_hat.dotc(&aw).re;
        let d = 0.5 * (c - f);
        let t = d.hypot(b);
        let shift = if d > 0.0 { -b * b / (d + t) } else { d - t };
        let mut eps = shift / (b * wn);

        let mut accepted = None;
        for _ in 0..60 {
            let phi_n = unit(&phi + &x * C64::new(eps, 0.0));
            let chi_n = unit(&chi + &y * C64::new(eps, 0.0));
            let psi_n = kron(&phi_n, &chi_n);
            let (z_n, f_n) = expectation(a, &psi_n);
            if f_n <= f {
                accepted = Some((phi_n, chi_n, psi_n, z_n, f_n));
                break;
            }
            eps *= 0.5;
        }
        steps += 1;
        let Some((phi_n, chi_n, psi_n, z_n, f_n)) = accepted else {
            converged = true;
            break;
        };
        let drop = f - f_n;
        phi = phi_n;
        chi = chi_n;
        psi = psi_n;
        z = z_n;
        f = f_n;
        if drop <= opts.f_tol * f.max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    debug_assert_eq!(psi.len(), dims.n());
    let pv = ProductVector {
        phi,
        chi,
        objective: f,
        converged,
        steps,
    };
    (pv, trace)
}

/// Linear conditions on a product vector: `K_i† (φ ⊗ χ) = 0`, or
/// `K_i† (φ ⊗ χ*) = 0` for conjugated blocks, where the columns of `K_i`
/// span the orthogonal complement of the target subspace.
#[derive(Clone, Debug)]
pub struct ProductConstraints {
    dims: BipartiteDims,
    blocks: Vec<(CMatrix, bool)>,
}

impl ProductConstraints {
    /// Conditions for `ψ` to lie in the range of the projector `p`.
    pub fn in_range(dims: BipartiteDims, p: &CMatrix) -> Self {
        let mut c = Self {
            dims,
            blocks: Vec::new(),
        };
        c.push(p, false);
        c
    }

    /// Adds the condition that `ψ` (or `φ ⊗ χ*` when `conjugate`) lies in
    /// the range of `p`.
    pub fn push(&mut self, p: &CMatrix, conjugate: bool) {
        let n = self.dims.n();
        let mut complement = CMatrix::identity(n, n) - p;
        crate::hilbert::hermitize(&mut complement);
        let spec = crate::hilbert::Spectrum::of(&complement);
        let k = spec.values.iter().filter(|&&v| v > 0.5).count();
        let basis = spec.top_vectors(k);
        self.blocks.push((basis.adjoint(), conjugate));
    }

    fn residual(&self, phi: &CVector, chi: &CVector) -> Vec<C64> {
        let mut r = Vec::new();
        for (k, conj) in &self.blocks {
            let c = if *conj { chi.conjugate() } else { chi.clone() };
            r.extend((k * kron(phi, &c)).iter().copied());
        }
        r
    }

    /// `Σ_i ‖K_i† ψ_i‖²`.
    pub fn violation(&self, pv: &ProductVector) -> f64 {
        self.residual(&pv.phi, &pv.chi)
            .iter()
            .map(|z| z.norm_sqr())
            .sum()
    }

    /// Gauss-Newton refinement in the real parameters of `φ` and `χ`,
    /// minimum-norm steps, renormalizing after each. Returns the best iterate.
    pub fn polish(&self, pv: &ProductVector, max_iter: usize) -> ProductVector {
        let (na, nb) = (self.dims.n_a(), self.dims.n_b());
        let cols = 2 * (na + nb);
        let mut phi = pv.phi.clone();
        let mut chi = pv.chi.clone();
        let mut r = self.residual(&phi, &chi);
        let mut norm = r.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let i_unit = C64::new(0.0, 1.0);
        for _ in 0..max_iter {
            if norm < 1e-30 {
                break;
            }
            let rows = r.len();
            let mut jac = DMatrix::<f64>::zeros(2 * rows, cols);
            let mut row0 = 0;
            for (k, conj) in &self.blocks {
                let c = if *conj { chi.conjugate() } else { chi.clone() };
                let kr = k.nrows();
                for a in 0..na {
                    let mut e = CVector::zeros(na);
                    e[a] = C64::new(1.0, 0.0);
                    let d = k * kron(&e, &c);
                    for (col, z) in [(a, C64::new(1.0, 0.0)), (na + a, i_unit)] {
                        for q in 0..kr {
                            let v = d[q] * z;
                            jac[(row0 + q, col)] = v.re;
                            jac[(rows + row0 + q, col)] = v.im;
                        }
                    }
                }
                for b in 0..nb {
                    let mut e = CVector::zeros(nb);
                    e[b] = C64::new(1.0, 0.0);
                    let d = k * kron(&phi, &e);
                    let im = if *conj { -i_unit } else { i_unit };
                    for (col, z) in [(2 * na + b, C64::new(1.0, 0.0)), (2 * na + nb + b, im)] {
                        for q in 0..kr {
                            let v = d[q] * z;
                            jac[(row0 + q, col)] = v.re;
                            jac[(rows + row0 + q, col)] = v.im;
                        }
                    }
                }
                row0 += kr;
            }
            let rhs = nalgebra::DVector::from_fn(2 * rows, |i, _| {
                if i < rows {
                    -r[i].re
                } else {
                    -r[i - rows].im
                }
            });
            let svd = jac.svd(true, true);
            let Ok(dx) = svd.solve(&rhs, 1e-10 * svd.singular_values.max()) else {
                break;
            };
            let phi_n = unit(CVector::from_fn(na, |a, _| {
                phi[a] + C64::new(dx[a], dx[na + a])
            }));
            let chi_n = unit(CVector::from_fn(nb, |b, _| {
                chi[b] + C64::new(dx[2 * na + b], dx[2 * na + nb + b])
            }));
            let r_n = self.residual(&phi_n, &chi_n);
            let norm_n = r_n.iter().map(|z| z.norm_sqr()).sum::<f64>();
            if norm_n >= norm {
                break;
            }
            phi = phi_n;
            chi = chi_n;
            r = r_n;
            norm = norm_n;
        }
        ProductVector {
            phi,
            chi,
            objective: pv.objective,
            converged: pv.converged,
            steps: pv.steps,
        }
    }
}

/// Objective values below this are refined by [`ProductConstraints::polish`]
/// before the acceptance test.
pub const POLISH_THRESHOLD: f64 = 1e-5;

/// Generic number of product vectors in a `d`-dimensional subspace.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expected {
    Zero,
    Finite(u64),
    /// A family with this many free complex parameters.
    Infinite(usize),
}

impl Expected {
    pub fn finite_count(&self) -> Option<u64> {
        match *self {
            Expected::Zero => Some(0),
            Expected::Finite(c) => Some(c),
            Expected::Infinite(_) => None,
        }
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Parameter count `p = N_A + N_B − 2 − N + d`.
pub fn predict_count(dims: BipartiteDims, d: usize) -> Expected {
    let (na, nb) = (dims.n_a() as i64, dims.n_b() as i64);
    let p = na + nb - 2 - dims.n() as i64 + d as i64;
    match p {
        p if p > 0 => Expected::Infinite(p as usize),
        0 => Expected::Finite(binomial((na + nb - 2) as u64, (na - 1) as u64)),
        _ => Expected::Zero,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subspace {
    Image,
    Kernel,
}

/// Count of distinct solutions, or a family without upper limit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PvTotal {
    Finite(usize),
    Infinite,
}

impl Serialize for PvTotal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            PvTotal::Finite(n) => s.serialize_u64(*n as u64),
            PvTotal::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for PvTotal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(usize),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(n) => Ok(PvTotal::Finite(n)),
            Raw::Str(s) if s == "inf" => Ok(PvTotal::Infinite),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("bad total {s:?}"))),
        }
    }
}

/// A table cell: `0`, `a/b` or `inf/b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PvCell {
    pub total: PvTotal,
    pub independent: usize,
}

impl fmt::Display for PvCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.total {
            PvTotal::Finite(0) => write!(f, "0"),
            PvTotal::Finite(n) => write!(f, "{n}/{}", self.independent),
            PvTotal::Infinite => write!(f, "inf/{}", self.independent),
        }
    }
}

impl FromStr for PvCell {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("bad product-vector cell {s:?}"));
        let s = s.trim();
        if s == "0" {
            return Ok(PvCell {
                total: PvTotal::Finite(0),
                independent: 0,
            });
        }
        let (t, i) = s.split_once('/').ok_or_else(bad)?;
        let total = if t == "inf" {
            PvTotal::Infinite
        } else {
            PvTotal::Finite(t.parse().map_err(|_| bad())?)
        };
        Ok(PvCell {
            total,
            independent: i.parse().map_err(|_| bad())?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CensusOptions {
    /// Number of random starts; `60·max(1, c)` when `None`, with `c` the
    /// predicted finite count.
    pub budget: Option<usize>,
    pub seed: u64,
    pub minimize: MinimizeOptions,
}

impl Default for CensusOptions {
    fn default() -> Self {
        Self {
            budget: None,
            seed: 0,
            minimize: MinimizeOptions {
                f_floor: 1e-14,
                ..MinimizeOptions::default()
            },
        }
    }
}

impl CensusOptions {
    pub fn budget_for(&self, expected: Expected) -> usize {
        self.budget.unwrap_or_else(|| {
            60 * expected.finite_count().unwrap_or(1).max(1) as usize
        })
    }
}

#[derive(Clone, Debug)]
pub struct PvCensus {
    pub subspace: Subspace,
    pub dimension: usize,
    pub expected: Expected,
    pub total: PvTotal,
    pub independent: usize,
    /// Deduplicated representatives.
    pub vectors: Vec<ProductVector>,
    pub attempts: usize,
}

impl PvCensus {
    pub fn cell(&self) -> PvCell {
        PvCell {
            total: self.total,
            independent: self.independent,
        }
    }
}

/// Runs `budget` minimizations of `ψ†Aψ` in parallel, polishes the
/// promising ones against `constraints`, and returns the distinct minima
/// with `f ≤ ACCEPT_TOL`, in start order.
pub fn distinct_minima(
    a: &CMatrix,
    constraints: &ProductConstraints,
    budget: usize,
    seed: u64,
    opts: &MinimizeOptions,
) -> Vec<ProductVector> {
    let dims = constraints.dims;
    let found: Vec<ProductVector> = (0..budget)
        .into_par_iter()
        .map(|i| {
            let start = ProductVector::random(dims, derive_seed(seed, i));
            let pv = minimize_once(a, dims, &start, opts);
            if pv.objective > POLISH_THRESHOLD {
                return pv;
            }
            let mut polished = constraints.polish(&pv, 30);
            polished.objective = expectation(a, &polished.psi()).1;
            if pv.objective <= ACCEPT_TOL && polished.fidelity(&pv) < 1.0 - DEDUP_TOL {
                pv
            } else {
                polished
            }
        })
        .filter(|pv| pv.objective <= ACCEPT_TOL)
        .collect();
    let mut distinct: Vec<ProductVector> = Vec::new();
    for pv in found {
        if distinct
            .iter()
            .all(|q| q.fidelity(&pv) < 1.0 - DEDUP_TOL)
        {
            distinct.push(pv);
        }
    }
    distinct
}

/// Number of linearly independent columns, relative to the largest
/// singular value.
pub fn independent_count(vectors: &[CVector]) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let n = vectors[0].len();
    let m = CMatrix::from_fn(n, vectors.len(), |i, j| vectors[j][i]);
    let sv = m.singular_values();
    let max = sv.max();
    if max <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > INDEPENDENCE_TOL * max).count()
}

/// Relative singular-value threshold for the tangent test in [`is_isolated`].
pub const ISOLATION_TOL: f64 = 1e-5;

/// Whether `pv` (lying in the range of `p`) is an isolated point of the
/// product vectors in that range, up to scale: the map
/// `(δφ, δχ) ↦ (1 − P)(δφ⊗χ + φ⊗δχ)` must have a two-dimensional kernel.
pub fn is_isolated(p: &CMatrix, dims: BipartiteDims, pv: &ProductVector) -> bool {
    let (na, nb) = (dims.n_a(), dims.n_b());
    let n = dims.n();
    let phi = &pv.phi / C64::new(pv.phi.norm(), 0.0);
    let chi = &pv.chi / C64::new(pv.chi.norm(), 0.0);
    let mut t = CMatrix::zeros(n, na + nb);
    for a in 0..na {
        for b in 0..nb {
            t[(a * nb + b, a)] = chi[b];
            t[(a * nb + b, na + b)] = phi[a];
        }
    }
    let l = (CMatrix::identity(n, n) - p) * t;
    let sv = l.singular_values();
    let small = sv.iter().filter(|&&s| s <= ISOLATION_TOL).count() + (na + nb).saturating_sub(n);
    small <= 2
}

/// Dimension of the range of an orthogonal projector.
pub fn projector_dimension(p: &CMatrix) -> usize {
    p.trace().re.round().max(0.0) as usize
}

/// Product vectors in the range of the projector `p`.
pub fn census(
    p: &CMatrix,
    dims: BipartiteDims,
    subspace: Subspace,
    opts: &CensusOptions,
) -> PvCensus {
    let d = projector_dimension(p);
    let expected = predict_count(dims, d);
    let budget = opts.budget_for(expected);
    if d == 0 {
        return PvCensus {
            subspace,
            dimension: 0,
            expected,
            total: PvTotal::Finite(0),
            independent: 0,
            vectors: Vec::new(),
            attempts: 0,
        };
    }
    let a = CMatrix::identity(dims.n(), dims.n()) - p;
    let constraints = ProductConstraints::in_range(dims, p);
    let vectors = distinct_minima(&a, &constraints, budget, opts.seed, &opts.minimize);
    let psis: Vec<CVector> = vectors.iter().map(|v| p * v.psi()).collect();
    let independent = independent_count(&psis);
    let limit = 3 * (expected.finite_count().unwrap_or(0) as usize).max(d).max(1);
    let family = vectors.iter().any(|v| !is_isolated(p, dims, v));
    let total = if matches!(expected, Expected::Infinite(_)) || vectors.len() > limit || family {
        PvTotal::Infinite
    } else {
        PvTotal::Finite(vectors.len())
    };
    PvCensus {
        subspace,
        dimension: d,
        expected,
        total,
        independent,
        vectors,
        attempts: budget,
    }
}

/// Real symmetric Gram matrix of `|⟨ψ_i, ψ_j⟩|²`, the Hilbert-Schmidt
/// inner products of the projectors `ψψ†`.
pub fn projector_gram(vectors: &[CVector]) -> DMatrix<f64> {
    let k = vectors.len();
    DMatrix::from_fn(k, k, |i, j| vectors[i].dotc(&vectors[j]).norm_sqr())
}
