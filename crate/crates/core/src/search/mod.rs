//! Rank-targeted search for PPT states.
//!
//! Starting from a random full-rank density matrix, the search drives the
//! `N − m` smallest eigenvalues of `ρ` and the `N − n` smallest eigenvalues
//! of `ρ^P` to zero by Gauss-Newton steps in the coordinate space of
//! Hermitian matrices. Because it is always the lowest eigenvalues that are
//! zeroed, a converged point is PPT with ranks at most `(m, n)`.

mod newton;

pub use newton::{coupling_rows, eigen_row, jacobian, mu_vector, newton_step, Eigensystems, NewtonStep, StepError};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    derive_seed, random_density, seeded_rng, BipartiteDims, HermitianBasis, HermitianMatrix, PptState,
};

/// Target ranks `(m, n)` for `ρ` and `ρ^P`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RankTarget {
    pub m: usize,
    pub n: usize,
}

impl RankTarget {
    pub fn new(dims: BipartiteDims, m: usize, n: usize) -> Result<Self> {
        let dim = dims.n();
        if m == 0 || n == 0 || m > dim || n > dim {
            return Err(Error::InvalidRankTarget { m, n, dim });
        }
        Ok(Self { m, n })
    }

    /// Number of eigenvalues forced to zero.
    pub fn constraint_count(&self, dims: BipartiteDims) -> usize {
        2 * dims.n() - self.m - self.n
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub max_iterations: usize,
    /// Convergence threshold on `‖μ‖∞`.
    pub residual_tol: f64,
    pub cg_tol: f64,
    /// Defaults to `2N²` when `None`.
    pub cg_max_steps: Option<usize>,
    pub stall_window: usize,
    pub restarts: usize,
    pub seed: u64,
    pub coupling: Coupling,
}

/// Whether the off-diagonal couplings inside the zeroed eigenspaces are
/// constrained along with the eigenvalues themselves.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// Coupled while the full block system `(N−m)² + (N−n)²` has at most
    /// `N²` equations, eigenvalues only otherwise.
    #[default]
    Auto,
    Always,
    Never,
}

impl Coupling {
    pub fn enabled(self, dims: BipartiteDims, target: RankTarget) -> bool {
        match self {
            Coupling::Always => true,
            Coupling::Never => false,
            Coupling::Auto => {
                let (kr, kp) = (dims.n() - target.m, dims.n() - target.n);
                kr * kr + kp * kp <= dims.real_dim()
            }
        }
    }
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            residual_tol: 1e-11,
            cg_tol: 1e-12,
            cg_max_steps: None,
            stall_window: 20,
            restarts: 50,
            seed: 0,
            coupling: Coupling::Auto,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.residual_tol > 0.0 && self.cg_tol > 0.0) {
            return Err(Error::InvalidInput("tolerances must be positive".into()));
        }
        if self.max_iterations == 0 || self.stall_window == 0 {
            return Err(Error::InvalidInput(
                "iteration budget and stall window must be positive".into(),
            ));
        }
        Ok(())
    }

    fn cg_steps(&self, dims: BipartiteDims) -> usize {
        self.cg_max_steps.unwrap_or(2 * dims.real_dim())
    }

    pub fn restart_seed(&self, i: usize) -> u64 {
        derive_seed(self.seed, i)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStatus {
    Converged,
    AbortedStall,
    AbortedMaxIter,
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub status: SearchStatus,
    /// Present iff `status == Converged`.
    pub state: Option<PptState>,
    /// `‖μ‖∞` at each iterate.
    pub history: Vec<f64>,
    pub seed: u64,
}

impl SearchOutcome {
    pub fn converged(&self) -> bool {
        self.status == SearchStatus::Converged
    }

    pub fn final_residual(&self) -> f64 {
        self.history.last().copied().unwrap_or(f64::INFINITY)
    }

    pub fn achieved(&self) -> Option<(usize, usize)> {
        self.state.as_ref().map(|s| s.ranks)
    }
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, &x| a.max(x.abs()))
}

/// A single search from the Wishart start drawn with `seed`.
pub fn search_once(
    dims: BipartiteDims,
    target: RankTarget,
    cfg: &SearchConfig,
    seed: u64,
) -> SearchOutcome {
    let basis = HermitianBasis::canonical(dims);
    let mut rng = seeded_rng(seed);
    let start = ppt_start(random_density(dims, dims.n(), &mut rng));
    search_from(&basis, start, target, cfg, seed)
}

/// Mixes a full-rank state with `𝟙/N` just enough that its partial
/// transpose has smallest eigenvalue at least `0.1/N`.
pub fn ppt_start(w: HermitianMatrix) -> HermitianMatrix {
    let dims = w.dims();
    let inv_n = 1.0 / dims.n() as f64;
    let floor = 0.1 * inv_n;
    let lam = w.partial_transpose().min_eigenvalue();
    if lam >= floor {
        return w;
    }
    let t = (floor - lam) / (inv_n - lam);
    &(&w * (1.0 - t)) + &(&HermitianMatrix::maximally_mixed(dims) * t)
}

/// Runs the iteration from an explicit starting matrix.
pub fn search_from(
    basis: &HermitianBasis,
    start: HermitianMatrix,
    target: RankTarget,
    cfg: &SearchConfig,
    seed: u64,
) -> SearchOutcome {
    let dims = basis.dims();
    let cg_steps = cfg.cg_steps(dims);
    let coupled = cfg.coupling.enabled(dims, target);
    let mut rho = start.normalized();
    let (mut mu, mut eig) = mu_vector(&rho, target);
    let mut history = Vec::new();
    let finish = |status, history: Vec<f64>| SearchOutcome {
        status,
        state: None,
        history,
        seed,
    };

    for iter in 0..=cfg.max_iterations {
        let res = sup_norm(&mu);
        history.push(res);
        if res <= cfg.residual_tol {
            return match PptState::certify(&rho) {
                Ok(mut st) => {
                    st.seed = Some(seed);
                    st.target = Some((target.m, target.n));
                    st.iterations_used = iter;
                    st.residual = res;
                    SearchOutcome {
                        status: SearchStatus::Converged,
                        state: Some(st),
                        history,
                        seed,
                    }
                }
                Err(_) => finish(SearchStatus::AbortedStall, history),
            };
        }
        if iter == cfg.max_iterations {
            break;
        }
        let w = cfg.stall_window;
        if history.len() > w && res > 0.9 * history[history.len() - 1 - w] {
            return finish(SearchStatus::AbortedStall, history);
        }

        let (b, rhs) = if coupled {
            let diag = jacobian(&eig, target, basis);
            let off = coupling_rows(&eig, target, basis);
            let mut rhs = mu.clone();
            rhs.resize(diag.nrows() + off.nrows(), 0.0);
            let rows = diag.nrows() + off.nrows();
            let mut b = diag.resize_vertically(rows, 0.0);
            b.rows_mut(rows - off.nrows(), off.nrows()).copy_from(&off);
            (b, rhs)
        } else {
            (jacobian(&eig, target, basis), mu.clone())
        };
        let (mut b, mut rhs) = (b, rhs);
        let mut step = match newton_step(&b, &rhs, cfg.cg_tol, cg_steps) {
            Ok(s) => s,
            Err(StepError::Stationary) => return finish(SearchStatus::AbortedStall, history),
        };
        let x = basis.to_coords(&rho).expect("basis matches state");
        let (mut next, (mut next_mu, mut next_eig)) = trial(basis, &x, &step.dx, 1.0, target);
        let mut held: Vec<(bool, usize)> = Vec::new();
        for _ in 0..MAX_HOLD_ROUNDS {
            if kept_min(&next_eig, target) >= 0.0 {
                break;
            }
            let before = held.len();
            let n = dims.n();
            for (transposed, spec, first) in
                [(false, &eig.rho, n - target.m), (true, &eig.pt, n - target.n)]
            {
                for k in first..n {
                    if held.contains(&(transposed, k)) {
                        continue;
                    }
                    let row = eigen_row(spec, k, transposed, basis);
                    if spec.values[k] + row.dot(&step.dx) < HOLD_FRACTION * spec.values[k] {
                        held.push((transposed, k));
                        let r = b.nrows();
                        b = b.resize_vertically(r + 1, 0.0);
                        b.set_row(r, &row.transpose());
                        rhs.push(0.0);
                    }
                }
            }
            if held.len() == before {
                break;
            }
            step = match newton_step(&b, &rhs, cfg.cg_tol, cg_steps) {
                Ok(s) => s,
                Err(StepError::Stationary) => return finish(SearchStatus::AbortedStall, history),
            };
            (next, (next_mu, next_eig)) = trial(basis, &x, &step.dx, 1.0, target);
        }
        let mut scale = 1.0;
        if sup_norm(&next_mu) > 10.0 * res {
            scale = 0.5;
            (next, (next_mu, next_eig)) = trial(basis, &x, &step.dx, scale, target);
        }
        let mut halvings = 0;
        while kept_min(&next_eig, target) < 0.0 && halvings < MAX_POSITIVITY_HALVINGS {
            scale *= 0.5;
            halvings += 1;
            (next, (next_mu, next_eig)) = trial(basis, &x, &step.dx, scale, target);
        }
        rho = next;
        mu = next_mu;
        eig = next_eig;
    }
    finish(SearchStatus::AbortedMaxIter, history)
}

const MAX_POSITIVITY_HALVINGS: usize = 30;
const MAX_HOLD_ROUNDS: usize = 4;
/// A kept eigenvalue predicted to fall below this fraction of its current
/// value is held fixed in the next solve.
const HOLD_FRACTION: f64 = 0.25;

/// Smallest eigenvalue of `ρ` and `ρ^P` outside the blocks being zeroed.
fn kept_min(eig: &Eigensystems, target: RankTarget) -> f64 {
    let n = eig.rho.len();
    eig.rho.values[n - target.m].min(eig.pt.values[n - target.n])
}

fn trial(
    basis: &HermitianBasis,
    x: &DVector<f64>,
    dx: &DVector<f64>,
    scale: f64,
    target: RankTarget,
) -> (HermitianMatrix, (Vec<f64>, Eigensystems)) {
    let xn = x + dx * scale;
    let rho = basis.from_coords(&xn).expect("coordinate length").normalized();
    let me = mu_vector(&rho, target);
    (rho, me)
}

/// Up to `cfg.restarts` independent searches. Returns the first run that
/// converges to exactly the target ranks; otherwise the converged run with
/// the highest achieved ranks, or the failed run with the lowest residual.
pub fn search(dims: BipartiteDims, target: RankTarget, cfg: &SearchConfig) -> SearchOutcome {
    let mut best: Option<SearchOutcome> = None;
    for i in 0..cfg.restarts.max(1) {
        let out = search_once(dims, target, cfg, cfg.restart_seed(i));
        if out.achieved() == Some((target.m, target.n)) {
            return out;
        }
        best = Some(match best {
            None => out,
            Some(b) => better(b, out),
        });
    }
    best.expect("at least one restart")
}

fn better(a: SearchOutcome, b: SearchOutcome) -> SearchOutcome {
    match (a.achieved(), b.achieved()) {
        (Some(ra), Some(rb)) => {
            if rb.0 + rb.1 > ra.0 + ra.1 {
                b
            } else {
                a
            }
        }
        (Some(_), None) => a,
        (None, Some(_)) => b,
        (None, None) => {
            if b.final_residual() < a.final_residual() {
                b
            } else {
                a
            }
        }
    }
}
