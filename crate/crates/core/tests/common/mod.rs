#![allow(dead_code)]

use nalgebra::DMatrix;
use ppt_core::hilbert::{seeded_rng, BipartiteDims, CMatrix, HermitianMatrix, C64};
use ppt_core::product::PvCell;
use ppt_core::search::{search, RankTarget, SearchConfig};
use ppt_core::survey::SurveyTable;
use ppt_core::PptState;
use rand_distr::{Distribution, StandardNormal};

pub fn dims(a: usize, b: usize) -> BipartiteDims {
    BipartiteDims::new(a, b).unwrap()
}

/// Reference rows: ranks, face dimension, local ranks, Im cell, Ker cell.
pub type RefRow = ((usize, usize), usize, (usize, usize), &'static str, &'static str);

pub const REFERENCE_2X4: &[RefRow] = &[
    ((8, 8), 64, (2, 4), "inf/8", "0"),
    ((8, 7), 49, (2, 4), "inf/8", "0"),
    ((8, 6), 36, (2, 4), "inf/8", "0"),
    ((7, 7), 34, (2, 4), "inf/7", "0"),
    ((8, 5), 25, (2, 4), "inf/8", "0"),
    ((7, 6), 21, (2, 4), "inf/7", "0"),
    ((7, 5), 10, (2, 4), "inf/7", "0"),
    ((6, 6), 8, (2, 4), "inf/6", "0"),
    ((6, 5), 1, (2, 4), "inf/6", "0"),
    ((5, 5), 1, (2, 4), "inf/5", "0"),
    ((4, 4), 4, (2, 4), "4/4", "4/4"),
    ((3, 3), 3, (2, 3), "3/3", "inf/5"),
    ((2, 2), 2, (2, 2), "2/2", "inf/6"),
    ((1, 1), 1, (1, 1), "1/1", "inf/8"),
];

pub const REFERENCE_3X3: &[RefRow] = &[
    ((9, 9), 81, (3, 3), "inf/9", "0"),
    ((9, 8), 64, (3, 3), "inf/9", "0"),
    ((9, 7), 49, (3, 3), "inf/9", "0"),
    ((8, 8), 47, (3, 3), "inf/8", "0"),
    ((9, 6), 36, (3, 3), "inf/9", "0"),
    ((8, 7), 32, (3, 3), "inf/8", "0"),
    ((8, 6), 19, (3, 3), "inf/8", "0"),
    ((7, 7), 17, (3, 3), "inf/7", "0"),
    ((8, 5), 8, (3, 3), "inf/8", "0"),
    ((7, 6), 4, (3, 3), "inf/7", "0"),
    ((7, 5), 1, (3, 3), "inf/7", "0"),
    ((6, 6), 1, (3, 3), "inf/6", "0"),
    ((6, 5), 1, (3, 3), "inf/6", "0"),
    ((5, 5), 1, (3, 3), "6/5", "0"),
    ((4, 4), 1, (3, 3), "0", "6/5"),
    ((3, 3), 3, (3, 3), "3/3", "inf/6"),
    ((2, 2), 2, (2, 2), "2/2", "inf/7"),
    ((1, 1), 1, (1, 1), "1/1", "inf/8"),
];

/// Largest number of independent vectors a kernel of a rank-`m` state can
/// hold; reference cells above it are clamped.
pub fn clamp_kernel_cell(cell: &str, n: usize, m: usize) -> String {
    let c: PvCell = cell.parse().unwrap();
    let cap = n - m;
    if c.independent > cap {
        let mut c = c;
        c.independent = cap;
        c.to_string()
    } else {
        cell.to_string()
    }
}

/// Compares a table with reference rows. Returns the rows that are missing
/// and the table signatures that are not in the reference.
pub fn compare(table: &SurveyTable, reference: &[RefRow]) -> (Vec<String>, Vec<String>) {
    let n = table.dims.n();
    let sig = |ranks: (usize, usize), f: usize, lr: (usize, usize), im: &str, ker: &str| {
        format!(
            "({},{}) dimF={} local=({},{}) im={} ker={}",
            ranks.0, ranks.1, f, lr.0, lr.1, im, ker
        )
    };
    let have: Vec<String> = table
        .rows
        .iter()
        .map(|r| {
            sig(
                (r.ranks[0], r.ranks[1]),
                r.dim_f,
                (r.local_ranks[0], r.local_ranks[1]),
                &r.pv_im.to_string(),
                &r.pv_ker.to_string(),
            )
        })
        .collect();
    let want: Vec<String> = reference
        .iter()
        .map(|&(ranks, f, lr, im, ker)| sig(ranks, f, lr, im, &clamp_kernel_cell(ker, n, ranks.0)))
        .collect();
    let missing = want.iter().filter(|w| !have.contains(w)).cloned().collect();
    let extra = have.iter().filter(|h| !want.contains(h)).cloned().collect();
    (missing, extra)
}

pub fn find_state(d: BipartiteDims, m: usize, n: usize, seed: u64) -> PptState {
    let cfg = SearchConfig {
        seed,
        ..SearchConfig::default()
    };
    let out = search(d, RankTarget::new(d, m, n).unwrap(), &cfg);
    let st = out.state.expect("search converged");
    assert_eq!(st.ranks, (m, n), "search slipped to {:?}", st.ranks);
    st
}

/// Random Hermitian matrix with Gaussian entries.
pub fn random_hermitian(d: BipartiteDims, seed: u64) -> HermitianMatrix {
    let mut rng = seeded_rng(seed);
    let n = d.n();
    let g = CMatrix::from_fn(n, n, |_, _| {
        C64::new(
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
        )
    });
    HermitianMatrix::from_raw(d, (&g + g.adjoint()) * C64::new(0.5, 0.0))
}

/// Partial transpose on B by the index formula, written out entry by entry.
pub fn partial_transpose_by_index(d: BipartiteDims, m: &CMatrix) -> CMatrix {
    let (na, nb) = (d.n_a(), d.n_b());
    let mut out = CMatrix::zeros(na * nb, na * nb);
    for a in 0..na {
        for b in 0..nb {
            for a2 in 0..na {
                for b2 in 0..nb {
                    out[(a * nb + b, a2 * nb + b2)] = m[(a * nb + b2, a2 * nb + b)];
                }
            }
        }
    }
    out
}

/// Random orthogonal matrix from the QR factorization of a Gaussian one.
pub fn random_orthogonal(k: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = seeded_rng(seed);
    let g = DMatrix::from_fn(k, k, |_, _| StandardNormal.sample(&mut rng));
    g.qr().q()
}

/// Eigenvalues of a Hermitian matrix via the real symmetric embedding
/// `[[Re, −Im], [Im, Re]]`, whose spectrum is that of `H` doubled.
pub fn eigenvalues_by_embedding(h: &CMatrix) -> Vec<f64> {
    let n = h.nrows();
    let big = DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = h[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    let mut v: Vec<f64> = big.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.into_iter().step_by(2).collect()
}
