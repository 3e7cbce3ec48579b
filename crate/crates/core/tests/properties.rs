mod common;

use common::*;
use nalgebra::DVector;
use ppt_core::face::{face_dimension, face_dimension_alt, face_projectors, projector_rank};
use ppt_core::hilbert::{projector_onto, seeded_rng, random_density, HermitianBasis, HermitianMatrix};
use ppt_core::product::{minimize_traced, MinimizeOptions, ProductVector};
use ppt_core::search::{jacobian, mu_vector, search_once, RankTarget, SearchConfig, SearchStatus};
use ppt_core::separability::{classify_state, ClassifyConfig};
use ppt_core::PptState;
use proptest::prelude::*;

fn small_dims() -> impl Strategy<Value = (usize, usize)> {
    prop_oneof![
        Just((1, 1)),
        Just((1, 3)),
        Just((2, 2)),
        Just((2, 3)),
        Just((3, 2)),
        Just((2, 4)),
        Just((3, 3)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn basis_is_orthonormal((a, b) in small_dims()) {
        let d = dims(a, b);
        let basis = HermitianBasis::canonical(d);
        prop_assert_eq!(basis.len(), d.real_dim());
        let mats: Vec<HermitianMatrix> = (0..basis.len()).map(|i| basis.matrix(i)).collect();
        for i in 0..mats.len() {
            for j in 0..mats.len() {
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((mats[i].inner(&mats[j]) - want).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn coordinates_round_trip((a, b) in small_dims(), seed in any::<u64>()) {
        let d = dims(a, b);
        let basis = HermitianBasis::canonical(d);
        let h = random_hermitian(d, seed);
        let back = basis.from_coords(&basis.to_coords(&h).unwrap()).unwrap();
        prop_assert!(back.max_abs_diff(&h) <= 1e-13);
    }

    #[test]
    fn partial_transpose_involution_and_trace((a, b) in small_dims(), seed in any::<u64>()) {
        let d = dims(a, b);
        let h = random_hermitian(d, seed);
        let pt = h.partial_transpose();
        let by_index = partial_transpose_by_index(d, h.as_matrix());
        prop_assert!((pt.as_matrix() - &by_index).camax() <= 1e-13);
        prop_assert!(pt.partial_transpose().max_abs_diff(&h) <= 1e-13);
        prop_assert!((pt.trace() - h.trace()).abs() <= 1e-13);
    }

    #[test]
    fn jacobian_matches_central_differences(seed in any::<u64>(), t in 0usize..4) {
        let (d, m, n) = [(dims(3, 3), 6, 5), (dims(2, 4), 6, 6), (dims(2, 3), 4, 5), (dims(3, 3), 8, 8)][t];
        let basis = HermitianBasis::canonical(d);
        let target = RankTarget::new(d, m, n).unwrap();
        let mut rng = seeded_rng(seed);
        let rho = random_density(d, d.n(), &mut rng);
        let (_, eig) = mu_vector(&rho, target);
        let b = jacobian(&eig, target, &basis);
        let x = basis.to_coords(&rho).unwrap();
        let v = {
            let h = random_hermitian(d, seed ^ 0x5eed);
            let c = basis.to_coords(&h).unwrap();
            &c / c.norm()
        };
        let h = 1e-6;
        let (mp, _) = mu_vector(&basis.from_coords(&(&x + &v * h)).unwrap(), target);
        let (mm, _) = mu_vector(&basis.from_coords(&(&x - &v * h)).unwrap(), target);
        let predicted = &b * &v;
        for k in 0..mp.len() {
            let fd = (mp[k] - mm[k]) / (2.0 * h);
            prop_assert!((fd - predicted[k]).abs() <= 1e-5, "row {}: {} vs {}", k, fd, predicted[k]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn minimizer_descends_monotonically(seed in any::<u64>(), t in 0usize..4, k in 1usize..4) {
        let d = [dims(2, 2), dims(2, 3), dims(3, 3), dims(2, 4)][t];
        let mut rng = seeded_rng(seed);
        let rank = (d.n() - k).max(1);
        let w = random_density(d, rank, &mut rng);
        let p = projector_onto(&w.spectrum().top_vectors(rank));
        let a = ppt_core::hilbert::CMatrix::identity(d.n(), d.n()) - p;
        let start = ProductVector::random(d, seed.wrapping_add(1));
        let opts = MinimizeOptions { max_steps: 400, ..MinimizeOptions::default() };
        let (_, trace) = minimize_traced(&a, d, &start, &opts);
        prop_assert!(!trace.is_empty());
        let scale = trace[0].f.abs().max(1e-300);
        for w in trace.windows(2) {
            prop_assert!(w[1].f <= w[0].f + 1e-13 * scale, "{} -> {}", w[0].f, w[1].f);
        }
        for s in &trace {
            prop_assert!((s.lambda - s.f).abs() <= 1e-12);
        }
    }
}

const TARGETS: &[(usize, usize, usize, usize)] = &[
    (3, 3, 4, 4),
    (3, 3, 5, 5),
    (3, 3, 6, 5),
    (3, 3, 7, 6),
    (3, 3, 8, 8),
    (2, 4, 6, 6),
    (2, 4, 8, 5),
    (2, 3, 4, 5),
    (2, 2, 3, 4),
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(18))]

    #[test]
    fn search_outputs_are_certified_ppt(seed in any::<u64>(), t in 0..TARGETS.len()) {
        let (a, b, m, n) = TARGETS[t];
        let d = dims(a, b);
        let out = search_once(d, RankTarget::new(d, m, n).unwrap(), &SearchConfig::default(), seed);
        if out.status == SearchStatus::Converged {
            let st = out.state.expect("converged runs carry a state");
            let ev = eigenvalues_by_embedding(st.rho.as_matrix());
            let ev_pt = eigenvalues_by_embedding(st.rho.partial_transpose().as_matrix());
            prop_assert!(ev[0] >= -1e-9 && ev_pt[0] >= -1e-9);
            prop_assert!((st.rho.trace() - 1.0).abs() <= 1e-12);
            let count = |v: &[f64]| {
                let top = v.last().copied().unwrap();
                v.iter().filter(|&&x| x > 1e-8 * top).count()
            };
            prop_assert_eq!(st.ranks, (count(&ev), count(&ev_pt)));
            prop_assert!(st.residual <= SearchConfig::default().residual_tol);
        } else {
            prop_assert!(out.state.is_none());
        }
    }
}

#[test]
fn face_projector_invariants() {
    for &(a, b, m, n) in &TARGETS[..7] {
        let d = dims(a, b);
        let st = find_state(d, m, n, 11);
        let basis = HermitianBasis::canonical(d);
        let fp = face_projectors(&st, &basis).unwrap();
        for p in [&fp.p, &fp.q_bar] {
            assert!((p * p - p).amax() <= 1e-10);
            assert!((p - p.transpose()).amax() <= 1e-12);
        }
        assert_eq!(projector_rank(&fp.p), m * m);
        assert_eq!(projector_rank(&fp.q_bar), n * n);
        let x = basis.to_coords(&st.rho).unwrap();
        assert!((&fp.p * &x - &x).amax() <= 1e-10);
        assert!((&fp.q_bar * &x - &x).amax() <= 1e-10);

        let r1 = face_dimension(&fp);
        let r2 = face_dimension_alt(&fp);
        assert_eq!(r1.dim_f, r2.dim_f, "{a}x{b} ({m},{n})");
        let bound = (m * m + n * n) as i64 - (d.n() * d.n()) as i64;
        assert!(r1.dim_f as i64 >= bound.max(1));
    }
}

#[test]
fn face_dimension_is_basis_independent() {
    for &(a, b, m, n, seed) in &[(2, 3, 4, 5, 1u64), (3, 3, 6, 5, 2), (3, 3, 7, 7, 3)] {
        let d = dims(a, b);
        let st = find_state(d, m, n, seed);
        let canonical = face_dimension(&face_projectors(&st, &HermitianBasis::canonical(d)).unwrap());
        let rot = random_orthogonal(d.real_dim(), seed + 100);
        let rotated = HermitianBasis::rotated(d, rot).unwrap();
        let other = face_dimension(&face_projectors(&st, &rotated).unwrap());
        assert_eq!(canonical.dim_f, other.dim_f);
        assert!((canonical.eigen_gap - other.eigen_gap).abs() < 1e-8);
    }
}

#[test]
fn searches_are_deterministic() {
    let d = dims(3, 3);
    let t = RankTarget::new(d, 5, 5).unwrap();
    let cfg = SearchConfig::default();
    let a = search_once(d, t, &cfg, 42);
    let b = search_once(d, t, &cfg, 42);
    assert_eq!(a.history, b.history);
    assert_eq!(
        a.state.as_ref().unwrap().rho.as_matrix(),
        b.state.as_ref().unwrap().rho.as_matrix()
    );
    let c = search_once(d, t, &cfg, 43);
    assert_ne!(a.history, c.history);
}

#[test]
fn classification_is_deterministic() {
    let st = find_state(dims(3, 3), 5, 5, 4);
    let cfg = ClassifyConfig {
        seed: 9,
        ..ClassifyConfig::default()
    };
    let a = classify_state(&st, &cfg).unwrap();
    let b = classify_state(&st, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn partial_transpose_swaps_ranks_and_keeps_face() {
    for &(m, n) in &[(6, 5), (7, 5), (8, 6)] {
        let st = find_state(dims(3, 3), m, n, 5);
        let pt = PptState::certify(&st.rho.partial_transpose()).unwrap();
        assert_eq!(pt.ranks, (n, m));
        let cfg = ClassifyConfig::default();
        let a = classify_state(&st, &cfg).unwrap();
        let b = classify_state(&pt, &cfg).unwrap();
        assert_eq!(a.dim_f, b.dim_f);
        assert_eq!(a.bound, b.bound);
        assert_eq!(a.local_ranks, b.local_ranks);
    }
}

#[test]
fn eigen_embedding_oracle_agrees_with_library() {
    let d = dims(2, 3);
    let h = random_hermitian(d, 3);
    let lib = h.spectrum().values;
    let ours = eigenvalues_by_embedding(h.as_matrix());
    let diff = DVector::from_vec(lib) - DVector::from_vec(ours);
    assert!(diff.amax() < 1e-12);
}
