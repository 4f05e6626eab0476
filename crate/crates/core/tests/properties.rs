mod common;

use common::*;
use ndarray::{Array1, Array2};
use nescope_core::data::{presets, sample_gmm, InputMatrix};
use nescope_core::loo::LooProblem;
use nescope_core::metrics::{
    db_index, entropy, neighborhood_preservation, roc_auc, spearman_test, wcdr, wilks_lambda,
};
use nescope_core::scores::{
    largevis_total_loss, singularity_hessian_largevis, singularity_hessian_tsne,
    singularity_hessian_umap, singularity_scores, umap_total_loss, EdgeSet, PerturbationConfig,
    PerturbationScorer, PrescreenConfig, SingularityMethod,
};
use nescope_core::tsne::{
    run_tsne_with_similarity, similarity_matrix, total_gradient, total_loss, SimilarityMatrix,
    TsneConfig,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn instance(seed: u64, n: usize) -> (Array2<f64>, SimilarityMatrix) {
    let mut r = rng(seed);
    let y = random_points(&mut r, n, 3.0);
    let v = random_similarity(&mut r, n);
    (y, v)
}

fn permuted(
    y: &Array2<f64>,
    v: &SimilarityMatrix,
    perm: &[usize],
) -> (Array2<f64>, SimilarityMatrix) {
    let n = perm.len();
    let yp = Array2::from_shape_fn((n, 2), |(i, c)| y[[perm[i], c]]);
    let vv = v.values();
    let vp = Array2::from_shape_fn((n, n), |(i, j)| vv[[perm[i], perm[j]]]);
    (yp, SimilarityMatrix::from_values(vp).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn total_gradient_matches_loss_differences(seed in any::<u64>(), n in 3usize..=12) {
        let (y, v) = instance(seed, n);
        let g = total_gradient(&y, &v).unwrap();
        for i in 0..n {
            let p = [y[[i, 0]], y[[i, 1]]];
            let fd = grad_fd(|q| total_loss(&with_row(&y, i, q), &v).unwrap(), p, 1e-5);
            let e = rel_err_vec(&[g[[i, 0]], g[[i, 1]]], &fd);
            prop_assert!(e < 1e-5, "row {i}: {e}");
        }
    }

    #[test]
    fn loo_gradient_matches_loss_differences(seed in any::<u64>(), n in 2usize..=12) {
        let mut r = rng(seed);
        let y = random_points(&mut r, n, 3.0);
        let u: Vec<f64> = (0..n).map(|_| r.random_range(0.0..1.0 / n as f64)).collect();
        let p = LooProblem::from_embedding(&y, None, u).unwrap();
        let at = [r.random_range(-4.0..4.0), r.random_range(-4.0..4.0)];
        let fd = grad_fd(|q| p.loss(q), at, 1e-5);
        let e = rel_err_vec(&p.gradient(at), &fd);
        prop_assert!(e < 1e-5, "{e}");
    }

    #[test]
    fn tsne_hessian_matches_gradient_differences(seed in any::<u64>(), n in 3usize..=12) {
        let (y, v) = instance(seed, n);
        let i = (seed % n as u64) as usize;
        let h = singularity_hessian_tsne(&y, &v, i).unwrap();
        let fd = fd_jacobian(
            |q| {
                let g = total_gradient(&with_row(&y, i, q), &v).unwrap();
                [g[[i, 0]], g[[i, 1]]]
            },
            [y[[i, 0]], y[[i, 1]]],
            1e-5,
        );
        let e = rel_err_2x2(sym_to_array(&h.matrix), fd);
        prop_assert!(e < 1e-5, "{e}");
    }

    #[test]
    fn umap_hessian_matches_loss_differences(
        seed in any::<u64>(),
        n in 3usize..=12,
        a in 0.5f64..2.0,
        b in 0.6f64..1.5,
    ) {
        let (y, v) = instance(seed, n);
        let i = (seed % n as u64) as usize;
        let h = singularity_hessian_umap(&y, &v, i, a, b).unwrap();
        let fd = fd_hessian(
            |q| umap_total_loss(&with_row(&y, i, q), &v, a, b).unwrap(),
            [y[[i, 0]], y[[i, 1]]],
            1e-4,
        );
        let e = rel_err_2x2(sym_to_array(&h.matrix), fd);
        prop_assert!(e < 1e-4, "{e}");
    }

    #[test]
    fn largevis_hessian_matches_objective_differences(
        seed in any::<u64>(),
        n in 3usize..=12,
        gamma in 0.5f64..10.0,
    ) {
        let (y, v) = instance(seed, n);
        let mut r = rng(seed ^ 0x5eed);
        let edges = EdgeSet::from_pairs(
            (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).filter(|_| r.random_bool(0.5)),
        );
        let i = (seed % n as u64) as usize;
        let h = singularity_hessian_largevis(&y, &v, &edges, gamma, i).unwrap();
        let fd = fd_hessian(
            |q| largevis_total_loss(&with_row(&y, i, q), &v, &edges, gamma).unwrap(),
            [y[[i, 0]], y[[i, 1]]],
            1e-4,
        );
        let e = rel_err_2x2(sym_to_array(&h.matrix), fd);
        prop_assert!(e < 1e-4, "{e}");
    }

    #[test]
    fn hessian_rotates_by_conjugation(seed in any::<u64>(), n in 3usize..=12, angle in 0.0f64..std::f64::consts::TAU) {
        let (y, v) = instance(seed, n);
        let rot = rotation(angle);
        let yr = rotate_rows(&y, rot);
        for i in 0..n {
            let h = singularity_hessian_tsne(&y, &v, i).unwrap().matrix;
            let hr = sym_to_array(&singularity_hessian_tsne(&yr, &v, i).unwrap().matrix);
            let want = sym_to_array(&h.conjugate(rot));
            prop_assert!(rel_err_2x2(hr, want) < 1e-8);
        }
    }

    #[test]
    fn singularity_scores_are_permutation_equivariant(seed in any::<u64>(), n in 3usize..=12) {
        let (y, v) = instance(seed, n);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng(seed.wrapping_add(1)));
        let (yp, vp) = permuted(&y, &v, &perm);
        let methods = [
            SingularityMethod::Tsne,
            SingularityMethod::Umap { a: 1.577, b: 0.895 },
        ];
        for m in &methods {
            let s = singularity_scores(&y, &v, m).unwrap();
            let sp = singularity_scores(&yp, &vp, m).unwrap();
            for (k, &p) in perm.iter().enumerate() {
                let (a, b) = (sp.scores[k], s.scores[p]);
                prop_assert!(a == b || (a - b).abs() <= 1e-9 * b.abs(), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn similarity_is_symmetric_and_normalized(seed in any::<u64>(), n in 4usize..40) {
        let mut r = rng(seed);
        let x = InputMatrix::new(Array2::from_shape_fn((n, 3), |_| r.random_range(-5.0..5.0))).unwrap();
        let perp = 1.5 + (n as f64 - 2.0) / 4.0;
        let v = similarity_matrix(&x, perp, 1e-5).unwrap();
        let vv = v.values();
        prop_assert!((vv.sum() - 1.0).abs() < 1e-12);
        for i in 0..n {
            prop_assert_eq!(vv[[i, i]], 0.0);
            for j in 0..n {
                prop_assert_eq!(vv[[i, j]], vv[[j, i]]);
            }
        }
    }

    #[test]
    fn roc_is_invariant_under_monotone_maps(seed in any::<u64>(), n in 4usize..200) {
        let mut r = rng(seed);
        let s: Vec<f64> = (0..n).map(|_| r.random_range(-3.0..3.0)).collect();
        let mut l: Vec<bool> = (0..n).map(|_| r.random_bool(0.4)).collect();
        l[0] = true;
        l[1] = false;
        let base = roc_auc(&s, &l).unwrap();
        let cubed: Vec<f64> = s.iter().map(|x| x.powi(3)).collect();
        let affine: Vec<f64> = s.iter().map(|x| 2.5 * x + 7.0).collect();
        let logistic: Vec<f64> = s.iter().map(|x| 1.0 / (1.0 + (-x).exp())).collect();
        for t in [cubed, affine, logistic] {
            prop_assert_eq!(roc_auc(&t, &l).unwrap(), base);
        }
        let inv: Vec<f64> = s.iter().map(|x| -x).collect();
        prop_assert!((roc_auc(&inv, &l).unwrap() - (1.0 - base)).abs() < 1e-12);
    }

    #[test]
    fn spearman_is_symmetric_and_rank_based(seed in any::<u64>(), n in 5usize..100) {
        let mut r = rng(seed);
        let a: Vec<f64> = (0..n).map(|_| r.random_range(0.0..1.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| r.random_range(0.0..1.0)).collect();
        let ab = spearman_test(&a, &b).unwrap();
        let ba = spearman_test(&b, &a).unwrap();
        prop_assert!((ab.rho - ba.rho).abs() < 1e-12);
        let ea: Vec<f64> = a.iter().map(|x| x.exp()).collect();
        prop_assert!((spearman_test(&ea, &b).unwrap().rho - ab.rho).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&ab.p_value));
    }

    #[test]
    fn cluster_indices_are_bounded_and_invariant(
        seed in any::<u64>(),
        n in 6usize..80,
        k in 2usize..5,
        angle in 0.0f64..std::f64::consts::TAU,
        scale in 0.1f64..10.0,
    ) {
        let mut r = rng(seed);
        let y = random_points(&mut r, n, 4.0);
        let mut labels: Vec<usize> = (0..n).map(|i| i % k).collect();
        labels.shuffle(&mut r);
        let w = wcdr(&y, &labels).unwrap();
        let lam = wilks_lambda(&y, &labels).unwrap();
        let db = db_index(&y, &labels).unwrap();
        prop_assert!((0.0..=1.0).contains(&w));
        prop_assert!((0.0..=1.0).contains(&lam));
        prop_assert!(db >= 0.0);

        let mut moved = rotate_rows(&y, rotation(angle)) * scale;
        moved.column_mut(0).mapv_inplace(|c| c + 3.0);
        prop_assert!((wcdr(&moved, &labels).unwrap() - w).abs() < 1e-9);
        prop_assert!((wilks_lambda(&moved, &labels).unwrap() - lam).abs() < 1e-9);
        prop_assert!((db_index(&moved, &labels).unwrap() - db).abs() < 1e-9 * db.max(1.0));

        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut r);
        let yp = Array2::from_shape_fn((n, 2), |(i, c)| y[[perm[i], c]]);
        let lp: Vec<usize> = perm.iter().map(|&p| labels[p]).collect();
        prop_assert!((wcdr(&yp, &lp).unwrap() - w).abs() < 1e-12);
        prop_assert!((db_index(&yp, &lp).unwrap() - db).abs() < 1e-12 * db.max(1.0));
    }

    #[test]
    fn entropy_is_permutation_invariant(seed in any::<u64>(), k in 1usize..12) {
        let mut r = rng(seed);
        let raw: Vec<f64> = (0..k).map(|_| r.random_range(0.0..1.0)).collect();
        let s: f64 = raw.iter().sum();
        let mut p: Vec<f64> = raw.iter().map(|x| x / s).collect();
        let e = entropy(&p).unwrap();
        p.shuffle(&mut r);
        prop_assert!((entropy(&p).unwrap() - e).abs() < 1e-12);
        prop_assert!(e >= 0.0 && e <= (k as f64).ln() + 1e-12);
    }

    #[test]
    fn neighborhood_preservation_ignores_similarity_transforms(
        seed in any::<u64>(),
        n in 12usize..60,
        angle in 0.0f64..std::f64::consts::TAU,
        scale in 0.1f64..10.0,
    ) {
        let mut r = rng(seed);
        let x = Array2::from_shape_fn((n, 4), |_| r.random_range(-3.0..3.0));
        let y = random_points(&mut r, n, 3.0);
        let base = neighborhood_preservation(&x, &y, Some(5)).unwrap();
        let mut moved = rotate_rows(&y, rotation(angle)) * scale;
        let shift = Array1::from(vec![-2.0, 5.0]);
        moved += &shift;
        let m = neighborhood_preservation(&x, &moved, Some(5)).unwrap();
        for (a, b) in base.scores.iter().zip(&m.scores) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn prescreened_scores_equal_full_scores(seed in 0u64..1000) {
        let x = sample_gmm(&presets::two_gmm_separated(), 60, seed).unwrap();
        let v = similarity_matrix(&x, 10.0, 1e-5).unwrap();
        let cfg = TsneConfig { perplexity: 10.0, max_iter: 300, seed, ..TsneConfig::default() };
        let y = run_tsne_with_similarity(&v, &cfg).unwrap().y;
        let full = PerturbationScorer::new(&x, &y, &v, &PerturbationConfig::default())
            .unwrap()
            .scores()
            .unwrap();
        let pcfg = PerturbationConfig {
            prescreen: Some(PrescreenConfig { min_pts: 6, eps: None }),
            ..PerturbationConfig::default()
        };
        let screened = PerturbationScorer::new(&x, &y, &v, &pcfg).unwrap().scores().unwrap();
        for i in 0..x.nrows() {
            if !screened.masked[i] {
                prop_assert_eq!(screened.scores[i], full.scores[i]);
            } else {
                prop_assert!(screened.scores[i].is_nan());
            }
        }
    }
}
