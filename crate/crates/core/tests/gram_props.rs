mod common;

use cvcluster::gram::{assemble_unitary, check_cluster_conditions, factor_gram, permute_columns, CLUSTER_TOL};
use cvcluster::graph::{connected_graphs, excess_noise};
use cvcluster::linalg::unitarity_residual;
use cvcluster::{derive_gram, measure_nullifiers, synthesize_gram, FactorStrategy, Graph, PaperFixture, RMat};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[test]
fn recursive_pipeline_on_all_small_graphs() {
    for n in 1..=6 {
        for g in connected_graphs(n) {
            let gram = derive_gram(&g);
            let (commute, complement) = gram.identity_residuals(&g);
            assert!(commute <= 1e-12 && complement <= 1e-12, "{g:?}: {commute:e} {complement:e}");
            let res = synthesize_gram(&g, &FactorStrategy::Recursive, &vec![1.0; n]).unwrap();
            assert!(unitarity_residual(&res.u) <= 1e-12);
            assert!(check_cluster_conditions(&res.u, &g).unwrap() <= CLUSTER_TOL);
        }
    }
}

fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> RMat {
    let z = RMat::from_fn(n, n, |_, _| rng.sample(StandardNormal));
    let qr = z.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        let mut col = q.column_mut(j);
        col *= r[(j, j)].signum();
    }
    q
}

fn graph() -> impl Strategy<Value = Graph> {
    (2usize..=6, any::<u64>(), 0.0..1.0f64)
        .prop_map(|(n, seed, p)| common::random_connected_graph(n, p, &mut ChaCha8Rng::seed_from_u64(seed)))
}

proptest! {
    #[test]
    fn orthogonal_rotation_gives_another_cluster_circuit(g in graph(), seed in any::<u64>()) {
        let n = g.n();
        let gram = derive_gram(&g);
        let alpha = factor_gram(&gram, &FactorStrategy::Recursive).unwrap();
        let q = random_orthogonal(n, &mut ChaCha8Rng::seed_from_u64(seed));
        let rotated = alpha.rotated(&q);
        prop_assert!(rotated.gram_residual(&gram) <= 1e-12);
        let u = assemble_unitary(&g, &rotated).unwrap();
        prop_assert!(check_cluster_conditions(&u, &g).unwrap() <= CLUSTER_TOL);
    }

    #[test]
    fn permutation_rotation_carries_the_squeezing(
        g in graph(),
        seed in any::<u64>(),
        squeezing in prop::collection::vec(0.0..2.5f64, 6),
    ) {
        let n = g.n();
        let squeezing = &squeezing[..n];
        let mut perm: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let res = synthesize_gram(&g, &FactorStrategy::Recursive, squeezing).unwrap();
        let moved = permute_columns(&res, &perm).unwrap();
        let before = measure_nullifiers(&g, &res.prepare_state().unwrap()).unwrap();
        let after = measure_nullifiers(&g, &moved.prepare_state().unwrap()).unwrap();
        for (b, a) in before.variances.iter().zip(&after.variances) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn two_mode_circuit_excess_noise(r1 in 0.0..4.0f64, r2 in 0.0..4.0f64) {
        let g = PaperFixture::TwoMode.graph();
        let res = synthesize_gram(&g, &FactorStrategy::Paper(PaperFixture::TwoMode), &[r1, r2]).unwrap();
        let sim = measure_nullifiers(&g, &res.prepare_state().unwrap()).unwrap();
        let closed = excess_noise(&g, &res.u, &[r1, r2]).unwrap();
        let expected = [2.0 * (-2.0 * r1).exp(), 2.0 * (-2.0 * r2).exp()];
        for a in 0..2 {
            prop_assert!((sim.variances[a] - expected[a]).abs() <= 1e-9);
            prop_assert!((closed[a] - expected[a]).abs() <= 1e-9);
        }
    }
}
