use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use starmod::constructions::{self, FellBundleFinite};
use starmod::{structure, CStarAlgebra};

fn pattern(k: usize) -> impl Strategy<Value = Vec<bool>> {
    proptest::collection::vec(any::<bool>(), k).prop_filter("nonzero", |p| p.iter().any(|&b| b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn seminorm_of_star_swaps_sides(seed in any::<u64>(), dims in proptest::collection::vec(1usize..=2, 1..=3)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let alg = CStarAlgebra::new(&dims, &vec![1.0; dims.len()]).unwrap();
        let e = constructions::multiplication_module(&alg).unwrap();
        let x = e.random_element(&mut rng);
        let xs = e.star(&x).unwrap();
        prop_assert!((e.seminorm_r(&xs) - e.seminorm_l(&x)).abs() <= 1e-12 * (1.0 + e.seminorm_l(&x)));
    }

    #[test]
    fn direct_sum_round_trip(pats in proptest::collection::vec(pattern(3), 1..=3)) {
        let alg = CStarAlgebra::new(&[2, 1, 1], &[1.0, 1.0, 2.0]).unwrap();
        let projs: Vec<_> = pats.iter().map(|p| constructions::projection_from_pattern(&alg, p)).collect();
        let e = constructions::direct_sum_module(&alg, &projs).unwrap();
        let d = structure::decompose_local(&e).unwrap();
        let got = structure::block_multiplicities(&alg, &d.projections, 1e-9).unwrap();
        let want: Vec<usize> = (0..3).map(|k| pats.iter().filter(|p| p[k]).count()).collect();
        prop_assert_eq!(got, want);
        prop_assert!(d.check.passed(1e-8));
    }

    #[test]
    fn fell_dims_recovered(dims in proptest::collection::vec(0usize..=3, 1..=4)) {
        let bundle = FellBundleFinite::standard(&dims).unwrap();
        let e = constructions::fell_bundle_module(&bundle).unwrap();
        prop_assert_eq!(constructions::fell_decompose(&e).unwrap().bundle.fiber_dims, dims);
    }

    #[test]
    fn scenario_parser_never_panics(s in "\\PC{0,200}") {
        let _ = starmod::runner::Scenario::from_str(&s);
    }

    #[test]
    fn bimodule_json_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::Rng;
        let n = rng.random_range(1..=3);
        let g = nalgebra::DMatrix::<f64>::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let gram = &g * g.transpose() + nalgebra::DMatrix::<f64>::identity(n, n);
        let alg = CStarAlgebra::full_matrix(2).unwrap();
        let e = constructions::tensor_bimodule(&alg, &[0], &gram).unwrap();
        let text = serde_json::to_string(&starmod::io::bimodule_to_json(&e)).unwrap();
        let back = starmod::io::parse_bimodule_str(&text).unwrap();
        prop_assert_eq!(back.dim(), e.dim());
        for (p, q) in back.pairing_tensor().iter().zip(e.pairing_tensor()) {
            prop_assert!((p - q).camax() <= 1e-15);
        }
    }
}
