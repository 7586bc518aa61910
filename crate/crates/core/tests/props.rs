mod common;

use proptest::prelude::*;
use qgibbs::gibbs::discretized_metropolis;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metropolis_matrix_is_reversible(
        target in prop::collection::vec(1e-3f64..10.0, 3..40),
        sd in 0.05f64..3.0,
    ) {
        let nodes: Vec<f64> = (0..target.len()).map(|i| i as f64 * 0.2).collect();
        let chain = discretized_metropolis(&nodes, &target, sd).unwrap();
        prop_assert!(chain.balance_violation() < 1e-12);
        prop_assert!(chain.row_sum_error() < 1e-12);
        prop_assert!(chain.stationarity_residual() < 1e-10);
        prop_assert!(chain.matrix.iter().all(|p| *p >= 0.0));
    }
}
