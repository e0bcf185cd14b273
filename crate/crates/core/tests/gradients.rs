use ecgnet_core::gradcheck::{check_kernel, gating_case, kernel_suite, tiny_model_check, GradCheckConfig, KERNELS};
use ecgnet_core::seed;

#[test]
fn kernels_match_finite_differences_over_twenty_cases() {
    let results = kernel_suite(20, 2024, &GradCheckConfig::default()).unwrap();
    assert_eq!(results.len(), KERNELS.len() + 1);
    for r in &results {
        assert!(r.passed(), "{} failed: {r:?}", r.kernel);
    }
}

#[test]
fn gating_gradient_at_tight_tolerance() {
    let cfg = GradCheckConfig { rtol: 1e-5, ..Default::default() };
    for case in 0..5 {
        let mut rng = seed::rng(7, "gating-tight", &[case]);
        for check in gating_case(&mut rng, &cfg, 3, 8, 4).unwrap() {
            assert!(check.passed, "{check:?}");
        }
    }
}

#[test]
fn tiny_network_end_to_end() {
    let report = tiny_model_check(3, &GradCheckConfig::with_rtol(1e-3), None).unwrap();
    assert!(report.passed(), "{:#?}", report.failures());
    assert!(report.tensors.iter().any(|t| t.name == "gating.fc1.weights"));
    assert!(report.tensors.iter().any(|t| t.name == "bilstm_2.backward.recurrent_weights"));
}

#[test]
fn different_seeds_still_pass() {
    for seed in [1, 99] {
        let r = check_kernel("lstm", 5, seed, &GradCheckConfig::default()).unwrap();
        assert!(r.passed(), "{r:?}");
    }
}
