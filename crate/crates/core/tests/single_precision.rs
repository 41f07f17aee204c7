use klconc::bounds::sanov_tail;
use klconc::{
    best_tail, enumerate_law, g_func, threshold_for_test, ConstantsConfig, DistributionF32, DistributionF64,
    ExactLawF32, Method,
};

#[test]
fn f32_tracks_f64() {
    let p32 = DistributionF32::new(vec![0.2, 0.3, 0.5]).unwrap();
    let p64 = DistributionF64::new(vec![0.2, 0.3, 0.5]).unwrap();
    for n in [1, 5, 40, 300] {
        let (a, b) = (g_func(n, &p32), g_func(n, &p64));
        assert!((f64::from(a) - b).abs() < 1e-4 * b.max(1.0), "n={n}: {a} vs {b}");
    }
    let law: ExactLawF32 = enumerate_law(6, &p32, 1000).unwrap();
    let law64 = enumerate_law(6, &p64, 1000).unwrap();
    assert!((f64::from(law.mean()) - law64.mean()).abs() < 1e-4);
    assert!((law.total_mass() - 1.0).abs() < 1e-5);
}

#[test]
fn f32_bounds_and_solver() {
    let cfg = ConstantsConfig::default();
    let p = DistributionF32::uniform(2).unwrap();
    let t: f32 = threshold_for_test(2, 2, 0.5, 0.05, Method::Sanov, &cfg, Some(&p)).unwrap();
    assert!((t - 8.188_689).abs() < 1e-4);
    assert!(sanov_tail(2, 2, t).unwrap() <= 0.05);
    let r = best_tail(2, 2, 0.5f32, 0.0, &cfg, Some(&p)).unwrap();
    assert_eq!(r.best.value, 1.0);
}
