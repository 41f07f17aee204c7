use klconc::bounds::{agrawal_tail, center_from_moments, center_from_tails, method_tail, rho, rho_inverse, sanov_tail};
use klconc::canonical::format_g17;
use klconc::exact::enumerate_law;
use klconc::{
    bernstein_phi, chain_decompose, chi2_raw_moment, f_func, g_func, kl_divergence, phi, threshold_for_test,
    z_statistic, ConstantsConfig, Counts, Distribution, Method,
};
use proptest::prelude::*;

fn distribution(k: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Distribution> {
    k.prop_flat_map(|k| prop::collection::vec(0.05f64..1.0, k))
        .prop_map(|w| Distribution::from_weights(&w).unwrap())
}

/// A distribution together with a count vector of the same length.
fn counts_and_p(k: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = (Counts, Distribution)> {
    distribution(k).prop_flat_map(|p| {
        let k = p.k();
        (prop::collection::vec(0u64..40, k), Just(p))
            .prop_filter("n >= 1", |(c, _)| c.iter().sum::<u64>() > 0)
            .prop_map(|(c, p)| (Counts::new(c).unwrap(), p))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn gibbs_inequality((x, p) in counts_and_p(2..=6)) {
        let d = kl_divergence(&x.frequencies(), &p).unwrap();
        prop_assert!(d >= 0.0);
        prop_assert!(z_statistic(&x, &p).unwrap() >= 0.0);
        prop_assert_eq!(kl_divergence(p.probs(), &p).unwrap(), 0.0);
    }

    #[test]
    fn chain_rule_identity((x, p) in counts_and_p(3..=6)) {
        let z = z_statistic(&x, &p).unwrap();
        let parts = chain_decompose(&x, &p).unwrap();
        prop_assert!(parts.binary >= 0.0 && parts.conditional >= -1e-12);
        prop_assert!((parts.total() - z).abs() <= 1e-12 * z.max(1.0), "z {} parts {:?}", z, parts);
    }

    #[test]
    fn bernstein_increases_to_phi(n in 1u64..500, x in 0.0f64..=1.0) {
        let b = bernstein_phi(n, x).unwrap();
        let b1 = bernstein_phi(n + 1, x).unwrap();
        let top = phi(x).unwrap();
        prop_assert!(b <= b1 + 1e-15, "B_{} = {} > B_{} = {}", n, b, n + 1, b1);
        prop_assert!(b1 <= top + 1e-15);
        prop_assert!(b >= 0.0);
    }

    #[test]
    fn twice_g_is_mean_of_exact_law(p in distribution(2..=4), n in 1u64..=10) {
        let law = enumerate_law(n, &p, 1_000_000).unwrap();
        prop_assert!((law.mean() - 2.0 * g_func(n, &p)).abs() < 1e-10);
    }

    #[test]
    fn f_is_bounded_and_nonincreasing(p in distribution(2..=5), n in 1u64..300) {
        let k = p.k() as f64;
        let f = f_func(n, &p);
        let f1 = f_func(n + 1, &p);
        prop_assert!(f >= 0.0);
        prop_assert!(f <= (k - 1.0) / n as f64 + 1e-15);
        prop_assert!(f1 <= f + 1e-15);
    }

    #[test]
    fn chi2_moments_grow(df in 1u64..40, m in 1u32..12) {
        let a: f64 = chi2_raw_moment(df, m).unwrap();
        let b: f64 = chi2_raw_moment(df, m + 1).unwrap();
        // Lyapunov: the m-th root of E[X^m] is nondecreasing in m.
        prop_assert!(a.powf(1.0 / f64::from(m)) <= b.powf(1.0 / f64::from(m + 1)) * (1.0 + 1e-12));
        // E[X^{m+1}] = E[X^m]·(df + 2m).
        prop_assert!((b - a * (df + 2 * u64::from(m)) as f64).abs() <= 1e-12 * b);
    }

    #[test]
    fn agrawal_boundary_is_one(k in 2usize..50) {
        let edge = 2.0 * (k - 1) as f64;
        prop_assert!((agrawal_tail(k, edge).unwrap().unwrap() - 1.0).abs() < 1e-12);
        prop_assert!(agrawal_tail(k, edge * (1.0 - 1e-9)).unwrap().is_none());
        prop_assert!(agrawal_tail(k, edge + 1.0).unwrap().unwrap() < 1.0);
    }

    #[test]
    fn centering_maps_are_monotone(a in 0.0f64..100.0, b in 0.0f64..10.0, da in 0.0f64..10.0, db in 0.0f64..1.0) {
        for map in [center_from_moments::<f64>, center_from_tails::<f64>] {
            let lo = map(a, b).unwrap();
            let hi = map(a + da, b + db).unwrap();
            prop_assert!(lo.nu <= hi.nu && lo.c <= hi.c);
        }
    }

    #[test]
    fn rho_inverse_inverts(delta in 1e-12f64..1.0, v in 1e-3f64..1e6, c in 1e-3f64..1e3) {
        let eps = rho_inverse(delta, v, c).unwrap();
        let at = rho(eps, v, c).unwrap();
        prop_assert!(at <= delta * (1.0 + 1e-12));
        prop_assert!(rho(eps * (1.0 - 1e-9), v, c).unwrap() > delta * (1.0 - 1e-9));
    }

    #[test]
    fn sanov_tail_is_nonincreasing(n in 1u64..5000, k in 2usize..20, t in 0.0f64..500.0, dt in 0.0f64..50.0) {
        let a: f64 = sanov_tail(n, k, t).unwrap();
        let b: f64 = sanov_tail(n, k, t + dt).unwrap();
        prop_assert!(b <= a);
    }

    #[test]
    fn solver_brackets_the_threshold(n in 1u64..2000, k in 2usize..8, delta in 0.001f64..0.5) {
        let cfg = ConstantsConfig::default();
        let alpha = 1.0 / k as f64;
        let p = Distribution::uniform(k).unwrap();
        for method in Method::ALL {
            let t = threshold_for_test(n, k, alpha, delta, method, &cfg, Some(&p)).unwrap();
            let at = method_tail(method, n, k, alpha, t, &cfg, Some(&p)).unwrap();
            let before = method_tail(method, n, k, alpha, t - 1e-6, &cfg, Some(&p)).unwrap();
            prop_assert!(at <= delta, "{} t {} bound {}", method, t, at);
            prop_assert!(before > delta, "{} t {} bound before {}", method, t, before);
        }
    }

    #[test]
    fn exact_law_is_a_law(p in distribution(2..=4), n in 1u64..=9, t in -1.0f64..1.0, s in 0.0f64..3.0) {
        let law = enumerate_law(n, &p, 1_000_000).unwrap();
        prop_assert!((law.total_mass() - 1.0).abs() < 1e-10);
        prop_assert!(law.atoms().windows(2).all(|w| w[0].z < w[1].z));
        prop_assert_eq!(law.tail(0.0), 1.0);
        prop_assert!(law.tail(s + 1.0) <= law.tail(s));
        prop_assert_eq!(law.log_mgf(0.0, true), 0.0);
        prop_assert!(law.log_mgf(t, true) >= -1e-12);
        // Convexity at the midpoint.
        let (a, b) = (law.log_mgf(t, true), law.log_mgf(-t / 2.0, true));
        prop_assert!(law.log_mgf(t / 4.0, true) <= (a + b) / 2.0 + 1e-12);
    }

    #[test]
    fn g17_round_trips(x in prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL) {
        let s = format_g17(x);
        prop_assert_eq!(s.parse::<f64>().unwrap(), x);
    }
}
