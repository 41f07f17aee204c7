//! The library against independent computations: a naive enumeration with
//! factorial products, closed forms, and values frozen from 40-digit
//! arithmetic.

#![allow(clippy::excessive_precision)]

use klconc::exact::enumerate_law;
use klconc::montecarlo::{mc_moment, mc_tail, McRun};
use klconc::{g_func, Distribution};

/// (z, prob) of every composition, no merging, no logs.
fn naive_law(n: u64, p: &[f64]) -> Vec<(f64, f64)> {
    fn fact(x: u64) -> f64 {
        (1..=x).map(|i| i as f64).product()
    }
    fn rec(n: u64, p: &[f64], prefix: &mut Vec<u64>, out: &mut Vec<(f64, f64)>) {
        let left = n - prefix.iter().sum::<u64>();
        if prefix.len() + 1 == p.len() {
            prefix.push(left);
            let nf = n as f64;
            let mut prob = fact(n);
            let mut z = 0.0;
            for (&x, &pi) in prefix.iter().zip(p) {
                prob *= pi.powi(x as i32) / fact(x);
                if x > 0 {
                    z += x as f64 * (x as f64 / (nf * pi)).ln();
                }
            }
            out.push((2.0 * z, prob));
            prefix.pop();
            return;
        }
        for x in 0..=left {
            prefix.push(x);
            rec(n, p, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, p, &mut Vec::new(), &mut out);
    out
}

fn cases() -> Vec<Vec<f64>> {
    vec![
        vec![0.5, 0.5],
        vec![0.1, 0.9],
        vec![0.2, 0.3, 0.5],
        vec![1.0 / 3.0; 3],
        vec![0.1, 0.2, 0.3, 0.4],
        vec![0.05, 0.05, 0.45, 0.45],
    ]
}

#[test]
fn enumeration_matches_naive_oracle() {
    for probs in cases() {
        let p = Distribution::new(probs.clone()).unwrap();
        for n in 1..=8 {
            let law = enumerate_law(n, &p, 10_000_000).unwrap();
            let naive = naive_law(n, &probs);
            let mass: f64 = naive.iter().map(|a| a.1).sum();
            assert!((mass - 1.0).abs() < 1e-13);
            let mean: f64 = naive.iter().map(|(z, q)| z * q).sum();
            let var: f64 = naive.iter().map(|(z, q)| (z - mean).powi(2) * q).sum();
            assert!((law.mean() - mean).abs() < 1e-12, "{probs:?} n={n}");
            assert!((law.variance() - var).abs() < 1e-11, "{probs:?} n={n}");
            for &(z, _) in &naive {
                // Just below each atom, clear of rounding ties between
                // outcomes with equal Z.
                let t = z - 1e-9;
                let want: f64 = naive.iter().filter(|a| a.0 >= t).map(|a| a.1).sum();
                assert!((law.tail(t) - want).abs() < 1e-12, "{probs:?} n={n} t={t}");
            }
        }
    }
}

#[test]
fn three_fair_coins_closed_form() {
    // Outcomes {0,3} and {1,2}: Z = 6 ln 2 with prob 1/4, else 2(2 ln(4/3) - ln(3/2)).
    let p = Distribution::<f64>::uniform(2).unwrap();
    let law = enumerate_law(3, &p, 100).unwrap();
    let lo = 2.0 * (2.0 * (4.0f64 / 3.0).ln() - 1.5f64.ln());
    let hi = 6.0 * 2f64.ln();
    let mean = 0.25 * hi + 0.75 * lo;
    assert_eq!(law.atoms().len(), 2);
    assert!((law.mean() - mean).abs() < 1e-14);
    assert!((2.0 * g_func(3, &p) - mean).abs() < 1e-14);
    assert!((law.tail(hi) - 0.25).abs() < 1e-15);
}

#[test]
fn frozen_high_precision_values() {
    let close = |a: f64, b: f64, tol: f64| assert!((a - b).abs() <= tol * b.abs(), "{a} vs {b}");
    close(
        g_func(10, &Distribution::uniform(3).unwrap()),
        1.0997931669847390013,
        1e-13,
    );
    let p = Distribution::new(vec![0.2, 0.3, 0.5]).unwrap();
    close(g_func(50, &p), 1.0167458563561408865, 1e-12);
    close(
        g_func(1000, &Distribution::uniform(2).unwrap()),
        0.50025033421188604992,
        1e-11,
    );

    let law = enumerate_law(5, &p, 1000).unwrap();
    close(law.tail(3.0), 0.31075, 1e-13);
    close(law.variance(), 4.2323720792612035521, 1e-12);
    close(law.log_mgf(0.1, true), 0.023108753722221973298, 1e-11);
}

#[test]
fn monte_carlo_agrees_with_exact_across_replications() {
    let p = Distribution::new(vec![0.2, 0.3, 0.5]).unwrap();
    let n = 6;
    let law = enumerate_law(n, &p, 10_000).unwrap();
    let t = law.atoms()[law.atoms().len() / 2].z;
    let (tail, mean) = (law.tail(t), law.mean());
    let mut tail_ok = 0;
    let mut mean_ok = 0;
    for seed in 0..100 {
        let run = McRun::new(2000, 1000 + seed);
        if mc_tail(n, &p, t, &run).unwrap().z_score(tail) <= 5.0 {
            tail_ok += 1;
        }
        if mc_moment(n, &p, 1, false, &run).unwrap().z_score(mean) <= 5.0 {
            mean_ok += 1;
        }
    }
    assert!(tail_ok >= 99, "{tail_ok}/100");
    assert!(mean_ok >= 99, "{mean_ok}/100");
}
