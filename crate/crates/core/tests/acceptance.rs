//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use klconc::bounds::{method_tail, sanov_tail};
use klconc::exact::enumerate_law;
use klconc::montecarlo::{mc_moment, mc_tail, McRun};
use klconc::special::ln_choose;
use klconc::verify::{chain_rule_random, verify, GridSpec, PShape, Property, VerifyReport};
use klconc::{g_func, threshold_for_test, to_canonical_string, ConstantsConfig, Distribution, Method};

struct Outcome {
    ok: bool,
    detail: String,
}

fn from_reports(reports: &[VerifyReport]) -> Outcome {
    let ok = reports.iter().all(|r| r.passed && r.cells_checked > 0);
    let detail = reports
        .iter()
        .map(|r| {
            let slack = r.min_slack.map_or("-".into(), |s| format!("{s:.3e}"));
            let err = r.max_abs_error.map_or("-".into(), |e| format!("{e:.3e}"));
            format!(
                "{}: {} checked, {} failed, min slack {slack}, max err {err}",
                r.property, r.cells_checked, r.failure_count
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    Outcome { ok, detail }
}

/// The enumerable grid without Monte Carlo cells.
fn exact_grid() -> GridSpec {
    GridSpec {
        mc_n_values: Vec::new(),
        ..GridSpec::default()
    }
}

fn c1_oracle_identity(cfg: &ConstantsConfig) -> Outcome {
    let g = exact_grid();
    assert_eq!(g.p_shapes.len(), 8);
    from_reports(&[verify(Property::BernsteinMean, &g, cfg).unwrap()])
}

fn c2_chain_rule() -> Outcome {
    from_reports(&[chain_rule_random(1000, 2024).unwrap()])
}

fn c3_f_properties(cfg: &ConstantsConfig) -> Outcome {
    let g = GridSpec {
        p_shapes: vec![PShape::Uniform, PShape::Geometric(0.5)],
        f_n_max: 500,
        grad_n_max: 2000,
        ..exact_grid()
    };
    from_reports(&[
        verify(Property::FMonotoneAndBound, &g, cfg).unwrap(),
        verify(Property::DiscGradient, &g, cfg).unwrap(),
    ])
}

fn c4_domination(cfg: &ConstantsConfig) -> Outcome {
    let g = exact_grid();
    let reports = [
        verify(Property::SanovDominates, &g, cfg).unwrap(),
        verify(Property::AgrawalDominates, &g, cfg).unwrap(),
    ];
    let mut out = from_reports(&reports);
    out.ok &= reports.iter().all(|r| r.min_slack.is_some_and(|s| s >= -1e-12));
    out
}

fn c5_binary_mgf(cfg: &ConstantsConfig) -> Outcome {
    let g = GridSpec {
        binary_n_max: 2000,
        ..exact_grid()
    };
    from_reports(&[verify(Property::BinaryMgf, &g, cfg).unwrap()])
}

fn c6_main_envelope(cfg: &ConstantsConfig) -> Outcome {
    from_reports(&[verify(Property::MainMgfEnvelope, &exact_grid(), cfg).unwrap()])
}

fn c7_g_near_half_df(cfg: &ConstantsConfig) -> Outcome {
    let p = Distribution::<f64>::uniform(2).unwrap();
    let n = klconc::bounds::g_half_df_threshold(2, 0.5).unwrap();
    let dev = (g_func(n, &p) - 0.5).abs();
    let chi = verify(Property::Chi2Limit, &exact_grid(), cfg).unwrap();
    let mut out = from_reports(&[chi]);
    out.ok &= n == 363 && dev <= 1.0;
    out.detail = format!("n = {n}, |g - 1/2| = {dev:.3e}; {}", out.detail);
    out
}

fn c8_g_subgaussian(cfg: &ConstantsConfig) -> Outcome {
    let g = GridSpec {
        g_tail_k_values: vec![2, 3],
        ..exact_grid()
    };
    from_reports(&[verify(Property::GSubgaussianTail, &g, cfg).unwrap()])
}

fn c9_raw_moments(cfg: &ConstantsConfig) -> Outcome {
    let g = GridSpec {
        moment_max: 10,
        ..exact_grid()
    };
    assert_eq!(cfg.C_agrawal_delta, 400.0);
    from_reports(&[verify(Property::RawMomentGrowth, &g, cfg).unwrap()])
}

fn c10_mc_fidelity() -> Outcome {
    let m = 100_000;
    let mut worst: f64 = 0.0;
    let mut checks = 0;
    let shapes = [PShape::Uniform, PShape::Geometric(0.5), PShape::Dirichlet(1)];
    let mut seed = 100;
    for k in [2usize, 3, 4] {
        for shape in shapes {
            let p = shape.build(k).unwrap();
            for n in [5u64, 12] {
                let law = enumerate_law(n, &p, 10_000_000).unwrap();
                let mean = law.mean();
                let atoms = law.atoms();
                let t_mid = atoms[atoms.len() / 2].z;
                for t in [mean, t_mid] {
                    seed += 1;
                    let est = mc_tail(n, &p, t, &McRun::new(m, seed)).unwrap();
                    worst = worst.max(est.z_score(law.tail(t)));
                    checks += 1;
                }
                seed += 1;
                let raw = mc_moment(n, &p, 1, false, &McRun::new(m, seed)).unwrap();
                worst = worst.max(raw.z_score(mean));
                seed += 1;
                let c2 = mc_moment(n, &p, 2, true, &McRun::new(m, seed)).unwrap();
                worst = worst.max(c2.z_score(law.moment(2, true)));
                checks += 2;
            }
        }
    }
    let p = Distribution::<f64>::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
    let json = |threads: usize| {
        let run = McRun::new(m, 42).with_threads(threads);
        let est = mc_tail(40, &p, 3.0, &run).unwrap();
        to_canonical_string(&est).unwrap()
    };
    let base = json(1);
    let identical = [2, 3, 8].iter().all(|&t| json(t) == base);
    Outcome {
        ok: worst <= 5.0 && identical,
        detail: format!(
            "{checks} estimates, worst {worst:.2} std errors; identical JSON across 1/2/3/8 threads: {identical}"
        ),
    }
}

fn c11_threshold_solver(cfg: &ConstantsConfig) -> Outcome {
    let cases: Vec<(u64, usize, f64, Distribution)> = vec![
        (2, 2, 0.5, Distribution::uniform(2).unwrap()),
        (20, 3, 0.2, Distribution::new(vec![0.2, 0.3, 0.5]).unwrap()),
        (100, 4, 0.1, Distribution::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap()),
        (1000, 6, 0.05, PShape::MinMass(0.05).build(6).unwrap()),
    ];
    let mut ok = true;
    let mut worst_rel: f64 = 0.0;
    let mut checks = 0;
    for (n, k, alpha, p) in &cases {
        for delta in [0.1, 0.05, 0.01] {
            for method in Method::ALL {
                let t = threshold_for_test(*n, *k, *alpha, delta, method, cfg, Some(p)).unwrap();
                let at = method_tail(method, *n, *k, *alpha, t, cfg, Some(p)).unwrap();
                let before = method_tail(method, *n, *k, *alpha, t - 1e-6, cfg, Some(p)).unwrap();
                checks += 1;
                if !(at <= delta && before > delta) {
                    ok = false;
                    eprintln!("  threshold {method} n={n} k={k} delta={delta}: t={t} bound={at} before={before}");
                }
                if method == Method::Sanov {
                    let closed = 2.0 * (ln_choose::<f64>(n + *k as u64 - 1, *k as u64 - 1) - delta.ln());
                    worst_rel = worst_rel.max((t - closed).abs() / closed);
                    assert!(sanov_tail(*n, *k, t).unwrap() <= delta);
                }
            }
        }
    }
    Outcome {
        ok: ok && worst_rel <= 1e-9,
        detail: format!("{checks} solves, sanov max relative gap to closed form {worst_rel:.2e}"),
    }
}

fn main() -> ExitCode {
    let cfg = ConstantsConfig::default();
    type Criterion<'a> = (&'a str, u64, Box<dyn Fn() -> Outcome + 'a>);
    let criteria: Vec<Criterion> = vec![
        ("oracle identity 2g = E[Z]", 60, Box::new(|| c1_oracle_identity(&cfg))),
        ("chain rule on 1000 random instances", 5, Box::new(c2_chain_rule)),
        (
            "f monotone, f <= (k-1)/n, discrete gradient",
            120,
            Box::new(|| c3_f_properties(&cfg)),
        ),
        (
            "Sanov and Agrawal tail domination",
            60,
            Box::new(|| c4_domination(&cfg)),
        ),
        ("binary MGF E[exp(Z/4)] <= 2", 30, Box::new(|| c5_binary_mgf(&cfg))),
        ("main-theorem MGF envelope", 60, Box::new(|| c6_main_envelope(&cfg))),
        (
            "g near (k-1)/2 and chi-square limit",
            30,
            Box::new(|| c7_g_near_half_df(&cfg)),
        ),
        ("g sub-Gaussian tail", 30, Box::new(|| c8_g_subgaussian(&cfg))),
        ("raw moments <= 400(k+m)", 60, Box::new(|| c9_raw_moments(&cfg))),
        ("Monte Carlo fidelity and determinism", 60, Box::new(c10_mc_fidelity)),
        ("threshold solver", 5, Box::new(|| c11_threshold_solver(&cfg))),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = run();
        let took = start.elapsed();
        let in_time = took <= Duration::from_secs(*limit);
        let pass = out.ok && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "[{}] criterion {}: {} ({:.2}s of {}s) -- {}",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            name,
            took.as_secs_f64(),
            limit,
            out.detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
