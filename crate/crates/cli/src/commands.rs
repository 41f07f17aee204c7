use std::fs;

use klconc::bounds::CSV_HEADER;
use klconc::exact::support_size;
use klconc::montecarlo::{main_coverage_params, mgf_regime_limit};
use klconc::verify::render_table;
use klconc::{
    best_tail, enumerate_law, g_func, mc_coverage, mc_log_mgf, mc_moment, mc_tail, threshold_for_test, ConstantsConfig,
    ConstantsOverride, Distribution, GridSpec, McRun, Method, PShape, Property, SubGammaParams,
};
use serde_json::{json, Map, Value};

use crate::args::{BoundArgs, ExactArgs, GlobalArgs, McArgs, MethodArg, PArgs, Statistic, ThresholdArgs, VerifyArgs};
use crate::output::{cell, opt_cell, Emission};
use crate::CliError;

type Out = Result<Emission, CliError>;

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Invalid(anyhow::anyhow!(msg.into()))
}

/// Defaults, then $KLCONC_CONSTANTS, then --constants, then --set-constant.
pub fn load_constants(g: &GlobalArgs) -> Result<ConstantsConfig, CliError> {
    let read = |path: &std::path::Path| -> Result<ConstantsOverride, CliError> {
        let text =
            fs::read_to_string(path).map_err(|e| invalid(format!("reading constants file {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| invalid(format!("constants file {}: {e}", path.display())))
    };
    let mut o = ConstantsOverride::default();
    if let Some(path) = std::env::var_os("KLCONC_CONSTANTS").filter(|p| !p.is_empty()) {
        o = o.merged_with(&read(path.as_ref())?);
    }
    if let Some(path) = &g.constants {
        o = o.merged_with(&read(path)?);
    }
    for item in &g.set_constant {
        let (name, value) = item
            .split_once('=')
            .ok_or_else(|| invalid(format!("--set-constant expects NAME=VALUE, got `{item}`")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| invalid(format!("--set-constant {name}: `{value}` is not a number")))?;
        o.set(name.trim(), value)?;
    }
    Ok(ConstantsConfig::compose(&o)?)
}

/// The distribution named on the command line, if any, and the alphabet size.
fn resolve_p(args: &PArgs) -> Result<(Option<Distribution>, usize), CliError> {
    let p = match (&args.p, &args.p_shape) {
        (Some(probs), _) => Some(Distribution::new(probs.clone())?),
        (None, Some(name)) => {
            let k = args.k.ok_or_else(|| invalid("--p-shape needs --k"))?;
            Some(PShape::from_name(name, args.shape_seed)?.build(k)?)
        }
        (None, None) => None,
    };
    let k = match (&p, args.k) {
        (Some(p), Some(k)) if p.k() != k => {
            return Err(invalid(format!("--k {k} disagrees with the {} entries of p", p.k())));
        }
        (Some(p), _) => p.k(),
        (None, Some(k)) => k,
        (None, None) => return Err(invalid("give --k, --p or --p-shape")),
    };
    Ok((p, k))
}

fn require_p(args: &PArgs) -> Result<Distribution, CliError> {
    match resolve_p(args)? {
        (Some(p), _) => Ok(p),
        (None, _) => Err(invalid("this command needs --p or --p-shape")),
    }
}

/// α defaults to min p_i, or to 1/k when there is no p.
fn resolve_alpha(alpha: Option<f64>, p: Option<&Distribution>, k: usize) -> f64 {
    alpha.unwrap_or_else(|| p.map_or(1.0 / k as f64, |p| p.alpha()))
}

fn require_n(n: u64) -> Result<(), CliError> {
    if n == 0 {
        return Err(invalid("--n must be at least 1"));
    }
    Ok(())
}

pub fn exact(a: &ExactArgs) -> Out {
    require_n(a.n)?;
    let p = require_p(&a.p)?;
    let law = enumerate_law(a.n, &p, a.cap)?;
    let mean = law.mean();
    let two_g = 2.0 * g_func(a.n, &p);
    let variance = law.variance();

    let mut obj = Map::new();
    obj.insert("n".into(), json!(a.n));
    obj.insert("k".into(), json!(p.k()));
    obj.insert("p".into(), json!(p.probs()));
    obj.insert(
        "support_size".into(),
        json!(support_size(a.n, p.k()).and_then(|s| u64::try_from(s).ok())),
    );
    obj.insert("atoms_count".into(), json!(law.atoms().len()));
    obj.insert("mean".into(), json!(mean));
    obj.insert("two_g".into(), json!(two_g));
    obj.insert("variance".into(), json!(variance));

    let mut header: Vec<String> = ["n", "k", "mean", "two_g", "variance"].map(String::from).to_vec();
    let mut row = vec![
        a.n.to_string(),
        p.k().to_string(),
        cell(mean),
        cell(two_g),
        cell(variance),
    ];

    if let Some(t) = a.t {
        let tail = law.tail(t);
        obj.insert("t".into(), json!(t));
        obj.insert("tail".into(), json!(tail));
        header.extend(["t".into(), "tail".into()]);
        row.extend([cell(t), cell(tail)]);
    }
    if !a.moments.is_empty() {
        let mut moments = Vec::new();
        for &m in &a.moments {
            if m == 0 {
                return Err(invalid("moment orders must be >= 1"));
            }
            let value = law.moment(m, a.centered);
            moments.push(json!({"m": m, "centered": a.centered, "value": value}));
            header.push(format!("{}moment_{m}", if a.centered { "central_" } else { "" }));
            row.push(cell(value));
        }
        obj.insert("moments".into(), Value::Array(moments));
    }
    if !a.mgf_t.is_empty() {
        let mut psi = Vec::new();
        for &t in &a.mgf_t {
            let value = law.log_mgf(t, true);
            psi.push(json!({"t": t, "value": value}));
            header.push(format!("log_mgf({})", cell(t)));
            row.push(cell(value));
        }
        obj.insert("log_mgf".into(), Value::Array(psi));
    }
    if a.atoms {
        obj.insert("law".into(), serde_json::to_value(&law).map_err(anyhow::Error::from)?);
    }
    Ok(Emission {
        json: Value::Object(obj),
        csv_header: header,
        csv_rows: vec![row],
        text: None,
        failed: false,
    })
}

pub fn bound(a: &BoundArgs, cfg: &ConstantsConfig) -> Out {
    require_n(a.n)?;
    let (p, k) = resolve_p(&a.p)?;
    let alpha = resolve_alpha(a.alpha, p.as_ref(), k);
    let reports =
        a.t.iter()
            .map(|&t| best_tail(a.n, k, alpha, t, cfg, p.as_ref()))
            .collect::<klconc::Result<Vec<_>>>()?;

    let mut text = String::new();
    for r in &reports {
        text.push_str(&format!(
            "n = {}, k = {}, alpha = {}, t = {}\n",
            r.n,
            r.k,
            cell(r.alpha),
            cell(r.t)
        ));
        for e in &r.entries {
            match (e.value, &e.reason) {
                (Some(v), _) => text.push_str(&format!("  {:<8} {}\n", e.name, cell(v))),
                (None, Some(why)) => text.push_str(&format!("  {:<8} n/a ({why})\n", e.name)),
                (None, None) => text.push_str(&format!("  {:<8} n/a\n", e.name)),
            }
        }
        text.push_str(&format!("  best     {} ({})\n", cell(r.best.value), r.best.name));
        for note in &r.notes {
            text.push_str(&format!("  note: {note}\n"));
        }
    }
    let json = if reports.len() == 1 {
        serde_json::to_value(&reports[0])
    } else {
        serde_json::to_value(&reports)
    }
    .map_err(anyhow::Error::from)?;
    Ok(Emission {
        json,
        csv_header: CSV_HEADER.map(String::from).to_vec(),
        csv_rows: reports.iter().map(|r| r.csv_row(cell)).collect(),
        text: Some(text),
        failed: false,
    })
}

pub fn mc(a: &McArgs, cfg: &ConstantsConfig) -> Out {
    require_n(a.n)?;
    let p = require_p(&a.p)?;
    let run = McRun::new(a.samples, a.seed);
    let need_t = |what: &str| a.t.ok_or_else(|| invalid(format!("--stat {what} needs --t")));

    let mut query = Map::new();
    let est = match a.stat {
        Statistic::Tail => {
            let t = need_t("tail")?;
            query.insert("t".into(), json!(t));
            mc_tail(a.n, &p, t, &run)?
        }
        Statistic::Moment => {
            query.insert("q".into(), json!(a.q));
            query.insert("centered".into(), json!(a.centered));
            mc_moment(a.n, &p, a.q, a.centered, &run)?
        }
        Statistic::LogMgf => {
            let t = need_t("log-mgf")?;
            let limit = mgf_regime_limit(cfg);
            if t.abs() > limit && !a.allow_wide_t {
                return Err(invalid(format!(
                    "|t| = {t} exceeds 1/(2 c_main) = {limit}; pass --allow-wide-t to estimate anyway"
                )));
            }
            query.insert("t".into(), json!(t));
            mc_log_mgf(a.n, &p, t, &run)?
        }
        Statistic::Coverage => {
            let delta = a.delta.ok_or_else(|| invalid("--stat coverage needs --delta"))?;
            let params = match (a.nu, a.scale) {
                (Some(nu), Some(c)) => SubGammaParams::new(nu, c)?,
                _ => {
                    let alpha = resolve_alpha(a.alpha, Some(&p), p.k());
                    query.insert("alpha".into(), json!(alpha));
                    main_coverage_params(p.k(), alpha, cfg)?
                }
            };
            query.insert("delta".into(), json!(delta));
            query.insert("nu".into(), json!(params.nu));
            query.insert("c".into(), json!(params.c));
            mc_coverage(a.n, &p, delta, &params, &run)?
        }
    };
    let stat = match a.stat {
        Statistic::Tail => "tail",
        Statistic::Moment => "moment",
        Statistic::LogMgf => "log_mgf",
        Statistic::Coverage => "coverage",
    };
    let mut obj = match serde_json::to_value(est).map_err(anyhow::Error::from)? {
        Value::Object(m) => m,
        _ => unreachable!("McEstimate serializes to an object"),
    };
    obj.insert("statistic".into(), json!(stat));
    obj.insert("n".into(), json!(a.n));
    obj.insert("k".into(), json!(p.k()));
    obj.insert("p".into(), json!(p.probs()));
    obj.insert("query".into(), Value::Object(query));
    Ok(Emission {
        json: Value::Object(obj),
        csv_header: ["statistic", "n", "k", "estimate", "std_error", "samples", "seed"]
            .map(String::from)
            .to_vec(),
        csv_rows: vec![vec![
            stat.into(),
            a.n.to_string(),
            p.k().to_string(),
            cell(est.estimate),
            cell(est.std_error),
            est.samples.to_string(),
            est.seed.to_string(),
        ]],
        text: None,
        failed: false,
    })
}

pub fn verify(a: &VerifyArgs, cfg: &ConstantsConfig) -> Out {
    let mut grid = match &a.grid {
        Some(path) => {
            let text =
                fs::read_to_string(path).map_err(|e| invalid(format!("reading grid file {}: {e}", path.display())))?;
            serde_json::from_str::<GridSpec>(&text)
                .map_err(|e| invalid(format!("grid file {}: {e}", path.display())))?
        }
        None => GridSpec::default(),
    };
    if !a.seed.is_empty() {
        grid.seeds = a.seed.clone();
    }
    let properties = if a.properties.is_empty() {
        Property::ALL.to_vec()
    } else {
        a.properties
            .iter()
            .map(|s| s.parse::<Property>())
            .collect::<klconc::Result<Vec<_>>>()?
    };
    let reports = properties
        .iter()
        .map(|&prop| klconc::verify(prop, &grid, cfg))
        .collect::<klconc::Result<Vec<_>>>()?;
    let failed = reports.iter().any(|r| !r.passed);
    Ok(Emission {
        json: serde_json::to_value(&reports).map_err(anyhow::Error::from)?,
        csv_header: [
            "property",
            "passed",
            "cells_checked",
            "cells_skipped",
            "failure_count",
            "min_slack",
            "max_abs_error",
        ]
        .map(String::from)
        .to_vec(),
        csv_rows: reports
            .iter()
            .map(|r| {
                vec![
                    r.property.clone(),
                    r.passed.to_string(),
                    r.cells_checked.to_string(),
                    r.cells_skipped.to_string(),
                    r.failure_count.to_string(),
                    opt_cell(r.min_slack),
                    opt_cell(r.max_abs_error),
                ]
            })
            .collect(),
        text: Some(render_table(&reports)),
        failed,
    })
}

pub fn threshold(a: &ThresholdArgs, cfg: &ConstantsConfig) -> Out {
    require_n(a.n)?;
    let (p, k) = resolve_p(&a.p)?;
    let alpha = resolve_alpha(a.alpha, p.as_ref(), k);
    let methods: Vec<Method> = match a.method {
        MethodArg::Sanov => vec![Method::Sanov],
        MethodArg::Agrawal => vec![Method::Agrawal],
        MethodArg::Main => vec![Method::Main],
        MethodArg::Best => vec![Method::Best],
        MethodArg::All => Method::ALL.to_vec(),
    };
    let mut thresholds = Map::new();
    let mut notes = Vec::new();
    let mut rows = Vec::new();
    let mut text = String::new();
    for method in methods {
        let t = match threshold_for_test(a.n, k, alpha, a.delta, method, cfg, p.as_ref()) {
            Ok(t) => Some(t),
            Err(klconc::Error::Domain(why)) if method == Method::Main && a.method == MethodArg::All => {
                notes.push(format!("main: {why}"));
                None
            }
            Err(e) => return Err(e.into()),
        };
        thresholds.insert(method.name().into(), json!(t));
        rows.push(vec![
            a.n.to_string(),
            k.to_string(),
            cell(alpha),
            cell(a.delta),
            method.name().into(),
            opt_cell(t),
        ]);
        text.push_str(&format!("{:<8} {}\n", method.name(), t.map_or("n/a".into(), cell)));
    }
    for note in &notes {
        text.push_str(&format!("note: {note}\n"));
    }
    Ok(Emission {
        json: json!({
            "n": a.n,
            "k": k,
            "alpha": alpha,
            "delta": a.delta,
            "thresholds": thresholds,
            "notes": notes,
        }),
        csv_header: ["n", "k", "alpha", "delta", "method", "t"].map(String::from).to_vec(),
        csv_rows: rows,
        text: Some(text),
        failed: false,
    })
}
