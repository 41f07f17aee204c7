//! Closed-form tail, moment and MGF bounds for Z, the sub-Gamma toolkit, and
//! a threshold solver for the likelihood-ratio test.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{g_func, Distribution};
use crate::scalar::Real;
use crate::special::{choose_exact, ln_choose, ln_gamma};

fn require(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::domain(msg))
    }
}

fn check_alpha<T: Real>(k: usize, alpha: T) -> Result<()> {
    require(
        alpha > T::zero() && alpha * T::of_usize(k) <= T::one() + T::lit(1e-12),
        "alpha must lie in (0, 1/k]",
    )
}

// ---------------------------------------------------------------------------
// Constants

/// Numeric constants of the bounds. `C_main` and `c_main` are composed from
/// the lemma constants unless given explicitly.
#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsConfig {
    pub C_main: f64,
    pub c_main: f64,
    pub C2: f64,
    pub c2: f64,
    pub Cg: f64,
    pub cg: f64,
    pub Cg_prime: f64,
    pub cg_prime: f64,
    pub C_agrawal_delta: f64,
    /// Leading constant of the Chebyshev deviation bound.
    pub mardia: f64,
    /// Leading constant of the centered moment bound.
    pub moment: f64,
    /// True when `Cg_prime`/`cg_prime` were not given and copy `Cg`/`cg`.
    #[serde(skip)]
    pub cg_prime_defaulted: bool,
}

/// A partial constants file. Missing keys take their defaults.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsOverride {
    pub C_main: Option<f64>,
    pub c_main: Option<f64>,
    pub C2: Option<f64>,
    pub c2: Option<f64>,
    pub Cg: Option<f64>,
    pub cg: Option<f64>,
    pub Cg_prime: Option<f64>,
    pub cg_prime: Option<f64>,
    pub C_agrawal_delta: Option<f64>,
    pub mardia: Option<f64>,
    pub moment: Option<f64>,
}

pub const DEFAULT_C2: f64 = 14400.0;
pub const DEFAULT_C2_SCALE: f64 = 240.0;
pub const DEFAULT_CG: f64 = 1536.0 * 2048.0;
pub const DEFAULT_CG_SCALE: f64 = 288.0;
pub const DEFAULT_C_AGRAWAL_DELTA: f64 = 400.0;

impl Default for ConstantsConfig {
    fn default() -> Self {
        Self::compose(&ConstantsOverride::default()).expect("defaults are valid")
    }
}

impl ConstantsOverride {
    /// Sets one key by its name in the constants schema.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let slot = match name {
            "C_main" => &mut self.C_main,
            "c_main" => &mut self.c_main,
            "C2" => &mut self.C2,
            "c2" => &mut self.c2,
            "Cg" => &mut self.Cg,
            "cg" => &mut self.cg,
            "Cg_prime" => &mut self.Cg_prime,
            "cg_prime" => &mut self.cg_prime,
            "C_agrawal_delta" => &mut self.C_agrawal_delta,
            "mardia" => &mut self.mardia,
            "moment" => &mut self.moment,
            other => return Err(Error::domain(format!("unknown constant `{other}`"))),
        };
        *slot = Some(value);
        Ok(())
    }

    /// Keys in `other` win.
    pub fn merged_with(&self, other: &ConstantsOverride) -> ConstantsOverride {
        ConstantsOverride {
            C_main: other.C_main.or(self.C_main),
            c_main: other.c_main.or(self.c_main),
            C2: other.C2.or(self.C2),
            c2: other.c2.or(self.c2),
            Cg: other.Cg.or(self.Cg),
            cg: other.cg.or(self.cg),
            Cg_prime: other.Cg_prime.or(self.Cg_prime),
            cg_prime: other.cg_prime.or(self.cg_prime),
            C_agrawal_delta: other.C_agrawal_delta.or(self.C_agrawal_delta),
            mardia: other.mardia.or(self.mardia),
            moment: other.moment.or(self.moment),
        }
    }
}

impl ConstantsConfig {
    /// Fills in defaults and composes
    /// `c_main = max(3 c2, 6 cg, 6 cg')` and
    /// `C_main = max(3 C2 + 288 Cg, 3 C2 + 36 Cg')`.
    #[allow(non_snake_case)]
    pub fn compose(o: &ConstantsOverride) -> Result<Self> {
        let C2 = o.C2.unwrap_or(DEFAULT_C2);
        let c2 = o.c2.unwrap_or(DEFAULT_C2_SCALE);
        let Cg = o.Cg.unwrap_or(DEFAULT_CG);
        let cg = o.cg.unwrap_or(DEFAULT_CG_SCALE);
        let Cg_prime = o.Cg_prime.unwrap_or(Cg);
        let cg_prime = o.cg_prime.unwrap_or(cg);
        let cfg = ConstantsConfig {
            C_main: o
                .C_main
                .unwrap_or_else(|| (3.0 * C2 + 288.0 * Cg).max(3.0 * C2 + 36.0 * Cg_prime)),
            c_main: o.c_main.unwrap_or_else(|| (3.0 * c2).max(6.0 * cg).max(6.0 * cg_prime)),
            C2,
            c2,
            Cg,
            cg,
            Cg_prime,
            cg_prime,
            C_agrawal_delta: o.C_agrawal_delta.unwrap_or(DEFAULT_C_AGRAWAL_DELTA),
            mardia: o.mardia.unwrap_or(1.0),
            moment: o.moment.unwrap_or(1.0),
            cg_prime_defaulted: o.Cg_prime.is_none() && o.cg_prime.is_none(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses a (possibly partial) constants JSON document.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let o: ConstantsOverride =
            serde_json::from_str(s).map_err(|e| Error::domain(format!("constants file: {e}")))?;
        Self::compose(&o)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            ("C_main", self.C_main),
            ("c_main", self.c_main),
            ("C2", self.C2),
            ("c2", self.c2),
            ("Cg", self.Cg),
            ("cg", self.cg),
            ("Cg_prime", self.Cg_prime),
            ("cg_prime", self.cg_prime),
            ("C_agrawal_delta", self.C_agrawal_delta),
            ("mardia", self.mardia),
            ("moment", self.moment),
        ];
        for (name, v) in all {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::domain(format!(
                    "constant {name} must be finite and positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Classical tails

/// P(Z ≥ t) ≤ C(n+k-1, k-1) e^{-t/2}, the method-of-types bound.
pub fn sanov_tail<T: Real>(n: u64, k: usize, t: T) -> Result<T> {
    require(n >= 1, "sanov_tail needs n >= 1")?;
    require(k >= 2, "sanov_tail needs k >= 2")?;
    require(t >= T::zero(), "sanov_tail needs t >= 0")?;
    let half_t = t * T::lit(0.5);
    match choose_exact(n + k as u64 - 1, k as u64 - 1) {
        Some(c) if c <= (1u128 << 53) => Ok(T::lit(c as f64) * (-half_t).exp()),
        _ => Ok((ln_choose::<T>(n + k as u64 - 1, k as u64 - 1) - half_t).exp()),
    }
}

/// P(Z ≥ t) ≤ (e t / (2(k-1)))^{k-1} e^{-t/2}; `None` for t < 2(k-1).
pub fn agrawal_tail<T: Real>(k: usize, t: T) -> Result<Option<T>> {
    require(k >= 2, "agrawal_tail needs k >= 2")?;
    let s = T::of_usize(k - 1);
    let edge = T::lit(2.0) * s;
    if !(t >= edge) {
        return Ok(None);
    }
    let log_bound = s * (T::one() + (t / edge).ln()) - t * T::lit(0.5);
    Ok(Some(log_bound.exp()))
}

/// Z ≤ C (k + ln(1/δ)) with probability at least 1 - δ.
pub fn agrawal_delta_bound<T: Real>(k: usize, delta: T, cfg: &ConstantsConfig) -> Result<T> {
    require(k >= 2, "agrawal_delta_bound needs k >= 2")?;
    require(delta > T::zero() && delta <= T::one(), "delta must lie in (0, 1]")?;
    Ok(T::lit(cfg.C_agrawal_delta) * (T::of_usize(k) - delta.ln()))
}

/// Z - E[Z] ≤ const·√(k/δ) with probability at least 1 - δ.
pub fn mardia_chebyshev<T: Real>(k: usize, delta: T, cfg: &ConstantsConfig) -> Result<T> {
    require(k >= 1, "mardia_chebyshev needs k >= 1")?;
    require(delta > T::zero() && delta <= T::one(), "delta must lie in (0, 1]")?;
    Ok(T::lit(cfg.mardia) * (T::of_usize(k) / delta).sqrt())
}

// ---------------------------------------------------------------------------
// Sub-Gamma toolkit

/// Γ(ν, c): ψ(t) ≤ ν t² / (2(1 - c|t|)) for |t| < 1/c.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct SubGammaParams<T: Real = f64> {
    pub nu: T,
    pub c: T,
}

impl<T: Real> SubGammaParams<T> {
    pub fn new(nu: T, c: T) -> Result<Self> {
        require(
            nu.is_finite() && c.is_finite() && nu >= T::zero() && c >= T::zero(),
            "sub-Gamma parameters must be finite and nonnegative",
        )?;
        Ok(Self { nu, c })
    }

    /// The log-MGF envelope at t; `None` outside |t| < 1/c.
    pub fn log_mgf_envelope(&self, t: T) -> Option<T> {
        let denom = T::one() - self.c * t.abs();
        (denom > T::zero()).then(|| self.nu * t * t / (T::lit(2.0) * denom))
    }
}

/// ε with P(|X| > ε) ≤ δ, namely √(2ν L) + c L at L = ln(2/δ).
pub fn subgamma_tail_eps<T: Real>(params: &SubGammaParams<T>, delta: T) -> Result<T> {
    require(delta > T::zero() && delta < T::lit(2.0), "delta must lie in (0, 2)")?;
    let l = (T::lit(2.0) / delta).ln();
    Ok((T::lit(2.0) * params.nu * l).sqrt() + params.c * l)
}

/// E[X^{2q}] ≤ q! (8ν)^q + (2q)! (4c)^{2q}.
pub fn subgamma_moment_bound<T: Real>(params: &SubGammaParams<T>, q: u32) -> Result<T> {
    require(q >= 1, "moment order q must be >= 1")?;
    // j!·x^j, by direct product while (2q)! stays in range and in logs after.
    let term = |order: u32, base: T| -> T {
        if base == T::zero() {
            return T::zero();
        }
        if order <= 170 {
            let fact = (2..=order).fold(T::one(), |acc, j| acc * T::lit(f64::from(j)));
            fact * base.powi(order as i32)
        } else {
            let of = T::lit(f64::from(order));
            (ln_gamma(of + T::one()) + of * base.ln()).exp()
        }
    };
    let total = term(q, T::lit(8.0) * params.nu) + term(2 * q, T::lit(4.0) * params.c);
    if !total.is_finite() {
        return Err(Error::Overflow(format!("sub-Gamma moment bound at q = {q}")));
    }
    Ok(total)
}

/// E|X|^{2q} ≤ q! A^q + (2q)! B^{2q} for all q ⇒ X - E X ∈ Γ(24A + 36B², 6B).
pub fn center_from_moments<T: Real>(a: T, b: T) -> Result<SubGammaParams<T>> {
    require(a >= T::zero() && b >= T::zero(), "A and B must be nonnegative")?;
    SubGammaParams::new(T::lit(24.0) * a + T::lit(36.0) * b * b, T::lit(6.0) * b)
}

/// P(|X| > √(At) + Bt) ≤ 2e^{-t} for all t ⇒ X - E X ∈ Γ(1536A + 864B², 144B).
pub fn center_from_tails<T: Real>(a: T, b: T) -> Result<SubGammaParams<T>> {
    require(a >= T::zero() && b >= T::zero(), "A and B must be nonnegative")?;
    SubGammaParams::new(T::lit(1536.0) * a + T::lit(864.0) * b * b, T::lit(144.0) * b)
}

// ---------------------------------------------------------------------------
// Main theorem and its corollaries

/// ψ_{Z - E Z}(t) ≤ v t² for |t| ≤ 1/c.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct MainParams<T: Real = f64> {
    pub v: T,
    pub c: T,
}

/// v = C_main·k·ln⁴(k/α), c = c_main.
pub fn main_theorem_params<T: Real>(k: usize, alpha: T, cfg: &ConstantsConfig) -> Result<MainParams<T>> {
    require(k >= 2, "main theorem needs k >= 2")?;
    check_alpha(k, alpha)?;
    let l = (T::of_usize(k) / alpha).ln();
    Ok(MainParams {
        v: T::lit(cfg.C_main) * T::of_usize(k) * l.powi(4),
        c: T::lit(cfg.c_main),
    })
}

/// ρ(ε) = 2 exp(-min(ε²/v, ε/c)), a two-sided deviation bound for Z - E Z.
pub fn rho<T: Real>(eps: T, v: T, c: T) -> Result<T> {
    require(v > T::zero() && c > T::zero(), "rho needs v, c > 0")?;
    require(eps >= T::zero(), "rho needs eps >= 0")?;
    Ok(T::lit(2.0) * (-(eps * eps / v).min(eps / c)).exp())
}

/// Smallest ε with ρ(ε) ≤ δ: max(√(vL), cL) at L = ln(2/δ).
pub fn rho_inverse<T: Real>(delta: T, v: T, c: T) -> Result<T> {
    require(v > T::zero() && c > T::zero(), "rho needs v, c > 0")?;
    require(delta > T::zero() && delta <= T::lit(2.0), "delta must lie in (0, 2]")?;
    let l = (T::lit(2.0) / delta).ln();
    Ok((v * l).sqrt().max(c * l))
}

/// ‖Z - E Z‖_m ≤ const·(√(m v) + m c).
pub fn centered_moment_bound_main<T: Real>(k: usize, alpha: T, m: u32, cfg: &ConstantsConfig) -> Result<T> {
    require(m >= 1, "moment order must be >= 1")?;
    let MainParams { v, c } = main_theorem_params(k, alpha, cfg)?;
    let mf = T::lit(f64::from(m));
    Ok(T::lit(cfg.moment) * ((mf * v).sqrt() + mf * c))
}

/// ‖Z‖_m ≤ const·(k + m).
pub fn raw_moment_bound<T: Real>(k: usize, m: u32, constant: T) -> Result<T> {
    require(k >= 1 && m >= 1, "raw_moment_bound needs k, m >= 1")?;
    Ok(constant * (T::of_usize(k) + T::lit(f64::from(m))))
}

// ---------------------------------------------------------------------------
// Lemma-level bounds

/// v = 27 n ln²(n/α) with ψ(t) ≤ v t² for every t.
pub fn bdd_diff_variance<T: Real>(n: u64, alpha: T) -> Result<T> {
    require(n >= 1, "bdd_diff_variance needs n >= 1")?;
    require(alpha > T::zero() && alpha <= T::lit(0.5), "alpha must lie in (0, 1/2]")?;
    let ratio = T::of_u64(n) / alpha;
    require(ratio > T::one(), "bdd_diff_variance needs n/alpha > 1")?;
    Ok(T::lit(27.0) * T::of_u64(n) * ratio.ln().powi(2))
}

/// f(n) - f(n+1) ≤ √k ln n / n^{3/2} + 8 k ln² n / n².
pub fn disc_grad_bound<T: Real>(n: u64, k: usize) -> Result<T> {
    require(n >= 4, "disc_grad_bound needs n >= 4")?;
    let nf = T::of_u64(n);
    let kf = T::of_usize(k);
    let l = nf.ln();
    Ok(kf.sqrt() * l / (nf * nf.sqrt()) + T::lit(8.0) * kf * l * l / (nf * nf))
}

/// ceil(16k² / (α²√α)): from here on |g - (k-1)/2| ≤ 1.
pub fn g_half_df_threshold(k: usize, alpha: f64) -> Result<u64> {
    require(k >= 2, "g_half_df_threshold needs k >= 2")?;
    check_alpha(k, alpha)?;
    let kf = k as f64;
    let raw = 16.0 * kf * kf / (alpha * alpha * alpha.sqrt());
    if raw >= u64::MAX as f64 {
        return Err(Error::Overflow("g_half_df_threshold".into()));
    }
    Ok(raw.ceil() as u64)
}

pub fn g_half_df_applies(n: u64, k: usize, alpha: f64) -> Result<bool> {
    Ok(n >= g_half_df_threshold(k, alpha)?)
}

/// Sample-size breakpoints of the case analysis behind the main theorem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeThresholds {
    /// 4096 (k-1) ln²(k-1).
    pub r1_end: f64,
    /// Largest integer n ≤ r1_end.
    pub range1_last_n: u64,
    /// 128 (k-1)² / (α²√α).
    pub r2_end: f64,
    /// 48 k² / (α²√α).
    pub r3_lemma: f64,
}

pub fn range_thresholds(k: usize, alpha: f64) -> Result<RangeThresholds> {
    require(k >= 2, "range_thresholds needs k >= 2")?;
    check_alpha(k, alpha)?;
    let s = (k - 1) as f64;
    let kf = k as f64;
    let r1_end = 4096.0 * s * s.ln().powi(2);
    let scale = alpha * alpha * alpha.sqrt();
    Ok(RangeThresholds {
        r1_end,
        range1_last_n: r1_end.floor() as u64,
        r2_end: 128.0 * s * s / scale,
        r3_lemma: 48.0 * kf * kf / scale,
    })
}

// ---------------------------------------------------------------------------
// Bound selection

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct BoundEntry<T: Real = f64> {
    pub name: String,
    pub applicable: bool,
    /// Unclamped bound, absent when not applicable.
    pub raw: Option<T>,
    /// `raw` clamped to at most 1.
    pub value: Option<T>,
    pub reason: Option<String>,
}

impl<T: Real> BoundEntry<T> {
    fn of(name: &str, raw: T) -> Self {
        Self {
            name: name.into(),
            applicable: true,
            raw: Some(raw),
            value: Some(raw.min(T::one())),
            reason: None,
        }
    }

    fn skipped(name: &str, reason: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            applicable: false,
            raw: None,
            value: None,
            reason: Some(reason.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct BestBound<T: Real = f64> {
    pub name: String,
    pub value: T,
}

/// Every tail bound at one threshold t.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct BoundReport<T: Real = f64> {
    pub n: u64,
    pub k: usize,
    pub alpha: T,
    pub t: T,
    pub entries: Vec<BoundEntry<T>>,
    pub best: BestBound<T>,
    pub notes: Vec<String>,
}

pub const CSV_HEADER: [&str; 10] = [
    "n",
    "k",
    "alpha",
    "t",
    "sanov",
    "agrawal",
    "agrawal_applicable",
    "main_rho",
    "best_name",
    "best_value",
];

impl<T: Real> BoundReport<T> {
    pub fn entry(&self, name: &str) -> Option<&BoundEntry<T>> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// A row matching [`CSV_HEADER`]; inapplicable bounds are empty cells.
    pub fn csv_row(&self, fmt_real: impl Fn(T) -> String) -> Vec<String> {
        let cell = |name: &str| {
            self.entry(name)
                .and_then(|e| e.value)
                .map(&fmt_real)
                .unwrap_or_default()
        };
        let agrawal_ok = self.entry("agrawal").is_some_and(|e| e.applicable);
        vec![
            self.n.to_string(),
            self.k.to_string(),
            fmt_real(self.alpha),
            fmt_real(self.t),
            cell("sanov"),
            cell("agrawal"),
            agrawal_ok.to_string(),
            cell("main"),
            self.best.name.clone(),
            fmt_real(self.best.value),
        ]
    }
}

const CG_PRIME_NOTE: &str = "Cg_prime and cg_prime default to Cg and cg; no numeric value is known for them";

/// The main-theorem tail: P(Z ≥ t) ≤ ρ(max(t - E Z, 0)) with E Z = 2g.
fn main_tail_raw<T: Real>(t: T, mean: T, params: &MainParams<T>) -> Result<T> {
    rho((t - mean).max(T::zero()), params.v, params.c)
}

fn main_applicability<T: Real>(k: usize, alpha: T, p: Option<&Distribution<T>>) -> std::result::Result<(), String> {
    let p = p.ok_or("needs an explicit distribution p")?;
    if p.k() != k {
        return Err(format!("p has {} symbols, expected {k}", p.k()));
    }
    if check_alpha(k, alpha).is_err() {
        return Err("alpha outside (0, 1/k]".into());
    }
    if p.alpha() < alpha {
        return Err("min p_i is below alpha".into());
    }
    Ok(())
}

/// Evaluates every applicable tail bound at t and picks the smallest.
pub fn best_tail<T: Real>(
    n: u64,
    k: usize,
    alpha: T,
    t: T,
    cfg: &ConstantsConfig,
    p: Option<&Distribution<T>>,
) -> Result<BoundReport<T>> {
    let mut entries = vec![BoundEntry::of("sanov", sanov_tail(n, k, t)?)];
    entries.push(match agrawal_tail(k, t)? {
        Some(b) => BoundEntry::of("agrawal", b),
        None => BoundEntry::skipped("agrawal", format!("needs t >= 2(k-1) = {}", 2 * (k - 1))),
    });
    let mut notes = Vec::new();
    entries.push(match main_applicability(k, alpha, p) {
        Ok(()) => {
            let p = p.expect("checked");
            let params = main_theorem_params(k, alpha, cfg)?;
            if cfg.cg_prime_defaulted {
                notes.push(CG_PRIME_NOTE.to_string());
            }
            let mean = T::lit(2.0) * g_func(n, p);
            BoundEntry::of("main", main_tail_raw(t, mean, &params)?)
        }
        Err(why) => BoundEntry::skipped("main", why),
    });
    let best = entries
        .iter()
        .filter_map(|e| e.value.map(|v| (e.name.clone(), v)))
        .fold(None::<(String, T)>, |acc, (name, v)| match acc {
            Some((_, bv)) if bv <= v => acc,
            _ => Some((name, v)),
        })
        .map(|(name, value)| BestBound { name, value })
        .expect("sanov is always applicable");
    Ok(BoundReport {
        n,
        k,
        alpha,
        t,
        entries,
        best,
        notes,
    })
}

// ---------------------------------------------------------------------------
// Threshold solver

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sanov,
    Agrawal,
    Main,
    Best,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Sanov, Method::Agrawal, Method::Main, Method::Best];

    pub fn name(self) -> &'static str {
        match self {
            Method::Sanov => "sanov",
            Method::Agrawal => "agrawal",
            Method::Main => "main",
            Method::Best => "best",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::domain(format!("unknown method `{s}`")))
    }
}

const MAX_BISECTIONS: usize = 200;
const MAX_DOUBLINGS: usize = 2000;

/// The tail bound of one method as a function of t, with its left edge.
struct TailCurve<'a, T: Real> {
    method: Method,
    n: u64,
    k: usize,
    main: Option<(T, MainParams<T>)>,
    _cfg: &'a ConstantsConfig,
}

impl<T: Real> TailCurve<'_, T> {
    fn eval(&self, t: T) -> Result<T> {
        match self.method {
            Method::Sanov => sanov_tail(self.n, self.k, t),
            Method::Agrawal => Ok(agrawal_tail(self.k, t)?.unwrap_or(T::infinity())),
            Method::Main => {
                let (mean, params) = self.main.as_ref().expect("main parameters");
                main_tail_raw(t, *mean, params)
            }
            Method::Best => unreachable!("best is a minimum over curves"),
        }
    }

    fn left_edge(&self) -> T {
        match self.method {
            Method::Agrawal => T::lit(2.0) * T::of_usize(self.k - 1),
            Method::Main => self.main.as_ref().expect("main parameters").0,
            _ => T::zero(),
        }
    }
}

/// Bound value of `method` at t (unclamped); `Best` is the minimum.
pub fn method_tail<T: Real>(
    method: Method,
    n: u64,
    k: usize,
    alpha: T,
    t: T,
    cfg: &ConstantsConfig,
    p: Option<&Distribution<T>>,
) -> Result<T> {
    if method == Method::Best {
        let mut best = T::infinity();
        for m in [Method::Sanov, Method::Agrawal, Method::Main] {
            match method_tail(m, n, k, alpha, t, cfg, p) {
                Ok(v) => best = best.min(v),
                Err(Error::Domain(_)) if m == Method::Main => {}
                Err(e) => return Err(e),
            }
        }
        return Ok(best);
    }
    curve(method, n, k, alpha, cfg, p)?.eval(t)
}

fn curve<'a, T: Real>(
    method: Method,
    n: u64,
    k: usize,
    alpha: T,
    cfg: &'a ConstantsConfig,
    p: Option<&Distribution<T>>,
) -> Result<TailCurve<'a, T>> {
    require(n >= 1, "threshold needs n >= 1")?;
    require(k >= 2, "threshold needs k >= 2")?;
    let main = if method == Method::Main {
        main_applicability(k, alpha, p).map_err(Error::Domain)?;
        let p = p.expect("checked");
        Some((T::lit(2.0) * g_func(n, p), main_theorem_params(k, alpha, cfg)?))
    } else {
        None
    };
    Ok(TailCurve {
        method,
        n,
        k,
        main,
        _cfg: cfg,
    })
}

/// Smallest t with bound(t) ≤ δ. Sanov is inverted in closed form; the
/// others are bisected down to adjacent floats.
pub fn threshold_for_test<T: Real>(
    n: u64,
    k: usize,
    alpha: T,
    delta: T,
    method: Method,
    cfg: &ConstantsConfig,
    p: Option<&Distribution<T>>,
) -> Result<T> {
    require(delta > T::zero() && delta <= T::one(), "delta must lie in (0, 1]")?;
    match method {
        Method::Best => {
            let mut best = T::infinity();
            for m in [Method::Sanov, Method::Agrawal, Method::Main] {
                match threshold_for_test(n, k, alpha, delta, m, cfg, p) {
                    Ok(t) => best = best.min(t),
                    Err(Error::Domain(_)) if m == Method::Main => {}
                    Err(e) => return Err(e),
                }
            }
            Ok(best)
        }
        Method::Sanov => {
            let c = curve(method, n, k, alpha, cfg, p)?;
            let mut t = (T::lit(2.0) * (ln_choose::<T>(n + k as u64 - 1, k as u64 - 1) - delta.ln())).max(T::zero());
            // The closed form can land an ulp short after rounding.
            let mut guard = 0;
            while c.eval(t)? > delta {
                t = next_up(t);
                guard += 1;
                if guard > 64 {
                    return Err(Error::NoSolution("sanov closed form did not settle".into()));
                }
            }
            Ok(t)
        }
        Method::Agrawal | Method::Main => {
            let c = curve(method, n, k, alpha, cfg, p)?;
            let mut lo = c.left_edge();
            if c.eval(lo)? <= delta {
                return Ok(lo);
            }
            let mut hi = (T::lit(2.0) * (T::of_usize(k) - delta.ln() + T::one())).max(lo + T::one());
            let mut doublings = 0;
            while c.eval(hi)? > delta {
                lo = hi;
                hi = hi + hi;
                doublings += 1;
                if doublings > MAX_DOUBLINGS || !hi.is_finite() {
                    return Err(Error::NoSolution(format!("{method} bound never drops below delta")));
                }
            }
            for _ in 0..MAX_BISECTIONS {
                let mid = lo + (hi - lo) * T::lit(0.5);
                if mid <= lo || mid >= hi {
                    break;
                }
                if c.eval(mid)? <= delta {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Ok(hi)
        }
    }
}

fn next_up<T: Real>(t: T) -> T {
    if t == T::zero() {
        T::min_positive_value()
    } else {
        let step = (t.abs() * T::epsilon()).max(T::min_positive_value());
        t + step
    }
}
