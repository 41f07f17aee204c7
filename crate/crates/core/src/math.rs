//! Scalar kernels: φ, binary and general KL, the Z statistic, its chain-rule
//! split, the Bernstein polynomial of φ, the bias functions `f` and `g`, and
//! χ² reference moments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::special::{ln_gamma, log_binomial_pmf, pairwise_sum};

/// Tolerance on |Σ p_i - 1| for a probability vector.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// Looser tolerance for frequency vectors built by division.
const FREQ_SUM_TOL: f64 = 1e-9;

/// A point of the simplex Δ^{k-1}. Zero masses are allowed; bounds that need
/// p bounded away from the boundary check [`Distribution::alpha`] themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<T>", into = "Vec<T>")]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct Distribution<T: Real = f64> {
    probs: Vec<T>,
    alpha: T,
}

impl<T: Real> Distribution<T> {
    pub fn new(probs: Vec<T>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::domain(format!(
                "a distribution needs k >= 2 symbols, got {}",
                probs.len()
            )));
        }
        if let Some(bad) = probs.iter().find(|&&x| !(x >= T::zero() && x <= T::one())) {
            return Err(Error::domain(format!("probability {bad} outside [0, 1]")));
        }
        let total = pairwise_sum(&probs);
        if (total - T::one()).abs() > T::lit(PROB_SUM_TOL) {
            return Err(Error::domain(format!("probabilities sum to {total}, not 1")));
        }
        let alpha = probs.iter().copied().fold(T::infinity(), T::min);
        Ok(Self { probs, alpha })
    }

    /// Normalizes nonnegative weights onto the simplex.
    pub fn from_weights(weights: &[T]) -> Result<Self> {
        if weights.iter().any(|&w| !(w >= T::zero()) || !w.is_finite()) {
            return Err(Error::domain("weights must be finite and nonnegative"));
        }
        let total = pairwise_sum(weights);
        if total <= T::zero() {
            return Err(Error::domain("weights sum to zero"));
        }
        Self::new(weights.iter().map(|&w| w / total).collect())
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::domain("a distribution needs k >= 2 symbols"));
        }
        Self::new(vec![T::one() / T::of_usize(k); k])
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn k(&self) -> usize {
        self.probs.len()
    }

    /// Minimum mass.
    pub fn alpha(&self) -> T {
        self.alpha
    }
}

impl<T: Real> TryFrom<Vec<T>> for Distribution<T> {
    type Error = Error;

    fn try_from(probs: Vec<T>) -> Result<Self> {
        Self::new(probs)
    }
}

impl<T: Real> From<Distribution<T>> for Vec<T> {
    fn from(d: Distribution<T>) -> Self {
        d.probs
    }
}

/// A multinomial outcome (X_1, ..., X_k) with n = Σ X_i ≥ 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    counts: Vec<u64>,
    n: u64,
}

impl Counts {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        let n = counts
            .iter()
            .try_fold(0u64, |acc, &c| acc.checked_add(c))
            .ok_or_else(|| Error::domain("count total overflows u64"))?;
        if n == 0 {
            return Err(Error::domain("counts must sum to n >= 1"));
        }
        Ok(Self { counts, n })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    /// The empirical distribution X / n.
    pub fn frequencies<T: Real>(&self) -> Vec<T> {
        let n = T::of_u64(self.n);
        self.counts.iter().map(|&c| T::of_u64(c) / n).collect()
    }
}

/// φ(x) = x ln(1/x), with φ(0) = 0.
pub fn phi<T: Real>(x: T) -> Result<T> {
    if !(x >= T::zero() && x <= T::one()) {
        return Err(Error::domain(format!("phi needs x in [0, 1], got {x}")));
    }
    Ok(phi_unchecked(x))
}

#[inline]
pub(crate) fn phi_unchecked<T: Real>(x: T) -> T {
    if x == T::zero() || x == T::one() {
        T::zero()
    } else {
        -x * x.ln()
    }
}

/// `a ln(a / b)` with 0 ln 0 = 0 and +∞ when a > 0 = b.
#[inline]
fn xlogx_over<T: Real>(a: T, b: T) -> T {
    if a == T::zero() {
        T::zero()
    } else if b == T::zero() {
        T::infinity()
    } else {
        a * (a / b).ln()
    }
}

/// Binary divergence d(p‖q).
pub fn binary_kl<T: Real>(p: T, q: T) -> Result<T> {
    if !(p >= T::zero() && p <= T::one()) {
        return Err(Error::domain(format!("binary_kl needs p in [0, 1], got {p}")));
    }
    if !(q > T::zero() && q < T::one()) {
        return Err(Error::domain(format!("binary_kl needs q in (0, 1), got {q}")));
    }
    let d = xlogx_over(p, q) + xlogx_over(T::one() - p, T::one() - q);
    Ok(d.max(T::zero()))
}

/// D(p̂‖p) in nats. Returns `Ok(+∞)` when p̂ puts mass where p has none.
pub fn kl_divergence<T: Real>(p_hat: &[T], p: &Distribution<T>) -> Result<T> {
    if p_hat.len() != p.k() {
        return Err(Error::domain(format!(
            "length mismatch: {} frequencies vs k = {}",
            p_hat.len(),
            p.k()
        )));
    }
    if p_hat.iter().any(|&x| !(x >= T::zero() && x <= T::one())) {
        return Err(Error::domain("frequencies must lie in [0, 1]"));
    }
    let total = pairwise_sum(p_hat);
    if (total - T::one()).abs() > T::lit(FREQ_SUM_TOL) {
        return Err(Error::domain(format!("frequencies sum to {total}, not 1")));
    }
    let terms: Vec<T> = p_hat.iter().zip(p.probs()).map(|(&a, &b)| xlogx_over(a, b)).collect();
    if terms.iter().any(|t| t.is_infinite()) {
        return Ok(T::infinity());
    }
    Ok(pairwise_sum(&terms).max(T::zero()))
}

/// Z = 2n·D(p̂‖p), computed from the counts as 2 Σ X_i ln(X_i / (n p_i)).
pub fn z_statistic<T: Real>(x: &Counts, p: &Distribution<T>) -> Result<T> {
    check_lengths(x, p)?;
    let n = T::of_u64(x.n());
    let terms: Vec<T> = x
        .counts()
        .iter()
        .zip(p.probs())
        .map(|(&c, &pi)| xlogx_over(T::of_u64(c), n * pi))
        .collect();
    if terms.iter().any(|t| t.is_infinite()) {
        return Ok(T::infinity());
    }
    Ok((T::lit(2.0) * pairwise_sum(&terms)).max(T::zero()))
}

fn check_lengths<T: Real>(x: &Counts, p: &Distribution<T>) -> Result<()> {
    if x.k() != p.k() {
        return Err(Error::domain(format!(
            "length mismatch: {} counts vs k = {}",
            x.k(),
            p.k()
        )));
    }
    Ok(())
}

/// The two summands of the chain rule applied to the last symbol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainParts<T> {
    /// 2n·d(p̂_k‖p_k)
    pub binary: T,
    /// 2n(1 - p̂_k)·D of the conditional law on the first k-1 symbols.
    pub conditional: T,
}

impl<T: Real> ChainParts<T> {
    pub fn total(&self) -> T {
        self.binary + self.conditional
    }
}

/// Splits Z by conditioning on the last coordinate.
pub fn chain_decompose<T: Real>(x: &Counts, p: &Distribution<T>) -> Result<ChainParts<T>> {
    check_lengths(x, p)?;
    let k = p.k();
    if k < 3 {
        return Err(Error::domain(format!("chain_decompose needs k >= 3, got {k}")));
    }
    let pk = p.probs()[k - 1];
    if pk >= T::one() {
        return Err(Error::domain("chain_decompose needs p_k < 1"));
    }
    let two = T::lit(2.0);
    let n = x.n();
    let nf = T::of_u64(n);
    let xk = x.counts()[k - 1];
    let rest = n - xk;
    let rest_f = T::of_u64(rest);
    let rest_mass = T::one() - pk;

    let binary = two * (xlogx_over(T::of_u64(xk), nf * pk) + xlogx_over(rest_f, nf * rest_mass));

    let conditional = if rest == 0 {
        T::zero()
    } else {
        let terms: Vec<T> = x.counts()[..k - 1]
            .iter()
            .zip(&p.probs()[..k - 1])
            .map(|(&c, &pi)| xlogx_over(T::of_u64(c), rest_f * pi / rest_mass))
            .collect();
        two * pairwise_sum(&terms)
    };
    Ok(ChainParts { binary, conditional })
}

/// B_n(φ, x) = E[φ(N/n)] for N ~ Bin(n, x).
///
/// Every term is formed from an accurate binomial log-mass. The sum walks out
/// from the mode and stops once the log-mass drops below the exponent
/// underflow point; the log-mass is concave in j, so every term beyond that
/// point is exactly zero in floating point.
pub fn bernstein_phi<T: Real>(n: u64, x: T) -> Result<T> {
    if n == 0 {
        return Err(Error::domain("bernstein_phi needs n >= 1"));
    }
    if !(x >= T::zero() && x <= T::one()) {
        return Err(Error::domain(format!("bernstein_phi needs x in [0, 1], got {x}")));
    }
    Ok(bernstein_phi_unchecked(n, x))
}

pub(crate) fn bernstein_phi_unchecked<T: Real>(n: u64, x: T) -> T {
    if x == T::zero() || x == T::one() {
        return T::zero();
    }
    let q = T::one() - x;
    let nf = T::of_u64(n);
    let mode = ((nf + T::one()) * x).floor().to_u64().unwrap_or(n).min(n);
    // Log-pmf is concave in j, so terms shrink monotonically away from the
    // mode. Anything below eps^2 of the mode term cannot move the sum.
    let eps_ln = T::epsilon().ln();
    let cutoff = T::log_underflow().max(log_binomial_pmf(mode, n, x, q) + eps_ln + eps_ln);
    let term = |j: u64| -> Option<T> {
        let lp = log_binomial_pmf(j, n, x, q);
        (lp >= cutoff).then(|| {
            let y = T::of_u64(j) / nf;
            phi_unchecked(y) * lp.exp()
        })
    };
    let mut terms = Vec::new();
    for j in mode..=n {
        match term(j) {
            Some(t) => terms.push(t),
            None => break,
        }
    }
    for j in (0..mode).rev() {
        match term(j) {
            Some(t) => terms.push(t),
            None => break,
        }
    }
    pairwise_sum(&terms)
}

/// g_{k,p}(n) = n·E[D(p̂_n‖p)] = Σ_i n(φ(p_i) - B_n(φ, p_i)).
///
/// `g(0) = 0` by extension.
pub fn g_func<T: Real>(n: u64, p: &Distribution<T>) -> T {
    if n == 0 {
        return T::zero();
    }
    let nf = T::of_u64(n);
    let terms: Vec<T> = p
        .probs()
        .iter()
        .map(|&pi| nf * (phi_unchecked(pi) - bernstein_phi_unchecked(n, pi)))
        .collect();
    pairwise_sum(&terms)
}

/// f_{k,p}(n) = E[D(p̂_n‖p)].
pub fn f_func<T: Real>(n: u64, p: &Distribution<T>) -> T {
    if n == 0 {
        return T::zero();
    }
    g_func(n, p) / T::of_u64(n)
}

/// E[(χ²_df)^m] = 2^m Γ(m + df/2) / Γ(df/2).
pub fn chi2_raw_moment<T: Real>(df: u64, m: u32) -> Result<T> {
    if df == 0 {
        return Err(Error::domain("chi2_raw_moment needs df >= 1"));
    }
    let dff = T::of_u64(df);
    let value = if m <= 64 {
        // 2^m Γ(m + df/2)/Γ(df/2) = Π_{j<m} (df + 2j)
        (0..m).fold(T::one(), |acc, j| acc * (dff + T::lit(f64::from(2 * j))))
    } else {
        let half = T::lit(0.5);
        let mf = T::lit(f64::from(m));
        (mf * T::LN_2() + ln_gamma(mf + half * dff) - ln_gamma(half * dff)).exp()
    };
    if !value.is_finite() {
        return Err(Error::Overflow(format!(
            "E[(chi2_{df})^{m}] exceeds the floating-point range"
        )));
    }
    Ok(value)
}
