//! Special functions and numerically careful reductions.
//!
//! Binomial log-masses follow Loader's saddle-point decomposition
//! (`stirlerr` + `bd0`), which keeps full relative precision in the mass even
//! when `n` is in the millions. The naive `ln C(n,j) + j ln x + (n-j) ln(1-x)`
//! form cancels terms of size `n` and loses roughly `log10(n)` digits.

use crate::scalar::Real;

/// Lanczos parameter and coefficients (Pugh, g = 10.900511, 11 terms).
const LANCZOS_G: f64 = 10.900511;
#[allow(clippy::excessive_precision)]
const LANCZOS_COEFFS: [f64; 11] = [
    2.48574089138753565546e-5,
    1.05142378581721974210,
    -3.45687097222016235469,
    4.51227709466894823700,
    -2.98285225323576655721,
    1.05639711577126713077,
    -1.95428773191645869583e-1,
    1.70970543404441224307e-2,
    -5.71926117404305781283e-4,
    4.63399473359905636708e-6,
    -2.71994908488607703910e-9,
];
/// ln(2·sqrt(e/π))
const LN_2_SQRT_E_OVER_PI: f64 = 0.620_782_237_635_245_2;

/// ln Γ(x) for x > 0 (reflection below 1/2).
pub fn ln_gamma<T: Real>(x: T) -> T {
    let half = T::lit(0.5);
    let e = T::E();
    let g = T::lit(LANCZOS_G);
    if x < half {
        let s = LANCZOS_COEFFS
            .iter()
            .enumerate()
            .skip(1)
            .fold(T::lit(LANCZOS_COEFFS[0]), |s, (i, &c)| {
                s + T::lit(c) / (T::of_usize(i) - x)
            });
        T::PI().ln()
            - (T::PI() * x).sin().ln()
            - s.ln()
            - T::lit(LN_2_SQRT_E_OVER_PI)
            - (half - x) * ((half - x + g) / e).ln()
    } else {
        let s = LANCZOS_COEFFS
            .iter()
            .enumerate()
            .skip(1)
            .fold(T::lit(LANCZOS_COEFFS[0]), |s, (i, &c)| {
                s + T::lit(c) / (x + T::of_usize(i) - T::one())
            });
        s.ln() + T::lit(LN_2_SQRT_E_OVER_PI) + (x - half) * ((x - half + g) / e).ln()
    }
}

/// Exact binomial coefficient, `None` on u128 overflow.
pub fn choose_exact(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step.
        acc = acc.checked_mul(u128::from(n - i))? / u128::from(i + 1);
    }
    Some(acc)
}

/// ln C(n, k); exact integer arithmetic while the coefficient fits in 53 bits.
pub fn ln_choose<T: Real>(n: u64, k: u64) -> T {
    if k > n {
        return T::neg_infinity();
    }
    match choose_exact(n, k) {
        Some(c) if c <= (1u128 << 53) => T::lit(c as f64).ln(),
        _ => {
            ln_gamma(T::of_u64(n) + T::one())
                - ln_gamma(T::of_u64(k) + T::one())
                - ln_gamma(T::of_u64(n - k) + T::one())
        }
    }
}

/// Table of ln(j!) for j = 0..=n.
pub fn ln_factorial_table<T: Real>(n: u64) -> Vec<T> {
    let mut table = Vec::with_capacity(n as usize + 1);
    table.push(T::zero());
    let mut acc = 0.0f64;
    for j in 1..=n {
        acc += (j as f64).ln();
        table.push(T::lit(acc));
    }
    table
}

/// ln(n!) - [(n + 1/2) ln n - n + ln sqrt(2π)] at n = 0..=15.
#[allow(clippy::excessive_precision)]
const STIRLERR_TABLE: [f64; 16] = [
    0.0,
    0.081_061_466_795_327_258_22,
    0.041_340_695_955_409_294_09,
    0.027_677_925_684_998_339_15,
    0.020_790_672_103_765_093_11,
    0.016_644_691_189_821_192_16,
    0.013_876_128_823_070_747_99,
    0.011_896_709_945_891_770_10,
    0.010_411_265_261_972_096_50,
    0.009_255_462_182_712_732_918,
    0.008_330_563_433_362_871_256,
    0.007_573_675_487_951_840_795,
    0.006_942_840_107_209_529_866,
    0.006_408_994_188_004_207_068,
    0.005_951_370_112_758_847_736,
    0.005_554_733_551_962_801_371,
];

/// Stirling-series remainder for integer arguments.
pub fn stirlerr<T: Real>(n: u64) -> T {
    if n <= 15 {
        return T::lit(STIRLERR_TABLE[n as usize]);
    }
    let s0 = T::lit(1.0 / 12.0);
    let s1 = T::lit(1.0 / 360.0);
    let s2 = T::lit(1.0 / 1260.0);
    let s3 = T::lit(1.0 / 1680.0);
    let s4 = T::lit(1.0 / 1188.0);
    let x = T::of_u64(n);
    let nn = x * x;
    if n > 500 {
        (s0 - s1 / nn) / x
    } else if n > 80 {
        (s0 - (s1 - s2 / nn) / nn) / x
    } else if n > 35 {
        (s0 - (s1 - (s2 - s3 / nn) / nn) / nn) / x
    } else {
        (s0 - (s1 - (s2 - (s3 - s4 / nn) / nn) / nn) / nn) / x
    }
}

/// Deviance term `x ln(x / m) + m - x`, accurate when x ≈ m.
pub fn bd0<T: Real>(x: T, m: T) -> T {
    let tenth = T::lit(0.1);
    if (x - m).abs() < tenth * (x + m) {
        let mut v = (x - m) / (x + m);
        let mut s = (x - m) * v;
        if s.abs() < T::min_positive_value() {
            return s;
        }
        let mut ej = (x + x) * v;
        v = v * v;
        for j in 1..1000u32 {
            ej = ej * v;
            let s1 = s + ej / T::lit(f64::from(2 * j + 1));
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * (x / m).ln() + m - x
    }
}

/// ln P(N = j) for N ~ Bin(n, p), with `q = 1 - p` supplied by the caller
/// so that p near 1 keeps its precision.
pub fn log_binomial_pmf<T: Real>(j: u64, n: u64, p: T, q: T) -> T {
    if j > n {
        return T::neg_infinity();
    }
    if p == T::zero() {
        return if j == 0 { T::zero() } else { T::neg_infinity() };
    }
    if q == T::zero() {
        return if j == n { T::zero() } else { T::neg_infinity() };
    }
    let nf = T::of_u64(n);
    let tenth = T::lit(0.1);
    if j == 0 {
        if n == 0 {
            return T::zero();
        }
        return if p < tenth {
            -bd0(nf, nf * q) - nf * p
        } else {
            nf * q.ln()
        };
    }
    if j == n {
        return if q < tenth {
            -bd0(nf, nf * p) - nf * q
        } else {
            nf * p.ln()
        };
    }
    let x = T::of_u64(j);
    let lc = stirlerr::<T>(n) - stirlerr::<T>(j) - stirlerr::<T>(n - j) - bd0(x, nf * p) - bd0(nf - x, nf * q);
    let lf = T::TAU().ln() + x.ln() + (-x / nf).ln_1p();
    lc - T::lit(0.5) * lf
}

/// Pairwise (tree) summation.
pub fn pairwise_sum<T: Real>(xs: &[T]) -> T {
    const BLOCK: usize = 8;
    if xs.len() <= BLOCK {
        return xs.iter().fold(T::zero(), |acc, &x| acc + x);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// ln Σ exp(l_i); `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp<T: Real>(logs: &[T]) -> T {
    let max = logs.iter().copied().fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return max;
    }
    if max == T::infinity() {
        return max;
    }
    let shifted: Vec<T> = logs.iter().map(|&l| (l - max).exp()).collect();
    max + pairwise_sum(&shifted).ln()
}
