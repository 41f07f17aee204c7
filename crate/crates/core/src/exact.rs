//! The exact law of Z by brute-force enumeration of the multinomial support.
//!
//! Compositions of `n` into `k` parts are walked in lexicographic order
//! without recursion. Per-symbol terms are tabulated once, and each step only
//! recomputes the prefix sums from the first coordinate that changed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::Distribution;
use crate::scalar::Real;
use crate::special::{choose_exact, ln_factorial_table, log_sum_exp, pairwise_sum};

/// Default ceiling on the number of compositions enumerated.
pub const DEFAULT_OUTCOME_CAP: u128 = 10_000_000;

/// Atoms whose Z values are this close (absolute) are merged.
pub const MERGE_TOL: f64 = 1e-12;

/// Below this many compositions the enumeration stays on one thread.
const PARALLEL_MIN_SUPPORT: u128 = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct Atom<T: Real = f64> {
    pub z: T,
    pub log_prob: T,
}

impl<T: Real> Atom<T> {
    pub fn prob(&self) -> T {
        self.log_prob.exp()
    }
}

/// The finite law of Z_{n,k,p}: atoms sorted by z, log-probabilities summing
/// to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LawRecord<T>", into = "LawRecord<T>")]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct ExactLaw<T: Real = f64> {
    n: u64,
    p: Distribution<T>,
    atoms: Vec<Atom<T>>,
    merged: bool,
}

/// Wire form: `{"n": .., "p": [..], "atoms": [{"z": .., "log_prob": ..}, ..]}`.
#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
struct LawRecord<T: Real> {
    n: u64,
    p: Distribution<T>,
    atoms: Vec<Atom<T>>,
}

impl<T: Real> From<ExactLaw<T>> for LawRecord<T> {
    fn from(law: ExactLaw<T>) -> Self {
        LawRecord {
            n: law.n,
            p: law.p,
            atoms: law.atoms,
        }
    }
}

impl<T: Real> TryFrom<LawRecord<T>> for ExactLaw<T> {
    type Error = Error;

    fn try_from(rec: LawRecord<T>) -> Result<Self> {
        if rec.atoms.is_empty() {
            return Err(Error::domain("a law needs at least one atom"));
        }
        if rec.atoms.iter().any(|a| !(a.z >= T::zero()) || !a.z.is_finite()) {
            return Err(Error::domain("atom z values must be finite and nonnegative"));
        }
        if rec.atoms.windows(2).any(|w| w[1].z < w[0].z) {
            return Err(Error::domain("atoms must be sorted by z"));
        }
        let logs: Vec<T> = rec.atoms.iter().map(|a| a.log_prob).collect();
        if log_sum_exp(&logs).abs() > T::lit(1e-10) {
            return Err(Error::domain("atom probabilities do not sum to 1"));
        }
        let tol = T::lit(MERGE_TOL);
        let merged = rec.atoms.windows(2).all(|w| w[1].z - w[0].z > tol);
        Ok(ExactLaw {
            n: rec.n,
            p: rec.p,
            atoms: rec.atoms,
            merged,
        })
    }
}

/// Number of compositions of n into k parts, C(n+k-1, k-1).
pub fn support_size(n: u64, k: usize) -> Option<u128> {
    if k == 0 {
        return Some(0);
    }
    choose_exact(n + k as u64 - 1, k as u64 - 1)
}

/// All count vectors of length `k` summing to `n`, in lexicographic order.
pub fn compositions(n: u64, k: usize) -> Compositions {
    Compositions {
        next: (k > 0).then(|| {
            let mut x = vec![0; k];
            x[k - 1] = n;
            x
        }),
    }
}

#[derive(Debug, Clone)]
pub struct Compositions {
    next: Option<Vec<u64>>,
}

impl Iterator for Compositions {
    type Item = Vec<u64>;

    fn next(&mut self) -> Option<Vec<u64>> {
        let current = self.next.take()?;
        let k = current.len();
        if k >= 2 {
            let mut x = current.clone();
            if x[k - 1] > 0 {
                x[k - 2] += 1;
                x[k - 1] -= 1;
                self.next = Some(x);
            } else if let Some(j) = (0..k - 1).rev().find(|&j| x[j] > 0) {
                if j > 0 {
                    x[k - 1] = x[j] - 1;
                    x[j] = 0;
                    x[j - 1] += 1;
                    self.next = Some(x);
                }
            }
        }
        Some(current)
    }
}

/// Enumerates the law of Z and merges atoms with equal Z values.
pub fn enumerate_law<T: Real>(n: u64, p: &Distribution<T>, outcome_cap: u128) -> Result<ExactLaw<T>> {
    let mut law = enumerate_law_unmerged(n, p, outcome_cap)?;
    law.merge(T::lit(MERGE_TOL));
    Ok(law)
}

/// One atom per composition with positive probability, sorted by z.
pub fn enumerate_law_unmerged<T: Real>(n: u64, p: &Distribution<T>, outcome_cap: u128) -> Result<ExactLaw<T>> {
    if n == 0 {
        return Err(Error::domain("enumerate_law needs n >= 1"));
    }
    // Symbols with zero mass can never be drawn.
    let support: Vec<T> = p.probs().iter().copied().filter(|&x| x > T::zero()).collect();
    let ke = support.len();
    let size = support_size(n, ke).unwrap_or(u128::MAX);
    if size > outcome_cap {
        return Err(Error::CapExceeded {
            support: size,
            cap: outcome_cap,
        });
    }

    let tables = Tables::new(n, &support);
    let mut atoms: Vec<Atom<T>> = if ke == 1 {
        vec![tables.atom_single()]
    } else if size >= PARALLEL_MIN_SUPPORT {
        (0..=n)
            .into_par_iter()
            .map(|first| tables.atoms_with_first(first))
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    } else {
        (0..=n).flat_map(|first| tables.atoms_with_first(first)).collect()
    };

    atoms.sort_by(|a, b| {
        a.z.partial_cmp(&b.z)
            .expect("finite z")
            .then(a.log_prob.partial_cmp(&b.log_prob).expect("finite log-prob"))
    });
    let logs: Vec<T> = atoms.iter().map(|a| a.log_prob).collect();
    let total = log_sum_exp(&logs);
    for a in &mut atoms {
        a.log_prob = a.log_prob - total;
    }

    Ok(ExactLaw {
        n,
        p: p.clone(),
        atoms,
        merged: false,
    })
}

/// Per-symbol lookup tables: `weight[i][x] = x ln p_i - ln x!` and
/// `zterm[i][x] = x ln(x / (n p_i))`.
struct Tables<T: Real> {
    n: u64,
    ln_n_fact: T,
    weight: Vec<Vec<T>>,
    zterm: Vec<Vec<T>>,
}

impl<T: Real> Tables<T> {
    fn new(n: u64, support: &[T]) -> Self {
        let lnfact = ln_factorial_table::<T>(n);
        let nf = T::of_u64(n);
        let mut weight = Vec::with_capacity(support.len());
        let mut zterm = Vec::with_capacity(support.len());
        for &pi in support {
            let lp = pi.ln();
            let expected = nf * pi;
            weight.push((0..=n).map(|x| T::of_u64(x) * lp - lnfact[x as usize]).collect());
            zterm.push(
                (0..=n)
                    .map(|x| {
                        if x == 0 {
                            T::zero()
                        } else {
                            let xf = T::of_u64(x);
                            xf * (xf / expected).ln()
                        }
                    })
                    .collect(),
            );
        }
        Self {
            n,
            ln_n_fact: lnfact[n as usize],
            weight,
            zterm,
        }
    }

    fn make_atom(&self, zsum: T, wsum: T) -> Atom<T> {
        Atom {
            z: (T::lit(2.0) * zsum).max(T::zero()),
            log_prob: self.ln_n_fact + wsum,
        }
    }

    fn atom_single(&self) -> Atom<T> {
        let n = self.n as usize;
        self.make_atom(self.zterm[0][n], self.weight[0][n])
    }

    /// All compositions whose first coordinate is `first`.
    fn atoms_with_first(&self, first: u64) -> Vec<Atom<T>> {
        let parts = self.weight.len() - 1;
        let rest = self.n - first;
        let f = first as usize;
        let (z0, w0) = (self.zterm[0][f], self.weight[0][f]);

        // x[d] is the count of symbol d + 1.
        let mut x = vec![0u64; parts];
        x[parts - 1] = rest;
        let mut pz = vec![T::zero(); parts];
        let mut pw = vec![T::zero(); parts];
        let mut out = Vec::new();
        let mut changed = 0usize;
        loop {
            for d in changed..parts {
                let (bz, bw) = if d == 0 { (z0, w0) } else { (pz[d - 1], pw[d - 1]) };
                let c = x[d] as usize;
                pz[d] = bz + self.zterm[d + 1][c];
                pw[d] = bw + self.weight[d + 1][c];
            }
            out.push(self.make_atom(pz[parts - 1], pw[parts - 1]));

            if parts == 1 || rest == 0 {
                break;
            }
            if x[parts - 1] > 0 {
                x[parts - 2] += 1;
                x[parts - 1] -= 1;
                changed = parts - 2;
            } else {
                let j = (0..parts - 1)
                    .rev()
                    .find(|&j| x[j] > 0)
                    .expect("mass sits in some free coordinate");
                if j == 0 {
                    break;
                }
                x[parts - 1] = x[j] - 1;
                x[j] = 0;
                x[j - 1] += 1;
                changed = j - 1;
            }
        }
        out
    }
}

impl<T: Real> ExactLaw<T> {
    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn p(&self) -> &Distribution<T> {
        &self.p
    }

    pub fn atoms(&self) -> &[Atom<T>] {
        &self.atoms
    }

    pub fn is_merged(&self) -> bool {
        self.merged
    }

    /// Collapses runs of atoms whose consecutive z gaps are at most `tol`.
    /// The merged atom keeps the smallest z of its run.
    fn merge(&mut self, tol: T) {
        let mut merged: Vec<Atom<T>> = Vec::with_capacity(self.atoms.len());
        let mut run: Vec<T> = Vec::new();
        let mut run_z = T::zero();
        let mut last_z = T::zero();
        for a in &self.atoms {
            if !run.is_empty() && a.z - last_z <= tol {
                run.push(a.log_prob);
            } else {
                if !run.is_empty() {
                    merged.push(Atom {
                        z: run_z,
                        log_prob: log_sum_exp(&run),
                    });
                    run.clear();
                }
                run_z = a.z;
                run.push(a.log_prob);
            }
            last_z = a.z;
        }
        if !run.is_empty() {
            merged.push(Atom {
                z: run_z,
                log_prob: log_sum_exp(&run),
            });
        }
        self.atoms = merged;
        self.merged = true;
    }

    /// E[Z].
    pub fn mean(&self) -> T {
        let terms: Vec<T> = self.atoms.iter().map(|a| a.prob() * a.z).collect();
        pairwise_sum(&terms)
    }

    pub fn variance(&self) -> T {
        self.moment(2, true)
    }

    /// E[Z^m], or E[(Z - E Z)^m] when `centered`.
    pub fn moment(&self, m: u32, centered: bool) -> T {
        let shift = if centered { self.mean() } else { T::zero() };
        let terms: Vec<T> = self
            .atoms
            .iter()
            .map(|a| a.prob() * (a.z - shift).powi(m as i32))
            .collect();
        pairwise_sum(&terms)
    }

    /// P(Z ≥ t).
    pub fn tail(&self, t: T) -> T {
        if t <= T::zero() {
            return T::one();
        }
        let start = self.atoms.partition_point(|a| a.z < t);
        let terms: Vec<T> = self.atoms[start..].iter().map(|a| a.prob()).collect();
        pairwise_sum(&terms).min(T::one())
    }

    /// ψ(t) = ln E[exp(t(Z - c))], with c = E[Z] when `centered`, else 0.
    pub fn log_mgf(&self, t: T, centered: bool) -> T {
        if t == T::zero() {
            return T::zero();
        }
        let shift = if centered { self.mean() } else { T::zero() };
        let logs: Vec<T> = self.atoms.iter().map(|a| a.log_prob + t * (a.z - shift)).collect();
        log_sum_exp(&logs)
    }

    /// max |Z - E[Z]| over the support.
    pub fn max_abs_deviation(&self) -> T {
        let mean = self.mean();
        self.atoms.iter().map(|a| (a.z - mean).abs()).fold(T::zero(), T::max)
    }

    pub fn total_mass(&self) -> T {
        let probs: Vec<T> = self.atoms.iter().map(|a| a.prob()).collect();
        pairwise_sum(&probs)
    }
}

/// E[Z^m] (raw) or E[(Z - E Z)^m] (centered).
pub fn law_moment<T: Real>(law: &ExactLaw<T>, m: u32, centered: bool) -> T {
    law.moment(m, centered)
}

/// P(Z ≥ t), closed inequality.
pub fn law_tail<T: Real>(law: &ExactLaw<T>, t: T) -> T {
    law.tail(t)
}

pub fn law_log_mgf<T: Real>(law: &ExactLaw<T>, t: T, centered: bool) -> T {
    law.log_mgf(t, centered)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn half() -> Distribution {
        Distribution::new(vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn n1_uniform_is_a_point_mass() {
        let law = enumerate_law(1, &half(), DEFAULT_OUTCOME_CAP).unwrap();
        assert_eq!(law.atoms().len(), 1);
        assert!((law.atoms()[0].z - 2.0 * LN_2).abs() < 1e-15);
        assert!(law.atoms()[0].log_prob.abs() < 1e-15);
        for t in [-1.0, 0.5, 3.0] {
            assert!(law.log_mgf(t, true).abs() < 1e-14);
        }
    }

    #[test]
    fn n2_uniform_has_two_atoms() {
        let raw = enumerate_law_unmerged(2, &half(), DEFAULT_OUTCOME_CAP).unwrap();
        assert_eq!(raw.atoms().len(), 3);
        assert_eq!(support_size(2, 2), Some(3));

        let law = enumerate_law(2, &half(), DEFAULT_OUTCOME_CAP).unwrap();
        assert!(law.is_merged());
        let a = law.atoms();
        assert_eq!(a.len(), 2);
        assert_eq!(a[0].z, 0.0);
        assert!((a[0].prob() - 0.5).abs() < 1e-15);
        assert!((a[1].z - 4.0 * LN_2).abs() < 1e-15);
        assert!((a[1].prob() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn n2_uniform_moments_tails_and_mgf() {
        let law = enumerate_law(2, &half(), DEFAULT_OUTCOME_CAP).unwrap();
        assert!((law.moment(1, false) - 2.0 * LN_2).abs() < 1e-15);
        assert!(law.moment(1, true).abs() < 1e-15);
        assert!((law.moment(2, true) - (2.0 * LN_2).powi(2)).abs() < 1e-14);
        assert_eq!(law.tail(0.0), 1.0);
        assert!((law.tail(1.0) - 0.5).abs() < 1e-15);
        assert_eq!(law.tail(10.0), 0.0);
        assert_eq!(law.log_mgf(0.0, true), 0.0);
        let t = 0.5;
        let closed = (2.0 * t * LN_2).cosh().ln();
        assert!((law.log_mgf(t, true) - closed).abs() < 1e-14);
        assert!((law.log_mgf(-t, true) - closed).abs() < 1e-14);
    }

    #[test]
    fn tail_is_closed_at_atoms() {
        let law = enumerate_law(2, &half(), DEFAULT_OUTCOME_CAP).unwrap();
        let top = law.atoms()[1].z;
        assert!((law.tail(top) - 0.5).abs() < 1e-15);
        assert_eq!(law.tail(top * (1.0 + 1e-12)), 0.0);
    }

    #[test]
    fn zero_mass_symbols_are_dropped() {
        let p = Distribution::new(vec![0.5, 0.0, 0.5]).unwrap();
        let law = enumerate_law(3, &p, DEFAULT_OUTCOME_CAP).unwrap();
        let q = enumerate_law(3, &half(), DEFAULT_OUTCOME_CAP).unwrap();
        assert_eq!(law.atoms().len(), q.atoms().len());
        for (a, b) in law.atoms().iter().zip(q.atoms()) {
            assert!((a.z - b.z).abs() < 1e-14);
            assert!((a.log_prob - b.log_prob).abs() < 1e-14);
        }
        let point = Distribution::new(vec![1.0, 0.0]).unwrap();
        let law = enumerate_law(4, &point, DEFAULT_OUTCOME_CAP).unwrap();
        assert_eq!(law.atoms().len(), 1);
        assert_eq!(law.atoms()[0].z, 0.0);
    }

    #[test]
    fn cap_is_enforced_with_the_support_size() {
        let p = Distribution::<f64>::uniform(6).unwrap();
        match enumerate_law(100, &p, DEFAULT_OUTCOME_CAP) {
            Err(Error::CapExceeded { support, cap }) => {
                assert_eq!(support, 96_560_646);
                assert_eq!(cap, DEFAULT_OUTCOME_CAP);
            }
            other => panic!("expected cap error, got {other:?}"),
        }
    }

    #[test]
    fn enumeration_count_matches_stars_and_bars() {
        let p = Distribution::<f64>::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        for n in 1..=9 {
            let law = enumerate_law_unmerged(n, &p, DEFAULT_OUTCOME_CAP).unwrap();
            assert_eq!(law.atoms().len() as u128, support_size(n, 4).unwrap());
            assert!((law.total_mass() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn composition_iterator_is_complete_and_ordered() {
        let all: Vec<Vec<u64>> = compositions(2, 3).collect();
        assert_eq!(
            all,
            vec![
                vec![0, 0, 2],
                vec![0, 1, 1],
                vec![0, 2, 0],
                vec![1, 0, 1],
                vec![1, 1, 0],
                vec![2, 0, 0]
            ]
        );
        assert_eq!(compositions(7, 4).count() as u128, support_size(7, 4).unwrap());
        assert_eq!(compositions(5, 1).collect::<Vec<_>>(), vec![vec![5]]);
        assert_eq!(compositions(0, 3).count(), 1);
    }

    #[test]
    fn parallel_and_serial_paths_agree() {
        // 4 symbols at n = 70 is above the parallel threshold.
        let p = Distribution::<f64>::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let big = enumerate_law(70, &p, DEFAULT_OUTCOME_CAP).unwrap();
        assert!(support_size(70, 4).unwrap() >= PARALLEL_MIN_SUPPORT);
        let again = enumerate_law(70, &p, DEFAULT_OUTCOME_CAP).unwrap();
        assert_eq!(big, again);
        assert!(big.atoms().windows(2).all(|w| w[1].z - w[0].z > MERGE_TOL));
    }

    #[test]
    fn json_round_trip_and_validation() {
        let law = enumerate_law(3, &half(), DEFAULT_OUTCOME_CAP).unwrap();
        let s = serde_json::to_string(&law).unwrap();
        let back: ExactLaw = serde_json::from_str(&s).unwrap();
        assert!(back.is_merged());
        assert_eq!(back.atoms().len(), law.atoms().len());
        let bad = r#"{"n":1,"p":[0.5,0.5],"atoms":[{"z":1.0,"log_prob":-1.0}]}"#;
        assert!(serde_json::from_str::<ExactLaw>(bad).is_err());
    }
}
