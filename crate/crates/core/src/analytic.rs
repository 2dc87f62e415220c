//! Mean-value sums over squarefree integers in arithmetic progressions, as a standalone oracle
//! layer: the main term with its correction factor, and direct summation to compare against.

use crate::error::{Error, Result};
use crate::localdens::gamma_fn;
use crate::qlocal::{primes_up_to, SpfSieve};
use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

/// Largest `∏ X_i` accepted by [`brute_lhs`] for `n ≥ 3`.
pub const BRUTE_LIMIT: u64 = 1_000_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MeanValueSpec {
    /// Variables `1..=r` are supported on primes `≡ 1 mod 4`.
    pub r: usize,
    #[serde(serialize_with = "crate::util::ser_rational_vec")]
    pub c: Vec<Rational64>,
    pub d: Vec<u64>,
    pub alpha: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanValueResult {
    pub main_term: f64,
    pub constant: f64,
    #[serde(serialize_with = "crate::util::ser_big_rational")]
    pub f: BigRational,
    pub error_estimate: f64,
}

impl MeanValueSpec {
    pub fn new(r: usize, c: Vec<Rational64>, d: Vec<u64>, alpha: Vec<u8>) -> Result<Self> {
        let n = c.len();
        if n == 0 || d.len() != n || alpha.len() != n || r > n {
            return Err(Error::Domain("mean-value spec needs matching lengths and r ≤ n".into()));
        }
        if c.iter().any(|&x| x < Rational64::one()) {
            return Err(Error::Domain("every c_i must be at least 1".into()));
        }
        if d.iter().any(|&x| x == 0 || x % 2 == 1) {
            return Err(Error::Domain("every d_i must be even and positive".into()));
        }
        if alpha.iter().any(|&a| a % 2 == 0 || a >= 8) {
            return Err(Error::Domain("every α_i must be an odd residue mod 8".into()));
        }
        if alpha[..r].iter().any(|&a| a % 4 != 1) {
            return Err(Error::Domain("α_i ≡ 1 mod 4 is required for i ≤ r".into()));
        }
        Ok(MeanValueSpec { r, c, d, alpha })
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    /// `γ_i = 1/(2c_i)` for `i ≤ r`, else `1/c_i` (0-based `i`).
    pub fn gamma_i(&self, i: usize) -> Rational64 {
        let inv = self.c[i].recip();
        if i < self.r {
            inv / 2
        } else {
            inv
        }
    }

    pub fn gamma(&self) -> Rational64 {
        (0..self.n()).map(|i| self.gamma_i(i)).sum()
    }

    /// `h_i(p)` for an odd prime `p` (0-based `i`).
    pub fn h(&self, i: usize, p: u64) -> bool {
        p % 4 == 1 || i >= self.r
    }

    fn local_sum(&self, p: u64, keep: impl Fn(usize) -> bool) -> Rational64 {
        (0..self.n())
            .filter(|&i| keep(i) && self.h(i, p))
            .map(|i| self.c[i].recip())
            .sum()
    }
}

fn to_big(r: Rational64) -> BigRational {
    BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
}

fn rf(r: Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// The correction factor over odd primes dividing some `d_i`.
pub fn f_factor(spec: &MeanValueSpec) -> BigRational {
    let mut primes: Vec<u64> = spec
        .d
        .iter()
        .flat_map(|&x| crate::qlocal::factorize(x))
        .map(|(p, _)| p)
        .filter(|&p| p > 2)
        .collect();
    primes.sort_unstable();
    primes.dedup();
    let mut out = BigRational::one();
    for p in primes {
        let inv_p = Rational64::new(1, p as i64);
        let all = Rational64::one() + inv_p * spec.local_sum(p, |_| true);
        let coprime = Rational64::one() + inv_p * spec.local_sum(p, |i| !spec.d[i].is_multiple_of(p));
        out *= to_big(coprime) / to_big(all);
    }
    out
}

fn euler_constant(spec: &MeanValueSpec, primes: &[u64], bound: u64) -> f64 {
    let g = rf(spec.gamma());
    primes
        .iter()
        .filter(|&&p| p > 2 && p <= bound)
        .map(|&p| {
            let x = p as f64;
            (rf(spec.local_sum(p, |_| true)) / x).ln_1p() + g * (-1.0 / x).ln_1p()
        })
        .sum()
}

/// Structure constant without the Euler product: `2^{−γ−(2n−r)} / ∏ Γ(γ_i)`.
pub fn structure_constant(spec: &MeanValueSpec) -> f64 {
    let n = spec.n() as f64;
    let gp: f64 = (0..spec.n()).map(|i| gamma_fn(rf(spec.gamma_i(i)))).product();
    2f64.powf(-rf(spec.gamma()) - (2.0 * n - spec.r as f64)) / gp
}

/// Main term `F · C · ∏ X_i / ∏ (log X_i)^{1 − γ_i}`, with `C` truncated at `primes_bound`.
pub fn main_term(spec: &MeanValueSpec, x: &[f64], primes_bound: u64) -> Result<MeanValueResult> {
    if x.len() != spec.n() {
        return Err(Error::Domain("one bound per variable is required".into()));
    }
    let primes = primes_up_to(primes_bound);
    let base = structure_constant(spec);
    let constant = base * euler_constant(spec, &primes, primes_bound).exp();
    let half = base * euler_constant(spec, &primes, primes_bound / 2).exp();
    let f = f_factor(spec);
    let ff = f.to_f64().unwrap_or(f64::NAN);
    let shape: f64 = x
        .iter()
        .enumerate()
        .map(|(i, &xi)| xi / xi.ln().powf(1.0 - rf(spec.gamma_i(i))))
        .product();
    Ok(MeanValueResult {
        main_term: ff * constant * shape,
        constant,
        f,
        error_estimate: ff * (constant - half).abs() * shape,
    })
}

/// `β_c` for the unrestricted sum.
pub fn beta(c: f64, primes_bound: u64) -> f64 {
    let prod: f64 = primes_up_to(primes_bound)
        .into_iter()
        .filter(|&p| p > 2)
        .map(|p| {
            let x = p as f64;
            (1.0 / (c * (x - 1.0))).ln_1p() + (-1.0 / x).ln_1p() / c
        })
        .sum();
    2f64.powf(-2.0 - 1.0 / c) / gamma_fn(1.0 / c) * prod.exp()
}

/// `β̃_c` for the sum supported on primes `≡ 1 mod 4`.
pub fn beta_tilde(c: f64, primes_bound: u64) -> f64 {
    let prod: f64 = primes_up_to(primes_bound)
        .into_iter()
        .filter(|&p| p > 2)
        .map(|p| {
            let x = p as f64;
            let lead = if p % 4 == 1 { (1.0 / (c * (x - 1.0))).ln_1p() } else { 0.0 };
            lead + (-1.0 / x).ln_1p() / (2.0 * c)
        })
        .sum();
    2f64.powf(-1.0 - 1.0 / (2.0 * c)) / gamma_fn(1.0 / (2.0 * c)) * prod.exp()
}

/// Both sides of the product identity for `∏_{i≤r} β̃_{c_i} ∏_{i>r} β_{c_i}`.
pub fn beta_relation(spec: &MeanValueSpec, primes_bound: u64) -> (f64, f64) {
    let n = spec.n();
    let lhs: f64 = (0..n)
        .map(|i| if i < spec.r { beta_tilde(rf(spec.c[i]), primes_bound) } else { beta(rf(spec.c[i]), primes_bound) })
        .product();
    let gp: f64 = (0..n).map(|i| gamma_fn(rf(spec.gamma_i(i)))).product();
    let g = rf(spec.gamma());
    let log_prod: f64 = primes_up_to(primes_bound)
        .into_iter()
        .filter(|&p| p > 2)
        .map(|p| {
            let x = p as f64;
            let inner: f64 = (0..n)
                .filter(|&i| spec.h(i, p))
                .map(|i| (1.0 / (rf(spec.c[i]) * (x - 1.0))).ln_1p())
                .sum();
            inner + g * (-1.0 / x).ln_1p()
        })
        .sum();
    let rhs = 2f64.powf(-(spec.r as f64 + 2.0 * (n - spec.r) as f64 + g)) / gp * log_prod.exp();
    (lhs, rhs)
}

/// Per-integer weights `h_i(a)/c_i^{ω(a)}` for admissible `a ≤ x`, zero elsewhere.
fn weights(spec: &MeanValueSpec, i: usize, x: u64, sieve: &SpfSieve) -> Vec<f64> {
    let inv_c = rf(spec.c[i].recip());
    let mut w = vec![0.0; x as usize + 1];
    for a in (1..=x).filter(|a| a % 8 == spec.alpha[i] as u64) {
        if num_integer::gcd(a, spec.d[i]) != 1 {
            continue;
        }
        let f = sieve.factor(a);
        if f.iter().any(|&(p, e)| e > 1 || !spec.h(i, p)) {
            continue;
        }
        w[a as usize] = inv_c.powi(f.len() as i32);
    }
    w
}

/// Direct evaluation of the left-hand side with bounds `x`.
pub fn brute_lhs(spec: &MeanValueSpec, x: &[u64]) -> Result<f64> {
    let n = spec.n();
    if x.len() != n {
        return Err(Error::Domain("one bound per variable is required".into()));
    }
    let max = x.iter().copied().max().unwrap_or(1);
    if max > BRUTE_LIMIT {
        return Err(Error::TooLarge(format!("bound {max} exceeds {BRUTE_LIMIT}")));
    }
    let sieve = SpfSieve::new(max);
    let w: Vec<Vec<f64>> = (0..n).map(|i| weights(spec, i, x[i], &sieve)).collect();
    match n {
        1 => Ok(w[0].iter().sum()),
        2 => {
            // coprimality of a_1 and a_2 through Σ_{e | gcd} μ(e)
            let limit = x[0].min(x[1]);
            let mut total = 0.0;
            for e in (1..=limit).step_by(2) {
                let mu = sieve.mobius(e);
                if mu == 0 {
                    continue;
                }
                let part = |v: &[f64], bound: u64| -> f64 { (e..=bound).step_by(e as usize).map(|a| v[a as usize]).sum() };
                total += mu as f64 * part(&w[0], x[0]) * part(&w[1], x[1]);
            }
            Ok(total)
        }
        _ => {
            let volume = x.iter().try_fold(1u64, |acc, &v| acc.checked_mul(v));
            if volume.is_none_or(|v| v > BRUTE_LIMIT) {
                return Err(Error::TooLarge("∏ X_i exceeds the direct-summation limit".into()));
            }
            let support: Vec<Vec<(u64, f64)>> = w
                .iter()
                .map(|v| v.iter().enumerate().filter(|(_, &x)| x != 0.0).map(|(a, &x)| (a as u64, x)).collect())
                .collect();
            let mut total = 0.0;
            direct(&support, 0, 1, 1.0, &mut total);
            Ok(total)
        }
    }
}

fn direct(support: &[Vec<(u64, f64)>], i: usize, prod: u64, weight: f64, total: &mut f64) {
    if i == support.len() {
        *total += weight;
        return;
    }
    for &(a, w) in &support[i] {
        if num_integer::gcd(a, prod) == 1 {
            direct(support, i + 1, prod * a, weight * w, total);
        }
    }
}

/// The fixed specifications used by the mean-value suite.
pub fn reference_specs() -> Vec<(&'static str, MeanValueSpec)> {
    let r = |n: i64| Rational64::from(n);
    vec![
        ("sqfree-1mod8", MeanValueSpec::new(0, vec![r(1)], vec![2], vec![1]).unwrap()),
        ("split-primes", MeanValueSpec::new(1, vec![r(1)], vec![2], vec![5]).unwrap()),
        ("half-weight", MeanValueSpec::new(0, vec![r(2)], vec![6], vec![1]).unwrap()),
        ("mixed-pair", MeanValueSpec::new(1, vec![r(1), r(1)], vec![2, 2], vec![1, 7]).unwrap()),
        ("weighted-pair", MeanValueSpec::new(0, vec![r(2), r(4)], vec![30, 2], vec![3, 5]).unwrap()),
    ]
}

/// One row of the mean-value comparison.
#[derive(Debug, Clone, Serialize)]
pub struct MeanValueRow {
    pub spec: String,
    pub x: u64,
    pub lhs: f64,
    pub main_term: f64,
    pub ratio: f64,
}

pub fn compare(name: &str, spec: &MeanValueSpec, x: u64, primes_bound: u64) -> Result<MeanValueRow> {
    let bounds = vec![x; spec.n()];
    let lhs = brute_lhs(spec, &bounds)?;
    let xf: Vec<f64> = bounds.iter().map(|&v| v as f64).collect();
    let main = main_term(spec, &xf, primes_bound)?.main_term;
    Ok(MeanValueRow { spec: name.to_string(), x, lhs, main_term: main, ratio: lhs / main })
}

/// Exact `F` as an `f64` (convenience).
pub fn f_factor_f64(spec: &MeanValueSpec) -> f64 {
    let f = f_factor(spec);
    if f.is_zero() {
        0.0
    } else {
        f.to_f64().unwrap_or(f64::NAN)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f_is_one_without_odd_bad_primes() {
        let spec = MeanValueSpec::new(0, vec![Rational64::from(1)], vec![2], vec![1]).unwrap();
        assert_eq!(f_factor(&spec), BigRational::one());
    }

    #[test]
    fn f_single_prime() {
        let spec = MeanValueSpec::new(0, vec![Rational64::from(1)], vec![6], vec![1]).unwrap();
        assert_eq!(f_factor(&spec), BigRational::new(3.into(), 4.into()));
    }

    #[test]
    fn f_multiplicative_over_bad_primes() {
        let mk = |d: u64| MeanValueSpec::new(1, vec![Rational64::from(1), Rational64::from(2)], vec![d, 2], vec![1, 3]).unwrap();
        assert_eq!(f_factor(&mk(30)), f_factor(&mk(6)) * f_factor(&mk(10)));
    }

    #[test]
    fn brute_small_set() {
        let spec = MeanValueSpec::new(0, vec![Rational64::from(1)], vec![2], vec![1]).unwrap();
        // 1, 17, 33, 41, 57, 65, 73, 89, 97 (9 and 25 and 49 and 81 are not squarefree)
        assert_eq!(brute_lhs(&spec, &[100]).unwrap(), 9.0);
    }

    #[test]
    fn brute_split_support() {
        let spec = MeanValueSpec::new(1, vec![Rational64::from(1)], vec![2], vec![1]).unwrap();
        // a ≡ 1 mod 8 squarefree with only p ≡ 1 mod 4: 1, 17, 41, 65, 73, 89, 97
        assert_eq!(brute_lhs(&spec, &[100]).unwrap(), 7.0);
    }

    #[test]
    fn squarefree_density_constant() {
        let spec = MeanValueSpec::new(0, vec![Rational64::from(1)], vec![2], vec![1]).unwrap();
        let m = main_term(&spec, &[std::f64::consts::E], 1_000_000).unwrap();
        let expect = 1.0 / std::f64::consts::PI.powi(2);
        assert!((m.constant - expect).abs() < 1e-6, "{}", m.constant);
    }

    #[test]
    fn beta_identity() {
        for (_, spec) in reference_specs() {
            let (l, r) = beta_relation(&spec, 100_000);
            assert!(((l - r) / r).abs() < 1e-10, "{l} vs {r}");
        }
    }

    #[test]
    fn pair_coprimality_matches_direct() {
        let spec = MeanValueSpec::new(1, vec![Rational64::from(1), Rational64::from(2)], vec![2, 6], vec![1, 7]).unwrap();
        let sieve = SpfSieve::new(400);
        let w0 = weights(&spec, 0, 400, &sieve);
        let w1 = weights(&spec, 1, 300, &sieve);
        let mut direct = 0.0;
        for a in 1..=400u64 {
            for b in 1..=300u64 {
                if num_integer::gcd(a, b) == 1 {
                    direct += w0[a as usize] * w1[b as usize];
                }
            }
        }
        assert!((brute_lhs(&spec, &[400, 300]).unwrap() - direct).abs() < 1e-9);
    }
}
