//! Quadratic local arithmetic over the completions of Q.

pub mod kernel;
pub mod primes;

use crate::error::{Error, Result};
use crate::family::MonomialConicFamily;
use serde::{Deserialize, Serialize};
use std::fmt;

pub use kernel::{FibreKernel, KernelScratch, PrimeTable};
pub use primes::{factorize, is_prime, primes_up_to, SpfSieve};

/// A place of Q.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PlaceRef {
    Real,
    Two,
    /// An odd prime; build through [`PlaceRef::odd`] to have it checked.
    Odd(u64),
}

impl PlaceRef {
    pub fn odd(p: u64) -> Result<Self> {
        if p > 2 && is_prime(p) {
            Ok(PlaceRef::Odd(p))
        } else {
            Err(Error::Domain(format!("{p} is not an odd prime")))
        }
    }

    /// Place attached to a rational prime, 2 included.
    pub fn prime(p: u64) -> Result<Self> {
        if p == 2 {
            Ok(PlaceRef::Two)
        } else {
            Self::odd(p)
        }
    }
}

impl fmt::Display for PlaceRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlaceRef::Real => write!(f, "real"),
            PlaceRef::Two => write!(f, "2"),
            PlaceRef::Odd(p) => write!(f, "{p}"),
        }
    }
}

/// Jacobi symbol `(a/n)` for odd `n >= 1`.
pub fn jacobi(a: i128, n: u64) -> i8 {
    debug_assert!(n % 2 == 1);
    let n128 = n as i128;
    let mut a = a.rem_euclid(n128) as u64;
    let mut n = n;
    let mut result = 1i8;
    while a != 0 {
        let tz = a.trailing_zeros();
        a >>= tz;
        if tz % 2 == 1 && (n % 8 == 3 || n % 8 == 5) {
            result = -result;
        }
        if a % 4 == 3 && n % 4 == 3 {
            result = -result;
        }
        std::mem::swap(&mut a, &mut n);
        a %= n;
    }
    if n == 1 {
        result
    } else {
        0
    }
}

/// Kronecker symbol `(a/n)`, defined here for odd positive `n` where it is the Jacobi symbol.
pub fn kronecker_symbol(a: i64, n: i64) -> Result<i8> {
    if n <= 0 || n % 2 == 0 {
        return Err(Error::Domain(format!("kronecker symbol needs odd positive modulus, got {n}")));
    }
    Ok(jacobi(a as i128, n as u64))
}

/// Splits off the exact power of `p`: returns `(v, x / p^v)`.
pub(crate) fn split_valuation(mut x: i128, p: u64) -> (u32, i128) {
    let p = p as i128;
    let mut v = 0;
    while x % p == 0 {
        x /= p;
        v += 1;
    }
    (v, x)
}

// eps(u) = (u-1)/2 and omega(u) = (u^2-1)/8 modulo 2, for odd u.
fn eps_omega(u: i128) -> (u8, u8) {
    let r = u.rem_euclid(8);
    let eps = u8::from(r == 3 || r == 7);
    let omega = u8::from(r == 3 || r == 5);
    (eps, omega)
}

/// Hilbert symbol on nonzero arguments; `true` means +1.
pub(crate) fn hilbert_is_trivial(a: i128, b: i128, v: PlaceRef) -> bool {
    match v {
        PlaceRef::Real => !(a < 0 && b < 0),
        PlaceRef::Two => {
            let (alpha, u) = split_valuation(a, 2);
            let (beta, w) = split_valuation(b, 2);
            let (eu, ou) = eps_omega(u);
            let (ew, ow) = eps_omega(w);
            let e = (eu & ew) ^ ((alpha as u8 & 1) & ow) ^ ((beta as u8 & 1) & ou);
            e == 0
        }
        PlaceRef::Odd(p) => {
            let (alpha, u) = split_valuation(a, p);
            let (beta, w) = split_valuation(b, p);
            let mut sign = 1i8;
            if alpha % 2 == 1 && beta % 2 == 1 && p % 4 == 3 {
                sign = -sign;
            }
            if beta % 2 == 1 {
                sign *= jacobi(u, p);
            }
            if alpha % 2 == 1 {
                sign *= jacobi(w, p);
            }
            sign == 1
        }
    }
}

/// Hilbert symbol `(a, b)_v` as ±1.
pub fn hilbert_symbol(a: i64, b: i64, v: PlaceRef) -> Result<i8> {
    if a == 0 || b == 0 {
        return Err(Error::Domain("hilbert symbol of zero".into()));
    }
    Ok(if hilbert_is_trivial(a as i128, b as i128, v) { 1 } else { -1 })
}

/// Whether `A x² + B y² + C z² = 0` has a nontrivial solution over the completion at `v`.
pub fn conic_soluble_at(a: i64, b: i64, c: i64, v: PlaceRef) -> Result<bool> {
    if a == 0 || b == 0 || c == 0 {
        return Err(Error::DegenerateConic);
    }
    let (a, b, c) = (a as i128, b as i128, c as i128);
    Ok(hilbert_is_trivial(-a * c, -b * c, v))
}

/// Places at which a conic with these (nonzero) coefficients can fail to be soluble.
pub fn relevant_places(coefficients: &[i64]) -> Vec<PlaceRef> {
    let mut primes: Vec<u64> = coefficients
        .iter()
        .flat_map(|&c| factorize(c.unsigned_abs()).into_iter().map(|(p, _)| p))
        .filter(|&p| p > 2)
        .collect();
    primes.sort_unstable();
    primes.dedup();
    let mut out = vec![PlaceRef::Real, PlaceRef::Two];
    out.extend(primes.into_iter().map(PlaceRef::Odd));
    out
}

/// Everywhere local solubility of the fibre of `fam` over `t`.
pub fn everywhere_locally_soluble(fam: &MonomialConicFamily, t: &[i64]) -> Result<bool> {
    let fibre = fam.evaluate(t)?;
    let places = relevant_places(t);
    for &[a, b, c] in &fibre.coefficients {
        for &v in &places {
            if !conic_soluble_at(a, b, c, v)? {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Residue of an odd integer modulo 8, represented in `{±1, ±3}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UnitClassMod8(i8);

impl UnitClassMod8 {
    pub const ALL: [UnitClassMod8; 4] = [
        UnitClassMod8(1),
        UnitClassMod8(-1),
        UnitClassMod8(3),
        UnitClassMod8(-3),
    ];

    pub fn from_odd(x: i128) -> Self {
        match x.rem_euclid(8) {
            1 => UnitClassMod8(1),
            3 => UnitClassMod8(3),
            5 => UnitClassMod8(-3),
            7 => UnitClassMod8(-1),
            _ => panic!("even argument {x}"),
        }
    }

    pub fn value(self) -> i8 {
        self.0
    }
}

/// `t = s · 2^lambda · a · b²` with `a` odd squarefree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SquarefreeDecomposition {
    pub s: i8,
    pub lambda: u8,
    pub a: u64,
    pub b: u64,
    pub nu2: u32,
    pub u: UnitClassMod8,
}

pub fn squarefree_decompose(t: i64) -> Result<SquarefreeDecomposition> {
    if t == 0 {
        return Err(Error::Domain("cannot decompose 0".into()));
    }
    let s: i8 = if t < 0 { -1 } else { 1 };
    let m = t.unsigned_abs();
    let nu2 = m.trailing_zeros();
    let mut a = 1u64;
    let mut b = 1u64 << (nu2 / 2);
    for (p, e) in factorize(m >> nu2) {
        if e % 2 == 1 {
            a *= p;
        }
        b *= p.pow(e / 2);
    }
    Ok(SquarefreeDecomposition {
        s,
        lambda: (nu2 % 2) as u8,
        a,
        b,
        nu2,
        u: UnitClassMod8::from_odd(s as i128 * a as i128),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronecker_examples() {
        assert_eq!(kronecker_symbol(1, 15).unwrap(), 1);
        assert_eq!(kronecker_symbol(3, 5).unwrap(), -1);
        assert_eq!(kronecker_symbol(2, 7).unwrap(), 1);
        assert!(kronecker_symbol(3, 8).is_err());
        assert!(kronecker_symbol(3, -3).is_err());
        assert!(kronecker_symbol(3, 0).is_err());
    }

    #[test]
    fn hilbert_examples() {
        assert_eq!(hilbert_symbol(-1, -1, PlaceRef::Real).unwrap(), -1);
        assert_eq!(hilbert_symbol(-1, -1, PlaceRef::Two).unwrap(), -1);
        assert_eq!(hilbert_symbol(5, 3, PlaceRef::odd(3).unwrap()).unwrap(), -1);
        assert!(hilbert_symbol(0, 3, PlaceRef::Real).is_err());
    }

    #[test]
    fn place_constructor_checks_primality() {
        assert!(PlaceRef::odd(9).is_err());
        assert!(PlaceRef::odd(2).is_err());
        assert_eq!(PlaceRef::prime(2).unwrap(), PlaceRef::Two);
    }

    #[test]
    fn conic_examples() {
        for v in [PlaceRef::Real, PlaceRef::Two, PlaceRef::Odd(3), PlaceRef::Odd(7)] {
            assert!(conic_soluble_at(1, 1, -1, v).unwrap());
        }
        assert!(!conic_soluble_at(1, 1, 1, PlaceRef::Real).unwrap());
        assert!(!conic_soluble_at(1, 1, -3, PlaceRef::Odd(3)).unwrap());
        assert_eq!(conic_soluble_at(0, 1, 1, PlaceRef::Real), Err(Error::DegenerateConic));
    }

    #[test]
    fn decomposition_examples() {
        let d = squarefree_decompose(1).unwrap();
        assert_eq!((d.s, d.lambda, d.a, d.b), (1, 0, 1, 1));
        let d = squarefree_decompose(-48).unwrap();
        assert_eq!((d.s, d.lambda, d.a, d.b, d.nu2), (-1, 0, 3, 4, 4));
        assert_eq!(d.u.value(), -3);
        let d = squarefree_decompose(-50).unwrap();
        assert_eq!((d.s, d.lambda, d.a, d.b), (-1, 1, 1, 5));
        assert!(squarefree_decompose(0).is_err());
    }
}
