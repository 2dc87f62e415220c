//! Bulk local-solubility test for fibres of a fixed family.
//!
//! Every Hilbert symbol of a monomial conic is bimultiplicative in the coordinates, so per place
//! it reduces to parities of valuations and of unit characters, packed as bitmasks over `[n]`.

use super::primes::{factorize, SpfSieve};
use super::jacobi;
use crate::family::MonomialConicFamily;

#[inline]
fn par(x: u64) -> u8 {
    (x.count_ones() & 1) as u8
}

#[derive(Debug, Clone, Copy)]
struct ConicMask {
    sets: [u64; 3],
    neg: [u8; 3],
}

/// Odd primes dividing a number to an odd power, tabulated up to a bound.
#[derive(Debug, Clone)]
pub struct PrimeTable {
    start: Vec<u32>,
    primes: Vec<u32>,
    sieve: SpfSieve,
}

impl PrimeTable {
    pub fn new(limit: u64) -> Self {
        let sieve = SpfSieve::new(limit);
        let mut start = Vec::with_capacity(limit as usize + 2);
        let mut primes = Vec::new();
        start.push(0);
        for m in 0..=limit {
            if m >= 2 {
                for (p, e) in sieve.factor(m) {
                    if p > 2 && e % 2 == 1 {
                        primes.push(p as u32);
                    }
                }
            }
            start.push(primes.len() as u32);
        }
        PrimeTable { start, primes, sieve }
    }

    pub fn limit(&self) -> u64 {
        self.sieve.limit()
    }

    pub fn sieve(&self) -> &SpfSieve {
        &self.sieve
    }

    /// Odd primes with odd exponent in `m`, appended to `out`.
    pub fn odd_kernel_primes(&self, m: u64, out: &mut Vec<u64>) {
        if m <= self.limit() {
            let (a, b) = (self.start[m as usize] as usize, self.start[m as usize + 1] as usize);
            out.extend(self.primes[a..b].iter().map(|&p| p as u64));
        } else {
            out.extend(
                factorize(m)
                    .into_iter()
                    .filter(|&(p, e)| p > 2 && e % 2 == 1)
                    .map(|(p, _)| p),
            );
        }
    }
}

/// Precompiled solubility test for the fibres of one family.
#[derive(Debug, Clone)]
pub struct FibreKernel {
    n: usize,
    conics: Vec<ConicMask>,
    support: u64,
}

/// Scratch space reused across fibres.
#[derive(Debug, Default, Clone)]
pub struct KernelScratch {
    primes: Vec<u64>,
}

impl FibreKernel {
    pub fn new(fam: &MonomialConicFamily) -> Self {
        let conics: Vec<ConicMask> = fam
            .conics()
            .iter()
            .map(|c| ConicMask {
                sets: [c[0].index_mask(), c[1].index_mask(), c[2].index_mask()],
                neg: [c[0].has_minus() as u8, c[1].has_minus() as u8, c[2].has_minus() as u8],
            })
            .collect();
        let support = conics.iter().fold(0, |acc, c| acc | c.sets[0] | c.sets[1] | c.sets[2]);
        FibreKernel { n: fam.n(), conics, support }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn real_ok(&self, t: &[i64]) -> bool {
        let negmask = t
            .iter()
            .enumerate()
            .fold(0u64, |m, (i, &x)| m | (u64::from(x < 0) << i));
        self.conics.iter().all(|c| {
            let s0 = c.neg[0] ^ par(negmask & c.sets[0]);
            let s1 = c.neg[1] ^ par(negmask & c.sets[1]);
            let s2 = c.neg[2] ^ par(negmask & c.sets[2]);
            !(s0 == s1 && s1 == s2)
        })
    }

    pub fn two_ok(&self, t: &[i64]) -> bool {
        let (mut lam, mut eps, mut omg) = (0u64, 0u64, 0u64);
        for (i, &x) in t.iter().enumerate() {
            let v = x.trailing_zeros();
            let r = (x >> v).rem_euclid(8);
            lam |= u64::from(v & 1) << i;
            eps |= u64::from(r == 3 || r == 7) << i;
            omg |= u64::from(r == 3 || r == 5) << i;
        }
        self.conics.iter().all(|c| {
            let coef = |j: usize| {
                (
                    par(lam & c.sets[j]),
                    c.neg[j] ^ par(eps & c.sets[j]),
                    par(omg & c.sets[j]),
                )
            };
            let (aa, ea, oa) = coef(0);
            let (ab, eb, ob) = coef(1);
            let (ac, ec, oc) = coef(2);
            let (al1, e1, o1) = (aa ^ ac, 1 ^ ea ^ ec, oa ^ oc);
            let (al2, e2, o2) = (ab ^ ac, 1 ^ eb ^ ec, ob ^ oc);
            (e1 & e2) ^ (al1 & o2) ^ (al2 & o1) == 0
        })
    }

    /// Checks every conic at the odd prime `p`.
    pub fn odd_ok(&self, t: &[i64], p: u64) -> bool {
        let e = (p % 4 == 3) as u8;
        let (mut vmask, mut lmask) = (0u64, 0u64);
        let pi = p as i64;
        for (i, &x) in t.iter().enumerate() {
            let mut y = x;
            let mut v = 0u32;
            while y % pi == 0 {
                y /= pi;
                v += 1;
            }
            vmask |= u64::from(v & 1) << i;
            lmask |= u64::from(jacobi(y as i128, p) == -1) << i;
        }
        if vmask & self.support == 0 {
            return true;
        }
        self.conics.iter().all(|c| {
            let coef = |j: usize| (par(vmask & c.sets[j]), (c.neg[j] & e) ^ par(lmask & c.sets[j]));
            let (aa, la) = coef(0);
            let (ab, lb) = coef(1);
            let (ac, lc) = coef(2);
            let (alpha, lu) = (aa ^ ac, e ^ la ^ lc);
            let (beta, lw) = (ab ^ ac, e ^ lb ^ lc);
            (alpha & beta & e) ^ (beta & lu) ^ (alpha & lw) == 0
        })
    }

    /// Everywhere local solubility; `t` must have nonzero entries.
    pub fn els(&self, t: &[i64], table: &PrimeTable, scratch: &mut KernelScratch) -> bool {
        debug_assert_eq!(t.len(), self.n);
        if !self.real_ok(t) || !self.two_ok(t) {
            return false;
        }
        scratch.primes.clear();
        for (i, &x) in t.iter().enumerate() {
            if self.support >> i & 1 == 1 {
                table.odd_kernel_primes(x.unsigned_abs(), &mut scratch.primes);
            }
        }
        let count = scratch.primes.len();
        for k in 0..count {
            let p = scratch.primes[k];
            if scratch.primes[..k].contains(&p) {
                continue;
            }
            if !self.odd_ok(t, p) {
                return false;
            }
        }
        true
    }
}
