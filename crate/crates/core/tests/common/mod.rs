#![allow(dead_code)]

use conic_brauer::family::MonomialConicFamily;
use std::collections::HashMap;

/// Sign times the squarefree kernel, by trial division.
pub fn squarefree_part(x: i64) -> i64 {
    assert!(x != 0);
    let mut m = x.unsigned_abs();
    let mut kernel = 1i64;
    let mut d = 2u64;
    while d * d <= m {
        let mut e = 0;
        while m.is_multiple_of(d) {
            m /= d;
            e += 1;
        }
        if e % 2 == 1 {
            kernel *= d as i64;
        }
        d += 1;
    }
    kernel *= m as i64;
    x.signum() * kernel
}

pub fn prime_divisors(x: i64) -> Vec<u64> {
    let mut m = x.unsigned_abs();
    let mut out = Vec::new();
    let mut d = 2u64;
    while d * d <= m {
        if m.is_multiple_of(d) {
            out.push(d);
            while m.is_multiple_of(d) {
                m /= d;
            }
        }
        d += 1;
    }
    if m > 1 {
        out.push(m);
    }
    out
}

fn residues_of(c: i64, step: u64, m: u64) -> Vec<bool> {
    let mut set = vec![false; m as usize];
    let mut z = 0u64;
    while z < m {
        let v = (c as i128 * (z * z) as i128).rem_euclid(m as i128) as usize;
        set[v] = true;
        z += step;
    }
    set
}

/// Primitive solution of `a x² + b y² + c z² ≡ 0 mod p^k` by searching the three affine charts.
pub fn primitive_solution_mod(a: i64, b: i64, c: i64, p: u64, k: u32) -> bool {
    let m = p.pow(k);
    let red = |v: i128| v.rem_euclid(m as i128) as usize;
    let cz = residues_of(c, 1, m);
    // x = 1
    for y in 0..m {
        if cz[red(-(a as i128) - b as i128 * (y * y) as i128)] {
            return true;
        }
    }
    // p | x, y = 1
    let mut x = 0u64;
    while x < m {
        if cz[red(-(b as i128) - a as i128 * (x * x) as i128)] {
            return true;
        }
        x += p;
    }
    // p | x, p | y, z = 1
    let by = residues_of(b, p, m);
    let mut x = 0u64;
    while x < m {
        if by[red(-(c as i128) - a as i128 * (x * x) as i128)] {
            return true;
        }
        x += p;
    }
    false
}

/// Local solubility of `a x² + b y² + c z² = 0` at the prime `p` (0 for the real place).
pub fn conic_soluble_oracle(a: i64, b: i64, c: i64, p: u64) -> bool {
    let (a, b, c) = (squarefree_part(a), squarefree_part(b), squarefree_part(c));
    if p == 0 {
        return !(a.signum() == b.signum() && b.signum() == c.signum());
    }
    let k = if p == 2 {
        8
    } else if [a, b, c].iter().any(|&v| v % p as i64 == 0) {
        3
    } else {
        1
    };
    primitive_solution_mod(a, b, c, p, k)
}

/// `(a, b)_v` from the solubility of `a x² + b y² = z²`; `p = 0` is the real place.
pub fn hilbert_oracle(a: i64, b: i64, p: u64) -> i8 {
    if conic_soluble_oracle(a, b, -1, p) {
        1
    } else {
        -1
    }
}

/// Memoised everywhere-local-solubility oracle for fibres of one family.
pub struct ElsOracle<'a> {
    fam: &'a MonomialConicFamily,
    memo: HashMap<(i64, i64, i64, u64), bool>,
}

impl<'a> ElsOracle<'a> {
    pub fn new(fam: &'a MonomialConicFamily) -> Self {
        ElsOracle { fam, memo: HashMap::new() }
    }

    pub fn els(&mut self, t: &[i64]) -> bool {
        let fibre = self.fam.evaluate(t).unwrap();
        for &[a, b, c] in &fibre.coefficients {
            let (a, b, c) = (squarefree_part(a), squarefree_part(b), squarefree_part(c));
            let mut places = vec![0u64, 2, 3, 5];
            for v in [a, b, c] {
                places.extend(prime_divisors(v));
            }
            places.sort_unstable();
            places.dedup();
            for p in places {
                let ok = *self.memo.entry((a, b, c, p)).or_insert_with(|| conic_soluble_oracle(a, b, c, p));
                if !ok {
                    return false;
                }
            }
        }
        true
    }
}
