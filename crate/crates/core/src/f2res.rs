//! F2 linear algebra on subsets of `[n] ∪ {−}`: residue generators, the spaces V_S and W_S.

use crate::error::{Error, Result};
use crate::family::MonomialConicFamily;
use num_rational::Rational64;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Subset of `{−} ∪ [n]`; bit 0 is the sign element, bit k is the index k.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct SubsetVec(pub u128);

pub const MAX_VARS: usize = 64;

impl SubsetVec {
    pub const EMPTY: SubsetVec = SubsetVec(0);
    pub const MINUS: SubsetVec = SubsetVec(1);

    pub fn singleton(k: usize) -> Self {
        debug_assert!((1..=MAX_VARS).contains(&k));
        SubsetVec(1u128 << k)
    }

    pub fn from_parts(minus: bool, indices: &[usize]) -> Self {
        let mut s = SubsetVec(u128::from(minus));
        for &k in indices {
            s.0 |= 1u128 << k;
        }
        s
    }

    /// Subset of `[n]` from a mask whose bit `i` stands for index `i + 1`.
    pub fn from_index_mask(mask: u64) -> Self {
        SubsetVec((mask as u128) << 1)
    }

    /// Mask over `[n]` with bit `i` standing for index `i + 1`; drops the sign element.
    pub fn index_mask(self) -> u64 {
        (self.0 >> 1) as u64
    }

    pub fn full(n: usize) -> Self {
        SubsetVec::from_index_mask(if n == 64 { u64::MAX } else { (1u64 << n) - 1 })
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn has_minus(self) -> bool {
        self.0 & 1 == 1
    }

    pub fn contains(self, k: usize) -> bool {
        (self.0 >> k) & 1 == 1
    }

    /// Projection onto `[n]`.
    pub fn proj(self) -> Self {
        SubsetVec(self.0 & !1)
    }

    pub fn with_minus_flipped(self) -> Self {
        SubsetVec(self.0 ^ 1)
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    /// Number of indices from `[n]`.
    pub fn proj_len(self) -> usize {
        self.proj().len()
    }

    pub fn intersect(self, other: Self) -> Self {
        SubsetVec(self.0 & other.0)
    }

    pub fn is_subset_of(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    /// `|S ∩ T| mod 2`.
    pub fn pairing(self, other: Self) -> u8 {
        ((self.0 & other.0).count_ones() & 1) as u8
    }

    pub fn indices(self) -> impl Iterator<Item = usize> {
        let bits = self.0 & !1;
        (1..128).filter(move |&k| (bits >> k) & 1 == 1)
    }

    /// Parses `∅`, `{}` or `{-,1,3}`.
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        if t == "∅" || t == "{}" {
            return Ok(SubsetVec::EMPTY);
        }
        let inner = t
            .strip_prefix('{')
            .and_then(|s| s.strip_suffix('}'))
            .ok_or_else(|| Error::Domain(format!("bad subset literal `{text}`")))?;
        let mut s = SubsetVec::EMPTY;
        for part in inner.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if part == "-" {
                s.0 |= 1;
            } else {
                let k: usize = part
                    .parse()
                    .map_err(|_| Error::Domain(format!("bad subset element `{part}`")))?;
                if !(1..=MAX_VARS).contains(&k) {
                    return Err(Error::Domain(format!("index {k} out of range")));
                }
                s.0 |= 1u128 << k;
            }
        }
        Ok(s)
    }
}

// addition over F2 is symmetric difference
impl std::ops::Add for SubsetVec {
    type Output = SubsetVec;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn add(self, rhs: Self) -> Self {
        SubsetVec(self.0 ^ rhs.0)
    }
}

impl std::ops::AddAssign for SubsetVec {
    #[allow(clippy::suspicious_op_assign_impl)]
    fn add_assign(&mut self, rhs: Self) {
        self.0 ^= rhs.0;
    }
}

impl fmt::Display for SubsetVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "∅");
        }
        let mut parts: Vec<String> = Vec::new();
        if self.has_minus() {
            parts.push("-".into());
        }
        parts.extend(self.indices().map(|k| k.to_string()));
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// Subspace of the F2-vector space of subsets, kept as a reduced echelon basis.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct F2Space {
    basis: Vec<u128>,
}

impl F2Space {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn span<I: IntoIterator<Item = SubsetVec>>(vectors: I) -> Self {
        let mut s = Self::zero();
        for v in vectors {
            s.insert(v);
        }
        s
    }

    fn reduce(&self, mut x: u128) -> u128 {
        for &b in &self.basis {
            let pivot = 127 - b.leading_zeros();
            if (x >> pivot) & 1 == 1 {
                x ^= b;
            }
        }
        x
    }

    /// Adds a vector; returns whether the dimension grew.
    pub fn insert(&mut self, v: SubsetVec) -> bool {
        let x = self.reduce(v.0);
        if x == 0 {
            return false;
        }
        let pivot = 127 - x.leading_zeros();
        for b in &mut self.basis {
            if (*b >> pivot) & 1 == 1 {
                *b ^= x;
            }
        }
        self.basis.push(x);
        self.basis.sort_unstable_by(|a, b| b.cmp(a));
        true
    }

    pub fn contains(&self, v: SubsetVec) -> bool {
        self.reduce(v.0) == 0
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn size(&self) -> u128 {
        1u128 << self.basis.len()
    }

    pub fn basis(&self) -> Vec<SubsetVec> {
        let mut b: Vec<SubsetVec> = self.basis.iter().map(|&x| SubsetVec(x)).collect();
        b.sort_unstable();
        b
    }

    /// All elements in increasing bit order.
    pub fn elements(&self) -> Vec<SubsetVec> {
        let mut out = Vec::with_capacity(1usize << self.dim());
        let mut cur = 0u128;
        out.push(SubsetVec(cur));
        for k in 1u64..(1u64 << self.dim()) {
            cur ^= self.basis[k.trailing_zeros() as usize];
            out.push(SubsetVec(cur));
        }
        out.sort_unstable();
        out
    }

    /// `W` for this `V`: the elements without the sign element if `{−} ∈ V`, else `V` itself.
    pub fn without_minus(&self) -> Self {
        if self.contains(SubsetVec::MINUS) {
            F2Space::span(self.basis.iter().map(|&b| SubsetVec(b & !1)))
        } else {
            self.clone()
        }
    }
}

impl fmt::Display for F2Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let els: Vec<String> = self.elements().iter().map(|e| e.to_string()).collect();
        write!(f, "{{{}}}", els.join(", "))
    }
}

/// Residue generator `g_{i,S}` of conic `i` (0-based) along the block `S ⊆ [n]`.
pub fn generator(fam: &MonomialConicFamily, i: usize, s: SubsetVec) -> SubsetVec {
    let slots = fam.conics()[i];
    let par: [u8; 3] = [0, 1, 2].map(|j| (s.proj().intersect(slots[j].proj()).len() % 2) as u8);
    if par[0] == par[1] && par[1] == par[2] {
        return SubsetVec::EMPTY;
    }
    let odd_one = if par[0] != par[1] && par[0] != par[2] {
        0
    } else if par[1] != par[0] && par[1] != par[2] {
        1
    } else {
        2
    };
    let mut g = SubsetVec::MINUS;
    for (j, &slot) in slots.iter().enumerate() {
        if j != odd_one {
            g += slot;
        }
    }
    g
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResidueEntry {
    pub s: SubsetVec,
    pub generators: Vec<SubsetVec>,
    pub v: F2Space,
    pub w: F2Space,
    pub in_d: bool,
}

impl ResidueEntry {
    /// `c_S = |W_S|`.
    pub fn c(&self) -> u128 {
        self.w.size()
    }
}

/// Residue spaces for every block `∅ ⊂ S ⊊ [n]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResidueData {
    n: usize,
    entries: Vec<Option<ResidueEntry>>,
}

/// Blocks `∅ ⊂ S ⊊ [n]` ordered by size, then lexicographically.
pub fn proper_blocks(n: usize) -> Vec<SubsetVec> {
    let full = (1u64 << n) - 1;
    let mut masks: Vec<u64> = (1..full).collect();
    masks.sort_by_key(|&m| {
        let idx: Vec<u32> = (0..n as u32).filter(|&i| (m >> i) & 1 == 1).collect();
        (m.count_ones(), idx)
    });
    masks.into_iter().map(SubsetVec::from_index_mask).collect()
}

impl ResidueData {
    pub fn build(fam: &MonomialConicFamily) -> Self {
        let n = fam.n();
        let mut entries = vec![None; 1usize << n];
        for s in proper_blocks(n) {
            let generators: Vec<SubsetVec> = (0..fam.m()).map(|i| generator(fam, i, s)).collect();
            let v = F2Space::span(generators.iter().copied());
            let in_d = v.contains(SubsetVec::MINUS);
            let w = v.without_minus();
            entries[s.index_mask() as usize] = Some(ResidueEntry { s, generators, v, w, in_d });
        }
        ResidueData { n, entries }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Entry for `∅ ⊂ S ⊊ [n]`.
    pub fn entry(&self, s: SubsetVec) -> &ResidueEntry {
        self.entries[s.index_mask() as usize]
            .as_ref()
            .unwrap_or_else(|| panic!("no residue entry for {s}"))
    }

    pub fn entries(&self) -> impl Iterator<Item = &ResidueEntry> {
        proper_blocks(self.n).into_iter().map(move |s| self.entry(s))
    }

    pub fn singleton(&self, i: usize) -> &ResidueEntry {
        self.entry(SubsetVec::singleton(i))
    }

    /// Indices `i` with `{i} ∈ 𝒟`.
    pub fn d_singletons(&self) -> Vec<usize> {
        (1..=self.n).filter(|&i| self.singleton(i).in_d).collect()
    }

    /// `Σ_i 1/|V_{i}|`.
    pub fn gamma(&self) -> Rational64 {
        (1..=self.n)
            .map(|i| Rational64::new(1, self.singleton(i).v.size() as i64))
            .sum()
    }

    /// Index set of pairs `(S, T)` with `T ∈ W_S`.
    pub fn index_set(&self) -> Vec<(SubsetVec, SubsetVec)> {
        self.entries()
            .flat_map(|e| e.w.elements().into_iter().map(move |t| (e.s, t)))
            .collect()
    }
}

/// Evaluates both sides of the detector identity for block `S` at the odd prime `p`,
/// with `t` the residues of `t_1..t_n` (the sign element is `-1`). Errors if they differ.
pub fn expand_indicator(res: &ResidueData, s: SubsetVec, t: &[i64], p: u64) -> Result<Rational64> {
    if t.len() != res.n() {
        return Err(Error::Domain("residue vector has wrong length".into()));
    }
    if p < 3 || !crate::qlocal::is_prime(p) {
        return Err(Error::Domain(format!("{p} is not an odd prime")));
    }
    if t.iter().any(|&x| x.rem_euclid(p as i64) == 0) {
        return Err(Error::Domain(format!("{p} divides a residue")));
    }
    let e = res.entry(s);
    let symbol = |set: SubsetVec| -> i64 {
        let mut prod: i128 = if set.has_minus() { -1 } else { 1 };
        for k in set.indices() {
            prod = (prod * t[k - 1] as i128).rem_euclid(p as i128);
        }
        crate::qlocal::jacobi(prod, p) as i64
    };
    let m = e.generators.len() as u32;
    if m > 60 {
        return Err(Error::TooLarge("too many conics for the exact detector".into()));
    }
    let lhs_num: i64 = e.generators.iter().map(|&g| 1 + symbol(g)).product();
    let lhs = Rational64::new(lhs_num, 1i64 << m);
    let rhs = if e.in_d && p % 4 == 3 {
        Rational64::from(0)
    } else {
        let total: i64 = e.w.elements().into_iter().map(symbol).sum();
        Rational64::new(total, e.c() as i64)
    };
    if lhs != rhs {
        return Err(Error::Mismatch(format!(
            "detector identity at S={s}, p={p}, t={t:?}: {lhs} vs {rhs}"
        )));
    }
    Ok(lhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{builtin, parse_family};

    fn sv(s: &str) -> SubsetVec {
        SubsetVec::parse(s).unwrap()
    }

    fn set_of(items: &[&str]) -> Vec<SubsetVec> {
        let mut v: Vec<SubsetVec> = items.iter().map(|s| sv(s)).collect();
        v.sort();
        v
    }

    #[test]
    fn subset_basics() {
        let a = sv("{-,1,3}");
        assert_eq!(a.to_string(), "{-,1,3}");
        assert_eq!(sv("∅"), SubsetVec::EMPTY);
        assert_eq!(a + sv("{1}"), sv("{-,3}"));
        assert_eq!(a.pairing(sv("{1,3}")), 0);
        assert_eq!(a.pairing(sv("{-,2}")), 1);
        assert_eq!(a.proj(), sv("{1,3}"));
    }

    #[test]
    fn space_membership_and_enumeration() {
        let v = F2Space::span([sv("{1,2}"), sv("{2,3}"), sv("{1,3}")]);
        assert_eq!(v.dim(), 2);
        assert!(v.contains(sv("{1,3}")));
        assert!(!v.contains(sv("{1}")));
        assert_eq!(v.elements(), set_of(&["∅", "{1,2}", "{1,3}", "{2,3}"]));
        let w = F2Space::span([sv("{-}"), sv("{-,1}")]);
        assert_eq!(w.without_minus().elements(), set_of(&["∅", "{1}"]));
    }

    #[test]
    fn redei_generator_example() {
        let f = builtin("redei").unwrap();
        assert_eq!(generator(&f, 0, sv("{1}")), sv("{2}"));
        let all_even = generator(&f, 0, sv("{3}"));
        assert_eq!(all_even, SubsetVec::EMPTY);
    }

    #[test]
    fn redei_table() {
        let res = ResidueData::build(&builtin("redei").unwrap());
        let expected = [
            ("{1}", vec!["∅", "{2}", "{3}", "{2,3}"]),
            ("{2}", vec!["∅", "{1}", "{3}", "{1,3}"]),
            ("{3}", vec!["∅", "{1}", "{2}", "{1,2}"]),
            ("{2,3}", vec!["∅", "{1}", "{-,2,3}", "{-,1,2,3}"]),
            ("{1,3}", vec!["∅", "{2}", "{-,1,3}", "{-,1,2,3}"]),
            ("{1,2}", vec!["∅", "{3}", "{-,1,2}", "{-,1,2,3}"]),
        ];
        for (s, els) in expected {
            let e = res.entry(sv(s));
            assert_eq!(e.v.elements(), set_of(&els), "{s}");
            assert_eq!(e.v, e.w);
            assert!(!e.in_d);
        }
        assert_eq!(res.gamma(), Rational64::new(3, 4));
    }

    #[test]
    fn planar_table_uses_generator_rule() {
        let res = ResidueData::build(&builtin("planar").unwrap());
        assert_eq!(res.entry(sv("{1}")).v.elements(), set_of(&["∅", "{-,2,3}"]));
        assert_eq!(res.entry(sv("{1,2}")).w.elements(), set_of(&["∅", "{-,1,2}"]));
        assert!(res.d_singletons().is_empty());
        assert_eq!(res.index_set().len(), 12);
    }

    #[test]
    fn detector_identity_with_minus_in_v() {
        let fam = parse_family("vars = 3\nconic = t1 | t2 | t3\nconic = t1 | -t2 | t3").unwrap();
        let res = ResidueData::build(&fam);
        let s = sv("{3}");
        assert!(res.entry(s).in_d);
        for t in [[1, 1, 1], [2, 3, 5], [6, 1, 4]] {
            assert_eq!(expand_indicator(&res, s, &t, 7).unwrap(), Rational64::from(0));
            expand_indicator(&res, s, &t, 13).unwrap();
        }
        let ones = expand_indicator(&res, sv("{1}"), &[1, 1, 1], 5).unwrap();
        assert_eq!(ones, Rational64::from(1));
        assert!(expand_indicator(&res, s, &[7, 1, 1], 7).is_err());
    }
}
