//! Combinatorial subordinate Brauer group: alternating maps, the section, blocking sets.

use crate::error::{Error, Result};
use crate::f2res::{ResidueData, SubsetVec};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Which lift to take for `f(S)` when neither lift of `π(f(S))` lies in `W_S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SectionChoice {
    #[default]
    Canonical,
    Flipped,
}

/// An alternating map extended from its singleton values to every block.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RAltMap {
    n: usize,
    values: Vec<SubsetVec>,
}

impl RAltMap {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn singleton(&self, i: usize) -> SubsetVec {
        self.values[1usize << (i - 1)]
    }

    pub fn singletons(&self) -> Vec<SubsetVec> {
        (1..=self.n).map(|i| self.singleton(i)).collect()
    }

    /// `f(S)` for `S ⊆ [n]`.
    pub fn value(&self, s: SubsetVec) -> SubsetVec {
        self.values[s.index_mask() as usize]
    }

    pub fn is_trivial(&self) -> bool {
        self.values.iter().all(|v| v.is_empty())
    }
}

impl fmt::Display for RAltMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.singletons().iter().map(|s| s.to_string()).collect();
        write!(f, "[{}]", parts.join(" "))
    }
}

/// Checks `⟨{i}, f({j})⟩ = ⟨{j}, f({i})⟩` and `⟨{i}, f({i})⟩ = 0`.
pub fn is_alternating(singletons: &[SubsetVec]) -> bool {
    let n = singletons.len();
    (1..=n).all(|i| {
        SubsetVec::singleton(i).pairing(singletons[i - 1]) == 0
            && (i + 1..=n).all(|j| {
                SubsetVec::singleton(i).pairing(singletons[j - 1])
                    == SubsetVec::singleton(j).pairing(singletons[i - 1])
            })
    })
}

/// Extends singleton values to all blocks, preferring the lift of `π(f(S))` that lies in `W_S`.
pub fn section_extend(singletons: &[SubsetVec], res: &ResidueData, choice: SectionChoice) -> RAltMap {
    let n = res.n();
    assert_eq!(singletons.len(), n);
    let full = (1usize << n) - 1;
    let mut values = vec![SubsetVec::EMPTY; full + 1];
    for mask in 1..=full {
        if mask.count_ones() == 1 {
            values[mask] = singletons[mask.trailing_zeros() as usize];
            continue;
        }
        let mut q = SubsetVec::EMPTY;
        for (i, v) in singletons.iter().enumerate() {
            if mask >> i & 1 == 1 {
                q += v.proj();
            }
        }
        values[mask] = if mask == full {
            q
        } else {
            let w = &res.entry(SubsetVec::from_index_mask(mask as u64)).w;
            if w.contains(q) {
                q
            } else if w.contains(q.with_minus_flipped()) {
                q.with_minus_flipped()
            } else {
                match choice {
                    SectionChoice::Canonical => q,
                    SectionChoice::Flipped => q.with_minus_flipped(),
                }
            }
        };
    }
    RAltMap { n, values }
}

/// An element of the subordinate group: a subset `J` of the `𝒟`-singletons and an alternating map.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BmSubElem {
    pub j: SubsetVec,
    pub f: RAltMap,
    pub is_pbm: bool,
}

impl BmSubElem {
    pub fn new(j: SubsetVec, f: RAltMap) -> Self {
        let mut e = BmSubElem { j, f, is_pbm: false };
        e.is_pbm = projective_parity(&e.g_singletons()) == 0;
        e
    }

    /// `g({i}) = f({i}) + [i ∈ J]{−}`.
    pub fn g_singleton(&self, i: usize) -> SubsetVec {
        let mut v = self.f.singleton(i);
        if self.j.contains(i) {
            v += SubsetVec::MINUS;
        }
        v
    }

    pub fn g_singletons(&self) -> Vec<SubsetVec> {
        (1..=self.f.n()).map(|i| self.g_singleton(i)).collect()
    }

    /// `g(S)`: the singleton rule for `|S| = 1`, otherwise the section value.
    pub fn value(&self, s: SubsetVec) -> SubsetVec {
        if s.proj_len() == 1 {
            self.g_singleton(s.indices().next().expect("singleton"))
        } else {
            self.f.value(s)
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.j.is_empty() && self.f.is_trivial()
    }

    pub fn label(&self) -> String {
        if self.j.is_empty() {
            format!("{}", self.f)
        } else {
            format!("{} J={}", self.f, self.j)
        }
    }
}

/// `Σ_{i<j} ⟨{i}, g({j})⟩ + Σ_k ⟨{−}, g({k})⟩ mod 2`; zero exactly on the projective subgroup.
pub fn projective_parity(g_singletons: &[SubsetVec]) -> u8 {
    let n = g_singletons.len();
    let mut acc = 0u8;
    for j in 1..=n {
        acc ^= SubsetVec::MINUS.pairing(g_singletons[j - 1]);
        for i in 1..j {
            acc ^= SubsetVec::singleton(i).pairing(g_singletons[j - 1]);
        }
    }
    acc
}

// Null space of an F2 matrix whose rows are bitmasks over `ncols` columns.
fn nullspace(rows: &[u128], ncols: usize) -> Vec<u128> {
    let mut rows: Vec<u128> = rows.to_vec();
    let mut pivots: Vec<(usize, usize)> = Vec::new();
    let mut r = 0;
    for col in 0..ncols {
        let Some(found) = (r..rows.len()).find(|&k| rows[k] >> col & 1 == 1) else {
            continue;
        };
        rows.swap(r, found);
        for k in 0..rows.len() {
            if k != r && rows[k] >> col & 1 == 1 {
                rows[k] ^= rows[r];
            }
        }
        pivots.push((r, col));
        r += 1;
    }
    let pivot_cols: Vec<usize> = pivots.iter().map(|&(_, c)| c).collect();
    (0..ncols)
        .filter(|c| !pivot_cols.contains(c))
        .map(|free| {
            let mut v = 1u128 << free;
            for &(row, col) in &pivots {
                if rows[row] >> free & 1 == 1 {
                    v |= 1u128 << col;
                }
            }
            v
        })
        .collect()
}

/// Singleton tuples of the alternating maps with `f({i}) ∈ W_{i}`, as an F2 basis.
fn ralt_basis(res: &ResidueData) -> Result<Vec<Vec<SubsetVec>>> {
    let n = res.n();
    let mut vars: Vec<(usize, SubsetVec)> = Vec::new();
    for i in 1..=n {
        for b in res.singleton(i).w.basis() {
            vars.push((i, b));
        }
    }
    if vars.len() > 128 {
        return Err(Error::TooLarge("more than 128 singleton coordinates".into()));
    }
    let pairing_row = |target: usize, source: usize| -> u128 {
        vars.iter()
            .enumerate()
            .filter(|(_, &(i, b))| i == source && SubsetVec::singleton(target).pairing(b) == 1)
            .fold(0u128, |acc, (k, _)| acc | 1u128 << k)
    };
    let mut rows = Vec::new();
    for i in 1..=n {
        rows.push(pairing_row(i, i));
        for j in i + 1..=n {
            rows.push(pairing_row(i, j) ^ pairing_row(j, i));
        }
    }
    let kernel = nullspace(&rows, vars.len());
    Ok(kernel
        .into_iter()
        .map(|x| {
            let mut s = vec![SubsetVec::EMPTY; n];
            for (k, &(i, b)) in vars.iter().enumerate() {
                if x >> k & 1 == 1 {
                    s[i - 1] += b;
                }
            }
            s
        })
        .collect())
}

/// All of RAlt, ordered lexicographically on singleton values.
pub fn enumerate_ralt(res: &ResidueData, choice: SectionChoice) -> Result<Vec<RAltMap>> {
    let basis = ralt_basis(res)?;
    if basis.len() > 24 {
        return Err(Error::TooLarge(format!("RAlt has dimension {}", basis.len())));
    }
    let n = res.n();
    let mut tuples: Vec<Vec<SubsetVec>> = Vec::with_capacity(1 << basis.len());
    let mut cur = vec![SubsetVec::EMPTY; n];
    tuples.push(cur.clone());
    for k in 1u64..(1u64 << basis.len()) {
        let b = &basis[k.trailing_zeros() as usize];
        for i in 0..n {
            cur[i] += b[i];
        }
        tuples.push(cur.clone());
    }
    tuples.sort();
    Ok(tuples.into_iter().map(|t| section_extend(&t, res, choice)).collect())
}

/// All of BM_Sub: every RAlt map paired with every subset of the `𝒟`-singletons.
pub fn enumerate_bmsub(res: &ResidueData) -> Result<Vec<BmSubElem>> {
    enumerate_bmsub_with(res, SectionChoice::Canonical)
}

pub fn enumerate_bmsub_with(res: &ResidueData, choice: SectionChoice) -> Result<Vec<BmSubElem>> {
    let ralt = enumerate_ralt(res, choice)?;
    let d = res.d_singletons();
    let mut out = Vec::with_capacity(ralt.len() << d.len());
    for f in &ralt {
        for bits in 0u64..(1u64 << d.len()) {
            let j = SubsetVec::from_parts(
                false,
                &d.iter().enumerate().filter(|(k, _)| bits >> k & 1 == 1).map(|(_, &i)| i).collect::<Vec<_>>(),
            );
            out.push(BmSubElem::new(j, f.clone()));
        }
    }
    Ok(out)
}

/// Mod-2 exponent deciding the `(−1/p)` twist of block `S`.
pub fn kappa(g: &BmSubElem, s: SubsetVec) -> u8 {
    let idx: Vec<usize> = s.indices().collect();
    let mut acc = 0u8;
    for (a, &k) in idx.iter().enumerate() {
        acc ^= SubsetVec::MINUS.pairing(g.g_singleton(k));
        for &i in &idx[..a] {
            acc ^= SubsetVec::singleton(i).pairing(g.g_singleton(k));
        }
    }
    if !s.is_empty() {
        acc ^= SubsetVec::MINUS.pairing(g.f.value(s));
    }
    acc
}

/// An index `(S, T)` with `T ∈ W_S`.
pub type CharIndex = (SubsetVec, SubsetVec);

pub fn linked(a: CharIndex, b: CharIndex) -> bool {
    let (s1, t1) = a;
    let (s2, t2) = b;
    let odd = (s2.proj().pairing(t1) ^ s1.proj().pairing(t2)) == 1;
    odd && (s1.proj_len() == 1 || s2.proj_len() == 1)
}

/// Checks both defining conditions of a blocking set.
pub fn is_blocking_set(res: &ResidueData, members: &[CharIndex]) -> bool {
    let n = res.n();
    let in_index_set = members.iter().all(|&(s, t)| {
        s.proj_len() >= 1 && s.proj_len() < n && !s.has_minus() && res.entry(s).w.contains(t)
    });
    if !in_index_set {
        return false;
    }
    let covers = (1..=n).all(|k| members.iter().any(|&(s, _)| s == SubsetVec::singleton(k)));
    if !covers {
        return false;
    }
    members
        .iter()
        .filter(|(s, _)| s.proj_len() == 1)
        .all(|&a| members.iter().all(|&b| !linked(a, b)))
}

/// The bounds `min ⊆ 𝓑 ⊆ max` attached to one RAlt map.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sandwich {
    pub f: RAltMap,
    pub min: Vec<CharIndex>,
    pub max: Vec<CharIndex>,
}

impl Sandwich {
    pub fn contains(&self, members: &[CharIndex]) -> bool {
        self.min.iter().all(|m| members.contains(m)) && members.iter().all(|m| self.max.contains(m))
    }
}

pub fn classify_blocking_sets(res: &ResidueData) -> Result<Vec<Sandwich>> {
    let n = res.n();
    Ok(enumerate_ralt(res, SectionChoice::Canonical)?
        .into_iter()
        .map(|f| {
            let min = (1..=n).map(|i| (SubsetVec::singleton(i), f.singleton(i))).collect();
            let max = res
                .entries()
                .filter(|e| e.w.contains(f.value(e.s)))
                .map(|e| (e.s, f.value(e.s)))
                .collect();
            Sandwich { f, min, max }
        })
        .collect())
}

/// Outcome of comparing brute-force blocking sets with the sandwich classification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockingCheck {
    pub index_set_size: usize,
    pub blocking_sets: usize,
    pub sandwich_members: u128,
    pub consistent: bool,
}

/// Enumerates every subset of the index set (at most 2^14 of them) and checks that the blocking
/// sets are exactly the members of the sandwiches, each in exactly one.
pub fn verify_blocking_exhaustive(res: &ResidueData) -> Result<BlockingCheck> {
    let idx = res.index_set();
    if idx.len() > 14 {
        return Err(Error::TooLarge(format!("index set has {} elements", idx.len())));
    }
    let sandwiches = classify_blocking_sets(res)?;
    let mut blocking = 0usize;
    let mut consistent = true;
    for bits in 0u32..(1u32 << idx.len()) {
        let members: Vec<CharIndex> =
            idx.iter().enumerate().filter(|(k, _)| bits >> k & 1 == 1).map(|(_, &x)| x).collect();
        let is_block = is_blocking_set(res, &members);
        let hosts = sandwiches.iter().filter(|s| s.contains(&members)).count();
        if is_block {
            blocking += 1;
        }
        if (is_block && hosts != 1) || (!is_block && hosts != 0) {
            consistent = false;
        }
    }
    let sandwich_members: u128 = sandwiches
        .iter()
        .map(|s| 1u128 << (s.max.len() - s.min.len()))
        .sum();
    Ok(BlockingCheck {
        index_set_size: idx.len(),
        blocking_sets: blocking,
        sandwich_members,
        consistent: consistent && sandwich_members == blocking as u128,
    })
}
