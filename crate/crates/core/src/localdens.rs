//! Local densities at every place and the assembled leading constant.

use crate::brgroup::{enumerate_bmsub_with, kappa, BmSubElem, RAltMap, SectionChoice};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::f2res::{ResidueData, SubsetVec};
use crate::family::{Mode, MonomialConicFamily, SideCondition};
use crate::qlocal::{conic_soluble_at, hilbert_symbol, primes_up_to, PlaceRef, UnitClassMod8};
use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

/// `(−1, a)_2` for odd `a`.
pub fn chi4(a: i64) -> i8 {
    if a.rem_euclid(4) == 1 {
        1
    } else {
        -1
    }
}

/// `Tw_v(g, a) = ∏_i (−1, a_i)_v^{⟨−, g({i})⟩} · ∏_{i<j} (a_i, a_j)_v^{⟨{j}, g({i})⟩}`.
pub fn tw(g: &BmSubElem, a: &[i64], v: PlaceRef) -> Result<i8> {
    let n = g.f.n();
    if a.len() != n {
        return Err(Error::Domain(format!("expected {n} coordinates")));
    }
    if let Some(i) = a.iter().position(|&x| x == 0) {
        return Err(Error::DegenerateFibre(i + 1));
    }
    let mut sign = 1i8;
    for i in 1..=n {
        let gi = g.g_singleton(i);
        if gi.has_minus() {
            sign *= hilbert_symbol(-1, a[i - 1], v)?;
        }
        for j in i + 1..=n {
            if SubsetVec::singleton(j).pairing(gi) == 1 {
                sign *= hilbert_symbol(a[i - 1], a[j - 1], v)?;
            }
        }
    }
    Ok(sign)
}

/// Local invariant of a subordinate Brauer class at a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LocalInvariant {
    Zero,
    Half,
}

/// `0` when `Tw_v(g, t) = 1`, else `1/2`.
pub fn brauer_invariant(g: &BmSubElem, t: &[i64], v: PlaceRef) -> Result<LocalInvariant> {
    Ok(if tw(g, t, v)? == 1 { LocalInvariant::Zero } else { LocalInvariant::Half })
}

/// Exponent of `(−1, a)_2` in the Br character of block `S`.
pub fn br_exponent(f: &RAltMap, s: SubsetVec) -> u8 {
    if s.is_empty() {
        return 0;
    }
    let idx: Vec<usize> = s.indices().collect();
    let mut e = SubsetVec::MINUS.pairing(f.value(s));
    for (a, &i) in idx.iter().enumerate() {
        e ^= SubsetVec::MINUS.pairing(f.singleton(i));
        for &j in &idx[..a] {
            e ^= SubsetVec::singleton(j).pairing(f.singleton(i));
        }
    }
    e
}

/// Br exponent plus `|J ∩ S|`.
pub fn brm_exponent(g: &BmSubElem, s: SubsetVec) -> u8 {
    br_exponent(&g.f, s) ^ (g.j.intersect(s).len() % 2) as u8
}

/// `(Br(f, S, a), BrM(f, J, S, a))` for odd `a`.
pub fn characters(g: &BmSubElem, s: SubsetVec, a: i64) -> Result<(i8, i8)> {
    if a % 2 == 0 {
        return Err(Error::Domain(format!("characters need odd argument, got {a}")));
    }
    let c = chi4(a);
    let pow = |e: u8| if e == 1 { c } else { 1 };
    Ok((pow(br_exponent(&g.f, s)), pow(brm_exponent(g, s))))
}

/// `h_S(p)`: 1 unless `S ∈ 𝒟` and `p ≡ 3 mod 4`.
pub fn h_s(res: &ResidueData, s: SubsetVec, p: u64) -> bool {
    p % 4 == 1 || s.is_empty() || !res.entry(s).in_d
}

/// `factor = mantissa · (1 − 1/p)^gamma`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalFactor {
    pub mantissa: BigRational,
    pub gamma: Rational64,
}

impl LocalFactor {
    pub fn value(&self, p: u64) -> f64 {
        let m = self.mantissa.to_f64().unwrap_or(f64::NAN);
        let g = *self.gamma.numer() as f64 / *self.gamma.denom() as f64;
        m * (1.0 - 1.0 / p as f64).powf(g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LocalMode {
    Full,
    Squarefree,
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn inv_pow(p: u64, k: usize) -> BigRational {
    BigRational::new(BigInt::one(), BigInt::from(p).pow(k as u32))
}

fn check_odd_prime(p: u64) -> Result<()> {
    PlaceRef::odd(p).map(|_| ())
}

/// Character-sum local factor `Λ_p(f, J)` at an odd prime.
pub fn lambda_p(res: &ResidueData, g: &BmSubElem, p: u64, mode: LocalMode) -> Result<LocalFactor> {
    check_odd_prime(p)?;
    let n = res.n();
    let brm = |s: SubsetVec| -> Result<BigRational> { Ok(rat(characters(g, s, p as i64)?.1 as i64, 1)) };
    let mantissa = match mode {
        LocalMode::Full => {
            let mut sum = BigRational::one() - inv_pow(p, 2 * n);
            for e in res.entries() {
                if !e.w.contains(g.f.value(e.s)) || !h_s(res, e.s, p) {
                    continue;
                }
                let k = e.s.proj_len();
                sum += brm(e.s)? * rat(1, e.c() as i64) * inv_pow(p, k) * (BigRational::one() - inv_pow(p, 2 * (n - k)));
            }
            let norm = (BigRational::one() - inv_pow(p, 2)).pow(n as i32);
            sum / norm
        }
        LocalMode::Squarefree => {
            let mut singles = BigRational::zero();
            let mut blocks = BigRational::zero();
            for e in res.entries() {
                if !h_s(res, e.s, p) {
                    continue;
                }
                let k = e.s.proj_len();
                if k == 1 {
                    singles += rat(1, e.c() as i64);
                } else if e.w.contains(g.f.value(e.s)) {
                    blocks += brm(e.s)? * rat(1, e.c() as i64) * inv_pow(p, k);
                }
            }
            let inv_sigma = BigRational::one() + singles * inv_pow(p, 1);
            let sigma = inv_sigma.recip();
            inv_sigma * (BigRational::one() + sigma * blocks)
        }
    };
    Ok(LocalFactor { mantissa, gamma: res.gamma() })
}

/// Tamagawa local factor `σ_p(g)` for `g` in the projective subgroup.
pub fn sigma_p(res: &ResidueData, g: &BmSubElem, p: u64) -> Result<LocalFactor> {
    check_odd_prime(p)?;
    if !g.is_pbm {
        return Err(Error::NotProjective);
    }
    let n = res.n();
    let leg = if p % 4 == 1 { 1 } else { -1 };
    let mut sum = BigRational::one() - inv_pow(p, 2 * n);
    for e in res.entries() {
        let gs = g.value(e.s);
        if !(e.v.contains(gs) || e.v.contains(gs.with_minus_flipped())) || !h_s(res, e.s, p) {
            continue;
        }
        let k = e.s.proj_len();
        let twist = if kappa(g, e.s) == 1 { leg } else { 1 };
        sum += rat(twist, e.w.size() as i64) * inv_pow(p, k) * (BigRational::one() - inv_pow(p, 2 * (n - k)));
    }
    let norm = (BigRational::one() - inv_pow(p, 2)).pow(n as i32);
    Ok(LocalFactor { mantissa: sum / norm, gamma: res.gamma() })
}

/// Which per-prime factor feeds an Euler product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FactorKind {
    Lambda(LocalMode),
    Sigma,
}

/// A per-prime mantissa as `N(p)/D(p)`, with `N` depending on `p mod 4`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalPolynomial {
    /// Coefficients by degree, for `p ≡ 1` and `p ≡ 3 mod 4`.
    num: [Vec<Rational64>; 2],
    den: Vec<Rational64>,
    /// Coefficient of `1/p` in the expansion of the mantissa, per class.
    first_order: [Rational64; 2],
}

fn poly_add(acc: &mut Vec<Rational64>, deg: usize, c: Rational64) {
    if acc.len() <= deg {
        acc.resize(deg + 1, Rational64::zero());
    }
    acc[deg] += c;
}

fn binom(n: usize, k: usize) -> i64 {
    (0..k).fold(1i64, |acc, i| acc * (n - i) as i64 / (i + 1) as i64)
}

impl LocalPolynomial {
    pub fn build(res: &ResidueData, g: &BmSubElem, kind: FactorKind) -> Result<Self> {
        if kind == FactorKind::Sigma && !g.is_pbm {
            return Err(Error::NotProjective);
        }
        let n = res.n();
        // weights[k][class]: summed weight of blocks of size k
        let mut weights = vec![[Rational64::zero(); 2]; n + 1];
        weights[0] = [Rational64::one(); 2];
        for e in res.entries() {
            let k = e.s.proj_len();
            let (included, sign_exp, size) = match kind {
                FactorKind::Lambda(LocalMode::Full) => {
                    (e.w.contains(g.f.value(e.s)), brm_exponent(g, e.s), e.c())
                }
                FactorKind::Lambda(LocalMode::Squarefree) => {
                    if k == 1 {
                        (true, 0, e.c())
                    } else {
                        (e.w.contains(g.f.value(e.s)), brm_exponent(g, e.s), e.c())
                    }
                }
                FactorKind::Sigma => {
                    let gs = g.value(e.s);
                    (e.v.contains(gs) || e.v.contains(gs.with_minus_flipped()), kappa(g, e.s), e.w.size())
                }
            };
            if !included {
                continue;
            }
            let w = Rational64::new(1, size as i64);
            weights[k][0] += w;
            if !e.in_d {
                weights[k][1] += if sign_exp == 1 { -w } else { w };
            }
        }
        let mut num = [Vec::new(), Vec::new()];
        let mut den = Vec::new();
        let squarefree = kind == FactorKind::Lambda(LocalMode::Squarefree);
        for (class, poly) in num.iter_mut().enumerate() {
            for (k, w) in weights.iter().enumerate() {
                if squarefree {
                    poly_add(poly, n - k, w[class]);
                } else {
                    poly_add(poly, 2 * n - k, w[class]);
                    poly_add(poly, k, -w[class]);
                }
            }
        }
        if squarefree {
            poly_add(&mut den, n, Rational64::one());
        } else {
            for k in 0..=n {
                let sign = if (n - k).is_multiple_of(2) { 1 } else { -1 };
                poly_add(&mut den, 2 * k, Rational64::from(sign * binom(n, k)));
            }
        }
        let first_order = if n >= 1 { [weights[1][0], weights[1][1]] } else { [Rational64::zero(); 2] };
        Ok(LocalPolynomial { num, den, first_order })
    }

    fn class(p: u64) -> usize {
        usize::from(p % 4 == 3)
    }

    /// Exact mantissa at `p`.
    pub fn mantissa(&self, p: u64) -> BigRational {
        let eval = |c: &[Rational64]| -> BigRational {
            let x = BigRational::from_integer(BigInt::from(p));
            c.iter().rev().fold(BigRational::zero(), |acc, &k| {
                acc * &x + BigRational::new(BigInt::from(*k.numer()), BigInt::from(*k.denom()))
            })
        };
        eval(&self.num[Self::class(p)]) / eval(&self.den)
    }

    /// `(N(p) − D(p)) / D(p)` in floating point.
    pub fn excess_f64(&self, p: u64) -> f64 {
        let num = &self.num[Self::class(p)];
        let len = num.len().max(self.den.len());
        let x = p as f64;
        let coeff = |v: &[Rational64], i: usize| v.get(i).map_or(0.0, |r| *r.numer() as f64 / *r.denom() as f64);
        let (mut diff, mut den) = (0.0f64, 0.0f64);
        for i in (0..len).rev() {
            diff = diff * x + (coeff(num, i) - coeff(&self.den, i));
            den = den * x + coeff(&self.den, i);
        }
        diff / den
    }

    /// Weight `a` of the `χ_{−4}(p)/p` term: `(first_order[1mod4] − first_order[3mod4]) / 2`.
    pub fn chi_weight(&self) -> Rational64 {
        (self.first_order[0] - self.first_order[1]) / 2
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

fn rat_f64(r: Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Truncated Euler product over odd `p ≤ bound`, and the same product over odd `p ≤ bound/2`.
pub fn euler_product(poly: &LocalPolynomial, gamma: Rational64, primes: &[u64], bound: u64, extract_l: bool) -> (f64, f64) {
    let gamma = rat_f64(gamma);
    let a = if extract_l { rat_f64(poly.chi_weight()) } else { 0.0 };
    let mut logs = Neumaier::default();
    let mut negative = false;
    let mut half = f64::NAN;
    let mut zero = false;
    for &p in primes.iter().filter(|&&p| p > 2 && p <= bound) {
        if half.is_nan() && p > bound / 2 {
            half = finish(&logs, negative, zero, a);
        }
        let excess = poly.excess_f64(p);
        let m = 1.0 + excess;
        if m == 0.0 {
            zero = true;
            continue;
        }
        if m < 0.0 {
            negative = !negative;
        }
        let lm = if m > 0.0 { excess.ln_1p() } else { (-m).ln() };
        logs.add(lm);
        logs.add(gamma * (-1.0 / p as f64).ln_1p());
        if a != 0.0 {
            let chi = if p % 4 == 1 { 1.0 } else { -1.0 };
            logs.add(a * (-chi / p as f64).ln_1p());
        }
    }
    let full = finish(&logs, negative, zero, a);
    if half.is_nan() {
        half = full;
    }
    (full, half)
}

fn finish(logs: &Neumaier, negative: bool, zero: bool, a: f64) -> f64 {
    if zero {
        return 0.0;
    }
    let l_factor = (std::f64::consts::PI / 4.0).powf(a);
    let v = logs.total().exp() * l_factor;
    if negative {
        -v
    } else {
        v
    }
}

/// Admissible sign vectors and 2-adic classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AdmissibleData {
    pub signs: Vec<Vec<i8>>,
    /// `(u, λ)` pairs.
    pub two_adic: Vec<(Vec<UnitClassMod8>, Vec<u8>)>,
}

impl AdmissibleData {
    /// `Σ count / 2^{Σλ}` grouped by `Σλ`: `(Σλ, count)`.
    pub fn two_adic_strata(&self) -> Vec<(u32, usize)> {
        let mut out: Vec<(u32, usize)> = Vec::new();
        for (_, l) in &self.two_adic {
            let k = l.iter().map(|&x| x as u32).sum();
            match out.iter_mut().find(|(s, _)| *s == k) {
                Some((_, c)) => *c += 1,
                None => out.push((k, 1)),
            }
        }
        out.sort();
        out
    }
}

fn fibre_soluble_at(fam: &MonomialConicFamily, t: &[i64], v: PlaceRef) -> Result<bool> {
    for &[a, b, c] in &fam.evaluate(t)?.coefficients {
        if !conic_soluble_at(a, b, c, v)? {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn admissible(fam: &MonomialConicFamily) -> Result<AdmissibleData> {
    let n = fam.n();
    let mut signs = Vec::new();
    for bits in 0u32..(1u32 << n) {
        let s: Vec<i8> = (0..n).map(|i| if bits >> i & 1 == 1 { -1 } else { 1 }).collect();
        let t: Vec<i64> = s.iter().map(|&x| x as i64).collect();
        if fibre_soluble_at(fam, &t, PlaceRef::Real)? {
            signs.push(s);
        }
    }
    signs.sort_by(|a, b| b.cmp(a));
    let mut two_adic = Vec::new();
    for lbits in 0u32..(1u32 << n) - 1 {
        let lambda: Vec<u8> = (0..n).map(|i| (lbits >> i & 1) as u8).collect();
        for ucode in 0u64..4u64.pow(n as u32) {
            let u: Vec<UnitClassMod8> = (0..n).map(|i| UnitClassMod8::ALL[(ucode >> (2 * i) & 3) as usize]).collect();
            if fam.side() == SideCondition::Redei
                && !(0..n).any(|i| lambda[i] == 0 && u[i].value() == 1)
            {
                continue;
            }
            let t: Vec<i64> = (0..n).map(|i| (u[i].value() as i64) << lambda[i]).collect();
            if fibre_soluble_at(fam, &t, PlaceRef::Two)? {
                two_adic.push((u, lambda.clone()));
            }
        }
    }
    Ok(AdmissibleData { signs, two_adic })
}

/// `Σ_{s admissible} Tw(g, s)`.
pub fn archimedean_sum(g: &BmSubElem, adm: &AdmissibleData) -> Result<i64> {
    let mut total = 0i64;
    for s in &adm.signs {
        let a: Vec<i64> = s.iter().map(|&x| x as i64).collect();
        total += tw(g, &a, PlaceRef::Real)? as i64;
    }
    Ok(total)
}

fn two_adic_point(u: &[UnitClassMod8], l: &[u8]) -> Vec<i64> {
    u.iter().zip(l).map(|(u, &l)| (u.value() as i64) << l).collect()
}

/// 2-adic weighted sum: with the `(1 − 4^{−#{λ_i = 0}})` factor unless `mode` is squarefree.
pub fn two_adic_sum(g: &BmSubElem, adm: &AdmissibleData, mode: Mode) -> Result<BigRational> {
    let mut total = BigRational::zero();
    for (u, l) in &adm.two_adic {
        let sum_l: u32 = l.iter().map(|&x| x as u32).sum();
        let zeros = l.len() as u32 - sum_l;
        let mut w = BigRational::new(BigInt::one(), BigInt::one() << sum_l);
        if mode != Mode::Squarefree {
            w *= BigRational::one() - BigRational::new(BigInt::one(), BigInt::one() << (2 * zeros));
        }
        total += w * rat(tw(g, &two_adic_point(u, l), PlaceRef::Two)? as i64, 1);
    }
    Ok(total)
}

/// `σ_∞` and `σ_2 = rational · 2^{two_power}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchTwo {
    pub sigma_inf: BigRational,
    pub sigma_2_rational: BigRational,
    pub sigma_2_two_power: Rational64,
}

impl ArchTwo {
    pub fn sigma_2(&self) -> f64 {
        self.sigma_2_rational.to_f64().unwrap_or(f64::NAN) * 2f64.powf(rat_f64(self.sigma_2_two_power))
    }
}

pub fn sigma_2_inf(res: &ResidueData, fam: &MonomialConicFamily, g: &BmSubElem) -> Result<ArchTwo> {
    if !g.is_pbm {
        return Err(Error::NotProjective);
    }
    let adm = admissible(fam)?;
    let n = fam.n() as i64;
    let sigma_inf = rat(n, 2) * rat(archimedean_sum(g, &adm)?, 1);
    let three_n = BigInt::from(3).pow(fam.n() as u32);
    let sigma_2_rational = two_adic_sum(g, &adm, Mode::Affine)? / BigRational::from_integer(three_n);
    Ok(ArchTwo { sigma_inf, sigma_2_rational, sigma_2_two_power: -res.gamma() })
}

/// `σ_2` rational part summed stratum by stratum over `Σλ`.
pub fn sigma_2_stratified(res: &ResidueData, fam: &MonomialConicFamily, g: &BmSubElem) -> Result<BigRational> {
    let _ = res;
    let adm = admissible(fam)?;
    let n = fam.n();
    let mut total = BigRational::zero();
    for k in 0..n as u32 {
        let mut stratum = BigRational::zero();
        for (u, l) in adm.two_adic.iter().filter(|(_, l)| l.iter().map(|&x| x as u32).sum::<u32>() == k) {
            stratum += rat(tw(g, &two_adic_point(u, l), PlaceRef::Two)? as i64, 1);
        }
        let zeros = n as u32 - k;
        let w = BigRational::new(BigInt::one(), BigInt::one() << k)
            * (BigRational::one() - BigRational::new(BigInt::one(), BigInt::one() << (2 * zeros)));
        total += stratum * w;
    }
    Ok(total / BigRational::from_integer(BigInt::from(3).pow(n as u32)))
}

/// Euler-product evaluation settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerOptions {
    pub primes_bound: u64,
    pub extract_l: bool,
    pub section: SectionChoice,
    pub exec: Exec,
}

impl Default for EulerOptions {
    fn default() -> Self {
        EulerOptions { primes_bound: 100_000, extract_l: false, section: SectionChoice::Canonical, exec: Exec::Sequential }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Contribution {
    pub label: String,
    pub j: String,
    pub singletons: Vec<String>,
    pub is_pbm: bool,
    pub archimedean: i64,
    #[serde(serialize_with = "crate::util::ser_big_rational")]
    pub two_adic: BigRational,
    pub euler_product: f64,
    #[serde(serialize_with = "crate::util::ser_rational")]
    pub l_factor_power: Rational64,
    pub value: f64,
}

/// Predicted asymptotic `count(B) ~ constant · B^bound_power / (log B)^log_exponent`.
#[derive(Debug, Clone, Serialize)]
pub struct Prediction {
    pub mode: Mode,
    #[serde(serialize_with = "crate::util::ser_rational")]
    pub delta: Rational64,
    #[serde(serialize_with = "crate::util::ser_rational")]
    pub log_exponent: Rational64,
    pub bound_power: u32,
    pub constant: f64,
    pub structure_constant: f64,
    pub per_f: Vec<Contribution>,
    pub primes_bound: u64,
    pub error_estimate: f64,
    #[serde(serialize_with = "crate::util::ser_gamma_values")]
    pub gamma_values: Vec<(Rational64, f64)>,
    pub warnings: Vec<String>,
}

impl Prediction {
    pub fn predict(&self, bound: f64) -> f64 {
        self.constant * bound.powi(self.bound_power as i32) / bound.ln().powf(rat_f64(self.log_exponent))
    }
}

pub fn gamma_fn(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

pub fn leading_constant(fam: &MonomialConicFamily, mode: Mode, opts: &EulerOptions) -> Result<Prediction> {
    let fam = if fam.mode() == mode { fam.clone() } else { fam.with_mode(mode)? };
    let res = ResidueData::build(&fam);
    let n = fam.n();
    let gamma = res.gamma();
    let delta = Rational64::from(n as i64) - gamma;
    let gammas: Vec<Rational64> = (1..=n).map(|i| Rational64::new(1, res.singleton(i).v.size() as i64)).collect();
    let mut gamma_values: Vec<(Rational64, f64)> = Vec::new();
    for &g in &gammas {
        if !gamma_values.iter().any(|(x, _)| *x == g) {
            gamma_values.push((g, gamma_fn(rat_f64(g))));
        }
    }
    let gamma_prod: f64 = gammas.iter().map(|&g| gamma_fn(rat_f64(g))).product();
    let gf = rat_f64(gamma);
    let nf = n as f64;
    let three_n = 3f64.powi(n as i32);
    let (structure, kind, bound_power) = match mode {
        Mode::Affine => (1.0 / (gamma_prod * 2f64.powf(gf) * three_n), FactorKind::Lambda(LocalMode::Full), n as u32),
        Mode::Projective => (
            nf.powf(rat_f64(delta)) / (2f64.powf(1.0 + gf) * three_n * gamma_prod),
            FactorKind::Sigma,
            1,
        ),
        Mode::Squarefree => (
            1.0 / (gamma_prod * 2f64.powf(2.0 * nf + gf)),
            FactorKind::Lambda(LocalMode::Squarefree),
            n as u32,
        ),
    };
    let elements: Vec<BmSubElem> = enumerate_bmsub_with(&res, opts.section)?
        .into_iter()
        .filter(|g| mode != Mode::Projective || g.is_pbm)
        .collect();
    let adm = admissible(&fam)?;
    let mut warnings = Vec::new();
    if adm.signs.is_empty() {
        warnings.push("no admissible sign vector: no fibre is soluble over the reals".to_string());
    }
    if adm.two_adic.is_empty() {
        warnings.push("no admissible 2-adic class: no fibre is soluble over Q_2".to_string());
    }
    let primes = primes_up_to(opts.primes_bound);
    let computed: Vec<Result<(Contribution, f64)>> = opts.exec.map_indexed(elements.len(), |k| {
        let g = &elements[k];
        let archimedean = archimedean_sum(g, &adm)?;
        let two_adic = two_adic_sum(g, &adm, mode)?;
        let poly = LocalPolynomial::build(&res, g, kind)?;
        let (prod, prod_half) = euler_product(&poly, gamma, &primes, opts.primes_bound, opts.extract_l);
        let weight = archimedean as f64 * two_adic.to_f64().unwrap_or(f64::NAN);
        Ok((
            Contribution {
                label: g.label(),
                j: g.j.to_string(),
                singletons: g.f.singletons().iter().map(|s| s.to_string()).collect(),
                is_pbm: g.is_pbm,
                archimedean,
                two_adic,
                euler_product: prod,
                l_factor_power: if opts.extract_l { poly.chi_weight() } else { Rational64::zero() },
                value: structure * weight * prod,
            },
            structure * weight * prod_half,
        ))
    });
    let mut per_f = Vec::with_capacity(computed.len());
    let (mut total, mut total_half) = (Neumaier::default(), Neumaier::default());
    for c in computed {
        let (contrib, half) = c?;
        total.add(contrib.value);
        total_half.add(half);
        per_f.push(contrib);
    }
    let constant = total.total();
    Ok(Prediction {
        mode,
        delta,
        log_exponent: delta,
        bound_power,
        constant,
        structure_constant: structure,
        per_f,
        primes_bound: opts.primes_bound,
        error_estimate: (constant - total_half.total()).abs(),
        gamma_values,
        warnings,
    })
}

/// Projective constant assembled place by place: `θ · n^Δ · Σ_g σ_∞ σ_2 ∏ σ_p / ∏ Γ`.
pub fn projective_constant_by_places(fam: &MonomialConicFamily, primes_bound: u64) -> Result<f64> {
    let fam = fam.with_mode(Mode::Projective)?;
    let res = ResidueData::build(&fam);
    let n = fam.n() as f64;
    let delta = rat_f64(Rational64::from(fam.n() as i64) - res.gamma());
    let gamma_prod: f64 = (1..=fam.n()).map(|i| gamma_fn(1.0 / res.singleton(i).v.size() as f64)).product();
    let primes = primes_up_to(primes_bound);
    let mut total = 0.0;
    for g in enumerate_bmsub_with(&res, SectionChoice::Canonical)?.iter().filter(|g| g.is_pbm) {
        let places = sigma_2_inf(&res, &fam, g)?;
        let mut log_prod = Neumaier::default();
        let mut sign = 1.0;
        for &p in primes.iter().filter(|&&p| p > 2) {
            let v = sigma_p(&res, g, p)?.value(p);
            if v < 0.0 {
                sign = -sign;
            }
            log_prod.add(v.abs().ln());
        }
        total += places.sigma_inf.to_f64().unwrap_or(f64::NAN) * places.sigma_2() * sign * log_prod.total().exp();
    }
    Ok(n.powf(delta) / n * total / gamma_prod)
}

/// `Σ(p) = (1 + (1/p) Σ_j h_j/c_j)^{-1}`.
pub fn sigma_shorthand(res: &ResidueData, p: u64) -> BigRational {
    sigma_m_shorthand(res, p, 0)
}

/// `Σ_m(p) = Σ(p) · (1 + (1/p) Σ_{j≠m} h_j/c_j)`; `m = 0` gives `Σ(p)`.
pub fn sigma_m_shorthand(res: &ResidueData, p: u64, m: usize) -> BigRational {
    let part = |skip: usize| -> BigRational {
        let mut s = BigRational::zero();
        for j in (1..=res.n()).filter(|&j| j != skip) {
            if h_s(res, SubsetVec::singleton(j), p) {
                s += rat(1, res.singleton(j).c() as i64);
            }
        }
        BigRational::one() + s * inv_pow(p, 1)
    };
    let sigma = part(0).recip();
    if m == 0 {
        sigma
    } else {
        sigma * part(m)
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    num_integer::Integer::gcd(&a, &b)
}

fn odd_primes_of(x: u64) -> Vec<u64> {
    crate::qlocal::factorize(x).into_iter().map(|(p, _)| p).filter(|&p| p > 2).collect()
}

/// `g(w, b) = F(d_1..d_n) μ²(2w)` with `d_j = w · gcd(b_i : i ≠ j)`, from the definition of F.
pub fn g_weight_direct(res: &ResidueData, w: u64, b: &[u64]) -> BigRational {
    let n = res.n();
    if w.is_multiple_of(2) || crate::qlocal::factorize(w).iter().any(|&(_, e)| e > 1) {
        return BigRational::zero();
    }
    let d: Vec<u64> = (0..n)
        .map(|j| w * (0..n).filter(|&i| i != j).fold(0u64, |acc, i| gcd(acc, b[i])))
        .collect();
    let mut bad: Vec<u64> = d.iter().flat_map(|&x| odd_primes_of(x)).collect();
    bad.sort_unstable();
    bad.dedup();
    let mut f = BigRational::one();
    for p in bad {
        let mut all = BigRational::zero();
        let mut coprime = BigRational::zero();
        for j in 1..=n {
            if h_s(res, SubsetVec::singleton(j), p) {
                let term = rat(1, res.singleton(j).c() as i64);
                if !d[j - 1].is_multiple_of(p) {
                    coprime += term.clone();
                }
                all += term;
            }
        }
        f *= (BigRational::one() + coprime * inv_pow(p, 1)) / (BigRational::one() + all * inv_pow(p, 1));
    }
    f
}

/// The product formula for `g(w, b)`, valid when `gcd(b) = 1`.
pub fn g_weight_product(res: &ResidueData, w: u64, b: &[u64]) -> BigRational {
    let n = res.n();
    if w.is_multiple_of(2) || crate::qlocal::factorize(w).iter().any(|&(_, e)| e > 1) {
        return BigRational::zero();
    }
    let mut out = BigRational::one();
    for p in odd_primes_of(w) {
        out *= sigma_shorthand(res, p);
    }
    let mut cand: Vec<u64> = b.iter().flat_map(|&x| odd_primes_of(x.max(1))).collect();
    cand.sort_unstable();
    cand.dedup();
    for m in 1..=n {
        for &p in &cand {
            let others = (1..=n).filter(|&i| i != m).all(|i| b[i - 1].is_multiple_of(p));
            if others && !b[m - 1].is_multiple_of(p) && !w.is_multiple_of(p) {
                out *= sigma_m_shorthand(res, p, m);
            }
        }
    }
    out
}

/// `(1 − p^{−αi}) (1 − p^{−α})^{−n}`.
pub fn geometric_closed_form(p: f64, n: u32, i: u32, alpha: f64) -> f64 {
    (1.0 - p.powf(-alpha * i as f64)) / (1.0 - p.powf(-alpha)).powi(n as i32)
}

/// Absolute value helper for exact rationals.
pub fn abs_big(r: &BigRational) -> BigRational {
    r.abs()
}
