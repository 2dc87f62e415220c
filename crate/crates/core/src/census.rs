//! Exhaustive and sampled fibre counts, the Rédei triple count, and observed-versus-predicted
//! reports.

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::family::{Mode, MonomialConicFamily, SideCondition};
use crate::localdens::{leading_constant, EulerOptions};
use crate::qlocal::{factorize, hilbert_symbol, FibreKernel, KernelScratch, PlaceRef, PrimeTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::time::Instant;

/// Largest box `(2T)^n` enumerated without sampling.
pub const EXHAUSTIVE_LIMIT: f64 = 1e10;
/// Largest bound accepted by [`redei_count`].
pub const REDEI_LIMIT: u64 = 500;
const PRIME_TABLE_LIMIT: u64 = 10_000_000;
const SAMPLE_BLOCK: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sampling {
    pub rate: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct CensusRequest {
    pub family: MonomialConicFamily,
    /// Coordinate bound `T`; the projective height bound is `T^n`.
    pub bound: u64,
    pub mode: Mode,
    pub stratify: bool,
    pub exec: Exec,
    pub sample: Option<Sampling>,
    /// Prime cutoff for the prediction; `None` skips it.
    pub primes_bound: Option<u64>,
}

impl CensusRequest {
    pub fn new(family: MonomialConicFamily, bound: u64) -> Self {
        let mode = family.mode();
        CensusRequest { family, bound, mode, stratify: false, exec: Exec::default(), sample: None, primes_bound: Some(100_000) }
    }

    /// Height bound used in the prediction.
    pub fn height(&self) -> f64 {
        match self.mode {
            Mode::Projective => (self.bound as f64).powi(self.family.n() as i32),
            _ => self.bound as f64,
        }
    }
}

/// `(s, u, λ)` for every coordinate, where `t_i = s_i 2^{ν_i} a_i b_i²` with `a_i` odd squarefree,
/// `λ_i = ν_i mod 2` and `u_i ≡ s_i a_i mod 8`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StratumKey {
    pub s: Vec<i8>,
    pub u: Vec<i8>,
    pub lambda: Vec<u8>,
}

impl fmt::Display for StratumKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: Vec<String>| v.join(",");
        write!(
            f,
            "s=({});u=({});l=({})",
            join(self.s.iter().map(|&x| if x > 0 { "+".to_string() } else { "-".to_string() }).collect()),
            join(self.u.iter().map(|x| x.to_string()).collect()),
            join(self.lambda.iter().map(|x| x.to_string()).collect())
        )
    }
}

fn ser_strata<S: Serializer>(v: &Option<BTreeMap<StratumKey, u64>>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        None => s.serialize_none(),
        Some(m) => s.collect_map(m.iter().map(|(k, c)| (k.to_string(), c))),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CensusResult {
    pub family_digest: String,
    pub mode: Mode,
    pub bound: u64,
    pub height: f64,
    pub total: u64,
    pub skipped_degenerate: u64,
    #[serde(serialize_with = "ser_strata", skip_serializing_if = "Option::is_none")]
    pub per_stratum: Option<BTreeMap<StratumKey, u64>>,
    pub predicted: Option<f64>,
    pub ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<u64>,
}

// 4-bit code per coordinate: bit 0 sign, bits 1-2 unit class index, bit 3 λ.
const U_VALUES: [i8; 4] = [1, 3, 5, 7];

fn stratum_code(t: i64, table: &PrimeTable, buf: &mut Vec<u64>) -> u8 {
    let m = t.unsigned_abs();
    let nu = m.trailing_zeros();
    buf.clear();
    table.odd_kernel_primes(m >> nu, buf);
    let a = buf.iter().fold(1u64, |acc, &p| acc * (p % 8) % 8) as i64;
    let su = if t < 0 { (8 - a) % 8 } else { a };
    let ui = U_VALUES.iter().position(|&x| x as i64 == su).unwrap_or(0) as u8;
    u8::from(t < 0) | ui << 1 | ((nu & 1) as u8) << 3
}

fn negate_code(code: u8) -> u8 {
    let ui = (code >> 1) & 3;
    let flipped = (3 - ui) & 3; // 1↔7, 3↔5
    (code & 8) | flipped << 1 | ((code & 1) ^ 1)
}

fn decode_key(packed: u64, n: usize) -> StratumKey {
    let mut key = StratumKey { s: Vec::with_capacity(n), u: Vec::with_capacity(n), lambda: Vec::with_capacity(n) };
    for i in 0..n {
        let c = (packed >> (4 * i)) & 15;
        key.s.push(if c & 1 == 1 { -1 } else { 1 });
        let u = U_VALUES[((c >> 1) & 3) as usize];
        key.u.push(if u > 4 { u - 8 } else { u });
        key.lambda.push((c >> 3) as u8);
    }
    key
}

fn negate_packed(packed: u64, n: usize) -> u64 {
    (0..n).fold(0u64, |acc, i| acc | (negate_code(((packed >> (4 * i)) & 15) as u8) as u64) << (4 * i))
}

fn is_squarefree(m: u64, table: &PrimeTable) -> bool {
    if m <= table.limit() {
        table.sieve().is_squarefree(m)
    } else {
        factorize(m).iter().all(|&(_, e)| e == 1)
    }
}

struct Setup {
    kernel: FibreKernel,
    table: PrimeTable,
    values: Vec<i64>,
    codes: HashMap<i64, u8>,
    symmetric: bool,
    redei_side: bool,
    n: usize,
}

fn gcd(a: u64, b: u64) -> u64 {
    num_integer::gcd(a, b)
}

fn setup(req: &CensusRequest, fam: &MonomialConicFamily) -> Setup {
    let t = req.bound as i64;
    let table = PrimeTable::new(req.bound.clamp(2, PRIME_TABLE_LIMIT));
    let squarefree = req.mode == Mode::Squarefree;
    let values: Vec<i64> = if req.sample.is_some() {
        Vec::new()
    } else {
        (-t..=t).filter(|&x| x != 0 && (!squarefree || is_squarefree(x.unsigned_abs(), &table))).collect()
    };
    let mut codes = HashMap::new();
    if req.stratify {
        let mut buf = Vec::new();
        for &v in &values {
            codes.insert(v, stratum_code(v, &table, &mut buf));
        }
    }
    let redei_side = fam.side() == SideCondition::Redei;
    Setup {
        kernel: FibreKernel::new(fam),
        table,
        values,
        codes,
        symmetric: fam.equal_degree_parity() && !redei_side,
        redei_side,
        n: fam.n(),
    }
}

#[derive(Default)]
struct Tally {
    total: u64,
    strata: HashMap<u64, u64>,
}

fn side_ok(setup: &Setup, t: &[i64]) -> bool {
    !setup.redei_side || t.iter().any(|&x| x.rem_euclid(8) == 1)
}

#[allow(clippy::too_many_arguments)]
fn walk(setup: &Setup, stratify: bool, depth: usize, g: u64, t: &mut Vec<i64>, code: u64, scratch: &mut KernelScratch, tally: &mut Tally) {
    if depth == setup.n {
        if g == 1 && side_ok(setup, t) && setup.kernel.els(t, &setup.table, scratch) {
            tally.total += 1;
            if stratify {
                *tally.strata.entry(code).or_insert(0) += 1;
            }
        }
        return;
    }
    for &v in &setup.values {
        let ng = gcd(g, v.unsigned_abs());
        if depth + 1 == setup.n && ng != 1 {
            continue;
        }
        t[depth] = v;
        let c = if stratify { code | (setup.codes[&v] as u64) << (4 * depth) } else { 0 };
        walk(setup, stratify, depth + 1, ng, t, c, scratch, tally);
    }
}

/// Primitive vectors with a zero coordinate inside the box, for the exclusion tally.
fn degenerate_primitive(n: usize, bound: u64, values_only: &dyn Fn(i64) -> bool) -> u64 {
    // vectors with exactly the coordinates in `zeros` vanishing: count primitive vectors of the
    // remaining ones by inclusion–exclusion on a common divisor
    let t = bound as i64;
    let per_coord: Vec<i64> = (-t..=t).filter(|&x| x != 0 && values_only(x)).collect();
    let mut total = 0u64;
    for k in 1..n {
        // choose which n-k coordinates are nonzero
        let ways = binom(n as u64, k as u64);
        total += ways * primitive_count(&per_coord, n - k, bound);
    }
    total
}

fn binom(n: u64, k: u64) -> u64 {
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

fn primitive_count(values: &[i64], m: usize, bound: u64) -> u64 {
    // Σ_d μ(d) · #{values divisible by d}^m
    let sieve = crate::qlocal::SpfSieve::new(bound.max(2));
    let mut total: i128 = 0;
    for d in 1..=bound {
        let mu = sieve.mobius(d);
        if mu == 0 {
            continue;
        }
        let c = values.iter().filter(|&&v| v % d as i64 == 0).count() as i128;
        total += mu as i128 * c.pow(m as u32);
    }
    total as u64
}

fn predict(req: &CensusRequest, fam: &MonomialConicFamily) -> Result<Option<f64>> {
    match req.primes_bound {
        None => Ok(None),
        Some(pb) => {
            let opts = EulerOptions { primes_bound: pb, exec: req.exec, ..Default::default() };
            let pred = leading_constant(fam, req.mode, &opts)?;
            Ok(Some(pred.predict(req.height())).filter(|v| v.is_finite()))
        }
    }
}

pub fn count(req: &CensusRequest) -> Result<CensusResult> {
    let start = Instant::now();
    let fam = if req.family.mode() == req.mode { req.family.clone() } else { req.family.with_mode(req.mode)? };
    let n = fam.n();
    if n > 16 {
        return Err(Error::TooLarge(format!("census supports at most 16 variables, got {n}")));
    }
    if req.bound == 0 {
        return Err(Error::Domain("the coordinate bound must be positive".into()));
    }
    let volume = (2.0 * req.bound as f64).powi(n as i32);
    let setup = setup(req, &fam);
    let (total, strata, samples) = match req.sample {
        None => {
            if volume > EXHAUSTIVE_LIMIT {
                return Err(Error::TooLarge(format!(
                    "box of {volume:.3e} points exceeds the exhaustive limit {EXHAUSTIVE_LIMIT:.0e}; use sampling"
                )));
            }
            let (t, s) = exhaustive(&setup, req)?;
            (t, s, None)
        }
        Some(sampling) => {
            let (t, s, k) = sampled(&setup, req, sampling, volume)?;
            (t, s, Some(k))
        }
    };
    let squarefree = req.mode == Mode::Squarefree;
    let skipped = if req.sample.is_none() {
        let table = &setup.table;
        degenerate_primitive(n, req.bound, &|x: i64| !squarefree || is_squarefree(x.unsigned_abs(), table))
    } else {
        0
    };
    let (total, strata, skipped) = if req.mode == Mode::Projective {
        let halve = strata.map(|m: BTreeMap<StratumKey, u64>| {
            m.into_iter().filter(|(k, _)| k.s[0] > 0).collect::<BTreeMap<_, _>>()
        });
        (total / 2, halve, skipped / 2)
    } else {
        (total, strata, skipped)
    };
    let predicted = predict(req, &fam)?;
    let ratio = predicted.map(|p| total as f64 / p);
    Ok(CensusResult {
        family_digest: fam.digest(),
        mode: req.mode,
        bound: req.bound,
        height: req.height(),
        total,
        skipped_degenerate: skipped,
        per_stratum: if req.stratify { strata } else { None },
        predicted,
        ratio,
        seed: req.sample.map(|s| s.seed),
        samples,
        wall_time_ms: Some(start.elapsed().as_millis() as u64),
    })
}

type Strata = Option<BTreeMap<StratumKey, u64>>;

fn exhaustive(setup: &Setup, req: &CensusRequest) -> Result<(u64, Strata)> {
    let n = setup.n;
    let leads: Vec<i64> = setup.values.iter().copied().filter(|&v| !setup.symmetric || v > 0).collect();
    let parts: Vec<Tally> = req.exec.map_indexed(leads.len(), |k| {
        let mut tally = Tally::default();
        let mut t = vec![0i64; n];
        let mut scratch = KernelScratch::default();
        let v = leads[k];
        t[0] = v;
        let code = if req.stratify { setup.codes[&v] as u64 } else { 0 };
        walk(setup, req.stratify, 1, v.unsigned_abs(), &mut t, code, &mut scratch, &mut tally);
        tally
    });
    let mut total = 0u64;
    let mut strata: BTreeMap<StratumKey, u64> = BTreeMap::new();
    for part in parts {
        let factor = if setup.symmetric { 2 } else { 1 };
        total += factor * part.total;
        if req.stratify {
            for (packed, c) in part.strata {
                *strata.entry(decode_key(packed, n)).or_insert(0) += c;
                if setup.symmetric {
                    *strata.entry(decode_key(negate_packed(packed, n), n)).or_insert(0) += c;
                }
            }
        }
    }
    Ok((total, req.stratify.then_some(strata)))
}

fn sampled(setup: &Setup, req: &CensusRequest, sampling: Sampling, volume: f64) -> Result<(u64, Strata, u64)> {
    if !(sampling.rate > 0.0 && sampling.rate <= 1.0) {
        return Err(Error::Domain(format!("sampling rate must lie in (0, 1], got {}", sampling.rate)));
    }
    let k = (sampling.rate * volume).ceil();
    if k > EXHAUSTIVE_LIMIT {
        return Err(Error::TooLarge(format!("{k:.3e} samples exceed the limit")));
    }
    let k = k as u64;
    let n = setup.n;
    let blocks = k.div_ceil(SAMPLE_BLOCK);
    let t_max = req.bound as i64;
    let squarefree = req.mode == Mode::Squarefree;
    let parts: Vec<Tally> = req.exec.map_indexed(blocks as usize, |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed);
        rng.set_stream(b as u64);
        let mut tally = Tally::default();
        let mut scratch = KernelScratch::default();
        let mut buf = Vec::new();
        let mut t = vec![0i64; n];
        let here = SAMPLE_BLOCK.min(k - b as u64 * SAMPLE_BLOCK);
        for _ in 0..here {
            for x in t.iter_mut() {
                let r = rng.gen_range(0..2 * t_max);
                *x = if r < t_max { r - t_max } else { r - t_max + 1 };
            }
            let g = t.iter().fold(0u64, |acc, &x| gcd(acc, x.unsigned_abs()));
            if g != 1 || (squarefree && !t.iter().all(|&x| is_squarefree(x.unsigned_abs(), &setup.table))) {
                continue;
            }
            if side_ok(setup, &t) && setup.kernel.els(&t, &setup.table, &mut scratch) {
                tally.total += 1;
                if req.stratify {
                    let packed = t
                        .iter()
                        .enumerate()
                        .fold(0u64, |acc, (i, &x)| acc | (stratum_code(x, &setup.table, &mut buf) as u64) << (4 * i));
                    *tally.strata.entry(packed).or_insert(0) += 1;
                }
            }
        }
        tally
    });
    let scale = volume / k as f64;
    let mut hits = 0u64;
    let mut strata: BTreeMap<StratumKey, u64> = BTreeMap::new();
    for part in parts {
        hits += part.total;
        for (packed, c) in part.strata {
            *strata.entry(decode_key(packed, n)).or_insert(0) += c;
        }
    }
    let strata = strata.into_iter().map(|(key, c)| (key, (c as f64 * scale).round() as u64)).collect();
    Ok(((hits as f64 * scale).round() as u64, req.stratify.then_some(strata), k))
}

/// `|S(B)|` with a breakdown by the coordinate that is `≡ 1 mod 8`.
#[derive(Debug, Clone, Serialize)]
pub struct RedeiResult {
    pub bound: u64,
    pub total: u64,
    /// Triples whose `i`-th coordinate is `≡ 1 mod 8` (a triple may count more than once).
    pub by_position: [u64; 3],
    pub predicted: Option<f64>,
    pub ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<u64>,
}

fn discriminant(a: i64) -> u64 {
    if a.rem_euclid(4) == 1 {
        a.unsigned_abs()
    } else {
        4 * a.unsigned_abs()
    }
}

fn hilbert_trivial_everywhere(a: i64, b: i64) -> bool {
    let mut places = vec![PlaceRef::Real, PlaceRef::Two];
    let mut primes: Vec<u64> = factorize(a.unsigned_abs())
        .into_iter()
        .chain(factorize(b.unsigned_abs()))
        .map(|(p, _)| p)
        .filter(|&p| p > 2)
        .collect();
    primes.sort_unstable();
    primes.dedup();
    places.extend(primes.into_iter().map(PlaceRef::Odd));
    places.into_iter().all(|v| hilbert_symbol(a, b, v) == Ok(1))
}

/// Exhaustive count of ordered triples in `S(B)`.
pub fn redei_count(bound: u64, exec: Exec, primes_bound: Option<u64>) -> Result<RedeiResult> {
    let start = Instant::now();
    if bound > REDEI_LIMIT {
        return Err(Error::TooLarge(format!("Rédei census supports B ≤ {REDEI_LIMIT}, got {bound}")));
    }
    let b = bound as i64;
    let sieve = crate::qlocal::SpfSieve::new(bound.max(2));
    let vals: Vec<i64> = (-b..=b).filter(|&x| x != 0 && sieve.is_squarefree(x.unsigned_abs())).collect();
    let m = vals.len();
    let trivial: Vec<Vec<bool>> = exec.map_indexed(m, |i| (0..m).map(|j| hilbert_trivial_everywhere(vals[i], vals[j])).collect());
    let disc: Vec<u64> = vals.iter().map(|&a| discriminant(a)).collect();
    let parts: Vec<(u64, [u64; 3])> = exec.map_indexed(m, |i| {
        let mut total = 0u64;
        let mut pos = [0u64; 3];
        for j in 0..m {
            if !trivial[i][j] {
                continue;
            }
            let gij = gcd(disc[i], disc[j]);
            for k in 0..m {
                if !trivial[i][k] || !trivial[j][k] || gcd(gij, disc[k]) != 1 {
                    continue;
                }
                let one = [vals[i], vals[j], vals[k]].map(|x| x.rem_euclid(8) == 1);
                if !one.iter().any(|&x| x) {
                    continue;
                }
                total += 1;
                for (p, &o) in pos.iter_mut().zip(&one) {
                    *p += o as u64;
                }
            }
        }
        (total, pos)
    });
    let mut total = 0;
    let mut by_position = [0u64; 3];
    for (t, p) in parts {
        total += t;
        for k in 0..3 {
            by_position[k] += p[k];
        }
    }
    let predicted = match primes_bound {
        None => None,
        Some(pb) => {
            let fam = crate::family::builtin("redei")?;
            let opts = EulerOptions { primes_bound: pb, exec, ..Default::default() };
            Some(leading_constant(&fam, Mode::Squarefree, &opts)?.predict(bound as f64)).filter(|v| v.is_finite())
        }
    };
    Ok(RedeiResult {
        bound,
        total,
        by_position,
        predicted,
        ratio: predicted.map(|p| total as f64 / p),
        wall_time_ms: Some(start.elapsed().as_millis() as u64),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Trend {
    Start,
    Toward,
    Away,
    Flat,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportRow {
    pub bound: u64,
    pub observed: u64,
    pub predicted: f64,
    pub ratio: f64,
    pub trend: Trend,
}

fn with_trend(rows: Vec<(u64, u64, f64)>) -> Vec<ReportRow> {
    let mut out: Vec<ReportRow> = Vec::with_capacity(rows.len());
    for (bound, observed, predicted) in rows {
        let ratio = observed as f64 / predicted;
        let trend = match out.last() {
            None => Trend::Start,
            Some(prev) => {
                let (a, b) = ((prev.ratio - 1.0).abs(), (ratio - 1.0).abs());
                if b < a {
                    Trend::Toward
                } else if b > a {
                    Trend::Away
                } else {
                    Trend::Flat
                }
            }
        };
        out.push(ReportRow { bound, observed, predicted, ratio, trend });
    }
    out
}

/// One census per bound in `sweep`.
pub fn report(req: &CensusRequest, sweep: &[u64]) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::with_capacity(sweep.len());
    for &bound in sweep {
        let mut r = req.clone();
        r.bound = bound;
        r.primes_bound = Some(req.primes_bound.unwrap_or(100_000));
        let res = count(&r)?;
        rows.push((bound, res.total, res.predicted.unwrap_or(f64::NAN)));
    }
    Ok(with_trend(rows))
}

pub fn redei_report(sweep: &[u64], exec: Exec, primes_bound: u64) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::with_capacity(sweep.len());
    for &bound in sweep {
        let res = redei_count(bound, exec, Some(primes_bound))?;
        rows.push((bound, res.total, res.predicted.unwrap_or(f64::NAN)));
    }
    Ok(with_trend(rows))
}

pub fn rows_to_csv(rows: &[ReportRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    if rows.is_empty() {
        w.write_record(["bound", "observed", "predicted", "ratio", "trend"]).map_err(|e| Error::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

/// Uniform random nonzero vector in the box `[-T, T]^n`.
pub fn random_fibre<R: Rng>(rng: &mut R, n: usize, bound: i64) -> Vec<i64> {
    (0..n)
        .map(|_| {
            let r = rng.gen_range(0..2 * bound);
            if r < bound {
                r - bound
            } else {
                r - bound + 1
            }
        })
        .collect()
}
