//! Invariant suites run by `verify`.

use crate::analytic::{compare, reference_specs};
use crate::brgroup::{enumerate_bmsub, verify_blocking_exhaustive};
use crate::error::{Error, Result};
use crate::f2res::{expand_indicator, proper_blocks, ResidueData};
use crate::family::{builtin, random_family, Mode, MonomialConicFamily, BUILTIN_NAMES};
use crate::localdens::{lambda_p, sigma_p, LocalMode};
use crate::qlocal::{hilbert_symbol, primes_up_to, PlaceRef, SpfSieve};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Reciprocity,
    Lexpand,
    Blocking,
    LambdaSigma,
    Meanvalue,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Reciprocity, Suite::Lexpand, Suite::Blocking, Suite::LambdaSigma, Suite::Meanvalue];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Reciprocity => "reciprocity",
            Suite::Lexpand => "lexpand",
            Suite::Blocking => "blocking",
            Suite::LambdaSigma => "lambda-sigma",
            Suite::Meanvalue => "meanvalue",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown suite `{s}`")))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub passed: bool,
    pub checks: u64,
    pub failures: Vec<String>,
    pub rows: Vec<String>,
}

impl SuiteReport {
    fn new(suite: Suite) -> Self {
        SuiteReport { suite, passed: true, checks: 0, failures: Vec::new(), rows: Vec::new() }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.passed = false;
            if self.failures.len() < 20 {
                self.failures.push(what());
            }
        }
    }
}

pub fn run(suite: Suite) -> Result<SuiteReport> {
    match suite {
        Suite::Reciprocity => reciprocity(300),
        Suite::Lexpand => lexpand(37, 10_000, 0x5eed),
        Suite::Blocking => blocking(),
        Suite::LambdaSigma => lambda_sigma(100, 20, 0x5eed),
        Suite::Meanvalue => meanvalue(&[10_000, 100_000, 1_000_000], 0.15),
    }
}

/// `∏_v (a, b)_v = 1` for all nonzero `|a|, |b| ≤ bound`.
pub fn reciprocity(bound: i64) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new(Suite::Reciprocity);
    let sieve = SpfSieve::new(bound.unsigned_abs().max(2));
    let odd: Vec<Vec<u64>> = (0..=bound as u64)
        .map(|m| if m < 2 { Vec::new() } else { sieve.factor(m).into_iter().map(|(p, _)| p).filter(|&p| p > 2).collect() })
        .collect();
    for a in (-bound..=bound).filter(|&x| x != 0) {
        for b in (-bound..=bound).filter(|&x| x != 0) {
            let mut prod = hilbert_symbol(a, b, PlaceRef::Real)? * hilbert_symbol(a, b, PlaceRef::Two)?;
            let (pa, pb) = (&odd[a.unsigned_abs() as usize], &odd[b.unsigned_abs() as usize]);
            for &p in pa {
                prod *= hilbert_symbol(a, b, PlaceRef::Odd(p))?;
            }
            for &p in pb.iter().filter(|p| !pa.contains(p)) {
                prod *= hilbert_symbol(a, b, PlaceRef::Odd(p))?;
            }
            rep.check(prod == 1, || format!("product over places of ({a},{b}) is {prod}"));
        }
    }
    rep.rows.push(format!("pairs={} bound={bound}", rep.checks));
    Ok(rep)
}

fn lexpand_family(rep: &mut SuiteReport, name: &str, fam: &MonomialConicFamily, max_p: u64, random: usize, rng: &mut ChaCha8Rng) {
    let res = ResidueData::build(fam);
    let n = fam.n();
    let before = rep.checks;
    for p in primes_up_to(max_p).into_iter().filter(|&p| p > 2) {
        let mut vectors: Vec<Vec<i64>> = Vec::new();
        if n <= 3 {
            let units = p - 1;
            for code in 0..units.pow(n as u32) {
                vectors.push((0..n).map(|i| (code / units.pow(i as u32) % units + 1) as i64).collect());
            }
        } else {
            for _ in 0..random {
                vectors.push((0..n).map(|_| rng.gen_range(1..p as i64)).collect());
            }
        }
        for s in proper_blocks(n) {
            for t in &vectors {
                let r = expand_indicator(&res, s, t, p);
                rep.check(r.is_ok(), || format!("{name}: {}", r.as_ref().err().map(|e| e.to_string()).unwrap_or_default()));
            }
        }
    }
    rep.rows.push(format!("family={name} checks={}", rep.checks - before));
}

/// Detector identity on every builtin: exhaustive residues for `n ≤ 3`, random ones otherwise.
pub fn lexpand(max_p: u64, random: usize, seed: u64) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new(Suite::Lexpand);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for name in BUILTIN_NAMES {
        let fam = builtin(name)?;
        // the random budget is shared across primes and blocks
        let odd = primes_up_to(max_p).into_iter().filter(|&p| p > 2).count().max(1);
        let per = random.div_ceil(odd).max(1);
        lexpand_family(&mut rep, name, &fam, max_p, per, &mut rng);
    }
    Ok(rep)
}

/// Families used by the blocking-set suite: planar plus random small families.
pub fn blocking_families(seed: u64, extra: usize) -> Result<Vec<(String, MonomialConicFamily)>> {
    let mut out = vec![("planar".to_string(), builtin("planar")?)];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut attempts = 0;
    while out.len() < extra + 1 && attempts < 10_000 {
        attempts += 1;
        let n = rng.gen_range(2..=3);
        let m = rng.gen_range(1..=2);
        let fam = random_family(&mut rng, n, m, Mode::Affine)?;
        let size = ResidueData::build(&fam).index_set().len();
        if (1..=14).contains(&size) {
            out.push((format!("random-{}", out.len()), fam));
        }
    }
    Ok(out)
}

pub fn blocking() -> Result<SuiteReport> {
    let mut rep = SuiteReport::new(Suite::Blocking);
    for (name, fam) in blocking_families(0xb10c, 8)? {
        let res = ResidueData::build(&fam);
        let check = verify_blocking_exhaustive(&res)?;
        rep.check(check.consistent, || format!("{name}: blocking sets and sandwiches disagree ({check:?})"));
        rep.rows.push(format!(
            "family={name} index_set={} blocking_sets={} sandwich_members={}",
            check.index_set_size, check.blocking_sets, check.sandwich_members
        ));
    }
    Ok(rep)
}

/// Random same-degree projective families with `n ≤ 4`, `m ≤ 3`.
pub fn random_projective_families(count: usize, seed: u64) -> Result<Vec<MonomialConicFamily>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.gen_range(3..=4);
            let m = rng.gen_range(1..=3);
            random_family(&mut rng, n, m, Mode::Projective)
        })
        .collect()
}

fn bridge(rep: &mut SuiteReport, name: &str, fam: &MonomialConicFamily, max_p: u64) -> Result<()> {
    let res = ResidueData::build(fam);
    let before = rep.checks;
    for g in enumerate_bmsub(&res)?.into_iter().filter(|g| g.is_pbm) {
        for p in primes_up_to(max_p).into_iter().filter(|&p| p > 2) {
            let l = lambda_p(&res, &g, p, LocalMode::Full)?;
            let s = sigma_p(&res, &g, p)?;
            rep.check(l == s, || format!("{name}: g={} p={p}: {} vs {}", g.label(), l.mantissa, s.mantissa));
        }
    }
    rep.rows.push(format!("family={name} checks={}", rep.checks - before));
    Ok(())
}

pub fn lambda_sigma(max_p: u64, random: usize, seed: u64) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new(Suite::LambdaSigma);
    bridge(&mut rep, "planar", &builtin("planar")?, max_p)?;
    for (k, fam) in random_projective_families(random, seed)?.iter().enumerate() {
        bridge(&mut rep, &format!("random-{k}"), fam, max_p)?;
    }
    Ok(rep)
}

/// Direct sums against the main term: every final ratio within `tol`, and `|ratio − 1|` shrinking.
pub fn meanvalue(xs: &[u64], tol: f64) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new(Suite::Meanvalue);
    rep.rows.push("spec,x,lhs,main_term,ratio".to_string());
    for (name, spec) in reference_specs() {
        let mut prev: Option<f64> = None;
        let mut last = f64::NAN;
        for &x in xs {
            let row = compare(name, &spec, x, 1_000_000)?;
            rep.rows.push(format!("{},{},{},{:.6},{:.6}", row.spec, row.x, row.lhs, row.main_term, row.ratio));
            let dev = (row.ratio - 1.0).abs();
            if let Some(p) = prev {
                rep.check(dev < p, || format!("{name}: |ratio − 1| did not shrink at X = {x} ({p:.5} → {dev:.5})"));
            }
            prev = Some(dev);
            last = row.ratio;
        }
        rep.check((last - 1.0).abs() <= tol, || format!("{name}: final ratio {last:.5} outside ±{tol}"));
    }
    Ok(rep)
}
