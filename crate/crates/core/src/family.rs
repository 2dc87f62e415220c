//! Families of diagonal conics with signed squarefree monomial coefficients.

use crate::error::{Error, Result};
use crate::f2res::SubsetVec;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Largest number of base variables a family may use.
pub const MAX_FAMILY_VARS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Affine,
    Projective,
    Squarefree,
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "affine" => Ok(Mode::Affine),
            "projective" => Ok(Mode::Projective),
            "squarefree" => Ok(Mode::Squarefree),
            _ => Err(Error::Domain(format!("unknown mode `{s}`"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Affine => "affine",
            Mode::Projective => "projective",
            Mode::Squarefree => "squarefree",
        })
    }
}

/// Extra congruence conditions imposed on the fibres being counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SideCondition {
    #[default]
    None,
    /// Some coordinate is 1 mod 8 and the discriminants are coprime.
    Redei,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MonomialConicFamily {
    n: usize,
    conics: Vec<[SubsetVec; 3]>,
    mode: Mode,
    side: SideCondition,
}

/// Coefficient triples of every conic at a given `t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvaluatedFibre {
    pub t: Vec<i64>,
    pub coefficients: Vec<[i64; 3]>,
}

impl MonomialConicFamily {
    pub fn new(n: usize, conics: Vec<[SubsetVec; 3]>, mode: Mode, side: SideCondition) -> Result<Self> {
        let fam = MonomialConicFamily { n, conics, mode, side };
        fam.validate()?;
        Ok(fam)
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 || self.n > MAX_FAMILY_VARS {
            return Err(Error::InvalidFamily(format!(
                "vars must lie in 2..={MAX_FAMILY_VARS}, got {}",
                self.n
            )));
        }
        if self.conics.is_empty() {
            return Err(Error::InvalidFamily("at least one conic is required".into()));
        }
        let full = SubsetVec::full(self.n);
        for (i, c) in self.conics.iter().enumerate() {
            for s in c {
                if !s.proj().is_subset_of(full) {
                    return Err(Error::InvalidFamily(format!("conic {} uses a variable beyond t{}", i + 1, self.n)));
                }
            }
            for (a, b) in [(0, 1), (0, 2), (1, 2)] {
                if !c[a].proj().intersect(c[b].proj()).is_empty() {
                    return Err(Error::InvalidFamily(format!(
                        "conic {}: monomials {} and {} are not coprime",
                        i + 1,
                        a + 1,
                        b + 1
                    )));
                }
            }
            if self.mode == Mode::Projective {
                let d = c[0].proj_len();
                if c[1].proj_len() != d || c[2].proj_len() != d {
                    return Err(Error::InvalidFamily(format!(
                        "conic {}: projective mode needs monomials of equal degree",
                        i + 1
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.conics.len()
    }

    pub fn conics(&self) -> &[[SubsetVec; 3]] {
        &self.conics
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn side(&self) -> SideCondition {
        self.side
    }

    pub fn with_mode(&self, mode: Mode) -> Result<Self> {
        MonomialConicFamily::new(self.n, self.conics.clone(), mode, self.side)
    }

    /// Every conic has its three degrees congruent mod 2, so `t` and `−t` give the same fibre.
    pub fn equal_degree_parity(&self) -> bool {
        self.conics.iter().all(|c| {
            let d = c[0].proj_len() % 2;
            c[1].proj_len() % 2 == d && c[2].proj_len() % 2 == d
        })
    }

    pub fn equal_degrees(&self) -> bool {
        self.conics.iter().all(|c| {
            let d = c[0].proj_len();
            c[1].proj_len() == d && c[2].proj_len() == d
        })
    }

    pub fn evaluate(&self, t: &[i64]) -> Result<EvaluatedFibre> {
        if t.len() != self.n {
            return Err(Error::Domain(format!("expected {} coordinates, got {}", self.n, t.len())));
        }
        if let Some(i) = t.iter().position(|&x| x == 0) {
            return Err(Error::DegenerateFibre(i + 1));
        }
        let mono = |s: SubsetVec| -> Result<i64> {
            let mut v: i64 = if s.has_minus() { -1 } else { 1 };
            for k in s.indices() {
                v = v.checked_mul(t[k - 1]).ok_or(Error::Overflow("monomial"))?;
            }
            Ok(v)
        };
        let coefficients = self
            .conics
            .iter()
            .map(|c| Ok([mono(c[0])?, mono(c[1])?, mono(c[2])?]))
            .collect::<Result<Vec<_>>>()?;
        Ok(EvaluatedFibre { t: t.to_vec(), coefficients })
    }

    /// Text form accepted by [`parse_family`].
    pub fn serialize(&self) -> String {
        let mut out = format!("vars = {}\n", self.n);
        for c in &self.conics {
            let monos: Vec<String> = c.iter().map(|&s| monomial_text(s)).collect();
            out.push_str(&format!("conic = {}\n", monos.join(" | ")));
        }
        out.push_str(&format!("mode = {}\n", self.mode));
        if self.side == SideCondition::Redei {
            out.push_str("side = redei\n");
        }
        out
    }

    /// Short stable fingerprint of the serialized form.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let hash = Sha256::digest(self.serialize().as_bytes());
        hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

fn monomial_text(s: SubsetVec) -> String {
    let body = if s.proj().is_empty() {
        "1".to_string()
    } else {
        s.indices().map(|k| format!("t{k}")).collect::<Vec<_>>().join("*")
    };
    if s.has_minus() {
        format!("-{body}")
    } else {
        body
    }
}

impl fmt::Display for MonomialConicFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.serialize())
    }
}

fn perr(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, column, message: message.into() }
}

fn parse_monomial(text: &str, line: usize, col0: usize, n: usize) -> Result<SubsetVec> {
    let lead = text.len() - text.trim_start().len();
    let col = col0 + text[..lead].chars().count();
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if compact.is_empty() {
        return Err(perr(line, col, "empty monomial"));
    }
    let (minus, body) = match compact.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, compact.as_str()),
    };
    let mut s = SubsetVec(u128::from(minus));
    if body == "1" {
        return Ok(s);
    }
    for factor in body.split('*') {
        let k: usize = factor
            .strip_prefix('t')
            .and_then(|d| d.parse().ok())
            .ok_or_else(|| perr(line, col, format!("expected `t<k>` or `1`, found `{factor}`")))?;
        if k == 0 || k > n {
            return Err(perr(line, col, format!("variable t{k} outside t1..t{n}")));
        }
        if s.contains(k) {
            return Err(perr(line, col, format!("variable t{k} repeated: monomial is not squarefree")));
        }
        s.0 |= 1u128 << k;
    }
    Ok(s)
}

/// Parses the line-oriented family grammar.
pub fn parse_family(text: &str) -> Result<MonomialConicFamily> {
    let mut n: Option<usize> = None;
    let mut conics: Vec<[SubsetVec; 3]> = Vec::new();
    let mut mode: Option<Mode> = None;
    let mut side = SideCondition::None;
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let indent = content.chars().take_while(|c| c.is_whitespace()).count() + 1;
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| perr(line_no, indent, "expected `key = value`"))?;
        let value_col = key.chars().count() + 2;
        let key = key.trim();
        if n.is_none() && key != "vars" {
            return Err(perr(line_no, indent, "the first line must be `vars = <n>`"));
        }
        match key {
            "vars" => {
                if n.is_some() {
                    return Err(perr(line_no, indent, "`vars` given twice"));
                }
                let v: usize = value
                    .trim()
                    .parse()
                    .map_err(|_| perr(line_no, value_col, format!("bad variable count `{}`", value.trim())))?;
                if !(2..=MAX_FAMILY_VARS).contains(&v) {
                    return Err(perr(line_no, value_col, format!("vars must lie in 2..={MAX_FAMILY_VARS}")));
                }
                n = Some(v);
            }
            "conic" => {
                let nv = n.expect("vars checked above");
                let parts: Vec<&str> = value.split('|').collect();
                if parts.len() != 3 {
                    return Err(perr(line_no, value_col, "a conic needs exactly three monomials"));
                }
                let mut col = value_col;
                let mut slots = [SubsetVec::EMPTY; 3];
                for (j, part) in parts.iter().enumerate() {
                    slots[j] = parse_monomial(part, line_no, col, nv)?;
                    col += part.chars().count() + 1;
                }
                conics.push(slots);
            }
            "mode" => {
                if mode.is_some() {
                    return Err(perr(line_no, indent, "`mode` given twice"));
                }
                mode = Some(value.trim().parse().map_err(|_| {
                    perr(line_no, value_col, format!("unknown mode `{}`", value.trim()))
                })?);
            }
            "side" => {
                side = match value.trim() {
                    "none" => SideCondition::None,
                    "redei" => SideCondition::Redei,
                    other => return Err(perr(line_no, value_col, format!("unknown side condition `{other}`"))),
                };
            }
            other => return Err(perr(line_no, indent, format!("unknown key `{other}`"))),
        }
    }
    let n = n.ok_or_else(|| perr(last_line.max(1), 1, "missing `vars = <n>`"))?;
    if conics.is_empty() {
        return Err(perr(last_line.max(1), 1, "at least one `conic` line is required"));
    }
    MonomialConicFamily::new(n, conics, mode.unwrap_or_default(), side)
}

pub const BUILTIN_NAMES: [&str; 3] = ["planar", "redei", "example31"];

pub fn builtin(name: &str) -> Result<MonomialConicFamily> {
    let text = match name {
        "planar" => "vars = 3\nconic = t1 | t2 | t3\nmode = projective\n",
        "redei" => {
            "vars = 3\nconic = -1 | t1 | t2\nconic = -1 | t1 | t3\nconic = -1 | t2 | t3\nmode = squarefree\nside = redei\n"
        }
        "example31" => {
            "vars = 6\nconic = t2*t3 | t1*t4 | -1\nconic = t2*t5 | t1*t6 | -1\nconic = t4*t5 | t3*t6 | -1\nmode = affine\n"
        }
        other => return Err(Error::UnknownBuiltin(other.to_string())),
    };
    parse_family(text)
}

/// Resolves `builtin:<name>` or reads a family file.
pub fn load_family(source: &str) -> Result<MonomialConicFamily> {
    match source.strip_prefix("builtin:") {
        Some(name) => builtin(name),
        None => parse_family(&std::fs::read_to_string(source)?),
    }
}

/// Random family with `n` variables and `m` conics. In projective mode every conic uses three
/// monomials of a common degree `d ≥ 1`, so `n ≥ 3` is required.
pub fn random_family<R: rand::Rng>(rng: &mut R, n: usize, m: usize, mode: Mode) -> Result<MonomialConicFamily> {
    if n < 2 || m == 0 || (mode == Mode::Projective && n < 3) {
        return Err(Error::Domain(format!("cannot build a random {mode} family with n = {n}, m = {m}")));
    }
    let mut conics = Vec::with_capacity(m);
    for _ in 0..m {
        let mut slots = [SubsetVec::EMPTY; 3];
        if mode == Mode::Projective {
            let d = rng.gen_range(1..=n / 3);
            let mut vars: Vec<usize> = (1..=n).collect();
            for k in (1..vars.len()).rev() {
                vars.swap(k, rng.gen_range(0..=k));
            }
            for (j, slot) in slots.iter_mut().enumerate() {
                *slot = SubsetVec::from_parts(false, &vars[j * d..(j + 1) * d]);
            }
        } else {
            for i in 1..=n {
                let j = rng.gen_range(0..4usize);
                if j < 3 {
                    slots[j] += SubsetVec::singleton(i);
                }
            }
        }
        for slot in slots.iter_mut() {
            if rng.gen_bool(0.5) {
                *slot += SubsetVec::MINUS;
            }
        }
        conics.push(slots);
    }
    MonomialConicFamily::new(n, conics, mode, SideCondition::None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_examples() {
        let planar = parse_family("vars = 3\nconic = t1 | t2 | t3\nmode = projective").unwrap();
        assert_eq!(planar, builtin("planar").unwrap());
        let redei =
            parse_family("vars = 3\nconic = -1 | t1 | t2\nconic = -1 | t1 | t3\nconic = -1 | t2 | t3\nmode = squarefree")
                .unwrap();
        assert_eq!(redei.conics(), builtin("redei").unwrap().conics());
        assert!(matches!(
            parse_family("vars = 2\nconic = t1 | t1 | t2"),
            Err(Error::InvalidFamily(msg)) if msg.contains("coprime")
        ));
    }

    #[test]
    fn parse_errors_carry_positions() {
        match parse_family("vars = 3\nconic = t1 | t4 | t2") {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (2, 14)),
            other => panic!("{other:?}"),
        }
        match parse_family("# c\n  mode = affine") {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (2, 3)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_family("vars = 2\nconic = t1*t1 | 1 | t2"), Err(Error::Parse { .. })));
        assert!(matches!(parse_family("vars = 2\nconic = t1 | t2"), Err(Error::Parse { .. })));
        assert!(matches!(
            parse_family("vars = 3\nconic = t1*t2 | t3 | 1\nmode = projective"),
            Err(Error::InvalidFamily(_))
        ));
    }

    #[test]
    fn builtins_round_trip() {
        for name in BUILTIN_NAMES {
            let f = builtin(name).unwrap();
            assert_eq!(parse_family(&f.serialize()).unwrap(), f);
        }
        assert!(builtin("nope").is_err());
    }

    #[test]
    fn evaluation() {
        let planar = builtin("planar").unwrap();
        assert_eq!(planar.evaluate(&[2, 3, 5]).unwrap().coefficients, vec![[2, 3, 5]]);
        assert_eq!(planar.evaluate(&[1, 0, 1]), Err(Error::DegenerateFibre(2)));
        let redei = builtin("redei").unwrap();
        assert_eq!(
            redei.evaluate(&[7, -3, 10]).unwrap().coefficients,
            vec![[-1, 7, -3], [-1, 7, 10], [-1, -3, 10]]
        );
    }
}
