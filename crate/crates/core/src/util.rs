use num_rational::{BigRational, Rational64};
use serde::ser::{SerializeSeq, Serializer};

pub fn rational_string(r: &Rational64) -> String {
    if *r.denom() == 1 {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn big_rational_string(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn ser_rational<S: Serializer>(r: &Rational64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&rational_string(r))
}

pub fn ser_big_rational<S: Serializer>(r: &BigRational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&big_rational_string(r))
}

pub fn ser_gamma_values<S: Serializer>(v: &[(Rational64, f64)], s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for (x, g) in v {
        seq.serialize_element(&(rational_string(x), g))?;
    }
    seq.end()
}

pub fn ser_rational_vec<S: Serializer>(v: &[Rational64], s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for x in v {
        seq.serialize_element(&rational_string(x))?;
    }
    seq.end()
}
