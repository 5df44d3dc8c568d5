//! Serialize big integers and rationals as decimal strings.

use num_bigint::BigUint;
use num_rational::BigRational;
use serde::ser::SerializeSeq;
use serde::Serializer;

pub fn biguints<S: Serializer>(v: &[BigUint], s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for x in v {
        seq.serialize_element(&x.to_string())?;
    }
    seq.end()
}

pub fn ratio<S: Serializer>(r: &BigRational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}
