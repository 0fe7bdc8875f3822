//! Extended nonnegative reals.
//!
//! Radius, order and type are plain `f64` values where `+inf` is a legal,
//! totally ordered value. On the wire `+inf` is the string `"inf"`; finite
//! values use the shortest round-trip decimal form.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// `1/x` with `1/0 = inf` and `1/inf = 0`.
pub fn reciprocal(x: f64) -> f64 {
    if x == 0.0 {
        f64::INFINITY
    } else if x.is_infinite() {
        0.0
    } else {
        1.0 / x
    }
}

/// `ln(e^a + e^b)` without overflow; either side may be `-inf`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Wire {
    Num(f64),
    Text(String),
}

pub fn serialize<S: Serializer>(value: &f64, s: S) -> Result<S::Ok, S::Error> {
    if value.is_infinite() && *value > 0.0 {
        s.serialize_str("inf")
    } else if value.is_infinite() {
        s.serialize_str("-inf")
    } else if value.is_nan() {
        s.serialize_str("nan")
    } else {
        s.serialize_f64(*value)
    }
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    match Wire::deserialize(d)? {
        Wire::Num(x) => Ok(x),
        Wire::Text(t) => match t.as_str() {
            "inf" | "+inf" => Ok(f64::INFINITY),
            "-inf" => Ok(f64::NEG_INFINITY),
            "nan" => Ok(f64::NAN),
            other => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {other:?}"))),
        },
    }
}

/// Same encoding for `Option<f64>`.
pub mod opt {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match value {
            Some(v) => super::serialize(v, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        #[derive(Deserialize)]
        struct Wrap(#[serde(with = "super")] f64);
        Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
    }
}

/// Same encoding for `Vec<f64>`.
pub mod vec {
    use serde::ser::SerializeSeq;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Wrap(#[serde(with = "super")] f64);

    pub fn serialize<S: Serializer>(values: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(values.len()))?;
        for v in values {
            seq.serialize_element(&Wrap(*v))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Ok(Vec::<Wrap>::deserialize(d)?.into_iter().map(|w| w.0).collect())
    }
}
