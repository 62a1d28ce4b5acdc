//! Shared text formatting: every real leaves the crate with 17 significant digits.

use serde::Serializer;
use serde_json::value::RawValue;

/// `x` with 17 significant digits, which round-trips any finite `f64`.
pub fn real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

fn raw(x: f64) -> Box<RawValue> {
    let text = if x.is_finite() { real(x) } else { "null".to_owned() };
    RawValue::from_string(text).expect("formatted real is valid JSON")
}

pub fn ser_real<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_some(&raw(*x))
}

pub fn ser_reals<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(xs.iter().map(|&x| raw(x)))
}

pub fn ser_opt_real<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => ser_real(v, s),
        None => s.serialize_none(),
    }
}

pub fn ser_real_map<S: Serializer>(m: &std::collections::BTreeMap<String, f64>, s: S) -> Result<S::Ok, S::Error> {
    s.collect_map(m.iter().map(|(k, &v)| (k, raw(v))))
}

pub fn ser_points<S: Serializer>(ps: &[[f64; 2]], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(ps.iter().map(|p| [raw(p[0]), raw(p[1])]))
}

pub fn ser_point<S: Serializer>(p: &[f64; 2], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq([raw(p[0]), raw(p[1])])
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Serialize;

    #[derive(Serialize)]
    struct Doc {
        #[serde(serialize_with = "ser_real")]
        a: f64,
        #[serde(serialize_with = "ser_reals")]
        b: Vec<f64>,
    }

    #[test]
    fn seventeen_digits_round_trip() {
        let xs = [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0];
        let doc = Doc { a: PI, b: xs.to_vec() };
        let text = serde_json::to_string(&doc).unwrap();
        assert!(text.contains("3.1415926535897931e0"));
        let back: serde_json::Value = serde_json::from_str(&text).unwrap();
        let b: Vec<f64> = serde_json::from_value(back["b"].clone()).unwrap();
        assert_eq!(b, xs);
    }

    const PI: f64 = std::f64::consts::PI;
}
