//! Decimal formatting shared by every text format the crate writes.

/// Formats `x` with 17 significant digits, `%.17g` style, so that parsing the
/// text recovers the exact bits. Infinities are written as `inf` / `-inf`.
pub fn g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    const P: i32 = 17;
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..P).contains(&exp) {
        let decimals = (P - 1 - exp).max(0) as usize;
        strip_zeros(format!("{:.*}", decimals, x))
    } else {
        let m = strip_zeros(mantissa.to_string());
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    }
}

fn strip_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    t.to_string()
}

/// Parses a float written by [`g17`] (or any ordinary decimal), accepting `inf`.
pub fn parse_f64(s: &str) -> Option<f64> {
    match s.trim() {
        "inf" | "+inf" | "Inf" | "infinity" => Some(f64::INFINITY),
        "-inf" | "-Inf" | "-infinity" => Some(f64::NEG_INFINITY),
        t => t.parse().ok(),
    }
}

/// Serde adapter writing non-finite floats as the strings `inf` / `-inf` / `nan`
/// (JSON has no literal for them) and reading either form back.
pub mod inf_json {
    use serde::de::{self, Deserializer, Visitor};
    use serde::Serializer;

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_str(&super::g17(*x))
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = f64;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a number or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
                Ok(v)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
                match v {
                    "nan" => Ok(f64::NAN),
                    _ => super::parse_f64(v)
                        .filter(|x| x.is_infinite())
                        .ok_or_else(|| {
                            E::custom(format!("expected a number or \"inf\", got {v:?}"))
                        }),
                }
            }
        }
        d.deserialize_any(V)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn familiar_values() {
        assert_eq!(g17(1.0), "1");
        assert_eq!(g17(0.1), "0.10000000000000001");
        assert_eq!(g17(-2.5), "-2.5");
        assert_eq!(g17(1e-7), "9.9999999999999995e-08");
        assert_eq!(g17(f64::INFINITY), "inf");
        assert_eq!(g17(123456.0), "123456");
    }

    proptest! {
        #[test]
        fn round_trips_bits(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL) {
            let back = parse_f64(&g17(x)).unwrap();
            prop_assert_eq!(back.to_bits(), x.to_bits());
        }
    }

    #[test]
    fn inf_json_round_trip() {
        #[derive(serde::Serialize, serde::Deserialize, PartialEq, Debug)]
        struct T {
            #[serde(with = "inf_json")]
            x: f64,
        }
        let t = T { x: f64::INFINITY };
        let text = serde_json::to_string(&t).unwrap();
        assert_eq!(text, r#"{"x":"inf"}"#);
        assert_eq!(serde_json::from_str::<T>(&text).unwrap(), t);
        assert_eq!(
            serde_json::from_str::<T>(r#"{"x":2}"#).unwrap(),
            T { x: 2.0 }
        );
        assert!(serde_json::from_str::<T>(r#"{"x":"2"}"#).is_err());
    }
}
