//! Byte-stable JSON: sorted keys, no whitespace, floats as `%.17g`.

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

/// C-style `%.17g`: 17 significant digits, trailing zeros dropped, exponent
/// form outside [1e-4, 1e17). Non-finite values have no JSON form; callers
/// map them to `null`.
pub fn format_g17(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (16 - exp) as usize;
        strip_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn write_value(v: &Value, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else {
                let f = n.as_f64().expect("finite float");
                out.push_str(&format_g17(f));
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(key.clone()).to_string());
                out.push(':');
                write_value(&map[key], out);
            }
            out.push('}');
        }
    }
}

/// Canonical text of a JSON value, newline-terminated.
pub fn canonical_value(v: &Value) -> String {
    let mut out = String::new();
    write_value(v, &mut out);
    out.push('\n');
    out
}

/// Canonical text of any serializable value. NaN and infinities become
/// `null`.
pub fn to_canonical_string<S: Serialize + ?Sized>(value: &S) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| Error::domain(format!("serialization: {e}")))?;
    Ok(canonical_value(&v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn matches_printf_g17() {
        assert_eq!(format_g17(0.1), "0.10000000000000001");
        assert_eq!(format_g17(1.0), "1");
        assert_eq!(format_g17(-2.5), "-2.5");
        assert_eq!(format_g17(1e-5), "1.0000000000000001e-05");
        assert_eq!(format_g17(1.5e20), "1.5e+20");
        assert_eq!(format_g17(123456.0), "123456");
        assert_eq!(format_g17(2.0 * std::f64::consts::LN_2), "1.3862943611198906");
        assert_eq!(format_g17(1e16), "10000000000000000");
        assert_eq!(format_g17(1e17), "1e+17");
    }

    #[test]
    fn round_trips_floats() {
        for x in [0.1, 1.0 / 3.0, 6.02e23, 5e-324, -1.7976931348623157e308, 0.05] {
            let s = format_g17(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }

    #[test]
    fn sorts_keys_and_nulls_nonfinite() {
        let v = json!({"b": 1, "a": [0.5, null], "c": {"z": true, "y": "q\""}});
        assert_eq!(
            canonical_value(&v),
            "{\"a\":[0.5,null],\"b\":1,\"c\":{\"y\":\"q\\\"\",\"z\":true}}\n"
        );
        #[derive(Serialize)]
        struct S {
            x: f64,
        }
        assert_eq!(to_canonical_string(&S { x: f64::NAN }).unwrap(), "{\"x\":null}\n");
    }
}
