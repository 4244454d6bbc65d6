//! Canonical JSON: sorted keys, two-space indent, floats rounded to 12
//! significant digits. Two runs of the same scene produce identical bytes.
//! Curve files use the same layout with shortest round-trip floats, so a
//! curve read back is bit-identical to the one written.

use serde::Serialize;
use serde_json::Value;
use std::fmt::Write;

pub const SIG_DIGITS: usize = 12;

/// Rounds to [`SIG_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIG_DIGITS - 1, x).parse().unwrap()
}

fn write_number(out: &mut String, n: &serde_json::Number, exact: bool) {
    if n.is_i64() || n.is_u64() {
        write!(out, "{n}").unwrap();
        return;
    }
    let x = n.as_f64().unwrap();
    let x = if exact { x } else { round_sig(x) };
    if x == 0.0 {
        out.push_str("0.0");
    } else if (1e-6..1e15).contains(&x.abs()) {
        let s = format!("{x}");
        out.push_str(&s);
        if !s.contains('.') {
            out.push_str(".0");
        }
    } else {
        write!(out, "{x:e}").unwrap();
    }
}

fn write_str(out: &mut String, s: &str) {
    out.push_str(&serde_json::to_string(s).unwrap());
}

fn write_value(out: &mut String, v: &Value, depth: usize, exact: bool) {
    let pad = |out: &mut String, d: usize| {
        out.push('\n');
        for _ in 0..d {
            out.push_str("  ");
        }
    };
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => write_number(out, n, exact),
        Value::String(s) => write_str(out, s),
        Value::Array(xs) if xs.is_empty() => out.push_str("[]"),
        Value::Array(xs) => {
            // short rows of numbers (points) stay on one line
            if xs.len() <= 8 && xs.iter().all(Value::is_number) {
                out.push('[');
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write_value(out, x, depth, exact);
                }
                out.push(']');
                return;
            }
            out.push('[');
            for (i, x) in xs.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                pad(out, depth + 1);
                write_value(out, x, depth + 1, exact);
            }
            pad(out, depth);
            out.push(']');
        }
        Value::Object(m) if m.is_empty() => out.push_str("{}"),
        Value::Object(m) => {
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                pad(out, depth + 1);
                write_str(out, k);
                out.push_str(": ");
                write_value(out, &m[k], depth + 1, exact);
            }
            pad(out, depth);
            out.push('}');
        }
    }
}

pub fn to_canonical_value(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v, 0, false);
    out.push('\n');
    out
}

/// Canonical layout without rounding.
pub fn to_canonical_exact<T: Serialize + ?Sized>(v: &T) -> serde_json::Result<String> {
    let mut out = String::new();
    write_value(&mut out, &serde_json::to_value(v)?, 0, true);
    out.push('\n');
    Ok(out)
}

/// Canonical form of any serialisable value. Non-finite floats become `null`.
pub fn to_canonical<T: Serialize + ?Sized>(v: &T) -> serde_json::Result<String> {
    Ok(to_canonical_value(&serde_json::to_value(v)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    #[allow(clippy::approx_constant)]
    fn sorted_and_rounded() {
        let v = json!({"b": std::f64::consts::PI, "a": [1, 2.5], "c": {"z": 1e-9, "y": 0.0}});
        let s = to_canonical_value(&v);
        assert_eq!(
            s,
            "{\n  \"a\": [1, 2.5],\n  \"b\": 3.14159265359,\n  \"c\": {\n    \"y\": 0.0,\n    \"z\": 1e-9\n  }\n}\n"
        );
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["b"].as_f64().unwrap(), 3.14159265359);
    }

    #[test]
    fn whole_floats_keep_a_point() {
        assert_eq!(to_canonical_value(&json!(2.0)), "2.0\n");
        assert_eq!(to_canonical_value(&json!(-0.5)), "-0.5\n");
        assert_eq!(to_canonical_value(&json!(1e20)), "1e20\n");
    }

    #[test]
    fn exact_round_trips() {
        let x = [0.1 + 0.2, 1.0 - 1e-15, std::f64::consts::E];
        let s = to_canonical_exact(&x).unwrap();
        let back: Vec<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn idempotent() {
        let v = json!({"x": 0.1 + 0.2, "n": [1.0e-7, 123456.789012345]});
        let a = to_canonical_value(&v);
        let b = to_canonical_value(&serde_json::from_str(&a).unwrap());
        assert_eq!(a, b);
    }
}
