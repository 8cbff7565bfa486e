//! Canonical JSON rendering: sorted keys, floats at 6 significant digits,
//! no whitespace dependence on platform or insertion order.  Reports and
//! config digests both go through this writer so reruns stay byte-identical
//! and goldens stay diffable.

use serde::Serialize;
use serde_json::Value;

/// Serializes any value to canonical JSON text (trailing newline included).
pub fn to_canonical_json<T: Serialize>(value: &T) -> anyhow::Result<String> {
    let tree = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&mut out, &tree, 0);
    out.push('\n');
    Ok(out)
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn write_value(out: &mut String, value: &Value, depth: usize) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else {
                out.push_str(&format_sig6(n.as_f64().expect("number is one of i64/u64/f64")));
            }
        }
        Value::String(s) => {
            out.push_str(&serde_json::to_string(s).expect("string serialization is infallible"))
        }
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                indent(out, depth + 1);
                write_value(out, item, depth + 1);
            }
            out.push('\n');
            indent(out, depth);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push('{');
            // serde_json's default map is a BTreeMap, so iteration is already
            // key-sorted; rely on that rather than re-sorting.
            for (i, (key, item)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                indent(out, depth + 1);
                out.push_str(&serde_json::to_string(key).expect("key serialization is infallible"));
                out.push_str(": ");
                write_value(out, item, depth + 1);
            }
            out.push('\n');
            indent(out, depth);
            out.push('}');
        }
    }
}

/// Formats a float with 6 significant digits, `%g`-style: plain decimal when
/// the exponent is small, scientific otherwise, trailing zeros dropped.
pub fn format_sig6(x: f64) -> String {
    debug_assert!(x.is_finite(), "reports must not contain non-finite numbers");
    if x == 0.0 {
        return "0".to_string();
    }
    let formatted = format!("{:.5e}", x);
    let (mantissa, exp) = formatted
        .split_once('e')
        .expect("{:.5e} always contains an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    debug_assert_eq!(digits.len(), 6);

    let body = if (-4..=5).contains(&exp) {
        place_decimal(&digits, exp)
    } else {
        let trimmed = trim_trailing_zeros(&place_decimal(&digits, 0));
        format!("{trimmed}e{exp}")
    };
    let body = trim_trailing_zeros(&body);
    if negative {
        format!("-{body}")
    } else {
        body
    }
}

/// Lays out 6 digits with the decimal point after position `exp + 1`.
fn place_decimal(digits: &str, exp: i32) -> String {
    if exp < 0 {
        let zeros = "0".repeat((-exp - 1) as usize);
        format!("0.{zeros}{digits}")
    } else {
        let split = (exp + 1) as usize;
        if split >= digits.len() {
            let zeros = "0".repeat(split - digits.len());
            format!("{digits}{zeros}")
        } else {
            format!("{}.{}", &digits[..split], &digits[split..])
        }
    }
}

fn trim_trailing_zeros(s: &str) -> String {
    if !s.contains('.') {
        return s.to_string();
    }
    let trimmed = s.trim_end_matches('0').trim_end_matches('.');
    trimmed.to_string()
}
