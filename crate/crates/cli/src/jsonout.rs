//! Deterministic JSON output: floats printed with 17 significant digits,
//! keys in sorted order, no environment-dependent content. Reruns with
//! identical inputs produce byte-identical files.

use std::io::Write;

use serde_json::ser::Formatter;
use serde_json::Value;

struct SciFloats;

impl Formatter for SciFloats {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + Write,
    {
        // 1 leading digit + 16 fractional digits = 17 significant digits
        write!(writer, "{value:.16e}")
    }
}

/// A JSON number when finite, a tagged string otherwise (JSON has no
/// inf/nan literals).
pub fn fval(v: f64) -> Value {
    if v.is_finite() {
        Value::from(v)
    } else if v.is_nan() {
        Value::from("nan")
    } else if v > 0.0 {
        Value::from("inf")
    } else {
        Value::from("-inf")
    }
}

/// Serialize with the deterministic float format, trailing newline included.
pub fn to_bytes(value: &Value) -> Vec<u8> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SciFloats);
    serde::Serialize::serialize(value, &mut ser).expect("JSON value serialization");
    out.push(b'\n');
    out
}

/// Fixed 17-significant-digit float text for CSV cells.
pub fn csv_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        String::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn floats_print_with_seventeen_digits() {
        let bytes = to_bytes(&json!({"v": 0.1}));
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.contains("1.0000000000000001e-1"), "{text}");
    }

    #[test]
    fn non_finite_values_become_strings() {
        assert_eq!(fval(f64::INFINITY), Value::from("inf"));
        assert_eq!(fval(f64::NAN), Value::from("nan"));
    }

    #[test]
    fn serialization_is_reproducible() {
        let v = json!({"b": [1.5e-300, 2.0], "a": {"x": 3.25}});
        assert_eq!(to_bytes(&v), to_bytes(&v));
    }
}
