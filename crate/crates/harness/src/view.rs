//! Structural shape of an adversary's view.
//!
//! Two views have the same shape when they have the same keys, the same
//! array lengths and the same string lengths. Declared random fields are
//! kept as lengths only, which is all a shape comparison can see anyway.

use serde::Serialize;
use serde_json::Value;

/// Shape of `v` with the fields named in `drop` removed at every level.
pub fn shape<T: Serialize>(v: &T, drop: &[&str]) -> Value {
    strip(&serde_json::to_value(v).expect("view serialises"), drop)
}

fn strip(v: &Value, drop: &[&str]) -> Value {
    match v {
        Value::Object(m) => Value::Object(
            m.iter().filter(|(k, _)| !drop.contains(&k.as_str())).map(|(k, v)| (k.clone(), strip(v, drop))).collect(),
        ),
        Value::Array(a) => Value::Array(a.iter().map(|x| strip(x, drop)).collect()),
        Value::String(s) => Value::String(format!("str[{}]", s.len())),
        Value::Number(_) => Value::String("number".into()),
        Value::Bool(_) => Value::String("bool".into()),
        Value::Null => Value::Null,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn shapes_ignore_content_but_not_layout() {
        let a = json!({"c": "abcd", "nonce": "xy", "n": [1, 2]});
        let b = json!({"c": "zz", "nonce": "pq", "n": [5, 6]});
        assert_ne!(shape(&a, &[]), shape(&b, &[]));
        assert_eq!(shape(&a, &["c"]), shape(&b, &["c"]));
        assert_ne!(shape(&a, &["c"]), shape(&json!({"nonce": "pq", "n": [5]}), &["c"]));
    }
}
