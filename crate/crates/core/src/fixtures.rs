//! `key=value` fixture files. Blank lines and lines starting with `#` are
//! ignored; repeated keys keep every value in order.

use std::collections::BTreeMap;

/// Parses fixture text into the last value for every key.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>, String> {
    Ok(parse_multi(text)?.into_iter().map(|(k, mut v)| (k, v.pop().expect("non-empty"))).collect())
}

/// Parses fixture text keeping all values per key.
pub fn parse_multi(text: &str) -> Result<BTreeMap<String, Vec<String>>, String> {
    let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| format!("line {}: expected key=value", n + 1))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(format!("line {}: empty key", n + 1));
        }
        out.entry(k.to_owned()).or_default().push(v.trim().to_owned());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_repeats() {
        let m = parse_multi("# c\na=1\n\nb = x=y\na=2\n").unwrap();
        assert_eq!(m["a"], vec!["1", "2"]);
        assert_eq!(m["b"], vec!["x=y"]);
        assert_eq!(parse_kv("a=1\na=2").unwrap()["a"], "2");
        assert!(parse_kv("novalue").is_err());
        assert!(parse_kv("=v").is_err());
    }
}
