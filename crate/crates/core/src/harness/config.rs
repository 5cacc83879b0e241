//! Flat key-value config files: `key = value` lines, `#` comments.
//! Keys mirror the CLI long flags; flags given on the command line win.

use std::collections::BTreeMap;

pub fn parse_flat(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected `key = value`, got {raw:?}", lineno + 1))?;
        let key = k.trim();
        if key.is_empty() {
            return Err(format!("line {}: empty key", lineno + 1));
        }
        map.insert(key.to_string(), v.trim().to_string());
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_ignores_comments() {
        let m = parse_flat("n-blocks = 1024\n# comment\nworkload = scan # trailing\n\n").unwrap();
        assert_eq!(m["n-blocks"], "1024");
        assert_eq!(m["workload"], "scan");
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(parse_flat("just-a-word\n").is_err());
        assert!(parse_flat("= value\n").is_err());
    }
}
