//! Key=value config files and flag/file/default resolution.
//!
//! Precedence is: command-line flag, then config-file entry, then the
//! command's built-in default (or a usage error for required values).

use std::collections::BTreeMap;
use std::str::FromStr;

/// Parse a simple `key=value` config file. Blank lines and lines
/// starting with `#` are ignored; whitespace around keys and values is
/// trimmed; later entries override earlier ones.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!(
                "config line {}: expected key=value, got {line:?}",
                lineno + 1
            ));
        };
        let key = key.trim();
        if key.is_empty() {
            return Err(format!("config line {}: empty key", lineno + 1));
        }
        map.insert(key.to_string(), value.trim().to_string());
    }
    Ok(map)
}

/// Resolves option values against a parsed config file.
pub struct Resolver {
    file: BTreeMap<String, String>,
}

impl Resolver {
    pub fn new(file: BTreeMap<String, String>) -> Self {
        Resolver { file }
    }

    /// Flag value if present, else the parsed config entry, else None.
    pub fn resolve<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, String>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|e| format!("config key {key:?}: cannot parse {raw:?}: {e}")),
        }
    }

    /// Like `resolve` but falls back to a default.
    pub fn resolve_or<T: FromStr>(
        &self,
        flag: Option<T>,
        key: &str,
        default: T,
    ) -> Result<T, String>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.resolve(flag, key)?.unwrap_or(default))
    }

    /// Like `resolve` but required: missing everywhere is a usage error.
    pub fn require<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<T, String>
    where
        T::Err: std::fmt::Display,
    {
        self.resolve(flag, key)?
            .ok_or_else(|| format!("missing required option --{key} (flag or config file)"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_blanks_and_overrides() {
        let text = "# comment\n\nseed = 7\n  tol=1e-9\nseed=8\n";
        let map = parse_config(text).unwrap();
        assert_eq!(map.get("seed").unwrap(), "8");
        assert_eq!(map.get("tol").unwrap(), "1e-9");
        assert_eq!(map.len(), 2);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(parse_config("just words\n").is_err());
        assert!(parse_config("=value\n").is_err());
    }

    #[test]
    fn precedence_is_flag_then_file_then_default() {
        let r = Resolver::new(parse_config("workers=3\n").unwrap());
        assert_eq!(r.resolve_or(Some(5usize), "workers", 1).unwrap(), 5);
        assert_eq!(r.resolve_or::<usize>(None, "workers", 1).unwrap(), 3);
        assert_eq!(r.resolve_or::<usize>(None, "absent", 1).unwrap(), 1);
        assert!(r.require::<u64>(None, "seed").is_err());
    }

    #[test]
    fn bad_typed_value_is_an_error() {
        let r = Resolver::new(parse_config("seed=notanumber\n").unwrap());
        assert!(r.resolve::<u64>(None, "seed").is_err());
    }
}
