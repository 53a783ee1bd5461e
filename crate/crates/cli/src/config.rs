//! Plain `key = value` config files mirroring the CLI flags, and a stable
//! hash so output files can be traced back to the exact configuration.

use anyhow::{bail, Context, Result};
use std::collections::BTreeMap;
use std::path::Path;

/// Parsed `key = value` pairs; keys are normalized to kebab-case to match
/// the flag names.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        let mut values = BTreeMap::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("{}:{}: expected `key = value`", path.display(), ln + 1);
            };
            let key = key.trim().replace('_', "-");
            values.insert(key, value.trim().to_string());
        }
        Ok(ConfigFile { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => match raw.parse::<T>() {
                Ok(v) => Ok(Some(v)),
                Err(e) => bail!("config key `{key}`: {e}"),
            },
        }
    }
}

/// FNV-1a, so config hashes are stable across builds and platforms.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Short hex hash of a canonical `key=value` listing.
pub fn config_hash(pairs: &[(&str, String)]) -> String {
    let canonical: String = pairs
        .iter()
        .map(|(k, v)| format!("{k}={v}\n"))
        .collect();
    format!("{:08x}", fnv1a64(canonical.as_bytes()) as u32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn parses_key_value_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "# comment\nseeds = 1,2,3\nn1 = 400\nrank=8\nnoise_fraction = 0.5").unwrap();
        let cfg = ConfigFile::load(&path).unwrap();
        assert_eq!(cfg.get("seeds"), Some("1,2,3"));
        assert_eq!(cfg.parse::<usize>("n1").unwrap(), Some(400));
        assert_eq!(cfg.parse::<usize>("rank").unwrap(), Some(8));
        // underscores normalize to the flag spelling
        assert_eq!(cfg.get("noise-fraction"), Some("0.5"));
        assert_eq!(cfg.parse::<usize>("absent").unwrap(), None);
    }

    #[test]
    fn hash_is_stable() {
        let pairs = [("a", "1".to_string()), ("b", "two".to_string())];
        assert_eq!(config_hash(&pairs), config_hash(&pairs));
        let other = [("a", "2".to_string()), ("b", "two".to_string())];
        assert_ne!(config_hash(&pairs), config_hash(&other));
    }
}
