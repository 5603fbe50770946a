//! Flat parameter map: config file entries overlaid by explicit flags.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::UsageError;

#[derive(Debug, Clone, Default)]
pub struct Params {
    map: BTreeMap<String, String>,
}

impl Params {
    /// Parse `key = value` lines; `#` starts a comment.
    pub fn from_config_file(path: &Path) -> Result<Self, UsageError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        let mut map = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| UsageError(format!("{}:{}: expected key = value", path.display(), n + 1)))?;
            map.insert(normalize(k), v.trim().to_string());
        }
        Ok(Self { map })
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.map.insert(normalize(key), value.to_string());
    }

    pub fn set_opt<T: Display>(&mut self, key: &str, value: &Option<T>) {
        if let Some(v) = value {
            self.set(key, v);
        }
    }

    pub fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T, UsageError>
    where
        T::Err: Display,
    {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e| UsageError(format!("bad value for {key}: {v:?} ({e})"))),
        }
    }

    pub fn get_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, UsageError>
    where
        T::Err: Display,
    {
        self.map
            .get(key)
            .map(|v| v.parse().map_err(|e| UsageError(format!("bad value for {key}: {v:?} ({e})"))))
            .transpose()
    }

    pub fn get_str(&self, key: &str, default: &str) -> String {
        self.map.get(key).cloned().unwrap_or_else(|| default.to_string())
    }

    /// `Nr,Nphi`.
    pub fn get_grid(&self, key: &str, default: (usize, usize)) -> Result<(usize, usize), UsageError> {
        let Some(v) = self.map.get(key) else { return Ok(default) };
        parse_pair(v).ok_or_else(|| UsageError(format!("bad grid {v:?}, expected Nr,Nphi")))
    }

    pub fn as_map(&self) -> &BTreeMap<String, String> {
        &self.map
    }
}

fn normalize(key: &str) -> String {
    key.trim().trim_start_matches("--").replace('_', "-")
}

pub fn parse_pair(s: &str) -> Option<(usize, usize)> {
    let (a, b) = s.split_once(',')?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

/// Grid spec `name=start:stop:count`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub name: String,
    pub values: Vec<f64>,
}

impl FromStr for GridSpec {
    type Err = UsageError;

    fn from_str(s: &str) -> Result<Self, UsageError> {
        let bad = || UsageError(format!("bad grid spec {s:?}, expected name=start:stop:count"));
        let (name, range) = s.split_once('=').ok_or_else(bad)?;
        let parts: Vec<&str> = range.split(':').collect();
        let [a, b, n] = parts[..] else { return Err(bad()) };
        let (a, b): (f64, f64) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
        let n: usize = n.parse().map_err(|_| bad())?;
        if name.trim().is_empty() || !a.is_finite() || !b.is_finite() {
            return Err(bad());
        }
        let values = match n {
            0 => vec![],
            1 => vec![a],
            _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
        };
        Ok(Self { name: normalize(name), values })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spec() {
        let g: GridSpec = "c=0:2:41".parse().unwrap();
        assert_eq!(g.name, "c");
        assert_eq!(g.values.len(), 41);
        assert_eq!(g.values[20], 1.0);
        assert_eq!(g.values[40], 2.0);
        assert!("c=0:1:0".parse::<GridSpec>().unwrap().values.is_empty());
        assert!("c=0:1".parse::<GridSpec>().is_err());
        assert!("0:1:3".parse::<GridSpec>().is_err());
    }

    #[test]
    fn config_then_flags() {
        let dir = std::env::temp_dir().join(format!("conelab-params-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.conf");
        std::fs::write(&path, "# comment\nc = 0.5\ngrid = 32,16\n").unwrap();
        let mut p = Params::from_config_file(&path).unwrap();
        assert_eq!(p.get("c", 0.0).unwrap(), 0.5);
        p.set("c", 0.25);
        assert_eq!(p.get("c", 0.0).unwrap(), 0.25);
        assert_eq!(p.get_grid("grid", (1, 1)).unwrap(), (32, 16));
        assert!(p.get::<f64>("grid", 0.0).is_err());
        std::fs::remove_dir_all(dir).ok();
    }
}
