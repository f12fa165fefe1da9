//! Flat `key=value` report files.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tuning::ControllerGains;

/// Ordered `key=value` pairs; blank lines and `#` comments are ignored on read.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValueReport {
    pub entries: Vec<(String, String)>,
}

impl KeyValueReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        self.entries.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push_real<T: Real>(&mut self, key: &str, value: T) -> &mut Self {
        self.push(key, format!("{:.*e}", T::round_trip_digits() - 1, value))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config {
                path: origin.into(),
                line: i + 1,
                reason: "expected key=value".into(),
            })?;
            entries.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(Self { entries })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, &path.display().to_string())
    }

    pub fn as_map(&self) -> BTreeMap<&str, &str> {
        self.entries
            .iter()
            .map(|(k, v)| (k.as_str(), v.as_str()))
            .collect()
    }

    fn real<T: Real>(&self, key: &str) -> Result<T> {
        let v = self.get(key).ok_or_else(|| Error::Config {
            path: String::new(),
            line: 0,
            reason: format!("missing key {key}"),
        })?;
        v.parse().map_err(|_| Error::Config {
            path: String::new(),
            line: 0,
            reason: format!("{key}: cannot parse {v:?}"),
        })
    }

    pub fn push_gains<T: Real>(&mut self, g: &ControllerGains<T>) -> &mut Self {
        self.push_real("kp", g.kp).push_real("ki", g.ki);
        if let Some(kaw) = g.kaw {
            self.push_real("kaw", kaw);
        }
        self.push("n_aw", g.n_aw)
            .push_real("t_samp", g.t_samp)
            .push_real("sat_lo", g.sat_lo)
            .push_real("sat_hi", g.sat_hi)
    }

    pub fn gains<T: Real>(&self) -> Result<ControllerGains<T>> {
        let kaw = match self.get("kaw") {
            Some(_) => Some(self.real("kaw")?),
            None => None,
        };
        let n_aw = match self.get("n_aw") {
            Some(v) => v.parse().map_err(|_| Error::Config {
                path: String::new(),
                line: 0,
                reason: format!("n_aw: cannot parse {v:?}"),
            })?,
            None => 1,
        };
        let g = ControllerGains {
            kp: self.real("kp")?,
            ki: self.real("ki")?,
            kaw,
            n_aw,
            t_samp: self.real("t_samp")?,
            sat_lo: self
                .get("sat_lo")
                .map_or(Ok(T::lit(0.1)), |_| self.real("sat_lo"))?,
            sat_hi: self
                .get("sat_hi")
                .map_or(Ok(T::lit(0.9)), |_| self.real("sat_hi"))?,
        };
        g.validate()?;
        Ok(g)
    }
}
