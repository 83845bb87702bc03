//! Value resolution (flag, then `--config` file, then built-in default) and
//! the run manifest.
//!
//! Config files are flat `key = value` lines; `#` starts a comment. Keys use
//! the long flag names with `-` or `_`. Repeatable flags take repeated keys.
//! A manifest written by a previous run is itself a valid config file.

use std::collections::HashMap;
use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use motion_misc::fmt::sig9;
use motion_misc::SvcParams;

use crate::CliError;

/// Keys that manifests carry but that never configure a run.
const INFORMATIONAL: [&str; 2] = ["subcommand", "version"];

fn normalize(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

pub struct Settings {
    file: HashMap<String, Vec<String>>,
    resolved: Vec<(String, String)>,
}

impl Settings {
    /// Loads the optional config file and rejects keys outside `allowed`
    /// (plus `svc.*` gains and the informational manifest keys).
    pub fn load(path: Option<&Path>, allowed: &[&str]) -> Result<Self, CliError> {
        let mut file: HashMap<String, Vec<String>> = HashMap::new();
        if let Some(path) = path {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::io(format!("cannot read config {}: {e}", path.display())))?;
            for (n, line) in text.lines().enumerate() {
                let line = line.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| CliError::usage(format!("{}:{}: expected key=value", path.display(), n + 1)))?;
                let key = normalize(k);
                if INFORMATIONAL.contains(&key.as_str()) {
                    continue;
                }
                let known =
                    allowed.contains(&key.as_str()) || key.strip_prefix("svc.").is_some_and(|g| svc_index(g).is_some());
                if !known {
                    return Err(CliError::usage(format!(
                        "{}:{}: unknown key `{}`",
                        path.display(),
                        n + 1,
                        k.trim()
                    )));
                }
                file.entry(key).or_default().push(v.trim().to_string());
            }
        }
        Ok(Settings {
            file,
            resolved: Vec::new(),
        })
    }

    fn file_value<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.file.get(key).and_then(|v| v.last()) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| CliError::usage(format!("config key `{key}`: cannot parse `{raw}`"))),
        }
    }

    pub fn value<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError> {
        let v = match flag {
            Some(v) => v,
            None => self.file_value(key)?.unwrap_or(default),
        };
        self.record(key, &v);
        Ok(v)
    }

    pub fn optional<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError> {
        let v = match flag {
            Some(v) => Some(v),
            None => self.file_value(key)?,
        };
        if let Some(v) = &v {
            self.record(key, v);
        }
        Ok(v)
    }

    /// Switch set by the flag or by a true config value.
    pub fn switch(&mut self, key: &str, flag: bool) -> Result<bool, CliError> {
        let v = flag || self.file_value::<bool>(key)?.unwrap_or(false);
        self.record(key, v);
        Ok(v)
    }

    /// Repeatable values; any occurrence on the command line replaces the
    /// config file's list.
    pub fn list(&mut self, key: &str, flags: Vec<String>) -> Vec<String> {
        let v = if flags.is_empty() {
            self.file.get(key).cloned().unwrap_or_default()
        } else {
            flags
        };
        for item in &v {
            self.record(key, item);
        }
        v
    }

    /// SVC gains: defaults overridden by `svc.<name>` config keys.
    pub fn svc(&mut self) -> Result<SvcParams, CliError> {
        let mut values: Vec<f64> = SvcParams::default().named_values().iter().map(|(_, v)| *v).collect();
        for (i, (name, _)) in SvcParams::default().named_values().iter().enumerate() {
            let key = format!("svc.{}", name.to_ascii_lowercase());
            if let Some(v) = self.file_value::<f64>(&key)? {
                values[i] = v;
            }
            let shown = sig9(values[i]);
            self.record(&key, shown);
        }
        let p = SvcParams {
            k_a: values[0],
            k_w: values[1],
            k_ac: values[2],
            k_wc: values[3],
            k_vc: values[4],
            tau: values[5],
            tau_d: values[6],
            g0: values[7],
        };
        p.validate()?;
        Ok(p)
    }

    pub fn record(&mut self, key: &str, value: impl Display) {
        self.resolved.push((key.to_string(), value.to_string()));
    }

    /// Writes `manifest.txt` into `dir`.
    pub fn write_manifest(&self, dir: &Path, subcommand: &str) -> Result<(), CliError> {
        let mut text = String::new();
        text.push_str("# run manifest; usable as --config to repeat the run\n");
        text.push_str(&format!("subcommand = {subcommand}\n"));
        text.push_str(&format!("version = {}\n", env!("CARGO_PKG_VERSION")));
        for (k, v) in &self.resolved {
            text.push_str(&format!("{k} = {v}\n"));
        }
        let path = dir.join("manifest.txt");
        fs::write(&path, text).map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
    }
}

fn svc_index(name: &str) -> Option<usize> {
    SvcParams::default()
        .named_values()
        .iter()
        .position(|(n, _)| n.eq_ignore_ascii_case(name))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn config(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn flag_beats_file_beats_default() {
        let f = config("seed = 7\n# comment\ndt=0.02\nsvc.K_a = 0.2\n");
        let mut s = Settings::load(Some(f.path()), &["seed", "dt", "starts"]).unwrap();
        assert_eq!(s.value("seed", Some(3u64), 0).unwrap(), 3);
        assert_eq!(s.value("dt", None, 0.01).unwrap(), 0.02);
        assert_eq!(s.value("starts", None, 32usize).unwrap(), 32);
        assert_eq!(s.svc().unwrap().k_a, 0.2);
    }

    #[test]
    fn unknown_keys_are_usage_errors() {
        let f = config("sede = 7\n");
        let err = Settings::load(Some(f.path()), &["seed"]).err().unwrap();
        assert_eq!(err.code, crate::EXIT_USAGE);
        let f = config("svc.k_q = 1\n");
        assert!(Settings::load(Some(f.path()), &["seed"]).is_err());
    }

    #[test]
    fn lists_and_manifest_round_trip() {
        let f = config("motion = a.csv\nmotion = b.csv\n");
        let mut s = Settings::load(Some(f.path()), &["motion"]).unwrap();
        assert_eq!(s.list("motion", vec![]), vec!["a.csv", "b.csv"]);
        assert_eq!(s.list("motion", vec!["c.csv".into()]), vec!["c.csv"]);
        let dir = tempfile::tempdir().unwrap();
        s.write_manifest(dir.path(), "fit").unwrap();
        let again = Settings::load(Some(&dir.path().join("manifest.txt")), &["motion"]).unwrap();
        assert_eq!(again.file["motion"], vec!["a.csv", "b.csv", "c.csv"]);
    }
}
