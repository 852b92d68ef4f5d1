//! Run manifests: a `key=value` record of everything a CLI run depended on.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, Read};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub struct InputDigest {
    pub role: String,
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    pub seed: Option<u64>,
    /// Fully resolved configuration, defaults included.
    pub config: BTreeMap<String, String>,
    pub inputs: Vec<InputDigest>,
    pub outputs: BTreeMap<String, PathBuf>,
    pub wall_time_secs: f64,
    /// Arguments after the program name.
    pub argv: Vec<String>,
}

pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => out.push(other),
            None => out.push('\\'),
        }
    }
    out
}

impl RunManifest {
    pub fn new(subcommand: &str) -> Self {
        Self {
            subcommand: subcommand.to_owned(),
            version: VERSION.to_owned(),
            ..Self::default()
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.config.insert(key.to_owned(), value.to_string());
        self
    }

    /// Records `path` under `role` together with its content digest.
    pub fn add_input(&mut self, role: &str, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.inputs.push(InputDigest {
            role: role.to_owned(),
            path: path.to_owned(),
            sha256: sha256_file(path)?,
        });
        Ok(())
    }

    pub fn add_output(&mut self, role: &str, path: impl AsRef<Path>) {
        self.outputs.insert(role.to_owned(), path.as_ref().to_owned());
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: &str| writeln!(s, "{k}={}", escape(v)).unwrap();
        kv("subcommand", &self.subcommand);
        kv("version", &self.version);
        if let Some(seed) = self.seed {
            kv("seed", &seed.to_string());
        }
        for (k, v) in &self.config {
            kv(&format!("config.{k}"), v);
        }
        for inp in &self.inputs {
            kv(&format!("input.{}.path", inp.role), &inp.path.to_string_lossy());
            kv(&format!("input.{}.sha256", inp.role), &inp.sha256);
        }
        for (k, p) in &self.outputs {
            kv(&format!("output.{k}"), &p.to_string_lossy());
        }
        kv("wall_time_secs", &format!("{:.6}", self.wall_time_secs));
        for (i, a) in self.argv.iter().enumerate() {
            kv(&format!("argv.{i}"), a);
        }
        s
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut m = Self::default();
        let mut paths: BTreeMap<String, PathBuf> = BTreeMap::new();
        let mut digests: BTreeMap<String, String> = BTreeMap::new();
        let mut argv: BTreeMap<usize, String> = BTreeMap::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, raw)) = line.split_once('=') else {
                return Err(Error::parse(path, no + 1, "expected `key=value`"));
            };
            let value = unescape(raw);
            let bad = |msg: String| Error::parse(path, no + 1, msg);
            match key {
                "subcommand" => m.subcommand = value,
                "version" => m.version = value,
                "seed" => m.seed = Some(value.parse().map_err(|e| bad(format!("bad seed: {e}")))?),
                "wall_time_secs" => {
                    m.wall_time_secs = value.parse().map_err(|e| bad(format!("bad wall time: {e}")))?
                }
                _ => {
                    if let Some(k) = key.strip_prefix("config.") {
                        m.config.insert(k.to_owned(), value);
                    } else if let Some(k) = key.strip_prefix("output.") {
                        m.outputs.insert(k.to_owned(), value.into());
                    } else if let Some(i) = key.strip_prefix("argv.") {
                        let i = i.parse().map_err(|e| bad(format!("bad argv index: {e}")))?;
                        argv.insert(i, value);
                    } else if let Some(role) = key.strip_prefix("input.").and_then(|r| r.strip_suffix(".path")) {
                        paths.insert(role.to_owned(), value.into());
                    } else if let Some(role) = key.strip_prefix("input.").and_then(|r| r.strip_suffix(".sha256")) {
                        digests.insert(role.to_owned(), value);
                    } else {
                        return Err(bad(format!("unknown key `{key}`")));
                    }
                }
            }
        }
        if m.subcommand.is_empty() {
            return Err(Error::parse(path, 0, "missing `subcommand`"));
        }
        for (role, p) in paths {
            let sha256 = digests
                .remove(&role)
                .ok_or_else(|| Error::parse(path, 0, format!("input `{role}` has no digest")))?;
            m.inputs.push(InputDigest { role, path: p, sha256 });
        }
        if argv.keys().copied().ne(0..argv.len()) {
            return Err(Error::parse(path, 0, "argv indices are not contiguous"));
        }
        m.argv = argv.into_values().collect();
        Ok(m)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Inputs whose current content no longer matches the recorded digest.
    pub fn changed_inputs(&self) -> Result<Vec<&InputDigest>> {
        let mut changed = Vec::new();
        for inp in &self.inputs {
            match sha256_file(&inp.path) {
                Ok(d) if d == inp.sha256 => {}
                Ok(_) => changed.push(inp),
                Err(Error::Io { source, .. }) if source.kind() == io::ErrorKind::NotFound => changed.push(inp),
                Err(e) => return Err(e),
            }
        }
        Ok(changed)
    }
}

/// Default manifest location next to a primary output file.
pub fn manifest_path_for(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest");
    output.with_file_name(name)
}
