//! Manifest files: one `key = value` pair per line, `kind` first.
//!
//! ```text
//! kind = melodies
//! count = 2000
//! source = procedural
//! seed = 7
//! ```
//!
//! Values run to the end of the line and are written verbatim; keys never
//! contain `=`. Readers ignore blank lines and lines starting with `#`.

use std::fmt::Display;
use std::path::Path;

use synesthete_core::Error;

use crate::CliError;

pub const DATASET_MANIFEST: &str = "manifest.txt";

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(kind: &str) -> Self {
        let mut m = Self::default();
        m.set("kind", kind);
        m
    }

    pub fn set(&mut self, key: &str, value: impl Display) -> &mut Self {
        let value = value.to_string().replace('\n', " ");
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut m = Self::default();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Data(format!("manifest line `{line}` lacks `=`")))?;
            m.set(k.trim(), v.trim());
        }
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.render()).map_err(|e| CliError::Core(Error::io(path, e)))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Core(Error::io(path, e)))?;
        Self::parse(&text)
    }
}
