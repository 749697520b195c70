//! Language code to linguistic family mapping.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::io::DumpError;

/// Fifteen XNLI languages and their families.
const XNLI15: [(&str, &str); 15] = [
    ("en", "Germanic"),
    ("de", "Germanic"),
    ("hi", "Hindustani"),
    ("ur", "Hindustani"),
    ("ar", "Arabic"),
    ("es", "Romance"),
    ("fr", "Romance"),
    ("ru", "Slavic"),
    ("bg", "Slavic"),
    ("sw", "Niger-Congo"),
    ("th", "Tai"),
    ("vi", "Vietic"),
    ("zh", "Chinese"),
    ("el", "Hellenic"),
    ("tr", "Turkic"),
];

/// JSON object `{ "<code>": "<family>", ... }`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FamilyMap {
    entries: BTreeMap<String, String>,
}

impl FamilyMap {
    pub fn xnli15() -> Self {
        XNLI15
            .iter()
            .map(|(c, f)| (c.to_string(), f.to_string()))
            .collect()
    }

    pub fn family(&self, code: &str) -> Option<&str> {
        self.entries.get(code).map(String::as_str)
    }

    pub fn insert(&mut self, code: impl Into<String>, family: impl Into<String>) {
        self.entries.insert(code.into(), family.into());
    }

    pub fn remove(&mut self, code: &str) -> Option<String> {
        self.entries.remove(code)
    }

    /// Codes from `codes` with no entry, in input order.
    pub fn missing<'a>(&self, codes: impl IntoIterator<Item = &'a str>) -> Vec<String> {
        codes
            .into_iter()
            .filter(|c| !self.entries.contains_key(*c))
            .map(String::from)
            .collect()
    }

    pub fn load(path: &Path) -> Result<Self, DumpError> {
        let text = std::fs::read(path).map_err(|source| {
            if source.kind() == std::io::ErrorKind::NotFound {
                DumpError::NotFound(path.to_path_buf())
            } else {
                DumpError::Io {
                    path: path.to_path_buf(),
                    source,
                }
            }
        })?;
        serde_json::from_slice(&text).map_err(|source| DumpError::ManifestParse {
            path: path.to_path_buf(),
            source,
        })
    }
}

impl FromIterator<(String, String)> for FamilyMap {
    fn from_iter<I: IntoIterator<Item = (String, String)>>(iter: I) -> Self {
        Self {
            entries: iter.into_iter().collect(),
        }
    }
}
