// Copyright 2026 The dncbm Authors.
// SPDX-License-Identifier: Apache-2.0

//! Plain-text inputs: index lists, name lists and intervention specs.

use std::path::Path;

use serde::Deserialize;

use super::FormatError;
use crate::cbm::{InterventionMode, InterventionSpec};
use crate::error::{Error, Result};
use crate::naming::NamedConceptSpace;

/// One non-negative integer per line. Blank lines and lines starting with
/// `#` are skipped.
pub fn parse_index_list(text: &str) -> Result<Vec<usize>, FormatError> {
    text.lines()
        .enumerate()
        .map(|(i, line)| (i, line.trim()))
        .filter(|(_, line)| !line.is_empty() && !line.starts_with('#'))
        .map(|(i, line)| {
            line.parse::<usize>().map_err(|_| {
                FormatError::Malformed(format!("line {}: {line:?} is not an index", i + 1))
            })
        })
        .collect()
}

pub fn read_index_list(path: &Path) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_index_list(&text).map_err(|e| e.at(path))
}

/// Non-empty trimmed lines, in order.
pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

/// TOML intervention spec:
///
/// ```toml
/// mode = "keep-only"   # or "remove"
/// indices = [3, 17]
/// names = ["bird", "feather"]
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterventionFile {
    pub mode: String,
    #[serde(default)]
    pub indices: Vec<usize>,
    /// Every concept carrying one of these names is selected.
    #[serde(default)]
    pub names: Vec<String>,
}

pub fn parse_intervention(text: &str) -> Result<InterventionFile> {
    toml::from_str(text).map_err(|e| Error::Config(format!("intervention: {}", e.message())))
}

impl InterventionFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_intervention(&text)
    }

    /// Resolve names through `space` and merge them with the explicit
    /// indices, sorted and deduplicated.
    pub fn resolve(&self, space: Option<&NamedConceptSpace>) -> Result<InterventionSpec> {
        let mode = match self.mode.as_str() {
            "keep-only" => InterventionMode::KeepOnly,
            "remove" => InterventionMode::Remove,
            other => {
                return Err(Error::Config(format!(
                    "intervention mode must be \"keep-only\" or \"remove\", got {other:?}"
                )))
            }
        };
        let mut concepts = self.indices.clone();
        if !self.names.is_empty() {
            let space = space.ok_or_else(|| {
                Error::invalid("intervention lists concept names but no vocabulary was given")
            })?;
            for name in &self.names {
                let found = space.concepts_named(name);
                if found.is_empty() {
                    return Err(Error::invalid(format!("no concept is named {name:?}")));
                }
                concepts.extend(found);
            }
        }
        concepts.sort_unstable();
        concepts.dedup();
        Ok(InterventionSpec { mode, concepts })
    }
}
