use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A categorical answer code as it appears in the survey file.
pub type Code = i32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureColumn {
    pub name: String,
    pub codes: Vec<Code>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetColumn {
    pub name: String,
    pub positive: Code,
    pub negative: Code,
}

/// Silo codes are the inclusive range `first..=last`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiloColumn {
    pub name: String,
    pub first: u32,
    pub last: u32,
}

impl SiloColumn {
    pub fn contains(&self, code: Code) -> bool {
        code >= 0 && (code as u32) >= self.first && (code as u32) <= self.last
    }

    pub fn count(&self) -> usize {
        (self.last - self.first + 1) as usize
    }
}

/// A re-coding of one feature column, encoded as an extra one-hot span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DerivedView {
    pub name: String,
    pub source: String,
    pub mapping: BTreeMap<Code, Code>,
}

impl DerivedView {
    /// Distinct derived codes in ascending order.
    pub fn codes(&self) -> Vec<Code> {
        let set: BTreeSet<Code> = self.mapping.values().copied().collect();
        set.into_iter().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurveySchema {
    pub feature_columns: Vec<FeatureColumn>,
    pub target_column: TargetColumn,
    #[serde(default)]
    pub excluded_codes: BTreeMap<String, Vec<Code>>,
    pub silo_column: SiloColumn,
    #[serde(default)]
    pub derived_views: Vec<DerivedView>,
}

impl SurveySchema {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let schema: SurveySchema = serde_json::from_str(&text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_columns.is_empty() {
            return Err(Error::Schema("no feature columns".into()));
        }
        let mut names = HashSet::new();
        for name in self.column_names() {
            if !names.insert(name) {
                return Err(Error::Schema(format!("duplicate column `{name}`")));
            }
        }
        for f in &self.feature_columns {
            if f.codes.is_empty() {
                return Err(Error::Schema(format!("column `{}` has no codes", f.name)));
            }
            let unique: HashSet<_> = f.codes.iter().collect();
            if unique.len() != f.codes.len() {
                return Err(Error::Schema(format!(
                    "column `{}` lists a code twice",
                    f.name
                )));
            }
        }
        if self.target_column.positive == self.target_column.negative {
            return Err(Error::Schema(
                "target positive and negative codes coincide".into(),
            ));
        }
        if self.silo_column.first > self.silo_column.last {
            return Err(Error::Schema("empty silo code range".into()));
        }
        for col in self.excluded_codes.keys() {
            if !names.contains(col.as_str()) {
                return Err(Error::Schema(format!(
                    "exclusion list names unknown column `{col}`"
                )));
            }
        }
        let mut view_names = HashSet::new();
        for view in &self.derived_views {
            if names.contains(view.name.as_str()) || !view_names.insert(view.name.as_str()) {
                return Err(Error::Schema(format!(
                    "derived view `{}` reuses an existing name",
                    view.name
                )));
            }
            let source = self.feature(&view.source).ok_or_else(|| {
                Error::Schema(format!(
                    "derived view `{}` has unknown source `{}`",
                    view.name, view.source
                ))
            })?;
            for code in &source.codes {
                if !view.mapping.contains_key(code) {
                    return Err(Error::Schema(format!(
                        "derived view `{}` does not map source code {code}",
                        view.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn feature(&self, name: &str) -> Option<&FeatureColumn> {
        self.feature_columns.iter().find(|f| f.name == name)
    }

    /// Raw table column order: features, then target, then silo.
    pub fn column_names(&self) -> Vec<&str> {
        self.feature_columns
            .iter()
            .map(|f| f.name.as_str())
            .chain([
                self.target_column.name.as_str(),
                self.silo_column.name.as_str(),
            ])
            .collect()
    }

    pub fn target_index(&self) -> usize {
        self.feature_columns.len()
    }

    pub fn silo_index(&self) -> usize {
        self.feature_columns.len() + 1
    }

    pub(crate) fn excluded_for(&self, column: &str) -> &[Code] {
        self.excluded_codes
            .get(column)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Whether `code` is a legal value for raw column `idx`.
    pub(crate) fn allows(&self, idx: usize, code: Code) -> bool {
        let n = self.feature_columns.len();
        if idx < n {
            self.feature_columns[idx].codes.contains(&code)
        } else if idx == n {
            code == self.target_column.positive || code == self.target_column.negative
        } else {
            self.silo_column.contains(code)
        }
    }
}
