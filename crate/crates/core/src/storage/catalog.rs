//! Database metadata, kept as pretty-printed JSON in `<db>/catalog.meta`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::storage::schema::Schema;

pub const CATALOG_FILE: &str = "catalog.meta";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexDescriptor {
    pub key_attrs: Vec<String>,
    /// File name relative to the database directory.
    pub file: String,
    pub entry_count: u64,
    pub page_count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub name: String,
    pub file: String,
    pub schema: Schema,
    /// B
    pub page_count: u64,
    pub tuple_count: u64,
    #[serde(default)]
    pub indexes: Vec<IndexDescriptor>,
}

impl CatalogEntry {
    pub fn index(&self, key_attrs: &[String]) -> Option<&IndexDescriptor> {
        self.indexes.iter().find(|ix| ix.key_attrs == key_attrs)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Catalog {
    pub page_size: usize,
    pub extent_length: u64,
    #[serde(default)]
    pub relations: BTreeMap<String, CatalogEntry>,
}

impl Catalog {
    pub fn new(page_size: usize, extent_length: u64) -> Self {
        Catalog {
            page_size,
            extent_length,
            relations: BTreeMap::new(),
        }
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let text = fs::read_to_string(dir.join(CATALOG_FILE))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let tmp = dir.join(format!("{CATALOG_FILE}.new"));
        fs::write(&tmp, serde_json::to_string_pretty(self)? + "\n")?;
        fs::rename(tmp, dir.join(CATALOG_FILE))?;
        Ok(())
    }

    pub fn relation(&self, name: &str) -> Result<&CatalogEntry> {
        self.relations
            .get(name)
            .ok_or_else(|| Error::schema(format!("no relation `{name}` in the catalog")))
    }

    pub fn relation_mut(&mut self, name: &str) -> Result<&mut CatalogEntry> {
        self.relations
            .get_mut(name)
            .ok_or_else(|| Error::schema(format!("no relation `{name}` in the catalog")))
    }
}

/// Relation names become file names.
pub fn check_relation_name(name: &str) -> Result<()> {
    let ok = !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
    if ok {
        Ok(())
    } else {
        Err(Error::usage(format!(
            "relation name `{name}` must be non-empty ASCII letters, digits, `_` or `-`"
        )))
    }
}

pub fn heap_file_name(relation: &str) -> String {
    format!("{relation}.heap")
}

pub fn index_file_name(relation: &str, key_attrs: &[String]) -> String {
    format!("{relation}.{}.idx", key_attrs.join("+"))
}
