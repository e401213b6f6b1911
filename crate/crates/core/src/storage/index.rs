//! Dense, non-clustered indexes.
//!
//! An index is a flat file of leaf entries `(key..., rid.page, rid.slot)`
//! stored with the ordinary page layout and sorted on every column, i.e.
//! by key and then by Rid. There is one entry per base tuple. The base
//! heap file is only read while building.

use std::path::Path;

use crate::buffer::BufferPool;
use crate::error::{Error, Result};
use crate::sort::{external_sort, SortKey};
use crate::storage::heap::{HeapFile, HeapScan, Rid};
use crate::storage::schema::{Attribute, DataType, Schema, Tuple, Value};
use crate::stream::TupleStream;

pub const RID_PAGE: &str = "rid.page";
pub const RID_SLOT: &str = "rid.slot";

#[derive(Debug, Clone)]
pub struct IndexFile {
    file: HeapFile,
    key_attrs: Vec<String>,
    key_schema: Schema,
}

/// Key positions in the base schema, key schema and leaf-entry schema.
fn layout(base: &Schema, key_attrs: &[String]) -> Result<(Vec<usize>, Schema, Schema)> {
    if key_attrs.is_empty() {
        return Err(Error::schema("an index needs at least one key attribute"));
    }
    let positions = base.resolve(key_attrs)?;
    let key_schema = base.select(&positions)?;
    let mut attrs = key_schema.attributes().to_vec();
    for name in [RID_PAGE, RID_SLOT] {
        attrs.push(Attribute {
            name: name.to_string(),
            ty: DataType::Int64,
        });
    }
    Ok((positions, key_schema, Schema::new(attrs)?))
}

/// Builds the dense index of `base` on `key_attrs` as a temporary file,
/// sorting the entries with at most `m` frames.
pub fn build_index(pool: &mut BufferPool, base: &HeapFile, key_attrs: &[String], m: usize) -> Result<IndexFile> {
    let (positions, key_schema, entry_schema) = layout(base.schema(), key_attrs)?;
    let unsorted = HeapFile::create_temp(pool, entry_schema.clone())?;
    let mut writer = unsorted.writer();
    let mut scan = base.scan();
    let filled = (|| -> Result<()> {
        while let Some((rid, tuple)) = scan.next_with_rid(pool)? {
            let mut values = tuple.project(&positions).0;
            values.push(Value::Int(rid.page_id as i64));
            values.push(Value::Int(rid.slot as i64));
            writer.push(pool, &Tuple(values))?;
        }
        Ok(())
    })();
    scan.close(pool)?;
    if let Err(e) = filled {
        writer.abandon(pool).delete(pool)?;
        return Err(e);
    }
    let unsorted = writer.finish(pool)?;
    let sorted = external_sort(pool, &unsorted, &SortKey::all(&entry_schema), m);
    unsorted.delete(pool)?;
    Ok(IndexFile {
        file: sorted?.file,
        key_attrs: key_attrs.to_vec(),
        key_schema,
    })
}

impl IndexFile {
    pub fn open(pool: &mut BufferPool, path: &Path, base: &Schema, key_attrs: &[String]) -> Result<Self> {
        let (_, key_schema, entry_schema) = layout(base, key_attrs)?;
        let file = HeapFile::open(pool, path, entry_schema, false)?;
        Ok(IndexFile {
            file,
            key_attrs: key_attrs.to_vec(),
            key_schema,
        })
    }

    pub fn key_attrs(&self) -> &[String] {
        &self.key_attrs
    }

    pub fn key_schema(&self) -> &Schema {
        &self.key_schema
    }

    /// The leaf-entry file.
    pub fn file(&self) -> &HeapFile {
        &self.file
    }

    pub fn leaf_page_count(&self, pool: &BufferPool) -> Result<u64> {
        self.file.page_count(pool)
    }

    pub fn leaf_scan(&self) -> IndexScan {
        IndexScan {
            scan: self.file.scan(),
            key_arity: self.key_schema.arity(),
            key_schema: self.key_schema.clone(),
        }
    }

    pub fn persist(&self, pool: &mut BufferPool, path: &Path) -> Result<()> {
        pool.persist(self.file.id(), path)
    }

    pub fn delete(self, pool: &mut BufferPool) -> Result<()> {
        self.file.delete(pool)
    }
}

/// Sequential pass over the leaf pages, in key order.
#[derive(Debug)]
pub struct IndexScan {
    scan: HeapScan,
    key_arity: usize,
    key_schema: Schema,
}

impl IndexScan {
    pub fn next_entry(&mut self, pool: &mut BufferPool) -> Result<Option<(Tuple, Rid)>> {
        let Some(mut entry) = self.scan.next_tuple(pool)? else {
            return Ok(None);
        };
        let slot = entry.0.pop();
        let page = entry.0.pop();
        match (page, slot) {
            (Some(Value::Int(page)), Some(Value::Int(slot)))
                if entry.arity() == self.key_arity && page >= 0 && slot >= 0 =>
            {
                Ok(Some((entry, Rid::new(page as u64, slot as u32))))
            }
            _ => Err(Error::storage("corrupt index leaf entry")),
        }
    }
}

/// Streams the keys alone.
impl TupleStream for IndexScan {
    fn schema(&self) -> &Schema {
        &self.key_schema
    }

    fn next_tuple(&mut self, pool: &mut BufferPool) -> Result<Option<Tuple>> {
        Ok(self.next_entry(pool)?.map(|(k, _)| k))
    }

    fn close(&mut self, pool: &mut BufferPool) -> Result<()> {
        self.scan.close(pool)
    }
}
