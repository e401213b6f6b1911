//! A database directory:
//!
//! ```text
//! <db>/catalog.meta            relation metadata (JSON)
//! <db>/<relation>.heap         heap file
//! <db>/<relation>.<a>+<b>.idx  dense index on (a, b)
//! <db>/tmp/                    temporaries, empty between executions
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::buffer::BufferPool;
use crate::error::{Error, Result};
use crate::storage::catalog::{check_relation_name, heap_file_name, index_file_name, CATALOG_FILE};
use crate::storage::page::{DEFAULT_PAGE_SIZE, MIN_PAGE_SIZE};
use crate::storage::{
    build_index, Catalog, CatalogEntry, DataType, DiskManager, HeapFile, IndexDescriptor, IndexFile,
    Schema, Tuple, Value,
};
use crate::storage::disk::DEFAULT_EXTENT_LENGTH;

pub const DEFAULT_BUFFERS: usize = 16;
pub const TMP_DIR: &str = "tmp";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DbOptions {
    pub page_size: usize,
    pub extent_length: u64,
    /// M
    pub buffers: usize,
    /// `None` reads the rest of the extent: `extent_length - 1`.
    pub readahead: Option<u64>,
}

impl Default for DbOptions {
    fn default() -> Self {
        DbOptions {
            page_size: DEFAULT_PAGE_SIZE,
            extent_length: DEFAULT_EXTENT_LENGTH,
            buffers: DEFAULT_BUFFERS,
            readahead: None,
        }
    }
}

impl DbOptions {
    pub fn validate(&self) -> Result<()> {
        if self.page_size < MIN_PAGE_SIZE || !self.page_size.is_power_of_two() {
            return Err(Error::usage(format!(
                "page size must be a power of two of at least {MIN_PAGE_SIZE}, got {}",
                self.page_size
            )));
        }
        if self.extent_length == 0 {
            return Err(Error::usage("extent length must be at least 1"));
        }
        if self.buffers < crate::buffer::MIN_FRAMES {
            return Err(Error::usage(format!(
                "at least {} buffers are needed, got {}",
                crate::buffer::MIN_FRAMES,
                self.buffers
            )));
        }
        Ok(())
    }

    pub fn readahead_window(&self) -> u64 {
        self.readahead.unwrap_or(self.extent_length - 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub relation: String,
    pub page_count: u64,
    pub tuple_count: u64,
    pub tuples_per_page: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IndexReport {
    pub relation: String,
    pub key_attrs: Vec<String>,
    pub entry_count: u64,
    pub page_count: u64,
}

#[derive(Debug)]
pub struct Database {
    dir: PathBuf,
    catalog: Catalog,
    pool: BufferPool,
    options: DbOptions,
}

impl Database {
    /// Creates an empty database in `dir` (created if missing).
    pub fn create(dir: impl AsRef<Path>, options: DbOptions) -> Result<Self> {
        options.validate()?;
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        if dir.join(CATALOG_FILE).exists() {
            return Err(Error::usage(format!("{} already holds a database", dir.display())));
        }
        let catalog = Catalog::new(options.page_size, options.extent_length);
        catalog.save(&dir)?;
        Self::assemble(dir, catalog, options)
    }

    /// Opens an existing database. Page size and extent length come from
    /// the catalog; `options` supplies the buffer settings.
    pub fn open(dir: impl AsRef<Path>, options: DbOptions) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        let catalog = Catalog::load(&dir)?;
        let options = DbOptions {
            page_size: catalog.page_size,
            extent_length: catalog.extent_length,
            ..options
        };
        options.validate()?;
        Self::assemble(dir, catalog, options)
    }

    pub fn open_or_create(dir: impl AsRef<Path>, options: DbOptions) -> Result<Self> {
        if dir.as_ref().join(CATALOG_FILE).exists() {
            Self::open(dir, options)
        } else {
            Self::create(dir, options)
        }
    }

    fn assemble(dir: PathBuf, catalog: Catalog, options: DbOptions) -> Result<Self> {
        let tmp = dir.join(TMP_DIR);
        // leftovers of an interrupted process
        if tmp.exists() {
            for entry in fs::read_dir(&tmp)? {
                fs::remove_file(entry?.path())?;
            }
        }
        let disk = DiskManager::new(tmp, options.page_size, options.extent_length);
        let pool = BufferPool::new(disk, options.buffers, options.readahead_window())?;
        Ok(Database {
            dir,
            catalog,
            pool,
            options,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn tmp_dir(&self) -> PathBuf {
        self.dir.join(TMP_DIR)
    }

    pub fn options(&self) -> &DbOptions {
        &self.options
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn pool(&self) -> &BufferPool {
        &self.pool
    }

    pub fn pool_mut(&mut self) -> &mut BufferPool {
        &mut self.pool
    }

    pub fn relation(&mut self, name: &str) -> Result<HeapFile> {
        let entry = self.catalog.relation(name)?.clone();
        let file = HeapFile::open(&mut self.pool, &self.dir.join(&entry.file), entry.schema, false)?;
        let pages = file.page_count(&self.pool)?;
        if pages != entry.page_count {
            return Err(Error::storage(format!(
                "`{name}` has {pages} pages, the catalog records {}",
                entry.page_count
            )));
        }
        Ok(file)
    }

    pub fn index(&mut self, relation: &str, key_attrs: &[String]) -> Result<IndexFile> {
        let entry = self.catalog.relation(relation)?;
        let descriptor = entry.index(key_attrs).ok_or_else(|| {
            Error::schema(format!(
                "no index on `{relation}`({})",
                key_attrs.join(", ")
            ))
        })?;
        let path = self.dir.join(&descriptor.file);
        let schema = entry.schema.clone();
        IndexFile::open(&mut self.pool, &path, &schema, key_attrs)
    }

    /// Loads rows into a new relation.
    pub fn ingest_rows<I>(&mut self, name: &str, schema: Schema, rows: I) -> Result<IngestReport>
    where
        I: IntoIterator<Item = Result<Tuple>>,
    {
        check_relation_name(name)?;
        if self.catalog.relations.contains_key(name) {
            return Err(Error::usage(format!("relation `{name}` already exists")));
        }
        let file_name = heap_file_name(name);
        let path = self.dir.join(&file_name);
        if path.exists() {
            fs::remove_file(&path)?;
        }
        let file = HeapFile::open(&mut self.pool, &path, schema.clone(), true)?;
        let mut writer = file.writer();
        let loaded = (|| -> Result<()> {
            for row in rows {
                writer.push(&mut self.pool, &row?)?;
            }
            Ok(())
        })();
        let tuple_count = writer.tuples_written();
        let finished = match loaded {
            Ok(()) => writer.finish(&mut self.pool),
            Err(e) => {
                writer.abandon(&mut self.pool);
                Err(e)
            }
        };
        let file = match finished {
            Ok(f) => f,
            Err(e) => {
                self.pool.delete_file(file.id())?;
                return Err(e);
            }
        };
        self.pool.disk_mut().sync(file.id())?;
        let page_count = file.page_count(&self.pool)?;
        self.catalog.relations.insert(
            name.to_string(),
            CatalogEntry {
                name: name.to_string(),
                file: file_name,
                schema,
                page_count,
                tuple_count,
                indexes: Vec::new(),
            },
        );
        self.catalog.save(&self.dir)?;
        Ok(IngestReport {
            relation: name.to_string(),
            page_count,
            tuple_count,
            tuples_per_page: file.tuples_per_page(),
        })
    }

    /// Loads a CSV file whose header names the schema's attributes in
    /// order. Empty fields are rejected: there are no NULLs.
    pub fn ingest_csv(&mut self, name: &str, csv_path: &Path, schema: Schema) -> Result<IngestReport> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(csv_path)
            .map_err(|e| match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::Io(io),
                other => Error::Csv {
                    line: 0,
                    message: format!("{other:?}"),
                },
            })?;
        let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let expected: Vec<&str> = schema.attributes().iter().map(|a| a.name.as_str()).collect();
        if header != expected {
            return Err(Error::Csv {
                line: 1,
                message: format!(
                    "header ({}) does not match schema ({})",
                    header.join(","),
                    expected.join(",")
                ),
            });
        }
        let types: Vec<DataType> = schema.attributes().iter().map(|a| a.ty).collect();
        let names: Vec<String> = expected.iter().map(|s| s.to_string()).collect();
        let rows = reader.into_records().map(move |record| {
            let record = record?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            parse_record(&record, &types, &names, line)
        });
        self.ingest_rows(name, schema, rows)
    }

    /// Builds and registers the dense index of `relation` on `key_attrs`.
    pub fn build_index(&mut self, relation: &str, key_attrs: &[String]) -> Result<IndexReport> {
        let base = self.relation(relation)?;
        let entry = self.catalog.relation(relation)?;
        if entry.index(key_attrs).is_some() {
            return Err(Error::usage(format!(
                "`{relation}` already has an index on ({})",
                key_attrs.join(", ")
            )));
        }
        let tuple_count = entry.tuple_count;
        let m = self.pool.capacity();
        let index = build_index(&mut self.pool, &base, key_attrs, m)?;
        let file_name = index_file_name(relation, key_attrs);
        index.persist(&mut self.pool, &self.dir.join(&file_name))?;
        let page_count = index.leaf_page_count(&self.pool)?;
        self.pool.close_file(index.file().id())?;
        let descriptor = IndexDescriptor {
            key_attrs: key_attrs.to_vec(),
            file: file_name,
            entry_count: tuple_count,
            page_count,
        };
        self.catalog
            .relation_mut(relation)?
            .indexes
            .push(descriptor.clone());
        self.catalog.save(&self.dir)?;
        Ok(IndexReport {
            relation: relation.to_string(),
            key_attrs: descriptor.key_attrs,
            entry_count: descriptor.entry_count,
            page_count,
        })
    }

    /// Pages currently held by files in the temp area.
    pub fn temp_pages_on_disk(&self) -> Result<u64> {
        let tmp = self.tmp_dir();
        if !tmp.exists() {
            return Ok(0);
        }
        let mut bytes = 0;
        for entry in fs::read_dir(tmp)? {
            bytes += entry?.metadata()?.len();
        }
        Ok(bytes / self.options.page_size as u64)
    }

    pub fn temp_files_on_disk(&self) -> Result<usize> {
        let tmp = self.tmp_dir();
        if !tmp.exists() {
            return Ok(0);
        }
        Ok(fs::read_dir(tmp)?.count())
    }
}

fn parse_record(record: &csv::StringRecord, types: &[DataType], names: &[String], line: u64) -> Result<Tuple> {
    if record.len() != types.len() {
        return Err(Error::Csv {
            line,
            message: format!("{} fields, expected {}", record.len(), types.len()),
        });
    }
    let mut values = Vec::with_capacity(types.len());
    for ((field, ty), name) in record.iter().zip(types).zip(names) {
        if field.is_empty() {
            return Err(Error::Csv {
                line,
                message: format!("`{name}` is empty; NULL values are not supported"),
            });
        }
        let value = match ty {
            DataType::Int64 => Value::Int(field.trim().parse().map_err(|_| Error::Csv {
                line,
                message: format!("`{name}`: `{field}` is not an integer"),
            })?),
            DataType::Utf8(max) => {
                if field.len() > *max as usize {
                    return Err(Error::Csv {
                        line,
                        message: format!("`{name}`: {} bytes exceed str{max}", field.len()),
                    });
                }
                Value::Str(field.to_string())
            }
        };
        values.push(value);
    }
    Ok(Tuple(values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tuple;

    fn options() -> DbOptions {
        DbOptions {
            page_size: 512,
            extent_length: 8,
            buffers: 4,
            readahead: None,
        }
    }

    fn write_csv(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn header_only_csv_gives_empty_relation() {
        let dir = tempfile::tempdir().unwrap();
        let csv = write_csv(dir.path(), "r.csv", "id,name\n");
        let mut db = Database::create(dir.path().join("db"), options()).unwrap();
        let r = db.ingest_csv("R", &csv, Schema::parse("id:int,name:str8").unwrap()).unwrap();
        assert_eq!((r.page_count, r.tuple_count), (0, 0));
    }

    #[test]
    fn page_count_follows_the_encoding() {
        let dir = tempfile::tempdir().unwrap();
        let mut text = String::from("id,name\n");
        for i in 0..1000 {
            text.push_str(&format!("{i},n{}\n", i % 13));
        }
        let csv = write_csv(dir.path(), "r.csv", &text);
        let mut db = Database::create(dir.path().join("db"), options()).unwrap();
        let r = db.ingest_csv("R", &csv, Schema::parse("id:int,name:str8").unwrap()).unwrap();
        let per_page = (512 - 8) / (8 + 2 + 8);
        assert_eq!(r.tuples_per_page, per_page);
        assert_eq!(r.page_count, 1000u64.div_ceil(per_page as u64));
        let entry = db.catalog().relation("R").unwrap();
        assert_eq!((entry.page_count, entry.tuple_count), (r.page_count, 1000));
        // reopening sees the same catalog
        drop(db);
        let mut db = Database::open(dir.path().join("db"), options()).unwrap();
        let f = db.relation("R").unwrap();
        assert_eq!(f.read_all(db.pool_mut()).unwrap()[17], tuple![17i64, "n4"]);
    }

    #[test]
    fn malformed_row_cites_its_line() {
        let dir = tempfile::tempdir().unwrap();
        let mut text = String::from("id,name\n");
        for i in 0..15 {
            text.push_str(&format!("{i},x\n"));
        }
        text.push_str("sixteen,x\n");
        let csv = write_csv(dir.path(), "r.csv", &text);
        let mut db = Database::create(dir.path().join("db"), options()).unwrap();
        let err = db
            .ingest_csv("R", &csv, Schema::parse("id:int,name:str8").unwrap())
            .unwrap_err();
        assert!(matches!(err, Error::Csv { line: 17, .. }), "{err}");
        assert!(db.catalog().relations.is_empty());
        assert!(!db.dir().join("R.heap").exists());
    }

    #[test]
    fn empty_fields_and_bad_headers_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut db = Database::create(dir.path().join("db"), options()).unwrap();
        let schema = Schema::parse("id:int,name:str8").unwrap();
        let csv = write_csv(dir.path(), "a.csv", "id,name\n1,\n");
        assert!(matches!(db.ingest_csv("A", &csv, schema.clone()), Err(Error::Csv { line: 2, .. })));
        let csv = write_csv(dir.path(), "b.csv", "id\n1\n");
        assert!(matches!(db.ingest_csv("B", &csv, schema.clone()), Err(Error::Csv { line: 1, .. })));
        let csv = write_csv(dir.path(), "c.csv", "id,name\n1,a,b\n");
        assert!(matches!(db.ingest_csv("C", &csv, schema.clone()), Err(Error::Csv { line: 2, .. })));
        let csv = write_csv(dir.path(), "d.csv", "id,name\n1,much too long\n");
        assert!(matches!(db.ingest_csv("D", &csv, schema), Err(Error::Csv { line: 2, .. })));
    }

    #[test]
    fn index_is_registered_and_reopened() {
        let dir = tempfile::tempdir().unwrap();
        let mut db = Database::create(dir.path().join("db"), options()).unwrap();
        let schema = Schema::parse("a:int,b:int").unwrap();
        let rows = (0..500i64).map(|i| Ok(tuple![i % 10, i]));
        db.ingest_rows("R", schema, rows).unwrap();
        let report = db.build_index("R", &["a".into()]).unwrap();
        assert_eq!(report.entry_count, 500);
        assert!(db.dir().join("R.a.idx").exists());
        assert_eq!(db.temp_files_on_disk().unwrap(), 0);
        assert!(db.build_index("R", &["a".into()]).is_err());
        assert!(matches!(db.build_index("R", &["q".into()]), Err(Error::Schema(_))));
        let ix = db.index("R", &["a".into()]).unwrap();
        let mut scan = ix.leaf_scan();
        let mut n = 0;
        while scan.next_entry(db.pool_mut()).unwrap().is_some() {
            n += 1;
        }
        assert_eq!(n, 500);
    }
}
