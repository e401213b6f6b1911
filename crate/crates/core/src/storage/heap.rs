//! Heap files: unordered sequences of pages holding fixed-width tuples in
//! insertion order.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::buffer::{AccessMode, BufferPool, OutputFrame, PageHandle};
use crate::error::{Error, Result};
use crate::storage::disk::FileId;
use crate::storage::page::{tuples_per_page, Page, PageId};
use crate::storage::schema::{Schema, Tuple};
use crate::stream::TupleStream;

/// Tuple address: page and slot within the owning heap file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Rid {
    pub page_id: PageId,
    pub slot: u32,
}

impl Rid {
    pub fn new(page_id: PageId, slot: u32) -> Self {
        Rid { page_id, slot }
    }
}

impl fmt::Display for Rid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.page_id, self.slot)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeapFile {
    id: FileId,
    schema: Schema,
    width: usize,
    tuples_per_page: usize,
}

impl HeapFile {
    fn new(id: FileId, schema: Schema, page_size: usize) -> Result<Self> {
        let width = schema.tuple_width();
        let tuples_per_page = tuples_per_page(page_size, width);
        if tuples_per_page == 0 {
            return Err(Error::UnsupportedTuple { width, page_size });
        }
        Ok(HeapFile {
            id,
            schema,
            width,
            tuples_per_page,
        })
    }

    pub fn open(pool: &mut BufferPool, path: &Path, schema: Schema, create: bool) -> Result<Self> {
        let page_size = pool.page_size();
        let extent = pool.disk().default_extent_length();
        let id = pool.disk_mut().open(path, extent, create)?;
        HeapFile::new(id, schema, page_size)
    }

    pub fn create_temp(pool: &mut BufferPool, schema: Schema) -> Result<Self> {
        let page_size = pool.page_size();
        let width = schema.tuple_width();
        if tuples_per_page(page_size, width) == 0 {
            return Err(Error::UnsupportedTuple { width, page_size });
        }
        let extent = pool.disk().default_extent_length();
        let id = pool.create_temp(extent)?;
        HeapFile::new(id, schema, page_size)
    }

    pub fn id(&self) -> FileId {
        self.id
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn tuple_width(&self) -> usize {
        self.width
    }

    pub fn tuples_per_page(&self) -> usize {
        self.tuples_per_page
    }

    /// B, the number of readable pages.
    pub fn page_count(&self, pool: &BufferPool) -> Result<u64> {
        pool.disk().page_count(self.id)
    }

    pub fn extent_length(&self, pool: &BufferPool) -> Result<u64> {
        pool.disk().extent_length(self.id)
    }

    pub fn scan(&self) -> HeapScan {
        HeapScan::new(self.clone(), AccessMode::Sequential)
    }

    /// Access by address: one page read unless the page is resident.
    pub fn fetch(&self, pool: &mut BufferPool, rid: Rid) -> Result<Tuple> {
        let handle = pool.get_page(self.id, rid.page_id, AccessMode::Random)?;
        let result = self.decode_slot(pool.page(&handle), rid);
        pool.unpin(&handle)?;
        result
    }

    fn decode_slot(&self, page: &Page, rid: Rid) -> Result<Tuple> {
        page.validate(self.width)?;
        let bytes = page
            .slot(rid.slot as usize)
            .ok_or_else(|| Error::Address(format!("no slot {} on page {}", rid.slot, rid.page_id)))?;
        self.schema.decode(bytes)
    }

    pub fn writer(&self) -> HeapWriter {
        HeapWriter::new(self.clone())
    }

    /// Appends one tuple, filling the last page before opening a new one.
    pub fn append_tuple(&self, pool: &mut BufferPool, tuple: &Tuple) -> Result<Rid> {
        let mut writer = self.writer();
        let rid = writer.push(pool, tuple);
        writer.finish(pool)?;
        rid
    }

    pub fn delete(self, pool: &mut BufferPool) -> Result<()> {
        pool.delete_file(self.id)
    }

    /// Reads the whole file through the pool.
    pub fn read_all(&self, pool: &mut BufferPool) -> Result<Vec<Tuple>> {
        self.scan().collect_all(pool)
    }
}

/// Sequential scan. Holds at most one pinned page.
#[derive(Debug)]
pub struct HeapScan {
    file: HeapFile,
    mode: AccessMode,
    page_id: PageId,
    slot: usize,
    current: Option<PageHandle>,
    done: bool,
}

impl HeapScan {
    fn new(file: HeapFile, mode: AccessMode) -> Self {
        HeapScan {
            file,
            mode,
            page_id: 0,
            slot: 0,
            current: None,
            done: false,
        }
    }

    pub fn file(&self) -> &HeapFile {
        &self.file
    }

    pub fn next_with_rid(&mut self, pool: &mut BufferPool) -> Result<Option<(Rid, Tuple)>> {
        loop {
            if self.done {
                return Ok(None);
            }
            let handle = match self.current {
                Some(h) => h,
                None => {
                    if self.page_id >= self.file.page_count(pool)? {
                        self.done = true;
                        return Ok(None);
                    }
                    let h = pool.get_page(self.file.id, self.page_id, self.mode)?;
                    if let Err(e) = pool.page(&h).validate(self.file.width) {
                        pool.unpin(&h)?;
                        return Err(e);
                    }
                    self.current = Some(h);
                    self.slot = 0;
                    h
                }
            };
            let page = pool.page(&handle);
            if let Some(bytes) = page.slot(self.slot) {
                let tuple = self.file.schema.decode(bytes)?;
                let rid = Rid::new(self.page_id, self.slot as u32);
                self.slot += 1;
                return Ok(Some((rid, tuple)));
            }
            pool.unpin(&handle)?;
            self.current = None;
            self.page_id += 1;
        }
    }
}

impl TupleStream for HeapScan {
    fn schema(&self) -> &Schema {
        &self.file.schema
    }

    fn next_tuple(&mut self, pool: &mut BufferPool) -> Result<Option<Tuple>> {
        Ok(self.next_with_rid(pool)?.map(|(_, t)| t))
    }

    fn close(&mut self, pool: &mut BufferPool) -> Result<()> {
        self.done = true;
        if let Some(h) = self.current.take() {
            pool.unpin(&h)?;
        }
        Ok(())
    }
}

/// Buffered appender. Holds one output frame once the first tuple arrives;
/// a page is written when it is full and another tuple needs room, and
/// once more at [`finish`](HeapWriter::finish) for a partial page.
#[derive(Debug)]
pub struct HeapWriter {
    file: HeapFile,
    out: Option<OutputFrame>,
    page_id: PageId,
    tuples: u64,
    pages_written: u64,
}

impl HeapWriter {
    fn new(file: HeapFile) -> Self {
        HeapWriter {
            file,
            out: None,
            page_id: 0,
            tuples: 0,
            pages_written: 0,
        }
    }

    pub fn file(&self) -> &HeapFile {
        &self.file
    }

    pub fn tuples_written(&self) -> u64 {
        self.tuples
    }

    pub fn pages_written(&self) -> u64 {
        self.pages_written
    }

    /// Takes an output frame, resuming a partially filled last page.
    fn acquire(&mut self, pool: &mut BufferPool) -> Result<()> {
        let page_count = self.file.page_count(pool)?;
        let mut resumed = None;
        self.page_id = page_count;
        if page_count > 0 {
            let last = page_count - 1;
            let h = pool.get_page(self.file.id, last, AccessMode::Random)?;
            let page = pool.page(&h);
            let partial = page.validate(self.file.width).is_ok() && !page.is_full(self.file.width);
            if partial {
                resumed = Some(page.clone());
                self.page_id = last;
            }
            pool.unpin(&h)?;
        }
        let out = pool.alloc_output(self.file.width)?;
        if let Some(page) = resumed {
            *pool.output_page_mut(&out) = page;
        }
        self.out = Some(out);
        Ok(())
    }

    /// Takes the output frame now rather than at the first push, so a scan
    /// started afterwards cannot have its read-ahead evicted by it.
    pub fn reserve(&mut self, pool: &mut BufferPool) -> Result<()> {
        if self.out.is_none() {
            self.acquire(pool)?;
        }
        Ok(())
    }

    pub fn push(&mut self, pool: &mut BufferPool, tuple: &Tuple) -> Result<Rid> {
        self.file.schema.check(tuple)?;
        if self.out.is_none() {
            self.acquire(pool)?;
        }
        let out = self.out.as_ref().unwrap();
        let width = self.file.width;
        if pool.output_page(out).is_full(width) {
            pool.write_output(out, self.file.id, self.page_id)?;
            self.pages_written += 1;
            self.page_id += 1;
            pool.output_page_mut(out).reset(width);
        }
        let schema = &self.file.schema;
        let (slot, bytes) = pool
            .output_page_mut(out)
            .push_slot(width)
            .expect("page has room after flush");
        schema
            .encode_into(tuple, bytes)
            .expect("tuple checked against the schema");
        self.tuples += 1;
        Ok(Rid::new(self.page_id, slot as u32))
    }

    /// Writes the buffered page (if any) and gives the frame back. The
    /// writer can be used again; it resumes at the last page.
    pub fn suspend(&mut self, pool: &mut BufferPool) -> Result<()> {
        if let Some(out) = self.out.take() {
            let result = if pool.output_page(&out).slot_count() > 0 {
                pool.write_output(&out, self.file.id, self.page_id)
                    .map(|_| self.pages_written += 1)
            } else {
                Ok(())
            };
            pool.release_output(out);
            result?;
        }
        Ok(())
    }

    pub fn finish(mut self, pool: &mut BufferPool) -> Result<HeapFile> {
        self.suspend(pool)?;
        Ok(self.file)
    }

    /// Gives the frame back without writing.
    pub fn abandon(mut self, pool: &mut BufferPool) -> HeapFile {
        if let Some(out) = self.out.take() {
            pool.release_output(out);
        }
        self.file
    }
}
