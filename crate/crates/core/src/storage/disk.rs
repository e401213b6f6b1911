//! Raw page files. A file is a concatenation of `page_size`-byte pages;
//! pages are grouped into extents of `extent_length` contiguous pages, so
//! page `p` belongs to extent `p / extent_length` and lives at byte offset
//! `p * page_size`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::storage::page::PageId;

pub const DEFAULT_EXTENT_LENGTH: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FileId(pub u32);

impl fmt::Display for FileId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "file#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Extent {
    pub first_page_id: PageId,
    pub length: u64,
}

impl Extent {
    pub fn containing(page_id: PageId, length: u64) -> Extent {
        Extent {
            first_page_id: page_id / length * length,
            length,
        }
    }

    /// One past the last page id of the extent.
    pub fn end(&self) -> PageId {
        self.first_page_id + self.length
    }

    pub fn contains(&self, page_id: PageId) -> bool {
        (self.first_page_id..self.end()).contains(&page_id)
    }
}

#[derive(Debug)]
struct DiskFile {
    path: PathBuf,
    handle: File,
    page_count: u64,
    extent_length: u64,
    temp: bool,
}

#[derive(Debug)]
pub struct DiskManager {
    tmp_dir: PathBuf,
    page_size: usize,
    extent_length: u64,
    files: BTreeMap<FileId, DiskFile>,
    next_id: u32,
    next_temp: u64,
}

impl DiskManager {
    pub fn new(tmp_dir: impl Into<PathBuf>, page_size: usize, extent_length: u64) -> Self {
        DiskManager {
            tmp_dir: tmp_dir.into(),
            page_size,
            extent_length: extent_length.max(1),
            files: BTreeMap::new(),
            next_id: 0,
            next_temp: 0,
        }
    }

    pub fn page_size(&self) -> usize {
        self.page_size
    }

    /// Extent length given to files that do not specify one.
    pub fn default_extent_length(&self) -> u64 {
        self.extent_length
    }

    pub fn tmp_dir(&self) -> &Path {
        &self.tmp_dir
    }

    fn file(&self, id: FileId) -> Result<&DiskFile> {
        self.files
            .get(&id)
            .ok_or_else(|| Error::Address(format!("{id} is not open")))
    }

    fn file_mut(&mut self, id: FileId) -> Result<&mut DiskFile> {
        self.files
            .get_mut(&id)
            .ok_or_else(|| Error::Address(format!("{id} is not open")))
    }

    fn register(&mut self, path: PathBuf, handle: File, extent_length: u64, temp: bool) -> Result<FileId> {
        let len = handle.metadata()?.len();
        if len % self.page_size as u64 != 0 {
            return Err(Error::storage(format!(
                "{}: length {len} is not a multiple of the page size {}",
                path.display(),
                self.page_size
            )));
        }
        let id = FileId(self.next_id);
        self.next_id += 1;
        self.files.insert(
            id,
            DiskFile {
                path,
                handle,
                page_count: len / self.page_size as u64,
                extent_length: extent_length.max(1),
                temp,
            },
        );
        Ok(id)
    }

    /// Opens (creating if asked) a persistent page file. Opening the same
    /// path twice returns the same id.
    pub fn open(&mut self, path: &Path, extent_length: u64, create: bool) -> Result<FileId> {
        if let Some((&id, _)) = self.files.iter().find(|(_, f)| f.path == path) {
            return Ok(id);
        }
        let handle = OpenOptions::new()
            .read(true)
            .write(true)
            .create(create)
            .truncate(false)
            .open(path)?;
        self.register(path.to_path_buf(), handle, extent_length, false)
    }

    pub fn create_temp(&mut self, extent_length: u64) -> Result<FileId> {
        fs::create_dir_all(&self.tmp_dir)?;
        let path = self.tmp_dir.join(format!("t{:06}.heap", self.next_temp));
        self.next_temp += 1;
        let handle = OpenOptions::new()
            .read(true)
            .write(true)
            .create(true)
            .truncate(true)
            .open(&path)?;
        self.register(path, handle, extent_length, true)
    }

    pub fn page_count(&self, id: FileId) -> Result<u64> {
        Ok(self.file(id)?.page_count)
    }

    pub fn extent_length(&self, id: FileId) -> Result<u64> {
        Ok(self.file(id)?.extent_length)
    }

    pub fn is_temp(&self, id: FileId) -> Result<bool> {
        Ok(self.file(id)?.temp)
    }

    pub fn path(&self, id: FileId) -> Result<&Path> {
        Ok(&self.file(id)?.path)
    }

    pub fn byte_offset(&self, page_id: PageId) -> u64 {
        page_id * self.page_size as u64
    }

    /// Reads `count` contiguous pages starting at `first` in one request.
    pub fn read_pages(&mut self, id: FileId, first: PageId, count: u64) -> Result<Vec<u8>> {
        let page_size = self.page_size;
        let offset = self.byte_offset(first);
        let file = self.file_mut(id)?;
        if first + count > file.page_count {
            return Err(Error::Address(format!(
                "{id}: pages {first}..{} beyond page count {}",
                first + count,
                file.page_count
            )));
        }
        let mut buf = vec![0; count as usize * page_size];
        file.handle.seek(SeekFrom::Start(offset))?;
        file.handle.read_exact(&mut buf)?;
        Ok(buf)
    }

    /// Writes pages starting at `first`, which may be at most the current
    /// page count (overwrite or append).
    pub fn write_pages(&mut self, id: FileId, first: PageId, bytes: &[u8]) -> Result<()> {
        let page_size = self.page_size;
        assert_eq!(bytes.len() % page_size, 0);
        let offset = self.byte_offset(first);
        let file = self.file_mut(id)?;
        if first > file.page_count {
            return Err(Error::Address(format!(
                "{id}: write at page {first} leaves a hole after page {}",
                file.page_count
            )));
        }
        file.handle.seek(SeekFrom::Start(offset))?;
        file.handle.write_all(bytes)?;
        let end = first + (bytes.len() / page_size) as u64;
        file.page_count = file.page_count.max(end);
        Ok(())
    }

    pub fn sync(&mut self, id: FileId) -> Result<()> {
        self.file_mut(id)?.handle.sync_data()?;
        Ok(())
    }

    /// Closes and deletes the backing file.
    pub fn remove(&mut self, id: FileId) -> Result<()> {
        let file = self
            .files
            .remove(&id)
            .ok_or_else(|| Error::Address(format!("{id} is not open")))?;
        drop(file.handle);
        match fs::remove_file(&file.path) {
            Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(e.into()),
            _ => Ok(()),
        }
    }

    pub fn close(&mut self, id: FileId) {
        self.files.remove(&id);
    }

    /// Turns a temporary file into a persistent one at `path`.
    pub fn persist(&mut self, id: FileId, path: &Path) -> Result<()> {
        let file = self.file_mut(id)?;
        file.handle.sync_data()?;
        fs::rename(&file.path, path)?;
        file.path = path.to_path_buf();
        file.temp = false;
        Ok(())
    }

    pub fn open_temp_files(&self) -> Vec<FileId> {
        self.files
            .iter()
            .filter(|(_, f)| f.temp)
            .map(|(&id, _)| id)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extent_geometry() {
        let e = Extent::containing(13, 8);
        assert_eq!(e.first_page_id, 8);
        assert_eq!(e.end(), 16);
        assert!(e.contains(15) && !e.contains(16));
    }

    #[test]
    fn pages_sit_at_contiguous_offsets() {
        let dir = tempfile::tempdir().unwrap();
        let mut disk = DiskManager::new(dir.path().join("tmp"), 512, 4);
        let id = disk.create_temp(4).unwrap();
        for p in 0..10u8 {
            disk.write_pages(id, p as u64, &[p; 512]).unwrap();
        }
        assert_eq!(disk.page_count(id).unwrap(), 10);
        let raw = fs::read(disk.path(id).unwrap()).unwrap();
        for p in 0..10u64 {
            let e = Extent::containing(p, 4);
            let offset = disk.byte_offset(e.first_page_id) + (p - e.first_page_id) * 512;
            assert_eq!(offset, disk.byte_offset(p));
            assert!(raw[offset as usize..][..512].iter().all(|&b| b == p as u8));
        }
        let buf = disk.read_pages(id, 3, 3).unwrap();
        assert_eq!(buf[0], 3);
        assert_eq!(buf[1024], 5);
        assert!(disk.read_pages(id, 9, 2).is_err());
        assert!(disk.write_pages(id, 12, &[0; 512]).is_err());
        disk.remove(id).unwrap();
        assert_eq!(fs::read_dir(dir.path().join("tmp")).unwrap().count(), 0);
    }
}
