//! A pool of exactly `capacity` page frames. Every page read and write in
//! the engine goes through it, which is what makes the I/O counters exact.
//!
//! Frames are either free, caching a file page, or lent out as an output
//! buffer that an operator fills before writing it to a file. Output
//! buffers count as pinned frames, so an operator's budget covers both
//! its inputs and its outputs.
//!
//! Replacement is least-recently-unpinned. Pages brought in by read-ahead
//! arrive unpinned and unreferenced; they are only evicted for a demand
//! read once no referenced page is left to evict, and read-ahead never
//! evicts them. Read-ahead is clamped to the frames that are free or hold
//! referenced unpinned pages after the demanded page has its frame.

mod stats;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

pub use stats::IoStats;

use crate::error::{Error, Result};
use crate::storage::disk::{DiskManager, Extent, FileId};
use crate::storage::page::{Page, PageId};

pub const MIN_FRAMES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessMode {
    Sequential,
    Random,
}

/// A pinned cached page. Copyable so callers can pin it again; every pin
/// must be matched by one unpin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PageHandle {
    frame: usize,
    file: FileId,
    page_id: PageId,
}

impl PageHandle {
    pub fn file(&self) -> FileId {
        self.file
    }

    pub fn page_id(&self) -> PageId {
        self.page_id
    }
}

/// An output buffer lent by the pool. Not `Clone`: it is returned exactly
/// once through [`BufferPool::release_output`].
#[derive(Debug, PartialEq, Eq)]
pub struct OutputFrame {
    frame: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FrameState {
    Free,
    Cached { file: FileId, page_id: PageId },
    Output,
}

#[derive(Debug)]
struct Frame {
    page: Page,
    state: FrameState,
    pin_count: u32,
    /// `None` for a prefetched page nobody has pinned yet.
    last_unpinned: Option<u64>,
    loaded_at: u64,
}

#[derive(Debug)]
pub struct BufferPool {
    disk: DiskManager,
    capacity: usize,
    readahead_window: u64,
    frames: Vec<Frame>,
    page_table: HashMap<(FileId, PageId), usize>,
    tick: u64,
    stats: IoStats,
    file_stats: BTreeMap<FileId, IoStats>,
    pinned_frames: usize,
    peak_pinned: usize,
}

impl BufferPool {
    pub fn new(disk: DiskManager, capacity: usize, readahead_window: u64) -> Result<Self> {
        check_capacity(capacity)?;
        Ok(BufferPool {
            disk,
            capacity,
            readahead_window,
            frames: Vec::with_capacity(capacity),
            page_table: HashMap::new(),
            tick: 0,
            stats: IoStats::default(),
            file_stats: BTreeMap::new(),
            pinned_frames: 0,
            peak_pinned: 0,
        })
    }

    pub fn disk(&self) -> &DiskManager {
        &self.disk
    }

    pub fn disk_mut(&mut self) -> &mut DiskManager {
        &mut self.disk
    }

    pub fn page_size(&self) -> usize {
        self.disk.page_size()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn readahead_window(&self) -> u64 {
        self.readahead_window
    }

    pub fn set_readahead_window(&mut self, window: u64) {
        self.readahead_window = window;
    }

    /// Changes the frame count. Drops every cached page, so nothing may be
    /// pinned.
    pub fn set_capacity(&mut self, capacity: usize) -> Result<()> {
        check_capacity(capacity)?;
        self.clear_cache()?;
        self.capacity = capacity;
        Ok(())
    }

    pub fn clear_cache(&mut self) -> Result<()> {
        if self.pinned_frames > 0 {
            return Err(Error::usage(format!(
                "cannot drop the cache with {} pinned frames",
                self.pinned_frames
            )));
        }
        self.frames.clear();
        self.page_table.clear();
        Ok(())
    }

    pub fn stats(&self) -> IoStats {
        self.stats
    }

    pub fn file_stats(&self, file: FileId) -> IoStats {
        self.file_stats.get(&file).copied().unwrap_or_default()
    }

    pub fn reset_stats(&mut self) {
        self.stats = IoStats::default();
        self.file_stats.clear();
        self.peak_pinned = self.pinned_frames;
    }

    pub fn pinned_frames(&self) -> usize {
        self.pinned_frames
    }

    pub fn peak_pinned(&self) -> usize {
        self.peak_pinned
    }

    pub fn reset_peak_pinned(&mut self) {
        self.peak_pinned = self.pinned_frames;
    }

    pub fn resident_frames(&self) -> usize {
        self.frames
            .iter()
            .filter(|f| f.state != FrameState::Free)
            .count()
    }

    pub fn is_resident(&self, file: FileId, page_id: PageId) -> bool {
        self.page_table.contains_key(&(file, page_id))
    }

    pub fn pin_count(&self, handle: &PageHandle) -> u32 {
        self.frames[handle.frame].pin_count
    }

    fn next_tick(&mut self) -> u64 {
        self.tick += 1;
        self.tick
    }

    fn assert_budget(&self) {
        assert!(
            self.frames.len() <= self.capacity,
            "{} frames allocated in a {}-frame pool",
            self.frames.len(),
            self.capacity
        );
        assert!(self.pinned_frames <= self.capacity);
    }

    fn note_pinned(&mut self) {
        self.pinned_frames += 1;
        self.peak_pinned = self.peak_pinned.max(self.pinned_frames);
        self.assert_budget();
    }

    fn evict(&mut self, frame: usize) {
        if let FrameState::Cached { file, page_id } = self.frames[frame].state {
            self.page_table.remove(&(file, page_id));
        }
        self.frames[frame].state = FrameState::Free;
        self.frames[frame].last_unpinned = None;
    }

    /// Unpinned cached frames holding a page that has been referenced,
    /// least recently unpinned first.
    fn referenced_victim(&self) -> Option<usize> {
        self.frames
            .iter()
            .enumerate()
            .filter(|(_, f)| matches!(f.state, FrameState::Cached { .. }) && f.pin_count == 0)
            .filter_map(|(i, f)| f.last_unpinned.map(|t| (t, i)))
            .min()
            .map(|(_, i)| i)
    }

    fn prefetched_victim(&self) -> Option<usize> {
        self.frames
            .iter()
            .enumerate()
            .filter(|(_, f)| {
                matches!(f.state, FrameState::Cached { .. })
                    && f.pin_count == 0
                    && f.last_unpinned.is_none()
            })
            .map(|(i, f)| (f.loaded_at, i))
            .min()
            .map(|(_, i)| i)
    }

    /// Finds a frame for a new page. Demand requests may evict unreferenced
    /// prefetched pages as a last resort; read-ahead may not.
    fn grab_frame(&mut self, demand: bool) -> Result<usize> {
        if self.frames.len() < self.capacity {
            self.frames.push(Frame {
                page: Page::new(self.page_size()),
                state: FrameState::Free,
                pin_count: 0,
                last_unpinned: None,
                loaded_at: 0,
            });
            self.assert_budget();
            return Ok(self.frames.len() - 1);
        }
        if let Some(i) = self.frames.iter().position(|f| f.state == FrameState::Free) {
            return Ok(i);
        }
        let victim = match self.referenced_victim() {
            Some(i) => Some(i),
            None if demand => self.prefetched_victim(),
            None => None,
        };
        match victim {
            Some(i) => {
                self.evict(i);
                Ok(i)
            }
            None => Err(Error::PoolExhausted {
                capacity: self.capacity,
            }),
        }
    }

    /// Frames read-ahead could use without touching pinned frames or
    /// unreferenced prefetched pages.
    fn prefetch_room(&self) -> usize {
        let unallocated = self.capacity - self.frames.len();
        let reusable = self
            .frames
            .iter()
            .filter(|f| {
                f.state == FrameState::Free
                    || (matches!(f.state, FrameState::Cached { .. })
                        && f.pin_count == 0
                        && f.last_unpinned.is_some())
            })
            .count();
        unallocated + reusable
    }

    fn count_read(&mut self, file: FileId, pages: u64, prefetched: u64) {
        let delta = IoStats {
            page_reads: pages,
            read_requests: 1,
            readahead_pages: prefetched,
            ..IoStats::default()
        };
        self.stats += delta;
        *self.file_stats.entry(file).or_default() += delta;
    }

    fn count_write(&mut self, file: FileId, pages: u64) -> Result<()> {
        let temp = if self.disk.is_temp(file)? { pages } else { 0 };
        let delta = IoStats {
            page_writes: pages,
            temp_pages_written: temp,
            ..IoStats::default()
        };
        self.stats += delta;
        *self.file_stats.entry(file).or_default() += delta;
        Ok(())
    }

    /// Returns the page pinned. A miss in sequential mode also reads up to
    /// `readahead_window` following pages of the same extent in the same
    /// request; those arrive unpinned.
    pub fn get_page(&mut self, file: FileId, page_id: PageId, mode: AccessMode) -> Result<PageHandle> {
        let page_count = self.disk.page_count(file)?;
        if page_id >= page_count {
            return Err(Error::Address(format!(
                "{file}: page {page_id} beyond page count {page_count}"
            )));
        }
        if let Some(&frame) = self.page_table.get(&(file, page_id)) {
            let handle = PageHandle {
                frame,
                file,
                page_id,
            };
            self.pin(&handle)?;
            return Ok(handle);
        }

        let frame = self.grab_frame(true)?;
        // Reserve the frame so read-ahead cannot pick it.
        self.frames[frame].state = FrameState::Cached { file, page_id };
        self.frames[frame].pin_count = 1;
        self.note_pinned();

        let mut extra = 0;
        if mode == AccessMode::Sequential && self.readahead_window > 0 {
            let extent = Extent::containing(page_id, self.disk.extent_length(file)?);
            let limit = extent.end().min(page_count);
            while extra < self.readahead_window
                && page_id + 1 + extra < limit
                && !self.is_resident(file, page_id + 1 + extra)
            {
                extra += 1;
            }
            extra = extra.min(self.prefetch_room() as u64);
        }

        let bytes = match self.disk.read_pages(file, page_id, extra + 1) {
            Ok(bytes) => bytes,
            Err(err) => {
                self.frames[frame].state = FrameState::Free;
                self.frames[frame].pin_count = 0;
                self.pinned_frames -= 1;
                return Err(err);
            }
        };
        self.count_read(file, extra + 1, extra);

        let page_size = self.page_size();
        let tick = self.next_tick();
        self.frames[frame].page = Page::from_bytes(&bytes[..page_size]);
        self.frames[frame].last_unpinned = None;
        self.frames[frame].loaded_at = tick;
        self.page_table.insert((file, page_id), frame);

        for k in 1..=extra {
            let slot = self
                .grab_frame(false)
                .expect("read-ahead clamped to available frames");
            let pid = page_id + k;
            let f = &mut self.frames[slot];
            f.page = Page::from_bytes(&bytes[k as usize * page_size..][..page_size]);
            f.state = FrameState::Cached { file, page_id: pid };
            f.pin_count = 0;
            f.last_unpinned = None;
            f.loaded_at = tick;
            self.page_table.insert((file, pid), slot);
        }
        self.assert_budget();

        Ok(PageHandle {
            frame,
            file,
            page_id,
        })
    }

    fn check_handle(&self, handle: &PageHandle) -> Result<()> {
        match self.frames.get(handle.frame).map(|f| f.state) {
            Some(FrameState::Cached { file, page_id })
                if file == handle.file && page_id == handle.page_id =>
            {
                Ok(())
            }
            _ => Err(Error::usage(format!(
                "stale handle for {} page {}",
                handle.file, handle.page_id
            ))),
        }
    }

    pub fn pin(&mut self, handle: &PageHandle) -> Result<()> {
        self.check_handle(handle)?;
        let frame = &mut self.frames[handle.frame];
        frame.pin_count += 1;
        if frame.pin_count == 1 {
            self.note_pinned();
        }
        Ok(())
    }

    pub fn unpin(&mut self, handle: &PageHandle) -> Result<()> {
        self.check_handle(handle)?;
        if self.frames[handle.frame].pin_count == 0 {
            return Err(Error::usage(format!(
                "unpin of {} page {} with pin count 0",
                handle.file, handle.page_id
            )));
        }
        let tick = self.next_tick();
        let frame = &mut self.frames[handle.frame];
        frame.pin_count -= 1;
        if frame.pin_count == 0 {
            frame.last_unpinned = Some(tick);
            self.pinned_frames -= 1;
        }
        Ok(())
    }

    pub fn page(&self, handle: &PageHandle) -> &Page {
        debug_assert!(self.check_handle(handle).is_ok());
        &self.frames[handle.frame].page
    }

    /// Lends a pinned, empty output buffer formatted for `width`-byte tuples.
    pub fn alloc_output(&mut self, width: usize) -> Result<OutputFrame> {
        let frame = self.grab_frame(true)?;
        let f = &mut self.frames[frame];
        f.state = FrameState::Output;
        f.pin_count = 1;
        f.last_unpinned = None;
        f.page.reset(width);
        self.note_pinned();
        Ok(OutputFrame { frame })
    }

    pub fn output_page(&self, out: &OutputFrame) -> &Page {
        &self.frames[out.frame].page
    }

    pub fn output_page_mut(&mut self, out: &OutputFrame) -> &mut Page {
        &mut self.frames[out.frame].page
    }

    /// Writes the buffer to `page_id` of `file` (overwrite or append).
    pub fn write_output(&mut self, out: &OutputFrame, file: FileId, page_id: PageId) -> Result<()> {
        self.disk
            .write_pages(file, page_id, self.frames[out.frame].page.bytes())?;
        self.count_write(file, 1)?;
        self.refresh_cached(file, page_id, out.frame);
        Ok(())
    }

    pub fn release_output(&mut self, out: OutputFrame) {
        let f = &mut self.frames[out.frame];
        debug_assert_eq!(f.state, FrameState::Output);
        f.state = FrameState::Free;
        f.pin_count = 0;
        self.pinned_frames -= 1;
    }

    /// Keeps a cached copy coherent with a page just written.
    fn refresh_cached(&mut self, file: FileId, page_id: PageId, source: usize) {
        if let Some(&cached) = self.page_table.get(&(file, page_id)) {
            let page = self.frames[source].page.clone();
            self.frames[cached].page = page;
        }
    }

    /// Writes one page outside any frame.
    pub fn write_page(&mut self, file: FileId, page_id: PageId, page: &Page) -> Result<()> {
        self.disk.write_pages(file, page_id, page.bytes())?;
        self.count_write(file, 1)?;
        if let Some(&cached) = self.page_table.get(&(file, page_id)) {
            self.frames[cached].page = page.clone();
        }
        Ok(())
    }

    /// Appends `pages` contiguously to a file and returns their ids.
    pub fn flush_temp(&mut self, file: FileId, pages: &[Page]) -> Result<Vec<PageId>> {
        if pages.is_empty() {
            return Ok(Vec::new());
        }
        let first = self.disk.page_count(file)?;
        let mut bytes = Vec::with_capacity(pages.len() * self.page_size());
        for page in pages {
            if page.size() != self.page_size() {
                return Err(Error::storage(format!(
                    "{}-byte page in a {}-byte pool",
                    page.size(),
                    self.page_size()
                )));
            }
            bytes.extend_from_slice(page.bytes());
        }
        self.disk.write_pages(file, first, &bytes)?;
        self.count_write(file, pages.len() as u64)?;
        Ok((first..first + pages.len() as u64).collect())
    }

    pub fn create_temp(&mut self, extent_length: u64) -> Result<FileId> {
        self.disk.create_temp(extent_length)
    }

    /// Drops a file's cached pages and deletes it from disk.
    pub fn delete_file(&mut self, file: FileId) -> Result<()> {
        self.forget(file)?;
        self.disk.remove(file)
    }

    pub fn close_file(&mut self, file: FileId) -> Result<()> {
        self.forget(file)?;
        self.disk.close(file);
        Ok(())
    }

    fn forget(&mut self, file: FileId) -> Result<()> {
        let cached: Vec<usize> = self
            .frames
            .iter()
            .enumerate()
            .filter(|(_, f)| matches!(f.state, FrameState::Cached { file: x, .. } if x == file))
            .map(|(i, _)| i)
            .collect();
        if cached.iter().any(|&i| self.frames[i].pin_count > 0) {
            return Err(Error::usage(format!("{file} still has pinned pages")));
        }
        for i in cached {
            self.evict(i);
        }
        Ok(())
    }

    pub fn persist(&mut self, file: FileId, path: &Path) -> Result<()> {
        self.disk.persist(file, path)
    }

    /// Unpins everything and returns lent output buffers; used to recover
    /// after an aborted operator.
    pub fn release_all(&mut self) {
        for f in &mut self.frames {
            if f.state == FrameState::Output {
                f.state = FrameState::Free;
            }
            if f.pin_count > 0 {
                f.pin_count = 0;
                f.last_unpinned = Some(0);
            }
        }
        self.pinned_frames = 0;
    }
}

fn check_capacity(capacity: usize) -> Result<()> {
    if capacity < MIN_FRAMES {
        return Err(Error::usage(format!(
            "a pool needs at least {MIN_FRAMES} frames, got {capacity}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Pool over one temp file of `pages` pages, extent `extent`.
    fn pool_with_file(capacity: usize, window: u64, pages: u64, extent: u64) -> (tempfile::TempDir, BufferPool, FileId) {
        let dir = tempfile::tempdir().unwrap();
        let disk = DiskManager::new(dir.path().join("tmp"), 512, extent);
        let mut pool = BufferPool::new(disk, capacity, window).unwrap();
        let file = pool.create_temp(extent).unwrap();
        let mut page = Page::new(512);
        for p in 0..pages {
            page.reset(8);
            page.push_slot(8).unwrap().1.copy_from_slice(&(p as i64).to_le_bytes());
            pool.write_page(file, p, &page).unwrap();
        }
        pool.reset_stats();
        (dir, pool, file)
    }

    #[test]
    fn random_miss_costs_one_request() {
        let (_d, mut pool, file) = pool_with_file(4, 3, 8, 8);
        let h = pool.get_page(file, 5, AccessMode::Random).unwrap();
        assert_eq!(pool.stats().page_reads, 1);
        assert_eq!(pool.stats().read_requests, 1);
        assert_eq!(pool.page(&h).slot(0).unwrap()[0], 5);
        pool.unpin(&h).unwrap();
        let h = pool.get_page(file, 5, AccessMode::Random).unwrap();
        assert_eq!(pool.stats().page_reads, 1, "hit costs nothing");
        pool.unpin(&h).unwrap();
    }

    #[test]
    fn sequential_miss_prefetches_within_extent() {
        // Hand replay: extent [0, 8), window 3, page 0 -> pages 0..=3.
        let (_d, mut pool, file) = pool_with_file(8, 3, 16, 8);
        let h = pool.get_page(file, 0, AccessMode::Sequential).unwrap();
        let s = pool.stats();
        assert_eq!((s.read_requests, s.page_reads, s.readahead_pages), (1, 4, 3));
        assert!((1..=3).all(|p| pool.is_resident(file, p)));
        assert!(!pool.is_resident(file, 4));
        pool.unpin(&h).unwrap();
    }

    #[test]
    fn prefetch_stops_at_extent_boundary() {
        let (_d, mut pool, file) = pool_with_file(8, 3, 16, 8);
        let h = pool.get_page(file, 7, AccessMode::Sequential).unwrap();
        assert_eq!(pool.stats().page_reads, 1);
        assert!(!pool.is_resident(file, 8));
        pool.unpin(&h).unwrap();
    }

    #[test]
    fn prefetch_stops_at_end_of_file() {
        let (_d, mut pool, file) = pool_with_file(8, 7, 3, 8);
        let h = pool.get_page(file, 0, AccessMode::Sequential).unwrap();
        assert_eq!(pool.stats().page_reads, 3);
        pool.unpin(&h).unwrap();
    }

    #[test]
    fn prefetch_is_clamped_to_free_frames() {
        let (_d, mut pool, file) = pool_with_file(3, 7, 16, 8);
        let out = pool.alloc_output(8).unwrap();
        let h = pool.get_page(file, 0, AccessMode::Sequential).unwrap();
        // 3 frames: one output, one demand, one left for read-ahead.
        assert_eq!(pool.stats().page_reads, 2);
        assert!(pool.resident_frames() <= 3);
        pool.unpin(&h).unwrap();
        pool.release_output(out);
    }

    #[test]
    fn pin_unpin_round_trip() {
        let (_d, mut pool, file) = pool_with_file(3, 0, 4, 8);
        let h = pool.get_page(file, 1, AccessMode::Random).unwrap();
        pool.pin(&h).unwrap();
        assert_eq!(pool.pin_count(&h), 2);
        pool.unpin(&h).unwrap();
        pool.unpin(&h).unwrap();
        assert_eq!(pool.pin_count(&h), 0);
        assert!(matches!(pool.unpin(&h), Err(Error::Usage(_))));
    }

    #[test]
    fn exhaustion_is_an_error() {
        let (_d, mut pool, file) = pool_with_file(3, 0, 8, 8);
        let held: Vec<_> = (0..3)
            .map(|p| pool.get_page(file, p, AccessMode::Random).unwrap())
            .collect();
        assert!(matches!(
            pool.get_page(file, 3, AccessMode::Random),
            Err(Error::PoolExhausted { capacity: 3 })
        ));
        assert!(pool.alloc_output(8).is_err());
        for h in &held {
            pool.unpin(h).unwrap();
        }
        assert_eq!(pool.pinned_frames(), 0);
        assert!(pool.get_page(file, 3, AccessMode::Random).is_ok());
    }

    #[test]
    fn address_errors() {
        let (_d, mut pool, file) = pool_with_file(3, 0, 2, 8);
        assert!(matches!(
            pool.get_page(file, 2, AccessMode::Random),
            Err(Error::Address(_))
        ));
        assert!(matches!(
            pool.get_page(FileId(99), 0, AccessMode::Random),
            Err(Error::Address(_))
        ));
    }

    #[test]
    fn flush_temp_appends_contiguously() {
        let (_d, mut pool, file) = pool_with_file(3, 0, 2, 8);
        assert!(pool.flush_temp(file, &[]).unwrap().is_empty());
        assert_eq!(pool.stats(), IoStats::default());
        let pages = vec![Page::new(512); 3];
        assert_eq!(pool.flush_temp(file, &pages).unwrap(), vec![2, 3, 4]);
        assert_eq!(pool.disk().page_count(file).unwrap(), 5);
        assert_eq!(pool.stats().page_writes, 3);
        assert_eq!(pool.stats().temp_pages_written, 3);
    }

    #[test]
    fn lru_prefers_least_recently_unpinned() {
        let (_d, mut pool, file) = pool_with_file(3, 0, 8, 8);
        let a = pool.get_page(file, 0, AccessMode::Random).unwrap();
        let b = pool.get_page(file, 1, AccessMode::Random).unwrap();
        let c = pool.get_page(file, 2, AccessMode::Random).unwrap();
        pool.unpin(&b).unwrap();
        pool.unpin(&a).unwrap();
        pool.unpin(&c).unwrap();
        let d = pool.get_page(file, 3, AccessMode::Random).unwrap();
        assert!(!pool.is_resident(file, 1));
        assert!(pool.is_resident(file, 0) && pool.is_resident(file, 2));
        pool.unpin(&d).unwrap();
    }

    #[derive(Debug, Clone)]
    enum Op {
        Get(u64, bool),
        Unpin(usize),
        Alloc,
        Release(usize),
    }

    fn op() -> impl Strategy<Value = Op> {
        prop_oneof![
            (0u64..24, any::<bool>()).prop_map(|(p, s)| Op::Get(p, s)),
            (0usize..8).prop_map(Op::Unpin),
            Just(Op::Alloc),
            (0usize..4).prop_map(Op::Release),
        ]
    }

    proptest! {
        #[test]
        fn pinned_pages_are_never_evicted(
            capacity in 3usize..7,
            window in 0u64..8,
            ops in proptest::collection::vec(op(), 1..120),
        ) {
            let (_d, mut pool, file) = pool_with_file(capacity, window, 24, 8);
            let mut held: Vec<PageHandle> = Vec::new();
            let mut outs: Vec<OutputFrame> = Vec::new();
            for op in ops {
                match op {
                    Op::Get(p, seq) => {
                        let mode = if seq { AccessMode::Sequential } else { AccessMode::Random };
                        match pool.get_page(file, p, mode) {
                            Ok(h) => {
                                prop_assert_eq!(pool.page(&h).slot(0).unwrap()[0], p as u8);
                                held.push(h);
                            }
                            Err(Error::PoolExhausted { .. }) => {
                                prop_assert_eq!(pool.pinned_frames(), capacity);
                            }
                            Err(e) => return Err(TestCaseError::fail(e.to_string())),
                        }
                    }
                    Op::Unpin(i) if i < held.len() => {
                        let h = held.swap_remove(i);
                        pool.unpin(&h).unwrap();
                    }
                    Op::Alloc => {
                        if let Ok(o) = pool.alloc_output(8) {
                            outs.push(o);
                        }
                    }
                    Op::Release(i) if i < outs.len() => pool.release_output(outs.swap_remove(i)),
                    _ => {}
                }
                prop_assert!(pool.resident_frames() <= capacity);
                for h in &held {
                    prop_assert!(pool.is_resident(h.file(), h.page_id()));
                    prop_assert_eq!(pool.page(h).slot(0).unwrap()[0], h.page_id() as u8);
                }
            }
        }
    }
}
