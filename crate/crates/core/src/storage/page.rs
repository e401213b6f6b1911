//! Page layout.
//!
//! ```text
//! offset 0   u32 LE  slot_count
//! offset 4   u32 LE  tuple width in bytes
//! offset 8   slot 0, slot 1, ... each `width` bytes
//! ```
//!
//! Tuples are fixed width, so the slot directory is implicit: slot `i`
//! starts at `HEADER + i * width`. Bytes past the last slot are zero.

use crate::error::{Error, Result};

pub const PAGE_HEADER: usize = 8;
pub const DEFAULT_PAGE_SIZE: usize = 4096;
pub const MIN_PAGE_SIZE: usize = 512;

pub type PageId = u64;

/// Number of `width`-byte tuples a page of `page_size` bytes holds.
pub fn tuples_per_page(page_size: usize, width: usize) -> usize {
    page_size.saturating_sub(PAGE_HEADER) / width.max(1)
}

#[derive(Clone, PartialEq, Eq)]
pub struct Page {
    data: Box<[u8]>,
}

impl std::fmt::Debug for Page {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Page")
            .field("size", &self.data.len())
            .field("slot_count", &self.slot_count())
            .finish()
    }
}

impl Page {
    pub fn new(page_size: usize) -> Self {
        Page {
            data: vec![0; page_size].into_boxed_slice(),
        }
    }

    pub fn from_bytes(bytes: &[u8]) -> Self {
        Page {
            data: bytes.into(),
        }
    }

    pub fn bytes(&self) -> &[u8] {
        &self.data
    }

    pub fn size(&self) -> usize {
        self.data.len()
    }

    pub fn slot_count(&self) -> usize {
        u32::from_le_bytes(self.data[0..4].try_into().unwrap()) as usize
    }

    pub fn tuple_width(&self) -> usize {
        u32::from_le_bytes(self.data[4..8].try_into().unwrap()) as usize
    }

    pub fn capacity(&self, width: usize) -> usize {
        tuples_per_page(self.size(), width)
    }

    pub fn reset(&mut self, width: usize) {
        self.data.fill(0);
        self.data[4..8].copy_from_slice(&(width as u32).to_le_bytes());
    }

    pub fn is_full(&self, width: usize) -> bool {
        self.slot_count() >= self.capacity(width)
    }

    /// Checks the header against the expected tuple width.
    pub fn validate(&self, width: usize) -> Result<()> {
        let slots = self.slot_count();
        if slots == 0 && self.tuple_width() == 0 {
            return Ok(());
        }
        if self.tuple_width() != width {
            return Err(Error::storage(format!(
                "page holds {}-byte tuples, schema expects {width}",
                self.tuple_width()
            )));
        }
        if slots > self.capacity(width) {
            return Err(Error::storage(format!(
                "page claims {slots} slots, room for {}",
                self.capacity(width)
            )));
        }
        Ok(())
    }

    pub fn slot(&self, slot: usize) -> Option<&[u8]> {
        let width = self.tuple_width();
        if slot >= self.slot_count() {
            return None;
        }
        let at = PAGE_HEADER + slot * width;
        self.data.get(at..at + width)
    }

    /// Reserves the next slot and returns its index and bytes, or `None`
    /// when the page is full.
    pub fn push_slot(&mut self, width: usize) -> Option<(usize, &mut [u8])> {
        let slots = self.slot_count();
        if slots == 0 {
            self.data[4..8].copy_from_slice(&(width as u32).to_le_bytes());
        }
        if slots >= self.capacity(width) {
            return None;
        }
        self.data[0..4].copy_from_slice(&((slots + 1) as u32).to_le_bytes());
        let at = PAGE_HEADER + slots * width;
        Some((slots, &mut self.data[at..at + width]))
    }
}
