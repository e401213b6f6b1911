//! Paged storage: tuple encoding, pages, extents, heap files, dense
//! indexes and the catalog.

pub mod catalog;
pub mod disk;
pub mod heap;
pub mod index;
pub mod page;
pub mod schema;

pub use catalog::{Catalog, CatalogEntry, IndexDescriptor};
pub use disk::{DiskManager, Extent, FileId};
pub use heap::{HeapFile, HeapScan, HeapWriter, Rid};
pub use index::{build_index, IndexFile, IndexScan};
pub use page::{tuples_per_page, Page, PageId};
pub use schema::{Attribute, DataType, Schema, Tuple, Value};
