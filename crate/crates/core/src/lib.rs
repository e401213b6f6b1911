//! Buffer-bounded query evaluation over paged heap files.
//!
//! Every operator runs inside a [`buffer::BufferPool`] of M frames and
//! reports its page I/O. The main pieces:
//!
//! - [`storage`]: schemas, fixed-width tuple encoding, slotted pages, heap
//!   files, dense indexes and the catalog.
//! - [`buffer`]: the pool, with extent-aware read-ahead and I/O counters.
//! - [`sort`]: external merge sort (run generation plus binary merges).
//! - [`operators`]: scans and the duplicate-eliminating projections.
//! - [`engine`]: textual plans and their execution.
//! - [`db`]: a database directory tying the catalog to a pool.

pub mod buffer;
pub mod cli;
pub mod db;
pub mod engine;
pub mod error;
pub mod operators;
pub mod sort;
pub mod storage;
pub mod stream;

pub use db::{Database, DbOptions};
pub use error::{Error, Result};
