//! Physical operators: scans, projection, and the duplicate-eliminating
//! projection strategies (sort, fused sort, hash, index leaves).

mod hash;
mod index_projection;
mod sort_projection;

use std::cmp::Ordering;

use serde::Serialize;

pub use hash::{hash_partition, partition_of, project_hash, HashPartitionSet, MAX_REPARTITION_DEPTH};
pub use index_projection::project_via_index;
pub use sort_projection::{project_sort_fused, project_sort_naive};

use crate::buffer::{BufferPool, IoStats};
use crate::error::{Error, Result};
use crate::storage::{HeapFile, HeapScan, Schema, Tuple};
use crate::stream::TupleStream;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectionSpec {
    names: Vec<String>,
    positions: Vec<usize>,
    output: Schema,
}

impl ProjectionSpec {
    pub fn new(input: &Schema, names: &[impl AsRef<str>]) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::schema("a projection keeps at least one attribute"));
        }
        let positions = input.resolve(names)?;
        // select() rejects repeated attributes
        let output = input.select(&positions)?;
        Ok(ProjectionSpec {
            names: names.iter().map(|n| n.as_ref().to_string()).collect(),
            positions,
            output,
        })
    }

    pub fn identity(input: &Schema) -> Self {
        ProjectionSpec {
            names: input.attributes().iter().map(|a| a.name.clone()).collect(),
            positions: (0..input.arity()).collect(),
            output: input.clone(),
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn output_schema(&self) -> &Schema {
        &self.output
    }

    pub fn apply(&self, tuple: &Tuple) -> Tuple {
        tuple.project(&self.positions)
    }
}

/// Cost checkpoint inside an operator, e.g. the three steps of the naive
/// sort projection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StageMarker {
    pub stage: String,
    pub stats: IoStats,
    /// Pages of the stage's result file.
    pub pages: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct OperatorReport {
    pub runs_created: usize,
    pub merge_passes: usize,
    /// T, the page count of the projected intermediate table.
    pub projected_pages: Option<u64>,
    pub partitions: Option<usize>,
    pub repartitions: usize,
    pub stages: Vec<StageMarker>,
}

pub(crate) struct StageClock {
    start: IoStats,
}

impl StageClock {
    pub fn start(pool: &BufferPool) -> Self {
        StageClock { start: pool.stats() }
    }

    pub fn mark(&mut self, pool: &BufferPool, stage: &str, pages: u64) -> StageMarker {
        let now = pool.stats();
        let marker = StageMarker {
            stage: stage.to_string(),
            stats: now - self.start,
            pages,
        };
        self.start = now;
        marker
    }
}

/// Sequential scan in storage order, with read-ahead.
pub fn seq_scan(file: &HeapFile) -> HeapScan {
    file.scan()
}

/// Per-tuple attribute restriction; keeps duplicates.
pub struct ProjectStream<S> {
    input: S,
    spec: ProjectionSpec,
}

pub fn project_stream<S: TupleStream>(input: S, spec: ProjectionSpec) -> ProjectStream<S> {
    ProjectStream { input, spec }
}

impl<S: TupleStream> TupleStream for ProjectStream<S> {
    fn schema(&self) -> &Schema {
        self.spec.output_schema()
    }

    fn next_tuple(&mut self, pool: &mut BufferPool) -> Result<Option<Tuple>> {
        Ok(self.input.next_tuple(pool)?.map(|t| self.spec.apply(&t)))
    }

    fn close(&mut self, pool: &mut BufferPool) -> Result<()> {
        self.input.close(pool)
    }
}

/// Drops a tuple equal to its predecessor. The input must be sorted in
/// full-tuple order; an inversion is reported rather than skipped.
pub struct DedupAdjacent<S> {
    input: S,
    last: Option<Tuple>,
}

pub fn dedup_adjacent<S: TupleStream>(input: S) -> DedupAdjacent<S> {
    DedupAdjacent { input, last: None }
}

impl<S: TupleStream> TupleStream for DedupAdjacent<S> {
    fn schema(&self) -> &Schema {
        self.input.schema()
    }

    fn next_tuple(&mut self, pool: &mut BufferPool) -> Result<Option<Tuple>> {
        while let Some(t) = self.input.next_tuple(pool)? {
            match self.last.as_ref().map(|last| t.cmp(last)) {
                Some(Ordering::Equal) => continue,
                Some(Ordering::Less) => {
                    return Err(Error::ContractViolation(format!(
                        "duplicate elimination input is not sorted: {t} follows {}",
                        self.last.as_ref().unwrap()
                    )))
                }
                _ => {
                    self.last = Some(t.clone());
                    return Ok(Some(t));
                }
            }
        }
        Ok(None)
    }

    fn close(&mut self, pool: &mut BufferPool) -> Result<()> {
        self.input.close(pool)
    }
}

/// Drains `input` into a fresh temporary heap file.
pub fn materialize<S: TupleStream + ?Sized>(pool: &mut BufferPool, input: &mut S) -> Result<HeapFile> {
    let file = HeapFile::create_temp(pool, input.schema().clone())?;
    let mut writer = file.writer();
    let drained = (|| -> Result<()> {
        writer.reserve(pool)?;
        while let Some(t) = input.next_tuple(pool)? {
            writer.push(pool, &t)?;
        }
        Ok(())
    })();
    let closed = input.close(pool);
    if let Err(e) = drained.and(closed) {
        writer.abandon(pool).delete(pool)?;
        return Err(e);
    }
    writer.finish(pool)
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use crate::storage::DiskManager;

    pub fn pool(m: usize, window: u64) -> (tempfile::TempDir, BufferPool) {
        let dir = tempfile::tempdir().unwrap();
        let disk = DiskManager::new(dir.path().join("tmp"), 512, 8);
        (dir, BufferPool::new(disk, m, window).unwrap())
    }

    pub fn file_of(pool: &mut BufferPool, schema: &Schema, rows: &[Tuple]) -> HeapFile {
        let f = HeapFile::create_temp(pool, schema.clone()).unwrap();
        let mut w = f.writer();
        for r in rows {
            w.push(pool, r).unwrap();
        }
        w.finish(pool).unwrap()
    }
}
