//! Pull-based tuple streams. The buffer pool is passed to every call
//! rather than captured, so several streams can share one pool.

use crate::buffer::BufferPool;
use crate::error::Result;
use crate::storage::{Schema, Tuple};

pub trait TupleStream {
    fn schema(&self) -> &Schema;

    fn next_tuple(&mut self, pool: &mut BufferPool) -> Result<Option<Tuple>>;

    /// Releases any pinned page. Exhausted streams have already done so.
    fn close(&mut self, pool: &mut BufferPool) -> Result<()>;

    fn collect_all(&mut self, pool: &mut BufferPool) -> Result<Vec<Tuple>> {
        let mut out = Vec::new();
        while let Some(t) = self.next_tuple(pool)? {
            out.push(t);
        }
        Ok(out)
    }
}

impl<S: TupleStream + ?Sized> TupleStream for Box<S> {
    fn schema(&self) -> &Schema {
        (**self).schema()
    }

    fn next_tuple(&mut self, pool: &mut BufferPool) -> Result<Option<Tuple>> {
        (**self).next_tuple(pool)
    }

    fn close(&mut self, pool: &mut BufferPool) -> Result<()> {
        (**self).close(pool)
    }
}

/// A stream over tuples already in memory.
#[derive(Debug)]
pub struct VecStream {
    schema: Schema,
    tuples: std::vec::IntoIter<Tuple>,
}

impl VecStream {
    pub fn new(schema: Schema, tuples: Vec<Tuple>) -> Self {
        VecStream {
            schema,
            tuples: tuples.into_iter(),
        }
    }
}

impl TupleStream for VecStream {
    fn schema(&self) -> &Schema {
        &self.schema
    }

    fn next_tuple(&mut self, _pool: &mut BufferPool) -> Result<Option<Tuple>> {
        Ok(self.tuples.next())
    }

    fn close(&mut self, _pool: &mut BufferPool) -> Result<()> {
        Ok(())
    }
}
