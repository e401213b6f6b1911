//! Projection by hashing.
//!
//! Phase 1 scans the table through one input frame, projects each tuple
//! and appends it to one of M-1 partitions chosen by `h(t) ∈ 1..=M-1`,
//! each partition buffered in its own output frame. Equal tuples hash
//! alike, so phase 2 can eliminate duplicates one partition at a time
//! with an in-memory hash set sized to M-1 pages. A partition whose
//! distinct tuples overflow that set is partitioned again under a fresh
//! seed, at most `MAX_REPARTITION_DEPTH` levels deep.

use indexmap::IndexSet;
use twox_hash::XxHash64;

use crate::buffer::BufferPool;
use crate::error::{Error, Result};
use crate::operators::{OperatorReport, ProjectionSpec, StageClock};
use crate::sort::check_budget;
use crate::storage::{tuples_per_page, HeapFile, HeapWriter, Schema, Tuple};
use crate::stream::TupleStream;

pub const MAX_REPARTITION_DEPTH: usize = 4;

/// Partition number in `1..=fanout` of an already projected tuple: a
/// seeded 64-bit hash of its canonical encoding, folded by modulo.
pub fn partition_of(schema: &Schema, tuple: &Tuple, seed: u64, fanout: usize) -> Result<usize> {
    let bytes = schema.encode(tuple)?;
    Ok((XxHash64::oneshot(seed, &bytes) % fanout as u64) as usize + 1)
}

fn derive_seed(seed: u64, depth: usize) -> u64 {
    seed ^ (depth as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

#[derive(Debug)]
pub struct HashPartitionSet {
    /// `partitions[i]` holds the tuples with `h(t) == i + 1`.
    pub partitions: Vec<HeapFile>,
    pub seed: u64,
    pub schema: Schema,
}

impl HashPartitionSet {
    pub fn fanout(&self) -> usize {
        self.partitions.len()
    }

    pub fn partition_of(&self, tuple: &Tuple) -> Result<usize> {
        partition_of(&self.schema, tuple, self.seed, self.fanout())
    }

    pub fn delete(self, pool: &mut BufferPool) -> Result<()> {
        for p in self.partitions {
            p.delete(pool)?;
        }
        Ok(())
    }
}

/// Phase 1: one input frame, M-1 output frames, M-1 partitions.
pub fn hash_partition(
    pool: &mut BufferPool,
    input: &HeapFile,
    spec: &ProjectionSpec,
    m: usize,
    seed: u64,
) -> Result<HashPartitionSet> {
    check_budget(pool, m)?;
    let schema = spec.output_schema().clone();
    let fanout = m - 1;
    let mut writers: Vec<HeapWriter> = Vec::with_capacity(fanout);
    for _ in 0..fanout {
        match HeapFile::create_temp(pool, schema.clone()) {
            Ok(f) => writers.push(f.writer()),
            Err(e) => {
                for w in writers {
                    w.abandon(pool).delete(pool)?;
                }
                return Err(e);
            }
        }
    }

    let mut scan = input.scan();
    let filled = (|| -> Result<()> {
        for w in writers.iter_mut() {
            w.reserve(pool)?;
        }
        while let Some(t) = scan.next_tuple(pool)? {
            let t = spec.apply(&t);
            let h = partition_of(&schema, &t, seed, fanout)?;
            writers[h - 1].push(pool, &t)?;
        }
        Ok(())
    })();
    scan.close(pool)?;

    let mut partitions = Vec::with_capacity(fanout);
    let mut failure = filled.err();
    for w in writers {
        if failure.is_none() {
            match w.finish(pool) {
                Ok(f) => partitions.push(f),
                Err(e) => failure = Some(e),
            }
        } else {
            w.abandon(pool).delete(pool)?;
        }
    }
    if let Some(e) = failure {
        for p in partitions {
            p.delete(pool)?;
        }
        return Err(e);
    }
    Ok(HashPartitionSet {
        partitions,
        seed,
        schema,
    })
}

/// Distinct projected tuples, partition by partition; within a partition
/// in arrival order. Callers should not rely on the order.
pub fn project_hash(
    pool: &mut BufferPool,
    input: &HeapFile,
    spec: &ProjectionSpec,
    m: usize,
    seed: u64,
) -> Result<(HeapFile, OperatorReport)> {
    let mut clock = StageClock::start(pool);
    let mut report = OperatorReport::default();

    let set = hash_partition(pool, input, spec, m, seed)?;
    report.partitions = Some(set.fanout());
    let partition_pages = set
        .partitions
        .iter()
        .map(|p| p.page_count(pool))
        .sum::<Result<u64>>()?;
    report.stages.push(clock.mark(pool, "partition", partition_pages));

    let output = HeapFile::create_temp(pool, set.schema.clone())?;
    let mut writer = output.writer();
    let capacity = (m - 1) * tuples_per_page(pool.page_size(), set.schema.tuple_width());
    let mut pending = set.partitions.into_iter();
    let mut result = Ok(());
    for partition in pending.by_ref() {
        result = dedup_partition(pool, partition, m, seed, 0, capacity, &mut writer, &mut report);
        if result.is_err() {
            break;
        }
    }
    for p in pending {
        p.delete(pool)?;
    }
    if let Err(e) = result {
        writer.abandon(pool).delete(pool)?;
        return Err(e);
    }
    let output = writer.finish(pool)?;
    let pages = output.page_count(pool)?;
    report.stages.push(clock.mark(pool, "deduplicate", pages));
    Ok((output, report))
}

/// Phase 2 for one partition. Consumes (deletes) the partition file.
#[allow(clippy::too_many_arguments)]
fn dedup_partition(
    pool: &mut BufferPool,
    partition: HeapFile,
    m: usize,
    seed: u64,
    depth: usize,
    capacity: usize,
    writer: &mut HeapWriter,
    report: &mut OperatorReport,
) -> Result<()> {
    let mut distinct: IndexSet<Tuple> = IndexSet::new();
    let mut scan = partition.scan();
    let mut overflow = false;
    let read = (|| -> Result<()> {
        while let Some(t) = scan.next_tuple(pool)? {
            distinct.insert(t);
            if distinct.len() > capacity {
                overflow = true;
                break;
            }
        }
        Ok(())
    })();
    scan.close(pool)?;
    if let Err(e) = read {
        partition.delete(pool)?;
        return Err(e);
    }

    if !overflow {
        partition.delete(pool)?;
        for t in &distinct {
            writer.push(pool, t)?;
        }
        return Ok(());
    }

    drop(distinct);
    if depth >= MAX_REPARTITION_DEPTH {
        partition.delete(pool)?;
        return Err(Error::PathologicalData(format!(
            "a partition still exceeds {} distinct tuples after {depth} re-partitionings",
            capacity
        )));
    }
    // Re-partitioning needs all M frames.
    writer.suspend(pool)?;
    report.repartitions += 1;
    let identity = ProjectionSpec::identity(partition.schema());
    let sub = hash_partition(pool, &partition, &identity, m, derive_seed(seed, depth + 1));
    partition.delete(pool)?;
    let mut pending = sub?.partitions.into_iter();
    for p in pending.by_ref() {
        if let Err(e) = dedup_partition(pool, p, m, seed, depth + 1, capacity, writer, report) {
            for rest in pending {
                rest.delete(pool)?;
            }
            return Err(e);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::project_sort_naive;
    use crate::operators::test_support::*;
    use crate::tuple;
    use rand::{Rng, SeedableRng};

    fn schema() -> Schema {
        Schema::parse("a:int,b:str8,c:int").unwrap()
    }

    #[test]
    fn empty_table_gives_m_minus_one_empty_partitions() {
        let (_d, mut pool) = pool(5, 0);
        let f = file_of(&mut pool, &schema(), &[]);
        let spec = ProjectionSpec::new(&schema(), &["a"]).unwrap();
        let set = hash_partition(&mut pool, &f, &spec, 5, 1).unwrap();
        assert_eq!(set.fanout(), 4);
        for p in &set.partitions {
            assert_eq!(p.page_count(&pool).unwrap(), 0);
        }
    }

    #[test]
    fn equal_rows_share_a_partition() {
        let (_d, mut pool) = pool(5, 0);
        let f = file_of(&mut pool, &schema(), &[tuple![1i64, "x", 2i64], tuple![1i64, "x", 2i64]]);
        let spec = ProjectionSpec::identity(&schema());
        let set = hash_partition(&mut pool, &f, &spec, 5, 3).unwrap();
        let sizes: Vec<_> = set
            .partitions
            .iter()
            .map(|p| p.read_all(&mut pool).unwrap().len())
            .collect();
        assert_eq!(sizes.iter().sum::<usize>(), 2);
        assert!(sizes.contains(&2));
    }

    #[test]
    fn placements_match_recomputed_hash() {
        let (_d, mut pool) = pool(5, 2);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<_> = (0..10_000)
            .map(|_| tuple![rng.random_range(0..300i64), "k", rng.random_range(0..3i64)])
            .collect();
        let f = file_of(&mut pool, &schema(), &rows);
        let spec = ProjectionSpec::new(&schema(), &["c", "a"]).unwrap();
        pool.reset_peak_pinned();
        let set = hash_partition(&mut pool, &f, &spec, 5, 42).unwrap();
        assert!(pool.peak_pinned() <= 5);
        let mut union = Vec::new();
        for (i, p) in set.partitions.iter().enumerate() {
            for t in p.read_all(&mut pool).unwrap() {
                assert_eq!(partition_of(&set.schema, &t, 42, 4).unwrap(), i + 1);
                union.push(t);
            }
        }
        let mut projected: Vec<_> = rows.iter().map(|r| spec.apply(r)).collect();
        projected.sort();
        union.sort();
        assert_eq!(union, projected);
    }

    #[test]
    fn identical_rows_collapse_without_repartitioning() {
        let (_d, mut pool) = pool(3, 0);
        let rows = vec![tuple![7i64, "dup", 7i64]; 5000];
        let f = file_of(&mut pool, &schema(), &rows);
        let spec = ProjectionSpec::identity(&schema());
        let (out, report) = project_hash(&mut pool, &f, &spec, 3, 0).unwrap();
        assert_eq!(out.read_all(&mut pool).unwrap(), vec![tuple![7i64, "dup", 7i64]]);
        assert_eq!(report.repartitions, 0);
    }

    #[test]
    fn overflowing_partitions_are_repartitioned() {
        let (_d, mut pool) = pool(5, 0);
        // 4 frames of 19 tuples hold 76 distinct tuples; each of the 4
        // partitions gets about 150.
        let rows: Vec<_> = (0..3000i64).map(|i| tuple![i % 600, "v", 0i64]).collect();
        let f = file_of(&mut pool, &schema(), &rows);
        let spec = ProjectionSpec::identity(&schema());
        pool.reset_peak_pinned();
        let (out, report) = project_hash(&mut pool, &f, &spec, 5, 9).unwrap();
        assert!(report.repartitions > 0);
        assert!(pool.peak_pinned() <= 5);
        let mut got = out.read_all(&mut pool).unwrap();
        got.sort();
        let (naive, _) = project_sort_naive(&mut pool, &f, &spec, 3).unwrap();
        assert_eq!(got, naive.read_all(&mut pool).unwrap());
    }

    #[test]
    fn too_many_distinct_tuples_is_pathological() {
        let (_d, mut pool) = pool(3, 0);
        // capacity 2 pages * 19 tuples; 2^4 sub-partitions per path cannot
        // bring 20_000 distinct tuples under 38.
        let rows: Vec<_> = (0..20_000i64).map(|i| tuple![i, "v", 0i64]).collect();
        let f = file_of(&mut pool, &schema(), &rows);
        let spec = ProjectionSpec::identity(&schema());
        let err = project_hash(&mut pool, &f, &spec, 3, 1).unwrap_err();
        assert!(matches!(err, Error::PathologicalData(_)), "{err}");
        assert_eq!(pool.pinned_frames(), 0);
        // only the input is left in the temp area
        assert_eq!(pool.disk().open_temp_files(), vec![f.id()]);
    }
}
