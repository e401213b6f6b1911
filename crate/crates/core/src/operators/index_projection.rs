use crate::buffer::BufferPool;
use crate::error::{Error, Result};
use crate::operators::{OperatorReport, StageClock};
use crate::storage::{HeapFile, IndexFile, Tuple};

/// Projection on a prefix of an index key: walk the leaves in order, keep
/// the first `prefix_len` key attributes and drop adjacent duplicates. The
/// base table is never read.
pub fn project_via_index(
    pool: &mut BufferPool,
    index: &IndexFile,
    prefix_len: usize,
) -> Result<(HeapFile, OperatorReport)> {
    let arity = index.key_schema().arity();
    if prefix_len == 0 || prefix_len > arity {
        return Err(Error::usage(format!(
            "prefix length {prefix_len} outside 1..={arity} for key ({})",
            index.key_attrs().join(", ")
        )));
    }
    let mut clock = StageClock::start(pool);
    let prefix: Vec<usize> = (0..prefix_len).collect();
    let schema = index.key_schema().select(&prefix)?;
    let output = HeapFile::create_temp(pool, schema)?;
    let mut writer = output.writer();
    let mut leaves = index.leaf_scan();
    let mut last: Option<Tuple> = None;
    let walked = (|| -> Result<()> {
        writer.reserve(pool)?;
        while let Some((key, _)) = leaves.next_entry(pool)? {
            let key = key.project(&prefix);
            if last.as_ref() == Some(&key) {
                continue;
            }
            writer.push(pool, &key)?;
            last = Some(key);
        }
        Ok(())
    })();
    crate::stream::TupleStream::close(&mut leaves, pool)?;
    if let Err(e) = walked {
        writer.abandon(pool).delete(pool)?;
        return Err(e);
    }
    let output = writer.finish(pool)?;
    let pages = output.page_count(pool)?;
    let report = OperatorReport {
        stages: vec![clock.mark(pool, "leaf_scan", pages)],
        ..OperatorReport::default()
    };
    Ok((output, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::test_support::*;
    use crate::storage::{build_index, Schema};
    use crate::tuple;
    use std::collections::BTreeSet;

    fn schema() -> Schema {
        Schema::parse("a:int,b:int,c:str4").unwrap()
    }

    #[test]
    fn single_key_index() {
        let (_d, mut pool) = pool(4, 3);
        let rows: Vec<_> = [3i64, 1, 2, 1].iter().map(|&a| tuple![a, 0i64, "z"]).collect();
        let f = file_of(&mut pool, &schema(), &rows);
        let ix = build_index(&mut pool, &f, &["a".into()], 4).unwrap();
        pool.reset_stats();
        let (out, _) = project_via_index(&mut pool, &ix, 1).unwrap();
        assert_eq!(
            out.read_all(&mut pool).unwrap(),
            vec![tuple![1i64], tuple![2i64], tuple![3i64]]
        );
        assert_eq!(pool.file_stats(f.id()).page_reads, 0);
    }

    #[test]
    fn leaves_are_read_once() {
        let (_d, mut pool) = pool(5, 7);
        let rows: Vec<_> = (0..2000i64).map(|i| tuple![i % 37, i, "z"]).collect();
        let f = file_of(&mut pool, &schema(), &rows);
        let ix = build_index(&mut pool, &f, &["a".into(), "b".into()], 5).unwrap();
        pool.clear_cache().unwrap();
        pool.reset_stats();
        project_via_index(&mut pool, &ix, 1).unwrap();
        assert_eq!(pool.file_stats(ix.file().id()).page_reads, ix.leaf_page_count(&pool).unwrap());
        assert_eq!(pool.file_stats(f.id()).page_reads, 0);
    }

    #[test]
    fn full_key_without_duplicates_is_the_leaf_sequence() {
        let (_d, mut pool) = pool(4, 3);
        let rows: Vec<_> = (0..300i64).rev().map(|i| tuple![i % 7, i, "z"]).collect();
        let f = file_of(&mut pool, &schema(), &rows);
        let ix = build_index(&mut pool, &f, &["a".into(), "b".into()], 4).unwrap();
        let mut leaves = ix.leaf_scan();
        let mut keys = Vec::new();
        while let Some((k, _)) = leaves.next_entry(&mut pool).unwrap() {
            keys.push(k);
        }
        let (out, _) = project_via_index(&mut pool, &ix, 2).unwrap();
        assert_eq!(out.read_all(&mut pool).unwrap(), keys);
    }

    #[test]
    fn composite_prefix_matches_distinct_column() {
        let (_d, mut pool) = pool(4, 3);
        let rows: Vec<_> = (0..2000i64)
            .map(|i| tuple![(i * 7919) % 113, i % 3, "z"])
            .collect();
        let f = file_of(&mut pool, &schema(), &rows);
        let ix = build_index(&mut pool, &f, &["a".into(), "b".into()], 4).unwrap();
        let (out, _) = project_via_index(&mut pool, &ix, 1).unwrap();
        let oracle: BTreeSet<_> = rows.iter().map(|r| r.project(&[0])).collect();
        assert_eq!(out.read_all(&mut pool).unwrap(), oracle.into_iter().collect::<Vec<_>>());
    }

    #[test]
    fn prefix_longer_than_key_is_usage_error() {
        let (_d, mut pool) = pool(4, 3);
        let f = file_of(&mut pool, &schema(), &[]);
        let ix = build_index(&mut pool, &f, &["a".into()], 4).unwrap();
        assert!(matches!(project_via_index(&mut pool, &ix, 2), Err(Error::Usage(_))));
        assert!(matches!(project_via_index(&mut pool, &ix, 0), Err(Error::Usage(_))));
    }
}
