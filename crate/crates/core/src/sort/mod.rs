//! External merge sort under an M-frame budget.
//!
//! Phase 1 reads the input M pages at a time, sorts the tuples of each
//! chunk in memory with quicksort and writes them out as a run, giving
//! ⌈B/M⌉ runs. Phase 2 merges runs two at a time with three frames (two
//! inputs, one output), left to right in creation order, carrying an odd
//! run over to the next pass, until one run is left: ⌈log₂ R⌉ passes for
//! R initial runs.
//!
//! When the sort also projects, run generation streams the input through
//! one frame and cuts a run each time M pages of projected tuples have
//! accumulated, so the run count is ⌈T/M⌉ for a T-page projection.

mod quicksort;

use std::cmp::Ordering;

pub use quicksort::quicksort;

use crate::buffer::{AccessMode, BufferPool, MIN_FRAMES};
use crate::error::{Error, Result};
use crate::storage::{tuples_per_page, HeapFile, Schema, Tuple};
use crate::stream::TupleStream;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SortKey {
    names: Vec<String>,
    positions: Vec<usize>,
}

impl SortKey {
    pub fn new(schema: &Schema, names: &[impl AsRef<str>]) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::schema("sort key needs at least one attribute"));
        }
        let positions = schema.resolve(names)?;
        Ok(SortKey {
            names: names.iter().map(|n| n.as_ref().to_string()).collect(),
            positions,
        })
    }

    /// Every attribute in declaration order: the full-tuple order.
    pub fn all(schema: &Schema) -> Self {
        SortKey {
            names: schema.attributes().iter().map(|a| a.name.clone()).collect(),
            positions: (0..schema.arity()).collect(),
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn compare(&self, a: &Tuple, b: &Tuple) -> Ordering {
        a.cmp_on(b, &self.positions)
    }
}

/// A sorted temporary heap file.
#[derive(Debug, Clone)]
pub struct Run {
    pub file: HeapFile,
    pub page_count: u64,
    pub key: SortKey,
}

impl Run {
    pub fn delete(self, pool: &mut BufferPool) -> Result<()> {
        self.file.delete(pool)
    }
}

#[derive(Debug)]
pub struct SortOutcome {
    pub file: HeapFile,
    pub runs_created: usize,
    pub merge_passes: usize,
    /// Pages written by run generation.
    pub run_pages: u64,
    /// Pages written by each merge pass.
    pub pass_pages: Vec<u64>,
}

/// How run generation turns input tuples into run tuples.
#[derive(Debug, Clone, Default)]
pub(crate) struct RunShaping {
    /// Attribute positions kept from each input tuple, with the resulting
    /// schema. `None` keeps tuples whole.
    pub projection: Option<(Vec<usize>, Schema)>,
    /// Drop a tuple equal to the previous one written.
    pub dedup: bool,
}

pub(crate) fn check_budget(pool: &BufferPool, m: usize) -> Result<()> {
    if m < MIN_FRAMES {
        return Err(Error::usage(format!("M must be at least {MIN_FRAMES}, got {m}")));
    }
    if m > pool.capacity() {
        return Err(Error::usage(format!(
            "M = {m} exceeds the {}-frame pool",
            pool.capacity()
        )));
    }
    Ok(())
}

/// Phase 1: splits `input` into ⌈B/M⌉ sorted runs of at most M pages.
pub fn generate_runs(pool: &mut BufferPool, input: &HeapFile, key: &SortKey, m: usize) -> Result<Vec<Run>> {
    generate_runs_shaped(pool, input, key, m, &RunShaping::default())
}

pub(crate) fn generate_runs_shaped(
    pool: &mut BufferPool,
    input: &HeapFile,
    key: &SortKey,
    m: usize,
    shaping: &RunShaping,
) -> Result<Vec<Run>> {
    check_budget(pool, m)?;
    if let Some((positions, schema)) = &shaping.projection {
        return generate_projected_runs(pool, input, key, m, positions, schema, shaping.dedup);
    }
    let page_count = input.page_count(pool)?;
    let mut runs = Vec::new();
    let mut first = 0;
    while first < page_count {
        let last = (first + m as u64).min(page_count);
        let mut tuples = Vec::new();
        let mut handles = Vec::with_capacity(m);
        let mut loaded = Ok(());
        for page_id in first..last {
            match pool.get_page(input.id(), page_id, AccessMode::Sequential) {
                Ok(h) => handles.push(h),
                Err(e) => {
                    loaded = Err(e);
                    break;
                }
            }
        }
        if loaded.is_ok() {
            loaded = decode_pages(pool, input, &handles, &mut tuples);
        }
        for h in &handles {
            pool.unpin(h)?;
        }
        loaded?;
        runs.push(write_run(pool, input.schema(), tuples, key, shaping.dedup)?);
        first = last;
    }
    Ok(runs)
}

/// Run generation with projection: input pages pass through one frame
/// and their projected tuples fill a workspace of M output pages, so runs
/// are cut exactly where a sort of the projected table would cut them.
fn generate_projected_runs(
    pool: &mut BufferPool,
    input: &HeapFile,
    key: &SortKey,
    m: usize,
    positions: &[usize],
    schema: &Schema,
    dedup: bool,
) -> Result<Vec<Run>> {
    let workspace = m * tuples_per_page(pool.page_size(), schema.tuple_width());
    let mut runs = Vec::new();
    let mut tuples = Vec::with_capacity(workspace);
    let mut scan = input.scan();
    let result = (|| -> Result<()> {
        while let Some(t) = scan.next_tuple(pool)? {
            tuples.push(t.project(positions));
            if tuples.len() == workspace {
                let full = std::mem::replace(&mut tuples, Vec::with_capacity(workspace));
                runs.push(write_run(pool, schema, full, key, dedup)?);
            }
        }
        if !tuples.is_empty() {
            runs.push(write_run(pool, schema, std::mem::take(&mut tuples), key, dedup)?);
        }
        Ok(())
    })();
    scan.close(pool)?;
    if let Err(e) = result {
        for run in runs {
            run.delete(pool)?;
        }
        return Err(e);
    }
    Ok(runs)
}

fn write_run(pool: &mut BufferPool, schema: &Schema, mut tuples: Vec<Tuple>, key: &SortKey, dedup: bool) -> Result<Run> {
    quicksort(&mut tuples, |a, b| key.compare(a, b));
    let file = HeapFile::create_temp(pool, schema.clone())?;
    let mut writer = file.writer();
    let mut last_written: Option<&Tuple> = None;
    for t in &tuples {
        if dedup && last_written == Some(t) {
            continue;
        }
        if let Err(e) = writer.push(pool, t) {
            writer.abandon(pool).delete(pool)?;
            return Err(e);
        }
        last_written = Some(t);
    }
    let file = writer.finish(pool)?;
    Ok(Run {
        page_count: file.page_count(pool)?,
        file,
        key: key.clone(),
    })
}

fn decode_pages(
    pool: &BufferPool,
    input: &HeapFile,
    handles: &[crate::buffer::PageHandle],
    out: &mut Vec<Tuple>,
) -> Result<()> {
    for h in handles {
        let page = pool.page(h);
        page.validate(input.tuple_width())?;
        for slot in 0..page.slot_count() {
            out.push(input.schema().decode(page.slot(slot).unwrap())?);
        }
    }
    Ok(())
}

/// One input of a merge: a run scan plus the eof convention (an exhausted
/// input compares after every live tuple).
struct MergeInput<'a> {
    scan: crate::storage::HeapScan,
    head: Option<Tuple>,
    key: &'a SortKey,
    label: &'static str,
}

impl<'a> MergeInput<'a> {
    fn open(pool: &mut BufferPool, run: &Run, key: &'a SortKey, label: &'static str) -> Result<Self> {
        let mut scan = run.file.scan();
        let head = scan.next_tuple(pool)?;
        Ok(MergeInput {
            scan,
            head,
            key,
            label,
        })
    }

    fn advance(&mut self, pool: &mut BufferPool) -> Result<Tuple> {
        let next = self.scan.next_tuple(pool)?;
        if let (Some(prev), Some(next)) = (&self.head, &next) {
            if self.key.compare(next, prev) == Ordering::Less {
                return Err(Error::ContractViolation(format!(
                    "merge input {} is not sorted: {next} follows {prev}",
                    self.label
                )));
            }
        }
        Ok(std::mem::replace(&mut self.head, next).expect("advance on a live input"))
    }
}

/// `a` strictly before `b`, with eof after everything.
fn before(a: &Option<Tuple>, b: &Option<Tuple>, key: &SortKey) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => key.compare(x, y) == Ordering::Less,
        (Some(_), None) => true,
        (None, _) => false,
    }
}

/// Merges two sorted runs with three frames: one per input, one for the
/// output. Both inputs are deleted once the merged run is complete.
pub fn merge_two_runs(pool: &mut BufferPool, a: Run, b: Run) -> Result<Run> {
    merge_runs(pool, a, b, false)
}

pub(crate) fn merge_runs(pool: &mut BufferPool, a: Run, b: Run, dedup: bool) -> Result<Run> {
    if a.file.schema() != b.file.schema() {
        return Err(Error::schema("merged runs must share a schema"));
    }
    let key = a.key.clone();
    let out = HeapFile::create_temp(pool, a.file.schema().clone())?;
    let mut writer = out.writer();
    let result = merge_into(pool, &a, &b, &key, dedup, &mut writer);
    if let Err(e) = result {
        let file = writer.abandon(pool);
        file.delete(pool)?;
        return Err(e);
    }
    let out = writer.finish(pool)?;
    a.delete(pool)?;
    b.delete(pool)?;
    Ok(Run {
        page_count: out.page_count(pool)?,
        file: out,
        key,
    })
}

fn merge_into(
    pool: &mut BufferPool,
    a: &Run,
    b: &Run,
    key: &SortKey,
    dedup: bool,
    writer: &mut crate::storage::HeapWriter,
) -> Result<()> {
    let mut left = MergeInput::open(pool, a, key, "A")?;
    let mut right = match MergeInput::open(pool, b, key, "B") {
        Ok(r) => r,
        Err(e) => {
            left.scan.close(pool)?;
            return Err(e);
        }
    };
    let mut last: Option<Tuple> = None;
    let mut step = || -> Result<()> {
        while left.head.is_some() || right.head.is_some() {
            let t = if before(&left.head, &right.head, key) {
                left.advance(pool)?
            } else {
                right.advance(pool)?
            };
            if dedup && last.as_ref() == Some(&t) {
                continue;
            }
            writer.push(pool, &t)?;
            last = Some(t);
        }
        Ok(())
    };
    let result = step();
    left.scan.close(pool)?;
    right.scan.close(pool)?;
    result
}

/// Sorts `input` by `key` with at most `m` frames. The input is left in
/// place; the result is a temporary file owned by the caller.
pub fn external_sort(pool: &mut BufferPool, input: &HeapFile, key: &SortKey, m: usize) -> Result<SortOutcome> {
    sort_shaped(pool, input, key, m, &RunShaping::default())
}

pub(crate) fn sort_shaped(
    pool: &mut BufferPool,
    input: &HeapFile,
    key: &SortKey,
    m: usize,
    shaping: &RunShaping,
) -> Result<SortOutcome> {
    let before_runs = pool.stats();
    let mut runs = generate_runs_shaped(pool, input, key, m, shaping)?;
    let run_pages = (pool.stats() - before_runs).page_writes;
    let runs_created = runs.len();
    let mut pass_pages = Vec::new();

    while runs.len() > 1 {
        let before_pass = pool.stats();
        let mut merged = Vec::with_capacity(runs.len().div_ceil(2));
        let mut pending = runs.into_iter();
        loop {
            match (pending.next(), pending.next()) {
                (Some(a), Some(b)) => merged.push(merge_runs(pool, a, b, shaping.dedup)?),
                (Some(odd), None) => merged.push(odd),
                _ => break,
            }
        }
        pass_pages.push((pool.stats() - before_pass).page_writes);
        runs = merged;
    }

    let file = match runs.pop() {
        Some(run) => run.file,
        None => {
            let schema = match &shaping.projection {
                Some((_, s)) => s.clone(),
                None => input.schema().clone(),
            };
            HeapFile::create_temp(pool, schema)?
        }
    };
    Ok(SortOutcome {
        file,
        runs_created,
        merge_passes: pass_pages.len(),
        run_pages,
        pass_pages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::storage::disk::DiskManager;
    use crate::tuple;

    fn setup(m: usize, window: u64) -> (tempfile::TempDir, BufferPool) {
        let dir = tempfile::tempdir().unwrap();
        let disk = DiskManager::new(dir.path().join("tmp"), 512, 8);
        (dir, BufferPool::new(disk, m, window).unwrap())
    }

    fn ints() -> Schema {
        Schema::parse("k:int").unwrap()
    }

    fn file_of(pool: &mut BufferPool, schema: &Schema, rows: &[Tuple]) -> HeapFile {
        let f = HeapFile::create_temp(pool, schema.clone()).unwrap();
        let mut w = f.writer();
        for r in rows {
            w.push(pool, r).unwrap();
        }
        w.finish(pool).unwrap()
    }

    fn run_of(pool: &mut BufferPool, keys: &[i64]) -> Run {
        let rows: Vec<_> = keys.iter().map(|&k| tuple![k]).collect();
        let file = file_of(pool, &ints(), &rows);
        Run {
            page_count: file.page_count(pool).unwrap(),
            file,
            key: SortKey::all(&ints()),
        }
    }

    #[test]
    fn empty_input_has_no_runs() {
        let (_d, mut pool) = setup(4, 0);
        let f = file_of(&mut pool, &ints(), &[]);
        let key = SortKey::all(&ints());
        assert!(generate_runs(&mut pool, &f, &key, 4).unwrap().is_empty());
        let out = external_sort(&mut pool, &f, &key, 4).unwrap();
        assert_eq!(out.merge_passes, 0);
        assert_eq!(out.file.page_count(&pool).unwrap(), 0);
    }

    #[test]
    fn ten_pages_four_frames_gives_runs_of_4_4_2() {
        let (_d, mut pool) = setup(4, 0);
        let rows: Vec<_> = (0..630i64).rev().map(|i| tuple![i]).collect();
        let f = file_of(&mut pool, &ints(), &rows);
        assert_eq!(f.page_count(&pool).unwrap(), 10);
        let key = SortKey::all(&ints());
        let runs = generate_runs(&mut pool, &f, &key, 4).unwrap();
        let sizes: Vec<_> = runs.iter().map(|r| r.page_count).collect();
        assert_eq!(sizes, vec![4, 4, 2]);
        for r in &runs {
            let got = r.file.read_all(&mut pool).unwrap();
            assert!(got.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn single_run_needs_no_merge() {
        let (_d, mut pool) = setup(4, 0);
        let rows: Vec<_> = (0..100i64).map(|i| tuple![i]).collect();
        let f = file_of(&mut pool, &ints(), &rows);
        let out = external_sort(&mut pool, &f, &SortKey::all(&ints()), 4).unwrap();
        assert_eq!((out.runs_created, out.merge_passes), (1, 0));
        assert_eq!(out.file.read_all(&mut pool).unwrap(), rows);
    }

    #[test]
    fn merge_interleaves() {
        let (_d, mut pool) = setup(3, 0);
        let a = run_of(&mut pool, &[1, 3, 5]);
        let b = run_of(&mut pool, &[2, 4]);
        let out = merge_two_runs(&mut pool, a, b).unwrap();
        let keys: Vec<_> = out.file.read_all(&mut pool).unwrap();
        assert_eq!(keys, (1..=5i64).map(|k| tuple![k]).collect::<Vec<_>>());
        assert_eq!(pool.pinned_frames(), 0);
    }

    #[test]
    fn merge_with_empty_copies_through() {
        let (_d, mut pool) = setup(3, 0);
        let a = run_of(&mut pool, &[4, 4, 9]);
        let b = run_of(&mut pool, &[]);
        let out = merge_two_runs(&mut pool, a, b).unwrap();
        assert_eq!(
            out.file.read_all(&mut pool).unwrap(),
            vec![tuple![4i64], tuple![4i64], tuple![9i64]]
        );
        let a = run_of(&mut pool, &[]);
        let b = run_of(&mut pool, &[]);
        let out = merge_two_runs(&mut pool, a, b).unwrap();
        assert_eq!(out.page_count, 0);
    }

    #[test]
    fn unsorted_merge_input_is_rejected() {
        let (_d, mut pool) = setup(3, 0);
        let a = run_of(&mut pool, &[1, 5, 2]);
        let b = run_of(&mut pool, &[3]);
        let err = merge_two_runs(&mut pool, a, b).unwrap_err();
        assert!(matches!(err, Error::ContractViolation(_)), "{err}");
        assert_eq!(pool.pinned_frames(), 0);
    }

    #[test]
    fn merge_uses_three_frames() {
        let (_d, mut pool) = setup(8, 7);
        let a = run_of(&mut pool, &(0..500).map(|i| i * 2).collect::<Vec<_>>());
        let b = run_of(&mut pool, &(0..500).map(|i| i * 2 + 1).collect::<Vec<_>>());
        pool.clear_cache().unwrap();
        pool.reset_peak_pinned();
        let out = merge_two_runs(&mut pool, a, b).unwrap();
        assert!(pool.peak_pinned() <= 3);
        assert_eq!(out.file.read_all(&mut pool).unwrap().len(), 1000);
    }

    #[test]
    fn pass_count_and_io_for_ten_pages() {
        let (_d, mut pool) = setup(4, 0);
        let rows: Vec<_> = (0..630i64).map(|i| tuple![(i * 37) % 101]).collect();
        let f = file_of(&mut pool, &ints(), &rows);
        pool.clear_cache().unwrap();
        pool.reset_stats();
        let out = external_sort(&mut pool, &f, &SortKey::all(&ints()), 4).unwrap();
        assert_eq!((out.runs_created, out.merge_passes), (3, 2));
        // phase 1: read 10 write 10; pass 1 merges 4+4; pass 2 merges 8+2.
        assert_eq!(out.run_pages, 10);
        assert_eq!(out.pass_pages, vec![8, 10]);
        let s = pool.stats();
        assert_eq!(s.page_reads, 10 + 8 + 10);
        assert_eq!(s.temp_pages_written, 10 + 8 + 10);
        let mut expected = rows.clone();
        expected.sort();
        assert_eq!(out.file.read_all(&mut pool).unwrap(), expected);
        // only the output remains in tmp
        assert_eq!(pool.disk().open_temp_files().len(), 2);
    }
}
