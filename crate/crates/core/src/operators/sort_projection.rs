use crate::buffer::BufferPool;
use crate::error::Result;
use crate::operators::{
    dedup_adjacent, materialize, project_stream, OperatorReport, ProjectionSpec, StageClock,
};
use crate::sort::{check_budget, external_sort, sort_shaped, RunShaping, SortKey};
use crate::storage::HeapFile;

/// Projection by sort in three steps: scan and project into a T-page
/// temporary table, sort it on every projected attribute, then drop
/// adjacent duplicates while rescanning.
pub fn project_sort_naive(
    pool: &mut BufferPool,
    input: &HeapFile,
    spec: &ProjectionSpec,
    m: usize,
) -> Result<(HeapFile, OperatorReport)> {
    check_budget(pool, m)?;
    let mut report = OperatorReport::default();
    let mut clock = StageClock::start(pool);

    let projected = materialize(pool, &mut project_stream(input.scan(), spec.clone()))?;
    let t = projected.page_count(pool)?;
    report.projected_pages = Some(t);
    report.stages.push(clock.mark(pool, "project", t));

    let sorted = external_sort(pool, &projected, &SortKey::all(spec.output_schema()), m);
    projected.delete(pool)?;
    let sorted = sorted?;
    report.runs_created = sorted.runs_created;
    report.merge_passes = sorted.merge_passes;
    let sorted_pages = sorted.file.page_count(pool)?;
    report.stages.push(clock.mark(pool, "sort", sorted_pages));

    let output = materialize(pool, &mut dedup_adjacent(sorted.file.scan()));
    sorted.file.delete(pool)?;
    let output = output?;
    let pages = output.page_count(pool)?;
    report.stages.push(clock.mark(pool, "dedup", pages));
    Ok((output, report))
}

/// Projection folded into the sort: run generation projects input tuples
/// into a workspace of M output pages and drops adjacent duplicates of
/// each sorted workspace; every merge drops a tuple equal to the last one
/// it wrote. No T-page table is written, and runs are cut where the naive
/// sort of that table would cut them.
pub fn project_sort_fused(
    pool: &mut BufferPool,
    input: &HeapFile,
    spec: &ProjectionSpec,
    m: usize,
) -> Result<(HeapFile, OperatorReport)> {
    let mut clock = StageClock::start(pool);
    let shaping = RunShaping {
        projection: Some((spec.positions().to_vec(), spec.output_schema().clone())),
        dedup: true,
    };
    let sorted = sort_shaped(pool, input, &SortKey::all(spec.output_schema()), m, &shaping)?;
    let pages = sorted.file.page_count(pool)?;
    let report = OperatorReport {
        runs_created: sorted.runs_created,
        merge_passes: sorted.merge_passes,
        stages: vec![clock.mark(pool, "sort", pages)],
        ..OperatorReport::default()
    };
    Ok((sorted.file, report))
}
