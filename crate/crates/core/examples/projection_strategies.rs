//! Duplicate-eliminating projection four ways, with the I/O each one costs.

use qeval::operators::{project_hash, project_sort_fused, project_sort_naive, project_via_index, ProjectionSpec};
use qeval::storage::Schema;
use qeval::{tuple, Database, DbOptions};

const M: usize = 4;

fn main() -> qeval::Result<()> {
    let dir = tempfile::tempdir()?;
    let options = DbOptions {
        page_size: 512,
        buffers: M,
        ..DbOptions::default()
    };
    let mut db = Database::create(dir.path().join("db"), options)?;
    let schema = Schema::parse("id:int,dept:str8,city:str8,notes:str40")?;
    let rows = (0..3000i64).map(|i| Ok(tuple![i, format!("d{}", i % 7), format!("c{}", i % 11), "..."]));
    db.ingest_rows("E", schema.clone(), rows)?;
    db.build_index("E", &["dept".into(), "city".into()])?;

    let input = db.relation("E")?;
    let index = db.index("E", &["dept".into(), "city".into()])?;
    let spec = ProjectionSpec::new(&schema, &["dept", "city"])?;
    let pool = db.pool_mut();

    let strategies = ["sort (naive)", "sort (fused)", "hash", "index leaves"];
    for name in strategies {
        pool.clear_cache()?;
        pool.reset_stats();
        let (out, report) = match name {
            "sort (naive)" => project_sort_naive(pool, &input, &spec, M)?,
            "sort (fused)" => project_sort_fused(pool, &input, &spec, M)?,
            "hash" => project_hash(pool, &input, &spec, M, 7)?,
            _ => project_via_index(pool, &index, 2)?,
        };
        let s = pool.stats();
        println!(
            "{name:>13}: {} rows, {} reads, {} temp writes, runs={} passes={}",
            out.read_all(pool)?.len(),
            s.page_reads,
            s.temp_pages_written,
            report.runs_created,
            report.merge_passes
        );
        for stage in &report.stages {
            println!("{:>17} {}: {} pages out", "", stage.stage, stage.pages);
        }
        out.delete(pool)?;
    }
    Ok(())
}
