//! Sort a relation larger than the buffer pool.

use qeval::sort::{external_sort, generate_runs, SortKey};
use qeval::storage::Schema;
use qeval::{tuple, Database, DbOptions};
use rand::seq::SliceRandom;
use rand::SeedableRng;

fn main() -> qeval::Result<()> {
    let dir = tempfile::tempdir()?;
    let options = DbOptions {
        page_size: 512,
        buffers: 4,
        ..DbOptions::default()
    };
    let mut db = Database::create(dir.path().join("db"), options)?;
    let mut keys: Vec<i64> = (0..5000).collect();
    keys.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(1));
    let schema = Schema::parse("k:int,label:str8")?;
    db.ingest_rows("R", schema.clone(), keys.iter().map(|&k| Ok(tuple![k, format!("n{}", k % 100)])))?;

    let input = db.relation("R")?;
    let key = SortKey::new(&schema, &["k"])?;
    let pool = db.pool_mut();
    let b = input.page_count(pool)?;

    for m in [3, 4] {
        let runs = generate_runs(pool, &input, &key, m)?;
        println!("B={b} M={m}: {} initial runs", runs.len());
        for run in runs {
            run.delete(pool)?;
        }
    }

    pool.reset_stats();
    let sorted = external_sort(pool, &input, &key, 4)?;
    println!(
        "runs={} merge_passes={} run_pages={} pass_pages={:?}",
        sorted.runs_created, sorted.merge_passes, sorted.run_pages, sorted.pass_pages
    );
    print!("{}", pool.stats());
    let rows = sorted.file.read_all(pool)?;
    assert!(rows.windows(2).all(|w| w[0] <= w[1]));
    println!("first {:?}, last {:?}", rows[0], rows[rows.len() - 1]);
    sorted.file.delete(pool)?;
    Ok(())
}
