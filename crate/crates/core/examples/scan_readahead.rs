//! Scan the same relation with and without read-ahead and compare the
//! number of read requests issued to disk.

use qeval::operators::seq_scan;
use qeval::storage::Schema;
use qeval::stream::TupleStream;
use qeval::{tuple, Database, DbOptions};

fn main() -> qeval::Result<()> {
    let dir = tempfile::tempdir()?;
    let options = DbOptions {
        page_size: 512,
        ..DbOptions::default()
    };
    let mut db = Database::create(dir.path().join("db"), options)?;
    let schema = Schema::parse("k:int,pad:str40")?;
    db.ingest_rows("R", schema, (0..2000i64).map(|i| Ok(tuple![i, "x"])))?;
    let file = db.relation("R")?;
    println!("R has {} pages", file.page_count(db.pool())?);

    for window in [0, 7] {
        let pool = db.pool_mut();
        pool.clear_cache()?;
        pool.set_readahead_window(window);
        pool.reset_stats();
        let mut scan = seq_scan(&file);
        let mut n = 0;
        while scan.next_tuple(pool)?.is_some() {
            n += 1;
        }
        scan.close(pool)?;
        let s = pool.stats();
        println!(
            "window {window}: {n} tuples, {} pages read in {} requests",
            s.page_reads, s.read_requests
        );
    }
    Ok(())
}
