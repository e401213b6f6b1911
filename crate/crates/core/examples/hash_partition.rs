//! Split a relation into M-1 hash partitions and check that equal
//! projected tuples always land together.

use std::collections::BTreeMap;

use qeval::operators::{hash_partition, ProjectionSpec};
use qeval::storage::Schema;
use qeval::{tuple, Database, DbOptions};

fn main() -> qeval::Result<()> {
    let dir = tempfile::tempdir()?;
    let options = DbOptions {
        page_size: 512,
        ..DbOptions::default()
    };
    let mut db = Database::create(dir.path().join("db"), options)?;
    let schema = Schema::parse("k:int,tag:str4,v:int")?;
    db.ingest_rows("R", schema.clone(), (0..4000i64).map(|i| Ok(tuple![i % 97, "t", i])))?;
    let input = db.relation("R")?;
    let spec = ProjectionSpec::new(&schema, &["k", "tag"])?;
    let pool = db.pool_mut();

    let set = hash_partition(pool, &input, &spec, 6, 42)?;
    let mut home = BTreeMap::new();
    for (i, part) in set.partitions.iter().enumerate() {
        let rows = part.read_all(pool)?;
        println!("partition {}: {} tuples in {} pages", i + 1, rows.len(), part.page_count(pool)?);
        for t in rows {
            assert_eq!(*home.entry(t).or_insert(i), i);
        }
    }
    println!("{} distinct values, each in exactly one partition", home.len());
    set.delete(pool)?;
    Ok(())
}
